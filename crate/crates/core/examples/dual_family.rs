//! Dual construction: solves the Legendre-dual equation on ellipses, maps the
//! result back and checks that the level curves stay non-round.

use soliton_forge::construction::{build_family, primal_level_curves, ShootingMode, ShootingTolerances};
use soliton_forge::elliptic::{operator_residual, OperatorResidual, ResidualMode};
use soliton_forge::geometry::minimum_ellipsoid;

fn main() -> soliton_forge::Result<()> {
    let family = build_family(2, 3.0, &[2.0], ShootingMode::Dual, &ShootingTolerances::default())?;
    for e in &family.entries {
        let dual = e.dual.as_ref().expect("dual member");
        let curves = primal_level_curves(dual, e.shooting.depth - 1.0)?;
        let points: Vec<Vec<f64>> = curves.iter().flat_map(|c| c.vertices.clone()).collect();
        let ratio = minimum_ellipsoid(&points)?.axis_ratio();
        println!("K = {}: r = {:.4}, t = {:.4}, level-curve axis ratio {ratio:.3}", e.k, e.shooting.r, e.shooting.t);
        if let OperatorResidual::Full(res) = operator_residual(&e.w, 1.0, ResidualMode::Full)? {
            let worst = res.masked_indices().map(|k| res.values()[k].abs()).fold(0.0, f64::max);
            println!("back-transformed residual {worst:.3e} at spacing {:.3}", e.w.grid().spacing());
        }
    }
    Ok(())
}
