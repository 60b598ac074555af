//! Product construction in dimension four: a profile in `(|x̂|, |x̃|)` tuned
//! for depth and aspect, compared with the paraboloid `|x|²/2`.

use soliton_forge::construction::{product_construction, ShootingTolerances};

fn main() -> soliton_forge::Result<()> {
    let tol = ShootingTolerances {
        resolution: 65,
        ..Default::default()
    };
    let p = product_construction(4, 2.0, 2.0, &tol)?;
    let s = &p.shooting;
    println!("n = {}: r = {:.4}, t = {:.4}, depth {:.4}, aspect {:.4}", p.n, s.r, s.t, s.depth, s.aspect);
    println!("max (w - |x|²/2) = {:.4e}", p.comparison_excess);
    Ok(())
}
