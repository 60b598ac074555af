//! Area between sub-level sets of the σ-solutions and the level-set solution
//! on the unit disk, and the ratio deficit/σ.

use soliton_forge::curve_flow::area_deficit;
use soliton_forge::domain::{Domain, EllipsoidDomain};
use soliton_forge::elliptic::SolverConfig;

fn main() -> soliton_forge::Result<()> {
    let disk = Domain::from(EllipsoidDomain::ball(2, 1.0)?);
    println!("sigma,deficit,deficit_over_sigma,quadrature_error");
    for sigma in [0.2, 0.1, 0.05] {
        let d = area_deficit(&disk, sigma, -0.2, 129, &SolverConfig::default())?;
        println!("{sigma},{:.5e},{:.4},{:.1e}", d.deficit, d.deficit / sigma, d.quadrature_error);
    }
    Ok(())
}
