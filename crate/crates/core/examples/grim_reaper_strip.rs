//! Dirichlet problem on a rectangle inside the strip `|x1| < π/2` with
//! boundary data `log sec x1`; the solution reproduces the grim reaper.

use soliton_forge::domain::{BoxDomain, Domain};
use soliton_forge::elliptic::{solve_dirichlet_with, SolverConfig};
use soliton_forge::reference::grim_reaper;
use soliton_forge::stencil::Boundary;

fn main() -> soliton_forge::Result<()> {
    let a = 1.3;
    let domain = Domain::from(BoxDomain::new(vec![-a, -2.0], vec![a, 2.0])?);
    let boundary = Boundary::function(|x| grim_reaper(x[0]).unwrap_or(0.0));
    let (u, stats) = solve_dirichlet_with(&domain, 97, &SolverConfig::with_sigma(1.0), &boundary, None)?;
    let g = u.grid();
    let err = u
        .masked_indices()
        .filter(|&k| g.coord(k)[0].abs() <= 0.5 * a && g.coord(k)[1].abs() <= 1.0)
        .map(|k| (u.values()[k] - grim_reaper(g.coord(k)[0]).unwrap()).abs())
        .fold(0.0, f64::max);
    println!("converged {} in {} iterations", stats.converged, stats.iterations);
    println!("max |u - log sec x1| on the middle half: {err:.3e}");
    Ok(())
}
