//! Discrete Legendre transforms: the involution on `|x|²/2` and the
//! power law `|x|³ ↦ c|y|^{3/2}`.

use soliton_forge::grid::{CartesianGrid, GridFunction};
use soliton_forge::legendre::legendre_transform;

fn main() -> soliton_forge::Result<()> {
    let g = CartesianGrid::new(vec![-1.0, -1.0], 0.025, vec![81, 81])?;
    let u = GridFunction::full(g.clone(), |x| 0.5 * (x[0] * x[0] + x[1] * x[1]))?;
    let once = legendre_transform(&u, &g)?.dual;
    let twice = legendre_transform(&once, &g)?.dual;
    let err = twice
        .masked_indices()
        .map(|k| (twice.values()[k] - u.values()[k]).abs())
        .fold(0.0, f64::max);
    println!("involution error {err:.3e} (spacing {})", g.spacing());

    let c = 2.0 / 3f64.powf(1.5);
    let cube = GridFunction::full(g.clone(), |x| (x[0] * x[0] + x[1] * x[1]).powf(1.5))?;
    let dual_grid = CartesianGrid::new(vec![-2.0, -2.0], 0.05, vec![81, 81])?;
    let d = legendre_transform(&cube, &dual_grid)?.dual;
    let err = d
        .masked_indices()
        .map(|k| {
            let y = dual_grid.coord(k);
            (d.values()[k] - c * (y[0] * y[0] + y[1] * y[1]).powf(0.75)).abs()
        })
        .fold(0.0, f64::max);
    println!("power law: c = {c:.6}, max error {err:.3e}");
    Ok(())
}
