//! Discrete convexity diagnostics from central-difference Hessians.

use nalgebra::{Matrix2, Matrix3};
use serde::{Deserialize, Serialize};

use crate::grid::GridFunction;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    /// Linear indices of nodes whose smallest eigenvalue is below `-tol`.
    pub violating: Vec<usize>,
    pub checked_nodes: usize,
    pub tol: f64,
    pub pass: bool,
}

/// Central-difference Hessian at `lin`, or `None` when the stencil leaves the
/// mask.
pub fn hessian_at(u: &GridFunction, lin: usize) -> Option<[[f64; 3]; 3]> {
    let g = u.grid();
    let dim = g.dim();
    let h2 = g.spacing() * g.spacing();
    let c = u.value(lin)?;
    let mut hess = [[0.0; 3]; 3];
    for a in 0..dim {
        let p = u.value(g.neighbor(lin, a, 1)?)?;
        let m = u.value(g.neighbor(lin, a, -1)?)?;
        hess[a][a] = (p - 2.0 * c + m) / h2;
        for b in a + 1..dim {
            let mut off = [0isize; 3];
            let mut corner = |sa: isize, sb: isize| -> Option<f64> {
                off = [0; 3];
                off[a] = sa;
                off[b] = sb;
                u.value(g.offset(lin, &off[..dim])?)
            };
            let pp = corner(1, 1)?;
            let mm = corner(-1, -1)?;
            let pm = corner(1, -1)?;
            let mp = corner(-1, 1)?;
            let v = (pp + mm - pm - mp) / (4.0 * h2);
            hess[a][b] = v;
            hess[b][a] = v;
        }
    }
    Some(hess)
}

/// Eigenvalues of the leading `dim × dim` block, ascending.
pub fn symmetric_eigenvalues(m: &[[f64; 3]; 3], dim: usize) -> Vec<f64> {
    let mut ev: Vec<f64> = if dim == 2 {
        Matrix2::new(m[0][0], m[0][1], m[1][0], m[1][1])
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect()
    } else {
        Matrix3::from_fn(|i, j| m[i][j])
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect()
    };
    ev.sort_by(f64::total_cmp);
    ev
}

/// Smallest Hessian eigenvalue over masked nodes with a full stencil; passes
/// iff it is at least `-tol`.
pub fn convexity_check(u: &GridFunction, tol: f64) -> ConvexityReport {
    convexity_check_where(u, tol, |_| true)
}

/// As [`convexity_check`], restricted to nodes accepted by `filter`.
pub fn convexity_check_where(u: &GridFunction, tol: f64, filter: impl Fn(usize) -> bool) -> ConvexityReport {
    let dim = u.dim();
    let mut min_eigenvalue = f64::INFINITY;
    let mut max_eigenvalue = f64::NEG_INFINITY;
    let mut violating = Vec::new();
    let mut checked = 0;
    for lin in u.masked_indices() {
        if !filter(lin) {
            continue;
        }
        let Some(hess) = hessian_at(u, lin) else { continue };
        let ev = symmetric_eigenvalues(&hess, dim);
        checked += 1;
        min_eigenvalue = min_eigenvalue.min(ev[0]);
        max_eigenvalue = max_eigenvalue.max(ev[dim - 1]);
        if ev[0] < -tol {
            violating.push(lin);
        }
    }
    ConvexityReport {
        min_eigenvalue,
        max_eigenvalue,
        pass: violating.is_empty() && checked > 0,
        violating,
        checked_nodes: checked,
        tol,
    }
}
