//! Legendre transform, support functions and the dual equation.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{build_grid, Domain};
use crate::error::{invalid, Error, Result};
use crate::geometry::{hessian_at, symmetric_eigenvalues};
use crate::grid::{CartesianGrid, GridFunction};
use crate::linalg::{self, CsrMatrix, LinearMethod};
use crate::elliptic::{SolveStats, SolverConfig};
use crate::stencil::{Boundary, Discretization};

/// A transformed field together with the primal nodes attaining each
/// supremum.
#[derive(Debug, Clone, PartialEq)]
pub struct DualField {
    pub dual: GridFunction,
    pub primal_grid: CartesianGrid,
    /// Primal node attaining the supremum at each dual node (`usize::MAX`
    /// where the dual node is unmasked).
    pub argmax: Vec<usize>,
    /// Convex hull of the discrete gradient range (two dimensions only).
    pub hull: Vec<[f64; 2]>,
}

/// Discrete gradient at a masked node: central where both neighbors are
/// masked, one-sided otherwise.
pub fn discrete_gradient(u: &GridFunction, lin: usize) -> Option<Vec<f64>> {
    let g = u.grid();
    let h = g.spacing();
    let c = u.value(lin)?;
    (0..g.dim())
        .map(|a| {
            let r = g.neighbor(lin, a, 1).and_then(|k| u.value(k));
            let l = g.neighbor(lin, a, -1).and_then(|k| u.value(k));
            match (l, r) {
                (Some(l), Some(r)) => Some((r - l) / (2.0 * h)),
                (None, Some(r)) => Some((r - c) / h),
                (Some(l), None) => Some((c - l) / h),
                (None, None) => None,
            }
        })
        .collect()
}

/// Convex hull (counterclockwise, monotone chain).
pub fn convex_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut p: Vec<[f64; 2]> = points.to_vec();
    p.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    p.dedup();
    if p.len() < 3 {
        return p;
    }
    let cross = |o: &[f64; 2], a: &[f64; 2], b: &[f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for q in &p {
        while lower.len() >= 2 && cross(&lower[lower.len() - 2], &lower[lower.len() - 1], q) <= 0.0 {
            lower.pop();
        }
        lower.push(*q);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for q in p.iter().rev() {
        while upper.len() >= 2 && cross(&upper[upper.len() - 2], &upper[upper.len() - 1], q) <= 0.0 {
            upper.pop();
        }
        upper.push(*q);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Signed distance from `y` to the boundary of a counterclockwise convex
/// polygon, positive inside.
fn inset_distance(hull: &[[f64; 2]], y: &[f64]) -> f64 {
    let n = hull.len();
    (0..n)
        .map(|i| {
            let a = hull[i];
            let b = hull[(i + 1) % n];
            let (ex, ey) = (b[0] - a[0], b[1] - a[1]);
            let len = (ex * ex + ey * ey).sqrt();
            (ex * (y[1] - a[1]) - ey * (y[0] - a[0])) / len
        })
        .fold(f64::INFINITY, f64::min)
}

fn polygon_area(hull: &[[f64; 2]]) -> f64 {
    let n = hull.len();
    0.5 * (0..n)
        .map(|i| hull[i][0] * hull[(i + 1) % n][1] - hull[(i + 1) % n][0] * hull[i][1])
        .sum::<f64>()
}

/// `u*(y) = max over masked x of x·y - u(x)` at every dual node.
///
/// The dual mask is the gradient-range hull shrunk by one dual spacing in two
/// dimensions; in three dimensions a dual node is kept when its maximizer is a
/// primal node whose axis neighbors are all masked.
pub fn legendre_transform(u: &GridFunction, dual_grid: &CartesianGrid) -> Result<DualField> {
    let g = u.grid();
    let dim = g.dim();
    if dual_grid.dim() != dim {
        return Err(invalid("dual grid dimension differs"));
    }
    let nodes: Vec<(usize, [f64; 3], f64)> = u
        .masked_indices()
        .map(|lin| (lin, g.coord(lin), u.values()[lin]))
        .collect();
    if nodes.is_empty() {
        return Err(invalid("empty primal mask"));
    }
    let sup_at = |y: &[f64]| -> (usize, f64) {
        let mut best = (usize::MAX, f64::NEG_INFINITY);
        for (lin, x, v) in &nodes {
            let mut s = -v;
            for a in 0..dim {
                s += x[a] * y[a];
            }
            if s > best.1 {
                best = (*lin, s);
            }
        }
        best
    };

    let mut hull = Vec::new();
    let candidate: Vec<bool> = if dim == 2 {
        let grads: Vec<[f64; 2]> = u
            .masked_indices()
            .filter_map(|lin| discrete_gradient(u, lin).map(|p| [p[0], p[1]]))
            .collect();
        hull = convex_hull(&grads);
        let h = dual_grid.spacing();
        let degenerate = hull.len() < 3 || polygon_area(&hull) < h * h;
        if degenerate {
            let mut m = vec![false; dual_grid.len()];
            let c = if hull.is_empty() {
                [0.0, 0.0]
            } else {
                let k = hull.len() as f64;
                [hull.iter().map(|p| p[0]).sum::<f64>() / k, hull.iter().map(|p| p[1]).sum::<f64>() / k]
            };
            if let Some(k) = dual_grid.nearest(&c) {
                m[k] = true;
            }
            m
        } else {
            (0..dual_grid.len())
                .map(|k| inset_distance(&hull, &dual_grid.coord(k)[..2]) >= h)
                .collect()
        }
    } else {
        vec![true; dual_grid.len()]
    };

    let results: Vec<(usize, f64)> = (0..dual_grid.len())
        .into_par_iter()
        .map(|k| {
            if !candidate[k] {
                return (usize::MAX, f64::NAN);
            }
            sup_at(&dual_grid.coord(k)[..dim])
        })
        .collect();

    let mut values = vec![f64::NAN; dual_grid.len()];
    let mut mask = vec![false; dual_grid.len()];
    let mut argmax = vec![usize::MAX; dual_grid.len()];
    for (k, (lin, v)) in results.into_iter().enumerate() {
        if lin == usize::MAX {
            continue;
        }
        let keep = if dim == 2 {
            true
        } else {
            (0..dim).all(|a| {
                [1, -1].iter().all(|&s| g.neighbor(lin, a, s).map(|nb| u.is_masked(nb)).unwrap_or(false))
            })
        };
        if keep {
            values[k] = v;
            mask[k] = true;
            argmax[k] = lin;
        }
    }
    Ok(DualField {
        dual: GridFunction::new(dual_grid.clone(), values, mask)?,
        primal_grid: g.clone(),
        argmax,
        hull,
    })
}

/// Legendre transform with a local second-order correction: after the
/// discrete maximizer `y` is found, the supremum of the local quadratic model
/// of `v` around `y` is taken. Exact for quadratics.
pub fn legendre_transform_refined(v: &GridFunction, target: &CartesianGrid) -> Result<DualField> {
    let mut field = legendre_transform(v, target)?;
    let g = v.grid();
    let dim = g.dim();
    let mut values = field.dual.values().to_vec();
    for k in 0..target.len() {
        let lin = field.argmax[k];
        if lin == usize::MAX {
            continue;
        }
        let (Some(hess), Some(grad)) = (hessian_at(v, lin), discrete_gradient(v, lin)) else { continue };
        let x = target.coord(k);
        let y0 = g.coord(lin);
        let hm = nalgebra::DMatrix::from_fn(dim, dim, |i, j| hess[i][j]);
        let Some(chol) = hm.clone().cholesky() else { continue };
        let rhs = nalgebra::DVector::from_fn(dim, |i, _| x[i] - grad[i]);
        let d = chol.solve(&rhs);
        // Keep the correction within the maximizer's cell neighborhood.
        if d.iter().any(|c| c.abs() > 1.5 * g.spacing()) {
            continue;
        }
        let quad = 0.5 * (d.transpose() * &hm * &d)[(0, 0)];
        let model = v.values()[lin] + (0..dim).map(|i| grad[i] * d[i]).sum::<f64>() + quad;
        let value = (0..dim).map(|i| x[i] * (y0[i] + d[i])).sum::<f64>() - model;
        values[k] = value.max(values[k]);
    }
    field.dual = field.dual.with_values(values)?;
    Ok(field)
}

/// `F_k(λ)`: the `k`-th elementary symmetric polynomial.
pub fn elementary_symmetric(lambda: &[f64], k: usize) -> Result<f64> {
    if k == 0 || k > lambda.len() {
        return Err(invalid(format!("k = {k} outside 1..={}", lambda.len())));
    }
    // Coefficients of prod (1 + λ_i t) up to degree k.
    let mut e = vec![0.0; k + 1];
    e[0] = 1.0;
    for &l in lambda {
        for j in (1..=k).rev() {
            e[j] += l * e[j - 1];
        }
    }
    Ok(e[k])
}

fn cofactor(h: &[[f64; 3]; 3], dim: usize) -> [[f64; 3]; 3] {
    let mut c = [[0.0; 3]; 3];
    if dim == 2 {
        c[0][0] = h[1][1];
        c[1][1] = h[0][0];
        c[0][1] = -h[1][0];
        c[1][0] = -h[0][1];
    } else {
        for i in 0..3 {
            for j in 0..3 {
                let (i1, i2) = ((i + 1) % 3, (i + 2) % 3);
                let (j1, j2) = ((j + 1) % 3, (j + 2) % 3);
                c[i][j] = h[i1][j1] * h[i2][j2] - h[i1][j2] * h[i2][j1];
            }
        }
    }
    c
}

fn determinant(h: &[[f64; 3]; 3], dim: usize) -> f64 {
    if dim == 2 {
        h[0][0] * h[1][1] - h[0][1] * h[1][0]
    } else {
        let c = cofactor(h, 3);
        (0..3).map(|j| h[0][j] * c[0][j]).sum()
    }
}

/// `det D²v - Σ (δ_ij - y_i y_j / (σ + |y|²)) F^{ij}[v]` at a point.
pub fn dual_operator_value(y: &[f64], hess: &[[f64; 3]; 3], sigma: f64) -> f64 {
    let dim = y.len();
    let cof = cofactor(hess, dim);
    let s = sigma + y.iter().map(|c| c * c).sum::<f64>();
    let mut tr = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            let a = if i == j { 1.0 } else { 0.0 } - y[i] * y[j] / s;
            tr += a * cof[i][j];
        }
    }
    determinant(hess, dim) - tr
}

/// Nodewise dual residual by central differences. Nodes whose Hessian is not
/// positive definite, or whose stencil leaves the mask, are left unmasked.
pub fn dual_equation_residual(v: &GridFunction, sigma: f64) -> Result<GridFunction> {
    if !(sigma > 0.0) {
        return Err(invalid("dual residual needs sigma > 0"));
    }
    let g = v.grid();
    let dim = g.dim();
    let mut values = vec![f64::NAN; g.len()];
    let mut mask = vec![false; g.len()];
    for lin in v.masked_indices() {
        let Some(h) = hessian_at(v, lin) else { continue };
        if symmetric_eigenvalues(&h, dim)[0] <= 0.0 {
            continue;
        }
        let y = g.coord(lin);
        values[lin] = dual_operator_value(&y[..dim], &h, sigma);
        mask[lin] = true;
    }
    GridFunction::new(g.clone(), values, mask)
}

/// Support function samples on the chart `p = (x, -1)/sqrt(1 + |x|²)` of the
/// lower hemisphere, taken on a uniform grid of chart points `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportSamples {
    /// Chart dimension (dimension of the graph's base).
    pub dim: usize,
    pub origin: Vec<f64>,
    pub spacing: f64,
    pub counts: Vec<usize>,
    /// Row-major values, last axis fastest.
    pub values: Vec<f64>,
}

/// Chart samples beyond this radius are excluded from curvature diagnostics.
pub const CHART_RADIUS_LIMIT: f64 = 10.0;

impl SupportSamples {
    /// Samples a closed-form support function given in chart coordinates.
    pub fn from_fn(dim: usize, count: usize, half_width: f64, w: impl Fn(&[f64]) -> f64) -> Result<Self> {
        if count < 8 {
            return Err(invalid(format!("{count} directions per axis; at least 8 required")));
        }
        if !(1..=3).contains(&dim) || !(half_width > 0.0) {
            return Err(invalid("chart dimension must be 1..=3 and half width positive"));
        }
        let spacing = 2.0 * half_width / (count - 1) as f64;
        let origin = vec![-half_width; dim];
        let counts = vec![count; dim];
        let mut s = Self {
            dim,
            origin,
            spacing,
            counts,
            values: Vec::new(),
        };
        s.values = (0..s.len()).map(|k| w(&s.chart_point(k))).collect();
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn multi(&self, mut k: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim];
        for a in (0..self.dim).rev() {
            idx[a] = k % self.counts[a];
            k /= self.counts[a];
        }
        idx
    }

    fn linear(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.counts).fold(0, |acc, (&i, &c)| acc * c + i)
    }

    pub fn chart_point(&self, k: usize) -> Vec<f64> {
        self.multi(k)
            .iter()
            .zip(&self.origin)
            .map(|(&i, o)| o + i as f64 * self.spacing)
            .collect()
    }

    /// Unit direction `(x, -1)/sqrt(1 + |x|²)`.
    pub fn direction(&self, k: usize) -> Vec<f64> {
        let x = self.chart_point(k);
        let r = (1.0 + x.iter().map(|c| c * c).sum::<f64>()).sqrt();
        x.iter().map(|c| c / r).chain(std::iter::once(-1.0 / r)).collect()
    }

    /// CSV with columns `x_1, ..., x_n, w`.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        let header: Vec<String> = (1..=self.dim).map(|a| format!("x{a}")).chain(std::iter::once("w".into())).collect();
        writeln!(out, "{}", header.join(","))?;
        for k in 0..self.len() {
            let x = self.chart_point(k);
            let cols: Vec<String> = x.iter().map(|c| format!("{c:e}")).chain(std::iter::once(format!("{:e}", self.values[k]))).collect();
            writeln!(out, "{}", cols.join(","))?;
        }
        Ok(())
    }
}

/// Support function of the graph of `u` over its mask: for each chart point
/// `x`, `w = max over nodes of (x·y - u(y)) / sqrt(1 + |x|²)`.
pub fn support_function(u: &GridFunction, count: usize, half_width: f64) -> Result<SupportSamples> {
    let g = u.grid();
    let dim = g.dim();
    let nodes: Vec<([f64; 3], f64)> = u.masked_indices().map(|lin| (g.coord(lin), u.values()[lin])).collect();
    if nodes.is_empty() {
        return Err(invalid("empty mask"));
    }
    let mut s = SupportSamples::from_fn(dim, count, half_width, |_| 0.0)?;
    s.values = (0..s.len())
        .into_par_iter()
        .map(|k| {
            let x = s.chart_point(k);
            let r = (1.0 + x.iter().map(|c| c * c).sum::<f64>()).sqrt();
            let best = nodes
                .iter()
                .map(|(y, v)| (0..dim).map(|a| x[a] * y[a]).sum::<f64>() - v)
                .fold(f64::NEG_INFINITY, f64::max);
            best / r
        })
        .collect();
    Ok(s)
}

/// Per-sample residual of the Hessian quotient equation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuotientSample {
    pub chart: Vec<f64>,
    /// Principal radii: eigenvalues of the restricted `∇²w + w I`.
    pub radii: Vec<f64>,
    /// `F_n / F_{n-1} + 1 / p_{n+1}`; `None` when `F_{n-1} <= 0`.
    pub residual: Option<f64>,
}

/// Residual of `F_n[w]/F_{n-1}[w] = -1/p_{n+1}` at interior chart samples
/// within [`CHART_RADIUS_LIMIT`].
///
/// The one-homogeneous extension `W(X) = |X| w(X/|X|)` restricted to the plane
/// `X_{n+1} = -1` is `v(x) = r w(p)` with `r = sqrt(1 + |x|²)`. Its Hessian
/// `D²v` is the Hessian of `W` along that plane; projecting plane vectors onto
/// the tangent space `p^⊥` has Gram matrix `G = I - x xᵀ / r²`. The principal
/// radii are therefore the eigenvalues of `r G^{-1} D²v` with
/// `G^{-1} = I + x xᵀ`.
pub fn hessian_quotient_residual(w: &SupportSamples) -> Vec<QuotientSample> {
    let n = w.dim;
    let h = w.spacing;
    let v: Vec<f64> = (0..w.len())
        .map(|k| {
            let x = w.chart_point(k);
            (1.0 + x.iter().map(|c| c * c).sum::<f64>()).sqrt() * w.values[k]
        })
        .collect();
    let mut out = Vec::new();
    for k in 0..w.len() {
        let idx = w.multi(k);
        if idx.iter().zip(&w.counts).any(|(&i, &c)| i == 0 || i + 1 == c) {
            continue;
        }
        let x = w.chart_point(k);
        let x2: f64 = x.iter().map(|c| c * c).sum();
        if x2.sqrt() > CHART_RADIUS_LIMIT {
            continue;
        }
        let at = |off: &[isize]| -> f64 {
            let j: Vec<usize> = idx.iter().zip(off).map(|(&i, &o)| (i as isize + o) as usize).collect();
            v[w.linear(&j)]
        };
        let mut hess = nalgebra::DMatrix::zeros(n, n);
        for a in 0..n {
            let mut e = vec![0isize; n];
            e[a] = 1;
            let p = at(&e);
            e[a] = -1;
            let m = at(&e);
            hess[(a, a)] = (p - 2.0 * v[k] + m) / (h * h);
            for b in a + 1..n {
                let mut e = vec![0isize; n];
                let mut corner = |sa: isize, sb: isize| {
                    e[a] = sa;
                    e[b] = sb;
                    at(&e)
                };
                let val = (corner(1, 1) + corner(-1, -1) - corner(1, -1) - corner(-1, 1)) / (4.0 * h * h);
                hess[(a, b)] = val;
                hess[(b, a)] = val;
            }
        }
        let xv = nalgebra::DVector::from_column_slice(&x);
        let ginv = nalgebra::DMatrix::identity(n, n) + &xv * xv.transpose();
        let r = (1.0 + x2).sqrt();
        // Eigenvalues of r G^{-1} D²v equal those of the symmetric
        // r G^{-1/2} D²v G^{-1/2}.
        let se = ginv.clone().symmetric_eigen();
        let sq = &se.eigenvectors
            * nalgebra::DMatrix::from_diagonal(&se.eigenvalues.map(|e| e.sqrt()))
            * se.eigenvectors.transpose();
        let m = (&sq * &hess * &sq) * r;
        let mut radii: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        radii.sort_by(f64::total_cmp);
        let fn_ = elementary_symmetric(&radii, n).unwrap();
        let fn1 = if n == 1 { 1.0 } else { elementary_symmetric(&radii, n - 1).unwrap() };
        let residual = (fn1 > 0.0).then(|| fn_ / fn1 - r);
        out.push(QuotientSample { chart: x, radii, residual });
    }
    out
}

/// Newton solver for `det D²v = Σ (δ_ij - y_i y_j/(σ + |y|²)) F^{ij}[v]` with
/// `v = φ` on the boundary, in two dimensions.
pub fn solve_dual_dirichlet(
    domain: &Domain,
    resolution: usize,
    boundary: &Boundary,
    config: &SolverConfig,
) -> Result<(GridFunction, SolveStats)> {
    let (grid, mask) = build_grid(domain, resolution)?;
    solve_dual_on_grid(domain, grid, mask, boundary, config)
}

pub fn solve_dual_on_grid(
    domain: &Domain,
    grid: CartesianGrid,
    mask: Vec<bool>,
    boundary: &Boundary,
    config: &SolverConfig,
) -> Result<(GridFunction, SolveStats)> {
    config.validate()?;
    if domain.dim() != 2 {
        return Err(invalid("the dual solver is two-dimensional"));
    }
    let sigma = config.sigma_eff();
    let disc = Discretization::new(domain, grid, mask, boundary)?;
    let n = disc.unknowns();
    let coords: Vec<[f64; 2]> = (0..n)
        .map(|i| {
            let c = disc.grid().coord(disc.node_of(i));
            [c[0], c[1]]
        })
        .collect();
    let a_at = |y: &[f64; 2]| -> [[f64; 3]; 3] {
        let s = sigma + y[0] * y[0] + y[1] * y[1];
        let mut a = [[0.0; 3]; 3];
        for i in 0..2 {
            for j in 0..2 {
                a[i][j] = if i == j { 1.0 } else { 0.0 } - y[i] * y[j] / s;
            }
        }
        a
    };
    let residual = |x: &[f64]| -> Vec<f64> {
        (0..n)
            .into_par_iter()
            .map(|i| dual_operator_value(&coords[i], &disc.hessian(x, i), sigma))
            .collect()
    };
    let jacobian = |x: &[f64]| -> CsrMatrix {
        let rows: Vec<Vec<(usize, usize, f64)>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let h = disc.hessian(x, i);
                let ch = cofactor(&h, 2);
                let ca = cofactor(&a_at(&coords[i]), 2);
                let mut row = Vec::with_capacity(16);
                for k in 0..2 {
                    for l in k..2 {
                        let c = ch[k][l] - ca[k][l];
                        let c = if k == l { c } else { 2.0 * c };
                        for &(j, w) in &disc.second(i, k, l).terms {
                            row.push((i, j, c * w));
                        }
                    }
                }
                row
            })
            .collect();
        CsrMatrix::from_triplets(n, &rows.into_iter().flatten().collect::<Vec<_>>())
    };
    let min_eig = |x: &[f64]| -> f64 {
        (0..n)
            .into_par_iter()
            .filter(|&i| disc.is_interior(i))
            .map(|i| symmetric_eigenvalues(&disc.hessian(x, i), 2)[0])
            .reduce(|| f64::INFINITY, f64::min)
    };
    let half = domain.half_widths();
    let center = domain.center();
    // Paraboloid vanishing on the boundary with Hessian above the identity.
    let bump: Vec<f64> = (0..n)
        .map(|i| {
            let q: f64 = (0..2).map(|a| ((coords[i][a] - center[a]) / half[a]).powi(2)).sum();
            q - 1.0
        })
        .collect();
    let c0 = half.iter().fold(0.0f64, |m, a| m.max(a * a));
    let mut x: Vec<f64> = (0..n)
        .map(|i| boundary.value(&coords[i]) + c0 * bump[i])
        .collect();
    let norm = |r: &[f64]| r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut r = residual(&x);
    let mut rn = norm(&r);
    let mut eig = min_eig(&x);
    let mut iterations = 0;
    let mut safeguards = 0;
    let floor = 1e-8;
    while rn > config.tolerance && iterations < config.max_iterations {
        iterations += 1;
        let j = jacobian(&x);
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let delta = linalg::solve(&j, &rhs, LinearMethod::Direct)?;
        let mut lambda = 1.0;
        let mut accepted = false;
        while lambda >= 2f64.powi(-20) {
            let trial: Vec<f64> = x.iter().zip(&delta).map(|(a, d)| a + lambda * d).collect();
            let te = min_eig(&trial);
            if te >= floor {
                let rt = residual(&trial);
                let rtn = norm(&rt);
                if rtn.is_finite() && rtn < rn {
                    x = trial;
                    r = rt;
                    rn = rtn;
                    eig = te;
                    accepted = true;
                    break;
                }
            }
            lambda *= config.damping;
        }
        if !accepted {
            // Convexity safeguard: lift by a boundary-preserving paraboloid.
            if safeguards >= 10 {
                break;
            }
            safeguards += 1;
            let c = 0.1 * c0;
            x.iter_mut().zip(&bump).for_each(|(v, b)| *v += c * b);
            r = residual(&x);
            rn = norm(&r);
            eig = min_eig(&x);
        }
    }
    if eig < floor && rn > config.tolerance {
        return Err(Error::ConvexityLoss(format!(
            "dual iterate lost uniform convexity (min eigenvalue {eig:.3e}, residual {rn:.3e})"
        )));
    }
    Ok((
        disc.to_grid_function(&x)?,
        SolveStats {
            iterations,
            final_residual: rn,
            min_hessian_eigenvalue: eig,
            converged: rn <= config.tolerance,
            picard_steps: safeguards,
            sigma: config.sigma,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::EllipsoidDomain;

    fn square(half: f64, n: usize) -> CartesianGrid {
        let h = 2.0 * half / (n - 1) as f64;
        CartesianGrid::new(vec![-half, -half], h, vec![n, n]).unwrap()
    }

    #[test]
    fn quadratic_transform() {
        let g = square(1.0, 81);
        let h = g.spacing();
        let u = GridFunction::full(g.clone(), |x| 0.5 * (x[0] * x[0] + x[1] * x[1])).unwrap();
        let d = legendre_transform(&u, &g).unwrap();
        let mut count = 0;
        for k in d.dual.masked_indices() {
            let y = g.coord(k);
            let exact = 0.5 * (y[0] * y[0] + y[1] * y[1]);
            assert!((d.dual.values()[k] - exact).abs() <= h * h);
            count += 1;
        }
        assert!(count > 1000);
    }

    #[test]
    fn linear_transform_is_a_point() {
        let g = square(1.0, 21);
        let u = GridFunction::full(g.clone(), |x| 0.3 * x[0] - 0.2 * x[1]).unwrap();
        let d = legendre_transform(&u, &g).unwrap();
        assert_eq!(d.dual.masked_count(), 1);
        let k = d.dual.masked_indices().next().unwrap();
        let y = g.coord(k);
        assert!((y[0] - 0.3).abs() <= g.spacing() && (y[1] + 0.2).abs() <= g.spacing());
    }

    #[test]
    fn symmetric_polynomials() {
        assert_eq!(elementary_symmetric(&[1.0, 1.0, 1.0], 2).unwrap(), 3.0);
        assert_eq!(elementary_symmetric(&[2.0, 3.0, 5.0], 3).unwrap(), 30.0);
        assert!(elementary_symmetric(&[1.0], 0).is_err());
        assert!(elementary_symmetric(&[1.0], 2).is_err());
    }

    #[test]
    fn dual_residual_of_paraboloid() {
        let g = square(1.0, 21);
        let v = GridFunction::full(g.clone(), |y| 0.5 * (y[0] * y[0] + y[1] * y[1])).unwrap();
        let r = dual_equation_residual(&v, 1.0).unwrap();
        for k in r.masked_indices() {
            let y = g.coord(k);
            let q = y[0] * y[0] + y[1] * y[1];
            assert!((r.values()[k] - (1.0 - (2.0 - q / (1.0 + q)))).abs() < 1e-10);
        }
    }

    #[test]
    fn sphere_radii() {
        // Lower hemisphere of the sphere of radius 2 centered at the origin:
        // its support function is the constant 2.
        let s = SupportSamples::from_fn(2, 81, 2.0, |_| 2.0).unwrap();
        for q in hessian_quotient_residual(&s) {
            for r in &q.radii {
                assert!((r - 2.0).abs() < 5e-3, "{:?}", q.radii);
            }
        }
        assert!(SupportSamples::from_fn(2, 7, 1.0, |_| 1.0).is_err());
    }

    #[test]
    fn grim_reaper_support_solves_quotient_equation() {
        // Curve case: chart is one-dimensional.
        let s = SupportSamples::from_fn(1, 1001, 5.0, |x| {
            let t = x[0];
            (t * t.atan() - 0.5 * (1.0 + t * t).ln()) / (1.0 + t * t).sqrt()
        })
        .unwrap();
        let q = hessian_quotient_residual(&s);
        assert!(q.len() > 900);
        let worst = q.iter().map(|q| q.residual.unwrap().abs()).fold(0.0, f64::max);
        assert!(worst <= 1e-3, "{worst}");
    }

    #[test]
    fn dual_disk_solve_converges() {
        let d: Domain = EllipsoidDomain::ball(2, 1.0).unwrap().into();
        let (v, stats) = solve_dual_dirichlet(&d, 33, &Boundary::Constant(0.0), &SolverConfig::with_sigma(1.0)).unwrap();
        assert!(stats.converged, "{stats:?}");
        let (k, _) = v.argmin().unwrap();
        let c = v.grid().coord(k);
        assert!(c[0].abs() < 1e-12 && c[1].abs() < 1e-12);
    }
}
