//! Blow-down analysis of solutions and checks of their quantitative
//! estimates.

mod estimates;
mod rays;
mod suite;

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{CartesianGrid, GridFunction, ScalarField};
use crate::reference::eta_profile;

pub use estimates::{
    aspect_bounds_check, growth_fit, log_concavity_check, pinch_ode, pinch_width_check, radial_deviation,
    width_product_check, AspectKind, PinchOde, RadialMode, RadialReference, GROWTH_STABILITY, PINCH_SLOPE_LIMIT,
    SMALL_DELTA,
};
pub use rays::{ray_exit, support_extent, RayHit};
pub use suite::{verify_suite, VerifyConfig};

/// Multiplier in the discretization allowance carried by every inequality
/// check.
pub const SLACK_FACTOR: f64 = 4.0;

/// `SLACK_FACTOR · (spacing + quadrature)`.
pub fn slack_allowance(spacing: f64, quadrature: f64) -> f64 {
    SLACK_FACTOR * (spacing + quadrature)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateSample {
    pub h: f64,
    pub measured: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub name: String,
    pub samples: Vec<EstimateSample>,
    /// Worst bound satisfaction over the samples; negative means violated.
    pub margin: f64,
    pub slack: f64,
    pub pass: bool,
    pub fitted: BTreeMap<String, f64>,
    /// Outcome label for checks with more than one admissible outcome.
    pub branch: Option<String>,
}

impl EstimateReport {
    pub fn new(name: impl Into<String>, samples: Vec<EstimateSample>, margin: f64, slack: f64) -> Self {
        let margin = if margin.is_nan() { f64::MIN } else { margin.clamp(f64::MIN, f64::MAX) };
        Self {
            name: name.into(),
            samples,
            margin,
            slack,
            pass: margin >= -slack,
            fitted: BTreeMap::new(),
            branch: None,
        }
    }

    pub fn with_fitted(mut self, key: &str, value: f64) -> Self {
        if value.is_finite() {
            self.fitted.insert(key.to_string(), value);
        }
        self
    }

    pub fn with_branch(mut self, branch: impl Into<String>) -> Self {
        self.branch = Some(branch.into());
        self
    }

    /// Report that fails without samples, e.g. when the check could not run.
    pub fn failed(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Self::new(name, Vec::new(), -1.0, 0.0).with_branch(reason)
    }

    /// Negative control: passes exactly when `self` is violated beyond its
    /// slack.
    pub fn expect_violation(self, name: impl Into<String>) -> Self {
        let margin = if self.margin == f64::MIN { f64::MAX } else { -self.margin - 2.0 * self.slack };
        Self {
            name: name.into(),
            margin,
            pass: margin >= -self.slack,
            ..self
        }
    }
}

/// Writes the `check,margin,pass` table.
pub fn write_summary(reports: &[EstimateReport], mut out: impl Write) -> Result<()> {
    writeln!(out, "check,margin,pass")?;
    for r in reports {
        writeln!(out, "{},{:.6e},{}", r.name, r.margin, r.pass)?;
    }
    Ok(())
}

/// `x ↦ u(√h x) / h`.
#[derive(Debug, Clone)]
pub struct Rescaled<F> {
    pub inner: F,
    pub h: f64,
}

pub fn rescaled<F: ScalarField>(inner: F, h: f64) -> Result<Rescaled<F>> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(invalid(format!("scale {h} must be positive")));
    }
    Ok(Rescaled { inner, h })
}

impl<F: ScalarField> ScalarField for Rescaled<F> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn eval(&self, x: &[f64]) -> Option<f64> {
        let s = self.h.sqrt();
        let y: Vec<f64> = x.iter().map(|c| c * s).collect();
        self.inner.eval(&y).map(|v| v / self.h)
    }
}

/// Unit-scale sampling grid for [`blowdown`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowdownGrid {
    pub half_width: f64,
    pub resolution: usize,
}

impl Default for BlowdownGrid {
    fn default() -> Self {
        Self {
            half_width: 1.25,
            resolution: 51,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Blowdown {
    pub h: f64,
    pub field: GridFunction,
    /// Some node of the closed unit ball lies outside the input's coverage.
    pub truncated: bool,
}

/// Samples `u_h(x) = u(√h x) / h` on a cube around the origin.
pub fn blowdown<F: ScalarField>(u: &F, h: f64, grid: &BlowdownGrid) -> Result<Blowdown> {
    let dim = u.dim();
    if grid.resolution < 3 || !(grid.half_width > 0.0) {
        return Err(invalid("blow-down grid needs three nodes and a positive width"));
    }
    let r = rescaled(u, h)?;
    let spacing = 2.0 * grid.half_width / (grid.resolution - 1) as f64;
    let g = CartesianGrid::new(vec![-grid.half_width; dim], spacing, vec![grid.resolution; dim])?;
    let mut values = vec![0.0; g.len()];
    let mut mask = vec![false; g.len()];
    let mut truncated = false;
    for lin in 0..g.len() {
        let x = g.coord(lin);
        match r.eval(&x[..dim]) {
            Some(v) => {
                values[lin] = v;
                mask[lin] = true;
            }
            None => truncated |= x[..dim].iter().map(|c| c * c).sum::<f64>() <= 1.0 + 1e-12,
        }
    }
    Ok(Blowdown {
        h,
        field: GridFunction::new(g, values, mask)?,
        truncated,
    })
}

/// Settings of [`classify_profile`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyOptions {
    /// Rays longer than this count as unbounded.
    pub reach: f64,
    /// A direction is null when its extent exceeds this multiple of the
    /// median bounded extent.
    pub null_factor: f64,
    /// Relative band around the threshold reported as indeterminate.
    pub band: f64,
    /// Lattice points per axis across the unit ball.
    pub lattice: usize,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            reach: 20.0,
            null_factor: 8.0,
            band: 0.1,
            lattice: 41,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowdownReport {
    pub h_schedule: Vec<f64>,
    /// Detected rank, `None` when indeterminate.
    pub k: Option<usize>,
    pub indeterminate: bool,
    /// Row-major orthogonal matrix; column `i` is the `i`-th profile axis,
    /// null directions last.
    pub rotation: Vec<Vec<f64>>,
    /// Extent of `{u_h < 1}` along each column of `rotation` at the largest h.
    pub extents: Vec<f64>,
    /// `sup |u_h - η_k ∘ Rᵀ|` over the unit ball, per h.
    pub errors: Vec<f64>,
    pub truncated: Vec<bool>,
    /// Distance between the bounded-block projectors at the first and last h.
    pub rotation_drift: f64,
}

impl BlowdownReport {
    /// Largest deviation of `RᵀR` from the identity.
    pub fn orthogonality_error(&self) -> f64 {
        let n = self.rotation.len();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let dot: f64 = (0..n).map(|a| self.rotation[a][i] * self.rotation[a][j]).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }

    /// Errors are non-increasing along the schedule, up to `rel_slack`.
    pub fn errors_monotone(&self, rel_slack: f64) -> bool {
        self.errors.windows(2).all(|w| w[1] <= w[0] * (1.0 + rel_slack))
    }
}

/// Lattice points of the closed unit ball.
fn unit_ball_lattice(dim: usize, per_axis: usize) -> Vec<Vec<f64>> {
    let step = 2.0 / (per_axis - 1) as f64;
    let total = per_axis.pow(dim as u32);
    (0..total)
        .filter_map(|mut lin| {
            let mut x = vec![0.0; dim];
            for c in x.iter_mut().rev() {
                *c = -1.0 + step * (lin % per_axis) as f64;
                lin /= per_axis;
            }
            (x.iter().map(|c| c * c).sum::<f64>() <= 1.0 + 1e-12).then_some(x)
        })
        .collect()
}

/// Least-squares quadratic fit `c + g·x + ½ xᵀAx`; returns `A`.
fn fitted_hessian(points: &[Vec<f64>], values: &[f64]) -> Result<DMatrix<f64>> {
    let dim = points[0].len();
    let pairs: Vec<(usize, usize)> = (0..dim).flat_map(|i| (i..dim).map(move |j| (i, j))).collect();
    let cols = 1 + dim + pairs.len();
    if points.len() < cols {
        return Err(Error::DegenerateInput("too few samples for a quadratic fit".into()));
    }
    let a = DMatrix::from_fn(points.len(), cols, |r, c| {
        let x = &points[r];
        if c == 0 {
            1.0
        } else if c <= dim {
            x[c - 1]
        } else {
            let (i, j) = pairs[c - 1 - dim];
            if i == j {
                0.5 * x[i] * x[i]
            } else {
                x[i] * x[j]
            }
        }
    });
    let b = DVector::from_column_slice(values);
    let coef = a
        .svd(true, true)
        .solve(&b, 1e-14)
        .map_err(|e| Error::Numerical(format!("quadratic fit: {e}")))?;
    let mut hess = DMatrix::zeros(dim, dim);
    for (p, &(i, j)) in pairs.iter().enumerate() {
        hess[(i, j)] = coef[1 + dim + p];
        hess[(j, i)] = coef[1 + dim + p];
    }
    Ok(hess)
}

struct Orientation {
    axes: Vec<Vec<f64>>,
    extents: Vec<f64>,
    bounded: Vec<bool>,
    indeterminate: bool,
}

fn orient<F: ScalarField>(u: &F, h: f64, opts: &ClassifyOptions, lattice: &[Vec<f64>]) -> Result<Orientation> {
    let dim = u.dim();
    let field = rescaled(u, h)?;
    let (pts, vals): (Vec<Vec<f64>>, Vec<f64>) = lattice
        .iter()
        .filter_map(|x| field.eval(x).map(|v| (x.clone(), v)))
        .unzip();
    let hess = fitted_hessian(&pts, &vals)?;
    let eig = SymmetricEigen::new(hess);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut axes: Vec<Vec<f64>> = order
        .iter()
        .map(|&c| {
            let mut v: Vec<f64> = eig.eigenvectors.column(c).iter().copied().collect();
            // Sign convention: the largest-magnitude component is positive.
            let big = v.iter().copied().fold(0.0f64, |m, c| if c.abs() > m.abs() { c } else { m });
            if big < 0.0 {
                v.iter_mut().for_each(|c| *c = -*c);
            }
            v
        })
        .collect();
    let mut extents = Vec::with_capacity(dim);
    let mut coverage_limited = Vec::with_capacity(dim);
    for v in &axes {
        let neg: Vec<f64> = v.iter().map(|c| -c).collect();
        let a = ray_exit(&field, v, 1.0, opts.reach);
        let b = ray_exit(&field, &neg, 1.0, opts.reach);
        extents.push(a.length.max(b.length));
        coverage_limited.push(a.undefined || b.undefined);
    }
    let mut finite: Vec<f64> = extents.iter().copied().filter(|&e| e < opts.reach * (1.0 - 1e-9)).collect();
    if finite.is_empty() {
        return Ok(Orientation {
            axes,
            extents,
            bounded: vec![false; dim],
            indeterminate: true,
        });
    }
    finite.sort_by(f64::total_cmp);
    let median = finite[finite.len() / 2];
    let threshold = opts.null_factor * median;
    let mut indeterminate = false;
    let mut bounded = Vec::with_capacity(dim);
    for (e, limited) in extents.iter().zip(&coverage_limited) {
        if *e > threshold * (1.0 + opts.band) {
            bounded.push(false);
        } else if *e < threshold * (1.0 - opts.band) && !limited {
            bounded.push(true);
        } else {
            indeterminate = true;
            bounded.push(*e < threshold);
        }
    }
    // Bounded directions first, then by extent.
    let mut idx: Vec<usize> = (0..dim).collect();
    idx.sort_by(|&a, &b| bounded[b].cmp(&bounded[a]).then(extents[a].total_cmp(&extents[b])));
    axes = idx.iter().map(|&i| axes[i].clone()).collect();
    let extents = idx.iter().map(|&i| extents[i]).collect();
    let bounded = idx.iter().map(|&i| bounded[i]).collect();
    Ok(Orientation {
        axes,
        extents,
        bounded,
        indeterminate,
    })
}

fn projector(axes: &[Vec<f64>], k: usize) -> Vec<Vec<f64>> {
    let dim = axes[0].len();
    (0..dim)
        .map(|i| (0..dim).map(|j| axes[..k].iter().map(|v| v[i] * v[j]).sum()).collect())
        .collect()
}

/// Detects the rank of the blow-down limit and measures the distance to the
/// matching `η_k` on the unit ball along an increasing schedule of scales.
pub fn classify_profile<F: ScalarField>(u: &F, h_schedule: &[f64], opts: &ClassifyOptions) -> Result<BlowdownReport> {
    let dim = u.dim();
    if !(2..=3).contains(&dim) {
        return Err(invalid(format!("dimension {dim} unsupported")));
    }
    if h_schedule.is_empty() || h_schedule.windows(2).any(|w| !(w[1] > w[0])) || !(h_schedule[0] > 0.0) {
        return Err(invalid("h schedule must be positive and increasing"));
    }
    if opts.lattice < 5 {
        return Err(invalid("lattice needs at least five points per axis"));
    }
    let lattice = unit_ball_lattice(dim, opts.lattice);
    let last = *h_schedule.last().unwrap();
    let o = orient(u, last, opts, &lattice)?;
    let nulls = o.bounded.iter().filter(|b| !**b).count();
    let k = dim - nulls;
    let indeterminate = o.indeterminate || k < 2;
    let rank = (!indeterminate).then_some(k);
    let rotation: Vec<Vec<f64>> = (0..dim).map(|i| (0..dim).map(|j| o.axes[j][i]).collect()).collect();

    let mut errors = Vec::with_capacity(h_schedule.len());
    let mut truncated = Vec::with_capacity(h_schedule.len());
    for &h in h_schedule {
        let field = rescaled(u, h)?;
        let mut err = 0.0f64;
        let mut cut = false;
        // The lattice is laid out in the profile frame, so the sampled
        // supremum does not depend on how the input is rotated.
        for y in &lattice {
            let x: Vec<f64> = (0..dim).map(|i| o.axes.iter().zip(y).map(|(a, c)| a[i] * c).sum()).collect();
            match field.eval(&x) {
                Some(v) => {
                    if let Some(k) = rank {
                        err = err.max((v - eta_profile(y, k)?).abs());
                    }
                }
                None => cut = true,
            }
        }
        errors.push(if rank.is_some() { err } else { f64::NAN });
        truncated.push(cut);
    }

    let rotation_drift = match (rank, h_schedule.len() > 1) {
        (Some(k), true) if k < dim => {
            let first = orient(u, h_schedule[0], opts, &lattice)?;
            let p = projector(&first.axes, k);
            let q = projector(&o.axes, k);
            p.iter()
                .flatten()
                .zip(q.iter().flatten())
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt()
        }
        _ => 0.0,
    };

    Ok(BlowdownReport {
        h_schedule: h_schedule.to_vec(),
        k: rank,
        indeterminate,
        rotation,
        extents: o.extents,
        errors,
        truncated,
        rotation_drift,
    })
}
