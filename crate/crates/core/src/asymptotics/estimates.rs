//! Checks of the growth, width, pinching, aspect and concavity estimates.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::rays::{nearest_boundary, support_extent};
use super::{slack_allowance, EstimateReport, EstimateSample, SLACK_FACTOR};
use crate::error::{invalid, Error, Result};
use crate::geometry::{hessian_at, level_set_extents_field, symmetric_eigenvalues, RayOptions};
use crate::grid::{GridFunction, ScalarField};
use crate::reference::BowlProfile;

/// Largest tolerated relative growth of the fitted constant between the
/// outer radii.
pub const GROWTH_STABILITY: f64 = 0.1;

/// Largest tolerated slope of `-log δ - R²` against `-log δ`.
pub const PINCH_SLOPE_LIMIT: f64 = 0.15;

/// Pinch distances above this are not small.
pub const SMALL_DELTA: f64 = 0.1;

fn directions(dim: usize, count: usize) -> Vec<Vec<f64>> {
    if dim == 2 {
        (0..count)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / count as f64;
                vec![a.cos(), a.sin()]
            })
            .collect()
    } else {
        // Fibonacci sphere.
        let golden = PI * (3.0 - 5f64.sqrt());
        (0..count)
            .map(|i| {
                let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
                let r = (1.0 - z * z).sqrt();
                let a = golden * i as f64;
                vec![r * a.cos(), r * a.sin(), z]
            })
            .collect()
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if (2..=3).contains(&dim) {
        Ok(())
    } else {
        Err(invalid(format!("dimension {dim} unsupported")))
    }
}

fn origin_value<F: ScalarField + ?Sized>(u: &F) -> Result<f64> {
    u.eval(&vec![0.0; u.dim()])
        .ok_or_else(|| Error::OutOfDomain("origin not covered".into()))
}

fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// `C(R) = sup_{|x|=R} (u(x) - u(0)) / R²` along the radius schedule. Stable
/// constants over the outer half of the schedule indicate quadratic growth;
/// blow-up or leaving the domain is reported as strip-consistent.
pub fn growth_fit<F: ScalarField + ?Sized>(u: &F, radii: &[f64]) -> Result<EstimateReport> {
    let dim = u.dim();
    check_dim(dim)?;
    if radii.len() < 2 || radii.windows(2).any(|w| !(w[1] > w[0])) || !(radii[0] > 0.0) {
        return Err(invalid("radius schedule must be positive, increasing and of length two or more"));
    }
    let u0 = origin_value(u)?;
    let dirs = directions(dim, if dim == 2 { 360 } else { 400 });
    let mut constants = Vec::with_capacity(radii.len());
    let mut left_domain = false;
    for &r in radii {
        let mut c = f64::NEG_INFINITY;
        for d in &dirs {
            let x: Vec<f64> = d.iter().map(|a| a * r).collect();
            match u.eval(&x) {
                Some(v) => c = c.max((v - u0) / (r * r)),
                None => left_domain = true,
            }
        }
        if left_domain {
            break;
        }
        constants.push(c);
    }
    let mut samples = Vec::new();
    let mut margin = f64::INFINITY;
    let start = radii.len() - (radii.len() / 3).max(1);
    for i in 0..constants.len() {
        let bound = if i == 0 { constants[0] } else { constants[i - 1] * (1.0 + GROWTH_STABILITY) };
        samples.push(EstimateSample {
            h: radii[i],
            measured: constants[i],
            bound,
        });
        if i >= start.max(1) {
            margin = margin.min((bound - constants[i]) / bound.abs().max(f64::MIN_POSITIVE));
        }
    }
    if left_domain {
        margin = -1.0;
    }
    let mut rep = EstimateReport::new("growth", samples, margin, 0.0);
    if let Some(c) = constants.last() {
        rep = rep.with_fitted("C", *c);
    }
    let branch = if rep.pass { "quadratic" } else { "strip-consistent" };
    Ok(rep.with_branch(branch))
}

/// Table of `ā_h b̄_h / h` where `ā_h` is the transverse inradius and `b̄_h`
/// the axial chord of `{u < u(0) + h}`. In two dimensions the ratio is
/// compared with π/32; in three the minimum is recorded as the fitted
/// constant. Truncated levels are skipped.
pub fn width_product_check<F: ScalarField>(u: &F, hs: &[f64], spacing: f64, reach: f64) -> Result<EstimateReport> {
    let dim = u.dim();
    check_dim(dim)?;
    let u0 = origin_value(u)?;
    let step = if spacing > 0.0 { 0.5 * spacing } else { reach / 4000.0 };
    let opts = RayOptions { reach, step };
    let bound = if dim == 2 { PI / 32.0 } else { 0.0 };
    let mut samples = Vec::new();
    let mut quadrature = 0.0f64;
    let mut skipped = 0usize;
    for &h in hs {
        let ext = level_set_extents_field(u, u0 + h, opts)?;
        if ext.truncated {
            skipped += 1;
            continue;
        }
        quadrature = quadrature.max(ext.sampling_error);
        samples.push(EstimateSample {
            h,
            measured: ext.transverse_inradius * ext.axial_width / h,
            bound,
        });
    }
    if samples.is_empty() {
        return Ok(EstimateReport::failed("width_product", "every level truncated"));
    }
    let min_ratio = samples.iter().map(|s| s.measured).fold(f64::INFINITY, f64::min);
    let slack = slack_allowance(spacing, quadrature);
    let rep = EstimateReport::new("width_product", samples, min_ratio - bound, slack)
        .with_fitted("min_ratio", min_ratio)
        .with_fitted("skipped", skipped as f64);
    Ok(if dim == 3 { rep.with_fitted("C_n", min_ratio) } else { rep })
}

/// Comparison profile for the pinching estimate: the solution of
/// `ρ'' = 2(tρ' + δ)` while `ρ ≤ 0` and `ρ'' = 2tρ'` afterwards, with
/// `ρ(0) = -δ`, `ρ'(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PinchOde {
    pub delta: f64,
    /// First zero of `ρ`.
    pub alpha: f64,
    /// First point with `ρ' = 1`.
    pub beta: f64,
}

/// Integrates the comparison profile by classical Runge–Kutta.
pub fn pinch_ode(delta: f64) -> Result<PinchOde> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("delta {delta} must lie in (0, 1)")));
    }
    let rhs = |t: f64, y: [f64; 2]| -> [f64; 2] {
        let forcing = if y[0] <= 0.0 { delta } else { 0.0 };
        [y[1], 2.0 * (t * y[1] + forcing)]
    };
    let dt = 1e-4;
    let mut t = 0.0;
    let mut y = [-delta, 0.0];
    let mut alpha = None;
    while t < 50.0 {
        let k1 = rhs(t, y);
        let k2 = rhs(t + 0.5 * dt, [y[0] + 0.5 * dt * k1[0], y[1] + 0.5 * dt * k1[1]]);
        let k3 = rhs(t + 0.5 * dt, [y[0] + 0.5 * dt * k2[0], y[1] + 0.5 * dt * k2[1]]);
        let k4 = rhs(t + dt, [y[0] + dt * k3[0], y[1] + dt * k3[1]]);
        let next = [
            y[0] + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            y[1] + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ];
        if alpha.is_none() && y[0] <= 0.0 && next[0] > 0.0 {
            alpha = Some(t + dt * (-y[0]) / (next[0] - y[0]));
        }
        if next[1] >= 1.0 {
            let beta = t + dt * (1.0 - y[1]) / (next[1] - y[1]);
            return Ok(PinchOde {
                delta,
                alpha: alpha.unwrap_or(beta),
                beta,
            });
        }
        y = next;
        t += dt;
    }
    Err(Error::Numerical("comparison profile never reached unit slope".into()))
}

/// Pinching sweep in two dimensions. For each field the distance `δ` from
/// the origin to `{u = u(0) + 1}` and the reach `R` of that level set
/// orthogonal to the nearest direction are measured; a single constant `C`
/// with `R² ≥ -log δ - C` must serve the whole sweep, tested through the
/// slope of `-log δ - R²` against `-log δ`.
pub fn pinch_width_check(fields: &[&dyn ScalarField], reach: f64) -> Result<EstimateReport> {
    let mut logs = Vec::new();
    let mut excess = Vec::new();
    let mut deltas = Vec::new();
    let mut reaches = Vec::new();
    for f in fields {
        if f.dim() != 2 {
            return Err(invalid("the pinching check is two-dimensional"));
        }
        let level = origin_value(*f)? + 1.0;
        let (delta, e) = nearest_boundary(*f, level, reach);
        if !(delta > 0.0) || delta > SMALL_DELTA {
            continue;
        }
        let perp = [-e[1], e[0]];
        let neg = [e[1], -e[0]];
        let (a, _) = support_extent(*f, level, &perp, &e, reach);
        let (b, _) = support_extent(*f, level, &neg, &e, reach);
        let r = a.max(b);
        logs.push(-delta.ln());
        excess.push(-delta.ln() - r * r);
        deltas.push(delta);
        reaches.push(r);
    }
    if logs.len() < 2 {
        return Ok(EstimateReport::failed("pinch_width", "inconclusive"));
    }
    let slope = ls_slope(&logs, &excess);
    let c = excess.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let samples = deltas
        .iter()
        .zip(&reaches)
        .zip(&logs)
        .map(|((d, r), l)| EstimateSample {
            h: *d,
            measured: r * r,
            bound: l - c,
        })
        .collect();
    Ok(EstimateReport::new("pinch_width", samples, PINCH_SLOPE_LIMIT - slope, 0.0)
        .with_fitted("C", c)
        .with_fitted("slope", slope)
        .with_branch("pinched"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AspectKind {
    /// Sub-level sets of a primal solution.
    Primal,
    /// Sub-level sets of a dual solution.
    Dual,
}

fn sup_extents<F: ScalarField + ?Sized>(u: &F, level: f64, reach: f64) -> (f64, f64, bool) {
    let dim = u.dim();
    let mut axial = vec![0.0; dim];
    axial[dim - 1] = 1.0;
    let transverse: Vec<Vec<f64>> = if dim == 2 {
        vec![vec![1.0, 0.0], vec![-1.0, 0.0]]
    } else {
        (0..16)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / 16.0;
                vec![a.cos(), a.sin(), 0.0]
            })
            .collect()
    };
    let mut r = 0.0f64;
    let mut truncated = false;
    for p in &transverse {
        let (s, t) = support_extent(u, level, p, &axial, reach);
        r = r.max(s);
        truncated |= t;
    }
    let (t, tt) = support_extent(u, level, &axial, &transverse[0], reach);
    (r, t, truncated || tt)
}

/// Sandwich bounds on sub-level sets `{u < u(0) + h}` with
/// `r_h = sup |x'|` and `t_h = sup x_n`.
///
/// Primal: `(δ r_h)² / (4(n-1)) ≤ h ≤ r_h² / (2(n-2))` with
/// `δ = min(t_h / r_h, 1)`; the upper bound needs `n ≥ 3`.
/// Dual: `√(h/n) ≤ r_h ≤ √(2h)` at levels where `r_h ≥ t_h`.
pub fn aspect_bounds_check<F: ScalarField>(u: &F, kind: AspectKind, hs: &[f64], spacing: f64, reach: f64) -> Result<EstimateReport> {
    let n = u.dim();
    check_dim(n)?;
    let u0 = origin_value(u)?;
    let mut samples = Vec::new();
    let mut margin = f64::INFINITY;
    let mut r_min = f64::INFINITY;
    let mut skipped = 0usize;
    for &h in hs {
        let (r, t, truncated) = sup_extents(u, u0 + h, reach);
        if truncated || !(r > 0.0) {
            skipped += 1;
            continue;
        }
        match kind {
            AspectKind::Primal => {
                let delta = (t / r).min(1.0);
                let lower = (delta * r).powi(2) / (4.0 * (n - 1) as f64);
                samples.push(EstimateSample { h, measured: h, bound: lower });
                margin = margin.min((h - lower) / h);
                if n >= 3 {
                    let upper = r * r / (2.0 * (n - 2) as f64);
                    samples.push(EstimateSample { h, measured: upper, bound: h });
                    margin = margin.min((upper - h) / h);
                }
            }
            AspectKind::Dual => {
                if r < t {
                    skipped += 1;
                    continue;
                }
                let lower = (h / n as f64).sqrt();
                let upper = (2.0 * h).sqrt();
                samples.push(EstimateSample { h, measured: r, bound: lower });
                samples.push(EstimateSample { h, measured: upper, bound: r });
                margin = margin.min((r - lower) / upper).min((upper - r) / upper);
            }
        }
        r_min = r_min.min(r);
    }
    let name = match kind {
        AspectKind::Primal => "aspect_primal",
        AspectKind::Dual => "aspect_dual",
    };
    if samples.is_empty() {
        return Ok(EstimateReport::failed(name, "skipped: no admissible level"));
    }
    // Relative error of r² from a one-spacing error in r.
    let slack = 2.0 * SLACK_FACTOR * spacing / r_min;
    Ok(EstimateReport::new(name, samples, margin, slack).with_fitted("skipped", skipped as f64))
}

/// Concavity of `log(-u)` for `u < 0` in the interior, tested as convexity
/// of `-log(-u)` at nodes whose whole two-step neighborhood is inside. The
/// tolerance is relative to the largest Hessian eigenvalue magnitude.
pub fn log_concavity_check(u: &GridFunction, tol: f64) -> Result<EstimateReport> {
    let g = u.grid();
    let dim = g.dim();
    let mut values = vec![0.0; g.len()];
    let mut mask = vec![false; g.len()];
    for lin in u.masked_indices() {
        let v = u.value(lin).unwrap();
        if v < 0.0 {
            values[lin] = -(-v).ln();
            mask[lin] = true;
        }
    }
    let f = GridFunction::new(g.clone(), values, mask.clone())?;
    let deep = |lin: usize| -> bool {
        let offsets: Vec<[isize; 3]> = match dim {
            2 => (-2..=2).flat_map(|a| (-2..=2).map(move |b| [a, b, 0])).collect(),
            _ => (-2..=2)
                .flat_map(|a| (-2..=2).flat_map(move |b| (-2..=2).map(move |c| [a, b, c])))
                .collect(),
        };
        offsets
            .iter()
            .all(|o| g.offset(lin, &o[..dim]).is_some_and(|k| u.is_masked(k)))
    };
    let mut min_eig = f64::INFINITY;
    let mut scale = 0.0f64;
    let mut checked = 0usize;
    for lin in u.masked_indices() {
        if !deep(lin) {
            continue;
        }
        if !mask[lin] {
            return Err(invalid(format!("u is nonnegative at interior node {lin}")));
        }
        if let Some(hess) = hessian_at(&f, lin) {
            let ev = symmetric_eigenvalues(&hess, dim);
            min_eig = min_eig.min(ev[0]);
            scale = scale.max(ev[0].abs()).max(ev[dim - 1].abs());
            checked += 1;
        }
    }
    if checked == 0 {
        return Err(Error::DegenerateInput("no interior node with a full stencil".into()));
    }
    let rel = min_eig / scale;
    Ok(EstimateReport::new(
        "log_concavity",
        vec![EstimateSample {
            h: 0.0,
            measured: rel,
            bound: -tol,
        }],
        rel,
        tol,
    )
    .with_fitted("scale", scale)
    .with_fitted("checked_nodes", checked as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RadialMode {
    /// Deviation is `o(|x|)`.
    Sublinear,
    /// Deviation is `O(|x|^{2/3})`.
    TwoThirds,
}

impl RadialMode {
    pub fn threshold(self) -> f64 {
        match self {
            // Finite radii cannot separate exponents just below one.
            RadialMode::Sublinear => 0.9,
            RadialMode::TwoThirds => 2.0 / 3.0 + 0.15,
        }
    }
}

/// Radial profile a two-dimensional solution is compared with.
#[derive(Debug, Clone, PartialEq)]
pub enum RadialReference {
    Bowl(BowlProfile),
    /// `|x|² / 2`.
    Quadratic,
}

impl RadialReference {
    fn value(&self, r: f64) -> Option<f64> {
        match self {
            RadialReference::Bowl(p) => p.value(r),
            RadialReference::Quadratic => Some(0.5 * r * r),
        }
    }
}

/// Minimizer of `u` by a lattice search around the origin refined with a
/// local quadratic model; `None` when the lattice minimum is not unique.
fn center_of<F: ScalarField + ?Sized>(u: &F, half: f64, step: f64) -> Option<[f64; 2]> {
    let m = (half / step).round() as i64;
    let mut best: Option<(f64, i64, i64)> = None;
    let mut values = Vec::new();
    for i in -m..=m {
        for j in -m..=m {
            if let Some(v) = u.eval(&[i as f64 * step, j as f64 * step]) {
                values.push((v, i, j));
                if best.is_none_or(|b| v < b.0) {
                    best = Some((v, i, j));
                }
            }
        }
    }
    let (v0, bi, bj) = best?;
    let tie = 1e-12 * (1.0 + v0.abs());
    if values
        .iter()
        .any(|&(v, i, j)| (v - v0).abs() <= tie && ((i - bi).abs() > 2 || (j - bj).abs() > 2))
    {
        return None;
    }
    let c = [bi as f64 * step, bj as f64 * step];
    let f = |dx: f64, dy: f64| u.eval(&[c[0] + dx, c[1] + dy]);
    let s = step;
    let (fc, fxp, fxm, fyp, fym) = (f(0.0, 0.0)?, f(s, 0.0)?, f(-s, 0.0)?, f(0.0, s)?, f(0.0, -s)?);
    let (fpp, fmm, fpm, fmp) = (f(s, s)?, f(-s, -s)?, f(s, -s)?, f(-s, s)?);
    let gx = (fxp - fxm) / (2.0 * s);
    let gy = (fyp - fym) / (2.0 * s);
    let hxx = (fxp - 2.0 * fc + fxm) / (s * s);
    let hyy = (fyp - 2.0 * fc + fym) / (s * s);
    let hxy = (fpp + fmm - fpm - fmp) / (4.0 * s * s);
    let det = hxx * hyy - hxy * hxy;
    if !(det > 0.0) {
        return Some(c);
    }
    let dx = -(hyy * gx - hxy * gy) / det;
    let dy = -(hxx * gy - hxy * gx) / det;
    Some([c[0] + dx.clamp(-s, s), c[1] + dy.clamp(-s, s)])
}

/// Growth exponent of `D(R) = sup_{|x|=R} |u(c+x) - u(c) - (p(R) - p(0))|`
/// after centering `u` at its minimizer `c`.
pub fn radial_deviation<F: ScalarField + ?Sized>(
    u: &F,
    mode: RadialMode,
    reference: &RadialReference,
    radii: &[f64],
) -> Result<EstimateReport> {
    if u.dim() != 2 {
        return Err(invalid("radial deviation is two-dimensional"));
    }
    if radii.len() < 2 || radii.windows(2).any(|w| !(w[1] > w[0])) || !(radii[0] > 0.0) {
        return Err(invalid("radius schedule must be positive, increasing and of length two or more"));
    }
    let name = match mode {
        RadialMode::Sublinear => "radial_sublinear",
        RadialMode::TwoThirds => "radial_two_thirds",
    };
    let Some(c) = center_of(u, 2.0, 0.05) else {
        return Ok(EstimateReport::failed(name, "centering ambiguous"));
    };
    let uc = u
        .eval(&c)
        .ok_or_else(|| Error::OutOfDomain("center not covered".into()))?;
    let p0 = reference.value(0.0).unwrap_or(0.0);
    let dirs = directions(2, 360);
    let mut devs = Vec::with_capacity(radii.len());
    for &r in radii {
        let pr = reference
            .value(r)
            .ok_or_else(|| Error::OutOfDomain(format!("reference undefined at radius {r}")))?;
        let mut d = 0.0f64;
        for e in &dirs {
            let v = u
                .eval(&[c[0] + r * e[0], c[1] + r * e[1]])
                .ok_or_else(|| Error::OutOfDomain(format!("field undefined at radius {r}")))?;
            d = d.max((v - uc - (pr - p0)).abs());
        }
        devs.push(d);
    }
    let floor = 1e-9 * reference.value(*radii.last().unwrap()).unwrap_or(1.0).abs().max(1.0);
    let (lr, ld): (Vec<f64>, Vec<f64>) = radii
        .iter()
        .zip(&devs)
        .filter(|(_, d)| **d > floor)
        .map(|(r, d)| (r.ln(), d.ln()))
        .unzip();
    let threshold = mode.threshold();
    let samples = radii
        .iter()
        .zip(&devs)
        .map(|(r, d)| EstimateSample {
            h: *r,
            measured: *d,
            bound: r.powf(threshold),
        })
        .collect();
    let rep = if lr.len() < 2 {
        EstimateReport::new(name, samples, threshold, 0.0).with_branch("no deviation")
    } else {
        let exponent = ls_slope(&lr, &ld);
        EstimateReport::new(name, samples, threshold - exponent, 0.0).with_fitted("exponent", exponent)
    };
    Ok(rep.with_fitted("center_x1", c[0]).with_fitted("center_x2", c[1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotics::rays::{golden_max, ray_exit};
    use crate::asymptotics::rescaled;
    use crate::grid::FnField;
    use crate::reference::{bowl_profile, ReferenceProfile};

    fn quad2() -> FnField<impl Fn(&[f64]) -> Option<f64>> {
        FnField {
            dim: 2,
            f: |x: &[f64]| Some(0.5 * (x[0] * x[0] + x[1] * x[1])),
        }
    }

    #[test]
    fn eta_growth_constant() {
        let eta = ReferenceProfile::eta(2, 2).unwrap();
        let rep = growth_fit(&eta, &[1.0, 2.0, 4.0, 8.0]).unwrap();
        assert!(rep.pass);
        assert!((rep.fitted["C"] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn strip_growth_branch() {
        let strip = ReferenceProfile::grim_reaper(2);
        let rep = growth_fit(&strip, &[0.5, 1.0, 1.4, 1.55]).unwrap();
        assert!(!rep.pass);
        assert_eq!(rep.branch.as_deref(), Some("strip-consistent"));
        let rep = growth_fit(&strip, &[1.0, 2.0, 4.0]).unwrap();
        assert_eq!(rep.branch.as_deref(), Some("strip-consistent"));
    }

    #[test]
    fn bowl_growth_is_stable() {
        let bowl = ReferenceProfile::bowl(bowl_profile(2, 80.0, 0.01).unwrap());
        let rep = growth_fit(&bowl, &[1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0]).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!((rep.fitted["C"] - 0.5).abs() < 0.01);
    }

    #[test]
    fn circle_width_ratio_is_four() {
        let rep = width_product_check(&quad2(), &[0.5, 1.0, 2.0], 0.0, 10.0).unwrap();
        assert!(rep.pass);
        for s in &rep.samples {
            assert!((s.measured - 4.0).abs() < 1e-6, "{s:?}");
        }
    }

    #[test]
    fn pinch_ode_follows_log_law() {
        let mut excess = Vec::new();
        for &d in &[1e-2, 1e-4, 1e-6, 1e-8] {
            let p = pinch_ode(d).unwrap();
            assert!(p.alpha < p.beta);
            excess.push(-d.ln() - p.beta * p.beta);
        }
        // β² ≥ |log δ| - C with one C across the sweep.
        let spread = excess.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - excess.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(spread < 3.0, "{excess:?}");
    }

    #[test]
    fn paperclip_pinches_quadratic_does_not() {
        let clip = ReferenceProfile::Paperclip;
        let scaled: Vec<_> = [400.0, 1600.0, 6400.0, 25600.0]
            .iter()
            .map(|&h| rescaled(&clip, h).unwrap())
            .collect();
        let refs: Vec<&dyn ScalarField> = scaled.iter().map(|f| f as &dyn ScalarField).collect();
        let rep = pinch_width_check(&refs, 1e3).unwrap();
        assert!(rep.pass, "{rep:?}");
        for (s, h) in rep.samples.iter().zip([400.0f64, 1600.0, 6400.0, 25600.0]) {
            assert!((s.h - (-h).exp().acos() / h.sqrt()).abs() < 1e-6 * s.h);
        }

        let narrow: Vec<_> = [1e-2, 1e-3, 1e-4, 1e-5]
            .iter()
            .map(|&d: &f64| FnField {
                dim: 2,
                f: move |x: &[f64]| Some(0.5 * x[0] * x[0] + x[1] * x[1] / (2.0 * d * d)),
            })
            .collect();
        let refs: Vec<&dyn ScalarField> = narrow.iter().map(|f| f as &dyn ScalarField).collect();
        assert!(!pinch_width_check(&refs, 1e3).unwrap().pass);

        let refs: Vec<&dyn ScalarField> = vec![&clip, &clip];
        let rep = pinch_width_check(&refs, 1e3).unwrap();
        assert_eq!(rep.branch.as_deref(), Some("inconclusive"));
    }

    #[test]
    fn radial_aspect_bounds() {
        let ball = FnField {
            dim: 3,
            f: |x: &[f64]| Some(x.iter().map(|c| c * c).sum::<f64>() / 4.0),
        };
        let rep = aspect_bounds_check(&ball, AspectKind::Primal, &[0.25, 1.0, 4.0], 0.0, 100.0).unwrap();
        assert!(rep.pass, "{rep:?}");
        // Tight within a factor two on both sides.
        assert!((rep.margin - 0.5).abs() < 1e-6);
        let squeezed = FnField {
            dim: 3,
            f: |x: &[f64]| Some(x.iter().map(|c| c * c).sum::<f64>() / 16.0),
        };
        let rep = aspect_bounds_check(&squeezed, AspectKind::Primal, &[0.25, 1.0, 4.0], 0.0, 100.0).unwrap();
        assert!(!rep.pass);
    }

    #[test]
    fn dual_quadratic_bounds() {
        let rep = aspect_bounds_check(&quad2(), AspectKind::Dual, &[0.5, 1.0], 0.0, 100.0).unwrap();
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn bowl_and_tilt_deviation() {
        let profile = bowl_profile(2, 80.0, 0.01).unwrap();
        let bowl = ReferenceProfile::bowl(profile.clone());
        let radii = [4.0, 8.0, 16.0, 32.0];
        let reference = RadialReference::Bowl(profile);
        let rep = radial_deviation(&bowl, RadialMode::Sublinear, &reference, &radii).unwrap();
        assert!(rep.pass, "{rep:?}");
        let tilted = FnField {
            dim: 2,
            f: |x: &[f64]| bowl.eval(x).map(|v| v + 0.1 * x[0]),
        };
        let rep = radial_deviation(&tilted, RadialMode::Sublinear, &reference, &radii).unwrap();
        assert!(!rep.pass, "{rep:?}");
        assert!((rep.fitted["exponent"] - 1.0).abs() < 0.1);
    }

    #[test]
    fn golden_section_finds_peak() {
        let (x, v) = golden_max(|x| -(x - 0.3f64).powi(2), -1.0, 1.0, 80);
        assert!((x - 0.3).abs() < 1e-8 && v.abs() < 1e-15);
        let hit = ray_exit(&quad2(), &[0.6, 0.8], 2.0, 10.0);
        assert!((hit.length - 2.0).abs() < 1e-12);
    }
}
