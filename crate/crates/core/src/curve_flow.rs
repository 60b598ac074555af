//! Curve shortening flow of convex plane curves in support-function form.
//!
//! A convex curve with support function `w(θ)` has radius of curvature
//! `w'' + w`; under curve shortening `w_t = -1/(w'' + w)` and the enclosed area
//! drops at the constant rate `2π`.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::domain::{build_grid, Domain};
use crate::elliptic::{continuation_with, SolverConfig, DEFAULT_SIGMA_SCHEDULE};
use crate::error::{invalid, Error, Result};
use crate::geometry::extract_level_set;
use crate::stencil::Boundary;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportCurve {
    pub w: Vec<f64>,
}

/// Spectral differentiation on a fixed number of angles.
struct Spectral {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Spectral {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    fn wavenumber(&self, k: usize) -> f64 {
        let n = self.n;
        if 2 * k == n {
            0.0
        } else if k < n / 2 + 1 {
            k as f64
        } else {
            k as f64 - n as f64
        }
    }

    /// `order`-th derivative.
    fn derivative(&self, f: &[f64], order: u32) -> Vec<f64> {
        let n = self.n;
        let mut buf: Vec<Complex<f64>> = f.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        for (k, c) in buf.iter_mut().enumerate() {
            let m = self.wavenumber(k);
            let factor = Complex::new(0.0, m).powu(order);
            // The Nyquist mode of an even-order derivative is kept.
            *c *= if 2 * k == n && order % 2 == 0 {
                Complex::new(-(n as f64 / 2.0).powi(2), 0.0).powu(order / 2)
            } else {
                factor
            };
        }
        self.inverse.process(&mut buf);
        buf.iter().map(|c| c.re / n as f64).collect()
    }

    /// Real Fourier coefficients `(a0, a1, b1)` of `f ≈ a0 + a1 cos θ + b1 sin θ`.
    fn low_modes(&self, f: &[f64]) -> (f64, f64, f64) {
        let n = self.n as f64;
        let mut a0 = 0.0;
        let mut a1 = 0.0;
        let mut b1 = 0.0;
        for (j, &v) in f.iter().enumerate() {
            let t = 2.0 * PI * j as f64 / n;
            a0 += v;
            a1 += v * t.cos();
            b1 += v * t.sin();
        }
        (a0 / n, 2.0 * a1 / n, 2.0 * b1 / n)
    }
}

impl SupportCurve {
    /// Validates positivity of the radius of curvature.
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.len() < 8 {
            return Err(invalid("at least 8 angles required"));
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(invalid("support values must be finite"));
        }
        let c = Self { w };
        let rho = c.radius_of_curvature();
        if let Some(m) = rho.iter().cloned().reduce(f64::min) {
            if m <= 0.0 {
                return Err(Error::ConvexityLoss(format!("w'' + w reaches {m:.3e}")));
            }
        }
        Ok(c)
    }

    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new((0..n).map(|j| f(2.0 * PI * j as f64 / n as f64)).collect())
    }

    pub fn circle(radius: f64, n: usize) -> Result<Self> {
        Self::from_fn(n, |_| radius)
    }

    /// Axis-aligned ellipse with semi-axes `a` (horizontal) and `b`.
    pub fn ellipse(a: f64, b: f64, n: usize) -> Result<Self> {
        Self::from_fn(n, |t| (a * a * t.cos().powi(2) + b * b * t.sin().powi(2)).sqrt())
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn angles(&self) -> Vec<f64> {
        let n = self.len();
        (0..n).map(|j| 2.0 * PI * j as f64 / n as f64).collect()
    }

    pub fn radius_of_curvature(&self) -> Vec<f64> {
        let s = Spectral::new(self.len());
        let d2 = s.derivative(&self.w, 2);
        d2.iter().zip(&self.w).map(|(a, b)| a + b).collect()
    }

    /// Boundary points `w(θ) n(θ) + w'(θ) n'(θ)`.
    pub fn points(&self) -> Vec<[f64; 2]> {
        let s = Spectral::new(self.len());
        let d1 = s.derivative(&self.w, 1);
        self.angles()
            .iter()
            .zip(self.w.iter().zip(&d1))
            .map(|(t, (w, dw))| [w * t.cos() - dw * t.sin(), w * t.sin() + dw * t.cos()])
            .collect()
    }

    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "theta,w")?;
        for (t, w) in self.angles().iter().zip(&self.w) {
            writeln!(out, "{t:e},{w:e}")?;
        }
        Ok(())
    }
}

/// Curvature samples and enclosed area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportGeometry {
    pub curvature: Vec<f64>,
    pub area: f64,
}

/// `κ = 1/(w'' + w)` and `|Ω| = ½ ∫ w (w'' + w) dθ`.
pub fn support_geometry(c: &SupportCurve) -> Result<SupportGeometry> {
    let rho = c.radius_of_curvature();
    if rho.iter().any(|&r| r <= 0.0) {
        return Err(Error::ConvexityLoss("curve is not convex".into()));
    }
    let dtheta = 2.0 * PI / c.len() as f64;
    let area = 0.5 * dtheta * c.w.iter().zip(&rho).map(|(w, r)| w * r).sum::<f64>();
    Ok(SupportGeometry {
        curvature: rho.iter().map(|r| 1.0 / r).collect(),
        area,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowTrajectory {
    pub times: Vec<f64>,
    pub curves: Vec<SupportCurve>,
    pub areas: Vec<f64>,
    /// `|Ω_0| / (2π)`.
    pub extinction_estimate: f64,
    pub steps: usize,
}

/// Step-size safety factor relative to `min(w''+w)² Δθ²`.
pub const CSF_STEP_FACTOR: f64 = 0.1;

/// Integrates to `t_end`, storing 41 equally spaced snapshots.
pub fn csf_run(w0: &SupportCurve, t_end: f64, dt0: f64) -> Result<FlowTrajectory> {
    csf_run_with(w0, t_end, dt0, 40)
}

/// Heun (RK2) integration with the explicit stability restriction; stores
/// `outputs + 1` snapshots including the initial curve.
pub fn csf_run_with(w0: &SupportCurve, t_end: f64, dt0: f64, outputs: usize) -> Result<FlowTrajectory> {
    let geo = support_geometry(w0).map_err(|_| invalid("initial curve is not convex"))?;
    let extinction = geo.area / (2.0 * PI);
    if !(t_end > 0.0 && t_end < extinction) {
        return Err(invalid(format!("t_end {t_end} must lie in (0, {extinction})")));
    }
    if !(dt0 > 0.0) || outputs == 0 {
        return Err(invalid("dt0 and output count must be positive"));
    }
    let n = w0.len();
    let spec = Spectral::new(n);
    let dtheta = 2.0 * PI / n as f64;
    let rate = |w: &[f64]| -> std::result::Result<(Vec<f64>, f64), f64> {
        let d2 = spec.derivative(w, 2);
        let mut min_rho = f64::INFINITY;
        let mut out = Vec::with_capacity(n);
        for (a, b) in d2.iter().zip(w) {
            let rho = a + b;
            if !(rho > 0.0) {
                return Err(rho);
            }
            min_rho = min_rho.min(rho);
            out.push(-1.0 / rho);
        }
        Ok((out, min_rho))
    };

    let mut times = vec![0.0];
    let mut curves = vec![w0.clone()];
    let mut areas = vec![geo.area];
    let mut w = w0.w.clone();
    let mut t = 0.0;
    let mut steps = 0;
    for k in 1..=outputs {
        let target = t_end * k as f64 / outputs as f64;
        while t < target - 1e-15 * t_end {
            let (k1, min_rho) = rate(&w).map_err(|r| Error::ConvexityLoss(format!("w''+w = {r:.3e} at t = {t}")))?;
            let dt = dt0.min(CSF_STEP_FACTOR * min_rho * min_rho * dtheta * dtheta).min(target - t);
            if dt < 1e-14 {
                return Err(Error::Numerical(format!("step underflow at t = {t}")));
            }
            let pred: Vec<f64> = w.iter().zip(&k1).map(|(a, b)| a + dt * b).collect();
            let (k2, _) = rate(&pred).map_err(|r| Error::ConvexityLoss(format!("w''+w = {r:.3e} at t = {}", t + dt)))?;
            for j in 0..n {
                w[j] += 0.5 * dt * (k1[j] + k2[j]);
            }
            t += dt;
            steps += 1;
        }
        let curve = SupportCurve::new(w.clone())?;
        areas.push(support_geometry(&curve)?.area);
        curves.push(curve);
        times.push(target);
    }
    Ok(FlowTrajectory {
        times,
        curves,
        areas,
        extinction_estimate: extinction,
        steps,
    })
}

fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaLawReport {
    pub slope: f64,
    pub intercept: f64,
    /// `|slope + 2π| / 2π`.
    pub relative_deviation: f64,
    /// Extinction time from the fit.
    pub extinction_time: f64,
    pub pass: bool,
}

/// Relative tolerance on the area-law slope.
pub const AREA_LAW_TOLERANCE: f64 = 0.005;

pub fn area_law_check(traj: &FlowTrajectory) -> Result<AreaLawReport> {
    area_law_fit(&traj.times, &traj.areas)
}

pub fn area_law_fit(times: &[f64], areas: &[f64]) -> Result<AreaLawReport> {
    if times.len() < 5 || times.len() != areas.len() {
        return Err(invalid("area law needs at least 5 samples"));
    }
    let (slope, intercept) = least_squares(times, areas);
    let dev = (slope + 2.0 * PI).abs() / (2.0 * PI);
    Ok(AreaLawReport {
        slope,
        intercept,
        relative_deviation: dev,
        extinction_time: -intercept / slope,
        pass: dev <= AREA_LAW_TOLERANCE,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundnessReport {
    pub extinction_time: f64,
    pub times: Vec<f64>,
    /// Normalized curves `w / sqrt(2(T - t))`.
    pub normalized: Vec<SupportCurve>,
    /// Distance to the best-fit circle of each normalized curve.
    pub delta: Vec<f64>,
    /// Fitted `α` in `δ_t ~ C ((T - t)/T)^α`.
    pub exponent: f64,
    /// δ decreasing from the first index on.
    pub decreasing_from: Option<usize>,
}

/// Fraction of the extinction time beyond which snapshots are excluded.
pub const NORMALIZATION_CUTOFF: f64 = 0.95;

/// Rescales every snapshot to the area of the unit circle's self-similar
/// shrinker and measures its Hausdorff distance to the best-fit circle (the
/// sup-norm of the support function beyond Fourier modes 0 and 1).
pub fn normalize_and_roundness(traj: &FlowTrajectory) -> Result<RoundnessReport> {
    let law = area_law_check(traj)?;
    let big_t = law.extinction_time;
    let n = traj.curves[0].len();
    let spec = Spectral::new(n);
    let mut times = Vec::new();
    let mut normalized = Vec::new();
    let mut delta = Vec::new();
    for (t, c) in traj.times.iter().zip(&traj.curves) {
        if *t > NORMALIZATION_CUTOFF * big_t {
            continue;
        }
        let scale = 1.0 / (2.0 * (big_t - t)).sqrt();
        let w: Vec<f64> = c.w.iter().map(|v| v * scale).collect();
        let (a0, a1, b1) = spec.low_modes(&w);
        let d = w
            .iter()
            .enumerate()
            .map(|(j, v)| {
                let th = 2.0 * PI * j as f64 / n as f64;
                (v - a0 - a1 * th.cos() - b1 * th.sin()).abs()
            })
            .fold(0.0, f64::max);
        times.push(*t);
        normalized.push(SupportCurve { w });
        delta.push(d);
    }
    let pairs: Vec<(f64, f64)> = times
        .iter()
        .zip(&delta)
        .filter(|(_, d)| **d > 1e-300)
        .map(|(t, d)| (((big_t - t) / big_t).ln(), d.ln()))
        .collect();
    let exponent = if pairs.len() >= 2 {
        let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        least_squares(&x, &y).0
    } else {
        f64::NAN
    };
    let decreasing_from = (0..delta.len()).find(|&s| delta[s..].windows(2).all(|w| w[1] <= w[0]));
    Ok(RoundnessReport {
        extinction_time: big_t,
        times,
        normalized,
        delta,
        exponent,
        decreasing_from,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    /// `τ = -½ log(T - t)`.
    pub tau: Vec<f64>,
    /// `∫ (dκ/ds)² ds` of the normalized curves.
    pub energy: Vec<f64>,
    /// Slope of `log energy` against `τ`; `None` for round curves.
    pub slope: Option<f64>,
    pub pass: bool,
}

/// Energy floor below which a curve counts as round.
pub const ROUND_ENERGY: f64 = 1e-18;

/// `∫ (dκ/ds)² ds = ∫ κ_θ² κ dθ` for each normalized snapshot.
pub fn gage_hamilton_decay(traj: &FlowTrajectory) -> Result<DecayReport> {
    let round = normalize_and_roundness(traj)?;
    let n = traj.curves[0].len();
    let spec = Spectral::new(n);
    let dtheta = 2.0 * PI / n as f64;
    let mut tau = Vec::new();
    let mut energy = Vec::new();
    for (t, c) in round.times.iter().zip(&round.normalized) {
        let geo = support_geometry(c)?;
        let dk = spec.derivative(&geo.curvature, 1);
        let e = dtheta * dk.iter().zip(&geo.curvature).map(|(d, k)| d * d * k).sum::<f64>();
        tau.push(-0.5 * (round.extinction_time - t).ln());
        energy.push(e);
    }
    if energy.iter().all(|&e| e < ROUND_ENERGY) {
        return Ok(DecayReport {
            tau,
            energy,
            slope: None,
            pass: true,
        });
    }
    let logs: Vec<f64> = energy.iter().map(|e| e.max(1e-300).ln()).collect();
    let (slope, _) = least_squares(&tau, &logs);
    Ok(DecayReport {
        tau,
        energy,
        slope: Some(slope),
        pass: slope < 0.0,
    })
}

/// Writes the trajectory table (`t, area, delta, energy`) and returns the
/// per-time curve tables as `(file name, csv text)`.
pub fn export_trajectory(traj: &FlowTrajectory, mut table: impl Write) -> Result<Vec<(String, String)>> {
    let round = normalize_and_roundness(traj)?;
    let decay = gage_hamilton_decay(traj)?;
    writeln!(table, "t,area,delta,kappa_s_energy")?;
    for (t, a) in traj.times.iter().zip(&traj.areas) {
        let (d, e) = match round.times.iter().position(|s| s == t) {
            Some(k) => (format!("{:e}", round.delta[k]), format!("{:e}", decay.energy[k])),
            None => (String::new(), String::new()),
        };
        writeln!(table, "{t:e},{a:e},{d},{e}")?;
    }
    let mut files = Vec::new();
    for (i, c) in traj.curves.iter().enumerate() {
        let mut buf = Vec::new();
        c.write_csv(&mut buf)?;
        files.push((format!("curve_{i:03}.csv"), String::from_utf8(buf).expect("ascii")));
    }
    Ok(files)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaDeficit {
    pub sigma: f64,
    pub level: f64,
    /// `|{u_0 < h}|`.
    pub area_level_set: f64,
    /// `|{u_σ < h}|`.
    pub area_sigma: f64,
    pub deficit: f64,
    /// Estimated polygon-area error: perimeter times spacing squared.
    pub quadrature_error: f64,
}

/// Area between the `h`-sublevel sets of the σ-solution and the σ→0 solution
/// on the same grid.
pub fn area_deficit(domain: &Domain, sigma: f64, h: f64, resolution: usize, config: &SolverConfig) -> Result<AreaDeficit> {
    if domain.dim() != 2 {
        return Err(invalid("area deficit is two-dimensional"));
    }
    if !(sigma > 0.0 && sigma <= 1.0) {
        return Err(invalid("sigma must lie in (0, 1]"));
    }
    let mut schedule: Vec<f64> = DEFAULT_SIGMA_SCHEDULE.iter().copied().filter(|&s| s > sigma).collect();
    schedule.push(sigma);
    let boundary = Boundary::Constant(0.0);
    let upper = continuation_with(domain, resolution, &schedule, config, &boundary)?;
    let mut zero_schedule = DEFAULT_SIGMA_SCHEDULE.to_vec();
    zero_schedule.push(0.0);
    let lower = continuation_with(domain, resolution, &zero_schedule, config, &boundary)?;
    let (u_sigma, s1) = upper.last().unwrap();
    let (u_zero, s0) = lower.last().unwrap();
    if !s1.converged || !s0.converged {
        return Err(Error::Numerical("continuation did not converge".into()));
    }
    let area_of = |u: &crate::grid::GridFunction| -> Result<(f64, f64)> {
        let lines = extract_level_set(u, h)?;
        if lines.is_empty() {
            return Err(Error::EmptyLevelSet(format!("no level set at h = {h}")));
        }
        if lines.iter().any(|l| !l.closed) {
            return Err(Error::Truncated(format!("level {h} reaches the mask boundary")));
        }
        Ok((
            lines.iter().map(|l| l.signed_area()).sum(),
            lines.iter().map(|l| l.length()).sum(),
        ))
    };
    let (a0, p0) = area_of(u_zero)?;
    let (a1, _) = area_of(u_sigma)?;
    let spacing = build_grid(domain, resolution)?.0.spacing();
    Ok(AreaDeficit {
        sigma,
        level: h,
        area_level_set: a0,
        area_sigma: a1,
        deficit: a0 - a1,
        quadrature_error: p0 * spacing * spacing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_second_derivative() {
        let c = SupportCurve::from_fn(64, |t| 1.0 + 0.1 * (3.0 * t).cos()).unwrap();
        let rho = c.radius_of_curvature();
        for (j, r) in rho.iter().enumerate() {
            let t = 2.0 * PI * j as f64 / 64.0;
            assert!((r - (1.0 - 0.8 * (3.0 * t).cos())).abs() < 1e-12);
        }
    }

    #[test]
    fn circle_geometry() {
        let c = SupportCurve::circle(2.0, 64).unwrap();
        let g = support_geometry(&c).unwrap();
        assert!(g.curvature.iter().all(|k| (k - 0.5).abs() < 1e-12));
        assert!((g.area - 4.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn ellipse_area() {
        let c = SupportCurve::ellipse(2.0, 1.0, 256).unwrap();
        assert!((support_geometry(&c).unwrap().area - 2.0 * PI).abs() < 1e-6);
    }

    #[test]
    fn shrinking_circle() {
        let c = SupportCurve::circle(1.0, 64).unwrap();
        let traj = csf_run(&c, 0.375, 1e-3).unwrap();
        let last = traj.curves.last().unwrap();
        assert!(last.w.iter().all(|w| (w - 0.5).abs() < 1e-4));
        let law = area_law_check(&traj).unwrap();
        assert!((law.slope + 2.0 * PI).abs() < 1e-4);
        let round = normalize_and_roundness(&traj).unwrap();
        assert!(round.delta.iter().all(|d| *d < 1e-6));
        assert!(gage_hamilton_decay(&traj).unwrap().slope.is_none());
    }

    #[test]
    fn non_convex_rejected() {
        let w = SupportCurve::from_fn(64, |t| 1.0 + 0.2 * (3.0 * t).cos());
        assert!(w.is_err());
    }

    #[test]
    fn perturbed_areas_fail() {
        let t: Vec<f64> = (0..10).map(|i| 0.05 * i as f64).collect();
        let a: Vec<f64> = t.iter().map(|t| 2.0 * PI - 2.0 * PI * 1.1 * t).collect();
        assert!(!area_law_fit(&t, &a).unwrap().pass);
    }
}
