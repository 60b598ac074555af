//! Closed-form and ODE reference profiles.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::ScalarField;

/// `log sec x1`.
pub fn grim_reaper(x1: f64) -> Result<f64> {
    check_strip(x1)?;
    Ok(-x1.cos().ln())
}

/// `tan x1`.
pub fn grim_reaper_slope(x1: f64) -> Result<f64> {
    check_strip(x1)?;
    Ok(x1.tan())
}

/// `sec^2 x1`.
pub fn grim_reaper_curvature(x1: f64) -> Result<f64> {
    check_strip(x1)?;
    Ok(1.0 / x1.cos().powi(2))
}

/// `log cosh x1 + log sec x2`, the arrival time of the shrinking paperclip.
/// Its level sets pinch towards the `x1` axis as the level grows.
pub fn paperclip(x: &[f64]) -> Result<f64> {
    check_strip(x[1])?;
    let a = x[0].abs();
    let log_cosh = a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2;
    Ok(log_cosh - x[1].cos().ln())
}

fn check_strip(x1: f64) -> Result<()> {
    if !(x1.abs() < FRAC_PI_2) {
        return Err(Error::OutOfDomain(format!("|x1| = {} not below pi/2", x1.abs())));
    }
    Ok(())
}

/// `sum_{i<=k} x_i^2 / (2(k-1))`.
pub fn eta_profile(x: &[f64], k: usize) -> Result<f64> {
    check_rank(x.len(), k)?;
    Ok(x[..k].iter().map(|c| c * c).sum::<f64>() / (2.0 * (k - 1) as f64))
}

pub fn eta_gradient(x: &[f64], k: usize) -> Result<Vec<f64>> {
    check_rank(x.len(), k)?;
    let c = 1.0 / (k - 1) as f64;
    Ok((0..x.len()).map(|i| if i < k { c * x[i] } else { 0.0 }).collect())
}

fn check_rank(dim: usize, k: usize) -> Result<()> {
    if k < 2 {
        return Err(invalid(format!("rank {k} below 2")));
    }
    if k > dim {
        return Err(invalid(format!("rank {k} exceeds dimension {dim}")));
    }
    Ok(())
}

/// `(|x|^2 - R^2) / (2(n-1))`, the radial level-set solution on `B_R`.
pub fn radial_bowl_sigma0(x: &[f64], n: usize, radius: f64) -> Result<f64> {
    if n < 2 {
        return Err(invalid(format!("dimension {n} below 2")));
    }
    let r2: f64 = x.iter().map(|c| c * c).sum();
    Ok((r2 - radius * radius) / (2.0 * (n - 1) as f64))
}

/// Radial translating soliton sampled on a uniform radius grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BowlProfile {
    pub n: usize,
    pub step: f64,
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    pub slopes: Vec<f64>,
}

fn bowl_rhs(n: usize, r: f64, v: f64) -> f64 {
    let drift = if r > 0.0 { (n - 1) as f64 * v / r } else { (n - 1) as f64 / n as f64 };
    (1.0 + v * v) * (1.0 - drift)
}

/// Integrates `u'' = (1 + u'^2)(1 - (n-1) u'/r)` from `u(0) = u'(0) = 0`.
///
/// The first `10 step` use the series `r^2/(2n) + r^4/(4n^3(n+2))`, then
/// classical RK4 takes over.
pub fn bowl_profile(n: usize, r_max: f64, step: f64) -> Result<BowlProfile> {
    if n < 2 {
        return Err(invalid(format!("dimension {n} below 2")));
    }
    if !(r_max > 0.0 && step > 0.0) || step > r_max / 100.0 {
        return Err(invalid(format!("step {step} must be at most r_max/100 = {}", r_max / 100.0)));
    }
    let nf = n as f64;
    let series_u = |r: f64| r * r / (2.0 * nf) + r.powi(4) / (4.0 * nf.powi(3) * (nf + 2.0));
    let series_v = |r: f64| r / nf + r.powi(3) / (nf.powi(3) * (nf + 2.0));
    let steps = (r_max / step).ceil() as usize;
    let mut radii = Vec::with_capacity(steps + 1);
    let mut values = Vec::with_capacity(steps + 1);
    let mut slopes = Vec::with_capacity(steps + 1);
    for i in 0..=steps.min(10) {
        let r = i as f64 * step;
        radii.push(r);
        values.push(series_u(r));
        slopes.push(series_v(r));
    }
    let mut u = *values.last().unwrap();
    let mut v = *slopes.last().unwrap();
    for i in 11..=steps {
        let r = (i - 1) as f64 * step;
        let f = |r: f64, v: f64| bowl_rhs(n, r, v);
        let k1u = v;
        let k1v = f(r, v);
        let k2u = v + 0.5 * step * k1v;
        let k2v = f(r + 0.5 * step, k2u);
        let k3u = v + 0.5 * step * k2v;
        let k3v = f(r + 0.5 * step, k3u);
        let k4u = v + step * k3v;
        let k4v = f(r + step, k4u);
        u += step / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
        let v_next = v + step / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        if !u.is_finite() || !v_next.is_finite() || v_next <= v {
            return Err(Error::Numerical(format!(
                "bowl integration lost convexity near r = {:.4}; reduce the step",
                r + step
            )));
        }
        v = v_next;
        radii.push(i as f64 * step);
        values.push(u);
        slopes.push(v);
    }
    Ok(BowlProfile {
        n,
        step,
        radii,
        values,
        slopes,
    })
}

impl BowlProfile {
    pub fn r_max(&self) -> f64 {
        *self.radii.last().unwrap()
    }

    fn locate(&self, r: f64) -> Option<(usize, f64)> {
        let r = r.abs();
        if r > self.r_max() {
            return None;
        }
        let i = ((r / self.step) as usize).min(self.radii.len() - 2);
        Some((i, (r - self.radii[i]) / self.step))
    }

    /// Cubic Hermite interpolation of `u(r)`.
    pub fn value(&self, r: f64) -> Option<f64> {
        let (i, s) = self.locate(r)?;
        let h = self.step;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (d0, d1) = (self.slopes[i] * h, self.slopes[i + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        Some(
            (2.0 * s3 - 3.0 * s2 + 1.0) * y0
                + (s3 - 2.0 * s2 + s) * d0
                + (-2.0 * s3 + 3.0 * s2) * y1
                + (s3 - s2) * d1,
        )
    }

    /// `u'(r)` by Hermite interpolation using the ODE for `u''`.
    pub fn slope(&self, r: f64) -> Option<f64> {
        let (i, s) = self.locate(r)?;
        let h = self.step;
        let (v0, v1) = (self.slopes[i], self.slopes[i + 1]);
        let a0 = bowl_rhs(self.n, self.radii[i], v0) * h;
        let a1 = bowl_rhs(self.n, self.radii[i + 1], v1) * h;
        let s2 = s * s;
        let s3 = s2 * s;
        Some(
            (2.0 * s3 - 3.0 * s2 + 1.0) * v0
                + (s3 - 2.0 * s2 + s) * a0
                + (-2.0 * s3 + 3.0 * s2) * v1
                + (s3 - s2) * a1,
        )
    }

    /// `u''(r)` from the ODE.
    pub fn curvature(&self, r: f64) -> Option<f64> {
        Some(bowl_rhs(self.n, r.abs(), self.slope(r)?))
    }

    /// Inverse of the slope: the radius where `u'(r) = p`.
    pub fn radius_for_slope(&self, p: f64) -> Option<f64> {
        if p < 0.0 || p > *self.slopes.last().unwrap() {
            return None;
        }
        let i = self.slopes.partition_point(|&v| v < p).max(1);
        let (mut lo, mut hi) = (self.radii[i - 1], self.radii[i]);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.slope(mid)? < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(0.5 * (lo + hi))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ReferenceProfile {
    GrimReaper { dim: usize },
    Eta { dim: usize, k: usize },
    RadialSigma0 { dim: usize, radius: f64 },
    Bowl { dim: usize, profile: BowlProfile },
    Paperclip,
}

impl ReferenceProfile {
    pub fn grim_reaper(dim: usize) -> Self {
        Self::GrimReaper { dim }
    }

    pub fn eta(dim: usize, k: usize) -> Result<Self> {
        check_rank(dim, k)?;
        Ok(Self::Eta { dim, k })
    }

    pub fn radial_sigma0(dim: usize, radius: f64) -> Self {
        Self::RadialSigma0 { dim, radius }
    }

    /// Bowl in dimension `profile.n`, evaluated at `|x|`.
    pub fn bowl(profile: BowlProfile) -> Self {
        Self::Bowl {
            dim: profile.n,
            profile,
        }
    }
}

impl ScalarField for ReferenceProfile {
    fn dim(&self) -> usize {
        match self {
            Self::GrimReaper { dim } | Self::Eta { dim, .. } | Self::RadialSigma0 { dim, .. } | Self::Bowl { dim, .. } => *dim,
            Self::Paperclip => 2,
        }
    }

    fn eval(&self, x: &[f64]) -> Option<f64> {
        match self {
            Self::GrimReaper { .. } => grim_reaper(x[0]).ok(),
            Self::Eta { k, dim } => eta_profile(&x[..*dim], *k).ok(),
            Self::RadialSigma0 { dim, radius } => radial_bowl_sigma0(&x[..*dim], *dim, *radius).ok(),
            Self::Bowl { dim, profile } => {
                let r = x[..*dim].iter().map(|c| c * c).sum::<f64>().sqrt();
                profile.value(r)
            }
            Self::Paperclip => paperclip(x).ok(),
        }
    }
}
