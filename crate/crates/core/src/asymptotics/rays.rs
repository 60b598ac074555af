//! Exits of rays from convex sub-level sets containing the origin.

use std::f64::consts::FRAC_PI_2;

use crate::grid::ScalarField;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub length: f64,
    /// The ray stayed inside up to the reach.
    pub reached: bool,
    /// The ray left the field's domain before crossing the level.
    pub undefined: bool,
}

impl RayHit {
    pub fn truncated(&self) -> bool {
        self.reached || self.undefined
    }
}

/// Distance along the unit vector `dir` at which `{f < level}` is left.
/// The set is assumed to meet each ray from the origin in an interval.
pub fn ray_exit<F: ScalarField + ?Sized>(f: &F, dir: &[f64], level: f64, reach: f64) -> RayHit {
    let at = |s: f64| -> Option<f64> {
        let x: Vec<f64> = dir.iter().map(|d| s * d).collect();
        f.eval(&x)
    };
    let inside = |s: f64| matches!(at(s), Some(v) if v < level);
    if !inside(0.0) {
        return RayHit {
            length: 0.0,
            reached: false,
            undefined: at(0.0).is_none(),
        };
    }
    let mut lo = 0.0;
    let mut hi = 1e-3 * reach.min(1.0);
    while inside(hi) {
        lo = hi;
        if hi >= reach {
            return RayHit {
                length: reach,
                reached: true,
                undefined: false,
            };
        }
        hi = (2.0 * hi).min(reach);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if inside(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Interpolate the level between the bracketing samples when both exist.
    let length = match (at(lo), at(hi)) {
        (Some(a), Some(b)) if b > a => lo + (level - a) / (b - a) * (hi - lo),
        _ => lo,
    };
    RayHit {
        length,
        reached: false,
        undefined: at(hi).is_none(),
    }
}

/// Golden-section maximization on `[a, b]`.
pub(crate) fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc > fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Support value `sup x·p` of `{f < level}` over the plane spanned by the
/// orthonormal pair `p`, `q`, with a truncation flag.
pub fn support_extent<F: ScalarField + ?Sized>(f: &F, level: f64, p: &[f64], q: &[f64], reach: f64) -> (f64, bool) {
    let dir = |phi: f64| -> Vec<f64> { p.iter().zip(q).map(|(a, b)| a * phi.cos() + b * phi.sin()).collect() };
    let proj = |phi: f64| -> (f64, bool) {
        let hit = ray_exit(f, &dir(phi), level, reach);
        (hit.length * phi.cos(), hit.truncated())
    };
    let samples = 181;
    let width = 2.0 * FRAC_PI_2 / (samples - 1) as f64;
    let mut best = (f64::NEG_INFINITY, 0.0);
    let mut truncated = false;
    for i in 0..samples {
        let phi = -FRAC_PI_2 + width * i as f64;
        let (v, t) = proj(phi);
        if v > best.0 {
            best = (v, phi);
        }
        truncated |= t && v > 0.0;
    }
    let lo = (best.1 - width).max(-FRAC_PI_2);
    let hi = (best.1 + width).min(FRAC_PI_2);
    let (phi, v) = golden_max(|phi| proj(phi).0, lo, hi, 90);
    if v > best.0 {
        truncated |= proj(phi).1;
        (v, truncated)
    } else {
        (best.0, truncated)
    }
}

/// Minimum ray length over the unit circle and the direction attaining it.
pub(crate) fn nearest_boundary<F: ScalarField + ?Sized>(f: &F, level: f64, reach: f64) -> (f64, [f64; 2]) {
    let len = |phi: f64| ray_exit(f, &[phi.cos(), phi.sin()], level, reach).length;
    let samples = 720;
    let width = 4.0 * FRAC_PI_2 / samples as f64;
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..samples {
        let phi = width * i as f64;
        let v = len(phi);
        if v < best.0 {
            best = (v, phi);
        }
    }
    let (phi, v) = golden_max(|phi| -len(phi), best.1 - width, best.1 + width, 90);
    let (v, phi) = if -v < best.0 { (-v, phi) } else { best };
    (v, [phi.cos(), phi.sin()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::FnField;

    #[test]
    fn ellipse_rays_and_support() {
        let f = FnField {
            dim: 2,
            f: |x: &[f64]| Some(x[0] * x[0] / 4.0 + x[1] * x[1]),
        };
        let hit = ray_exit(&f, &[1.0, 0.0], 1.0, 100.0);
        assert!((hit.length - 2.0).abs() < 1e-12 && !hit.truncated());
        let (s, t) = support_extent(&f, 1.0, &[1.0, 0.0], &[0.0, 1.0], 100.0);
        assert!((s - 2.0).abs() < 1e-9 && !t);
        let (s, _) = support_extent(&f, 1.0, &[0.0, 1.0], &[1.0, 0.0], 100.0);
        assert!((s - 1.0).abs() < 1e-9);
        let (d, e) = nearest_boundary(&f, 1.0, 100.0);
        assert!((d - 1.0).abs() < 1e-9 && e[0].abs() < 1e-4);
    }

    #[test]
    fn reach_and_domain_truncation() {
        let f = FnField {
            dim: 2,
            f: |x: &[f64]| (x[0].abs() < 1.0).then_some(0.0),
        };
        let a = ray_exit(&f, &[1.0, 0.0], 1.0, 50.0);
        assert!(a.undefined && (a.length - 1.0).abs() < 1e-9);
        let b = ray_exit(&f, &[0.0, 1.0], 1.0, 50.0);
        assert!(b.reached && b.length == 50.0);
    }
}
