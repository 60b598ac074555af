//! Transverse and axial extents of sub-level sets measured about the origin.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{GridFunction, ScalarField};

/// Number of sampled transverse directions in three dimensions.
pub const TRANSVERSE_DIRECTIONS_3D: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtentRecord {
    pub level: f64,
    /// Infimum over sampled directions of the projected radial graph.
    pub transverse_inradius: f64,
    /// Full chord of the sub-level set along the last axis through the origin.
    pub axial_width: f64,
    /// `(direction in the transverse plane, radial graph value)`.
    pub radial_samples: Vec<(Vec<f64>, f64)>,
    /// Distance from the origin to the level set.
    pub nearest_distance: f64,
    /// Some ray left the field's domain before crossing the level.
    pub truncated: bool,
    /// One-sided error bar on the inradius from direction sampling.
    pub sampling_error: f64,
}

/// Ray-marching options.
#[derive(Debug, Clone, Copy)]
pub struct RayOptions {
    pub reach: f64,
    pub step: f64,
}

struct Ray {
    length: f64,
    truncated: bool,
}

fn march<F: ScalarField>(f: &F, dir: &[f64], h: f64, opts: RayOptions) -> Ray {
    let dim = f.dim();
    let at = |s: f64| -> Option<f64> {
        let x: Vec<f64> = (0..dim).map(|a| s * dir[a]).collect();
        f.eval(&x)
    };
    let mut inside = 0.0;
    let mut s = 0.0;
    loop {
        let next = (s + opts.step).min(opts.reach);
        match at(next) {
            None => {
                // Refine the last in-domain position.
                let (mut lo, mut hi) = (inside, next);
                for _ in 0..30 {
                    let mid = 0.5 * (lo + hi);
                    match at(mid) {
                        Some(v) if v < h => lo = mid,
                        Some(_) => return crossing(&at, lo, mid, h),
                        None => hi = mid,
                    }
                }
                return Ray {
                    length: lo,
                    truncated: true,
                };
            }
            Some(v) if v >= h => return crossing(&at, inside, next, h),
            Some(_) => {
                inside = next;
                s = next;
                if s >= opts.reach {
                    return Ray {
                        length: s,
                        truncated: true,
                    };
                }
            }
        }
    }
}

fn crossing(at: &impl Fn(f64) -> Option<f64>, mut lo: f64, mut hi: f64, h: f64) -> Ray {
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        match at(mid) {
            Some(v) if v < h => lo = mid,
            _ => hi = mid,
        }
        if hi - lo < 1e-13 * hi.max(1.0) {
            break;
        }
    }
    // Linear interpolation between the bracketing samples.
    let length = match (at(lo), at(hi)) {
        (Some(a), Some(b)) if b > a => lo + (h - a) / (b - a) * (hi - lo),
        _ => 0.5 * (lo + hi),
    };
    Ray {
        length,
        truncated: false,
    }
}

/// Support of the sub-level set in direction `p` of the transverse plane,
/// maximized over the half-plane spanned by `p` and the axial axis.
fn projected_radius<F: ScalarField>(f: &F, p: &[f64], h: f64, opts: RayOptions) -> Ray {
    let dim = f.dim();
    let dir_at = |phi: f64| -> Vec<f64> {
        let mut d: Vec<f64> = p.iter().map(|c| c * phi.cos()).collect();
        d[dim - 1] = phi.sin();
        d
    };
    let eval = |phi: f64| -> (f64, bool) {
        let ray = march(f, &dir_at(phi), h, opts);
        (ray.length * phi.cos(), ray.truncated)
    };
    let samples = 91;
    let mut best = (f64::NEG_INFINITY, 0.0, false);
    let mut truncated = false;
    let mut values = Vec::with_capacity(samples);
    for i in 0..samples {
        let phi = -0.5 * PI + PI * (i as f64 + 0.5) / samples as f64;
        let (v, t) = eval(phi);
        truncated |= t;
        values.push(v);
        if v > best.0 {
            best = (v, phi, t);
        }
    }
    // Golden-section refinement around the best sample.
    let width = PI / samples as f64;
    let (mut a, mut b) = (best.1 - width, best.1 + width);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (eval(c).0, eval(d).0);
    for _ in 0..40 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = eval(c).0;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = eval(d).0;
        }
    }
    let refined = fc.max(fd);
    Ray {
        length: best.0.max(refined),
        truncated,
    }
}

/// Extents of `{u < h}` about the origin for a grid function.
pub fn level_set_extents(u: &GridFunction, h: f64) -> Result<ExtentRecord> {
    let g = u.grid();
    let diag = g
        .origin()
        .iter()
        .zip(g.upper())
        .map(|(lo, hi)| lo.abs().max(hi.abs()).powi(2))
        .sum::<f64>()
        .sqrt();
    let opts = RayOptions {
        reach: diag,
        step: 0.5 * g.spacing(),
    };
    level_set_extents_field(u, h, opts)
}

/// Extents of `{f < h}` about the origin for any scalar field.
pub fn level_set_extents_field<F: ScalarField>(f: &F, h: f64, opts: RayOptions) -> Result<ExtentRecord> {
    let dim = f.dim();
    if !(2..=3).contains(&dim) {
        return Err(invalid(format!("dimension {dim} unsupported")));
    }
    if !(opts.reach > 0.0 && opts.step > 0.0) {
        return Err(invalid("ray reach and step must be positive"));
    }
    let origin = vec![0.0; dim];
    match f.eval(&origin) {
        Some(v) if v < h => {}
        Some(v) => {
            return Err(Error::EmptyLevelSet(format!(
                "origin value {v} not below level {h}"
            )))
        }
        None => return Err(Error::OutOfDomain("origin outside the field".into())),
    }

    let mut truncated = false;

    // Axial chord.
    let mut axial = 0.0;
    for sign in [1.0, -1.0] {
        let mut d = vec![0.0; dim];
        d[dim - 1] = sign;
        let ray = march(f, &d, h, opts);
        truncated |= ray.truncated;
        axial += ray.length;
    }

    // Transverse directions.
    let directions: Vec<Vec<f64>> = if dim == 2 {
        vec![vec![1.0, 0.0], vec![-1.0, 0.0]]
    } else {
        (0..TRANSVERSE_DIRECTIONS_3D)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / TRANSVERSE_DIRECTIONS_3D as f64;
                vec![a.cos(), a.sin(), 0.0]
            })
            .collect()
    };
    let mut radial_samples = Vec::with_capacity(directions.len());
    let mut inradius = f64::INFINITY;
    for p in directions {
        let ray = projected_radius(f, &p, h, opts);
        truncated |= ray.truncated;
        inradius = inradius.min(ray.length);
        radial_samples.push((p, ray.length));
    }
    // Between adjacent samples at angle gap Δ the support of a convex set can
    // dip by at most a factor cos(Δ/2).
    let sampling_error = if dim == 3 {
        inradius * (1.0 - (PI / TRANSVERSE_DIRECTIONS_3D as f64).cos())
    } else {
        0.0
    };

    let nearest_distance = nearest_distance(f, h, opts, &mut truncated);

    Ok(ExtentRecord {
        level: h,
        transverse_inradius: inradius,
        axial_width: axial,
        radial_samples,
        nearest_distance,
        truncated,
        sampling_error,
    })
}

fn nearest_distance<F: ScalarField>(f: &F, h: f64, opts: RayOptions, truncated: &mut bool) -> f64 {
    let dim = f.dim();
    let mut best = (f64::INFINITY, Vec::new());
    let consider = |d: Vec<f64>, truncated: &mut bool, best: &mut (f64, Vec<f64>)| -> f64 {
        let ray = march(f, &d, h, opts);
        *truncated |= ray.truncated;
        if ray.length < best.0 {
            *best = (ray.length, d);
        }
        ray.length
    };
    if dim == 2 {
        let n = 720;
        for i in 0..n {
            let a = 2.0 * PI * i as f64 / n as f64;
            consider(vec![a.cos(), a.sin()], truncated, &mut best);
        }
        // Golden-section refinement on the angle.
        let a0 = best.1[1].atan2(best.1[0]);
        let w = 2.0 * PI / n as f64;
        let len = |a: f64| march(f, &[a.cos(), a.sin()], h, opts).length;
        let (mut lo, mut hi) = (a0 - w, a0 + w);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..40 {
            let c = hi - g * (hi - lo);
            let d = lo + g * (hi - lo);
            if len(c) < len(d) {
                hi = d;
            } else {
                lo = c;
            }
        }
        best.0.min(len(0.5 * (lo + hi)))
    } else {
        // Fibonacci sphere followed by local coordinate refinement.
        let n = 2000;
        let golden = PI * (3.0 - 5f64.sqrt());
        for i in 0..n {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let a = golden * i as f64;
            consider(vec![r * a.cos(), r * a.sin(), z], truncated, &mut best);
        }
        let mut dir = best.1.clone();
        let mut val = best.0;
        let mut step = 0.05;
        while step > 1e-7 {
            let mut improved = false;
            for axis in 0..3 {
                for s in [-1.0, 1.0] {
                    let mut d = dir.clone();
                    d[axis] += s * step;
                    let norm = d.iter().map(|c| c * c).sum::<f64>().sqrt();
                    d.iter_mut().for_each(|c| *c /= norm);
                    let l = march(f, &d, h, opts).length;
                    if l < val {
                        val = l;
                        dir = d;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        val
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{CartesianGrid, FnField};

    #[test]
    fn circle_extents() {
        let g = CartesianGrid::new(vec![-3.0, -3.0], 0.05, vec![121, 121]).unwrap();
        let h = g.spacing();
        let u = GridFunction::full(g, |x| 0.5 * (x[0] * x[0] + x[1] * x[1])).unwrap();
        let e = level_set_extents(&u, 2.0).unwrap();
        assert!(!e.truncated);
        assert!((e.transverse_inradius - 2.0).abs() < 2.0 * h);
        assert!((e.axial_width - 4.0).abs() < 2.0 * h);
        assert!((e.nearest_distance - 2.0).abs() < 2.0 * h);
    }

    #[test]
    fn cylinder_is_truncated_axially() {
        let f = FnField {
            dim: 3,
            f: |x: &[f64]| {
                if x.iter().all(|c| c.abs() <= 4.0) {
                    Some(0.5 * (x[0] * x[0] + x[1] * x[1]))
                } else {
                    None
                }
            },
        };
        let e = level_set_extents_field(
            &f,
            1.0,
            RayOptions {
                reach: 10.0,
                step: 0.05,
            },
        )
        .unwrap();
        assert!((e.transverse_inradius - 2f64.sqrt()).abs() < 1e-6);
        assert!(e.truncated);
        assert_eq!(e.radial_samples.len(), TRANSVERSE_DIRECTIONS_3D);
        assert!((e.nearest_distance - 2f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn tilted_ellipse_projection() {
        // {x^2 + (x - y)^2 < 1}: projection onto the first axis is |x| < 1.
        let f = FnField {
            dim: 2,
            f: |x: &[f64]| Some(x[0] * x[0] + (x[0] - x[1]).powi(2)),
        };
        let e = level_set_extents_field(
            &f,
            1.0,
            RayOptions {
                reach: 5.0,
                step: 0.01,
            },
        )
        .unwrap();
        assert!((e.transverse_inradius - 1.0).abs() < 1e-6, "{}", e.transverse_inradius);
        assert!((e.axial_width - 2.0).abs() < 1e-6);
    }
}
