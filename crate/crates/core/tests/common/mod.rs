//! Randomized property suites shared by the `properties` and `acceptance`
//! targets. Every suite draws its cases from a fixed seed.

#![allow(dead_code)]

use nalgebra::{Matrix2, Matrix3, Rotation3, Unit, Vector3};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use soliton_forge::asymptotics::{blowdown, classify_profile, BlowdownGrid, ClassifyOptions};
use soliton_forge::domain::{Domain, EllipsoidDomain};
use soliton_forge::elliptic::{continuation_with, DirichletProblem, SolverConfig};
use soliton_forge::geometry::hessian_at;
use soliton_forge::grid::{CartesianGrid, FnField, GridFunction};
use soliton_forge::legendre::{elementary_symmetric, legendre_transform, legendre_transform_refined};
use soliton_forge::stencil::Boundary;

pub const CASES: usize = 100;
pub const SEED: u64 = 0x5eed_2024;

/// Outcome of one suite: how many of its cases failed and the worst case.
#[derive(Debug, Clone)]
pub struct Suite {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    pub worst: String,
}

impl Suite {
    pub fn passed(&self) -> bool {
        self.failures == 0 && self.cases == CASES
    }

    pub fn line(&self) -> String {
        format!(
            "{}: {}/{} cases pass; {}",
            self.name,
            self.cases - self.failures,
            self.cases,
            self.worst
        )
    }
}

fn rng(salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(SEED ^ salt)
}

fn run(name: &'static str, salt: u64, case: impl Fn(&mut ChaCha8Rng) -> Result<f64, String>, limit: f64) -> Suite {
    let mut r = rng(salt);
    let mut failures = 0;
    let mut worst = f64::NEG_INFINITY;
    let mut note = String::new();
    for i in 0..CASES {
        match case(&mut r) {
            Ok(v) => {
                if !(v <= limit) {
                    failures += 1;
                }
                if v > worst {
                    worst = v;
                }
            }
            Err(e) => {
                failures += 1;
                if note.is_empty() {
                    note = format!("; case {i}: {e}");
                }
            }
        }
    }
    Suite {
        name,
        cases: CASES,
        failures,
        worst: format!("worst {worst:.3e} against limit {limit:.1e}{note}"),
    }
}

/// Random symmetric 2×2 matrix with eigenvalues in `[lo, hi]`.
fn spd2(r: &mut ChaCha8Rng, lo: f64, hi: f64) -> Matrix2<f64> {
    let a = r.gen_range(0.0..std::f64::consts::PI);
    let q = Matrix2::new(a.cos(), -a.sin(), a.sin(), a.cos());
    let d = Matrix2::from_diagonal(&nalgebra::Vector2::new(r.gen_range(lo..hi), r.gen_range(lo..hi)));
    q * d * q.transpose()
}

fn rotation3(r: &mut ChaCha8Rng) -> Matrix3<f64> {
    let axis = Vector3::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0));
    let axis = Unit::new_normalize(axis + Vector3::new(1e-3, 0.0, 0.0));
    *Rotation3::from_axis_angle(&axis, r.gen_range(0.0..std::f64::consts::TAU)).matrix()
}

/// `u** = u` for convex `u` on the region where both transforms see the
/// supremum, within two primal spacings.
pub fn legendre_involution() -> Suite {
    run(
        "legendre involution",
        1,
        |r| {
            let a = spd2(r, 0.5, 2.0);
            let c = r.gen_range(0.0..0.3);
            let b = [r.gen_range(-0.2..0.2), r.gen_range(-0.2..0.2)];
            let u = move |x: &[f64]| {
                let q = 0.5 * (a[(0, 0)] * x[0] * x[0] + 2.0 * a[(0, 1)] * x[0] * x[1] + a[(1, 1)] * x[1] * x[1]);
                q + c * (x[0].powi(4) + x[1].powi(4)) + b[0] * x[0] + b[1] * x[1]
            };
            let g = CartesianGrid::new(vec![-1.0, -1.0], 0.0625, vec![33, 33]).map_err(|e| e.to_string())?;
            let dg = CartesianGrid::new(vec![-2.0, -2.0], 0.125, vec![33, 33]).map_err(|e| e.to_string())?;
            let f = GridFunction::full(g.clone(), u).map_err(|e| e.to_string())?;
            let once = legendre_transform(&f, &dg).map_err(|e| e.to_string())?.dual;
            let twice = legendre_transform(&once, &g).map_err(|e| e.to_string())?.dual;
            let mut err = 0.0f64;
            let mut seen = 0;
            for k in twice.masked_indices() {
                let x = g.coord(k);
                if x[0].abs() <= 0.5 && x[1].abs() <= 0.5 {
                    err = err.max((twice.values()[k] - f.values()[k]).abs());
                    seen += 1;
                }
            }
            if seen == 0 {
                return Err("no comparison nodes".into());
            }
            Ok(err / (2.0 * dg.spacing().max(g.spacing())))
        },
        1.0,
    )
}

/// `D²u*(Du(x)) · D²u(x) = I` on quadratics, where the refined transform and
/// the central Hessian are both exact.
pub fn hessian_inverse_pairing() -> Suite {
    run(
        "hessian-inverse pairing",
        2,
        |r| {
            let dim = if r.gen_bool(0.5) { 2 } else { 3 };
            let a = if dim == 2 {
                let m = spd2(r, 0.5, 2.0);
                Matrix3::new(m[(0, 0)], m[(0, 1)], 0.0, m[(1, 0)], m[(1, 1)], 0.0, 0.0, 0.0, 1.0)
            } else {
                let q = rotation3(r);
                let d = Matrix3::from_diagonal(&Vector3::new(r.gen_range(0.5..2.0), r.gen_range(0.5..2.0), r.gen_range(0.5..2.0)));
                q * d * q.transpose()
            };
            let b: Vec<f64> = (0..dim).map(|_| r.gen_range(-0.2..0.2)).collect();
            let bb = b.clone();
            let u = move |x: &[f64]| {
                let mut s = 0.0;
                for i in 0..dim {
                    s += bb[i] * x[i];
                    for j in 0..dim {
                        s += 0.5 * a[(i, j)] * x[i] * x[j];
                    }
                }
                s
            };
            let n = if dim == 2 { 33 } else { 15 };
            let h = 2.0 / (n - 1) as f64;
            let g = CartesianGrid::new(vec![-1.0; dim], h, vec![n; dim]).map_err(|e| e.to_string())?;
            let dg = CartesianGrid::new(vec![-0.6; dim], 0.1, vec![13; dim]).map_err(|e| e.to_string())?;
            let f = GridFunction::full(g, u).map_err(|e| e.to_string())?;
            let dual = legendre_transform_refined(&f, &dg).map_err(|e| e.to_string())?.dual;
            let mut worst = 0.0f64;
            let mut seen = 0;
            for k in dual.masked_indices() {
                let Some(hd) = hessian_at(&dual, k) else { continue };
                seen += 1;
                for i in 0..dim {
                    for j in 0..dim {
                        let p: f64 = (0..dim).map(|l| hd[i][l] * a[(l, j)]).sum();
                        worst = worst.max((p - if i == j { 1.0 } else { 0.0 }).abs());
                    }
                }
            }
            if seen == 0 {
                return Err("no interior dual nodes".into());
            }
            Ok(worst)
        },
        1e-8,
    )
}

/// Elementary symmetric polynomials against subset enumeration.
pub fn elementary_symmetric_brute_force() -> Suite {
    run(
        "F_k brute force",
        3,
        |r| {
            let lambda: Vec<f64> = (0..6).map(|_| r.gen_range(-3.0..3.0)).collect();
            let mut worst = 0.0f64;
            for k in 1..=6 {
                let fast = elementary_symmetric(&lambda, k).map_err(|e| e.to_string())?;
                let mut brute = 0.0;
                let mut scale = 0.0;
                for mask in 0u32..64 {
                    if mask.count_ones() as usize == k {
                        let p: f64 = (0..6).filter(|i| mask & (1 << i) != 0).map(|i| lambda[i]).product();
                        brute += p;
                        scale += p.abs();
                    }
                }
                worst = worst.max((fast - brute).abs() / scale.max(1e-300));
            }
            Ok(worst)
        },
        1e-13,
    )
}

/// Forward differences of the residual converge to the assembled Jacobian at
/// first order as ε runs from 1e-3 down to 1e-7.
pub fn jacobian_fd_consistency() -> Suite {
    run(
        "jacobian finite differences",
        4,
        |r| {
            let ax = r.gen_range(0.6..1.5);
            let bx = r.gen_range(0.6..1.5);
            let sigma = r.gen_range(0.01..1.0);
            let domain = Domain::from(EllipsoidDomain::new(2, ax, bx).map_err(|e| e.to_string())?);
            let p = DirichletProblem::new(&domain, 17, &Boundary::Constant(0.0)).map_err(|e| e.to_string())?;
            let mut x = p.initial_guess(0.0);
            for v in x.iter_mut() {
                *v += r.gen_range(-0.05..0.05);
            }
            let dir: Vec<f64> = (0..x.len()).map(|_| r.gen_range(-1.0..1.0)).collect();
            let r0 = p.residual(&x, sigma);
            let j = p.jacobian(&x, sigma, false);
            let mut jv = vec![0.0; x.len()];
            j.mul(&dir, &mut jv);
            let scale = jv.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
            let errs: Vec<f64> = [1e-3, 1e-4, 1e-5, 1e-6, 1e-7]
                .iter()
                .map(|&eps| {
                    let xe: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + eps * d).collect();
                    let re = p.residual(&xe, sigma);
                    re.iter()
                        .zip(&r0)
                        .zip(&jv)
                        .map(|((a, b), c)| ((a - b) / eps - c).abs())
                        .fold(0.0f64, f64::max)
                        / scale
                })
                .collect();
            let best = errs.iter().copied().fold(f64::INFINITY, f64::min);
            // First-order decay across the first decade, unless already at
            // the rounding floor.
            if errs[1] > 0.2 * errs[0] && errs[0] > 1e-7 {
                return Err(format!("no first-order decay: {errs:?}"));
            }
            Ok(best)
        },
        1e-4,
    )
}

/// `u_{σ₁} ≥ u_{σ₂}` nodewise when `σ₁ ≥ σ₂`.
pub fn sigma_monotonicity() -> Suite {
    run(
        "sigma monotonicity",
        5,
        |r| {
            let ax = r.gen_range(0.6..1.6);
            let bx = r.gen_range(0.6..1.6);
            let s1 = r.gen_range(0.05..1.0);
            let s2 = r.gen_range(0.0..s1);
            let domain = Domain::from(EllipsoidDomain::new(2, ax, bx).map_err(|e| e.to_string())?);
            let cfg = SolverConfig::default();
            let runs = continuation_with(&domain, 25, &[1.0, s1, s2], &cfg, &Boundary::Constant(0.0)).map_err(|e| e.to_string())?;
            if runs.len() != 3 || !runs.iter().all(|(_, s)| s.converged) {
                return Err(format!("continuation stopped at {} of 3", runs.len()));
            }
            let (u1, u2) = (&runs[1].0, &runs[2].0);
            let tol = 2.0 * cfg.tolerance;
            // Largest violation of u1 >= u2 - tol, in units of tol.
            let worst = u1
                .masked_indices()
                .map(|k| u2.values()[k] - tol - u1.values()[k])
                .fold(f64::NEG_INFINITY, f64::max);
            Ok(worst / tol)
        },
        0.0,
    )
}

/// Composing two blow-downs equals one blow-down at the product scale, up to
/// the bilinear interpolation error of the intermediate grid.
pub fn blowdown_semigroup() -> Suite {
    run(
        "blow-down semigroup",
        6,
        |r| {
            let m = spd2(r, 0.2, 2.0);
            let c = r.gen_range(0.0..0.5);
            let d = r.gen_range(0.0..0.5);
            let u = FnField {
                dim: 2,
                f: move |x: &[f64]| {
                    let q = 0.5 * (m[(0, 0)] * x[0] * x[0] + 2.0 * m[(0, 1)] * x[0] * x[1] + m[(1, 1)] * x[1] * x[1]);
                    Some(q + c * x[0].powi(4) + d * x[0].cosh().ln())
                },
            };
            let h1: f64 = r.gen_range(1.0..5.0);
            let h2: f64 = r.gen_range(1.0..5.0);
            let outer = BlowdownGrid::default();
            let half = 1.1 * outer.half_width * h2.sqrt();
            let inner = BlowdownGrid { half_width: half, resolution: 161 };
            let s1 = 2.0 * half / (inner.resolution - 1) as f64;
            let first = blowdown(&u, h1, &inner).map_err(|e| e.to_string())?;
            let two = blowdown(&first.field, h2, &outer).map_err(|e| e.to_string())?;
            let direct = blowdown(&u, h1 * h2, &outer).map_err(|e| e.to_string())?;
            // Second derivatives of u_{h1} on the intermediate cube.
            let rho = h1.sqrt() * half * std::f64::consts::SQRT_2;
            let d2 = m.norm() + 12.0 * c * rho * rho + d;
            let bound = 2.0 * s1 * s1 / 8.0 * d2 / h2 + 1e-12;
            let g = direct.field.grid();
            let mut worst = 0.0f64;
            for k in direct.field.masked_indices() {
                let x = g.coord(k);
                if x[0] * x[0] + x[1] * x[1] > 1.0 {
                    continue;
                }
                let v = two.field.value(k).ok_or("composed blow-down unmasked in B_1")?;
                worst = worst.max((v - direct.field.values()[k]).abs() / bound);
            }
            Ok(worst)
        },
        1.0,
    )
}

/// Pre-rotating a quadratic by `Q` turns the detected frame `R` into `QR` up
/// to column signs and leaves rank and errors unchanged.
pub fn classifier_rotation_equivariance() -> Suite {
    run(
        "classifier rotation equivariance",
        7,
        |r| {
            // Distinct eigenvalues, occasionally with one null direction.
            let mut ev = [r.gen_range(0.5..0.9), r.gen_range(1.0..1.4), r.gen_range(1.5..2.0)];
            if r.gen_bool(0.3) {
                ev[0] = 0.0;
            }
            let base = rotation3(r);
            let a = base * Matrix3::from_diagonal(&Vector3::from(ev)) * base.transpose();
            let q = rotation3(r);
            let quad = |m: Matrix3<f64>| {
                move |x: &[f64]| {
                    let v = Vector3::new(x[0], x[1], x[2]);
                    Some(0.5 * v.dot(&(m * v)))
                }
            };
            let u = FnField { dim: 3, f: quad(a) };
            let ur = FnField { dim: 3, f: quad(q * a * q.transpose()) };
            let opts = ClassifyOptions::default();
            let hs = [1.0, 10.0];
            let p = classify_profile(&u, &hs, &opts).map_err(|e| e.to_string())?;
            let pr = classify_profile(&ur, &hs, &opts).map_err(|e| e.to_string())?;
            if p.k != pr.k || p.k.is_none() {
                return Err(format!("rank {:?} vs {:?}", p.k, pr.k));
            }
            let rm = Matrix3::from_fn(|i, j| p.rotation[i][j]);
            let rr = Matrix3::from_fn(|i, j| pr.rotation[i][j]);
            let expect = q * rm;
            let mut worst = 0.0f64;
            for j in 0..3 {
                let col = expect.column(j);
                let got = rr.column(j);
                let s = if col.dot(&got) < 0.0 { -1.0 } else { 1.0 };
                worst = worst.max((got - s * col).amax());
            }
            for (e, er) in p.errors.iter().zip(&pr.errors) {
                worst = worst.max((e - er).abs());
            }
            Ok(worst)
        },
        1e-8,
    )
}

pub fn all_suites() -> Vec<Suite> {
    use rayon::prelude::*;
    let suites: Vec<fn() -> Suite> = vec![
        legendre_involution,
        hessian_inverse_pairing,
        elementary_symmetric_brute_force,
        jacobian_fd_consistency,
        sigma_monotonicity,
        blowdown_semigroup,
        classifier_rotation_equivariance,
    ];
    suites.par_iter().map(|f| f()).collect()
}
