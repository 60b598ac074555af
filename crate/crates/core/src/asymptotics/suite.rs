//! The default battery of estimate checks.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::estimates::{
    aspect_bounds_check, growth_fit, log_concavity_check, pinch_width_check, radial_deviation, width_product_check,
    AspectKind, RadialMode, RadialReference,
};
use super::{classify_profile, rescaled, BlowdownReport, ClassifyOptions, EstimateReport, EstimateSample};
use crate::construction::{build_family, ShootingMode, ShootingTolerances, SolitonFamily};
use crate::curve_flow::{area_law_check, csf_run, SupportCurve, AREA_LAW_TOLERANCE};
use crate::domain::{Domain, EllipsoidDomain};
use crate::elliptic::{solve_level_set, SolverConfig};
use crate::error::Result;
use crate::grid::{FnField, GridFunction, ScalarField};
use crate::legendre::solve_dual_dirichlet;
use crate::reference::{bowl_profile, ReferenceProfile};
use crate::stencil::Boundary;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    /// Grid nodes across the long side of each solve.
    pub resolution: usize,
    pub theta: f64,
    /// Depths of the family members checked.
    pub ks: Vec<f64>,
    /// Log-concavity tolerance relative to the Hessian scale.
    pub concavity_tol: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            resolution: 97,
            theta: 2.0,
            ks: vec![2.0, 4.0],
            concavity_tol: 1e-6,
        }
    }
}

type Check<'a> = (&'static str, Box<dyn Fn() -> Result<EstimateReport> + Send + Sync + 'a>);

/// Dyadic levels below `top`.
fn dyadic_levels(top: f64) -> Vec<f64> {
    (-3..8).map(|j| 2f64.powi(j)).filter(|h| *h < top).collect()
}

fn blowdown_estimate(name: &str, rep: &BlowdownReport, expected_k: usize, ceiling: f64) -> EstimateReport {
    if rep.k != Some(expected_k) {
        return EstimateReport::failed(name, format!("rank {:?}", rep.k));
    }
    let mut samples = Vec::new();
    let mut margin = f64::INFINITY;
    for (i, (&h, &e)) in rep.h_schedule.iter().zip(&rep.errors).enumerate() {
        // Monotone trend with ten percent slack.
        let bound = if i == 0 { ceiling } else { (1.1 * rep.errors[i - 1] + 1e-14).min(ceiling) };
        samples.push(EstimateSample { h, measured: e, bound });
        margin = margin.min(bound - e);
    }
    EstimateReport::new(name, samples, margin, 0.0).with_fitted("k", expected_k as f64)
}

fn family_reports(family: &SolitonFamily, name: &str, run: impl Fn(&GridFunction, f64) -> Result<EstimateReport>) -> Result<EstimateReport> {
    if family.entries.is_empty() {
        return Ok(EstimateReport::failed(name, "family is empty"));
    }
    let mut samples = Vec::new();
    let mut margin = f64::INFINITY;
    let mut slack = 0.0f64;
    for e in &family.entries {
        let rep = run(&e.w, e.k)?;
        if rep.samples.is_empty() {
            return Ok(EstimateReport::failed(name, format!("member K = {}: {:?}", e.k, rep.branch)));
        }
        samples.extend(rep.samples);
        // Keep the member closest to violation.
        if rep.margin + rep.slack < margin + slack {
            margin = rep.margin;
            slack = rep.slack;
        }
    }
    Ok(EstimateReport::new(name, samples, margin, slack).with_fitted("members", family.entries.len() as f64))
}

/// Runs every check concurrently; reports come back sorted by name. Checks
/// that error out are reported as failures carrying the message.
pub fn verify_suite(cfg: &VerifyConfig) -> Result<Vec<EstimateReport>> {
    let tol = ShootingTolerances {
        resolution: cfg.resolution,
        ..Default::default()
    };
    let family = build_family(2, cfg.theta, &cfg.ks, ShootingMode::LevelSet, &tol)?;
    let bowl = bowl_profile(2, 200.0, 0.01)?;
    let res = cfg.resolution;

    let checks: Vec<Check> = vec![
        ("growth_eta", Box::new(|| growth_fit(&ReferenceProfile::eta(2, 2)?, &[1.0, 2.0, 4.0, 8.0]))),
        (
            "growth_bowl",
            Box::new(|| growth_fit(&ReferenceProfile::bowl(bowl.clone()), &[1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0])),
        ),
        (
            "growth_strip_control",
            Box::new(|| Ok(growth_fit(&ReferenceProfile::grim_reaper(2), &[0.5, 1.0, 1.4, 1.55])?.expect_violation(""))),
        ),
        (
            "width_product_radial",
            Box::new(|| {
                let f = FnField { dim: 2, f: |x: &[f64]| Some(0.5 * (x[0] * x[0] + x[1] * x[1])) };
                width_product_check(&f, &[0.5, 1.0, 2.0, 4.0], 0.0, 100.0)
            }),
        ),
        (
            "width_product_family",
            Box::new(|| {
                family_reports(&family, "", |w, k| {
                    width_product_check(w, &dyadic_levels(0.9 * k), w.grid().spacing(), 1e3)
                })
            }),
        ),
        (
            "pinch_paperclip",
            Box::new(|| {
                let clip = ReferenceProfile::Paperclip;
                let scaled: Vec<_> = [400.0, 1600.0, 6400.0, 25600.0]
                    .iter()
                    .map(|&h| rescaled(&clip, h))
                    .collect::<Result<_>>()?;
                let refs: Vec<&dyn ScalarField> = scaled.iter().map(|f| f as &dyn ScalarField).collect();
                pinch_width_check(&refs, 1e3)
            }),
        ),
        (
            "pinch_quadratic_control",
            Box::new(|| {
                let narrow: Vec<_> = [1e-2, 1e-3, 1e-4, 1e-5]
                    .iter()
                    .map(|&d: &f64| FnField {
                        dim: 2,
                        f: move |x: &[f64]| Some(0.5 * x[0] * x[0] + x[1] * x[1] / (2.0 * d * d)),
                    })
                    .collect();
                let refs: Vec<&dyn ScalarField> = narrow.iter().map(|f| f as &dyn ScalarField).collect();
                Ok(pinch_width_check(&refs, 1e3)?.expect_violation(""))
            }),
        ),
        (
            "aspect_primal_radial",
            Box::new(|| {
                let f = FnField { dim: 3, f: |x: &[f64]| Some(x.iter().map(|c| c * c).sum::<f64>() / 4.0) };
                aspect_bounds_check(&f, AspectKind::Primal, &[0.25, 1.0, 4.0], 0.0, 100.0)
            }),
        ),
        (
            "aspect_primal_control",
            Box::new(|| {
                let f = FnField { dim: 3, f: |x: &[f64]| Some(x.iter().map(|c| c * c).sum::<f64>() / 16.0) };
                Ok(aspect_bounds_check(&f, AspectKind::Primal, &[0.25, 1.0, 4.0], 0.0, 100.0)?.expect_violation(""))
            }),
        ),
        (
            "aspect_primal_family",
            Box::new(|| {
                family_reports(&family, "", |w, k| {
                    aspect_bounds_check(w, AspectKind::Primal, &dyadic_levels(0.9 * k), w.grid().spacing(), 1e3)
                })
            }),
        ),
        (
            "aspect_dual_disk",
            Box::new(move || {
                let disk = Domain::from(EllipsoidDomain::ball(2, 1.0)?);
                let cfg = SolverConfig::with_sigma(1.0);
                let (v, _) = solve_dual_dirichlet(&disk, res, &Boundary::Constant(0.0), &cfg)?;
                let v0 = v.interpolate(&[0.0, 0.0]).unwrap_or(0.0);
                let w = v.map(|x| x - v0)?;
                let top = -v0;
                aspect_bounds_check(&w, AspectKind::Dual, &dyadic_levels(0.8 * top), w.grid().spacing(), 10.0)
            }),
        ),
        (
            "log_concavity_disk",
            Box::new(move || {
                let disk = Domain::from(EllipsoidDomain::ball(2, 1.0)?);
                let (u, _) = solve_level_set(&disk, res, &SolverConfig::default(), &Boundary::Constant(0.0))?;
                log_concavity_check(&u, cfg.concavity_tol)
            }),
        ),
        (
            "log_concavity_ellipse",
            Box::new(move || {
                let d = Domain::from(EllipsoidDomain::new(2, 2.0, 1.0)?);
                let (u, _) = solve_level_set(&d, res, &SolverConfig::default(), &Boundary::Constant(0.0))?;
                log_concavity_check(&u, cfg.concavity_tol)
            }),
        ),
        (
            "radial_bowl",
            Box::new(|| {
                let f = ReferenceProfile::bowl(bowl.clone());
                radial_deviation(&f, RadialMode::Sublinear, &RadialReference::Bowl(bowl.clone()), &[4.0, 8.0, 16.0, 32.0])
            }),
        ),
        (
            "radial_tilted_control",
            Box::new(|| {
                let b = ReferenceProfile::bowl(bowl.clone());
                let f = FnField { dim: 2, f: |x: &[f64]| b.eval(x).map(|v| v + 0.1 * x[0]) };
                Ok(radial_deviation(&f, RadialMode::Sublinear, &RadialReference::Bowl(bowl.clone()), &[4.0, 8.0, 16.0, 32.0])?
                    .expect_violation(""))
            }),
        ),
        (
            "blowdown_eta",
            Box::new(|| {
                let rep = classify_profile(&ReferenceProfile::eta(3, 2)?, &[1.0, 10.0, 100.0], &ClassifyOptions::default())?;
                Ok(blowdown_estimate("", &rep, 2, 1e-12))
            }),
        ),
        (
            "blowdown_bowl",
            Box::new(|| {
                let rep = classify_profile(&ReferenceProfile::bowl(bowl.clone()), &[1e2, 1e3, 1e4], &ClassifyOptions::default())?;
                Ok(blowdown_estimate("", &rep, 2, 0.15))
            }),
        ),
        (
            "csf_area_law",
            Box::new(|| {
                let traj = csf_run(&SupportCurve::ellipse(2.0, 1.0, 128)?, 0.6, 1e-3)?;
                let a = area_law_check(&traj)?;
                Ok(EstimateReport::new(
                    "",
                    vec![EstimateSample { h: 0.0, measured: a.slope, bound: -2.0 * std::f64::consts::PI }],
                    AREA_LAW_TOLERANCE - a.relative_deviation,
                    0.0,
                )
                .with_fitted("slope", a.slope))
            }),
        ),
    ];

    let mut reports: Vec<EstimateReport> = checks
        .par_iter()
        .map(|(name, run)| match run() {
            Ok(mut r) => {
                r.name = name.to_string();
                r
            }
            Err(e) => EstimateReport::failed(*name, e.to_string()),
        })
        .collect();
    reports.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(reports)
}
