//! Two-parameter shooting over ellipsoidal domains and the assembly of
//! soliton families from the tuned solutions.
//!
//! For a domain `Ω_{r,t}` the Dirichlet solution `u_{r,t}` has depth
//! `M = -inf u` and a level set `Γ = {u = -M + 1}` whose transverse and axial
//! reaches define its aspect. The depth increases with both radii, so at a
//! fixed shape ratio `r/t` the inner search on the overall scale is a
//! safeguarded root find on a monotone function; the outer search moves the
//! ratio until the aspect reaches its target.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{build_grid, Domain, EllipsoidDomain};
use crate::elliptic::{continue_problem, DirichletProblem, SolverConfig, DEFAULT_SIGMA_SCHEDULE};
use crate::error::{invalid, Error, Result};
use crate::geometry::{extract_level_set, LevelPolyline};
use crate::grid::{CartesianGrid, GridFunction};
use crate::legendre::{legendre_transform_refined, solve_dual_dirichlet};
use crate::stencil::Boundary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShootingMode {
    /// `L_0[u] = 1` reached by σ-continuation.
    LevelSet,
    /// `L*_1[v] = 1` for the Legendre dual of a σ = 1 solution.
    Dual,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootingTolerances {
    pub depth: f64,
    pub aspect: f64,
    pub resolution: usize,
    pub max_inner: usize,
    pub max_outer: usize,
    pub solver: SolverConfig,
}

impl Default for ShootingTolerances {
    fn default() -> Self {
        Self {
            depth: 1e-2,
            aspect: 5e-2,
            resolution: 97,
            max_inner: 30,
            max_outer: 30,
            solver: SolverConfig::default(),
        }
    }
}

/// Lowest and highest admissible domain radii.
pub const PARAMETER_RANGE: (f64, f64) = (1e-2, 1e3);

/// Minimum number of grid spacings across the shorter semi-axis.
const MIN_NODES_ACROSS: f64 = 4.0;

/// One solve along a shooting trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub r: f64,
    pub t: f64,
    pub depth: f64,
    pub aspect: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShootingResult {
    pub n: usize,
    pub r: f64,
    pub t: f64,
    pub depth: f64,
    pub aspect: f64,
    pub target_depth: f64,
    pub target_aspect: f64,
    pub converged: bool,
    pub mode: ShootingMode,
    pub trace: Vec<Probe>,
    /// `u_{r,t}` (primal mode) or `u*_{r,t}` (dual mode) on its own grid.
    pub solution: GridFunction,
}

impl ShootingResult {
    pub fn depth_residual(&self) -> f64 {
        (self.depth - self.target_depth).abs()
    }

    pub fn aspect_residual(&self) -> f64 {
        (self.aspect - self.target_aspect).abs()
    }

    pub fn domain(&self) -> Result<EllipsoidDomain> {
        EllipsoidDomain::new(self.solution.dim(), self.r, self.t)
    }

    /// Writes the solution next to a JSON manifest that references it by
    /// relative path.
    pub fn save(&self, dir: impl AsRef<Path>, stem: &str) -> Result<ShootingManifest> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let file = format!("{stem}_solution.grid");
        self.solution.save(dir.join(&file))?;
        let m = ShootingManifest {
            n: self.n,
            r: self.r,
            t: self.t,
            depth: self.depth,
            aspect: self.aspect,
            target_depth: self.target_depth,
            target_aspect: self.target_aspect,
            depth_residual: self.depth_residual(),
            aspect_residual: self.aspect_residual(),
            converged: self.converged,
            mode: self.mode,
            trace: self.trace.clone(),
            solution_file: file,
        };
        std::fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&m)?)?;
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShootingManifest {
    pub n: usize,
    pub r: f64,
    pub t: f64,
    pub depth: f64,
    pub aspect: f64,
    pub target_depth: f64,
    pub target_aspect: f64,
    pub depth_residual: f64,
    pub aspect_residual: f64,
    pub converged: bool,
    pub mode: ShootingMode,
    pub trace: Vec<Probe>,
    pub solution_file: String,
}

/// Depth `M = -min u` and the aspect of `{u = -M + 1}`.
///
/// The reaches `sup |x'|` and `sup x_n` over the level set are taken over the
/// sub-level set, which has the same suprema, with crossings located by linear
/// interpolation along grid edges.
pub fn level_max_and_aspect(u: &GridFunction) -> Result<(f64, f64)> {
    let (_, min) = u.argmin().ok_or_else(|| invalid("empty grid function"))?;
    let depth = -min;
    if depth <= 1.0 {
        return Err(Error::EmptyLevelSet(format!("depth {depth:.4} does not exceed 1")));
    }
    let (transverse, axial) = level_reaches(u, 1.0 - depth)?;
    if !(axial > 0.0) {
        return Err(Error::DegenerateInput("level set has no axial reach".into()));
    }
    Ok((depth, transverse / axial))
}

/// `(sup |x'|, sup x_n)` over `{u ≤ level}`.
fn level_reaches(u: &GridFunction, level: f64) -> Result<(f64, f64)> {
    let g = u.grid();
    let dim = g.dim();
    let mut transverse = 0.0f64;
    let mut axial = f64::NEG_INFINITY;
    let mut update = |x: &[f64]| {
        let r = x[..dim - 1].iter().map(|c| c * c).sum::<f64>().sqrt();
        transverse = transverse.max(r);
        axial = axial.max(x[dim - 1]);
    };
    for lin in u.masked_indices() {
        let v = u.values()[lin];
        if v > level {
            continue;
        }
        let c = g.coord(lin);
        update(&c[..dim]);
        for axis in 0..dim {
            for step in [-1isize, 1] {
                let Some(nb) = g.neighbor(lin, axis, step) else {
                    return Err(Error::Truncated("sub-level set reaches the grid edge".into()));
                };
                // Unmasked neighbours lie beyond the boundary, where u vanishes.
                let Some(w) = u.value(nb) else { continue };
                if w > level {
                    let s = (level - v) / (w - v);
                    let mut x = c;
                    x[axis] += step as f64 * s * g.spacing();
                    update(&x[..dim]);
                }
            }
        }
    }
    Ok((transverse, axial))
}

/// Which equation a probe solves.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Setting {
    Mode(ShootingMode),
    /// Level-set equation for functions of `(|x̂|, |x̃|)`, `x̂ ∈ R^{n-2}`.
    Product { n: usize },
}

impl Setting {
    fn grid_dim(self, n: usize) -> usize {
        match self {
            Setting::Product { .. } => 2,
            _ => n,
        }
    }
}

fn solve_probe(setting: Setting, n: usize, r: f64, t: f64, tol: &ShootingTolerances) -> Result<GridFunction> {
    let dim = setting.grid_dim(n);
    let domain = Domain::from(EllipsoidDomain::new(dim, r, t)?);
    let (grid, mask) = build_grid(&domain, tol.resolution)?;
    if r.min(t) < MIN_NODES_ACROSS * grid.spacing() {
        return Err(Error::DegenerateDomain(format!("Ω_(r={r:.4}, t={t:.4}) is not resolved by the grid")));
    }
    let boundary = Boundary::Constant(0.0);
    match setting {
        Setting::Mode(ShootingMode::Dual) => {
            let cfg = SolverConfig { sigma: 1.0, ..tol.solver };
            let (v, stats) = solve_dual_dirichlet(&domain, tol.resolution, &boundary, &cfg)?;
            if !stats.converged {
                return Err(Error::Numerical(format!("dual solve stalled at residual {:.3e}", stats.final_residual)));
            }
            Ok(v)
        }
        _ => {
            let mut problem = DirichletProblem::with_grid(&domain, grid, mask, &boundary)?;
            if let Setting::Product { n } = setting {
                problem = problem.with_radial_multiplicities(&[(n - 3) as f64, 1.0])?;
            }
            let mut sigmas = DEFAULT_SIGMA_SCHEDULE.to_vec();
            sigmas.push(0.0);
            let steps = continue_problem(&problem, &sigmas, &tol.solver, 0.0)?;
            let (u, stats) = steps.into_iter().last().unwrap();
            if !stats.converged || stats.sigma != 0.0 {
                return Err(Error::Numerical(format!(
                    "continuation stalled at sigma {} with residual {:.3e}",
                    stats.sigma, stats.final_residual
                )));
            }
            Ok(u)
        }
    }
}

fn in_range(v: f64) -> bool {
    v >= PARAMETER_RANGE.0 && v <= PARAMETER_RANGE.1
}

fn bracketing(message: impl Into<String>, trace: &[Probe]) -> Error {
    let lines: Vec<String> = trace
        .iter()
        .map(|p| format!("r={:.5} t={:.5} M={:.5} aspect={:.5}", p.r, p.t, p.depth, p.aspect))
        .collect();
    Error::Bracketing {
        message: message.into(),
        trace: lines,
    }
}

/// Safeguarded secant step in log coordinates.
struct Root {
    lo: Option<(f64, f64)>,
    hi: Option<(f64, f64)>,
    last: Vec<(f64, f64)>,
}

impl Root {
    fn new() -> Self {
        Self { lo: None, hi: None, last: Vec::new() }
    }

    /// Records `(log x, g)` where the target is `g = 0` and `g` increases with `x`.
    fn record(&mut self, x: f64, g: f64) {
        if g < 0.0 {
            if self.lo.map_or(true, |(a, _)| x > a) {
                self.lo = Some((x, g));
            }
        } else if self.hi.map_or(true, |(a, _)| x < a) {
            self.hi = Some((x, g));
        }
        self.last.push((x, g));
    }

    /// Next abscissa; `slope_guess` is used before two samples exist and
    /// `max_jump` limits unbracketed moves.
    fn next(&self, slope_guess: f64, max_jump: f64) -> f64 {
        let &(x1, g1) = self.last.last().unwrap();
        let slope = match self.last.len() {
            0 | 1 => slope_guess,
            k => {
                let (x0, g0) = self.last[k - 2];
                let s = (g1 - g0) / (x1 - x0);
                if s.is_finite() && s > 0.0 {
                    s
                } else {
                    slope_guess
                }
            }
        };
        let mut x = x1 - g1 / slope;
        match (self.lo, self.hi) {
            (Some((a, ga)), Some((b, gb))) => {
                // Regula falsi inside the bracket, bisection when the secant leaves it.
                let interior = a + (b - a) * 0.05..b - (b - a) * 0.05;
                if !interior.contains(&x) {
                    let f = a - ga * (b - a) / (gb - ga);
                    x = if interior.contains(&f) { f } else { 0.5 * (a + b) };
                }
            }
            _ => x = x.clamp(x1 - max_jump, x1 + max_jump),
        }
        x
    }
}

/// `(r, t)` for shape ratio `ρ = r/t` and scale `λ`: `r = λ√ρ`, `t = λ/√ρ`.
fn radii(ratio: f64, scale: f64) -> (f64, f64) {
    (scale * ratio.sqrt(), scale / ratio.sqrt())
}

/// Inner search: the scale `λ` with `M = K` at a fixed shape ratio. The depth
/// increases in both `r` and `t`, hence in `λ`.
fn match_depth(
    setting: Setting,
    n: usize,
    ratio: f64,
    scale_guess: f64,
    k: f64,
    tol: &ShootingTolerances,
    trace: &mut Vec<Probe>,
) -> Result<(f64, f64, f64, GridFunction)> {
    let mut root = Root::new();
    let mut scale = scale_guess;
    let mut samples: Vec<(f64, f64)> = Vec::new();
    for _ in 0..tol.max_inner {
        let (r, t) = radii(ratio, scale);
        if !in_range(r) || !in_range(t) {
            return Err(bracketing(format!("no scale in range matches depth {k} at r/t = {ratio:.5}"), trace));
        }
        let u = match solve_probe(setting, n, r, t, tol) {
            Ok(u) => u,
            Err(e) => return Err(bracketing(format!("probe at r = {r:.5}, t = {t:.5} failed: {e}"), trace)),
        };
        let depth = -u.min().unwrap_or(0.0);
        let aspect = if depth > 1.0 { level_max_and_aspect(&u).map(|v| v.1).unwrap_or(f64::NAN) } else { f64::NAN };
        trace.push(Probe { r, t, depth, aspect });
        samples.push((scale, depth));
        let mut sorted = samples.clone();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        if sorted.windows(2).any(|w| w[1].1 < w[0].1 - 1e-9 * w[0].1.abs().max(1.0)) {
            return Err(Error::Numerical(format!(
                "depth is not monotone along r/t = {ratio:.5}: {sorted:?}"
            )));
        }
        if (depth - k).abs() <= tol.depth && aspect.is_finite() {
            return Ok((scale, depth, aspect, u));
        }
        root.record(scale.ln(), depth.max(1e-12).ln() - k.ln());
        scale = root.next(2.0, 2f64.ln()).exp();
    }
    Err(bracketing(format!("depth search at r/t = {ratio:.5} did not converge"), trace))
}

fn shoot(setting: Setting, n: usize, k: f64, theta: f64, tol: &ShootingTolerances) -> Result<ShootingResult> {
    if !(k > 1.0) || !(theta > 0.0) || !theta.is_finite() {
        return Err(invalid("shooting needs K > 1 and theta > 0"));
    }
    let mode = match setting {
        Setting::Mode(m) => m,
        Setting::Product { .. } => ShootingMode::LevelSet,
    };
    let mut scale = (2.0 * (n as f64 - 1.0) * k).sqrt();
    let mut ratio = theta.clamp(0.25, 4.0);
    let mut trace = Vec::new();
    let mut root = Root::new();
    let mut best: Option<(f64, f64, f64, f64, GridFunction)> = None;
    for _ in 0..tol.max_outer {
        let (r, t) = radii(ratio, scale);
        if !in_range(r) || !in_range(t) {
            return Err(bracketing(format!("no (r, t) in range reaches aspect {theta}"), &trace));
        }
        let (s, depth, aspect, u) = match_depth(setting, n, ratio, scale, k, tol, &mut trace)?;
        scale = s;
        let (r, t) = radii(ratio, scale);
        let g = aspect.ln() - theta.ln();
        let unbracketed = root.hi.is_none() || root.lo.is_none();
        if let (true, Some(&(_, g_prev))) = (unbracketed, root.last.last()) {
            // Unbracketed and no longer approaching the target.
            if g.signum() == g_prev.signum() && g.abs() > 0.99 * g_prev.abs() {
                return Err(bracketing(format!("aspect {theta} not bracketed: aspect stalls at {aspect:.4}"), &trace));
            }
        }
        let done = (aspect - theta).abs() <= tol.aspect;
        best = Some((r, t, depth, aspect, u));
        if done {
            break;
        }
        root.record(ratio.ln(), g);
        ratio = root.next(1.0, 2f64.ln()).exp();
    }
    let Some((r, t, depth, aspect, solution)) = best else {
        return Err(bracketing("no probe completed", &trace));
    };
    let converged = (depth - k).abs() <= tol.depth && (aspect - theta).abs() <= tol.aspect;
    if !converged {
        return Err(bracketing(format!("aspect search did not converge (last aspect {aspect:.4})"), &trace));
    }
    Ok(ShootingResult {
        n,
        r,
        t,
        depth,
        aspect,
        target_depth: k,
        target_aspect: theta,
        converged,
        mode,
        trace,
        solution,
    })
}

/// Tunes `(r, t)` so that the Dirichlet solution on `Ω_{r,t}` has depth `K`
/// and level-set aspect `θ`.
pub fn shoot_parameters(n: usize, k: f64, theta: f64, mode: ShootingMode, tol: &ShootingTolerances) -> Result<ShootingResult> {
    if mode == ShootingMode::Dual && n != 2 {
        return Err(invalid("dual shooting is two-dimensional"));
    }
    if !(2..=3).contains(&n) {
        return Err(invalid(format!("dimension {n} not supported")));
    }
    shoot(Setting::Mode(mode), n, k, theta, tol)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FamilyEntry {
    pub k: f64,
    /// `w_k = u - u(0)`, vanishing at the origin.
    pub w: GridFunction,
    pub domain: EllipsoidDomain,
    pub shooting: ShootingResult,
    /// Dual-mode entries: the shifted dual function `w*_k`.
    pub dual: Option<GridFunction>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolitonFamily {
    pub entries: Vec<FamilyEntry>,
    pub theta: f64,
    pub mode: ShootingMode,
    /// `(k, error message)` for every member whose shooting failed.
    pub failures: Vec<(f64, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyManifest {
    pub theta: f64,
    pub mode: ShootingMode,
    pub entries: Vec<FamilyManifestEntry>,
    pub failures: Vec<(f64, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyManifestEntry {
    pub k: f64,
    pub r: f64,
    pub t: f64,
    pub w_file: String,
    pub dual_file: Option<String>,
    pub shooting: ShootingManifest,
}

impl SolitonFamily {
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<FamilyManifest> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let mut entries = Vec::new();
        for (i, e) in self.entries.iter().enumerate() {
            let w_file = format!("w_{i:02}.grid");
            e.w.save(dir.join(&w_file))?;
            let dual_file = match &e.dual {
                Some(d) => {
                    let f = format!("w_dual_{i:02}.grid");
                    d.save(dir.join(&f))?;
                    Some(f)
                }
                None => None,
            };
            let shooting = e.shooting.save(dir, &format!("shooting_{i:02}"))?;
            entries.push(FamilyManifestEntry {
                k: e.k,
                r: e.domain.r(),
                t: e.domain.t(),
                w_file,
                dual_file,
                shooting,
            });
        }
        let m = FamilyManifest {
            theta: self.theta,
            mode: self.mode,
            entries,
            failures: self.failures.clone(),
        };
        std::fs::write(dir.join("family.json"), serde_json::to_string_pretty(&m)?)?;
        Ok(m)
    }
}

/// Shifts a field so that its value at the origin is zero.
fn shift_to_origin(u: &GridFunction) -> Result<GridFunction> {
    let zero = vec![0.0; u.dim()];
    let u0 = u
        .interpolate(&zero)
        .ok_or_else(|| Error::OutOfDomain("origin not covered".into()))?;
    let mut w = u.map(|v| v - u0)?;
    // Tiny negative values near the origin are rounding noise.
    if let Some(m) = w.min() {
        if m < 0.0 && m > -1e-6 {
            w = w.map(|v| v.max(0.0))?;
        }
    }
    Ok(w)
}

/// Primal grid for the back-transform of a dual family member: a box
/// covering the gradient range of `w*` with `resolution` nodes along its
/// longer side.
fn primal_target_grid(dual: &GridFunction, resolution: usize) -> Result<CartesianGrid> {
    let dim = dual.dim();
    let mut reach = vec![0.0f64; dim];
    for lin in dual.masked_indices() {
        if let Some(p) = crate::legendre::discrete_gradient(dual, lin) {
            for a in 0..dim {
                reach[a] = reach[a].max(p[a].abs());
            }
        }
    }
    let longest = reach.iter().cloned().fold(0.0, f64::max);
    if !(longest > 0.0) {
        return Err(Error::DegenerateInput("dual member has no gradient range".into()));
    }
    let spacing = 2.0 * longest / (resolution - 1) as f64;
    let half: Vec<f64> = reach.iter().map(|r| r + spacing).collect();
    CartesianGrid::centered(&vec![0.0; dim], &half, spacing)
}

/// Legendre transform of a shifted dual member onto a primal grid.
pub fn back_transform(dual: &GridFunction, resolution: usize) -> Result<GridFunction> {
    let target = primal_target_grid(dual, resolution)?;
    Ok(legendre_transform_refined(dual, &target)?.dual)
}

/// Primal level curves `{w = c}` of the Legendre transform of a convex dual
/// field `v`, traced in dual variables: `{w = c}` is the image under `Dv` of
/// `{y·Dv(y) - v(y) = c}`.
pub fn primal_level_curves(v: &GridFunction, level: f64) -> Result<Vec<LevelPolyline>> {
    let g = v.grid();
    let dim = g.dim();
    if dim != 2 {
        return Err(invalid("primal level curves are two-dimensional"));
    }
    let mut mask = vec![false; g.len()];
    let mut gx = vec![0.0; g.len()];
    let mut gy = vec![0.0; g.len()];
    let mut value = vec![0.0; g.len()];
    for lin in v.masked_indices() {
        if let Some(p) = crate::legendre::discrete_gradient(v, lin) {
            let y = g.coord(lin);
            mask[lin] = true;
            gx[lin] = p[0];
            gy[lin] = p[1];
            value[lin] = p[0] * y[0] + p[1] * y[1] - v.values()[lin];
        }
    }
    let height = GridFunction::new(g.clone(), value, mask.clone())?;
    let px = GridFunction::new(g.clone(), gx, mask.clone())?;
    let py = GridFunction::new(g.clone(), gy, mask)?;
    let mut out = Vec::new();
    for line in extract_level_set(&height, level)? {
        let mut vertices = Vec::with_capacity(line.len());
        for y in &line.vertices {
            let (Some(a), Some(b)) = (px.interpolate(y), py.interpolate(y)) else {
                return Err(Error::Truncated(format!("level {level} leaves the dual gradient field")));
            };
            vertices.push(vec![a, b]);
        }
        out.push(LevelPolyline::new(vertices, line.closed, level));
    }
    Ok(out)
}

fn family_entry(n: usize, theta: f64, k: f64, mode: ShootingMode, tol: &ShootingTolerances) -> Result<FamilyEntry> {
    let s = shoot_parameters(n, k, theta, mode, tol)?;
    let domain = s.domain()?;
    let shifted = shift_to_origin(&s.solution)?;
    let (w, dual) = match mode {
        ShootingMode::LevelSet => (shifted, None),
        ShootingMode::Dual => (back_transform(&shifted, tol.resolution)?, Some(shifted)),
    };
    Ok(FamilyEntry {
        k,
        w,
        domain,
        shooting: s,
        dual,
    })
}

/// Shoots every depth in `ks` (increasing) and assembles `w_k = u_{r_k,t_k} + k`.
/// Failed members are listed in `failures`.
pub fn build_family(n: usize, theta: f64, ks: &[f64], mode: ShootingMode, tol: &ShootingTolerances) -> Result<SolitonFamily> {
    if ks.is_empty() || ks.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("depth list must be nonempty and increasing"));
    }
    let results: Vec<(f64, Result<FamilyEntry>)> = ks
        .par_iter()
        .map(|&k| (k, family_entry(n, theta, k, mode, tol)))
        .collect();
    let mut entries = Vec::new();
    let mut failures = Vec::new();
    for (k, r) in results {
        match r {
            Ok(e) => entries.push(e),
            Err(e) => failures.push((k, e.to_string())),
        }
    }
    Ok(SolitonFamily {
        entries,
        theta,
        mode,
        failures,
    })
}

/// Sup-distance between two family members on the ball of radius `radius`,
/// sampled on the finer of the two grids.
pub fn member_distance(a: &GridFunction, b: &GridFunction, radius: f64) -> Result<f64> {
    let fine = if a.grid().spacing() <= b.grid().spacing() { a } else { b };
    let mut d = 0.0f64;
    let mut count = 0;
    for lin in fine.masked_indices() {
        let c = fine.grid().coord(lin);
        let x = &c[..fine.dim()];
        if x.iter().map(|v| v * v).sum::<f64>() > radius * radius {
            continue;
        }
        if let (Some(va), Some(vb)) = (a.interpolate(x), b.interpolate(x)) {
            d = d.max((va - vb).abs());
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::OutOfDomain(format!("no common nodes within radius {radius}")));
    }
    Ok(d)
}

/// Entire-type construction for `n ≥ 4` from functions of `(|x̂|, |x̃|)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductConstruction {
    pub n: usize,
    pub shooting: ShootingResult,
    /// `w = u - u(0)` in the reduced coordinates `(|x̂|, |x̃|)`.
    pub reduced: GridFunction,
    /// `max (w - |x|²/2)` over the grid.
    pub comparison_excess: f64,
}

/// Product construction in dimension `n ≥ 4`: the reduced profile is tuned for
/// depth `K` and aspect `θ = sup|x̂| / sup|x̃|`, then compared against `|x|²/2`.
pub fn product_construction(n: usize, theta: f64, k: f64, tol: &ShootingTolerances) -> Result<ProductConstruction> {
    if n < 4 {
        return Err(invalid("the product construction needs n >= 4"));
    }
    let shooting = shoot(Setting::Product { n }, n, k, theta, tol)?;
    let reduced = shift_to_origin(&shooting.solution)?;
    let g = reduced.grid();
    let excess = reduced
        .masked_indices()
        .map(|lin| {
            let c = g.coord(lin);
            reduced.values()[lin] - 0.5 * (c[0] * c[0] + c[1] * c[1])
        })
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(ProductConstruction {
        n,
        shooting,
        reduced,
        comparison_excess: excess,
    })
}

/// Evaluates the reduced level-set operator (with `n - 3` and `1` extra radial
/// multiplicities) on an explicit profile; critical points, where the
/// operator is undefined, are skipped.
pub fn product_operator_residual(n: usize, r: f64, t: f64, resolution: usize, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Result<f64> {
    if n < 4 {
        return Err(invalid("the product construction needs n >= 4"));
    }
    let domain = Domain::from(EllipsoidDomain::new(2, r, t)?);
    let f = std::sync::Arc::new(f);
    let fb = f.clone();
    let problem = DirichletProblem::new(&domain, resolution, &Boundary::function(move |x| fb(x)))?
        .with_radial_multiplicities(&[(n - 3) as f64, 1.0])?;
    let x = problem.discretization().sample(|x| f(x));
    let res = problem.residual(&x, 1e-12);
    let disc = problem.discretization();
    Ok(res
        .iter()
        .enumerate()
        .filter(|(i, _)| disc.gradient(&x, *i)[..2].iter().map(|c| c * c).sum::<f64>() >= 1e-8)
        .fold(0.0f64, |m, (_, v)| m.max(v.abs())))
}

/// Each level curve `{w = h}` of a two-dimensional member is a single convex
/// closed polyline.
pub fn level_sets_convex(w: &GridFunction, levels: &[f64], tol: f64) -> Result<bool> {
    for &h in levels {
        let lines = extract_level_set(w, h)?;
        if lines.len() != 1 || !lines[0].closed || !lines[0].is_convex(tol) {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radial_aspect_is_one() {
        let (grid, mask) = build_grid(&Domain::from(EllipsoidDomain::ball(2, 2.0).unwrap()), 81).unwrap();
        let u = GridFunction::from_fn(grid, mask, |x| 0.5 * (x[0] * x[0] + x[1] * x[1]) - 2.0).unwrap();
        let (m, a) = level_max_and_aspect(&u).unwrap();
        assert!((m - 2.0).abs() < 1e-12);
        assert!((a - 1.0).abs() < 1e-3);
    }

    #[test]
    fn shallow_solution_rejected() {
        let (grid, mask) = build_grid(&Domain::from(EllipsoidDomain::ball(2, 1.0).unwrap()), 41).unwrap();
        let u = GridFunction::from_fn(grid, mask, |x| 0.5 * (x[0] * x[0] + x[1] * x[1]) - 0.5).unwrap();
        assert!(matches!(level_max_and_aspect(&u), Err(Error::EmptyLevelSet(_))));
    }

    #[test]
    fn cylinder_profile_satisfies_reduced_equation() {
        let r = product_operator_residual(4, 2.0, 1.5, 41, |x| 0.5 * x[1] * x[1]).unwrap();
        assert!(r < 1e-10, "{r}");
    }

    #[test]
    fn radial_product_profile() {
        // |x|²/(2(n-1)) solves the full radial equation in R^n.
        let r = product_operator_residual(5, 1.0, 1.0, 41, |x| (x[0] * x[0] + x[1] * x[1]) / 8.0).unwrap();
        assert!(r < 1e-7, "{r}");
    }

    #[test]
    fn low_dimension_rejected() {
        assert!(product_construction(3, 2.0, 2.0, &ShootingTolerances::default()).is_err());
    }
}
