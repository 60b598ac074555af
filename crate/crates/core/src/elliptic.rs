//! Damped Newton solver for `L_σ[u] = Σ (δ_ij - u_i u_j / (σ + |Du|²)) u_ij = f(u)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{build_grid, Domain};
use crate::error::{invalid, Error, Result};
use crate::geometry::{hessian_at, symmetric_eigenvalues};
use crate::grid::{CartesianGrid, GridFunction};
use crate::linalg::{self, CsrMatrix, LinearMethod};
use crate::stencil::{Boundary, Discretization};

pub const DEFAULT_EPS_REG: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub sigma: f64,
    pub eps_reg: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub damping: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            sigma: 0.0,
            eps_reg: DEFAULT_EPS_REG,
            tolerance: 1e-9,
            max_iterations: 60,
            damping: 0.5,
        }
    }
}

impl SolverConfig {
    pub fn with_sigma(sigma: f64) -> Self {
        Self {
            sigma,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.sigma) {
            return Err(invalid(format!("sigma {} outside [0, 1]", self.sigma)));
        }
        if !(self.eps_reg > 0.0) {
            return Err(invalid("eps_reg must be positive"));
        }
        if !(self.tolerance > 0.0) {
            return Err(invalid("tolerance must be positive"));
        }
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return Err(invalid("damping must lie in (0, 1)"));
        }
        if self.max_iterations == 0 {
            return Err(invalid("max_iterations must be positive"));
        }
        Ok(())
    }

    pub fn sigma_eff(&self) -> f64 {
        self.sigma.max(self.eps_reg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub iterations: usize,
    pub final_residual: f64,
    pub min_hessian_eigenvalue: f64,
    pub converged: bool,
    /// Iterations that fell back to a frozen-coefficient step.
    pub picard_steps: usize,
    pub sigma: f64,
}

/// Right-hand side `f(u)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rhs {
    One,
    /// `e^u`, used by the log-transformed equation.
    Exp,
}

impl Rhs {
    fn value(self, u: f64) -> f64 {
        match self {
            Rhs::One => 1.0,
            Rhs::Exp => u.exp(),
        }
    }

    fn derivative(self, u: f64) -> f64 {
        match self {
            Rhs::One => 0.0,
            Rhs::Exp => u.exp(),
        }
    }
}

/// Coefficients `a_kl = δ_kl - p_k p_l / s` and the operator value.
#[inline]
fn coefficients(p: &[f64; 3], dim: usize, sigma: f64) -> ([[f64; 3]; 3], f64) {
    let s = sigma + p[..dim].iter().map(|c| c * c).sum::<f64>();
    let mut a = [[0.0; 3]; 3];
    for k in 0..dim {
        for l in 0..dim {
            a[k][l] = if k == l { 1.0 } else { 0.0 } - p[k] * p[l] / s;
        }
    }
    (a, s)
}

/// `Σ (δ_ij - p_i p_j / (σ + |p|²)) H_ij` for explicit derivatives.
pub fn operator_value(p: &[f64], hess: &[[f64; 3]; 3], sigma: f64) -> f64 {
    let dim = p.len();
    let mut pp = [0.0; 3];
    pp[..dim].copy_from_slice(p);
    let (a, _) = coefficients(&pp, dim, sigma);
    let mut v = 0.0;
    for k in 0..dim {
        for l in 0..dim {
            v += a[k][l] * hess[k][l];
        }
    }
    v
}

/// A discretized Dirichlet problem on a fixed grid.
#[derive(Debug, Clone)]
pub struct DirichletProblem {
    disc: Discretization,
    domain: Domain,
    rhs: Rhs,
    /// Extra radial multiplicity per axis: adds `m_a u_a / x_a` to the
    /// operator, which reduces a rotation-invariant problem to its profile.
    multiplicities: [f64; 3],
}

impl DirichletProblem {
    pub fn new(domain: &Domain, resolution: usize, boundary: &Boundary) -> Result<Self> {
        let (grid, mask) = build_grid(domain, resolution)?;
        Self::with_grid(domain, grid, mask, boundary)
    }

    pub fn with_grid(domain: &Domain, grid: CartesianGrid, mask: Vec<bool>, boundary: &Boundary) -> Result<Self> {
        Ok(Self {
            disc: Discretization::new(domain, grid, mask, boundary)?,
            domain: domain.clone(),
            rhs: Rhs::One,
            multiplicities: [0.0; 3],
        })
    }

    pub fn with_rhs(mut self, rhs: Rhs) -> Self {
        self.rhs = rhs;
        self
    }

    /// Treats axis `a` as the radius of an `m_a + 1`-dimensional block.
    pub fn with_radial_multiplicities(mut self, m: &[f64]) -> Result<Self> {
        if m.len() != self.disc.dim() || m.iter().any(|v| !(*v >= 0.0)) {
            return Err(invalid("one nonnegative multiplicity per axis required"));
        }
        self.multiplicities[..m.len()].copy_from_slice(m);
        Ok(self)
    }

    fn axis_coordinate(&self, i: usize) -> [f64; 3] {
        self.disc.grid().coord(self.disc.node_of(i))
    }

    /// Whether a coordinate counts as lying on the axis of its block.
    fn on_axis(&self, c: f64) -> bool {
        c.abs() < 1e-9 * self.disc.grid().spacing()
    }

    fn reduced_terms(&self, x: &[f64], i: usize, p: &[f64; 3]) -> f64 {
        let dim = self.disc.dim();
        let c = self.axis_coordinate(i);
        let mut v = 0.0;
        for a in 0..dim {
            let m = self.multiplicities[a];
            if m == 0.0 {
                continue;
            }
            v += if self.on_axis(c[a]) {
                m * self.disc.second(i, a, a).eval(x)
            } else {
                m * p[a] / c[a]
            };
        }
        v
    }

    pub fn discretization(&self) -> &Discretization {
        &self.disc
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn unknowns(&self) -> usize {
        self.disc.unknowns()
    }

    /// Nodewise residual `L_σ[u] - f(u)` with `σ` already regularized.
    pub fn residual(&self, x: &[f64], sigma: f64) -> Vec<f64> {
        let dim = self.disc.dim();
        (0..self.unknowns())
            .into_par_iter()
            .map(|i| {
                let p = self.disc.gradient(x, i);
                let h = self.disc.hessian(x, i);
                let (a, _) = coefficients(&p, dim, sigma);
                let mut v = 0.0;
                for k in 0..dim {
                    for l in 0..dim {
                        v += a[k][l] * h[k][l];
                    }
                }
                v + self.reduced_terms(x, i, &p) - self.rhs.value(x[i])
            })
            .collect()
    }

    /// Jacobian of [`Self::residual`]; `frozen` drops the dependence of the
    /// coefficients on the gradient.
    pub fn jacobian(&self, x: &[f64], sigma: f64, frozen: bool) -> CsrMatrix {
        let dim = self.disc.dim();
        let rows: Vec<Vec<(usize, usize, f64)>> = (0..self.unknowns())
            .into_par_iter()
            .map(|i| {
                let p = self.disc.gradient(x, i);
                let h = self.disc.hessian(x, i);
                let (a, s) = coefficients(&p, dim, sigma);
                let mut row = Vec::with_capacity(24);
                for k in 0..dim {
                    for l in k..dim {
                        let c = if k == l { a[k][k] } else { 2.0 * a[k][l] };
                        for &(j, w) in &self.disc.second(i, k, l).terms {
                            row.push((i, j, c * w));
                        }
                    }
                }
                if !frozen {
                    let mut hp = [0.0; 3];
                    let mut php = 0.0;
                    for k in 0..dim {
                        for l in 0..dim {
                            hp[k] += h[k][l] * p[l];
                        }
                        php += p[k] * hp[k];
                    }
                    for m in 0..dim {
                        let b = -2.0 * hp[m] / s + 2.0 * php * p[m] / (s * s);
                        for &(j, w) in &self.disc.first(i, m).terms {
                            row.push((i, j, b * w));
                        }
                    }
                }
                let c = self.axis_coordinate(i);
                for a in 0..dim {
                    let m = self.multiplicities[a];
                    if m == 0.0 {
                        continue;
                    }
                    let (comb, f) = if self.on_axis(c[a]) {
                        (self.disc.second(i, a, a), m)
                    } else {
                        (self.disc.first(i, a), m / c[a])
                    };
                    for &(j, w) in &comb.terms {
                        row.push((i, j, f * w));
                    }
                }
                row.push((i, i, -self.rhs.derivative(x[i])));
                row
            })
            .collect();
        let triplets: Vec<_> = rows.into_iter().flatten().collect();
        CsrMatrix::from_triplets(self.unknowns(), &triplets)
    }

    /// Smallest eigenvalue of the discrete Hessian over fully interior nodes.
    pub fn min_hessian_eigenvalue(&self, x: &[f64]) -> f64 {
        let dim = self.disc.dim();
        (0..self.unknowns())
            .into_par_iter()
            .filter(|&i| self.disc.is_interior(i))
            .map(|i| symmetric_eigenvalues(&self.disc.hessian(x, i), dim)[0])
            .reduce(|| f64::INFINITY, f64::min)
    }

    /// Paraboloid matching the domain's shape, scaled so that its Laplacian
    /// equals one.
    pub fn initial_guess(&self, boundary_level: f64) -> Vec<f64> {
        let half = self.domain.half_widths();
        let center = self.domain.center();
        let inv: f64 = half.iter().map(|a| 1.0 / (a * a)).sum();
        let s = 1.0 / (2.0 * inv);
        self.disc.sample(|x| {
            let q: f64 = x
                .iter()
                .zip(&half)
                .zip(&center)
                .map(|((xi, a), c)| ((xi - c) / a).powi(2))
                .sum();
            boundary_level + s * (q - 1.0)
        })
    }

    /// Solution of the Poisson problem with the same boundary data and
    /// right-hand side, a guess that already matches nonconstant data.
    pub fn poisson_guess(&self) -> Result<Vec<f64>> {
        let zero = vec![0.0; self.unknowns()];
        let j = self.jacobian(&zero, 1.0, true);
        let rhs: Vec<f64> = self.residual(&zero, 1.0).iter().map(|v| -v).collect();
        linalg::solve(&j, &rhs, LinearMethod::for_dim(self.disc.dim()))
    }

    /// Damped Newton iteration from `x0`.
    pub fn solve(&self, config: &SolverConfig, x0: Vec<f64>) -> Result<(Vec<f64>, SolveStats)> {
        config.validate()?;
        if x0.len() != self.unknowns() {
            return Err(invalid("initial guess has the wrong length"));
        }
        let sigma = config.sigma_eff();
        let method = LinearMethod::for_dim(self.disc.dim());
        let norm = |r: &[f64]| r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let merit = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>();
        let mut x = x0;
        let mut r = self.residual(&x, sigma);
        let mut rn = norm(&r);
        let mut rm = merit(&r);
        if !rn.is_finite() {
            return Err(Error::Numerical("initial residual is not finite".into()));
        }
        let mut min_eig = self.min_hessian_eigenvalue(&x);
        let mut iterations = 0;
        let mut picard_steps = 0;
        let min_step = 2f64.powi(-20);
        while rn > config.tolerance && iterations < config.max_iterations {
            iterations += 1;
            let mut accepted = false;
            for frozen in [false, true] {
                let j = self.jacobian(&x, sigma, frozen);
                let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
                let Ok(delta) = linalg::solve(&j, &rhs, method) else { continue };
                let mut lambda = 1.0;
                while lambda >= min_step {
                    let trial: Vec<f64> = x.iter().zip(&delta).map(|(a, d)| a + lambda * d).collect();
                    let rt = self.residual(&trial, sigma);
                    let rtm = merit(&rt);
                    if rtm.is_finite() && rtm < rm {
                        min_eig = self.min_hessian_eigenvalue(&trial);
                        x = trial;
                        rn = norm(&rt);
                        rm = rtm;
                        r = rt;
                        accepted = true;
                        break;
                    }
                    lambda *= config.damping;
                }
                if accepted {
                    if frozen {
                        picard_steps += 1;
                    }
                    break;
                }
            }
            if !accepted {
                break;
            }
        }
        let stats = SolveStats {
            iterations,
            final_residual: rn,
            min_hessian_eigenvalue: min_eig,
            converged: rn <= config.tolerance,
            picard_steps,
            sigma: config.sigma,
        };
        Ok((x, stats))
    }
}

/// Solves `L_σ[u] = 1` in `domain` with `u = g` on the boundary, starting from
/// a paraboloid.
pub fn solve_dirichlet(domain: &Domain, resolution: usize, config: &SolverConfig, g: f64) -> Result<(GridFunction, SolveStats)> {
    solve_dirichlet_with(domain, resolution, config, &Boundary::Constant(g), None)
}

/// General form of [`solve_dirichlet`]: arbitrary boundary data and an
/// optional warm start on the same grid.
pub fn solve_dirichlet_with(
    domain: &Domain,
    resolution: usize,
    config: &SolverConfig,
    boundary: &Boundary,
    initial: Option<&GridFunction>,
) -> Result<(GridFunction, SolveStats)> {
    let problem = DirichletProblem::new(domain, resolution, boundary)?;
    let x0 = match initial {
        Some(u) => problem.disc.from_grid_function(u)?,
        None => match boundary {
            Boundary::Constant(g) => problem.initial_guess(*g),
            Boundary::Function(_) => problem.poisson_guess()?,
        },
    };
    let (x, stats) = problem.solve(config, x0)?;
    Ok((problem.disc.to_grid_function(&x)?, stats))
}

/// Solves along a descending list of σ values, each warm-started from the
/// previous one. Stops after the first non-converged member, which is still
/// returned.
pub fn sigma_continuation(
    domain: &Domain,
    resolution: usize,
    sigmas: &[f64],
    config: &SolverConfig,
) -> Result<Vec<(GridFunction, SolveStats)>> {
    continuation_with(domain, resolution, sigmas, config, &Boundary::Constant(0.0))
}

pub fn continuation_with(
    domain: &Domain,
    resolution: usize,
    sigmas: &[f64],
    config: &SolverConfig,
    boundary: &Boundary,
) -> Result<Vec<(GridFunction, SolveStats)>> {
    if sigmas.is_empty() {
        return Err(invalid("empty sigma list"));
    }
    if sigmas.windows(2).any(|w| w[1] > w[0]) || *sigmas.last().unwrap() < 0.0 {
        return Err(invalid("sigma list must be descending and nonnegative"));
    }
    let problem = DirichletProblem::new(domain, resolution, boundary)?;
    continue_problem(&problem, sigmas, config, boundary.value(&domain.center()))
}

/// Continuation on an already assembled problem, starting from the paraboloid
/// guess at `boundary_level`.
pub fn continue_problem(
    problem: &DirichletProblem,
    sigmas: &[f64],
    config: &SolverConfig,
    boundary_level: f64,
) -> Result<Vec<(GridFunction, SolveStats)>> {
    if sigmas.is_empty() {
        return Err(invalid("empty sigma list"));
    }
    if sigmas.windows(2).any(|w| w[1] > w[0]) || *sigmas.last().unwrap() < 0.0 {
        return Err(invalid("sigma list must be descending and nonnegative"));
    }
    let mut x = problem.initial_guess(boundary_level);
    let mut out = Vec::with_capacity(sigmas.len());
    for &sigma in sigmas {
        let cfg = SolverConfig { sigma, ..*config };
        let (next, stats) = problem.solve(&cfg, x)?;
        let converged = stats.converged;
        out.push((problem.disc.to_grid_function(&next)?, stats));
        x = next;
        if !converged {
            break;
        }
    }
    Ok(out)
}

/// Default schedule ending at the regularized level-set equation.
pub const DEFAULT_SIGMA_SCHEDULE: [f64; 5] = [1.0, 0.1, 0.01, 1e-4, 1e-6];

/// σ ≈ 0 solve reached through [`DEFAULT_SIGMA_SCHEDULE`] followed by σ = 0.
pub fn solve_level_set(domain: &Domain, resolution: usize, config: &SolverConfig, boundary: &Boundary) -> Result<(GridFunction, SolveStats)> {
    let mut sigmas = DEFAULT_SIGMA_SCHEDULE.to_vec();
    sigmas.push(0.0);
    let mut steps = continuation_with(domain, resolution, &sigmas, config, boundary)?;
    Ok(steps.pop().unwrap())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResidualMode {
    Full,
    Decomposed,
}

/// Residual of the operator on an arbitrary grid function.
#[derive(Debug, Clone, PartialEq)]
pub enum OperatorResidual {
    /// `L_σ[u] - 1`; masked only where the stencil fits and `σ + |Du|² ≥ eps`.
    Full(GridFunction),
    /// `(Δu - u_γγ, σ u_γγ / (σ + u_γ²))` with `γ = Du/|Du|`.
    Decomposed { curvature: GridFunction, sigma_term: GridFunction },
}

/// Central-difference operator residual. Nodes without a full stencil or with
/// `σ + |Du|² < DEFAULT_EPS_REG` are left out of the returned mask.
pub fn operator_residual(u: &GridFunction, sigma: f64, mode: ResidualMode) -> Result<OperatorResidual> {
    if !(sigma >= 0.0) {
        return Err(invalid("sigma must be nonnegative"));
    }
    let g = u.grid();
    let dim = g.dim();
    let h = g.spacing();
    let n = g.len();
    let mut first = vec![f64::NAN; n];
    let mut second = vec![f64::NAN; n];
    let mut mask = vec![false; n];
    for lin in u.masked_indices() {
        let Some(hess) = hessian_at(u, lin) else { continue };
        let mut p = [0.0; 3];
        let mut ok = true;
        for (a, pa) in p.iter_mut().enumerate().take(dim) {
            match (
                g.neighbor(lin, a, 1).and_then(|k| u.value(k)),
                g.neighbor(lin, a, -1).and_then(|k| u.value(k)),
            ) {
                (Some(r), Some(l)) => *pa = (r - l) / (2.0 * h),
                _ => ok = false,
            }
        }
        let q: f64 = p[..dim].iter().map(|c| c * c).sum();
        if !ok || sigma + q < DEFAULT_EPS_REG {
            continue;
        }
        mask[lin] = true;
        let lap: f64 = (0..dim).map(|a| hess[a][a]).sum();
        let mut pgp = 0.0;
        for k in 0..dim {
            for l in 0..dim {
                pgp += p[k] * hess[k][l] * p[l];
            }
        }
        match mode {
            ResidualMode::Full => {
                first[lin] = lap - pgp / (sigma + q) - 1.0;
            }
            ResidualMode::Decomposed => {
                let ugg = if q > 0.0 { pgp / q } else { 0.0 };
                first[lin] = lap - ugg;
                second[lin] = sigma * ugg / (sigma + q);
            }
        }
    }
    let grid = g.clone();
    Ok(match mode {
        ResidualMode::Full => OperatorResidual::Full(GridFunction::new(grid, first, mask)?),
        ResidualMode::Decomposed => OperatorResidual::Decomposed {
            curvature: GridFunction::new(grid.clone(), first, mask.clone())?,
            sigma_term: GridFunction::new(grid, second, mask)?,
        },
    })
}

/// Report for the log-transformed solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogTransformReport {
    pub cap: f64,
    /// Largest residual over nodes next to the boundary.
    pub boundary_residual: f64,
    /// Largest residual elsewhere.
    pub interior_residual: f64,
    pub warning: Option<String>,
}

/// Solves `(δ_ij - ψ_i ψ_j / |Dψ|²) ψ_ij = e^ψ` with `ψ` capped at
/// `-log(tolerance)` on the boundary; `u = -e^{-ψ}` solves the level-set
/// equation.
pub fn solve_log_transformed(
    domain: &Domain,
    resolution: usize,
    config: &SolverConfig,
) -> Result<(GridFunction, SolveStats, LogTransformReport)> {
    if config.sigma != 0.0 {
        return Err(invalid("the log-transformed equation is solved with sigma = 0 only"));
    }
    let cap = -config.tolerance.ln();
    let problem = DirichletProblem::new(domain, resolution, &Boundary::Constant(cap))?.with_rhs(Rhs::Exp);
    // Start from -log(-q) for the paraboloid q vanishing on the boundary,
    // clipped to the cap.
    let q = problem.initial_guess(0.0);
    let mut x: Vec<f64> = q.iter().map(|v| (-(-v).max(1e-300).ln()).min(cap)).collect();
    // Continuation in σ as for the primal equation.
    let mut stats = None;
    for &sigma in DEFAULT_SIGMA_SCHEDULE.iter().chain(std::iter::once(&0.0)) {
        let cfg = SolverConfig {
            sigma,
            max_iterations: config.max_iterations.max(100),
            ..*config
        };
        let (next, s) = problem.solve(&cfg, x)?;
        x = next;
        let done = !s.converged;
        stats = Some(s);
        if done {
            break;
        }
    }
    let stats = stats.unwrap();
    let r = problem.residual(&x, config.eps_reg);
    let mut boundary_residual: f64 = 0.0;
    let mut interior_residual: f64 = 0.0;
    for (i, v) in r.iter().enumerate() {
        if problem.disc.is_interior(i) {
            interior_residual = interior_residual.max(v.abs());
        } else {
            boundary_residual = boundary_residual.max(v.abs());
        }
    }
    let warning = (!stats.converged || boundary_residual > 1e3 * config.tolerance.max(1e-6)).then(|| {
        format!(
            "boundary layer unresolved at cap {cap:.3}: boundary residual {boundary_residual:.3e}"
        )
    });
    Ok((
        problem.disc.to_grid_function(&x)?,
        stats,
        LogTransformReport {
            cap,
            boundary_residual,
            interior_residual,
            warning,
        },
    ))
}
