//! The JKO step `ρ_k = argmin ½d²(ρ_{k−1}μ, ρμ) + h E(ρ)`, its Monge–Ampère
//! characterization `ρ_prev(φ) v₀(φ) det(dφ) = ρ v₀` with `φ = x + h∇F`,
//! the continuation path of the regularity argument, whole trajectories and
//! the piecewise-constant interpolant.
//!
//! Two inner solvers are available. [`InnerSolver::Ma1d`] (1D only) solves a
//! conservative discretization of the Monge–Ampère equation by damped Newton.
//! [`InnerSolver::Sinkhorn`] minimizes the entropic surrogate
//! `S_ε(ρ_prev, ρ) + h E(ρ)` in any dimension.

use alloc::vec::Vec;

use crate::estimates::lambda_sup;
use crate::functionals::{f_field, f_field_values, free_energy, stationary_density, EnergyValue};
use crate::grid::{GridFunction, VectorField};
use crate::transport::{c_transform, default_epsilon, DiscreteDensity, SinkhornConfig, TransportResult};
use crate::{math, Error, ProblemSpec, Result};

mod entropic;
mod newton;
mod residuals;

pub use residuals::{entropic_bias_estimate, ma_residual, ma_residual_pointwise, test_fields, weak_residual, MaResidual};

/// Inner solver of a JKO step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InnerSolver {
    /// Preconditioned Newton iteration on the entropic first-order condition.
    Sinkhorn,
    /// Newton on the conservative 1D Monge–Ampère equation.
    Ma1d,
}

#[derive(Clone, Debug, PartialEq)]
pub struct JkoConfig {
    pub solver: InnerSolver,
    /// Newton stops when `max |R_i| / Δx` (a density) falls below this.
    pub newton_tol: f64,
    /// Entropic solver stops when `max − min` of `F + (g_ab − g_bb)/h` falls below this.
    pub entropic_tol: f64,
    /// Cap on inner iterations.
    pub max_outer: usize,
    /// Initial step length of the entropic solver's Newton iteration.
    pub damping: f64,
    pub sinkhorn: SinkhornConfig,
}

impl Default for JkoConfig {
    fn default() -> Self {
        Self {
            solver: InnerSolver::Ma1d,
            newton_tol: 1e-11,
            entropic_tol: 1e-8,
            max_outer: 500,
            damping: 1.0,
            sinkhorn: SinkhornConfig::default(),
        }
    }
}

impl JkoConfig {
    pub fn with_solver(solver: InnerSolver) -> Self {
        Self { solver, ..Self::default() }
    }

    /// Newton in 1D, the entropic solver in 2D.
    pub fn for_dim(dim: usize) -> Self {
        Self::with_solver(if dim == 1 { InnerSolver::Ma1d } else { InnerSolver::Sinkhorn })
    }

    /// Tolerance the step result is accurate to, in density units.
    pub fn inner_tol(&self) -> f64 {
        match self.solver {
            InnerSolver::Ma1d => self.newton_tol,
            InnerSolver::Sinkhorn => self.entropic_tol,
        }
    }
}

/// Outcome of one JKO step.
#[derive(Clone, Debug)]
pub struct JkoStepResult {
    pub rho_next: DiscreteDensity,
    /// Transport from `ρ_next` (source) to `ρ_prev` (target); `cost` is
    /// `½d²` (the debiased `S_ε` for the entropic solver). For Newton steps the
    /// source potential is `−hF` and the map is `x + h∇F`.
    pub transport: TransportResult,
    /// `cost + h E(ρ_next)`.
    pub objective: f64,
    pub energy: EnergyValue,
    pub inner_iterations: usize,
    /// Inner objective after each accepted iterate (the convex merit for
    /// Newton, `S_ε + hE` for the entropic solver).
    pub inner_objectives: Vec<f64>,
    pub ma_residual_max: f64,
    pub weak_residual_max: f64,
    /// `λ` of `F(ρ_next)`.
    pub lambda: f64,
    /// [`entropic_bias_estimate`] for entropic steps.
    pub entropic_bias: Option<f64>,
}

/// One JKO step from `prev` with step size `h`.
pub fn jko_step(prev: &DiscreteDensity, h: f64, spec: &ProblemSpec, config: &JkoConfig) -> Result<JkoStepResult> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidParameter(alloc::format!("step size must be positive, got {h}")));
    }
    if prev.measure() != spec.measure() {
        return Err(Error::GridMismatch);
    }
    if let Some((node, &value)) = prev.rho().values().iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
        return Err(Error::NonPositive { field: "rho_prev", node, value });
    }
    let grid = *spec.grid();
    let (rho, transport, iterations, objectives) = match config.solver {
        InnerSolver::Ma1d => {
            let problem = newton::MaProblem::new(spec, prev.rho().values(), h)?;
            let u0 = prev.rho().values().iter().map(|&r| math::ln(r)).collect();
            let out = problem.solve(u0, config.newton_tol, config.max_outer)?;
            if let Some(&(node, value)) = problem.fold_nodes(&out.u).first() {
                return Err(Error::NonInjective { node, value });
            }
            let rho: Vec<f64> = out.u.iter().map(|&v| math::exp(v)).collect();
            let big_f = f_field_values(&GridFunction::new(grid, rho.clone())?, spec)?;
            let source = big_f.map(|v| -h * v);
            let target = c_transform(&source);
            let map = VectorField::new(
                grid,
                big_f
                    .partial(0)
                    .values()
                    .iter()
                    .enumerate()
                    .map(|(i, df)| grid.wrap([grid.coords(i)[0] + h * df, 0.0]))
                    .collect(),
            )?;
            let transport = TransportResult {
                cost: problem.map_cost(&out.u),
                raw_cost: None,
                plan: None,
                potentials: (source, target),
                map: Some(map),
                marginal_error: out.residual * grid.spacing(0) * grid.len() as f64,
                iterations: out.iterations,
            };
            (rho, transport, out.iterations, out.merits)
        }
        InnerSolver::Sinkhorn => {
            let eps = config.sinkhorn.epsilon.unwrap_or_else(|| default_epsilon(&grid));
            if (0..grid.dim()).any(|a| eps < 0.25 * grid.spacing(a) * grid.spacing(a)) {
                log::warn!("epsilon {eps:e} is far below the squared grid spacing; the entropic step is quantization dominated");
            }
            let out = entropic::step(prev, h, spec, config)?;
            (out.rho, out.transport, out.iterations, out.objectives)
        }
    };
    let rho_next = DiscreteDensity::normalized(GridFunction::new(grid, rho)?, spec.measure().clone())?;
    let entropic_bias = match config.solver {
        InnerSolver::Sinkhorn => {
            let eps = config.sinkhorn.epsilon.unwrap_or_else(|| default_epsilon(&grid));
            Some(entropic_bias_estimate(&rho_next, prev, eps, spec))
        }
        InnerSolver::Ma1d => None,
    };
    let mut step = diagnose(rho_next, prev, h, spec, transport)?;
    step.inner_iterations = iterations;
    step.inner_objectives = objectives;
    step.entropic_bias = entropic_bias;
    Ok(step)
}

fn diagnose(
    rho_next: DiscreteDensity,
    prev: &DiscreteDensity,
    h: f64,
    spec: &ProblemSpec,
    transport: TransportResult,
) -> Result<JkoStepResult> {
    let energy = free_energy(&rho_next, spec);
    let ma = ma_residual(&rho_next, prev, h, spec)?;
    let weak_residual_max = test_fields(spec.grid())
        .iter()
        .map(|(_, xi)| weak_residual(&rho_next, prev, h, spec, xi).abs())
        .fold(0.0, f64::max);
    let lambda = lambda_sup(&f_field(&rho_next, spec)?);
    Ok(JkoStepResult {
        objective: transport.cost + h * energy.total,
        rho_next,
        transport,
        energy,
        inner_iterations: 0,
        inner_objectives: Vec::new(),
        ma_residual_max: ma.residual.sup_norm(),
        weak_residual_max,
        lambda,
        entropic_bias: None,
    })
}

/// The densities `ρ₀ … ρ_N` of one run and their diagnostics.
#[derive(Clone, Debug)]
pub struct FlowTrajectory {
    pub spec: ProblemSpec,
    pub config: JkoConfig,
    pub h: f64,
    pub densities: Vec<DiscreteDensity>,
    /// Step `k` (0-based) produced `densities[k + 1]`.
    pub steps: Vec<JkoStepResult>,
    /// `λ_k` for `k = 0 … N` (only as far as the run got).
    pub lambdas: Vec<f64>,
    /// `E(ρ_k)` for the densities computed.
    pub energies: Vec<EnergyValue>,
    /// Why the run stopped early, if it did.
    pub failure: Option<Error>,
}

impl FlowTrajectory {
    pub fn is_complete(&self) -> bool {
        self.failure.is_none() && self.densities.len() == self.spec.n() + 1
    }

    /// Rebuilds a trajectory from saved densities `ρ₀ … ρ_k` and the step
    /// costs between them. Energies, `λ` and residuals are recomputed; the
    /// transport of each step carries only its cost.
    pub fn restore(spec: &ProblemSpec, config: &JkoConfig, densities: Vec<GridFunction>, costs: &[f64]) -> Result<Self> {
        if densities.is_empty() || costs.len() + 1 != densities.len() || densities.len() > spec.n() + 1 {
            return Err(Error::InvalidParameter(alloc::format!(
                "{} densities and {} step costs do not form a run of at most {} steps",
                densities.len(),
                costs.len(),
                spec.n()
            )));
        }
        let h = spec.h();
        let densities = densities
            .into_iter()
            .map(|rho| DiscreteDensity::new(rho, spec.measure().clone()))
            .collect::<Result<Vec<_>>>()?;
        let mut steps = Vec::with_capacity(costs.len());
        for (k, &cost) in costs.iter().enumerate() {
            let grid = *spec.grid();
            let transport = TransportResult {
                cost,
                raw_cost: None,
                plan: None,
                potentials: (GridFunction::zeros(grid), GridFunction::zeros(grid)),
                map: None,
                marginal_error: 0.0,
                iterations: 0,
            };
            steps.push(diagnose(densities[k + 1].clone(), &densities[k], h, spec, transport)?);
        }
        let mut lambdas = alloc::vec![lambda_sup(&f_field(&densities[0], spec)?)];
        lambdas.extend(steps.iter().map(|s| s.lambda));
        let energies = densities.iter().map(|d| free_energy(d, spec)).collect();
        Ok(Self { spec: spec.clone(), config: config.clone(), h, densities, steps, lambdas, energies, failure: None })
    }

    /// Steps `k` with `h λ_k > 1/8`.
    pub fn cap_violations(&self) -> Vec<usize> {
        self.lambdas
            .iter()
            .enumerate()
            .filter(|(_, l)| self.h * **l > 0.125)
            .map(|(k, _)| k)
            .collect()
    }

    /// `ρ_k` for `t ∈ [kK/N, (k+1)K/N)`; `t = K` gives `ρ_N`.
    pub fn interpolate(&self, t: f64) -> Result<&DiscreteDensity> {
        let (k_total, n) = (self.spec.k(), self.spec.n());
        if !(0.0..=k_total).contains(&t) {
            return Err(Error::TimeOutOfRange { t, k: k_total });
        }
        let time = |k: usize| k as f64 * k_total / n as f64;
        let mut k = math::floor(t * n as f64 / k_total) as usize;
        k = k.min(n);
        while k > 0 && time(k) > t {
            k -= 1;
        }
        while k < n && time(k + 1) <= t {
            k += 1;
        }
        self.densities.get(k).ok_or(Error::TimeOutOfRange { t, k: k_total })
    }
}

/// Free-function form of [`FlowTrajectory::interpolate`].
pub fn interpolate(traj: &FlowTrajectory, t: f64) -> Result<&DiscreteDensity> {
    traj.interpolate(t)
}

/// Runs `N` steps of size `h = K/N` from `ρ₀`; stops at the first failing
/// step and records the error in [`FlowTrajectory::failure`].
pub fn run_flow(spec: &ProblemSpec, config: &JkoConfig) -> FlowTrajectory {
    let h = spec.h();
    let rho0 = spec.rho0().clone();
    let mut traj = FlowTrajectory {
        spec: spec.clone(),
        config: config.clone(),
        h,
        energies: alloc::vec![free_energy(&rho0, spec)],
        lambdas: Vec::new(),
        densities: alloc::vec![rho0],
        steps: Vec::new(),
        failure: None,
    };
    match f_field(spec.rho0(), spec) {
        Ok(f0) => traj.lambdas.push(lambda_sup(&f0)),
        Err(e) => {
            traj.failure = Some(e);
            return traj;
        }
    }
    for k in 0..spec.n() {
        match jko_step(&traj.densities[k], h, spec, config) {
            Ok(step) => {
                log::debug!("step {}: cost {:e}, energy {:e}", k + 1, step.transport.cost, step.energy.total);
                traj.densities.push(step.rho_next.clone());
                traj.energies.push(step.energy);
                traj.lambdas.push(step.lambda);
                traj.steps.push(step);
            }
            Err(e) => {
                log::warn!("step {} failed: {e}", k + 1);
                traj.failure = Some(e);
                break;
            }
        }
    }
    traj
}

/// Solution of the continuation path.
#[derive(Clone, Debug)]
pub struct ContinuationResult {
    pub rho: DiscreteDensity,
    /// `(s, λ(s))` at each stage, starting at `s = 0`.
    pub lambdas: Vec<(f64, f64)>,
    pub newton_iterations: usize,
}

/// Marches `s` from 0 to 1 on the family whose target is
/// `(ρ∞)^{1−s} (ρ₀)^s` (renormalized against `μ`), warm-starting Newton at
/// each stage from the previous one. At `s = 0` the solution is `ρ∞`.
pub fn continuation_solve(spec: &ProblemSpec, h: f64, s_steps: usize, config: &JkoConfig) -> Result<ContinuationResult> {
    let grid = *spec.grid();
    if grid.dim() != 1 {
        return Err(Error::Dimension(grid.dim()));
    }
    if s_steps == 0 {
        return Err(Error::InvalidParameter("s_steps must be at least 1".into()));
    }
    let lambda0 = lambda_sup(&f_field(spec.rho0(), spec)?);
    if h * lambda0 > 0.125 {
        return Err(Error::InvalidParameter(alloc::format!("h lambda_0 = {} exceeds 1/8", h * lambda0)));
    }
    let rho_inf = stationary_density(spec);
    let mu = spec.measure();
    let mut u: Vec<f64> = rho_inf.rho().values().iter().map(|&r| math::ln(r)).collect();
    let mut lambdas = alloc::vec![(0.0, lambda_sup(&f_field(&rho_inf, spec)?))];
    let mut total = 0;
    let mut last_good = 0.0;
    for j in 1..=s_steps {
        let s = j as f64 / s_steps as f64;
        let raw = rho_inf
            .rho()
            .zip_map(spec.rho0().rho(), |a, b| math::exp((1.0 - s) * math::ln(a) + s * math::ln(b)));
        let target = DiscreteDensity::normalized(raw, mu.clone())?;
        let problem = newton::MaProblem::new(spec, target.rho().values(), h)?;
        let lambda_prev = lambdas.last().map_or(0.0, |l| l.1);
        match problem.solve(u.clone(), config.newton_tol, config.max_outer) {
            Ok(out) => {
                total += out.iterations;
                u = out.u;
                let rho = GridFunction::new(grid, u.iter().map(|&v| math::exp(v)).collect())?;
                lambdas.push((s, lambda_sup(&f_field_values(&rho, spec)?)));
                last_good = s;
            }
            Err(_) => return Err(Error::Continuation { s, last_good_s: last_good, lambda: lambda_prev }),
        }
    }
    let rho = DiscreteDensity::normalized(GridFunction::new(grid, u.iter().map(|&v| math::exp(v)).collect())?, mu.clone())?;
    Ok(ContinuationResult { rho, lambdas, newton_iterations: total })
}
