//! Crank–Nicolson reference solver for `∂tφ = Δφ + ⟨∇φ,∇Ψ⟩ + fφ`.
//!
//! Two spatial discretizations of `L` are provided. The advective form uses
//! centered differences of each term as written. When `f` is consistent with
//! `v₀` the operator equals `(1/v₀) ∇·(v₀ s ∇(φ/s))` with `s = v₀ e^{−Ψ}`, and
//! the divergence form discretizes that flux with face coefficients averaged
//! from the nodes. It conserves `∫φ dμ` to round-off and has `ρ∞ ∝ s` as an
//! exact discrete steady state.
//!
//! Centered advection is not monotone; steps with
//! `dt ≤ Δx / max|∇Ψ|` are recommended.

use alloc::vec::Vec;

use crate::functionals::{drift_diffusion_stencil, ConsistencyMode};
use crate::grid::GridFunction;
use crate::linalg::PeriodicStencil;
use crate::{math, Error, ProblemSpec, Result};

/// Relative residual of the 2D iterative solve.
pub const ITERATIVE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PdeForm {
    Advective,
    Divergence,
}

impl PdeForm {
    /// Divergence form unless `f` was given without a matching `v₀`.
    pub fn for_spec(spec: &ProblemSpec) -> Self {
        match spec.mode() {
            ConsistencyMode::Given => Self::Advective,
            _ => Self::Divergence,
        }
    }
}

/// The discrete operator `L` in the requested form.
pub fn operator(spec: &ProblemSpec, form: PdeForm) -> PeriodicStencil {
    match form {
        PdeForm::Advective => drift_diffusion_stencil(spec.psi(), 1.0, spec.f().values()),
        PdeForm::Divergence => divergence_stencil(spec),
    }
}

fn divergence_stencil(spec: &ProblemSpec) -> PeriodicStencil {
    let grid = *spec.grid();
    let v0 = spec.v0().values();
    let psi = spec.psi().values();
    let s: Vec<f64> = v0.iter().zip(psi).map(|(v, p)| v * math::exp(-p)).collect();
    let a: Vec<f64> = v0.iter().zip(&s).map(|(v, s)| v * s).collect();
    let mut st = PeriodicStencil::zeros(grid);
    for ax in 0..grid.dim() {
        let dx = grid.spacing(ax);
        for i in 0..grid.len() {
            let lo = grid.neighbor(i, ax, -1);
            let hi = grid.neighbor(i, ax, 1);
            let a_lo = 0.5 * (a[i] + a[lo]);
            let a_hi = 0.5 * (a[i] + a[hi]);
            let scale = 1.0 / (v0[i] * dx * dx);
            st.lower[ax][i] = scale * a_lo / s[lo];
            st.upper[ax][i] = scale * a_hi / s[hi];
            st.center[i] -= scale * (a_lo + a_hi) / s[i];
        }
    }
    st
}

/// Crank–Nicolson propagator for a fixed `dt`.
#[derive(Clone, Debug)]
pub struct CrankNicolson {
    dt: f64,
    implicit: PeriodicStencil,
    explicit: PeriodicStencil,
}

impl CrankNicolson {
    pub fn new(spec: &ProblemSpec, dt: f64, form: PdeForm) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(alloc::format!("time step must be positive, got {dt}")));
        }
        let l = operator(spec, form);
        Ok(Self { dt, implicit: l.affine(1.0, -0.5 * dt), explicit: l.affine(1.0, 0.5 * dt) })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// `(I − dt/2 L)⁻¹ (I + dt/2 L) φ`.
    pub fn step(&self, phi: &[f64]) -> Result<Vec<f64>> {
        let mut rhs = alloc::vec![0.0; phi.len()];
        self.explicit.apply(phi, &mut rhs);
        let out = self.implicit.solve(&rhs, phi, ITERATIVE_TOL)?;
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::LinearSolve("non-finite Crank-Nicolson update"));
        }
        Ok(out)
    }
}

/// One Crank–Nicolson step of size `dt` in the default form for `spec`.
pub fn step_cn(phi: &GridFunction, dt: f64, spec: &ProblemSpec) -> Result<GridFunction> {
    if phi.grid() != spec.grid() {
        return Err(Error::GridMismatch);
    }
    let cn = CrankNicolson::new(spec, dt, PdeForm::for_spec(spec))?;
    GridFunction::new(*phi.grid(), cn.step(phi.values())?)
}

/// Snapshots of the reference solution from `ρ₀`.
#[derive(Clone, Debug)]
pub struct PdeTrajectory {
    pub spec: ProblemSpec,
    /// Requested (maximal) step.
    pub dt: f64,
    pub form: PdeForm,
    /// Sample times in the order requested.
    pub times: Vec<f64>,
    pub snapshots: Vec<GridFunction>,
    pub steps: usize,
}

impl PdeTrajectory {
    /// Snapshot at exactly `t`, if it was requested.
    pub fn at(&self, t: f64) -> Option<&GridFunction> {
        self.times.iter().position(|&s| s == t).map(|i| &self.snapshots[i])
    }
}

/// [`solve_pde_with`] in the default form.
pub fn solve_pde(spec: &ProblemSpec, dt: f64, sample_times: &[f64]) -> Result<PdeTrajectory> {
    solve_pde_with(spec, dt, sample_times, PdeForm::for_spec(spec))
}

/// Integrates from `ρ₀` and records the solution at each sample time. Between
/// consecutive sample times the step is shortened so that an integer number
/// of steps lands exactly on the next one.
pub fn solve_pde_with(spec: &ProblemSpec, dt: f64, sample_times: &[f64], form: PdeForm) -> Result<PdeTrajectory> {
    let k = spec.k();
    if !(dt > 0.0 && dt <= k) {
        return Err(Error::InvalidParameter(alloc::format!("time step {dt} must lie in (0, K = {k}]")));
    }
    if let Some(&t) = sample_times.iter().find(|t| !(0.0..=k).contains(*t)) {
        return Err(Error::TimeOutOfRange { t, k });
    }
    let mut order: Vec<usize> = (0..sample_times.len()).collect();
    order.sort_by(|&a, &b| sample_times[a].total_cmp(&sample_times[b]));

    let grid = *spec.grid();
    let mut phi = spec.rho0().rho().values().to_vec();
    let mut t = 0.0;
    let mut steps = 0;
    let mut cn: Option<CrankNicolson> = None;
    let mut snapshots = alloc::vec![None; sample_times.len()];
    for &idx in &order {
        let target = sample_times[idx];
        let span = target - t;
        if span > 0.0 {
            let n = math::ceil(span / dt * (1.0 - 1e-12)).max(1.0);
            let local = span / n;
            if cn.as_ref().is_none_or(|c| c.dt() != local) {
                cn = Some(CrankNicolson::new(spec, local, form)?);
            }
            let prop = cn.as_ref().expect("propagator set above");
            for _ in 0..n as usize {
                phi = prop.step(&phi)?;
            }
            steps += n as usize;
            t = target;
        }
        snapshots[idx] = Some(GridFunction::new(grid, phi.clone())?);
    }
    Ok(PdeTrajectory {
        spec: spec.clone(),
        dt,
        form,
        times: sample_times.to_vec(),
        snapshots: snapshots.into_iter().map(|s| s.expect("every sample visited")).collect(),
        steps,
    })
}

/// Observed temporal order `log₂(‖u_{dt} − u_{dt/2}‖ / ‖u_{dt/2} − u_{dt/4}‖)`
/// of the sup-norm self-differences at time `t`.
pub fn richardson_order(spec: &ProblemSpec, dt: f64, t: f64) -> Result<f64> {
    let run = |d: f64| -> Result<GridFunction> {
        let mut traj = solve_pde(spec, d, &[t])?;
        Ok(traj.snapshots.remove(0))
    };
    let coarse = run(dt)?;
    let mid = run(0.5 * dt)?;
    let fine = run(0.25 * dt)?;
    let e1 = coarse.sup_dist(&mid);
    let e2 = mid.sup_dist(&fine);
    Ok(math::ln(e1 / e2) / core::f64::consts::LN_2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::Preset;
    use crate::Grid;

    #[test]
    fn constants_are_stationary_for_heat() {
        let spec = Preset::Heat.build(Grid::new(1, 16, 1.0).unwrap(), 0.1, 4).unwrap();
        let one = GridFunction::constant(*spec.grid(), 3.0);
        let next = step_cn(&one, 0.01, &spec).unwrap();
        assert!(next.sup_dist(&one) < 1e-14);
    }

    #[test]
    fn divergence_form_has_exact_steady_state() {
        for dim in [1, 2] {
            let spec = Preset::FokkerPlanck.build(Grid::new(dim, 16, 1.0).unwrap(), 0.1, 4).unwrap();
            let rho_inf = crate::functionals::stationary_density(&spec);
            let next = step_cn(rho_inf.rho(), 0.01, &spec).unwrap();
            assert!(next.sup_dist(rho_inf.rho()) < 1e-10);
        }
    }
}
