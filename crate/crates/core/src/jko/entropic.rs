//! Variational JKO step under the debiased entropic cost.
//!
//! Minimizes `S_ε(ρ_prev, ρ) + h E(ρ)` over unit-mass densities. With node
//! masses `β`, the gradient of `S_ε` in `β` is `g_{ab} − g_{bb}` (the target
//! potential of the cross problem minus the potential of the symmetric one),
//! and the gradient of `E` is `F + 1`. With `G = F + (g_{ab} − g_{bb})/h` and
//! `a = ρ v₀`, each iteration solves the linearized Monge–Ampère system
//! `(h (−∇·a∇) + a) x = a G` and updates `log ρ ← log ρ − t (G − x)`,
//! renormalized. This is Newton's step for the unregularized objective, with
//! the transport Hessian replaced by its continuum linearization
//! `(−∇·a∇)⁻¹`. The step length `t` starts at the configured damping and is
//! halved until the objective or the spread of `G` decreases (the objective
//! alone is only accurate to the Sinkhorn tolerance).
//!
//! The iteration stops once the spread of `G` is below the configured
//! tolerance or below `ε e / (h min β)`, the uncertainty of `G` caused by the
//! Sinkhorn marginal error `e`. The latter dominates for very small `h`.

use alloc::vec::Vec;

use super::JkoConfig;
use crate::functionals::energy_of;
use crate::grid::GridFunction;
use crate::linalg::PeriodicStencil;
use crate::transport::{DiscreteDensity, SinkhornSolver, TransportResult, DENSITY_FLOOR};
use crate::{math, Error, ProblemSpec, Result};

pub(crate) struct EntropicStep {
    pub rho: Vec<f64>,
    pub transport: TransportResult,
    pub iterations: usize,
    pub objectives: Vec<f64>,
}

struct Evaluation {
    objective: f64,
    /// `F + (g_ab − g_bb)/h`
    gradient: Vec<f64>,
    cross: (Vec<f64>, Vec<f64>),
    self_b: Vec<f64>,
    cost: f64,
    raw: f64,
    marginal_error: f64,
    sinkhorn_iterations: usize,
    /// Resolution of `G` implied by the Sinkhorn marginal errors.
    noise: f64,
}

fn log_masses(rho: &[f64], spec: &ProblemSpec) -> Vec<f64> {
    let mu = spec.measure();
    rho.iter()
        .enumerate()
        .map(|(i, &r)| math::ln(r.max(DENSITY_FLOOR) * mu.node_mass(i)))
        .collect()
}

fn evaluate(
    solver: &SinkhornSolver,
    la: &[f64],
    self_a: f64,
    rho: &[f64],
    h: f64,
    spec: &ProblemSpec,
    warm: Option<&Evaluation>,
) -> Result<Evaluation> {
    let lb = log_masses(rho, spec);
    let ab = solver.solve(la, &lb, warm.map(|w| (w.cross.0.as_slice(), w.cross.1.as_slice())))?;
    let bb = solver.solve_symmetric(&lb, warm.map(|w| w.self_b.as_slice()))?;
    let cost = ab.value - 0.5 * self_a - 0.5 * bb.value;
    let min_mass = lb.iter().fold(f64::INFINITY, |m, &l| m.min(l));
    let noise = solver.epsilon() * ab.marginal_error.max(bb.marginal_error) / (math::exp(min_mass) * h);
    let energy = energy_of(rho, spec).total;
    let v0 = spec.v0().values();
    let psi = spec.psi().values();
    let gradient = (0..rho.len())
        .map(|j| {
            let f = math::ln(rho[j].max(DENSITY_FLOOR)) - math::ln(v0[j]) + psi[j];
            f + (ab.g[j] - bb.f[j]) / h
        })
        .collect();
    Ok(Evaluation {
        objective: cost + h * energy,
        gradient,
        cost,
        raw: ab.value,
        marginal_error: ab.marginal_error,
        sinkhorn_iterations: ab.iterations + bb.iterations,
        cross: (ab.f, ab.g),
        self_b: bb.f,
        noise,
    })
}

fn spread(v: &[f64]) -> f64 {
    let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    hi - lo
}

/// `G − x` with `(h (−∇·a∇) + a) x = a G`.
fn newton_direction(rho: &[f64], gradient: &[f64], h: f64, spec: &ProblemSpec) -> Result<Vec<f64>> {
    let grid = *spec.grid();
    let v0 = spec.v0().values();
    let a: Vec<f64> = rho.iter().zip(v0).map(|(r, v)| r * v).collect();
    let mut st = PeriodicStencil::zeros(grid);
    st.center.copy_from_slice(&a);
    for ax in 0..grid.dim() {
        let c = h / (grid.spacing(ax) * grid.spacing(ax));
        for i in 0..grid.len() {
            let lo = 0.5 * (a[i] + a[grid.neighbor(i, ax, -1)]);
            let hi = 0.5 * (a[i] + a[grid.neighbor(i, ax, 1)]);
            st.lower[ax][i] = -c * lo;
            st.upper[ax][i] = -c * hi;
            st.center[i] += c * (lo + hi);
        }
    }
    let rhs: Vec<f64> = a.iter().zip(gradient).map(|(a, g)| a * g).collect();
    let x = st.solve(&rhs, gradient, 1e-12)?;
    Ok(gradient.iter().zip(&x).map(|(g, x)| g - x).collect())
}

pub(crate) fn step(prev: &DiscreteDensity, h: f64, spec: &ProblemSpec, config: &JkoConfig) -> Result<EntropicStep> {
    let grid = *spec.grid();
    let solver = SinkhornSolver::new(grid, config.sinkhorn.clone())?;
    let la = log_masses(prev.rho().values(), spec);
    let self_a = solver.solve_symmetric(&la, None)?.value;
    let mu = spec.measure();

    let mut rho: Vec<f64> = prev.rho().values().iter().map(|r| r.max(DENSITY_FLOOR)).collect();
    let mut current = evaluate(&solver, &la, self_a, &rho, h, spec, None)?;
    let mut objectives = alloc::vec![current.objective];
    let mut iterations = 0;
    while spread(&current.gradient) > config.entropic_tol.max(current.noise) {
        if iterations >= config.max_outer {
            return Err(Error::NotConverged {
                solver: "entropic JKO step",
                iterations,
                last_error: spread(&current.gradient),
            });
        }
        iterations += 1;
        let direction = newton_direction(&rho, &current.gradient, h, spec)?;
        let current_spread = spread(&current.gradient);
        let mut t = config.damping;
        loop {
            let mut trial: Vec<f64> = rho
                .iter()
                .zip(&direction)
                .map(|(r, d)| r * math::exp(-t * d))
                .collect();
            let mass: f64 = trial.iter().enumerate().map(|(i, r)| r * mu.node_mass(i)).sum();
            trial.iter_mut().for_each(|r| *r /= mass);
            let next = evaluate(&solver, &la, self_a, &trial, h, spec, Some(&current))?;
            if next.objective < current.objective || spread(&next.gradient) < current_spread {
                rho = trial;
                current = next;
                objectives.push(current.objective);
                break;
            }
            t *= 0.5;
            if t < 1e-6 {
                return Err(Error::NotConverged {
                    solver: "entropic JKO step",
                    iterations,
                    last_error: current_spread,
                });
            }
        }
    }
    // the source of the reported transport is the new density
    let (f_prev, g_next) = current.cross;
    let map = (grid.len() <= crate::transport::LP_NODE_LIMIT).then(|| solver.barycentric_map(&la, &g_next, &f_prev));
    let transport = TransportResult {
        cost: current.cost,
        raw_cost: Some(current.raw),
        plan: None,
        potentials: (GridFunction::from_raw(grid, g_next), GridFunction::from_raw(grid, f_prev)),
        map,
        marginal_error: current.marginal_error,
        iterations: current.sinkhorn_iterations,
    };
    Ok(EntropicStep { rho, transport, iterations, objectives })
}
