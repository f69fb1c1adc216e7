//! A priori estimates evaluated on computed steps and trajectories.
//!
//! Continuum sup-norms are replaced by grid sup-norms of the module's finite
//! differences. Tensor norms: the spectral norm for Hessians, the Frobenius
//! norm for third derivatives. With
//! `A₁ = ‖∇²(Ψ − log v₀)‖`, `B₂ = ‖∇²(Ψ − 2 log v₀)‖`, `B₃ = ‖∇³(Ψ − 2 log v₀)‖`
//! and `λ = sup ∇²F(w, w)` the per-step bounds for `ρ` solving the
//! Monge–Ampère equation from `ρ_prev` (with `F₀` the field of `ρ_prev`) are
//!
//! 1. `(1 − hB₂)ⁿ inf(ρ_prev v₀) ≤ ρ v₀ ≤ (1 + hB₂)ⁿ sup(ρ_prev v₀)`,
//! 2. `(1 − hB₂) ‖∇F‖ ≤ ‖∇F₀‖`,
//! 3. `0 ≤ a₀ + a₁ λ + a₂ λ²` with `a₀ = hB₃‖∇F‖ + λ₀`,
//!    `a₁ = h²B₃‖∇F‖ + 2hB₂ + 2hλ₀ − 1`, `a₂ = ⅓h³B₃‖∇F‖ + h²B₂ + h²λ₀`.
//!
//! The maximum principle for `log(ρv₀) = F + 2 log v₀ − Ψ` yields bound 1
//! with `B₂`. The variant with `A₁` in place of `B₂` is reported as well,
//! as an informational record (`est1_a1_*`); it is exceeded on problems where
//! `B₂ > A₁`.
//!
//! Over a trajectory with `h = K/N` the step bounds chain into
//! `e^{−nKB₂/(1−hB₂)} inf(ρ₀v₀) ≤ ρ_k v₀ ≤ e^{nKB₂} sup(ρ₀v₀)`,
//! `‖∇F_k‖ ≤ (1 − hB₂)^{−k} ‖∇F₀‖ ≤ e^{KB₂/(1−hB₂)} ‖∇F₀‖`, and the recursion
//! `hλ_k ≤ (h²C + hλ_{k−1}) / (1 − 2hC − 3hλ_{k−1})`.

use alloc::string::String;
use alloc::vec::Vec;

use crate::functionals::{f_field, free_energy, stationary_constant, stationary_density};
use crate::grid::{third_derivative_sup_norm, GridFunction};
use crate::jko::{test_fields, weak_residual, FlowTrajectory};
use crate::transport::DiscreteDensity;
use crate::{math, Error, ProblemSpec, Result};

/// Relative slack on every comparison.
pub const RELATIVE_SLACK: f64 = 1e-9;

/// `max_x` of the largest eigenvalue of the discrete Hessian of `F`.
pub fn lambda_sup(f: &GridFunction) -> f64 {
    f.hessian().max_eigenvalue().max()
}

/// Sup norm of the spectral norm of the discrete Hessian.
pub fn hessian_sup_norm(f: &GridFunction) -> f64 {
    f.hessian().spectral_norm().max()
}

/// Constants entering the bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimateConstants {
    /// `‖∇²(Ψ − log v₀)‖_∞`
    pub a1: f64,
    /// `‖∇²(Ψ − 2 log v₀)‖_∞`
    pub b2: f64,
    /// `‖∇³(Ψ − 2 log v₀)‖_∞`
    pub b3: f64,
    /// `‖∇F₀‖_∞` of the reference density (`ρ_prev` or `ρ₀`)
    pub grad_f0: f64,
    pub lambda0: f64,
    pub c: Option<f64>,
    pub k: f64,
    pub h: f64,
    pub dim: usize,
    /// Discretization allowance added to the slack.
    pub allowance: f64,
}

impl EstimateConstants {
    /// Constants of `spec` with `F₀` taken from `reference`.
    pub fn new(spec: &ProblemSpec, reference: &DiscreteDensity, h: f64, allowance: f64) -> Result<Self> {
        let pot = spec.potential();
        let drift = spec.drift_potential();
        let f0 = f_field(reference, spec)?;
        Ok(Self {
            a1: hessian_sup_norm(&pot),
            b2: hessian_sup_norm(&drift),
            b3: third_derivative_sup_norm(&drift),
            grad_f0: f0.gradient().sup_norm(),
            lambda0: lambda_sup(&f0),
            c: None,
            k: spec.k(),
            h,
            dim: spec.grid().dim(),
            allowance,
        })
    }
}

/// One evaluated inequality `lhs ≤ rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimateRecord {
    pub name: String,
    /// Step index (1-based, the density produced) when the check is per step.
    pub step: Option<usize>,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs − lhs`.
    pub margin: f64,
    pub pass: bool,
    /// `false` for informational checks whose hypotheses are not met.
    pub guaranteed: bool,
}

impl EstimateRecord {
    /// Records `lhs ≤ rhs` with slack `1e-9·scale + allowance`.
    pub fn new(name: &str, step: Option<usize>, lhs: f64, rhs: f64, scale: f64, allowance: f64, guaranteed: bool) -> Self {
        let margin = rhs - lhs;
        let pass = lhs.is_finite() && rhs.is_finite() && margin >= -(RELATIVE_SLACK * scale + allowance);
        Self { name: name.into(), step, lhs, rhs, margin, pass, guaranteed }
    }
}

/// A batch of evaluated inequalities.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimateReport {
    pub records: Vec<EstimateRecord>,
    pub constants: EstimateConstants,
    /// Hypothesis violations and other notes.
    pub flags: Vec<String>,
}

impl EstimateReport {
    pub fn all_pass(&self) -> bool {
        self.records.iter().all(|r| r.pass)
    }

    /// `true` when every guaranteed record passes.
    pub fn guaranteed_pass(&self) -> bool {
        self.records.iter().filter(|r| r.guaranteed).all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &EstimateRecord> {
        self.records.iter().filter(|r| !r.pass)
    }

    pub fn find(&self, name: &str) -> impl Iterator<Item = &EstimateRecord> {
        let name = String::from(name);
        self.records.iter().filter(move |r| r.name == name)
    }

    pub fn extend(&mut self, other: EstimateReport) {
        self.records.extend(other.records);
        self.flags.extend(other.flags);
    }
}

fn scale(a: f64, b: f64) -> f64 {
    a.abs().max(b.abs())
}

/// `(ρ v₀)` node-wise.
fn weighted(rho: &DiscreteDensity) -> GridFunction {
    rho.rho().zip_map(rho.measure().weight(), |r, v| r * v)
}

/// Default discretization allowance
/// `Δx² Σ_axes (‖∂³F₀‖/6 + ‖∂⁴F₀‖/12)`: the truncation error of the centered
/// first and second differences of `F₀` that enter the bounds.
pub fn default_allowance(spec: &ProblemSpec) -> f64 {
    let Ok(f0) = f_field(spec.rho0(), spec) else {
        return 0.0;
    };
    let grid = spec.grid();
    (0..grid.dim())
        .map(|a| {
            let dx = grid.spacing(a);
            let d3 = f0.third_partial(a).sup_norm();
            let d4 = f0.second_partial(a).second_partial(a).sup_norm();
            dx * dx * (d3 / 6.0 + d4 / 12.0)
        })
        .sum()
}

/// The three per-step bounds for `ρ` computed from `ρ_prev`.
pub fn check_est_bounds(
    rho: &DiscreteDensity,
    rho_prev: &DiscreteDensity,
    h: f64,
    spec: &ProblemSpec,
    allowance: f64,
) -> Result<EstimateReport> {
    let mut report = EstimateReport {
        records: Vec::new(),
        constants: EstimateConstants::new(spec, rho_prev, h, allowance)?,
        flags: Vec::new(),
    };
    append_est_bounds(&mut report, rho, rho_prev, h, spec, None)?;
    Ok(report)
}

fn append_est_bounds(
    report: &mut EstimateReport,
    rho: &DiscreteDensity,
    rho_prev: &DiscreteDensity,
    h: f64,
    spec: &ProblemSpec,
    step: Option<usize>,
) -> Result<()> {
    let allowance = report.constants.allowance;
    let n = spec.grid().dim() as i32;
    let base = EstimateConstants::new(spec, rho_prev, h, allowance)?;
    let (a1, b2, b3, lambda0) = (base.a1, base.b2, base.b3, base.lambda0);
    let f = f_field(rho, spec)?;
    let hess = f.hessian();
    let lam_min = hess.data().iter().map(|m| crate::grid::sym_eigenvalues(m, spec.grid().dim())[0]);
    let indefinite = lam_min.filter(|l| 1.0 + h * l < 0.0).count();
    if indefinite > 0 {
        report.flags.push(alloc::format!(
            "step {:?}: I + h Hess F indefinite at {indefinite} nodes; bounds evaluated anyway",
            step
        ));
    }
    let guaranteed = indefinite == 0;

    let w = weighted(rho);
    let wp = weighted(rho_prev);
    for (tag, c, g) in [("est1", b2, guaranteed), ("est1_a1", a1, false)] {
        let upper = math::powi(1.0 + h * c, n) * wp.max();
        let lower = math::powi((1.0 - h * c).max(0.0), n) * wp.min();
        let (nu, nl) = (alloc::format!("{tag}_upper"), alloc::format!("{tag}_lower"));
        report.records.push(EstimateRecord::new(&nu, step, w.max(), upper, scale(w.max(), upper), allowance, g));
        report.records.push(EstimateRecord::new(&nl, step, lower, w.min(), scale(w.min(), lower), allowance, g));
    }

    let grad_f = f.gradient().sup_norm();
    let lhs2 = (1.0 - h * b2) * grad_f;
    report.records.push(EstimateRecord::new("est2_gradient", step, lhs2, base.grad_f0, scale(lhs2, base.grad_f0), allowance, guaranteed));

    let lambda = lambda_sup(&f);
    let t = b3 * grad_f;
    let a0 = h * t + lambda0;
    let a1c = h * h * t + 2.0 * h * b2 + 2.0 * h * lambda0 - 1.0;
    let a2 = h * h * h * t / 3.0 + h * h * b2 + h * h * lambda0;
    let poly = a0 + a1c * lambda + a2 * lambda * lambda;
    let sc = a0.abs() + (a1c * lambda).abs() + (a2 * lambda * lambda).abs();
    report.records.push(EstimateRecord::new("est3_lambda", step, 0.0, poly, sc, allowance, guaranteed));
    Ok(())
}

/// Every step of a trajectory against the per-step bounds.
pub fn trajectory_est_bounds(traj: &FlowTrajectory, allowance: f64) -> Result<EstimateReport> {
    let spec = &traj.spec;
    let mut report = EstimateReport {
        records: Vec::new(),
        constants: EstimateConstants::new(spec, spec.rho0(), traj.h, allowance)?,
        flags: Vec::new(),
    };
    for k in 1..traj.densities.len() {
        append_est_bounds(&mut report, &traj.densities[k], &traj.densities[k - 1], traj.h, spec, Some(k))?;
    }
    Ok(report)
}

/// `C = max(B₃ B_F + 2B₂, λ₀)` with `B_F = e^{KB₂/(1−hB₂)} ‖∇F₀‖` the
/// uniform gradient bound at horizon `k` and step `h`.
pub fn lemma_constant(spec: &ProblemSpec, k: f64, h: f64) -> Result<f64> {
    let c = EstimateConstants::new(spec, spec.rho0(), h, 0.0)?;
    let bf = uniform_gradient_bound(&c, k, h);
    Ok((c.b3 * bf + 2.0 * c.b2).max(c.lambda0))
}

fn uniform_gradient_bound(c: &EstimateConstants, k: f64, h: f64) -> f64 {
    let denom = 1.0 - h * c.b2;
    if denom <= 0.0 {
        return f64::INFINITY;
    }
    math::exp(k * c.b2 / denom) * c.grad_f0
}

/// Largest `K` meeting every admissibility condition:
/// `K < 1/(2C + 3λ₀)`, `K(λ₀ + KC)/(1 − 2CK − 3Kλ₀) < 1/8`, `K ≤ 1/(6C)`
/// and `K < max(1/B₂, 1/A₁)`. The quadratic condition is solved by bisection.
pub fn admissible_k(spec: &ProblemSpec, c: f64) -> Result<f64> {
    let consts = EstimateConstants::new(spec, spec.rho0(), spec.h(), 0.0)?;
    Ok(admissible_k_from(consts.lambda0, c, consts.a1, consts.b2))
}

/// Largest horizon `K` that is admissible for the constant `C` evaluated at
/// that same `K` with `N` steps, found by bisection (`C` grows with `K`).
/// Returns `(K, C)`.
pub fn admissible_horizon(spec: &ProblemSpec, n: usize) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::InvalidParameter("step count must be positive".into()));
    }
    let consts = EstimateConstants::new(spec, spec.rho0(), spec.h(), 0.0)?;
    let at = |k: f64| -> Result<(f64, f64)> {
        let c = lemma_constant(spec, k, k / n as f64)?;
        Ok((admissible_k_from(consts.lambda0, c, consts.a1, consts.b2), c))
    };
    let (mut hi, c0) = at(0.0)?;
    if !(hi > 0.0 && hi.is_finite()) {
        return Err(Error::InvalidParameter(alloc::format!("no admissible horizon (C = {c0})")));
    }
    let mut lo = 0.0;
    while hi - lo > 1e-10 * hi {
        let mid = 0.5 * (lo + hi);
        if at(mid)?.0 >= mid {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if lo <= 0.0 {
        return Err(Error::InvalidParameter("no admissible horizon".into()));
    }
    Ok((lo, at(lo)?.1))
}

/// [`admissible_k`] from raw constants.
pub fn admissible_k_from(lambda0: f64, c: f64, a1: f64, b2: f64) -> f64 {
    let below = |x: f64| x * (1.0 - 1e-12);
    let ka = below(1.0 / (2.0 * c + 3.0 * lambda0));
    let kc = 1.0 / (6.0 * c);
    let kd = {
        let m = (1.0 / b2).max(1.0 / a1);
        if m.is_finite() {
            below(m)
        } else {
            f64::INFINITY
        }
    };
    let q = |k: f64| {
        let d = 1.0 - 2.0 * c * k - 3.0 * k * lambda0;
        if d <= 0.0 {
            f64::INFINITY
        } else {
            k * (lambda0 + k * c) / d
        }
    };
    // q is increasing on [0, ka)
    let (mut lo, mut hi) = (0.0, ka);
    if q(hi) < 0.125 {
        lo = hi;
    } else {
        while hi - lo > 1e-12 * hi.max(1e-300) {
            let mid = 0.5 * (lo + hi);
            if q(mid) < 0.125 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    lo.min(ka).min(kc).min(kd)
}

/// `hλ_k` against the step recursion (seeded with measured `λ_{k−1}`), the
/// chained recursion from measured `λ₀`, the aggregate bound and the `1/8` cap.
pub fn lambda_recursion_check(traj: &FlowTrajectory, c: f64) -> Result<EstimateReport> {
    let spec = &traj.spec;
    let h = traj.h;
    let mut consts = EstimateConstants::new(spec, spec.rho0(), h, 0.0)?;
    consts.c = Some(c);
    let k_adm = admissible_k_from(consts.lambda0, c, consts.a1, consts.b2);
    let guaranteed = spec.k() <= k_adm;
    let mut report = EstimateReport { records: Vec::new(), constants: consts, flags: Vec::new() };
    if !guaranteed {
        report.flags.push(alloc::format!(
            "K = {} exceeds the admissible {k_adm}; recursion checks are informational",
            spec.k()
        ));
    }
    let lambda0 = report.constants.lambda0;
    let kk = spec.k();
    let agg_den = 1.0 - 2.0 * c * kk - 3.0 * kk * lambda0;
    let aggregate = if agg_den > 0.0 { h * (lambda0 + kk * c) / agg_den } else { f64::INFINITY };
    if agg_den <= 0.0 {
        report.flags.push("aggregate bound: outside admissible regime (nonpositive denominator)".into());
    }
    let mut chain = h * lambda0;
    let mut first_violation = None;
    for k in 1..traj.lambdas.len() {
        let measured = h * traj.lambdas[k];
        let prev = h * traj.lambdas[k - 1];
        let den = 1.0 - 2.0 * h * c - 3.0 * prev;
        let step_bound = if den > 0.0 { (h * h * c + prev) / den } else { f64::INFINITY };
        if den <= 0.0 {
            report.flags.push(alloc::format!("step {k}: outside admissible regime (nonpositive denominator)"));
        }
        let cden = 1.0 - 2.0 * h * c - 3.0 * chain;
        chain = if cden > 0.0 { (h * h * c + chain) / cden } else { f64::INFINITY };
        let recs = [
            EstimateRecord::new("lambda_step_recursion", Some(k), measured, step_bound, scale(measured, step_bound), 0.0, guaranteed),
            EstimateRecord::new("lambda_chain_recursion", Some(k), measured, chain, scale(measured, chain), 0.0, guaranteed),
            EstimateRecord::new("lambda_aggregate", Some(k), measured, aggregate, scale(measured, aggregate), 0.0, guaranteed),
            EstimateRecord::new("lambda_cap", Some(k), measured, 0.125, 0.125, 0.0, guaranteed),
        ];
        if first_violation.is_none() && recs.iter().any(|r| !r.pass) {
            first_violation = Some(k);
        }
        report.records.extend(recs);
    }
    if let Some(k) = first_violation {
        report.flags.push(alloc::format!("first recursion violation at step {k}"));
    }
    Ok(report)
}

/// Gradient and positivity bounds along a trajectory, plus the
/// `sup_k ‖∇ρ_k‖` bound they imply.
pub fn lipschitz_report(traj: &FlowTrajectory, allowance: f64) -> Result<EstimateReport> {
    let spec = &traj.spec;
    let h = traj.h;
    let consts = EstimateConstants::new(spec, spec.rho0(), h, allowance)?;
    let n = spec.grid().dim() as f64;
    let kk = spec.k();
    let mut report = EstimateReport { records: Vec::new(), constants: consts.clone(), flags: Vec::new() };
    let w0 = weighted(spec.rho0());
    let hi_factor = math::exp(n * kk * consts.b2);
    let grad_den = 1.0 - h * consts.b2;
    let lo_factor = if grad_den > 0.0 { math::exp(-n * kk * consts.b2 / grad_den) } else { 0.0 };
    let guaranteed = grad_den > 0.0;
    if !guaranteed {
        report.flags.push("h exceeds 1/B2: gradient and positivity bounds are informational".into());
    }
    let uniform = uniform_gradient_bound(&consts, kk, h);
    let v0 = spec.v0();
    let pot_grad = spec.potential().gradient().sup_norm();
    let rho_bound = hi_factor * w0.max() / v0.min() * (uniform + pot_grad);
    let mut sup_grad_rho: f64 = 0.0;
    for (k, rho) in traj.densities.iter().enumerate().skip(1) {
        let f = f_field(rho, spec)?;
        let g = f.gradient().sup_norm();
        let chained = if grad_den > 0.0 { consts.grad_f0 / math::powi(grad_den, k as i32) } else { f64::INFINITY };
        report.records.push(EstimateRecord::new("grad_f_chained", Some(k), g, chained, scale(g, chained), allowance, guaranteed));
        report.records.push(EstimateRecord::new("grad_f_uniform", Some(k), g, uniform, scale(g, uniform), allowance, guaranteed));
        let w = weighted(rho);
        let upper = hi_factor * w0.max();
        let lower = lo_factor * w0.min();
        report.records.push(EstimateRecord::new("sandwich_upper", Some(k), w.max(), upper, scale(w.max(), upper), allowance, guaranteed));
        report.records.push(EstimateRecord::new("sandwich_lower", Some(k), lower, w.min(), scale(w.min(), lower), allowance, guaranteed));
        sup_grad_rho = sup_grad_rho.max(rho.rho().gradient().sup_norm());
    }
    report.records.push(EstimateRecord::new("sup_grad_rho", None, sup_grad_rho, rho_bound, scale(sup_grad_rho, rho_bound), allowance, guaranteed));
    Ok(report)
}

/// `Σ_k ½d²(ρ_{k−1}, ρ_k) ≤ h (E(ρ₀) − E(ρ∞))`, with `E(ρ∞)` computed both
/// by quadrature and as `log C`.
pub fn distance_sum_check(traj: &FlowTrajectory) -> Result<EstimateReport> {
    let spec = &traj.spec;
    let consts = EstimateConstants::new(spec, spec.rho0(), traj.h, 0.0)?;
    let mut report = EstimateReport { records: Vec::new(), constants: consts, flags: Vec::new() };
    let e_quad = free_energy(&stationary_density(spec), spec).total;
    let e_log = math::ln(stationary_constant(spec));
    let e0 = traj.energies.first().map_or(0.0, |e| e.total);
    let lhs: f64 = traj.steps.iter().map(|s| s.transport.cost).sum();
    let rhs = traj.h * (e0 - e_log);
    let magnitude = scale(lhs, rhs).max(traj.h * scale(e0, e_log));
    report.records.push(EstimateRecord::new("distance_sum", None, lhs, rhs, magnitude, 0.0, true));
    let diff = (e_quad - e_log).abs();
    report.records.push(EstimateRecord::new("e_min_two_ways", None, diff, 1e-10, 1e-10, 0.0, true));
    Ok(report)
}

/// Truncation bound `Δx² Σ_axes (‖∂⁴ξ‖/12 + (‖∂³ξ‖ ‖∂D‖ + ‖∂ξ‖ ‖∂³D‖)/6)`,
/// `D = Ψ − 2 log v₀`, for evaluating the weak form of a unit-mass density
/// with centered differences.
pub fn weak_form_allowance(spec: &ProblemSpec, xi: &GridFunction) -> f64 {
    let grid = spec.grid();
    let d = spec.drift_potential();
    (0..grid.dim())
        .map(|a| {
            let dx = grid.spacing(a);
            let x4 = xi.second_partial(a).second_partial(a).sup_norm();
            let x3 = xi.third_partial(a).sup_norm();
            let x1 = xi.partial(a).sup_norm();
            let d1 = d.partial(a).sup_norm();
            let d3 = d.third_partial(a).sup_norm();
            dx * dx * (x4 / 12.0 + (x3 * d1 + x1 * d3) / 6.0)
        })
        .sum()
}

/// `|weak_residual(ξ)| ≤ ½ ‖∇²ξ‖ h ∫ |∇F_k|² ρ_k dμ` at every step, for each
/// test field `ξ`, up to [`weak_form_allowance`].
pub fn weak_form_check(traj: &FlowTrajectory) -> Result<EstimateReport> {
    let spec = &traj.spec;
    let h = traj.h;
    let consts = EstimateConstants::new(spec, spec.rho0(), h, 0.0)?;
    let mut report = EstimateReport { records: Vec::new(), constants: consts, flags: Vec::new() };
    let fields: Vec<_> = test_fields(spec.grid())
        .into_iter()
        .map(|(name, xi)| {
            let allowance = weak_form_allowance(spec, &xi);
            (alloc::format!("weak_{name}"), xi, allowance)
        })
        .collect();
    let mu = spec.measure();
    for k in 1..traj.densities.len() {
        let (rho, prev) = (&traj.densities[k], &traj.densities[k - 1]);
        let f = f_field(rho, spec)?;
        let dirichlet = mu.integrate(&f.gradient().magnitude().zip_map(rho.rho(), |g, r| g * g * r));
        let sum = rho.rho().zip_map(prev.rho(), |a, b| a + b);
        for (label, xi, allowance) in &fields {
            let lhs = weak_residual(rho, prev, h, spec, xi).abs();
            let rhs = 0.5 * hessian_sup_norm(xi) * h * dirichlet;
            let magnitude = mu.integrate(&xi.map(f64::abs).zip_map(&sum, |a, b| a * b)) / h;
            report.records.push(EstimateRecord::new(label, Some(k), lhs, rhs, magnitude, *allowance, true));
        }
    }
    Ok(report)
}
