//! The free energy `E(ρ) = ∫ (log ρ − log v₀ + Ψ) ρ dμ`, the field
//! `F = log ρ − log v₀ + Ψ`, and the problem data `(Ψ, f, v₀, ρ₀, K, N)`
//! together with the compatibility relation
//! `Δv₀ − ⟨∇v₀, ∇Ψ⟩ − (ΔΨ − f) v₀ = 0`.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::grid::{GridFunction, Measure};
use crate::linalg::PeriodicStencil;
use crate::transport::DiscreteDensity;
use crate::{math, Error, Grid, Result};

/// Default tolerance on the compatibility residual for manufactured problems.
pub const CONSISTENCY_TOL: f64 = 1e-6;

/// How `f` and `v₀` were obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConsistencyMode {
    /// `v₀` chosen, `f` derived: residual zero to round-off.
    Manufactured,
    /// `f` chosen, `v₀` from the principal eigenvector.
    Solved,
    /// Both supplied by the caller; residual only reported.
    Given,
}

/// Data of one JKO run.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    grid: Grid,
    psi: GridFunction,
    f: GridFunction,
    v0: GridFunction,
    measure: Arc<Measure>,
    rho0: DiscreteDensity,
    k: f64,
    n: usize,
    mode: ConsistencyMode,
    consistency_residual: f64,
    /// Shift subtracted from `f` in solved mode.
    eigenvalue_shift: f64,
}

impl ProblemSpec {
    /// Chooses `v₀`, derives `f` from the compatibility relation.
    pub fn manufactured(psi: GridFunction, v0: GridFunction, rho0: GridFunction, k: f64, n: usize) -> Result<Self> {
        let v0 = normalize_v0(v0)?;
        let f = f_from_v0(&psi, &v0)?;
        Self::assemble(psi, f, v0, rho0, k, n, ConsistencyMode::Manufactured, 0.0)
    }

    /// Chooses `f`, computes `v₀` by inverse iteration. When the principal
    /// eigenvalue `σ` is not zero, `f − σ` is used so that `v₀` is an exact
    /// kernel element.
    pub fn solved(psi: GridFunction, f: GridFunction, rho0: GridFunction, k: f64, n: usize) -> Result<Self> {
        let sol = v0_from_f(&psi, &f)?;
        if sol.eigenvalue.abs() > CONSISTENCY_TOL {
            log::warn!("principal eigenvalue {:e}; shifting f by it", sol.eigenvalue);
        }
        let f = f.map(|v| v - sol.eigenvalue);
        Self::assemble(psi, f, sol.v0, rho0, k, n, ConsistencyMode::Solved, sol.eigenvalue)
    }

    /// Takes all fields as given; an inconsistent triple is accepted with a warning.
    pub fn given(
        psi: GridFunction,
        f: GridFunction,
        v0: GridFunction,
        rho0: GridFunction,
        k: f64,
        n: usize,
    ) -> Result<Self> {
        let v0 = normalize_v0(v0)?;
        Self::assemble(psi, f, v0, rho0, k, n, ConsistencyMode::Given, 0.0)
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        psi: GridFunction,
        f: GridFunction,
        v0: GridFunction,
        rho0: GridFunction,
        k: f64,
        n: usize,
        mode: ConsistencyMode,
        eigenvalue_shift: f64,
    ) -> Result<Self> {
        let grid = *psi.grid();
        for g in [f.grid(), v0.grid(), rho0.grid()] {
            if *g != grid {
                return Err(Error::GridMismatch);
            }
        }
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidParameter(alloc::format!("K must be positive, got {k}")));
        }
        if n == 0 {
            return Err(Error::InvalidParameter("N must be at least 1".into()));
        }
        let measure = Arc::new(Measure::new(v0.clone())?);
        let rho0 = DiscreteDensity::normalized(rho0, measure.clone())?;
        let consistency_residual = consistency_residual(&psi, &f, &v0).sup_norm();
        if consistency_residual > CONSISTENCY_TOL {
            match mode {
                ConsistencyMode::Given => {
                    log::warn!("compatibility residual {consistency_residual:e} exceeds {CONSISTENCY_TOL:e}")
                }
                _ => {
                    return Err(Error::NotConverged {
                        solver: "compatibility",
                        iterations: 0,
                        last_error: consistency_residual,
                    })
                }
            }
        }
        Ok(Self { grid, psi, f, v0, measure, rho0, k, n, mode, consistency_residual, eigenvalue_shift })
    }

    /// Same fields with a different initial density.
    pub fn with_rho0(&self, rho0: GridFunction) -> Result<Self> {
        let mut out = self.clone();
        out.rho0 = DiscreteDensity::normalized(rho0, self.measure.clone())?;
        Ok(out)
    }

    /// Same fields with a different horizon and step count.
    pub fn with_horizon(&self, k: f64, n: usize) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) || n == 0 {
            return Err(Error::InvalidParameter(alloc::format!("invalid horizon K = {k}, N = {n}")));
        }
        let mut out = self.clone();
        out.k = k;
        out.n = n;
        Ok(out)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn psi(&self) -> &GridFunction {
        &self.psi
    }

    pub fn f(&self) -> &GridFunction {
        &self.f
    }

    pub fn v0(&self) -> &GridFunction {
        &self.v0
    }

    pub fn measure(&self) -> &Arc<Measure> {
        &self.measure
    }

    pub fn rho0(&self) -> &DiscreteDensity {
        &self.rho0
    }

    /// Time horizon `K`.
    pub fn k(&self) -> f64 {
        self.k
    }

    /// Number of steps `N`.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Step size `h = K / N`.
    pub fn h(&self) -> f64 {
        self.k / self.n as f64
    }

    pub fn mode(&self) -> ConsistencyMode {
        self.mode
    }

    /// Sup norm of the compatibility residual.
    pub fn consistency_residual(&self) -> f64 {
        self.consistency_residual
    }

    pub fn eigenvalue_shift(&self) -> f64 {
        self.eigenvalue_shift
    }

    /// `Ψ − log v₀`.
    pub fn potential(&self) -> GridFunction {
        self.psi.zip_map(&self.v0, |p, v| p - math::ln(v))
    }

    /// `Ψ − 2 log v₀`.
    pub fn drift_potential(&self) -> GridFunction {
        self.psi.zip_map(&self.v0, |p, v| p - 2.0 * math::ln(v))
    }

    /// Wraps a field as a density against this problem's `μ`, rescaling to unit mass.
    pub fn density(&self, rho: GridFunction) -> Result<DiscreteDensity> {
        DiscreteDensity::normalized(rho, self.measure.clone())
    }
}

fn normalize_v0(v0: GridFunction) -> Result<GridFunction> {
    if let Some((node, &value)) = v0.values().iter().enumerate().find(|(_, &v)| v <= 0.0) {
        return Err(Error::NonPositive { field: "v0", node, value });
    }
    let mass = v0.sum() * v0.grid().node_volume();
    Ok(v0.map(|v| v / mass))
}

/// Node-wise `Δv₀ − ⟨∇v₀, ∇Ψ⟩ − (ΔΨ − f) v₀`.
pub fn consistency_residual(psi: &GridFunction, f: &GridFunction, v0: &GridFunction) -> GridFunction {
    let lv = v0.laplacian();
    let lp = psi.laplacian();
    let gv = v0.gradient();
    let gp = psi.gradient();
    let vals = (0..v0.len())
        .map(|i| {
            let dot = gv.data()[i][0] * gp.data()[i][0] + gv.data()[i][1] * gp.data()[i][1];
            lv.values()[i] - dot - (lp.values()[i] - f.values()[i]) * v0.values()[i]
        })
        .collect();
    GridFunction::from_raw(*v0.grid(), vals)
}

/// The three parts of `E(ρ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyValue {
    pub total: f64,
    /// `∫ ρ log ρ dμ`
    pub entropy: f64,
    /// `∫ (Ψ − log v₀) ρ dμ`
    pub potential: f64,
}

/// `F = log ρ − log v₀ + Ψ`; fails on a non-positive node.
pub fn f_field(rho: &DiscreteDensity, spec: &ProblemSpec) -> Result<GridFunction> {
    f_field_values(rho.rho(), spec)
}

pub(crate) fn f_field_values(rho: &GridFunction, spec: &ProblemSpec) -> Result<GridFunction> {
    let mut out = Vec::with_capacity(rho.len());
    for (i, &r) in rho.values().iter().enumerate() {
        if !(r > 0.0) {
            return Err(Error::NonPositive { field: "rho", node: i, value: r });
        }
        out.push(math::ln(r) - math::ln(spec.v0.values()[i]) + spec.psi.values()[i]);
    }
    Ok(GridFunction::from_raw(spec.grid, out))
}

/// `E(ρ)` with the convention `0 · log 0 = 0`.
pub fn free_energy(rho: &DiscreteDensity, spec: &ProblemSpec) -> EnergyValue {
    energy_of(rho.rho().values(), spec)
}

pub(crate) fn energy_of(rho: &[f64], spec: &ProblemSpec) -> EnergyValue {
    let mu = &spec.measure;
    let pot = spec.potential();
    let mut entropy = 0.0;
    let mut potential = 0.0;
    for (i, &r) in rho.iter().enumerate() {
        let w = mu.node_mass(i);
        if r > 0.0 {
            entropy += r * math::ln(r) * w;
        }
        potential += pot.values()[i] * r * w;
    }
    EnergyValue { total: entropy + potential, entropy, potential }
}

/// `f = ΔΨ − (Δv₀ − ⟨∇v₀, ∇Ψ⟩) / v₀`.
pub fn f_from_v0(psi: &GridFunction, v0: &GridFunction) -> Result<GridFunction> {
    if psi.grid() != v0.grid() {
        return Err(Error::GridMismatch);
    }
    if let Some((node, &value)) = v0.values().iter().enumerate().find(|(_, &v)| v <= 0.0) {
        return Err(Error::NonPositive { field: "v0", node, value });
    }
    let lv = v0.laplacian();
    let lp = psi.laplacian();
    let gv = v0.gradient();
    let gp = psi.gradient();
    let vals = (0..v0.len())
        .map(|i| {
            let dot = gv.data()[i][0] * gp.data()[i][0] + gv.data()[i][1] * gp.data()[i][1];
            lp.values()[i] - (lv.values()[i] - dot) / v0.values()[i]
        })
        .collect();
    Ok(GridFunction::from_raw(*v0.grid(), vals))
}

/// Stencil of `v ↦ Δv + s⟨∇v, ∇Ψ⟩ + c v` with the module's centered differences.
pub(crate) fn drift_diffusion_stencil(psi: &GridFunction, sign: f64, reaction: &[f64]) -> PeriodicStencil {
    let grid = *psi.grid();
    let mut st = PeriodicStencil::zeros(grid);
    for a in 0..grid.dim() {
        let dx = grid.spacing(a);
        let inv2 = 1.0 / (dx * dx);
        let dpsi = psi.partial(a);
        for i in 0..grid.len() {
            let adv = sign * dpsi.values()[i] / (2.0 * dx);
            st.lower[a][i] = inv2 - adv;
            st.upper[a][i] = inv2 + adv;
            st.center[i] -= 2.0 * inv2;
        }
    }
    for (c, r) in st.center.iter_mut().zip(reaction) {
        *c += r;
    }
    st
}

/// Principal eigenpair of `v ↦ Δv − ⟨∇v, ∇Ψ⟩ − (ΔΨ − f) v`.
#[derive(Clone, Debug)]
pub struct V0Solution {
    /// Positive eigenvector with `∫ v₀ dxⁿ = 1`.
    pub v0: GridFunction,
    /// Principal eigenvalue; zero when `(Ψ, f)` admit an exact `v₀`.
    pub eigenvalue: f64,
    /// `‖A v₀ − σ v₀‖_∞`.
    pub residual: f64,
    pub iterations: usize,
}

const V0_MAX_ITER: usize = 500;
const V0_RESIDUAL_TOL: f64 = 1e-8;

/// Inverse iteration with a Collatz–Wielandt shift.
///
/// For a positive iterate `v`, `max_i (Av)_i / v_i` bounds the principal
/// eigenvalue from above, so `σ I − A` stays an M-matrix and its inverse
/// keeps the iterate positive.
pub fn v0_from_f(psi: &GridFunction, f: &GridFunction) -> Result<V0Solution> {
    let grid = *psi.grid();
    if f.grid() != &grid {
        return Err(Error::GridMismatch);
    }
    let lp = psi.laplacian();
    let reaction: Vec<f64> = lp.values().iter().zip(f.values()).map(|(l, fv)| fv - l).collect();
    let a = drift_diffusion_stencil(psi, -1.0, &reaction);
    if a.lower.iter().chain(a.upper.iter()).flatten().any(|&c| c < 0.0) {
        log::warn!("eigen-operator has negative off-diagonal entries; refine the grid");
    }
    let n = grid.len();
    let vol = grid.node_volume();
    let scale = 1.0 + a.center.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
    let mut v = alloc::vec![1.0; n];
    let mut av = alloc::vec![0.0; n];
    let mut iterations = 0;
    loop {
        a.apply(&v, &mut av);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (x, y) in v.iter().zip(&av) {
            let r = y / x;
            lo = lo.min(r);
            hi = hi.max(r);
        }
        let sigma = 0.5 * (lo + hi);
        let residual = v.iter().zip(&av).map(|(x, y)| (y - sigma * x).abs()).fold(0.0, f64::max);
        if residual <= V0_RESIDUAL_TOL * 1e-2 || (residual <= V0_RESIDUAL_TOL && iterations >= V0_MAX_ITER) {
            let v0 = GridFunction::new(grid, v)?;
            return Ok(V0Solution { v0, eigenvalue: sigma, residual, iterations });
        }
        if iterations >= V0_MAX_ITER {
            return Err(Error::NotConverged { solver: "inverse iteration", iterations, last_error: residual });
        }
        let shift = hi + (hi - lo).max(1e-7 * scale);
        let m = a.affine(shift, -1.0);
        let mut w = m.solve(&v, &v, 1e-14)?;
        if w.iter().any(|x| !x.is_finite()) {
            return Err(Error::NaN("inverse iteration"));
        }
        let total: f64 = w.iter().sum::<f64>() * vol;
        if total < 0.0 {
            w.iter_mut().for_each(|x| *x = -*x);
        }
        if w.iter().any(|&x| x <= 0.0) {
            return Err(Error::IndefiniteEigenvector);
        }
        let total = total.abs();
        w.iter_mut().for_each(|x| *x /= total);
        v = w;
        iterations += 1;
    }
}

/// `ρ∞ = C e^{log v₀ − Ψ}` normalized against `μ`.
pub fn stationary_density(spec: &ProblemSpec) -> DiscreteDensity {
    let rho = spec.v0.zip_map(&spec.psi, |v, p| v * math::exp(-p));
    DiscreteDensity::normalized(rho, spec.measure.clone()).expect("stationary density is positive")
}

/// The constant `C` with `∫ C e^{log v₀ − Ψ} dμ = 1`.
pub fn stationary_constant(spec: &ProblemSpec) -> f64 {
    let raw = spec.v0.zip_map(&spec.psi, |v, p| v * math::exp(-p));
    1.0 / spec.measure.integrate(&raw)
}
