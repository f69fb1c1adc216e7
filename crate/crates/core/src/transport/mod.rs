//! Optimal transport on the flat torus with ground cost `½ d²(x, y)`.
//!
//! Densities are discrete: node `i` carries the mass `ρᵢ · v₀ᵢ · vol`.
//! Three solvers are provided:
//!
//! - [`solve_ot_lp`]: exact discrete Kantorovich problem (transportation
//!   simplex). Ground truth for everything else; small instances only.
//! - [`solve_ot_1d`]: exact circle transport through quantile functions and a
//!   scalar rotation offset.
//! - [`sinkhorn`]: log-domain entropic transport with debiased cost.
//!
//! Every [`TransportResult::cost`] is the optimal value of `Σ π(x,y) ½d²(x,y)`,
//! that is half the squared Wasserstein distance.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::grid::{GridFunction, Measure, VectorField};
use crate::{Error, Grid, Result};

mod circle;
mod ctransform;
mod lp;
mod maps;
mod sinkhorn;

pub use circle::solve_ot_1d;
pub use ctransform::{c_transform, c_transform_with_argmin, dual_feasibility_violation};
pub use lp::{solve_ot_lp, LP_NODE_LIMIT};
pub use maps::{map_from_potential, potentials_from_plan, pushforward};
pub use sinkhorn::{
    default_epsilon, sinkhorn, sinkhorn_with, EntropicSolution, SinkhornConfig, SinkhornSolver, DENSITY_FLOOR,
};

/// Tolerance on `|∫ρ dμ − 1|` for a density to be accepted as-is.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// A probability density against the reference measure `μ`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteDensity {
    rho: GridFunction,
    measure: Arc<Measure>,
}

impl DiscreteDensity {
    /// Wraps `rho`, checking non-negativity and unit mass.
    pub fn new(rho: GridFunction, measure: Arc<Measure>) -> Result<Self> {
        check_grid(rho.grid(), measure.grid())?;
        if let Some((node, &value)) = rho.values().iter().enumerate().find(|(_, &v)| v < 0.0) {
            return Err(Error::NonPositive { field: "rho", node, value });
        }
        let mass = measure.integrate(&rho);
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::Unbalanced(mass - 1.0));
        }
        Ok(Self { rho, measure })
    }

    /// Rescales a non-negative field to unit `μ`-mass.
    pub fn normalized(rho: GridFunction, measure: Arc<Measure>) -> Result<Self> {
        check_grid(rho.grid(), measure.grid())?;
        if let Some((node, &value)) = rho.values().iter().enumerate().find(|(_, &v)| v < 0.0) {
            return Err(Error::NonPositive { field: "rho", node, value });
        }
        let mass = measure.integrate(&rho);
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::InvalidParameter(alloc::format!("density has mass {mass}")));
        }
        Ok(Self { rho: rho.map(|v| v / mass), measure })
    }

    /// Builds a density from node masses (summing to one).
    pub fn from_masses(masses: &[f64], measure: Arc<Measure>) -> Result<Self> {
        let grid = *measure.grid();
        if masses.len() != grid.len() {
            return Err(Error::Length { expected: grid.len(), got: masses.len() });
        }
        let rho = masses.iter().enumerate().map(|(i, m)| m / measure.node_mass(i)).collect();
        Self::normalized(GridFunction::new(grid, rho)?, measure)
    }

    pub fn rho(&self) -> &GridFunction {
        &self.rho
    }

    pub fn measure(&self) -> &Arc<Measure> {
        &self.measure
    }

    pub fn grid(&self) -> &Grid {
        self.rho.grid()
    }

    /// `∫ ρ dμ`.
    pub fn mass(&self) -> f64 {
        self.measure.integrate(&self.rho)
    }

    /// Mass carried by each node, `ρᵢ v₀ᵢ vol`.
    pub fn node_masses(&self) -> Vec<f64> {
        self.rho.values().iter().enumerate().map(|(i, r)| r * self.measure.node_mass(i)).collect()
    }
}

pub(crate) fn check_grid(a: &Grid, b: &Grid) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// A sparse coupling between source and target nodes.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Plan {
    /// `(source node, target node, mass)`.
    pub entries: Vec<(usize, usize, f64)>,
}

impl Plan {
    /// Row and column sums over `n` nodes.
    pub fn marginals(&self, n: usize) -> (Vec<f64>, Vec<f64>) {
        let mut rows = alloc::vec![0.0; n];
        let mut cols = alloc::vec![0.0; n];
        for &(i, j, m) in &self.entries {
            rows[i] += m;
            cols[j] += m;
        }
        (rows, cols)
    }

    /// `Σ π ½d²` on the given grid.
    pub fn cost(&self, grid: &Grid) -> f64 {
        self.entries.iter().map(|&(i, j, m)| m * 0.5 * grid.node_dist2(i, j)).sum()
    }
}

/// Outcome of one transport solve between a source `a` and a target `b`.
#[derive(Clone, Debug)]
pub struct TransportResult {
    /// Optimal `Σ π ½d²`; for entropic solves the debiased divergence.
    pub cost: f64,
    /// Entropic solves only: the biased `OT_ε(a, b)`.
    pub raw_cost: Option<f64>,
    pub plan: Option<Plan>,
    /// Dual pair `(f, g)` with `f(x) + g(y) ≤ ½d²(x, y)` (up to `O(ε)` for
    /// entropic solves); `f` lives on the source side.
    pub potentials: (GridFunction, GridFunction),
    /// Image of each source node (`x − ∇f(x)` or the barycentric projection).
    pub map: Option<VectorField>,
    /// Largest L¹ violation of the two marginal constraints.
    pub marginal_error: f64,
    pub iterations: usize,
}

impl TransportResult {
    /// `∫ f da + ∫ g db`.
    pub fn dual_value(&self, a: &DiscreteDensity, b: &DiscreteDensity) -> f64 {
        let fa: f64 = a.node_masses().iter().zip(self.potentials.0.values()).map(|(m, f)| m * f).sum();
        let gb: f64 = b.node_masses().iter().zip(self.potentials.1.values()).map(|(m, g)| m * g).sum();
        fa + gb
    }
}

/// Plan marginal violation against the node masses of `a` and `b`.
pub(crate) fn plan_marginal_error(plan: &Plan, a: &[f64], b: &[f64]) -> f64 {
    let (rows, cols) = plan.marginals(a.len());
    let ea: f64 = rows.iter().zip(a).map(|(r, m)| (r - m).abs()).sum();
    let eb: f64 = cols.iter().zip(b).map(|(c, m)| (c - m).abs()).sum();
    ea.max(eb)
}
