//! Log-domain Sinkhorn iterations for the entropic problem
//! `OT_ε(a, b) = min_π ⟨π, C⟩ + ε KL(π | a⊗b)`.
//!
//! Potentials follow the convention `π_ij = a_i b_j exp((f_i + g_j − C_ij)/ε)`,
//! so that `OT_ε(a, b) = ⟨a, f⟩ + ⟨b, g⟩` at convergence and `(f, g)` tend to
//! Kantorovich potentials as `ε → 0`. Because the cost separates over axes,
//! every soft-min is evaluated axis by axis: `O(m³)` per sweep in 2D instead of
//! `O(m⁴)`.

use alloc::vec;
use alloc::vec::Vec;

use super::{check_grid, DiscreteDensity, Plan, TransportResult, LP_NODE_LIMIT};
use crate::grid::{GridFunction, VectorField};
use crate::{math, Error, Grid, Result};

/// Floor applied to densities before taking logarithms.
pub const DENSITY_FLOOR: f64 = 1e-12;

/// `10⁻³ × diam²` where `diam` is the torus diameter.
pub fn default_epsilon(grid: &Grid) -> f64 {
    let d = grid.diameter();
    1e-3 * d * d
}

#[derive(Clone, Debug, PartialEq)]
pub struct SinkhornConfig {
    /// Regularization; `None` selects [`default_epsilon`].
    pub epsilon: Option<f64>,
    /// Target L¹ marginal violation.
    pub tol: f64,
    pub max_iter: usize,
    /// ε-scaling from `diam²` down to `ε`, halving at each stage.
    pub anneal: bool,
    /// Store the dense plan (only below [`LP_NODE_LIMIT`] nodes).
    pub keep_plan: bool,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        Self { epsilon: None, tol: 1e-9, max_iter: 100_000, anneal: false, keep_plan: false }
    }
}

/// Converged potentials for one entropic problem.
#[derive(Clone, Debug)]
pub struct EntropicSolution {
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    /// `OT_ε` at the returned potentials.
    pub value: f64,
    pub iterations: usize,
    pub marginal_error: f64,
}

/// Reusable Sinkhorn machinery for one grid and one `ε`.
#[derive(Clone, Debug)]
pub struct SinkhornSolver {
    grid: Grid,
    epsilon: f64,
    config: SinkhornConfig,
    /// per-axis `½ d²(i, j) / ε`, row-major `m × m`
    axis_cost: [Vec<f64>; 2],
}

impl SinkhornSolver {
    pub fn new(grid: Grid, config: SinkhornConfig) -> Result<Self> {
        let epsilon = config.epsilon.unwrap_or_else(|| default_epsilon(&grid));
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidParameter(alloc::format!("epsilon must be positive, got {epsilon}")));
        }
        if !(config.tol > 0.0) {
            return Err(Error::InvalidParameter(alloc::format!("tolerance must be positive, got {}", config.tol)));
        }
        let axis_cost = Self::costs(&grid, epsilon);
        Ok(Self { grid, epsilon, config, axis_cost })
    }

    fn costs(grid: &Grid, epsilon: f64) -> [Vec<f64>; 2] {
        let mut out = [Vec::new(), Vec::new()];
        for (a, slot) in out.iter_mut().enumerate().take(grid.dim()) {
            let m = grid.resolution(a);
            *slot = (0..m * m).map(|k| grid.axis_half_cost(a, k / m, k % m) / epsilon).collect();
        }
        out
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn config(&self) -> &SinkhornConfig {
        &self.config
    }

    /// Log node masses with the density floor applied.
    pub fn log_masses(&self, rho: &DiscreteDensity) -> Vec<f64> {
        let mu = rho.measure();
        rho.rho()
            .values()
            .iter()
            .enumerate()
            .map(|(i, &r)| math::ln(r.max(DENSITY_FLOOR) * mu.node_mass(i)))
            .collect()
    }

    /// `out_i = −ε log Σ_j exp(h_j − C_ij/ε)`, with `h` given in units of `ε`.
    fn softmin(&self, h: &[f64], out: &mut [f64], axis_cost: &[Vec<f64>; 2], eps: f64) {
        let g = &self.grid;
        if g.dim() == 1 {
            let m = g.resolution(0);
            for i in 0..m {
                out[i] = -eps * lse_row(&axis_cost[0][i * m..(i + 1) * m], h);
            }
        } else {
            let (m0, m1) = (g.resolution(0), g.resolution(1));
            // inner: t[j0, i1] = LSE_{j1} h[j0, j1] − c1(i1, j1)
            let mut t = vec![0.0; m0 * m1];
            for j0 in 0..m0 {
                let hrow = &h[j0 * m1..(j0 + 1) * m1];
                for i1 in 0..m1 {
                    t[j0 * m1 + i1] = lse_row(&axis_cost[1][i1 * m1..(i1 + 1) * m1], hrow);
                }
            }
            let mut col = vec![0.0; m0];
            for i1 in 0..m1 {
                for j0 in 0..m0 {
                    col[j0] = t[j0 * m1 + i1];
                }
                for i0 in 0..m0 {
                    out[i0 * m1 + i1] = -eps * lse_row(&axis_cost[0][i0 * m0..(i0 + 1) * m0], &col);
                }
            }
        }
    }

    /// `T(g)_i = −ε LSE_j (log b_j + g_j/ε − C_ij/ε)`.
    fn c_eps_transform(&self, pot: &[f64], log_w: &[f64], out: &mut [f64], axis_cost: &[Vec<f64>; 2], eps: f64) {
        let h: Vec<f64> = pot.iter().zip(log_w).map(|(p, l)| l + p / eps).collect();
        self.softmin(&h, out, axis_cost, eps);
    }

    /// Solves `OT_ε(a, b)` given log masses; warm-started from `init`.
    pub fn solve(&self, la: &[f64], lb: &[f64], init: Option<(&[f64], &[f64])>) -> Result<EntropicSolution> {
        let n = self.grid.len();
        let (mut f, mut g) = match init {
            Some((f0, g0)) => (f0.to_vec(), g0.to_vec()),
            None => (vec![0.0; n], vec![0.0; n]),
        };
        let mut total = 0;
        for (eps, costs, tol) in self.schedule() {
            let costs = costs.as_ref().unwrap_or(&self.axis_cost);
            let (it, err) = self.alternate(la, lb, &mut f, &mut g, costs, eps, tol, self.config.max_iter - total)?;
            total += it;
            if eps == self.epsilon && err > self.config.tol {
                return Err(Error::NotConverged { solver: "sinkhorn", iterations: total, last_error: err });
            }
            if eps == self.epsilon {
                let value = dot_exp(la, &f) + dot_exp(lb, &g);
                return Ok(EntropicSolution { f, g, value, iterations: total, marginal_error: err });
            }
        }
        unreachable!("schedule ends at the target epsilon")
    }

    /// Solves the symmetric problem `OT_ε(a, a)`; returns the potential and value.
    pub fn solve_symmetric(&self, la: &[f64], init: Option<&[f64]>) -> Result<EntropicSolution> {
        let n = self.grid.len();
        let mut f = init.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
        let mut t = vec![0.0; n];
        let mut total = 0;
        for (eps, costs, tol) in self.schedule() {
            let costs = costs.as_ref().unwrap_or(&self.axis_cost);
            let mut err = f64::INFINITY;
            let mut it = 0;
            while it < self.config.max_iter - total {
                self.c_eps_transform(&f, la, &mut t, costs, eps);
                err = row_error(la, &f, &t, eps);
                if !err.is_finite() {
                    return Err(Error::NaN("sinkhorn potentials"));
                }
                it += 1;
                if err <= tol {
                    break;
                }
                for (fi, ti) in f.iter_mut().zip(&t) {
                    *fi = 0.5 * (*fi + ti);
                }
            }
            total += it;
            if eps == self.epsilon {
                if err > self.config.tol {
                    return Err(Error::NotConverged { solver: "sinkhorn", iterations: total, last_error: err });
                }
                let value = 2.0 * dot_exp(la, &f);
                return Ok(EntropicSolution { g: f.clone(), f, value, iterations: total, marginal_error: err });
            }
        }
        unreachable!("schedule ends at the target epsilon")
    }

    /// `(ε, per-axis costs if different from the target, tolerance)` stages.
    fn schedule(&self) -> Vec<(f64, Option<[Vec<f64>; 2]>, f64)> {
        let mut stages = Vec::new();
        if self.config.anneal {
            let d = self.grid.diameter();
            let mut eps = d * d;
            while eps > 2.0 * self.epsilon {
                stages.push((eps, Some(Self::costs(&self.grid, eps)), 1e-3_f64.max(self.config.tol)));
                eps *= 0.5;
            }
        }
        stages.push((self.epsilon, None, self.config.tol));
        stages
    }

    #[allow(clippy::too_many_arguments)]
    fn alternate(
        &self,
        la: &[f64],
        lb: &[f64],
        f: &mut Vec<f64>,
        g: &mut [f64],
        costs: &[Vec<f64>; 2],
        eps: f64,
        tol: f64,
        budget: usize,
    ) -> Result<(usize, f64)> {
        let mut next = vec![0.0; f.len()];
        let mut err = f64::INFINITY;
        let mut it = 0;
        while it < budget {
            self.c_eps_transform(f, la, g, costs, eps);
            self.c_eps_transform(g, lb, &mut next, costs, eps);
            // rows of the plan built from (f, g) sum to a_i exp((f_i − next_i)/ε)
            err = row_error(la, f, &next, eps);
            if !err.is_finite() {
                return Err(Error::NaN("sinkhorn potentials"));
            }
            it += 1;
            if err <= tol {
                break;
            }
            core::mem::swap(f, &mut next);
        }
        Ok((it, err))
    }

    /// Plan entries `π_ij` for converged potentials.
    pub fn plan(&self, la: &[f64], lb: &[f64], f: &[f64], g: &[f64]) -> Plan {
        let n = self.grid.len();
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let c = 0.5 * self.grid.node_dist2(i, j);
                let m = math::exp(la[i] + lb[j] + (f[i] + g[j] - c) / self.epsilon);
                entries.push((i, j, m));
            }
        }
        Plan { entries }
    }

    /// Barycentric projection `x ↦ x + Σ_j π_ij (y_j − x) / Σ_j π_ij`,
    /// displacements taken along shortest geodesics.
    pub fn barycentric_map(&self, lb: &[f64], f: &[f64], g: &[f64]) -> VectorField {
        let grid = self.grid;
        let n = grid.len();
        let mut data = Vec::with_capacity(n);
        let mut logw = vec![0.0; n];
        for i in 0..n {
            let x = grid.coords(i);
            for j in 0..n {
                let c = 0.5 * grid.node_dist2(i, j);
                logw[j] = lb[j] + (f[i] + g[j] - c) / self.epsilon;
            }
            let mx = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut s = 0.0;
            let mut d = [0.0; 2];
            for j in 0..n {
                let w = math::exp(logw[j] - mx);
                let y = grid.coords(j);
                s += w;
                for a in 0..grid.dim() {
                    d[a] += w * math::min_image(y[a] - x[a], grid.period());
                }
            }
            data.push(grid.wrap([x[0] + d[0] / s, x[1] + d[1] / s]));
        }
        VectorField::new(grid, data).expect("barycentric map is finite")
    }
}

fn lse_row(neg_cost: &[f64], h: &[f64]) -> f64 {
    let mut mx = f64::NEG_INFINITY;
    for (c, v) in neg_cost.iter().zip(h) {
        mx = mx.max(v - c);
    }
    if mx == f64::NEG_INFINITY {
        return mx;
    }
    let mut s = 0.0;
    for (c, v) in neg_cost.iter().zip(h) {
        s += math::exp(v - c - mx);
    }
    mx + math::ln(s)
}

fn row_error(la: &[f64], f: &[f64], next: &[f64], eps: f64) -> f64 {
    la.iter()
        .zip(f.iter().zip(next))
        .map(|(l, (fi, ni))| math::exp(*l) * (math::exp((fi - ni) / eps) - 1.0).abs())
        .sum()
}

fn dot_exp(lw: &[f64], p: &[f64]) -> f64 {
    lw.iter().zip(p).map(|(l, v)| math::exp(*l) * v).sum()
}

/// Debiased entropic transport with default settings and the given `ε`, `tol`.
pub fn sinkhorn(a: &DiscreteDensity, b: &DiscreteDensity, epsilon: f64, tol: f64) -> Result<TransportResult> {
    sinkhorn_with(a, b, &SinkhornConfig { epsilon: Some(epsilon), tol, ..SinkhornConfig::default() })
}

/// Debiased entropic transport `S_ε(a, b) = OT_ε(a, b) − ½OT_ε(a, a) − ½OT_ε(b, b)`.
pub fn sinkhorn_with(a: &DiscreteDensity, b: &DiscreteDensity, config: &SinkhornConfig) -> Result<TransportResult> {
    check_grid(a.grid(), b.grid())?;
    let grid = *a.grid();
    let solver = SinkhornSolver::new(grid, config.clone())?;
    let la = solver.log_masses(a);
    let lb = solver.log_masses(b);
    let ab = solver.solve(&la, &lb, None)?;
    let aa = solver.solve_symmetric(&la, None)?;
    let bb = if la == lb { aa.clone() } else { solver.solve_symmetric(&lb, None)? };
    let cost = ab.value - 0.5 * aa.value - 0.5 * bb.value;
    let plan = (config.keep_plan && grid.len() <= LP_NODE_LIMIT).then(|| solver.plan(&la, &lb, &ab.f, &ab.g));
    let map = (grid.len() <= LP_NODE_LIMIT).then(|| solver.barycentric_map(&lb, &ab.f, &ab.g));
    Ok(TransportResult {
        cost,
        raw_cost: Some(ab.value),
        plan,
        potentials: (GridFunction::from_raw(grid, ab.f), GridFunction::from_raw(grid, ab.g)),
        map,
        marginal_error: ab.marginal_error,
        iterations: ab.iterations + aa.iterations + bb.iterations,
    })
}
