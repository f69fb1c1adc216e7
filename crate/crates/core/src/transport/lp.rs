//! Exact discrete Kantorovich transport by the transportation simplex
//! (MODI pricing on a spanning-tree basis).

use alloc::vec;
use alloc::vec::Vec;

use super::{check_grid, plan_marginal_error, DiscreteDensity, Plan, TransportResult};
use crate::grid::GridFunction;
use crate::transport::{c_transform, map_from_potential};
use crate::{Error, Result};

/// Largest grid accepted by [`solve_ot_lp`].
pub const LP_NODE_LIMIT: usize = 4096;

const NONBASIC: u32 = u32::MAX;

/// Exact optimal coupling of the discrete problem with cost `½d²`.
///
/// Returns a sparse plan, the optimal cost and a c-concave dual pair
/// `(f, f^c)`-style potentials: `g = u^c` from the simplex row duals `u`,
/// then `f = g^c`. The pair is feasible everywhere and its dual value equals
/// the primal cost.
pub fn solve_ot_lp(a: &DiscreteDensity, b: &DiscreteDensity) -> Result<TransportResult> {
    check_grid(a.grid(), b.grid())?;
    let grid = *a.grid();
    let n = grid.len();
    if n > LP_NODE_LIMIT {
        return Err(Error::TooLarge { nodes: n, limit: LP_NODE_LIMIT });
    }
    let ma = a.node_masses();
    let mb = b.node_masses();
    let (sa, sb): (f64, f64) = (ma.iter().sum(), mb.iter().sum());
    if (sa - sb).abs() > 1e-9 {
        return Err(Error::Unbalanced(sa - sb));
    }
    let rows: Vec<usize> = (0..n).filter(|&i| ma[i] > 0.0).collect();
    let cols: Vec<usize> = (0..n).filter(|&j| mb[j] > 0.0).collect();
    let supply: Vec<f64> = rows.iter().map(|&i| ma[i]).collect();
    let scale = sa / sb;
    let demand: Vec<f64> = cols.iter().map(|&j| mb[j] * scale).collect();
    let mut cost = Vec::with_capacity(rows.len() * cols.len());
    for &i in &rows {
        for &j in &cols {
            cost.push(0.5 * grid.node_dist2(i, j));
        }
    }

    let mut simplex = TransportationSimplex::new(cost, supply, demand);
    let iterations = simplex.solve()?;

    let mut plan = Plan::default();
    for (k, &(r, s)) in simplex.basis.iter().enumerate() {
        if simplex.flow[k] > 0.0 {
            plan.entries.push((rows[r], cols[s], simplex.flow[k]));
        }
    }
    plan.entries.sort_by_key(|&(i, j, _)| (i, j));
    let total_cost = plan.cost(&grid);

    // g(y) = min over supported x of ½d² − u(x), then f = g^c on all nodes.
    let g_vals: Vec<f64> = (0..n)
        .map(|y| {
            rows.iter()
                .zip(&simplex.u)
                .map(|(&x, &u)| 0.5 * grid.node_dist2(x, y) - u)
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let g = GridFunction::from_raw(grid, g_vals);
    let f = c_transform(&g);
    let map = map_from_potential(&f);
    let marginal_error = plan_marginal_error(&plan, &ma, &mb);
    Ok(TransportResult {
        cost: total_cost,
        raw_cost: None,
        plan: Some(plan),
        potentials: (f, g),
        map: Some(map),
        marginal_error,
        iterations,
    })
}

/// Balanced transportation problem `min Σ c_rs x_rs` with row sums `supply`
/// and column sums `demand`.
pub(crate) struct TransportationSimplex {
    nr: usize,
    ns: usize,
    cost: Vec<f64>,
    supply: Vec<f64>,
    demand: Vec<f64>,
    pub(crate) basis: Vec<(usize, usize)>,
    pub(crate) flow: Vec<f64>,
    slot: Vec<u32>,
    pub(crate) u: Vec<f64>,
    pub(crate) v: Vec<f64>,
}

impl TransportationSimplex {
    pub(crate) fn new(cost: Vec<f64>, supply: Vec<f64>, demand: Vec<f64>) -> Self {
        let (nr, ns) = (supply.len(), demand.len());
        Self {
            nr,
            ns,
            cost,
            supply,
            demand,
            basis: Vec::new(),
            flow: Vec::new(),
            slot: vec![NONBASIC; nr * ns],
            u: vec![0.0; nr],
            v: vec![0.0; ns],
        }
    }

    fn northwest_corner(&mut self) {
        let mut ra = self.supply.clone();
        let mut rb = self.demand.clone();
        let (mut i, mut j) = (0, 0);
        loop {
            let x = ra[i].min(rb[j]);
            ra[i] -= x;
            rb[j] -= x;
            self.slot[i * self.ns + j] = self.basis.len() as u32;
            self.basis.push((i, j));
            self.flow.push(x);
            if i == self.nr - 1 && j == self.ns - 1 {
                break;
            }
            if i == self.nr - 1 {
                j += 1;
            } else if j == self.ns - 1 || ra[i] <= rb[j] {
                i += 1;
            } else {
                j += 1;
            }
        }
    }

    /// Adjacency of the basis tree; rows are nodes `0..nr`, columns
    /// `nr..nr+ns`.
    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nr + self.ns];
        for (k, &(r, s)) in self.basis.iter().enumerate() {
            adj[r].push(k);
            adj[self.nr + s].push(k);
        }
        adj
    }

    fn update_duals(&mut self, adj: &[Vec<usize>]) {
        let nn = self.nr + self.ns;
        let mut seen = vec![false; nn];
        let mut stack = vec![0usize];
        seen[0] = true;
        self.u[0] = 0.0;
        while let Some(node) = stack.pop() {
            for &k in &adj[node] {
                let (r, s) = self.basis[k];
                let c = self.cost[r * self.ns + s];
                let other = if node < self.nr { self.nr + s } else { r };
                if !seen[other] {
                    seen[other] = true;
                    if other < self.nr {
                        self.u[r] = c - self.v[s];
                    } else {
                        self.v[s] = c - self.u[r];
                    }
                    stack.push(other);
                }
            }
        }
    }

    /// Basis slots on the tree path from column `s` to row `r`, ordered from
    /// the column end.
    fn tree_path(&self, adj: &[Vec<usize>], r: usize, s: usize) -> Vec<usize> {
        let nn = self.nr + self.ns;
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; nn];
        let mut seen = vec![false; nn];
        let mut stack = vec![r];
        seen[r] = true;
        let target = self.nr + s;
        while let Some(node) = stack.pop() {
            if node == target {
                break;
            }
            for &k in &adj[node] {
                let (br, bs) = self.basis[k];
                let other = if node < self.nr { self.nr + bs } else { br };
                if !seen[other] {
                    seen[other] = true;
                    parent[other] = Some((node, k));
                    stack.push(other);
                }
            }
        }
        let mut path = Vec::new();
        let mut node = target;
        while node != r {
            let (prev, k) = parent[node].expect("basis is a spanning tree");
            path.push(k);
            node = prev;
        }
        path
    }

    /// Runs to optimality; returns the number of pivots.
    pub(crate) fn solve(&mut self) -> Result<usize> {
        self.northwest_corner();
        let max_cost = self.cost.iter().copied().fold(0.0, f64::max);
        let tol = 1e-12 * max_cost.max(f64::MIN_POSITIVE);
        let nn = self.nr + self.ns;
        let max_pivots = 50 * nn * nn + 10_000;
        let mut bland = false;
        let mut degenerate_run = 0usize;
        for pivot in 0..max_pivots {
            let adj = self.adjacency();
            self.update_duals(&adj);

            let mut entering = None;
            let mut best = -tol;
            'price: for r in 0..self.nr {
                for s in 0..self.ns {
                    if self.slot[r * self.ns + s] != NONBASIC {
                        continue;
                    }
                    let rc = self.cost[r * self.ns + s] - self.u[r] - self.v[s];
                    if rc < best {
                        best = rc;
                        entering = Some((r, s));
                        if bland {
                            break 'price;
                        }
                    }
                }
            }
            let Some((r, s)) = entering else {
                return Ok(pivot);
            };

            let path = self.tree_path(&adj, r, s);
            // even positions lose flow, odd positions gain
            let mut leave = path[0];
            for &k in path.iter().step_by(2) {
                let better = self.flow[k] < self.flow[leave]
                    || (self.flow[k] == self.flow[leave]
                        && bland
                        && cell_index(self.basis[k], self.ns) < cell_index(self.basis[leave], self.ns));
                if better {
                    leave = k;
                }
            }
            let theta = self.flow[leave].max(0.0);
            for (pos, &k) in path.iter().enumerate() {
                if pos % 2 == 0 {
                    self.flow[k] = (self.flow[k] - theta).max(0.0);
                } else {
                    self.flow[k] += theta;
                }
            }
            let (lr, ls) = self.basis[leave];
            self.slot[lr * self.ns + ls] = NONBASIC;
            self.basis[leave] = (r, s);
            self.flow[leave] = theta;
            self.slot[r * self.ns + s] = leave as u32;

            if theta == 0.0 {
                degenerate_run += 1;
                if degenerate_run > 2 * nn {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
            }
        }
        Err(Error::NotConverged { solver: "transportation simplex", iterations: max_pivots, last_error: f64::NAN })
    }
}

fn cell_index((r, s): (usize, usize), ns: usize) -> usize {
    r * ns + s
}
