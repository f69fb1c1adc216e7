//! Exact transport on the circle.
//!
//! With lifted quantile functions `F⁻¹`, `G⁻¹` (extended by
//! `G⁻¹(t + 1) = G⁻¹(t) + L`), the quadratic circle cost is
//! `min_θ ∫₀¹ ½ |G⁻¹(t + θ) − F⁻¹(t)|² dt`. For atomic measures the objective
//! is convex and piecewise linear in `θ`, so its minimum sits at a
//! breakpoint `θ = B_j − A_i + k`. We bracket the minimizer by golden-section
//! search and then evaluate the breakpoints left in the bracket exactly.

use alloc::vec::Vec;

use super::{check_grid, plan_marginal_error, potentials_from_plan, DiscreteDensity, Plan, TransportResult};
use crate::grid::VectorField;
use crate::math;
use crate::{Error, Result};

const THETA_TOL: f64 = 1e-12;

struct Atoms {
    /// node index of each atom
    node: Vec<usize>,
    pos: Vec<f64>,
    /// cumulative mass, `cum[0] = 0`, `cum[len] = 1`
    cum: Vec<f64>,
}

impl Atoms {
    fn new(masses: &[f64], spacing: f64) -> Self {
        let total: f64 = masses.iter().sum();
        let mut node = Vec::new();
        let mut pos = Vec::new();
        let mut cum = alloc::vec![0.0];
        let mut acc = 0.0;
        for (i, &m) in masses.iter().enumerate() {
            if m > 0.0 {
                acc += m / total;
                node.push(i);
                pos.push(i as f64 * spacing);
                cum.push(acc);
            }
        }
        *cum.last_mut().unwrap() = 1.0;
        Self { node, pos, cum }
    }

    fn len(&self) -> usize {
        self.node.len()
    }

    /// Atom `j` and lift `k` with `cum[j] ≤ s − k < cum[j + 1]`.
    fn locate(&self, s: f64) -> (usize, i64) {
        let k = math::floor(s);
        let r = s - k;
        // partition_point gives the first index with cum > r
        let j = self.cum.partition_point(|&c| c <= r).saturating_sub(1).min(self.len() - 1);
        (j, k as i64)
    }
}

/// Walks `t ∈ [0, 1)` pairing `F⁻¹(t)` with `G⁻¹(t + θ)`; calls
/// `visit(i, j, weight, displacement)` for each constant piece.
fn merge(a: &Atoms, b: &Atoms, theta: f64, period: f64, mut visit: impl FnMut(usize, usize, f64, f64)) {
    let (mut j, mut k) = b.locate(theta);
    let mut i = 0;
    let mut t = 0.0;
    while t < 1.0 && i < a.len() {
        let a_end = a.cum[i + 1];
        let b_end = b.cum[j + 1] + k as f64 - theta;
        let end = a_end.min(b_end).min(1.0);
        let w = end - t;
        if w > 0.0 {
            let disp = b.pos[j] + k as f64 * period - a.pos[i];
            visit(i, j, w, disp);
        }
        t = end.max(t);
        if b_end <= a_end {
            j += 1;
            if j == b.len() {
                j = 0;
                k += 1;
            }
        }
        if a_end <= b_end {
            i += 1;
        }
    }
}

fn lifted_cost(a: &Atoms, b: &Atoms, theta: f64, period: f64) -> f64 {
    let mut c = 0.0;
    merge(a, b, theta, period, |_, _, w, d| c += w * 0.5 * d * d);
    c
}

/// Exact 1D circular optimal transport between two densities.
pub fn solve_ot_1d(a: &DiscreteDensity, b: &DiscreteDensity) -> Result<TransportResult> {
    check_grid(a.grid(), b.grid())?;
    let grid = *a.grid();
    if grid.dim() != 1 {
        return Err(Error::Dimension(grid.dim()));
    }
    let period = grid.period();
    let ma = a.node_masses();
    let mb = b.node_masses();
    let total: f64 = ma.iter().sum();
    let aa = Atoms::new(&ma, grid.spacing(0));
    let bb = Atoms::new(&mb, grid.spacing(0));

    // golden-section bracket of the convex objective
    let phi = 0.5 * (math::sqrt(5.0) - 1.0);
    let (mut lo, mut hi) = (-1.5, 1.5);
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut f1 = lifted_cost(&aa, &bb, x1, period);
    let mut f2 = lifted_cost(&aa, &bb, x2, period);
    let mut iterations = 0;
    while hi - lo > THETA_TOL {
        iterations += 1;
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = lifted_cost(&aa, &bb, x1, period);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = lifted_cost(&aa, &bb, x2, period);
        }
    }
    // snap to the exact breakpoints near the bracket
    let window = 1e-9;
    let mut best_theta = 0.5 * (lo + hi);
    let mut best = lifted_cost(&aa, &bb, best_theta, period);
    for ca in &aa.cum[..aa.len()] {
        for cb in &bb.cum[..bb.len()] {
            let base = cb - ca;
            let k = math::floor(lo - base + 0.5);
            for kk in [k - 1.0, k, k + 1.0] {
                let th = base + kk;
                if th >= lo - window && th <= hi + window {
                    let c = lifted_cost(&aa, &bb, th, period);
                    if c < best {
                        best = c;
                        best_theta = th;
                    }
                }
            }
        }
    }

    let mut plan = Plan::default();
    let mut moved = alloc::vec![0.0; grid.len()];
    merge(&aa, &bb, best_theta, period, |i, j, w, d| {
        let (xi, yj) = (aa.node[i], bb.node[j]);
        plan.entries.push((xi, yj, w * total));
        moved[xi] += w * total * d;
    });
    // merge adjacent duplicates
    plan.entries.sort_by_key(|&(i, j, _)| (i, j));
    let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(plan.entries.len());
    for e in plan.entries.drain(..) {
        match merged.last_mut() {
            Some(last) if last.0 == e.0 && last.1 == e.1 => last.2 += e.2,
            _ => merged.push(e),
        }
    }
    plan.entries = merged;
    let cost = best * total;

    let map_data = (0..grid.len())
        .map(|i| {
            let x = grid.coords(i)[0];
            let d = if ma[i] > 0.0 { moved[i] / ma[i] } else { 0.0 };
            [math::wrap(x + d, period), 0.0]
        })
        .collect();
    let map = VectorField::new(grid, map_data)?;
    let potentials = potentials_from_plan(&grid, &plan);
    let marginal_error = plan_marginal_error(&plan, &ma, &mb);
    Ok(TransportResult {
        cost,
        raw_cost: None,
        plan: Some(plan),
        potentials,
        map: Some(map),
        marginal_error,
        iterations,
    })
}
