use alloc::vec;
use alloc::vec::Vec;

use super::{c_transform, DiscreteDensity, Plan};
use crate::grid::{GridFunction, VectorField};
use crate::{math, Grid};

/// The map `x ↦ x − ∇f(x)`, reduced onto the torus.
pub fn map_from_potential(f: &GridFunction) -> VectorField {
    let grid = *f.grid();
    let grad = f.gradient();
    let data = grad
        .data()
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let x = grid.coords(i);
            grid.wrap([x[0] - g[0], x[1] - g[1]])
        })
        .collect();
    VectorField::new(grid, data).expect("map of a finite potential is finite")
}

/// Deposits each node's mass at its image by periodic multilinear splatting.
pub fn pushforward(rho: &DiscreteDensity, map: &VectorField) -> DiscreteDensity {
    let grid = *rho.grid();
    let masses = rho.node_masses();
    let mut out = vec![0.0; grid.len()];
    for (i, &m) in masses.iter().enumerate() {
        if m == 0.0 {
            continue;
        }
        let p = map.data()[i];
        let mut base = [0usize; 2];
        let mut frac = [0.0; 2];
        for a in 0..grid.dim() {
            let s = math::wrap(p[a], grid.period()) / grid.spacing(a);
            let fl = math::floor(s);
            frac[a] = s - fl;
            base[a] = (fl as usize) % grid.resolution(a);
        }
        if grid.dim() == 1 {
            let i1 = (base[0] + 1) % grid.resolution(0);
            out[base[0]] += (1.0 - frac[0]) * m;
            out[i1] += frac[0] * m;
        } else {
            let (i0, j0) = (base[0], base[1]);
            let i1 = (i0 + 1) % grid.resolution(0);
            let j1 = (j0 + 1) % grid.resolution(1);
            let (tx, ty) = (frac[0], frac[1]);
            out[grid.index(i0, j0)] += (1.0 - tx) * (1.0 - ty) * m;
            out[grid.index(i0, j1)] += (1.0 - tx) * ty * m;
            out[grid.index(i1, j0)] += tx * (1.0 - ty) * m;
            out[grid.index(i1, j1)] += tx * ty * m;
        }
    }
    DiscreteDensity::from_masses(&out, rho.measure().clone()).expect("splatting preserves a positive total mass")
}

/// A dual pair `(f, g)` that is tight on the support of `plan`.
///
/// Source potentials on the supported rows are shortest-path distances in the
/// graph with edge weights `c(x', y) − c(x, y)` for `(x, y)` in the support
/// (cyclical monotonicity rules out negative cycles up to round-off). Then
/// `g(y) = min_x c(x, y) − f(x)` over supported rows and `f = g^c`.
pub fn potentials_from_plan(grid: &Grid, plan: &Plan) -> (GridFunction, GridFunction) {
    let n = grid.len();
    let mut rows: Vec<usize> = plan.entries.iter().map(|e| e.0).collect();
    rows.sort_unstable();
    rows.dedup();
    let r = rows.len();
    let mut slot = vec![usize::MAX; n];
    for (k, &i) in rows.iter().enumerate() {
        slot[i] = k;
    }
    let mut targets: Vec<Vec<usize>> = vec![Vec::new(); r];
    for &(i, j, m) in &plan.entries {
        if m > 0.0 {
            targets[slot[i]].push(j);
        }
    }
    let cost = |i: usize, j: usize| 0.5 * grid.node_dist2(i, j);
    // w[k][l]: weight of the edge row k -> row l
    let mut w = vec![0.0; r * r];
    for k in 0..r {
        for l in 0..r {
            w[k * r + l] = targets[k]
                .iter()
                .map(|&j| cost(rows[l], j) - cost(rows[k], j))
                .fold(f64::INFINITY, f64::min);
        }
    }
    let mut d = vec![0.0; r];
    for _ in 0..r {
        let mut changed = false;
        for k in 0..r {
            let dk = d[k];
            for l in 0..r {
                let cand = dk + w[k * r + l];
                if cand < d[l] - 1e-15 {
                    d[l] = cand;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let g: Vec<f64> = (0..n)
        .map(|j| {
            rows.iter()
                .zip(&d)
                .map(|(&i, di)| cost(i, j) - di)
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let g = GridFunction::from_raw(*grid, g);
    let f = c_transform(&g);
    (f, g)
}
