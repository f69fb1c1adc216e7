use alloc::vec::Vec;

use crate::grid::GridFunction;

/// `f^c(x) = min_y ½d²(x, y) − f(y)` over the grid nodes.
pub fn c_transform(f: &GridFunction) -> GridFunction {
    c_transform_with_argmin(f).0
}

/// The c-transform together with the minimizing node for every `x`.
/// Ties go to the lowest row-major index.
pub fn c_transform_with_argmin(f: &GridFunction) -> (GridFunction, Vec<usize>) {
    let g = *f.grid();
    let n = g.len();
    let fv = f.values();
    let mut out = Vec::with_capacity(n);
    let mut arg = Vec::with_capacity(n);
    for i in 0..n {
        let mut best = f64::INFINITY;
        let mut best_j = 0;
        for (j, &fj) in fv.iter().enumerate() {
            let v = 0.5 * g.node_dist2(i, j) - fj;
            if v < best {
                best = v;
                best_j = j;
            }
        }
        out.push(best);
        arg.push(best_j);
    }
    (GridFunction::from_raw(g, out), arg)
}

/// `max_{x,y} f(x) + g(y) − ½d²(x, y)`; non-positive for a feasible dual pair.
pub fn dual_feasibility_violation(f: &GridFunction, g: &GridFunction) -> f64 {
    let grid = *f.grid();
    let mut worst = f64::NEG_INFINITY;
    for (i, fi) in f.values().iter().enumerate() {
        for (j, gj) in g.values().iter().enumerate() {
            worst = worst.max(fi + gj - 0.5 * grid.node_dist2(i, j));
        }
    }
    worst
}
