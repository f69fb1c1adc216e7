//! Small linear solvers: periodic (cyclic) tridiagonal systems and a
//! matrix-free BiCGSTAB for the 2D operators.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::{Error, Grid, Result};

/// Thomas algorithm for a non-periodic tridiagonal system.
/// `sub[i]` multiplies `x[i-1]`, `sup[i]` multiplies `x[i+1]`; `sub[0]` and
/// `sup[n-1]` are ignored.
pub fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut beta = diag[0];
    if beta == 0.0 {
        return Err(Error::LinearSolve("zero pivot in tridiagonal solve"));
    }
    x[0] = rhs[0] / beta;
    for i in 1..n {
        c[i] = sup[i - 1] / beta;
        beta = diag[i] - sub[i] * c[i];
        if beta == 0.0 || !beta.is_finite() {
            return Err(Error::LinearSolve("zero pivot in tridiagonal solve"));
        }
        x[i] = (rhs[i] - sub[i] * x[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        x[i] -= c[i + 1] * x[i + 1];
    }
    Ok(x)
}

/// Periodic tridiagonal system: row `i` reads
/// `sub[i]·x[i−1] + diag[i]·x[i] + sup[i]·x[i+1] = rhs[i]` with indices
/// modulo `n`. Solved by Sherman–Morrison on top of the Thomas algorithm.
pub fn solve_cyclic_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if n < 3 {
        return Err(Error::LinearSolve("cyclic system needs at least 3 unknowns"));
    }
    let alpha = sup[n - 1]; // row n-1, column 0
    let beta = sub[0]; // row 0, column n-1
    let gamma = -diag[0];
    let mut bb = diag.to_vec();
    bb[0] = diag[0] - gamma;
    bb[n - 1] = diag[n - 1] - alpha * beta / gamma;
    let x = solve_tridiagonal(sub, &bb, sup, rhs)?;
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = alpha;
    let z = solve_tridiagonal(sub, &bb, sup, &u)?;
    let denom = 1.0 + z[0] + beta * z[n - 1] / gamma;
    if denom == 0.0 || !denom.is_finite() {
        return Err(Error::LinearSolve("singular cyclic tridiagonal system"));
    }
    let fact = (x[0] + beta * x[n - 1] / gamma) / denom;
    Ok(x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect())
}

/// Outcome of an iterative solve.
#[derive(Clone, Debug)]
pub struct IterativeSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    math::sqrt(dot(a, a))
}

/// BiCGSTAB for `A x = b` with `A` given as a matrix-vector product.
/// Stops when `‖b − A x‖ ≤ tol·‖b‖`.
pub fn bicgstab(
    apply: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    x0: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<IterativeSolution> {
    let n = b.len();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok(IterativeSolution { x: vec![0.0; n], iterations: 0, relative_residual: 0.0 });
    }
    let mut x = x0.to_vec();
    let mut r = vec![0.0; n];
    apply(&x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut rel = norm(&r) / bnorm;
    for it in 0..max_iter {
        if rel <= tol {
            return Ok(IterativeSolution { x, iterations: it, relative_residual: rel });
        }
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 || !rho_new.is_finite() {
            return Err(Error::LinearSolve("BiCGSTAB breakdown (rho = 0)"));
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        apply(&p, &mut v);
        let rv = dot(&r_hat, &v);
        if rv == 0.0 {
            return Err(Error::LinearSolve("BiCGSTAB breakdown (r·v = 0)"));
        }
        alpha = rho / rv;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm(&s) / bnorm <= tol {
            for i in 0..n {
                x[i] += alpha * p[i];
            }
            rel = norm(&s) / bnorm;
            return Ok(IterativeSolution { x, iterations: it + 1, relative_residual: rel });
        }
        apply(&s, &mut t);
        let tt = dot(&t, &t);
        if tt == 0.0 {
            return Err(Error::LinearSolve("BiCGSTAB breakdown (t = 0)"));
        }
        omega = dot(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * p[i] + omega * s[i];
            r[i] = s[i] - omega * t[i];
        }
        rel = norm(&r) / bnorm;
        if omega == 0.0 {
            return Err(Error::LinearSolve("BiCGSTAB breakdown (omega = 0)"));
        }
    }
    if rel <= tol {
        Ok(IterativeSolution { x, iterations: max_iter, relative_residual: rel })
    } else {
        Err(Error::NotConverged { solver: "bicgstab", iterations: max_iter, last_error: rel })
    }
}

/// A linear operator on grid values with a 3-point stencil per axis:
/// `(S x)_i = c_i x_i + Σ_axes (l_i x_{i−e} + u_i x_{i+e})`, periodic.
#[derive(Clone, Debug)]
pub struct PeriodicStencil {
    grid: Grid,
    pub center: Vec<f64>,
    pub lower: [Vec<f64>; 2],
    pub upper: [Vec<f64>; 2],
}

impl PeriodicStencil {
    pub fn zeros(grid: Grid) -> Self {
        let n = grid.len();
        let second = if grid.dim() == 2 { vec![0.0; n] } else { Vec::new() };
        Self { grid, center: vec![0.0; n], lower: [vec![0.0; n], second.clone()], upper: [vec![0.0; n], second] }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let g = &self.grid;
        for i in 0..g.len() {
            let mut acc = self.center[i] * x[i];
            for a in 0..g.dim() {
                acc += self.lower[a][i] * x[g.neighbor(i, a, -1)] + self.upper[a][i] * x[g.neighbor(i, a, 1)];
            }
            out[i] = acc;
        }
    }

    /// `α I + β S`.
    pub fn affine(&self, alpha: f64, beta: f64) -> Self {
        let scale = |v: &Vec<f64>| v.iter().map(|c| beta * c).collect::<Vec<f64>>();
        Self {
            grid: self.grid,
            center: self.center.iter().map(|c| alpha + beta * c).collect(),
            lower: [scale(&self.lower[0]), scale(&self.lower[1])],
            upper: [scale(&self.upper[0]), scale(&self.upper[1])],
        }
    }

    /// Solves `S x = rhs`: directly in 1D, by BiCGSTAB to relative
    /// residual `tol` in 2D.
    pub fn solve(&self, rhs: &[f64], x0: &[f64], tol: f64) -> Result<Vec<f64>> {
        if self.grid.dim() == 1 {
            solve_cyclic_tridiagonal(&self.lower[0], &self.center, &self.upper[0], rhs)
        } else {
            let max_iter = 20 * self.grid.len() + 100;
            Ok(bicgstab(|x, y| self.apply(x, y), rhs, x0, tol, max_iter)?.x)
        }
    }
}
