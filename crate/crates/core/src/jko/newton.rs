//! Conservative 1D Monge–Ampère solver.
//!
//! Unknowns are `u = log ρ`. Cell `i` of the new density spans the faces
//! `x_{i±½}`; the map `φ = x + h∇F` sends face `i+½` to
//! `φ_{i+½} = x_{i+½} + h (F_{i+1} − F_i)/Δx`. The pushforward condition reads
//!
//! `R_i = M(φ_{i+½}) − M(φ_{i−½}) − ρ_i v₀_i Δx = 0`,
//!
//! where `M` is the lifted cumulative mass of `ρ_prev v₀`, reconstructed
//! linearly inside node-centred cells with exact cell masses (so faces map
//! to faces when `ρ = ρ_prev` is stationary). Summing over `i` shows
//! `Σ ρ_i v₀_i Δx = 1` at any solution, so mass is conserved exactly.
//!
//! `R = −∇Φ` for the strictly convex merit
//! `Φ(u) = (Δx/h) Σ_faces Q(φ_f) + Σ_i ρ_i v₀_i Δx − M_tot u₀` with `Q' = M`
//! (the last term compensates the lift of face `−½`), and the
//! Jacobian `−(h/Δx) Dᵀ W D − diag(ρ v₀ Δx)` is cyclic tridiagonal. The
//! damped Newton iteration accepts a step when it satisfies the Armijo
//! condition on `Φ` or contracts `max |R|`; the second test takes over near
//! the solution, where changes of `Φ` drop below round-off.

use alloc::vec;
use alloc::vec::Vec;

use crate::grid::GridFunction;
use crate::linalg::solve_cyclic_tridiagonal;
use crate::{math, Error, Grid, ProblemSpec, Result};

/// Lifted cumulative mass of a density reconstructed linearly inside each
/// node-centred cell, with origin at the left face of cell 0.
///
/// Cell `j` carries mass `a_j Δx` exactly; its slope is the centred
/// difference `(a_{j+1} − a_{j−1})/(2Δx)`, clamped so the reconstruction
/// stays above `a_j / 2`.
pub(crate) struct CumulativeMass {
    dx: f64,
    period: f64,
    a: Vec<f64>,
    slope: Vec<f64>,
    /// `cum[j]` = mass of cells `< j`
    cum: Vec<f64>,
    /// `∫` of `M` over cells `< j`
    qcum: Vec<f64>,
    total: f64,
}

impl CumulativeMass {
    pub(crate) fn new(density: Vec<f64>, dx: f64) -> Self {
        let m = density.len();
        let slope: Vec<f64> = (0..m)
            .map(|j| {
                let raw = (density[(j + 1) % m] - density[(j + m - 1) % m]) / (2.0 * dx);
                let cap = density[j] / dx;
                raw.clamp(-cap, cap)
            })
            .collect();
        let mut cum = Vec::with_capacity(m + 1);
        let mut qcum = Vec::with_capacity(m + 1);
        let (mut c, mut q) = (0.0, 0.0);
        for j in 0..m {
            cum.push(c);
            qcum.push(q);
            q += c * dx + density[j] * dx * dx / 2.0 - slope[j] * dx * dx * dx / 12.0;
            c += density[j] * dx;
        }
        cum.push(c);
        qcum.push(q);
        Self { dx, period: dx * m as f64, a: density, slope, cum, qcum, total: c }
    }

    /// Splits `y` (in node coordinates) into lift `k`, cell `j`, offset `t`
    /// from the cell's left face.
    fn locate(&self, y: f64) -> (f64, usize, f64) {
        let s = y + 0.5 * self.dx;
        let k = math::floor(s / self.period);
        let r = s - k * self.period;
        let j = ((r / self.dx) as usize).min(self.a.len() - 1);
        (k, j, r - j as f64 * self.dx)
    }

    /// `M(y)`.
    pub(crate) fn value(&self, y: f64) -> f64 {
        let (k, j, t) = self.locate(y);
        k * self.total + self.cum[j] + self.a[j] * t + self.slope[j] * t * (0.5 * t - 0.5 * self.dx)
    }

    /// `M'(y)` (right derivative at cell faces).
    pub(crate) fn density(&self, y: f64) -> f64 {
        let (_, j, t) = self.locate(y);
        self.a[j] + self.slope[j] * (t - 0.5 * self.dx)
    }

    /// `∫_{y1}^{y2} M`, by Simpson's rule on each piece inside a cell (exact,
    /// `M` being quadratic there), so that no large offsets cancel.
    pub(crate) fn integral(&self, y1: f64, y2: f64) -> f64 {
        let (lo, hi, sign) = if y1 <= y2 { (y1, y2, 1.0) } else { (y2, y1, -1.0) };
        let mut acc = 0.0;
        let mut cur = lo;
        let mut m_cur = self.value(cur);
        while cur < hi {
            let mut face = (math::floor((cur + 0.5 * self.dx) / self.dx) + 1.0) * self.dx - 0.5 * self.dx;
            if face <= cur {
                face += self.dx;
            }
            let end = if face < hi { face } else { hi };
            let m_end = self.value(end);
            let mid = self.value(0.5 * (cur + end));
            acc += (end - cur) / 6.0 * (m_cur + 4.0 * mid + m_end);
            cur = end;
            m_cur = m_end;
        }
        sign * acc
    }

    /// `Q(y) = ∫_{−Δx/2}^{y} M`.
    pub(crate) fn antiderivative(&self, y: f64) -> f64 {
        let (k, j, t) = self.locate(y);
        let per_period = self.qcum[self.a.len()];
        let r = j as f64 * self.dx + t;
        let q0 = self.qcum[j]
            + self.cum[j] * t
            + self.a[j] * t * t / 2.0
            + self.slope[j] * (t * t * t / 6.0 - self.dx * t * t / 4.0);
        q0 + k * per_period + self.total * (self.period * k * (k - 1.0) * 0.5 + k * r)
    }
}

/// Node masses `ρ v₀ Δx`.
fn node_masses(rho: &[f64], v0: &[f64], dx: f64) -> Vec<f64> {
    rho.iter().zip(v0).map(|(r, v)| r * v * dx).collect()
}

pub(crate) struct MaProblem<'a> {
    pub grid: Grid,
    pub h: f64,
    pub dx: f64,
    pub v0: &'a [f64],
    /// `Ψ − log v₀`
    pub pot: Vec<f64>,
    pub prev: CumulativeMass,
}

pub(crate) struct NewtonOutcome {
    pub u: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    /// merit after each accepted iterate, starting with the initial guess
    pub merits: Vec<f64>,
}

impl<'a> MaProblem<'a> {
    /// The problem "push the new density forward to `target_rho`".
    pub(crate) fn new(spec: &'a ProblemSpec, target_rho: &[f64], h: f64) -> Result<Self> {
        let grid = *spec.grid();
        if grid.dim() != 1 {
            return Err(Error::Dimension(grid.dim()));
        }
        let dx = grid.spacing(0);
        let v0 = spec.v0().values();
        let pot = spec.potential().into_values();
        let prev = CumulativeMass::new(target_rho.iter().zip(v0).map(|(r, v)| r * v).collect(), dx);
        Ok(Self { grid, h, dx, v0, pot, prev })
    }

    pub(crate) fn face_images(&self, u: &[f64]) -> Vec<f64> {
        let m = u.len();
        (0..m)
            .map(|i| {
                let j = (i + 1) % m;
                let df = (u[j] + self.pot[j]) - (u[i] + self.pot[i]);
                (i as f64 + 0.5) * self.dx + self.h * df / self.dx
            })
            .collect()
    }

    /// `R_i`, in mass units.
    pub(crate) fn residual(&self, u: &[f64]) -> Vec<f64> {
        let m = u.len();
        let mv: Vec<f64> = self.face_images(u).iter().map(|&y| self.prev.value(y)).collect();
        // face −½ is face m−½ shifted down one period
        let first = mv[m - 1] - self.prev.total;
        (0..m)
            .map(|i| {
                let lower = if i == 0 { first } else { mv[i - 1] };
                mv[i] - lower - math::exp(u[i]) * self.v0[i] * self.dx
            })
            .collect()
    }

    /// `Φ(trial) − Φ(u)`, accurate to round-off in the difference itself.
    fn merit_change(&self, u: &[f64], trial: &[f64]) -> f64 {
        let a = self.face_images(u);
        let b = self.face_images(trial);
        let q: f64 = a.iter().zip(&b).map(|(&y1, &y2)| self.prev.integral(y1, y2)).sum();
        let mass: f64 = u
            .iter()
            .zip(trial)
            .zip(self.v0)
            .map(|((x, y), v)| math::exp(*x) * math::exp_m1(y - x) * v * self.dx)
            .sum();
        self.dx / self.h * q + mass - self.prev.total * (trial[0] - u[0])
    }

    fn merit(&self, u: &[f64]) -> f64 {
        let phi = self.face_images(u);
        let q: f64 = phi.iter().map(|&y| self.prev.antiderivative(y)).sum();
        let b: f64 = u.iter().zip(self.v0).map(|(ui, v)| math::exp(*ui) * v * self.dx).sum();
        self.dx / self.h * q + b - self.prev.total * u[0]
    }

    /// Damped Newton from `u0` until `max |R_i| / Δx ≤ tol`.
    pub(crate) fn solve(&self, u0: Vec<f64>, tol: f64, max_iter: usize) -> Result<NewtonOutcome> {
        let m = u0.len();
        let mut u = u0;
        let mut r = self.residual(&u);
        let mut merit = self.merit(&u);
        let mut merits = vec![merit];
        let coef = self.h / self.dx;
        for it in 0..max_iter {
            let rmax = r.iter().fold(0.0_f64, |a, v| a.max(v.abs())) / self.dx;
            if !rmax.is_finite() {
                return Err(Error::NaN("Monge-Ampere residual"));
            }
            if rmax <= tol {
                return Ok(NewtonOutcome { u, iterations: it, residual: rmax, merits });
            }
            let phi = self.face_images(&u);
            let p: Vec<f64> = phi.iter().map(|&y| self.prev.density(y)).collect();
            let mut sub = vec![0.0; m];
            let mut sup = vec![0.0; m];
            let mut diag = vec![0.0; m];
            for i in 0..m {
                let pl = p[(i + m - 1) % m];
                let pr = p[i];
                sub[i] = coef * pl;
                sup[i] = coef * pr;
                diag[i] = -coef * (pl + pr) - math::exp(u[i]) * self.v0[i] * self.dx;
            }
            let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
            let delta = solve_cyclic_tridiagonal(&sub, &diag, &sup, &rhs)?;
            let slope: f64 = -r.iter().zip(&delta).map(|(a, b)| a * b).sum::<f64>();
            let rnorm = rmax * self.dx;
            let mut t = 1.0;
            loop {
                let trial: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a + t * d).collect();
                let change = self.merit_change(&u, &trial);
                let tr = self.residual(&trial);
                let tr_max = tr.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
                let armijo = change <= 1e-4 * t * slope;
                let contraction = tr_max <= (1.0 - 0.5 * t) * rnorm;
                if change.is_finite() && (armijo || contraction) {
                    u = trial;
                    r = tr;
                    merit += change;
                    merits.push(merit);
                    break;
                }
                t *= 0.5;
                if t < 1e-12 {
                    return Err(Error::NotConverged { solver: "Monge-Ampere Newton", iterations: it, last_error: rmax });
                }
            }
        }
        let rmax = r.iter().fold(0.0_f64, |a, v| a.max(v.abs())) / self.dx;
        Err(Error::NotConverged { solver: "Monge-Ampere Newton", iterations: max_iter, last_error: rmax })
    }

    /// `½ Σ_faces (φ_f − x_f)² · (b_i + b_{i+1})/2`: transport cost of the face map.
    pub(crate) fn map_cost(&self, u: &[f64]) -> f64 {
        let m = u.len();
        let phi = self.face_images(u);
        let b = node_masses(&u.iter().map(|v| math::exp(*v)).collect::<Vec<_>>(), self.v0, self.dx);
        (0..m)
            .map(|i| {
                let d = phi[i] - (i as f64 + 0.5) * self.dx;
                0.25 * d * d * (b[i] + b[(i + 1) % m])
            })
            .sum()
    }

    /// Nodes where consecutive face images fail to increase.
    pub(crate) fn fold_nodes(&self, u: &[f64]) -> Vec<(usize, f64)> {
        let m = u.len();
        let phi = self.face_images(u);
        (0..m)
            .filter_map(|i| {
                let lower = if i == 0 { phi[m - 1] - self.grid.period() } else { phi[i - 1] };
                let jac = (phi[i] - lower) / self.dx;
                (jac <= 0.0).then_some((i, jac))
            })
            .collect()
    }
}

/// Conservative residual `R_i / Δx` of `ρ` against `ρ_prev`.
pub(crate) fn conservative_residual(rho: &GridFunction, prev: &GridFunction, h: f64, spec: &ProblemSpec) -> Result<(GridFunction, Vec<usize>)> {
    let problem = MaProblem::new(spec, prev.values(), h)?;
    let mut u = Vec::with_capacity(rho.len());
    for (i, &r) in rho.values().iter().enumerate() {
        if !(r > 0.0) {
            return Err(Error::NonPositive { field: "rho", node: i, value: r });
        }
        u.push(math::ln(r));
    }
    let res = problem.residual(&u).into_iter().map(|v| v / problem.dx).collect();
    let folds = problem.fold_nodes(&u).into_iter().map(|(i, _)| i).collect();
    Ok((GridFunction::from_raw(*rho.grid(), res), folds))
}
