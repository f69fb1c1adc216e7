use alloc::vec::Vec;

use super::newton::conservative_residual;
use crate::functionals::f_field;
use crate::grid::GridFunction;
use crate::math::{cos, sin, TAU};
use crate::transport::DiscreteDensity;
use crate::{Grid, ProblemSpec, Result};

/// Monge–Ampère residual with the nodes where `φ` folds.
#[derive(Clone, Debug)]
pub struct MaResidual {
    pub residual: GridFunction,
    /// Nodes where `I + h∇²F` is not positive definite.
    pub indefinite: Vec<usize>,
}

/// `ρ_prev(φ) v₀(φ) det(I + h∇²F) − ρ v₀` with `φ = x + h∇F`.
///
/// In 1D this is evaluated in the conservative form that the Newton solver
/// uses: `(M(φ_{i+½}) − M(φ_{i−½}))/Δx − ρ_i v₀_i`, with `M` the cumulative
/// mass of `ρ_prev v₀`. The difference quotient is the cell average of
/// `ρ_prev(φ) v₀(φ) φ'`, so both forms agree to `O(Δx²)`. In 2D it is
/// [`ma_residual_pointwise`].
pub fn ma_residual(rho: &DiscreteDensity, prev: &DiscreteDensity, h: f64, spec: &ProblemSpec) -> Result<MaResidual> {
    if spec.grid().dim() == 1 {
        let (residual, indefinite) = conservative_residual(rho.rho(), prev.rho(), h, spec)?;
        Ok(MaResidual { residual, indefinite })
    } else {
        ma_residual_pointwise(rho, prev, h, spec)
    }
}

/// Node-wise residual with off-grid values of `ρ_prev` and `v₀` by periodic
/// multilinear interpolation.
pub fn ma_residual_pointwise(
    rho: &DiscreteDensity,
    prev: &DiscreteDensity,
    h: f64,
    spec: &ProblemSpec,
) -> Result<MaResidual> {
    let grid = *spec.grid();
    let big_f = f_field(rho, spec)?;
    let grad = big_f.gradient();
    let hess = big_f.hessian();
    let det = hess.det_identity_plus(h);
    let lam_min = hess.data().iter().map(|m| crate::grid::sym_eigenvalues(m, grid.dim())[0]);
    let indefinite = lam_min.enumerate().filter(|(_, l)| 1.0 + h * l <= 0.0).map(|(i, _)| i).collect();
    let v0 = spec.v0();
    let values = (0..grid.len())
        .map(|i| {
            let x = grid.coords(i);
            let g = grad.data()[i];
            let y = [x[0] + h * g[0], x[1] + h * g[1]];
            prev.rho().sample(y) * v0.sample(y) * det.values()[i] - rho.rho().values()[i] * v0.values()[i]
        })
        .collect();
    Ok(MaResidual { residual: GridFunction::new(grid, values)?, indefinite })
}

/// `∫ [−Δξ + ⟨∇ξ, ∇(Ψ − 2 log v₀)⟩] ρ_k dμ + (1/h) ∫ ξ (ρ_k − ρ_{k−1}) dμ`.
pub fn weak_residual(
    rho_k: &DiscreteDensity,
    rho_prev: &DiscreteDensity,
    h: f64,
    spec: &ProblemSpec,
    xi: &GridFunction,
) -> f64 {
    let mu = spec.measure();
    let lap = xi.laplacian();
    let gx = xi.gradient();
    let gd = spec.drift_potential().gradient();
    let mut stationary = 0.0;
    let mut increment = 0.0;
    for i in 0..xi.len() {
        let a = gx.data()[i];
        let b = gd.data()[i];
        let integrand = -lap.values()[i] + a[0] * b[0] + a[1] * b[1];
        let w = mu.node_mass(i);
        stationary += integrand * rho_k.rho().values()[i] * w;
        increment += xi.values()[i] * (rho_k.rho().values()[i] - rho_prev.rho().values()[i]) * w;
    }
    stationary + increment / h
}

/// Estimate of the Monge–Ampère residual caused by entropic regularization:
/// `(ε/2) (‖Δ(ρ_prev v₀)‖_∞ + ‖Δ(ρ v₀)‖_∞)`, the change of both marginals
/// under a Gaussian blur of variance `ε`.
///
/// Meaningful once `ε` is comparable to or larger than `Δx²`. Below that the
/// entropic plan is essentially the discrete one and the residual is
/// dominated by quantization, which this estimate does not see.
pub fn entropic_bias_estimate(rho: &DiscreteDensity, prev: &DiscreteDensity, epsilon: f64, spec: &ProblemSpec) -> f64 {
    let lap = |r: &DiscreteDensity| r.rho().zip_map(spec.v0(), |a, b| a * b).laplacian().sup_norm();
    0.5 * epsilon * (lap(prev) + lap(rho))
}

/// The test fields `1, sin 2πx, cos 2πx` (and their `y` analogues in 2D).
pub fn test_fields(grid: &Grid) -> Vec<(&'static str, GridFunction)> {
    let l = grid.period();
    let mut out = alloc::vec![
        ("1", GridFunction::constant(*grid, 1.0)),
        ("sin2pix", GridFunction::from_fn(*grid, |p| sin(TAU * p[0] / l))),
        ("cos2pix", GridFunction::from_fn(*grid, |p| cos(TAU * p[0] / l))),
    ];
    if grid.dim() == 2 {
        out.push(("sin2piy", GridFunction::from_fn(*grid, |p| sin(TAU * p[1] / l))));
        out.push(("cos2piy", GridFunction::from_fn(*grid, |p| cos(TAU * p[1] / l))));
    }
    out
}
