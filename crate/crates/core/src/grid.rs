//! Uniform periodic grids on the flat torus, sampled fields and their
//! finite-difference calculus.
//!
//! Nodes are stored row-major: in 2D the node `(i0, i1)` lives at index
//! `i0 * m1 + i1`, so the last axis is the fastest. This ordering is also the
//! on-disk ordering of field files.
//!
//! All stencils are centered and second order; index arithmetic wraps modulo
//! the resolution on every axis.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::{Error, Result};

/// Minimum number of nodes per axis.
pub const MIN_RESOLUTION: usize = 4;

/// A point on the torus. In 1D the second coordinate is ignored.
pub type Point = [f64; 2];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    dim: usize,
    shape: [usize; 2],
    period: f64,
}

impl Grid {
    /// Square grid with `resolution` nodes per axis on `[0, period)^dim`.
    pub fn new(dim: usize, resolution: usize, period: f64) -> Result<Self> {
        Self::with_shape(dim, &[resolution, resolution][..dim.min(2)], period)
    }

    /// Grid with a per-axis resolution.
    pub fn with_shape(dim: usize, shape: &[usize], period: f64) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::Dimension(dim));
        }
        if shape.len() != dim {
            return Err(Error::Dimension(shape.len()));
        }
        if let Some(&m) = shape.iter().find(|&&m| m < MIN_RESOLUTION) {
            return Err(Error::Resolution(m));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::Period(period));
        }
        let shape = if dim == 1 { [shape[0], 1] } else { [shape[0], shape[1]] };
        Ok(Self { dim, shape, period })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Nodes along `axis`.
    pub fn resolution(&self, axis: usize) -> usize {
        self.shape[axis]
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape[..self.dim]
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.period / self.shape[axis] as f64
    }

    /// Largest spacing over the axes.
    pub fn max_spacing(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).fold(0.0, f64::max)
    }

    /// Volume (length, area) of the cell owned by one node.
    pub fn node_volume(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).product()
    }

    /// Total number of nodes.
    pub fn len(&self) -> usize {
        self.shape[0] * self.shape[1]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Largest distance between two points of the torus.
    pub fn diameter(&self) -> f64 {
        0.5 * self.period * math::sqrt(self.dim as f64)
    }

    pub fn index(&self, i0: usize, i1: usize) -> usize {
        i0 * self.shape[1] + i1
    }

    pub fn multi_index(&self, idx: usize) -> [usize; 2] {
        [idx / self.shape[1], idx % self.shape[1]]
    }

    pub fn coords(&self, idx: usize) -> Point {
        let [i0, i1] = self.multi_index(idx);
        let x = i0 as f64 * self.spacing(0);
        let y = if self.dim == 2 { i1 as f64 * self.spacing(1) } else { 0.0 };
        [x, y]
    }

    pub fn nodes(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.len()).map(move |i| self.coords(i))
    }

    /// Index of the node `delta` steps away from `idx` along `axis`, wrapping.
    #[inline]
    pub fn neighbor(&self, idx: usize, axis: usize, delta: isize) -> usize {
        let mut mi = self.multi_index(idx);
        let m = self.shape[axis] as isize;
        mi[axis] = (mi[axis] as isize + delta).rem_euclid(m) as usize;
        self.index(mi[0], mi[1])
    }

    /// Squared flat-torus distance between two points.
    pub fn dist2(&self, x: &Point, y: &Point) -> f64 {
        (0..self.dim)
            .map(|a| {
                let d = math::min_image(y[a] - x[a], self.period);
                d * d
            })
            .sum()
    }

    /// Squared torus distance between two nodes.
    pub fn node_dist2(&self, i: usize, j: usize) -> f64 {
        self.dist2(&self.coords(i), &self.coords(j))
    }

    /// `½ d²` between the nodes `i` and `j` along one axis, by index.
    pub(crate) fn axis_half_cost(&self, axis: usize, i: usize, j: usize) -> f64 {
        let h = self.spacing(axis);
        let d = math::min_image((j as f64 - i as f64) * h, self.period);
        0.5 * d * d
    }

    /// Reduces every coordinate into `[0, period)`.
    pub fn wrap(&self, p: Point) -> Point {
        let mut q = [math::wrap(p[0], self.period), 0.0];
        if self.dim == 2 {
            q[1] = math::wrap(p[1], self.period);
        }
        q
    }
}

/// Squared flat-torus distance, `Σ_axes min(|xᵢ−yᵢ|, L−|xᵢ−yᵢ|)²`.
pub fn torus_dist2(x: &[f64], y: &[f64], grid: &Grid) -> f64 {
    let mut p = [0.0; 2];
    let mut q = [0.0; 2];
    p[..grid.dim()].copy_from_slice(&x[..grid.dim()]);
    q[..grid.dim()].copy_from_slice(&y[..grid.dim()]);
    grid.dist2(&p, &q)
}

/// A real scalar field sampled at the nodes of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Length { expected: grid.len(), got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self { grid, values: vec![c; grid.len()] }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: Grid, mut f: impl FnMut(Point) -> f64) -> Self {
        let values = grid.nodes().map(&mut f).collect();
        Self { grid, values }
    }

    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Self { grid: self.grid, values }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |self − other|`.
    pub fn sup_dist(&self, other: &Self) -> f64 {
        self.values.iter().zip(&other.values).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Plain node sum; deterministic left-to-right order.
    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Cyclic shift of the samples by `delta` nodes along `axis`:
    /// `out[i] = self[i − delta]`.
    pub fn shift(&self, axis: usize, delta: isize) -> Self {
        let g = self.grid;
        let values = (0..g.len()).map(|i| self.values[g.neighbor(i, axis, -delta)]).collect();
        Self { grid: g, values }
    }

    /// Periodic multilinear interpolation at an arbitrary point.
    pub fn sample(&self, p: Point) -> f64 {
        let g = &self.grid;
        let mut base = [0usize; 2];
        let mut frac = [0.0; 2];
        for a in 0..g.dim() {
            let m = g.resolution(a);
            let s = math::wrap(p[a], g.period()) / g.spacing(a);
            let fl = math::floor(s);
            frac[a] = s - fl;
            base[a] = (fl as usize) % m;
        }
        if g.dim() == 1 {
            let i1 = (base[0] + 1) % g.resolution(0);
            (1.0 - frac[0]) * self.values[base[0]] + frac[0] * self.values[i1]
        } else {
            let (m0, m1) = (g.resolution(0), g.resolution(1));
            let (i0, j0) = (base[0], base[1]);
            let (i1, j1) = ((i0 + 1) % m0, (j0 + 1) % m1);
            let (tx, ty) = (frac[0], frac[1]);
            let v = |i: usize, j: usize| self.values[g.index(i, j)];
            (1.0 - tx) * ((1.0 - ty) * v(i0, j0) + ty * v(i0, j1))
                + tx * ((1.0 - ty) * v(i1, j0) + ty * v(i1, j1))
        }
    }

    /// Centered first difference along `axis`.
    pub fn partial(&self, axis: usize) -> Self {
        let g = self.grid;
        let inv = 0.5 / g.spacing(axis);
        let values = (0..g.len())
            .map(|i| (self.values[g.neighbor(i, axis, 1)] - self.values[g.neighbor(i, axis, -1)]) * inv)
            .collect();
        Self { grid: g, values }
    }

    /// Three-point second difference along `axis`.
    pub fn second_partial(&self, axis: usize) -> Self {
        let g = self.grid;
        let h = g.spacing(axis);
        let inv = 1.0 / (h * h);
        let values = (0..g.len())
            .map(|i| {
                (self.values[g.neighbor(i, axis, 1)] - 2.0 * self.values[i]
                    + self.values[g.neighbor(i, axis, -1)])
                    * inv
            })
            .collect();
        Self { grid: g, values }
    }

    /// Five-point centered third difference along `axis`.
    pub fn third_partial(&self, axis: usize) -> Self {
        let g = self.grid;
        let h = g.spacing(axis);
        let inv = 0.5 / (h * h * h);
        let v = &self.values;
        let values = (0..g.len())
            .map(|i| {
                (v[g.neighbor(i, axis, 2)] - 2.0 * v[g.neighbor(i, axis, 1)]
                    + 2.0 * v[g.neighbor(i, axis, -1)]
                    - v[g.neighbor(i, axis, -2)])
                    * inv
            })
            .collect();
        Self { grid: g, values }
    }

    pub fn gradient(&self) -> VectorField {
        gradient(self)
    }

    pub fn hessian(&self) -> HessianField {
        hessian(self)
    }

    pub fn laplacian(&self) -> GridFunction {
        laplacian(self)
    }
}

/// Centered second-order gradient.
pub fn gradient(phi: &GridFunction) -> VectorField {
    let g = *phi.grid();
    let dx = phi.partial(0);
    let data = if g.dim() == 2 {
        let dy = phi.partial(1);
        dx.values.iter().zip(&dy.values).map(|(&a, &b)| [a, b]).collect()
    } else {
        dx.values.iter().map(|&a| [a, 0.0]).collect()
    };
    VectorField { grid: g, data }
}

/// Second-order Hessian: three-point stencils on the diagonal, the four-point
/// cross stencil off the diagonal.
pub fn hessian(phi: &GridFunction) -> HessianField {
    let g = *phi.grid();
    let xx = phi.second_partial(0);
    let data = if g.dim() == 2 {
        let yy = phi.second_partial(1);
        let xy = phi.partial(0).partial(1);
        (0..g.len()).map(|i| [xx.values[i], xy.values[i], yy.values[i]]).collect()
    } else {
        xx.values.iter().map(|&a| [a, 0.0, 0.0]).collect()
    };
    HessianField { grid: g, data }
}

/// Sum of the three-point second differences; equals the Hessian trace.
pub fn laplacian(phi: &GridFunction) -> GridFunction {
    let g = *phi.grid();
    let mut out = phi.second_partial(0);
    if g.dim() == 2 {
        let yy = phi.second_partial(1);
        for (o, y) in out.values.iter_mut().zip(&yy.values) {
            *o += y;
        }
    }
    out
}

/// Sup over nodes of the Frobenius norm of the discrete third-derivative
/// tensor.
pub fn third_derivative_sup_norm(phi: &GridFunction) -> f64 {
    let g = *phi.grid();
    let xxx = phi.third_partial(0);
    if g.dim() == 1 {
        return xxx.sup_norm();
    }
    let yyy = phi.third_partial(1);
    let xxy = phi.partial(1).second_partial(0);
    let xyy = phi.partial(0).second_partial(1);
    (0..g.len())
        .map(|i| {
            let s = xxx.values[i] * xxx.values[i]
                + yyy.values[i] * yyy.values[i]
                + 3.0 * xxy.values[i] * xxy.values[i]
                + 3.0 * xyy.values[i] * xyy.values[i];
            math::sqrt(s)
        })
        .fold(0.0, f64::max)
}

/// A vector field on the grid. In 1D the second component is zero.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    grid: Grid,
    data: Vec<[f64; 2]>,
}

impl VectorField {
    pub fn new(grid: Grid, data: Vec<[f64; 2]>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::Length { expected: grid.len(), got: data.len() });
        }
        if let Some(i) = data.iter().position(|v| !(v[0].is_finite() && v[1].is_finite())) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { grid, data })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn data(&self) -> &[[f64; 2]] {
        &self.data
    }

    pub fn component(&self, axis: usize) -> GridFunction {
        GridFunction::from_raw(self.grid, self.data.iter().map(|v| v[axis]).collect())
    }

    /// Euclidean length at every node.
    pub fn magnitude(&self) -> GridFunction {
        GridFunction::from_raw(
            self.grid,
            self.data.iter().map(|v| math::sqrt(v[0] * v[0] + v[1] * v[1])).collect(),
        )
    }

    /// `max |v|` over nodes.
    pub fn sup_norm(&self) -> f64 {
        self.magnitude().max()
    }

    /// Interpolates each component at an off-grid point.
    pub fn sample(&self, p: Point) -> [f64; 2] {
        let c0 = self.component(0).sample(p);
        let c1 = if self.grid.dim() == 2 { self.component(1).sample(p) } else { 0.0 };
        [c0, c1]
    }
}

/// Symmetric 2×2 (or 1×1) matrix at each node, stored as `[xx, xy, yy]`.
#[derive(Clone, Debug, PartialEq)]
pub struct HessianField {
    grid: Grid,
    data: Vec<[f64; 3]>,
}

impl HessianField {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn data(&self) -> &[[f64; 3]] {
        &self.data
    }

    pub fn trace(&self) -> GridFunction {
        GridFunction::from_raw(self.grid, self.data.iter().map(|m| m[0] + m[2]).collect())
    }

    /// Largest eigenvalue at each node.
    pub fn max_eigenvalue(&self) -> GridFunction {
        let dim = self.grid.dim();
        GridFunction::from_raw(
            self.grid,
            self.data.iter().map(|m| sym_eigenvalues(m, dim)[1]).collect(),
        )
    }

    /// Spectral norm (largest |eigenvalue|) at each node.
    pub fn spectral_norm(&self) -> GridFunction {
        let dim = self.grid.dim();
        GridFunction::from_raw(
            self.grid,
            self.data
                .iter()
                .map(|m| {
                    let [lo, hi] = sym_eigenvalues(m, dim);
                    lo.abs().max(hi.abs())
                })
                .collect(),
        )
    }

    /// `det(I + h·H)` at each node.
    pub fn det_identity_plus(&self, h: f64) -> GridFunction {
        let dim = self.grid.dim();
        GridFunction::from_raw(
            self.grid,
            self.data
                .iter()
                .map(|m| {
                    if dim == 1 {
                        1.0 + h * m[0]
                    } else {
                        (1.0 + h * m[0]) * (1.0 + h * m[2]) - h * h * m[1] * m[1]
                    }
                })
                .collect(),
        )
    }
}

/// Ascending eigenvalues of a symmetric `[xx, xy, yy]` matrix; in 1D both
/// entries are `xx`.
pub fn sym_eigenvalues(m: &[f64; 3], dim: usize) -> [f64; 2] {
    if dim == 1 {
        return [m[0], m[0]];
    }
    let mean = 0.5 * (m[0] + m[2]);
    let half = 0.5 * (m[0] - m[2]);
    let r = math::sqrt(half * half + m[1] * m[1]);
    [mean - r, mean + r]
}

/// The reference measure `μ = v₀ dxⁿ` on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Measure {
    weight: GridFunction,
    node_volume: f64,
    total_mass: f64,
}

impl Measure {
    pub fn new(weight: GridFunction) -> Result<Self> {
        if let Some((node, &value)) = weight.values().iter().enumerate().find(|(_, &v)| v <= 0.0) {
            return Err(Error::NonPositive { field: "v0", node, value });
        }
        let node_volume = weight.grid().node_volume();
        let total_mass = weight.sum() * node_volume;
        Ok(Self { weight, node_volume, total_mass })
    }

    /// Lebesgue measure, `v₀ ≡ 1`.
    pub fn lebesgue(grid: Grid) -> Self {
        Self::new(GridFunction::constant(grid, 1.0)).expect("unit weight is positive")
    }

    pub fn grid(&self) -> &Grid {
        self.weight.grid()
    }

    pub fn weight(&self) -> &GridFunction {
        &self.weight
    }

    pub fn node_volume(&self) -> f64 {
        self.node_volume
    }

    /// `∫ v₀ dxⁿ`.
    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    /// `μ`-mass carried by node `i`: `v₀ᵢ · vol`.
    #[inline]
    pub fn node_mass(&self, i: usize) -> f64 {
        self.weight.values[i] * self.node_volume
    }

    /// `∫ g dμ = Σ gᵢ v₀ᵢ vol`, summed in node order.
    pub fn integrate(&self, g: &GridFunction) -> f64 {
        integrate(g, self)
    }
}

/// `∫ g dμ` by the periodic trapezoid rule.
pub fn integrate(g: &GridFunction, mu: &Measure) -> f64 {
    debug_assert_eq!(g.grid(), mu.grid());
    g.values.iter().zip(&mu.weight.values).map(|(a, w)| a * w).sum::<f64>() * mu.node_volume
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::TAU;

    #[test]
    fn build_grid_nodes() {
        let g = Grid::new(1, 8, 1.0).unwrap();
        let xs: Vec<f64> = g.nodes().map(|p| p[0]).collect();
        assert_eq!(xs, vec![0.0, 0.125, 0.25, 0.375, 0.5, 0.625, 0.75, 0.875]);
        let g2 = Grid::new(2, 4, 1.0).unwrap();
        assert_eq!(g2.len(), 16);
        assert_eq!(g2.coords(g2.index(1, 3)), [0.25, 0.75]);
    }

    #[test]
    fn build_grid_rejects_bad_input() {
        assert_eq!(Grid::new(1, 3, 1.0), Err(Error::Resolution(3)));
        assert_eq!(Grid::new(3, 8, 1.0), Err(Error::Dimension(3)));
        assert!(Grid::new(1, 8, 0.0).is_err());
        assert!(Grid::new(1, 8, f64::NAN).is_err());
    }

    #[test]
    fn torus_distance_examples() {
        let g1 = Grid::new(1, 8, 1.0).unwrap();
        assert!((torus_dist2(&[0.1], &[0.9], &g1) - 0.04).abs() < 1e-15);
        assert_eq!(torus_dist2(&[0.3], &[0.3], &g1), 0.0);
        let g2 = Grid::new(2, 8, 1.0).unwrap();
        assert!((torus_dist2(&[0.0, 0.0], &[0.5, 0.5], &g2) - 0.5).abs() < 1e-15);
        assert_eq!(torus_dist2(&[0.2, 0.7], &[0.9, 0.1], &g2), torus_dist2(&[0.9, 0.1], &[0.2, 0.7], &g2));
    }

    #[test]
    fn constant_fields_have_zero_derivatives() {
        let g = Grid::new(2, 8, 1.0).unwrap();
        let c = GridFunction::constant(g, 3.7);
        assert!(c.gradient().data().iter().all(|v| *v == [0.0, 0.0]));
        assert!(c.laplacian().values().iter().all(|&v| v == 0.0));
        assert!(c.hessian().data().iter().all(|m| *m == [0.0, 0.0, 0.0]));
    }

    #[test]
    fn gradient_of_sine_is_second_order() {
        let g = Grid::new(1, 128, 1.0).unwrap();
        let h = g.spacing(0);
        let phi = GridFunction::from_fn(g, |p| math::sin(TAU * p[0]));
        let err = phi
            .gradient()
            .component(0)
            .values()
            .iter()
            .zip(g.nodes())
            .map(|(d, p)| (d - TAU * math::cos(TAU * p[0])).abs())
            .fold(0.0, f64::max);
        assert!(err <= TAU.powi(3) * h * h / 6.0, "err {err}");
    }

    #[test]
    fn gradient_is_separable() {
        let g = Grid::new(2, 16, 1.0).unwrap();
        let phi = GridFunction::from_fn(g, |p| math::sin(TAU * p[0]));
        assert!(phi.gradient().component(1).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn laplacian_of_cosine_is_second_order() {
        let g = Grid::new(1, 128, 1.0).unwrap();
        let h = g.spacing(0);
        let phi = GridFunction::from_fn(g, |p| math::cos(TAU * p[0]));
        let exact = GridFunction::from_fn(g, |p| -TAU * TAU * math::cos(TAU * p[0]));
        assert!(phi.laplacian().sup_dist(&exact) <= TAU.powi(4) * h * h / 12.0);
    }

    #[test]
    fn hessian_trace_equals_laplacian() {
        let g = Grid::new(2, 32, 1.0).unwrap();
        let phi = GridFunction::from_fn(g, |p| math::sin(TAU * p[0]) * math::sin(TAU * p[1]));
        assert!(phi.hessian().trace().sup_dist(&phi.laplacian()) <= 1e-12);
    }

    #[test]
    fn integrate_examples() {
        let g = Grid::new(1, 16, 1.0).unwrap();
        let mu = Measure::lebesgue(g);
        assert!((mu.integrate(&GridFunction::constant(g, 1.0)) - 1.0).abs() < 1e-15);
        assert!((mu.integrate(&GridFunction::constant(g, 2.0)) - 2.0).abs() < 1e-15);
        for m in [4, 5, 7, 16] {
            let g = Grid::new(1, m, 1.0).unwrap();
            let s = GridFunction::from_fn(g, |p| math::sin(TAU * p[0]));
            assert!(Measure::lebesgue(g).integrate(&s).abs() < 1e-15);
        }
    }

    #[test]
    fn measure_rejects_nonpositive_weight() {
        let g = Grid::new(1, 4, 1.0).unwrap();
        let w = GridFunction::new(g, vec![1.0, 0.0, 1.0, 1.0]).unwrap();
        assert!(matches!(Measure::new(w), Err(Error::NonPositive { node: 1, .. })));
    }

    #[test]
    fn sample_reproduces_nodes_and_wraps() {
        let g = Grid::new(2, 8, 1.0).unwrap();
        let phi = GridFunction::from_fn(g, |p| math::sin(TAU * p[0]) + p[1]);
        for i in 0..g.len() {
            let p = g.coords(i);
            assert!((phi.sample(p) - phi.values()[i]).abs() < 1e-14);
            assert!((phi.sample([p[0] + 1.0, p[1] - 2.0]) - phi.values()[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn third_partial_of_sine() {
        let g = Grid::new(1, 256, 1.0).unwrap();
        let phi = GridFunction::from_fn(g, |p| math::sin(TAU * p[0]));
        let norm = third_derivative_sup_norm(&phi);
        assert!((norm - TAU.powi(3)).abs() / TAU.powi(3) < 1e-3);
    }

    #[test]
    fn eigenvalues_of_symmetric_matrix() {
        let [lo, hi] = sym_eigenvalues(&[2.0, 1.0, 2.0], 2);
        assert!((lo - 1.0).abs() < 1e-15 && (hi - 3.0).abs() < 1e-15);
    }
}
