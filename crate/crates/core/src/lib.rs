//! Numerical core for the Jordan–Kinderlehrer–Otto (JKO) scheme of the linear
//! equation `∂tφ = Δφ + ⟨∇φ,∇Ψ⟩ + fφ` on the flat torus `Tⁿ`, `n ∈ {1, 2}`.
//!
//! The crate is `no_std` (it needs `alloc`) and performs no IO. Everything is
//! a pure function of its inputs and all reductions are sequential, so results
//! are bit-reproducible.
//!
//! Layout:
//! - [`grid`]: periodic grids, fields, finite differences, quadrature against `μ = v₀ dxⁿ`.
//! - [`transport`]: exact and entropic optimal transport on the torus, c-transforms, maps.
//! - [`functionals`]: the free energy, the problem data `(Ψ, f, v₀, ρ₀, K, N)`.
//! - [`presets`]: closed-form problems used by tests and the CLI.
//! - [`jko`]: JKO steps (Monge–Ampère Newton in 1D, entropic variational solver), trajectories.
//! - [`pde`]: Crank–Nicolson reference solver for the limiting equation.
//! - [`estimates`]: a priori bounds evaluated on computed steps and trajectories.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

mod error;
pub mod estimates;
pub mod functionals;
pub mod grid;
pub mod jko;
pub mod linalg;
pub(crate) mod math;
pub mod pde;
pub mod presets;
pub mod transport;

pub use error::{Error, Result};
pub use functionals::{EnergyValue, ProblemSpec};
pub use grid::{Grid, GridFunction, Measure, VectorField};
pub use transport::{DiscreteDensity, TransportResult};
