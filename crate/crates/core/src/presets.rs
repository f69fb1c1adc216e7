//! Closed-form fields and the three shipped problems.
//!
//! | preset          | Ψ                        | v₀                           | f            |
//! |-----------------|--------------------------|------------------------------|--------------|
//! | `heat`          | 0                        | 1                            | 0            |
//! | `fokker-planck` | cos 2πx (+ ½cos 2πy)     | e^{−Ψ}                       | manufactured |
//! | `weighted`      | 0                        | 1 + ½sin 2πx (2D: 1 + ¼(sin 2πx + sin 2πy)) | manufactured |
//!
//! The initial density is `1 + ½cos 2πx` in 1D and `1 + ½cos 2πx·cos 2πy` in
//! 2D, normalized against `μ`. Coordinates are scaled by the period, so
//! `cos2pix` means `cos(2πx/L)`.

use alloc::string::String;

use crate::functionals::ProblemSpec;
use crate::grid::{GridFunction, Point};
use crate::math::{cos, exp, sin, TAU};
use crate::{Error, Grid, Result};

/// Names accepted by [`field`].
pub const FIELD_NAMES: &[&str] = &[
    "zero",
    "one",
    "cos2pix",
    "sin2pix",
    "cos2piy",
    "sin2piy",
    "cos2pix+halfcos2piy",
    "exp(-cos2pix)",
    "exp(-cos2pix-halfcos2piy)",
    "1+halfcos2pix",
    "1+halfsin2pix",
    "1+halfcos2pix*cos2piy",
    "1+quartersin2pix+quartersin2piy",
];

fn eval(name: &str, p: Point, period: f64) -> Option<f64> {
    let x = TAU * p[0] / period;
    let y = TAU * p[1] / period;
    Some(match name {
        "zero" => 0.0,
        "one" => 1.0,
        "cos2pix" => cos(x),
        "sin2pix" => sin(x),
        "cos2piy" => cos(y),
        "sin2piy" => sin(y),
        "cos2pix+halfcos2piy" => cos(x) + 0.5 * cos(y),
        "exp(-cos2pix)" => exp(-cos(x)),
        "exp(-cos2pix-halfcos2piy)" => exp(-cos(x) - 0.5 * cos(y)),
        "1+halfcos2pix" => 1.0 + 0.5 * cos(x),
        "1+halfsin2pix" => 1.0 + 0.5 * sin(x),
        "1+halfcos2pix*cos2piy" => 1.0 + 0.5 * cos(x) * cos(y),
        "1+quartersin2pix+quartersin2piy" => 1.0 + 0.25 * (sin(x) + sin(y)),
        _ => return None,
    })
}

/// Samples a named closed-form field.
pub fn field(name: &str, grid: Grid) -> Result<GridFunction> {
    let period = grid.period();
    if eval(name, [0.0, 0.0], period).is_none() {
        return Err(Error::InvalidParameter(alloc::format!("unknown field preset `{name}`")));
    }
    Ok(GridFunction::from_fn(grid, |p| eval(name, p, period).unwrap_or(0.0)))
}

/// One of the shipped problems.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Heat,
    FokkerPlanck,
    Weighted,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Heat, Preset::FokkerPlanck, Preset::Weighted];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Heat => "heat",
            Preset::FokkerPlanck => "fokker-planck",
            Preset::Weighted => "weighted",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == name)
            .ok_or_else(|| Error::InvalidParameter(String::from("unknown problem preset `") + name + "`"))
    }

    /// `(Ψ, v₀, ρ₀)` preset names for the given dimension.
    pub fn field_names(self, dim: usize) -> (&'static str, &'static str, &'static str) {
        let rho0 = if dim == 1 { "1+halfcos2pix" } else { "1+halfcos2pix*cos2piy" };
        match (self, dim) {
            (Preset::Heat, _) => ("zero", "one", rho0),
            (Preset::FokkerPlanck, 1) => ("cos2pix", "exp(-cos2pix)", rho0),
            (Preset::FokkerPlanck, _) => ("cos2pix+halfcos2piy", "exp(-cos2pix-halfcos2piy)", rho0),
            (Preset::Weighted, 1) => ("zero", "1+halfsin2pix", rho0),
            (Preset::Weighted, _) => ("zero", "1+quartersin2pix+quartersin2piy", rho0),
        }
    }

    /// The manufactured problem on `grid` with horizon `k` and `n` steps.
    pub fn build(self, grid: Grid, k: f64, n: usize) -> Result<ProblemSpec> {
        let (psi, v0, rho0) = self.field_names(grid.dim());
        ProblemSpec::manufactured(field(psi, grid)?, field(v0, grid)?, field(rho0, grid)?, k, n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_name_evaluates() {
        let g = Grid::new(2, 8, 1.0).unwrap();
        for name in FIELD_NAMES {
            assert!(field(name, g).is_ok(), "{name}");
        }
        assert!(field("nope", g).is_err());
    }

    #[test]
    fn presets_build_consistent_problems() {
        for dim in [1, 2] {
            let g = Grid::new(dim, 16, 1.0).unwrap();
            for p in Preset::ALL {
                let spec = p.build(g, 0.1, 4).unwrap();
                assert!(spec.consistency_residual() < 1e-10, "{}", p.name());
                assert!((spec.rho0().mass() - 1.0).abs() < 1e-12);
                assert_eq!(Preset::parse(p.name()).unwrap(), p);
            }
        }
    }
}
