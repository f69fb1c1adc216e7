//! Run configuration files.
//!
//! ```toml
//! [problem]
//! preset = "fokker-planck"   # optional: heat | fokker-planck | weighted
//! dim = 1
//! m = 64                     # nodes per axis; `m2` overrides the second axis
//! period = 1.0
//! k = 0.1
//! n = 16
//! psi = "cos2pix"            # closed-form name or field file path
//! rho0 = "1+halfcos2pix"     # also "stationary"
//! v0.mode = "manufactured"   # manufactured | solved | given
//! v0.field = "exp(-cos2pix)" # manufactured and given modes
//! f = "zero"                 # solved and given modes
//!
//! [solver]
//! inner = "ma_1d"            # ma_1d | sinkhorn
//! newton_tol = 1e-11
//!
//! [run]
//! n_list = [16, 32, 64]
//! samples = [0.05, 0.1]
//! ```
//!
//! Every table rejects unknown keys. Relative field paths are resolved
//! against the directory holding the configuration file.

use std::path::{Path, PathBuf};

use jko_core::functionals::stationary_density;
use jko_core::jko::{InnerSolver, JkoConfig};
use jko_core::presets::{self, Preset, FIELD_NAMES};
use jko_core::{Grid, GridFunction, ProblemSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ToolError};
use crate::field::read_field;
use crate::output::canonical_hash;

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub preset: Option<String>,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_m")]
    pub m: usize,
    pub m2: Option<usize>,
    #[serde(default = "default_period")]
    pub period: f64,
    pub k: f64,
    pub n: usize,
    pub psi: Option<String>,
    pub f: Option<String>,
    pub rho0: Option<String>,
    #[serde(default)]
    pub v0: V0Config,
}

fn default_dim() -> usize {
    1
}

fn default_m() -> usize {
    64
}

fn default_period() -> f64 {
    1.0
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct V0Config {
    #[serde(default)]
    pub mode: V0Mode,
    pub field: Option<String>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum V0Mode {
    #[default]
    Manufactured,
    Solved,
    Given,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
pub enum InnerChoice {
    #[serde(rename = "ma_1d")]
    Ma1d,
    #[serde(rename = "sinkhorn")]
    Sinkhorn,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub inner: Option<InnerChoice>,
    pub newton_tol: Option<f64>,
    pub entropic_tol: Option<f64>,
    pub max_outer: Option<usize>,
    pub epsilon: Option<f64>,
    pub sinkhorn_tol: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub output: Option<PathBuf>,
    pub n_list: Option<Vec<usize>>,
    pub pde_dt: Option<f64>,
    pub samples: Option<Vec<f64>>,
    /// Constant of the `λ` recursion; computed from the problem when absent.
    pub c: Option<f64>,
    #[serde(default = "default_true")]
    pub deterministic: bool,
    #[serde(default)]
    pub seed: u64,
    /// Relative amplitude of a seeded multiplicative perturbation of `ρ₀`.
    #[serde(default)]
    pub perturbation: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            output: None,
            n_list: None,
            pde_dt: None,
            samples: None,
            c: None,
            deterministic: true,
            seed: 0,
            perturbation: 0.0,
        }
    }
}

fn default_true() -> bool {
    true
}

/// A parsed configuration and where it came from.
#[derive(Clone, Debug)]
pub struct Loaded {
    pub config: RunConfig,
    pub path: PathBuf,
    /// SHA-256 of the canonical JSON form of `config`.
    pub hash: String,
}

impl Loaded {
    pub fn base_dir(&self) -> &Path {
        self.path.parent().unwrap_or(Path::new("."))
    }
}

pub fn load(path: &Path) -> Result<Loaded> {
    let text = std::fs::read_to_string(path).map_err(ToolError::io(path))?;
    let config = parse(&text, path)?;
    Ok(Loaded { hash: canonical_hash(&config), config, path: path.to_path_buf() })
}

pub fn parse(text: &str, path: &Path) -> Result<RunConfig> {
    let config: RunConfig =
        toml::from_str(text).map_err(|e| ToolError::Config { path: path.to_path_buf(), message: e.to_string() })?;
    config.validate().map_err(|message| ToolError::Config { path: path.to_path_buf(), message })?;
    Ok(config)
}

impl RunConfig {
    fn validate(&self) -> std::result::Result<(), String> {
        let p = &self.problem;
        if !(p.k > 0.0 && p.k.is_finite()) {
            return Err(format!("problem.k must be positive, got {}", p.k));
        }
        if p.n == 0 {
            return Err("problem.n must be at least 1".into());
        }
        if p.m2.is_some() && p.dim != 2 {
            return Err("problem.m2 is only meaningful with dim = 2".into());
        }
        let s = &self.solver;
        for (name, v) in [
            ("solver.newton_tol", s.newton_tol),
            ("solver.entropic_tol", s.entropic_tol),
            ("solver.epsilon", s.epsilon),
            ("solver.sinkhorn_tol", s.sinkhorn_tol),
            ("run.pde_dt", self.run.pde_dt),
            ("run.c", self.run.c),
        ] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(format!("{name} must be positive, got {v}"));
                }
            }
        }
        if s.max_outer == Some(0) {
            return Err("solver.max_outer must be at least 1".into());
        }
        if let Some(list) = &self.run.n_list {
            if list.is_empty() || list.contains(&0) {
                return Err("run.n_list must be a non-empty list of positive step counts".into());
            }
        }
        if let Some(t) = self.run.samples.iter().flatten().find(|t| !(0.0..=p.k).contains(*t)) {
            return Err(format!("run.samples entry {t} lies outside [0, k]"));
        }
        if !(0.0..1.0).contains(&self.run.perturbation) {
            return Err(format!("run.perturbation must lie in [0, 1), got {}", self.run.perturbation));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        let p = &self.problem;
        let shape: Vec<usize> = if p.dim == 2 { vec![p.m, p.m2.unwrap_or(p.m)] } else { vec![p.m] };
        Ok(Grid::with_shape(p.dim, &shape, p.period)?)
    }

    pub fn jko_config(&self) -> Result<JkoConfig> {
        let dim = self.problem.dim;
        let s = &self.solver;
        let mut cfg = match s.inner {
            Some(InnerChoice::Ma1d) if dim != 1 => {
                return Err(ToolError::Input("solver.inner = \"ma_1d\" requires dim = 1".into()))
            }
            Some(InnerChoice::Ma1d) => JkoConfig::with_solver(InnerSolver::Ma1d),
            Some(InnerChoice::Sinkhorn) => JkoConfig::with_solver(InnerSolver::Sinkhorn),
            None => JkoConfig::for_dim(dim),
        };
        if let Some(v) = s.newton_tol {
            cfg.newton_tol = v;
        }
        if let Some(v) = s.entropic_tol {
            cfg.entropic_tol = v;
        }
        if let Some(v) = s.max_outer {
            cfg.max_outer = v;
        }
        if s.epsilon.is_some() {
            cfg.sinkhorn.epsilon = s.epsilon;
        }
        if let Some(v) = s.sinkhorn_tol {
            cfg.sinkhorn.tol = v;
        }
        Ok(cfg)
    }

    /// Builds the problem, resolving field references against `base_dir`.
    pub fn build_spec(&self, base_dir: &Path) -> Result<ProblemSpec> {
        let p = &self.problem;
        let grid = self.grid()?;
        let preset = p.preset.as_deref().map(Preset::parse).transpose()?;
        let (dpsi, dv0, drho) = preset.map_or(("zero", "one", "one"), |pr| pr.field_names(p.dim));
        if let Some(pr) = preset {
            if p.v0.mode != V0Mode::Manufactured {
                return Err(ToolError::Input(format!("preset `{}` is manufactured; drop v0.mode", pr.name())));
            }
        }
        let load = |name: &str| resolve_field(name, grid, base_dir);
        let psi = load(p.psi.as_deref().unwrap_or(dpsi))?;
        let rho_name = p.rho0.as_deref().unwrap_or(drho);
        let rho_init = if rho_name == "stationary" { GridFunction::constant(grid, 1.0) } else { load(rho_name)? };
        let (k, n) = (p.k, p.n);
        let spec = match p.v0.mode {
            V0Mode::Manufactured => {
                if p.f.is_some() {
                    return Err(ToolError::Input("f is derived from v0 in manufactured mode; remove problem.f".into()));
                }
                ProblemSpec::manufactured(psi, load(p.v0.field.as_deref().unwrap_or(dv0))?, rho_init, k, n)?
            }
            V0Mode::Solved => {
                if p.v0.field.is_some() {
                    return Err(ToolError::Input("v0 is computed in solved mode; remove problem.v0.field".into()));
                }
                let f = load(required(&p.f, "problem.f")?)?;
                ProblemSpec::solved(psi, f, rho_init, k, n)?
            }
            V0Mode::Given => {
                let f = load(required(&p.f, "problem.f")?)?;
                let v0 = load(required(&p.v0.field, "problem.v0.field")?)?;
                ProblemSpec::given(psi, f, v0, rho_init, k, n)?
            }
        };
        let spec = if rho_name == "stationary" {
            spec.with_rho0(stationary_density(&spec).rho().clone())?
        } else {
            spec
        };
        if self.run.perturbation > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(self.run.seed);
            let amp = self.run.perturbation;
            let rho = spec.rho0().rho();
            let values = rho.values().iter().map(|r| r * (1.0 + amp * rng.gen_range(-1.0..=1.0))).collect();
            return Ok(spec.with_rho0(GridFunction::new(*rho.grid(), values)?)?);
        }
        Ok(spec)
    }
}

fn required<'a>(value: &'a Option<String>, key: &str) -> Result<&'a str> {
    value.as_deref().ok_or_else(|| ToolError::Input(format!("{key} is required in this mode")))
}

/// A closed-form name from the preset table, or a field file path.
pub fn resolve_field(name: &str, grid: Grid, base_dir: &Path) -> Result<GridFunction> {
    if FIELD_NAMES.contains(&name) {
        return Ok(presets::field(name, grid)?);
    }
    let path = base_dir.join(name);
    let f = read_field(&path)?;
    if *f.grid() != grid {
        return Err(ToolError::Input(format!(
            "{}: grid {:?} (period {}) does not match the configured {:?} (period {})",
            path.display(),
            f.grid().shape(),
            f.grid().period(),
            grid.shape(),
            grid.period()
        )));
    }
    Ok(f)
}
