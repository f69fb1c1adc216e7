use std::path::{Path, PathBuf};

use jko_core::jko::{run_flow, FlowTrajectory, InnerSolver};
use serde::{Deserialize, Serialize};

use super::{indexed, output_dir};
use crate::commands::estimates::{evaluate, load_trajectory, write_reports};
use crate::config::{self, RunConfig};
use crate::error::{Result, Status, ToolError};
use crate::field::write_field;
use crate::output::{create_dir, num, write_json, Table};

pub const MANIFEST: &str = "manifest.json";

/// Everything needed to reload a trajectory dump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowManifest {
    pub config_sha256: String,
    pub config: RunConfig,
    pub dim: usize,
    pub shape: Vec<usize>,
    pub period: f64,
    pub k: f64,
    pub n: usize,
    pub h: f64,
    pub solver: String,
    pub inner_tol: f64,
    /// Set when a step failed; `densities` then stops at the last good one.
    pub partial: bool,
    pub failure: Option<String>,
    pub psi: String,
    pub f: String,
    pub v0: String,
    pub densities: Vec<String>,
    pub initial_energy: f64,
    pub initial_lambda: f64,
    pub steps: Vec<StepRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepRecord {
    pub k: usize,
    pub t: f64,
    /// `½d²(ρ_{k−1}, ρ_k)`.
    pub cost: f64,
    pub energy: f64,
    pub objective: f64,
    pub lambda: f64,
    pub h_lambda: f64,
    pub ma_residual: f64,
    pub weak_residual: f64,
    pub inner_iterations: usize,
    pub entropic_bias: Option<f64>,
}

pub fn solver_name(s: InnerSolver) -> &'static str {
    match s {
        InnerSolver::Ma1d => "ma_1d",
        InnerSolver::Sinkhorn => "sinkhorn",
    }
}

/// Writes the fields, manifest and per-step table of `traj` into `dir`.
pub fn write_trajectory(dir: &Path, traj: &FlowTrajectory, config: &RunConfig, hash: &str) -> Result<FlowManifest> {
    create_dir(dir)?;
    let spec = &traj.spec;
    write_field(&dir.join("psi.field"), spec.psi())?;
    write_field(&dir.join("f.field"), spec.f())?;
    write_field(&dir.join("v0.field"), spec.v0())?;
    let mut densities = Vec::with_capacity(traj.densities.len());
    for (k, rho) in traj.densities.iter().enumerate() {
        let name = indexed("rho", k);
        write_field(&dir.join(&name), rho.rho())?;
        densities.push(name);
    }
    let h = traj.h;
    let steps: Vec<StepRecord> = traj
        .steps
        .iter()
        .enumerate()
        .map(|(i, s)| StepRecord {
            k: i + 1,
            t: (i + 1) as f64 * h,
            cost: s.transport.cost,
            energy: s.energy.total,
            objective: s.objective,
            lambda: s.lambda,
            h_lambda: h * s.lambda,
            ma_residual: s.ma_residual_max,
            weak_residual: s.weak_residual_max,
            inner_iterations: s.inner_iterations,
            entropic_bias: s.entropic_bias,
        })
        .collect();

    let mut table = Table::new(&[
        "k",
        "t [time]",
        "cost [length^2]",
        "energy [nats]",
        "objective [length^2]",
        "lambda [1/length^2]",
        "h_lambda [1]",
        "ma_residual [density]",
        "weak_residual [1/time]",
        "inner_iterations [count]",
    ]);
    for s in &steps {
        table.push(vec![
            s.k.to_string(),
            num(s.t),
            num(s.cost),
            num(s.energy),
            num(s.objective),
            num(s.lambda),
            num(s.h_lambda),
            num(s.ma_residual),
            num(s.weak_residual),
            s.inner_iterations.to_string(),
        ]);
    }
    table.write(&dir.join("steps.csv"), hash)?;

    let grid = spec.grid();
    let manifest = FlowManifest {
        config_sha256: hash.to_string(),
        config: config.clone(),
        dim: grid.dim(),
        shape: grid.shape().to_vec(),
        period: grid.period(),
        k: spec.k(),
        n: spec.n(),
        h,
        solver: solver_name(traj.config.solver).into(),
        inner_tol: traj.config.inner_tol(),
        partial: traj.failure.is_some(),
        failure: traj.failure.as_ref().map(|e| e.to_string()),
        psi: "psi.field".into(),
        f: "f.field".into(),
        v0: "v0.field".into(),
        densities,
        initial_energy: traj.energies[0].total,
        initial_lambda: traj.lambdas.first().copied().unwrap_or(f64::NAN),
        steps,
    };
    write_json(&dir.join(MANIFEST), &manifest)?;
    Ok(manifest)
}

pub fn cmd_flow(config_path: &Path, out: Option<&Path>) -> Result<Status> {
    let loaded = config::load(config_path)?;
    let spec = loaded.config.build_spec(loaded.base_dir())?;
    let jcfg = loaded.config.jko_config()?;
    let dir: PathBuf = output_dir(out, &loaded, "flow");
    let traj = run_flow(&spec, &jcfg);
    let manifest = write_trajectory(&dir, &traj, &loaded.config, &loaded.hash)?;
    println!("wrote {} densities to {}", manifest.densities.len(), dir.display());
    if traj.lambdas.is_empty() {
        return Err(ToolError::Solver(traj.failure.clone().expect("a run without λ₀ failed")));
    }
    let (_, restored) = load_trajectory(&dir)?;
    let reports = evaluate(&restored, loaded.config.run.c)?;
    let pass = write_reports(&dir, &loaded.hash, &reports)?;
    if let Some(e) = traj.failure {
        eprintln!("step {} failed; partial output written", traj.densities.len());
        return Err(ToolError::Solver(e));
    }
    Ok(if pass { Status::Success } else { Status::EstimateViolation })
}
