use std::path::Path;

use jko_core::estimates::{
    default_allowance, distance_sum_check, lambda_recursion_check, lemma_constant, lipschitz_report,
    trajectory_est_bounds, weak_form_check, EstimateReport,
};
use jko_core::jko::FlowTrajectory;
use jko_core::ProblemSpec;
use serde::Serialize;

use super::flow::{FlowManifest, MANIFEST};
use crate::error::{Result, Status, ToolError};
use crate::field::read_field;
use crate::output::{canonical_hash, num, write_json, Table};

/// Every check of the estimates module on one trajectory. `c` overrides
/// the constant of the `λ` recursion.
pub fn evaluate(traj: &FlowTrajectory, c: Option<f64>) -> Result<Vec<EstimateReport>> {
    let spec = &traj.spec;
    let c = match c {
        Some(c) => c,
        None => lemma_constant(spec, spec.k(), traj.h)?,
    };
    Ok(vec![
        trajectory_est_bounds(traj, default_allowance(spec))?,
        lambda_recursion_check(traj, c)?,
        lipschitz_report(traj, traj.config.inner_tol())?,
        distance_sum_check(traj)?,
        weak_form_check(traj)?,
    ])
}

fn unit(check: &str) -> &'static str {
    match check {
        n if n.starts_with("est1") || n.starts_with("sandwich") => "density",
        "est2_gradient" | "grad_f_chained" | "grad_f_uniform" => "1/length",
        "sup_grad_rho" => "density/length",
        "distance_sum" => "length^2",
        "e_min_two_ways" => "nats",
        n if n.starts_with("weak_") => "1/time",
        _ => "1",
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    config_sha256: &'a str,
    guaranteed_pass: bool,
    records: usize,
    guaranteed_records: usize,
    failing: Vec<Failing<'a>>,
    flags: Vec<&'a str>,
    constants: Constants,
}

#[derive(Serialize)]
struct Failing<'a> {
    check: &'a str,
    step: Option<usize>,
    margin: f64,
    guaranteed: bool,
}

#[derive(Serialize)]
struct Constants {
    a1: f64,
    b2: f64,
    b3: f64,
    grad_f0: f64,
    lambda0: f64,
    c: Option<f64>,
    k: f64,
    h: f64,
}

/// Writes `estimates.csv` and `estimates.json`; returns whether every
/// guaranteed record passes.
pub fn write_reports(dir: &Path, hash: &str, reports: &[EstimateReport]) -> Result<bool> {
    let mut table =
        Table::new(&["check", "step [index]", "lhs [unit]", "rhs [unit]", "margin [unit]", "unit", "pass", "guaranteed"]);
    for r in reports.iter().flat_map(|rep| &rep.records) {
        table.push(vec![
            r.name.clone(),
            r.step.map_or(String::new(), |s| s.to_string()),
            num(r.lhs),
            num(r.rhs),
            num(r.margin),
            unit(&r.name).into(),
            r.pass.to_string(),
            r.guaranteed.to_string(),
        ]);
    }
    table.write(&dir.join("estimates.csv"), hash)?;
    let pass = reports.iter().all(|r| r.guaranteed_pass());
    let base = &reports[0].constants;
    let summary = Summary {
        config_sha256: hash,
        guaranteed_pass: pass,
        records: table.len(),
        guaranteed_records: reports.iter().flat_map(|r| &r.records).filter(|r| r.guaranteed).count(),
        failing: reports
            .iter()
            .flat_map(|r| r.failures())
            .map(|r| Failing { check: &r.name, step: r.step, margin: r.margin, guaranteed: r.guaranteed })
            .collect(),
        flags: reports.iter().flat_map(|r| r.flags.iter().map(String::as_str)).collect(),
        constants: Constants {
            a1: base.a1,
            b2: base.b2,
            b3: base.b3,
            grad_f0: base.grad_f0,
            lambda0: base.lambda0,
            c: reports.iter().find_map(|r| r.constants.c),
            k: base.k,
            h: base.h,
        },
    };
    write_json(&dir.join("estimates.json"), &summary)?;
    Ok(pass)
}

/// Reads a trajectory written by `jko flow`.
pub fn load_trajectory(dir: &Path) -> Result<(FlowManifest, FlowTrajectory)> {
    let path = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&path).map_err(ToolError::io(&path))?;
    let manifest: FlowManifest = serde_json::from_str(&text).map_err(|e| ToolError::Parse {
        path: path.clone(),
        line: e.line(),
        message: e.to_string(),
    })?;
    if canonical_hash(&manifest.config) != manifest.config_sha256 {
        return Err(ToolError::Input(format!("{}: config hash does not match the embedded config", path.display())));
    }
    if manifest.densities.len() != manifest.steps.len() + 1 {
        return Err(ToolError::Input(format!(
            "{}: {} densities for {} steps",
            path.display(),
            manifest.densities.len(),
            manifest.steps.len()
        )));
    }
    let read = |name: &str| read_field(&dir.join(name));
    let rho0 = read(&manifest.densities[0])?;
    let spec = ProblemSpec::given(read(&manifest.psi)?, read(&manifest.f)?, read(&manifest.v0)?, rho0, manifest.k, manifest.n)?;
    let densities = manifest.densities.iter().map(|n| read(n)).collect::<Result<Vec<_>>>()?;
    let costs: Vec<f64> = manifest.steps.iter().map(|s| s.cost).collect();
    let config = manifest.config.jko_config()?;
    let traj = FlowTrajectory::restore(&spec, &config, densities, &costs)?;
    Ok((manifest, traj))
}

pub fn cmd_estimates(dir: &Path, c: Option<f64>, out: Option<&Path>) -> Result<Status> {
    let (manifest, traj) = load_trajectory(dir)?;
    let c = c.or(manifest.config.run.c);
    if let Some(c) = c {
        if !(c > 0.0 && c.is_finite()) {
            return Err(ToolError::Input(format!("C must be positive, got {c}")));
        }
    }
    let reports = evaluate(&traj, c)?;
    let out = out.unwrap_or(dir);
    crate::output::create_dir(out)?;
    let pass = write_reports(out, &manifest.config_sha256, &reports)?;
    let total: usize = reports.iter().map(|r| r.records.len()).sum();
    let failing: usize = reports.iter().map(|r| r.failures().filter(|f| f.guaranteed).count()).sum();
    println!("{total} records, {failing} guaranteed failures");
    Ok(if pass { Status::Success } else { Status::EstimateViolation })
}
