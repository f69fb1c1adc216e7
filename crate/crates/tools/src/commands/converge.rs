use std::path::Path;

use jko_core::estimates::lipschitz_report;
use jko_core::jko::run_flow;
use jko_core::pde::solve_pde;
use jko_core::GridFunction;
use serde::Serialize;

use super::output_dir;
use super::pde::default_dt;
use crate::config;
use crate::error::{Result, Status, ToolError};
use crate::output::{create_dir, num, write_json, Table};

/// `max_i |e_{i+1} − e_i| / Δx` over both axes.
pub fn lipschitz_seminorm(e: &GridFunction) -> f64 {
    let g = *e.grid();
    let v = e.values();
    let mut best: f64 = 0.0;
    for axis in 0..g.dim() {
        let dx = g.spacing(axis);
        for i in 0..g.len() {
            best = best.max((v[g.neighbor(i, axis, 1)] - v[i]).abs() / dx);
        }
    }
    best
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub h: f64,
    pub sup_error: f64,
    pub lipschitz_error: f64,
    /// `sup_error / sup_error` of the previous row.
    pub ratio: Option<f64>,
    pub sup_grad_rho: f64,
    pub lipschitz_bound: f64,
    pub lipschitz_pass: bool,
}

#[derive(Serialize)]
struct Summary<'a> {
    config_sha256: &'a str,
    pde_dt: f64,
    samples: &'a [f64],
    rows: &'a [ConvergenceRow],
}

pub fn cmd_converge(config_path: &Path, out: Option<&Path>) -> Result<Status> {
    let loaded = config::load(config_path)?;
    let cfg = &loaded.config;
    let spec = cfg.build_spec(loaded.base_dir())?;
    let jcfg = cfg.jko_config()?;
    let k = spec.k();
    let n_list = cfg.run.n_list.clone().unwrap_or_else(|| vec![spec.n()]);
    let n_max = *n_list.iter().max().expect("validated non-empty");
    let times = cfg.run.samples.clone().unwrap_or_else(|| vec![k]);
    let dt = default_dt(k, n_max, cfg.run.pde_dt).min(k);
    let reference = solve_pde(&spec, dt, &times)?;

    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(n_list.len());
    let mut all_pass = true;
    for &n in &n_list {
        let traj = run_flow(&spec.with_horizon(k, n)?, &jcfg);
        if let Some(e) = traj.failure {
            return Err(ToolError::Solver(e));
        }
        let (mut sup_error, mut lipschitz_error) = (0.0f64, 0.0f64);
        for (t, exact) in times.iter().zip(&reference.snapshots) {
            let diff = traj.interpolate(*t)?.rho().zip_map(exact, |a, b| a - b);
            sup_error = sup_error.max(diff.sup_norm());
            lipschitz_error = lipschitz_error.max(lipschitz_seminorm(&diff));
        }
        let report = lipschitz_report(&traj, jcfg.inner_tol())?;
        all_pass &= report.guaranteed_pass();
        let bound = report.find("sup_grad_rho").next().expect("lipschitz_report emits sup_grad_rho");
        rows.push(ConvergenceRow {
            n,
            h: traj.h,
            sup_error,
            lipschitz_error,
            ratio: rows.last().map(|prev| sup_error / prev.sup_error),
            sup_grad_rho: bound.lhs,
            lipschitz_bound: bound.rhs,
            lipschitz_pass: bound.pass,
        });
    }

    let dir = output_dir(out, &loaded, "converge");
    create_dir(&dir)?;
    let with_ratio = rows.len() > 1;
    let mut header = vec!["n", "h [time]", "sup_error [density]", "lipschitz_error [density/length]"];
    if with_ratio {
        header.push("ratio [1]");
    }
    let mut table = Table::new(&header);
    for r in &rows {
        let mut row = vec![r.n.to_string(), num(r.h), num(r.sup_error), num(r.lipschitz_error)];
        if with_ratio {
            row.push(r.ratio.map_or(String::new(), num));
        }
        table.push(row);
    }
    table.write(&dir.join("converge.csv"), &loaded.hash)?;

    let mut lip = Table::new(&["n", "sup_grad_rho [density/length]", "analytic_bound [density/length]", "pass"]);
    for r in &rows {
        lip.push(vec![r.n.to_string(), num(r.sup_grad_rho), num(r.lipschitz_bound), r.lipschitz_pass.to_string()]);
    }
    lip.write(&dir.join("lipschitz.csv"), &loaded.hash)?;
    write_json(
        &dir.join("converge.json"),
        &Summary { config_sha256: &loaded.hash, pde_dt: dt, samples: &times, rows: &rows },
    )?;
    for r in &rows {
        println!("N = {:>5}  sup error {:.3e}  lipschitz error {:.3e}", r.n, r.sup_error, r.lipschitz_error);
    }
    Ok(if all_pass { Status::Success } else { Status::EstimateViolation })
}
