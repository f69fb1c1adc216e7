use std::path::Path;
use std::sync::Arc;

use clap::ValueEnum;
use jko_core::transport::{solve_ot_1d, solve_ot_lp, sinkhorn_with, SinkhornConfig, LP_NODE_LIMIT};
use jko_core::{DiscreteDensity, Measure, TransportResult};
use serde::Serialize;

use crate::error::{Result, Status, ToolError};
use crate::field::{read_field, write_field};
use crate::output::{canonical_hash, create_dir, num, sha256_hex, write_json, Table};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OtSolver {
    Lp,
    Exact1d,
    Sinkhorn,
}

#[derive(Clone, Debug)]
pub struct OtArgs<'a> {
    pub source: &'a Path,
    pub target: &'a Path,
    pub solver: OtSolver,
    pub epsilon: Option<f64>,
    pub tol: f64,
    pub weight: Option<&'a Path>,
    pub out: Option<&'a Path>,
}

#[derive(Serialize)]
struct Invocation {
    solver: OtSolver,
    epsilon: Option<f64>,
    tol: f64,
    source_sha256: String,
    target_sha256: String,
    weight_sha256: Option<String>,
}

#[derive(Serialize)]
struct Summary<'a> {
    config_sha256: &'a str,
    solver: OtSolver,
    cost: f64,
    raw_cost: Option<f64>,
    dual_value: f64,
    marginal_error: f64,
    iterations: usize,
}

fn file_hash(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path).map_err(ToolError::io(path))?))
}

pub fn solve(a: &DiscreteDensity, b: &DiscreteDensity, args: &OtArgs) -> Result<TransportResult> {
    Ok(match args.solver {
        OtSolver::Lp => solve_ot_lp(a, b)?,
        OtSolver::Exact1d => solve_ot_1d(a, b)?,
        OtSolver::Sinkhorn => {
            let config = SinkhornConfig {
                epsilon: args.epsilon,
                tol: args.tol,
                keep_plan: args.out.is_some(),
                ..SinkhornConfig::default()
            };
            sinkhorn_with(a, b, &config)?
        }
    })
}

pub fn cmd_ot(args: &OtArgs) -> Result<Status> {
    if !(args.tol > 0.0 && args.tol.is_finite()) {
        return Err(ToolError::Input(format!("--tol must be positive, got {}", args.tol)));
    }
    if let Some(e) = args.epsilon.filter(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(ToolError::Input(format!("--epsilon must be positive, got {e}")));
    }
    let rho_a = read_field(args.source)?;
    let rho_b = read_field(args.target)?;
    if rho_a.grid() != rho_b.grid() {
        return Err(ToolError::Input(format!(
            "{} and {} live on different grids",
            args.source.display(),
            args.target.display()
        )));
    }
    let measure = match args.weight {
        Some(w) => {
            let weight = read_field(w)?;
            if weight.grid() != rho_a.grid() {
                return Err(ToolError::Input(format!("{}: weight grid differs from the densities", w.display())));
            }
            Measure::new(weight)?
        }
        None => Measure::lebesgue(*rho_a.grid()),
    };
    let measure = Arc::new(measure);
    let a = DiscreteDensity::normalized(rho_a, measure.clone())?;
    let b = DiscreteDensity::normalized(rho_b, measure)?;
    let result = solve(&a, &b, args)?;

    println!("solver {}", args.solver.to_possible_value().expect("no skipped variants").get_name());
    println!("cost {:e}", result.cost);
    println!("marginal_error {:e}", result.marginal_error);

    let Some(dir) = args.out else {
        return Ok(Status::Success);
    };
    create_dir(dir)?;
    let hash = canonical_hash(&Invocation {
        solver: args.solver,
        epsilon: args.epsilon,
        tol: args.tol,
        source_sha256: file_hash(args.source)?,
        target_sha256: file_hash(args.target)?,
        weight_sha256: args.weight.map(file_hash).transpose()?,
    });
    write_field(&dir.join("source_potential.field"), &result.potentials.0)?;
    write_field(&dir.join("target_potential.field"), &result.potentials.1)?;
    let grid = *a.grid();
    if let Some(map) = &result.map {
        let mut t = Table::new(&["node", "x [length]", "y [length]", "map_x [length]", "map_y [length]"]);
        for (i, m) in map.data().iter().enumerate() {
            let p = grid.coords(i);
            t.push(vec![i.to_string(), num(p[0]), num(p[1]), num(m[0]), num(m[1])]);
        }
        t.write(&dir.join("map.csv"), &hash)?;
    }
    if let Some(plan) = result.plan.as_ref().filter(|_| grid.len() <= LP_NODE_LIMIT) {
        let mut t = Table::new(&["source", "target", "mass [1]"]);
        for &(i, j, m) in &plan.entries {
            t.push(vec![i.to_string(), j.to_string(), num(m)]);
        }
        t.write(&dir.join("plan.csv"), &hash)?;
    }
    write_json(
        &dir.join("ot.json"),
        &Summary {
            config_sha256: &hash,
            solver: args.solver,
            cost: result.cost,
            raw_cost: result.raw_cost,
            dual_value: result.dual_value(&a, &b),
            marginal_error: result.marginal_error,
            iterations: result.iterations,
        },
    )?;
    Ok(Status::Success)
}
