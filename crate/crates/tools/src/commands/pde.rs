use std::path::Path;

use jko_core::grid::integrate;
use jko_core::pde::{solve_pde, PdeForm};
use serde::Serialize;

use super::{indexed, output_dir};
use crate::config;
use crate::error::{Result, Status};
use crate::field::write_field;
use crate::output::{create_dir, num, write_json, Table};

#[derive(Serialize)]
struct PdeManifest<'a> {
    config_sha256: &'a str,
    dt: f64,
    form: &'static str,
    steps: usize,
    times: &'a [f64],
    fields: Vec<String>,
}

/// `run.pde_dt`, else `min(h², h)` with `h = K/N`.
pub fn default_dt(k: f64, n: usize, configured: Option<f64>) -> f64 {
    configured.unwrap_or_else(|| {
        let h = k / n as f64;
        (h * h).min(h)
    })
}

pub fn cmd_pde(config_path: &Path, out: Option<&Path>) -> Result<Status> {
    let loaded = config::load(config_path)?;
    let cfg = &loaded.config;
    let spec = cfg.build_spec(loaded.base_dir())?;
    let dt = default_dt(spec.k(), spec.n(), cfg.run.pde_dt).min(spec.k());
    let times = cfg.run.samples.clone().unwrap_or_else(|| vec![spec.k()]);
    let traj = solve_pde(&spec, dt, &times)?;
    let dir = output_dir(out, &loaded, "pde");
    create_dir(&dir)?;
    let mut table = Table::new(&["sample", "t [time]", "mass [1]", "min [density]", "max [density]", "field"]);
    let mut fields = Vec::with_capacity(times.len());
    for (i, (t, phi)) in times.iter().zip(&traj.snapshots).enumerate() {
        let name = indexed("phi", i);
        write_field(&dir.join(&name), phi)?;
        table.push(vec![
            i.to_string(),
            num(*t),
            num(integrate(phi, spec.measure())),
            num(phi.min()),
            num(phi.max()),
            name.clone(),
        ]);
        fields.push(name);
    }
    table.write(&dir.join("pde.csv"), &loaded.hash)?;
    let manifest = PdeManifest {
        config_sha256: &loaded.hash,
        dt,
        form: match traj.form {
            PdeForm::Advective => "advective",
            PdeForm::Divergence => "divergence",
        },
        steps: traj.steps,
        times: &times,
        fields,
    };
    write_json(&dir.join("pde.json"), &manifest)?;
    println!("{} Crank-Nicolson steps, {} snapshots in {}", traj.steps, times.len(), dir.display());
    Ok(Status::Success)
}
