use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use jko_core::estimates::admissible_horizon;
use jko_core::presets::Preset;
use jko_core::{Grid, GridFunction};
use jko_tools::field::{format_field, read_field, write_field};
use tempfile::TempDir;

fn jko(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jko")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn printed_cost(o: &Output) -> f64 {
    stdout(o)
        .lines()
        .find_map(|l| l.strip_prefix("cost "))
        .expect("cost line")
        .parse()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Data rows of a CSV artifact (comment and header lines removed).
fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    text.lines().skip(2).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn density_pair(dir: &Path) -> (PathBuf, PathBuf) {
    let g = Grid::new(1, 24, 1.0).unwrap();
    let a = GridFunction::from_fn(g, |p| 1.0 + 0.6 * (std::f64::consts::TAU * p[0]).cos());
    let b = GridFunction::from_fn(g, |p| 0.3 + (-40.0 * (p[0] - 0.3) * (p[0] - 0.3)).exp());
    let (pa, pb) = (dir.join("a.field"), dir.join("b.field"));
    write_field(&pa, &a).unwrap();
    write_field(&pb, &b).unwrap();
    (pa, pb)
}

#[test]
fn ot_identical_inputs_cost_nothing() {
    let tmp = TempDir::new().unwrap();
    let (a, _) = density_pair(tmp.path());
    for solver in ["lp", "exact1d"] {
        let o = jko(&["ot", s(&a), s(&a), "--solver", solver]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        assert!(printed_cost(&o).abs() <= 1e-15, "{solver}: {}", stdout(&o));
    }
}

#[test]
fn ot_lp_and_exact1d_agree() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = density_pair(tmp.path());
    let lp = printed_cost(&jko(&["ot", s(&a), s(&b), "--solver", "lp"]));
    let exact = printed_cost(&jko(&["ot", s(&a), s(&b), "--solver", "exact1d"]));
    assert!((lp - exact).abs() <= 1e-9, "{lp} vs {exact}");

    let out = tmp.path().join("ot");
    let o = jko(&["ot", s(&a), s(&b), "--solver", "sinkhorn", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["source_potential.field", "target_potential.field", "map.csv", "plan.csv", "ot.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert_eq!(read_field(&out.join("source_potential.field")).unwrap().len(), 24);
}

#[test]
fn ot_reports_missing_and_mismatched_inputs() {
    let tmp = TempDir::new().unwrap();
    let (a, _) = density_pair(tmp.path());
    let missing = tmp.path().join("nowhere.field");
    let o = jko(&["ot", s(&a), s(&missing)]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("nowhere.field"), "{}", stderr(&o));

    let other = tmp.path().join("c.field");
    write_field(&other, &GridFunction::constant(Grid::new(1, 16, 1.0).unwrap(), 1.0)).unwrap();
    assert_eq!(code(&jko(&["ot", s(&a), s(&other)])), 1);
    assert_eq!(code(&jko(&["ot", s(&a), s(&a), "--solver", "simplex"])), 1);
}

#[test]
fn flow_manifest_has_one_row_per_step() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "heat.toml", "[problem]\npreset = \"heat\"\nm = 64\nk = 0.1\nn = 16\n");
    let out = tmp.path().join("run");
    let o = jko(&["flow", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m = manifest(&out);
    assert_eq!(m["steps"].as_array().unwrap().len(), 16);
    assert_eq!(m["densities"].as_array().unwrap().len(), 17);
    assert_eq!(m["partial"], false);
    assert_eq!(csv_rows(&out.join("steps.csv")).len(), 16);
    for k in 0..=16 {
        let rho = read_field(&out.join(format!("rho_{k:04}.field"))).unwrap();
        assert!((rho.sum() / 64.0 - 1.0).abs() < 1e-12);
    }
}

#[test]
fn stationary_flow_has_zero_step_costs_and_passes_estimates() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "st.toml",
        "[problem]\npreset = \"fokker-planck\"\nm = 48\nk = 0.1\nn = 8\nrho0 = \"stationary\"\n",
    );
    let out = tmp.path().join("run");
    assert_eq!(code(&jko(&["flow", s(&cfg), "--out", s(&out)])), 0);
    for step in manifest(&out)["steps"].as_array().unwrap() {
        assert!(step["cost"].as_f64().unwrap().abs() <= 1e-20, "{step}");
    }
    let o = jko(&["estimates", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = csv_rows(&out.join("estimates.csv"));
    assert!(!rows.is_empty());
    assert!(rows.iter().filter(|r| r[7] == "true").all(|r| r[6] == "true"));
}

#[test]
fn unknown_config_key_is_named() {
    let tmp = TempDir::new().unwrap();
    for (text, key) in [
        ("[problem]\nk = 0.1\nn = 4\ntypo_key = 1\n", "typo_key"),
        ("[problem]\nk = 0.1\nn = 4\n[run]\nsamplez = [0.1]\n", "samplez"),
    ] {
        let cfg = write_config(tmp.path(), "bad.toml", text);
        let o = jko(&["flow", s(&cfg), "--out", s(&tmp.path().join("x"))]);
        assert_eq!(code(&o), 1);
        assert!(stderr(&o).contains(key), "{}", stderr(&o));
    }
    let cfg = write_config(tmp.path(), "d2.toml", "[problem]\ndim = 2\nm = 8\nk = 0.1\nn = 4\n[solver]\ninner = \"ma_1d\"\n");
    assert_eq!(code(&jko(&["flow", s(&cfg)])), 1);
    assert_eq!(code(&jko(&["flow", s(&tmp.path().join("absent.toml"))])), 1);
}

#[test]
fn converge_heat_table_decreases() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "heat.toml",
        "[problem]\npreset = \"heat\"\nm = 128\nk = 0.1\nn = 16\n[run]\nn_list = [16, 32, 64]\n",
    );
    let out = tmp.path().join("conv");
    let o = jko(&["converge", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = fs::read_to_string(out.join("converge.csv")).unwrap();
    assert!(text.lines().nth(1).unwrap().ends_with("ratio [1]"));
    let rows = csv_rows(&out.join("converge.csv"));
    assert_eq!(rows.len(), 3);
    let errors: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(errors[0] > errors[1] && errors[1] > errors[2], "{errors:?}");
    assert_eq!(csv_rows(&out.join("lipschitz.csv")).len(), 3);
}

#[test]
fn converge_single_n_and_stationary() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "st.toml",
        "[problem]\npreset = \"weighted\"\nm = 32\nk = 0.1\nn = 8\nrho0 = \"stationary\"\n",
    );
    let out = tmp.path().join("conv");
    assert_eq!(code(&jko(&["converge", s(&cfg), "--out", s(&out)])), 0);
    let text = fs::read_to_string(out.join("converge.csv")).unwrap();
    let header = text.lines().nth(1).unwrap();
    assert!(!header.contains("ratio"), "{header}");
    let rows = csv_rows(&out.join("converge.csv"));
    assert_eq!(rows.len(), 1);
    let err: f64 = rows[0][2].parse().unwrap();
    assert!(err <= 1e-8, "{err}");
}

#[test]
fn reruns_are_byte_identical_and_carry_the_hash() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "fp.toml",
        "[problem]\npreset = \"fokker-planck\"\nm = 32\nk = 0.05\nn = 8\n[run]\nn_list = [4, 8]\nperturbation = 0.05\nseed = 3\n",
    );
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        assert_eq!(code(&jko(&["flow", s(&cfg), "--out", s(&dir.join("flow"))])), 0);
        assert_eq!(code(&jko(&["converge", s(&cfg), "--out", s(&dir.join("conv"))])), 0);
        assert_eq!(code(&jko(&["pde", s(&cfg), "--out", s(&dir.join("pde"))])), 0);
    }
    let hash = manifest(&a.join("flow"))["config_sha256"].as_str().unwrap().to_string();
    assert_eq!(hash.len(), 64);
    for rel in ["flow/steps.csv", "flow/estimates.csv", "flow/manifest.json", "conv/converge.csv", "conv/lipschitz.csv", "pde/pde.csv", "flow/rho_0008.field"] {
        let (x, y) = (fs::read(a.join(rel)).unwrap(), fs::read(b.join(rel)).unwrap());
        assert_eq!(x, y, "{rel}");
        if rel.ends_with(".csv") {
            let text = String::from_utf8(x).unwrap();
            let mut lines = text.lines();
            assert_eq!(lines.next().unwrap(), format!("# config_sha256={hash}"), "{rel}");
            assert!(lines.next().unwrap().contains(" ["), "{rel}: header names units");
        }
    }
}

#[test]
fn estimates_rejects_corrupted_dumps() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "heat.toml", "[problem]\npreset = \"heat\"\nm = 32\nk = 0.05\nn = 4\n");
    let out = tmp.path().join("run");
    assert_eq!(code(&jko(&["flow", s(&cfg), "--out", s(&out)])), 0);

    let manifest_path = out.join("manifest.json");
    let good = fs::read_to_string(&manifest_path).unwrap();
    fs::write(&manifest_path, &good[..good.len() / 2]).unwrap();
    let o = jko(&["estimates", s(&out)]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("manifest.json"), "{}", stderr(&o));

    fs::write(&manifest_path, &good).unwrap();
    let rho = out.join("rho_0002.field");
    let text = fs::read_to_string(&rho).unwrap();
    fs::write(&rho, text.replacen('\n', "\nnot-a-number\n", 2)).unwrap();
    let o = jko(&["estimates", s(&out)]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("rho_0002.field"), "{}", stderr(&o));
}

#[test]
fn estimates_exit_three_on_a_violated_bound() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "heat.toml", "[problem]\npreset = \"heat\"\nm = 64\nk = 0.05\nn = 8\n");
    let out = tmp.path().join("run");
    assert_eq!(code(&jko(&["flow", s(&cfg), "--out", s(&out)])), 0);
    let path = out.join("rho_0001.field");
    let rho = read_field(&path).unwrap().map(|r| r.powi(4));
    let mass = rho.sum() / 64.0;
    fs::write(&path, format_field(&rho.map(|r| r / mass))).unwrap();
    let o = jko(&["estimates", s(&out)]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("estimates.json")).unwrap()).unwrap();
    assert_eq!(summary["guaranteed_pass"], false);
}

#[test]
fn admissible_horizon_passes_the_lambda_cap() {
    let tmp = TempDir::new().unwrap();
    let spec = Preset::Heat.build(Grid::new(1, 64, 1.0).unwrap(), 0.1, 8).unwrap();
    let (k, _) = admissible_horizon(&spec, 8).unwrap();
    let cfg = write_config(tmp.path(), "adm.toml", &format!("[problem]\npreset = \"heat\"\nm = 64\nk = {k:e}\nn = 8\n"));
    let out = tmp.path().join("run");
    let o = jko(&["flow", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let caps: Vec<_> = csv_rows(&out.join("estimates.csv")).into_iter().filter(|r| r[0] == "lambda_cap").collect();
    assert_eq!(caps.len(), 8);
    assert!(caps.iter().all(|r| r[6] == "true" && r[7] == "true"));
}

#[test]
fn solver_failure_exits_two_with_partial_output() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "fail.toml",
        "[problem]\npreset = \"fokker-planck\"\nm = 32\nk = 0.1\nn = 4\n[solver]\nmax_outer = 1\nnewton_tol = 1e-14\n",
    );
    let out = tmp.path().join("run");
    let o = jko(&["flow", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    let m = manifest(&out);
    assert_eq!(m["partial"], true);
    assert!(m["failure"].as_str().unwrap().contains("converge"));
    assert_eq!(m["densities"].as_array().unwrap().len(), 1);
}

#[test]
fn pde_exponential_growth_from_field_files() {
    let tmp = TempDir::new().unwrap();
    let g = Grid::new(1, 32, 1.0).unwrap();
    write_field(&tmp.path().join("rate.field"), &GridFunction::constant(g, 0.7)).unwrap();
    let cfg = write_config(
        tmp.path(),
        "grow.toml",
        "[problem]\nm = 32\nk = 0.1\nn = 1\nf = \"rate.field\"\nv0.mode = \"given\"\nv0.field = \"one\"\n[run]\npde_dt = 1e-3\nsamples = [0.0, 0.1]\n",
    );
    let out = tmp.path().join("pde");
    let o = jko(&["pde", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let start = read_field(&out.join("phi_0000.field")).unwrap();
    assert!(start.values().iter().all(|&v| v == 1.0));
    let end = read_field(&out.join("phi_0001.field")).unwrap();
    assert!(end.values().iter().all(|v| (v - 0.07f64.exp()).abs() <= 1e-6));
    assert_eq!(csv_rows(&out.join("pde.csv")).len(), 2);
}
