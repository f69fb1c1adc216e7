//! Acceptance criteria for the solver and its verification harness.
//!
//! Every criterion is evaluated (none short-circuits another), one line per
//! criterion is printed, and the test fails if any criterion failed.

use std::sync::Arc;
use std::time::{Duration, Instant};

use jko_core::estimates::{
    admissible_horizon, default_allowance, distance_sum_check, lambda_recursion_check, lipschitz_report,
    trajectory_est_bounds, weak_form_check, check_est_bounds, EstimateReport,
};
use jko_core::functionals::stationary_density;
use jko_core::jko::{continuation_solve, jko_step, run_flow, FlowTrajectory, InnerSolver, JkoConfig};
use jko_core::pde::{richardson_order, solve_pde};
use jko_core::presets::Preset;
use jko_core::transport::{default_epsilon, sinkhorn, solve_ot_1d, solve_ot_lp};
use jko_core::{DiscreteDensity, Grid, GridFunction, Measure, ProblemSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

fn grid(dim: usize, m: usize) -> Grid {
    Grid::new(dim, m, 1.0).unwrap()
}

fn random_pairs(count: usize) -> Vec<(DiscreteDensity, DiscreteDensity)> {
    let mut rng = ChaCha8Rng::seed_from_u64(20240601);
    (0..count)
        .map(|i| {
            let m = [8, 12, 16, 24, 32][i % 5];
            let g = grid(1, m);
            let mu = Arc::new(Measure::lebesgue(g));
            let mut draw = || {
                let v: Vec<f64> = (0..m).map(|_| rng.gen_range(0.2..1.8)).collect();
                DiscreteDensity::normalized(GridFunction::new(g, v).unwrap(), mu.clone()).unwrap()
            };
            (draw(), draw())
        })
        .collect()
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn c1_ot_oracle(pairs: &[(DiscreteDensity, DiscreteDensity)]) -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for (a, b) in pairs {
        let exact = solve_ot_1d(a, b).unwrap().cost;
        let lp = solve_ot_lp(a, b).unwrap().cost;
        worst = worst.max(relative(exact, lp));
    }
    let elapsed = start.elapsed();
    Outcome::new(
        worst <= 1e-9 && elapsed < Duration::from_secs(1),
        format!("{} pairs, worst relative gap {worst:.2e}, {elapsed:.2?}", pairs.len()),
    )
}

fn c2_sinkhorn_accuracy(pairs: &[(DiscreteDensity, DiscreteDensity)]) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut worst_marginal: f64 = 0.0;
    let mut gaps = Vec::new();
    for (a, b) in pairs {
        let lp = solve_ot_lp(a, b).unwrap().cost;
        let eps = default_epsilon(a.grid());
        match sinkhorn(a, b, eps, 1e-10) {
            Ok(s) => {
                worst = worst.max(relative(s.cost, lp));
                gaps.push(relative(s.cost, lp));
                worst_marginal = worst_marginal.max(s.marginal_error);
            }
            Err(e) => return Outcome::new(false, format!("sinkhorn failed: {e}")),
        }
    }
    Outcome::new(
        worst <= 0.01 && worst_marginal <= 1e-9,
        format!(
            "worst relative cost gap {worst:.3e} (limit 1e-2), median {:.3e}, worst marginal violation {worst_marginal:.2e}",
            median(&mut gaps)
        ),
    )
}

fn c3_convergence() -> (Outcome, Vec<FlowTrajectory>) {
    let start = Instant::now();
    let base = Preset::Heat.build(grid(1, 128), 0.1, 16).unwrap();
    let mut errors = Vec::new();
    let mut trajs = Vec::new();
    for n in [16, 32, 64] {
        let spec = base.with_horizon(0.1, n).unwrap();
        let traj = run_flow(&spec, &JkoConfig::default());
        if !traj.is_complete() {
            return (Outcome::new(false, format!("N = {n}: {:?}", traj.failure)), trajs);
        }
        let dt = (0.1 / n as f64).powi(2);
        let reference = solve_pde(&spec, dt, &[0.1]).unwrap();
        errors.push(traj.densities[n].rho().sup_dist(&reference.snapshots[0]));
        trajs.push(traj);
    }
    let ratios: Vec<f64> = errors.windows(2).map(|w| w[1] / w[0]).collect();
    let elapsed = start.elapsed();
    let pass = ratios.iter().all(|&r| r <= 0.75) && elapsed < Duration::from_secs(300);
    (
        Outcome::new(pass, format!("errors {errors:.3?}, ratios {ratios:.3?}, {elapsed:.2?}")),
        trajs,
    )
}

fn c4_uniform_lipschitz() -> (Outcome, Vec<FlowTrajectory>) {
    let base = Preset::FokkerPlanck.build(grid(1, 64), 0.1, 16).unwrap();
    let mut sups = Vec::new();
    let mut bound_ok = true;
    let mut bounds = Vec::new();
    let mut trajs = Vec::new();
    for n in [16, 32, 64] {
        let traj = run_flow(&base.with_horizon(0.1, n).unwrap(), &JkoConfig::default());
        if !traj.is_complete() {
            return (Outcome::new(false, format!("N = {n}: {:?}", traj.failure)), trajs);
        }
        let report = lipschitz_report(&traj, 0.0).unwrap();
        let rec = report.find("sup_grad_rho").next().unwrap();
        bound_ok &= rec.lhs <= 1.1 * rec.rhs;
        sups.push(rec.lhs);
        bounds.push(rec.rhs);
        trajs.push(traj);
    }
    let (lo, hi) = sups.iter().fold((f64::INFINITY, 0.0_f64), |(a, b), &x| (a.min(x), b.max(x)));
    let variation = (hi - lo) / lo;
    (
        Outcome::new(
            variation <= 0.1 && bound_ok,
            format!("sup |grad rho| {sups:.4?}, variation {variation:.2e}, analytic bounds {bounds:.3?}"),
        ),
        trajs,
    )
}

fn preset_flows() -> Vec<FlowTrajectory> {
    let mut out = Vec::new();
    for p in Preset::ALL {
        for m in [32, 64, 128] {
            for n in [16, 64] {
                out.push(run_flow(&p.build(grid(1, m), 0.1, n).unwrap(), &JkoConfig::default()));
            }
        }
    }
    out
}

fn label(traj: &FlowTrajectory) -> String {
    let g = traj.spec.grid();
    format!("{}D m={} N={}", g.dim(), g.resolution(0), traj.spec.n())
}

fn c5_step_bounds(flows: &[FlowTrajectory]) -> Outcome {
    let mut failures = Vec::new();
    let mut records = 0;
    for traj in flows {
        if !traj.is_complete() {
            failures.push(format!("{}: incomplete", label(traj)));
            continue;
        }
        let report = trajectory_est_bounds(traj, default_allowance(&traj.spec)).unwrap();
        records += report.records.iter().filter(|r| r.guaranteed).count();
        if !report.guaranteed_pass() {
            failures.push(label(traj));
        }
    }
    let spec = Preset::Heat.build(grid(1, 64), 0.1, 16).unwrap();
    let step = jko_step(spec.rho0(), spec.h(), &spec, &JkoConfig::default()).unwrap();
    let prev = &step.rho_next;
    let corrupted = DiscreteDensity::normalized(prev.rho().map(|r| r.powi(4)), spec.measure().clone()).unwrap();
    let teeth = check_est_bounds(&corrupted, prev, spec.h(), &spec, default_allowance(&spec)).unwrap();
    let caught = teeth.find("est1_upper").any(|r| !r.pass);
    Outcome::new(
        failures.is_empty() && caught,
        format!("{records} guaranteed records on {} runs, failing runs {failures:?}, counterexample caught: {caught}", flows.len()),
    )
}

fn c6_lambda_cap() -> Outcome {
    let mut details = Vec::new();
    let mut pass = true;
    for (dim, m, n) in [(1, 64, 8), (2, 32, 4)] {
        for p in Preset::ALL {
            let base = p.build(grid(dim, m), 0.1, n).unwrap();
            let (k, c) = admissible_horizon(&base, n).unwrap();
            let traj = run_flow(&base.with_horizon(k, n).unwrap(), &JkoConfig::for_dim(dim));
            let max_hl = traj.lambdas.iter().map(|l| traj.h * l).fold(f64::NEG_INFINITY, f64::max);
            let recursion = lambda_recursion_check(&traj, c).unwrap();
            let ok = traj.is_complete() && max_hl <= 0.125 && recursion.guaranteed_pass();
            pass &= ok;
            details.push(format!("{dim}D {} K={k:.2e} max h*lambda={max_hl:.2e}", p.name()));
        }
    }
    Outcome::new(pass, details.join("; "))
}

fn c7_ma_residual(ma_flows: &[&FlowTrajectory]) -> Outcome {
    let ma_worst = ma_flows
        .iter()
        .flat_map(|t| t.steps.iter().map(|s| s.ma_residual_max))
        .fold(0.0_f64, f64::max);
    let mut worst_ratio: f64 = 0.0;
    let mut pass = ma_worst <= 1e-6;
    for (dim, m, n) in [(1, 64, 8), (2, 32, 2)] {
        for p in Preset::ALL {
            let cfg = JkoConfig::with_solver(InnerSolver::Sinkhorn);
            let traj = run_flow(&p.build(grid(dim, m), 0.1, n).unwrap(), &cfg);
            pass &= traj.is_complete();
            for s in &traj.steps {
                let bound = 5.0 * (s.entropic_bias.unwrap() + cfg.inner_tol());
                worst_ratio = worst_ratio.max(s.ma_residual_max / bound);
            }
        }
    }
    pass &= worst_ratio <= 1.0;
    Outcome::new(
        pass,
        format!("ma_1d worst {ma_worst:.2e} over {} runs; entropic worst residual/bound {worst_ratio:.3}", ma_flows.len()),
    )
}

fn c8_fixed_point() -> Outcome {
    let mut worst: f64 = 0.0;
    for (dim, m) in [(1, 64), (2, 32)] {
        for p in Preset::ALL {
            let spec = p.build(grid(dim, m), 0.1, 16).unwrap();
            let rho_inf = stationary_density(&spec);
            match jko_step(&rho_inf, spec.h(), &spec, &JkoConfig::for_dim(dim)) {
                Ok(step) => worst = worst.max(step.rho_next.rho().sup_dist(rho_inf.rho())),
                Err(_) => worst = f64::INFINITY,
            }
        }
    }
    Outcome::new(worst <= 1e-6, format!("worst |jko_step(rho_inf) - rho_inf| = {worst:.2e} over 6 presets"))
}

fn c9_distance_sum(flows: &[&FlowTrajectory]) -> Outcome {
    let mut min_margin = f64::INFINITY;
    let mut pass = true;
    for traj in flows {
        let report = distance_sum_check(traj).unwrap();
        pass &= report.all_pass();
        let rec = report.find("distance_sum").next().unwrap();
        min_margin = min_margin.min(rec.margin);
    }
    Outcome::new(pass && min_margin >= 0.0, format!("{} runs, smallest margin {min_margin:.3e}", flows.len()))
}

fn c10_continuation() -> Outcome {
    let spec = Preset::FokkerPlanck.build(grid(1, 64), 0.1, 128).unwrap();
    let cfg = JkoConfig::default();
    let step = jko_step(spec.rho0(), spec.h(), &spec, &cfg).unwrap();
    let one = continuation_solve(&spec, spec.h(), 1, &cfg);
    let many = continuation_solve(&spec, spec.h(), 16, &cfg);
    match (one, many) {
        (Ok(a), Ok(b)) => {
            let da = a.rho.rho().sup_dist(step.rho_next.rho());
            let db = b.rho.rho().sup_dist(step.rho_next.rho());
            let dab = a.rho.rho().sup_dist(b.rho.rho());
            Outcome::new(
                da.max(db).max(dab) <= 1e-8,
                format!("h={:.2e}: s_steps=1 {da:.2e}, s_steps=16 {db:.2e}, between {dab:.2e}", spec.h()),
            )
        }
        (a, b) => Outcome::new(false, format!("{:?} / {:?}", a.err(), b.err())),
    }
}

fn c11_weak_form(flows: &[&FlowTrajectory]) -> Outcome {
    let mut failing = 0;
    let mut records = 0;
    let mut worst: f64 = f64::INFINITY;
    for traj in flows {
        let report: EstimateReport = weak_form_check(traj).unwrap();
        records += report.records.len();
        failing += report.failures().count();
        worst = report.records.iter().map(|r| r.margin).fold(worst, f64::min);
    }
    Outcome::new(failing == 0, format!("{records} records on {} runs, {failing} failing, smallest margin {worst:.2e}", flows.len()))
}

fn c12_pde() -> Outcome {
    let g = grid(1, 64);
    let rate = 0.7;
    let spec = ProblemSpec::given(
        GridFunction::zeros(g),
        GridFunction::constant(g, rate),
        GridFunction::constant(g, 1.0),
        GridFunction::constant(g, 1.0),
        0.1,
        1,
    )
    .unwrap();
    let t = 0.1;
    let out = solve_pde(&spec, 1e-3, &[t]).unwrap();
    let err = out.snapshots[0].sup_dist(&GridFunction::constant(g, (rate * t).exp()));
    let fp = Preset::FokkerPlanck.build(g, 0.1, 10).unwrap();
    let order = richardson_order(&fp, 0.01, 0.1).unwrap();
    Outcome::new(err <= 1e-6 && order >= 1.9, format!("exponential solution error {err:.2e}, Richardson order {order:.3}"))
}

fn c13_mass_positivity(flows: &[&FlowTrajectory]) -> Outcome {
    let mut worst_mass: f64 = 0.0;
    let mut sandwich_failures = 0;
    for traj in flows {
        for rho in &traj.densities {
            worst_mass = worst_mass.max((rho.mass() - 1.0).abs());
        }
        let report = lipschitz_report(traj, traj.config.inner_tol()).unwrap();
        sandwich_failures += report
            .records
            .iter()
            .filter(|r| r.name.starts_with("sandwich") && !r.pass)
            .count();
    }
    Outcome::new(
        worst_mass <= 1e-10 && sandwich_failures == 0,
        format!("{} runs, worst mass error {worst_mass:.2e}, sandwich failures {sandwich_failures}", flows.len()),
    )
}

#[test]
fn acceptance_criteria() {
    let pairs = random_pairs(24);
    let mut outcomes: Vec<(usize, &str, Outcome)> = Vec::new();
    outcomes.push((1, "OT oracle equivalence", c1_ot_oracle(&pairs)));
    outcomes.push((2, "Sinkhorn accuracy", c2_sinkhorn_accuracy(&pairs)));
    let (o3, heat_flows) = c3_convergence();
    outcomes.push((3, "JKO to PDE convergence", o3));
    let (o4, fp_flows) = c4_uniform_lipschitz();
    outcomes.push((4, "Uniform Lipschitz bound", o4));
    let flows = preset_flows();
    outcomes.push((5, "Per-step a priori bounds", c5_step_bounds(&flows)));
    outcomes.push((6, "Semiconvexity cap at admissible K", c6_lambda_cap()));
    let all: Vec<&FlowTrajectory> = flows.iter().chain(&heat_flows).chain(&fp_flows).collect();
    outcomes.push((7, "Monge-Ampere residual", c7_ma_residual(&all)));
    outcomes.push((8, "Stationary fixed point", c8_fixed_point()));
    outcomes.push((9, "Energy and distance telescoping", c9_distance_sum(&all)));
    outcomes.push((10, "Continuation agreement", c10_continuation()));
    outcomes.push((11, "Weak-form residual", c11_weak_form(&all)));
    outcomes.push((12, "PDE reference", c12_pde()));
    outcomes.push((13, "Mass and positivity", c13_mass_positivity(&all)));

    for (id, name, o) in &outcomes {
        println!("criterion {id:>2} [{}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    let failed: Vec<usize> = outcomes.iter().filter(|(_, _, o)| !o.pass).map(|(id, _, _)| *id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
