use std::f64::consts::{PI, TAU};

use jko_core::estimates::{
    admissible_horizon, admissible_k_from, check_est_bounds, distance_sum_check, lambda_recursion_check, lambda_sup,
    lemma_constant, lipschitz_report, trajectory_est_bounds, EstimateRecord,
};
use jko_core::functionals::stationary_density;
use jko_core::jko::{jko_step, run_flow, JkoConfig};
use jko_core::presets::Preset;
use jko_core::{DiscreteDensity, Grid, GridFunction};
use proptest::prelude::*;

/// Root of `k(λ₀ + kC) = (1 − 2Ck − 3kλ₀)/8`.
fn quadratic_root(lambda0: f64, c: f64) -> f64 {
    let (a, b, cc) = (8.0 * c, 8.0 * lambda0 + 2.0 * c + 3.0 * lambda0, -1.0);
    (-b + (b * b - 4.0 * a * cc).sqrt()) / (2.0 * a)
}

#[test]
fn admissible_k_examples() {
    // λ₀ = 0, C = 1: the quadratic gives 1/4, the linear cap 1/6 wins
    let k = admissible_k_from(0.0, 1.0, 0.0, 0.0);
    assert!((k - 1.0 / 6.0).abs() < 1e-12, "{k}");
    for (lambda0, c) in [(1.0, 0.1), (3.0, 0.5), (0.2, 0.05)] {
        let expected = quadratic_root(lambda0, c).min(1.0 / (6.0 * c));
        let k = admissible_k_from(lambda0, c, 0.0, 0.0);
        assert!((k - expected).abs() <= 1e-10 * expected, "{lambda0} {c}: {k} vs {expected}");
    }
    let capped = admissible_k_from(0.0, 0.01, 4.0, 2.0);
    assert!((capped - 0.5).abs() < 1e-10, "{capped}");
}

#[test]
fn admissible_horizon_is_self_consistent() {
    for p in Preset::ALL {
        let spec = p.build(Grid::new(1, 64, 1.0).unwrap(), 0.1, 8).unwrap();
        let (k, c) = admissible_horizon(&spec, 8).unwrap();
        assert!(k > 0.0);
        assert!((lemma_constant(&spec, k, k / 8.0).unwrap() - c).abs() <= 1e-12 * c);
        let spec_k = spec.with_horizon(k, 8).unwrap();
        let consts = jko_core::estimates::EstimateConstants::new(&spec_k, spec_k.rho0(), k / 8.0, 0.0).unwrap();
        assert!(admissible_k_from(consts.lambda0, c, consts.a1, consts.b2) >= k * (1.0 - 1e-9), "{}", p.name());
        let bigger = 1.01 * k;
        let c_big = lemma_constant(&spec, bigger, bigger / 8.0).unwrap();
        assert!(admissible_k_from(consts.lambda0, c_big, consts.a1, consts.b2) < bigger, "{}", p.name());
    }
    let spec = Preset::Heat.build(Grid::new(1, 16, 1.0).unwrap(), 0.1, 8).unwrap();
    assert!(admissible_horizon(&spec, 0).is_err());
}

#[test]
fn record_slack() {
    assert!(EstimateRecord::new("x", None, 1.0 + 5e-10, 1.0, 1.0, 0.0, true).pass);
    assert!(!EstimateRecord::new("x", None, 1.0 + 5e-9, 1.0, 1.0, 0.0, true).pass);
    assert!(EstimateRecord::new("x", None, 1.1, 1.0, 1.0, 0.2, true).pass);
    assert!(!EstimateRecord::new("x", None, f64::NAN, 1.0, 1.0, 0.0, true).pass);
}

#[test]
fn stationary_trajectory_passes_everything() {
    for p in Preset::ALL {
        let spec = p.build(Grid::new(1, 48, 1.0).unwrap(), 0.05, 4).unwrap();
        let rho_inf = stationary_density(&spec);
        let spec = spec.with_rho0(rho_inf.rho().clone()).unwrap();
        let traj = run_flow(&spec, &JkoConfig::default());
        assert!(traj.is_complete());
        let tol = traj.config.inner_tol();
        let est = trajectory_est_bounds(&traj, tol).unwrap();
        assert!(est.all_pass(), "{} {:?}", p.name(), est.failures().collect::<Vec<_>>());
        let lip = lipschitz_report(&traj, tol).unwrap();
        assert!(lip.guaranteed_pass(), "{} {:?}", p.name(), lip.failures().collect::<Vec<_>>());
        let d = distance_sum_check(&traj).unwrap();
        assert!(d.all_pass(), "{} {:?}", p.name(), d.records);
        assert!(d.find("distance_sum").next().unwrap().lhs < 1e-18);
    }
}

#[test]
fn corrupted_step_violates_the_upper_bound() {
    let g = Grid::new(1, 64, 1.0).unwrap();
    let spec = Preset::Heat.build(g, 0.1, 16).unwrap();
    let step = jko_step(spec.rho0(), spec.h(), &spec, &JkoConfig::default()).unwrap();
    let honest = check_est_bounds(&step.rho_next, spec.rho0(), spec.h(), &spec, 0.0).unwrap();
    assert!(honest.guaranteed_pass(), "{:?}", honest.failures().collect::<Vec<_>>());
    let corrupted = DiscreteDensity::normalized(step.rho_next.rho().map(|r| r.powi(4)), spec.measure().clone()).unwrap();
    let report = check_est_bounds(&corrupted, spec.rho0(), spec.h(), &spec, 0.0).unwrap();
    assert!(report.find("est1_upper").any(|r| !r.pass));
}

#[test]
fn oversized_horizon_is_flagged() {
    let g = Grid::new(1, 64, 1.0).unwrap();
    let base = Preset::FokkerPlanck.build(g, 0.1, 8).unwrap();
    let (k, _) = admissible_horizon(&base, 8).unwrap();
    let spec = base.with_horizon(10.0 * k, 8).unwrap();
    let traj = run_flow(&spec, &JkoConfig::default());
    let c = lemma_constant(&spec, spec.k(), spec.h()).unwrap();
    let report = lambda_recursion_check(&traj, c).unwrap();
    assert!(report.flags.iter().any(|f| f.contains("exceeds the admissible")));
    assert!(report.records.iter().all(|r| !r.guaranteed));
    if let Some(first) = report.failures().filter_map(|r| r.step).min() {
        assert!(report.flags.iter().any(|f| *f == format!("first recursion violation at step {first}")));
    }
}

#[test]
fn checks_are_deterministic() {
    let spec = Preset::Weighted.build(Grid::new(1, 32, 1.0).unwrap(), 0.05, 4).unwrap();
    let a = run_flow(&spec, &JkoConfig::default());
    let b = run_flow(&spec, &JkoConfig::default());
    assert_eq!(trajectory_est_bounds(&a, 1e-9).unwrap(), trajectory_est_bounds(&b, 1e-9).unwrap());
    assert_eq!(lipschitz_report(&a, 1e-9).unwrap(), lipschitz_report(&b, 1e-9).unwrap());
}

/// Largest `wᵀHw` over a fine sweep of unit directions, with the Hessian
/// assembled from raw neighbor differences.
fn sweep_lambda(f: &GridFunction) -> f64 {
    let g = *f.grid();
    let v = f.values();
    let (hx, hy) = (g.spacing(0), g.spacing(1));
    let mut best = f64::NEG_INFINITY;
    for i in 0..g.len() {
        let n = |ax, d| v[g.neighbor(i, ax, d)];
        let xx = (n(0, 1) - 2.0 * v[i] + n(0, -1)) / (hx * hx);
        let yy = (n(1, 1) - 2.0 * v[i] + n(1, -1)) / (hy * hy);
        let corner = |dx: isize, dy: isize| v[g.neighbor(g.neighbor(i, 0, dx), 1, dy)];
        let xy = (corner(1, 1) - corner(1, -1) - corner(-1, 1) + corner(-1, -1)) / (4.0 * hx * hy);
        for s in 0..4000 {
            let t = PI * s as f64 / 4000.0;
            let (c, sn) = (t.cos(), t.sin());
            best = best.max(c * c * xx + 2.0 * c * sn * xy + sn * sn * yy);
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn admissible_k_is_monotone(l in 0.0f64..5.0, c in 0.01f64..10.0, dl in 0.0f64..2.0, dc in 0.0f64..5.0) {
        let k = admissible_k_from(l, c, 0.0, 0.0);
        prop_assert!(k > 0.0);
        prop_assert!(admissible_k_from(l + dl, c, 0.0, 0.0) <= k * (1.0 + 1e-12));
        prop_assert!(admissible_k_from(l, c + dc, 0.0, 0.0) <= k * (1.0 + 1e-12));
    }

    #[test]
    fn lambda_sup_matches_a_direction_sweep(values in prop::collection::vec(-1.0f64..1.0, 36), a in -2.0f64..2.0) {
        let g = Grid::new(2, 6, 1.0).unwrap();
        let f = GridFunction::new(g, values).unwrap().zip_map(
            &GridFunction::from_fn(g, |p| a * (TAU * p[0]).cos() * (TAU * p[1]).sin()),
            |x, y| x + y,
        );
        let exact = lambda_sup(&f);
        let swept = sweep_lambda(&f);
        // the sweep can only undershoot, by at most ‖H‖ (π/4000)²
        prop_assert!(swept <= exact + 1e-9 * exact.abs().max(1.0));
        prop_assert!(exact - swept <= 1e-6 * exact.abs().max(1.0) * 1e3);
    }
}
