use std::f64::consts::TAU;

use jko_core::functionals::{
    consistency_residual, f_field, f_from_v0, free_energy, stationary_constant, stationary_density, v0_from_f,
};
use jko_core::presets::Preset;
use jko_core::{DiscreteDensity, Grid, GridFunction, ProblemSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fp_spec(m: usize) -> ProblemSpec {
    Preset::FokkerPlanck.build(Grid::new(1, m, 1.0).unwrap(), 0.1, 4).unwrap()
}

#[test]
fn stationary_density_minimizes_the_energy() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for p in Preset::ALL {
        let s = p.build(Grid::new(1, 24, 1.0).unwrap(), 0.1, 4).unwrap();
        let rho_inf = stationary_density(&s);
        let e_min = free_energy(&rho_inf, &s).total;
        assert!((e_min - stationary_constant(&s).ln()).abs() < 1e-10);
        for _ in 0..100 {
            let amp: f64 = rng.gen_range(0.01..0.5);
            let values: Vec<f64> = rho_inf.rho().values().iter().map(|r| r * (1.0 + amp * rng.gen_range(-1.0..1.0))).collect();
            let rho = DiscreteDensity::normalized(GridFunction::new(*s.grid(), values).unwrap(), s.measure().clone()).unwrap();
            assert!(free_energy(&rho, &s).total > e_min, "{}", p.name());
        }
    }
}

#[test]
fn stationary_field_is_constant() {
    for dim in [1, 2] {
        for p in Preset::ALL {
            let s = p.build(Grid::new(dim, 12, 1.0).unwrap(), 0.1, 4).unwrap();
            let f = f_field(&stationary_density(&s), &s).unwrap();
            assert!(f.max() - f.min() <= 1e-12);
            assert!((f.values()[0] - stationary_constant(&s).ln()).abs() < 1e-12);
        }
    }
}

#[test]
fn stationary_density_of_a_pure_potential() {
    let g = Grid::new(1, 32, 1.0).unwrap();
    let psi = GridFunction::from_fn(g, |p| (TAU * p[0]).cos());
    let one = GridFunction::constant(g, 1.0);
    let s = ProblemSpec::manufactured(psi.clone(), one.clone(), one, 0.1, 1).unwrap();
    let rho = stationary_density(&s);
    let z: f64 = psi.values().iter().map(|p| (-p).exp()).sum::<f64>() / 32.0;
    for (r, p) in rho.rho().values().iter().zip(psi.values()) {
        assert!((r - (-p).exp() / z).abs() < 1e-12);
    }
}

#[test]
fn half_torus_indicator_has_energy_log_two() {
    let s = Preset::Heat.build(Grid::new(1, 16, 1.0).unwrap(), 0.1, 1).unwrap();
    let ind = GridFunction::from_fn(*s.grid(), |p| if p[0] < 0.5 { 2.0 } else { 0.0 });
    let rho = DiscreteDensity::new(ind, s.measure().clone()).unwrap();
    let e = free_energy(&rho, &s);
    assert!((e.total - 2f64.ln()).abs() < 1e-14);
    assert!((e.total - e.entropy - e.potential).abs() < 1e-15);
}

fn exponential_weight_error(m: usize) -> f64 {
    let g = Grid::new(1, m, 1.0).unwrap();
    let psi = GridFunction::from_fn(g, |p| (TAU * p[0]).cos());
    let v0 = psi.map(|p| (-p).exp());
    let f = f_from_v0(&psi, &v0).unwrap();
    assert!(consistency_residual(&psi, &f, &v0).sup_norm() < 1e-10);
    let exact = GridFunction::from_fn(g, |p| {
        let x = TAU * p[0];
        -2.0 * TAU * TAU * x.cos() - 2.0 * TAU * TAU * x.sin().powi(2)
    });
    f.sup_dist(&exact)
}

#[test]
fn exponential_weight_gives_the_closed_form_rate() {
    let ratio = exponential_weight_error(64) / exponential_weight_error(128);
    assert!((3.5..=4.5).contains(&ratio), "{ratio}");
}

#[test]
fn eigenvalue_follows_a_constant_shift() {
    let s = fp_spec(32);
    let base = v0_from_f(s.psi(), s.f()).unwrap();
    let shifted = v0_from_f(s.psi(), &s.f().map(|v| v + 0.3)).unwrap();
    assert!((shifted.eigenvalue - base.eigenvalue - 0.3).abs() < 1e-8);
    assert!(shifted.v0.sup_dist(&base.v0) < 1e-6);
    assert!(base.v0.sup_dist(s.v0()) < 1e-6);
}

#[test]
fn solved_mode_shifts_an_inconsistent_rate() {
    let s = fp_spec(32);
    let solved = ProblemSpec::solved(s.psi().clone(), s.f().map(|v| v - 0.5), s.rho0().rho().clone(), 0.1, 4).unwrap();
    assert!((solved.eigenvalue_shift() + 0.5).abs() < 1e-8);
    assert!(solved.consistency_residual() < 1e-6);
}

#[test]
fn nonpositive_density_is_rejected_by_the_field() {
    let s = fp_spec(16);
    let mut v = s.rho0().rho().values().to_vec();
    v[5] = 0.0;
    let rho = DiscreteDensity::normalized(GridFunction::new(*s.grid(), v).unwrap(), s.measure().clone()).unwrap();
    let err = f_field(&rho, &s).unwrap_err();
    assert!(err.to_string().contains("node 5"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn energy_is_convex_along_segments(a in prop::collection::vec(0.05f64..2.0, 16), b in prop::collection::vec(0.05f64..2.0, 16)) {
        let s = fp_spec(16);
        let mk = |v: Vec<f64>| DiscreteDensity::normalized(GridFunction::new(*s.grid(), v).unwrap(), s.measure().clone()).unwrap();
        let (ra, rb) = (mk(a), mk(b));
        let (ea, eb) = (free_energy(&ra, &s).total, free_energy(&rb, &s).total);
        for t in [0.25, 0.5, 0.75] {
            let mix = ra.rho().zip_map(rb.rho(), |x, y| (1.0 - t) * x + t * y);
            let rm = DiscreteDensity::new(mix, s.measure().clone()).unwrap();
            prop_assert!(free_energy(&rm, &s).total <= (1.0 - t) * ea + t * eb + 1e-12);
        }
    }
}
