mod common;

use common::oracle::{random_targets, slew_grid_oracle as grid_oracle, slew_sat as sat};
use conops_core::agility::{
    check_schedule, mat_mul, optimize_slew_schedule, rot_x, rot_y, rot_z, rotation_matrix, schedule_objective,
    AgilityConfig, Mat3, SlewSchedule,
};
use conops_core::astro::{AstroConstants, TimeGrid};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn optimizer_within_grid_oracle_gap() {
    let c = AstroConstants::default();
    let config = AgilityConfig::reference();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..30 {
        let n_ops = 1 + case % 2;
        let grid = TimeGrid::new(1800.0 * n_ops as f64, 100.0, 1800.0, 1).unwrap();
        let targets = random_targets(&mut rng, n_ops, &grid, &c);
        let sched = optimize_slew_schedule(&sat(), &targets, &config, &grid, &c).unwrap();
        check_schedule(&sched, &config).unwrap();
        let oracle = grid_oracle(&targets, &grid, &c);
        assert!(sched.objective <= oracle + 1e-3, "case {case}: {} vs grid {oracle}", sched.objective);
        let recomputed = schedule_objective(&sat(), &targets, &sched, &grid, &c).unwrap();
        assert!((recomputed - sched.objective).abs() < 1e-9);
    }
}

#[test]
fn tight_rates_still_feasible_and_no_worse_than_nadir() {
    let c = AstroConstants::default();
    let config = AgilityConfig {
        max_rate: [0.002, 0.001, 0.003],
        ..AgilityConfig::reference()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let grid = TimeGrid::new(1800.0 * 8.0, 300.0, 1800.0, 1).unwrap();
    for _ in 0..10 {
        let targets = random_targets(&mut rng, 8, &grid, &c);
        let sched = optimize_slew_schedule(&sat(), &targets, &config, &grid, &c).unwrap();
        check_schedule(&sched, &config).unwrap();
        let nadir = schedule_objective(&sat(), &targets, &SlewSchedule::nadir(8), &grid, &c).unwrap();
        assert!(sched.objective <= nadir + 1e-12);
    }
}

fn product(a: f64, b: f64, g: f64) -> Mat3 {
    mat_mul(&mat_mul(&rot_x(a), &rot_y(b)), &rot_z(g))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn rotation_is_factor_product_and_orthonormal(
        a in -std::f64::consts::PI..std::f64::consts::PI,
        b in -std::f64::consts::PI..std::f64::consts::PI,
        g in -std::f64::consts::PI..std::f64::consts::PI,
    ) {
        let m = rotation_matrix(a, b, g);
        let p = product(a, b, g);
        for i in 0..3 {
            for j in 0..3 {
                prop_assert!((m[i][j] - p[i][j]).abs() < 1e-12);
                let d: f64 = (0..3).map(|k| m[k][i] * m[k][j]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((d - want).abs() < 1e-12);
            }
        }
    }
}
