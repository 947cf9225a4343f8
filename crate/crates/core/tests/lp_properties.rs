mod common;

use common::random_tiny_lp;
use polyteam::lp::{find_feasible, solve_lp, LinearProgram, LpStatus};
use polyteam::oracle::enumerate_lp_vertices;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn simplex_agrees_with_vertex_enumeration(seed in any::<u64>()) {
        let lp = random_tiny_lp(&mut ChaCha8Rng::seed_from_u64(seed));
        let out = solve_lp(&lp);
        let oracle = enumerate_lp_vertices(&lp).unwrap();
        prop_assert_eq!(out.status, oracle.status);
        if out.is_optimal() {
            prop_assert!((out.value - oracle.value).abs() <= 1e-9, "{} vs {}", out.value, oracle.value);
        }
    }

    #[test]
    fn optimal_outcomes_are_feasible_and_dual_consistent(seed in any::<u64>()) {
        let lp = random_tiny_lp(&mut ChaCha8Rng::seed_from_u64(seed));
        let out = solve_lp(&lp);
        prop_assume!(out.is_optimal());
        prop_assert!(lp.max_violation(&out.solution) <= 1e-9);
        prop_assert!((out.value - out.dual_value).abs() <= 1e-8, "{} vs {}", out.value, out.dual_value);
        for ((row, rhs), y) in lp.inequalities().zip(&out.dual_values) {
            let slack = rhs - row.iter().zip(&out.solution).map(|(a, z)| a * z).sum::<f64>();
            prop_assert!(*y >= -1e-9);
            prop_assert!((y * slack).abs() <= 1e-8);
        }
    }

    #[test]
    fn solving_is_deterministic(seed in any::<u64>()) {
        let lp = random_tiny_lp(&mut ChaCha8Rng::seed_from_u64(seed));
        let (a, b) = (solve_lp(&lp), solve_lp(&lp));
        prop_assert_eq!(a.status, b.status);
        prop_assert_eq!(a.pivots, b.pivots);
        prop_assert_eq!(a.solution, b.solution);
        prop_assert_eq!(a.dual_values, b.dual_values);
    }

    #[test]
    fn feasibility_matches_optimization(seed in any::<u64>()) {
        let lp = random_tiny_lp(&mut ChaCha8Rng::seed_from_u64(seed));
        let feasible = find_feasible(&lp);
        let infeasible = solve_lp(&lp).status == LpStatus::Infeasible;
        prop_assert_eq!(feasible.status == LpStatus::Infeasible, infeasible);
        if feasible.is_optimal() {
            prop_assert!(lp.max_violation(&feasible.solution) <= 1e-9);
        }
    }
}

#[test]
fn random_family_covers_every_status() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut seen = [0; 3];
    for _ in 0..200 {
        match solve_lp(&random_tiny_lp(&mut rng)).status {
            LpStatus::Optimal => seen[0] += 1,
            LpStatus::Infeasible => seen[1] += 1,
            LpStatus::Unbounded => seen[2] += 1,
            LpStatus::NumericalFailure => panic!("numerical failure on a tiny LP"),
        }
    }
    assert!(seen.iter().all(|&c| c > 0), "{seen:?}");
}

#[test]
fn oracle_examples() {
    let mut lp = LinearProgram::new(2).maximize(vec![1.0, 1.0]);
    lp.set_bounds(0, Some(0.0), Some(1.0));
    lp.set_bounds(1, Some(0.0), Some(1.0));
    let v = enumerate_lp_vertices(&lp).unwrap();
    assert_eq!((v.status, v.best.clone(), v.value), (LpStatus::Optimal, Some(vec![1.0, 1.0]), 2.0));

    let mut lp = LinearProgram::new(1);
    lp.add_le(vec![1.0], -1.0);
    let v = enumerate_lp_vertices(&lp).unwrap();
    assert_eq!((v.status, v.feasible_vertices), (LpStatus::Infeasible, 0));
}
