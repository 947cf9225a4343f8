mod common;

use common::*;
use polyteam::generate::random_two_team;
use polyteam::oracle::simplex_grid;
use polyteam::{PolymatrixGame, StrategyProfile, TwoTeamStructure};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_game(seed: u64, independent: bool) -> (PolymatrixGame, TwoTeamStructure, StrategyProfile, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nx = rng.gen_range(1..=3);
    let ny = rng.gen_range(1..=3);
    let team: Vec<usize> = (0..nx).map(|_| rng.gen_range(1..=3)).collect();
    let adv: Vec<usize> = (0..ny).map(|_| rng.gen_range(1..=3)).collect();
    let (game, s) = random_two_team(&team, &adv, independent, &mut rng).unwrap();
    let profile = random_profile(game.strategy_counts(), &mut rng);
    (game, s, profile, rng)
}

fn magnitude(game: &PolymatrixGame) -> f64 {
    game.edges().map(|(_, _, a, b)| a.sum_abs() + b.sum_abs()).sum::<f64>().max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn utility_matches_naive_sum(seed in any::<u64>(), independent in any::<bool>()) {
        let (game, _, profile, _) = random_game(seed, independent);
        for i in 0..game.num_players() {
            let u = game.utility(i, &profile);
            prop_assert!((u - naive_utility(&game, i, &profile)).abs() <= 1e-12 * magnitude(&game));
        }
    }

    /// Cross-team edges cancel in `Σ_i U_i`; what remains is every
    /// coordination edge counted once from each endpoint.
    #[test]
    fn utilities_sum_to_twice_the_coordination_payoff(seed in any::<u64>(), independent in any::<bool>()) {
        let (game, s, profile, _) = random_game(seed, independent);
        prop_assert!(game.validate_two_team(&s).unwrap().passed());
        let total: f64 = (0..game.num_players()).map(|i| game.utility(i, &profile)).sum();
        let expected = 2.0 * intra_team_payoff(&game, &s, &profile);
        prop_assert!((total - expected).abs() <= 1e-9 * magnitude(&game), "{total} vs {expected}");
    }

    #[test]
    fn utilities_cancel_without_intra_team_edges(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = rng.gen_range(1..=3);
        let (game, s) = random_two_team(&[m], &[rng.gen_range(1..=3)], true, &mut rng).unwrap();
        let profile = random_profile(game.strategy_counts(), &mut rng);
        let total: f64 = (0..game.num_players()).map(|i| game.utility(i, &profile)).sum();
        prop_assert!(total.abs() <= 1e-9 * magnitude(&game));
        prop_assert!(s.team_x.len() == 1);
    }

    #[test]
    fn common_utility_matches_naive(seed in any::<u64>()) {
        let (game, s, profile, _) = random_game(seed, true);
        let u = game.common_utility(&s, &profile).unwrap();
        prop_assert!((u - naive_common_utility(&game, &s, &profile)).abs() <= 1e-12 * magnitude(&game));
    }

    /// A pure deviation changes an adversary's utility by exactly the change
    /// in the common utility, and a team member's by its negative.
    #[test]
    fn deviations_agree_with_common_utility(seed in any::<u64>()) {
        let (game, s, profile, _) = random_game(seed, true);
        let base_u = game.common_utility(&s, &profile).unwrap();
        for p in 0..game.num_players() {
            let sign = if s.team_y.contains(&p) { 1.0 } else { -1.0 };
            for k in 0..game.num_strategies(p) {
                let dev = profile.with_strategy(p, unit(game.num_strategies(p), k)).unwrap();
                let d_own = game.utility(p, &dev) - game.utility(p, &profile);
                let d_common = game.common_utility(&s, &dev).unwrap() - base_u;
                prop_assert!((d_own - sign * d_common).abs() <= 1e-9 * magnitude(&game));
            }
        }
    }

    #[test]
    fn utility_is_affine_in_own_strategy(seed in any::<u64>(), t in 0.0f64..=1.0) {
        let (game, _, profile, mut rng) = random_game(seed, false);
        for i in 0..game.num_players() {
            let m = game.num_strategies(i);
            let (a, b) = (random_simplex(m, &mut rng), random_simplex(m, &mut rng));
            let mid: Vec<f64> = a.iter().zip(&b).map(|(u, v)| (1.0 - t) * u + t * v).collect();
            let ua = game.utility(i, &profile.with_strategy(i, a).unwrap());
            let ub = game.utility(i, &profile.with_strategy(i, b).unwrap());
            let um = game.utility(i, &profile.with_strategy(i, mid).unwrap());
            prop_assert!((um - ((1.0 - t) * ua + t * ub)).abs() <= 1e-12 * magnitude(&game));
        }
    }

    #[test]
    fn best_response_dominates_current_play(seed in any::<u64>()) {
        let (game, _, profile, _) = random_game(seed, false);
        let report = game.verify_epsilon_nash(&profile, 0.0);
        for i in 0..game.num_players() {
            let (k, value) = game.best_response(i, &profile);
            prop_assert!(value >= game.utility(i, &profile) - 1e-12);
            prop_assert!(k < game.num_strategies(i));
            prop_assert!(report.regrets[i] >= -1e-9);
        }
        prop_assert_eq!(report.passed, report.max_regret <= 0.0);
    }

    /// Pure best responses already attain the best mixed response.
    #[test]
    fn best_response_matches_mixed_grid(seed in any::<u64>()) {
        let (game, _, profile, _) = random_game(seed, false);
        for i in 0..game.num_players() {
            let (_, value) = game.best_response(i, &profile);
            let grid_best = simplex_grid(10, game.num_strategies(i))
                .into_iter()
                .map(|s| naive_utility(&game, i, &profile.with_strategy(i, s).unwrap()))
                .fold(f64::NEG_INFINITY, f64::max);
            prop_assert!((value - grid_best).abs() <= 1e-9);
        }
    }

    #[test]
    fn nash_verdict_is_monotone_in_epsilon(seed in any::<u64>(), eps in 0.0f64..2.0) {
        let (game, _, profile, _) = random_game(seed, false);
        let report = game.verify_epsilon_nash(&profile, eps);
        prop_assert_eq!(report.passed, report.max_regret <= eps);
        if report.passed {
            prop_assert!(game.verify_epsilon_nash(&profile, eps + 0.5).passed);
        }
    }
}

#[test]
fn generated_games_validate() {
    for seed in 0..50 {
        for independent in [true, false] {
            let (game, s, _, _) = random_game(seed, independent);
            assert!(game.validate_two_team(&s).unwrap().passed());
        }
    }
}

#[test]
fn adversary_edges_fail_the_independence_check() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (game, mut s) = random_two_team(&[2], &[2, 2], false, &mut rng).unwrap();
    s.independent_adversaries = true;
    assert!(!game.validate_two_team(&s).unwrap().passed());
    s.independent_adversaries = false;
    assert!(game.validate_two_team(&s).unwrap().passed());
}
