mod common;

use common::*;
use polyteam::generate::{random_minmax, random_quadratic};
use polyteam::oracle::{for_each_grid_nash, grid_min_regret_profile, grid_minmax_kkt_points, GridSpec, NODE_BUDGET};
use polyteam::reductions::*;
use polyteam::solver::solve;
use polyteam::{Matrix, MinmaxIndInstance, MinmaxPoint, PolymatrixGame, Quadratic, QuadraticInstance, StrategyProfile};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn quadratic(constant: f64, linear: Vec<f64>, cross: Vec<(usize, usize, f64)>, square: Vec<f64>, eps: f64) -> QuadraticInstance {
    QuadraticInstance::new(Quadratic::new(constant, linear, cross, square).unwrap(), eps).unwrap()
}

fn m(rows: &[&[f64]]) -> Matrix {
    Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
}

/// `Q'(x, x') + Σ T (x'_i − x_i(1 − 2η) − η)(y_i − 1/2)` written out directly.
fn stage_one_reference(q: &Quadratic, t: f64, eta: f64, x: &[f64], xp: &[f64], y: &[f64]) -> f64 {
    let mut v = q.constant();
    for i in 0..q.n() {
        v += q.linear()[i] * x[i] + q.square()[i] * x[i] * xp[i];
        v += t * (xp[i] - x[i] * (1.0 - 2.0 * eta) - eta) * (y[i] - 0.5);
    }
    for &(i, j, c) in q.cross() {
        v += c * x[i] * x[j];
    }
    v
}

fn payoff_or_zero(game: &PolymatrixGame, i: usize, j: usize) -> Matrix {
    game.payoff(i, j).cloned().unwrap_or_else(|| Matrix::zeros(game.num_strategies(i), game.num_strategies(j)))
}

/// Builds every stage-two matrix from the displayed formulas, with the
/// instance padded to `n` on both sides.
fn naive_stage_two(inst: &MinmaxIndInstance) -> (usize, Vec<Vec<Matrix>>) {
    let n = inst.n_x().max(inst.n_y());
    let nf = n as f64;
    let mut out = vec![vec![Matrix::zeros(2, 2); 2 * n]; 2 * n];
    let mut pair = vec![vec![0.0; n]; n];
    for &(i, j, c) in inst.gamma() {
        pair[i.min(j)][i.max(j)] += c;
    }
    for i in 0..n {
        for j in i + 1..n {
            out[i][j] = m(&[&[-pair[i][j], 0.0], &[0.0, 0.0]]);
            out[j][i] = out[i][j].clone();
        }
    }
    for i in 0..n {
        for j in 0..n {
            let beta = if i < inst.n_x() { inst.beta()[i] / nf } else { 0.0 };
            let zeta = if j < inst.n_y() { inst.zeta()[j] / nf } else { 0.0 };
            let theta = if i < inst.n_x() && j < inst.n_y() { inst.theta()[(i, j)] } else { 0.0 };
            let b = m(&[&[theta + zeta + beta, zeta], &[beta, 0.0]]);
            out[i][n + j] = b.transpose().scaled(-1.0);
            out[n + j][i] = b;
        }
    }
    (n, out)
}

fn x_squared(eps: f64) -> QuadraticInstance {
    quadratic(0.0, vec![0.0], vec![], vec![1.0], eps)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn stage_one_objective_identity(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(1..=3);
        let eps = rng.gen_range(1e-3..=STAGE_ONE_MAX_EPSILON);
        let q = random_quadratic(n, eps, &mut rng).unwrap();
        let (out, params) = reduce_stage1(&q).unwrap();
        for _ in 0..100 {
            let (x, xp, y) = (random_box_point(n, &mut rng), random_box_point(n, &mut rng), random_box_point(n, &mut rng));
            let expected = stage_one_reference(q.objective(), params.t, params.eta, &x, &xp, &y);
            let z: Vec<f64> = x.iter().chain(&xp).copied().collect();
            prop_assert!(rel_err(out.value(&z, &y), expected) <= 1e-12);
        }
    }

    #[test]
    fn stage_one_constants_and_shape(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(1..=4);
        let eps = rng.gen_range(1e-4..=STAGE_ONE_MAX_EPSILON);
        let q = random_quadratic(n, eps, &mut rng).unwrap();
        let (out, p) = reduce_stage1(&q).unwrap();
        let z = q.objective().sum_abs_coeffs();
        prop_assert_eq!(p.z, z);
        prop_assert_eq!(p.t, 10.0 * z);
        prop_assert_eq!(p.eta, 2.0 * eps * eps / z);
        prop_assert!(p.eta <= 0.1);
        prop_assert_eq!(out.epsilon(), eps * eps / z);
        prop_assert_eq!((out.n_x(), out.n_y()), (2 * n, n));
        prop_assert!(out.gamma().iter().all(|&(i, j, _)| i != j));
    }

    #[test]
    fn stage_two_matches_naive_builder(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (nx, ny) = (rng.gen_range(1..=4), rng.gen_range(0..=4));
        let inst = random_minmax(nx, ny, 0.1, &mut rng).unwrap();
        let (game, s, params) = reduce_stage2(&inst).unwrap();
        let (n, expected) = naive_stage_two(&inst);
        prop_assert_eq!(params.n, n);
        prop_assert_eq!(game.strategy_counts(), &vec![2; 2 * n][..]);
        prop_assert_eq!(&s.team_x, &(0..n).collect::<Vec<_>>());
        prop_assert_eq!(&s.team_y, &(n..2 * n).collect::<Vec<_>>());
        prop_assert!(s.independent_adversaries);
        for i in 0..2 * n {
            for j in 0..2 * n {
                if i == j {
                    continue;
                }
                let got = payoff_or_zero(&game, i, j);
                for (a, b) in got.as_slice().iter().zip(expected[i][j].as_slice()) {
                    prop_assert!((a - b).abs() <= 1e-15, "edge ({i},{j}): {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn stage_two_validates_and_is_bounded(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (nx, ny) = (rng.gen_range(1..=4), rng.gen_range(1..=4));
        let inst = random_minmax(nx, ny, 0.1, &mut rng).unwrap();
        let (game, s, params) = reduce_stage2(&inst).unwrap();
        prop_assert!(game.validate_two_team(&s).unwrap().passed());
        let z = inst.sum_abs_coeffs();
        prop_assert_eq!(params.z, z);
        prop_assert_eq!(params.delta_out, 0.1 * 0.1 / (4.0 * z));
        prop_assert_eq!(params.rounding_threshold, 0.1 / (2.0 * z));
        let bound = z + 2.0 * z / params.n as f64;
        prop_assert!(game.max_abs_payoff() <= bound);
    }

    #[test]
    fn pullback_snaps_only_near_the_ends(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(1..=3);
        let params = StageTwoParams::new(n, n, n, 0.05, 1.0 + rng.gen_range(0.0..3.0));
        let profile = random_profile(&vec![2; 2 * n], &mut rng);
        let p = pullback_stage2(&profile, &params).unwrap();
        let thr = params.rounding_threshold;
        for (v, s) in p.x.as_slice().iter().chain(p.y.as_slice()).zip(profile.strategies()) {
            let expected = if s[0] < thr { 0.0 } else if s[0] > 1.0 - thr { 1.0 } else { s[0] };
            prop_assert_eq!(*v, expected);
            prop_assert!((v - s[0]).abs() <= thr);
        }
    }
}

#[test]
fn copy_gadget_examples() {
    assert_eq!(copy_gadget(0.7, 0.7, 0.5, 0.0), 0.0);
    assert_eq!(copy_gadget(0.0, 1.0, 1.0, 0.0), 0.5);
    assert!((copy_gadget(0.3, 0.3, 0.8, 0.02) - -0.0024).abs() < 1e-15);
}

#[test]
fn stage_one_on_x_squared() {
    let (out, p) = reduce_stage1(&x_squared(1.0 / 13.0)).unwrap();
    assert_eq!((p.z, p.t), (1.0, 10.0));
    assert!((p.eta - 2.0 / 169.0).abs() < 1e-17);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let (x, xp, y): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
        let expected = x * xp + 10.0 * (xp - x * (1.0 - 2.0 * p.eta) - p.eta) * (y - 0.5);
        assert!((out.value(&[x, xp], &[y]) - expected).abs() <= 1e-12);
    }
    assert!((out.value(&[0.3, 0.3], &[0.5]) - 0.09).abs() < 1e-15);

    let (_, p) = reduce_stage1(&QuadraticInstance::zero(2, 0.01).unwrap()).unwrap();
    assert_eq!((p.z, p.t), (1.0, 10.0));
    assert!((p.eta - 2e-4).abs() < 1e-18);
}

#[test]
fn stage_one_rejects_large_epsilon() {
    let err = reduce_stage1(&x_squared(0.1)).unwrap_err().to_string();
    assert!(err.contains("1/13"), "{err}");
}

#[test]
fn stage_one_pullback_projects() {
    let params = StageOneParams::new(2, 0.05, 1.0);
    let p = MinmaxPoint::new(vec![0.2, 0.9, 0.2, 0.9], vec![0.5, 0.5]).unwrap();
    assert_eq!(pullback_stage1(&p, &params).unwrap().as_slice(), &[0.2, 0.9]);
}

/// With `η = 4/338` and `1/2 = 169/338` on the grid, `(0, η, 1/2)` is an
/// exact KKT point of the stage-one instance, so the scan is not vacuous.
#[test]
fn stage_one_grid_kkt_points_project_to_kkt_points() {
    let q = x_squared(1.0 / 13.0);
    let (out, p) = reduce_stage1(&q).unwrap();
    let points = grid_minmax_kkt_points(&out, 338, out.epsilon(), NODE_BUDGET).unwrap();
    assert!(!points.is_empty());
    for point in &points {
        let x = pullback_stage1(point, &p).unwrap();
        assert!(q.verify_min_kkt(&x, q.epsilon()).passed, "{point:?}");
    }
}

#[test]
fn stage_two_paper_matrices() {
    let xy = MinmaxIndInstance::new(0.0, vec![0.0], vec![], vec![0.0], m(&[&[1.0]]), 0.1).unwrap();
    let (game, _, _) = reduce_stage2(&xy).unwrap();
    assert_eq!(game.payoff(1, 0).unwrap(), &m(&[&[1.0, 0.0], &[0.0, 0.0]]));
    assert_eq!(game.payoff(0, 1).unwrap(), &m(&[&[-1.0, 0.0], &[0.0, 0.0]]));

    let coord = MinmaxIndInstance::new(0.0, vec![0.0, 0.0], vec![(0, 1, 2.0)], vec![0.0, 0.0], Matrix::zeros(2, 2), 0.1).unwrap();
    let (game, _, _) = reduce_stage2(&coord).unwrap();
    let expected = m(&[&[-2.0, 0.0], &[0.0, 0.0]]);
    assert_eq!(game.payoff(0, 1).unwrap(), &expected);
    assert_eq!(game.payoff(1, 0).unwrap(), &expected);
}

#[test]
fn stage_two_pullback_examples() {
    let params = StageTwoParams::new(1, 1, 1, 0.01, 1.0);
    assert_eq!(params.rounding_threshold, 0.005);
    let profile = StrategyProfile::new(vec![vec![0.001, 0.999], vec![0.5, 0.5]]).unwrap();
    let p = pullback_stage2(&profile, &params).unwrap();
    assert_eq!((p.x.as_slice(), p.y.as_slice()), (&[0.0][..], &[0.5][..]));
}

#[test]
fn xy_stage_two_grid_regret() {
    let xy = MinmaxIndInstance::new(0.0, vec![0.0], vec![], vec![0.0], m(&[&[1.0]]), 0.1).unwrap();
    let (game, _, _) = reduce_stage2(&xy).unwrap();
    let (_, regret) = grid_min_regret_profile(&game, &GridSpec::for_game(&game, 50).unwrap()).unwrap();
    assert!(regret <= 0.02);
}

/// Every δ-Nash profile on the grid pulls back to an ε-KKT point.
#[test]
fn xy_stage_two_grid_nash_pulls_back() {
    let xy = MinmaxIndInstance::new(0.0, vec![0.0], vec![], vec![0.0], m(&[&[1.0]]), 0.2).unwrap();
    let (game, _, params) = reduce_stage2(&xy).unwrap();
    let mut count = 0;
    for_each_grid_nash(&game, &GridSpec::for_game(&game, 100).unwrap(), params.delta_out, 1e7, |profile, _| {
        count += 1;
        let p = pullback_stage2(profile, &params).unwrap();
        assert!(xy.verify_minmax_kkt(&p, 0.2).passed, "{profile:?}");
    })
    .unwrap();
    assert!(count > 0);
}

#[test]
fn full_reduction_of_x_squared() {
    let (game, s, params) = reduce_full(&x_squared(1.0 / 13.0)).unwrap();
    assert_eq!(game.strategy_counts(), &[2, 2, 2, 2]);
    assert_eq!((s.team_x.len(), s.team_y.len()), (2, 2));
    // Stage-one coefficients: α = Tη/2, β = (T(1−2η)/2, −T/2), ζ = −Tη,
    // θ = (−T(1−2η), T), γ = 1 on (x, x').
    let (t, eta) = (10.0, 2.0 / 169.0);
    let z2 = t * eta / 2.0 + t * (1.0 - 2.0 * eta) / 2.0 + t / 2.0 + t * eta + t * (1.0 - 2.0 * eta) + t + 1.0;
    assert!((params.stage2.z - z2).abs() < 1e-12);
    assert_eq!(params.stage2.epsilon, params.stage1.delta_out);
    let expected = (1.0f64 / 169.0).powi(2) / (4.0 * z2);
    assert!((params.delta() - expected).abs() < 1e-20);
}

#[test]
fn zero_quadratic_pulls_back_anywhere() {
    let q = QuadraticInstance::zero(2, 0.05).unwrap();
    let (game, _, params) = reduce_full(&q).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let profile = random_profile(game.strategy_counts(), &mut rng);
        let x = pullback_full(&profile, &params).unwrap();
        assert!(q.verify_min_kkt(&x, 0.0).passed);
    }
}

#[test]
fn end_to_end_shifted_square() {
    let q = quadratic(0.25, vec![-1.0], vec![], vec![1.0], 1.0 / 13.0);
    let (game, s, params) = reduce_full(&q).unwrap();
    let sol = solve(&game, &s, params.delta(), 0).unwrap();
    assert!(sol.converged, "regret {}", sol.report.max_regret);
    let x = pullback_full(&sol.profile, &params).unwrap();
    assert!(q.verify_min_kkt(&x, q.epsilon()).passed);
    assert!((x.as_slice()[0] - 0.5).abs() <= 1.0 / 26.0);
}

#[test]
fn random_stage_two_games_solve_to_delta() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..10 {
        let (nx, ny) = (rng.gen_range(1..=3), rng.gen_range(1..=3));
        let inst = random_minmax(nx, ny, 0.05, &mut rng).unwrap();
        let (game, s, params) = reduce_stage2(&inst).unwrap();
        let sol = solve(&game, &s, params.delta_out, 3).unwrap();
        assert!(sol.converged, "regret {} > {}", sol.report.max_regret, params.delta_out);
        let p = pullback_stage2(&sol.profile, &params).unwrap();
        assert!(inst.verify_minmax_kkt(&p, inst.epsilon()).passed);
    }
}
