//! Naive reference implementations shared by the integration tests. None of
//! these call into the code paths they are compared against.

#![allow(dead_code)]

use polyteam::{Matrix, PolymatrixGame, StrategyProfile, TwoTeamStructure};
use rand::Rng;

pub fn bilinear(u: &[f64], a: &Matrix, v: &[f64]) -> f64 {
    let mut total = 0.0;
    for r in 0..a.rows() {
        for c in 0..a.cols() {
            total += u[r] * a[(r, c)] * v[c];
        }
    }
    total
}

/// `Σ_j x_i A^{i,j} x_j` by looping over every other player.
pub fn naive_utility(game: &PolymatrixGame, i: usize, profile: &StrategyProfile) -> f64 {
    let mut total = 0.0;
    for j in 0..game.num_players() {
        if j == i {
            continue;
        }
        if let Some(a) = game.payoff(i, j) {
            total += bilinear(profile.strategy(i), a, profile.strategy(j));
        }
    }
    total
}

/// `−Σ_{i<i′∈X} x_i A^{i,i′} x_{i′} − Σ_{i∈X, j∈Y} x_i A^{i,j} y_j`.
pub fn naive_common_utility(game: &PolymatrixGame, s: &TwoTeamStructure, profile: &StrategyProfile) -> f64 {
    let mut total = 0.0;
    for (a, &i) in s.team_x.iter().enumerate() {
        for &i2 in &s.team_x[a + 1..] {
            if let Some(m) = game.payoff(i, i2) {
                total -= bilinear(profile.strategy(i), m, profile.strategy(i2));
            }
        }
        for &j in &s.team_y {
            if let Some(m) = game.payoff(i, j) {
                total -= bilinear(profile.strategy(i), m, profile.strategy(j));
            }
        }
    }
    total
}

/// Sum of `x_i A x_j` over intra-team edges, each unordered pair once.
pub fn intra_team_payoff(game: &PolymatrixGame, s: &TwoTeamStructure, profile: &StrategyProfile) -> f64 {
    let mut total = 0.0;
    for team in [&s.team_x, &s.team_y] {
        for (a, &i) in team.iter().enumerate() {
            for &i2 in &team[a + 1..] {
                if let Some(m) = game.payoff(i, i2) {
                    total += bilinear(profile.strategy(i), m, profile.strategy(i2));
                }
            }
        }
    }
    total
}

/// Sum of absolute entries over the matrices that enter the common utility.
pub fn utility_magnitude(game: &PolymatrixGame, s: &TwoTeamStructure) -> f64 {
    let mut total = 0.0;
    for (a, &i) in s.team_x.iter().enumerate() {
        for &other in s.team_x[a + 1..].iter().chain(&s.team_y) {
            if let Some(m) = game.payoff(i, other) {
                total += m.sum_abs();
            }
        }
    }
    f64::max(1.0, total)
}

pub fn random_simplex(m: usize, rng: &mut impl Rng) -> Vec<f64> {
    let raw: Vec<f64> = (0..m).map(|_| -rng.gen_range(1e-12f64..1.0).ln()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

pub fn random_profile(counts: &[usize], rng: &mut impl Rng) -> StrategyProfile {
    StrategyProfile::new(counts.iter().map(|&m| random_simplex(m, rng)).collect()).unwrap()
}

/// Uniform point in the unit box, with each coordinate snapped to 0 or 1
/// with probability 1/10 each so boundary branches get exercised.
pub fn random_box_point(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..n)
        .map(|_| match rng.gen_range(0..10) {
            0 => 0.0,
            1 => 1.0,
            _ => rng.gen_range(0.0..=1.0),
        })
        .collect()
}

/// Every pure profile of the given players, as action indices.
pub fn pure_profiles(counts: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for &m in counts {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..m).map(move |k| {
                    let mut q = p.clone();
                    q.push(k);
                    q
                })
            })
            .collect();
    }
    out
}

pub fn unit(m: usize, k: usize) -> Vec<f64> {
    let mut v = vec![0.0; m];
    v[k] = 1.0;
    v
}

/// `max_y U(x, y)` by enumerating every pure adversary profile. The team
/// strategies come from `team`, one per member of `s.team_x`.
pub fn brute_max_over_adversaries(
    game: &PolymatrixGame,
    s: &TwoTeamStructure,
    team: &[Vec<f64>],
) -> f64 {
    let counts: Vec<usize> = s.team_y.iter().map(|&j| game.num_strategies(j)).collect();
    let mut best = f64::NEG_INFINITY;
    for actions in pure_profiles(&counts) {
        let mut strategies = vec![Vec::new(); game.num_players()];
        for (&i, x) in s.team_x.iter().zip(team) {
            strategies[i] = x.clone();
        }
        for ((&j, &k), &m) in s.team_y.iter().zip(&actions).zip(&counts) {
            strategies[j] = unit(m, k);
        }
        let profile = StrategyProfile::new(strategies).unwrap();
        best = best.max(naive_common_utility(game, s, &profile));
    }
    best
}

/// Relative error with the denominator floored at 1, so values near zero
/// are compared absolutely.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

/// `Q(x)` summed monomial by monomial from raw coefficient lists.
pub fn naive_quadratic(
    constant: f64,
    linear: &[f64],
    cross: &[(usize, usize, f64)],
    square: &[f64],
    x: &[f64],
) -> f64 {
    let mut v = constant;
    for i in 0..x.len() {
        v += linear[i] * x[i];
        v += square[i] * x[i] * x[i];
    }
    for &(i, j, c) in cross {
        v += c * x[i] * x[j];
    }
    v
}

/// A random LP with at most 12 constraints and bounds: `n ≤ 5` variables,
/// integer coefficients, a mix of `≤`, `≥` and `=` rows and occasional
/// upper bounds. Mixes feasible, infeasible and unbounded cases.
pub fn random_tiny_lp(rng: &mut impl Rng) -> polyteam::lp::LinearProgram {
    let n = rng.gen_range(1..=5);
    let mut budget = 12 - n;
    let mut lp = polyteam::lp::LinearProgram::new(n).maximize((0..n).map(|_| rng.gen_range(-5..=5) as f64).collect());
    let rows = rng.gen_range(1..=budget.min(8));
    budget -= rows;
    for _ in 0..rows {
        let row: Vec<f64> = (0..n).map(|_| rng.gen_range(-5..=5) as f64).collect();
        let rhs = rng.gen_range(-3..=10) as f64;
        match rng.gen_range(0..6) {
            0 => lp.add_ge(row, rhs),
            1 => lp.add_eq(row, rhs),
            _ => lp.add_le(row, rhs),
        }
    }
    for v in 0..n {
        if budget > 0 && rng.gen_bool(0.3) {
            lp.set_bounds(v, Some(0.0), Some(rng.gen_range(1..=4) as f64));
            budget -= 1;
        }
    }
    lp
}
