//! Polymatrix games, two-team structure, utilities and ε-Nash checks.
//!
//! Players are indexed from 0. A strategy of player `i` is a row vector
//! acting on the left of `A^{i,j}`, so the payoff player `i` collects on
//! edge `{i,j}` is `x_i A^{i,j} x_j`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{argmax, dot, Matrix};

/// Per-entry tolerance for the structural two-team conditions.
pub const STRUCTURE_TOL: f64 = 1e-12;

/// Slack allowed on probability vectors before they are renormalized.
pub const PROFILE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
struct EdgePayoffs {
    /// `A^{lo,hi}`, shape `S_lo × S_hi`.
    forward: Matrix,
    /// `A^{hi,lo}`, shape `S_hi × S_lo`.
    backward: Matrix,
}

/// A polymatrix game. Edges that were never set are all-zero games.
#[derive(Debug, Clone, PartialEq)]
pub struct PolymatrixGame {
    strategy_counts: Vec<usize>,
    edges: BTreeMap<(usize, usize), EdgePayoffs>,
}

impl PolymatrixGame {
    pub fn new(strategy_counts: Vec<usize>) -> Result<PolymatrixGame> {
        if strategy_counts.is_empty() {
            return Err(Error::Structure("a game needs at least one player".into()));
        }
        if let Some(i) = strategy_counts.iter().position(|&s| s == 0) {
            return Err(Error::Structure(format!("player {i} has no strategies")));
        }
        Ok(PolymatrixGame { strategy_counts, edges: BTreeMap::new() })
    }

    /// Sets the matrix pair on edge `{i,j}`, replacing any previous pair.
    /// `a_ij` is `S_i × S_j` and `a_ji` is `S_j × S_i`.
    pub fn set_edge(&mut self, i: usize, j: usize, a_ij: Matrix, a_ji: Matrix) -> Result<()> {
        let n = self.num_players();
        if i >= n || j >= n {
            return Err(Error::Structure(format!("edge {{{i},{j}}} names a player outside 0..{n}")));
        }
        if i == j {
            return Err(Error::Structure(format!("self-loop on player {i}")));
        }
        let (si, sj) = (self.strategy_counts[i], self.strategy_counts[j]);
        if a_ij.shape() != (si, sj) {
            return Err(Error::Structure(format!(
                "A^{{{i},{j}}} is {}x{}, expected {si}x{sj}",
                a_ij.rows(),
                a_ij.cols()
            )));
        }
        if a_ji.shape() != (sj, si) {
            return Err(Error::Structure(format!(
                "A^{{{j},{i}}} is {}x{}, expected {sj}x{si}",
                a_ji.rows(),
                a_ji.cols()
            )));
        }
        if !a_ij.is_finite() || !a_ji.is_finite() {
            return Err(Error::Structure(format!("edge {{{i},{j}}} has a non-finite payoff")));
        }
        let payoffs = if i < j {
            EdgePayoffs { forward: a_ij, backward: a_ji }
        } else {
            EdgePayoffs { forward: a_ji, backward: a_ij }
        };
        self.edges.insert((i.min(j), i.max(j)), payoffs);
        Ok(())
    }

    pub fn with_edge(mut self, i: usize, j: usize, a_ij: Matrix, a_ji: Matrix) -> Result<Self> {
        self.set_edge(i, j, a_ij, a_ji)?;
        Ok(self)
    }

    pub fn num_players(&self) -> usize {
        self.strategy_counts.len()
    }

    pub fn strategy_counts(&self) -> &[usize] {
        &self.strategy_counts
    }

    pub fn num_strategies(&self, player: usize) -> usize {
        self.strategy_counts[player]
    }

    /// `A^{i,j}`, or `None` when the edge is absent (all zeros).
    pub fn payoff(&self, i: usize, j: usize) -> Option<&Matrix> {
        if i < j {
            self.edges.get(&(i, j)).map(|e| &e.forward)
        } else {
            self.edges.get(&(j, i)).map(|e| &e.backward)
        }
    }

    /// Stored edges as `(i, j, A^{i,j}, A^{j,i})` with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, &Matrix, &Matrix)> + '_ {
        self.edges.iter().map(|(&(i, j), e)| (i, j, &e.forward, &e.backward))
    }

    /// Neighbours of `player` together with `A^{player,j}`.
    pub fn neighbors(&self, player: usize) -> impl Iterator<Item = (usize, &Matrix)> + '_ {
        self.edges.iter().filter_map(move |(&(i, j), e)| {
            if i == player {
                Some((j, &e.forward))
            } else if j == player {
                Some((i, &e.backward))
            } else {
                None
            }
        })
    }

    pub fn max_abs_payoff(&self) -> f64 {
        self.edges.values().fold(0.0, |m, e| m.max(e.forward.max_abs()).max(e.backward.max_abs()))
    }

    pub fn check_profile(&self, profile: &StrategyProfile) -> Result<()> {
        if profile.num_players() != self.num_players() {
            return Err(Error::Profile(format!(
                "profile has {} strategies, game has {} players",
                profile.num_players(),
                self.num_players()
            )));
        }
        for (i, (s, &count)) in profile.strategies().iter().zip(&self.strategy_counts).enumerate() {
            if s.len() != count {
                return Err(Error::Profile(format!(
                    "player {i} strategy has length {}, expected {count}",
                    s.len()
                )));
            }
        }
        Ok(())
    }

    /// `U_i(e_k, x_{-i})` for every pure strategy `k` of `player`.
    pub fn payoff_vector(&self, player: usize, profile: &StrategyProfile) -> Vec<f64> {
        let mut out = vec![0.0; self.strategy_counts[player]];
        for (j, a) in self.neighbors(player) {
            let contribution = a.mul_vec(profile.strategy(j));
            for (o, c) in out.iter_mut().zip(contribution) {
                *o += c;
            }
        }
        out
    }

    /// `U_i(x) = Σ_j x_i A^{i,j} x_j`.
    pub fn utility(&self, player: usize, profile: &StrategyProfile) -> f64 {
        dot(profile.strategy(player), &self.payoff_vector(player, profile))
    }

    /// Pure best response and its value; ties go to the lowest index.
    pub fn best_response(&self, player: usize, profile: &StrategyProfile) -> (usize, f64) {
        argmax(&self.payoff_vector(player, profile))
    }

    pub fn verify_epsilon_nash(&self, profile: &StrategyProfile, epsilon: f64) -> NashReport {
        let regrets: Vec<f64> = (0..self.num_players())
            .map(|i| {
                let payoffs = self.payoff_vector(i, profile);
                let achieved = dot(profile.strategy(i), &payoffs);
                argmax(&payoffs).1 - achieved
            })
            .collect();
        NashReport::new(regrets, epsilon)
    }

    /// Checks the two-team zero-sum conditions entry by entry.
    ///
    /// Returns `Err` only for structural problems (indices out of range,
    /// teams that do not partition the players); condition violations are
    /// listed in the report.
    pub fn validate_two_team(&self, structure: &TwoTeamStructure) -> Result<ValidationReport> {
        let side = structure.sides(self.num_players())?;
        let mut violations = Vec::new();
        for (&(i, j), e) in &self.edges {
            let (si, sj) = (self.strategy_counts[i], self.strategy_counts[j]);
            match (side[i], side[j]) {
                (Side::Y, Side::Y) if structure.independent_adversaries => {
                    for (pair, m) in [((i, j), &e.forward), ((j, i), &e.backward)] {
                        for r in 0..m.rows() {
                            for c in 0..m.cols() {
                                if m[(r, c)].abs() > STRUCTURE_TOL {
                                    violations.push(Violation {
                                        pair,
                                        entry: (r, c),
                                        kind: ViolationKind::AdversaryInteraction,
                                        deviation: m[(r, c)].abs(),
                                    });
                                }
                            }
                        }
                    }
                }
                (a, b) => {
                    let (kind, sign) = if a == b {
                        (ViolationKind::Coordination, -1.0)
                    } else {
                        (ViolationKind::ZeroSum, 1.0)
                    };
                    for r in 0..si {
                        for c in 0..sj {
                            let deviation = (e.forward[(r, c)] + sign * e.backward[(c, r)]).abs();
                            if deviation > STRUCTURE_TOL {
                                violations.push(Violation { pair: (i, j), entry: (r, c), kind, deviation });
                            }
                        }
                    }
                }
            }
        }
        Ok(ValidationReport { violations })
    }

    /// `U(x,y) = −Σ_{i<i'∈X} x_i A^{i,i'} x_{i'} − Σ_{i∈X,j∈Y} x_i A^{i,j} y_j`.
    pub fn common_utility(&self, structure: &TwoTeamStructure, profile: &StrategyProfile) -> Result<f64> {
        let report = self.validate_two_team(structure)?;
        if !report.passed() {
            return Err(Error::NotTwoTeam(report.violations.len()));
        }
        self.check_profile(profile)?;
        let side = structure.sides(self.num_players())?;
        let mut u = 0.0;
        for (i, j, a_ij, a_ji) in self.edges() {
            match (side[i], side[j]) {
                (Side::X, Side::X) => u -= a_ij.bilinear(profile.strategy(i), profile.strategy(j)),
                (Side::X, Side::Y) => u -= a_ij.bilinear(profile.strategy(i), profile.strategy(j)),
                (Side::Y, Side::X) => u -= a_ji.bilinear(profile.strategy(j), profile.strategy(i)),
                (Side::Y, Side::Y) => {}
            }
        }
        Ok(u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Side {
    X,
    Y,
}

/// The split of players into a coordinating team X and an adversary team Y.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwoTeamStructure {
    pub team_x: Vec<usize>,
    pub team_y: Vec<usize>,
    pub independent_adversaries: bool,
}

impl TwoTeamStructure {
    pub fn new(team_x: Vec<usize>, team_y: Vec<usize>, independent_adversaries: bool) -> Self {
        TwoTeamStructure { team_x, team_y, independent_adversaries }
    }

    pub(crate) fn sides(&self, num_players: usize) -> Result<Vec<Side>> {
        let mut side = vec![None; num_players];
        for (team, s) in [(&self.team_x, Side::X), (&self.team_y, Side::Y)] {
            for &p in team {
                if p >= num_players {
                    return Err(Error::Structure(format!("team member {p} is not a player")));
                }
                if side[p].replace(s).is_some() {
                    return Err(Error::Structure(format!("player {p} appears twice in the teams")));
                }
            }
        }
        side.into_iter()
            .enumerate()
            .map(|(p, s)| s.ok_or_else(|| Error::Structure(format!("player {p} belongs to no team"))))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// Intra-team edge that is not a coordination game.
    Coordination,
    /// Cross-team edge that is not zero-sum.
    ZeroSum,
    /// Non-zero payoff between two adversaries declared independent.
    AdversaryInteraction,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    /// `(i, j)` such that the offending entry lives in `A^{i,j}`.
    pub pair: (usize, usize),
    pub entry: (usize, usize),
    pub kind: ViolationKind,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// One mixed strategy per player.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyProfile {
    strategies: Vec<Vec<f64>>,
}

impl StrategyProfile {
    /// Accepts vectors that are within [`PROFILE_TOL`] of the simplex and
    /// renormalizes them; anything further off is rejected.
    pub fn new(strategies: Vec<Vec<f64>>) -> Result<StrategyProfile> {
        let strategies = strategies
            .into_iter()
            .enumerate()
            .map(|(i, s)| normalize(s).map_err(|e| Error::Profile(format!("player {i}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(StrategyProfile { strategies })
    }

    pub fn uniform(counts: &[usize]) -> StrategyProfile {
        StrategyProfile { strategies: counts.iter().map(|&m| vec![1.0 / m as f64; m]).collect() }
    }

    pub fn pure(counts: &[usize], actions: &[usize]) -> StrategyProfile {
        let strategies = counts
            .iter()
            .zip(actions)
            .map(|(&m, &a)| {
                let mut s = vec![0.0; m];
                s[a] = 1.0;
                s
            })
            .collect();
        StrategyProfile { strategies }
    }

    pub fn num_players(&self) -> usize {
        self.strategies.len()
    }

    pub fn strategy(&self, player: usize) -> &[f64] {
        &self.strategies[player]
    }

    pub fn strategies(&self) -> &[Vec<f64>] {
        &self.strategies
    }

    pub fn into_inner(self) -> Vec<Vec<f64>> {
        self.strategies
    }

    /// Replaces one player's strategy, checking it like [`StrategyProfile::new`].
    pub fn with_strategy(&self, player: usize, strategy: Vec<f64>) -> Result<StrategyProfile> {
        let mut out = self.clone();
        out.strategies[player] = normalize(strategy).map_err(Error::Profile)?;
        Ok(out)
    }
}

fn normalize(mut s: Vec<f64>) -> std::result::Result<Vec<f64>, String> {
    if s.is_empty() {
        return Err("empty strategy".into());
    }
    if s.iter().any(|p| !p.is_finite() || *p < -PROFILE_TOL) {
        return Err(format!("entries must be finite and nonnegative: {s:?}"));
    }
    for p in s.iter_mut() {
        *p = p.max(0.0);
    }
    let total: f64 = s.iter().sum();
    if (total - 1.0).abs() > PROFILE_TOL {
        return Err(format!("probabilities sum to {total}"));
    }
    for p in s.iter_mut() {
        *p /= total;
    }
    Ok(s)
}

/// Per-player regrets of a profile against a target ε.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NashReport {
    pub regrets: Vec<f64>,
    pub max_regret: f64,
    pub epsilon: f64,
    pub passed: bool,
}

impl NashReport {
    pub fn new(regrets: Vec<f64>, epsilon: f64) -> NashReport {
        let max_regret = regrets.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        NashReport { passed: max_regret <= epsilon, regrets, max_regret, epsilon }
    }
}
