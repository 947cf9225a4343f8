//! Quadratic KKT → bilinear minmax KKT → two-team game, and back.
//!
//! Stage one removes square monomials by duplicating each variable `x_i`
//! into a second min-variable `x'_i` tied to it by a copy gadget played
//! against a fresh max-variable `y_i`. Stage two turns a minmax objective
//! without `y_i y_j` monomials into a game with one two-action player per
//! variable. Every stage records its constants in a params object so the
//! accuracy targets of the three layers can be audited.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{PolymatrixGame, StrategyProfile, TwoTeamStructure};
use crate::instances::{BoxPoint, MinmaxIndInstance, MinmaxPoint, QuadraticInstance};
use crate::linalg::Matrix;

/// Largest input accuracy for which stage one is guaranteed to pull back.
pub const STAGE_ONE_MAX_EPSILON: f64 = 1.0 / 13.0;

/// `(x' − x(1 − 2η) − η)(y − 1/2)`.
pub fn copy_gadget(x: f64, x_prime: f64, y: f64, eta: f64) -> f64 {
    (x_prime - x * (1.0 - 2.0 * eta) - eta) * (y - 0.5)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageOneParams {
    /// Variables of the quadratic instance.
    pub n: usize,
    /// Accuracy demanded of the quadratic instance.
    pub epsilon: f64,
    pub z: f64,
    /// Gadget weight, `10 Z`.
    pub t: f64,
    /// Gadget offset, `2 ε² / Z`.
    pub eta: f64,
    /// Accuracy demanded of the produced minmax instance, `ε² / Z`.
    pub delta_out: f64,
}

impl StageOneParams {
    pub fn new(n: usize, epsilon: f64, z: f64) -> StageOneParams {
        StageOneParams {
            n,
            epsilon,
            z,
            t: 10.0 * z,
            eta: 2.0 * epsilon * epsilon / z,
            delta_out: epsilon * epsilon / z,
        }
    }
}

/// Builds `M(x, x', y) = Q'(x, x') + Σ_i T · copy(x_i, x'_i, y_i)`.
///
/// Min-variables are `x_0..x_{n-1}` followed by `x'_0..x'_{n-1}`; there is
/// one max-variable per original variable.
pub fn reduce_stage1(q_inst: &QuadraticInstance) -> Result<(MinmaxIndInstance, StageOneParams)> {
    let eps = q_inst.epsilon();
    if !(eps > 0.0 && eps <= STAGE_ONE_MAX_EPSILON) {
        return Err(Error::Parameter(format!(
            "stage one needs epsilon in (0, 1/13], got {eps}"
        )));
    }
    let q = q_inst.objective();
    let n = q.n();
    let params = StageOneParams::new(n, eps, q.sum_abs_coeffs());
    let (t, eta) = (params.t, params.eta);

    let mut alpha = q.constant();
    let mut beta = vec![0.0; 2 * n];
    let mut gamma = q.cross().to_vec();
    let zeta = vec![-t * eta; n];
    let mut theta = Matrix::zeros(2 * n, n);
    for i in 0..n {
        let square = q.square()[i];
        if square != 0.0 {
            gamma.push((i, n + i, square));
        }
        beta[i] = q.linear()[i] + t * (1.0 - 2.0 * eta) / 2.0;
        beta[n + i] = -t / 2.0;
        theta[(i, i)] = -t * (1.0 - 2.0 * eta);
        theta[(n + i, i)] = t;
        alpha += t * eta / 2.0;
    }
    let m = MinmaxIndInstance::new(alpha, beta, gamma, zeta, theta, params.delta_out)?;
    Ok((m, params))
}

/// Keeps the `x` block of a stage-one point.
pub fn pullback_stage1(p: &MinmaxPoint, params: &StageOneParams) -> Result<BoxPoint> {
    let n = params.n;
    if p.x.len() != 2 * n || p.y.len() < n {
        return Err(Error::Structure(format!(
            "stage-one point has {} min- and {} max-variables, expected {} and {n}",
            p.x.len(),
            p.y.len(),
            2 * n
        )));
    }
    BoxPoint::new(p.x.as_slice()[..n].to_vec())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTwoParams {
    /// Players per team after padding.
    pub n: usize,
    /// Variable counts of the instance before padding.
    pub n_x: usize,
    pub n_y: usize,
    /// Accuracy demanded of the minmax instance.
    pub epsilon: f64,
    pub z: f64,
    /// Nash accuracy demanded of the game, `ε² / (4Z)`.
    pub delta_out: f64,
    /// `ε / (2Z)`: first-action probabilities within this of 0 or 1 snap.
    pub rounding_threshold: f64,
}

impl StageTwoParams {
    pub fn new(n: usize, n_x: usize, n_y: usize, epsilon: f64, z: f64) -> StageTwoParams {
        StageTwoParams {
            n,
            n_x,
            n_y,
            epsilon,
            z,
            delta_out: epsilon * epsilon / (4.0 * z),
            rounding_threshold: epsilon / (2.0 * z),
        }
    }

    pub fn team_player(&self, i: usize) -> usize {
        i
    }

    pub fn adversary_player(&self, j: usize) -> usize {
        self.n + j
    }
}

/// One two-action player `a_i` per min-variable (players `0..n`) and one
/// `b_j` per max-variable (players `n..2n`), after padding both sides to
/// `n = max(n_x, n_y)`. The first action of each player stands for
/// "variable = 1".
pub fn reduce_stage2(m_inst: &MinmaxIndInstance) -> Result<(PolymatrixGame, TwoTeamStructure, StageTwoParams)> {
    let n = m_inst.n_x().max(m_inst.n_y());
    let m = m_inst.padded(n, n);
    let params = StageTwoParams::new(n, m_inst.n_x(), m_inst.n_y(), m.epsilon(), m.sum_abs_coeffs());
    let nf = n as f64;

    let mut game = PolymatrixGame::new(vec![2; 2 * n])?;
    // Monomial x_i x_j carries γ_ij + γ_ji; the coordination edge encodes it once.
    let mut coordination = std::collections::BTreeMap::<(usize, usize), f64>::new();
    for &(i, j, c) in m.gamma() {
        *coordination.entry((i.min(j), i.max(j))).or_insert(0.0) += c;
    }
    for ((i, j), c) in coordination {
        if c != 0.0 {
            let a = Matrix::from_fn(2, 2, |r, s| if r == 0 && s == 0 { -c } else { 0.0 });
            game.set_edge(i, j, a.clone(), a)?;
        }
    }
    for i in 0..n {
        for j in 0..n {
            let (theta, zeta, beta) = (m.theta()[(i, j)], m.zeta()[j] / nf, m.beta()[i] / nf);
            let b_a = Matrix::from_rows(&[vec![theta + zeta + beta, zeta], vec![beta, 0.0]])?;
            if b_a.is_zero() {
                continue;
            }
            let a_b = b_a.transpose().scaled(-1.0);
            game.set_edge(params.adversary_player(j), params.team_player(i), b_a, a_b)?;
        }
    }
    let structure = TwoTeamStructure::new((0..n).collect(), (n..2 * n).collect(), true);
    Ok((game, structure, params))
}

fn round_probability(p: f64, threshold: f64) -> f64 {
    if p < threshold {
        0.0
    } else if p > 1.0 - threshold {
        1.0
    } else {
        p
    }
}

/// Reads first-action probabilities off the profile and snaps those within
/// the rounding threshold of 0 or 1. Padding variables are dropped.
pub fn pullback_stage2(profile: &StrategyProfile, params: &StageTwoParams) -> Result<MinmaxPoint> {
    let n = params.n;
    if profile.num_players() != 2 * n || profile.strategies().iter().any(|s| s.len() != 2) {
        return Err(Error::Profile(format!("expected {} two-action strategies", 2 * n)));
    }
    let thr = params.rounding_threshold;
    let x = (0..params.n_x).map(|i| round_probability(profile.strategy(params.team_player(i))[0], thr));
    let y = (0..params.n_y).map(|j| round_probability(profile.strategy(params.adversary_player(j))[0], thr));
    MinmaxPoint::new(x.collect(), y.collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullParams {
    pub stage1: StageOneParams,
    pub stage2: StageTwoParams,
}

impl FullParams {
    /// Nash accuracy the game has to be solved to.
    pub fn delta(&self) -> f64 {
        self.stage2.delta_out
    }
}

pub fn reduce_full(q_inst: &QuadraticInstance) -> Result<(PolymatrixGame, TwoTeamStructure, FullParams)> {
    let (m, stage1) = reduce_stage1(q_inst).map_err(|e| e.in_stage("stage 1"))?;
    let (game, structure, stage2) = reduce_stage2(&m).map_err(|e| e.in_stage("stage 2"))?;
    Ok((game, structure, FullParams { stage1, stage2 }))
}

pub fn pullback_full(profile: &StrategyProfile, params: &FullParams) -> Result<BoxPoint> {
    let p = pullback_stage2(profile, &params.stage2)?;
    pullback_stage1(&p, &params.stage1)
}
