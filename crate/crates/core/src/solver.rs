//! Equilibria of two-team games whose adversaries do not interact.
//!
//! Team X minimizes the common utility `U(x, y)`. With independent
//! adversaries the inner maximization splits per adversary and each piece
//! is a tiny LP, so the team problem can be rewritten as
//!
//! ```text
//! min  −Σ_{i<i'} x_i A^{i,i'} x_{i'} + Σ_j γ_j
//! s.t. γ_j ≥ Σ_i e_kᵀ A^{j,i} x_i      for every adversary j and action k
//!      γ_j ≤ M
//!      x_i ∈ Δ(S_i)
//! ```
//!
//! A KKT point of this program, together with the multipliers `μ_j` of the
//! `γ_j` constraints, is a Nash equilibrium: `x` for the team and `μ_j` for
//! adversary `j`. The pipeline is [`build_dual_program`],
//! [`find_kkt_point`], [`extract_multipliers`] and [`reconstruct_nash`];
//! [`solve`] runs all four.

use std::collections::BTreeSet;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{NashReport, PolymatrixGame, StrategyProfile, TwoTeamStructure, ViolationKind};
use crate::instances::Quadratic;
use crate::linalg::{dot, Matrix};
use crate::lp::{solve_lp, LinearProgram};

/// Maximum stationarity residual accepted by [`extract_multipliers`].
pub const MULTIPLIER_TOL: f64 = 1e-6;
/// Distance below which a constraint or a probability counts as active.
pub const ACTIVITY_TOL: f64 = 1e-7;

/// Smoothing temperatures, relative to the payoff scale, visited in order.
const TEMPERATURES: [f64; 6] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6];
/// Support thresholds tried when rounding an iterate to an exact point.
const SUPPORT_THRESHOLDS: [f64; 5] = [1e-3, 1e-4, 1e-5, 1e-6, 1e-2];
const ARMIJO: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct DualMinProgram {
    num_players: usize,
    team: Vec<usize>,
    adversaries: Vec<usize>,
    offsets: Vec<usize>,
    adversary_sizes: Vec<usize>,
    /// `(a, b, A^{team[a], team[b]})` for `a < b`.
    coordination: Vec<(usize, usize, Matrix)>,
    /// Per adversary `j`: `(a, A^{j, team[a]})`.
    cross: Vec<Vec<(usize, Matrix)>>,
    bound_m: f64,
    scale: f64,
}

pub fn build_dual_program(game: &PolymatrixGame, structure: &TwoTeamStructure) -> Result<DualMinProgram> {
    let mut checked = structure.clone();
    checked.independent_adversaries = true;
    let report = game.validate_two_team(&checked)?;
    if report.violations.iter().any(|v| v.kind == ViolationKind::AdversaryInteraction) {
        return Err(Error::Unsupported(
            "adversary-adversary edges (equilibria of such games are only known to lie in PPAD)".into(),
        ));
    }
    if !report.passed() {
        return Err(Error::NotTwoTeam(report.violations.len()));
    }

    let team = structure.team_x.clone();
    let adversaries = structure.team_y.clone();
    let mut offsets = vec![0];
    for &p in &team {
        offsets.push(offsets.last().unwrap() + game.num_strategies(p));
    }
    let adversary_sizes: Vec<usize> = adversaries.iter().map(|&p| game.num_strategies(p)).collect();

    let mut coordination = Vec::new();
    for a in 0..team.len() {
        for b in a + 1..team.len() {
            if let Some(m) = game.payoff(team[a], team[b]) {
                if !m.is_zero() {
                    coordination.push((a, b, m.clone()));
                }
            }
        }
    }
    let cross: Vec<Vec<(usize, Matrix)>> = adversaries
        .iter()
        .map(|&j| {
            (0..team.len())
                .filter_map(|a| game.payoff(j, team[a]).filter(|m| !m.is_zero()).map(|m| (a, m.clone())))
                .collect()
        })
        .collect();

    let mut bound_m: f64 = f64::NEG_INFINITY;
    for (j, edges) in cross.iter().enumerate() {
        for k in 0..adversary_sizes[j] {
            let total: f64 = edges.iter().map(|(_, m)| m.row(k).iter().copied().fold(f64::NEG_INFINITY, f64::max)).sum();
            bound_m = bound_m.max(total);
        }
    }
    let bound_m = if bound_m.is_finite() { bound_m.max(0.0) + 1.0 } else { 1.0 };
    let scale = coordination
        .iter()
        .map(|(_, _, m)| m.max_abs())
        .chain(cross.iter().flatten().map(|(_, m)| m.max_abs()))
        .fold(1.0, f64::max);

    Ok(DualMinProgram {
        num_players: game.num_players(),
        team,
        adversaries,
        offsets,
        adversary_sizes,
        coordination,
        cross,
        bound_m,
        scale,
    })
}

impl DualMinProgram {
    pub fn team(&self) -> &[usize] {
        &self.team
    }

    pub fn adversaries(&self) -> &[usize] {
        &self.adversaries
    }

    /// The cap `M` on every `γ_j`.
    pub fn bound_m(&self) -> f64 {
        self.bound_m
    }

    /// Length of the flattened team strategy vector.
    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn team_sizes(&self) -> Vec<usize> {
        self.offsets.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn adversary_sizes(&self) -> &[usize] {
        &self.adversary_sizes
    }

    /// Largest payoff magnitude on any edge the program uses (at least 1).
    pub fn scale(&self) -> f64 {
        self.scale
    }

    fn block<'a>(&self, x: &'a [f64], a: usize) -> &'a [f64] {
        &x[self.offsets[a]..self.offsets[a + 1]]
    }

    pub fn flatten(&self, x: &StrategyProfile) -> Result<Vec<f64>> {
        let sizes = self.team_sizes();
        if x.num_players() != sizes.len() || x.strategies().iter().zip(&sizes).any(|(s, &m)| s.len() != m) {
            return Err(Error::Profile(format!("team profile must have strategy lengths {sizes:?}")));
        }
        Ok(x.strategies().concat())
    }

    fn unflatten(&self, x: &[f64]) -> Result<StrategyProfile> {
        StrategyProfile::new((0..self.team.len()).map(|a| self.block(x, a).to_vec()).collect())
    }

    /// Left-hand sides `c_{jk}(x) = Σ_i e_kᵀ A^{j,i} x_i` of the `γ` constraints.
    pub fn constraint_values(&self, x: &[f64]) -> Vec<Vec<f64>> {
        self.cross
            .iter()
            .zip(&self.adversary_sizes)
            .map(|(edges, &m)| {
                let mut c = vec![0.0; m];
                for (a, mat) in edges {
                    for (ck, v) in c.iter_mut().zip(mat.mul_vec(self.block(x, *a))) {
                        *ck += v;
                    }
                }
                c
            })
            .collect()
    }

    /// The smallest feasible `γ` for `x`.
    pub fn tight_gamma(&self, x: &[f64]) -> Vec<f64> {
        self.constraint_values(x)
            .iter()
            .map(|c| c.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect()
    }

    fn coordination_value(&self, x: &[f64]) -> f64 {
        -self.coordination.iter().map(|(a, b, m)| m.bilinear(self.block(x, *a), self.block(x, *b))).sum::<f64>()
    }

    pub fn objective(&self, x: &[f64], gamma: &[f64]) -> f64 {
        self.coordination_value(x) + gamma.iter().sum::<f64>()
    }

    /// Objective with `γ` eliminated: `max_y U(x, y)`.
    pub fn eliminated_objective(&self, x: &[f64]) -> f64 {
        self.objective(x, &self.tight_gamma(x))
    }

    /// `(A^{i,j} u_j)` summed over team neighbours: the team part of each
    /// team member's payoff vector, `Σ_{i'} A^{i,i'} x_{i'}`.
    fn coordination_payoffs(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (a, b, m) in &self.coordination {
            let to_a = m.mul_vec(self.block(x, *b));
            let to_b = m.vec_mul(self.block(x, *a));
            for (o, v) in out[self.offsets[*a]..self.offsets[a + 1]].iter_mut().zip(to_a) {
                *o += v;
            }
            for (o, v) in out[self.offsets[*b]..self.offsets[b + 1]].iter_mut().zip(to_b) {
                *o += v;
            }
        }
        out
    }

    /// Payoff of every pure action of every team member against team
    /// strategies `x` and adversary strategies `y`.
    pub fn team_payoffs(&self, x: &[f64], y: &[Vec<f64>]) -> Vec<f64> {
        let mut out = self.coordination_payoffs(x);
        for (edges, yj) in self.cross.iter().zip(y) {
            for (a, m) in edges {
                for (o, v) in out[self.offsets[*a]..self.offsets[a + 1]].iter_mut().zip(m.vec_mul(yj)) {
                    *o -= v;
                }
            }
        }
        out
    }

    /// Value and gradient of the objective with each `max_k` replaced by
    /// `temp · log Σ_k exp(c_{jk} / temp)`; `temp = 0` gives the exact
    /// objective with a lowest-index supporting row.
    fn smoothed(&self, x: &[f64], temp: f64, grad: &mut [f64]) -> f64 {
        let mut value = 0.0;
        grad.fill(0.0);
        for (a, b, m) in &self.coordination {
            let (xa, xb) = (self.block(x, *a), self.block(x, *b));
            let mxb = m.mul_vec(xb);
            value -= dot(xa, &mxb);
            for (g, v) in grad[self.offsets[*a]..self.offsets[a + 1]].iter_mut().zip(mxb) {
                *g -= v;
            }
            for (g, v) in grad[self.offsets[*b]..self.offsets[b + 1]].iter_mut().zip(m.vec_mul(xa)) {
                *g -= v;
            }
        }
        for (edges, c) in self.cross.iter().zip(self.constraint_values(x)) {
            let (weights, lse) = soft_max(&c, temp);
            value += lse;
            for (a, m) in edges {
                for (g, v) in grad[self.offsets[*a]..self.offsets[a + 1]].iter_mut().zip(m.vec_mul(&weights)) {
                    *g += v;
                }
            }
        }
        value
    }

    fn smoothed_value(&self, x: &[f64], temp: f64) -> f64 {
        let mut scratch = vec![0.0; x.len()];
        self.smoothed(x, temp, &mut scratch)
    }

    fn project(&self, x: &mut [f64]) {
        for a in 0..self.team.len() {
            project_simplex(&mut x[self.offsets[a]..self.offsets[a + 1]]);
        }
    }

    /// The program as `min f(z) s.t. G z ≤ h` over `z = (x, γ)`.
    ///
    /// Row order: the `γ` constraints (adversary-major), the caps, `−x ≤ 0`,
    /// then each simplex equality as a pair `Σx ≤ 1`, `−Σx ≤ −1`.
    pub fn as_general_program(&self) -> (Quadratic, Matrix, Vec<f64>) {
        let (n, ny) = (self.dim(), self.adversaries.len());
        let mut linear = vec![0.0; n + ny];
        linear[n..].fill(1.0);
        let mut cross = Vec::new();
        for (a, b, m) in &self.coordination {
            for r in 0..m.rows() {
                for c in 0..m.cols() {
                    if m[(r, c)] != 0.0 {
                        cross.push((self.offsets[*a] + r, self.offsets[*b] + c, -m[(r, c)]));
                    }
                }
            }
        }
        let objective = Quadratic::new(0.0, linear, cross, vec![0.0; n + ny])
            .expect("program coefficients are finite and indices in range");

        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        for (j, edges) in self.cross.iter().enumerate() {
            for k in 0..self.adversary_sizes[j] {
                let mut row = vec![0.0; n + ny];
                for (a, m) in edges {
                    for (l, v) in m.row(k).iter().enumerate() {
                        row[self.offsets[*a] + l] += v;
                    }
                }
                row[n + j] = -1.0;
                rows.push(row);
                rhs.push(0.0);
            }
        }
        for j in 0..ny {
            let mut row = vec![0.0; n + ny];
            row[n + j] = 1.0;
            rows.push(row);
            rhs.push(self.bound_m);
        }
        for v in 0..n {
            let mut row = vec![0.0; n + ny];
            row[v] = -1.0;
            rows.push(row);
            rhs.push(0.0);
        }
        for a in 0..self.team.len() {
            for sign in [1.0, -1.0] {
                let mut row = vec![0.0; n + ny];
                row[self.offsets[a]..self.offsets[a + 1]].fill(sign);
                rows.push(row);
                rhs.push(sign);
            }
        }
        let g = Matrix::from_rows(&rows).unwrap_or_else(|_| Matrix::zeros(0, n + ny));
        (objective, g, rhs)
    }

    /// Multiplier vector for [`as_general_program`](Self::as_general_program) rows.
    pub fn general_multipliers(&self, cert: &MultiplierCertificate) -> Vec<f64> {
        let mut out: Vec<f64> = cert.mu.concat();
        out.extend(std::iter::repeat(0.0).take(self.adversaries.len()));
        out.extend(cert.nu.concat());
        for &l in &cert.lambda {
            out.push(l.max(0.0));
            out.push((-l).max(0.0));
        }
        out
    }
}

/// Soft-max weights and `temp · log Σ exp(c / temp)`, or the lowest-index
/// argmax indicator and `max c` when `temp == 0`.
fn soft_max(c: &[f64], temp: f64) -> (Vec<f64>, f64) {
    let max = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if temp <= 0.0 {
        let k = c.iter().position(|&v| v == max).unwrap_or(0);
        let mut w = vec![0.0; c.len()];
        w[k] = 1.0;
        return (w, max);
    }
    let mut w: Vec<f64> = c.iter().map(|v| ((v - max) / temp).exp()).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    (w, max + temp * total.ln())
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(v: &mut [f64]) {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut shift = 0.0;
    for (k, s) in sorted.iter().enumerate() {
        cumulative += s;
        let candidate = (cumulative - 1.0) / (k + 1) as f64;
        if s - candidate > 0.0 {
            shift = candidate;
        }
    }
    v.iter_mut().for_each(|x| *x = (*x - shift).max(0.0));
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Stationarity residual at which a KKT point is accepted.
    pub tol: f64,
    /// Descent iterations summed over all restarts and temperatures.
    pub max_iterations: usize,
    pub restarts: usize,
    /// Record one [`TraceRow`] per descent iteration.
    pub trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-8, max_iterations: 1_000_000, restarts: 8, trace: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    /// Objective with `γ` eliminated.
    pub objective: f64,
    /// Norm of the projected-gradient step of the smoothed objective.
    pub residual: f64,
}

pub fn write_trace(rows: &[TraceRow], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "iteration,objective,residual")?;
    for r in rows {
        writeln!(out, "{},{:e},{:e}", r.iteration, r.objective, r.residual)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct KktPoint {
    /// Team strategies, in `team_x` order.
    pub x: StrategyProfile,
    /// `γ_j = max_k c_{jk}(x)`.
    pub gamma: Vec<f64>,
    pub objective: f64,
    /// Best stationarity residual any multipliers achieve at `x`.
    pub residual: f64,
    pub converged: bool,
    pub iterations: usize,
    pub trace: Vec<TraceRow>,
}

pub fn find_kkt_point(prog: &DualMinProgram, tol: f64, seed: u64) -> Result<KktPoint> {
    find_kkt_point_with(prog, seed, &SolverOptions { tol, ..SolverOptions::default() })
}

/// Annealed projected-gradient descent from several starts. After every
/// temperature the iterate's supports are guessed and an LP looks for an
/// exact equilibrium on them; the first start point is uniform, the rest
/// are drawn from the seeded generator.
pub fn find_kkt_point_with(prog: &DualMinProgram, seed: u64, opts: &SolverOptions) -> Result<KktPoint> {
    if !(opts.tol > 0.0) {
        return Err(Error::Parameter(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let restarts = opts.restarts.max(1);
    let per_stage = (opts.max_iterations / (restarts * TEMPERATURES.len())).max(1);
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut best: Option<(Vec<f64>, f64, f64)> = None;

    for r in 0..restarts {
        let mut x = start_point(prog, r, &mut rng);
        let mut candidate = None;
        let mut step = 1.0 / prog.scale;
        for &rel in &TEMPERATURES {
            let temp = rel * prog.scale;
            iterations += descend(prog, &mut x, temp, &mut step, per_stage, iterations, opts.trace.then_some(&mut trace));
            if let Some(exact) = polish(prog, &x) {
                let res = fit_multipliers(prog, &exact, &prog.tight_gamma(&exact)).residual;
                if res <= opts.tol {
                    candidate = Some((exact, res));
                    break;
                }
            }
        }
        let (point, residual) = candidate.unwrap_or_else(|| {
            let res = fit_multipliers(prog, &x, &prog.tight_gamma(&x)).residual;
            (x, res)
        });
        let objective = prog.eliminated_objective(&point);
        let better = match &best {
            None => true,
            Some((_, best_obj, best_res)) => {
                let (ok, best_ok) = (residual <= opts.tol, *best_res <= opts.tol);
                (ok && !best_ok) || (ok == best_ok && if ok { objective < best_obj - 1e-12 } else { residual < *best_res })
            }
        };
        if better {
            best = Some((point, objective, residual));
        }
    }

    let (x, objective, residual) = best.expect("at least one restart");
    Ok(KktPoint {
        gamma: prog.tight_gamma(&x),
        x: prog.unflatten(&x)?,
        objective,
        residual,
        converged: residual <= opts.tol,
        iterations,
        trace,
    })
}

fn start_point(prog: &DualMinProgram, restart: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut x = vec![0.0; prog.dim()];
    for a in 0..prog.team.len() {
        let block = &mut x[prog.offsets[a]..prog.offsets[a + 1]];
        if restart == 0 {
            let m = block.len() as f64;
            block.fill(1.0 / m);
        } else {
            block.iter_mut().for_each(|v| *v = -(1.0 - rng.gen::<f64>()).ln());
            let total: f64 = block.iter().sum();
            block.iter_mut().for_each(|v| *v /= total);
        }
    }
    x
}

/// Projected gradient with Armijo backtracking along the projection arc.
/// Returns the number of iterations taken.
fn descend(
    prog: &DualMinProgram,
    x: &mut Vec<f64>,
    temp: f64,
    step: &mut f64,
    cap: usize,
    offset: usize,
    mut trace: Option<&mut Vec<TraceRow>>,
) -> usize {
    let mut grad = vec![0.0; x.len()];
    let stop = 1e-2 * temp;
    for it in 0..cap {
        let f = prog.smoothed(x, temp, &mut grad);
        let mut s = *step;
        let accepted = loop {
            let mut next: Vec<f64> = x.iter().zip(&grad).map(|(v, g)| v - s * g).collect();
            prog.project(&mut next);
            let decrease: f64 = grad.iter().zip(next.iter().zip(x.iter())).map(|(g, (n, v))| g * (n - v)).sum();
            if prog.smoothed_value(&next, temp) <= f + ARMIJO * decrease {
                break Some(next);
            }
            s *= 0.5;
            if s < 1e-16 / prog.scale {
                break None;
            }
        };
        let Some(next) = accepted else { return it };
        let moved = next.iter().zip(x.iter()).map(|(n, v)| (n - v).powi(2)).sum::<f64>().sqrt();
        let mapping = moved / s;
        *x = next;
        *step = (s * 2.0).min(1e6 / prog.scale);
        if let Some(t) = trace.as_deref_mut() {
            t.push(TraceRow { iteration: offset + it, objective: prog.eliminated_objective(x), residual: mapping });
        }
        if mapping <= stop || moved == 0.0 {
            return it + 1;
        }
    }
    cap
}

/// Looks for an exact equilibrium whose supports are guessed from `x`.
///
/// With the team supported on `S_i` and adversary `j` on `T_j`, the LP
/// maximizes `−Σ_{k∈S_i}(v_i − u_{ik}) − Σ_{k∈T_j}(g_j − w_{jk})` subject to
/// `u_{ik} ≤ v_i`, `w_{jk} ≤ g_j` for all actions. The optimum is zero
/// exactly when every supported action is a best response.
fn polish(prog: &DualMinProgram, x: &[f64]) -> Option<Vec<f64>> {
    let c = prog.constraint_values(x);
    let mut tried = BTreeSet::new();
    for &tau in &SUPPORT_THRESHOLDS {
        let team_support: Vec<Vec<usize>> = (0..prog.team.len())
            .map(|a| {
                let block = prog.block(x, a);
                let s: Vec<usize> = (0..block.len()).filter(|&k| block[k] > tau).collect();
                if s.is_empty() {
                    vec![crate::linalg::argmax(block).0]
                } else {
                    s
                }
            })
            .collect();
        let adversary_support: Vec<Vec<usize>> = c
            .iter()
            .map(|cj| {
                let max = cj.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (0..cj.len()).filter(|&k| cj[k] >= max - tau * prog.scale).collect()
            })
            .collect();
        if !tried.insert((team_support.clone(), adversary_support.clone())) {
            continue;
        }
        if let Some(exact) = equilibrium_on_support(prog, &team_support, &adversary_support) {
            return Some(exact);
        }
    }
    None
}

fn equilibrium_on_support(prog: &DualMinProgram, team_support: &[Vec<usize>], adversary_support: &[Vec<usize>]) -> Option<Vec<f64>> {
    let (nt, ny) = (prog.team.len(), prog.adversaries.len());
    let mut x_var = vec![None; prog.dim()];
    let mut count = 0;
    for (a, s) in team_support.iter().enumerate() {
        for &k in s {
            x_var[prog.offsets[a] + k] = Some(count);
            count += 1;
        }
    }
    let mut y_var: Vec<Vec<Option<usize>>> = prog.adversary_sizes.iter().map(|&m| vec![None; m]).collect();
    for (j, s) in adversary_support.iter().enumerate() {
        for &k in s {
            y_var[j][k] = Some(count);
            count += 1;
        }
    }
    let v_var = count;
    let g_var = v_var + nt;
    let total = g_var + ny;

    let mut lp = LinearProgram::new(total);
    for v in v_var..total {
        lp.set_free(v);
    }
    let mut objective = vec![0.0; total];

    // u_{ak} − v_a ≤ 0
    for a in 0..nt {
        for k in 0..prog.offsets[a + 1] - prog.offsets[a] {
            let mut row = vec![0.0; total];
            for (p, q, m) in &prog.coordination {
                if *p == a {
                    for l in 0..m.cols() {
                        if let Some(v) = x_var[prog.offsets[*q] + l] {
                            row[v] += m[(k, l)];
                        }
                    }
                } else if *q == a {
                    for l in 0..m.rows() {
                        if let Some(v) = x_var[prog.offsets[*p] + l] {
                            row[v] += m[(l, k)];
                        }
                    }
                }
            }
            for (j, edges) in prog.cross.iter().enumerate() {
                for (b, m) in edges {
                    if *b == a {
                        for l in 0..m.rows() {
                            if let Some(v) = y_var[j][l] {
                                row[v] -= m[(l, k)];
                            }
                        }
                    }
                }
            }
            row[v_var + a] = -1.0;
            if team_support[a].contains(&k) {
                for (o, r) in objective.iter_mut().zip(&row) {
                    *o += r;
                }
            }
            lp.add_le(row, 0.0);
        }
    }
    // w_{jk} − g_j ≤ 0
    for (j, edges) in prog.cross.iter().enumerate() {
        for k in 0..prog.adversary_sizes[j] {
            let mut row = vec![0.0; total];
            for (a, m) in edges {
                for l in 0..m.cols() {
                    if let Some(v) = x_var[prog.offsets[*a] + l] {
                        row[v] += m[(k, l)];
                    }
                }
            }
            row[g_var + j] = -1.0;
            if adversary_support[j].contains(&k) {
                for (o, r) in objective.iter_mut().zip(&row) {
                    *o += r;
                }
            }
            lp.add_le(row, 0.0);
        }
    }
    for a in 0..nt {
        let mut row = vec![0.0; total];
        for v in x_var[prog.offsets[a]..prog.offsets[a + 1]].iter().flatten() {
            row[*v] = 1.0;
        }
        lp.add_eq(row, 1.0);
    }
    for vars in &y_var {
        let mut row = vec![0.0; total];
        for v in vars.iter().flatten() {
            row[*v] = 1.0;
        }
        lp.add_eq(row, 1.0);
    }
    let lp = lp.maximize(objective);
    let out = solve_lp(&lp);
    if !out.is_optimal() || out.value < -1e-9 * prog.scale {
        return None;
    }
    let mut x = vec![0.0; prog.dim()];
    for (slot, var) in x.iter_mut().zip(&x_var) {
        if let Some(v) = var {
            *slot = out.solution[*v].max(0.0);
        }
    }
    prog.project(&mut x);
    Some(x)
}

/// Multipliers of the program's constraints at a KKT point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiplierCertificate {
    /// `μ_{jk} ≥ 0` for the `γ_j` constraints, one simplex vector per adversary.
    pub mu: Vec<Vec<f64>>,
    /// Free multipliers of the simplex equalities, one per team member.
    pub lambda: Vec<f64>,
    /// `ν_{ik} ≥ 0` for `x_{ik} ≥ 0`, in the team's block layout.
    pub nu: Vec<Vec<f64>>,
    /// Largest stationarity violation, recomputed from the values above.
    pub residual: f64,
}

/// Stationarity of the Lagrangian in each team coordinate:
/// `−Σ_{i'} A^{i,i'} x_{i'} + Σ_j (A^{j,i})ᵀ μ_j + λ_i 1 − ν_i`.
fn stationarity(prog: &DualMinProgram, x: &[f64], cert: &MultiplierCertificate) -> Vec<f64> {
    let mut s: Vec<f64> = prog.coordination_payoffs(x).into_iter().map(|v| -v).collect();
    for (edges, mu) in prog.cross.iter().zip(&cert.mu) {
        for (a, m) in edges {
            for (o, v) in s[prog.offsets[*a]..prog.offsets[a + 1]].iter_mut().zip(m.vec_mul(mu)) {
                *o += v;
            }
        }
    }
    for a in 0..prog.team.len() {
        let range = prog.offsets[a]..prog.offsets[a + 1];
        for (o, nu) in s[range].iter_mut().zip(&cert.nu[a]) {
            *o += cert.lambda[a] - nu;
        }
    }
    s
}

/// Best multipliers at `(x, γ)` whether or not they certify a KKT point.
///
/// `μ_j` may only load rows within [`ACTIVITY_TOL`] of `γ_j` and `ν_{ik}`
/// only coordinates with `x_{ik} ≤` [`ACTIVITY_TOL`]; an LP minimizes the
/// largest stationarity violation `t` subject to `Σ_k μ_{jk} = 1`.
pub fn fit_multipliers(prog: &DualMinProgram, x: &[f64], gamma: &[f64]) -> MultiplierCertificate {
    let c = prog.constraint_values(x);
    let (n, nt) = (prog.dim(), prog.team.len());
    let mut mu_var: Vec<Vec<Option<usize>>> = Vec::new();
    let mut count = 0;
    for (j, cj) in c.iter().enumerate() {
        let mut vars = vec![None; cj.len()];
        for k in 0..cj.len() {
            if cj[k] >= gamma[j] - ACTIVITY_TOL {
                vars[k] = Some(count);
                count += 1;
            }
        }
        mu_var.push(vars);
    }
    let lambda_var = count;
    count += nt;
    let mut nu_var = vec![None; n];
    for v in 0..n {
        if x[v] <= ACTIVITY_TOL {
            nu_var[v] = Some(count);
            count += 1;
        }
    }
    let t_var = count;
    let total = count + 1;

    let mut lp = LinearProgram::new(total);
    for a in 0..nt {
        lp.set_free(lambda_var + a);
    }
    let constant: Vec<f64> = prog.coordination_payoffs(x).into_iter().map(|v| -v).collect();
    let mut linear = vec![vec![0.0; total]; n];
    for (j, edges) in prog.cross.iter().enumerate() {
        for (a, m) in edges {
            for l in 0..m.cols() {
                for k in 0..m.rows() {
                    if let Some(v) = mu_var[j][k] {
                        linear[prog.offsets[*a] + l][v] += m[(k, l)];
                    }
                }
            }
        }
    }
    for a in 0..nt {
        for v in prog.offsets[a]..prog.offsets[a + 1] {
            linear[v][lambda_var + a] = 1.0;
            if let Some(nu) = nu_var[v] {
                linear[v][nu] = -1.0;
            }
        }
    }
    for (row, c0) in linear.into_iter().zip(constant) {
        let mut upper = row.clone();
        upper[t_var] = -1.0;
        lp.add_le(upper, -c0);
        let mut lower: Vec<f64> = row.into_iter().map(|v| -v).collect();
        lower[t_var] = -1.0;
        lp.add_le(lower, c0);
    }
    for vars in &mu_var {
        let mut row = vec![0.0; total];
        for v in vars.iter().flatten() {
            row[*v] = 1.0;
        }
        lp.add_eq(row, 1.0);
    }
    let mut objective = vec![0.0; total];
    objective[t_var] = -1.0;
    let out = solve_lp(&lp.maximize(objective));

    let team_sizes = prog.team_sizes();
    let mut cert = MultiplierCertificate {
        mu: prog.adversary_sizes.iter().map(|&m| vec![0.0; m]).collect(),
        lambda: vec![0.0; nt],
        nu: team_sizes.iter().map(|&m| vec![0.0; m]).collect(),
        residual: f64::INFINITY,
    };
    if !out.is_optimal() {
        return cert;
    }
    for (j, vars) in mu_var.iter().enumerate() {
        for (k, var) in vars.iter().enumerate() {
            if let Some(v) = var {
                cert.mu[j][k] = out.solution[*v].max(0.0);
            }
        }
        let total: f64 = cert.mu[j].iter().sum();
        if total > 0.0 {
            cert.mu[j].iter_mut().for_each(|m| *m /= total);
        }
    }
    for a in 0..nt {
        cert.lambda[a] = out.solution[lambda_var + a];
        for k in 0..team_sizes[a] {
            if let Some(v) = nu_var[prog.offsets[a] + k] {
                cert.nu[a][k] = out.solution[v].max(0.0);
            }
        }
    }
    cert.residual = stationarity(prog, x, &cert).iter().fold(0.0, |m, s| m.max(s.abs()));
    cert
}

/// Multipliers certifying `(x*, γ*)` as a KKT point within [`MULTIPLIER_TOL`].
pub fn extract_multipliers(prog: &DualMinProgram, x: &StrategyProfile, gamma: &[f64]) -> Result<MultiplierCertificate> {
    let flat = prog.flatten(x)?;
    if gamma.len() != prog.adversaries.len() {
        return Err(Error::Structure(format!("expected {} γ values, got {}", prog.adversaries.len(), gamma.len())));
    }
    let cert = fit_multipliers(prog, &flat, gamma);
    if cert.residual > MULTIPLIER_TOL {
        return Err(Error::MultipliersNotFound { residual: cert.residual });
    }
    Ok(cert)
}

/// Team members play `x*`, adversary `j` plays `μ*_j`.
pub fn reconstruct_nash(prog: &DualMinProgram, x: &StrategyProfile, cert: &MultiplierCertificate) -> Result<StrategyProfile> {
    prog.flatten(x)?;
    let mut strategies = vec![Vec::new(); prog.num_players];
    for (a, &p) in prog.team.iter().enumerate() {
        strategies[p] = x.strategy(a).to_vec();
    }
    for (j, &p) in prog.adversaries.iter().enumerate() {
        strategies[p] = cert.mu[j].clone();
    }
    StrategyProfile::new(strategies)
}

/// Regret bound the solver's residual is expected to imply.
pub fn reconstruction_epsilon(tol: f64, prog: &DualMinProgram) -> f64 {
    10.0 * tol * (1.0 + prog.scale)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub profile: StrategyProfile,
    pub report: NashReport,
    pub converged: bool,
    pub kkt: KktPoint,
    pub certificate: MultiplierCertificate,
}

pub fn solve(game: &PolymatrixGame, structure: &TwoTeamStructure, epsilon: f64, seed: u64) -> Result<Solution> {
    solve_with(game, structure, epsilon, seed, &SolverOptions::default())
}

/// The full pipeline. A run that ends above `epsilon` is returned with
/// `converged == false` rather than as an error.
pub fn solve_with(
    game: &PolymatrixGame,
    structure: &TwoTeamStructure,
    epsilon: f64,
    seed: u64,
    opts: &SolverOptions,
) -> Result<Solution> {
    if !(epsilon > 0.0) {
        return Err(Error::Parameter(format!("epsilon must be positive, got {epsilon}")));
    }
    let prog = build_dual_program(game, structure).map_err(|e| e.in_stage("dual program"))?;
    let kkt = find_kkt_point_with(&prog, seed, opts).map_err(|e| e.in_stage("KKT search"))?;
    let certificate = match extract_multipliers(&prog, &kkt.x, &kkt.gamma) {
        Ok(cert) => cert,
        Err(Error::MultipliersNotFound { .. }) => fit_multipliers(&prog, &prog.flatten(&kkt.x)?, &kkt.gamma),
        Err(e) => return Err(e.in_stage("multipliers")),
    };
    let profile = reconstruct_nash(&prog, &kkt.x, &certificate).map_err(|e| e.in_stage("reconstruction"))?;
    let report = game.verify_epsilon_nash(&profile, epsilon);
    Ok(Solution { converged: report.passed, profile, report, kkt, certificate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::verify_general_kkt;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    /// Team player 0 against adversary 1; the adversary wins on a match.
    fn pennies() -> (PolymatrixGame, TwoTeamStructure) {
        let b_a = m(&[&[1.0, -1.0], &[-1.0, 1.0]]);
        let g = PolymatrixGame::new(vec![2, 2]).unwrap().with_edge(1, 0, b_a.clone(), b_a.scaled(-1.0)).unwrap();
        (g, TwoTeamStructure::new(vec![0], vec![1], true))
    }

    #[test]
    fn pennies_program() {
        let (g, s) = pennies();
        let p = build_dual_program(&g, &s).unwrap();
        assert_eq!(p.bound_m(), 2.0);
        assert_eq!(p.constraint_values(&[0.7, 0.3])[0], vec![0.7 - 0.3, 0.3 - 0.7]);
        assert!((p.eliminated_objective(&[0.7, 0.3]) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn pennies_solution() {
        let (g, s) = pennies();
        let sol = solve(&g, &s, 1e-6, 1).unwrap();
        assert!(sol.converged);
        for strat in sol.profile.strategies() {
            assert!((strat[0] - 0.5).abs() < 1e-9);
        }
        assert!(sol.kkt.gamma[0].abs() < 1e-9);
        let prog = build_dual_program(&g, &s).unwrap();
        let cert = extract_multipliers(&prog, &sol.kkt.x, &sol.kkt.gamma).unwrap();
        assert!((cert.mu[0][0] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn adversary_edges_rejected() {
        let mut g = PolymatrixGame::new(vec![2, 2, 2]).unwrap();
        g.set_edge(1, 2, Matrix::from_fn(2, 2, |_, _| 1.0), Matrix::from_fn(2, 2, |_, _| 1.0)).unwrap();
        let s = TwoTeamStructure::new(vec![0], vec![1, 2], false);
        let err = build_dual_program(&g, &s).unwrap_err();
        assert!(err.to_string().contains("unsupported: adversary-adversary edges"));
    }

    #[test]
    fn no_cross_edges() {
        let g = PolymatrixGame::new(vec![3, 2]).unwrap();
        let s = TwoTeamStructure::new(vec![0], vec![1], true);
        let p = build_dual_program(&g, &s).unwrap();
        assert_eq!(p.tight_gamma(&[0.2, 0.3, 0.5]), vec![0.0]);
        let k = find_kkt_point(&p, 1e-8, 3).unwrap();
        assert_eq!(k.residual, 0.0);
        let sol = solve(&g, &s, 1e-12, 3).unwrap();
        assert!(sol.converged);
    }

    #[test]
    fn simplex_projection() {
        let mut v = vec![0.5, 0.5, 0.5];
        project_simplex(&mut v);
        assert!(v.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-15));
        let mut v = vec![2.0, -1.0];
        project_simplex(&mut v);
        assert_eq!(v, vec![1.0, 0.0]);
        let mut v = vec![0.2, 0.8];
        project_simplex(&mut v);
        assert!((v[0] - 0.2).abs() < 1e-15 && (v[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn certificate_passes_general_kkt() {
        let (g, s) = pennies();
        let sol = solve(&g, &s, 1e-6, 5).unwrap();
        let prog = build_dual_program(&g, &s).unwrap();
        let (f, a, b) = prog.as_general_program();
        let mut z = prog.flatten(&sol.kkt.x).unwrap();
        z.extend(&sol.kkt.gamma);
        let report = verify_general_kkt(&f, &a, &b, &z, &prog.general_multipliers(&sol.certificate), 1e-6).unwrap();
        assert!(report.passed, "{report:?}");
    }

    #[test]
    fn trace_is_written() {
        let (g, s) = pennies();
        let prog = build_dual_program(&g, &s).unwrap();
        let opts = SolverOptions { trace: true, restarts: 2, ..SolverOptions::default() };
        let k = find_kkt_point_with(&prog, 9, &opts).unwrap();
        let mut buf = Vec::new();
        write_trace(&k.trace, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("iteration,objective,residual\n"));
    }
}
