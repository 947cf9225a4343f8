//! Brute-force reference computations.
//!
//! Everything here recomputes its answer from raw coefficients and payoff
//! matrices with its own arithmetic. None of it calls the verifiers,
//! reductions, LP solver or equilibrium solver it is used to check.
//! Exhaustive searches carry explicit budgets and fail loudly instead of
//! truncating.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{PolymatrixGame, StrategyProfile, TwoTeamStructure};
use crate::instances::{BoxPoint, MinmaxIndInstance, MinmaxPoint, QuadraticInstance};
use crate::lp::{LinearProgram, LpStatus};

/// Default cap on grid profiles visited by [`grid_min_regret_profile`].
pub const PROFILE_BUDGET: f64 = 1e7;
/// Default cap on search nodes for the grid KKT scans.
pub const NODE_BUDGET: f64 = 1e9;
/// Largest number of constraints plus bounds [`enumerate_lp_vertices`] accepts.
pub const VERTEX_GUARD: usize = 12;

/// A product of simplex grids with step `1/k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub k: u32,
    /// Dimension of each simplex factor.
    pub dims: Vec<usize>,
}

impl GridSpec {
    pub fn new(k: u32, dims: Vec<usize>) -> Result<GridSpec> {
        if k == 0 {
            return Err(Error::Parameter("grid resolution must be 1/k with k ≥ 1".into()));
        }
        if dims.contains(&0) {
            return Err(Error::Parameter("grid factor of dimension 0".into()));
        }
        Ok(GridSpec { k, dims })
    }

    /// The grid over a game's mixed strategy profiles.
    pub fn for_game(game: &PolymatrixGame, k: u32) -> Result<GridSpec> {
        GridSpec::new(k, game.strategy_counts().to_vec())
    }

    pub fn resolution(&self) -> f64 {
        1.0 / self.k as f64
    }

    /// Points in the product grid, as a float (it can be astronomically large).
    pub fn size(&self) -> f64 {
        self.dims.iter().map(|&d| simplex_grid_size(self.k, d)).product()
    }
}

/// `C(k + d − 1, d − 1)`, the number of compositions of `k` into `d` parts.
pub fn simplex_grid_size(k: u32, d: usize) -> f64 {
    let mut out = 1.0;
    for i in 1..d {
        out = out * (k as f64 + i as f64) / i as f64;
    }
    out.round()
}

/// Compositions of `k` into `d` nonnegative parts, lexicographically ascending.
pub fn compositions(k: u32, d: usize) -> Vec<Vec<u32>> {
    fn rec(k: u32, d: usize, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if d == 1 {
            prefix.push(k);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for first in 0..=k {
            prefix.push(first);
            rec(k - first, d - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if d > 0 {
        rec(k, d, &mut Vec::with_capacity(d), &mut out);
    }
    out
}

/// Grid points of the `d`-simplex with step `1/k`, in [`compositions`] order.
pub fn simplex_grid(k: u32, d: usize) -> Vec<Vec<f64>> {
    compositions(k, d).into_iter().map(|c| c.into_iter().map(|v| v as f64 / k as f64).collect()).collect()
}

fn check_budget(required: f64, budget: f64) -> Result<()> {
    if required > budget {
        Err(Error::Budget { required, budget })
    } else {
        Ok(())
    }
}

/// Per-player grid strategies plus, for every ordered neighbour pair
/// `(q, p)`, the payoff vector `A^{q,p} s` of each grid strategy `s` of `p`.
struct ProfileGrid {
    points: Vec<Vec<Vec<f64>>>,
    /// `incoming[p]`: `(q, table)` with `table[s] = A^{q,p} points[p][s]`.
    incoming: Vec<Vec<(usize, Vec<Vec<f64>>)>>,
    counts: Vec<usize>,
    offsets: Vec<usize>,
}

impl ProfileGrid {
    fn new(game: &PolymatrixGame, k: u32) -> ProfileGrid {
        let counts = game.strategy_counts().to_vec();
        let points: Vec<Vec<Vec<f64>>> = counts.iter().map(|&d| simplex_grid(k, d)).collect();
        let mut incoming = vec![Vec::new(); counts.len()];
        for p in 0..counts.len() {
            for q in 0..counts.len() {
                if let Some(a) = game.payoff(q, p).filter(|_| q != p) {
                    let table = points[p]
                        .iter()
                        .map(|s| (0..a.rows()).map(|r| (0..a.cols()).map(|c| a[(r, c)] * s[c]).sum()).collect())
                        .collect();
                    incoming[p].push((q, table));
                }
            }
        }
        let mut offsets = vec![0];
        for &c in &counts {
            offsets.push(offsets.last().unwrap() + c);
        }
        ProfileGrid { points, incoming, counts, offsets }
    }

    /// Depth-first walk over all grid profiles. `visit` gets the chosen
    /// grid indices and every player's regret.
    fn walk(&self, mut visit: impl FnMut(&[usize], &[f64])) {
        let players = self.counts.len();
        let width = *self.offsets.last().unwrap();
        let mut sums = vec![vec![0.0; width]; players + 1];
        let mut choice = vec![0; players];
        let mut regrets = vec![0.0; players];
        self.walk_rec(0, &mut sums, &mut choice, &mut regrets, &mut visit);
    }

    fn walk_rec(
        &self,
        depth: usize,
        sums: &mut Vec<Vec<f64>>,
        choice: &mut Vec<usize>,
        regrets: &mut Vec<f64>,
        visit: &mut impl FnMut(&[usize], &[f64]),
    ) {
        if depth == self.counts.len() {
            let payoffs = &sums[depth];
            for q in 0..self.counts.len() {
                let u = &payoffs[self.offsets[q]..self.offsets[q + 1]];
                let s = &self.points[q][choice[q]];
                let best = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let got: f64 = u.iter().zip(s).map(|(a, b)| a * b).sum();
                regrets[q] = best - got;
            }
            visit(choice, regrets);
            return;
        }
        for s in 0..self.points[depth].len() {
            let (head, tail) = sums.split_at_mut(depth + 1);
            let next = &mut tail[0];
            next.copy_from_slice(&head[depth]);
            for (q, table) in &self.incoming[depth] {
                for (o, v) in next[self.offsets[*q]..self.offsets[q + 1]].iter_mut().zip(&table[s]) {
                    *o += v;
                }
            }
            choice[depth] = s;
            self.walk_rec(depth + 1, sums, choice, regrets, visit);
        }
    }

    fn profile(&self, choice: &[usize]) -> StrategyProfile {
        StrategyProfile::new(choice.iter().enumerate().map(|(p, &s)| self.points[p][s].clone()).collect())
            .expect("grid points lie on the simplex")
    }
}

/// The grid profile with the smallest maximum regret (first one on ties).
pub fn grid_min_regret_profile(game: &PolymatrixGame, grid: &GridSpec) -> Result<(StrategyProfile, f64)> {
    grid_min_regret_profile_with_budget(game, grid, PROFILE_BUDGET)
}

pub fn grid_min_regret_profile_with_budget(
    game: &PolymatrixGame,
    grid: &GridSpec,
    budget: f64,
) -> Result<(StrategyProfile, f64)> {
    check_grid(game, grid)?;
    check_budget(grid.size(), budget)?;
    let pg = ProfileGrid::new(game, grid.k);
    let mut best = (vec![0; game.num_players()], f64::INFINITY);
    pg.walk(|choice, regrets| {
        let worst = regrets.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if worst < best.1 {
            best = (choice.to_vec(), worst);
        }
    });
    Ok((pg.profile(&best.0), best.1))
}

/// Calls `visit` with every grid profile whose maximum regret is at most
/// `delta`, and its per-player regrets, in enumeration order. Returns the
/// number of profiles enumerated.
pub fn for_each_grid_nash(
    game: &PolymatrixGame,
    grid: &GridSpec,
    delta: f64,
    budget: f64,
    mut visit: impl FnMut(&StrategyProfile, &[f64]),
) -> Result<u64> {
    check_grid(game, grid)?;
    check_budget(grid.size(), budget)?;
    let pg = ProfileGrid::new(game, grid.k);
    let mut seen = 0;
    pg.walk(|choice, regrets| {
        seen += 1;
        if regrets.iter().all(|&r| r <= delta) {
            visit(&pg.profile(choice), regrets);
        }
    });
    Ok(seen)
}

fn check_grid(game: &PolymatrixGame, grid: &GridSpec) -> Result<()> {
    if grid.dims != game.strategy_counts() {
        return Err(Error::Structure(format!(
            "grid dims {:?} do not match strategy counts {:?}",
            grid.dims,
            game.strategy_counts()
        )));
    }
    Ok(())
}

/// `min_x max_y U(x, y)` over team-X grid profiles, for games whose
/// adversaries share no edges (so the inner maximum splits per adversary
/// and is attained at pure actions). Returns the value and the minimizing
/// team profile, in `team_x` order.
pub fn grid_team_minimax(
    game: &PolymatrixGame,
    structure: &TwoTeamStructure,
    k: u32,
    budget: f64,
) -> Result<(f64, StrategyProfile)> {
    let team = &structure.team_x;
    let adversaries = &structure.team_y;
    for (a, &j) in adversaries.iter().enumerate() {
        for &j2 in &adversaries[a + 1..] {
            if game.payoff(j, j2).is_some_and(|m| m.max_abs() > 0.0) || game.payoff(j2, j).is_some_and(|m| m.max_abs() > 0.0) {
                return Err(Error::Unsupported("grid minimax needs adversaries without mutual edges".into()));
            }
        }
    }
    let required: f64 = team.iter().map(|&p| simplex_grid_size(k, game.num_strategies(p))).product();
    check_budget(required, budget)?;

    let points: Vec<Vec<Vec<f64>>> = team.iter().map(|&p| simplex_grid(k, game.num_strategies(p))).collect();
    let mut adv_offsets = vec![0];
    for &j in adversaries {
        adv_offsets.push(adv_offsets.last().unwrap() + game.num_strategies(j));
    }
    let width = *adv_offsets.last().unwrap();
    // cross[d][s][·]: −(s A^{i,j}) for every adversary j, concatenated.
    let cross: Vec<Vec<Vec<f64>>> = team
        .iter()
        .enumerate()
        .map(|(d, &i)| {
            points[d]
                .iter()
                .map(|s| {
                    let mut out = vec![0.0; width];
                    for (b, &j) in adversaries.iter().enumerate() {
                        if let Some(a) = game.payoff(i, j) {
                            for c in 0..a.cols() {
                                out[adv_offsets[b] + c] = -(0..a.rows()).map(|r| s[r] * a[(r, c)]).sum::<f64>();
                            }
                        }
                    }
                    out
                })
                .collect()
        })
        .collect();

    struct Walk<'a> {
        game: &'a PolymatrixGame,
        team: &'a [usize],
        points: &'a [Vec<Vec<f64>>],
        cross: &'a [Vec<Vec<f64>>],
        adv_offsets: &'a [usize],
        choice: Vec<usize>,
        sums: Vec<Vec<f64>>,
        best: (f64, Vec<usize>),
    }

    impl Walk<'_> {
        fn rec(&mut self, depth: usize, coordination: f64) {
            if depth == self.team.len() {
                let s = &self.sums[depth];
                let inner: f64 = self
                    .adv_offsets
                    .windows(2)
                    .map(|w| s[w[0]..w[1]].iter().copied().fold(f64::NEG_INFINITY, f64::max))
                    .sum();
                let value = coordination + inner;
                if value < self.best.0 {
                    self.best = (value, self.choice.clone());
                }
                return;
            }
            let me = self.team[depth];
            let m = self.points[depth][0].len();
            // w[l] = Σ over earlier team members of the coefficient on my action l.
            let mut w = vec![0.0; m];
            for e in 0..depth {
                let other = self.team[e];
                let xe = &self.points[e][self.choice[e]];
                if other < me {
                    if let Some(a) = self.game.payoff(other, me) {
                        for (l, wl) in w.iter_mut().enumerate() {
                            *wl += (0..a.rows()).map(|r| xe[r] * a[(r, l)]).sum::<f64>();
                        }
                    }
                } else if let Some(a) = self.game.payoff(me, other) {
                    for (l, wl) in w.iter_mut().enumerate() {
                        *wl += (0..a.cols()).map(|c| a[(l, c)] * xe[c]).sum::<f64>();
                    }
                }
            }
            for s in 0..self.points[depth].len() {
                let x = &self.points[depth][s];
                let added: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum();
                let (head, tail) = self.sums.split_at_mut(depth + 1);
                for ((o, base), c) in tail[0].iter_mut().zip(&head[depth]).zip(&self.cross[depth][s]) {
                    *o = base + c;
                }
                self.choice[depth] = s;
                self.rec(depth + 1, coordination - added);
            }
        }
    }

    let mut walk = Walk {
        game,
        team,
        points: &points,
        cross: &cross,
        adv_offsets: &adv_offsets,
        choice: vec![0; team.len()],
        sums: vec![vec![0.0; width]; team.len() + 1],
        best: (f64::INFINITY, vec![0; team.len()]),
    };
    walk.rec(0, 0.0);
    let (value, choice) = walk.best;
    let profile = StrategyProfile::new(choice.iter().enumerate().map(|(d, &s)| points[d][s].clone()).collect())?;
    Ok((value, profile))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Min,
    Max,
}

/// Affine partial derivatives `∂f/∂z_v = c_v + Σ_u a_{vu} z_u`.
struct AffineGradient {
    constant: Vec<f64>,
    terms: Vec<Vec<(usize, f64)>>,
    sides: Vec<Side>,
}

impl AffineGradient {
    fn of_quadratic(inst: &QuadraticInstance) -> AffineGradient {
        let q = inst.objective();
        let n = q.n();
        let mut terms = vec![Vec::new(); n];
        for (i, &s) in q.square().iter().enumerate() {
            if s != 0.0 {
                terms[i].push((i, 2.0 * s));
            }
        }
        for &(i, j, c) in q.cross() {
            terms[i].push((j, c));
            terms[j].push((i, c));
        }
        AffineGradient { constant: q.linear().to_vec(), terms, sides: vec![Side::Min; n] }
    }

    /// Variables are `x` then `y`.
    fn of_minmax(inst: &MinmaxIndInstance) -> AffineGradient {
        let (nx, ny) = (inst.n_x(), inst.n_y());
        let mut terms = vec![Vec::new(); nx + ny];
        for &(i, j, c) in inst.gamma() {
            terms[i].push((j, c));
            terms[j].push((i, c));
        }
        let theta = inst.theta();
        for i in 0..nx {
            for j in 0..ny {
                let c = theta[(i, j)];
                if c != 0.0 {
                    terms[i].push((nx + j, c));
                    terms[nx + j].push((i, c));
                }
            }
        }
        let mut constant = inst.beta().to_vec();
        constant.extend_from_slice(inst.zeta());
        let mut sides = vec![Side::Min; nx];
        sides.extend(std::iter::repeat(Side::Max).take(ny));
        AffineGradient { constant, terms, sides }
    }

    fn partial(&self, v: usize, z: &[f64]) -> f64 {
        self.terms[v].iter().fold(self.constant[v], |acc, &(u, a)| acc + a * z[u])
    }

    /// The approximate KKT condition of coordinate `v` at `z`.
    fn holds(&self, v: usize, z: &[f64], epsilon: f64) -> bool {
        let g = self.partial(v, z);
        // Direction in which the coordinate's owner would like to move.
        let desire = match self.sides[v] {
            Side::Min => -g,
            Side::Max => g,
        };
        if z[v] == 0.0 {
            desire <= epsilon
        } else if z[v] == 1.0 {
            -desire <= epsilon
        } else {
            g.abs() <= epsilon
        }
    }

    /// Every grid point of `[0,1]^n` at which all coordinates satisfy the
    /// condition, by a depth-first search that checks each coordinate as
    /// soon as everything its partial derivative depends on is assigned.
    fn scan(&self, k: u32, epsilon: f64, budget: f64) -> Result<Vec<Vec<f64>>> {
        let n = self.sides.len();
        let deps: Vec<Vec<usize>> = (0..n)
            .map(|v| {
                let mut d: Vec<usize> = self.terms[v].iter().map(|&(u, _)| u).chain([v]).collect();
                d.sort_unstable();
                d.dedup();
                d
            })
            .collect();

        let mut order = Vec::with_capacity(n);
        let mut placed = vec![false; n];
        while order.len() < n {
            let score = |u: usize| -> f64 {
                deps.iter()
                    .filter(|d| d.contains(&u))
                    .map(|d| 1.0 / d.iter().filter(|&&w| !placed[w]).count() as f64)
                    .sum()
            };
            // Finish the dependency set nearest completion first, so checks
            // fire as shallow in the search as possible.
            let nearest = |u: usize| -> usize {
                deps.iter()
                    .filter(|d| d.contains(&u))
                    .map(|d| d.iter().filter(|&&w| !placed[w]).count())
                    .min()
                    .unwrap_or(usize::MAX)
            };
            let next = (0..n)
                .filter(|&u| !placed[u])
                .fold(None, |best: Option<(usize, usize, f64)>, u| {
                    let (r, s) = (nearest(u), score(u));
                    match best {
                        Some((_, br, bs)) if br < r || (br == r && bs >= s) => best,
                        _ => Some((u, r, s)),
                    }
                })
                .unwrap()
                .0;
            placed[next] = true;
            order.push(next);
        }
        let position: Vec<usize> = {
            let mut p = vec![0; n];
            for (d, &v) in order.iter().enumerate() {
                p[v] = d;
            }
            p
        };
        let mut checks = vec![Vec::new(); n];
        for v in 0..n {
            let ready = deps[v].iter().map(|&u| position[u]).max().unwrap();
            checks[ready].push(v);
        }

        struct Scan<'a> {
            grad: &'a AffineGradient,
            order: &'a [usize],
            checks: &'a [Vec<usize>],
            k: u32,
            epsilon: f64,
            z: Vec<f64>,
            nodes: f64,
            budget: f64,
            found: Vec<Vec<f64>>,
        }

        impl Scan<'_> {
            fn rec(&mut self, depth: usize) -> Result<()> {
                if depth == self.order.len() {
                    self.found.push(self.z.clone());
                    return Ok(());
                }
                let v = self.order[depth];
                for step in 0..=self.k {
                    self.nodes += 1.0;
                    if self.nodes > self.budget {
                        return Err(Error::Budget { required: self.nodes, budget: self.budget });
                    }
                    self.z[v] = step as f64 / self.k as f64;
                    if self.checks[depth].iter().all(|&c| self.grad.holds(c, &self.z, self.epsilon)) {
                        self.rec(depth + 1)?;
                    }
                }
                self.z[v] = 0.0;
                Ok(())
            }
        }

        let mut scan = Scan {
            grad: self,
            order: &order,
            checks: &checks,
            k,
            epsilon,
            z: vec![0.0; n],
            nodes: 0.0,
            budget,
            found: Vec::new(),
        };
        if n == 0 {
            return Ok(vec![Vec::new()]);
        }
        scan.rec(0)?;
        let mut found = scan.found;
        found.sort_by(|a, b| a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
        Ok(found)
    }
}

/// All points of the `1/k` box grid that are `epsilon`-KKT points of `inst`,
/// in lexicographic order.
pub fn grid_min_kkt_points(inst: &QuadraticInstance, k: u32, epsilon: f64, budget: f64) -> Result<Vec<BoxPoint>> {
    if k == 0 {
        return Err(Error::Parameter("grid resolution must be 1/k with k ≥ 1".into()));
    }
    AffineGradient::of_quadratic(inst).scan(k, epsilon, budget)?.into_iter().map(BoxPoint::new).collect()
}

/// All points of the `1/k` box grid over `(x, y)` that are `epsilon`-KKT
/// points of the minmax instance, in lexicographic order.
pub fn grid_minmax_kkt_points(inst: &MinmaxIndInstance, k: u32, epsilon: f64, budget: f64) -> Result<Vec<MinmaxPoint>> {
    if k == 0 {
        return Err(Error::Parameter("grid resolution must be 1/k with k ≥ 1".into()));
    }
    let nx = inst.n_x();
    AffineGradient::of_minmax(inst)
        .scan(k, epsilon, budget)?
        .into_iter()
        .map(|z| MinmaxPoint::new(z[..nx].to_vec(), z[nx..].to_vec()))
        .collect()
}

/// Finite-difference gradient on the unit box: central differences where
/// `x ± h` stays inside, second-order one-sided differences otherwise.
pub fn finite_diff_grad(f: impl Fn(&[f64]) -> f64, point: &[f64], h: f64) -> Vec<f64> {
    let mut z = point.to_vec();
    let mut eval = |i: usize, v: f64| {
        let old = z[i];
        z[i] = v;
        let out = f(&z);
        z[i] = old;
        out
    };
    (0..point.len())
        .map(|i| {
            let x = point[i];
            if x - h >= 0.0 && x + h <= 1.0 {
                (eval(i, x + h) - eval(i, x - h)) / (2.0 * h)
            } else if x - h < 0.0 {
                (-3.0 * eval(i, x) + 4.0 * eval(i, x + h) - eval(i, x + 2.0 * h)) / (2.0 * h)
            } else {
                (3.0 * eval(i, x) - 4.0 * eval(i, x - h) + eval(i, x - 2.0 * h)) / (2.0 * h)
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct VertexEnumeration {
    /// `Optimal`, `Infeasible` or `Unbounded`.
    pub status: LpStatus,
    pub best: Option<Vec<f64>>,
    pub value: f64,
    pub feasible_vertices: usize,
}

/// Solves a tiny LP by trying every basis: each choice of `n` linearly
/// independent constraints (equalities always included) made tight.
///
/// Unboundedness is decided on the recession cone: every extreme ray is
/// cut out by `n − 1` independent homogeneous constraints. The feasible
/// region must be pointed (constraint rank `n`), otherwise the LP is
/// rejected.
pub fn enumerate_lp_vertices(lp: &LinearProgram) -> Result<VertexEnumeration> {
    let n = lp.num_vars();
    let mut rows: Vec<(Vec<f64>, f64, bool)> = Vec::new();
    for (row, rhs) in lp.inequalities() {
        rows.push((row.to_vec(), rhs, false));
    }
    for (row, rhs) in lp.equalities() {
        rows.push((row.to_vec(), rhs, true));
    }
    for v in 0..n {
        let (lower, upper) = lp.bounds(v);
        let unit = |s: f64| {
            let mut r = vec![0.0; n];
            r[v] = s;
            r
        };
        if let Some(l) = lower {
            rows.push((unit(-1.0), -l, false));
        }
        if let Some(u) = upper {
            rows.push((unit(1.0), u, false));
        }
    }
    if rows.len() > VERTEX_GUARD {
        return Err(Error::Budget { required: rows.len() as f64, budget: VERTEX_GUARD as f64 });
    }
    let all: Vec<Vec<f64>> = rows.iter().map(|r| r.0.clone()).collect();
    if rank(&all, n) < n {
        return Err(Error::Unsupported("vertex enumeration needs a pointed feasible region".into()));
    }

    let scale = rows.iter().flat_map(|r| r.0.iter().chain([&r.1])).fold(1.0_f64, |m, v| m.max(v.abs()));
    let tol = 1e-9 * scale;
    let feasible = |z: &[f64]| {
        rows.iter().all(|(r, b, eq)| {
            let lhs: f64 = r.iter().zip(z).map(|(a, x)| a * x).sum();
            if *eq {
                (lhs - b).abs() <= tol
            } else {
                lhs <= b + tol
            }
        })
    };
    let c = lp.objective();
    let value_of = |z: &[f64]| c.iter().zip(z).map(|(a, x)| a * x).sum::<f64>();

    let eq_idx: Vec<usize> = (0..rows.len()).filter(|&r| rows[r].2).collect();
    let ineq_idx: Vec<usize> = (0..rows.len()).filter(|&r| !rows[r].2).collect();
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut feasible_vertices = 0;
    if eq_idx.len() <= n {
        for extra in subsets(ineq_idx.len(), n - eq_idx.len()) {
            let chosen: Vec<usize> = eq_idx.iter().copied().chain(extra.iter().map(|&e| ineq_idx[e])).collect();
            let a: Vec<Vec<f64>> = chosen.iter().map(|&r| rows[r].0.clone()).collect();
            let b: Vec<f64> = chosen.iter().map(|&r| rows[r].1).collect();
            let Some(z) = solve_square(a, b) else { continue };
            if !feasible(&z) {
                continue;
            }
            feasible_vertices += 1;
            let v = value_of(&z);
            if best.as_ref().map_or(true, |(_, bv)| v > *bv + 1e-12 * scale) {
                best = Some((z, v));
            }
        }
    }
    let Some((z, value)) = best else {
        return Ok(VertexEnumeration { status: LpStatus::Infeasible, best: None, value: f64::NAN, feasible_vertices: 0 });
    };

    for chosen in subsets(rows.len(), n.saturating_sub(1)) {
        let a: Vec<Vec<f64>> = chosen.iter().map(|&r| rows[r].0.clone()).collect();
        let Some(d) = null_direction(&a, n) else { continue };
        for sign in [1.0, -1.0] {
            let d: Vec<f64> = d.iter().map(|v| v * sign).collect();
            let recedes = rows.iter().all(|(r, _, eq)| {
                let rd: f64 = r.iter().zip(&d).map(|(a, x)| a * x).sum();
                if *eq {
                    rd.abs() <= 1e-9
                } else {
                    rd <= 1e-9
                }
            });
            if recedes && value_of(&d) > 1e-9 {
                return Ok(VertexEnumeration { status: LpStatus::Unbounded, best: None, value: f64::INFINITY, feasible_vertices });
            }
        }
    }
    Ok(VertexEnumeration { status: LpStatus::Optimal, best: Some(z), value, feasible_vertices })
}

/// All `r`-element subsets of `0..m` in lexicographic order.
fn subsets(m: usize, r: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, m: usize, r: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == r {
            out.push(cur.clone());
            return;
        }
        for i in start..m {
            cur.push(i);
            rec(i + 1, m, r, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if r <= m {
        rec(0, m, r, &mut Vec::new(), &mut out);
    }
    out
}

/// Row echelon form by Gaussian elimination with partial pivoting; returns
/// the reduced rows and the pivot columns.
fn echelon(mut a: Vec<Vec<f64>>, cols: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == a.len() {
            break;
        }
        let p = (r..a.len()).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        if a[p][c].abs() < 1e-9 {
            continue;
        }
        a.swap(r, p);
        let pivot = a[r][c];
        a[r].iter_mut().for_each(|v| *v /= pivot);
        for i in 0..a.len() {
            if i != r && a[i][c] != 0.0 {
                let f = a[i][c];
                let (src, dst) = if i < r {
                    let (lo, hi) = a.split_at_mut(r);
                    (&hi[0], &mut lo[i])
                } else {
                    let (lo, hi) = a.split_at_mut(i);
                    (&lo[r], &mut hi[0])
                };
                dst.iter_mut().zip(src.iter()).for_each(|(d, s)| *d -= f * s);
            }
        }
        pivots.push(c);
        r += 1;
    }
    (a, pivots)
}

fn rank(a: &[Vec<f64>], cols: usize) -> usize {
    echelon(a.to_vec(), cols).1.len()
}

fn solve_square(a: Vec<Vec<f64>>, b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let augmented: Vec<Vec<f64>> = a.into_iter().zip(b).map(|(mut r, bi)| {
        r.push(bi);
        r
    }).collect();
    let (reduced, pivots) = echelon(augmented, n);
    if pivots.len() < n {
        return None;
    }
    Some((0..n).map(|i| reduced[i][n]).collect())
}

/// A nonzero solution of `A d = 0` when `A` has rank exactly `n − 1`.
fn null_direction(a: &[Vec<f64>], n: usize) -> Option<Vec<f64>> {
    if n == 0 {
        return None;
    }
    let (reduced, pivots) = echelon(a.to_vec(), n);
    if pivots.len() != n - 1 {
        return None;
    }
    let free = (0..n).find(|c| !pivots.contains(c))?;
    let mut d = vec![0.0; n];
    d[free] = 1.0;
    for (r, &p) in pivots.iter().enumerate() {
        d[p] = -reduced[r][free];
    }
    Some(d)
}
