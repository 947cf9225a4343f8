//! Box-constrained objectives and their approximate KKT verifiers.
//!
//! [`QuadraticInstance`] is a quadratic `Q` over `[0,1]^n` to be minimized;
//! [`MinmaxIndInstance`] is a degree-two multilinear `M(x, y)` without
//! `y_i y_j` monomials, minimized over `x` and maximized over `y`.
//! Off-diagonal coefficients are kept per ordered pair: `(i, j, c)` is the
//! monomial `c·x_i x_j`, and `(j, i, c')` is a separate monomial.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};

/// A quadratic polynomial
/// `q + Σ q_i x_i + Σ_{i≠j} q_ij x_i x_j + Σ q_ii x_i²`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadratic {
    constant: f64,
    linear: Vec<f64>,
    cross: Vec<(usize, usize, f64)>,
    square: Vec<f64>,
}

impl Quadratic {
    pub fn new(
        constant: f64,
        linear: Vec<f64>,
        cross: Vec<(usize, usize, f64)>,
        square: Vec<f64>,
    ) -> Result<Quadratic> {
        let n = linear.len();
        if square.len() != n {
            return Err(Error::Instance(format!("square has {} entries, linear has {n}", square.len())));
        }
        for &(i, j, c) in &cross {
            if i >= n || j >= n {
                return Err(Error::Instance(format!("cross term ({i},{j}) outside 0..{n}")));
            }
            if i == j {
                return Err(Error::Instance(format!("cross term ({i},{i}) belongs in square")));
            }
            if !c.is_finite() {
                return Err(Error::Instance(format!("cross term ({i},{j}) is not finite")));
            }
        }
        if !constant.is_finite() || linear.iter().chain(&square).any(|c| !c.is_finite()) {
            return Err(Error::Instance("non-finite coefficient".into()));
        }
        Ok(Quadratic { constant, linear, cross, square })
    }

    pub fn zero(n: usize) -> Quadratic {
        Quadratic { constant: 0.0, linear: vec![0.0; n], cross: Vec::new(), square: vec![0.0; n] }
    }

    pub fn n(&self) -> usize {
        self.linear.len()
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn linear(&self) -> &[f64] {
        &self.linear
    }

    pub fn cross(&self) -> &[(usize, usize, f64)] {
        &self.cross
    }

    pub fn square(&self) -> &[f64] {
        &self.square
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.n());
        let mut v = self.constant + dot(&self.linear, x);
        for &(i, j, c) in &self.cross {
            v += c * x[i] * x[j];
        }
        for (q, xi) in self.square.iter().zip(x) {
            v += q * xi * xi;
        }
        v
    }

    /// `∂Q/∂x_i = q_i + Σ_{j≠i} (q_ij + q_ji) x_j + 2 q_ii x_i`.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g: Vec<f64> =
            self.linear.iter().zip(&self.square).zip(x).map(|((l, s), xi)| l + 2.0 * s * xi).collect();
        for &(i, j, c) in &self.cross {
            g[i] += c * x[j];
            g[j] += c * x[i];
        }
        g
    }

    pub fn partial(&self, i: usize, x: &[f64]) -> f64 {
        let mut g = self.linear[i] + 2.0 * self.square[i] * x[i];
        for &(a, b, c) in &self.cross {
            if a == i {
                g += c * x[b];
            }
            if b == i {
                g += c * x[a];
            }
        }
        g
    }

    /// `max(1, Σ |coefficients|)`, constant included.
    pub fn sum_abs_coeffs(&self) -> f64 {
        let total = self.constant.abs()
            + self.linear.iter().map(|c| c.abs()).sum::<f64>()
            + self.cross.iter().map(|c| c.2.abs()).sum::<f64>()
            + self.square.iter().map(|c| c.abs()).sum::<f64>();
        total.max(1.0)
    }
}

/// A quadratic to be minimized over `[0,1]^n`, with its target accuracy.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticInstance {
    objective: Quadratic,
    epsilon: f64,
}

impl QuadraticInstance {
    pub fn new(objective: Quadratic, epsilon: f64) -> Result<QuadraticInstance> {
        check_epsilon(epsilon)?;
        if objective.n() == 0 {
            return Err(Error::Instance("an instance needs at least one variable".into()));
        }
        Ok(QuadraticInstance { objective, epsilon })
    }

    pub fn zero(n: usize, epsilon: f64) -> Result<QuadraticInstance> {
        QuadraticInstance::new(Quadratic::zero(n), epsilon)
    }

    pub fn objective(&self) -> &Quadratic {
        &self.objective
    }

    pub fn n(&self) -> usize {
        self.objective.n()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn eval(&self, x: &BoxPoint) -> f64 {
        assert_eq!(x.len(), self.n(), "point dimension");
        self.objective.value(x.as_slice())
    }

    pub fn grad(&self, x: &BoxPoint) -> Vec<f64> {
        assert_eq!(x.len(), self.n(), "point dimension");
        self.objective.gradient(x.as_slice())
    }

    pub fn sum_abs_coeffs(&self) -> f64 {
        self.objective.sum_abs_coeffs()
    }

    pub fn verify_min_kkt(&self, x: &BoxPoint, epsilon: f64) -> KktReport {
        let g = self.grad(x);
        KktReport::build(x.as_slice().iter().zip(&g).map(|(&v, &gi)| (Role::Min, v, gi)), epsilon)
    }
}

/// `M(x,y) = α + Σ β_i x_i + Σ_{i≠j} γ_ij x_i x_j + Σ ζ_j y_j + Σ θ_ij x_i y_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct MinmaxIndInstance {
    alpha: f64,
    beta: Vec<f64>,
    gamma: Vec<(usize, usize, f64)>,
    zeta: Vec<f64>,
    theta: Matrix,
    epsilon: f64,
}

impl MinmaxIndInstance {
    pub fn new(
        alpha: f64,
        beta: Vec<f64>,
        gamma: Vec<(usize, usize, f64)>,
        zeta: Vec<f64>,
        theta: Matrix,
        epsilon: f64,
    ) -> Result<MinmaxIndInstance> {
        check_epsilon(epsilon)?;
        let (n_x, n_y) = (beta.len(), zeta.len());
        if n_x == 0 {
            return Err(Error::Instance("an instance needs at least one min-variable".into()));
        }
        if theta.shape() != (n_x, n_y) {
            return Err(Error::Instance(format!(
                "theta is {}x{}, expected {n_x}x{n_y}",
                theta.rows(),
                theta.cols()
            )));
        }
        for &(i, j, c) in &gamma {
            if i >= n_x || j >= n_x {
                return Err(Error::Instance(format!("gamma term ({i},{j}) outside 0..{n_x}")));
            }
            if i == j {
                return Err(Error::Instance(format!("gamma term ({i},{i}) would not be multilinear")));
            }
            if !c.is_finite() {
                return Err(Error::Instance(format!("gamma term ({i},{j}) is not finite")));
            }
        }
        if !alpha.is_finite() || beta.iter().chain(&zeta).any(|c| !c.is_finite()) || !theta.is_finite() {
            return Err(Error::Instance("non-finite coefficient".into()));
        }
        Ok(MinmaxIndInstance { alpha, beta, gamma, zeta, theta, epsilon })
    }

    pub fn n_x(&self) -> usize {
        self.beta.len()
    }

    pub fn n_y(&self) -> usize {
        self.zeta.len()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn gamma(&self) -> &[(usize, usize, f64)] {
        &self.gamma
    }

    pub fn zeta(&self) -> &[f64] {
        &self.zeta
    }

    pub fn theta(&self) -> &Matrix {
        &self.theta
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Same objective with zero-coefficient variables appended so that there
    /// are at least `n_x` min- and `n_y` max-variables.
    pub fn padded(&self, n_x: usize, n_y: usize) -> MinmaxIndInstance {
        let (n_x, n_y) = (n_x.max(self.n_x()), n_y.max(self.n_y()));
        let mut beta = self.beta.clone();
        beta.resize(n_x, 0.0);
        let mut zeta = self.zeta.clone();
        zeta.resize(n_y, 0.0);
        let theta = Matrix::from_fn(n_x, n_y, |i, j| {
            if i < self.n_x() && j < self.n_y() {
                self.theta[(i, j)]
            } else {
                0.0
            }
        });
        MinmaxIndInstance { alpha: self.alpha, beta, gamma: self.gamma.clone(), zeta, theta, epsilon: self.epsilon }
    }

    pub fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut v = self.alpha + dot(&self.beta, x) + dot(&self.zeta, y);
        for &(i, j, c) in &self.gamma {
            v += c * x[i] * x[j];
        }
        v + self.theta.bilinear(x, y)
    }

    /// `(g, q)` with `g_i = β_i + Σ_{j≠i}(γ_ij+γ_ji) x_j + Σ_j θ_ij y_j` and
    /// `q_j = ζ_j + Σ_i θ_ij x_i`.
    pub fn gradient(&self, x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut g = self.theta.mul_vec(y);
        for (gi, b) in g.iter_mut().zip(&self.beta) {
            *gi += b;
        }
        for &(i, j, c) in &self.gamma {
            g[i] += c * x[j];
            g[j] += c * x[i];
        }
        let mut q = self.theta.vec_mul(x);
        for (qj, z) in q.iter_mut().zip(&self.zeta) {
            *qj += z;
        }
        (g, q)
    }

    pub fn partial_x(&self, i: usize, x: &[f64], y: &[f64]) -> f64 {
        let mut g = self.beta[i] + dot(self.theta.row(i), y);
        for &(a, b, c) in &self.gamma {
            if a == i {
                g += c * x[b];
            }
            if b == i {
                g += c * x[a];
            }
        }
        g
    }

    pub fn partial_y(&self, j: usize, x: &[f64]) -> f64 {
        self.zeta[j] + (0..self.n_x()).map(|i| self.theta[(i, j)] * x[i]).sum::<f64>()
    }

    pub fn eval(&self, p: &MinmaxPoint) -> f64 {
        self.check_point(p);
        self.value(p.x.as_slice(), p.y.as_slice())
    }

    pub fn grad(&self, p: &MinmaxPoint) -> (Vec<f64>, Vec<f64>) {
        self.check_point(p);
        self.gradient(p.x.as_slice(), p.y.as_slice())
    }

    /// `max(1, Σ |coefficients|)`, `α` included.
    pub fn sum_abs_coeffs(&self) -> f64 {
        let total = self.alpha.abs()
            + self.beta.iter().map(|c| c.abs()).sum::<f64>()
            + self.gamma.iter().map(|c| c.2.abs()).sum::<f64>()
            + self.zeta.iter().map(|c| c.abs()).sum::<f64>()
            + self.theta.sum_abs();
        total.max(1.0)
    }

    /// Minimization conditions on `x`, flipped maximization conditions on `y`.
    /// Residuals and classifications list the `x` block first.
    pub fn verify_minmax_kkt(&self, p: &MinmaxPoint, epsilon: f64) -> KktReport {
        let (g, q) = self.grad(p);
        let xs = p.x.as_slice().iter().zip(&g).map(|(&v, &gi)| (Role::Min, v, gi));
        let ys = p.y.as_slice().iter().zip(&q).map(|(&v, &qi)| (Role::Max, v, qi));
        KktReport::build(xs.chain(ys), epsilon)
    }

    fn check_point(&self, p: &MinmaxPoint) {
        assert_eq!(p.x.len(), self.n_x(), "min-variable dimension");
        assert_eq!(p.y.len(), self.n_y(), "max-variable dimension");
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Instance(format!("epsilon must be positive and finite, got {epsilon}")));
    }
    Ok(())
}

/// A point of `[0,1]^n`. Entries are clamped on construction, so boundary
/// membership is an exact comparison with `0.0` or `1.0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxPoint(Vec<f64>);

impl BoxPoint {
    pub fn new(x: Vec<f64>) -> Result<BoxPoint> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Instance("box point has a non-finite entry".into()));
        }
        Ok(BoxPoint(x.into_iter().map(|v| v.clamp(0.0, 1.0)).collect()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinmaxPoint {
    pub x: BoxPoint,
    pub y: BoxPoint,
}

impl MinmaxPoint {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<MinmaxPoint> {
        Ok(MinmaxPoint { x: BoxPoint::new(x)?, y: BoxPoint::new(y)? })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Interior,
    AtZero,
    AtOne,
}

impl Boundary {
    pub fn of(v: f64) -> Boundary {
        if v == 0.0 {
            Boundary::AtZero
        } else if v == 1.0 {
            Boundary::AtOne
        } else {
            Boundary::Interior
        }
    }
}

#[derive(Clone, Copy)]
pub(crate) enum Role {
    Min,
    Max,
}

/// Signed violation of the box KKT condition for one coordinate;
/// `≤ 0` means satisfied.
pub(crate) fn kkt_residual(role: Role, value: f64, grad: f64, epsilon: f64) -> f64 {
    let toward_one = match role {
        Role::Min => -grad,
        Role::Max => grad,
    };
    match Boundary::of(value) {
        Boundary::Interior => grad.abs() - epsilon,
        Boundary::AtZero => toward_one - epsilon,
        Boundary::AtOne => -toward_one - epsilon,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KktReport {
    pub residuals: Vec<f64>,
    pub classification: Vec<Boundary>,
    pub max_violation: f64,
    pub passed: bool,
}

impl KktReport {
    fn build(coords: impl Iterator<Item = (Role, f64, f64)>, epsilon: f64) -> KktReport {
        let mut residuals = Vec::new();
        let mut classification = Vec::new();
        for (role, v, g) in coords {
            residuals.push(kkt_residual(role, v, g, epsilon));
            classification.push(Boundary::of(v));
        }
        let max_violation = if residuals.is_empty() {
            -epsilon
        } else {
            residuals.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        };
        KktReport { residuals, classification, max_violation, passed: max_violation <= 0.0 }
    }
}

/// Outcome of checking `min f(x) s.t. Ax ≤ b` with multipliers `μ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneralKktReport {
    /// Per-variable `∇f(x) + Aᵀμ`.
    pub stationarity_residuals: Vec<f64>,
    pub stationarity: f64,
    /// `max(0, max_r (Ax − b)_r)`.
    pub primal_violation: f64,
    /// `max(0, max_r −μ_r)`.
    pub dual_violation: f64,
    /// `|μᵀ(b − Ax)|`.
    pub complementarity: f64,
    /// Largest of the four quantities above minus `tol`.
    pub max_violation: f64,
    pub passed: bool,
}

/// KKT check for a quadratic objective under general linear inequalities,
/// one shared tolerance for all four conditions.
pub fn verify_general_kkt(
    objective: &Quadratic,
    a: &Matrix,
    b: &[f64],
    x: &[f64],
    mu: &[f64],
    tol: f64,
) -> Result<GeneralKktReport> {
    let n = objective.n();
    if x.len() != n || a.cols() != n || a.rows() != b.len() || mu.len() != b.len() {
        return Err(Error::Structure(format!(
            "general KKT shapes: f over {n}, A {}x{}, b {}, x {}, mu {}",
            a.rows(),
            a.cols(),
            b.len(),
            x.len(),
            mu.len()
        )));
    }
    let mut stationarity_residuals = objective.gradient(x);
    for (s, atmu) in stationarity_residuals.iter_mut().zip(a.vec_mul(mu)) {
        *s += atmu;
    }
    let stationarity = stationarity_residuals.iter().fold(0.0_f64, |m, s| m.max(s.abs()));
    let ax = a.mul_vec(x);
    let slack: Vec<f64> = b.iter().zip(&ax).map(|(bi, axi)| bi - axi).collect();
    let primal_violation = slack.iter().fold(0.0_f64, |m, s| m.max(-s));
    let dual_violation = mu.iter().fold(0.0_f64, |m, v| m.max(-v));
    let complementarity = dot(mu, &slack).abs();
    let max_violation = [stationarity, primal_violation, dual_violation, complementarity]
        .into_iter()
        .map(|v| v - tol)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(GeneralKktReport {
        stationarity_residuals,
        stationarity,
        primal_violation,
        dual_violation,
        complementarity,
        max_violation,
        passed: max_violation <= 0.0,
    })
}
