//! Seeded random instances and games with coefficients uniform in `[−1, 1]`.

use rand::Rng;

use crate::error::Result;
use crate::game::{PolymatrixGame, TwoTeamStructure};
use crate::instances::{MinmaxIndInstance, Quadratic, QuadraticInstance};
use crate::linalg::Matrix;

fn coefficient(rng: &mut impl Rng) -> f64 {
    rng.gen_range(-1.0..=1.0)
}

/// Dense quadratic over `n` variables: every constant, linear, cross and
/// square coefficient is drawn.
pub fn random_quadratic(n: usize, epsilon: f64, rng: &mut impl Rng) -> Result<QuadraticInstance> {
    let constant = coefficient(rng);
    let linear = (0..n).map(|_| coefficient(rng)).collect();
    let mut cross = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            cross.push((i, j, coefficient(rng)));
        }
    }
    let square = (0..n).map(|_| coefficient(rng)).collect();
    QuadraticInstance::new(Quadratic::new(constant, linear, cross, square)?, epsilon)
}

pub fn random_minmax(n_x: usize, n_y: usize, epsilon: f64, rng: &mut impl Rng) -> Result<MinmaxIndInstance> {
    let alpha = coefficient(rng);
    let beta = (0..n_x).map(|_| coefficient(rng)).collect();
    let mut gamma = Vec::new();
    for i in 0..n_x {
        for j in i + 1..n_x {
            gamma.push((i, j, coefficient(rng)));
        }
    }
    let zeta = (0..n_y).map(|_| coefficient(rng)).collect();
    let theta = Matrix::from_fn(n_x, n_y, |_, _| coefficient(rng));
    MinmaxIndInstance::new(alpha, beta, gamma, zeta, theta, epsilon)
}

fn random_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| coefficient(rng))
}

/// Players `0..n_x` form team X and `n_x..n_x+n_y` team Y. Every pair of
/// players gets an edge: coordination inside a team, zero-sum across. With
/// `independent`, adversaries share no edges.
pub fn random_two_team(
    team_sizes: &[usize],
    adversary_sizes: &[usize],
    independent: bool,
    rng: &mut impl Rng,
) -> Result<(PolymatrixGame, TwoTeamStructure)> {
    let (n_x, n_y) = (team_sizes.len(), adversary_sizes.len());
    let counts: Vec<usize> = team_sizes.iter().chain(adversary_sizes).copied().collect();
    let mut game = PolymatrixGame::new(counts.clone())?;
    for i in 0..n_x + n_y {
        for j in i + 1..n_x + n_y {
            let same_team = (i < n_x) == (j < n_x);
            if same_team && i >= n_x && independent {
                continue;
            }
            let a = random_matrix(counts[i], counts[j], rng);
            let sign = if same_team { 1.0 } else { -1.0 };
            let back = a.transpose().scaled(sign);
            game.set_edge(i, j, a, back)?;
        }
    }
    let structure = TwoTeamStructure::new((0..n_x).collect(), (n_x..n_x + n_y).collect(), independent);
    Ok((game, structure))
}
