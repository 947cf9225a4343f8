//! JSON file formats.
//!
//! All indices in files are 0-based. Every reader reports the line, column
//! and field of the first problem it finds.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{NashReport, PolymatrixGame, TwoTeamStructure};
use crate::instances::{BoxPoint, MinmaxIndInstance, MinmaxPoint, Quadratic, QuadraticInstance};
use crate::linalg::Matrix;
use crate::reductions::{FullParams, StageOneParams, StageTwoParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeFile {
    pub i: usize,
    pub j: usize,
    pub a_ij: Vec<Vec<f64>>,
    pub a_ji: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TeamsFile {
    pub x: Vec<usize>,
    pub y: Vec<usize>,
    #[serde(default)]
    pub independent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameFile {
    pub strategy_counts: Vec<usize>,
    #[serde(default)]
    pub edges: Vec<EdgeFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub teams: Option<TeamsFile>,
}

impl GameFile {
    pub fn from_game(game: &PolymatrixGame, structure: Option<&TwoTeamStructure>) -> GameFile {
        GameFile {
            strategy_counts: game.strategy_counts().to_vec(),
            edges: game
                .edges()
                .map(|(i, j, a_ij, a_ji)| EdgeFile { i, j, a_ij: a_ij.to_rows(), a_ji: a_ji.to_rows() })
                .collect(),
            teams: structure.map(|s| TeamsFile {
                x: s.team_x.clone(),
                y: s.team_y.clone(),
                independent: s.independent_adversaries,
            }),
        }
    }

    pub fn to_game(&self) -> Result<(PolymatrixGame, Option<TwoTeamStructure>)> {
        let mut game = PolymatrixGame::new(self.strategy_counts.clone())?;
        for (n, e) in self.edges.iter().enumerate() {
            let field = |e: Error| Error::Parse(format!("edges[{n}]: {e}"));
            let a_ij = matrix(&e.a_ij, game_dim(&self.strategy_counts, e.j)).map_err(field)?;
            let a_ji = matrix(&e.a_ji, game_dim(&self.strategy_counts, e.i)).map_err(field)?;
            game.set_edge(e.i, e.j, a_ij, a_ji).map_err(field)?;
        }
        let structure = self.teams.as_ref().map(|t| TwoTeamStructure::new(t.x.clone(), t.y.clone(), t.independent));
        Ok((game, structure))
    }
}

fn game_dim(counts: &[usize], player: usize) -> usize {
    counts.get(player).copied().unwrap_or(0)
}

/// Rows of a matrix; an empty row list is read as a `0 × cols` matrix.
fn matrix(rows: &[Vec<f64>], cols: usize) -> Result<Matrix> {
    if rows.is_empty() {
        return Ok(Matrix::zeros(0, cols));
    }
    Matrix::from_rows(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileFile {
    pub strategies: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<NashReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceKind {
    Quadratic,
    MinmaxInd,
}

/// Quadratic and minmax instances share one file shape, told apart by
/// `kind`. Quadratic files use `n` (or `n_x`), `linear`, `cross` and `square`; minmax
/// files use `n_x`, `n_y`, `beta`, `gamma`, `zeta` and `theta`. Monomial
/// lists are `[i, j, c]` triplets; repeated `theta` pairs add up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub kind: InstanceKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_x: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_y: Option<usize>,
    #[serde(default, alias = "alpha")]
    pub constant: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linear: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cross: Option<Vec<(usize, usize, f64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub square: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Vec<(usize, usize, f64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<(usize, usize, f64)>>,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Instance {
    Quadratic(QuadraticInstance),
    MinmaxInd(MinmaxIndInstance),
}

impl InstanceFile {
    fn empty(kind: InstanceKind, constant: f64, epsilon: f64) -> InstanceFile {
        InstanceFile {
            kind,
            n: None,
            n_x: None,
            n_y: None,
            constant,
            linear: None,
            cross: None,
            square: None,
            beta: None,
            gamma: None,
            zeta: None,
            theta: None,
            epsilon,
        }
    }

    pub fn from_quadratic(inst: &QuadraticInstance) -> InstanceFile {
        let q = inst.objective();
        InstanceFile {
            n: Some(q.n()),
            linear: Some(q.linear().to_vec()),
            cross: Some(q.cross().to_vec()),
            square: Some(q.square().to_vec()),
            ..InstanceFile::empty(InstanceKind::Quadratic, q.constant(), inst.epsilon())
        }
    }

    pub fn from_minmax(inst: &MinmaxIndInstance) -> InstanceFile {
        let t = inst.theta();
        let mut theta = Vec::new();
        for i in 0..t.rows() {
            for j in 0..t.cols() {
                if t[(i, j)] != 0.0 {
                    theta.push((i, j, t[(i, j)]));
                }
            }
        }
        InstanceFile {
            n_x: Some(inst.n_x()),
            n_y: Some(inst.n_y()),
            beta: Some(inst.beta().to_vec()),
            gamma: Some(inst.gamma().to_vec()),
            zeta: Some(inst.zeta().to_vec()),
            theta: Some(theta),
            ..InstanceFile::empty(InstanceKind::MinmaxInd, inst.alpha(), inst.epsilon())
        }
    }

    pub fn to_instance(&self) -> Result<Instance> {
        let foreign: &[(&str, bool)] = match self.kind {
            InstanceKind::Quadratic => &[
                ("n_x", self.n_x.is_some() && self.n.is_some()),
                ("n_y", self.n_y.is_some_and(|v| v != 0)),
                ("beta", self.beta.is_some()),
                ("gamma", self.gamma.is_some()),
                ("zeta", self.zeta.is_some()),
                ("theta", self.theta.is_some()),
            ],
            InstanceKind::MinmaxInd => &[
                ("n", self.n.is_some()),
                ("linear", self.linear.is_some()),
                ("cross", self.cross.is_some()),
                ("square", self.square.is_some()),
            ],
        };
        if let Some((field, _)) = foreign.iter().find(|(_, present)| *present) {
            return Err(Error::Parse(format!("field `{field}` does not belong to a {:?} instance", self.kind)));
        }
        match self.kind {
            InstanceKind::Quadratic => {
                let n = required("n", self.n.or(self.n_x))?;
                let linear = required("linear", self.linear.clone())?;
                let square = required("square", self.square.clone())?;
                expect_len("linear", linear.len(), n)?;
                expect_len("square", square.len(), n)?;
                let q = Quadratic::new(self.constant, linear, self.cross.clone().unwrap_or_default(), square)?;
                Ok(Instance::Quadratic(QuadraticInstance::new(q, self.epsilon)?))
            }
            InstanceKind::MinmaxInd => {
                let n_x = required("n_x", self.n_x)?;
                let n_y = required("n_y", self.n_y)?;
                let beta = required("beta", self.beta.clone())?;
                let zeta = required("zeta", self.zeta.clone())?;
                expect_len("beta", beta.len(), n_x)?;
                expect_len("zeta", zeta.len(), n_y)?;
                let mut t = Matrix::zeros(n_x, n_y);
                for (k, &(i, j, c)) in self.theta.iter().flatten().enumerate() {
                    if i >= n_x || j >= n_y {
                        return Err(Error::Parse(format!("theta[{k}]: index ({i}, {j}) outside {n_x}x{n_y}")));
                    }
                    t[(i, j)] += c;
                }
                let gamma = self.gamma.clone().unwrap_or_default();
                let m = MinmaxIndInstance::new(self.constant, beta, gamma, zeta, t, self.epsilon)?;
                Ok(Instance::MinmaxInd(m))
            }
        }
    }
}

fn required<T>(field: &str, value: Option<T>) -> Result<T> {
    value.ok_or_else(|| Error::Parse(format!("missing field `{field}`")))
}

fn expect_len(field: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::Parse(format!("field `{field}` has {got} entries, expected {want}")));
    }
    Ok(())
}

/// A box point (`y` absent or empty) or a minmax point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointFile {
    pub x: Vec<f64>,
    #[serde(default)]
    pub y: Vec<f64>,
}

impl PointFile {
    pub fn box_point(&self) -> Result<BoxPoint> {
        BoxPoint::new(self.x.clone())
    }

    pub fn minmax_point(&self) -> Result<MinmaxPoint> {
        MinmaxPoint::new(self.x.clone(), self.y.clone())
    }
}

/// Constants recorded by `reduce`, tagged by the stage that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stage")]
pub enum ParamsFile {
    #[serde(rename = "1")]
    One(StageOneParams),
    #[serde(rename = "2")]
    Two(StageTwoParams),
    #[serde(rename = "full")]
    Full(FullParams),
}

impl ParamsFile {
    /// Nash accuracy demanded of a game produced by this reduction.
    pub fn game_delta(&self) -> Option<f64> {
        match self {
            ParamsFile::One(_) => None,
            ParamsFile::Two(p) => Some(p.delta_out),
            ParamsFile::Full(p) => Some(p.delta()),
        }
    }
}

/// Parses JSON, naming the offending field path and position on failure.
pub fn from_json_str<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let value: T = serde_path_to_error::deserialize(&mut *de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path.is_empty() || path == "." {
            Error::Parse(inner.to_string())
        } else {
            Error::Parse(format!("field `{path}`: {inner}"))
        }
    })?;
    de.end().map_err(|e| Error::Parse(e.to_string()))?;
    Ok(value)
}

pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("file types serialize");
    s.push('\n');
    s
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    from_json_str(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    std::fs::write(path, to_json_string(value))
}
