//! Two-team zero-sum polymatrix games.
//!
//! The crate bundles four pieces that are meant to be used together:
//!
//! * [`game`]: polymatrix games, two-team structure checks, utilities and
//!   approximate Nash verification.
//! * [`instances`] and [`reductions`]: box-constrained quadratic and bilinear
//!   minmax objectives, their KKT verifiers, and the two-stage transformation
//!   from a quadratic KKT instance into a two-team game (with pullbacks).
//! * [`lp`] and [`solver`]: a dense simplex solver and the duality-based
//!   equilibrium solver for games whose adversaries do not interact.
//! * [`oracle`]: brute-force grids, finite differences and LP vertex
//!   enumeration used to cross-check everything else.

pub mod error;
pub mod game;
pub mod generate;
pub mod instances;
pub mod io;
pub mod linalg;
pub mod lp;
pub mod oracle;
pub mod reductions;
pub mod solver;

pub use error::{Error, Result};
pub use game::{NashReport, PolymatrixGame, StrategyProfile, TwoTeamStructure, ValidationReport};
pub use instances::{
    BoxPoint, KktReport, MinmaxIndInstance, MinmaxPoint, Quadratic, QuadraticInstance,
};
pub use linalg::Matrix;
