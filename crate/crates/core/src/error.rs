use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Shapes, indices or counts that do not fit together.
    #[error("structural error: {0}")]
    Structure(String),

    #[error("invalid strategy profile: {0}")]
    Profile(String),

    #[error("invalid instance: {0}")]
    Instance(String),

    #[error("parameter out of range: {0}")]
    Parameter(String),

    /// The game is not a two-team zero-sum game (with independent
    /// adversaries, where that was requested).
    #[error("two-team validation failed with {0} violation(s)")]
    NotTwoTeam(usize),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("no multipliers within tolerance (best residual {residual:e})")]
    MultipliersNotFound { residual: f64 },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("oracle budget exceeded: {required} evaluations needed, budget is {budget}")]
    Budget { required: f64, budget: f64 },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage { stage, source: Box::new(self) }
    }
}
