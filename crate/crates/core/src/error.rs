use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("densification refused: mu = {mu} exceeds the safe threshold {limit}")]
    DenseOverflow { mu: f64, limit: f64 },

    #[error("degenerate product: {0}")]
    Degenerate(String),

    #[error("bound hypotheses violated: {0}")]
    Hypothesis(String),

    #[error("precision exhausted: {0}")]
    PrecisionExhausted(String),

    #[error("convergent depth exhausted: {0}")]
    DepthExhausted(String),

    #[error("root finding failed: {0}")]
    RootFinding(String),

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("condition (A) unavailable: {0}")]
    ConditionA(String),

    #[error("level {level}: {source}")]
    Level {
        level: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn at_level(self, level: usize) -> Self {
        match self {
            e @ Error::Level { .. } => e,
            e => Error::Level {
                level,
                source: Box::new(e),
            },
        }
    }
}
