use std::io;

/// Errors produced by the learning pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument violated an operation's precondition.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    /// The coordinate-descent solver ran out of iterations.
    #[error("no convergence after {iterations} iterations (lambda = {lambda:e}, max change = {max_change:e})")]
    Convergence {
        iterations: usize,
        lambda: f64,
        max_change: f64,
    },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("malformed input: {0}")]
    Format(String),

    /// An experiment configuration is invalid.
    #[error("config error: {0}")]
    Config(String),

    /// A pipeline stage failed for the repetition with this seed.
    #[error("stage `{stage}` failed (seed {seed}): {source}")]
    Stage {
        stage: &'static str,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

/// Attaches a stage name and seed to errors.
pub(crate) trait StageContext<T> {
    fn stage(self, stage: &'static str, seed: u64) -> Result<T>;
}

impl<T> StageContext<T> for Result<T> {
    fn stage(self, stage: &'static str, seed: u64) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage,
            seed,
            source: Box::new(e),
        })
    }
}
