use thiserror::Error;

use crate::fbf::IterationWorkspace;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, found {found}")]
    Shape {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    /// Power iteration did not settle; `best` is the last (unscaled) estimate.
    #[error("operator norm estimate did not converge after {iterations} iterations (best {best})")]
    NormEstimation { best: f64, iterations: usize },

    #[error("step size {gamma} outside admissible interval [{lower}, {upper}]")]
    StepOutOfBounds { gamma: f64, lower: f64, upper: f64 },

    #[error("non-finite value in {stage} at iteration {iteration}")]
    NonFinite {
        stage: &'static str,
        iteration: usize,
        workspace: Box<IterationWorkspace>,
    },

    #[error("unsupported evaluation: {0}")]
    Unsupported(String),

    #[error("objective is +inf on every grid point")]
    Infeasible,
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn shape(context: impl Into<String>, expected: usize, found: usize) -> Self {
        Error::Shape {
            context: context.into(),
            expected,
            found,
        }
    }
}
