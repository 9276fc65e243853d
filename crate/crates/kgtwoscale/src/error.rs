use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("fixed-point iteration did not converge{} after {iterations} iterations (residual {residual:.3e})", fmt_step(*.step))]
    NonConvergence {
        step: Option<usize>,
        iterations: usize,
        residual: f64,
    },

    #[error("solution diverged{} (norm {norm:.3e})", fmt_step(*.step))]
    Divergence { step: Option<usize>, norm: f64 },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn fmt_step(step: Option<usize>) -> String {
    match step {
        Some(n) => format!(" at step {n}"),
        None => String::new(),
    }
}

impl Error {
    /// Attach the time-step index to solver failures.
    pub fn at_step(self, n: usize) -> Self {
        match self {
            Error::NonConvergence {
                iterations,
                residual,
                ..
            } => Error::NonConvergence {
                step: Some(n),
                iterations,
                residual,
            },
            Error::Divergence { norm, .. } => Error::Divergence {
                step: Some(n),
                norm,
            },
            other => other,
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
