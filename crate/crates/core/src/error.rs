use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid control: 1 + u[{index}] = {value} must be non-negative")]
    InvalidControl { index: usize, value: f64 },

    #[error("friction block is numerically singular (condition number {cond:.3e})")]
    SingularFrictionBlock { cond: f64 },

    #[error("state left the finite range at t = {t}")]
    NonFinite { t: f64 },

    #[error("no limit cycle: orbit-closure residual {residual:.3e} exceeds {tolerance:.1e}")]
    NoLimitCycle { residual: f64, tolerance: f64 },

    #[error("Hamiltonian lost convexity: w3[{index}] = {value:.3e}")]
    NonConvexHamiltonian { index: usize, value: f64 },

    #[error("episode {episode}, step {step}: {source}")]
    InEpisode {
        episode: usize,
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Strips episode context to get at the underlying failure.
    pub fn root(&self) -> &Error {
        match self {
            Error::InEpisode { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn is_numerical(&self) -> bool {
        matches!(
            self.root(),
            Error::NoLimitCycle { .. }
                | Error::NonFinite { .. }
                | Error::NonConvexHamiltonian { .. }
                | Error::SingularFrictionBlock { .. }
                | Error::InvalidControl { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
