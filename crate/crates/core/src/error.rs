use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("density {0} lies outside [0, 1]")]
    Domain(f64),

    #[error("flux {gamma} exceeds the maximal flux {f_max}")]
    InfeasibleFlux { gamma: f64, f_max: f64 },

    #[error("invalid flux model: {0}")]
    InvalidFlux(String),

    #[error("{what}: expected length {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid junction: {0}")]
    InvalidJunction(String),

    #[error("{solver} does not support a junction with {incoming} incoming and {outgoing} outgoing roads")]
    UnsupportedJunction {
        solver: &'static str,
        incoming: usize,
        outgoing: usize,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("time step {dt} exceeds the CFL bound {bound}")]
    Cfl { dt: f64, bound: f64 },

    #[error("density {value} left [0, 1] on road `{road}` cell {cell}")]
    MaximumPrinciple { road: String, cell: usize, value: f64 },

    #[error("scenario: {0}")]
    Scenario(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the input description rather than by the computation.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Domain(_)
                | Error::InfeasibleFlux { .. }
                | Error::InvalidFlux(_)
                | Error::Dimension { .. }
                | Error::InvalidJunction(_)
                | Error::UnsupportedJunction { .. }
                | Error::Scenario(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
