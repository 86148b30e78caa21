use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("detuning must be nonzero")]
    ZeroDetuning,

    #[error("detuning {detuning} rad/s sits on the pole at {pole} rad/s (relative tolerance {tol})")]
    Pole { detuning: f64, pole: f64, tol: f64 },

    #[error(
        "asymmetry parameter zeta^2 = {zeta2} is not positive; the unbalanced-interaction regime requires zeta^2 > 0"
    )]
    Regime { zeta2: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("grid invariant violated: {0}")]
    Grid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error(
        "unknown fit model `{0}` (expected one of time_exp, duty_sinc, angle_cos, sideband_ab, time_f1f2, lorentzian)"
    )]
    UnknownModel(String),

    #[error("least-squares fit failed: {0}")]
    Fit(String),

    #[error("Jacobian is singular; the model does not depend on its parameters at this point")]
    SingularJacobian,

    #[error("config error at {location}: {message}")]
    Config { location: String, message: String },

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            location: location.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
