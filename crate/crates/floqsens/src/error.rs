use thiserror::Error;

/// Errors raised by the simulation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("drive frequencies {omega1} and {omega2} are not commensurate")]
    NonCommensurate { omega1: f64, omega2: f64 },

    #[error("band tracking is ambiguous at {count} grid point(s) (worst overlap {worst:.3})")]
    TrackingAmbiguity { count: usize, worst: f64 },

    #[error("functional power operator vanishes (largest |eigenvalue| {max_abs:.3e}); no entanglement can be generated")]
    ZeroFunctionalPower { max_abs: f64 },

    #[error("functional power operator has no {which} eigenvalues")]
    EmptyEigenspace { which: &'static str },

    #[error("projection annihilates the state (success probability {probability:.3e})")]
    ProjectionAnnihilated { probability: f64 },

    #[error("Fock truncation breached at t = {time:.4}: boundary population {population:.3e}")]
    TruncationBreach { time: f64, population: f64 },

    #[error("unknown model '{name}'{}", suggestion.as_ref().map(|s| format!(" (did you mean '{s}'?)")).unwrap_or_default())]
    UnknownModel {
        name: String,
        suggestion: Option<String>,
    },

    #[error("model '{model}' requires parameter '{param}'")]
    MissingParameter { model: String, param: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors that signal a numerical breach (truncation or band tracking)
    /// rather than bad input.
    pub fn is_numerical_breach(&self) -> bool {
        matches!(
            self,
            Error::TruncationBreach { .. } | Error::TrackingAmbiguity { .. } | Error::Numerical(_)
        )
    }
}
