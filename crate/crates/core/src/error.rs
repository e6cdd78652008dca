use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite phase-space state after {steps} steps")]
    NonFiniteState { steps: usize },

    #[error("microcanonical rejection sampling failed after {attempts} attempts")]
    RejectionFailure { attempts: usize },

    #[error("no observables requested")]
    EmptyObservables,

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("quadrature did not reach tolerance: estimated error {estimate:.3e} > {tolerance:.3e}")]
    Quadrature { estimate: f64, tolerance: f64 },

    #[error(
        "superpropagator coefficients are singular at T = {t} (|sin(omega0 T)| = {sin:.3e}); \
         use the observable-level closed forms (center, width, decoherence factor) instead"
    )]
    SingularTime { t: f64, sin: f64 },

    #[error("root finding did not converge after {iterations} iterations (max residual {residual:.3e})")]
    RootConvergence { iterations: usize, residual: f64 },

    #[error("ambiguous root classification: real-part separation {separation:.3} < 10")]
    AmbiguousRoots { separation: f64 },

    #[error("decoherence estimate needs n > ln 10, got n = {0}")]
    QuantaTooSmall(f64),
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
