use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("density {rho} outside admissible range [0, {rho_bar})")]
    DensityOutOfRange { rho: f64, rho_bar: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("adaptive quadrature did not converge on [{a}, {b}]")]
    QuadratureFailure { a: f64, b: f64 },

    #[error("velocity collapsed below floor at r = {r}")]
    BlowDown { r: f64 },

    #[error("ODE integrator stalled at r = {r} (step {step:e})")]
    StepFailure { r: f64, step: f64 },

    #[error("no bracketing interval found: {0}")]
    BracketFailure(String),

    #[error("root finder stopped with residual {residual:e} above tolerance {tol:e}")]
    ToleranceFailure { residual: f64, tol: f64 },

    #[error("non-finite state at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("at least {needed} samples required, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("wall-clock budget of {seconds} s exceeded")]
    WallClockBudget { seconds: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
