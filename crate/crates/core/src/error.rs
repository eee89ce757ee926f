use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid `{field}`: {reason}")]
    Validation { field: String, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("steady-state solver failed: {reason} ({diagnostics})")]
    Solver { reason: String, diagnostics: String },

    #[error(
        "system is not stable (max Re λ = {margin:.6e} rad/s); steady-state noise is undefined"
    )]
    Unstable { margin: f64 },

    #[error("measuring window is empty: {0}")]
    WindowEmpty(String),

    #[error(
        "|Y| = {measured:.6e} is outside the linear meter range (max {linear_max:.6e}); \
         exact-model fallback N_m = {fallback:?}"
    )]
    OutOfLinearRange {
        measured: f64,
        linear_max: f64,
        fallback: Option<f64>,
    },

    #[error(
        "spectral quadrature did not converge: estimated relative error {relative_error:.3e} \
         after {panels} panels (Lyapunov variance {lyapunov:.9e})"
    )]
    Quadrature {
        relative_error: f64,
        panels: usize,
        value: f64,
        lyapunov: f64,
    },

    #[error("SNR is not monotone in N_m over [{lo:.3e}, {hi:.3e}]")]
    NonMonotone { lo: f64, hi: f64 },

    #[error("malformed mode field: {0}")]
    ModeField(String),

    #[error("config parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(field: &str, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.to_string(),
            reason: reason.into(),
        }
    }
}
