use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("spin change needs {deficit:.6e} J more than the impact energy budget provides")]
    NegativeEnergyBudget { deficit: f64 },

    #[error("trial did not settle within {limit} impacts")]
    NonTermination { limit: usize },

    #[error(
        "target probability {target} is not straddled by P({lo})={p_lo:.4} and P({hi})={p_hi:.4}"
    )]
    BracketFailure {
        target: f64,
        lo: f64,
        hi: f64,
        p_lo: f64,
        p_hi: f64,
    },

    #[error("tolerance {requested} unreachable at the given trial budget; achievable half-width {achievable:.4} around {ratio:.4}")]
    NoiseFloor {
        requested: f64,
        achievable: f64,
        ratio: f64,
    },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field,
        reason: reason.into(),
    }
}

/// Rejects NaN/inf and values outside `(0, inf)`.
pub(crate) fn require_positive(field: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(invalid(
            field,
            format!("must be finite and > 0, got {value}"),
        ))
    }
}

pub(crate) fn require_non_negative(field: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(invalid(
            field,
            format!("must be finite and >= 0, got {value}"),
        ))
    }
}
