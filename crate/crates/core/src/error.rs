use std::fmt;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("time {t} lies outside the validity window [0, {limit}) of the contracting scale law")]
    TimeOutOfWindow { t: f64, limit: f64 },

    #[error("wave samples do not share a grid and time: {0}")]
    GridMismatch(String),

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("resonance n = {requested} does not exist ({available} available)")]
    NoSuchResonance { requested: usize, available: usize },

    #[error("grid step {step} too coarse: shortest scale {scale} needs at least {min_points} points")]
    ResolutionError {
        step: f64,
        scale: f64,
        min_points: usize,
    },

    #[error("resonance fit diverged: residual {residual:.3e} exceeds threshold {threshold:.3e}")]
    FitDiverged { residual: f64, threshold: f64 },

    #[error("fit window too wide: {0}")]
    WindowTooWide(String),

    #[error("box length {length} too small: need at least {required}")]
    BoxTooSmall { length: f64, required: f64 },

    #[error("time stepping unstable: norm drift {drift:.3e} exceeds {bound:.3e}")]
    UnstableStep { drift: f64, bound: f64 },

    #[error("domain too small: probability {leak:.3e} reached the outer boundary region at t = {t}")]
    DomainTooSmall { leak: f64, t: f64 },
}

/// Raised when a closed-form expansion is evaluated outside the regime in
/// which it was derived. The value is still returned alongside the warning.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeWarning {
    pub condition: &'static str,
    pub measured: f64,
    pub required: f64,
}

impl fmt::Display for RegimeWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "expansion outside its regime: {} = {:.4} (want >= {})",
            self.condition, self.measured, self.required
        )
    }
}

/// A value together with an optional regime warning.
#[derive(Debug, Clone, PartialEq)]
pub struct Checked<T> {
    pub value: T,
    pub warning: Option<RegimeWarning>,
}

impl<T> Checked<T> {
    pub fn new(value: T, warning: Option<RegimeWarning>) -> Self {
        Self { value, warning }
    }

    pub fn into_value(self) -> T {
        self.value
    }

    pub fn map<U>(self, f: impl FnOnce(T) -> U) -> Checked<U> {
        Checked {
            value: f(self.value),
            warning: self.warning,
        }
    }
}

pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be finite and > 0",
        })
    }
}
