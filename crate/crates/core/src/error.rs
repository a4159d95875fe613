use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("regions overlap or touch (distance {distance})")]
    Overlap { distance: f64 },

    #[error("region `{name}` leaves the box [-{half_width}, {half_width}]^n")]
    OutsideBox { name: &'static str, half_width: f64 },

    #[error("region `{name}` contains no grid node at spacing {spacing}")]
    EmptyRegion { name: &'static str, spacing: f64 },

    #[error(
        "bump support for N={n} has {nodes} nodes per axis (need {required}); \
         spacing must be at most {max_spacing}"
    )]
    UnderResolved {
        n: u32,
        nodes: usize,
        required: usize,
        max_spacing: f64,
    },

    #[error("bump support for N={n} is not contained in W")]
    SupportOutsideW { n: u32 },

    #[error("function has zero seminorm")]
    ZeroSeminorm,

    #[error("function is identically zero")]
    ZeroFunction,

    #[error("function is not supported where required: {0}")]
    Support(&'static str),

    #[error("coefficient violates ellipticity: value {value} outside [{lower}, {upper}]")]
    NotElliptic { value: f64, lower: f64, upper: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("solver did not converge after {iterations} iterations (gradient {gradient_norm:e})")]
    NonConvergence {
        iterations: usize,
        gradient_norm: f64,
    },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
