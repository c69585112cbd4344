use thiserror::Error;

use crate::lattice::SitePoint;

pub type Result<T> = std::result::Result<T, FrogError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrogError {
    #[error("lattice dimension {0} is not supported (expected 2..=6)")]
    InvalidDimension(usize),

    #[error("axis {axis} out of range for dimension {dim}")]
    AxisOutOfRange { axis: usize, dim: usize },

    #[error("density {0} outside (0, 1]")]
    InvalidDensity(f64),

    #[error("no occupied site in configuration")]
    NotFound,

    #[error("site {0:?} lies outside the restriction domain")]
    OutsideDomain(SitePoint),

    #[error("sampled domain too small: {0}")]
    DomainTooSmall(String),

    #[error("passage value is not finite")]
    NotFinite,

    #[error("enumeration too large: {0} paths exceeds the guard")]
    TooLarge(u128),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("estimation failed: {0}")]
    EstimationFailure(String),
}
