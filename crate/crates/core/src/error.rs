use alloc::string::String;

/// Failures reported by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point {x} lies outside [{lo}, {hi}]")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },

    #[error("kernel evaluated on the diagonal x = y = {0}")]
    SingularPoint(f64),

    #[error("diffusion parameter {value} at z = {z} is not positive; coercivity lost")]
    NonPositiveTheta { z: f64, value: f64 },

    #[error(
        "matrix is not positive definite: pivot {pivot:e} at row {row}, \
         smallest eigenvalue estimate {min_eig_estimate:e}"
    )]
    NotPositiveDefinite {
        row: usize,
        pivot: f64,
        min_eig_estimate: f64,
    },

    #[error("quadrature self-check failed: entry ({row}, {col}) moved by {rel_change:e} relative under doubled order")]
    QuadratureInconsistent {
        row: usize,
        col: usize,
        rel_change: f64,
    },

    #[error("negative quadratic form {0:e}; stiffness is not positive semi-definite")]
    IndefiniteForm(f64),

    #[error("eigenvalue iteration for the quadrature rule did not converge")]
    QuadratureRule,
}

pub type Result<T> = core::result::Result<T, Error>;
