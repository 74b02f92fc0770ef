use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Argument within pole tolerance of a pole of the function.
    #[error("pole argument: {0}")]
    PoleArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported derivative order {0} (supported: 0..=3)")]
    UnsupportedOrder(u32),

    #[error("root table has {have} roots but {need} are required")]
    InsufficientRoots { have: usize, need: usize },

    #[error("resource budget exceeded: {0}")]
    Resource(String),

    #[error("precision error: {0}")]
    Precision(String),

    #[error("series truncation residual {residual:.3e} exceeds {tol:.1e}")]
    SeriesTruncation { residual: f64, tol: f64 },

    #[error("quadrature did not converge: {0}")]
    Nonconvergence(String),

    #[error("usage error: {0}")]
    Usage(String),
}

pub type Result<T> = std::result::Result<T, Error>;
