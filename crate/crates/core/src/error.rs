use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    /// λ sits on (or too close to) a Dirichlet eigenvalue, so the ratio η(λ) is undefined.
    #[error("λ = {lambda} is within the Dirichlet guard (|M12| = {m12:e})")]
    Pole { lambda: f64, m12: f64 },

    #[error("unsupported layer count {0} (only 2 and 3 are modelled)")]
    UnsupportedLayers(u32),

    #[error("invalid stack parameter: {0}")]
    InvalidStack(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("numerical consistency violated: {0}")]
    NumericalConsistency(String),

    #[error("failed to converge: {0}")]
    Convergence(String),

    #[error("matrix is nonsingular at this point, no Bloch mode exists (smallest singular value ratio {singular_ratio:e})")]
    NoMode { singular_ratio: f64 },

    #[error("discriminant derivative degenerates at λ = {lambda}")]
    DerivativeDegeneracy { lambda: f64 },

    #[error("target {target} is not attained on band {band} (D ranges over [{d_min}, {d_max}])")]
    OutOfBand {
        band: usize,
        target: f64,
        d_min: f64,
        d_max: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
