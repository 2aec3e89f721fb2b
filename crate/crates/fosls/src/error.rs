use thiserror::Error;

/// Errors surfaced by mesh construction, assembly, solvers and the study
/// driver. Internal consistency violations (negative Jacobians on valid
/// meshes, failed scatter bookkeeping) panic instead: they are bugs, not
/// conditions a caller can recover from.
#[derive(Debug, Error)]
pub enum FoslsError {
    #[error("invalid mesh parameter: {0}")]
    InvalidMesh(String),

    #[error("quadrature degree {0} unsupported (expected 1..=20)")]
    QuadratureDegree(usize),

    #[error("point ({0}, {1}) lies outside the reference triangle")]
    OutsideReference(f64, f64),

    #[error("point ({0}, {1}) lies outside the mesh")]
    OutsideDomain(f64, f64),

    #[error("polynomial degree {0} unsupported (expected 1..=5)")]
    Degree(usize),

    #[error("solver failed: {0}")]
    Solver(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("refusing to run: {0} (pass --force to override)")]
    Guardrail(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, FoslsError>;
