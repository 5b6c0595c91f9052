use thiserror::Error;

/// Errors produced by the numerical kernels and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("accuracy target {target:.3e} not met (estimated error {achieved:.3e})")]
    AccuracyNotMet { target: f64, achieved: f64 },

    #[error("bracket expansion exceeded t = {0:.3e} without enclosing a maximum")]
    BracketFailure(f64),

    #[error("quadrature did not converge: {0}")]
    QuadratureFailure(String),

    #[error("mesh size error: {0}")]
    MeshSize(String),

    #[error("incompatible meshes: {0}")]
    IncompatibleMesh(String),

    #[error("linear system is singular or not positive definite: {0}")]
    SingularSystem(String),

    #[error("solver failure: {0}")]
    SolverFailure(String),

    #[error("divisor below threshold {g_min:.3e} at {count} interior nodes (first node index {first})")]
    SmallDivisor {
        g_min: f64,
        count: usize,
        first: usize,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
