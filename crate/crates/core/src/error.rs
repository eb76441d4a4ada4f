use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(
        "point {point:?} leaves chart `{chart}` in coordinate {coord} (required margin {margin:e})"
    )]
    Domain {
        chart: String,
        point: Vec<f64>,
        coord: usize,
        margin: f64,
    },

    #[error("metric of chart `{chart}` is not positive definite at {point:?}")]
    Conditioning { chart: String, point: Vec<f64> },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("state became non-finite at step {step}")]
    Divergence { step: usize },

    #[error("singular Jacobian: smallest singular value {sigma_min:e} (largest {sigma_max:e})")]
    SingularJacobian { sigma_min: f64, sigma_max: f64 },

    #[error("eigen-iteration did not converge after {sweeps} sweeps (residual {residual:e})")]
    EigenNonConvergence { sweeps: usize, residual: f64 },

    #[error("dense operator of size {size} exceeds the cap of {cap}")]
    SizeCap { size: usize, cap: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
