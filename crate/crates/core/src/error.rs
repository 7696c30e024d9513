use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Value-function calibration ran out of iterations. Carries the best
    /// (largest) sigma reached and the grid minimum it achieved.
    #[error("sigma calibration failed: best sigma {best_sigma} reaches grid minimum {achieved_min}")]
    Calibration { best_sigma: f64, achieved_min: f64 },

    /// Choquet subset weights did not telescope to one.
    #[error("inconsistent fuzzy-measure weights: U_B = {u_last}, expected 1")]
    InconsistentWeights { u_last: f64 },

    #[error("outside function domain: {0}")]
    Domain(String),

    /// Codeword-length solver did not meet its stopping accuracy. Carries the
    /// last iterate so a caller can inspect how far it got.
    #[error("codebook solver did not converge: Kraft residual {kraft_residual:.3e} after {outer_iterations} outer iterations")]
    Convergence {
        kraft_residual: f64,
        outer_iterations: u32,
        lengths: Vec<f64>,
    },

    /// The Kraft sum stopped responding monotonically to the multiplier, so
    /// the bracketing search cannot proceed.
    #[error("Kraft sum is not monotone in the multiplier near mu = {mu}")]
    NonMonotoneKraft { mu: f64 },

    #[error("degenerate codebook: {0}")]
    DegenerateCodebook(String),

    #[error("scenario validation: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
