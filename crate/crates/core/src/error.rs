use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("step size too large: {coefficient} * dt = {product} (must be < 0.5)")]
    StepTooLarge { coefficient: f64, product: f64 },

    #[error("explicit Euler step dt = {dt} amplifies the damped rotation (stable only for dt < {limit})")]
    UnstableStep { dt: f64, limit: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("series too short: {len} samples, need at least {min}")]
    TooShort { len: usize, min: usize },

    #[error("non-uniform sampling at row {row}: step {step} differs from dt {dt}")]
    NonUniformSampling { row: usize, step: f64, dt: f64 },

    #[error("channel `{0}` not found")]
    MissingChannel(String),

    #[error("window [{start}, {end}] contains fewer than two samples")]
    EmptyWindow { start: f64, end: f64 },

    #[error("no oscillatory peak")]
    NoOscillatoryPeak,

    #[error("degenerate spectrum: sigma1 and sigma2 are both zero")]
    DegenerateSpectrum,

    #[error("zero-variance input")]
    ZeroVariance,

    #[error("omega_c = {omega_c} exceeds the periodogram grid (Nyquist {nyquist})")]
    OmegaCExceedsGrid { omega_c: f64, nyquist: f64 },

    #[error("low-frequency periodogram level must be positive, got {0}")]
    NonPositiveDc(f64),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
