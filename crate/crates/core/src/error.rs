use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("probe {0} lies on the real axis")]
    RealAxisProbe(Complex64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The characteristic line started at `z` reaches the real axis before `t`.
    #[error("characteristic from {z} at t={t} exceeds its lifetime {lifetime}")]
    LifetimeExceeded { z: Complex64, t: f64, lifetime: f64 },

    #[error("Newton iteration failed after {iterations} steps (last iterate {last}, residual {residual:e})")]
    NewtonFailure {
        last: Complex64,
        residual: f64,
        iterations: usize,
    },

    /// Quantile atoms closer than `1/m`, i.e. the density exceeds one.
    #[error("density bound violated: atom gap {gap:e} below 1/m = {min_gap:e}")]
    DensityBound { gap: f64, min_gap: f64 },

    #[error("weight cache drifted: sum {sum} differs from n = {n}")]
    WeightDrift { sum: f64, n: usize },

    #[error("truncation tail {tail:e} too large; need max_boxes >= {required}")]
    TruncationTail { tail: f64, required: usize },

    #[error("step size underflow at t={t} (dt={dt:e})")]
    StepUnderflow { t: f64, dt: f64 },

    #[error("domination violated at event {event} (t={time}): x_{index} exceeds y_{index}")]
    DominationViolation {
        event: u64,
        time: f64,
        index: usize,
    },

    #[error("particle at {position} lies outside the contour")]
    OutsideContour { position: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn check_off_axis(z: Complex64) -> Result<()> {
    if z.im == 0.0 || !z.im.is_finite() || !z.re.is_finite() {
        Err(Error::RealAxisProbe(z))
    } else {
        Ok(())
    }
}
