use thiserror::Error;

/// Errors raised across the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("hysteretic SQUID: screening parameter {0:.4} must be below 1")]
    Hysteretic(f64),

    #[error("invalid bias point: 1 + betaL*cos(phi_dc) = {0:.3e} is not positive")]
    InvalidBias(f64),

    #[error("loading profile: {0}")]
    Profile(String),

    #[error("frequency {0:.6e} rad/s hits the series-branch pole")]
    SingularFrequency(f64),

    #[error("Newton iteration failed at step {step} (t = {time:.4e} s): |dphi| = {update:.3e} after {iterations} iterations")]
    NewtonFailure {
        step: usize,
        time: f64,
        update: f64,
        iterations: usize,
    },

    #[error("state diverged at step {step} (t = {time:.4e} s)")]
    Divergence { step: usize, time: f64 },

    #[error("tone {label} at {freq:.6e} Hz is not on the {resolution:.3e} Hz DFT grid")]
    OffGrid {
        label: String,
        freq: f64,
        resolution: f64,
    },

    #[error("degenerate drive: incident wave amplitude {0:.3e} below numerical floor")]
    DegenerateDrive(f64),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
