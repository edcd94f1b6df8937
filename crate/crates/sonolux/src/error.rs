//! Crate-wide error type and result alias.

use thiserror::Error;

/// Errors produced by the simulation and reconstruction pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration, malformed input file, or violated precondition.
    #[error("config error: {0}")]
    Config(String),

    /// A point fell outside the grid bounds.
    #[error("point {point:?} outside grid bounds")]
    OutOfBounds { point: [f64; 3] },

    /// A numerical operation failed (masked region, caustic, nonconvergence).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Evaluation requested at a masked node or inside the source mask.
    #[error("masked region: {0}")]
    Masked(String),

    /// Lorentz-model pole hit exactly (undamped resonance).
    #[error("dispersion pole: {0}")]
    Pole(String),

    /// Arrival or resonance detection failed (no usable signal).
    #[error("detection failure: {0}")]
    Detection(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 2 config, 3 numerical, 4 detection.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Json(_) => 2,
            Error::OutOfBounds { .. }
            | Error::Numerical(_)
            | Error::Masked(_)
            | Error::Pole(_) => 3,
            Error::Detection(_) => 4,
            Error::Io(_) => 3,
        }
    }
}
