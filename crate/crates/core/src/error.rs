use thiserror::Error;

/// Errors raised by the simulator library.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("point ({x}, {y}) lies on the cylinder axis")]
    OnAxis { x: f64, y: f64 },

    #[error("degenerate spline segment: phi_l = {phi_l}, phi_r = {phi_r}")]
    DegenerateSegment { phi_l: f64, phi_r: f64 },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl SimError {
    /// True for failures of the filesystem or output encoders rather than of
    /// the inputs.
    pub fn is_io(&self) -> bool {
        matches!(self, SimError::Io(_) | SimError::Csv(_) | SimError::Json(_))
    }
}

pub type Result<T> = std::result::Result<T, SimError>;
