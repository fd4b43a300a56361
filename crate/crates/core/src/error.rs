use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EstError {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Dimension {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("invalid threshold {0}: must be finite and > 0")]
    Threshold(f64),

    #[error("sequencing error: step {step} is beyond the {timesteps}-step schedule")]
    Sequencing { step: usize, timesteps: usize },

    #[error("inconsistent state: {0}")]
    Consistency(String),

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Divergence { epoch: usize, loss: f64 },

    #[error("{path}:{location}: {msg}")]
    Parse {
        path: PathBuf,
        location: String,
        msg: String,
    },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("spike accounting error: {0}")]
    Accounting(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, EstError>;
