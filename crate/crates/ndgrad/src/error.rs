use thiserror::Error;

#[derive(Debug, Error)]
pub enum NdError {
    #[error("{op}: incompatible shapes {a0}x{a1} and {b0}x{b1}")]
    Shape { op: &'static str, a0: usize, a1: usize, b0: usize, b1: usize },
    #[error("backward needs a 1x1 loss, got {rows}x{cols}")]
    NonScalarLoss { rows: usize, cols: usize },
    #[error("row index {index} out of range for {rows} rows")]
    Index { index: usize, rows: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl NdError {
    pub(crate) fn shape(op: &'static str, a: (usize, usize), b: (usize, usize)) -> Self {
        NdError::Shape { op, a0: a.0, a1: a.1, b0: b.0, b1: b.1 }
    }
}
