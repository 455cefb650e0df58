//! Reverse-mode automatic differentiation on dense f64 matrices.
//!
//! The pieces: [`Tensor`] (row-major rank-2 values), [`Tape`] (expression
//! recording and `backward`), [`Adam`], and a binary container for named
//! tensors (`save_tensors` / `load_tensors`). No threading, no global state;
//! results are bitwise deterministic for a fixed op sequence.

mod checkpoint;
mod error;
mod optim;
mod tape;
mod tensor;

pub use checkpoint::{load_tensors, read_tensors, save_tensors, write_tensors};
pub use error::NdError;
pub use optim::Adam;
pub use tape::{Tape, Var};
pub use tensor::Tensor;
