//! Minimal dense-tensor reverse-mode automatic differentiation.
//!
//! The engine is define-by-run: a [`Tape`] is built fresh for every forward
//! pass, every primitive records its output value on the tape, and
//! [`Tape::backward`] walks the tape once in reverse. Learnable tensors enter
//! the tape through [`Tape::param`], keyed by name, so a parameter that is
//! used at several call sites is a single node and its gradient is the sum of
//! the per-site contributions.
//!
//! Everything is `f64` and row-major. There is no implicit broadcasting apart
//! from [`Tape::add_bias`]; batch expansion is explicit via [`Tape::gather`].

mod contract;
mod error;
mod optim;
mod tape;
mod tensor;

pub use contract::Contraction;
pub use error::EngineError;
pub use optim::{Optimizer, OptimizerKind, ParamMut};
pub use tape::{Gradients, NodeId, Tape};
pub use tensor::Tensor;

pub type Result<T> = std::result::Result<T, EngineError>;
