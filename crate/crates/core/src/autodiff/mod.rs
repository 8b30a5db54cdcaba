//! Reverse-mode differentiation and the training primitives built on it.

pub mod optim;
pub mod tape;

pub use optim::{adam_step, gelu, gelu_derivative, xavier_init, AdamState, LrSchedule};
pub use tape::{matmul, Gradients, Matrix, Tape, Var};
#[doc(hidden)]
pub use tape::Fault;
