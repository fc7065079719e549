//! Minimal dense tensor math with reverse-mode gradients and ADAM.

mod adam;
mod checks;
mod checkpoint;
mod gradcheck;
mod graph;
mod tensor;

pub use checks::{primitive_checks, CHECK_STEP};
pub use adam::{adam_step, Adam, AdamConfig, AdamState};
pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use gradcheck::{grad_check, relative_error, GradCheckReport};
pub use graph::{Gradients, Graph, ParamId, ParamStore, Parameter, Var};
pub use tensor::{matmul, matmul_a_bt, matmul_at_b, Tensor};
