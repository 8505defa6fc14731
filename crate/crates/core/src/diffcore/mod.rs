//! Small reverse-mode automatic differentiation engine over dense `f64`
//! matrices: enough for MLPs, softmax/cross-entropy heads and Adam.

mod adam;
mod gradcheck;
mod graph;
pub mod nn;
mod tensor;

pub use adam::{adam_step, AdamState};
pub use gradcheck::{
    check_gradients, check_param_gradients, relative_error, GradCheckReport, REL_ERROR_FLOOR,
};
pub use graph::{Gradients, Graph, ParamId, ParamStore, Var};
pub use tensor::{argmax, sigmoid, softmax_rows, Tensor};
