//! Tape-based reverse-mode differentiation.

mod backend;
mod gradcheck;
mod suite;
mod tape;

pub use backend::{expect_dims, Backend, Eager};
pub use gradcheck::{gradcheck, relative_error, GradcheckReport, REL_FLOOR};
pub use suite::{op_gradchecks, OpCheck, OP_STEPS};
pub use tape::{Gradients, Tape, Var};
