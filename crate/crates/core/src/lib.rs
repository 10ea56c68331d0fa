//! Many-to-many light-field transformer.
//!
//! Light-field super-resolution where every sub-aperture image can attend to
//! every other: views are folded into channels, encoded to a per-pixel
//! correlation token, attended spatially and decoded back. The crate carries
//! the tensor model, a small reverse-mode engine, the network and its
//! one-to-one baseline, metrics, attribution analysis, self-ensembling and a
//! toy training loop.

pub mod attribution;
pub mod autodiff;
pub mod ensemble;
pub mod error;
pub mod io;
pub mod layers;
pub mod lightfield;
pub mod m2mt;
pub mod metrics;
pub mod network;
pub mod ops;
mod par;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use lightfield::{LfDims, LfTensor};
pub use tensor::{Scalar, Tensor};
