//! Differentiable kernels. Each forward has a matching backward that the
//! tape uses; both operate on plain tensors.

pub mod activation;
pub mod attention;
pub mod conv;
pub mod linear;
pub mod loss;
pub mod norm;
pub mod resize;
pub mod shuffle;

pub use activation::{gelu, leaky_relu, LEAKY_SLOPE};
pub use attention::{attention, softmax};
pub use conv::{conv2d, Conv2dParams};
pub use linear::{linear, LinearParams};
pub use loss::{l1_loss, window_gradient, Window};
pub use norm::layer_norm;
pub use resize::{bicubic_resize, ResizePlan};
pub use shuffle::pixel_shuffle;

use crate::error::{Error, Result};
use crate::tensor::{dims_str, Scalar, Tensor};

/// `a + b` where `b`'s dims are a suffix of `a`'s (repeated over the prefix).
pub fn add_broadcast<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let k = b.len();
    if b.ndim() > a.ndim() || a.dims()[a.ndim() - b.ndim()..] != *b.dims() {
        return Err(Error::shape(
            "add_broadcast",
            format!("{} is not a suffix of {}", dims_str(b.dims()), dims_str(a.dims())),
        ));
    }
    let mut out = a.data().to_vec();
    for chunk in out.chunks_mut(k) {
        for (x, &y) in chunk.iter_mut().zip(b.data()) {
            *x += y;
        }
    }
    Ok(Tensor::from_parts(a.dims().to_vec(), out))
}

/// Sums `g` over the broadcast prefix back to `dims`.
pub fn reduce_broadcast<T: Scalar>(g: &Tensor<T>, dims: &[usize]) -> Tensor<T> {
    let k: usize = dims.iter().product();
    let mut out = vec![T::zero(); k];
    for chunk in g.data().chunks(k) {
        for (x, &y) in out.iter_mut().zip(chunk) {
            *x += y;
        }
    }
    Tensor::from_parts(dims.to_vec(), out)
}
