use crate::tensor::{Scalar, Tensor};

pub const LEAKY_SLOPE: f64 = 0.1;

pub fn leaky_relu<T: Scalar>(x: &Tensor<T>, slope: T) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { v * slope })
}

pub fn leaky_relu_backward<T: Scalar>(grad: &Tensor<T>, x: &Tensor<T>, slope: T) -> Tensor<T> {
    let data = grad
        .data()
        .iter()
        .zip(x.data())
        .map(|(&g, &v)| if v > T::zero() { g } else { g * slope })
        .collect();
    Tensor::from_parts(x.dims().to_vec(), data)
}

// tanh approximation: 0.5·x·(1 + tanh(√(2/π)·(x + 0.044715·x³)))
const GELU_K: f64 = 0.797_884_560_802_865_4;
const GELU_C: f64 = 0.044_715;

#[inline]
pub fn gelu_scalar<T: Scalar>(x: T) -> T {
    let inner = T::of(GELU_K) * (x + T::of(GELU_C) * x * x * x);
    T::of(0.5) * x * (T::one() + inner.tanh())
}

#[inline]
fn gelu_grad_scalar<T: Scalar>(x: T) -> T {
    let inner = T::of(GELU_K) * (x + T::of(GELU_C) * x * x * x);
    let t = inner.tanh();
    let dinner = T::of(GELU_K) * (T::one() + T::of(3.0 * GELU_C) * x * x);
    T::of(0.5) * (T::one() + t) + T::of(0.5) * x * (T::one() - t * t) * dinner
}

pub fn gelu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(gelu_scalar)
}

pub fn gelu_backward<T: Scalar>(grad: &Tensor<T>, x: &Tensor<T>) -> Tensor<T> {
    let data = grad.data().iter().zip(x.data()).map(|(&g, &v)| g * gelu_grad_scalar(v)).collect();
    Tensor::from_parts(x.dims().to_vec(), data)
}
