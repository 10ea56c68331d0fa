//! Parameterized building blocks shared by the transformer blocks and networks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::Backend;
use crate::error::{Error, Result};
use crate::ops::{Conv2dParams, LinearParams};
use crate::tensor::{dims_str, Scalar, Tensor};

/// Anything that owns named parameters.
///
/// Visiting order is the registry order: deterministic and identical between
/// `visit` and `visit_mut`.
pub trait Module<T: Scalar> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor<T>));
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor<T>));

    fn num_params(&self) -> usize {
        let mut n = 0;
        self.visit("", &mut |_, t| n += t.len());
        n
    }

    fn zero_all(&mut self) {
        self.visit_mut("", &mut |_, t| t.data_mut().iter_mut().for_each(|x| *x = T::zero()));
    }
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

/// Source of initial parameter values: Glorot-uniform from a seeded stream,
/// or all zeros (a skeleton to be filled from a weight file).
pub struct Initializer {
    rng: Option<ChaCha8Rng>,
}

impl Initializer {
    pub fn seeded(seed: u64) -> Self {
        Initializer { rng: Some(ChaCha8Rng::seed_from_u64(seed)) }
    }

    pub fn zeros() -> Self {
        Initializer { rng: None }
    }

    /// Uniform on `±sqrt(6 / (fan_in + fan_out))`, drawn in f64.
    pub fn glorot<T: Scalar>(&mut self, dims: &[usize], fan_in: usize, fan_out: usize) -> Tensor<T> {
        match &mut self.rng {
            None => Tensor::zeros(dims),
            Some(rng) => {
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                Tensor::from_fn(dims, |_| T::of(rng.gen_range(-limit..limit)))
            }
        }
    }

    pub fn linear<T: Scalar>(&mut self, din: usize, dout: usize) -> LinearParams<T> {
        LinearParams { weight: self.glorot(&[din, dout], din, dout), bias: Tensor::zeros(&[dout]) }
    }

    pub fn conv<T: Scalar>(&mut self, cout: usize, cin: usize, k: usize) -> Conv2dParams<T> {
        Conv2dParams {
            kernel: self.glorot(&[cout, cin, k, k], cin * k * k, cout * k * k),
            bias: Tensor::zeros(&[cout]),
        }
    }

    pub fn norm<T: Scalar>(&mut self, d: usize) -> NormParams<T> {
        let gain = if self.rng.is_some() { Tensor::full(&[d], T::one()) } else { Tensor::zeros(&[d]) };
        NormParams { gain, offset: Tensor::zeros(&[d]) }
    }
}

impl<T: Scalar> Module<T> for LinearParams<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor<T>)) {
        f(&join(prefix, "weight"), &self.weight);
        f(&join(prefix, "bias"), &self.bias);
    }
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor<T>)) {
        f(&join(prefix, "weight"), &mut self.weight);
        f(&join(prefix, "bias"), &mut self.bias);
    }
}

impl<T: Scalar> Module<T> for Conv2dParams<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor<T>)) {
        f(&join(prefix, "weight"), &self.kernel);
        f(&join(prefix, "bias"), &self.bias);
    }
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor<T>)) {
        f(&join(prefix, "weight"), &mut self.kernel);
        f(&join(prefix, "bias"), &mut self.bias);
    }
}

impl<T: Scalar> LinearParams<T> {
    pub(crate) fn forward<B: Backend<T>>(&self, be: &B, prefix: &str, x: &B::Value) -> Result<B::Value> {
        let w = be.param(&join(prefix, "weight"), &self.weight);
        let b = be.param(&join(prefix, "bias"), &self.bias);
        be.linear(x, &w, Some(&b))
    }
}

impl<T: Scalar> Conv2dParams<T> {
    pub(crate) fn forward<B: Backend<T>>(&self, be: &B, prefix: &str, x: &B::Value) -> Result<B::Value> {
        let k = be.param(&join(prefix, "weight"), &self.kernel);
        let b = be.param(&join(prefix, "bias"), &self.bias);
        be.conv2d(x, &k, Some(&b))
    }
}

/// Layer-norm affine parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct NormParams<T = f64> {
    pub gain: Tensor<T>,
    pub offset: Tensor<T>,
}

impl<T: Scalar> Module<T> for NormParams<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor<T>)) {
        f(&join(prefix, "gain"), &self.gain);
        f(&join(prefix, "offset"), &self.offset);
    }
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor<T>)) {
        f(&join(prefix, "gain"), &mut self.gain);
        f(&join(prefix, "offset"), &mut self.offset);
    }
}

impl<T: Scalar> NormParams<T> {
    pub(crate) fn forward<B: Backend<T>>(&self, be: &B, prefix: &str, x: &B::Value) -> Result<B::Value> {
        let g = be.param(&join(prefix, "gain"), &self.gain);
        let o = be.param(&join(prefix, "offset"), &self.offset);
        be.layer_norm(x, &g, &o)
    }
}

/// Pre-norm feed-forward sublayer with residual: `x + fc2(gelu(fc1(norm(x))))`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeedForward<T = f64> {
    pub norm: Option<NormParams<T>>,
    pub fc1: LinearParams<T>,
    pub fc2: LinearParams<T>,
}

impl<T: Scalar> FeedForward<T> {
    pub fn new(init: &mut Initializer, dim: usize, ratio: usize, norm: bool) -> Self {
        FeedForward {
            norm: norm.then(|| init.norm(dim)),
            fc1: init.linear(dim, dim * ratio),
            fc2: init.linear(dim * ratio, dim),
        }
    }

    pub(crate) fn forward<B: Backend<T>>(&self, be: &B, prefix: &str, x: &B::Value) -> Result<B::Value> {
        let h = match &self.norm {
            Some(n) => n.forward(be, &join(prefix, "norm"), x)?,
            None => x.clone(),
        };
        let h = self.fc1.forward(be, &join(prefix, "fc1"), &h)?;
        let h = be.gelu(&h);
        let h = self.fc2.forward(be, &join(prefix, "fc2"), &h)?;
        be.add(x, &h)
    }
}

impl<T: Scalar> Module<T> for FeedForward<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor<T>)) {
        if let Some(n) = &self.norm {
            n.visit(&join(prefix, "norm"), f);
        }
        self.fc1.visit(&join(prefix, "fc1"), f);
        self.fc2.visit(&join(prefix, "fc2"), f);
    }
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor<T>)) {
        if let Some(n) = &mut self.norm {
            n.visit_mut(&join(prefix, "norm"), f);
        }
        self.fc1.visit_mut(&join(prefix, "fc1"), f);
        self.fc2.visit_mut(&join(prefix, "fc2"), f);
    }
}

/// Single-head self-attention sublayer with residual:
/// `x + out_proj(attention(q(a), k(a), v(a)))` where `a = norm(x + pos)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SelfAttention<T = f64> {
    pub norm: Option<NormParams<T>>,
    pub q: LinearParams<T>,
    pub k: LinearParams<T>,
    pub v: LinearParams<T>,
    pub out_proj: Option<LinearParams<T>>,
}

impl<T: Scalar> SelfAttention<T> {
    pub fn new(init: &mut Initializer, dim: usize, norm: bool, out_proj: bool) -> Self {
        SelfAttention {
            norm: norm.then(|| init.norm(dim)),
            q: init.linear(dim, dim),
            k: init.linear(dim, dim),
            v: init.linear(dim, dim),
            out_proj: out_proj.then(|| init.linear(dim, dim)),
        }
    }

    /// The attention term alone (no residual), for `(B, T, D)` tokens.
    pub(crate) fn attend<B: Backend<T>>(
        &self,
        be: &B,
        prefix: &str,
        x: &B::Value,
        pos: Option<&B::Value>,
    ) -> Result<B::Value> {
        let mut a = match pos {
            Some(p) => be.add_broadcast(x, p)?,
            None => x.clone(),
        };
        if let Some(n) = &self.norm {
            a = n.forward(be, &join(prefix, "norm"), &a)?;
        }
        let q = self.q.forward(be, &join(prefix, "q"), &a)?;
        let k = self.k.forward(be, &join(prefix, "k"), &a)?;
        let v = self.v.forward(be, &join(prefix, "v"), &a)?;
        let o = be.attention(&q, &k, &v)?;
        match &self.out_proj {
            Some(p) => p.forward(be, &join(prefix, "out_proj"), &o),
            None => Ok(o),
        }
    }

    pub(crate) fn forward<B: Backend<T>>(
        &self,
        be: &B,
        prefix: &str,
        x: &B::Value,
        pos: Option<&B::Value>,
    ) -> Result<B::Value> {
        let o = self.attend(be, prefix, x, pos)?;
        be.add(x, &o)
    }
}

impl<T: Scalar> Module<T> for SelfAttention<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor<T>)) {
        if let Some(n) = &self.norm {
            n.visit(&join(prefix, "norm"), f);
        }
        self.q.visit(&join(prefix, "q"), f);
        self.k.visit(&join(prefix, "k"), f);
        self.v.visit(&join(prefix, "v"), f);
        if let Some(p) = &self.out_proj {
            p.visit(&join(prefix, "out_proj"), f);
        }
    }
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor<T>)) {
        if let Some(n) = &mut self.norm {
            n.visit_mut(&join(prefix, "norm"), f);
        }
        self.q.visit_mut(&join(prefix, "q"), f);
        self.k.visit_mut(&join(prefix, "k"), f);
        self.v.visit_mut(&join(prefix, "v"), f);
        if let Some(p) = &mut self.out_proj {
            p.visit_mut(&join(prefix, "out_proj"), f);
        }
    }
}

/// Splits a 4-D value's dims.
pub(crate) fn dims4(d: &[usize], op: &'static str) -> Result<[usize; 4]> {
    match *d {
        [a, b, c, e] => Ok([a, b, c, e]),
        _ => Err(Error::shape(op, format!("expected 4 dims, got {}", dims_str(d)))),
    }
}

/// Draws a uniform tensor on `[lo, hi)`; used by tests and demos.
pub fn random_tensor<T: Scalar>(rng: &mut impl Rng, dims: &[usize], lo: f64, hi: f64) -> Tensor<T> {
    Tensor::from_fn(dims, |_| T::of(rng.gen_range(lo..hi)))
}
