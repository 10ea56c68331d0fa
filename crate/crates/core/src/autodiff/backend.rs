//! Execution backends. Model code is written once against [`Backend`] and
//! runs either eagerly on tensors ([`Eager`]) or recorded on a [`Tape`].

use crate::error::{Error, Result};
use crate::ops::{self, activation, attention, conv, linear, loss, norm, resize, shuffle, ResizePlan, Window};
use crate::tensor::{dims_str, Scalar, Tensor};

use super::tape::{Tape, Var};

pub trait Backend<T: Scalar> {
    type Value: Clone;

    fn constant(&self, t: Tensor<T>) -> Self::Value;
    fn param(&self, name: &str, t: &Tensor<T>) -> Self::Value;
    fn to_tensor(&self, x: &Self::Value) -> Tensor<T>;
    fn dims(&self, x: &Self::Value) -> Vec<usize>;

    fn reshape(&self, x: &Self::Value, dims: &[usize]) -> Result<Self::Value>;
    fn permute(&self, x: &Self::Value, axes: &[usize]) -> Result<Self::Value>;
    fn add(&self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value>;
    /// `a + b` with `b` repeated over the leading axes of `a`.
    fn add_broadcast(&self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value>;
    fn mul(&self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value>;
    fn scale(&self, x: &Self::Value, s: T) -> Self::Value;
    fn sum(&self, x: &Self::Value) -> Self::Value;

    fn linear(&self, x: &Self::Value, w: &Self::Value, b: Option<&Self::Value>) -> Result<Self::Value>;
    fn conv2d(&self, x: &Self::Value, k: &Self::Value, b: Option<&Self::Value>) -> Result<Self::Value>;
    fn leaky_relu(&self, x: &Self::Value, slope: T) -> Self::Value;
    fn gelu(&self, x: &Self::Value) -> Self::Value;
    fn layer_norm(&self, x: &Self::Value, gain: &Self::Value, offset: &Self::Value) -> Result<Self::Value>;
    fn softmax(&self, x: &Self::Value) -> Self::Value;
    fn attention(&self, q: &Self::Value, k: &Self::Value, v: &Self::Value) -> Result<Self::Value>;
    fn pixel_shuffle(&self, x: &Self::Value, r: usize) -> Result<Self::Value>;
    fn resize(&self, x: &Self::Value, plan: &ResizePlan) -> Result<Self::Value>;

    fn l1_loss(&self, a: &Self::Value, target: &Tensor<T>) -> Result<Self::Value>;
    fn l2_loss(&self, a: &Self::Value, target: &Tensor<T>) -> Result<Self::Value>;
    fn window_gradient(&self, x: &Self::Value, win: &Window) -> Result<Self::Value>;
}

/// Tape-free evaluation.
#[derive(Clone, Copy, Debug, Default)]
pub struct Eager;

impl<T: Scalar> Backend<T> for Eager {
    type Value = Tensor<T>;

    fn constant(&self, t: Tensor<T>) -> Tensor<T> {
        t
    }
    fn param(&self, _name: &str, t: &Tensor<T>) -> Tensor<T> {
        t.clone()
    }
    fn to_tensor(&self, x: &Tensor<T>) -> Tensor<T> {
        x.clone()
    }
    fn dims(&self, x: &Tensor<T>) -> Vec<usize> {
        x.dims().to_vec()
    }
    fn reshape(&self, x: &Tensor<T>, dims: &[usize]) -> Result<Tensor<T>> {
        x.clone().reshape(dims)
    }
    fn permute(&self, x: &Tensor<T>, axes: &[usize]) -> Result<Tensor<T>> {
        x.permute(axes)
    }
    fn add(&self, a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
        a.add(b)
    }
    fn add_broadcast(&self, a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
        ops::add_broadcast(a, b)
    }
    fn mul(&self, a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
        a.zip_map(b, "mul", |x, y| x * y)
    }
    fn scale(&self, x: &Tensor<T>, s: T) -> Tensor<T> {
        x.scale(s)
    }
    fn sum(&self, x: &Tensor<T>) -> Tensor<T> {
        Tensor::scalar(x.sum())
    }
    fn linear(&self, x: &Tensor<T>, w: &Tensor<T>, b: Option<&Tensor<T>>) -> Result<Tensor<T>> {
        linear::linear(x, w, b)
    }
    fn conv2d(&self, x: &Tensor<T>, k: &Tensor<T>, b: Option<&Tensor<T>>) -> Result<Tensor<T>> {
        conv::conv2d(x, k, b)
    }
    fn leaky_relu(&self, x: &Tensor<T>, slope: T) -> Tensor<T> {
        activation::leaky_relu(x, slope)
    }
    fn gelu(&self, x: &Tensor<T>) -> Tensor<T> {
        activation::gelu(x)
    }
    fn layer_norm(&self, x: &Tensor<T>, gain: &Tensor<T>, offset: &Tensor<T>) -> Result<Tensor<T>> {
        norm::layer_norm(x, gain, offset)
    }
    fn softmax(&self, x: &Tensor<T>) -> Tensor<T> {
        attention::softmax(x)
    }
    fn attention(&self, q: &Tensor<T>, k: &Tensor<T>, v: &Tensor<T>) -> Result<Tensor<T>> {
        attention::attention(q, k, v)
    }
    fn pixel_shuffle(&self, x: &Tensor<T>, r: usize) -> Result<Tensor<T>> {
        shuffle::pixel_shuffle(x, r)
    }
    fn resize(&self, x: &Tensor<T>, plan: &ResizePlan) -> Result<Tensor<T>> {
        resize::resize_with(x, plan)
    }
    fn l1_loss(&self, a: &Tensor<T>, target: &Tensor<T>) -> Result<Tensor<T>> {
        loss::l1_loss(a, target).map(Tensor::scalar)
    }
    fn l2_loss(&self, a: &Tensor<T>, target: &Tensor<T>) -> Result<Tensor<T>> {
        loss::l2_loss(a, target).map(Tensor::scalar)
    }
    fn window_gradient(&self, x: &Tensor<T>, win: &Window) -> Result<Tensor<T>> {
        loss::window_gradient(x, win).map(Tensor::scalar)
    }
}

fn scalar_grad<T: Scalar>(g: &Tensor<T>) -> T {
    g.data()[0]
}

impl<T: Scalar> Backend<T> for Tape<T> {
    type Value = Var;

    fn constant(&self, t: Tensor<T>) -> Var {
        self.leaf(t)
    }
    fn param(&self, name: &str, t: &Tensor<T>) -> Var {
        self.named_leaf(name, t.clone())
    }
    fn to_tensor(&self, x: &Var) -> Tensor<T> {
        self.value(*x)
    }
    fn dims(&self, x: &Var) -> Vec<usize> {
        self.with_value(*x, |t| t.dims().to_vec())
    }

    fn reshape(&self, x: &Var, dims: &[usize]) -> Result<Var> {
        let dims = dims.to_vec();
        self.record(
            &[*x],
            |i| i[0].clone().reshape(&dims),
            Box::new(|g, i, _| Ok(vec![Some(g.clone().reshape(i[0].dims())?)])),
        )
    }

    fn permute(&self, x: &Var, axes: &[usize]) -> Result<Var> {
        let axes = axes.to_vec();
        let mut inv = vec![0; axes.len()];
        for (i, &a) in axes.iter().enumerate() {
            if a < inv.len() {
                inv[a] = i;
            }
        }
        self.record(&[*x], |i| i[0].permute(&axes), Box::new(move |g, _, _| Ok(vec![Some(g.permute(&inv)?)])))
    }

    fn add(&self, a: &Var, b: &Var) -> Result<Var> {
        self.record(
            &[*a, *b],
            |i| i[0].add(i[1]),
            Box::new(|g, _, _| Ok(vec![Some(g.clone()), Some(g.clone())])),
        )
    }

    fn add_broadcast(&self, a: &Var, b: &Var) -> Result<Var> {
        self.record(
            &[*a, *b],
            |i| ops::add_broadcast(i[0], i[1]),
            Box::new(|g, i, _| Ok(vec![Some(g.clone()), Some(ops::reduce_broadcast(g, i[1].dims()))])),
        )
    }

    fn mul(&self, a: &Var, b: &Var) -> Result<Var> {
        self.record(
            &[*a, *b],
            |i| i[0].zip_map(i[1], "mul", |x, y| x * y),
            Box::new(|g, i, _| {
                Ok(vec![
                    Some(g.zip_map(i[1], "mul", |x, y| x * y)?),
                    Some(g.zip_map(i[0], "mul", |x, y| x * y)?),
                ])
            }),
        )
    }

    fn scale(&self, x: &Var, s: T) -> Var {
        self.record(&[*x], |i| Ok(i[0].scale(s)), Box::new(move |g, _, _| Ok(vec![Some(g.scale(s))])))
            .expect("scale is infallible")
    }

    fn sum(&self, x: &Var) -> Var {
        self.record(
            &[*x],
            |i| Ok(Tensor::scalar(i[0].sum())),
            Box::new(|g, i, _| Ok(vec![Some(Tensor::full(i[0].dims(), scalar_grad(g)))])),
        )
        .expect("sum is infallible")
    }

    fn linear(&self, x: &Var, w: &Var, b: Option<&Var>) -> Result<Var> {
        let mut parents = vec![*x, *w];
        parents.extend(b.copied());
        self.record(
            &parents,
            |i| linear::linear(i[0], i[1], i.get(2).copied()),
            Box::new(|g, i, _| {
                let (gx, gw, gb) = linear::linear_backward(g, i[0], i[1])?;
                let mut out = vec![Some(gx), Some(gw)];
                if i.len() == 3 {
                    out.push(Some(gb));
                }
                Ok(out)
            }),
        )
    }

    fn conv2d(&self, x: &Var, k: &Var, b: Option<&Var>) -> Result<Var> {
        let mut parents = vec![*x, *k];
        parents.extend(b.copied());
        self.record(
            &parents,
            |i| conv::conv2d(i[0], i[1], i.get(2).copied()),
            Box::new(|g, i, _| {
                let (gx, gk, gb) = conv::conv2d_backward(g, i[0], i[1])?;
                let mut out = vec![Some(gx), Some(gk)];
                if i.len() == 3 {
                    out.push(Some(gb));
                }
                Ok(out)
            }),
        )
    }

    fn leaky_relu(&self, x: &Var, slope: T) -> Var {
        self.record(
            &[*x],
            |i| Ok(activation::leaky_relu(i[0], slope)),
            Box::new(move |g, i, _| Ok(vec![Some(activation::leaky_relu_backward(g, i[0], slope))])),
        )
        .expect("leaky_relu is infallible")
    }

    fn gelu(&self, x: &Var) -> Var {
        self.record(
            &[*x],
            |i| Ok(activation::gelu(i[0])),
            Box::new(|g, i, _| Ok(vec![Some(activation::gelu_backward(g, i[0]))])),
        )
        .expect("gelu is infallible")
    }

    fn layer_norm(&self, x: &Var, gain: &Var, offset: &Var) -> Result<Var> {
        self.record(
            &[*x, *gain, *offset],
            |i| norm::layer_norm(i[0], i[1], i[2]),
            Box::new(|g, i, _| {
                let (gx, gg, go) = norm::layer_norm_backward(g, i[0], i[1])?;
                Ok(vec![Some(gx), Some(gg), Some(go)])
            }),
        )
    }

    fn softmax(&self, x: &Var) -> Var {
        self.record(
            &[*x],
            |i| Ok(attention::softmax(i[0])),
            Box::new(|g, _, y| Ok(vec![Some(attention::softmax_backward(g, y))])),
        )
        .expect("softmax is infallible")
    }

    fn attention(&self, q: &Var, k: &Var, v: &Var) -> Result<Var> {
        self.record(
            &[*q, *k, *v],
            |i| attention::attention(i[0], i[1], i[2]),
            Box::new(|g, i, _| {
                let (gq, gk, gv) = attention::attention_backward(g, i[0], i[1], i[2])?;
                Ok(vec![Some(gq), Some(gk), Some(gv)])
            }),
        )
    }

    fn pixel_shuffle(&self, x: &Var, r: usize) -> Result<Var> {
        self.record(
            &[*x],
            |i| shuffle::pixel_shuffle(i[0], r),
            Box::new(move |g, _, _| Ok(vec![Some(shuffle::pixel_unshuffle(g, r)?)])),
        )
    }

    fn resize(&self, x: &Var, plan: &ResizePlan) -> Result<Var> {
        let plan_bw = plan.clone();
        self.record(
            &[*x],
            |i| resize::resize_with(i[0], plan),
            Box::new(move |g, i, _| Ok(vec![Some(resize::resize_backward(g, i[0].dims(), &plan_bw)?)])),
        )
    }

    fn l1_loss(&self, a: &Var, target: &Tensor<T>) -> Result<Var> {
        let t = target.clone();
        let t_fw = target.clone();
        self.record(
            &[*a],
            move |i| loss::l1_loss(i[0], &t_fw).map(Tensor::scalar),
            Box::new(move |g, i, _| Ok(vec![Some(loss::l1_loss_grad(i[0], &t)?.scale(scalar_grad(g)))])),
        )
    }

    fn l2_loss(&self, a: &Var, target: &Tensor<T>) -> Result<Var> {
        let t = target.clone();
        let t_fw = target.clone();
        self.record(
            &[*a],
            move |i| loss::l2_loss(i[0], &t_fw).map(Tensor::scalar),
            Box::new(move |g, i, _| Ok(vec![Some(loss::l2_loss_grad(i[0], &t)?.scale(scalar_grad(g)))])),
        )
    }

    fn window_gradient(&self, x: &Var, win: &Window) -> Result<Var> {
        let win = *win;
        self.record(
            &[*x],
            move |i| loss::window_gradient(i[0], &win).map(Tensor::scalar),
            Box::new(move |g, i, _| Ok(vec![Some(loss::window_gradient_grad(i[0], &win)?.scale(scalar_grad(g)))])),
        )
    }
}

/// Fails unless `x` has exactly `want` dims.
pub fn expect_dims<T: Scalar, B: Backend<T>>(be: &B, x: &B::Value, want: &[usize], op: &'static str) -> Result<()> {
    let got = be.dims(x);
    if got != want {
        return Err(Error::shape(op, format!("got {}, expected {}", dims_str(&got), dims_str(want))));
    }
    Ok(())
}
