//! Scalar objectives: reconstruction losses and the local gradient detector.

use crate::error::{Error, Result};
use crate::tensor::{dims_str, Scalar, Tensor};

/// Mean absolute error.
pub fn l1_loss<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<T> {
    a.check_same(b, "l1_loss")?;
    let s = a.data().iter().zip(b.data()).fold(T::zero(), |s, (&x, &y)| s + (x - y).abs());
    Ok(s / T::of(a.len() as f64))
}

/// `sign(a - b) / N`, with `sign(0) = 0`.
pub fn l1_loss_grad<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    a.check_same(b, "l1_loss")?;
    let n = T::of(a.len() as f64);
    a.zip_map(b, "l1_loss", |x, y| sign(x - y) / n)
}

/// Mean squared error.
pub fn l2_loss<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<T> {
    a.check_same(b, "l2_loss")?;
    let s = a.data().iter().zip(b.data()).fold(T::zero(), |s, (&x, &y)| s + (x - y) * (x - y));
    Ok(s / T::of(a.len() as f64))
}

pub fn l2_loss_grad<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let n = T::of(a.len() as f64);
    a.zip_map(b, "l2_loss", |x, y| T::of(2.0) * (x - y) / n)
}

#[inline]
pub(crate) fn sign<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        T::one()
    } else if x < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

/// Square `l×l` window with origin `(x, y)` on plane `view` of an
/// `(N, A, B, C)` tensor; `x` indexes axis A and `y` axis B. Channel 0 is read.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Window {
    pub view: usize,
    pub x: usize,
    pub y: usize,
    pub l: usize,
}

impl Window {
    /// Forward differences need one extra sample past the window on each axis.
    pub fn check(&self, dims: &[usize]) -> Result<()> {
        let [n, a, b, _] = match *dims {
            [n, a, b, c] => [n, a, b, c],
            _ => return Err(Error::shape("detector", format!("expected (N,A,B,C), got {}", dims_str(dims)))),
        };
        if self.l == 0 || self.view >= n || self.x + self.l >= a || self.y + self.l >= b {
            return Err(Error::Invalid(format!(
                "window view={} origin=({},{}) l={} out of bounds for {n} views of {a}x{b}",
                self.view, self.x, self.y, self.l
            )));
        }
        Ok(())
    }
}

/// `Σ |I(i+1,j) - I(i,j)| + |I(i,j+1) - I(i,j)|` over the window.
pub fn window_gradient<T: Scalar>(img: &Tensor<T>, win: &Window) -> Result<T> {
    win.check(img.dims())?;
    let [_, a, b, c] = [img.dims()[0], img.dims()[1], img.dims()[2], img.dims()[3]];
    let at = |i: usize, j: usize| img.data()[((win.view * a + i) * b + j) * c];
    let mut s = T::zero();
    for i in win.x..win.x + win.l {
        for j in win.y..win.y + win.l {
            s += (at(i + 1, j) - at(i, j)).abs() + (at(i, j + 1) - at(i, j)).abs();
        }
    }
    Ok(s)
}

pub fn window_gradient_grad<T: Scalar>(img: &Tensor<T>, win: &Window) -> Result<Tensor<T>> {
    win.check(img.dims())?;
    let [_, a, b, c] = [img.dims()[0], img.dims()[1], img.dims()[2], img.dims()[3]];
    let idx = |i: usize, j: usize| ((win.view * a + i) * b + j) * c;
    let d = img.data();
    let mut g = vec![T::zero(); img.len()];
    for i in win.x..win.x + win.l {
        for j in win.y..win.y + win.l {
            let here = idx(i, j);
            for next in [idx(i + 1, j), idx(i, j + 1)] {
                let s = sign(d[next] - d[here]);
                g[next] += s;
                g[here] -= s;
            }
        }
    }
    Ok(Tensor::from_parts(img.dims().to_vec(), g))
}
