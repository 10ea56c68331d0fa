use crate::error::{Error, Result};
use crate::par;
use crate::tensor::{dims_str, Scalar, Tensor};

/// Weight `(Din, Dout)` and bias `(Dout)` of an affine map along the last axis.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearParams<T = f64> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Scalar> LinearParams<T> {
    pub fn zeros(din: usize, dout: usize) -> Self {
        LinearParams { weight: Tensor::zeros(&[din, dout]), bias: Tensor::zeros(&[dout]) }
    }

    pub fn din(&self) -> usize {
        self.weight.dims()[0]
    }

    pub fn dout(&self) -> usize {
        self.weight.dims()[1]
    }

    pub fn apply(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        linear(x, &self.weight, Some(&self.bias))
    }
}

fn check<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, b: Option<&Tensor<T>>) -> Result<(usize, usize, usize)> {
    let (din, dout) = match *w.dims() {
        [din, dout] => (din, dout),
        _ => return Err(Error::shape("linear", format!("weight must be 2-D, got {}", dims_str(w.dims())))),
    };
    let last = *x.dims().last().unwrap();
    if last != din {
        return Err(Error::shape(
            "linear",
            format!("input {} last dim != Din {}", dims_str(x.dims()), din),
        ));
    }
    if let Some(b) = b {
        if b.dims() != [dout] {
            return Err(Error::shape("linear", format!("bias {} != ({dout})", dims_str(b.dims()))));
        }
    }
    Ok((x.len() / din, din, dout))
}

/// `x·W + b` applied to every row of `x` (all leading axes preserved).
pub fn linear<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, b: Option<&Tensor<T>>) -> Result<Tensor<T>> {
    let (rows, din, dout) = check(x, w, b)?;
    let (xd, wd) = (x.data(), w.data());
    let mut out = vec![T::zero(); rows * dout];
    par::for_each_chunk(&mut out, dout, |r, o| {
        if let Some(b) = b {
            o.copy_from_slice(b.data());
        }
        let xr = &xd[r * din..(r + 1) * din];
        for (i, &xv) in xr.iter().enumerate() {
            let wr = &wd[i * dout..(i + 1) * dout];
            for (acc, &wv) in o.iter_mut().zip(wr) {
                *acc += xv * wv;
            }
        }
    });
    let mut dims = x.dims().to_vec();
    *dims.last_mut().unwrap() = dout;
    Ok(Tensor::from_parts(dims, out))
}

/// Gradients of [`linear`] w.r.t. input, weight and bias.
pub fn linear_backward<T: Scalar>(
    grad: &Tensor<T>,
    x: &Tensor<T>,
    w: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let (rows, din, dout) = check(x, w, None)?;
    if grad.len() != rows * dout {
        return Err(Error::shape("linear_backward", "grad size"));
    }
    let (gd, xd, wd) = (grad.data(), x.data(), w.data());

    let mut gx = vec![T::zero(); rows * din];
    par::for_each_chunk(&mut gx, din, |r, o| {
        let gr = &gd[r * dout..(r + 1) * dout];
        for (i, acc) in o.iter_mut().enumerate() {
            let wr = &wd[i * dout..(i + 1) * dout];
            *acc = gr.iter().zip(wr).fold(T::zero(), |s, (&g, &wv)| s + g * wv);
        }
    });

    let mut gw = vec![T::zero(); din * dout];
    par::for_each_chunk(&mut gw, dout, |i, o| {
        for r in 0..rows {
            let xv = xd[r * din + i];
            let gr = &gd[r * dout..(r + 1) * dout];
            for (acc, &g) in o.iter_mut().zip(gr) {
                *acc += xv * g;
            }
        }
    });

    let mut gb = vec![T::zero(); dout];
    for r in 0..rows {
        for (acc, &g) in gb.iter_mut().zip(&gd[r * dout..(r + 1) * dout]) {
            *acc += g;
        }
    }

    Ok((
        Tensor::from_parts(x.dims().to_vec(), gx),
        Tensor::from_parts(vec![din, dout], gw),
        Tensor::from_parts(vec![dout], gb),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_weight_passes_input() {
        let p = LinearParams { weight: Tensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap(), bias: Tensor::zeros(&[2]) };
        let x = Tensor::new(vec![3, 2], vec![1.0, -2.0, 0.5, 4.0, 9.0, 1e-3]).unwrap();
        assert_eq!(p.apply(&x).unwrap(), x);
    }

    #[test]
    fn affine_with_bias() {
        let p = LinearParams {
            weight: Tensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap(),
            bias: Tensor::new(vec![2], vec![3.0, 4.0]).unwrap(),
        };
        let y = p.apply(&Tensor::new(vec![2], vec![1.0, 2.0]).unwrap()).unwrap();
        assert_eq!(y.data(), &[4.0, 6.0]);
    }

    #[test]
    fn rejects_mismatched_din() {
        let p = LinearParams::<f64>::zeros(3, 2);
        assert!(p.apply(&Tensor::zeros(&[2, 4])).is_err());
    }
}
