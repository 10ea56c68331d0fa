use crate::error::{Error, Result};
use crate::par;
use crate::tensor::{dims_str, Scalar, Tensor};

pub const LAYER_NORM_EPS: f64 = 1e-5;

fn check<T: Scalar>(x: &Tensor<T>, gain: &Tensor<T>, offset: &Tensor<T>) -> Result<usize> {
    let d = *x.dims().last().unwrap();
    if gain.dims() != [d] || offset.dims() != [d] {
        return Err(Error::shape(
            "layer_norm",
            format!("affine {} / {} vs last dim {d}", dims_str(gain.dims()), dims_str(offset.dims())),
        ));
    }
    Ok(d)
}

fn moments<T: Scalar>(row: &[T]) -> (T, T) {
    let n = T::of(row.len() as f64);
    let mean = row.iter().fold(T::zero(), |s, &x| s + x) / n;
    let var = row.iter().fold(T::zero(), |s, &x| s + (x - mean) * (x - mean)) / n;
    (mean, T::one() / (var + T::of(LAYER_NORM_EPS)).sqrt())
}

/// Per-token standardization over the last axis, then `gain·x̂ + offset`.
pub fn layer_norm<T: Scalar>(x: &Tensor<T>, gain: &Tensor<T>, offset: &Tensor<T>) -> Result<Tensor<T>> {
    let d = check(x, gain, offset)?;
    let (g, o) = (gain.data(), offset.data());
    let mut out = x.data().to_vec();
    par::for_each_chunk(&mut out, d, |_, row| {
        let (mean, inv) = moments(row);
        for ((x, &gv), &ov) in row.iter_mut().zip(g).zip(o) {
            *x = (*x - mean) * inv * gv + ov;
        }
    });
    Ok(Tensor::from_parts(x.dims().to_vec(), out))
}

/// Gradients of [`layer_norm`] w.r.t. input, gain and offset.
pub fn layer_norm_backward<T: Scalar>(
    grad: &Tensor<T>,
    x: &Tensor<T>,
    gain: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let d = check(x, gain, gain)?;
    let (gd, xd, g) = (grad.data(), x.data(), gain.data());
    let dn = T::of(d as f64);
    let mut gx = vec![T::zero(); x.len()];
    par::for_each_chunk(&mut gx, d, |r, o| {
        let xr = &xd[r * d..(r + 1) * d];
        let gr = &gd[r * d..(r + 1) * d];
        let (mean, inv) = moments(xr);
        let mut sum_gh = T::zero();
        let mut sum_gh_xh = T::zero();
        for i in 0..d {
            let gh = gr[i] * g[i];
            let xh = (xr[i] - mean) * inv;
            sum_gh += gh;
            sum_gh_xh += gh * xh;
        }
        for i in 0..d {
            let gh = gr[i] * g[i];
            let xh = (xr[i] - mean) * inv;
            o[i] = inv * (gh - sum_gh / dn - xh * sum_gh_xh / dn);
        }
    });
    let mut ggain = vec![T::zero(); d];
    let mut goff = vec![T::zero(); d];
    for (xr, gr) in xd.chunks(d).zip(gd.chunks(d)) {
        let (mean, inv) = moments(xr);
        for i in 0..d {
            ggain[i] += gr[i] * (xr[i] - mean) * inv;
            goff[i] += gr[i];
        }
    }
    Ok((
        Tensor::from_parts(x.dims().to_vec(), gx),
        Tensor::from_parts(vec![d], ggain),
        Tensor::from_parts(vec![d], goff),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_token_maps_to_offset() {
        let x = Tensor::<f64>::full(&[2, 3], 7.5);
        let gain = Tensor::from_fn(&[3], |i| i as f64 + 1.0);
        let offset = Tensor::new(vec![3], vec![0.1, -0.2, 0.3]).unwrap();
        let y = layer_norm(&x, &gain, &offset).unwrap();
        for row in y.data().chunks(3) {
            assert_eq!(row, offset.data());
        }
    }

    #[test]
    fn plus_minus_one() {
        let x = Tensor::new(vec![2], vec![1.0f64, -1.0]).unwrap();
        let y = layer_norm(&x, &Tensor::full(&[2], 1.0), &Tensor::zeros(&[2])).unwrap();
        let s = (1.0f64 + 1e-5).sqrt();
        assert!((y.data()[0] - 1.0 / s).abs() < 1e-15);
        assert!((y.data()[1] + 1.0 / s).abs() < 1e-15);
    }
}
