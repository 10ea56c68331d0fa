//! Separable bicubic resampling.
//!
//! Cubic convolution kernel with `a = -0.5`, center-aligned sampling
//! (`src = (dst + 0.5)/s - 0.5`), edge-replicate boundaries. When shrinking,
//! the kernel is stretched by `1/s` (antialiasing), and tap weights are
//! normalized to sum to one.

use crate::error::{Error, Result};
use crate::tensor::{dims_str, Scalar, Tensor};

pub const CUBIC_A: f64 = -0.5;

pub fn cubic_kernel(t: f64) -> f64 {
    let a = CUBIC_A;
    let t = t.abs();
    if t <= 1.0 {
        (a + 2.0) * t * t * t - (a + 3.0) * t * t + 1.0
    } else if t < 2.0 {
        a * t * t * t - 5.0 * a * t * t + 8.0 * a * t - 4.0 * a
    } else {
        0.0
    }
}

/// Output length for an input of `len` samples at `scale`.
pub fn resized_len(len: usize, scale: f64) -> usize {
    (len as f64 * scale).round() as usize
}

/// Tap indices and weights for every output sample along one axis.
#[derive(Clone, Debug, PartialEq)]
pub struct AxisPlan {
    pub in_len: usize,
    pub out_len: usize,
    taps: Vec<Vec<(usize, f64)>>,
}

impl AxisPlan {
    pub fn new(in_len: usize, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::Invalid(format!("resize scale must be positive, got {scale}")));
        }
        let out_len = resized_len(in_len, scale);
        if out_len < 1 || in_len < 1 {
            return Err(Error::Invalid(format!("resize of {in_len} samples by {scale} gives {out_len}")));
        }
        let stretch = if scale < 1.0 { scale } else { 1.0 };
        let support = 2.0 / stretch;
        let taps = (0..out_len)
            .map(|o| {
                let src = (o as f64 + 0.5) / scale - 0.5;
                let lo = (src - support).floor() as isize;
                let hi = (src + support).ceil() as isize;
                let mut row: Vec<(usize, f64)> = (lo..=hi)
                    .filter_map(|j| {
                        let w = stretch * cubic_kernel(stretch * (src - j as f64));
                        (w != 0.0).then(|| (j.clamp(0, in_len as isize - 1) as usize, w))
                    })
                    .collect();
                let total: f64 = row.iter().map(|t| t.1).sum();
                for t in &mut row {
                    t.1 /= total;
                }
                row
            })
            .collect();
        Ok(AxisPlan { in_len, out_len, taps })
    }

    pub fn taps(&self, out: usize) -> &[(usize, f64)] {
        &self.taps[out]
    }
}

/// Resampling plan for both spatial axes of `(N, A, B, C)` images.
#[derive(Clone, Debug, PartialEq)]
pub struct ResizePlan {
    pub a: AxisPlan,
    pub b: AxisPlan,
}

impl ResizePlan {
    pub fn new(len_a: usize, len_b: usize, scale: f64) -> Result<Self> {
        Ok(ResizePlan { a: AxisPlan::new(len_a, scale)?, b: AxisPlan::new(len_b, scale)? })
    }
}

fn split<T: Scalar>(x: &Tensor<T>, op: &'static str) -> Result<[usize; 4]> {
    match *x.dims() {
        [n, a, b, c] => Ok([n, a, b, c]),
        _ => Err(Error::shape(op, format!("expected (N,A,B,C), got {}", dims_str(x.dims())))),
    }
}

/// Applies `plan` along axis 1 (`along_a`) or axis 2 of a 4-D tensor.
fn apply_axis<T: Scalar>(x: &[T], dims: [usize; 4], plan: &AxisPlan, along_a: bool) -> (Vec<T>, [usize; 4]) {
    let [n, a, b, c] = dims;
    let out_dims = if along_a { [n, plan.out_len, b, c] } else { [n, a, plan.out_len, c] };
    let mut out = vec![T::zero(); out_dims.iter().product()];
    for ni in 0..n {
        for ia in 0..out_dims[1] {
            for ib in 0..out_dims[2] {
                let o = ((ni * out_dims[1] + ia) * out_dims[2] + ib) * c;
                let taps = plan.taps(if along_a { ia } else { ib });
                for &(j, w) in taps {
                    let src = if along_a { ((ni * a + j) * b + ib) * c } else { ((ni * a + ia) * b + j) * c };
                    let w = T::of(w);
                    for ch in 0..c {
                        out[o + ch] += w * x[src + ch];
                    }
                }
            }
        }
    }
    (out, out_dims)
}

/// Transpose of [`apply_axis`]: scatters `g` (shaped like the output) back.
fn apply_axis_t<T: Scalar>(g: &[T], in_dims: [usize; 4], plan: &AxisPlan, along_a: bool) -> Vec<T> {
    let [n, a, b, c] = in_dims;
    let out_dims = if along_a { [n, plan.out_len, b, c] } else { [n, a, plan.out_len, c] };
    let mut out = vec![T::zero(); in_dims.iter().product()];
    for ni in 0..n {
        for ia in 0..out_dims[1] {
            for ib in 0..out_dims[2] {
                let o = ((ni * out_dims[1] + ia) * out_dims[2] + ib) * c;
                let taps = plan.taps(if along_a { ia } else { ib });
                for &(j, w) in taps {
                    let dst = if along_a { ((ni * a + j) * b + ib) * c } else { ((ni * a + ia) * b + j) * c };
                    let w = T::of(w);
                    for ch in 0..c {
                        out[dst + ch] += w * g[o + ch];
                    }
                }
            }
        }
    }
    out
}

fn check_plan(dims: [usize; 4], plan: &ResizePlan, op: &'static str) -> Result<()> {
    if dims[1] != plan.a.in_len || dims[2] != plan.b.in_len {
        return Err(Error::shape(
            op,
            format!("plan for {}x{} applied to {}", plan.a.in_len, plan.b.in_len, dims_str(&dims)),
        ));
    }
    Ok(())
}

pub fn resize_with<T: Scalar>(x: &Tensor<T>, plan: &ResizePlan) -> Result<Tensor<T>> {
    let dims = split(x, "resize")?;
    check_plan(dims, plan, "resize")?;
    let (tmp, d1) = apply_axis(x.data(), dims, &plan.a, true);
    let (out, d2) = apply_axis(&tmp, d1, &plan.b, false);
    Ok(Tensor::from_parts(d2.to_vec(), out))
}

pub fn resize_backward<T: Scalar>(grad: &Tensor<T>, in_dims: &[usize], plan: &ResizePlan) -> Result<Tensor<T>> {
    let dims: [usize; 4] = in_dims.try_into().map_err(|_| Error::shape("resize_backward", "input rank"))?;
    check_plan(dims, plan, "resize_backward")?;
    let mid = [dims[0], plan.a.out_len, dims[2], dims[3]];
    if grad.dims() != [dims[0], plan.a.out_len, plan.b.out_len, dims[3]] {
        return Err(Error::shape("resize_backward", format!("grad {}", dims_str(grad.dims()))));
    }
    let g1 = apply_axis_t(grad.data(), mid, &plan.b, false);
    let g0 = apply_axis_t(&g1, dims, &plan.a, true);
    Ok(Tensor::from_parts(in_dims.to_vec(), g0))
}

/// Bicubic resize of a `(C, H, W)` image by `scale`.
pub fn bicubic_resize<T: Scalar>(x: &Tensor<T>, scale: f64) -> Result<Tensor<T>> {
    let [c, h, w] = match *x.dims() {
        [c, h, w] => [c, h, w],
        _ => return Err(Error::shape("bicubic_resize", format!("expected (C,H,W), got {}", dims_str(x.dims())))),
    };
    let plan = ResizePlan::new(h, w, scale)?;
    let nhwc = x.clone().reshape(&[c, h, w, 1])?;
    let out = resize_with(&nhwc, &plan)?;
    out.reshape(&[c, plan.a.out_len, plan.b.out_len])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_interpolates() {
        assert_eq!(cubic_kernel(0.0), 1.0);
        assert_eq!(cubic_kernel(1.0), 0.0);
        assert_eq!(cubic_kernel(2.0), 0.0);
        let s: f64 = [-1.75, -0.75, 0.25, 1.25].iter().map(|&t| cubic_kernel(t)).sum();
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn upscale_shape() {
        let x = Tensor::<f64>::zeros(&[1, 4, 4]);
        assert_eq!(bicubic_resize(&x, 2.0).unwrap().dims(), &[1, 8, 8]);
        assert_eq!(bicubic_resize(&x, 0.25).unwrap().dims(), &[1, 1, 1]);
    }

    #[test]
    fn rejects_empty_output() {
        let x = Tensor::<f64>::zeros(&[1, 2, 2]);
        assert!(bicubic_resize(&x, 0.1).is_err());
    }

    #[test]
    fn constant_is_preserved() {
        let x = Tensor::<f64>::full(&[2, 5, 3], 0.625);
        for s in [0.25, 0.5, 2.0, 4.0] {
            let Ok(y) = bicubic_resize(&x, s) else { continue };
            for &v in y.data() {
                assert!((v - 0.625).abs() < 1e-12, "scale {s}: {v}");
            }
        }
    }
}
