//! Shape-preserving 2-D cross-correlation on channel-last images.
//!
//! Images are `(N, A, B, C)`: a batch of `N` planes with spatial axes `A`
//! (kernel rows) and `B` (kernel columns). Zero padding of `(k-1)/2`, stride 1.

use crate::error::{Error, Result};
use crate::par;
use crate::tensor::{dims_str, Scalar, Tensor};

/// Kernel `(Cout, Cin, kh, kw)` and bias `(Cout)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv2dParams<T = f64> {
    pub kernel: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Scalar> Conv2dParams<T> {
    pub fn zeros(cout: usize, cin: usize, k: usize) -> Self {
        Conv2dParams { kernel: Tensor::zeros(&[cout, cin, k, k]), bias: Tensor::zeros(&[cout]) }
    }

    pub fn padding(&self) -> usize {
        (self.kernel.dims()[2] - 1) / 2
    }

    pub fn apply(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        conv2d(x, &self.kernel, Some(&self.bias))
    }
}

#[derive(Clone, Copy)]
struct Geom {
    n: usize,
    ha: usize,
    wb: usize,
    cin: usize,
    cout: usize,
    kh: usize,
    kw: usize,
}

impl Geom {
    fn pad_a(&self) -> usize {
        (self.kh - 1) / 2
    }
    fn pad_b(&self) -> usize {
        (self.kw - 1) / 2
    }
}

fn geometry<T: Scalar>(x: &Tensor<T>, k: &Tensor<T>, b: Option<&Tensor<T>>) -> Result<Geom> {
    let [n, ha, wb, cin] = match *x.dims() {
        [n, a, b, c] => [n, a, b, c],
        _ => return Err(Error::shape("conv2d", format!("input must be (N,A,B,C), got {}", dims_str(x.dims())))),
    };
    let [cout, kcin, kh, kw] = match *k.dims() {
        [a, b, c, d] => [a, b, c, d],
        _ => return Err(Error::shape("conv2d", format!("kernel must be 4-D, got {}", dims_str(k.dims())))),
    };
    if !matches!(kh, 1 | 3) || !matches!(kw, 1 | 3) {
        return Err(Error::Invalid(format!("conv2d kernel size must be 1 or 3, got {kh}x{kw}")));
    }
    if kcin != cin {
        return Err(Error::shape("conv2d", format!("kernel Cin {kcin} != input channels {cin}")));
    }
    if let Some(b) = b {
        if b.dims() != [cout] {
            return Err(Error::shape("conv2d", format!("bias {} != ({cout})", dims_str(b.dims()))));
        }
    }
    Ok(Geom { n, ha, wb, cin, cout, kh, kw })
}

#[inline]
fn shifted(pos: usize, tap: usize, pad: usize, len: usize) -> Option<usize> {
    let p = (pos + tap).checked_sub(pad)?;
    (p < len).then_some(p)
}

/// Cross-correlation with bias; output `(N, A, B, Cout)`.
pub fn conv2d<T: Scalar>(x: &Tensor<T>, k: &Tensor<T>, b: Option<&Tensor<T>>) -> Result<Tensor<T>> {
    let g = geometry(x, k, b)?;
    let Geom { n, ha, wb, cin, cout, kh, kw } = g;
    // (kh, kw, Cin, Cout) so the innermost loop runs over contiguous Cout
    let mut kr = vec![T::zero(); kh * kw * cin * cout];
    for co in 0..cout {
        for ci in 0..cin {
            for ka in 0..kh {
                for kb in 0..kw {
                    kr[((ka * kw + kb) * cin + ci) * cout + co] = k.data()[((co * cin + ci) * kh + ka) * kw + kb];
                }
            }
        }
    }
    let xd = x.data();
    let mut out = vec![T::zero(); n * ha * wb * cout];
    par::for_each_chunk(&mut out, wb * cout, |row, o| {
        let (ni, a) = (row / ha, row % ha);
        for bpos in 0..wb {
            let ob = &mut o[bpos * cout..(bpos + 1) * cout];
            if let Some(b) = b {
                ob.copy_from_slice(b.data());
            }
            for ka in 0..kh {
                let Some(ia) = shifted(a, ka, g.pad_a(), ha) else { continue };
                for kb in 0..kw {
                    let Some(ib) = shifted(bpos, kb, g.pad_b(), wb) else { continue };
                    let xs = &xd[((ni * ha + ia) * wb + ib) * cin..][..cin];
                    let ks = &kr[(ka * kw + kb) * cin * cout..][..cin * cout];
                    for (ci, &xv) in xs.iter().enumerate() {
                        for (acc, &kv) in ob.iter_mut().zip(&ks[ci * cout..(ci + 1) * cout]) {
                            *acc += xv * kv;
                        }
                    }
                }
            }
        }
    });
    Ok(Tensor::from_parts(vec![n, ha, wb, cout], out))
}

/// Gradients of [`conv2d`] w.r.t. input, kernel and bias.
pub fn conv2d_backward<T: Scalar>(
    grad: &Tensor<T>,
    x: &Tensor<T>,
    k: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let g = geometry(x, k, None)?;
    let Geom { n, ha, wb, cin, cout, kh, kw } = g;
    if grad.dims() != [n, ha, wb, cout] {
        return Err(Error::shape("conv2d_backward", format!("grad {}", dims_str(grad.dims()))));
    }
    let (gd, xd) = (grad.data(), x.data());

    // input gradient, gathered per input pixel: kernel as (kh, kw, Cout, Cin)
    let mut kt = vec![T::zero(); kh * kw * cout * cin];
    for co in 0..cout {
        for ci in 0..cin {
            for ka in 0..kh {
                for kb in 0..kw {
                    kt[((ka * kw + kb) * cout + co) * cin + ci] = k.data()[((co * cin + ci) * kh + ka) * kw + kb];
                }
            }
        }
    }
    let mut gx = vec![T::zero(); n * ha * wb * cin];
    par::for_each_chunk(&mut gx, wb * cin, |row, o| {
        let (ni, i) = (row / ha, row % ha);
        for j in 0..wb {
            let ob = &mut o[j * cin..(j + 1) * cin];
            for ka in 0..kh {
                // output row a with a + ka - pad == i
                let Some(a) = (i + g.pad_a()).checked_sub(ka).filter(|&a| a < ha) else { continue };
                for kb in 0..kw {
                    let Some(bb) = (j + g.pad_b()).checked_sub(kb).filter(|&b| b < wb) else { continue };
                    let gs = &gd[((ni * ha + a) * wb + bb) * cout..][..cout];
                    let ks = &kt[(ka * kw + kb) * cout * cin..][..cout * cin];
                    for (co, &gv) in gs.iter().enumerate() {
                        for (acc, &kv) in ob.iter_mut().zip(&ks[co * cin..(co + 1) * cin]) {
                            *acc += gv * kv;
                        }
                    }
                }
            }
        }
    });

    // kernel gradient: one task per (tap, ci), each accumulating a Cout vector
    let mut acc = vec![T::zero(); kh * kw * cin * cout];
    par::for_each_chunk(&mut acc, cout, |task, o| {
        let (tap, ci) = (task / cin, task % cin);
        let (ka, kb) = (tap / kw, tap % kw);
        for ni in 0..n {
            for a in 0..ha {
                let Some(ia) = shifted(a, ka, g.pad_a(), ha) else { continue };
                for bpos in 0..wb {
                    let Some(ib) = shifted(bpos, kb, g.pad_b(), wb) else { continue };
                    let xv = xd[((ni * ha + ia) * wb + ib) * cin + ci];
                    let gs = &gd[((ni * ha + a) * wb + bpos) * cout..][..cout];
                    for (s, &gv) in o.iter_mut().zip(gs) {
                        *s += xv * gv;
                    }
                }
            }
        }
    });
    let mut gk = vec![T::zero(); cout * cin * kh * kw];
    for co in 0..cout {
        for ci in 0..cin {
            for ka in 0..kh {
                for kb in 0..kw {
                    gk[((co * cin + ci) * kh + ka) * kw + kb] = acc[((ka * kw + kb) * cin + ci) * cout + co];
                }
            }
        }
    }

    let mut gb = vec![T::zero(); cout];
    for px in gd.chunks(cout) {
        for (s, &gv) in gb.iter_mut().zip(px) {
            *s += gv;
        }
    }

    Ok((
        Tensor::from_parts(x.dims().to_vec(), gx),
        Tensor::from_parts(k.dims().to_vec(), gk),
        Tensor::from_parts(vec![cout], gb),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_kernel_is_identity() {
        let x = Tensor::<f64>::from_fn(&[2, 4, 5, 2], |i| (i as f64 * 0.37).sin());
        let mut p = Conv2dParams::zeros(2, 2, 3);
        for c in 0..2 {
            let o = p.kernel.offset(&[c, c, 1, 1]);
            p.kernel.data_mut()[o] = 1.0;
        }
        assert_eq!(p.apply(&x).unwrap(), x);
    }

    #[test]
    fn zero_kernel_gives_bias_maps() {
        let x = Tensor::<f64>::from_fn(&[1, 3, 3, 1], |i| i as f64);
        let mut p = Conv2dParams::zeros(2, 1, 3);
        p.bias = Tensor::new(vec![2], vec![0.25, -1.5]).unwrap();
        let y = p.apply(&x).unwrap();
        for px in y.data().chunks(2) {
            assert_eq!(px, &[0.25, -1.5]);
        }
    }

    #[test]
    fn rejects_kernel_size_five() {
        let x = Tensor::<f64>::zeros(&[1, 6, 6, 1]);
        let k = Tensor::<f64>::zeros(&[1, 1, 5, 5]);
        assert!(matches!(conv2d(&x, &k, None), Err(Error::Invalid(_))));
    }
}
