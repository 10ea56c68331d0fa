//! Sub-pixel rearrangement on channel-last images.
//!
//! `(N, A, B, r²·C) -> (N, r·A, r·B, C)` with
//! `out[n, a·r + da, b·r + db, c] = in[n, a, b, c·r² + da·r + db]`.

use crate::error::{Error, Result};
use crate::tensor::{dims_str, Scalar, Tensor};

fn split<T: Scalar>(x: &Tensor<T>, op: &'static str) -> Result<[usize; 4]> {
    match *x.dims() {
        [n, a, b, c] => Ok([n, a, b, c]),
        _ => Err(Error::shape(op, format!("expected (N,A,B,C), got {}", dims_str(x.dims())))),
    }
}

pub fn pixel_shuffle<T: Scalar>(x: &Tensor<T>, r: usize) -> Result<Tensor<T>> {
    let [n, a, b, cr] = split(x, "pixel_shuffle")?;
    if r == 0 || cr % (r * r) != 0 {
        return Err(Error::shape("pixel_shuffle", format!("channels {cr} not divisible by r²={}", r * r)));
    }
    let c = cr / (r * r);
    let (oa, ob) = (a * r, b * r);
    let xd = x.data();
    let mut out = vec![T::zero(); x.len()];
    for ni in 0..n {
        for ia in 0..a {
            for ib in 0..b {
                let src = &xd[((ni * a + ia) * b + ib) * cr..][..cr];
                for ch in 0..c {
                    for da in 0..r {
                        for db in 0..r {
                            let o = ((ni * oa + ia * r + da) * ob + ib * r + db) * c + ch;
                            out[o] = src[ch * r * r + da * r + db];
                        }
                    }
                }
            }
        }
    }
    Ok(Tensor::from_parts(vec![n, oa, ob, c], out))
}

/// Inverse of [`pixel_shuffle`]; also its gradient.
pub fn pixel_unshuffle<T: Scalar>(y: &Tensor<T>, r: usize) -> Result<Tensor<T>> {
    let [n, oa, ob, c] = split(y, "pixel_unshuffle")?;
    if r == 0 || oa % r != 0 || ob % r != 0 {
        return Err(Error::shape("pixel_unshuffle", format!("spatial dims not divisible by {r}")));
    }
    let (a, b, cr) = (oa / r, ob / r, c * r * r);
    let yd = y.data();
    let mut out = vec![T::zero(); y.len()];
    for ni in 0..n {
        for ia in 0..a {
            for ib in 0..b {
                let dst = &mut out[((ni * a + ia) * b + ib) * cr..][..cr];
                for ch in 0..c {
                    for da in 0..r {
                        for db in 0..r {
                            let o = ((ni * oa + ia * r + da) * ob + ib * r + db) * c + ch;
                            dst[ch * r * r + da * r + db] = yd[o];
                        }
                    }
                }
            }
        }
    }
    Ok(Tensor::from_parts(vec![n, a, b, cr], out))
}
