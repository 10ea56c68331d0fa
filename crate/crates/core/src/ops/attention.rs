//! Softmax and single-head scaled dot-product attention.

use crate::error::{Error, Result};
use crate::par;
use crate::tensor::{dims_str, Scalar, Tensor};

fn softmax_row<T: Scalar>(row: &mut [T]) {
    let max = row.iter().fold(T::neg_infinity(), |m, &x| m.max(x));
    let mut sum = T::zero();
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in row.iter_mut() {
        *x /= sum;
    }
}

/// Softmax over the last axis, with max subtraction.
pub fn softmax<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let d = *x.dims().last().unwrap();
    let mut out = x.data().to_vec();
    par::for_each_chunk(&mut out, d, |_, row| softmax_row(row));
    Tensor::from_parts(x.dims().to_vec(), out)
}

/// Gradient of [`softmax`] given its output `y`.
pub fn softmax_backward<T: Scalar>(grad: &Tensor<T>, y: &Tensor<T>) -> Tensor<T> {
    let d = *y.dims().last().unwrap();
    let (gd, yd) = (grad.data(), y.data());
    let mut out = vec![T::zero(); y.len()];
    par::for_each_chunk(&mut out, d, |r, o| {
        let (g, yr) = (&gd[r * d..(r + 1) * d], &yd[r * d..(r + 1) * d]);
        let dot = g.iter().zip(yr).fold(T::zero(), |s, (&a, &b)| s + a * b);
        for ((o, &gv), &yv) in o.iter_mut().zip(g).zip(yr) {
            *o = yv * (gv - dot);
        }
    });
    Tensor::from_parts(y.dims().to_vec(), out)
}

#[derive(Clone, Copy)]
struct Shape {
    batch: usize,
    tq: usize,
    tk: usize,
    d: usize,
    dv: usize,
}

/// Accepts `(T, D)` or `(B, T, D)` operands.
fn shape<T: Scalar>(q: &Tensor<T>, k: &Tensor<T>, v: &Tensor<T>) -> Result<Shape> {
    let split = |t: &Tensor<T>| -> Result<(usize, usize, usize)> {
        match *t.dims() {
            [t, d] => Ok((1, t, d)),
            [b, t, d] => Ok((b, t, d)),
            _ => Err(Error::shape("attention", format!("operand must be 2-D or 3-D, got {}", dims_str(t.dims())))),
        }
    };
    let (bq, tq, d) = split(q)?;
    let (bk, tk, dk) = split(k)?;
    let (bv, tv, dv) = split(v)?;
    if q.ndim() != k.ndim() || k.ndim() != v.ndim() || bq != bk || bk != bv {
        return Err(Error::shape("attention", "operands disagree on batch"));
    }
    if d != dk {
        return Err(Error::shape("attention", format!("q dim {d} != k dim {dk}")));
    }
    if tv != tk {
        return Err(Error::shape("attention", format!("v rows {tv} != k rows {tk}")));
    }
    Ok(Shape { batch: bq, tq, tk, d, dv })
}

fn scores_row<T: Scalar>(s: &Shape, qd: &[T], kd: &[T], b: usize, t: usize, out: &mut [T]) {
    let scale = T::one() / T::of(s.d as f64).sqrt();
    let qr = &qd[(b * s.tq + t) * s.d..][..s.d];
    for (j, o) in out.iter_mut().enumerate() {
        let kr = &kd[(b * s.tk + j) * s.d..][..s.d];
        *o = qr.iter().zip(kr).fold(T::zero(), |acc, (&a, &c)| acc + a * c) * scale;
    }
    softmax_row(out);
}

/// `Softmax(q·kᵀ/√D)·v`, row-wise over keys, per batch entry.
pub fn attention<T: Scalar>(q: &Tensor<T>, k: &Tensor<T>, v: &Tensor<T>) -> Result<Tensor<T>> {
    let s = shape(q, k, v)?;
    let (qd, kd, vd) = (q.data(), k.data(), v.data());
    let mut out = vec![T::zero(); s.batch * s.tq * s.dv];
    par::for_each_chunk(&mut out, s.dv, |row, o| {
        let (b, t) = (row / s.tq, row % s.tq);
        let mut p = vec![T::zero(); s.tk];
        scores_row(&s, qd, kd, b, t, &mut p);
        for (j, &pj) in p.iter().enumerate() {
            let vr = &vd[(b * s.tk + j) * s.dv..][..s.dv];
            for (acc, &x) in o.iter_mut().zip(vr) {
                *acc += pj * x;
            }
        }
    });
    let mut dims = q.dims().to_vec();
    *dims.last_mut().unwrap() = s.dv;
    Ok(Tensor::from_parts(dims, out))
}

/// Attention probabilities `(B, Tq, Tk)`; exposed for inspection and tests.
pub fn attention_weights<T: Scalar>(q: &Tensor<T>, k: &Tensor<T>) -> Result<Tensor<T>> {
    let s = shape(q, k, k)?;
    let (qd, kd) = (q.data(), k.data());
    let mut p = vec![T::zero(); s.batch * s.tq * s.tk];
    par::for_each_chunk(&mut p, s.tk, |row, o| scores_row(&s, qd, kd, row / s.tq, row % s.tq, o));
    Ok(Tensor::from_parts(vec![s.batch, s.tq, s.tk], p))
}

/// Gradients of [`attention`] w.r.t. `q`, `k`, `v`.
pub fn attention_backward<T: Scalar>(
    grad: &Tensor<T>,
    q: &Tensor<T>,
    k: &Tensor<T>,
    v: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let s = shape(q, k, v)?;
    if grad.len() != s.batch * s.tq * s.dv {
        return Err(Error::shape("attention_backward", "grad size"));
    }
    let scale = T::one() / T::of(s.d as f64).sqrt();
    let (gd, qd, kd, vd) = (grad.data(), q.data(), k.data(), v.data());

    // per query row: probabilities P and score gradients dS
    let rows = s.batch * s.tq;
    let mut p = vec![T::zero(); rows * s.tk];
    par::for_each_chunk(&mut p, s.tk, |row, o| scores_row(&s, qd, kd, row / s.tq, row % s.tq, o));
    let mut ds = vec![T::zero(); rows * s.tk];
    par::for_each_chunk(&mut ds, s.tk, |row, o| {
        let b = row / s.tq;
        let gr = &gd[row * s.dv..][..s.dv];
        let pr = &p[row * s.tk..][..s.tk];
        for (j, o) in o.iter_mut().enumerate() {
            let vr = &vd[(b * s.tk + j) * s.dv..][..s.dv];
            *o = gr.iter().zip(vr).fold(T::zero(), |acc, (&a, &c)| acc + a * c);
        }
        let dot = o.iter().zip(pr).fold(T::zero(), |acc, (&a, &c)| acc + a * c);
        for (o, &pj) in o.iter_mut().zip(pr) {
            *o = pj * (*o - dot);
        }
    });

    let mut gq = vec![T::zero(); rows * s.d];
    par::for_each_chunk(&mut gq, s.d, |row, o| {
        let b = row / s.tq;
        for (j, &dsj) in ds[row * s.tk..][..s.tk].iter().enumerate() {
            let kr = &kd[(b * s.tk + j) * s.d..][..s.d];
            for (acc, &x) in o.iter_mut().zip(kr) {
                *acc += dsj * x;
            }
        }
        for acc in o.iter_mut() {
            *acc *= scale;
        }
    });

    // per key row: dK = dSᵀ·q·scale, dV = Pᵀ·dO
    let krows = s.batch * s.tk;
    let mut gk = vec![T::zero(); krows * s.d];
    par::for_each_chunk(&mut gk, s.d, |row, o| {
        let (b, j) = (row / s.tk, row % s.tk);
        for t in 0..s.tq {
            let dst = ds[(b * s.tq + t) * s.tk + j];
            let qr = &qd[(b * s.tq + t) * s.d..][..s.d];
            for (acc, &x) in o.iter_mut().zip(qr) {
                *acc += dst * x;
            }
        }
        for acc in o.iter_mut() {
            *acc *= scale;
        }
    });
    let mut gv = vec![T::zero(); krows * s.dv];
    par::for_each_chunk(&mut gv, s.dv, |row, o| {
        let (b, j) = (row / s.tk, row % s.tk);
        for t in 0..s.tq {
            let pt = p[(b * s.tq + t) * s.tk + j];
            let gr = &gd[(b * s.tq + t) * s.dv..][..s.dv];
            for (acc, &x) in o.iter_mut().zip(gr) {
                *acc += pt * x;
            }
        }
    });

    Ok((
        Tensor::from_parts(q.dims().to_vec(), gq),
        Tensor::from_parts(k.dims().to_vec(), gk),
        Tensor::from_parts(v.dims().to_vec(), gv),
    ))
}
