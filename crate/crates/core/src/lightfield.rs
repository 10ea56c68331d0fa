//! Light-field tensor and its subspace views.
//!
//! Storage order is `(U, V, W, H, C)` row-major: element `(u, v, x, y, ch)`
//! lives at `((((u*V + v)*W + x)*H + y)*C + ch)`. Every view below is a pure
//! permutation of that storage and has an exact inverse.

use crate::error::{Error, Result};
use crate::tensor::{dims_str, Scalar, Tensor};

/// Angular and spatial extents of a light field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LfDims {
    pub u: usize,
    pub v: usize,
    pub w: usize,
    pub h: usize,
    pub c: usize,
}

impl LfDims {
    pub fn new(u: usize, v: usize, w: usize, h: usize, c: usize) -> Self {
        LfDims { u, v, w, h, c }
    }

    pub fn as_array(&self) -> [usize; 5] {
        [self.u, self.v, self.w, self.h, self.c]
    }

    pub fn views(&self) -> usize {
        self.u * self.v
    }

    pub fn pixels(&self) -> usize {
        self.w * self.h
    }

    pub fn len(&self) -> usize {
        self.views() * self.pixels() * self.c
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn offset(&self, u: usize, v: usize, x: usize, y: usize, ch: usize) -> usize {
        (((u * self.v + v) * self.w + x) * self.h + y) * self.c + ch
    }

    fn validate(&self) -> Result<()> {
        if self.as_array().iter().any(|&d| d == 0) {
            return Err(Error::Invalid(format!(
                "light field dims must be >= 1, got {}",
                dims_str(&self.as_array())
            )));
        }
        Ok(())
    }
}

/// Dense 5-D light field `(U, V, W, H, C)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LfTensor<T = f64> {
    dims: LfDims,
    data: Tensor<T>,
}

/// Axis orders (over U,V,W,H,C) realizing each view before flattening.
const EPI_H_AXES: [usize; 5] = [1, 3, 0, 2, 4];
const EPI_V_AXES: [usize; 5] = [0, 2, 1, 3, 4];
const MACPI_AXES: [usize; 5] = [3, 0, 2, 1, 4];

fn inverse_axes(axes: &[usize; 5]) -> [usize; 5] {
    let mut inv = [0; 5];
    for (i, &a) in axes.iter().enumerate() {
        inv[a] = i;
    }
    inv
}

impl<T: Scalar> LfTensor<T> {
    pub fn new(dims: LfDims, data: Vec<T>) -> Result<Self> {
        dims.validate()?;
        let data = Tensor::new(dims.as_array().to_vec(), data)?;
        Ok(LfTensor { dims, data })
    }

    pub fn zeros(dims: LfDims) -> Result<Self> {
        dims.validate()?;
        Ok(LfTensor { dims, data: Tensor::zeros(&dims.as_array()) })
    }

    pub fn from_fn(dims: LfDims, mut f: impl FnMut(usize, usize, usize, usize, usize) -> T) -> Result<Self> {
        dims.validate()?;
        let mut data = Vec::with_capacity(dims.len());
        for u in 0..dims.u {
            for v in 0..dims.v {
                for x in 0..dims.w {
                    for y in 0..dims.h {
                        for ch in 0..dims.c {
                            data.push(f(u, v, x, y, ch));
                        }
                    }
                }
            }
        }
        Self::new(dims, data)
    }

    /// Wraps a 5-D tensor `(U, V, W, H, C)`.
    pub fn from_tensor(t: Tensor<T>) -> Result<Self> {
        match *t.dims() {
            [u, v, w, h, c] => Ok(LfTensor { dims: LfDims { u, v, w, h, c }, data: t }),
            _ => Err(Error::shape("lf", format!("expected 5 dims, got {}", dims_str(t.dims())))),
        }
    }

    pub fn dims(&self) -> LfDims {
        self.dims
    }

    pub fn tensor(&self) -> &Tensor<T> {
        &self.data
    }

    pub fn into_tensor(self) -> Tensor<T> {
        self.data
    }

    pub fn data(&self) -> &[T] {
        self.data.data()
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        self.data.data_mut()
    }

    pub fn at(&self, u: usize, v: usize, x: usize, y: usize, ch: usize) -> T {
        self.data.data()[self.dims.offset(u, v, x, y, ch)]
    }

    pub fn set(&mut self, u: usize, v: usize, x: usize, y: usize, ch: usize, value: T) {
        let o = self.dims.offset(u, v, x, y, ch);
        self.data.data_mut()[o] = value;
    }

    pub fn cast<U: Scalar>(&self) -> LfTensor<U> {
        LfTensor { dims: self.dims, data: self.data.cast() }
    }

    /// One sub-aperture image as `(W, H, C)`.
    pub fn sai(&self, u: usize, v: usize) -> Tensor<T> {
        let d = self.dims;
        let n = d.pixels() * d.c;
        let start = (u * d.v + v) * n;
        Tensor::from_parts(vec![d.w, d.h, d.c], self.data()[start..start + n].to_vec())
    }

    /// Spatial view `(U·V, W·H, C)`; tokens are pixels, one slice per SAI.
    pub fn to_spatial(&self) -> Tensor<T> {
        let d = self.dims;
        Tensor::from_parts(vec![d.views(), d.pixels(), d.c], self.data().to_vec())
    }

    pub fn from_spatial(t: &Tensor<T>, u: usize, v: usize, w: usize, h: usize) -> Result<Self> {
        let dims = expect3(t, "from_spatial", [u * v, w * h, 0])?;
        Self::new(LfDims::new(u, v, w, h, dims[2]), t.data().to_vec())
    }

    /// Angular view `(W·H, U·V, C)`; tokens are views, one slice per pixel.
    pub fn to_angular(&self) -> Tensor<T> {
        self.to_spatial().permute(&[1, 0, 2]).expect("valid axes")
    }

    pub fn from_angular(t: &Tensor<T>, u: usize, v: usize, w: usize, h: usize) -> Result<Self> {
        let dims = expect3(t, "from_angular", [w * h, u * v, 0])?;
        let spatial = t.permute(&[1, 0, 2])?;
        Self::new(LfDims::new(u, v, w, h, dims[2]), spatial.into_data())
    }

    /// Horizontal EPI view `(V·H, U·W, C)`: slice `(v, y)`, plane `(u, x)`.
    pub fn to_epi_h(&self) -> Tensor<T> {
        let d = self.dims;
        self.flat_view(&EPI_H_AXES, [d.v * d.h, d.u * d.w, d.c])
    }

    pub fn from_epi_h(t: &Tensor<T>, u: usize, v: usize, w: usize, h: usize) -> Result<Self> {
        let dims = expect3(t, "from_epi_h", [v * h, u * w, 0])?;
        Self::unflatten(t, &EPI_H_AXES, LfDims::new(u, v, w, h, dims[2]))
    }

    /// Vertical EPI view `(U·W, V·H, C)`: slice `(u, x)`, plane `(v, y)`.
    pub fn to_epi_v(&self) -> Tensor<T> {
        let d = self.dims;
        self.flat_view(&EPI_V_AXES, [d.u * d.w, d.v * d.h, d.c])
    }

    pub fn from_epi_v(t: &Tensor<T>, u: usize, v: usize, w: usize, h: usize) -> Result<Self> {
        let dims = expect3(t, "from_epi_v", [u * w, v * h, 0])?;
        Self::unflatten(t, &EPI_V_AXES, LfDims::new(u, v, w, h, dims[2]))
    }

    /// Angular subspace folded into channels: `(1, W·H, U·V·C)` with the
    /// channel index `(u·V + v)·C + ch`.
    pub fn to_merged(&self) -> Tensor<T> {
        let d = self.dims;
        self.to_angular()
            .reshape(&[1, d.pixels(), d.views() * d.c])
            .expect("same element count")
    }

    pub fn from_merged(t: &Tensor<T>, u: usize, v: usize, c: usize, w: usize, h: usize) -> Result<Self> {
        expect3(t, "from_merged", [1, w * h, u * v * c])?;
        let angular = t.clone().reshape(&[w * h, u * v, c])?;
        Self::from_angular(&angular, u, v, w, h)
    }

    /// Macro-pixel image `(U·H, V·W, C)` with `X = y·U + u`, `Y = x·V + v`.
    pub fn to_macpi(&self) -> Tensor<T> {
        let d = self.dims;
        self.flat_view(&MACPI_AXES, [d.u * d.h, d.v * d.w, d.c])
    }

    pub fn from_macpi(t: &Tensor<T>, u: usize, v: usize, w: usize, h: usize) -> Result<Self> {
        let dims = expect3(t, "from_macpi", [u * h, v * w, 0])?;
        Self::unflatten(t, &MACPI_AXES, LfDims::new(u, v, w, h, dims[2]))
    }

    fn flat_view(&self, axes: &[usize; 5], out: [usize; 3]) -> Tensor<T> {
        self.data
            .permute(axes)
            .and_then(|p| p.reshape(&out))
            .expect("view axes are a permutation")
    }

    fn unflatten(t: &Tensor<T>, axes: &[usize; 5], dims: LfDims) -> Result<Self> {
        let full = dims.as_array();
        let permuted: Vec<usize> = axes.iter().map(|&a| full[a]).collect();
        let t = t.clone().reshape(&permuted)?;
        let back = t.permute(&inverse_axes(axes))?;
        Self::new(dims, back.into_data())
    }
}

/// Checks a 3-D tensor against expected extents; a zero entry is a wildcard.
fn expect3<T: Scalar>(t: &Tensor<T>, op: &'static str, want: [usize; 3]) -> Result<[usize; 3]> {
    let d = t.dims();
    let ok = d.len() == 3 && want.iter().zip(d).all(|(&w, &g)| w == 0 || w == g);
    if !ok {
        return Err(Error::shape(op, format!("got {}, expected {}", dims_str(d), dims_str(&want))));
    }
    Ok([d[0], d[1], d[2]])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iota(d: LfDims) -> LfTensor<f64> {
        LfTensor::new(d, (0..d.len()).map(|i| i as f64).collect()).unwrap()
    }

    #[test]
    fn spatial_row_zero_is_first_sai() {
        let lf = iota(LfDims::new(2, 2, 2, 2, 1));
        let s = lf.to_spatial();
        assert_eq!(s.dims(), &[4, 4, 1]);
        assert_eq!(&s.data()[..4], &[0.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn degenerate_angular_subspace() {
        let lf = iota(LfDims::new(1, 1, 3, 2, 2));
        let s = lf.to_spatial();
        assert_eq!(s.dims(), &[1, 6, 2]);
        assert_eq!(s.data(), lf.data());
        let a = iota(LfDims::new(2, 3, 1, 1, 1)).to_angular();
        assert_eq!(a.dims(), &[1, 6, 1]);
    }

    #[test]
    fn epi_h_shape_for_thin_field() {
        let lf = iota(LfDims::new(2, 1, 2, 1, 3));
        assert_eq!(lf.to_epi_h().dims(), &[1, 4, 3]);
    }

    #[test]
    fn merged_lists_views_at_single_pixel() {
        let lf = iota(LfDims::new(2, 2, 1, 1, 1));
        let m = lf.to_merged();
        assert_eq!(m.dims(), &[1, 1, 4]);
        assert_eq!(m.data(), &[0.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn single_view_macpi_is_transposed_sai() {
        let d = LfDims::new(1, 1, 3, 2, 1);
        let lf = iota(d);
        let mp = lf.to_macpi();
        assert_eq!(mp.dims(), &[2, 3, 1]);
        for x in 0..3 {
            for y in 0..2 {
                assert_eq!(mp.get(&[y, x, 0]), lf.at(0, 0, x, y, 0));
            }
        }
    }

    #[test]
    fn inverse_rejects_wrong_shape() {
        let t = Tensor::<f64>::zeros(&[3, 4, 1]);
        assert!(LfTensor::from_spatial(&t, 2, 2, 2, 2).is_err());
        assert!(LfTensor::from_merged(&Tensor::<f64>::zeros(&[1, 4, 5]), 2, 2, 1, 2, 2).is_err());
    }
}
