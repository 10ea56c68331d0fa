//! Geometric self-ensemble over the joint spatial-angular dihedral group.

use crate::error::{Error, Result};
use crate::lightfield::{LfDims, LfTensor};
use crate::par;
use crate::tensor::Scalar;

/// Flips then optional transpose, each acting on a spatial axis and its
/// angular partner together: `flip_x` reverses `x` and `u`, `flip_y`
/// reverses `y` and `v`, `transpose` swaps `x↔y` and `u↔v`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct LfTransform {
    pub flip_x: bool,
    pub flip_y: bool,
    pub transpose: bool,
}

impl LfTransform {
    pub const IDENTITY: LfTransform = LfTransform { flip_x: false, flip_y: false, transpose: false };

    /// All eight elements.
    pub fn group() -> Vec<LfTransform> {
        (0..8)
            .map(|i| LfTransform { flip_x: i & 1 != 0, flip_y: i & 2 != 0, transpose: i & 4 != 0 })
            .collect()
    }

    /// Image of the coordinate pair `(a, b)` on a grid of extents `(na, nb)`.
    fn map_pair(&self, a: usize, b: usize, na: usize, nb: usize) -> (usize, usize) {
        let a = if self.flip_x { na - 1 - a } else { a };
        let b = if self.flip_y { nb - 1 - b } else { b };
        if self.transpose {
            (b, a)
        } else {
            (a, b)
        }
    }

    pub fn invert(&self) -> LfTransform {
        if self.transpose {
            LfTransform { flip_x: self.flip_y, flip_y: self.flip_x, transpose: true }
        } else {
            *self
        }
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &LfTransform) -> LfTransform {
        // the action on a 2×3 probe grid identifies an element uniquely
        let probe = |t: &LfTransform| -> Vec<(usize, usize)> {
            (0..3).flat_map(|a| (0..3).map(move |b| (a, b))).map(|(a, b)| t.map_pair(a, b, 3, 3)).collect()
        };
        let want: Vec<(usize, usize)> = (0..3)
            .flat_map(|a| (0..3).map(move |b| (a, b)))
            .map(|(a, b)| {
                let (a, b) = self.map_pair(a, b, 3, 3);
                next.map_pair(a, b, 3, 3)
            })
            .collect();
        Self::group().into_iter().find(|g| probe(g) == want).expect("dihedral group is closed")
    }

    pub fn output_dims(&self, d: LfDims) -> LfDims {
        if self.transpose {
            LfDims::new(d.v, d.u, d.h, d.w, d.c)
        } else {
            d
        }
    }

    pub fn check(&self, d: LfDims) -> Result<()> {
        if self.transpose && (d.u != d.v || d.w != d.h) {
            return Err(Error::Invalid(format!(
                "transpose needs square grids, got {}x{} views of {}x{}",
                d.u, d.v, d.w, d.h
            )));
        }
        Ok(())
    }

    /// Pure index permutation of `lf`.
    pub fn apply<T: Scalar>(&self, lf: &LfTensor<T>) -> Result<LfTensor<T>> {
        let d = lf.dims();
        self.check(d)?;
        let od = self.output_dims(d);
        let mut out = LfTensor::zeros(od)?;
        for u in 0..d.u {
            for v in 0..d.v {
                let (ou, ov) = self.map_pair(u, v, d.u, d.v);
                for x in 0..d.w {
                    for y in 0..d.h {
                        let (ox, oy) = self.map_pair(x, y, d.w, d.h);
                        let src = d.offset(u, v, x, y, 0);
                        let dst = od.offset(ou, ov, ox, oy, 0);
                        out.data_mut()[dst..dst + d.c].copy_from_slice(&lf.data()[src..src + d.c]);
                    }
                }
            }
        }
        Ok(out)
    }
}

/// `(1/n) Σ Tᵢ⁻¹(F(Tᵢ(lr)))`. Outputs are averaged in transform order as
/// `first + Σ (xᵢ − first)/n`, so identical outputs average to themselves
/// exactly.
pub fn self_ensemble<T, F>(f: F, lr: &LfTensor<T>, transforms: &[LfTransform]) -> Result<LfTensor<T>>
where
    T: Scalar,
    F: Fn(&LfTensor<T>) -> Result<LfTensor<T>> + Sync + Send,
{
    if transforms.is_empty() {
        return Err(Error::Invalid("self-ensemble needs at least one transform".into()));
    }
    for t in transforms {
        t.check(lr.dims())?;
    }
    let outs = par::map_range(transforms.len(), |i| {
        let t = &transforms[i];
        t.invert().apply(&f(&t.apply(lr)?)?)
    });
    let mut outs = outs.into_iter();
    let mut acc = outs.next().expect("non-empty")?;
    let first = acc.clone();
    let n = T::of(transforms.len() as f64);
    for o in outs {
        let o = o?;
        o.tensor().check_same(first.tensor(), "self_ensemble")?;
        for ((a, &x), &f0) in acc.data_mut().iter_mut().zip(o.data()).zip(first.data()) {
            *a += (x - f0) / n;
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{bicubic_upsample, NetConfig, Network};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_lf(d: LfDims, seed: u64) -> LfTensor<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        LfTensor::from_fn(d, |_, _, _, _, _| rng.gen::<f64>()).unwrap()
    }

    #[test]
    fn inverses_and_involutions() {
        let lf = rand_lf(LfDims::new(3, 3, 4, 4, 2), 1);
        for t in LfTransform::group() {
            assert_eq!(t.invert().apply(&t.apply(&lf).unwrap()).unwrap(), lf);
            assert_eq!(t.then(&t.invert()), LfTransform::IDENTITY);
        }
        assert_eq!(LfTransform::IDENTITY.apply(&lf).unwrap(), lf);
        let fx = LfTransform { flip_x: true, ..LfTransform::IDENTITY };
        assert_eq!(fx.apply(&fx.apply(&lf).unwrap()).unwrap(), lf);
    }

    #[test]
    fn group_closure_and_composition() {
        let lf = rand_lf(LfDims::new(2, 2, 3, 3, 1), 2);
        let g = LfTransform::group();
        for a in &g {
            for b in &g {
                let c = a.then(b);
                assert!(g.contains(&c));
                assert_eq!(c.apply(&lf).unwrap(), b.apply(&a.apply(&lf).unwrap()).unwrap());
            }
        }
    }

    #[test]
    fn joint_action_and_multiset() {
        let d = LfDims::new(2, 3, 4, 5, 1);
        let lf = rand_lf(d, 3);
        let fy = LfTransform { flip_y: true, ..LfTransform::IDENTITY };
        let out = fy.apply(&lf).unwrap();
        assert_eq!(out.at(1, 0, 2, 4, 0), lf.at(1, 2, 2, 0, 0));
        let mut a = lf.data().to_vec();
        let mut b = out.data().to_vec();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        assert_eq!(a, b);
        let tr = LfTransform { transpose: true, ..LfTransform::IDENTITY };
        assert!(tr.apply(&lf).is_err());
        let sq = rand_lf(LfDims::new(2, 2, 3, 3, 1), 4);
        assert_eq!(tr.apply(&sq).unwrap().at(0, 1, 2, 0, 0), sq.at(1, 0, 0, 2, 0));
    }

    #[test]
    fn identity_function_is_exact() {
        let lf = rand_lf(LfDims::new(3, 3, 5, 5, 1), 5);
        let out = self_ensemble(|x| Ok(x.clone()), &lf, &LfTransform::group()).unwrap();
        assert_eq!(out, lf);
    }

    #[test]
    fn single_identity_equals_forward_and_zero_net_is_bicubic() {
        let cfg = NetConfig { u: 2, v: 2, c: 3, c_cor: 4, n1: 1, n2: 1, scale: 2, ..NetConfig::default() };
        let lr = rand_lf(LfDims::new(2, 2, 4, 4, 1), 6);
        let net = Network::<f64>::build(&cfg).unwrap();
        let plain = net.forward(&lr).unwrap();
        assert_eq!(self_ensemble(|x| net.forward(x), &lr, &[LfTransform::IDENTITY]).unwrap(), plain);
        let zero = Network::<f64>::zeros(&cfg).unwrap();
        let ens = self_ensemble(|x| zero.forward(x), &lr, &LfTransform::group()).unwrap();
        let up = bicubic_upsample(&lr, 2).unwrap();
        // ulps at the scale of the [0, 1] data: bicubic taps cancel, so
        // outputs near zero carry absolute rather than relative rounding
        for (a, b) in ens.data().iter().zip(up.data()) {
            assert!((a - b).abs() <= 4.0 * f64::EPSILON * b.abs().max(1.0), "{a} vs {b}");
        }
    }
}
