//! Small-scale optimization: LR/HR pair generation, Adam and a training loop.

use std::collections::HashMap;

use crate::autodiff::{Backend, Tape};
use crate::error::{Error, Result};
use crate::layers::Module;
use crate::lightfield::{LfDims, LfTensor};
use crate::network::{Kind, Net, NetConfig};
use crate::ops::{self, ResizePlan};
use crate::tensor::{dims_str, Scalar, Tensor};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LossKind {
    #[default]
    L1,
    L2,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Samples per step.
    pub batch: usize,
    /// HR patch side.
    pub patch: usize,
    pub iters: usize,
    pub seed: u64,
    pub loss: LossKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 2e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            batch: 4,
            patch: 32,
            iters: 300,
            seed: 0,
            loss: LossKind::L1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, scale: usize) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::Invalid(format!("learning rate must be finite and non-negative, got {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Invalid("Adam betas must lie in [0, 1)".into()));
        }
        if !(self.eps > 0.0) {
            return Err(Error::Invalid("Adam epsilon must be positive".into()));
        }
        if self.batch == 0 {
            return Err(Error::Invalid("batch must be at least 1".into()));
        }
        if self.patch == 0 || self.patch % scale != 0 {
            return Err(Error::Invalid(format!("patch {} not divisible by scale {scale}", self.patch)));
        }
        Ok(())
    }
}

/// Per-view bicubic downsampling of `hr` by `r`: returns `(lr, hr)`.
pub fn make_pair<T: Scalar>(hr: &LfTensor<T>, r: usize) -> Result<(LfTensor<T>, LfTensor<T>)> {
    let d = hr.dims();
    if r == 0 || d.w % r != 0 || d.h % r != 0 {
        return Err(Error::Invalid(format!("HR extent {}x{} not divisible by {r}", d.w, d.h)));
    }
    let x = hr.tensor().clone().reshape(&[d.views(), d.w, d.h, d.c])?;
    let plan = ResizePlan::new(d.w, d.h, 1.0 / r as f64)?;
    let y = ops::resize::resize_with(&x, &plan)?;
    let lr = LfTensor::from_tensor(y.reshape(&LfDims::new(d.u, d.v, d.w / r, d.h / r, d.c).as_array())?)?;
    Ok((lr, hr.clone()))
}

/// Mean absolute error.
pub fn l1_loss<T: Scalar>(sr: &LfTensor<T>, hr: &LfTensor<T>) -> Result<f64> {
    Ok(ops::l1_loss(sr.tensor(), hr.tensor())?.to_f64())
}

/// Moment estimates, one per parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T = f64> {
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
    pub t: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &[Tensor<T>]) -> Self {
        AdamState {
            m: params.iter().map(|p| Tensor::zeros(p.dims())).collect(),
            v: params.iter().map(|p| Tensor::zeros(p.dims())).collect(),
            t: 0,
        }
    }
}

/// One bias-corrected Adam update.
pub fn adam_step<T: Scalar>(
    params: &mut [Tensor<T>],
    grads: &[Tensor<T>],
    state: &mut AdamState<T>,
    cfg: &TrainConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::shape(
            "adam_step",
            format!("{} params, {} grads, {} moments", params.len(), grads.len(), state.m.len()),
        ));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.dims() != g.dims() || p.dims() != state.m[i].dims() {
            return Err(Error::shape(
                "adam_step",
                format!("param {i}: {} vs grad {}", dims_str(p.dims()), dims_str(g.dims())),
            ));
        }
    }
    state.t += 1;
    let t = state.t as i32;
    let (b1, b2) = (T::of(cfg.beta1), T::of(cfg.beta2));
    let c1 = T::of(1.0 - cfg.beta1.powi(t));
    let c2 = T::of(1.0 - cfg.beta2.powi(t));
    let (lr, eps) = (T::of(cfg.lr), T::of(cfg.eps));
    for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(state.m.iter_mut().zip(state.v.iter_mut())) {
        let pd = p.data_mut().iter_mut();
        for (((w, &g), m), v) in pd.zip(g.data()).zip(m.data_mut()).zip(v.data_mut()) {
            *m = b1 * *m + (T::one() - b1) * g;
            *v = b2 * *v + (T::one() - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *w -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

/// Loss and registry-ordered parameter gradients for one pair.
pub fn loss_and_grads<T: Scalar, K: Kind>(
    net: &Net<T, K>,
    lr: &LfTensor<T>,
    hr: &LfTensor<T>,
    loss: LossKind,
) -> Result<(f64, Vec<Tensor<T>>)> {
    let d = lr.dims();
    let r = net.config().scale;
    let hd = hr.dims();
    if d.c != 1 || hd != LfDims::new(d.u, d.v, d.w * r, d.h * r, 1) {
        return Err(Error::shape("train", format!("pair {:?} / {:?} at scale {r}", d.as_array(), hd.as_array())));
    }
    let tape = Tape::new();
    let x = tape.constant(lr.tensor().clone().reshape(&[d.views(), d.w, d.h, 1])?);
    let y = net.forward_with(&tape, &x)?;
    let target = hr.tensor().clone().reshape(&[d.views(), hd.w, hd.h, 1])?;
    let l = match loss {
        LossKind::L1 => tape.l1_loss(&y, &target)?,
        LossKind::L2 => tape.l2_loss(&y, &target)?,
    };
    let value = tape.with_value(l, |t| t.data()[0]).to_f64();
    let mut grads = tape.backward(l, &Tensor::scalar(T::one()))?;
    let vars: HashMap<String, _> = tape.params().into_iter().collect();
    let mut out = Vec::new();
    net.visit("", &mut |name, t| {
        out.push(match vars.get(name) {
            Some(&v) => grads.take(v),
            None => Tensor::zeros(t.dims()),
        })
    });
    Ok((value, out))
}

/// Runs `cfg.iters` steps over `pairs`; step `k` averages gradients over
/// `min(batch, pairs)` pairs taken cyclically. Returns the loss before each
/// update.
pub fn train<T: Scalar, K: Kind>(
    net: &mut Net<T, K>,
    pairs: &[(LfTensor<T>, LfTensor<T>)],
    cfg: &TrainConfig,
) -> Result<Vec<f64>> {
    if pairs.is_empty() {
        return Err(Error::Invalid("no training pairs".into()));
    }
    if !(cfg.lr >= 0.0 && cfg.lr.is_finite()) || cfg.batch == 0 {
        return Err(Error::Invalid(format!("bad training config: lr={} batch={}", cfg.lr, cfg.batch)));
    }
    let mut params: Vec<Tensor<T>> = net.params().into_iter().map(|p| p.1).collect();
    let mut state = AdamState::new(&params);
    let per_step = cfg.batch.min(pairs.len());
    let mut curve = Vec::with_capacity(cfg.iters);
    let mut cursor = 0;
    for it in 0..cfg.iters {
        let mut total = 0.0;
        let mut acc: Option<Vec<Tensor<T>>> = None;
        for _ in 0..per_step {
            let (lr, hr) = &pairs[cursor % pairs.len()];
            cursor += 1;
            let (l, g) = loss_and_grads(net, lr, hr, cfg.loss)?;
            total += l;
            match &mut acc {
                None => acc = Some(g),
                Some(a) => {
                    for (a, g) in a.iter_mut().zip(&g) {
                        a.add_assign(g)?;
                    }
                }
            }
        }
        let loss = total / per_step as f64;
        if !loss.is_finite() {
            return Err(Error::NonFinite { what: "training loss".into(), index: it });
        }
        curve.push(loss);
        let mut grads = acc.expect("at least one sample");
        if per_step > 1 {
            let s = T::of(1.0 / per_step as f64);
            grads = grads.into_iter().map(|g| g.scale(s)).collect();
        }
        adam_step(&mut params, &grads, &mut state, cfg)?;
        let mut i = 0;
        net.visit_mut("", &mut |_, t| {
            t.data_mut().copy_from_slice(params[i].data());
            i += 1;
        });
    }
    Ok(curve)
}

/// Outcome of [`end_to_end_gradcheck`].
#[derive(Clone, Debug, PartialEq)]
pub struct EndToEndCheck {
    /// Worst relative error over input coordinates.
    pub input_rel_error: f64,
    /// Worst relative error over every parameter coordinate.
    pub param_rel_error: f64,
    pub worst_param: String,
    pub param_count: usize,
}

/// Difference quotients below this count as zero when the analytic gradient
/// is zero to rounding.
pub const ZERO_GRAD_ATOL: f64 = 1e-10;

/// Checks `l1_loss ∘ forward` against central differences, with respect to
/// both the input and every parameter, for a freshly initialized network.
/// The target is the network's own output dithered by `±[0.05, 0.1)` so no
/// residual comes near the L1 kink.
pub fn end_to_end_gradcheck<K: Kind>(cfg: &NetConfig, w: usize, h: usize, eps: f64) -> Result<EndToEndCheck> {
    use rand::{Rng, SeedableRng};
    let mut net = Net::<f64, K>::build(cfg)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let d = LfDims::new(cfg.u, cfg.v, w, h, 1);
    let lr = LfTensor::from_fn(d, |_, _, _, _, _| rng.gen::<f64>())?;
    let mut hr = net.forward(&lr)?;
    for t in hr.data_mut() {
        let dither: f64 = rng.gen_range(0.05..0.1);
        *t += if rng.gen::<bool>() { dither } else { -dither };
    }
    let hd = hr.dims();
    let target = hr.tensor().clone().reshape(&[hd.views(), hd.w, hd.h, 1])?;
    let x = lr.tensor().clone().reshape(&[d.views(), w, h, 1])?;
    // a step can straddle a leaky-ReLU kink somewhere in the network, so
    // each coordinate keeps the better of `eps` and `eps / 10`
    let steps = [eps, eps / 10.0];
    let mut input_err = vec![f64::INFINITY; x.len()];
    for &step in &steps {
        let r = crate::autodiff::gradcheck(
            |tape: &Tape<f64>, x| {
                let y = net.forward_with(tape, &x)?;
                tape.l1_loss(&y, &target)
            },
            &x,
            step,
        )?;
        for ((e, &a), &n) in input_err.iter_mut().zip(r.analytic.data()).zip(r.numeric.data()) {
            *e = e.min(crate::autodiff::relative_error(a, n));
        }
    }

    let (_, grads) = loss_and_grads(&net, &lr, &hr, LossKind::L1)?;
    let names: Vec<String> = net.params().into_iter().map(|p| p.0).collect();
    let set = |net: &mut Net<f64, K>, pi: usize, j: usize, value: f64| {
        let mut i = 0;
        net.visit_mut("", &mut |_, t| {
            if i == pi {
                t.data_mut()[j] = value;
            }
            i += 1;
        });
    };
    let (mut worst, mut worst_param, mut count) = (0.0f64, String::new(), 0);
    for (pi, g) in grads.iter().enumerate() {
        for j in 0..g.len() {
            let orig = net.params()[pi].1.data()[j];
            let a = g.data()[j];
            let mut e = f64::INFINITY;
            for &step in &steps {
                set(&mut net, pi, j, orig + step);
                let plus = l1_loss(&net.forward(&lr)?, &hr)?;
                set(&mut net, pi, j, orig - step);
                let minus = l1_loss(&net.forward(&lr)?, &hr)?;
                let n = (plus - minus) / (2.0 * step);
                // key biases shift every score of a query equally, so
                // softmax makes their gradient exactly zero and the
                // difference quotient is pure rounding noise
                e = e.min(if a.abs() <= 1e-14 && n.abs() <= ZERO_GRAD_ATOL { 0.0 } else { crate::autodiff::relative_error(a, n) });
            }
            set(&mut net, pi, j, orig);
            if e > worst {
                worst = e;
                worst_param = format!("{}[{j}]", names[pi]);
            }
            count += 1;
        }
    }
    let input_rel_error = input_err.into_iter().fold(0.0, f64::max);
    Ok(EndToEndCheck { input_rel_error, param_rel_error: worst, worst_param, param_count: count })
}

/// Overfits a single pair.
pub fn train_toy<T: Scalar, K: Kind>(
    net: &mut Net<T, K>,
    pair: &(LfTensor<T>, LfTensor<T>),
    cfg: &TrainConfig,
) -> Result<Vec<f64>> {
    train(net, std::slice::from_ref(pair), cfg)
}

/// Smooth synthetic light field: a few sinusoidal layers shifted per view by
/// a constant disparity, values in `[0, 1]`.
pub fn synthetic_lf(dims: LfDims, disparity: f64, seed: u64) -> Result<LfTensor<f64>> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let waves: Vec<(f64, f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.gen_range(0.2..0.9),
                rng.gen_range(0.2..0.9),
                rng.gen_range(0.0..std::f64::consts::TAU),
                rng.gen_range(0.1..0.3),
            )
        })
        .collect();
    let (cu, cv) = ((dims.u as f64 - 1.0) / 2.0, (dims.v as f64 - 1.0) / 2.0);
    LfTensor::from_fn(dims, |u, v, x, y, _| {
        let sx = x as f64 + disparity * (u as f64 - cu);
        let sy = y as f64 + disparity * (v as f64 - cv);
        let s: f64 = waves.iter().map(|&(fx, fy, ph, a)| a * (fx * sx + fy * sy + ph).sin()).sum();
        0.5 + 0.5 * s.clamp(-1.0, 1.0)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::m2mt::BlockOptions;
    use crate::network::{ManyToMany, NetConfig, Network, OneToOne};

    #[test]
    fn pair_shapes_and_constants() {
        let hr = LfTensor::from_fn(LfDims::new(2, 2, 8, 8, 1), |_, _, _, _, _| 0.25).unwrap();
        let (lr, _) = make_pair(&hr, 2).unwrap();
        assert_eq!(lr.dims(), LfDims::new(2, 2, 4, 4, 1));
        assert!(lr.data().iter().all(|&x: &f64| (x - 0.25).abs() < 1e-15));
        let odd = LfTensor::<f64>::zeros(LfDims::new(1, 1, 7, 8, 1)).unwrap();
        assert!(make_pair(&odd, 2).is_err());
    }

    #[test]
    fn ramp_survives_down_then_up() {
        let hr = LfTensor::from_fn(LfDims::new(1, 1, 32, 32, 1), |_, _, x, y, _| (x as f64 + 0.5 * y as f64) / 64.0).unwrap();
        let (lr, _) = make_pair(&hr, 2).unwrap();
        let up = crate::network::bicubic_upsample(&lr, 2).unwrap();
        for x in 6..26 {
            for y in 6..26 {
                assert!((up.at(0, 0, x, y, 0) - hr.at(0, 0, x, y, 0)).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn l1_values() {
        let a = LfTensor::from_fn(LfDims::new(1, 2, 2, 2, 1), |_, _, x, _, _| x as f64).unwrap();
        assert_eq!(l1_loss(&a, &a).unwrap(), 0.0);
        let b = LfTensor::from_fn(a.dims(), |u, v, x, y, c| a.at(u, v, x, y, c) + 0.5).unwrap();
        assert_eq!(l1_loss(&a, &b).unwrap(), 0.5);
        assert!(l1_loss(&a, &LfTensor::zeros(LfDims::new(1, 1, 2, 2, 1)).unwrap()).is_err());
    }

    #[test]
    fn adam_hand_evaluation() {
        let cfg = TrainConfig::default();
        let mut p = vec![Tensor::scalar(1.0f64)];
        let mut st = AdamState::new(&p);
        adam_step(&mut p, &[Tensor::scalar(1.0)], &mut st, &cfg).unwrap();
        let want = 1.0 - 2e-4 / (1.0 + 1e-8);
        assert!((p[0].data()[0] - want).abs() < 1e-15);
    }

    #[test]
    fn adam_zero_gradient_leaves_params() {
        let cfg = TrainConfig::default();
        let mut p = vec![Tensor::new(vec![2], vec![0.5f64, -1.0]).unwrap()];
        let mut st = AdamState::new(&p);
        adam_step(&mut p, &[Tensor::new(vec![2], vec![1.0, 1.0]).unwrap()], &mut st, &cfg).unwrap();
        let (before, m) = (p.clone(), st.m[0].clone());
        adam_step(&mut p, &[Tensor::zeros(&[2])], &mut st, &cfg).unwrap();
        assert_ne!(p, before);
        let mut q = vec![Tensor::new(vec![2], vec![0.5f64, -1.0]).unwrap()];
        let mut fresh = AdamState::new(&q);
        adam_step(&mut q, &[Tensor::zeros(&[2])], &mut fresh, &cfg).unwrap();
        assert_eq!(q[0].data(), &[0.5, -1.0]);
        assert_eq!(st.m[0], m.scale(0.9));
        assert!(adam_step(&mut q, &[Tensor::zeros(&[3])], &mut fresh, &cfg).is_err());
    }

    fn toy() -> (Network<f64>, (LfTensor<f64>, LfTensor<f64>)) {
        let cfg = NetConfig { u: 2, v: 2, c: 3, c_cor: 5, n1: 1, n2: 1, scale: 2, opts: BlockOptions::default(), seed: 1 };
        let hr = synthetic_lf(LfDims::new(2, 2, 8, 8, 1), 0.5, 3).unwrap();
        (Network::build(&cfg).unwrap(), make_pair(&hr, 2).unwrap())
    }

    #[test]
    fn zero_lr_gives_flat_curve() {
        let (mut net, pair) = toy();
        let cfg = TrainConfig { lr: 0.0, iters: 4, ..TrainConfig::default() };
        let curve = train_toy(&mut net, &pair, &cfg).unwrap();
        assert!(curve.iter().all(|&l| l == curve[0]));
    }

    #[test]
    fn training_is_deterministic_and_descends() {
        let cfg = TrainConfig { lr: 1e-3, iters: 20, ..TrainConfig::default() };
        let (mut a, pair) = toy();
        let (mut b, _) = toy();
        let ca = train_toy(&mut a, &pair, &cfg).unwrap();
        let cb = train_toy(&mut b, &pair, &cfg).unwrap();
        assert_eq!(ca, cb);
        assert_eq!(a, b);
        assert!(ca.iter().all(|l| l.is_finite()));
        assert!(ca.last().unwrap() < &ca[0]);
    }

    #[test]
    fn non_finite_loss_aborts() {
        let (mut net, (lr, hr)) = toy();
        let mut bad = hr.clone();
        bad.set(0, 0, 0, 0, 0, f64::NAN);
        let err = train_toy(&mut net, &(lr, bad), &TrainConfig { iters: 2, ..TrainConfig::default() }).unwrap_err();
        assert!(matches!(err, Error::NonFinite { index: 0, .. }));
    }

    #[test]
    fn end_to_end_gradients_match() {
        let cfg = NetConfig { u: 2, v: 2, c: 3, c_cor: 5, n1: 2, n2: 1, scale: 2, opts: BlockOptions::default(), seed: 1 };
        let m = end_to_end_gradcheck::<ManyToMany>(&cfg, 4, 4, 1e-5).unwrap();
        assert!(m.input_rel_error <= 1e-5 && m.param_rel_error <= 1e-5, "{m:?}");
        assert_eq!(m.param_count, Network::<f64>::build(&cfg).unwrap().num_params());
        let o = end_to_end_gradcheck::<OneToOne>(&cfg, 4, 4, 1e-5).unwrap();
        assert!(o.input_rel_error <= 1e-5 && o.param_rel_error <= 1e-5, "{o:?}");
    }
}
