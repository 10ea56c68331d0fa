//! Local attribution maps: path-integrated gradients of a windowed gradient
//! detector along a blur-to-sharp input path, and the Gini-based diffusion
//! index of the result.

use crate::autodiff::{Backend, Tape, Var};
use crate::error::{Error, Result};
use crate::lightfield::{LfDims, LfTensor};
use crate::network::{Kind, Net};
use crate::ops::{self, Window};
use crate::par;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LamConfig {
    /// Path steps.
    pub m: usize,
    /// Blur width at the start of the path, in pixels.
    pub sigma: f64,
    /// Detector window on the super-resolved output.
    pub window: Window,
    /// Differences `γ(k/m) − γ((k+1)/m)` scaled by `1/m` (with the last point
    /// clamped), instead of `γ(k/m) − γ((k−1)/m)`.
    pub literal: bool,
}

impl LamConfig {
    /// Defaults (`m = 50`, `σ = 4`, literal differences) with the window on
    /// the central view.
    pub fn new(u: usize, v: usize, x: usize, y: usize, l: usize) -> Self {
        LamConfig { m: 50, sigma: 4.0, window: Window { view: (u / 2) * v + v / 2, x, y, l }, literal: true }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::Invalid("LAM needs at least one path step".into()));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Invalid(format!("sigma must be finite and non-negative, got {}", self.sigma)));
        }
        if self.window.l == 0 {
            return Err(Error::Invalid("window side must be at least 1".into()));
        }
        Ok(())
    }
}

fn gaussian_taps(width: f64) -> Vec<f64> {
    let r = (3.0 * width).ceil() as isize;
    let w: Vec<f64> = (-r..=r).map(|i| (-(i as f64).powi(2) / (2.0 * width * width)).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

/// Separable edge-replicate blur of one `(A, B)` plane.
fn blur_plane(p: &[f64], a: usize, b: usize, taps: &[f64]) -> Vec<f64> {
    let r = (taps.len() / 2) as isize;
    let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;
    let mut tmp = vec![0.0; a * b];
    for i in 0..a {
        for j in 0..b {
            tmp[i * b + j] = taps.iter().enumerate().map(|(t, w)| w * p[clamp(i as isize + t as isize - r, a) * b + j]).sum();
        }
    }
    let mut out = vec![0.0; a * b];
    for i in 0..a {
        for j in 0..b {
            out[i * b + j] = taps.iter().enumerate().map(|(t, w)| w * tmp[i * b + clamp(j as isize + t as isize - r, b)]).sum();
        }
    }
    out
}

/// Path point `γ(k/m)`: every view blurred with width `σ·(1 − k/m)`.
pub fn gaussian_path(lr: &LfTensor<f64>, k: usize, cfg: &LamConfig) -> Result<LfTensor<f64>> {
    if cfg.m == 0 || k > cfg.m {
        return Err(Error::Invalid(format!("path step {k} outside 0..={}", cfg.m)));
    }
    let width = cfg.sigma * (1.0 - k as f64 / cfg.m as f64);
    if width <= 0.0 {
        return Ok(lr.clone());
    }
    let taps = gaussian_taps(width);
    let d = lr.dims();
    let mut out = lr.clone();
    for n in 0..d.views() {
        for ch in 0..d.c {
            let base = n * d.pixels() * d.c;
            let plane: Vec<f64> = (0..d.pixels()).map(|p| lr.data()[base + p * d.c + ch]).collect();
            let blurred = blur_plane(&plane, d.w, d.h, &taps);
            for (p, x) in blurred.into_iter().enumerate() {
                out.data_mut()[base + p * d.c + ch] = x;
            }
        }
    }
    Ok(out)
}

fn features(lf: &LfTensor<f64>) -> Tensor<f64> {
    let d = lf.dims();
    lf.tensor().clone().reshape(&[d.views(), d.w, d.h, d.c]).expect("same element count")
}

/// Windowed gradient magnitude on one view of a super-resolved light field.
pub fn detector(sr: &LfTensor<f64>, window: &Window) -> Result<f64> {
    ops::window_gradient(&features(sr), window)
}

/// Gini coefficient `Σᵢ Σⱼ |gᵢ − gⱼ| / (2 n² ḡ)` of non-negative values,
/// computed from the sorted values. `None` when every value is zero.
pub fn gini(values: &[f64]) -> Result<Option<f64>> {
    if values.is_empty() {
        return Err(Error::Invalid("gini of an empty list".into()));
    }
    if let Some(i) = values.iter().position(|&x| !(x >= 0.0 && x.is_finite())) {
        return Err(Error::Invalid(format!("gini needs finite non-negative values, index {i} is {}", values[i])));
    }
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let total: f64 = s.iter().sum();
    if total == 0.0 {
        return Ok(None);
    }
    if s[0] == s[s.len() - 1] {
        return Ok(Some(0.0));
    }
    let n = s.len() as f64;
    let weighted: f64 = s.iter().enumerate().map(|(i, &x)| (2.0 * (i + 1) as f64 - n - 1.0) * x).sum();
    Ok(Some(weighted / (n * total)))
}

/// `(1 − G)·100`.
pub fn diffusion_index(g: f64) -> f64 {
    (1.0 - g) * 100.0
}

#[derive(Clone, Debug, PartialEq)]
pub struct LamResult {
    /// Attribution magnitudes in macro-pixel layout `(U·H, V·W)`.
    pub map: Tensor<f64>,
    /// The same magnitudes in light-field layout.
    pub field: LfTensor<f64>,
    pub di: f64,
    pub gini: f64,
    /// The map is identically zero; `di` is reported as 100.
    pub degenerate: bool,
}

impl LamResult {
    /// Attribution mass per view, row-major over `(U, V)`.
    pub fn view_mass(&self) -> Vec<f64> {
        let d = self.field.dims();
        let n = d.pixels() * d.c;
        self.field.data().chunks(n).map(|c| c.iter().sum()).collect()
    }

    /// Min-max normalized 8-bit heatmap of `map` as a binary PGM.
    pub fn heatmap_pgm(&self) -> Result<Vec<u8>> {
        let lo = self.map.data().iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.map.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        let norm = self.map.map(|x| if span > 0.0 { (x - lo) / span } else { 0.0 });
        crate::io::encode_pgm(&norm, 255)
    }
}

/// LAM with the windowed gradient detector.
pub fn lam<K: Kind>(net: &Net<f64, K>, lr: &LfTensor<f64>, cfg: &LamConfig) -> Result<LamResult> {
    let window = cfg.window;
    lam_with(net, lr, cfg, move |tape, y| tape.window_gradient(&y, &window))
}

/// LAM with an arbitrary scalar detector on the `(N, rW, rH, 1)` output.
pub fn lam_with<K: Kind, D>(net: &Net<f64, K>, lr: &LfTensor<f64>, cfg: &LamConfig, detector: D) -> Result<LamResult>
where
    D: Fn(&Tape<f64>, Var) -> Result<Var> + Sync + Send,
{
    cfg.validate()?;
    let d = lr.dims();
    if d.c != 1 {
        return Err(Error::shape("lam", format!("expected one channel, got {}", d.c)));
    }
    let r = net.config().scale;
    cfg.window.check(&[d.views(), d.w * r, d.h * r, 1])?;
    let path: Vec<LfTensor<f64>> = (0..=cfg.m).map(|k| gaussian_path(lr, k, cfg)).collect::<Result<_>>()?;
    let steps = par::map_range(cfg.m, |i| -> Result<Tensor<f64>> {
        let k = i + 1;
        let tape = Tape::new();
        let x = tape.leaf(features(&path[k]));
        let y = net.forward_with(&tape, &x)?;
        let s = detector(&tape, y)?;
        let g = tape.backward(s, &Tensor::scalar(1.0))?.take(x);
        let (diff, scale) = if cfg.literal {
            let next = &path[(k + 1).min(cfg.m)];
            (path[k].tensor().sub(next.tensor())?, 1.0 / cfg.m as f64)
        } else {
            (path[k].tensor().sub(path[k - 1].tensor())?, 1.0)
        };
        let diff = diff.reshape(g.dims())?;
        g.zip_map(&diff, "lam", |g, dx| g * dx * scale)
    });
    let mut acc = Tensor::<f64>::zeros(&[d.views(), d.w, d.h, 1]);
    for s in steps {
        acc.add_assign(&s?)?;
    }
    let field = LfTensor::from_tensor(acc.map(f64::abs).reshape(&d.as_array())?)?;
    let macpi = field.to_macpi();
    let map = macpi.reshape(&[d.u * d.h, d.v * d.w])?;
    let (gini, degenerate) = match gini(field.data())? {
        Some(g) => (g, false),
        None => (0.0, true),
    };
    Ok(LamResult { map, field, di: diffusion_index(gini), gini, degenerate })
}

/// View index of `(u, v)` for window placement.
pub fn view_index(dims: LfDims, u: usize, v: usize) -> usize {
    u * dims.v + v
}
