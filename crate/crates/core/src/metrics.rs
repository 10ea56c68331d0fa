//! Fidelity metrics: MSE, PSNR, SSIM and luma conversion.

use std::fmt;

use crate::error::{Error, Result};
use crate::lightfield::LfTensor;
use crate::tensor::{dims_str, Scalar, Tensor};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

pub fn mse<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<f64> {
    a.check_same(b, "mse")?;
    if a.is_empty() {
        return Err(Error::Invalid("mse of an empty tensor".into()));
    }
    let s: f64 = a.data().iter().zip(b.data()).map(|(&x, &y)| (x.to_f64() - y.to_f64()).powi(2)).sum();
    Ok(s / a.len() as f64)
}

/// `10·log10(peak² / MSE)`; identical inputs give `+∞`.
pub fn psnr<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, peak: f64) -> Result<f64> {
    if !(peak > 0.0) {
        return Err(Error::Invalid(format!("peak must be positive, got {peak}")));
    }
    Ok(psnr_from_mse(mse(a, b)?, peak))
}

fn psnr_from_mse(mse: f64, peak: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (peak * peak / mse).log10()
    }
}

fn gaussian_window(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size / 2) as f64;
    let w: Vec<f64> = (0..size).map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

/// Valid-region separable filtering of an `h × w` plane.
fn filter_valid(img: &[f64], h: usize, w: usize, k: &[f64]) -> (Vec<f64>, usize, usize) {
    let n = k.len();
    let (oh, ow) = (h - n + 1, w - n + 1);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = (0..n).map(|i| k[i] * img[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..n).map(|i| k[i] * rows[(y + i) * ow + x]).sum();
        }
    }
    (out, oh, ow)
}

/// Window side used for an `h × w` image: 11, or the largest odd size that fits.
pub fn ssim_window_for(h: usize, w: usize) -> usize {
    let m = h.min(w).min(SSIM_WINDOW);
    if m % 2 == 0 {
        m - 1
    } else {
        m
    }
}

/// Mean local SSIM of two `(H, W)` planes in `[0, 1]` with a Gaussian window.
pub fn ssim<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<f64> {
    a.check_same(b, "ssim")?;
    let [h, w] = match *a.dims() {
        [h, w] => [h, w],
        _ => return Err(Error::shape("ssim", format!("expected (H, W), got {}", dims_str(a.dims())))),
    };
    if h == 0 || w == 0 {
        return Err(Error::Invalid("ssim of an empty image".into()));
    }
    let k = gaussian_window(ssim_window_for(h, w), SSIM_SIGMA);
    let fa: Vec<f64> = a.data().iter().map(|&x| x.to_f64()).collect();
    let fb: Vec<f64> = b.data().iter().map(|&x| x.to_f64()).collect();
    let prod = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(x, y)| x * y).collect::<Vec<_>>();
    let (mu_a, oh, ow) = filter_valid(&fa, h, w, &k);
    let (mu_b, ..) = filter_valid(&fb, h, w, &k);
    let (aa, ..) = filter_valid(&prod(&fa, &fa), h, w, &k);
    let (bb, ..) = filter_valid(&prod(&fb, &fb), h, w, &k);
    let (ab, ..) = filter_valid(&prod(&fa, &fb), h, w, &k);
    let c1 = (SSIM_K1 * 1.0).powi(2);
    let c2 = (SSIM_K2 * 1.0).powi(2);
    let mut total = 0.0;
    for i in 0..oh * ow {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = aa[i] - ma * ma;
        let vb = bb[i] - mb * mb;
        let cov = ab[i] - ma * mb;
        total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    Ok(total / (oh * ow) as f64)
}

/// BT.601 luma of three equal planes.
pub fn rgb_to_y<T: Scalar>(r: &Tensor<T>, g: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    r.check_same(g, "rgb_to_y")?;
    r.check_same(b, "rgb_to_y")?;
    let data = r
        .data()
        .iter()
        .zip(g.data())
        .zip(b.data())
        .map(|((&r, &g), &b)| T::of(0.299 * r.to_f64() + 0.587 * g.to_f64() + 0.114 * b.to_f64()))
        .collect();
    Tensor::new(r.dims().to_vec(), data)
}

/// Per-view PSNR/SSIM of a light field against its reference.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub u: usize,
    pub v: usize,
    /// Row-major `U × V` grids.
    pub psnr: Vec<f64>,
    pub ssim: Vec<f64>,
    pub mean_psnr: f64,
    pub mean_ssim: f64,
    /// Over the whole light field.
    pub mse: f64,
}

/// SSIM of a multi-channel view is the mean over channels.
pub fn lf_metrics<T: Scalar>(sr: &LfTensor<T>, hr: &LfTensor<T>) -> Result<MetricReport> {
    sr.tensor().check_same(hr.tensor(), "lf_metrics")?;
    let d = sr.dims();
    let mut psnr = Vec::with_capacity(d.views());
    let mut ssims = Vec::with_capacity(d.views());
    for u in 0..d.u {
        for v in 0..d.v {
            let (a, b) = (sr.sai(u, v), hr.sai(u, v));
            psnr.push(psnr_from_mse(mse(&a, &b)?, 1.0));
            let mut s = 0.0;
            for ch in 0..d.c {
                let plane = |t: &Tensor<T>| Tensor::from_fn(&[d.w, d.h], |i| t.data()[i * d.c + ch]);
                s += ssim(&plane(&a), &plane(&b))?;
            }
            ssims.push(s / d.c as f64);
        }
    }
    let n = psnr.len() as f64;
    Ok(MetricReport {
        u: d.u,
        v: d.v,
        mean_psnr: psnr.iter().sum::<f64>() / n,
        mean_ssim: ssims.iter().sum::<f64>() / n,
        psnr,
        ssim: ssims,
        mse: mse(sr.tensor(), hr.tensor())?,
    })
}

impl MetricReport {
    /// `key=value` lines for scripts.
    pub fn to_kv(&self) -> String {
        let mut s = format!(
            "mean_psnr={}\nmean_ssim={}\nmse={}\n",
            sig6(self.mean_psnr),
            sig6(self.mean_ssim),
            sig6(self.mse)
        );
        for u in 0..self.u {
            for v in 0..self.v {
                let i = u * self.v + v;
                s += &format!("psnr_u{u}_v{v}={}\nssim_u{u}_v{v}={}\n", sig6(self.psnr[i]), sig6(self.ssim[i]));
            }
        }
        s
    }
}

impl fmt::Display for MetricReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "PSNR (dB) per view")?;
        write!(f, "{:>5}", "u\\v")?;
        for v in 0..self.v {
            write!(f, " {v:>10}")?;
        }
        writeln!(f)?;
        for u in 0..self.u {
            write!(f, "{u:>5}")?;
            for v in 0..self.v {
                write!(f, " {:>10}", sig6(self.psnr[u * self.v + v]))?;
            }
            writeln!(f)?;
        }
        writeln!(f, "mean PSNR  {}", sig6(self.mean_psnr))?;
        writeln!(f, "mean SSIM  {}", sig6(self.mean_ssim))?;
        write!(f, "MSE        {}", sig6(self.mse))
    }
}

/// Formats with six significant digits; `inf`/`-inf`/`nan` for specials.
pub fn sig6(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0.00000".into();
    }
    let e = x.abs().log10().floor() as i32;
    if (-4..6).contains(&e) {
        let decimals = (5 - e).max(0) as usize;
        let s = format!("{x:.decimals$}");
        // rounding may carry into a new digit, e.g. 9.999996 -> 10.00000
        let digits = s.chars().filter(|c| c.is_ascii_digit()).skip_while(|&c| c == '0').count();
        if digits > 6 && decimals > 0 {
            let d = decimals - 1;
            return format!("{x:.d$}");
        }
        s
    } else {
        format!("{x:.5e}")
    }
}
