//! Target-independent half of the demo. Everything here returns plain Rust
//! values so it can be tested natively.

use m2mt::attribution::{lam, LamConfig};
use m2mt::network::{Kind, ManyToMany, Net, NetConfig, OneToOne};
use m2mt::ops::Window;
use m2mt::training::synthetic_lf;
use m2mt::{Error, LfDims, LfTensor, Result, Tensor};

/// Angular grid and low-resolution view size used throughout the page.
pub const GRID: usize = 5;
pub const SIDE: usize = 16;
pub const SCALE: usize = 2;

/// An RGBA image plus whatever scalar summary the operation produced.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub rgba: Vec<u8>,
    pub di: f64,
    pub gini: f64,
    /// Fraction of views with a nonzero response.
    pub reach: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    ManyToMany,
    OneToOne,
}

impl Family {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "m2m" | "m2mt" => Ok(Family::ManyToMany),
            "o2o" => Ok(Family::OneToOne),
            _ => Err(Error::Invalid(format!("unknown network family {s:?}, expected m2m or o2o"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum View {
    Sais,
    Spatial,
    Angular,
    EpiH,
    EpiV,
    Macpi,
}

impl View {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "sais" => View::Sais,
            "spatial" => View::Spatial,
            "angular" => View::Angular,
            "epi_h" => View::EpiH,
            "epi_v" => View::EpiV,
            "macpi" => View::Macpi,
            _ => return Err(Error::Invalid(format!("unknown view {s:?}"))),
        })
    }
}

pub fn scene(disparity: f64, seed: u64) -> Result<LfTensor<f64>> {
    synthetic_lf(LfDims::new(GRID, GRID, SIDE, SIDE, 1), disparity, seed)
}

/// A network small enough to run interactively.
pub fn demo_config(seed: u64) -> NetConfig {
    NetConfig { u: GRID, v: GRID, c: 8, c_cor: 16, n1: 1, n2: 1, scale: SCALE, seed, ..NetConfig::for_scale(SCALE) }
}

/// Grid of views with a one-pixel gutter: view `(u, v)` sits at tile row `u`,
/// column `v`, and pixel `(x, y)` at row `x`, column `y` inside it.
pub fn mosaic(lf: &LfTensor<f64>) -> Tensor<f64> {
    let d = lf.dims();
    let (rows, cols) = (d.u * (d.w + 1) - 1, d.v * (d.h + 1) - 1);
    let mut out = vec![f64::NAN; rows * cols];
    for u in 0..d.u {
        for v in 0..d.v {
            for x in 0..d.w {
                for y in 0..d.h {
                    out[(u * (d.w + 1) + x) * cols + v * (d.h + 1) + y] = lf.at(u, v, x, y, 0);
                }
            }
        }
    }
    Tensor::new(vec![rows, cols], out).expect("sized above")
}

/// First channel of a 3-d view tensor as a 2-d plane.
fn plane(t: &Tensor<f64>) -> Tensor<f64> {
    let d = t.dims();
    Tensor::from_fn(&[d[0], d[1]], |i| t.data()[i * d[2]])
}

/// Gray for intensities in `[0, 1]`; NaN marks gutters.
pub fn gray(p: &Tensor<f64>) -> Image {
    paint(p, |x| {
        let g = (x.clamp(0.0, 1.0) * 255.0).round() as u8;
        [g, g, g]
    })
}

/// Black-red-yellow-white ramp on `log10` of the magnitude over four decades
/// below the peak, so faint but nonzero responses stay visible.
pub fn heat(p: &Tensor<f64>) -> Image {
    let peak = p.data().iter().copied().filter(|x| x.is_finite()).fold(0.0, f64::max);
    paint(p, |x| {
        if peak <= 0.0 || x <= 0.0 {
            return [0, 0, 0];
        }
        let t = ((x / peak).log10() / 4.0 + 1.0).clamp(0.0, 1.0) * 3.0;
        let c = |s: f64| (s.clamp(0.0, 1.0) * 255.0).round() as u8;
        [c(t), c(t - 1.0), c(t - 2.0)]
    })
}

fn paint(p: &Tensor<f64>, f: impl Fn(f64) -> [u8; 3]) -> Image {
    let d = p.dims();
    let mut rgba = Vec::with_capacity(p.len() * 4);
    for &x in p.data() {
        let [r, g, b] = if x.is_nan() { [40, 40, 48] } else { f(x) };
        rgba.extend_from_slice(&[r, g, b, 255]);
    }
    Image { width: d[1], height: d[0], rgba, di: f64::NAN, gini: f64::NAN, reach: f64::NAN }
}

/// The synthetic scene rearranged into one of its subspace layouts.
pub fn render_view(view: View, disparity: f64, seed: u64) -> Result<Image> {
    let lf = scene(disparity, seed)?;
    let p = match view {
        View::Sais => mosaic(&lf),
        View::Spatial => plane(&lf.to_spatial()),
        View::Angular => plane(&lf.to_angular()),
        View::EpiH => plane(&lf.to_epi_h()),
        View::EpiV => plane(&lf.to_epi_v()),
        View::Macpi => plane(&lf.to_macpi()),
    };
    Ok(gray(&p))
}

fn views_touched(lf: &LfTensor<f64>) -> f64 {
    let d = lf.dims();
    let n = d.pixels() * d.c;
    let hit = lf.data().chunks(n).filter(|c| c.iter().any(|&x| x != 0.0)).count();
    hit as f64 / d.views() as f64
}

fn response<K: Kind>(cfg: &NetConfig, lr: &LfTensor<f64>, x: usize, y: usize, delta: f64) -> Result<LfTensor<f64>> {
    let net = Net::<f64, K>::build(cfg)?;
    let base = net.forward(lr)?;
    let mut bumped = lr.clone();
    let c = GRID / 2;
    bumped.set(c, c, x, y, 0, lr.at(c, c, x, y, 0) + delta);
    let out = net.forward(&bumped)?;
    LfTensor::from_tensor(out.tensor().sub(base.tensor())?.map(f64::abs))
}

/// Output change everywhere after nudging one low-resolution pixel of the
/// central view. The one-to-one family can only respond inside that view.
pub fn perturbation(family: Family, x: usize, y: usize, seed: u64) -> Result<Image> {
    if x >= SIDE || y >= SIDE {
        return Err(Error::Invalid(format!("pixel ({x},{y}) outside the {SIDE}x{SIDE} view")));
    }
    let lr = scene(0.5, seed)?;
    let cfg = demo_config(seed);
    let diff = match family {
        Family::ManyToMany => response::<ManyToMany>(&cfg, &lr, x, y, 0.25)?,
        Family::OneToOne => response::<OneToOne>(&cfg, &lr, x, y, 0.25)?,
    };
    let mut img = heat(&mosaic(&diff));
    img.reach = views_touched(&diff);
    Ok(img)
}

/// Attribution map for a gradient detector on a window of the central
/// output view, with its diffusion index.
pub fn attribution(family: Family, x: usize, y: usize, l: usize, steps: usize, seed: u64) -> Result<Image> {
    let lr = scene(0.5, seed)?;
    let cfg = demo_config(seed);
    let mut lc = LamConfig::new(GRID, GRID, x, y, l);
    lc.m = steps;
    lc.window = Window { view: lc.window.view, x, y, l };
    let res = match family {
        Family::ManyToMany => lam(&Net::<f64, ManyToMany>::build(&cfg)?, &lr, &lc)?,
        Family::OneToOne => lam(&Net::<f64, OneToOne>::build(&cfg)?, &lr, &lc)?,
    };
    let mut img = heat(&mosaic(&res.field));
    img.di = res.di;
    img.gini = res.gini;
    img.reach = views_touched(&res.field);
    Ok(img)
}
