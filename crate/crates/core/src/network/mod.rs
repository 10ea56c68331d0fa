//! Full super-resolution networks: the many-to-many network and the per-view
//! baseline, sharing a convolutional head and a pixel-shuffle tail.
//!
//! ```text
//! lr ─┬─ head (n1 × 3×3 conv) ─ n2 blocks ─ 1×1 conv ─ shuffle r ─ 3×3 conv ─┐
//!     └─ bicubic ×r ─────────────────────────────────────────────────────────(+)─ sr
//! ```

mod count;
mod registry;

pub use count::{count_flops, count_params, FlopConvention, FlopKind, FlopReport, FlopRow, ParamReport};
pub use registry::{infer_config, InferredConfig};

use crate::autodiff::{Backend, Eager};
use crate::error::{Error, Result};
use crate::layers::{dims4, join, Initializer, Module};
use crate::lightfield::{LfDims, LfTensor};
use crate::m2mt::{BlockOptions, CorrelationBlock, SpatialBlock};
use crate::ops::{Conv2dParams, ResizePlan, LEAKY_SLOPE};
use crate::tensor::{dims_str, Scalar, Tensor};

/// Network hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NetConfig {
    pub u: usize,
    pub v: usize,
    /// Feature channels.
    pub c: usize,
    /// Correlation token width; attention width in the many-to-many block.
    pub c_cor: usize,
    /// Head convolutions.
    pub n1: usize,
    /// Correlation blocks.
    pub n2: usize,
    /// Upscaling factor, 2 or 4.
    pub scale: usize,
    pub opts: BlockOptions,
    pub seed: u64,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig::for_scale(4)
    }
}

impl NetConfig {
    /// Defaults for the given factor: 8 blocks at 4×, 9 at 2×.
    pub fn for_scale(scale: usize) -> Self {
        NetConfig {
            u: 5,
            v: 5,
            c: 48,
            c_cor: 128,
            n1: 4,
            n2: if scale == 2 { 9 } else { 8 },
            scale,
            opts: BlockOptions::default(),
            seed: 0,
        }
    }

    pub fn views(&self) -> usize {
        self.u * self.v
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Invalid(m));
        if self.u == 0 || self.v == 0 {
            return bad(format!("angular extents must be positive, got {}x{}", self.u, self.v));
        }
        if self.c == 0 || self.c_cor == 0 {
            return bad(format!("channel widths must be positive, got C={} C_Cor={}", self.c, self.c_cor));
        }
        if self.n1 == 0 {
            return bad("n1 must be at least 1".into());
        }
        if self.n2 == 0 {
            return bad("n2 must be at least 1".into());
        }
        if self.scale != 2 && self.scale != 4 {
            return bad(format!("scale must be 2 or 4, got {}", self.scale));
        }
        if self.opts.ffn_ratio == 0 {
            return bad("feed-forward ratio must be positive".into());
        }
        Ok(())
    }
}

/// Block body shared by the head/tail scaffold.
pub trait FeatureBlock<T: Scalar>: Module<T> + Clone + std::fmt::Debug + PartialEq + Send + Sync {
    fn build(init: &mut Initializer, cfg: &NetConfig) -> Self;
    fn forward<B: Backend<T>>(&self, be: &B, prefix: &str, x: &B::Value) -> Result<B::Value>;
}

impl<T: Scalar> FeatureBlock<T> for CorrelationBlock<T> {
    fn build(init: &mut Initializer, cfg: &NetConfig) -> Self {
        CorrelationBlock::new(init, cfg.views(), cfg.c, cfg.c_cor, &cfg.opts)
    }
    fn forward<B: Backend<T>>(&self, be: &B, prefix: &str, x: &B::Value) -> Result<B::Value> {
        CorrelationBlock::forward(self, be, prefix, x)
    }
}

impl<T: Scalar> FeatureBlock<T> for SpatialBlock<T> {
    fn build(init: &mut Initializer, cfg: &NetConfig) -> Self {
        SpatialBlock::new(init, cfg.c, &cfg.opts)
    }
    fn forward<B: Backend<T>>(&self, be: &B, prefix: &str, x: &B::Value) -> Result<B::Value> {
        SpatialBlock::forward(self, be, prefix, x)
    }
}

/// Selects the block family of a [`Net`].
pub trait Kind {
    type Block<T: Scalar>: FeatureBlock<T>;
    const NAME: &'static str;
    /// Whether blocks read across views.
    const MIXES_VIEWS: bool;
}

/// Correlation blocks: every view reads every other.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ManyToMany;

/// Per-view spatial transformers: views never mix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OneToOne;

impl Kind for ManyToMany {
    type Block<T: Scalar> = CorrelationBlock<T>;
    const NAME: &'static str = "m2mt";
    const MIXES_VIEWS: bool = true;
}

impl Kind for OneToOne {
    type Block<T: Scalar> = SpatialBlock<T>;
    const NAME: &'static str = "o2o";
    const MIXES_VIEWS: bool = false;
}

/// Head, blocks and tail with a bicubic global residual.
#[derive(Clone, Debug, PartialEq)]
pub struct Net<T: Scalar, K: Kind> {
    cfg: NetConfig,
    pub head: Vec<Conv2dParams<T>>,
    pub blocks: Vec<K::Block<T>>,
    /// 1×1, `C -> r²·C`.
    pub tail_expand: Conv2dParams<T>,
    /// 3×3, `C -> 1` at the output resolution.
    pub tail_out: Conv2dParams<T>,
}

pub type Network<T = f64> = Net<T, ManyToMany>;
pub type O2OBaseline<T = f64> = Net<T, OneToOne>;

impl<T: Scalar, K: Kind> Net<T, K> {
    /// Glorot-uniform initialization from `cfg.seed`.
    pub fn build(cfg: &NetConfig) -> Result<Self> {
        Self::with_init(cfg, &mut Initializer::seeded(cfg.seed))
    }

    /// All-zero parameters (norm gains included).
    pub fn zeros(cfg: &NetConfig) -> Result<Self> {
        Self::with_init(cfg, &mut Initializer::zeros())
    }

    fn with_init(cfg: &NetConfig, init: &mut Initializer) -> Result<Self> {
        cfg.validate()?;
        let c = cfg.c;
        let head = (0..cfg.n1).map(|i| init.conv(c, if i == 0 { 1 } else { c }, 3)).collect();
        let blocks = (0..cfg.n2).map(|_| K::Block::<T>::build(init, cfg)).collect();
        Ok(Net {
            cfg: *cfg,
            head,
            blocks,
            tail_expand: init.conv(cfg.scale * cfg.scale * c, c, 1),
            tail_out: init.conv(1, c, 3),
        })
    }

    pub fn config(&self) -> &NetConfig {
        &self.cfg
    }

    /// Features `(N, W, H, 1)` to the super-resolved `(N, rW, rH, 1)`.
    pub fn forward_with<B: Backend<T>>(&self, be: &B, x: &B::Value) -> Result<B::Value> {
        let [n, w, h, ch] = dims4(&be.dims(x), "forward")?;
        if ch != 1 {
            return Err(Error::shape("forward", format!("expected one channel, got {ch}")));
        }
        let r = self.cfg.scale;
        let slope = T::of(LEAKY_SLOPE);
        let mut f = x.clone();
        for (i, conv) in self.head.iter().enumerate() {
            if i > 0 {
                f = be.leaky_relu(&f, slope);
            }
            f = conv.forward(be, &format!("head.{i}"), &f)?;
        }
        for (i, block) in self.blocks.iter().enumerate() {
            f = block.forward(be, &format!("blocks.{i}"), &f)?;
        }
        let f = self.tail_expand.forward(be, "tail.expand", &f)?;
        let f = be.pixel_shuffle(&f, r)?;
        let f = self.tail_out.forward(be, "tail.out", &f)?;
        let up = be.resize(x, &ResizePlan::new(w, h, r as f64)?)?;
        debug_assert_eq!(be.dims(&up), [n, w * r, h * r, 1]);
        be.add(&f, &up)
    }

    /// Super-resolves a single-channel light field.
    pub fn forward(&self, lr: &LfTensor<T>) -> Result<LfTensor<T>> {
        let d = lr.dims();
        if d.c != 1 {
            return Err(Error::shape("forward", format!("expected one channel, got {}", d.c)));
        }
        let x = lr.tensor().clone().reshape(&[d.views(), d.w, d.h, 1])?;
        let y = self.forward_with(&Eager, &x)?;
        let r = self.cfg.scale;
        LfTensor::from_tensor(y.reshape(&[d.u, d.v, d.w * r, d.h * r, 1])?)
    }

    /// Named parameters in registry order.
    pub fn params(&self) -> Vec<(String, Tensor<T>)> {
        let mut out = Vec::new();
        self.visit("", &mut |n, t| out.push((n.to_string(), t.clone())));
        out
    }

    /// Overwrites every parameter from `named`; names and dims must match
    /// the registry exactly.
    pub fn load_params(&mut self, named: &[(String, Tensor<T>)]) -> Result<()> {
        let map: std::collections::HashMap<&str, &Tensor<T>> =
            named.iter().map(|(n, t)| (n.as_str(), t)).collect();
        if map.len() != named.len() {
            return Err(Error::Invalid("duplicate parameter names".into()));
        }
        let mut err = None;
        let mut seen = 0;
        self.visit_mut("", &mut |name, t| {
            if err.is_some() {
                return;
            }
            match map.get(name) {
                None => err = Some(Error::Invalid(format!("missing parameter {name}"))),
                Some(src) if src.dims() != t.dims() => {
                    err = Some(Error::shape(
                        "load_params",
                        format!("{name}: file {} vs network {}", dims_str(src.dims()), dims_str(t.dims())),
                    ))
                }
                Some(src) => {
                    *t = (*src).clone();
                    seen += 1;
                }
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
        if seen != named.len() {
            return Err(Error::Invalid(format!("{} unexpected parameters", named.len() - seen)));
        }
        Ok(())
    }

    /// Same network in another precision.
    pub fn cast<U: Scalar>(&self) -> Net<U, K> {
        let mut out = Net::<U, K>::zeros(&self.cfg).expect("config already validated");
        let src = self.params();
        let mut i = 0;
        out.visit_mut("", &mut |_, t| {
            *t = src[i].1.cast();
            i += 1;
        });
        out
    }
}

impl<T: Scalar, K: Kind> Module<T> for Net<T, K> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor<T>)) {
        for (i, c) in self.head.iter().enumerate() {
            c.visit(&join(prefix, &format!("head.{i}")), f);
        }
        for (i, b) in self.blocks.iter().enumerate() {
            b.visit(&join(prefix, &format!("blocks.{i}")), f);
        }
        self.tail_expand.visit(&join(prefix, "tail.expand"), f);
        self.tail_out.visit(&join(prefix, "tail.out"), f);
    }
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor<T>)) {
        for (i, c) in self.head.iter_mut().enumerate() {
            c.visit_mut(&join(prefix, &format!("head.{i}")), f);
        }
        for (i, b) in self.blocks.iter_mut().enumerate() {
            b.visit_mut(&join(prefix, &format!("blocks.{i}")), f);
        }
        self.tail_expand.visit_mut(&join(prefix, "tail.expand"), f);
        self.tail_out.visit_mut(&join(prefix, "tail.out"), f);
    }
}

/// Either network family, as recovered from a weight file.
#[derive(Clone, Debug, PartialEq)]
pub enum AnyNet<T: Scalar = f64> {
    ManyToMany(Network<T>),
    OneToOne(O2OBaseline<T>),
}

impl<T: Scalar> AnyNet<T> {
    /// Skeleton for `inferred` resolved on a `u × v` grid, filled from `named`.
    pub fn from_params(inferred: &InferredConfig, u: usize, v: usize, named: &[(String, Tensor<T>)]) -> Result<Self> {
        let cfg = inferred.resolve(u, v)?;
        if inferred.many_to_many {
            let mut net = Network::zeros(&cfg)?;
            net.load_params(named)?;
            Ok(AnyNet::ManyToMany(net))
        } else {
            let mut net = O2OBaseline::zeros(&cfg)?;
            net.load_params(named)?;
            Ok(AnyNet::OneToOne(net))
        }
    }

    pub fn config(&self) -> &NetConfig {
        match self {
            AnyNet::ManyToMany(n) => n.config(),
            AnyNet::OneToOne(n) => n.config(),
        }
    }

    pub fn forward(&self, lr: &LfTensor<T>) -> Result<LfTensor<T>> {
        match self {
            AnyNet::ManyToMany(n) => n.forward(lr),
            AnyNet::OneToOne(n) => n.forward(lr),
        }
    }

    pub fn params(&self) -> Vec<(String, Tensor<T>)> {
        match self {
            AnyNet::ManyToMany(n) => n.params(),
            AnyNet::OneToOne(n) => n.params(),
        }
    }
}

pub fn build(cfg: &NetConfig) -> Result<Network> {
    Network::build(cfg)
}

pub fn forward<T: Scalar>(net: &Network<T>, lr: &LfTensor<T>) -> Result<LfTensor<T>> {
    net.forward(lr)
}

pub fn forward_o2o<T: Scalar>(net: &O2OBaseline<T>, lr: &LfTensor<T>) -> Result<LfTensor<T>> {
    net.forward(lr)
}

/// Per-view bicubic upsampling of a light field (the networks' residual path).
pub fn bicubic_upsample<T: Scalar>(lr: &LfTensor<T>, r: usize) -> Result<LfTensor<T>> {
    let d = lr.dims();
    let x = lr.tensor().clone().reshape(&[d.views(), d.w, d.h, d.c])?;
    let y = crate::ops::resize::resize_with(&x, &ResizePlan::new(d.w, d.h, r as f64)?)?;
    LfTensor::from_tensor(y.reshape(&LfDims::new(d.u, d.v, d.w * r, d.h * r, d.c).as_array())?)
}
