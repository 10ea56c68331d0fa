//! Many-to-many transformer, angular transformer and the correlation block.
//!
//! Inside the network, features are `(N, W, H, C)` with `N = U·V` views; the
//! functions at the bottom of this module expose the same blocks on
//! [`LfTensor`] values.
//!
//! The many-to-many block folds all views into the channel axis at every
//! pixel (`(1, W·H, U·V·C)`), projects that to a `C_Cor`-wide correlation
//! token, runs self-attention across all `W·H` tokens and projects back. Any
//! output sample therefore depends on every input sample of every view.

use crate::autodiff::{Backend, Eager};
use crate::error::{Error, Result};
use crate::layers::{dims4, join, FeedForward, Initializer, Module, SelfAttention};
use crate::lightfield::{LfDims, LfTensor};
use crate::ops::{Conv2dParams, LinearParams, LEAKY_SLOPE};
use crate::tensor::{dims_str, Scalar, Tensor};

/// Interior switches of the transformer blocks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockOptions {
    /// Pre-normalization before attention and feed-forward sublayers.
    pub norm: bool,
    /// Feed-forward sublayer in the many-to-many block.
    pub ffn: bool,
    /// Feed-forward sublayer in the angular block.
    pub angular_ffn: bool,
    /// Learned `D -> D` projection after attention.
    pub out_proj: bool,
    pub ffn_ratio: usize,
}

impl Default for BlockOptions {
    fn default() -> Self {
        BlockOptions { norm: true, ffn: true, angular_ffn: false, out_proj: true, ffn_ratio: 2 }
    }
}

impl BlockOptions {
    /// Attention only: no norms, feed-forwards or output projections.
    pub fn bare() -> Self {
        BlockOptions { norm: false, ffn: false, angular_ffn: false, out_proj: false, ffn_ratio: 2 }
    }
}

fn check_features(d: [usize; 4], views: usize, channels: usize, op: &'static str) -> Result<()> {
    if d[0] != views || d[3] != channels {
        return Err(Error::shape(
            op,
            format!("features {} vs block views={views} channels={channels}", dims_str(&d)),
        ));
    }
    Ok(())
}

/// Positional convolutions, correlation encoder/decoder and spatial attention.
#[derive(Clone, Debug, PartialEq)]
pub struct M2mtBlock<T = f64> {
    pub views: usize,
    pub channels: usize,
    pub c_cor: usize,
    /// Two 3×3 convs on each view's `C` channels, added to the input.
    pub pos_conv: [Conv2dParams<T>; 2],
    /// `U·V·C -> C_Cor`.
    pub encode: LinearParams<T>,
    /// Q/K/V of width `D = C_Cor`.
    pub attn: SelfAttention<T>,
    pub ffn: Option<FeedForward<T>>,
    /// `C_Cor -> U·V·C`.
    pub decode: LinearParams<T>,
}

impl<T: Scalar> M2mtBlock<T> {
    pub fn new(init: &mut Initializer, views: usize, channels: usize, c_cor: usize, opts: &BlockOptions) -> Self {
        let merged = views * channels;
        M2mtBlock {
            views,
            channels,
            c_cor,
            pos_conv: [init.conv(channels, channels, 3), init.conv(channels, channels, 3)],
            encode: init.linear(merged, c_cor),
            attn: SelfAttention::new(init, c_cor, opts.norm, opts.out_proj),
            ffn: opts.ffn.then(|| FeedForward::new(init, c_cor, opts.ffn_ratio, opts.norm)),
            decode: init.linear(c_cor, merged),
        }
    }

    fn positional<B: Backend<T>>(&self, be: &B, prefix: &str, x: &B::Value) -> Result<B::Value> {
        let p = self.pos_conv[0].forward(be, &join(prefix, "pos_conv.0"), x)?;
        let p = be.leaky_relu(&p, T::of(LEAKY_SLOPE));
        let p = self.pos_conv[1].forward(be, &join(prefix, "pos_conv.1"), &p)?;
        be.add(x, &p)
    }

    /// `(N, W, H, C)` features to `(1, W·H, N·C)` merged tokens.
    pub(crate) fn merge<B: Backend<T>>(be: &B, x: &B::Value) -> Result<B::Value> {
        let [n, w, h, c] = dims4(&be.dims(x), "merge")?;
        let m = be.reshape(x, &[n, w * h, c])?;
        let m = be.permute(&m, &[1, 0, 2])?;
        be.reshape(&m, &[1, w * h, n * c])
    }

    pub(crate) fn unmerge<B: Backend<T>>(be: &B, m: &B::Value, n: usize, w: usize, h: usize, c: usize) -> Result<B::Value> {
        let t = be.reshape(m, &[w * h, n, c])?;
        let t = be.permute(&t, &[1, 0, 2])?;
        be.reshape(&t, &[n, w, h, c])
    }

    /// Correlation tokens after attention and feed-forward, `(1, W·H, C_Cor)`.
    pub(crate) fn correlate<B: Backend<T>>(&self, be: &B, prefix: &str, cor: &B::Value) -> Result<B::Value> {
        let cor = self.attn.forward(be, &join(prefix, "attn"), cor, None)?;
        match &self.ffn {
            Some(f) => f.forward(be, &join(prefix, "ffn"), &cor),
            None => Ok(cor),
        }
    }

    pub fn forward<B: Backend<T>>(&self, be: &B, prefix: &str, x: &B::Value) -> Result<B::Value> {
        let [n, w, h, c] = dims4(&be.dims(x), "m2mt")?;
        check_features([n, w, h, c], self.views, self.channels, "m2mt")?;
        let xp = self.positional(be, prefix, x)?;
        let merged = Self::merge(be, &xp)?;
        let cor = self.encode.forward(be, &join(prefix, "encode"), &merged)?;
        let cor = self.correlate(be, prefix, &cor)?;
        let out = self.decode.forward(be, &join(prefix, "decode"), &cor)?;
        let out = Self::unmerge(be, &out, n, w, h, c)?;
        be.add(&xp, &out)
    }
}

impl<T: Scalar> Module<T> for M2mtBlock<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor<T>)) {
        self.pos_conv[0].visit(&join(prefix, "pos_conv.0"), f);
        self.pos_conv[1].visit(&join(prefix, "pos_conv.1"), f);
        self.encode.visit(&join(prefix, "encode"), f);
        self.attn.visit(&join(prefix, "attn"), f);
        if let Some(ffn) = &self.ffn {
            ffn.visit(&join(prefix, "ffn"), f);
        }
        self.decode.visit(&join(prefix, "decode"), f);
    }
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor<T>)) {
        self.pos_conv[0].visit_mut(&join(prefix, "pos_conv.0"), f);
        self.pos_conv[1].visit_mut(&join(prefix, "pos_conv.1"), f);
        self.encode.visit_mut(&join(prefix, "encode"), f);
        self.attn.visit_mut(&join(prefix, "attn"), f);
        if let Some(ffn) = &mut self.ffn {
            ffn.visit_mut(&join(prefix, "ffn"), f);
        }
        self.decode.visit_mut(&join(prefix, "decode"), f);
    }
}

/// Per-pixel attention across the `U·V` views, `D = C`.
#[derive(Clone, Debug, PartialEq)]
pub struct AngularBlock<T = f64> {
    pub views: usize,
    pub channels: usize,
    /// Learned additive embedding `(U·V, C)` on the attention input.
    pub pos_embed: Tensor<T>,
    pub attn: SelfAttention<T>,
    pub ffn: Option<FeedForward<T>>,
}

impl<T: Scalar> AngularBlock<T> {
    pub fn new(init: &mut Initializer, views: usize, channels: usize, opts: &BlockOptions) -> Self {
        AngularBlock {
            views,
            channels,
            pos_embed: init.glorot(&[views, channels], views, channels),
            attn: SelfAttention::new(init, channels, opts.norm, opts.out_proj),
            ffn: opts.angular_ffn.then(|| FeedForward::new(init, channels, opts.ffn_ratio, opts.norm)),
        }
    }

    pub fn forward<B: Backend<T>>(&self, be: &B, prefix: &str, x: &B::Value) -> Result<B::Value> {
        let [n, w, h, c] = dims4(&be.dims(x), "angular")?;
        check_features([n, w, h, c], self.views, self.channels, "angular")?;
        // (W·H, N, C): one token sequence per pixel
        let t = be.reshape(x, &[n, w * h, c])?;
        let t = be.permute(&t, &[1, 0, 2])?;
        let pos = be.param(&join(prefix, "pos_embed"), &self.pos_embed);
        let t = self.attn.forward(be, &join(prefix, "attn"), &t, Some(&pos))?;
        let t = match &self.ffn {
            Some(f) => f.forward(be, &join(prefix, "ffn"), &t)?,
            None => t,
        };
        let t = be.permute(&t, &[1, 0, 2])?;
        be.reshape(&t, &[n, w, h, c])
    }
}

impl<T: Scalar> Module<T> for AngularBlock<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor<T>)) {
        f(&join(prefix, "pos_embed"), &self.pos_embed);
        self.attn.visit(&join(prefix, "attn"), f);
        if let Some(ffn) = &self.ffn {
            ffn.visit(&join(prefix, "ffn"), f);
        }
    }
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor<T>)) {
        f(&join(prefix, "pos_embed"), &mut self.pos_embed);
        self.attn.visit_mut(&join(prefix, "attn"), f);
        if let Some(ffn) = &mut self.ffn {
            ffn.visit_mut(&join(prefix, "ffn"), f);
        }
    }
}

/// Many-to-many block followed by the angular block, with an outer skip.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationBlock<T = f64> {
    pub m2mt: M2mtBlock<T>,
    pub angular: AngularBlock<T>,
}

impl<T: Scalar> CorrelationBlock<T> {
    pub fn new(init: &mut Initializer, views: usize, channels: usize, c_cor: usize, opts: &BlockOptions) -> Self {
        CorrelationBlock {
            m2mt: M2mtBlock::new(init, views, channels, c_cor, opts),
            angular: AngularBlock::new(init, views, channels, opts),
        }
    }

    pub fn forward<B: Backend<T>>(&self, be: &B, prefix: &str, x: &B::Value) -> Result<B::Value> {
        let y = self.m2mt.forward(be, &join(prefix, "m2mt"), x)?;
        let y = self.angular.forward(be, &join(prefix, "angular"), &y)?;
        be.add(&y, x)
    }
}

impl<T: Scalar> Module<T> for CorrelationBlock<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor<T>)) {
        self.m2mt.visit(&join(prefix, "m2mt"), f);
        self.angular.visit(&join(prefix, "angular"), f);
    }
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor<T>)) {
        self.m2mt.visit_mut(&join(prefix, "m2mt"), f);
        self.angular.visit_mut(&join(prefix, "angular"), f);
    }
}

/// Vanilla per-view spatial transformer: tokens are the `W·H` pixels of one
/// view, `D = C`. No operation reads across views.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialBlock<T = f64> {
    pub channels: usize,
    pub pos_conv: [Conv2dParams<T>; 2],
    pub attn: SelfAttention<T>,
    pub ffn: Option<FeedForward<T>>,
}

impl<T: Scalar> SpatialBlock<T> {
    pub fn new(init: &mut Initializer, channels: usize, opts: &BlockOptions) -> Self {
        SpatialBlock {
            channels,
            pos_conv: [init.conv(channels, channels, 3), init.conv(channels, channels, 3)],
            attn: SelfAttention::new(init, channels, opts.norm, opts.out_proj),
            ffn: opts.ffn.then(|| FeedForward::new(init, channels, opts.ffn_ratio, opts.norm)),
        }
    }

    pub fn forward<B: Backend<T>>(&self, be: &B, prefix: &str, x: &B::Value) -> Result<B::Value> {
        let [n, w, h, c] = dims4(&be.dims(x), "spatial")?;
        if c != self.channels {
            return Err(Error::shape("spatial", format!("channels {c} != {}", self.channels)));
        }
        let p = self.pos_conv[0].forward(be, &join(prefix, "pos_conv.0"), x)?;
        let p = be.leaky_relu(&p, T::of(LEAKY_SLOPE));
        let p = self.pos_conv[1].forward(be, &join(prefix, "pos_conv.1"), &p)?;
        let xp = be.add(x, &p)?;
        let t = be.reshape(&xp, &[n, w * h, c])?;
        let t = self.attn.forward(be, &join(prefix, "attn"), &t, None)?;
        let t = match &self.ffn {
            Some(f) => f.forward(be, &join(prefix, "ffn"), &t)?,
            None => t,
        };
        let y = be.reshape(&t, &[n, w, h, c])?;
        be.add(&y, x)
    }
}

impl<T: Scalar> Module<T> for SpatialBlock<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor<T>)) {
        self.pos_conv[0].visit(&join(prefix, "pos_conv.0"), f);
        self.pos_conv[1].visit(&join(prefix, "pos_conv.1"), f);
        self.attn.visit(&join(prefix, "attn"), f);
        if let Some(ffn) = &self.ffn {
            ffn.visit(&join(prefix, "ffn"), f);
        }
    }
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor<T>)) {
        self.pos_conv[0].visit_mut(&join(prefix, "pos_conv.0"), f);
        self.pos_conv[1].visit_mut(&join(prefix, "pos_conv.1"), f);
        self.attn.visit_mut(&join(prefix, "attn"), f);
        if let Some(ffn) = &mut self.ffn {
            ffn.visit_mut(&join(prefix, "ffn"), f);
        }
    }
}

// Light-field level entry points.

fn lf_features<T: Scalar>(lf: &LfTensor<T>) -> Tensor<T> {
    let d = lf.dims();
    lf.tensor().clone().reshape(&[d.views(), d.w, d.h, d.c]).expect("same element count")
}

fn features_lf<T: Scalar>(t: Tensor<T>, d: LfDims) -> Result<LfTensor<T>> {
    LfTensor::from_tensor(t.reshape(&d.as_array())?)
}

fn check_lf<T: Scalar>(lf: &LfTensor<T>, views: usize, channels: usize, op: &'static str) -> Result<()> {
    let d = lf.dims();
    if d.views() != views || d.c != channels {
        return Err(Error::shape(op, format!("light field U·V={} C={} vs block {views}/{channels}", d.views(), d.c)));
    }
    Ok(())
}

/// Merged light field through the encoder: `(W·H, C_Cor)`.
pub fn correlation_encode<T: Scalar>(lf: &LfTensor<T>, b: &M2mtBlock<T>) -> Result<Tensor<T>> {
    check_lf(lf, b.views, b.channels, "correlation_encode")?;
    let d = lf.dims();
    let cor = b.encode.apply(&lf.to_merged())?;
    cor.reshape(&[d.pixels(), b.c_cor])
}

/// Attention (plus residual and feed-forward per the block's options) over
/// the `W·H` correlation tokens.
pub fn spatial_self_attention<T: Scalar>(i_cor: &Tensor<T>, b: &M2mtBlock<T>) -> Result<Tensor<T>> {
    let [l, d] = match *i_cor.dims() {
        [l, d] => [l, d],
        _ => return Err(Error::shape("spatial_self_attention", format!("expected (W·H, C_Cor), got {}", dims_str(i_cor.dims())))),
    };
    if d != b.c_cor {
        return Err(Error::shape("spatial_self_attention", format!("token width {d} != C_Cor {}", b.c_cor)));
    }
    let x = i_cor.clone().reshape(&[1, l, d])?;
    b.correlate(&Eager, "", &x)?.reshape(&[l, d])
}

/// Decoder back to a light field of the given extents.
pub fn correlation_decode<T: Scalar>(i_cor_hat: &Tensor<T>, b: &M2mtBlock<T>, dims: LfDims) -> Result<LfTensor<T>> {
    if i_cor_hat.dims() != [dims.pixels(), b.c_cor] || dims.views() != b.views || dims.c != b.channels {
        return Err(Error::shape(
            "correlation_decode",
            format!("tokens {} for light field {:?}", dims_str(i_cor_hat.dims()), dims.as_array()),
        ));
    }
    let out = b.decode.apply(i_cor_hat)?.reshape(&[1, dims.pixels(), dims.views() * dims.c])?;
    LfTensor::from_merged(&out, dims.u, dims.v, dims.c, dims.w, dims.h)
}

pub fn m2mt_forward<T: Scalar>(lf: &LfTensor<T>, b: &M2mtBlock<T>) -> Result<LfTensor<T>> {
    check_lf(lf, b.views, b.channels, "m2mt_forward")?;
    features_lf(b.forward(&Eager, "", &lf_features(lf))?, lf.dims())
}

pub fn angular_forward<T: Scalar>(lf: &LfTensor<T>, b: &AngularBlock<T>) -> Result<LfTensor<T>> {
    check_lf(lf, b.views, b.channels, "angular_forward")?;
    features_lf(b.forward(&Eager, "", &lf_features(lf))?, lf.dims())
}

pub fn correlation_block_forward<T: Scalar>(lf: &LfTensor<T>, cb: &CorrelationBlock<T>) -> Result<LfTensor<T>> {
    check_lf(lf, cb.m2mt.views, cb.m2mt.channels, "correlation_block_forward")?;
    features_lf(cb.forward(&Eager, "", &lf_features(lf))?, lf.dims())
}
