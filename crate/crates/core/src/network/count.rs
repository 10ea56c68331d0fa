//! Parameter and FLOP accounting.

use std::fmt;

use crate::layers::Module;
use crate::tensor::Scalar;

use super::{Kind, Net, NetConfig};

/// Parameter counts grouped by layer (name minus its final component).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamReport {
    pub rows: Vec<(String, usize)>,
    pub total: usize,
    /// Everything outside `blocks.*`.
    pub head_tail: usize,
    pub per_block: Vec<usize>,
}

pub fn count_params<T: Scalar, K: Kind>(net: &Net<T, K>) -> ParamReport {
    let mut rows: Vec<(String, usize)> = Vec::new();
    let mut per_block = vec![0; net.blocks.len()];
    let mut head_tail = 0;
    net.visit("", &mut |name, t| {
        let layer = name.rsplit_once('.').map_or(name, |(l, _)| l);
        match rows.last_mut() {
            Some((l, n)) if l == layer => *n += t.len(),
            _ => rows.push((layer.to_string(), t.len())),
        }
        match block_index(name) {
            Some(i) => per_block[i] += t.len(),
            None => head_tail += t.len(),
        }
    });
    let total = rows.iter().map(|r| r.1).sum();
    ParamReport { rows, total, head_tail, per_block }
}

fn block_index(name: &str) -> Option<usize> {
    name.strip_prefix("blocks.")?.split('.').next()?.parse().ok()
}

impl fmt::Display for ParamReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.rows.iter().map(|r| r.0.len()).max().unwrap_or(5).max(5);
        writeln!(f, "{:<width$}  {:>10}", "layer", "params")?;
        for (name, n) in &self.rows {
            writeln!(f, "{name:<width$}  {n:>10}")?;
        }
        writeln!(f, "{:<width$}  {:>10}", "head+tail", self.head_tail)?;
        if let Some(b) = self.per_block.first() {
            writeln!(f, "{:<width$}  {:>10}", "per block", b)?;
        }
        write!(f, "{:<width$}  {:>10}", "total", self.total)
    }
}

/// How a multiply-add is counted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FlopConvention {
    /// One multiply-add is two FLOPs.
    #[default]
    TwoPerMac,
    /// One multiply-add is one operation.
    Mac,
}

impl FlopConvention {
    fn factor(self) -> u64 {
        match self {
            FlopConvention::TwoPerMac => 2,
            FlopConvention::Mac => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlopKind {
    Conv,
    Linear,
    /// Score and value products plus softmax.
    Attention,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlopRow {
    pub name: String,
    pub kind: FlopKind,
    pub flops: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlopReport {
    pub rows: Vec<FlopRow>,
    pub total: u64,
    pub head_tail: u64,
    pub per_block: u64,
}

impl FlopReport {
    pub fn total_of(&self, kind: FlopKind) -> u64 {
        self.rows.iter().filter(|r| r.kind == kind).map(|r| r.flops).sum()
    }
}

impl fmt::Display for FlopReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(5).max(9);
        writeln!(f, "{:<width$}  {:>16}", "layer", "flops")?;
        for r in &self.rows {
            writeln!(f, "{:<width$}  {:>16}", r.name, r.flops)?;
        }
        writeln!(f, "{:<width$}  {:>16}", "head+tail", self.head_tail)?;
        writeln!(f, "{:<width$}  {:>16}", "per block", self.per_block)?;
        write!(f, "{:<width$}  {:>16}", "total", self.total)
    }
}

struct Counter {
    rows: Vec<FlopRow>,
    k: u64,
}

impl Counter {
    fn push(&mut self, name: String, kind: FlopKind, flops: u64) {
        self.rows.push(FlopRow { name, kind, flops });
    }

    /// Per view: `Cout·Cin·kh·kw` multiply-adds at each of `pixels` sites.
    fn conv(&mut self, name: String, cout: usize, cin: usize, k: usize, pixels: usize, views: usize) {
        let macs = (cout * cin * k * k * pixels * views) as u64;
        self.push(name, FlopKind::Conv, self.k * macs);
    }

    fn linear(&mut self, name: String, din: usize, dout: usize, tokens: usize) {
        self.push(name, FlopKind::Linear, self.k * (din * dout * tokens) as u64);
    }

    /// `batch` independent sequences of `t` tokens, width `d`.
    fn attention(&mut self, name: String, batch: usize, t: usize, d: usize) {
        let (b, t, d) = (batch as u64, t as u64, d as u64);
        self.push(name, FlopKind::Attention, b * (self.k * t * t * d * 2 + 5 * t * t));
    }

    fn sublayers(&mut self, p: &str, cfg: &NetConfig, dim: usize, tokens: usize, batch: usize, seq: usize, ffn: bool) {
        for proj in ["q", "k", "v"] {
            self.linear(format!("{p}.attn.{proj}"), dim, dim, tokens);
        }
        self.attention(format!("{p}.attn.scores"), batch, seq, dim);
        if cfg.opts.out_proj {
            self.linear(format!("{p}.attn.out_proj"), dim, dim, tokens);
        }
        if ffn {
            let hidden = dim * cfg.opts.ffn_ratio;
            self.linear(format!("{p}.ffn.fc1"), dim, hidden, tokens);
            self.linear(format!("{p}.ffn.fc2"), hidden, dim, tokens);
        }
    }
}

/// Analytic operation count for one `w × h` light-field patch. Bias adds,
/// norms, activations and the bicubic residual are not counted.
pub fn count_flops<T: Scalar, K: Kind>(net: &Net<T, K>, w: usize, h: usize, conv: FlopConvention) -> FlopReport {
    flops_for(net.config(), K::MIXES_VIEWS, w, h, conv)
}

pub(crate) fn flops_for(cfg: &NetConfig, mixes_views: bool, w: usize, h: usize, conv: FlopConvention) -> FlopReport {
    let mut c = Counter { rows: Vec::new(), k: conv.factor() };
    let (n, p, ch, r) = (cfg.views(), w * h, cfg.c, cfg.scale);
    for i in 0..cfg.n1 {
        c.conv(format!("head.{i}"), ch, if i == 0 { 1 } else { ch }, 3, p, n);
    }
    let head_rows = c.rows.len();
    for b in 0..cfg.n2 {
        let pre = format!("blocks.{b}");
        if mixes_views {
            let m = format!("{pre}.m2mt");
            for j in 0..2 {
                c.conv(format!("{m}.pos_conv.{j}"), ch, ch, 3, p, n);
            }
            c.linear(format!("{m}.encode"), n * ch, cfg.c_cor, p);
            c.sublayers(&m, cfg, cfg.c_cor, p, 1, p, cfg.opts.ffn);
            c.linear(format!("{m}.decode"), cfg.c_cor, n * ch, p);
            c.sublayers(&format!("{pre}.angular"), cfg, ch, p * n, p, n, cfg.opts.angular_ffn);
        } else {
            for j in 0..2 {
                c.conv(format!("{pre}.pos_conv.{j}"), ch, ch, 3, p, n);
            }
            c.sublayers(&pre, cfg, ch, p * n, n, p, cfg.opts.ffn);
        }
    }
    let block_rows = c.rows.len() - head_rows;
    c.conv("tail.expand".into(), r * r * ch, ch, 1, p, n);
    c.conv("tail.out".into(), 1, ch, 3, p * r * r, n);

    let total = c.rows.iter().map(|r| r.flops).sum();
    let blocks: u64 = c.rows[head_rows..head_rows + block_rows].iter().map(|r| r.flops).sum();
    let per_block = if cfg.n2 > 0 { blocks / cfg.n2 as u64 } else { 0 };
    FlopReport { rows: c.rows, total, head_tail: total - blocks, per_block }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Network, O2OBaseline};

    fn small() -> NetConfig {
        NetConfig { u: 2, v: 2, c: 4, c_cor: 6, n1: 2, n2: 2, scale: 2, ..NetConfig::default() }
    }

    #[test]
    fn params_match_registry_sum() {
        let net = Network::<f64>::zeros(&small()).unwrap();
        let rep = count_params(&net);
        assert_eq!(rep.total, net.num_params());
        assert_eq!(rep.head_tail + rep.per_block.iter().sum::<usize>(), rep.total);
        assert_eq!(rep.per_block[0], rep.per_block[1]);
    }

    #[test]
    fn head_tail_by_hand() {
        let cfg = small();
        let net = O2OBaseline::<f64>::zeros(&cfg).unwrap();
        let c = cfg.c;
        let head = (9 * c + c) + (9 * c * c + c);
        let tail = (4 * c * c + 4 * c) + (9 * c + 1);
        assert_eq!(count_params(&net).head_tail, head + tail);
    }

    #[test]
    fn conv_flops_by_hand() {
        let cfg = NetConfig { n1: 1, ..small() };
        let rep = flops_for(&cfg, true, 3, 5, FlopConvention::TwoPerMac);
        let head = &rep.rows[0];
        assert_eq!(head.flops, (2 * 4 * 9 * 15 * 4) as u64);
        let mac = flops_for(&cfg, true, 3, 5, FlopConvention::Mac);
        assert_eq!(mac.rows[0].flops * 2, head.flops);
    }

    #[test]
    fn patch_doubling_scales_terms() {
        let cfg = small();
        let a = flops_for(&cfg, true, 4, 4, FlopConvention::TwoPerMac);
        let b = flops_for(&cfg, true, 8, 8, FlopConvention::TwoPerMac);
        assert_eq!(b.total_of(FlopKind::Conv), 4 * a.total_of(FlopKind::Conv));
        assert_eq!(b.total_of(FlopKind::Linear), 4 * a.total_of(FlopKind::Linear));
        let quad = |r: &FlopReport| r.rows.iter().find(|x| x.name == "blocks.0.m2mt.attn.scores").unwrap().flops;
        assert_eq!(quad(&b), 16 * quad(&a));
    }

    #[test]
    fn report_renders() {
        let net = Network::<f64>::zeros(&small()).unwrap();
        let text = count_params(&net).to_string();
        assert!(text.contains("head.0"));
        assert!(text.lines().last().unwrap().starts_with("total"));
    }
}
