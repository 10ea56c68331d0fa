//! `key=value` configuration files. Blank lines and `#` comments are
//! ignored; unknown keys are errors.

use std::fmt::Write;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::network::NetConfig;
use crate::training::{LossKind, TrainConfig};

/// `(line number, key, value)` triples.
pub fn parse_kv(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::format("config", format!("line {}: expected key=value", i + 1)))?;
        out.push((i + 1, k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Network and training settings from one file.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunConfig {
    pub net: NetConfig,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { net: NetConfig::default(), train: TrainConfig::default() }
    }
}

fn value<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::format("config", format!("line {line}: bad value {v:?} for {key}")))
}

fn flag(line: usize, key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::format("config", format!("line {line}: bad boolean {v:?} for {key}"))),
    }
}

/// Parses and validates. `n2` defaults by scale (8 at 4×, 9 at 2×) unless
/// given; `seed` sets both the network and training seeds.
pub fn parse_run_config(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let (mut n2, mut d) = (None, None);
    for (line, key, v) in parse_kv(text)? {
        let n = &mut cfg.net;
        let t = &mut cfg.train;
        match key.as_str() {
            "u" => n.u = value(line, &key, &v)?,
            "v" => n.v = value(line, &key, &v)?,
            "c" => n.c = value(line, &key, &v)?,
            "c_cor" => n.c_cor = value(line, &key, &v)?,
            "d" => d = Some((line, value::<usize>(line, &key, &v)?)),
            "n1" => n.n1 = value(line, &key, &v)?,
            "n2" => n2 = Some(value(line, &key, &v)?),
            "scale" => n.scale = value(line, &key, &v)?,
            "norm" => n.opts.norm = flag(line, &key, &v)?,
            "ffn" => n.opts.ffn = flag(line, &key, &v)?,
            "angular_ffn" => n.opts.angular_ffn = flag(line, &key, &v)?,
            "out_proj" => n.opts.out_proj = flag(line, &key, &v)?,
            "ffn_ratio" => n.opts.ffn_ratio = value(line, &key, &v)?,
            "seed" => {
                n.seed = value(line, &key, &v)?;
                t.seed = n.seed;
            }
            "lr" => t.lr = value(line, &key, &v)?,
            "beta1" => t.beta1 = value(line, &key, &v)?,
            "beta2" => t.beta2 = value(line, &key, &v)?,
            "eps" => t.eps = value(line, &key, &v)?,
            "batch" => t.batch = value(line, &key, &v)?,
            "patch" => t.patch = value(line, &key, &v)?,
            "iters" => t.iters = value(line, &key, &v)?,
            "loss" => {
                t.loss = match v.as_str() {
                    "l1" | "L1" => LossKind::L1,
                    "l2" | "L2" => LossKind::L2,
                    _ => return Err(Error::format("config", format!("line {line}: loss must be l1 or l2"))),
                }
            }
            _ => return Err(Error::format("config", format!("line {line}: unknown key {key:?}"))),
        }
    }
    cfg.net.n2 = n2.unwrap_or(if cfg.net.scale == 2 { 9 } else { 8 });
    if let Some((line, d)) = d {
        if d != cfg.net.c_cor {
            return Err(Error::format("config", format!("line {line}: d={d} must equal c_cor={}", cfg.net.c_cor)));
        }
    }
    cfg.net.validate()?;
    cfg.train.validate(cfg.net.scale)?;
    Ok(cfg)
}

impl RunConfig {
    /// Canonical text form; parses back to `self`.
    pub fn to_text(&self) -> String {
        let (n, t) = (&self.net, &self.train);
        let mut s = String::new();
        for (k, v) in [
            ("u", n.u.to_string()),
            ("v", n.v.to_string()),
            ("c", n.c.to_string()),
            ("c_cor", n.c_cor.to_string()),
            ("n1", n.n1.to_string()),
            ("n2", n.n2.to_string()),
            ("scale", n.scale.to_string()),
            ("norm", n.opts.norm.to_string()),
            ("ffn", n.opts.ffn.to_string()),
            ("angular_ffn", n.opts.angular_ffn.to_string()),
            ("out_proj", n.opts.out_proj.to_string()),
            ("ffn_ratio", n.opts.ffn_ratio.to_string()),
            ("seed", n.seed.to_string()),
            ("lr", t.lr.to_string()),
            ("beta1", t.beta1.to_string()),
            ("beta2", t.beta2.to_string()),
            ("eps", t.eps.to_string()),
            ("batch", t.batch.to_string()),
            ("patch", t.patch.to_string()),
            ("iters", t.iters.to_string()),
            ("loss", if t.loss == LossKind::L1 { "l1" } else { "l2" }.to_string()),
        ] {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_is_default() {
        assert_eq!(parse_run_config("").unwrap(), RunConfig::default());
        assert_eq!(parse_run_config("scale=2").unwrap().net.n2, 9);
    }

    #[test]
    fn overrides_and_comments() {
        let c = parse_run_config("# toy\nu=2\nv = 3\nc=8 # narrow\nn2=1\nffn=false\nlr=0.001\nseed=5\n").unwrap();
        assert_eq!((c.net.u, c.net.v, c.net.c, c.net.n2), (2, 3, 8, 1));
        assert!(!c.net.opts.ffn);
        assert_eq!(c.train.lr, 0.001);
        assert_eq!((c.net.seed, c.train.seed), (5, 5));
    }

    #[test]
    fn text_round_trip() {
        let mut c = RunConfig::default();
        c.net.c = 7;
        c.train.loss = LossKind::L2;
        assert_eq!(parse_run_config(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn errors() {
        assert!(parse_run_config("bogus=1").is_err());
        assert!(parse_run_config("c=abc").is_err());
        assert!(parse_run_config("n2=0").is_err());
        assert!(parse_run_config("d=64").is_err());
        assert!(parse_run_config("d=128").is_ok());
        assert!(parse_run_config("scale=4\npatch=30").is_err());
        assert!(parse_run_config("norm=maybe").is_err());
        assert!(parse_run_config("justakey").is_err());
    }
}
