//! Recovering a [`NetConfig`] from parameter names and shapes.

use crate::error::{Error, Result};
use crate::m2mt::BlockOptions;

use super::NetConfig;

/// Hyperparameters readable from a registry. The angular grid is known only
/// as `views = U·V` (many-to-many) or not at all (one-to-one).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InferredConfig {
    pub many_to_many: bool,
    pub views: Option<usize>,
    pub c: usize,
    pub c_cor: usize,
    pub n1: usize,
    pub n2: usize,
    pub scale: usize,
    pub opts: BlockOptions,
}

impl InferredConfig {
    /// Completes the config with an angular grid.
    pub fn resolve(&self, u: usize, v: usize) -> Result<NetConfig> {
        if let Some(n) = self.views {
            if n != u * v {
                return Err(Error::Invalid(format!("weights expect {n} views, light field has {u}x{v}")));
            }
        }
        let cfg = NetConfig {
            u,
            v,
            c: self.c,
            c_cor: self.c_cor,
            n1: self.n1,
            n2: self.n2,
            scale: self.scale,
            opts: self.opts,
            seed: 0,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn infer_config(entries: &[(String, Vec<usize>)]) -> Result<InferredConfig> {
    let get = |name: &str| entries.iter().find(|(n, _)| n == name).map(|(_, d)| d.as_slice());
    let need = |name: &str| get(name).ok_or_else(|| Error::Invalid(format!("registry lacks {name}")));
    let count = |prefix: &str| {
        (0..)
            .take_while(|i| entries.iter().any(|(n, _)| n.starts_with(&format!("{prefix}.{i}."))))
            .count()
    };

    let c = need("head.0.weight")?[0];
    let expand = need("tail.expand.weight")?[0];
    let scale = match expand.checked_div(c) {
        Some(4) => 2,
        Some(16) => 4,
        _ => return Err(Error::Invalid(format!("tail expansion {expand} is not 4·C or 16·C for C={c}"))),
    };
    let n1 = count("head");
    let n2 = count("blocks");
    let many_to_many = get("blocks.0.m2mt.encode.weight").is_some();
    let (body, views, c_cor) = if many_to_many {
        let enc = need("blocks.0.m2mt.encode.weight")?;
        (String::from("blocks.0.m2mt"), Some(enc[0] / c), enc[1])
    } else {
        (String::from("blocks.0"), None, c)
    };
    let fc1 = get(&format!("{body}.ffn.fc1.weight"));
    let angular_fc1 = get("blocks.0.angular.ffn.fc1.weight");
    let opts = BlockOptions {
        norm: get(&format!("{body}.attn.norm.gain")).is_some(),
        ffn: fc1.is_some(),
        angular_ffn: angular_fc1.is_some(),
        out_proj: get(&format!("{body}.attn.out_proj.weight")).is_some(),
        ffn_ratio: fc1.or(angular_fc1).map_or(2, |d| d[1] / d[0]),
    };
    Ok(InferredConfig { many_to_many, views, c, c_cor, n1, n2, scale, opts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Network, O2OBaseline};

    fn shapes(params: Vec<(String, crate::Tensor)>) -> Vec<(String, Vec<usize>)> {
        params.into_iter().map(|(n, t)| (n, t.dims().to_vec())).collect()
    }

    #[test]
    fn recovers_network_config() {
        let mut cfg = NetConfig { u: 2, v: 3, c: 4, c_cor: 6, n1: 3, n2: 2, scale: 4, ..NetConfig::default() };
        cfg.opts.angular_ffn = true;
        cfg.opts.out_proj = false;
        let inf = infer_config(&shapes(Network::<f64>::zeros(&cfg).unwrap().params())).unwrap();
        assert!(inf.many_to_many);
        assert_eq!(inf.resolve(2, 3).unwrap(), cfg);
        assert!(inf.resolve(3, 3).is_err());
    }

    #[test]
    fn recovers_baseline_config() {
        let mut cfg = NetConfig { u: 2, v: 2, c: 5, c_cor: 5, n1: 1, n2: 3, scale: 2, ..NetConfig::default() };
        cfg.opts.norm = false;
        let inf = infer_config(&shapes(O2OBaseline::<f64>::zeros(&cfg).unwrap().params())).unwrap();
        assert!(!inf.many_to_many);
        assert_eq!(inf.resolve(2, 2).unwrap(), cfg);
    }

    #[test]
    fn incomplete_registry_rejected() {
        assert!(infer_config(&[("tail.expand.weight".into(), vec![16, 4, 1, 1])]).is_err());
    }
}
