//! `M2MW1` weight containers.
//!
//! `b"M2MW1"`, a u32 LE manifest length, UTF-8 manifest lines
//! `name\tdtype\tdim,dim,...\toffset`, then the packed LE payloads. Offsets
//! count from the start of the payload section.

use std::path::Path;

use crate::error::{Error, Result};
use crate::network::{infer_config, AnyNet};
use crate::tensor::{Scalar, Tensor};

use super::{read_bytes, write_bytes};

const MAGIC: &[u8; 5] = b"M2MW1";

fn bad(detail: impl Into<String>) -> Error {
    Error::format("M2MW1", detail)
}

pub fn encode_weights<T: Scalar>(named: &[(String, Tensor<T>)]) -> Vec<u8> {
    let mut manifest = String::new();
    let mut offset = 0;
    for (name, t) in named {
        let dims: Vec<String> = t.dims().iter().map(|d| d.to_string()).collect();
        manifest += &format!("{name}\t{}\t{}\t{offset}\n", T::NAME, dims.join(","));
        offset += t.len() * T::BYTES;
    }
    let mut out = Vec::with_capacity(9 + manifest.len() + offset);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(manifest.len() as u32).to_le_bytes());
    out.extend_from_slice(manifest.as_bytes());
    for (_, t) in named {
        for &x in t.data() {
            x.write_le(&mut out);
        }
    }
    out
}

/// Decodes entries of either dtype, converting to `T`.
pub fn decode_weights<T: Scalar>(bytes: &[u8]) -> Result<Vec<(String, Tensor<T>)>> {
    if bytes.len() < 9 || &bytes[..5] != MAGIC {
        return Err(bad("missing M2MW1 magic"));
    }
    let mlen = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let manifest = bytes.get(9..9 + mlen).ok_or_else(|| bad("truncated manifest"))?;
    let manifest = std::str::from_utf8(manifest).map_err(|_| bad("manifest is not UTF-8"))?;
    let payload = &bytes[9 + mlen..];
    let mut out = Vec::new();
    for (i, line) in manifest.lines().enumerate() {
        let fields: Vec<&str> = line.split('\t').collect();
        let [name, dtype, dims, offset] = fields[..] else {
            return Err(bad(format!("manifest line {}: expected 4 tab-separated fields", i + 1)));
        };
        let dims: Vec<usize> = if dims.is_empty() {
            Vec::new()
        } else {
            dims.split(',')
                .map(|d| d.parse().map_err(|_| bad(format!("manifest line {}: bad dim {d:?}", i + 1))))
                .collect::<Result<_>>()?
        };
        let offset: usize = offset.parse().map_err(|_| bad(format!("manifest line {}: bad offset", i + 1)))?;
        let n: usize = dims.iter().product();
        let data = match dtype {
            "f32" => slice::<f32, T>(payload, offset, n, name)?,
            "f64" => slice::<f64, T>(payload, offset, n, name)?,
            d => return Err(bad(format!("{name}: unknown dtype {d:?}"))),
        };
        out.push((name.to_string(), Tensor::new(dims, data)?));
    }
    Ok(out)
}

fn slice<S: Scalar, T: Scalar>(payload: &[u8], offset: usize, n: usize, name: &str) -> Result<Vec<T>> {
    let bytes = payload
        .get(offset..offset + n * S::BYTES)
        .ok_or_else(|| bad(format!("{name}: payload range out of bounds")))?;
    Ok(bytes.chunks_exact(S::BYTES).map(|c| T::of(S::read_le(c).to_f64())).collect())
}

pub fn save_weights<T: Scalar>(named: &[(String, Tensor<T>)], path: &Path) -> Result<()> {
    write_bytes(path, &encode_weights(named))
}

pub fn load_weights<T: Scalar>(path: &Path) -> Result<Vec<(String, Tensor<T>)>> {
    decode_weights(&read_bytes(path)?).map_err(|e| match e {
        Error::Format { kind, detail } => Error::Format { kind, detail: format!("{}: {detail}", path.display()) },
        e => e,
    })
}

/// Loads a network whose hyperparameters are read off the registry; the
/// angular grid comes from the caller.
pub fn load_net<T: Scalar>(path: &Path, u: usize, v: usize) -> Result<AnyNet<T>> {
    let named = load_weights::<T>(path)?;
    let shapes: Vec<(String, Vec<usize>)> = named.iter().map(|(n, t)| (n.clone(), t.dims().to_vec())).collect();
    AnyNet::from_params(&infer_config(&shapes)?, u, v, &named)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{NetConfig, Network};

    #[test]
    fn round_trip_registry() {
        let cfg = NetConfig { u: 2, v: 2, c: 3, c_cor: 4, n1: 1, n2: 1, scale: 2, ..NetConfig::default() };
        let net = Network::<f32>::build(&cfg).unwrap();
        let bytes = encode_weights(&net.params());
        assert_eq!(decode_weights::<f32>(&bytes).unwrap(), net.params());
        let shapes: Vec<_> = net.params().iter().map(|(n, t)| (n.clone(), t.dims().to_vec())).collect();
        let inf = infer_config(&shapes).unwrap();
        let named = decode_weights::<f32>(&bytes).unwrap();
        assert_eq!(AnyNet::from_params(&inf, 2, 2, &named).unwrap(), AnyNet::ManyToMany(net));
    }

    #[test]
    fn manifest_format() {
        let named = vec![("a.weight".to_string(), Tensor::<f64>::zeros(&[2, 3])), ("a.bias".into(), Tensor::zeros(&[3]))];
        let b = encode_weights(&named);
        let mlen = u32::from_le_bytes(b[5..9].try_into().unwrap()) as usize;
        let text = std::str::from_utf8(&b[9..9 + mlen]).unwrap();
        assert_eq!(text, "a.weight\tf64\t2,3\t0\na.bias\tf64\t3\t48\n");
    }

    #[test]
    fn corrupt_files_rejected() {
        let named = vec![("w".to_string(), Tensor::<f64>::zeros(&[4]))];
        let b = encode_weights(&named);
        assert!(decode_weights::<f64>(&b[..b.len() - 3]).is_err());
        assert!(decode_weights::<f64>(b"M2MW0\x00\x00\x00\x00").is_err());
        let mut c = b.clone();
        c[11] = b'\t';
        assert!(decode_weights::<f64>(&c).is_err());
    }
}
