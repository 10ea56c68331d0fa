//! `LFT1` binary tensors.
//!
//! ```text
//! 0..4   b"LFT1"
//! 4      dtype (0 = f32, 1 = f64)
//! 5      ndim
//! 6..8   zero
//! 8..    ndim × u64 LE dims, then the LE row-major payload
//! ```

use std::path::Path;

use crate::error::{Error, Result};
use crate::lightfield::LfTensor;
use crate::tensor::{Scalar, Tensor};

use super::{read_bytes, write_bytes};

const MAGIC: &[u8; 4] = b"LFT1";

pub fn encode_tensor<T: Scalar>(t: &Tensor<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 8 * t.ndim() + T::BYTES * t.len());
    out.extend_from_slice(MAGIC);
    out.push(T::DTYPE);
    out.push(t.ndim() as u8);
    out.extend_from_slice(&[0, 0]);
    for &d in t.dims() {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for &x in t.data() {
        x.write_le(&mut out);
    }
    out
}

fn bad(detail: impl Into<String>) -> Error {
    Error::format("LFT1", detail)
}

/// Decodes either dtype, converting to `T`.
pub fn decode_tensor<T: Scalar>(bytes: &[u8]) -> Result<Tensor<T>> {
    if bytes.len() < 8 || &bytes[..4] != MAGIC {
        return Err(bad("missing LFT1 magic"));
    }
    let (dtype, ndim) = (bytes[4], bytes[5] as usize);
    if bytes[6] != 0 || bytes[7] != 0 {
        return Err(bad("reserved header bytes are not zero"));
    }
    let header = 8 + 8 * ndim;
    if bytes.len() < header {
        return Err(bad(format!("truncated header for {ndim} dims")));
    }
    let dims: Vec<usize> = bytes[8..header]
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()) as usize)
        .collect();
    let n = dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or_else(|| bad("dims overflow"))?;
    let payload = &bytes[header..];
    let data = match dtype {
        0 => read_payload::<f32, T>(payload, n)?,
        1 => read_payload::<f64, T>(payload, n)?,
        d => return Err(bad(format!("unknown dtype {d}"))),
    };
    Tensor::new(dims, data)
}

fn read_payload<S: Scalar, T: Scalar>(payload: &[u8], n: usize) -> Result<Vec<T>> {
    if payload.len() != n * S::BYTES {
        return Err(bad(format!("payload is {} bytes, expected {} {}s", payload.len(), n, S::NAME)));
    }
    Ok(payload.chunks_exact(S::BYTES).map(|c| T::of(S::read_le(c).to_f64())).collect())
}

pub fn save_tensor<T: Scalar>(t: &Tensor<T>, path: &Path) -> Result<()> {
    write_bytes(path, &encode_tensor(t))
}

pub fn load_tensor<T: Scalar>(path: &Path) -> Result<Tensor<T>> {
    decode_tensor(&read_bytes(path)?).map_err(|e| with_path(e, path))
}

/// A light field stored as a 5-D tensor.
pub fn load_lf_tensor<T: Scalar>(path: &Path) -> Result<LfTensor<T>> {
    let t = load_tensor(path)?;
    if t.ndim() != 5 {
        return Err(bad(format!("{}: light-field tensors have 5 dims, found {}", path.display(), t.ndim())));
    }
    LfTensor::from_tensor(t)
}

fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Format { kind, detail } => Error::Format { kind, detail: format!("{}: {detail}", path.display()) },
        e => e,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_both_dtypes() {
        let t = Tensor::<f64>::from_fn(&[2, 3, 1], |i| i as f64 * 0.1 - 0.25);
        assert_eq!(decode_tensor::<f64>(&encode_tensor(&t)).unwrap(), t);
        let f = t.cast::<f32>();
        assert_eq!(decode_tensor::<f32>(&encode_tensor(&f)).unwrap(), f);
    }

    #[test]
    fn header_layout() {
        let t = Tensor::<f32>::zeros(&[2, 5]);
        let b = encode_tensor(&t);
        assert_eq!(&b[..8], b"LFT1\x00\x02\x00\x00");
        assert_eq!(&b[8..16], &2u64.to_le_bytes());
        assert_eq!(b.len(), 8 + 16 + 40);
    }

    #[test]
    fn malformed_rejected() {
        let t = Tensor::<f64>::zeros(&[3]);
        let mut b = encode_tensor(&t);
        assert!(decode_tensor::<f64>(&b[..b.len() - 1]).is_err());
        b[4] = 7;
        assert!(decode_tensor::<f64>(&b).is_err());
        assert!(decode_tensor::<f64>(b"LFT2\x01\x00\x00\x00").is_err());
    }
}
