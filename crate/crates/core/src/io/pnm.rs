//! Binary PGM (`P5`) and PPM (`P6`) images, 8 or 16 bits per sample.
//!
//! Raster rows map to the first image axis: a `rows × cols` image is the
//! tensor `(rows, cols)` (a light-field view's `(W, H)`).

use crate::error::{Error, Result};
use crate::metrics::rgb_to_y;
use crate::tensor::Tensor;

/// Decoded image with raw samples, row-major, channel-interleaved.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pnm {
    pub rows: usize,
    pub cols: usize,
    pub maxval: u16,
    /// 1 for PGM, 3 for PPM.
    pub channels: usize,
    pub samples: Vec<u16>,
}

fn bad(detail: impl Into<String>) -> Error {
    Error::format("PNM", detail)
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad(format!("bad {what} in header")))
    }
}

pub fn decode_pnm(bytes: &[u8]) -> Result<Pnm> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err(bad("not a binary PGM (P5) or PPM (P6)")),
    };
    let mut h = Header { bytes, pos: 2 };
    let cols = h.number("width")?;
    let rows = h.number("height")?;
    let maxval = h.number("maxval")?;
    if cols == 0 || rows == 0 {
        return Err(bad("zero image extent"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(bad(format!("maxval {maxval} outside 1..=65535")));
    }
    if !bytes.get(h.pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(bad("missing whitespace after maxval"));
    }
    let raster = &bytes[h.pos + 1..];
    let n = rows * cols * channels;
    let wide = maxval > 255;
    let need = if wide { 2 * n } else { n };
    if raster.len() != need {
        return Err(bad(format!("raster is {} bytes, expected {need}", raster.len())));
    }
    let samples: Vec<u16> = if wide {
        raster.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
    } else {
        raster.iter().map(|&b| b as u16).collect()
    };
    if let Some(i) = samples.iter().position(|&s| s as usize > maxval) {
        return Err(bad(format!("sample {i} exceeds maxval {maxval}")));
    }
    Ok(Pnm { rows, cols, maxval: maxval as u16, channels, samples })
}

impl Pnm {
    /// Samples divided by `maxval`; PPM input is reduced to BT.601 luma.
    pub fn to_plane(&self) -> Result<Tensor<f64>> {
        let m = self.maxval as f64;
        let dims = [self.rows, self.cols];
        if self.channels == 1 {
            return Ok(Tensor::from_fn(&dims, |i| self.samples[i] as f64 / m));
        }
        let plane = |c: usize| Tensor::from_fn(&dims, |i| self.samples[3 * i + c] as f64 / m);
        rgb_to_y(&plane(0), &plane(1), &plane(2))
    }
}

/// Quantizes a `(rows, cols)` plane in `[0, 1]` (clamped) to `maxval` levels.
pub fn encode_pgm(plane: &Tensor<f64>, maxval: u16) -> Result<Vec<u8>> {
    let [rows, cols] = match *plane.dims() {
        [r, c] => [r, c],
        _ => return Err(Error::shape("encode_pgm", "expected a 2-D plane")),
    };
    if maxval == 0 {
        return Err(Error::Invalid("maxval must be positive".into()));
    }
    let mut out = format!("P5\n{cols} {rows}\n{maxval}\n").into_bytes();
    let m = maxval as f64;
    for &x in plane.data() {
        let q = (x.clamp(0.0, 1.0) * m).round() as u16;
        if maxval > 255 {
            out.extend_from_slice(&q.to_be_bytes());
        } else {
            out.push(q as u8);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_8_and_16_bit() {
        for maxval in [255u16, 65535] {
            let plane = Tensor::from_fn(&[3, 5], |i| ((i * 37) % (maxval as usize + 1)) as f64 / maxval as f64);
            let img = decode_pnm(&encode_pgm(&plane, maxval).unwrap()).unwrap();
            assert_eq!((img.rows, img.cols, img.maxval), (3, 5, maxval));
            assert_eq!(img.to_plane().unwrap(), plane);
        }
    }

    #[test]
    fn header_comments_and_ppm_luma() {
        let mut b = b"P6\n# comment\n1 1\n255\n".to_vec();
        b.extend_from_slice(&[0, 255, 0]);
        let img = decode_pnm(&b).unwrap();
        assert_eq!(img.channels, 3);
        assert!((img.to_plane().unwrap().data()[0] - 0.587).abs() < 1e-15);
    }

    #[test]
    fn malformed_rejected() {
        assert!(decode_pnm(b"P2\n1 1\n255\n0").is_err());
        assert!(decode_pnm(b"P5\n2 2\n255\n\x00\x00").is_err());
        assert!(decode_pnm(b"P5\n1 1\n10\n\x0b").is_err());
        assert!(decode_pnm(b"P5\nx 1\n255\n\x00").is_err());
    }
}
