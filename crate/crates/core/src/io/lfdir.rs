//! Light fields stored as one image per view: `view_u{u}_v{v}.pgm` (or
//! `.ppm`, reduced to luma) plus an optional `meta.txt` with `U`, `V` and
//! `bitdepth`.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::lightfield::{LfDims, LfTensor};
use crate::tensor::Tensor;

use super::config::parse_kv;
use super::pnm::{decode_pnm, encode_pgm};
use super::{read_bytes, read_text, write_bytes};

pub fn view_path(dir: &Path, u: usize, v: usize) -> PathBuf {
    dir.join(format!("view_u{u}_v{v}.pgm"))
}

fn parse_view_name(name: &str) -> Option<(usize, usize)> {
    let stem = name.strip_suffix(".pgm").or_else(|| name.strip_suffix(".ppm"))?;
    let (u, v) = stem.strip_prefix("view_u")?.split_once("_v")?;
    Some((u.parse().ok()?, v.parse().ok()?))
}

/// Angular grid from `meta.txt`, else from the largest view indices present.
fn grid(dir: &Path) -> Result<(usize, usize)> {
    let meta = dir.join("meta.txt");
    if meta.exists() {
        let (mut u, mut v) = (None, None);
        for (line, key, value) in parse_kv(&read_text(&meta)?)? {
            let n = || {
                value.parse::<usize>().map_err(|_| Error::format("meta.txt", format!("line {line}: bad {key}")))
            };
            match key.as_str() {
                "U" | "u" => u = Some(n()?),
                "V" | "v" => v = Some(n()?),
                "bitdepth" => {}
                k => return Err(Error::format("meta.txt", format!("line {line}: unknown key {k:?}"))),
            }
        }
        if let (Some(u), Some(v)) = (u, v) {
            return Ok((u, v));
        }
    }
    let mut max = None::<(usize, usize)>;
    for entry in std::fs::read_dir(dir).map_err(|e| Error::file(dir, e))? {
        let entry = entry.map_err(|e| Error::file(dir, e))?;
        if let Some((u, v)) = entry.file_name().to_str().and_then(parse_view_name) {
            let (mu, mv) = max.unwrap_or((0, 0));
            max = Some((mu.max(u + 1), mv.max(v + 1)));
        }
    }
    max.ok_or_else(|| Error::MissingView(view_path(dir, 0, 0)))
}

/// Loads a directory of views normalized to `[0, 1]`, optionally cropping
/// the angular grid to its central `k × k` views.
pub fn load_lf(dir: &Path, central: Option<usize>) -> Result<LfTensor<f64>> {
    let (gu, gv) = grid(dir)?;
    let (u0, v0, nu, nv) = match central {
        None => (0, 0, gu, gv),
        Some(k) if k >= 1 && k <= gu && k <= gv => ((gu - k) / 2, (gv - k) / 2, k, k),
        Some(k) => return Err(Error::Invalid(format!("cannot crop {gu}x{gv} views to central {k}x{k}"))),
    };
    let mut planes = Vec::with_capacity(nu * nv);
    for u in u0..u0 + nu {
        for v in v0..v0 + nv {
            let pgm = view_path(dir, u, v);
            let path = if pgm.exists() { pgm } else { pgm.with_extension("ppm") };
            if !path.exists() {
                return Err(Error::MissingView(view_path(dir, u, v)));
            }
            let img = decode_pnm(&read_bytes(&path)?).map_err(|e| match e {
                Error::Format { kind, detail } => Error::Format { kind, detail: format!("{}: {detail}", path.display()) },
                e => e,
            })?;
            let plane = img.to_plane()?;
            if let Some(first) = planes.first() {
                let first: &Tensor<f64> = first;
                if first.dims() != plane.dims() {
                    return Err(Error::shape(
                        "load_lf",
                        format!("{} is {}x{}, expected {}x{}", path.display(), img.rows, img.cols, first.dims()[0], first.dims()[1]),
                    ));
                }
            }
            planes.push(plane);
        }
    }
    let [w, h] = [planes[0].dims()[0], planes[0].dims()[1]];
    let data = planes.into_iter().flat_map(Tensor::into_data).collect();
    LfTensor::new(LfDims::new(nu, nv, w, h, 1), data)
}

/// Writes one PGM per view at `bitdepth` 8 or 16, plus `meta.txt`.
pub fn save_lf(lf: &LfTensor<f64>, dir: &Path, bitdepth: u32) -> Result<()> {
    let d = lf.dims();
    if d.c != 1 {
        return Err(Error::shape("save_lf", format!("views are single-channel images, got C={}", d.c)));
    }
    let maxval = match bitdepth {
        8 => 255,
        16 => 65535,
        b => return Err(Error::Invalid(format!("bitdepth must be 8 or 16, got {b}"))),
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    for u in 0..d.u {
        for v in 0..d.v {
            let plane = lf.sai(u, v).reshape(&[d.w, d.h])?;
            write_bytes(&view_path(dir, u, v), &encode_pgm(&plane, maxval)?)?;
        }
    }
    write_bytes(&dir.join("meta.txt"), format!("U={}\nV={}\nbitdepth={bitdepth}\n", d.u, d.v).as_bytes())
}
