//! File formats: tensors, weights, images, light-field directories, configs
//! and loss curves.

pub mod config;
pub mod curve;
pub mod lfdir;
pub mod pnm;
pub mod tensor_file;
pub mod weights;

pub use config::{parse_run_config, RunConfig};
pub use curve::{curve_csv, parse_curve_csv};
pub use lfdir::{load_lf, save_lf};
pub use pnm::{decode_pnm, encode_pgm, Pnm};
pub use tensor_file::{decode_tensor, encode_tensor, load_lf_tensor, load_tensor, save_tensor};
pub use weights::{decode_weights, encode_weights, load_net, load_weights, save_weights};

use std::path::Path;

use crate::error::{Error, Result};

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::file(path, e))
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::file(path, e))
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::file(path, e))
}
