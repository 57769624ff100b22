//! Cube and label ingestion, synthetic scenes, raster output.
//!
//! Cubes are stored as a text header plus a raw little-endian `f32` file:
//!
//! ```text
//! width = 145
//! height = 145
//! bands = 200
//! dtype = float32le
//! interleave = BSQ
//! name = indian_pines
//! ```
//!
//! Labels are raw little-endian `u16`, row-major.

mod cube;
mod raster;
pub mod synth;

pub use cube::{load_cube, load_labels, save_labels, write_cube, CubeHeader, Interleave};
pub use raster::{read_raster, save_map, save_pattern, Palette, Raster};
pub use synth::{synth_generate, Layout, Noise, SceneSpec, SyntheticScene};

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Parses `key = value` lines. Blank lines and `#` comments are skipped;
/// later keys override earlier ones.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::Format(format!("line {}: expected 'key = value', got '{line}'", lineno + 1))
        })?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}
