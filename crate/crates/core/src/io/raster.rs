use std::fs;
use std::path::Path;

use crate::cube::LabelMap;
use crate::error::{Error, Result};
use crate::Matrix;

/// RGB colors indexed by class id; entry 0 is used for unlabeled pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Palette {
    colors: Vec<[u8; 3]>,
}

impl Palette {
    pub fn new(colors: Vec<[u8; 3]>) -> Result<Self> {
        if colors.is_empty() {
            return Err(Error::InvalidArgument("palette needs at least one color".into()));
        }
        Ok(Self { colors })
    }

    /// Black background followed by `classes` evenly spaced hues.
    pub fn distinct(classes: usize) -> Self {
        let mut colors = vec![[0, 0, 0]];
        for k in 0..classes {
            let hue = k as f64 / classes.max(1) as f64;
            let value = if k % 2 == 0 { 1.0 } else { 0.7 };
            colors.push(hsv_to_rgb(hue, 0.85, value));
        }
        Self { colors }
    }

    pub fn len(&self) -> usize {
        self.colors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.colors.is_empty()
    }

    pub fn color(&self, label: u16) -> Option<[u8; 3]> {
        self.colors.get(label as usize).copied()
    }
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [u8; 3] {
    let i = (h * 6.0).floor();
    let f = h * 6.0 - i;
    let (p, q, t) = (v * (1.0 - s), v * (1.0 - f * s), v * (1.0 - (1.0 - f) * s));
    let (r, g, b) = match i as i64 % 6 {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    };
    let c = |x: f64| (x * 255.0).round().clamp(0.0, 255.0) as u8;
    [c(r), c(g), c(b)]
}

/// Writes a label map as binary PPM.
pub fn save_map(map: &LabelMap, palette: &Palette, path: &Path) -> Result<()> {
    let max = map.labels().iter().copied().max().unwrap_or(0);
    if max as usize >= palette.len() {
        return Err(Error::InvalidArgument(format!(
            "palette has {} colors but the map uses label {max}",
            palette.len()
        )));
    }
    let mut bytes = format!("P6\n{} {}\n255\n", map.width(), map.height()).into_bytes();
    for &l in map.labels() {
        bytes.extend_from_slice(&palette.colors[l as usize]);
    }
    fs::write(path, bytes)?;
    Ok(())
}

/// Writes `|x|` as an 8-bit PGM, one pixel per entry, scaled so that the
/// largest magnitude is white. Exact zeros stay black.
pub fn save_pattern(x: &Matrix, path: &Path) -> Result<()> {
    let max = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut bytes = format!("P5\n{} {}\n255\n", x.ncols(), x.nrows()).into_bytes();
    for i in 0..x.nrows() {
        for j in 0..x.ncols() {
            let v = x[(i, j)].abs();
            let g = if max > 0.0 && v > 0.0 {
                ((v / max) * 255.0).round().max(1.0) as u8
            } else {
                0
            };
            bytes.push(g);
        }
    }
    fs::write(path, bytes)?;
    Ok(())
}

/// Decoded PGM or PPM; `channels` is 1 or 3.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub pixels: Vec<u8>,
}

/// Reads the binary PGM/PPM files produced by this module.
pub fn read_raster(path: &Path) -> Result<Raster> {
    let bytes = fs::read(path)?;
    let mut pos = 0;
    let mut token = || -> Result<String> {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("truncated raster header".into()));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let channels = match token()?.as_str() {
        "P5" => 1,
        "P6" => 3,
        other => return Err(Error::Format(format!("unsupported raster magic '{other}'"))),
    };
    let num = |s: String| s.parse::<usize>().map_err(|_| Error::Format(format!("bad raster number '{s}'")));
    let width = num(token()?)?;
    let height = num(token()?)?;
    if num(token()?)? != 255 {
        return Err(Error::Format("only 8-bit rasters are supported".into()));
    }
    let start = pos + 1;
    let len = width * height * channels;
    if bytes.len() != start + len {
        return Err(Error::SizeMismatch {
            path: path.to_path_buf(),
            expected: (start + len) as u64,
            actual: bytes.len() as u64,
        });
    }
    Ok(Raster { width, height, channels, pixels: bytes[start..].to_vec() })
}
