use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use super::parse_key_values;
use crate::cube::{HsiCube, LabelMap};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interleave {
    /// Band sequential: band-major planes.
    Bsq,
    /// Band interleaved by pixel: all bands of a pixel are adjacent.
    Bip,
}

impl fmt::Display for Interleave {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Interleave::Bsq => "BSQ",
            Interleave::Bip => "BIP",
        })
    }
}

impl FromStr for Interleave {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "BSQ" => Ok(Interleave::Bsq),
            "BIP" => Ok(Interleave::Bip),
            other => Err(Error::Format(format!("unknown interleave '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CubeHeader {
    pub width: usize,
    pub height: usize,
    pub bands: usize,
    pub interleave: Interleave,
    pub name: Option<String>,
}

impl CubeHeader {
    pub fn parse(text: &str) -> Result<Self> {
        let kv = parse_key_values(text)?;
        let dim = |key: &str| -> Result<usize> {
            let v = kv
                .get(key)
                .ok_or_else(|| Error::Format(format!("header is missing '{key}'")))?;
            match v.parse::<usize>() {
                Ok(n) if n > 0 => Ok(n),
                _ => Err(Error::Format(format!("'{key}' must be a positive integer, got '{v}'"))),
            }
        };
        match kv.get("dtype").map(String::as_str) {
            Some("float32le") => {}
            Some(other) => return Err(Error::Format(format!("unsupported dtype '{other}'"))),
            None => return Err(Error::Format("header is missing 'dtype'".into())),
        }
        let interleave = kv
            .get("interleave")
            .ok_or_else(|| Error::Format("header is missing 'interleave'".into()))?
            .parse()?;
        Ok(Self {
            width: dim("width")?,
            height: dim("height")?,
            bands: dim("bands")?,
            interleave,
            name: kv.get("name").cloned(),
        })
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "width = {}\nheight = {}\nbands = {}\ndtype = float32le\ninterleave = {}\n",
            self.width, self.height, self.bands, self.interleave
        );
        if let Some(name) = &self.name {
            s.push_str(&format!("name = {name}\n"));
        }
        s
    }

    pub fn raw_len(&self) -> u64 {
        (self.width * self.height * self.bands * 4) as u64
    }
}

/// Reads a cube; the result is band-major whatever the file interleave.
pub fn load_cube(header_path: &Path, raw_path: &Path) -> Result<HsiCube> {
    let header = CubeHeader::parse(&fs::read_to_string(header_path)?)?;
    let bytes = fs::read(raw_path)?;
    if bytes.len() as u64 != header.raw_len() {
        return Err(Error::SizeMismatch {
            path: raw_path.to_path_buf(),
            expected: header.raw_len(),
            actual: bytes.len() as u64,
        });
    }
    let values: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    let (w, h, b) = (header.width, header.height, header.bands);
    let data = match header.interleave {
        Interleave::Bsq => values,
        Interleave::Bip => {
            let mut out = vec![0.0; values.len()];
            for pix in 0..w * h {
                for band in 0..b {
                    out[band * w * h + pix] = values[pix * b + band];
                }
            }
            out
        }
    };
    HsiCube::new(w, h, b, data)
}

/// Writes a cube as `f32` (values are rounded to single precision).
pub fn write_cube(cube: &HsiCube, header_path: &Path, raw_path: &Path, interleave: Interleave, name: Option<&str>) -> Result<()> {
    let header = CubeHeader {
        width: cube.width(),
        height: cube.height(),
        bands: cube.bands(),
        interleave,
        name: name.map(str::to_string),
    };
    let (w, h, b) = (cube.width(), cube.height(), cube.bands());
    let mut bytes = Vec::with_capacity(header.raw_len() as usize);
    let mut push = |v: f64| bytes.extend_from_slice(&(v as f32).to_le_bytes());
    match interleave {
        Interleave::Bsq => cube.data().iter().for_each(|&v| push(v)),
        Interleave::Bip => {
            for pix in 0..w * h {
                for band in 0..b {
                    push(cube.data()[band * w * h + pix]);
                }
            }
        }
    }
    fs::write(header_path, header.to_text())?;
    fs::write(raw_path, bytes)?;
    Ok(())
}

pub fn load_labels(path: &Path, width: usize, height: usize) -> Result<LabelMap> {
    let bytes = fs::read(path)?;
    let expected = (width * height * 2) as u64;
    if bytes.len() as u64 != expected {
        return Err(Error::SizeMismatch {
            path: path.to_path_buf(),
            expected,
            actual: bytes.len() as u64,
        });
    }
    let labels = bytes
        .chunks_exact(2)
        .map(|c| u16::from_le_bytes([c[0], c[1]]))
        .collect();
    LabelMap::new(width, height, labels)
}

pub fn save_labels(map: &LabelMap, path: &Path) -> Result<()> {
    let bytes: Vec<u8> = map.labels().iter().flat_map(|l| l.to_le_bytes()).collect();
    fs::write(path, bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_raw(path: &Path, values: &[f32]) {
        let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
        fs::write(path, bytes).unwrap();
    }

    #[test]
    fn bsq_and_bip_agree() {
        let dir = tempfile::tempdir().unwrap();
        let (w, h, b) = (2usize, 2usize, 3usize);
        let bsq: Vec<f32> = (0..12).map(|i| i as f32).collect();
        let mut bip = vec![0f32; 12];
        for band in 0..b {
            for pix in 0..w * h {
                bip[pix * b + band] = bsq[band * w * h + pix];
            }
        }
        let hdr = |il: &str| format!("width = 2\nheight = 2\nbands = 3\ndtype = float32le\ninterleave = {il}\n");
        fs::write(dir.path().join("a.hdr"), hdr("BSQ")).unwrap();
        fs::write(dir.path().join("b.hdr"), hdr("BIP")).unwrap();
        write_raw(&dir.path().join("a.raw"), &bsq);
        write_raw(&dir.path().join("b.raw"), &bip);
        let a = load_cube(&dir.path().join("a.hdr"), &dir.path().join("a.raw")).unwrap();
        let bcube = load_cube(&dir.path().join("b.hdr"), &dir.path().join("b.raw")).unwrap();
        // band 2, row 1, col 0 is float index 2·4 + 1·2 + 0 = 10
        assert_eq!(a.value(2, 1, 0), 10.0);
        assert_eq!(a, bcube);
    }

    #[test]
    fn truncated_raw_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("c.hdr"), "width = 2\nheight = 2\nbands = 3\ndtype = float32le\ninterleave = BSQ\n").unwrap();
        write_raw(&dir.path().join("c.raw"), &[0.0; 11]);
        match load_cube(&dir.path().join("c.hdr"), &dir.path().join("c.raw")) {
            Err(Error::SizeMismatch { expected: 48, actual: 44, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn header_errors() {
        assert!(CubeHeader::parse("width = 2\nheight = 2\nbands = 1\ndtype = float64\ninterleave = BSQ").is_err());
        assert!(CubeHeader::parse("width = 2\nheight = 2\nbands = 1\ndtype = float32le\ninterleave = BIL").is_err());
        assert!(CubeHeader::parse("width = 0\nheight = 2\nbands = 1\ndtype = float32le\ninterleave = BSQ").is_err());
        let h = CubeHeader::parse("# cube\nwidth = 3\nheight = 2\nbands = 4\ndtype = float32le\ninterleave = bip\nname = scene").unwrap();
        assert_eq!(CubeHeader::parse(&h.to_text()).unwrap(), h);
    }

    #[test]
    fn labels_round_trip_and_classes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("l.u16");
        let map = LabelMap::new(3, 2, vec![0, 1, 2, 2, 0, 1]).unwrap();
        save_labels(&map, &path).unwrap();
        let back = load_labels(&path, 3, 2).unwrap();
        assert_eq!(back, map);
        assert_eq!(back.num_classes(), 2);
        assert!(load_labels(&path, 2, 2).is_err());

        save_labels(&LabelMap::zeros(2, 2), &path).unwrap();
        assert_eq!(load_labels(&path, 2, 2).unwrap().num_classes(), 0);
    }
}
