use crate::error::{invalid, shape, Result};
use nalgebra::DVector;

/// Image coordinate (row, column).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pixel {
    pub row: usize,
    pub col: usize,
}

impl Pixel {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

/// Hyperspectral cube stored band-major: `data[band * height * width + row * width + col]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HsiCube {
    width: usize,
    height: usize,
    bands: usize,
    data: Vec<f64>,
}

impl HsiCube {
    pub fn new(width: usize, height: usize, bands: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || bands == 0 {
            return Err(invalid(format!(
                "cube dimensions must be positive, got {width}x{height}x{bands}"
            )));
        }
        let expected = width * height * bands;
        if data.len() != expected {
            return Err(shape(format!(
                "cube data has {} values, expected {expected}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("cube value {i} is not finite")));
        }
        Ok(Self {
            width,
            height,
            bands,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn contains(&self, p: Pixel) -> bool {
        p.row < self.height && p.col < self.width
    }

    #[inline]
    pub fn value(&self, band: usize, row: usize, col: usize) -> f64 {
        self.data[band * self.height * self.width + row * self.width + col]
    }

    /// Spectrum of one pixel as a length-`bands` vector.
    pub fn spectrum(&self, p: Pixel) -> DVector<f64> {
        DVector::from_iterator(
            self.bands,
            (0..self.bands).map(|b| self.value(b, p.row, p.col)),
        )
    }
}

/// Per-pixel class ids; 0 marks unlabeled pixels, classes are 1..=K.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    labels: Vec<u16>,
}

impl LabelMap {
    pub fn new(width: usize, height: usize, labels: Vec<u16>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(shape(format!(
                "label map has {} entries, expected {}x{}",
                labels.len(),
                width,
                height
            )));
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            labels: vec![0; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    /// Number of classes, inferred as the largest label present.
    pub fn num_classes(&self) -> u16 {
        self.labels.iter().copied().max().unwrap_or(0)
    }

    #[inline]
    pub fn get(&self, p: Pixel) -> u16 {
        self.labels[p.row * self.width + p.col]
    }

    #[inline]
    pub fn set(&mut self, p: Pixel, label: u16) {
        self.labels[p.row * self.width + p.col] = label;
    }

    /// Labeled pixels in row-major order.
    pub fn labeled_pixels(&self) -> impl Iterator<Item = (Pixel, u16)> + '_ {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l != 0)
            .map(move |(i, &l)| (Pixel::new(i / self.width, i % self.width), l))
    }

    pub fn same_shape(&self, cube: &HsiCube) -> bool {
        self.width == cube.width() && self.height == cube.height()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_cubes() {
        assert!(HsiCube::new(0, 1, 1, vec![]).is_err());
        assert!(HsiCube::new(2, 2, 1, vec![0.0; 3]).is_err());
        assert!(HsiCube::new(1, 1, 1, vec![f64::NAN]).is_err());
    }

    #[test]
    fn band_major_layout() {
        let data: Vec<f64> = (0..12).map(f64::from).collect();
        let cube = HsiCube::new(2, 2, 3, data).unwrap();
        assert_eq!(cube.value(2, 1, 0), 10.0);
        assert_eq!(cube.spectrum(Pixel::new(0, 1)).as_slice(), &[1.0, 5.0, 9.0]);
    }

    #[test]
    fn label_classes() {
        let m = LabelMap::new(3, 1, vec![0, 2, 1]).unwrap();
        assert_eq!(m.num_classes(), 2);
        assert_eq!(m.labeled_pixels().count(), 2);
        assert_eq!(LabelMap::zeros(2, 2).num_classes(), 0);
    }
}
