use crate::cube::{HsiCube, Pixel};
use crate::error::{invalid, Result};
use crate::Matrix;

/// Spectra of the pixels in a square window, one column per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborhoodBlock {
    pub spectra: Matrix,
    /// Column of `spectra` holding the window's center pixel.
    pub center_index: usize,
    pub pixel_coords: Vec<Pixel>,
}

impl NeighborhoodBlock {
    /// Wraps bare spectra; the first column is taken as the center.
    pub fn from_spectra(spectra: Matrix) -> Self {
        let pixel_coords = (0..spectra.ncols()).map(|c| Pixel::new(0, c)).collect();
        Self {
            spectra,
            center_index: 0,
            pixel_coords,
        }
    }

    pub fn len(&self) -> usize {
        self.spectra.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.spectra.ncols() == 0
    }

    pub fn center(&self) -> Pixel {
        self.pixel_coords[self.center_index]
    }
}

/// Gathers the `window × window` neighborhood of `center`. Cells falling
/// outside the image are dropped, so border blocks have fewer columns.
pub fn extract_window(cube: &HsiCube, center: Pixel, window: usize) -> Result<NeighborhoodBlock> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(invalid(format!("window size {window} must be odd")));
    }
    if !cube.contains(center) {
        return Err(invalid(format!(
            "center ({}, {}) outside the {}x{} image",
            center.row,
            center.col,
            cube.height(),
            cube.width()
        )));
    }
    let half = window / 2;
    let rows = center.row.saturating_sub(half)..(center.row + half + 1).min(cube.height());
    let cols = center.col.saturating_sub(half)..(center.col + half + 1).min(cube.width());

    let mut pixel_coords = Vec::with_capacity(rows.len() * cols.len());
    for r in rows {
        for c in cols.clone() {
            pixel_coords.push(Pixel::new(r, c));
        }
    }
    let center_index = pixel_coords
        .iter()
        .position(|&p| p == center)
        .expect("center is inside its own window");
    let mut spectra = Matrix::zeros(cube.bands(), pixel_coords.len());
    for (j, &p) in pixel_coords.iter().enumerate() {
        spectra.set_column(j, &cube.spectrum(p));
    }
    Ok(NeighborhoodBlock {
        spectra,
        center_index,
        pixel_coords,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube(w: usize, h: usize) -> HsiCube {
        let bands = 2;
        let data = (0..w * h * bands).map(|i| i as f64).collect();
        HsiCube::new(w, h, bands, data).unwrap()
    }

    #[test]
    fn interior_and_border_sizes() {
        let c = cube(20, 20);
        assert_eq!(extract_window(&c, Pixel::new(10, 10), 9).unwrap().len(), 81);
        assert_eq!(extract_window(&c, Pixel::new(10, 10), 5).unwrap().len(), 25);
        assert_eq!(extract_window(&c, Pixel::new(0, 0), 3).unwrap().len(), 4);
        assert_eq!(extract_window(&c, Pixel::new(19, 5), 3).unwrap().len(), 6);
    }

    #[test]
    fn center_column_is_center_spectrum() {
        let c = cube(7, 5);
        for row in 0..5 {
            for col in 0..7 {
                let p = Pixel::new(row, col);
                let b = extract_window(&c, p, 5).unwrap();
                assert_eq!(b.center(), p);
                assert_eq!(b.spectra.column(b.center_index), c.spectrum(p));
            }
        }
    }

    #[test]
    fn errors() {
        let c = cube(4, 4);
        assert!(extract_window(&c, Pixel::new(4, 0), 3).is_err());
        assert!(extract_window(&c, Pixel::new(1, 1), 4).is_err());
    }
}
