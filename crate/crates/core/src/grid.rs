//! 2-D real-valued grids: frame crops, filter responses, templates and
//! distance fields all share this representation.

use crate::{Error, Result};

/// Row-major grid of `f64` samples. Intensity images are constrained to
/// `[0, 255]`; response grids and distance fields may hold any finite value.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    pub width: usize,
    pub height: usize,
    values: Vec<f64>,
}

impl ImageGrid {
    /// All-zero grid.
    pub fn new(width: usize, height: usize) -> Self {
        ImageGrid {
            width,
            height,
            values: vec![0.0; width * height],
        }
    }

    pub fn filled(width: usize, height: usize, v: f64) -> Self {
        ImageGrid {
            width,
            height,
            values: vec![v; width * height],
        }
    }

    pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "grid values length {} does not match {}x{}",
                values.len(),
                width,
                height
            )));
        }
        Ok(ImageGrid {
            width,
            height,
            values,
        })
    }

    #[inline]
    pub fn in_bounds(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        debug_assert!(x < self.width && y < self.height);
        self.values[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        debug_assert!(x < self.width && y < self.height);
        self.values[y * self.width + x] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Bilinear sample at a real coordinate; coordinates are clamped to the
    /// grid so border midpoints evaluate to the border value.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> f64 {
        let xc = x.clamp(0.0, (self.width - 1) as f64);
        let yc = y.clamp(0.0, (self.height - 1) as f64);
        let x0 = xc.floor() as usize;
        let y0 = yc.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = xc - x0 as f64;
        let fy = yc - y0 as f64;
        let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
        let bot = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
        top * (1.0 - fy) + bot * fy
    }

    /// Copies the rectangle `[x0, x0+w) x [y0, y0+h)` (must be in bounds).
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<ImageGrid> {
        if x0 + w > self.width || y0 + h > self.height || w == 0 || h == 0 {
            return Err(Error::InvalidInput(format!(
                "crop {}x{}+{}+{} outside {}x{} grid",
                w, h, x0, y0, self.width, self.height
            )));
        }
        let mut out = ImageGrid::new(w, h);
        for y in 0..h {
            for x in 0..w {
                out.set(x, y, self.get(x0 + x, y0 + y));
            }
        }
        Ok(out)
    }
}
