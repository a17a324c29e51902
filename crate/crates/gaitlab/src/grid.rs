use crate::error::{Error, Result};

/// Row-major grid of `f64` values.
///
/// The basic raster type shared by energy templates, gradient fields and
/// moment computation. Indexing is `(row, col)` with row 0 at the top.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Grid {
    pub fn zeros(width: usize, height: usize) -> Self {
        Grid {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "grid data length {} does not match {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Grid {
            width,
            height,
            data,
        })
    }

    /// Build a grid by evaluating `f(row, col)` at every cell.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Grid {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        debug_assert!(row < self.height && col < self.width);
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.height && col < self.width);
        self.data[row * self.width + col] = value;
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.width..(row + 1) * self.width]
    }

    /// Copy of the horizontal band `rows.start..rows.end`.
    pub fn slice_rows(&self, rows: std::ops::Range<usize>) -> Result<Grid> {
        if rows.start >= rows.end || rows.end > self.height {
            return Err(Error::Parameter(format!(
                "row range {}..{} invalid for height {}",
                rows.start, rows.end, self.height
            )));
        }
        let data = self.data[rows.start * self.width..rows.end * self.width].to_vec();
        Ok(Grid {
            width: self.width,
            height: rows.end - rows.start,
            data,
        })
    }

    /// Vertical concatenation; all grids must share a width.
    pub fn vstack(grids: &[&Grid]) -> Result<Grid> {
        let first = grids
            .first()
            .ok_or_else(|| Error::Parameter("vstack of zero grids".into()))?;
        let width = first.width;
        let mut data = Vec::new();
        for g in grids {
            if g.width != width {
                return Err(Error::DimensionMismatch(format!(
                    "vstack widths {} vs {}",
                    width, g.width
                )));
            }
            data.extend_from_slice(&g.data);
        }
        let height = data.len() / width;
        Ok(Grid {
            width,
            height,
            data,
        })
    }

    /// Rotate 90 degrees counter-clockwise. An exact pixel permutation.
    pub fn rot90(&self) -> Grid {
        let (w, h) = (self.width, self.height);
        Grid::from_fn(h, w, |r, c| self.get(c, w - 1 - r))
    }
}

/// Binary foreground mask; every cell is 0 or 1 with 1 = foreground.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Parameter("mask dimensions must be positive".into()));
        }
        if data.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "mask data length {} does not match {}x{}",
                data.len(),
                width,
                height
            )));
        }
        if data.iter().any(|&v| v > 1) {
            return Err(Error::Parameter("mask values must be 0 or 1".into()));
        }
        Ok(BinaryMask {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        BinaryMask::new(width, height, vec![0; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        debug_assert!(row < self.height && col < self.width);
        self.data[row * self.width + col] == 1
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, on: bool) {
        debug_assert!(row < self.height && col < self.width);
        self.data[row * self.width + col] = u8::from(on);
    }

    pub fn foreground_count(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1).count()
    }

    pub fn to_grid(&self) -> Grid {
        Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f64::from(v)).collect(),
        }
    }
}
