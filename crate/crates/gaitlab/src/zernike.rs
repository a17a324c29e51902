//! Zernike radial polynomials, basis functions and discrete image moments.
//!
//! The basis functions form an orthogonal family on the unit disk; moment
//! magnitudes are rotation invariants, which is what makes them usable as
//! shape descriptors for covariate screening. Regions are sampled at pixel
//! centers, each axis mapped independently to `[-1, 1]`, and sums carry
//! the cell area `dA = 4/(W*H)` so moments are approximately
//! resolution-independent.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Order/repetition pair `(n, m)` with `|m| <= n` and `n - |m|` even.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ZernikeIndex {
    n: u32,
    m: i32,
}

impl ZernikeIndex {
    pub fn new(n: u32, m: i32) -> Result<Self> {
        if m.unsigned_abs() > n {
            return Err(Error::Parameter(format!(
                "invalid Zernike index: |m| = {} exceeds n = {n}",
                m.unsigned_abs()
            )));
        }
        if (n - m.unsigned_abs()) % 2 != 0 {
            return Err(Error::Parameter(format!(
                "invalid Zernike index: n - |m| must be even, got n = {n}, m = {m}"
            )));
        }
        Ok(ZernikeIndex { n, m })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn m(&self) -> i32 {
        self.m
    }

    /// Index with the repetition sign flipped.
    pub fn conjugate(&self) -> ZernikeIndex {
        ZernikeIndex {
            n: self.n,
            m: -self.m,
        }
    }
}

impl std::fmt::Display for ZernikeIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.n, self.m)
    }
}

/// The default screening index set: order 5, repetitions 1, 3, 5.
pub fn default_index_set() -> Vec<ZernikeIndex> {
    [(5, 1), (5, 3), (5, 5)]
        .into_iter()
        .map(|(n, m)| ZernikeIndex::new(n, m).expect("static indices are valid"))
        .collect()
}

/// All valid indices with order up to `max_n`, negative repetitions
/// included, in `(n, m)` order.
pub fn index_set_up_to(max_n: u32) -> Vec<ZernikeIndex> {
    let mut out = Vec::new();
    for n in 0..=max_n {
        for m in -(n as i32)..=(n as i32) {
            if let Ok(idx) = ZernikeIndex::new(n, m) {
                out.push(idx);
            }
        }
    }
    out
}

fn factorial(k: u32) -> f64 {
    (1..=k).fold(1.0, |acc, v| acc * v as f64)
}

/// Radial polynomial coefficients for one index, evaluated by a Horner
/// scheme in `rho^2`. Safe in plain f64 for the orders used here (n <= 20).
#[derive(Debug, Clone)]
struct RadialPoly {
    /// `coeffs[s]` multiplies `rho^(n - 2s)`.
    coeffs: Vec<f64>,
    m_abs: u32,
}

impl RadialPoly {
    fn new(idx: ZernikeIndex) -> Self {
        let n = idx.n;
        let m_abs = idx.m.unsigned_abs();
        let s_max = (n - m_abs) / 2;
        let coeffs = (0..=s_max)
            .map(|s| {
                let sign = if s % 2 == 0 { 1.0 } else { -1.0 };
                sign * factorial(n - s)
                    / (factorial(s) * factorial((n + m_abs) / 2 - s) * factorial((n - m_abs) / 2 - s))
            })
            .collect();
        RadialPoly { coeffs, m_abs }
    }

    fn eval(&self, rho: f64) -> f64 {
        let rho2 = rho * rho;
        let mut acc = self.coeffs[0];
        for &c in &self.coeffs[1..] {
            acc = acc * rho2 + c;
        }
        acc * rho.powi(self.m_abs as i32)
    }
}

/// Radial polynomial `R_nm(rho)` for `rho` in `[0, 1]`.
pub fn radial_polynomial(idx: ZernikeIndex, rho: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::Parameter(format!(
            "radial argument {rho} outside [0, 1]"
        )));
    }
    Ok(RadialPoly::new(idx).eval(rho))
}

/// Basis function `V_nm(x, y) = R_nm(rho) * exp(j m theta)` for points
/// inside the unit disk.
pub fn basis_function(idx: ZernikeIndex, x: f64, y: f64) -> Result<Complex64> {
    let rho2 = x * x + y * y;
    if rho2 > 1.0 {
        return Err(Error::OutsideDisk { rho: rho2.sqrt() });
    }
    let rho = rho2.sqrt();
    let theta = y.atan2(x);
    let radial = RadialPoly::new(idx).eval(rho);
    Ok(Complex64::from_polar(radial, idx.m as f64 * theta))
}

/// Complex moments of one image region, keyed by index.
#[derive(Debug, Clone, PartialEq)]
pub struct ZernikeMomentSet {
    entries: BTreeMap<ZernikeIndex, Complex64>,
    region_width: usize,
    region_height: usize,
}

impl ZernikeMomentSet {
    pub fn new(region_width: usize, region_height: usize) -> Self {
        ZernikeMomentSet {
            entries: BTreeMap::new(),
            region_width,
            region_height,
        }
    }

    pub fn insert(&mut self, idx: ZernikeIndex, value: Complex64) {
        self.entries.insert(idx, value);
    }

    pub fn get(&self, idx: ZernikeIndex) -> Option<Complex64> {
        self.entries.get(&idx).copied()
    }

    /// Indices in ascending `(n, m)` order.
    pub fn indices(&self) -> Vec<ZernikeIndex> {
        self.entries.keys().copied().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ZernikeIndex, &Complex64)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn region_width(&self) -> usize {
        self.region_width
    }

    pub fn region_height(&self) -> usize {
        self.region_height
    }
}

/// Precomputed conjugate basis table for a fixed region size and index
/// set. Immutable after construction, so it can be shared across threads.
#[derive(Debug, Clone)]
pub struct ZernikeBasis {
    width: usize,
    height: usize,
    indices: Vec<ZernikeIndex>,
    /// Flat pixel offsets of the samples inside the unit disk.
    disk_pixels: Vec<usize>,
    /// Per index: `conj(V_nm)` at each disk pixel, `disk_pixels` order.
    conj_values: Vec<Vec<Complex64>>,
    delta_a: f64,
}

impl ZernikeBasis {
    pub fn new(width: usize, height: usize, indices: &[ZernikeIndex]) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Parameter("region dimensions must be positive".into()));
        }
        if indices.is_empty() {
            return Err(Error::Parameter("empty Zernike index list".into()));
        }
        let mut disk_pixels = Vec::new();
        let mut polar = Vec::new();
        for r in 0..height {
            let y = -((2 * r) as f64 - height as f64 + 1.0) / height as f64;
            for c in 0..width {
                let x = ((2 * c) as f64 - width as f64 + 1.0) / width as f64;
                let rho2 = x * x + y * y;
                if rho2 <= 1.0 {
                    disk_pixels.push(r * width + c);
                    polar.push((rho2.sqrt(), y.atan2(x)));
                }
            }
        }
        let conj_values = indices
            .iter()
            .map(|&idx| {
                let poly = RadialPoly::new(idx);
                let m = idx.m as f64;
                polar
                    .iter()
                    .map(|&(rho, theta)| Complex64::from_polar(poly.eval(rho), -m * theta))
                    .collect()
            })
            .collect();
        Ok(ZernikeBasis {
            width,
            height,
            indices: indices.to_vec(),
            disk_pixels,
            conj_values,
            delta_a: 4.0 / (width as f64 * height as f64),
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn index_set(&self) -> &[ZernikeIndex] {
        &self.indices
    }

    /// Moments of `image`, which must match the basis region size.
    pub fn moments(&self, image: &Grid) -> Result<ZernikeMomentSet> {
        if image.width() != self.width || image.height() != self.height {
            return Err(Error::DimensionMismatch(format!(
                "image {}x{} does not match basis region {}x{}",
                image.width(),
                image.height(),
                self.width,
                self.height
            )));
        }
        let data = image.data();
        let mut set = ZernikeMomentSet::new(self.width, self.height);
        for (pos, &idx) in self.indices.iter().enumerate() {
            let values = &self.conj_values[pos];
            let mut acc = Complex64::new(0.0, 0.0);
            for (&pixel, &v) in self.disk_pixels.iter().zip(values) {
                acc += data[pixel] * v;
            }
            let scale = (idx.n as f64 + 1.0) / std::f64::consts::PI * self.delta_a;
            set.insert(idx, acc * scale);
        }
        Ok(set)
    }

    /// Discrete disk inner product `sum V_a * conj(V_b) * dA` between two
    /// basis functions of this table. For an orthogonal family this
    /// approaches `pi/(n_a + 1)` when `a == b` and 0 otherwise.
    pub fn disk_inner_product(&self, a: usize, b: usize) -> Complex64 {
        let va = &self.conj_values[a];
        let vb = &self.conj_values[b];
        let mut acc = Complex64::new(0.0, 0.0);
        for (ca, cb) in va.iter().zip(vb) {
            // Stored values are conjugates: V_a * conj(V_b) = conj(ca) * cb.
            acc += ca.conj() * cb;
        }
        acc * self.delta_a
    }
}

/// Moments of `image` for `indices`, building a one-off basis table.
pub fn compute_moments(image: &Grid, indices: &[ZernikeIndex]) -> Result<ZernikeMomentSet> {
    if image.width() == 0 || image.height() == 0 {
        return Err(Error::DegenerateInput("empty image".into()));
    }
    ZernikeBasis::new(image.width(), image.height(), indices)?.moments(image)
}
