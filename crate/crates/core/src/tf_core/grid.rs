use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::dft;
use crate::error::{Error, Result};

/// Uniform grid `w_k = 2 pi k / n` on the unit circle with quadrature weight `1/n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FrequencyGrid {
    n_points: usize,
}

impl FrequencyGrid {
    pub const DEFAULT_POINTS: usize = 4096;

    pub fn new(n_points: usize) -> Result<Self> {
        if n_points < 2 || n_points % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "n_points must be even and at least 2, got {n_points}"
            )));
        }
        Ok(Self { n_points })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn weight(&self) -> f64 {
        1.0 / self.n_points as f64
    }

    pub fn angle(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 / self.n_points as f64
    }

    pub fn angles(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(move |k| self.angle(k))
    }

    /// Grid index of the mirrored frequency `-w_k`.
    pub fn mirror(&self, k: usize) -> usize {
        (self.n_points - k) % self.n_points
    }

    /// Whether coefficient index `j` is interpreted as causal (power `z^{-j}`).
    /// The upper half of the index range holds anticausal lags `j - n`.
    pub fn is_causal_index(&self, j: usize) -> bool {
        j < self.n_points / 2
    }

    /// Signed lag of coefficient index `j` under the wrap-around convention.
    pub fn lag(&self, j: usize) -> isize {
        if self.is_causal_index(j) {
            j as isize
        } else {
            j as isize - self.n_points as isize
        }
    }
}

impl Default for FrequencyGrid {
    fn default() -> Self {
        Self {
            n_points: Self::DEFAULT_POINTS,
        }
    }
}

/// Complex `rows x cols` matrices sampled on every point of a [`FrequencyGrid`].
///
/// Storage is frequency-major, each matrix row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSamples {
    grid: FrequencyGrid,
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl GridSamples {
    pub fn new(grid: FrequencyGrid, rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::DimensionMismatch("empty matrix dimensions".into()));
        }
        if data.len() != grid.n_points() * rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "expected {} samples, got {}",
                grid.n_points() * rows * cols,
                data.len()
            )));
        }
        Ok(Self { grid, rows, cols, data })
    }

    pub fn zeros(grid: FrequencyGrid, rows: usize, cols: usize) -> Self {
        Self {
            grid,
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); grid.n_points() * rows * cols],
        }
    }

    pub fn from_scalars(grid: FrequencyGrid, values: Vec<Complex64>) -> Result<Self> {
        Self::new(grid, 1, 1, values)
    }

    pub fn from_fn(
        grid: FrequencyGrid,
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize) -> DMatrix<Complex64>,
    ) -> Self {
        let mut out = Self::zeros(grid, rows, cols);
        for k in 0..grid.n_points() {
            let m = f(k);
            out.set_matrix(k, &m);
        }
        out
    }

    pub fn constant(grid: FrequencyGrid, m: &DMatrix<Complex64>) -> Self {
        Self::from_fn(grid, m.nrows(), m.ncols(), |_| m.clone())
    }

    pub fn identity(grid: FrequencyGrid, n: usize) -> Self {
        Self::constant(grid, &DMatrix::identity(n, n))
    }

    pub fn grid(&self) -> FrequencyGrid {
        self.grid
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_scalar(&self) -> bool {
        self.rows == 1 && self.cols == 1
    }

    pub fn len(&self) -> usize {
        self.grid.n_points()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    fn block(&self) -> usize {
        self.rows * self.cols
    }

    pub fn entry(&self, k: usize, i: usize, j: usize) -> Complex64 {
        self.data[k * self.block() + i * self.cols + j]
    }

    /// Scalar value at grid index `k`. Panics unless the samples are 1x1.
    pub fn scalar(&self, k: usize) -> Complex64 {
        assert!(self.is_scalar(), "scalar access on {}x{} samples", self.rows, self.cols);
        self.data[k]
    }

    pub fn matrix(&self, k: usize) -> DMatrix<Complex64> {
        let b = self.block();
        DMatrix::from_row_slice(self.rows, self.cols, &self.data[k * b..(k + 1) * b])
    }

    pub fn set_matrix(&mut self, k: usize, m: &DMatrix<Complex64>) {
        assert_eq!((m.nrows(), m.ncols()), (self.rows, self.cols));
        let b = self.block();
        let dst = &mut self.data[k * b..(k + 1) * b];
        for i in 0..self.rows {
            for j in 0..self.cols {
                dst[i * self.cols + j] = m[(i, j)];
            }
        }
    }

    pub fn matrices(&self) -> impl Iterator<Item = DMatrix<Complex64>> + '_ {
        (0..self.len()).map(move |k| self.matrix(k))
    }

    /// Applies `f` to every per-frequency matrix; output dimensions come from the first result.
    pub fn map_matrices(&self, mut f: impl FnMut(usize, DMatrix<Complex64>) -> DMatrix<Complex64>) -> Self {
        let first = f(0, self.matrix(0));
        let mut out = Self::zeros(self.grid, first.nrows(), first.ncols());
        out.set_matrix(0, &first);
        for k in 1..self.len() {
            let m = f(k, self.matrix(k));
            out.set_matrix(k, &m);
        }
        out
    }

    pub fn map_entries(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self {
            grid: self.grid,
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise matrix product `self(w) * other(w)`.
    pub fn mul(&self, other: &GridSamples) -> GridSamples {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        assert_eq!(self.cols, other.rows, "inner dimension mismatch");
        if self.is_scalar() && other.is_scalar() {
            return Self {
                grid: self.grid,
                rows: 1,
                cols: 1,
                data: self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect(),
            };
        }
        let mut out = Self::zeros(self.grid, self.rows, other.cols);
        let (r, n, c) = (self.rows, self.cols, other.cols);
        for k in 0..self.len() {
            let a = &self.data[k * r * n..(k + 1) * r * n];
            let b = &other.data[k * n * c..(k + 1) * n * c];
            let o = &mut out.data[k * r * c..(k + 1) * r * c];
            for i in 0..r {
                for j in 0..c {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for l in 0..n {
                        acc += a[i * n + l] * b[l * c + j];
                    }
                    o[i * c + j] = acc;
                }
            }
        }
        out
    }

    pub fn add(&self, other: &GridSamples) -> GridSamples {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &GridSamples) -> GridSamples {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> GridSamples {
        self.map_entries(|v| v * s)
    }

    fn zip_with(&self, other: &GridSamples, f: impl Fn(Complex64, Complex64) -> Complex64) -> GridSamples {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "shape mismatch");
        Self {
            grid: self.grid,
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    /// Pointwise inverse of square samples.
    pub fn inverse(&self) -> Result<GridSamples> {
        if self.rows != self.cols {
            return Err(Error::DimensionMismatch("inverse of non-square samples".into()));
        }
        if self.is_scalar() {
            let mut data = Vec::with_capacity(self.len());
            for (k, &v) in self.data.iter().enumerate() {
                if v.norm() < 1e-300 {
                    return Err(Error::SingularEvaluation { index: k, magnitude: v.norm() });
                }
                data.push(v.inv());
            }
            return GridSamples::from_scalars(self.grid, data);
        }
        let mut out = Self::zeros(self.grid, self.rows, self.cols);
        for k in 0..self.len() {
            let m = self.matrix(k);
            let inv = m.try_inverse().ok_or(Error::SingularEvaluation { index: k, magnitude: 0.0 })?;
            out.set_matrix(k, &inv);
        }
        Ok(out)
    }

    /// Pointwise transpose (no conjugation).
    pub fn transpose(&self) -> GridSamples {
        let mut out = Self::zeros(self.grid, self.cols, self.rows);
        for k in 0..self.len() {
            out.set_matrix(k, &self.matrix(k).transpose());
        }
        out
    }

    /// Fourier coefficients in the same layout; index `j` multiplies `z^{-j}`
    /// (upper half of the range is anticausal, see [`FrequencyGrid::lag`]).
    pub fn coefficients(&self) -> Vec<Complex64> {
        self.transform_entries(dft::inverse)
    }

    pub fn from_coefficients(grid: FrequencyGrid, rows: usize, cols: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        let tmp = Self::new(grid, rows, cols, coeffs)?;
        let data = tmp.transform_entries(dft::forward);
        Self::new(grid, rows, cols, data)
    }

    fn transform_entries(&self, f: impl Fn(&mut [Complex64])) -> Vec<Complex64> {
        let n = self.len();
        let b = self.block();
        if b == 1 {
            let mut buf = self.data.clone();
            f(&mut buf);
            return buf;
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.data.len()];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for e in 0..b {
            for k in 0..n {
                buf[k] = self.data[k * b + e];
            }
            f(&mut buf);
            for k in 0..n {
                out[k * b + e] = buf[k];
            }
        }
        out
    }

    /// Largest entrywise deviation from `X(-w) = conj(X(w))`.
    pub fn conjugate_symmetry_error(&self) -> f64 {
        let b = self.block();
        let mut worst: f64 = 0.0;
        for k in 0..self.len() {
            let m = self.grid.mirror(k);
            for e in 0..b {
                let d = (self.data[k * b + e] - self.data[m * b + e].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn is_conjugate_symmetric(&self, tol: f64) -> bool {
        self.conjugate_symmetry_error() <= tol
    }

    /// Replaces the samples with the nearest conjugate-symmetric function.
    pub fn symmetrize(&mut self) {
        let b = self.block();
        let n = self.len();
        for k in 0..=n / 2 {
            let m = self.grid.mirror(k);
            for e in 0..b {
                let avg = 0.5 * (self.data[k * b + e] + self.data[m * b + e].conj());
                self.data[k * b + e] = avg;
                self.data[m * b + e] = avg.conj();
            }
        }
    }

    /// Largest pointwise Frobenius distance to `other`.
    pub fn max_distance(&self, other: &GridSamples) -> f64 {
        let d = self.sub(other);
        let b = self.block();
        (0..self.len())
            .map(|k| d.data[k * b..(k + 1) * b].iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        let b = self.block();
        (0..self.len())
            .map(|k| self.data[k * b..(k + 1) * b].iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}
