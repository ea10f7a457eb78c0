//! Dense rank-3 tensors, dense matrices, and the multilinear primitives
//! (unfolding, folding, n-mode products, norms) everything else builds on.
//!
//! Index layout is frozen for the whole codebase and for the binary file
//! formats: element `(i, j, k)` of a `d1 x d2 x d3` tensor lives at flat
//! offset `(i * d2 + j) * d3 + k` (row-major, third index fastest). Matrices
//! are row-major. All public indices in this module are 0-based; the CSV
//! debug formats use 1-based indices.

use crate::error::{Error, Result};
use std::fmt;

/// Tensor mode selector. Modes are numbered 1..=3 as is conventional for
/// multilinear algebra.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    M1,
    M2,
    M3,
}

impl Mode {
    /// All modes in order, for sweeps.
    pub const ALL: [Mode; 3] = [Mode::M1, Mode::M2, Mode::M3];

    /// Parse a 1-based mode index.
    pub fn from_index(mode: usize) -> Result<Mode> {
        match mode {
            1 => Ok(Mode::M1),
            2 => Ok(Mode::M2),
            3 => Ok(Mode::M3),
            m => Err(Error::usage(format!("invalid tensor mode {m}, expected 1, 2 or 3"))),
        }
    }

    /// 1-based index of this mode.
    pub fn index(self) -> usize {
        match self {
            Mode::M1 => 1,
            Mode::M2 => 2,
            Mode::M3 => 3,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index())
    }
}

// ---------------------------------------------------------------------------
// DenseMatrix
// ---------------------------------------------------------------------------

/// Dense row-major `f64` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Build from a row-major data vector. Panics if the length is wrong.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length must be rows*cols");
        Self { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn col(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    /// Matrix product `self * other`. Panics on dimension mismatch; callers
    /// on data-dependent paths validate shapes first.
    ///
    /// Column-tiled so the touched block of `other` stays cache-resident,
    /// and processed four output rows at a time so each loaded row of
    /// `other` feeds four accumulator streams. Per output element the
    /// accumulation order stays plain ascending-k, so blocking does not
    /// change results.
    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        const TILE: usize = 1024;
        let n = other.cols;
        let kk = self.cols;
        let mut out = DenseMatrix::zeros(self.rows, n);
        let mut j0 = 0;
        while j0 < n {
            let j1 = (j0 + TILE).min(n);
            let width = j1 - j0;
            let mut i = 0;
            while i + 4 <= self.rows {
                let (r0, r1, r2, r3) = four_rows_mut(&mut out.data, n, i, j0, width);
                for k in 0..kk {
                    let a0 = self.data[i * kk + k];
                    let a1 = self.data[(i + 1) * kk + k];
                    let a2 = self.data[(i + 2) * kk + k];
                    let a3 = self.data[(i + 3) * kk + k];
                    let brow = &other.data[k * n + j0..k * n + j1];
                    for (j, &b) in brow.iter().enumerate() {
                        r0[j] += a0 * b;
                        r1[j] += a1 * b;
                        r2[j] += a2 * b;
                        r3[j] += a3 * b;
                    }
                }
                i += 4;
            }
            while i < self.rows {
                let arow = &self.data[i * kk..(i + 1) * kk];
                let orow = &mut out.data[i * n + j0..i * n + j1];
                for (k, &a) in arow.iter().enumerate() {
                    let brow = &other.data[k * n + j0..k * n + j1];
                    for (o, &b) in orow.iter_mut().zip(brow) {
                        *o += a * b;
                    }
                }
                i += 1;
            }
            j0 = j1;
        }
        out
    }

    /// `self^T * other` without materializing the transpose.
    pub fn matmul_tn(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.rows, other.rows, "matmul_tn dimension mismatch");
        let mut out = DenseMatrix::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let arow = self.row(k);
            let brow = other.row(k);
            for (i, &a) in arow.iter().enumerate() {
                let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self * other^T` without materializing the transpose.
    pub fn matmul_nt(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.cols, "matmul_nt dimension mismatch");
        let mut out = DenseMatrix::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let arow = self.row(i);
            let orow = &mut out.data[i * other.rows..(i + 1) * other.rows];
            for (j, o) in orow.iter_mut().enumerate() {
                let brow = other.row(j);
                let mut s = 0.0;
                for (&a, &b) in arow.iter().zip(brow) {
                    s += a * b;
                }
                *o += s;
            }
        }
        out
    }

    pub fn transposed(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    pub fn add(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.shape(), other.shape(), "matrix add shape mismatch");
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.shape(), other.shape(), "matrix sub shape mismatch");
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &DenseMatrix) {
        assert_eq!(self.shape(), other.shape(), "matrix add shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Largest absolute entry of `self^T self - I`; orthonormality check.
    pub fn orthonormality_defect(&self) -> f64 {
        let gram = self.matmul_tn(self);
        let mut worst = 0.0f64;
        for i in 0..gram.rows {
            for j in 0..gram.cols {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram.get(i, j) - target).abs());
            }
        }
        worst
    }

    /// First `k` columns as a new matrix.
    pub fn take_cols(&self, k: usize) -> DenseMatrix {
        assert!(k <= self.cols);
        DenseMatrix::from_fn(self.rows, k, |i, j| self.get(i, j))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Four disjoint row segments `[i..i+4) x [j0..j0+width)` of a row-major
/// buffer with row stride `n`.
#[allow(clippy::type_complexity)]
fn four_rows_mut(
    data: &mut [f64],
    n: usize,
    i: usize,
    j0: usize,
    width: usize,
) -> (&mut [f64], &mut [f64], &mut [f64], &mut [f64]) {
    let (_, rest) = data.split_at_mut(i * n + j0);
    let (r0, rest) = rest.split_at_mut(width);
    let (_, rest) = rest.split_at_mut(n - width);
    let (r1, rest) = rest.split_at_mut(width);
    let (_, rest) = rest.split_at_mut(n - width);
    let (r2, rest) = rest.split_at_mut(width);
    let (_, rest) = rest.split_at_mut(n - width);
    let (r3, _) = rest.split_at_mut(width);
    (r0, r1, r2, r3)
}

// ---------------------------------------------------------------------------
// DenseTensor3
// ---------------------------------------------------------------------------

/// Dense rank-3 `f64` tensor with the frozen `(i * d2 + j) * d3 + k` layout.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor3 {
    dims: (usize, usize, usize),
    data: Vec<f64>,
}

impl DenseTensor3 {
    pub fn zeros(d1: usize, d2: usize, d3: usize) -> Self {
        Self {
            dims: (d1, d2, d3),
            data: vec![0.0; d1 * d2 * d3],
        }
    }

    /// Build from a flat data vector in the documented layout. Panics if the
    /// length is wrong.
    pub fn from_vec(dims: (usize, usize, usize), data: Vec<f64>) -> Self {
        assert_eq!(
            data.len(),
            dims.0 * dims.1 * dims.2,
            "tensor data length must be d1*d2*d3"
        );
        Self { dims, data }
    }

    pub fn from_fn(
        dims: (usize, usize, usize),
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(dims.0 * dims.1 * dims.2);
        for i in 0..dims.0 {
            for j in 0..dims.1 {
                for k in 0..dims.2 {
                    data.push(f(i, j, k));
                }
            }
        }
        Self { dims, data }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    /// Dimension of `mode`.
    pub fn dim(&self, mode: Mode) -> usize {
        match mode {
            Mode::M1 => self.dims.0,
            Mode::M2 => self.dims.1,
            Mode::M3 => self.dims.2,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        debug_assert!(i < self.dims.0 && j < self.dims.1 && k < self.dims.2);
        (i * self.dims.1 + j) * self.dims.2 + k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.offset(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let o = self.offset(i, j, k);
        self.data[o] = v;
    }

    pub fn scale(&self, s: f64) -> DenseTensor3 {
        DenseTensor3 {
            dims: self.dims,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    pub fn sub(&self, other: &DenseTensor3) -> DenseTensor3 {
        assert_eq!(self.dims, other.dims, "tensor sub shape mismatch");
        DenseTensor3 {
            dims: self.dims,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

// ---------------------------------------------------------------------------
// Unfolding / folding / products / norms
// ---------------------------------------------------------------------------

/// Column index of element `(i, j, k)` in the mode-n unfolding.
///
/// Columns enumerate the two remaining modes with the lower-numbered mode
/// varying fastest (the Kolda-Bader ordering):
/// mode 1 -> `j + k*d2`, mode 2 -> `i + k*d1`, mode 3 -> `i + j*d1`.
#[inline]
fn unfold_col(mode: Mode, dims: (usize, usize, usize), i: usize, j: usize, k: usize) -> usize {
    match mode {
        Mode::M1 => j + k * dims.1,
        Mode::M2 => i + k * dims.0,
        Mode::M3 => i + j * dims.0,
    }
}

/// Mode-n unfolding: rows index `mode`, columns the remaining modes in the
/// ordering documented at [`unfold_col`].
pub fn unfold(t: &DenseTensor3, mode: Mode) -> DenseMatrix {
    let (d1, d2, d3) = t.dims();
    let rows = t.dim(mode);
    let cols = d1 * d2 * d3 / rows.max(1);
    let mut m = DenseMatrix::zeros(rows, cols);
    for i in 0..d1 {
        for j in 0..d2 {
            for k in 0..d3 {
                let r = match mode {
                    Mode::M1 => i,
                    Mode::M2 => j,
                    Mode::M3 => k,
                };
                let c = unfold_col(mode, t.dims(), i, j, k);
                m.set(r, c, t.get(i, j, k));
            }
        }
    }
    m
}

/// Inverse of [`unfold`]: `fold(unfold(t, m), m, t.dims()) == t` exactly.
pub fn fold(m: &DenseMatrix, mode: Mode, dims: (usize, usize, usize)) -> Result<DenseTensor3> {
    let rows = match mode {
        Mode::M1 => dims.0,
        Mode::M2 => dims.1,
        Mode::M3 => dims.2,
    };
    let cols = dims.0 * dims.1 * dims.2 / rows.max(1);
    if m.shape() != (rows, cols) {
        return Err(Error::usage(format!(
            "fold: matrix shape {}x{} inconsistent with dims {:?} at mode {}",
            m.rows(),
            m.cols(),
            dims,
            mode
        )));
    }
    let mut t = DenseTensor3::zeros(dims.0, dims.1, dims.2);
    for i in 0..dims.0 {
        for j in 0..dims.1 {
            for k in 0..dims.2 {
                let r = match mode {
                    Mode::M1 => i,
                    Mode::M2 => j,
                    Mode::M3 => k,
                };
                let c = unfold_col(mode, dims, i, j, k);
                t.set(i, j, k, m.get(r, c));
            }
        }
    }
    Ok(t)
}

/// n-mode product `t x_mode u`: contracts `mode` of `t` with the columns of
/// `u`, replacing that dimension by `u.rows()`. Computed as
/// `fold(u * unfold(t, mode), mode, new_dims)`.
pub fn mode_n_product(t: &DenseTensor3, u: &DenseMatrix, mode: Mode) -> Result<DenseTensor3> {
    if u.cols() != t.dim(mode) {
        return Err(Error::usage(format!(
            "mode_n_product: matrix has {} cols but tensor mode {} has dimension {}",
            u.cols(),
            mode,
            t.dim(mode)
        )));
    }
    let (d1, d2, d3) = t.dims();
    let new_dims = match mode {
        Mode::M1 => (u.rows(), d2, d3),
        Mode::M2 => (d1, u.rows(), d3),
        Mode::M3 => (d1, d2, u.rows()),
    };
    let product = u.matmul(&unfold(t, mode));
    fold(&product, mode, new_dims)
}

/// Square root of the sum of squared entries.
pub fn frobenius_norm(t: &DenseTensor3) -> f64 {
    t.data().iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Sum of absolute entries.
pub fn l1_norm(t: &DenseTensor3) -> f64 {
    t.data().iter().map(|x| x.abs()).sum()
}
