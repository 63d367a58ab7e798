//! Complex matrix kernels shared by the rest of the crate.
//!
//! [`CMatrix`] wraps a column-major `nalgebra` matrix of `Complex64` and only
//! ever holds finite entries. Every operation returns a fresh value, so plans
//! and channel sets can be shared between threads without locking.
//!
//! Rank decisions (pseudoinverse, null space, rank) go through the SVD with a
//! threshold relative to the largest singular value, which keeps them
//! independent of the overall scale of the matrix.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CVector = DVector<C64>;

/// Relative singular-value threshold used when no explicit tolerance is given.
pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Clone, PartialEq)]
pub struct CMatrix(DMatrix<C64>);

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CMatrix {}x{} {:?}", self.rows(), self.cols(), self.0.as_slice())
    }
}

fn all_finite(m: &DMatrix<C64>) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

impl CMatrix {
    /// Builds a matrix from entries listed row by row.
    pub fn from_row_major(rows: usize, cols: usize, entries: Vec<C64>) -> Result<Self> {
        if rows * cols != entries.len() {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        Self::from_nalgebra(DMatrix::from_row_slice(rows, cols, &entries))
    }

    /// Real-valued convenience constructor, row by row.
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        let entries = rows.iter().flat_map(|row| row.iter().map(|&x| C64::new(x, 0.0))).collect();
        Self::from_row_major(r, c, entries)
    }

    pub fn from_nalgebra(m: DMatrix<C64>) -> Result<Self> {
        if !all_finite(&m) {
            return Err(Error::NonFinite);
        }
        Ok(Self(m))
    }

    /// Wraps a result computed from finite inputs. Overflow is the only way to
    /// produce a non-finite value here and is treated as a bug.
    pub(crate) fn wrap(m: DMatrix<C64>) -> Self {
        debug_assert!(all_finite(&m), "non-finite entry produced by a kernel");
        Self(m)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.0[(row, col)]
    }

    pub fn as_nalgebra(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    /// Plain transpose, no conjugation.
    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self::wrap(&self.0 * C64::new(factor, 0.0))
    }

    pub fn apply(&self, v: &CVector) -> CVector {
        assert_eq!(self.cols(), v.len(), "matrix-vector shape mismatch");
        &self.0 * v
    }

    pub fn columns(&self, start: usize, count: usize) -> Self {
        Self(self.0.columns(start, count).into_owned())
    }

    pub fn top_rows(&self, count: usize) -> Self {
        Self(self.0.rows(0, count).into_owned())
    }

    pub fn left_columns(&self, count: usize) -> Self {
        self.columns(0, count)
    }

    /// Horizontal concatenation; all blocks must share the row count.
    pub fn hcat(blocks: &[CMatrix]) -> Result<Self> {
        let Some(first) = blocks.first() else {
            return Err(Error::DimensionMismatch("empty concatenation".into()));
        };
        let rows = first.rows();
        if let Some(bad) = blocks.iter().find(|b| b.rows() != rows) {
            return Err(Error::DimensionMismatch(format!("hcat of {rows}-row and {}-row blocks", bad.rows())));
        }
        let cols = blocks.iter().map(CMatrix::cols).sum();
        let mut out = DMatrix::zeros(rows, cols);
        let mut at = 0;
        for b in blocks {
            out.columns_mut(at, b.cols()).copy_from(&b.0);
            at += b.cols();
        }
        Ok(Self(out))
    }

    /// Vertical concatenation; all blocks must share the column count.
    pub fn vcat(blocks: &[CMatrix]) -> Result<Self> {
        let transposed: Vec<CMatrix> = blocks.iter().map(CMatrix::transpose).collect();
        Ok(Self::hcat(&transposed)?.transpose())
    }

    /// `diag(self, ..., self)` with `copies` diagonal blocks.
    pub fn block_diag(&self, copies: usize) -> Self {
        let (r, c) = self.shape();
        let mut out = DMatrix::zeros(r * copies, c * copies);
        for b in 0..copies {
            out.view_mut((b * r, b * c), (r, c)).copy_from(&self.0);
        }
        Self(out)
    }

    pub fn inverse(&self) -> Result<Self> {
        if self.rows() != self.cols() {
            return Err(Error::DimensionMismatch(format!(
                "inverse of non-square {}x{} matrix",
                self.rows(),
                self.cols()
            )));
        }
        self.0
            .clone()
            .try_inverse()
            .map(Self::wrap)
            .ok_or_else(|| Error::Singular(format!("{}x{} inverse", self.rows(), self.cols())))
    }

    pub fn singular_values(&self) -> Vec<f64> {
        if self.rows() == 0 || self.cols() == 0 {
            return Vec::new();
        }
        let mut s = to_faer(&self.0).singular_values().expect(SVD_CONVERGES);
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }

    pub fn spectral_norm(&self) -> f64 {
        self.singular_values().first().copied().unwrap_or(0.0)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    /// `σ_max / σ_min`; infinite for rank-deficient matrices.
    pub fn condition_number(&self) -> f64 {
        let s = self.singular_values();
        match (s.first(), s.last()) {
            (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
            _ => f64::INFINITY,
        }
    }

    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.0.iter().zip(other.0.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// Rows of `[re, im]` pairs, the on-disk matrix encoding.
    pub fn to_rows(&self) -> Vec<Vec<[f64; 2]>> {
        (0..self.rows()).map(|i| (0..self.cols()).map(|j| [self.0[(i, j)].re, self.0[(i, j)].im]).collect()).collect()
    }

    pub fn from_rows(rows: &[Vec<[f64; 2]>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Format("ragged matrix rows".into()));
        }
        let entries = rows.iter().flatten().map(|&[re, im]| C64::new(re, im)).collect();
        Self::from_row_major(r, c, entries)
    }
}

impl<'a> Mul<&'a CMatrix> for &'a CMatrix {
    type Output = CMatrix;

    fn mul(self, rhs: &'a CMatrix) -> CMatrix {
        assert_eq!(self.cols(), rhs.rows(), "matrix product shape mismatch");
        CMatrix::wrap(&self.0 * &rhs.0)
    }
}

impl<'a> Add<&'a CMatrix> for &'a CMatrix {
    type Output = CMatrix;

    fn add(self, rhs: &'a CMatrix) -> CMatrix {
        assert_eq!(self.shape(), rhs.shape(), "matrix sum shape mismatch");
        CMatrix::wrap(&self.0 + &rhs.0)
    }
}

impl<'a> Sub<&'a CMatrix> for &'a CMatrix {
    type Output = CMatrix;

    fn sub(self, rhs: &'a CMatrix) -> CMatrix {
        assert_eq!(self.shape(), rhs.shape(), "matrix difference shape mismatch");
        CMatrix::wrap(&self.0 - &rhs.0)
    }
}

impl Serialize for CMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<[f64; 2]>>::deserialize(deserializer)?;
        CMatrix::from_rows(&rows).map_err(de::Error::custom)
    }
}

/// One CN(0, 1) sample: independent real and imaginary parts with variance 1/2.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Matrix with i.i.d. CN(0, 1) entries, drawn in row-major order.
pub fn random_gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    let entries: Vec<C64> = (0..rows * cols).map(|_| complex_gaussian(rng)).collect();
    CMatrix::wrap(DMatrix::from_row_slice(rows, cols, &entries))
}

pub fn random_gaussian_vector<R: Rng + ?Sized>(len: usize, rng: &mut R) -> CVector {
    CVector::from_iterator(len, (0..len).map(|_| complex_gaussian(rng)))
}

const SVD_CONVERGES: &str = "SVD of a finite matrix converges";

fn to_faer(a: &DMatrix<C64>) -> faer::Mat<C64> {
    faer::Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

fn from_faer(a: faer::MatRef<'_, C64>) -> DMatrix<C64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

struct Svd {
    u: DMatrix<C64>,
    /// Descending.
    sigma: Vec<f64>,
    /// Right singular vectors as columns (`V`, not `Vᴴ`).
    v: DMatrix<C64>,
}

// nalgebra's complex SVD can return a wrong factorisation for exactly
// rank-deficient input, so every decomposition goes through faer.
fn svd(a: &DMatrix<C64>, full: bool) -> Svd {
    let m = to_faer(a);
    let dec = if full { m.svd() } else { m.thin_svd() }.expect(SVD_CONVERGES);
    Svd { u: from_faer(dec.U()), sigma: dec.S().column_vector().iter().map(|z| z.re).collect(), v: from_faer(dec.V()) }
}

fn cutoff(sigma: &[f64], tol: f64) -> f64 {
    tol * sigma.iter().copied().fold(0.0, f64::max)
}

/// Moore–Penrose pseudoinverse with the default relative tolerance.
pub fn pseudo_inverse(a: &CMatrix) -> CMatrix {
    pseudo_inverse_with_tol(a, DEFAULT_TOL)
}

pub fn pseudo_inverse_with_tol(a: &CMatrix, tol: f64) -> CMatrix {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return CMatrix::zeros(n, m);
    }
    let svd = svd(&a.0, false);
    let cut = cutoff(&svd.sigma, tol);
    let mut out = DMatrix::<C64>::zeros(n, m);
    for (k, &s) in svd.sigma.iter().enumerate() {
        if s > cut && s > 0.0 {
            let vk = svd.v.column(k);
            let uk = svd.u.column(k);
            out += (vk * uk.adjoint()) * C64::new(1.0 / s, 0.0);
        }
    }
    CMatrix::wrap(out)
}

/// Orthonormal basis of `{x : A x = 0}`; singular values at or below
/// `tol · σ_max` count as zero. Returns a `cols × 0` matrix for trivial kernels.
pub fn null_space_basis(a: &CMatrix, tol: f64) -> CMatrix {
    let (m, n) = a.shape();
    if n == 0 {
        return CMatrix::zeros(0, 0);
    }
    if m == 0 {
        return CMatrix::identity(n);
    }
    let svd = svd(&a.0, true);
    let cut = cutoff(&svd.sigma, tol);
    let keep: Vec<usize> = (0..n).filter(|&k| svd.sigma.get(k).is_none_or(|&s| s <= cut)).collect();
    let mut out = DMatrix::zeros(n, keep.len());
    for (dst, &k) in keep.iter().enumerate() {
        out.set_column(dst, &svd.v.column(k));
    }
    CMatrix::wrap(out)
}

/// Number of singular values strictly above `tol · σ_max`.
pub fn numeric_rank(a: &CMatrix, tol: f64) -> usize {
    let s = a.singular_values();
    let cut = cutoff(&s, tol);
    s.iter().filter(|&&x| x > cut && x > 0.0).count()
}

/// Orthonormal basis for the column span, rank decided at `tol · σ_max`.
pub fn column_space_basis(a: &CMatrix, tol: f64) -> CMatrix {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return CMatrix::zeros(m, 0);
    }
    let svd = svd(&a.0, false);
    let cut = cutoff(&svd.sigma, tol);
    let keep: Vec<usize> = (0..svd.sigma.len()).filter(|&k| svd.sigma[k] > cut && svd.sigma[k] > 0.0).collect();
    let mut out = DMatrix::zeros(m, keep.len());
    for (dst, &k) in keep.iter().enumerate() {
        out.set_column(dst, &svd.u.column(k));
    }
    CMatrix::wrap(out)
}

/// Gram–Schmidt via QR: columns of the result span the same space as the
/// (assumed full column rank) input and are orthonormal.
pub fn orthonormalize_columns(a: &CMatrix) -> CMatrix {
    assert!(a.cols() <= a.rows(), "cannot orthonormalize more columns than rows");
    CMatrix::wrap(a.0.clone().qr().q())
}

/// Orthogonal projector onto the column span of `a`.
pub fn projector(a: &CMatrix) -> CMatrix {
    let q = column_space_basis(a, DEFAULT_TOL);
    &q * &q.adjoint()
}

/// `‖P_A − P_B‖₂` for the orthogonal projectors onto the two column spans.
pub fn subspace_distance(a: &CMatrix, b: &CMatrix) -> Result<f64> {
    if a.rows() != b.rows() {
        return Err(Error::DimensionMismatch(format!("subspaces of C^{} and C^{}", a.rows(), b.rows())));
    }
    Ok((&projector(a) - &projector(b)).spectral_norm())
}
