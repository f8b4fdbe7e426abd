//! Dense complex matrices and the bipartite tensor operations the probability
//! pipelines are built from.
//!
//! Every bipartite operator uses the same index convention: system 1 is the
//! slow (left) tensor factor, so the basis vector `|i>_1 |j>_2` has flat index
//! `i * d2 + j`. Transposes are taken in the computational basis.

use std::fmt;
use std::ops::{Index, IndexMut};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative tolerance used when deciding whether an eigenvalue is
/// "negative enough" to reject a matrix as not positive semidefinite.
pub const PSD_RELATIVE_TOL: f64 = 1e-10;

/// Absolute Hermiticity tolerance for unit-scale operators.
pub const HERMITICITY_TOL: f64 = 1e-10;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// `1e-10 * (1 + max |lambda|)`.
pub fn psd_tolerance(eigenvalues: &[f64]) -> f64 {
    let scale = eigenvalues.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    PSD_RELATIVE_TOL * (1.0 + scale)
}

/// Dense row-major complex matrix.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                let z = self[(r, c)];
                write!(f, "{:+.6}{:+.6}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        assert!(r < self.rows && c < self.cols, "index ({r}, {c}) out of bounds");
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        assert!(r < self.rows && c < self.cols, "index ({r}, {c}) out of bounds");
        &mut self.data[r * self.cols + c]
    }
}

impl ComplexMatrix {
    /// Build a matrix from row-major entries. Fails if the entry count does not
    /// match the shape or any entry is NaN or infinite.
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::dim(format!("matrix shape {rows}x{cols} has a zero extent")));
        }
        if data.len() != rows * cols {
            return Err(Error::dim(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / cols,
                col: pos % cols,
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Build from a list of rows. All rows must have the same length.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != n_cols) {
            return Err(Error::dim(format!(
                "row {bad} has {} entries, expected {n_cols}",
                rows[bad].len()
            )));
        }
        Self::new(n_rows, n_cols, rows.concat())
    }

    /// Build from real-valued rows.
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let rows: Vec<Vec<Complex64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| Complex64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "zero-sized matrix");
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = Complex64::new(v, 0.0);
        }
        m
    }

    /// The matrix unit `|row><col|` in dimension `n`.
    pub fn unit(n: usize, row: usize, col: usize) -> Self {
        let mut m = Self::zeros(n, n);
        m[(row, col)] = ONE;
        m
    }

    /// Outer product `|ket><bra|`.
    pub fn outer(ket: &[Complex64], bra: &[Complex64]) -> Self {
        let mut m = Self::zeros(ket.len(), bra.len());
        for (i, k) in ket.iter().enumerate() {
            for (j, b) in bra.iter().enumerate() {
                m[(i, j)] = k * b.conj();
            }
        }
        m
    }

    /// Construct entrywise from a closure.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m[(r, c)] = f(r, c);
            }
        }
        m
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

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<Complex64>> {
        self.data.chunks(self.cols).map(<[Complex64]>::to_vec).collect()
    }

    pub fn dagger(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(Complex64::conj).collect(),
        }
    }

    pub fn trace(&self) -> Result<Complex64> {
        self.require_square("trace")?;
        Ok((0..self.rows).map(|i| self[(i, i)]).sum())
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::dim(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a == ZERO {
                    continue;
                }
                let row = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[r * other.cols..(r + 1) * other.cols];
                for (d, b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.require_same_shape(other, "add")?;
        Ok(self.zip_with(other, |a, b| a + b))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.require_same_shape(other, "sub")?;
        Ok(self.zip_with(other, |a, b| a - b))
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * factor).collect(),
        }
    }

    pub fn scale_real(&self, factor: f64) -> Self {
        self.scale(Complex64::new(factor, 0.0))
    }

    /// `(m + m^dagger) / 2`.
    pub fn hermitian_part(&self) -> Result<Self> {
        self.require_square("hermitian_part")?;
        Ok(Self::from_fn(self.rows, self.cols, |r, c| {
            (self[(r, c)] + self[(c, r)].conj()) * 0.5
        }))
    }

    /// Largest `|m_rc - conj(m_cr)|`.
    pub fn hermiticity_deviation(&self) -> Result<f64> {
        self.require_square("hermiticity check")?;
        let mut worst = 0.0_f64;
        for r in 0..self.rows {
            for c in r..self.cols {
                worst = worst.max((self[(r, c)] - self[(c, r)].conj()).norm());
            }
        }
        Ok(worst)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(Complex64::norm_sqr).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }

    /// Frobenius norm of `self - other`.
    pub fn frobenius_distance(&self, other: &Self) -> Result<f64> {
        Ok(self.sub(other)?.frobenius_norm())
    }

    fn zip_with(&self, other: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| f(*a, *b)).collect(),
        }
    }

    fn require_square(&self, what: &str) -> Result<()> {
        if self.is_square() {
            Ok(())
        } else {
            Err(Error::dim(format!(
                "{what} needs a square matrix, got {}x{}",
                self.rows, self.cols
            )))
        }
    }

    fn require_same_shape(&self, other: &Self, what: &str) -> Result<()> {
        if self.shape() == other.shape() {
            Ok(())
        } else {
            Err(Error::dim(format!(
                "{what}: shapes {}x{} and {}x{} differ",
                self.rows, self.cols, other.rows, other.cols
            )))
        }
    }
}

/// Kronecker product; the left operand is the slow index.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (br, bc) = b.shape();
    ComplexMatrix::from_fn(a.rows * br, a.cols * bc, |r, c| {
        a[(r / br, c / bc)] * b[(r % br, c % bc)]
    })
}

/// Dimensions of the two tensor factors `S1 (x) S2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BipartiteDims {
    d1: usize,
    d2: usize,
}

impl BipartiteDims {
    pub fn new(d1: usize, d2: usize) -> Result<Self> {
        if d1 < 2 || d2 < 2 {
            return Err(Error::dim(format!(
                "bipartite dimensions must both be at least 2, got ({d1}, {d2})"
            )));
        }
        Ok(Self { d1, d2 })
    }

    pub fn d1(self) -> usize {
        self.d1
    }

    pub fn d2(self) -> usize {
        self.d2
    }

    pub fn total(self) -> usize {
        self.d1 * self.d2
    }

    /// Flat index of `|i>_1 |j>_2`.
    pub fn flat(self, i: usize, j: usize) -> usize {
        i * self.d2 + j
    }

    fn check(self, m: &ComplexMatrix) -> Result<()> {
        let n = self.total();
        if m.shape() != (n, n) {
            return Err(Error::dim(format!(
                "expected a {n}x{n} operator on {}x{}, got {}x{}",
                self.d1,
                self.d2,
                m.rows(),
                m.cols()
            )));
        }
        Ok(())
    }
}

/// Which tensor factor an operation acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    First,
    Second,
}

/// Trace out `which`. The result lives on the other factor.
pub fn partial_trace(m: &ComplexMatrix, dims: BipartiteDims, which: Subsystem) -> Result<ComplexMatrix> {
    dims.check(m)?;
    let (d1, d2) = (dims.d1, dims.d2);
    Ok(match which {
        Subsystem::First => ComplexMatrix::from_fn(d2, d2, |j, l| {
            (0..d1).map(|i| m[(dims.flat(i, j), dims.flat(i, l))]).sum()
        }),
        Subsystem::Second => ComplexMatrix::from_fn(d1, d1, |i, k| {
            (0..d2).map(|j| m[(dims.flat(i, j), dims.flat(k, j))]).sum()
        }),
    })
}

/// Transpose the indices of one tensor factor in the computational basis.
pub fn partial_transpose(m: &ComplexMatrix, dims: BipartiteDims, which: Subsystem) -> Result<ComplexMatrix> {
    dims.check(m)?;
    let d2 = dims.d2;
    let n = dims.total();
    Ok(ComplexMatrix::from_fn(n, n, |r, c| {
        let (i, j) = (r / d2, r % d2);
        let (k, l) = (c / d2, c % d2);
        match which {
            Subsystem::First => m[(dims.flat(k, j), dims.flat(i, l))],
            Subsystem::Second => m[(dims.flat(i, l), dims.flat(k, j))],
        }
    }))
}

/// Eigendecomposition of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Column `k` is the eigenvector of `values[k]`.
    pub vectors: ComplexMatrix,
}

impl HermitianEigen {
    /// `V f(diag) V^dagger`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.values.len();
        let mapped: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        ComplexMatrix::from_fn(n, n, |r, c| {
            (0..n)
                .map(|k| self.vectors[(r, k)] * self.vectors[(c, k)].conj() * mapped[k])
                .sum()
        })
    }
}

/// Eigendecomposition of the Hermitian part of `m`, after checking that `m`
/// is Hermitian to within `1e-10 * (1 + max |m_ij|)`.
pub fn hermitian_eigen(m: &ComplexMatrix) -> Result<HermitianEigen> {
    let deviation = m.hermiticity_deviation()?;
    if deviation > HERMITICITY_TOL * (1.0 + m.max_abs()) {
        return Err(Error::Hermiticity { deviation });
    }
    Ok(hermitian_eigen_unchecked(&m.hermitian_part()?))
}

fn hermitian_eigen_unchecked(h: &ComplexMatrix) -> HermitianEigen {
    let n = h.rows();
    let dm = DMatrix::from_row_slice(n, n, h.as_slice());
    let eig = SymmetricEigen::new(dm);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    HermitianEigen { values, vectors }
}

/// Hermitian positive-semidefinite square root.
///
/// Eigenvalues in `[-eps, 0)` with `eps = 1e-10 * (1 + max |lambda|)` are
/// clamped to zero; anything more negative is rejected.
pub fn psd_sqrt(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = hermitian_eigen(m)?;
    let threshold = psd_tolerance(&eig.values);
    let min = eig.values.first().copied().unwrap_or(0.0);
    if min < -threshold {
        return Err(Error::Negativity {
            min_eigenvalue: min,
            threshold,
        });
    }
    eig.reconstruct_with(|v| v.max(0.0).sqrt()).hermitian_part()
}

/// Result of an entrywise comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    pub equal: bool,
    pub max_deviation: f64,
    /// Location of the largest deviation.
    pub at: (usize, usize),
}

/// Entrywise comparison: equal iff `max |a_ij - b_ij| <= tol`.
pub fn approx_eq(a: &ComplexMatrix, b: &ComplexMatrix, tol: f64) -> Result<Comparison> {
    if a.shape() != b.shape() {
        return Err(Error::dim(format!(
            "cannot compare {}x{} with {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let mut max_deviation = 0.0;
    let mut at = (0, 0);
    for (idx, (x, y)) in a.data.iter().zip(&b.data).enumerate() {
        let d = (x - y).norm();
        if d > max_deviation {
            max_deviation = d;
            at = (idx / a.cols, idx % a.cols);
        }
    }
    Ok(Comparison {
        equal: max_deviation <= tol,
        max_deviation,
        at,
    })
}
