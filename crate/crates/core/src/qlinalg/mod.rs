//! Small dense complex linear algebra.
//!
//! Everything here works on row-major storage. Tensor products follow the
//! Kronecker convention `index(i, j) = i * dim(b) + j`, which every other
//! module relies on when it lays out `Q_s ⊗ Lab (⊗ Bob)`.

mod params;
mod random;

use std::fmt;
use std::ops::{Index, IndexMut};

pub use num_complex::Complex64 as C64;
pub use params::{decode_unitary, encode_unitary, su_param_count, UnitaryParams};
pub use random::{
    random_simplex_weights, random_state, random_unitary, seeded_state, seeded_unitary, stream_rng,
    StreamRng,
};

use crate::error::{Error, Result};

/// Entrywise tolerance for `U†U = 1` and projector checks.
pub const EPS_UNITARY: f64 = 1e-9;
/// Tolerance on `Σ|a_i|² = 1`.
pub const EPS_NORM: f64 = 1e-9;
/// Tolerance for probability assertions.
pub const EPS_PROB: f64 = 1e-9;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Dense vector of complex amplitudes.
#[derive(Clone, PartialEq)]
pub struct ComplexVector {
    amps: Vec<C64>,
}

impl ComplexVector {
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::InvalidDimension("vector must have dim >= 1".into()));
        }
        Ok(Self { amps })
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "dim must be positive");
        Self {
            amps: vec![ZERO; dim],
        }
    }

    /// Canonical basis vector `e_index`.
    pub fn basis(dim: usize, index: usize) -> Self {
        assert!(
            index < dim,
            "basis index {index} out of range for dim {dim}"
        );
        let mut v = Self::zeros(dim);
        v.amps[index] = ONE;
        v
    }

    pub fn from_real(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.amps
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.amps
    }

    pub fn iter(&self) -> std::slice::Iter<'_, C64> {
        self.amps.iter()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm_sqr() - 1.0).abs() <= tol
    }

    /// Returns `self / ‖self‖`; fails on the zero vector.
    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n < 1e-300 || !n.is_finite() {
            return Err(Error::NotNormalized(n * n));
        }
        Ok(self.scale(C64::new(1.0 / n, 0.0)))
    }

    /// `⟨self|other⟩`, antilinear in `self`.
    pub fn inner(&self, other: &Self) -> C64 {
        assert_eq!(self.dim(), other.dim(), "inner product dimension mismatch");
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn scale(&self, c: C64) -> Self {
        Self {
            amps: self.amps.iter().map(|a| a * c).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim(), other.dim());
        Self {
            amps: self
                .amps
                .iter()
                .zip(&other.amps)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.dim(), other.dim());
        Self {
            amps: self
                .amps
                .iter()
                .zip(&other.amps)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    /// `self += c * other`
    pub fn axpy(&mut self, c: C64, other: &Self) {
        assert_eq!(self.dim(), other.dim());
        for (a, b) in self.amps.iter_mut().zip(&other.amps) {
            *a += c * b;
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim(), other.dim());
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

impl Index<usize> for ComplexVector {
    type Output = C64;
    fn index(&self, i: usize) -> &C64 {
        &self.amps[i]
    }
}

impl IndexMut<usize> for ComplexVector {
    fn index_mut(&mut self, i: usize) -> &mut C64 {
        &mut self.amps[i]
    }
}

impl fmt::Debug for ComplexVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.amps.iter()).finish()
    }
}

/// Dense complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
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

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.data[i * cols + j] = f(i, j);
            }
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<C64>>) -> Result<Self> {
        let r = rows.len();
        if r == 0 {
            return Err(Error::InvalidDimension("matrix must have >= 1 row".into()));
        }
        let c = rows[0].len();
        if c == 0 {
            return Err(Error::InvalidDimension(
                "matrix must have >= 1 column".into(),
            ));
        }
        if let Some(bad) = rows.iter().find(|row| row.len() != c) {
            return Err(Error::DimensionMismatch {
                expected: c,
                actual: bad.len(),
            });
        }
        Ok(Self {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        Self::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&x| C64::new(x, 0.0)).collect())
                .collect(),
        )
    }

    /// Matrix whose j-th column is `columns[j]`.
    pub fn from_columns(columns: &[ComplexVector]) -> Result<Self> {
        let Some(first) = columns.first() else {
            return Err(Error::InvalidDimension("no columns".into()));
        };
        let rows = first.dim();
        if let Some(bad) = columns.iter().find(|c| c.dim() != rows) {
            return Err(Error::DimensionMismatch {
                expected: rows,
                actual: bad.dim(),
            });
        }
        Ok(Self::from_fn(rows, columns.len(), |i, j| columns[j][i]))
    }

    /// Diagonal matrix with the given entries.
    pub fn diagonal(entries: &[C64]) -> Self {
        let n = entries.len();
        Self::from_fn(n, n, |i, j| if i == j { entries[i] } else { ZERO })
    }

    /// `|u⟩⟨v|`
    pub fn outer(u: &ComplexVector, v: &ComplexVector) -> Self {
        Self::from_fn(u.dim(), v.dim(), |i, j| u[i] * v[j].conj())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> ComplexVector {
        ComplexVector {
            amps: (0..self.rows).map(|i| self[(i, j)]).collect(),
        }
    }

    pub fn to_rows(&self) -> Vec<Vec<C64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, c: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| a * c).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.assert_same_shape(other);
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.assert_same_shape(other);
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let orow = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn apply(&self, v: &ComplexVector) -> ComplexVector {
        assert_eq!(self.cols, v.dim(), "apply dimension mismatch");
        ComplexVector {
            amps: (0..self.rows)
                .map(|i| self.row(i).iter().zip(v.iter()).map(|(a, b)| a * b).sum())
                .collect(),
        }
    }

    /// `self · m · self†`
    pub fn conjugate(&self, m: &Self) -> Self {
        self.matmul(m).matmul(&self.adjoint())
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.assert_same_shape(other);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.is_square()
            && (0..self.rows)
                .all(|i| (i..self.cols).all(|j| (self[(i, j)] - self[(j, i)].conj()).norm() <= tol))
    }

    /// `U†U = 1` entrywise within `tol`.
    pub fn is_unitary(&self, tol: f64) -> bool {
        self.is_square()
            && self
                .adjoint()
                .matmul(self)
                .max_abs_diff(&Self::identity(self.rows))
                <= tol
    }

    /// `P = P†` and `P² = P` within `tol`.
    pub fn is_projector(&self, tol: f64) -> bool {
        self.is_hermitian(tol) && self.matmul(self).max_abs_diff(self) <= tol
    }

    /// Eigen-decomposition of a Hermitian matrix: ascending eigenvalues and
    /// the matching orthonormal eigenvectors as columns.
    pub fn hermitian_eigen(&self) -> (Vec<f64>, ComplexMatrix) {
        assert!(
            self.is_square(),
            "eigen-decomposition needs a square matrix"
        );
        let n = self.rows;
        let m = nalgebra::DMatrix::from_fn(n, n, |i, j| {
            // symmetrize so tiny asymmetries do not leak into the solver
            (self[(i, j)] + self[(j, i)].conj()) * 0.5
        });
        let eig = nalgebra::SymmetricEigen::new(m);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = Self::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
        (values, vectors)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.hermitian_eigen().0[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        *self.hermitian_eigen().0.last().expect("non-empty matrix")
    }

    pub fn determinant(&self) -> C64 {
        assert!(self.is_square());
        let n = self.rows;
        nalgebra::DMatrix::from_fn(n, n, |i, j| self[(i, j)]).determinant()
    }

    fn assert_same_shape(&self, other: &Self) {
        assert!(
            self.rows == other.rows && self.cols == other.cols,
            "shape mismatch: {}x{} vs {}x{}",
            self.rows,
            self.cols,
            other.rows,
            other.cols
        );
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

/// Kronecker product.
pub trait Tensor {
    fn tensor(&self, other: &Self) -> Self;
}

impl Tensor for ComplexVector {
    fn tensor(&self, other: &Self) -> Self {
        let mut amps = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.amps {
            amps.extend(other.amps.iter().map(|b| a * b));
        }
        Self { amps }
    }
}

impl Tensor for ComplexMatrix {
    fn tensor(&self, other: &Self) -> Self {
        let (br, bc) = (other.rows, other.cols);
        Self::from_fn(self.rows * br, self.cols * bc, |i, j| {
            self[(i / br, j / bc)] * other[(i % br, j % bc)]
        })
    }
}

pub fn tensor<T: Tensor>(a: &T, b: &T) -> T {
    a.tensor(b)
}

/// `|v⟩⟨v|` for a normalized `v`.
pub fn projector(v: &ComplexVector) -> Result<ComplexMatrix> {
    if !v.is_normalized(EPS_NORM) {
        return Err(Error::NotNormalized(v.norm_sqr()));
    }
    Ok(ComplexMatrix::outer(v, v))
}

/// Orthonormalizes `vectors` in order (modified Gram–Schmidt with one
/// re-orthogonalization pass), dropping vectors that are numerically in the
/// span of earlier ones.
pub fn gram_schmidt(vectors: &[ComplexVector]) -> Vec<ComplexVector> {
    let mut out: Vec<ComplexVector> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &out {
                let c = q.inner(&w);
                w.axpy(-c, q);
            }
        }
        if w.norm() > 1e-10 {
            out.push(w.normalized().expect("norm checked above"));
        }
    }
    out
}

/// Unitary whose first column is `first` (normalized). The remaining columns
/// come from Gram–Schmidt over the canonical basis in index order.
pub fn complete_to_unitary(first: &ComplexVector) -> Result<ComplexMatrix> {
    let first = first.normalized()?;
    let dim = first.dim();
    let mut seeds = Vec::with_capacity(dim + 1);
    seeds.push(first);
    seeds.extend((0..dim).map(|i| ComplexVector::basis(dim, i)));
    let cols = gram_schmidt(&seeds);
    debug_assert_eq!(cols.len(), dim);
    ComplexMatrix::from_columns(&cols)
}

/// A unitary `V` with `V·source = target`, both normalized.
pub fn unitary_mapping(source: &ComplexVector, target: &ComplexVector) -> Result<ComplexMatrix> {
    if source.dim() != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: source.dim(),
            actual: target.dim(),
        });
    }
    let ws = complete_to_unitary(source)?;
    let wt = complete_to_unitary(target)?;
    Ok(wt.matmul(&ws.adjoint()))
}
