//! Small dense linear algebra.
//!
//! Everything here is sized for the matrices that show up in orientation
//! design: 2x2 and 3x3 information matrices, 2n x 2n surrogate matrices and
//! m x m noise covariances with m up to a few dozen. Storage is row-major.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use crate::error::{invalid, Error, Result};

/// Largest dimension accepted by the symmetric eigensolver.
pub const MAX_EVD_DIM: usize = 64;

/// Off-diagonal threshold (relative to the Frobenius norm) for Jacobi sweeps.
const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Condition estimate above which a matrix is treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

/// Dense row-major matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

impl Matrix {
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
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from row-major data. Panics if the length does not match.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major data has wrong length");
        Self { rows, cols, data }
    }

    /// Builds a matrix from a list of equally sized rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(invalid(format!("row {i} has {} entries, expected {cols}", r.len())));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_col(&mut self, j: usize, v: &[f64]) {
        for (i, &x) in v.iter().enumerate() {
            self[(i, j)] = x;
        }
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, x| acc.max(x.abs()))
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols, "dimension mismatch in mul_vec");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Horizontal concatenation `[self, other]`.
    pub fn hstack(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.rows, other.rows, "row mismatch in hstack");
        let mut out = Matrix::zeros(self.rows, self.cols + other.cols);
        for i in 0..self.rows {
            out.row_mut(i)[..self.cols].copy_from_slice(self.row(i));
            out.row_mut(i)[self.cols..].copy_from_slice(other.row(i));
        }
        out
    }

    /// Vertical concatenation `[self; other]`.
    pub fn vstack(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.cols, "column mismatch in vstack");
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Matrix::from_row_major(self.rows + other.rows, self.cols, data)
    }

    /// Copy of the sub-block starting at `(r0, c0)` with the given shape.
    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Matrix {
        let mut out = Matrix::zeros(rows, cols);
        for i in 0..rows {
            out.row_mut(i).copy_from_slice(&self.row(r0 + i)[c0..c0 + cols]);
        }
        out
    }

    /// `self^T * other` without materializing the transpose.
    pub fn tr_mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.rows, other.rows, "dimension mismatch in tr_mul");
        let mut out = Matrix::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let a = self.row(k);
            let b = other.row(k);
            for (i, &aki) in a.iter().enumerate() {
                if aki == 0.0 {
                    continue;
                }
                let orow = out.row_mut(i);
                for (o, &bkj) in orow.iter_mut().zip(b) {
                    *o += aki * bkj;
                }
            }
        }
        out
    }

    /// `0.5 * (self + self^T)`.
    pub fn symmetric_part(&self) -> SymMatrix {
        assert!(self.is_square(), "symmetric_part of non-square matrix");
        let n = self.rows;
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] = 0.5 * (self[(i, j)] + self[(j, i)]);
            }
        }
        SymMatrix(out)
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &Matrix {
    type Output = Matrix;
    fn mul(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.cols, rhs.rows, "dimension mismatch in matmul");
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self[(i, k)];
                if aik == 0.0 {
                    continue;
                }
                let b = rhs.row(k);
                let orow = out.row_mut(i);
                for (o, &bkj) in orow.iter_mut().zip(b) {
                    *o += aik * bkj;
                }
            }
        }
        out
    }
}

impl Add for &Matrix {
    type Output = Matrix;
    fn add(self, rhs: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &Matrix {
    type Output = Matrix;
    fn sub(self, rhs: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

/// Square matrix whose entries satisfy `a[i][j] == a[j][i]` exactly.
#[derive(Clone, PartialEq, Debug)]
pub struct SymMatrix(Matrix);

impl SymMatrix {
    /// Wraps `m`, rejecting it unless it is square and exactly symmetric.
    pub fn new(m: Matrix) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(invalid(format!(
                "expected a non-empty square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let n = m.nrows();
        for i in 0..n {
            for j in (i + 1)..n {
                if m[(i, j)] != m[(j, i)] {
                    return Err(invalid(format!(
                        "matrix is not symmetric: entry ({i},{j}) = {} but ({j},{i}) = {}",
                        m[(i, j)],
                        m[(j, i)]
                    )));
                }
            }
        }
        Ok(Self(m))
    }

    pub fn identity(n: usize) -> Self {
        Self(Matrix::identity(n))
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        Self(Matrix::from_diag(diag))
    }

    pub fn zeros(n: usize) -> Self {
        Self(Matrix::zeros(n, n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn scale(&self, s: f64) -> SymMatrix {
        SymMatrix(self.0.scale(s))
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 - &other.0)
    }

    /// `B^T * self * B`, symmetrized to absorb rounding.
    pub fn congruence(&self, b: &Matrix) -> SymMatrix {
        let sb = &self.0 * b;
        b.tr_mul(&sb).symmetric_part()
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.0[(i, i)]).collect()
    }

    pub fn is_diagonal(&self) -> bool {
        let n = self.dim();
        (0..n).all(|i| (0..n).all(|j| i == j || self.0[(i, j)] == 0.0))
    }

    /// Applies `f` to the spectrum: `V f(E) V^T`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> Result<SymMatrix> {
        Ok(sym_evd(self)?.reconstruct_with(f))
    }
}

impl Sub for &SymMatrix {
    type Output = Matrix;
    fn sub(self, rhs: &SymMatrix) -> Matrix {
        &self.0 - &rhs.0
    }
}

impl Mul for &SymMatrix {
    type Output = Matrix;
    fn mul(self, rhs: &SymMatrix) -> Matrix {
        &self.0 * &rhs.0
    }
}

impl std::ops::Deref for SymMatrix {
    type Target = Matrix;
    fn deref(&self) -> &Matrix {
        &self.0
    }
}

/// Symmetric eigendecomposition `M = V diag(values) V^T`.
#[derive(Clone, Debug)]
pub struct EvdResult {
    /// Eigenvalues sorted in descending order.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns.
    pub vectors: Matrix,
}

impl EvdResult {
    pub fn reconstruct(&self) -> SymMatrix {
        self.reconstruct_with(|x| x)
    }

    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let mapped: Vec<f64> = self.values.iter().map(|&x| f(x)).collect();
        reconstruct(&self.vectors, &mapped)
    }

    pub fn max(&self) -> f64 {
        self.values[0]
    }

    pub fn min(&self) -> f64 {
        *self.values.last().expect("non-empty spectrum")
    }

    /// Ratio of the extreme eigenvalue magnitudes.
    pub fn condition(&self) -> f64 {
        let hi = self.values.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
        let lo = self.values.iter().fold(f64::INFINITY, |a, x| a.min(x.abs()));
        if lo == 0.0 {
            f64::INFINITY
        } else {
            hi / lo
        }
    }
}

/// `V diag(d) V^T` for column-orthonormal `V`.
pub fn reconstruct(v: &Matrix, d: &[f64]) -> SymMatrix {
    let n = v.nrows();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let mut s = 0.0;
            for (k, &dk) in d.iter().enumerate() {
                s += v[(i, k)] * dk * v[(j, k)];
            }
            out[(i, j)] = s;
            out[(j, i)] = s;
        }
    }
    SymMatrix(out)
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Eigenvalues come back in descending order. Each eigenvector is signed so
/// that its largest-magnitude component (first one on ties) is positive,
/// which makes the output deterministic.
pub fn sym_evd(m: &SymMatrix) -> Result<EvdResult> {
    let n = m.dim();
    if n > MAX_EVD_DIM {
        return Err(invalid(format!(
            "eigensolver supports dimension <= {MAX_EVD_DIM}, got {n}"
        )));
    }
    if !m.is_finite() {
        return Err(invalid("matrix has non-finite entries"));
    }
    let mut a = m.as_matrix().clone();
    let mut v = Matrix::identity(n);
    let scale = a.frobenius_norm();
    let tol = JACOBI_TOL * scale;

    for _ in 0..JACOBI_MAX_SWEEPS {
        if off_diagonal_norm(&a) <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // A <- J^T A J with the rotation in the (p, q) plane
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]).then(i.cmp(&j)));
    let values: Vec<f64> = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = v.col(src);
        let mut pivot = 0;
        for (k, x) in col.iter().enumerate() {
            if x.abs() > col[pivot].abs() {
                pivot = k;
            }
        }
        if col[pivot] < 0.0 {
            col.iter_mut().for_each(|x| *x = -*x);
        }
        vectors.set_col(dst, &col);
    }
    Ok(EvdResult { values, vectors })
}

/// Lower-triangular Cholesky factor `L` with `L L^T = M`.
pub fn cholesky(m: &SymMatrix) -> Result<Matrix> {
    let n = m.dim();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { pivot: j, value: d });
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// Inverse of a nonsingular symmetric matrix via its eigendecomposition.
pub fn inverse(m: &SymMatrix) -> Result<SymMatrix> {
    let evd = sym_evd(m)?;
    let condition = evd.condition();
    if !(condition < MAX_CONDITION) {
        return Err(Error::Singular { condition });
    }
    Ok(evd.reconstruct_with(|x| 1.0 / x))
}

/// Determinant as the product of eigenvalues.
pub fn det(m: &SymMatrix) -> Result<f64> {
    Ok(sym_evd(m)?.values.iter().product())
}

/// Smallest eigenvalue; a positive value certifies positive definiteness.
pub fn min_eigenvalue(m: &SymMatrix) -> Result<f64> {
    Ok(sym_evd(m)?.min())
}

pub fn is_positive_definite(m: &SymMatrix) -> bool {
    cholesky(m).is_ok()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Relative Frobenius distance `||a - b|| / ||b||` (absolute when `b` is zero).
pub fn relative_frobenius(a: &Matrix, b: &Matrix) -> f64 {
    let diff = (a - b).frobenius_norm();
    let base = b.frobenius_norm();
    if base == 0.0 {
        diff
    } else {
        diff / base
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sym(rows: &[&[f64]]) -> SymMatrix {
        SymMatrix::new(Matrix::from_rows(rows).unwrap()).unwrap()
    }

    fn random_sym(n: usize, entries: &[f64]) -> SymMatrix {
        let mut m = Matrix::zeros(n, n);
        let mut k = 0;
        for i in 0..n {
            for j in i..n {
                m[(i, j)] = entries[k];
                m[(j, i)] = entries[k];
                k += 1;
            }
        }
        SymMatrix::new(m).unwrap()
    }

    #[test]
    fn evd_identity() {
        let e = sym_evd(&SymMatrix::identity(2)).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0]);
        let vtv = e.vectors.tr_mul(&e.vectors);
        assert!(relative_frobenius(&vtv, &Matrix::identity(2)) < 1e-14);
    }

    #[test]
    fn evd_diagonal_sorted() {
        let e = sym_evd(&SymMatrix::from_diag(&[1.0, 3.0])).unwrap();
        assert_eq!(e.values, vec![3.0, 1.0]);
        assert_eq!(e.vectors, Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap());
    }

    #[test]
    fn evd_two_by_two() {
        // (2 - l)^2 - 1 = 0
        let e = sym_evd(&sym(&[&[2.0, 1.0], &[1.0, 2.0]])).unwrap();
        assert!((e.values[0] - 3.0).abs() < 1e-14);
        assert!((e.values[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn evd_rejects_non_finite() {
        let m = sym(&[&[f64::NAN, 0.0], &[0.0, 1.0]]);
        assert!(matches!(sym_evd(&m), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn evd_is_deterministic_and_sign_normalized() {
        let m = sym(&[&[4.0, -2.0, 0.5], &[-2.0, 3.0, 1.0], &[0.5, 1.0, 1.0]]);
        let a = sym_evd(&m).unwrap();
        let b = sym_evd(&m).unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(a.vectors, b.vectors);
        for j in 0..3 {
            let col = a.vectors.col(j);
            let big = col
                .iter()
                .cloned()
                .fold(0.0_f64, |x, y| if y.abs() > x.abs() { y } else { x });
            assert!(big > 0.0);
        }
    }

    #[test]
    fn symmetric_constructor_rejects_asymmetry() {
        let m = Matrix::from_rows(&[[1.0, 2.0], [2.0 + 1e-15, 1.0]]).unwrap();
        let err = SymMatrix::new(m).unwrap_err();
        assert!(err.to_string().contains("(0,1)"));
    }

    #[test]
    fn cholesky_examples() {
        let l = cholesky(&SymMatrix::identity(3)).unwrap();
        assert_eq!(l, Matrix::identity(3));
        let l = cholesky(&SymMatrix::from_diag(&[4.0, 9.0])).unwrap();
        assert_eq!(l, Matrix::from_diag(&[2.0, 3.0]));
        let m = sym(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let l = cholesky(&m).unwrap();
        let llt = &l * &l.transpose();
        assert!(relative_frobenius(&llt, &m) < 1e-12);
    }

    #[test]
    fn cholesky_names_failing_pivot() {
        let m = sym(&[&[1.0, 2.0], &[2.0, 1.0]]);
        match cholesky(&m) {
            Err(Error::NotPositiveDefinite { pivot, .. }) => assert_eq!(pivot, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(inverse(&SymMatrix::identity(2)).unwrap(), SymMatrix::identity(2));
        let inv = inverse(&SymMatrix::from_diag(&[2.0, 4.0])).unwrap();
        assert!(relative_frobenius(&inv, &Matrix::from_diag(&[0.5, 0.25])) < 1e-15);
    }

    #[test]
    fn inverse_rejects_singular() {
        let m = sym(&[&[1.0, 1.0], &[1.0, 1.0]]);
        assert!(matches!(inverse(&m), Err(Error::Singular { .. })));
    }

    #[test]
    fn inverse_round_trip_random_pd() {
        let g = Matrix::from_rows(&[
            [0.3, 1.2, -0.7, 0.1],
            [0.9, -0.4, 0.2, 1.5],
            [-1.1, 0.6, 0.8, -0.3],
            [0.2, 0.05, -0.9, 0.7],
        ])
        .unwrap();
        let m = (&g * &g.transpose())
            .symmetric_part()
            .add(&SymMatrix::identity(4).scale(0.1));
        let inv = inverse(&m).unwrap();
        let prod = &*m * &*inv;
        assert!((&prod - &Matrix::identity(4)).max_abs() < 1e-8);
    }

    proptest! {
        #[test]
        fn evd_reconstructs_and_matches_trace_det(
            n in 1usize..7,
            entries in proptest::collection::vec(-5.0f64..5.0, 28),
        ) {
            let m = random_sym(n, &entries);
            let e = sym_evd(&m).unwrap();
            let rec = e.reconstruct();
            let scale = m.frobenius_norm().max(1e-300);
            prop_assert!((&*rec - &*m).frobenius_norm() / scale < 1e-10);
            let vtv = e.vectors.tr_mul(&e.vectors);
            prop_assert!((&vtv - &Matrix::identity(n)).max_abs() < 1e-10);
            let tr: f64 = e.values.iter().sum();
            prop_assert!((tr - m.trace()).abs() <= 1e-10 * scale.max(1.0));
            for w in e.values.windows(2) {
                prop_assert!(w[0] >= w[1]);
            }
        }

        #[test]
        fn pd_matrices_have_positive_spectrum(
            n in 1usize..6,
            entries in proptest::collection::vec(-2.0f64..2.0, 36),
        ) {
            let g = Matrix::from_row_major(6, 6, entries).block(0, 0, n, n);
            let m = (&g * &g.transpose()).symmetric_part().add(&SymMatrix::identity(n).scale(0.05));
            let e = sym_evd(&m).unwrap();
            prop_assert!(e.min() > 0.0);
            prop_assert!(cholesky(&m).is_ok());
            let prod: f64 = e.values.iter().product();
            let d = det(&m).unwrap();
            prop_assert!((prod - d).abs() <= 1e-8 * d.abs());
            let l = cholesky(&m).unwrap();
            prop_assert!(relative_frobenius(&(&l * &l.transpose()), &m) < 1e-10);
        }
    }
}
