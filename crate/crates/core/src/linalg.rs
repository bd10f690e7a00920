//! Small dense real and complex matrices.
//!
//! Everything here is sized for the handful of unknowns carried by a relaxation
//! system (n up to ~16): partial-pivoting LU, Cholesky, cyclic Jacobi for
//! symmetric eigenvalues and a scaling-and-squaring matrix exponential.

use std::fmt;
use std::ops::{Add, Div, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative pivot threshold used by [`Matrix::lu`].
pub const PIVOT_THRESHOLD: f64 = 1e-14;

/// Off-diagonal stopping threshold for the Jacobi eigensolver.
pub const JACOBI_TOL: f64 = 1e-13;

/// Squarings beyond this depth are reported as overflow.
pub const MAX_SQUARINGS: u32 = 64;

const EXPM_TAYLOR_DEGREE: usize = 13;
const EXPM_SCALED_NORM: f64 = 0.5;

/// Field of matrix entries: `f64` or `Complex64`.
pub trait Scalar:
    Copy
    + PartialEq
    + fmt::Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + 'static
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_real(x: f64) -> Self;
    fn modulus(self) -> f64;
    fn conj(self) -> Self;
    fn is_finite(self) -> bool;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_real(x: f64) -> Self {
        x
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn conj(self) -> Self {
        self
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn is_finite(self) -> bool {
        Complex64::is_finite(self)
    }
}

/// Dense row-major matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

pub type RealMatrix = Matrix<f64>;
pub type ComplexMatrix = Matrix<Complex64>;

impl<T: Scalar> Matrix<T> {
    /// Builds a matrix from row-major entries, rejecting empty shapes and non-finite values.
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::DimensionMismatch(format!(
                "matrix must be at least 1x1, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / cols,
                col: pos % cols,
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Self::new(nrows, ncols, rows.concat())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        assert!(rows > 0 && cols > 0, "matrix must be at least 1x1");
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |_, _| T::zero())
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { T::one() } else { T::zero() })
    }

    pub fn diagonal(values: &[T]) -> Self {
        Self::from_fn(values.len(), values.len(), |i, j| {
            if i == j {
                values[i]
            } else {
                T::zero()
            }
        })
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

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|x| x * s)
    }

    /// Copy of the block `rows x cols` starting at `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |i, j| self[(r0 + i, c0 + j)])
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let idx = i * other.cols + j;
                    out.data[idx] = out.data[idx] + a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix applied to vector of length {}",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        Ok((0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(x)
                    .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
            })
            .collect())
    }

    fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    /// Maximum absolute column sum.
    pub fn norm_1(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].modulus()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn norm_frobenius(&self) -> f64 {
        self.data
            .iter()
            .map(|x| x.modulus().powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.modulus()).fold(0.0, f64::max)
    }

    /// `max |a_ij - conj(a_ji)|`; infinite for non-square input.
    pub fn symmetry_residual(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst = 0.0_f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).modulus());
            }
        }
        worst
    }

    fn require_square(&self) -> Result<()> {
        if self.is_square() {
            Ok(())
        } else {
            Err(Error::NotSquare {
                rows: self.rows,
                cols: self.cols,
            })
        }
    }

    /// Partial-pivoting LU factorization `P·A = L·U`.
    pub fn lu(&self) -> Result<Lu<T>> {
        self.require_square()?;
        let n = self.rows;
        let threshold = PIVOT_THRESHOLD * self.max_abs();
        let mut lu = self.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        for k in 0..n {
            let (p, pivot_mag) =
                (k..n)
                    .map(|i| (i, lu[(i, k)].modulus()))
                    .fold(
                        (k, -1.0),
                        |best, cur| if cur.1 > best.1 { cur } else { best },
                    );
            if pivot_mag <= threshold || pivot_mag == 0.0 {
                return Err(Error::SingularMatrix {
                    index: k,
                    pivot: pivot_mag,
                    threshold,
                });
            }
            if p != k {
                for j in 0..n {
                    lu.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let pivot = lu[(k, k)];
            for i in (k + 1)..n {
                let factor = lu[(i, k)] / pivot;
                lu[(i, k)] = factor;
                if factor == T::zero() {
                    continue;
                }
                for j in (k + 1)..n {
                    let v = lu[(k, j)];
                    lu[(i, j)] = lu[(i, j)] - factor * v;
                }
            }
        }
        Ok(Lu { lu, perm, sign })
    }

    pub fn inverse(&self) -> Result<Self> {
        let lu = self.lu()?;
        let n = self.rows;
        let mut inv = Self::zeros(n, n);
        let mut e = vec![T::zero(); n];
        for j in 0..n {
            e.iter_mut().for_each(|x| *x = T::zero());
            e[j] = T::one();
            let col = lu.solve(&e)?;
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        Ok(inv)
    }

    /// `exp(t·self)` by scaling and squaring around a degree-13 Taylor kernel.
    ///
    /// The scaled argument has 1-norm at most 1/2, where the truncated series is
    /// accurate to double precision; the number of squarings grows with
    /// `log2 ‖tM‖₁` and is unbounded up to [`MAX_SQUARINGS`].
    pub fn expm(&self, t: f64) -> Result<Self> {
        self.require_square()?;
        if !t.is_finite() {
            return Err(Error::Overflow(format!("non-finite time {t}")));
        }
        let n = self.rows;
        let scaled_norm = self.norm_1() * t.abs();
        if !scaled_norm.is_finite() {
            return Err(Error::Overflow("‖tM‖₁ is not finite".into()));
        }
        let squarings = if scaled_norm <= EXPM_SCALED_NORM {
            0
        } else {
            (scaled_norm / EXPM_SCALED_NORM).log2().ceil() as u32
        };
        if squarings > MAX_SQUARINGS {
            return Err(Error::Overflow(format!(
                "{squarings} squarings needed for ‖tM‖₁ = {scaled_norm:e}"
            )));
        }
        let x = self.scale(T::from_real(t / 2f64.powi(squarings as i32)));
        let id = Self::identity(n);
        let mut acc = id.clone();
        for j in (1..=EXPM_TAYLOR_DEGREE).rev() {
            acc = x
                .matmul(&acc)?
                .scale(T::from_real(1.0 / j as f64))
                .add(&id)?;
        }
        for _ in 0..squarings {
            acc = acc.matmul(&acc)?;
        }
        if acc.data.iter().any(|x| !x.is_finite()) {
            return Err(Error::Overflow("non-finite entries after squaring".into()));
        }
        Ok(acc)
    }
}

impl RealMatrix {
    pub fn to_complex(&self) -> ComplexMatrix {
        self.map(Complex64::from)
    }

    /// `(A + Aᵀ)/2`.
    pub fn symmetric_part(&self) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| {
            0.5 * (self[(i, j)] + self[(j, i)])
        })
    }

    /// Lower-triangular Cholesky factor. On failure returns the index of the
    /// first non-positive pivot together with its value.
    pub fn cholesky(&self, tol: f64) -> Result<Self, (usize, f64)> {
        let n = self.rows;
        let mut l = Self::zeros(n, n);
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if d <= tol || !d.is_finite() {
                return Err((j, d));
            }
            let djj = d.sqrt();
            l[(j, j)] = djj;
            for i in (j + 1)..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(l)
    }

    /// Eigen-decomposition of the symmetric part by cyclic Jacobi rotations.
    pub fn symmetric_eigen(&self) -> Result<SymmetricEigen> {
        self.require_square()?;
        let n = self.rows;
        let mut a = self.symmetric_part();
        let mut v = Self::identity(n);
        let scale = a.norm_frobenius().max(f64::MIN_POSITIVE);
        for _sweep in 0..100 {
            let off = off_diagonal_norm(&a);
            if off < JACOBI_TOL * scale || off == 0.0 {
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
        order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
        let values = order.iter().map(|&i| a[(i, i)]).collect();
        let vectors = Self::from_fn(n, n, |i, j| v[(i, order[j])]);
        Ok(SymmetricEigen { values, vectors })
    }
}

fn off_diagonal_norm(a: &RealMatrix) -> f64 {
    let mut s = 0.0;
    for i in 0..a.rows {
        for j in 0..a.cols {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl<T: fmt::Debug> fmt::Debug for Matrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", &self.data[i * self.cols..(i + 1) * self.cols])?;
        }
        write!(f, "]")
    }
}

/// Packed LU factors with row permutation.
#[derive(Debug, Clone)]
pub struct Lu<T> {
    lu: Matrix<T>,
    perm: Vec<usize>,
    sign: f64,
}

impl<T: Scalar> Lu<T> {
    pub fn dim(&self) -> usize {
        self.lu.rows
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn permutation_sign(&self) -> f64 {
        self.sign
    }

    pub fn lower(&self) -> Matrix<T> {
        Matrix::from_fn(self.dim(), self.dim(), |i, j| match i.cmp(&j) {
            std::cmp::Ordering::Greater => self.lu[(i, j)],
            std::cmp::Ordering::Equal => T::one(),
            std::cmp::Ordering::Less => T::zero(),
        })
    }

    pub fn upper(&self) -> Matrix<T> {
        Matrix::from_fn(self.dim(), self.dim(), |i, j| {
            if i <= j {
                self.lu[(i, j)]
            } else {
                T::zero()
            }
        })
    }

    pub fn determinant(&self) -> T {
        (0..self.dim()).fold(T::from_real(self.sign), |acc, i| acc * self.lu[(i, i)])
    }

    pub fn solve(&self, rhs: &[T]) -> Result<Vec<T>> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x)?;
        Ok(x)
    }

    /// Overwrites `x` (holding the right-hand side) with the solution.
    pub fn solve_in_place(&self, x: &mut [T]) -> Result<()> {
        let n = self.dim();
        if x.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "rhs of length {} for {n}x{n} system",
                x.len()
            )));
        }
        let b: Vec<T> = self.perm.iter().map(|&p| x[p]).collect();
        x.copy_from_slice(&b);
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s = s - self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s = s - self.lu[(i, j)] * x[j];
            }
            x[i] = s / self.lu[(i, i)];
        }
        Ok(())
    }
}

/// Solves `matrix · x = rhs`.
pub fn lu_solve<T: Scalar>(matrix: &Matrix<T>, rhs: &[T]) -> Result<Vec<T>> {
    matrix.lu()?.solve(rhs)
}

/// `exp(t·matrix)`.
pub fn matrix_exponential(matrix: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
    matrix.expm(t)
}

/// Eigenvalues in ascending order with orthonormal eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: RealMatrix,
}

/// Reason a definiteness test failed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DefinitenessWitness {
    /// `|a_ij - a_ji|` above tolerance.
    Asymmetric {
        row: usize,
        col: usize,
        residual: f64,
    },
    /// Zero-based index and value of the first Cholesky pivot at or below tolerance.
    Pivot { index: usize, value: f64 },
    /// Largest eigenvalue above tolerance.
    Eigenvalue { value: f64 },
}

/// Outcome of a definiteness test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefinitenessCheck {
    pub passed: bool,
    pub witness: Option<DefinitenessWitness>,
}

fn worst_asymmetry(m: &RealMatrix) -> (usize, usize, f64) {
    let mut worst = (0, 0, 0.0);
    for i in 0..m.rows() {
        for j in (i + 1)..m.cols() {
            let r = (m[(i, j)] - m[(j, i)]).abs();
            if r > worst.2 {
                worst = (i, j, r);
            }
        }
    }
    worst
}

/// Symmetric positive-definiteness via symmetry residual and Cholesky pivots.
pub fn is_spd(matrix: &RealMatrix, tol: f64) -> DefinitenessCheck {
    if !matrix.is_square() {
        return DefinitenessCheck {
            passed: false,
            witness: Some(DefinitenessWitness::Asymmetric {
                row: matrix.rows(),
                col: matrix.cols(),
                residual: f64::INFINITY,
            }),
        };
    }
    let (row, col, residual) = worst_asymmetry(matrix);
    if residual > tol {
        return DefinitenessCheck {
            passed: false,
            witness: Some(DefinitenessWitness::Asymmetric { row, col, residual }),
        };
    }
    match matrix.symmetric_part().cholesky(tol) {
        Ok(_) => DefinitenessCheck {
            passed: true,
            witness: None,
        },
        Err((index, value)) => DefinitenessCheck {
            passed: false,
            witness: Some(DefinitenessWitness::Pivot { index, value }),
        },
    }
}

/// Negative semi-definiteness: largest Jacobi eigenvalue at most `tol`.
pub fn is_negative_semidefinite(matrix: &RealMatrix, tol: f64) -> Result<DefinitenessCheck> {
    let residual = matrix.symmetry_residual();
    if residual > tol {
        return Err(Error::NotSymmetric { residual, tol });
    }
    let eig = matrix.symmetric_eigen()?;
    let top = eig.values.last().copied().unwrap_or(0.0);
    Ok(if top <= tol {
        DefinitenessCheck {
            passed: true,
            witness: None,
        }
    } else {
        DefinitenessCheck {
            passed: false,
            witness: Some(DefinitenessWitness::Eigenvalue { value: top }),
        }
    })
}

/// Largest eigenvalue of the symmetric part.
pub fn max_symmetric_eigenvalue(matrix: &RealMatrix) -> Result<f64> {
    Ok(*matrix.symmetric_eigen()?.values.last().expect("non-empty"))
}

/// Smallest eigenvalue of the symmetric part.
pub fn min_symmetric_eigenvalue(matrix: &RealMatrix) -> Result<f64> {
    Ok(matrix.symmetric_eigen()?.values[0])
}
