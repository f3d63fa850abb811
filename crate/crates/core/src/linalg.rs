//! Dense complex matrix kernel.
//!
//! Products, adjoints and structural helpers are implemented directly on a
//! row-major [`ComplexMatrix`]. Spectral routines (SVD, Hermitian eigensolver)
//! are delegated to `faer` and re-exposed through sorted, owned results.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use faer::linalg::solvers::DenseSolveCore;
use faer::{Mat, Side};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Default tolerance for algebraic residuals.
pub const ALGEBRAIC_TOL: f64 = 1e-9;
/// Default tolerance for iterative estimates.
pub const ITERATIVE_TOL: f64 = 1e-6;
/// Default relative threshold for numerical rank decisions.
pub const RANK_TOL: f64 = 1e-8;
/// Guard on condition numbers of Gram operators and isomorphism matrices.
pub const CONDITION_LIMIT: f64 = 1e8;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixWire", into = "MatrixWire")]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

#[derive(Serialize, Deserialize)]
struct MatrixWire {
    rows: usize,
    cols: usize,
    data: Vec<[f64; 2]>,
}

impl From<ComplexMatrix> for MatrixWire {
    fn from(m: ComplexMatrix) -> Self {
        MatrixWire {
            rows: m.rows,
            cols: m.cols,
            data: m.data.iter().map(|z| [z.re, z.im]).collect(),
        }
    }
}

impl TryFrom<MatrixWire> for ComplexMatrix {
    type Error = Error;

    fn try_from(w: MatrixWire) -> Result<Self> {
        let data = w.data.iter().map(|p| C64::new(p[0], p[1])).collect();
        ComplexMatrix::new(w.rows, w.cols, data)
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self.get(i, j);
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::DimensionMismatch(format!(
                "matrix must have positive shape, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(ComplexMatrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { ONE } else { ZERO })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        ComplexMatrix { rows, cols, data }
    }

    /// Real matrix from row-major entries.
    pub fn from_real(rows: usize, cols: usize, entries: &[f64]) -> Self {
        assert_eq!(entries.len(), rows * cols, "entry count mismatch");
        ComplexMatrix {
            rows,
            cols,
            data: entries.iter().map(|&x| C64::new(x, 0.0)).collect(),
        }
    }

    pub fn from_complex(rows: usize, cols: usize, entries: &[C64]) -> Self {
        assert_eq!(entries.len(), rows * cols, "entry count mismatch");
        ComplexMatrix {
            rows,
            cols,
            data: entries.to_vec(),
        }
    }

    /// The matrix unit `e_ij` in `M_n`.
    pub fn matrix_unit(n: usize, i: usize, j: usize) -> Self {
        let mut m = Self::zeros(n, n);
        m.set(i, j, ONE);
        m
    }

    pub fn diagonal(entries: &[C64]) -> Self {
        let n = entries.len();
        Self::from_fn(n, n, |i, j| if i == j { entries[i] } else { ZERO })
    }

    pub fn real_diagonal(entries: &[f64]) -> Self {
        let n = entries.len();
        Self::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(entries[i], 0.0)
            } else {
                ZERO
            }
        })
    }

    /// Column vector from entries.
    pub fn column(entries: &[C64]) -> Self {
        Self::from_complex(entries.len(), 1, entries)
    }

    pub fn random_gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        Self::from_fn(rows, cols, |_, _| complex_gaussian(rng))
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

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: C64) {
        self.data[i * self.cols + j] = value;
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn scale(&self, s: C64) -> Self {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: C64, other: &ComplexMatrix) {
        assert_eq!(self.shape(), other.shape(), "axpy shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn hermitian_part(&self) -> Self {
        (self + &self.adjoint()).scale_real(0.5)
    }

    /// Frobenius distance to the adjoint.
    pub fn hermitian_residual(&self) -> f64 {
        (self - &self.adjoint()).frobenius_norm()
    }

    pub fn kron(&self, other: &ComplexMatrix) -> Self {
        let (r2, c2) = other.shape();
        Self::from_fn(self.rows * r2, self.cols * c2, |i, j| {
            self.get(i / r2, j / c2) * other.get(i % r2, j % c2)
        })
    }

    pub fn block(&self, row0: usize, col0: usize, rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |i, j| self.get(row0 + i, col0 + j))
    }

    pub fn set_block(&mut self, row0: usize, col0: usize, block: &ComplexMatrix) {
        for i in 0..block.rows {
            for j in 0..block.cols {
                self.set(row0 + i, col0 + j, block.get(i, j));
            }
        }
    }

    /// Block-diagonal sum.
    pub fn direct_sum(blocks: &[ComplexMatrix]) -> Self {
        let rows = blocks.iter().map(|b| b.rows).sum();
        let cols = blocks.iter().map(|b| b.cols).sum();
        let mut out = Self::zeros(rows, cols);
        let (mut r, mut c) = (0, 0);
        for b in blocks {
            out.set_block(r, c, b);
            r += b.rows;
            c += b.cols;
        }
        out
    }

    /// Hilbert–Schmidt pairing `Tr(self* other)`.
    pub fn hs_inner(&self, other: &ComplexMatrix) -> C64 {
        assert_eq!(self.shape(), other.shape(), "hs_inner shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Flatten to an `rc x 1` column, row-major.
    pub fn vectorize(&self) -> Self {
        ComplexMatrix {
            rows: self.rows * self.cols,
            cols: 1,
            data: self.data.clone(),
        }
    }

    pub fn reshape(&self, rows: usize, cols: usize) -> Self {
        assert_eq!(rows * cols, self.data.len(), "reshape size mismatch");
        ComplexMatrix {
            rows,
            cols,
            data: self.data.clone(),
        }
    }

    /// Column `j` as an `rows x 1` matrix.
    pub fn column_at(&self, j: usize) -> Self {
        Self::from_fn(self.rows, 1, |i, _| self.get(i, j))
    }

    pub fn column_entries(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// Stack the given columns into a matrix.
    pub fn from_columns(rows: usize, columns: &[Vec<C64>]) -> Self {
        let cols = columns.len();
        Self::from_fn(rows, cols, |i, j| columns[j][i])
    }

    pub fn mat_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.cols, "mat_vec length mismatch");
        (0..self.rows)
            .map(|i| {
                let row = &self.data[i * self.cols..(i + 1) * self.cols];
                row.iter().zip(v).map(|(a, b)| a * b).sum()
            })
            .collect()
    }

    fn to_faer(&self) -> Mat<C64> {
        Mat::from_fn(self.rows, self.cols, |i, j| self.data[i * self.cols + j])
    }

    fn from_faer(m: faer::MatRef<'_, C64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }

    fn product(&self, other: &ComplexMatrix) -> Self {
        assert_eq!(
            self.cols, other.rows,
            "matrix product shape mismatch {:?} x {:?}",
            self.shape(),
            other.shape()
        );
        let (n, k, m) = (self.rows, self.cols, other.cols);
        let mut data = vec![ZERO; n * m];
        for i in 0..n {
            let out = &mut data[i * m..(i + 1) * m];
            for l in 0..k {
                let a = self.data[i * k + l];
                if a == ZERO {
                    continue;
                }
                let row = &other.data[l * m..(l + 1) * m];
                for (o, b) in out.iter_mut().zip(row) {
                    *o += a * b;
                }
            }
        }
        ComplexMatrix { rows: n, cols: m, data }
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.shape(), rhs.shape(), "add shape mismatch");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.shape(), rhs.shape(), "sub shape mismatch");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        self.scale_real(-1.0)
    }
}

/// Panics on a shape mismatch; use [`matmul`] for a checked product.
impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.product(rhs)
    }
}

pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn matmul(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    if a.cols != b.rows {
        return Err(Error::DimensionMismatch(format!(
            "cannot multiply {}x{} by {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    Ok(a.product(b))
}

pub fn adjoint(a: &ComplexMatrix) -> ComplexMatrix {
    a.adjoint()
}

/// Singular value decomposition with singular values sorted descending.
/// `u` is `m x k`, `v` is `n x k` with `k = min(m, n)`, and `a = u diag(s) v*`.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: ComplexMatrix,
    pub singular_values: Vec<f64>,
    pub v: ComplexMatrix,
}

pub fn svd(a: &ComplexMatrix) -> Svd {
    // factor the tall orientation and swap the factors back
    if a.rows < a.cols {
        let t = svd_tall(&a.adjoint());
        return Svd {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
        };
    }
    svd_tall(a)
}

fn svd_tall(a: &ComplexMatrix) -> Svd {
    if a.rows == 0 || a.cols == 0 {
        return Svd {
            u: ComplexMatrix::zeros(a.rows, 0),
            singular_values: Vec::new(),
            v: ComplexMatrix::zeros(a.cols, 0),
        };
    }
    let dec = a.to_faer().thin_svd().expect("svd did not converge");
    // faer returns singular values in non-increasing order
    let s = dec.S().column_vector();
    Svd {
        u: ComplexMatrix::from_faer(dec.U()),
        singular_values: (0..s.nrows()).map(|i| s[i].re).collect(),
        v: ComplexMatrix::from_faer(dec.V()),
    }
}

pub fn singular_values(a: &ComplexMatrix) -> Vec<f64> {
    if a.rows == 0 || a.cols == 0 {
        return Vec::new();
    }
    let tall = if a.rows < a.cols { a.adjoint() } else { a.clone() };
    let mut s: Vec<f64> = tall
        .to_faer()
        .singular_values()
        .expect("svd did not converge")
        .into_iter()
        .collect();
    s.sort_by(|x, y| y.partial_cmp(x).unwrap_or(std::cmp::Ordering::Equal));
    s
}

/// Largest singular value.
pub fn operator_norm(a: &ComplexMatrix) -> f64 {
    if a.data.iter().all(|z| *z == ZERO) {
        return 0.0;
    }
    singular_values(a).first().copied().unwrap_or(0.0)
}

/// Ratio of extreme singular values of a square matrix; infinite when singular.
pub fn condition_number(a: &ComplexMatrix) -> f64 {
    let s = singular_values(a);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
/// Column `k` of `vectors` is the eigenvector for `values[k]`.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl HermitianEigen {
    /// `V f(Λ) V*` for a scalar function of the spectrum.
    pub fn apply(&self, f: impl Fn(f64) -> C64) -> ComplexMatrix {
        let n = self.values.len();
        let fv: Vec<C64> = self.values.iter().map(|&x| f(x)).collect();
        let scaled = ComplexMatrix::from_fn(n, n, |i, j| self.vectors.get(i, j) * fv[j]);
        &scaled * &self.vectors.adjoint()
    }
}

fn hermitian_tolerance_ok(a: &ComplexMatrix) -> Result<()> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "Hermitian routine on a {}x{} matrix",
            a.rows, a.cols
        )));
    }
    let res = a.hermitian_residual();
    let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);
    if res > 1e-10 * scale {
        return Err(Error::NotHermitian(res / scale));
    }
    Ok(())
}

/// Eigen-decomposition of the Hermitian part without a Hermitian check.
pub fn hermitian_eigen_unchecked(a: &ComplexMatrix) -> HermitianEigen {
    let h = a.hermitian_part();
    let n = h.rows;
    if n == 0 {
        return HermitianEigen {
            values: Vec::new(),
            vectors: ComplexMatrix::zeros(0, 0),
        };
    }
    let dec = h.to_faer().self_adjoint_eigen(Side::Lower).expect("eigensolver did not converge");
    let s = dec.S().column_vector();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| s[i].re.partial_cmp(&s[j].re).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| s[i].re).collect();
    let u = dec.U();
    let vectors = ComplexMatrix::from_fn(n, n, |i, j| u[(i, order[j])]);
    HermitianEigen { values, vectors }
}

pub fn hermitian_eigen(a: &ComplexMatrix) -> Result<HermitianEigen> {
    hermitian_tolerance_ok(a)?;
    Ok(hermitian_eigen_unchecked(a))
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eig_hermitian(a: &ComplexMatrix) -> Result<f64> {
    Ok(hermitian_eigen(a)?.values[0])
}

/// Positive square root of a positive semidefinite matrix.
pub fn psd_sqrt(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = hermitian_eigen(a)?;
    let scale = eig.values.iter().map(|x| x.abs()).fold(0.0, f64::max);
    if eig.values[0] < -1e-9 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::NotPositive(eig.values[0]));
    }
    Ok(eig.apply(|x| C64::new(x.max(0.0).sqrt(), 0.0)))
}

/// Inverse square root of a positive semidefinite matrix on its support.
#[derive(Clone, Debug)]
pub struct InverseSqrt {
    pub matrix: ComplexMatrix,
    /// Number of eigenvalues treated as nonzero.
    pub support_rank: usize,
    /// Ratio of the extreme retained eigenvalues.
    pub condition: f64,
}

/// Pseudo-inverse square root: eigenvalues below `rel_tol * max` are treated as zero.
pub fn psd_inverse_sqrt(a: &ComplexMatrix, rel_tol: f64) -> Result<InverseSqrt> {
    let eig = hermitian_eigen(a)?;
    let top = eig.values.iter().copied().fold(0.0, f64::max);
    if eig.values[0] < -1e-9 * top.max(f64::MIN_POSITIVE) {
        return Err(Error::NotPositive(eig.values[0]));
    }
    let cut = rel_tol * top;
    let kept: Vec<f64> = eig.values.iter().copied().filter(|&x| x > cut).collect();
    let support_rank = kept.len();
    let condition = match kept.first() {
        Some(&lo) => top / lo,
        None => f64::INFINITY,
    };
    let matrix = eig.apply(|x| {
        if x > cut {
            C64::new(1.0 / x.sqrt(), 0.0)
        } else {
            ZERO
        }
    });
    Ok(InverseSqrt {
        matrix,
        support_rank,
        condition,
    })
}

/// Unitary `exp(i h)` for Hermitian `h`.
pub fn unitary_from_hermitian(h: &ComplexMatrix) -> ComplexMatrix {
    hermitian_eigen_unchecked(h).apply(|x| C64::from_polar(1.0, x))
}

/// Orthonormal basis of the kernel of `op`, each vector returned as a column.
pub fn nullspace(op: &ComplexMatrix) -> Vec<ComplexMatrix> {
    nullspace_with_tol(op, ALGEBRAIC_TOL)
}

/// Kernel vectors whose singular value is at most `rel_tol * ||op||`, with an
/// absolute floor of `1e-13` so rounding-level operators count as zero.
pub fn nullspace_with_tol(op: &ComplexMatrix, rel_tol: f64) -> Vec<ComplexMatrix> {
    let n = op.cols;
    // thin SVD only yields a full right factor when rows >= cols
    let padded;
    let target = if op.rows < n {
        let mut p = ComplexMatrix::zeros(n, n);
        p.set_block(0, 0, op);
        padded = p;
        &padded
    } else {
        op
    };
    let dec = svd(target);
    let top = dec.singular_values.first().copied().unwrap_or(0.0);
    let cut = (rel_tol * top).max(1e-13);
    (0..n)
        .filter(|&j| dec.singular_values[j] <= cut)
        .map(|j| dec.v.column_at(j))
        .collect()
}

/// Cached pseudo-inverse for repeated minimum-norm least-squares solves.
#[derive(Clone, Debug)]
pub struct LeastSquares {
    op: ComplexMatrix,
    pinv: ComplexMatrix,
    rank: usize,
    smallest_kept: f64,
}

impl LeastSquares {
    pub fn new(op: &ComplexMatrix) -> Self {
        Self::with_tol(op, 1e-10)
    }

    pub fn with_tol(op: &ComplexMatrix, rel_tol: f64) -> Self {
        let dec = svd(op);
        let top = dec.singular_values.first().copied().unwrap_or(0.0);
        let cut = rel_tol * top;
        let k = dec.singular_values.len();
        let inv: Vec<C64> = dec
            .singular_values
            .iter()
            .map(|&s| {
                if s > cut && s > 0.0 {
                    C64::new(1.0 / s, 0.0)
                } else {
                    ZERO
                }
            })
            .collect();
        let rank = inv.iter().filter(|z| **z != ZERO).count();
        let smallest_kept = dec
            .singular_values
            .iter()
            .copied()
            .filter(|&s| s > cut && s > 0.0)
            .fold(f64::INFINITY, f64::min);
        // pinv = V diag(1/s) U*
        let v_scaled = ComplexMatrix::from_fn(op.cols, k, |i, j| dec.v.get(i, j) * inv[j]);
        let pinv = &v_scaled * &dec.u.adjoint();
        LeastSquares {
            op: op.clone(),
            pinv,
            rank,
            smallest_kept,
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn has_full_column_rank(&self) -> bool {
        self.rank == self.op.cols
    }

    /// Smallest retained singular value.
    pub fn smallest_singular_value(&self) -> f64 {
        self.smallest_kept
    }

    /// One step of iterative refinement follows the pseudo-inverse solve.
    pub fn solve(&self, rhs: &ComplexMatrix) -> (ComplexMatrix, f64) {
        let x = &self.pinv * rhs;
        let r = rhs - &(&self.op * &x);
        let x = &x + &(&self.pinv * &r);
        let residual = (&(&self.op * &x) - rhs).frobenius_norm();
        (x, residual)
    }

    pub fn solve_vec(&self, rhs: &[C64]) -> (Vec<C64>, f64) {
        let (x, residual) = self.solve(&ComplexMatrix::from_columns(rhs.len(), &[rhs.to_vec()]));
        (x.data().to_vec(), residual)
    }
}

/// Minimum-norm least-squares solution of `op * x = rhs` with its residual norm.
pub fn solve_least_squares(op: &ComplexMatrix, rhs: &ComplexMatrix) -> (ComplexMatrix, f64) {
    LeastSquares::new(op).solve(rhs)
}

/// Inverse of a square matrix, rejected above [`CONDITION_LIMIT`].
pub fn inverse(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch("inverse of a non-square matrix".into()));
    }
    let cond = condition_number(a);
    if cond > CONDITION_LIMIT {
        return Err(Error::IllConditioned {
            what: "matrix inverse".into(),
            cond,
        });
    }
    let inv = a.to_faer().partial_piv_lu().inverse();
    Ok(ComplexMatrix::from_faer(inv.as_ref()))
}

/// Moore–Penrose pseudo-inverse.
pub fn pinv(a: &ComplexMatrix, rel_tol: f64) -> ComplexMatrix {
    LeastSquares::with_tol(a, rel_tol).pinv
}

fn stacked_columns(vectors: &[ComplexMatrix]) -> Option<ComplexMatrix> {
    let first = vectors.first()?;
    let len = first.rows * first.cols;
    let mut m = ComplexMatrix::zeros(len, vectors.len());
    for (j, v) in vectors.iter().enumerate() {
        assert_eq!(v.shape(), first.shape(), "span vectors must share a shape");
        for (i, z) in v.data.iter().enumerate() {
            m.set(i, j, *z);
        }
    }
    Some(m)
}

/// Numerical rank of the span of equally-shaped matrices; `tol` is relative
/// to the largest singular value of the stacked family.
pub fn span_rank(vectors: &[ComplexMatrix], tol: f64) -> usize {
    let Some(m) = stacked_columns(vectors) else {
        return 0;
    };
    let s = singular_values(&m);
    let top = s.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return 0;
    }
    s.iter().filter(|&&x| x > tol * top).count()
}

/// A subspace of `rows x cols` matrices with a Hilbert–Schmidt orthonormal basis.
#[derive(Clone, Debug)]
pub struct OrthonormalSpan {
    rows: usize,
    cols: usize,
    basis: Vec<ComplexMatrix>,
}

impl OrthonormalSpan {
    pub fn empty(rows: usize, cols: usize) -> Self {
        OrthonormalSpan {
            rows,
            cols,
            basis: Vec::new(),
        }
    }

    /// Orthonormal basis of the span via SVD; directions with singular value
    /// below `rel_tol * max` are discarded.
    pub fn from_vectors(rows: usize, cols: usize, vectors: &[ComplexMatrix], rel_tol: f64) -> Self {
        let Some(m) = stacked_columns(vectors) else {
            return Self::empty(rows, cols);
        };
        assert_eq!(
            (vectors[0].rows, vectors[0].cols),
            (rows, cols),
            "span shape mismatch"
        );
        let dec = svd(&m);
        let top = dec.singular_values.first().copied().unwrap_or(0.0);
        let basis = (0..dec.singular_values.len())
            .filter(|&j| top > 0.0 && dec.singular_values[j] > rel_tol * top)
            .map(|j| dec.u.column_at(j).reshape(rows, cols))
            .collect();
        OrthonormalSpan { rows, cols, basis }
    }

    /// Adopt an already orthonormal basis; fails if the Gram matrix is off identity.
    pub fn from_orthonormal(rows: usize, cols: usize, basis: Vec<ComplexMatrix>) -> Result<Self> {
        for b in &basis {
            if b.shape() != (rows, cols) {
                return Err(Error::DimensionMismatch(format!(
                    "basis element {:?}, expected {rows}x{cols}",
                    b.shape()
                )));
            }
        }
        let mut worst: f64 = 0.0;
        for (i, a) in basis.iter().enumerate() {
            for (j, b) in basis.iter().enumerate() {
                let target = if i == j { ONE } else { ZERO };
                worst = worst.max((a.hs_inner(b) - target).norm());
            }
        }
        if worst > 1e-10 {
            return Err(Error::Residual {
                what: "basis orthonormality".into(),
                residual: worst,
                tolerance: 1e-10,
            });
        }
        Ok(OrthonormalSpan { rows, cols, basis })
    }

    /// Gram–Schmidt step: adds the normalized component of `v` orthogonal to
    /// the span when it exceeds `rel_tol * ||v||`. Returns whether it grew.
    pub fn try_push(&mut self, v: &ComplexMatrix, rel_tol: f64) -> bool {
        assert_eq!(v.shape(), (self.rows, self.cols), "span shape mismatch");
        let norm = v.frobenius_norm();
        if norm == 0.0 {
            return false;
        }
        let mut w = v.clone();
        for _ in 0..2 {
            for b in &self.basis {
                let c = b.hs_inner(&w);
                w.axpy(-c, b);
            }
        }
        let rest = w.frobenius_norm();
        if rest > rel_tol * norm {
            self.basis.push(w.scale_real(1.0 / rest));
            true
        } else {
            false
        }
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn basis(&self) -> &[ComplexMatrix] {
        &self.basis
    }

    pub fn coords(&self, m: &ComplexMatrix) -> Vec<C64> {
        self.basis.iter().map(|b| b.hs_inner(m)).collect()
    }

    pub fn element(&self, coords: &[C64]) -> ComplexMatrix {
        assert_eq!(coords.len(), self.basis.len(), "coordinate length mismatch");
        let mut out = ComplexMatrix::zeros(self.rows, self.cols);
        for (c, b) in coords.iter().zip(&self.basis) {
            if *c != ZERO {
                out.axpy(*c, b);
            }
        }
        out
    }

    pub fn project(&self, m: &ComplexMatrix) -> ComplexMatrix {
        self.element(&self.coords(m))
    }

    /// Frobenius norm of the component of `m` orthogonal to the span.
    pub fn residual(&self, m: &ComplexMatrix) -> f64 {
        (m - &self.project(m)).frobenius_norm()
    }

    /// Membership with a tolerance relative to `max(1, ||m||)`.
    pub fn contains(&self, m: &ComplexMatrix, tol: f64) -> bool {
        m.shape() == (self.rows, self.cols) && self.residual(m) <= tol * m.frobenius_norm().max(1.0)
    }

    /// Check that two spans coincide, returning the worst membership residual.
    pub fn span_distance(&self, other: &OrthonormalSpan) -> f64 {
        if self.shape() != other.shape() {
            return f64::INFINITY;
        }
        if self.dim() != other.dim() {
            return f64::INFINITY;
        }
        let a = self.basis.iter().map(|b| other.residual(b)).fold(0.0, f64::max);
        let b = other.basis.iter().map(|b| self.residual(b)).fold(0.0, f64::max);
        a.max(b)
    }

    /// Matrix whose column `k` holds the coordinates of `image(basis_k)` in `target`.
    pub fn coefficient_matrix(
        &self,
        target: &OrthonormalSpan,
        mut image: impl FnMut(&ComplexMatrix) -> ComplexMatrix,
    ) -> ComplexMatrix {
        let cols: Vec<Vec<C64>> = self.basis.iter().map(|b| target.coords(&image(b))).collect();
        ComplexMatrix::from_columns(target.dim(), &cols)
    }
}
