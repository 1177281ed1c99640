//! Dense Hermitian linear algebra.
//!
//! Everything here is dense and sized for networks of at most a few hundred
//! sensors. The complex routines serve the allocators and the outage
//! analysis; [`real`] holds the real symmetric kernels the SDP solver runs on.

pub mod real;

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Index, IndexMut};

use num_complex::Complex64;
#[allow(unused_imports)] // inherent float methods shadow these when std is linked
use num_traits::Float;

/// Relative Frobenius asymmetry tolerated when ingesting a Hermitian matrix.
pub const HERMITIAN_TOL: f64 = 1e-12;

const MAX_JACOBI_SWEEPS: usize = 80;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinalgError {
    #[error("matrix is empty")]
    Empty,
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("matrix is not Hermitian (relative asymmetry {asymmetry:e})")]
    NotHermitian { asymmetry: f64 },
    #[error("matrix is not positive definite (pivot {pivot} is {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error(
        "eigensolver did not converge after {sweeps} sweeps \
         (off-diagonal norm {off_norm:e}, Frobenius norm {norm:e}, diagonal range [{diag_min:e}, {diag_max:e}])"
    )]
    NoConvergence {
        sweeps: usize,
        off_norm: f64,
        norm: f64,
        diag_min: f64,
        diag_max: f64,
    },
}

/// Dense row-major complex matrix.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row-major data.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::DimensionMismatch {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_diag(diag: &[Complex64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, d) in diag.iter().enumerate() {
            m[(i, i)] = *d;
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn matmul(&self, rhs: &CMatrix) -> Result<CMatrix, LinalgError> {
        if self.cols != rhs.rows {
            return Err(LinalgError::DimensionMismatch {
                expected: self.cols,
                actual: rhs.rows,
            });
        }
        let mut out = CMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let rrow = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                let orow = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, r) in orow.iter_mut().zip(rrow) {
                    *o += a * r;
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Result<Vec<Complex64>, LinalgError> {
        if x.len() != self.cols {
            return Err(LinalgError::DimensionMismatch {
                expected: self.cols,
                actual: x.len(),
            });
        }
        Ok((0..self.rows)
            .map(|i| {
                self.data[i * self.cols..(i + 1) * self.cols]
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&self, s: f64) -> CMatrix {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    fn zip_with(&self, rhs: &CMatrix, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<CMatrix, LinalgError> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(LinalgError::DimensionMismatch {
                expected: self.rows * self.cols,
                actual: rhs.rows * rhs.cols,
            });
        }
        Ok(CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| f(*a, *b)).collect(),
        })
    }

    pub fn add(&self, rhs: &CMatrix) -> Result<CMatrix, LinalgError> {
        self.zip_with(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &CMatrix) -> Result<CMatrix, LinalgError> {
        self.zip_with(rhs, |a, b| a - b)
    }

    fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:+.6e}{:+.6e}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// A square complex matrix equal to its own conjugate transpose.
///
/// Construction checks the asymmetry against [`HERMITIAN_TOL`] and then
/// replaces the input by its exact Hermitian part, so diagonals are real.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(CMatrix);

impl HermitianMatrix {
    pub fn new(m: CMatrix) -> Result<Self, LinalgError> {
        if m.rows != m.cols {
            return Err(LinalgError::NotSquare {
                rows: m.rows,
                cols: m.cols,
            });
        }
        if m.rows == 0 {
            return Err(LinalgError::Empty);
        }
        if !m.is_finite() {
            return Err(LinalgError::NonFinite);
        }
        let n = m.rows;
        let norm = m.frobenius_norm();
        let mut asym = 0.0;
        for i in 0..n {
            for j in 0..n {
                asym += (m[(i, j)] - m[(j, i)].conj()).norm_sqr();
            }
        }
        let asym = asym.sqrt();
        if asym > HERMITIAN_TOL * norm {
            return Err(LinalgError::NotHermitian { asymmetry: asym / norm });
        }
        Ok(Self(Self::hermitian_part(&m)))
    }

    fn hermitian_part(m: &CMatrix) -> CMatrix {
        CMatrix::from_fn(m.rows, m.cols, |i, j| {
            if i == j {
                Complex64::new(m[(i, i)].re, 0.0)
            } else {
                (m[(i, j)] + m[(j, i)].conj()) * 0.5
            }
        })
    }

    /// Takes the Hermitian part of `m` without the asymmetry check.
    pub(crate) fn from_hermitian_part(m: &CMatrix) -> Self {
        Self(Self::hermitian_part(m))
    }

    pub fn zeros(n: usize) -> Self {
        Self(CMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self(CMatrix::identity(n))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let d: Vec<Complex64> = diag.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Self(CMatrix::from_diag(&d))
    }

    /// `v v^H`.
    pub fn rank_one(v: &[Complex64]) -> Self {
        let n = v.len();
        Self(CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(v[i].norm_sqr(), 0.0)
            } else {
                v[i] * v[j].conj()
            }
        }))
    }

    pub fn dim(&self) -> usize {
        self.0.rows
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.0[(i, j)]
    }

    /// `x^H A x`, which is real for Hermitian `A`.
    pub fn quad_form(&self, x: &[Complex64]) -> f64 {
        let n = self.dim();
        debug_assert_eq!(x.len(), n);
        let mut acc = 0.0;
        for i in 0..n {
            let row = &self.0.data[i * n..(i + 1) * n];
            let ax: Complex64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
            acc += (x[i].conj() * ax).re;
        }
        acc
    }

    /// `tr(A B)`, real for two Hermitian matrices.
    pub fn trace_product(&self, other: &HermitianMatrix) -> f64 {
        let n = self.dim();
        debug_assert_eq!(other.dim(), n);
        // tr(AB) = sum_ij A_ij B_ji = sum_ij A_ij conj(B_ij)
        self.0
            .data
            .iter()
            .zip(&other.0.data)
            .map(|(a, b)| (a * b.conj()).re)
            .sum()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.frobenius_norm()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.scale(s))
    }

    pub fn add(&self, rhs: &HermitianMatrix) -> Result<Self, LinalgError> {
        Ok(Self(self.0.add(&rhs.0)?))
    }

    pub fn sub(&self, rhs: &HermitianMatrix) -> Result<Self, LinalgError> {
        Ok(Self(self.0.sub(&rhs.0)?))
    }

    /// Leading principal `k x k` submatrix.
    pub fn leading_block(&self, k: usize) -> Self {
        assert!(k <= self.dim() && k > 0);
        Self(CMatrix::from_fn(k, k, |i, j| self.0[(i, j)]))
    }

    /// Embeds `self` in the top-left corner of a `(n+1) x (n+1)` matrix with
    /// `corner` in the last diagonal slot and zeros elsewhere.
    pub fn bordered(&self, corner: f64) -> Self {
        let n = self.dim();
        Self(CMatrix::from_fn(n + 1, n + 1, |i, j| {
            if i < n && j < n {
                self.0[(i, j)]
            } else if i == n && j == n {
                Complex64::new(corner, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        }))
    }

    /// `B A B^H` for a square `B`.
    pub fn congruence(&self, b: &CMatrix) -> Result<Self, LinalgError> {
        let m = b.matmul(&self.0)?.matmul(&b.adjoint())?;
        Ok(Self(Self::hermitian_part(&m)))
    }
}

/// Full spectrum of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    /// Eigenvalues, sorted descending.
    pub values: Vec<f64>,
    /// Unit eigenvectors stored as columns, in the order of `values`.
    pub vectors: CMatrix,
}

impl EigenDecomposition {
    pub fn vector(&self, k: usize) -> Vec<Complex64> {
        self.vectors.column(k)
    }

    pub fn reconstruct(&self) -> CMatrix {
        let n = self.values.len();
        let mut out = CMatrix::zeros(n, n);
        for (k, &lam) in self.values.iter().enumerate() {
            for i in 0..n {
                let vik = self.vectors[(i, k)] * lam;
                for j in 0..n {
                    out[(i, j)] += vik * self.vectors[(j, k)].conj();
                }
            }
        }
        out
    }
}

/// Rotates `v` so that its largest-magnitude entry (first one on ties) is
/// real and positive.
pub fn normalize_phase(v: &mut [Complex64]) {
    let mut best = 0;
    let mut best_mag = -1.0;
    for (i, z) in v.iter().enumerate() {
        let m = z.norm();
        if m > best_mag {
            best_mag = m;
            best = i;
        }
    }
    if best_mag > 0.0 {
        let rot = v[best].conj() / best_mag;
        for z in v.iter_mut() {
            *z *= rot;
        }
        v[best] = Complex64::new(v[best].re, 0.0);
    }
}

/// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi
/// rotations.
///
/// Values come back descending. Each eigenvector has its largest-magnitude
/// component made real and positive, so repeated calls are bit-identical.
pub fn herm_eig(a: &HermitianMatrix) -> Result<EigenDecomposition, LinalgError> {
    let n = a.dim();
    let mut m = a.0.data.clone();
    let mut v = CMatrix::identity(n);
    let norm = a.frobenius_norm();
    let zero = Complex64::new(0.0, 0.0);

    if norm > 0.0 {
        let mut converged = false;
        let mut sweeps = 0;
        while sweeps < MAX_JACOBI_SWEEPS {
            let off = off_diagonal_norm(&m, n);
            if off <= 1e-15 * norm {
                converged = true;
                break;
            }
            sweeps += 1;
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = m[p * n + q];
                    let r = apq.norm();
                    if r == 0.0 {
                        continue;
                    }
                    let app = m[p * n + p].re;
                    let aqq = m[q * n + q].re;
                    let phase = apq / r;
                    let theta = (aqq - app) / (2.0 * r);
                    let t = if theta.is_finite() {
                        let t = 1.0 / (theta.abs() + (theta * theta + 1.0).sqrt());
                        if theta < 0.0 {
                            -t
                        } else {
                            t
                        }
                    } else {
                        0.0
                    };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    // U = diag(1, conj(phase)) * [[c, s], [-s, c]]
                    let u_pp = Complex64::new(c, 0.0);
                    let u_pq = Complex64::new(s, 0.0);
                    let u_qp = -phase.conj() * s;
                    let u_qq = phase.conj() * c;

                    for k in 0..n {
                        let akp = m[k * n + p];
                        let akq = m[k * n + q];
                        m[k * n + p] = akp * u_pp + akq * u_qp;
                        m[k * n + q] = akp * u_pq + akq * u_qq;
                    }
                    for k in 0..n {
                        let apk = m[p * n + k];
                        let aqk = m[q * n + k];
                        m[p * n + k] = u_pp.conj() * apk + u_qp.conj() * aqk;
                        m[q * n + k] = u_pq.conj() * apk + u_qq.conj() * aqk;
                    }
                    m[p * n + q] = zero;
                    m[q * n + p] = zero;
                    m[p * n + p] = Complex64::new(app - t * r, 0.0);
                    m[q * n + q] = Complex64::new(aqq + t * r, 0.0);

                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = vkp * u_pp + vkq * u_qp;
                        v[(k, q)] = vkp * u_pq + vkq * u_qq;
                    }
                }
            }
        }
        if !converged {
            let diag: Vec<f64> = (0..n).map(|i| m[i * n + i].re).collect();
            return Err(LinalgError::NoConvergence {
                sweeps,
                off_norm: off_diagonal_norm(&m, n),
                norm,
                diag_min: diag.iter().cloned().fold(f64::INFINITY, f64::min),
                diag_max: diag.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            });
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j * n + j].re.total_cmp(&m[i * n + i].re));
    let values: Vec<f64> = order.iter().map(|&i| m[i * n + i].re).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (k, &src) in order.iter().enumerate() {
        let mut col = v.column(src);
        normalize_phase(&mut col);
        for (i, z) in col.into_iter().enumerate() {
            vectors[(i, k)] = z;
        }
    }
    Ok(EigenDecomposition { values, vectors })
}

fn off_diagonal_norm(m: &[Complex64], n: usize) -> f64 {
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc += m[i * n + j].norm_sqr();
            }
        }
    }
    acc.sqrt()
}

/// Lower Cholesky factor `L` with `A = L L^H`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: CMatrix,
}

impl Cholesky {
    pub fn factor(a: &HermitianMatrix) -> Result<Self, LinalgError> {
        let n = a.dim();
        let mut l = CMatrix::zeros(n, n);
        for j in 0..n {
            let mut d = a.get(j, j).re;
            for k in 0..j {
                d -= l[(j, k)].norm_sqr();
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(LinalgError::NotPositiveDefinite { pivot: j, value: d });
            }
            let ljj = d.sqrt();
            l[(j, j)] = Complex64::new(ljj, 0.0);
            for i in (j + 1)..n {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = s / ljj;
            }
        }
        Ok(Self { l })
    }

    pub fn lower(&self) -> &CMatrix {
        &self.l
    }

    /// Solves `L y = b`.
    pub fn solve_lower(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.l.rows;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[(i, k)] * y[k];
            }
            y[i] = s / self.l[(i, i)].re;
        }
        y
    }

    /// Solves `L^H x = y`.
    pub fn solve_upper(&self, y: &[Complex64]) -> Vec<Complex64> {
        let n = self.l.rows;
        let mut x = y.to_vec();
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s -= self.l[(k, i)].conj() * x[k];
            }
            x[i] = s / self.l[(i, i)].re;
        }
        x
    }

    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        self.solve_upper(&self.solve_lower(b))
    }
}

/// Solves `A x = b` for Hermitian positive definite `A`.
pub fn solve_hpd(a: &HermitianMatrix, b: &[Complex64]) -> Result<Vec<Complex64>, LinalgError> {
    if b.len() != a.dim() {
        return Err(LinalgError::DimensionMismatch {
            expected: a.dim(),
            actual: b.len(),
        });
    }
    Ok(Cholesky::factor(a)?.solve(b))
}

/// Maximizes `x^H N x / x^H D x` over nonzero `x`.
///
/// Returns the maximum (the largest eigenvalue of `D^{-1/2} N D^{-1/2}`) and
/// a unit-norm maximizer under the [`normalize_phase`] convention.
pub fn rayleigh_max(
    numerator: &HermitianMatrix,
    denominator: &HermitianMatrix,
) -> Result<(f64, Vec<Complex64>), LinalgError> {
    let n = numerator.dim();
    if denominator.dim() != n {
        return Err(LinalgError::DimensionMismatch {
            expected: n,
            actual: denominator.dim(),
        });
    }
    let chol = Cholesky::factor(denominator)?;
    // S = L^{-1} N L^{-H}
    let mut y = CMatrix::zeros(n, n);
    for j in 0..n {
        let col = chol.solve_lower(&numerator.as_matrix().column(j));
        for i in 0..n {
            y[(i, j)] = col[i];
        }
    }
    let yh = y.adjoint();
    let mut s = CMatrix::zeros(n, n);
    for j in 0..n {
        let col = chol.solve_lower(&yh.column(j));
        for i in 0..n {
            s[(i, j)] = col[i];
        }
    }
    let s = HermitianMatrix(HermitianMatrix::hermitian_part(&s));
    let eig = herm_eig(&s)?;
    let mut x = chol.solve_upper(&eig.vector(0));
    let norm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for z in x.iter_mut() {
        *z /= norm;
    }
    normalize_phase(&mut x);
    Ok((eig.values[0], x))
}

pub fn vec_norm(x: &[Complex64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `x^H y`.
pub fn inner(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}
