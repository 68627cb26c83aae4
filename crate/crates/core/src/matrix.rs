//! Small dense complex matrices.
//!
//! Every matrix-valued object of the reduction (circulation matrices, momentum
//! values, algebra and group elements) is at most `(N-1) x (N-1)` for a handful
//! of vortices, so the kernels here favour accuracy and simplicity: cyclic
//! Jacobi for Hermitian eigenproblems, partial-pivoting LU for determinants and
//! inverses, and scaling-and-squaring with a long Taylor series for the
//! exponential.

use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Relative tolerance for treating an input as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Square complex matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "matrix dimension must be positive");
        Self { dim, data: vec![ZERO; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Builds a matrix from row-major entries, rejecting non-square or
    /// non-finite input.
    pub fn from_row_major(dim: usize, data: Vec<Complex64>) -> Result<Self> {
        if dim == 0 || data.len() != dim * dim {
            return Err(Error::Validation(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                data.len()
            )));
        }
        if data.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::Validation("matrix has non-finite entries".into()));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Validation("matrix rows must form a square".into()));
        }
        Self::from_row_major(dim, rows.concat())
    }

    pub fn from_real(dim: usize, data: &[f64]) -> Result<Self> {
        Self::from_row_major(dim, data.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn diagonal(entries: &[Complex64]) -> Self {
        let mut m = Self::zeros(entries.len());
        for (i, &e) in entries.iter().enumerate() {
            m[(i, i)] = e;
        }
        m
    }

    /// `u v*`
    pub fn outer(u: &[Complex64], v: &[Complex64]) -> Self {
        assert_eq!(u.len(), v.len());
        Self::from_fn(u.len(), |i, j| u[i] * v[j].conj())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|&x| x * s).collect() }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|&x| x * s).collect() }
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `‖A - A*‖_F / max(‖A‖_F, tiny)`.
    pub fn hermitian_defect(&self) -> f64 {
        let diff = self - &self.adjoint();
        diff.frobenius_norm() / self.frobenius_norm().max(f64::MIN_POSITIVE)
    }

    /// `‖A + A*‖_F / max(‖A‖_F, tiny)`.
    pub fn anti_hermitian_defect(&self) -> f64 {
        let sum = self + &self.adjoint();
        sum.frobenius_norm() / self.frobenius_norm().max(f64::MIN_POSITIVE)
    }

    pub fn is_hermitian(&self, rel_tol: f64) -> bool {
        self.hermitian_defect() <= rel_tol
    }

    pub fn is_anti_hermitian(&self, rel_tol: f64) -> bool {
        self.anti_hermitian_defect() <= rel_tol
    }

    /// `(A + A*) / 2`
    pub fn hermitian_part(&self) -> Self {
        (self + &self.adjoint()).scale_real(0.5)
    }

    /// `(A - A*) / 2`
    pub fn anti_hermitian_part(&self) -> Self {
        (self - &self.adjoint()).scale_real(0.5)
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.dim);
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut acc = Self::identity(self.dim);
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    fn lu(&self) -> Lu {
        let n = self.dim;
        let mut a = self.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let mut singular = false;
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&r, &s| a[r * n + col].norm().total_cmp(&a[s * n + col].norm()))
                .unwrap_or(col);
            if a[pivot * n + col].norm() == 0.0 {
                singular = true;
                continue;
            }
            if pivot != col {
                for j in 0..n {
                    a.swap(col * n + j, pivot * n + j);
                }
                perm.swap(col, pivot);
                sign = -sign;
            }
            let p = a[col * n + col];
            for r in col + 1..n {
                let factor = a[r * n + col] / p;
                a[r * n + col] = factor;
                for j in col + 1..n {
                    let v = a[col * n + j];
                    a[r * n + j] -= factor * v;
                }
            }
        }
        Lu { n, a, perm, sign, singular }
    }

    /// Determinant by partial-pivoting LU.
    pub fn determinant(&self) -> Complex64 {
        let lu = self.lu();
        if lu.singular {
            return ZERO;
        }
        (0..lu.n).map(|i| lu.a[i * lu.n + i]).product::<Complex64>() * lu.sign
    }

    /// Inverse by LU; fails when a zero pivot appears or the result is not
    /// finite.
    pub fn inverse(&self) -> Result<Self> {
        let lu = self.lu();
        if lu.singular {
            return Err(Error::SingularMatrix("zero pivot in LU factorization".into()));
        }
        let n = lu.n;
        let mut inv = Self::zeros(n);
        for col in 0..n {
            let mut x: Vec<Complex64> = (0..n)
                .map(|i| if lu.perm[i] == col { ONE } else { ZERO })
                .collect();
            for i in 0..n {
                for k in 0..i {
                    let v = x[k];
                    x[i] -= lu.a[i * n + k] * v;
                }
            }
            for i in (0..n).rev() {
                for k in i + 1..n {
                    let v = x[k];
                    x[i] -= lu.a[i * n + k] * v;
                }
                x[i] /= lu.a[i * n + i];
            }
            for i in 0..n {
                inv[(i, col)] = x[i];
            }
        }
        if !inv.is_finite() {
            return Err(Error::SingularMatrix("inverse is not finite".into()));
        }
        Ok(inv)
    }
}

struct Lu {
    n: usize,
    a: Vec<Complex64>,
    perm: Vec<usize>,
    sign: f64,
    singular: bool,
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.dim + j]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        let n = self.dim;
        let mut out = ComplexMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == ZERO {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        out
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        ComplexMatrix {
            dim: self.dim,
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

/// Eigen-decomposition `H = V diag(λ) V*` of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianSpectrum {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Column `k` is the eigenvector of `eigenvalues[k]`.
    pub eigenvectors: ComplexMatrix,
}

impl HermitianSpectrum {
    pub fn eigenvector(&self, k: usize) -> Vec<Complex64> {
        (0..self.eigenvectors.dim()).map(|i| self.eigenvectors[(i, k)]).collect()
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        let lambda: Vec<Complex64> =
            self.eigenvalues.iter().map(|&l| Complex64::new(l, 0.0)).collect();
        let v = &self.eigenvectors;
        &(v * &ComplexMatrix::diagonal(&lambda)) * &v.adjoint()
    }
}

/// Cyclic Jacobi eigensolver for Hermitian matrices.
pub fn hermitian_eigen(h: &ComplexMatrix) -> Result<HermitianSpectrum> {
    if !h.is_finite() {
        return Err(Error::Validation("matrix has non-finite entries".into()));
    }
    let defect = h.hermitian_defect();
    if defect > HERMITIAN_TOL {
        return Err(Error::Validation(format!(
            "matrix is not Hermitian (relative defect {defect:e})"
        )));
    }
    let n = h.dim();
    let mut a = h.hermitian_part();
    for i in 0..n {
        a[(i, i)] = Complex64::new(a[(i, i)].re, 0.0);
    }
    let mut v = ComplexMatrix::identity(n);
    let scale = a.frobenius_norm();
    if scale > 0.0 {
        for _sweep in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[(i, j)].norm_sqr())
                .sum::<f64>()
                .sqrt();
            if off <= 1e-17 * scale {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    jacobi_rotate(&mut a, &mut v, p, q);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let eigenvalues = order.iter().map(|&i| a[(i, i)].re).collect();
    let eigenvectors = ComplexMatrix::from_fn(n, |r, c| v[(r, order[c])]);
    Ok(HermitianSpectrum { eigenvalues, eigenvectors })
}

/// Annihilates `a[p][q]` with the unitary `G = diag(1, e^{-iφ}) R(θ)` acting on
/// the `(p, q)` plane, updating `A ← G* A G` and `V ← V G`.
fn jacobi_rotate(a: &mut ComplexMatrix, v: &mut ComplexMatrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    let r = apq.norm();
    if r == 0.0 {
        return;
    }
    let n = a.dim();
    let phase = apq / r;
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    let theta = (aqq - app) / (2.0 * r);
    let t = theta.signum() / (theta.abs() + theta.hypot(1.0));
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let g_pp = Complex64::new(c, 0.0);
    let g_pq = Complex64::new(s, 0.0);
    let g_qp = -phase.conj() * s;
    let g_qq = phase.conj() * c;

    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * g_pp + akq * g_qp;
        a[(k, q)] = akp * g_pq + akq * g_qq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = g_pp.conj() * apk + g_qp.conj() * aqk;
        a[(q, k)] = g_pq.conj() * apk + g_qq.conj() * aqk;
    }
    a[(p, q)] = ZERO;
    a[(q, p)] = ZERO;
    a[(p, p)] = Complex64::new(a[(p, p)].re, 0.0);
    a[(q, q)] = Complex64::new(a[(q, q)].re, 0.0);
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * g_pp + vkq * g_qp;
        v[(k, q)] = vkp * g_pq + vkq * g_qq;
    }
}

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
pub fn matrix_exp(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    if !a.is_finite() {
        return Err(Error::Validation("matrix has non-finite entries".into()));
    }
    let n = a.dim();
    let norm = a.norm_inf();
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scaled = a.scale_real(0.5_f64.powi(squarings));
    let mut term = ComplexMatrix::identity(n);
    let mut sum = ComplexMatrix::identity(n);
    for k in 1..=30 {
        term = (&term * &scaled).scale_real(1.0 / k as f64);
        sum = &sum + &term;
        if term.frobenius_norm() <= f64::EPSILON * 1e-2 * sum.frobenius_norm() {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    Ok(sum)
}

pub fn determinant(a: &ComplexMatrix) -> Complex64 {
    a.determinant()
}

/// Eigenvalue floor (relative to `‖P‖_F`) below which `P` is not PSD.
pub const PSD_TOL: f64 = 1e-10;
/// Largest admissible ratio of the second to the first eigenvalue.
pub const RANK_ONE_TOL: f64 = 1e-8;

/// Factors a Hermitian positive semidefinite rank-one matrix as `P = z z*`.
///
/// The first entry of `z` that is not negligible is made real and positive so
/// the factor is unique.
pub fn rank_one_factor(p: &ComplexMatrix) -> Result<Vec<Complex64>> {
    let norm = p.frobenius_norm();
    if norm == 0.0 {
        return Err(Error::Degenerate("cannot factor the zero matrix".into()));
    }
    let spec = hermitian_eigen(p)?;
    let n = p.dim();
    let largest = spec.eigenvalues[n - 1];
    if spec.eigenvalues[0] < -PSD_TOL * norm || largest <= 0.0 {
        return Err(Error::Validation(format!(
            "matrix is not positive semidefinite (smallest eigenvalue {:e})",
            spec.eigenvalues[0]
        )));
    }
    if n > 1 {
        let second = spec.eigenvalues[n - 2].abs().max(spec.eigenvalues[0].abs());
        let ratio = second / largest;
        if ratio > RANK_ONE_TOL {
            return Err(Error::Rank { ratio });
        }
    }
    let mut z: Vec<Complex64> =
        spec.eigenvector(n - 1).into_iter().map(|c| c * largest.sqrt()).collect();
    normalize_phase(&mut z);
    Ok(z)
}

/// Rotates `z` by a global phase so its first non-negligible entry is real
/// and positive.
pub fn normalize_phase(z: &mut [Complex64]) {
    let scale = z.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return;
    }
    if let Some(lead) = z.iter().find(|c| c.norm() > 1e-12 * scale) {
        let rot = lead.conj() / lead.norm();
        for c in z.iter_mut() {
            *c *= rot;
        }
        // the lead entry is now real up to rounding; pin it
        if let Some(first) = z.iter_mut().find(|c| c.norm() > 1e-12 * scale) {
            *first = Complex64::new(first.norm(), 0.0);
        }
    }
}
