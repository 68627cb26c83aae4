//! Translation and rotation reduction data.
//!
//! Positions are first reduced by translations to shape coordinates `z ∈ ℂᴹ`
//! (relative to vortex `N` when `Γ ≠ 0`, to vortex `N - 1` when `Γ = 0`).
//! The reduced symplectic pairing is the real symmetric circulation matrix
//! `K`, the rotation action has momentum map `R(z) = -½ z*Kz`, and the dual
//! `U(K)` action has momentum map `J(z) = i z z*`.
//!
//! Both branches share one linear section `q = E z` of the reduction, with
//! `E` a real `N x M` matrix; [`CirculationMatrix::embedding`] exposes it.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::{self, ComplexMatrix};
use crate::vortex::{linear_impulse, Branch, CirculationVector, VortexConfiguration};

/// Symmetry defect allowed in a circulation matrix.
pub const SYMMETRY_TOL: f64 = 1e-14;
/// Relative agreement required between `det K` and its closed form.
pub const DET_TOL: f64 = 1e-10;
/// Eigenvalues of `K` within this fraction of `‖K‖` count as zero.
pub const SIGNATURE_TOL: f64 = 1e-10;
/// Anti-Hermitian defect allowed in a momentum value.
pub const ANTI_HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct CirculationMatrix {
    circulations: CirculationVector,
    entries: Vec<f64>,
    k: ComplexMatrix,
    k_inv: ComplexMatrix,
    embedding: Vec<f64>,
    pairs: Vec<PairTerm>,
}

/// One pairwise term `w ln(aᵀ P a)` of the collective Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct PairTerm {
    pub weight: f64,
    pub a: Vec<f64>,
}

impl CirculationMatrix {
    pub fn dim(&self) -> usize {
        self.k.dim()
    }

    pub fn circulations(&self) -> &CirculationVector {
        &self.circulations
    }

    pub fn branch(&self) -> Branch {
        self.circulations.branch()
    }

    pub fn entry(&self, j: usize, k: usize) -> f64 {
        self.entries[j * self.dim() + k]
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.k
    }

    pub fn inverse(&self) -> &ComplexMatrix {
        &self.k_inv
    }

    /// Row-major `N x M` matrix `E` with `q = E z`.
    pub fn embedding(&self) -> &[f64] {
        &self.embedding
    }

    pub(crate) fn pairs(&self) -> &[PairTerm] {
        &self.pairs
    }

    pub fn determinant(&self) -> f64 {
        self.k.determinant().re
    }

    /// Closed-form determinant: `(-1)^{N-1} ∏Γⱼ / Γ` when `Γ ≠ 0`,
    /// `(-1)^N Γ₁⋯Γ_{N-1} / Σ_{j<N} Γⱼ` when `Γ = 0`.
    pub fn lemma_determinant(&self) -> f64 {
        let g = self.circulations.gammas();
        let n = g.len();
        match self.branch() {
            Branch::NonzeroTotal => {
                let sign = if (n - 1).is_multiple_of(2) { 1.0 } else { -1.0 };
                sign * g.iter().product::<f64>() / self.circulations.total()
            }
            Branch::ZeroTotal => {
                let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
                let head = &g[..n - 1];
                sign * head.iter().product::<f64>() / head.iter().sum::<f64>()
            }
        }
    }

    pub fn symmetry_defect(&self) -> f64 {
        let m = self.dim();
        let mut worst = 0.0_f64;
        for j in 0..m {
            for k in 0..m {
                worst = worst.max((self.entry(j, k) - self.entry(k, j)).abs());
            }
        }
        worst / self.k.frobenius_norm().max(f64::MIN_POSITIVE)
    }

    /// Checks symmetry and the determinant closed form.
    pub fn check(&self) -> Result<()> {
        let sym = self.symmetry_defect();
        if sym > SYMMETRY_TOL {
            return Err(Error::Validation(format!(
                "circulation matrix is not symmetric (relative defect {sym:e})"
            )));
        }
        let (det, lemma) = (self.determinant(), self.lemma_determinant());
        let rel = (det - lemma).abs() / lemma.abs();
        if !(rel <= DET_TOL) {
            return Err(Error::Validation(format!(
                "det K = {det} disagrees with closed form {lemma} (relative {rel:e})"
            )));
        }
        Ok(())
    }

    #[doc(hidden)]
    /// Fault injection for the verification suite: breaks the symmetry of `K`.
    pub fn corrupted(&self) -> Self {
        let mut bad = self.clone();
        let m = self.dim();
        let idx = if m > 1 { 1 } else { 0 };
        let delta = 1e-3 * self.k.frobenius_norm().max(1.0);
        bad.entries[idx] += delta;
        bad.k = ComplexMatrix::from_real(m, &bad.entries).expect("finite entries");
        bad
    }
}

pub fn circulation_matrix(gamma: &CirculationVector) -> Result<CirculationMatrix> {
    let g = gamma.gammas();
    let n = g.len();
    let (m, total) = match gamma.branch() {
        Branch::NonzeroTotal => (n - 1, gamma.total()),
        Branch::ZeroTotal => {
            if n < 3 {
                return Err(Error::Validation(
                    "zero total circulation needs at least three vortices".into(),
                ));
            }
            (n - 2, -g[n - 1])
        }
    };
    let mut entries = vec![0.0; m * m];
    for j in 0..m {
        for k in 0..m {
            entries[j * m + k] = if j == k {
                -g[j] * (total - g[j]) / total
            } else {
                g[j] * g[k] / total
            };
        }
    }

    let mut embedding = vec![0.0; n * m];
    match gamma.branch() {
        Branch::NonzeroTotal => {
            for i in 0..n {
                for j in 0..m {
                    let delta = if i == j { 1.0 } else { 0.0 };
                    embedding[i * m + j] = delta - g[j] / total;
                }
            }
        }
        Branch::ZeroTotal => {
            for j in 0..m {
                embedding[j * m + j] = 1.0;
                embedding[(n - 1) * m + j] = -g[j] / g[n - 1];
            }
        }
    }

    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    for j in 0..n {
        for k in j + 1..n {
            let a = (0..m).map(|r| embedding[j * m + r] - embedding[k * m + r]).collect();
            pairs.push(PairTerm { weight: g[j] * g[k], a });
        }
    }

    let k = ComplexMatrix::from_real(m, &entries)?;
    let k_inv = k.inverse()?;
    Ok(CirculationMatrix { circulations: gamma.clone(), entries, k, k_inv, embedding, pairs })
}

/// Nonzero shape coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeVector {
    z: Vec<Complex64>,
}

impl ShapeVector {
    pub fn new(z: Vec<Complex64>) -> Result<Self> {
        if z.is_empty() {
            return Err(Error::Validation("shape vector must be nonempty".into()));
        }
        if z.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::Validation("shape vector must be finite".into()));
        }
        if z.iter().all(|c| c.norm() == 0.0) {
            return Err(Error::Degenerate("shape vector is zero (N-tuple collision)".into()));
        }
        Ok(Self { z })
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.z
    }

    pub fn dim(&self) -> usize {
        self.z.len()
    }

    pub fn norm(&self) -> f64 {
        self.z.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn rotated(&self, theta: f64) -> Self {
        let r = Complex64::from_polar(1.0, theta);
        Self { z: self.z.iter().map(|c| r * c).collect() }
    }
}

/// `zⱼ = qⱼ - q_N` (`Γ ≠ 0`) or `zⱼ = qⱼ - q_{N-1}` (`Γ = 0`).
pub fn shape_coordinates(gamma: &CirculationVector, q: &[Complex64]) -> Result<ShapeVector> {
    let n = gamma.len();
    if q.len() != n {
        return Err(Error::Validation(format!("{n} circulations but {} positions", q.len())));
    }
    let (m, base) = match gamma.branch() {
        Branch::NonzeroTotal => (n - 1, q[n - 1]),
        Branch::ZeroTotal => (n - 2, q[n - 2]),
    };
    ShapeVector::new(q[..m].iter().map(|qj| qj - base).collect())
}

/// Representative `q = E z` of the shape, with zero linear impulse.
pub fn embed_shape(k: &CirculationMatrix, z: &ShapeVector) -> Result<VortexConfiguration> {
    let m = k.dim();
    if z.dim() != m {
        return Err(Error::Validation(format!("shape has dimension {}, expected {m}", z.dim())));
    }
    let e = k.embedding();
    let n = e.len() / m;
    let q = (0..n)
        .map(|i| (0..m).map(|j| z.as_slice()[j] * e[i * m + j]).sum())
        .collect();
    VortexConfiguration::new(q)
}

/// Maps `q` to the zero-impulse representative with the same shape.
///
/// Returns the representative and the impulse of the input.
pub fn impulse_free_representative(
    k: &CirculationMatrix,
    q: &[Complex64],
) -> Result<(VortexConfiguration, Complex64)> {
    let gamma = k.circulations();
    let impulse = linear_impulse(gamma, q)?;
    let z = shape_coordinates(gamma, q)?;
    Ok((embed_shape(k, &z)?, impulse))
}

/// `R(z) = -½ z*Kz`.
pub fn angular_impulse(k: &CirculationMatrix, z: &ShapeVector) -> Result<f64> {
    if z.dim() != k.dim() {
        return Err(Error::Validation("shape and circulation matrix dimensions differ".into()));
    }
    let kz = k.matrix().mul_vec(z.as_slice());
    let form: Complex64 = z.as_slice().iter().zip(&kz).map(|(a, b)| a.conj() * b).sum();
    Ok(-0.5 * form.re)
}

/// Element `μ` of the dual algebra: an anti-Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumValue {
    mu: ComplexMatrix,
}

impl MomentumValue {
    pub fn new(mu: ComplexMatrix) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::Validation("momentum value must be finite".into()));
        }
        let defect = mu.anti_hermitian_defect();
        if defect > ANTI_HERMITIAN_TOL {
            return Err(Error::Validation(format!(
                "momentum value is not anti-Hermitian (relative defect {defect:e})"
            )));
        }
        Ok(Self { mu: mu.anti_hermitian_part() })
    }

    /// `μ = iP` for Hermitian `P`.
    pub fn from_hermitian(p: &ComplexMatrix) -> Result<Self> {
        Self::new(p.scale(Complex64::i()))
    }

    pub(crate) fn from_matrix_unchecked(mu: ComplexMatrix) -> Self {
        Self { mu }
    }

    pub fn zero(dim: usize) -> Self {
        Self { mu: ComplexMatrix::zeros(dim) }
    }

    pub fn dim(&self) -> usize {
        self.mu.dim()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mu
    }

    /// `P = -iμ`, Hermitian.
    pub fn hermitian(&self) -> ComplexMatrix {
        self.mu.scale(-Complex64::i())
    }

    /// Real coordinates: the `M` diagonal entries of `P`, then `Re P_jk`,
    /// `Im P_jk` for each `j < k` in row order.
    pub fn to_real(&self) -> Vec<f64> {
        let m = self.dim();
        let mut out = Vec::with_capacity(m * m);
        for j in 0..m {
            out.push(self.mu[(j, j)].im);
        }
        for j in 0..m {
            for k in j + 1..m {
                let p = -Complex64::i() * self.mu[(j, k)];
                out.push(p.re);
                out.push(p.im);
            }
        }
        out
    }

    pub fn from_real(dim: usize, x: &[f64]) -> Result<Self> {
        if dim == 0 || x.len() != dim * dim {
            return Err(Error::Validation(format!(
                "expected {} real coordinates for dimension {dim}, got {}",
                dim * dim,
                x.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("momentum coordinates must be finite".into()));
        }
        Ok(Self { mu: real_to_matrix(dim, x) })
    }

    pub fn norm(&self) -> f64 {
        self.mu.frobenius_norm()
    }

    /// Euclidean norm of [`MomentumValue::to_real`].
    pub fn coordinate_norm(&self) -> f64 {
        self.to_real().iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

pub(crate) fn real_to_matrix(m: usize, x: &[f64]) -> ComplexMatrix {
    let mut p = ComplexMatrix::zeros(m);
    for j in 0..m {
        p[(j, j)] = Complex64::new(x[j], 0.0);
    }
    let mut idx = m;
    for j in 0..m {
        for k in j + 1..m {
            let v = Complex64::new(x[idx], x[idx + 1]);
            p[(j, k)] = v;
            p[(k, j)] = v.conj();
            idx += 2;
        }
    }
    p.scale(Complex64::i())
}

pub(crate) fn matrix_to_real(mu: &ComplexMatrix, out: &mut [f64]) {
    let m = mu.dim();
    for j in 0..m {
        out[j] = mu[(j, j)].im;
    }
    let mut idx = m;
    for j in 0..m {
        for k in j + 1..m {
            // P = -iμ, so P_jk = (Im μ_jk) - i(Re μ_jk)
            out[idx] = mu[(j, k)].im;
            out[idx + 1] = -mu[(j, k)].re;
            idx += 2;
        }
    }
}

impl std::ops::Index<(usize, usize)> for MomentumValue {
    type Output = Complex64;

    fn index(&self, idx: (usize, usize)) -> &Complex64 {
        &self.mu[idx]
    }
}

/// `J(z) = i z z*`.
pub fn momentum_map_j(z: &ShapeVector) -> MomentumValue {
    let zz = ComplexMatrix::outer(z.as_slice(), z.as_slice());
    MomentumValue { mu: zz.scale(Complex64::i()) }
}

/// Inertia of `K`: the numbers of positive and negative eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignatureInfo {
    pub n1: usize,
    pub n2: usize,
}

pub fn algebra_signature(k: &CirculationMatrix) -> Result<SignatureInfo> {
    let spec = matrix::hermitian_eigen(k.matrix())?;
    let scale = k.matrix().frobenius_norm();
    let mut sig = SignatureInfo { n1: 0, n2: 0 };
    for &l in &spec.eigenvalues {
        if l.abs() <= SIGNATURE_TOL * scale {
            return Err(Error::SingularMatrix(format!(
                "eigenvalue {l:e} of K is numerically zero"
            )));
        }
        if l > 0.0 {
            sig.n1 += 1;
        } else {
            sig.n2 += 1;
        }
    }
    Ok(sig)
}

/// One point of the fiber `J⁻¹(μ)`, which is the circle `{e^{iθ} z}`.
pub fn shape_from_momentum(mu: &MomentumValue) -> Result<ShapeVector> {
    let z = matrix::rank_one_factor(&mu.hermitian())?;
    ShapeVector::new(z)
}
