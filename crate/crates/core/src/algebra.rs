//! The vortex algebra `𝔳_K` and its dual.
//!
//! Elements of both the algebra and its dual are anti-Hermitian `M x M`
//! matrices, paired by `⟨a, b⟩ = ½ Re tr(a* b)`. The bracket is
//! `[ξ, η]_K = ξK⁻¹η - ηK⁻¹ξ`, and `ξ ↦ K⁻¹ξ` identifies the algebra with the
//! Lie algebra of `U(K) = {U : U*KU = K}`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::{self, ComplexMatrix};
use crate::reduction::{CirculationMatrix, MomentumValue, ANTI_HERMITIAN_TOL};

/// Relative residual allowed in `U*KU = K`.
pub const MEMBERSHIP_TOL: f64 = 1e-10;
/// Relative imaginary part tolerated in a Casimir trace or determinant.
pub const CASIMIR_IMAG_TOL: f64 = 1e-12;
/// Squared-distance surrogates at or below this are treated as collisions.
pub const COLLISION_SHADOW: f64 = 1e-20;

#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraElement {
    xi: ComplexMatrix,
}

impl AlgebraElement {
    pub fn new(xi: ComplexMatrix) -> Result<Self> {
        if !xi.is_finite() {
            return Err(Error::Validation("algebra element must be finite".into()));
        }
        let defect = xi.anti_hermitian_defect();
        if defect > ANTI_HERMITIAN_TOL {
            return Err(Error::Validation(format!(
                "algebra element is not anti-Hermitian (relative defect {defect:e})"
            )));
        }
        Ok(Self { xi: xi.anti_hermitian_part() })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.xi
    }

    pub fn dim(&self) -> usize {
        self.xi.dim()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupElement {
    u: ComplexMatrix,
}

impl GroupElement {
    /// Accepts `u` if it preserves `K`.
    pub fn new(k: &CirculationMatrix, u: ComplexMatrix) -> Result<Self> {
        let g = Self { u };
        let res = g.membership_residual(k);
        if !(res <= MEMBERSHIP_TOL) {
            return Err(Error::Validation(format!(
                "matrix is not in U(K): ‖U*KU - K‖ / ‖K‖ = {res:e}"
            )));
        }
        Ok(g)
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.u
    }

    /// `‖U*KU - K‖_F / ‖K‖_F`.
    pub fn membership_residual(&self, k: &CirculationMatrix) -> f64 {
        let kk = k.matrix();
        let prod = &(&self.u.adjoint() * kk) * &self.u;
        (&prod - kk).frobenius_norm() / kk.frobenius_norm()
    }

    /// `U z`.
    pub fn act(&self, z: &[Complex64]) -> Vec<Complex64> {
        self.u.mul_vec(z)
    }
}

fn same_dim(k: &CirculationMatrix, dims: &[usize]) -> Result<()> {
    if dims.iter().any(|&d| d != k.dim()) {
        return Err(Error::Validation(format!(
            "dimension mismatch: K is {0}x{0}, operands {dims:?}",
            k.dim()
        )));
    }
    Ok(())
}

/// `[ξ, η]_K = ξK⁻¹η - ηK⁻¹ξ`.
pub fn bracket(
    k: &CirculationMatrix,
    xi: &AlgebraElement,
    eta: &AlgebraElement,
) -> Result<AlgebraElement> {
    same_dim(k, &[xi.dim(), eta.dim()])?;
    let ki = k.inverse();
    let a = &(&xi.xi * ki) * &eta.xi;
    let b = &(&eta.xi * ki) * &xi.xi;
    Ok(AlgebraElement { xi: &a - &b })
}

/// `ad*_ξ μ = μξK⁻¹ - K⁻¹ξμ`.
pub fn coad_inf(
    k: &CirculationMatrix,
    xi: &AlgebraElement,
    mu: &MomentumValue,
) -> Result<MomentumValue> {
    same_dim(k, &[xi.dim(), mu.dim()])?;
    Ok(MomentumValue::from_matrix_unchecked(ad_star(k.inverse(), xi.matrix(), mu.matrix())))
}

pub(crate) fn ad_star(k_inv: &ComplexMatrix, xi: &ComplexMatrix, mu: &ComplexMatrix) -> ComplexMatrix {
    let a = &(mu * xi) * k_inv;
    let b = &(k_inv * xi) * mu;
    &a - &b
}

/// `Ad*_{U⁻¹} μ = UμU*`, after checking `U ∈ U(K)`.
pub fn coad_group(
    k: &CirculationMatrix,
    u: &GroupElement,
    mu: &MomentumValue,
) -> Result<MomentumValue> {
    same_dim(k, &[u.u.dim(), mu.dim()])?;
    let res = u.membership_residual(k);
    if !(res <= MEMBERSHIP_TOL) {
        return Err(Error::Validation(format!("group element leaves U(K) (residual {res:e})")));
    }
    let m = &(&u.u * mu.matrix()) * &u.u.adjoint();
    Ok(MomentumValue::from_matrix_unchecked(m.anti_hermitian_part()))
}

/// `U = exp(t K⁻¹ξ)`.
pub fn group_element(k: &CirculationMatrix, xi: &AlgebraElement, t: f64) -> Result<GroupElement> {
    same_dim(k, &[xi.dim()])?;
    let gen = (k.inverse() * xi.matrix()).scale_real(t);
    Ok(GroupElement { u: matrix::matrix_exp(&gen)? })
}

/// `⟨a, b⟩ = ½ Re tr(a* b)`.
pub fn pairing(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
        s += (x.conj() * y).re;
    }
    0.5 * s
}

fn real_or_err(v: Complex64, scale: f64, what: &str) -> Result<f64> {
    if v.im.abs() > CASIMIR_IMAG_TOL * scale.max(v.re.abs()) && v.im.abs() > f64::MIN_POSITIVE {
        return Err(Error::Numerical(format!(
            "{what} has imaginary part {:e} (real part {:e})",
            v.im, v.re
        )));
    }
    Ok(v.re)
}

fn ik_mu(k: &CirculationMatrix, mu: &MomentumValue) -> ComplexMatrix {
    (k.matrix() * mu.matrix()).scale(Complex64::i())
}

/// `C_j(μ) = tr((iKμ)^j)`.
pub fn casimir(k: &CirculationMatrix, mu: &MomentumValue, j: u32) -> Result<f64> {
    if j == 0 {
        return Err(Error::Validation("Casimir index must be positive".into()));
    }
    same_dim(k, &[mu.dim()])?;
    let a = ik_mu(k, mu);
    let scale = a.frobenius_norm().powi(j as i32);
    real_or_err(a.pow(j).trace(), scale, &format!("C_{j}"))
}

/// `D(μ) = det(iKμ)`.
pub fn casimir_det(k: &CirculationMatrix, mu: &MomentumValue) -> Result<f64> {
    same_dim(k, &[mu.dim()])?;
    let a = ik_mu(k, mu);
    let scale = a.frobenius_norm().powi(a.dim() as i32);
    real_or_err(a.determinant(), scale, "det(iKμ)")
}

/// `aᵀ P a` for real `a` and Hermitian `P = -iμ`.
fn quadratic(a: &[f64], mu: &ComplexMatrix) -> f64 {
    let m = a.len();
    let mut s = 0.0;
    for r in 0..m {
        if a[r] == 0.0 {
            continue;
        }
        for c in 0..m {
            // Re P_rc = Im μ_rc
            s += a[r] * a[c] * mu[(r, c)].im;
        }
    }
    s
}

fn squared_lengths(k: &CirculationMatrix, mu: &ComplexMatrix) -> Result<Vec<f64>> {
    k.pairs()
        .iter()
        .map(|p| {
            let s = quadratic(&p.a, mu);
            if !(s > COLLISION_SHADOW) {
                return Err(Error::Singularity(format!(
                    "collision shadow: squared distance surrogate {s:e}"
                )));
            }
            Ok(s)
        })
        .collect()
}

/// Collective Hamiltonian `h` with `H ∘ embed = h ∘ J`.
///
/// `h(μ) = -(1/4π) Σ_{j<k} ΓⱼΓ_k ln(a_jkᵀ P a_jk)` over all vortex pairs,
/// where `P = -iμ` and `a_jk` is the difference of rows `j`, `k` of the
/// embedding `q = E z`. With `Γ ≠ 0` the arguments are
/// `P_jj + P_kk - 2 Re P_jk` and `P_jj` (pairs with vortex `N`).
pub fn collective_hamiltonian(k: &CirculationMatrix, mu: &MomentumValue) -> Result<f64> {
    same_dim(k, &[mu.dim()])?;
    hamiltonian_of(k, mu.matrix())
}

pub(crate) fn hamiltonian_of(k: &CirculationMatrix, mu: &ComplexMatrix) -> Result<f64> {
    let s = squared_lengths(k, mu)?;
    let sum: f64 = k.pairs().iter().zip(&s).map(|(p, s)| p.weight * s.ln()).sum();
    Ok(-sum / (4.0 * PI))
}

/// `δh/δμ = 2iG`, `G` the real symmetric gradient of `h` in `P` (`dh = tr(G dP)`).
pub fn collective_gradient(k: &CirculationMatrix, mu: &MomentumValue) -> Result<AlgebraElement> {
    same_dim(k, &[mu.dim()])?;
    Ok(AlgebraElement { xi: gradient_of(k, mu.matrix())? })
}

pub(crate) fn gradient_of(k: &CirculationMatrix, mu: &ComplexMatrix) -> Result<ComplexMatrix> {
    let m = k.dim();
    let s = squared_lengths(k, mu)?;
    let mut g = vec![0.0; m * m];
    for (p, s) in k.pairs().iter().zip(&s) {
        let w = p.weight / s;
        for r in 0..m {
            if p.a[r] == 0.0 {
                continue;
            }
            for c in 0..m {
                g[r * m + c] += w * p.a[r] * p.a[c];
            }
        }
    }
    let f = -2.0 / (4.0 * PI);
    Ok(ComplexMatrix::from_fn(m, |r, c| Complex64::new(0.0, f * g[r * m + c])))
}
