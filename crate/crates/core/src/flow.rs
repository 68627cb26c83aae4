//! Reduced dynamics on the dual of the vortex algebra.
//!
//! The general Lie–Poisson field `μ̇ = -ad*_{δh/δμ} μ` is integrated in the
//! real coordinates of [`MomentumValue::to_real`]. For two-dimensional shape
//! spaces (three vortices with `Γ ≠ 0`, or four with `Γ = 0`) the module also
//! provides the explicit system in the coordinates
//! `μ = i[[μ₂, μ₃ + iμ₄], [μ₃ - iμ₄, μ₁]]` and in the triangle variables
//! `(l₂₃², l₃₁², l₁₂², A)`.

use std::f64::consts::PI;

use log::warn;

use crate::algebra::{self, casimir, casimir_det, collective_hamiltonian};
use crate::error::{Error, Result};
use crate::matrix::ComplexMatrix;
use crate::ode::{self, IntegratorConfig, ReturnEvent, Trajectory};
use crate::reduction::{matrix_to_real, real_to_matrix, CirculationMatrix, MomentumValue};
use crate::vortex::Branch;

/// Warning attached to flows started on `R = 0`.
pub const ZERO_R_WARNING: &str = "R=0: coadjoint-orbit theorem hypothesis violated";

/// `μ̇ = -μXK⁻¹ + K⁻¹Xμ` with `X = δh/δμ`.
pub fn lp_field(k: &CirculationMatrix, mu: &MomentumValue) -> Result<MomentumValue> {
    let x = algebra::collective_gradient(k, mu)?;
    let ad = algebra::ad_star(k.inverse(), x.matrix(), mu.matrix());
    MomentumValue::new(ad.scale_real(-1.0))
}

fn lp_field_real(k: &CirculationMatrix, x: &[f64], dx: &mut [f64]) -> Result<()> {
    let mu = real_to_matrix(k.dim(), x);
    let g = algebra::gradient_of(k, &mu)?;
    let ad = algebra::ad_star(k.inverse(), &g, &mu);
    matrix_to_real(&ad.scale_real(-1.0), dx);
    Ok(())
}

/// Largest deviation of each invariant from its initial value.
///
/// All entries are relative to the initial value except `d`, which starts at
/// zero on physical orbits and is measured against `‖iKμ₀‖_F^M`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct InvariantDrift {
    pub c1: f64,
    pub c2: f64,
    pub d: f64,
    pub h: f64,
    /// Shape-variable `C₂`, two-dimensional shape spaces only.
    pub c2_shape: Option<f64>,
}

/// Initial values of the monitored invariants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Invariants {
    pub c1: f64,
    pub c2: f64,
    pub d: f64,
    pub h: f64,
    pub c2_shape: Option<f64>,
}

impl Invariants {
    pub fn of(k: &CirculationMatrix, mu: &MomentumValue) -> Result<Self> {
        let c2_shape = match shape_circulations(k) {
            Ok(g) => Some(shape_casimirs(&g, &TriangleShape::from(Mu3Coords::from_momentum(mu)?))?.1),
            Err(_) => None,
        };
        Ok(Self {
            c1: casimir(k, mu, 1)?,
            c2: casimir(k, mu, 2)?,
            d: casimir_det(k, mu)?,
            h: collective_hamiltonian(k, mu)?,
            c2_shape,
        })
    }
}

#[derive(Debug, Clone)]
pub struct LpTrajectory {
    pub trajectory: Trajectory,
    pub dim: usize,
    pub initial: Invariants,
    pub drift: InvariantDrift,
    pub warning: Option<String>,
}

impl LpTrajectory {
    pub fn momentum(&self, i: usize) -> MomentumValue {
        MomentumValue::from_real(self.dim, self.trajectory.state(i)).expect("stored states are finite")
    }

    pub fn momentum_at(&self, t: f64) -> Result<MomentumValue> {
        MomentumValue::from_real(self.dim, &self.trajectory.sample(t)?)
    }
}

fn rel_dev(x: f64, x0: f64) -> f64 {
    if x0 == 0.0 {
        (x - x0).abs()
    } else {
        (x - x0).abs() / x0.abs()
    }
}

/// Integrates the Lie–Poisson equation from `mu0`.
pub fn integrate_lp(
    k: &CirculationMatrix,
    mu0: &MomentumValue,
    t_span: (f64, f64),
    cfg: &IntegratorConfig,
) -> Result<LpTrajectory> {
    if mu0.dim() != k.dim() {
        return Err(Error::Validation("momentum and circulation matrix dimensions differ".into()));
    }
    let initial = Invariants::of(k, mu0)?;
    let scale = (k.matrix() * mu0.matrix()).frobenius_norm();
    let warning = if initial.c1.abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
        warn!("{ZERO_R_WARNING}");
        Some(ZERO_R_WARNING.to_string())
    } else {
        None
    };
    let kk = k.clone();
    let trajectory =
        ode::integrate(move |_, x, dx| lp_field_real(&kk, x, dx), &mu0.to_real(), t_span, cfg)?;

    let d_scale = scale.powi(k.dim() as i32);
    let mut drift = InvariantDrift {
        c2_shape: initial.c2_shape.map(|_| 0.0),
        ..InvariantDrift::default()
    };
    for state in trajectory.states() {
        let mu = MomentumValue::from_real(k.dim(), state)?;
        let now = Invariants::of(k, &mu)?;
        drift.c1 = drift.c1.max(rel_dev(now.c1, initial.c1));
        drift.c2 = drift.c2.max(rel_dev(now.c2, initial.c2));
        drift.h = drift.h.max(rel_dev(now.h, initial.h));
        drift.d = drift.d.max((now.d - initial.d).abs() / d_scale.max(f64::MIN_POSITIVE));
        if let (Some(c), Some(c0), Some(dc)) = (now.c2_shape, initial.c2_shape, drift.c2_shape.as_mut()) {
            *dc = dc.max(rel_dev(c, c0));
        }
    }
    Ok(LpTrajectory { trajectory, dim: k.dim(), initial, drift, warning })
}

/// Coordinates `μ = i[[μ₂, μ₃ + iμ₄], [μ₃ - iμ₄, μ₁]]` of a 2x2 momentum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mu3Coords {
    pub mu1: f64,
    pub mu2: f64,
    pub mu3: f64,
    pub mu4: f64,
}

impl Mu3Coords {
    pub fn new(mu1: f64, mu2: f64, mu3: f64, mu4: f64) -> Self {
        Self { mu1, mu2, mu3, mu4 }
    }

    pub fn from_momentum(mu: &MomentumValue) -> Result<Self> {
        if mu.dim() != 2 {
            return Err(Error::Validation(format!(
                "explicit shape coordinates need a 2x2 momentum, got {0}x{0}",
                mu.dim()
            )));
        }
        Ok(Self::from_real(&mu.to_real()))
    }

    /// From `[P₁₁, P₂₂, Re P₁₂, Im P₁₂]`.
    pub fn from_real(x: &[f64]) -> Self {
        Self { mu1: x[1], mu2: x[0], mu3: x[2], mu4: x[3] }
    }

    pub fn to_real(&self) -> [f64; 4] {
        [self.mu2, self.mu1, self.mu3, self.mu4]
    }

    pub fn to_momentum(&self) -> MomentumValue {
        MomentumValue::from_real(2, &self.to_real()).expect("finite coordinates")
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.mu1, self.mu2, self.mu3, self.mu4]
    }

    /// `μ₁μ₂ - μ₃² - μ₄²`, zero on physical orbits.
    pub fn rank_residual(&self) -> f64 {
        self.mu1 * self.mu2 - self.mu3 * self.mu3 - self.mu4 * self.mu4
    }
}

/// Squared side lengths and signed area of the triangle of the first three vortices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleShape {
    pub l23sq: f64,
    pub l31sq: f64,
    pub l12sq: f64,
    pub area: f64,
}

impl From<Mu3Coords> for TriangleShape {
    fn from(m: Mu3Coords) -> Self {
        Self {
            l23sq: m.mu1,
            l31sq: m.mu2,
            l12sq: m.mu1 + m.mu2 - 2.0 * m.mu3,
            area: -0.5 * m.mu4,
        }
    }
}

impl From<TriangleShape> for Mu3Coords {
    fn from(s: TriangleShape) -> Self {
        Self {
            mu1: s.l23sq,
            mu2: s.l31sq,
            mu3: 0.5 * (s.l23sq + s.l31sq - s.l12sq),
            mu4: -2.0 * s.area,
        }
    }
}

impl TriangleShape {
    /// `2(l₁₂²l₂₃² + l₂₃²l₃₁² + l₃₁²l₁₂²) - (l₁₂⁴ + l₂₃⁴ + l₃₁⁴) - 16A²`; zero
    /// exactly for realizable triangles.
    pub fn feasibility_residual(&self) -> f64 {
        let (a, b, c) = (self.l12sq, self.l23sq, self.l31sq);
        2.0 * (a * b + b * c + c * a) - (a * a + b * b + c * c) - 16.0 * self.area * self.area
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.l23sq, self.l31sq, self.l12sq, self.area]
    }
}

/// Circulations `(Γ₁, Γ₂, Γ₃)` of the three-vortex system sharing `K`.
///
/// For `Γ = 0` with four vortices these are the first three circulations,
/// whose circulation matrix coincides with `K₀`.
pub fn shape_circulations(k: &CirculationMatrix) -> Result<[f64; 3]> {
    let g = k.circulations().gammas();
    match (k.branch(), g.len()) {
        (Branch::NonzeroTotal, 3) | (Branch::ZeroTotal, 4) => Ok([g[0], g[1], g[2]]),
        _ => Err(Error::Validation(format!(
            "explicit shape system needs a two-dimensional shape space, got M = {}",
            k.dim()
        ))),
    }
}

fn nonzero_lengths(l: [f64; 3]) -> Result<()> {
    if l.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::Singularity(format!("nonpositive squared length in {l:?}")));
    }
    Ok(())
}

/// Explicit three-vortex shape system in `μ`-coordinates.
pub fn shape3_field(g: &[f64; 3], m: &Mu3Coords) -> Result<Mu3Coords> {
    let s = m.mu1 + m.mu2 - 2.0 * m.mu3;
    nonzero_lengths([m.mu1, m.mu2, s])?;
    let f1 = 1.0 / s - 1.0 / m.mu2;
    let f2 = 1.0 / m.mu1 - 1.0 / s;
    let f3 = 1.0 / m.mu1 - 1.0 / m.mu2;
    let [g1, g2, g3] = *g;
    Ok(Mu3Coords {
        mu1: g1 / PI * f1 * m.mu4,
        mu2: g2 / PI * f2 * m.mu4,
        mu3: (g1 * f1 + g2 * f2 + g3 * f3) * m.mu4 / (2.0 * PI),
        mu4: -(g1 * f1 * (m.mu3 - m.mu2) + g2 * f2 * (m.mu3 - m.mu1) + g3 * f3 * m.mu3)
            / (2.0 * PI),
    })
}

/// Equations of relative motion for the side lengths and signed area.
pub fn relative_motion_field(g: &[f64; 3], s: &TriangleShape) -> Result<TriangleShape> {
    // index 0: l23², 1: l31², 2: l12²; side opposite vortex i is l[i]
    let l = [s.l23sq, s.l31sq, s.l12sq];
    nonzero_lengths(l)?;
    let mut dl = [0.0; 3];
    let mut da = 0.0;
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        // l_jk = l[i], l_ki = l[j], l_ij = l[k]
        dl[i] = 2.0 * g[i] / PI * (1.0 / l[j] - 1.0 / l[k]) * s.area;
        da += (g[j] + g[k]) * (l[j] - l[k]) / l[i];
    }
    Ok(TriangleShape { l23sq: dl[0], l31sq: dl[1], l12sq: dl[2], area: da / (8.0 * PI) })
}

/// `(C₁, C₂)` in triangle variables.
pub fn shape_casimirs(g: &[f64; 3], s: &TriangleShape) -> Result<(f64, f64)> {
    let [g1, g2, g3] = *g;
    let total = g1 + g2 + g3;
    let m = Mu3Coords::from(*s);
    let c1 = (g2 * (g1 + g3) * m.mu1 + g1 * (g2 + g3) * m.mu2 - 2.0 * g1 * g2 * m.mu3) / total;
    let l = [s.l23sq, s.l31sq, s.l12sq];
    let mut c2 = 0.0;
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        let mixed = l[k] - l[i] + l[j];
        c2 += l[i] * l[i] / (g[i] * g[i]) + mixed * mixed / (2.0 * g[j] * g[k]);
    }
    c2 += 8.0 * total / (g1 * g2 * g3) * s.area * s.area;
    Ok((c1, c2))
}

/// Least-squares coefficients of the shape `C₂` in the basis `{C₁², D, 1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CasimirFit {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Largest absolute residual relative to the largest `|C₂|` sampled.
    pub residual: f64,
}

/// Fits `C₂_shape ≈ α C₁² + β D + γ` over the given anti-Hermitian samples.
pub fn fit_shape_casimir(k: &CirculationMatrix, samples: &[MomentumValue]) -> Result<CasimirFit> {
    let g = shape_circulations(k)?;
    let mut rows = Vec::with_capacity(samples.len());
    for mu in samples {
        let c1 = casimir(k, mu, 1)?;
        let d = casimir_det(k, mu)?;
        let c2 = shape_casimirs(&g, &TriangleShape::from(Mu3Coords::from_momentum(mu)?))?.1;
        rows.push(([c1 * c1, d, 1.0], c2));
    }
    if rows.len() < 3 {
        return Err(Error::Validation("need at least three samples to fit".into()));
    }
    // normal equations, solved with the complex LU of the matrix kernel
    let mut ata = [0.0; 9];
    let mut atb = [0.0; 3];
    for (a, b) in &rows {
        for r in 0..3 {
            atb[r] += a[r] * b;
            for c in 0..3 {
                ata[r * 3 + c] += a[r] * a[c];
            }
        }
    }
    // column scaling keeps the system well conditioned
    let sc: Vec<f64> = (0..3).map(|i| ata[i * 3 + i].sqrt().max(f64::MIN_POSITIVE)).collect();
    let scaled: Vec<f64> = (0..9).map(|i| ata[i] / (sc[i / 3] * sc[i % 3])).collect();
    let inv = ComplexMatrix::from_real(3, &scaled)?.inverse()?;
    let mut x = [0.0; 3];
    for r in 0..3 {
        x[r] = (0..3).map(|c| inv[(r, c)].re * atb[c] / sc[c]).sum::<f64>() / sc[r];
    }
    let big = rows.iter().fold(0.0_f64, |m, (_, b)| m.max(b.abs()));
    let residual = rows
        .iter()
        .map(|(a, b)| (a[0] * x[0] + a[1] * x[1] + a[2] * x[2] - b).abs())
        .fold(0.0, f64::max)
        / big.max(f64::MIN_POSITIVE);
    Ok(CasimirFit { alpha: x[0], beta: x[1], gamma: x[2], residual })
}

/// First return of the reduced flow to `mu0` within `t_max`.
///
/// Uses the Euclidean distance in real momentum coordinates.
pub fn detect_shape_period(
    k: &CirculationMatrix,
    mu0: &MomentumValue,
    t_max: f64,
    threshold: f64,
    cfg: &IntegratorConfig,
) -> Result<Option<ReturnEvent>> {
    let lp = integrate_lp(k, mu0, (0.0, t_max), cfg)?;
    find_shape_period(&lp, threshold)
}

/// Searches an existing reduced trajectory for its first return.
pub fn find_shape_period(lp: &LpTrajectory, threshold: f64) -> Result<Option<ReturnEvent>> {
    let t_min = 1e-9 * lp.trajectory.end();
    ode::find_first_return(&lp.trajectory, ode::euclidean, threshold, t_min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reduction::{circulation_matrix, momentum_map_j, ShapeVector};
    use crate::vortex::CirculationVector;
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn cm(g: &[f64]) -> CirculationMatrix {
        circulation_matrix(&CirculationVector::new(g.to_vec()).unwrap()).unwrap()
    }

    const G3: [f64; 3] = [5.0, 10.0, 15.0];

    fn three_pvs() -> Mu3Coords {
        Mu3Coords::new(445.0 / 9.0, 64.0 / 9.0, 88.0 / 9.0, -16.0)
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
    }

    #[test]
    fn three_vortex_rates() {
        let want = 1345.0 / (148.0 * PI);
        let m = three_pvs();
        assert!(close(shape3_field(&G3, &m).unwrap().mu1, want, 1e-13));
        let lp = lp_field(&cm(&G3), &m.to_momentum()).unwrap();
        assert!(close(Mu3Coords::from_momentum(&lp).unwrap().mu1, want, 1e-13));
        let tri = TriangleShape::from(m);
        assert_eq!(tri.as_array(), [445.0 / 9.0, 64.0 / 9.0, 37.0, 8.0]);
        assert!(close(relative_motion_field(&G3, &tri).unwrap().l23sq, want, 1e-13));
        assert!(tri.feasibility_residual().abs() < 1e-10);
    }

    #[test]
    fn shape_from_j_matches_labels() {
        let z = ShapeVector::new(vec![c(8.0 / 3.0, 0.0), c(11.0 / 3.0, 6.0)]).unwrap();
        let m = Mu3Coords::from_momentum(&momentum_map_j(&z)).unwrap();
        for (a, b) in m.as_array().iter().zip(three_pvs().as_array()) {
            assert!(close(*a, b, 1e-14));
        }
        assert!(m.rank_residual().abs() < 1e-12 * 2500.0);
    }

    #[test]
    fn collinear_states_freeze_the_first_three_rates() {
        let m = Mu3Coords::new(4.0, 4.0, 1.3, 0.0);
        let d = shape3_field(&G3, &m).unwrap();
        assert_eq!((d.mu1, d.mu2, d.mu3), (0.0, 0.0, 0.0));
    }

    #[test]
    fn equilateral_is_a_relative_equilibrium() {
        let s = TriangleShape { l23sq: 2.0, l31sq: 2.0, l12sq: 2.0, area: 3f64.sqrt() / 2.0 };
        let d = relative_motion_field(&G3, &s).unwrap();
        assert_eq!(d.as_array(), [0.0; 4]);
    }

    #[test]
    fn domain_violations_are_singular() {
        let m = Mu3Coords::new(0.0, 1.0, 0.0, 0.0);
        assert!(matches!(shape3_field(&G3, &m), Err(Error::Singularity(_))));
        let s = TriangleShape { l23sq: 1.0, l31sq: 1.0, l12sq: 0.0, area: 0.0 };
        assert!(matches!(relative_motion_field(&G3, &s), Err(Error::Singularity(_))));
    }

    #[test]
    fn three_vortex_shape_casimirs() {
        let (c1, _) = shape_casimirs(&G3, &TriangleShape::from(three_pvs())).unwrap();
        assert!(close(c1, 980.0 / 3.0, 1e-14));
    }

    #[test]
    fn shape_circulations_need_two_dimensions() {
        assert_eq!(shape_circulations(&cm(&G3)).unwrap(), G3);
        assert_eq!(shape_circulations(&cm(&[5.0, 10.0, -7.0, -8.0])).unwrap(), [5.0, 10.0, -7.0]);
        assert!(shape_circulations(&cm(&[1.0, 2.0, 3.0, 4.0])).is_err());
    }

    #[test]
    fn three_vortex_conservation() {
        let k = cm(&G3);
        let cfg = IntegratorConfig::with_tolerances(1e-10, 1e-12);
        let lp = integrate_lp(&k, &three_pvs().to_momentum(), (0.0, 50.0), &cfg).unwrap();
        assert!(lp.warning.is_none());
        assert!(lp.drift.c1 <= 1e-9, "{:?}", lp.drift);
        assert!(lp.drift.c2_shape.unwrap() <= 1e-8, "{:?}", lp.drift);
        assert!(lp.drift.d <= 1e-8, "{:?}", lp.drift);
        assert!(lp.drift.h <= 1e-8, "{:?}", lp.drift);
        let norm2 = three_pvs().to_momentum().coordinate_norm().powi(2);
        for i in 0..lp.trajectory.len() {
            let m = Mu3Coords::from_momentum(&lp.momentum(i)).unwrap();
            assert!(m.rank_residual().abs() <= 1e-8 * norm2);
            assert!(m.mu1 > 0.0 && m.mu2 > 0.0);
        }
    }

    #[test]
    fn shape_casimirs_are_conserved_by_relative_motion() {
        let s0 = TriangleShape::from(three_pvs());
        let cfg = IntegratorConfig::with_tolerances(1e-10, 1e-12);
        let tr = ode::integrate(
            |_, x, dx| {
                let s = TriangleShape { l23sq: x[0], l31sq: x[1], l12sq: x[2], area: x[3] };
                dx.copy_from_slice(&relative_motion_field(&G3, &s)?.as_array());
                Ok(())
            },
            &s0.as_array(),
            (0.0, 50.0),
            &cfg,
        )
        .unwrap();
        let (c1, c2) = shape_casimirs(&G3, &s0).unwrap();
        for x in tr.states() {
            let s = TriangleShape { l23sq: x[0], l31sq: x[1], l12sq: x[2], area: x[3] };
            let (a, b) = shape_casimirs(&G3, &s).unwrap();
            assert!(close(a, c1, 1e-8) && close(b, c2, 1e-8), "{a} {b}");
        }
    }

    #[test]
    fn collinear_shape_casimir_is_finite_and_conserved() {
        // collinear start, A = 0
        let z = ShapeVector::new(vec![c(2.0, 0.0), c(-1.0, 0.0)]).unwrap();
        let m0 = Mu3Coords::from_momentum(&momentum_map_j(&z)).unwrap();
        let s0 = TriangleShape::from(m0);
        assert_eq!(s0.area, 0.0);
        let (_, c2) = shape_casimirs(&G3, &s0).unwrap();
        assert!(c2.is_finite());
        let lp = integrate_lp(&cm(&G3), &m0.to_momentum(), (0.0, 20.0), &IntegratorConfig::with_tolerances(1e-10, 1e-12)).unwrap();
        assert!(lp.drift.c2_shape.unwrap() <= 1e-8);
    }

    #[test]
    fn zero_angular_impulse_is_flagged() {
        // K = [[0,1],[1,0]]: R(z) = -Re(z₁* z₂) vanishes for z = (1, i)
        let k = cm(&[1.0, 1.0, -1.0]);
        let z = ShapeVector::new(vec![c(1.0, 0.0), c(0.0, 1.0)]).unwrap();
        let lp = integrate_lp(&k, &momentum_map_j(&z), (0.0, 0.5), &IntegratorConfig::default()).unwrap();
        assert_eq!(lp.warning.as_deref(), Some(ZERO_R_WARNING));
    }

    #[test]
    fn three_vortex_period() {
        let k = cm(&G3);
        let mu0 = three_pvs().to_momentum();
        let cfg = IntegratorConfig::with_tolerances(1e-11, 1e-13);
        let threshold = 1e-6 * mu0.coordinate_norm();
        let ev = detect_shape_period(&k, &mu0, 40.0, threshold, &cfg).unwrap().unwrap();
        assert!(ev.time > 20.0 && ev.time < 23.0, "{ev:?}");
        assert!(ev.distance <= threshold);
    }

    #[test]
    fn equilateral_never_returns() {
        let k = cm(&G3);
        let w = Complex64::from_polar(1.0, PI / 3.0);
        let mu = momentum_map_j(&ShapeVector::new(vec![c(1.0, 0.0), w]).unwrap());
        let r = detect_shape_period(&k, &mu, 30.0, 1e-6, &IntegratorConfig::default()).unwrap();
        assert_eq!(r, None);
    }

    #[test]
    fn shape_casimir_fit() {
        let k = cm(&G3);
        let mut rng = 0x2545F4914F6CDD1Du64;
        let mut next = || {
            rng ^= rng << 13;
            rng ^= rng >> 7;
            rng ^= rng << 17;
            (rng >> 11) as f64 / (1u64 << 53) as f64 * 20.0 - 10.0
        };
        let samples: Vec<MomentumValue> = (0..50)
            .map(|_| Mu3Coords::new(next(), next(), next(), next()).to_momentum())
            .collect();
        let fit = fit_shape_casimir(&k, &samples).unwrap();
        let alpha = (30.0f64 / 750.0).powi(2);
        assert!(close(fit.alpha, alpha, 1e-9), "{fit:?}");
        assert!(close(fit.beta, -2.0 * alpha, 1e-9), "{fit:?}");
        assert!(fit.gamma.abs() < 1e-9, "{fit:?}");
        assert!(fit.residual < 1e-12, "{fit:?}");
    }

    fn arb_domain() -> impl Strategy<Value = (Mu3Coords, [f64; 3])> {
        (
            (0.1f64..10.0, 0.1f64..10.0, -5.0f64..5.0, -5.0f64..5.0),
            prop::array::uniform3(prop_oneof![0.5f64..5.0, -5.0f64..-0.5]),
        )
            .prop_filter_map("outside the domain or ill-conditioned", |((a, b, c, d), g)| {
                let m = Mu3Coords::new(a, b, c, d);
                let s = a + b - 2.0 * c;
                let total: f64 = g.iter().sum();
                (s > 0.1 && total.abs() > 0.5).then_some((m, g))
            })
    }

    proptest! {
        #[test]
        fn field_conjugacy((m, g) in arb_domain()) {
            let k = cm(&g);
            let lp = Mu3Coords::from_momentum(&lp_field(&k, &m.to_momentum()).unwrap()).unwrap();
            let s3 = shape3_field(&g, &m).unwrap();
            let scale = s3.as_array().iter().fold(1.0_f64, |a, b| a.max(b.abs()));
            for (a, b) in lp.as_array().iter().zip(s3.as_array()) {
                prop_assert!((a - b).abs() <= 1e-10 * scale, "{:?} vs {:?}", lp, s3);
            }
            let rm = relative_motion_field(&g, &TriangleShape::from(m)).unwrap();
            // push the μ-rates through the linear variable map
            let pushed = TriangleShape {
                l23sq: s3.mu1,
                l31sq: s3.mu2,
                l12sq: s3.mu1 + s3.mu2 - 2.0 * s3.mu3,
                area: -0.5 * s3.mu4,
            };
            for (a, b) in rm.as_array().iter().zip(pushed.as_array()) {
                prop_assert!((a - b).abs() <= 1e-10 * scale);
            }
        }

        #[test]
        fn casimirs_have_zero_rate((m, g) in arb_domain()) {
            let k = cm(&g);
            let mu = m.to_momentum();
            let rate = lp_field(&k, &mu).unwrap();
            // dC_j = j tr((iKμ)^{j-1} iK dμ)
            let a = (k.matrix() * mu.matrix()).scale(Complex64::i());
            let ik_rate = (k.matrix() * rate.matrix()).scale(Complex64::i());
            for j in 1..=3u32 {
                let d = (&a.pow(j - 1) * &ik_rate).trace().re * j as f64;
                let scale = a.frobenius_norm().powi(j as i32 - 1) * ik_rate.frobenius_norm();
                prop_assert!(d.abs() <= 1e-10 * scale.max(1e-300), "j={} {}", j, d);
            }
        }
    }
}
