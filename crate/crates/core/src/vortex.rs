//! The unreduced N-vortex system in the complex plane.

use std::f64::consts::PI;
use std::ops::Deref;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::ode::{self, IntegratorConfig, Trajectory};

/// Circulations below this magnitude are rejected.
pub const MIN_CIRCULATION: f64 = 1e-12;

/// Relative threshold for classifying the total circulation as zero.
pub const ZERO_TOTAL_TOL: f64 = 1e-12;

/// Vortices closer than this are treated as colliding.
pub const COLLISION_DISTANCE: f64 = 1e-10;

/// Which translational reduction applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// `Γ ≠ 0`: shape space has dimension `N - 1`.
    NonzeroTotal,
    /// `Γ = 0`: shape space has dimension `N - 2`.
    ZeroTotal,
}

impl Branch {
    pub fn label(self) -> &'static str {
        match self {
            Branch::NonzeroTotal => "Gamma!=0",
            Branch::ZeroTotal => "Gamma=0",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CirculationVector {
    gammas: Vec<f64>,
    total: f64,
    branch: Branch,
}

impl CirculationVector {
    pub fn new(gammas: Vec<f64>) -> Result<Self> {
        if gammas.len() < 2 {
            return Err(Error::Validation(format!(
                "need at least two vortices, got {}",
                gammas.len()
            )));
        }
        for (j, &g) in gammas.iter().enumerate() {
            if !g.is_finite() || g.abs() < MIN_CIRCULATION {
                return Err(Error::Validation(format!(
                    "circulation {} of vortex {} must be finite and nonzero",
                    g,
                    j + 1
                )));
            }
        }
        let total: f64 = gammas.iter().sum();
        let scale: f64 = gammas.iter().map(|g| g.abs()).sum();
        let branch = if total.abs() <= ZERO_TOTAL_TOL * scale {
            Branch::ZeroTotal
        } else {
            Branch::NonzeroTotal
        };
        Ok(Self { gammas, total, branch })
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn len(&self) -> usize {
        self.gammas.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn branch(&self) -> Branch {
        self.branch
    }

    /// Dimension `M` of the shape space.
    pub fn shape_dim(&self) -> usize {
        match self.branch {
            Branch::NonzeroTotal => self.len() - 1,
            Branch::ZeroTotal => self.len() - 2,
        }
    }
}

/// Collision-free vortex positions.
#[derive(Debug, Clone, PartialEq)]
pub struct VortexConfiguration {
    positions: Vec<Complex64>,
}

impl VortexConfiguration {
    pub fn new(positions: Vec<Complex64>) -> Result<Self> {
        if positions.iter().any(|q| !q.re.is_finite() || !q.im.is_finite()) {
            return Err(Error::Validation("positions must be finite".into()));
        }
        if let Some((j, k, _)) = closest_pair(&positions) {
            if positions[j] == positions[k] {
                return Err(Error::Validation(format!(
                    "vortices {} and {} occupy the same position",
                    j + 1,
                    k + 1
                )));
            }
        }
        Ok(Self { positions })
    }

    /// Interleaved `[re q1, im q1, re q2, ...]`.
    pub fn from_flat(state: &[f64]) -> Result<Self> {
        if !state.len().is_multiple_of(2) {
            return Err(Error::Validation("flattened state must have even length".into()));
        }
        Self::new(unflatten(state))
    }

    pub fn to_flat(&self) -> Vec<f64> {
        flatten(&self.positions)
    }

    pub fn positions(&self) -> &[Complex64] {
        &self.positions
    }

    pub fn into_positions(self) -> Vec<Complex64> {
        self.positions
    }

    pub fn translated(&self, a: Complex64) -> Self {
        Self { positions: self.positions.iter().map(|q| q + a).collect() }
    }

    pub fn rotated(&self, theta: f64) -> Self {
        let r = Complex64::from_polar(1.0, theta);
        Self { positions: self.positions.iter().map(|q| r * q).collect() }
    }

    pub fn min_distance(&self) -> f64 {
        closest_pair(&self.positions).map_or(f64::INFINITY, |(_, _, d)| d)
    }
}

impl Deref for VortexConfiguration {
    type Target = [Complex64];

    fn deref(&self) -> &[Complex64] {
        &self.positions
    }
}

pub(crate) fn flatten(z: &[Complex64]) -> Vec<f64> {
    z.iter().flat_map(|c| [c.re, c.im]).collect()
}

pub(crate) fn unflatten(x: &[f64]) -> Vec<Complex64> {
    x.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect()
}

fn closest_pair(q: &[Complex64]) -> Option<(usize, usize, f64)> {
    let mut best: Option<(usize, usize, f64)> = None;
    for j in 0..q.len() {
        for k in j + 1..q.len() {
            let d = (q[j] - q[k]).norm();
            if best.is_none_or(|(_, _, b)| d < b) {
                best = Some((j, k, d));
            }
        }
    }
    best
}

fn check_len(gamma: &CirculationVector, q: &[Complex64]) -> Result<()> {
    if gamma.len() != q.len() {
        return Err(Error::Validation(format!(
            "{} circulations but {} positions",
            gamma.len(),
            q.len()
        )));
    }
    Ok(())
}

fn collision(j: usize, k: usize, d: f64) -> Error {
    Error::Singularity(format!("vortices {} and {} are {d:e} apart", j + 1, k + 1))
}

/// `q̇ⱼ = (i/2π) Σ_{k≠j} Γ_k (qⱼ - q_k) / |qⱼ - q_k|²`.
pub fn vortex_velocity(gamma: &CirculationVector, q: &[Complex64]) -> Result<Vec<Complex64>> {
    check_len(gamma, q)?;
    let mut out = vec![Complex64::new(0.0, 0.0); q.len()];
    velocity_into(gamma.gammas(), q, &mut out)?;
    Ok(out)
}

fn velocity_into(g: &[f64], q: &[Complex64], out: &mut [Complex64]) -> Result<()> {
    let n = q.len();
    out.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
    for j in 0..n {
        for k in j + 1..n {
            let d = q[j] - q[k];
            let r2 = d.norm_sqr();
            if !(r2.sqrt() >= COLLISION_DISTANCE) {
                return Err(collision(j, k, r2.sqrt()));
            }
            let w = d / r2;
            out[j] += w * g[k];
            out[k] -= w * g[j];
        }
    }
    let c = Complex64::new(0.0, 1.0 / (2.0 * PI));
    out.iter_mut().for_each(|v| *v *= c);
    Ok(())
}

/// `H = -(1/4π) Σ_{j<k} ΓⱼΓ_k ln|qⱼ - q_k|²`.
pub fn hamiltonian(gamma: &CirculationVector, q: &[Complex64]) -> Result<f64> {
    check_len(gamma, q)?;
    let g = gamma.gammas();
    let mut sum = 0.0;
    for j in 0..q.len() {
        for k in j + 1..q.len() {
            let r2 = (q[j] - q[k]).norm_sqr();
            if !(r2.sqrt() >= COLLISION_DISTANCE) {
                return Err(collision(j, k, r2.sqrt()));
            }
            sum += g[j] * g[k] * r2.ln();
        }
    }
    Ok(-sum / (4.0 * PI))
}

/// `I = -i Σ Γⱼ qⱼ`.
pub fn linear_impulse(gamma: &CirculationVector, q: &[Complex64]) -> Result<Complex64> {
    check_len(gamma, q)?;
    let s: Complex64 = gamma.gammas().iter().zip(q).map(|(g, q)| q * g).sum();
    Ok(-Complex64::i() * s)
}

/// `σ(a) = I(q + a·1) - I(q) = -iΓa`.
pub fn translation_cocycle(gamma: &CirculationVector, a: Complex64) -> Complex64 {
    -Complex64::i() * gamma.total() * a
}

/// Full-plane trajectory with conservation diagnostics.
#[derive(Debug, Clone)]
pub struct PlaneTrajectory {
    pub trajectory: Trajectory,
    pub initial_hamiltonian: f64,
    pub initial_impulse: Complex64,
    /// `max |H(t) - H(0)| / |H(0)|` over stored steps (absolute if `H(0) = 0`).
    pub hamiltonian_drift: f64,
    /// `max |I(t) - I(0)|` over stored steps.
    pub impulse_drift: f64,
    /// `max |I(t)|` over stored steps.
    pub max_impulse: f64,
}

impl PlaneTrajectory {
    pub fn positions_at(&self, t: f64) -> Result<Vec<Complex64>> {
        Ok(unflatten(&self.trajectory.sample(t)?))
    }

    pub fn positions(&self, i: usize) -> Vec<Complex64> {
        unflatten(self.trajectory.state(i))
    }
}

/// Integrates the vortex equations from `q0`.
pub fn simulate(
    gamma: &CirculationVector,
    q0: &VortexConfiguration,
    t_span: (f64, f64),
    cfg: &IntegratorConfig,
) -> Result<PlaneTrajectory> {
    check_len(gamma, q0)?;
    let g = gamma.gammas().to_vec();
    let n = g.len();
    let mut qbuf = vec![Complex64::new(0.0, 0.0); n];
    let mut vbuf = vec![Complex64::new(0.0, 0.0); n];
    let field = move |_t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        for (j, q) in qbuf.iter_mut().enumerate() {
            *q = Complex64::new(y[2 * j], y[2 * j + 1]);
        }
        velocity_into(&g, &qbuf, &mut vbuf)?;
        for (j, v) in vbuf.iter().enumerate() {
            dy[2 * j] = v.re;
            dy[2 * j + 1] = v.im;
        }
        Ok(())
    };
    let trajectory = ode::integrate(field, &q0.to_flat(), t_span, cfg)?;

    let h0 = hamiltonian(gamma, q0)?;
    let i0 = linear_impulse(gamma, q0)?;
    let (mut dh, mut di, mut imax) = (0.0_f64, 0.0_f64, i0.norm());
    for state in trajectory.states() {
        let q = unflatten(state);
        dh = dh.max((hamiltonian(gamma, &q)? - h0).abs());
        let imp = linear_impulse(gamma, &q)?;
        di = di.max((imp - i0).norm());
        imax = imax.max(imp.norm());
    }
    if h0 != 0.0 {
        dh /= h0.abs();
    }
    Ok(PlaneTrajectory {
        trajectory,
        initial_hamiltonian: h0,
        initial_impulse: i0,
        hamiltonian_drift: dh,
        impulse_drift: di,
        max_impulse: imax,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn gammas(g: &[f64]) -> CirculationVector {
        CirculationVector::new(g.to_vec()).unwrap()
    }

    fn three_pvs() -> (CirculationVector, VortexConfiguration) {
        (
            gammas(&[5.0, 10.0, 15.0]),
            VortexConfiguration::new(vec![c(1.0, -2.0), c(2.0, 4.0), c(-5.0 / 3.0, -2.0)])
                .unwrap(),
        )
    }

    #[test]
    fn branch_detection() {
        assert_eq!(gammas(&[5.0, 10.0, 15.0]).branch(), Branch::NonzeroTotal);
        assert_eq!(gammas(&[5.0, 10.0, -7.0, -8.0]).branch(), Branch::ZeroTotal);
        assert_eq!(gammas(&[5.0, 10.0, -7.0, -8.0]).shape_dim(), 2);
        assert!(CirculationVector::new(vec![1.0, 0.0]).is_err());
        assert!(CirculationVector::new(vec![1.0]).is_err());
    }

    #[test]
    fn duplicate_positions_rejected() {
        let err = VortexConfiguration::new(vec![c(1.0, 0.0), c(0.0, 1.0), c(1.0, 0.0)])
            .unwrap_err();
        assert!(err.to_string().contains("1 and 3"), "{err}");
    }

    #[test]
    fn two_vortex_velocity() {
        let v = vortex_velocity(&gammas(&[1.0, 1.0]), &[c(1.0, 0.0), c(-1.0, 0.0)]).unwrap();
        assert!((v[0] - c(0.0, 1.0 / (4.0 * PI))).norm() < 1e-16);
        assert!((v[1] - c(0.0, -1.0 / (4.0 * PI))).norm() < 1e-16);
    }

    #[test]
    fn near_collision_is_singular() {
        let r = vortex_velocity(&gammas(&[1.0, 1.0]), &[c(0.0, 0.0), c(1e-11, 0.0)]);
        assert!(matches!(r, Err(Error::Singularity(_))));
        let r = hamiltonian(&gammas(&[1.0, 1.0]), &[c(0.0, 0.0), c(0.0, 5e-11)]);
        assert!(matches!(r, Err(Error::Singularity(_))));
    }

    #[test]
    fn hamiltonian_examples() {
        let g = gammas(&[1.0, 1.0]);
        assert_eq!(hamiltonian(&g, &[c(0.0, 0.0), c(0.6, 0.8)]).unwrap(), 0.0);
        let (g, q) = three_pvs();
        let h = hamiltonian(&g, &q).unwrap();
        let shifted = hamiltonian(&g, &q.translated(c(3.0, 4.0))).unwrap();
        let turned = hamiltonian(&g, &q.rotated(1.2)).unwrap();
        assert!((h - shifted).abs() < 1e-12 * h.abs());
        assert!((h - turned).abs() < 1e-12 * h.abs());
    }

    #[test]
    fn impulse_examples() {
        let (g, q) = three_pvs();
        assert!(linear_impulse(&g, &q).unwrap().norm() < 1e-12);
        assert_eq!(linear_impulse(&g, &[c(0.0, 0.0); 3]).unwrap(), c(0.0, 0.0));

        let g4 = gammas(&[5.0, 10.0, -7.0, -8.0]);
        let q4 = [c(1.0, -2.0), c(2.0, 4.0), c(5.0, 0.0), c(25.0 / 8.0, -5.0 / 8.0)];
        // -i(-35 + 35i) = 35 + 35i
        let i4 = linear_impulse(&g4, &q4).unwrap();
        assert!((i4 - c(35.0, 35.0)).norm() < 1e-12, "{i4}");
    }

    #[test]
    fn cocycle_examples() {
        let g = gammas(&[5.0, 10.0, 15.0]);
        assert_eq!(translation_cocycle(&g, c(1.0, 1.0)), c(30.0, -30.0));
        assert_eq!(translation_cocycle(&g, c(0.0, 0.0)).norm(), 0.0);
        let g4 = gammas(&[5.0, 10.0, -7.0, -8.0]);
        assert_eq!(translation_cocycle(&g4, c(2.0, -7.0)).norm(), 0.0);
    }

    #[test]
    fn two_vortex_rigid_rotation() {
        let g = gammas(&[1.0, 1.0]);
        let q0 = VortexConfiguration::new(vec![c(1.0, 0.0), c(-1.0, 0.0)]).unwrap();
        let cfg = IntegratorConfig::with_tolerances(1e-11, 1e-13);
        let tr = simulate(&g, &q0, (0.0, 20.0), &cfg).unwrap();
        let omega = 1.0 / (4.0 * PI);
        for &t in &[1.0, 7.5, 20.0] {
            let q = tr.positions_at(t).unwrap();
            assert!(((q[0] - q[1]).norm() - 2.0).abs() < 1e-9);
            assert!((q[0] - Complex64::from_polar(1.0, omega * t)).norm() < 1e-9);
        }
    }

    #[test]
    fn velocity_matches_finite_difference_of_simulation() {
        let (g, q) = three_pvs();
        // negated circulations run the same system backwards in time
        let rev = CirculationVector::new(g.gammas().iter().map(|x| -x).collect()).unwrap();
        let cfg = IntegratorConfig::with_tolerances(1e-12, 1e-14);
        let h = 1e-3;
        let fwd = simulate(&g, &q, (0.0, h), &cfg).unwrap().positions_at(h).unwrap();
        let bwd = simulate(&rev, &q, (0.0, h), &cfg).unwrap().positions_at(h).unwrap();
        let v = vortex_velocity(&g, &q).unwrap();
        for j in 0..3 {
            let fd = (fwd[j] - bwd[j]) / (2.0 * h);
            assert!((fd - v[j]).norm() < 1e-6, "{fd} vs {}", v[j]);
        }
    }

    #[test]
    fn three_vortex_conservation() {
        let (g, q) = three_pvs();
        let cfg = IntegratorConfig::with_tolerances(1e-10, 1e-12);
        let tr = simulate(&g, &q, (0.0, 50.0), &cfg).unwrap();
        assert!(tr.hamiltonian_drift <= 1e-8, "{}", tr.hamiltonian_drift);
        assert!(tr.max_impulse <= 1e-9, "{}", tr.max_impulse);
    }

    fn arb_system() -> impl Strategy<Value = (Vec<f64>, Vec<Complex64>)> {
        (3usize..7).prop_flat_map(|n| {
            (
                prop::collection::vec(
                    prop_oneof![0.2f64..5.0, -5.0f64..-0.2],
                    n,
                ),
                prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), n)
                    .prop_map(|v| v.into_iter().map(|(a, b)| c(a, b)).collect()),
            )
        })
    }

    proptest! {
        #[test]
        fn impulse_identity((g, q) in arb_system()) {
            let g = CirculationVector::new(g).unwrap();
            prop_assume!(VortexConfiguration::new(q.clone()).unwrap().min_distance() > 1e-3);
            let v = vortex_velocity(&g, &q).unwrap();
            let s: Complex64 = g.gammas().iter().zip(&v).map(|(g, v)| v * g).sum();
            let scale: f64 = g.gammas().iter().zip(&v).map(|(g, v)| (v * g).norm()).sum();
            prop_assert!(s.norm() <= 1e-13 * scale.max(1.0));
        }

        #[test]
        fn field_is_se2_equivariant(
            (g, q) in arb_system(),
            theta in -3.2f64..3.2,
            a in (-5.0f64..5.0, -5.0f64..5.0),
        ) {
            let g = CirculationVector::new(g).unwrap();
            let cfg = VortexConfiguration::new(q).unwrap();
            prop_assume!(cfg.min_distance() > 1e-3);
            let moved = cfg.rotated(theta).translated(c(a.0, a.1));
            let v = vortex_velocity(&g, &cfg).unwrap();
            let w = vortex_velocity(&g, &moved).unwrap();
            let r = Complex64::from_polar(1.0, theta);
            let scale = v.iter().map(|x| x.norm()).fold(1.0, f64::max);
            for (v, w) in v.iter().zip(&w) {
                prop_assert!((r * v - w).norm() <= 1e-12 * scale);
            }
        }

        #[test]
        fn cocycle_property(
            (g, q) in arb_system(),
            a in (-5.0f64..5.0, -5.0f64..5.0),
        ) {
            let g = CirculationVector::new(g).unwrap();
            let a = c(a.0, a.1);
            let shifted: Vec<Complex64> = q.iter().map(|q| q + a).collect();
            let lhs = linear_impulse(&g, &shifted).unwrap() - linear_impulse(&g, &q).unwrap();
            let rhs = translation_cocycle(&g, a);
            let scale: f64 = g.gammas().iter().map(|g| g.abs()).sum::<f64>() * (a.norm() + 5.0);
            prop_assert!((lhs - rhs).norm() <= 1e-12 * scale);
        }
    }
}
