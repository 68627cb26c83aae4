//! Seeded invariant suite behind `vortex verify`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use vortex_core::algebra::{
    bracket, casimir, casimir_det, coad_group, coad_inf, collective_gradient,
    collective_hamiltonian, group_element, pairing, AlgebraElement,
};
use vortex_core::flow::{
    fit_shape_casimir, lp_field, relative_motion_field, shape3_field, CasimirFit, Mu3Coords,
    TriangleShape,
};
use vortex_core::matrix::{self, ComplexMatrix};
use vortex_core::reduction::{
    angular_impulse, circulation_matrix, embed_shape, momentum_map_j, CirculationMatrix,
    MomentumValue, ShapeVector,
};
use vortex_core::vortex::{
    linear_impulse, translation_cocycle, vortex_velocity, CirculationVector,
    VortexConfiguration,
};
use vortex_core::Complex64;

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub samples: usize,
    /// Largest observed error (in the check's own normalization).
    pub worst: f64,
    pub tolerance: f64,
    pub failure: Option<String>,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.failure.is_none() && self.worst <= self.tolerance
    }
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub seed: u64,
    pub checks: Vec<CheckResult>,
    /// Shape `C₂` against `{C₁², D, 1}`, per circulation triple.
    pub fits: Vec<([f64; 3], CasimirFit)>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }

    pub fn table(&self) -> String {
        let mut s = format!("{:<6} {:<44} {:>8} {:>12} {:>10}\n", "status", "check", "samples", "worst", "tol");
        for c in &self.checks {
            s.push_str(&format!(
                "{:<6} {:<44} {:>8} {:>12.3e} {:>10.1e}{}\n",
                if c.passed() { "PASS" } else { "FAIL" },
                c.name,
                c.samples,
                c.worst,
                c.tolerance,
                c.failure.as_ref().map(|f| format!("  ({f})")).unwrap_or_default()
            ));
        }
        for (g, f) in &self.fits {
            s.push_str(&format!(
                "fit    C2_shape = a*C1^2 + b*D + c for Gamma = {:?}: a = {:.12e}, b = {:.12e}, c = {:.3e}, residual = {:.3e}\n",
                g, f.alpha, f.beta, f.gamma, f.residual
            ));
        }
        s
    }

    pub fn to_json(&self) -> Value {
        json!({
            "seed": self.seed,
            "passed": self.passed(),
            "checks": self.checks.iter().map(|c| json!({
                "name": c.name,
                "passed": c.passed(),
                "samples": c.samples,
                "worst": c.worst,
                "tolerance": c.tolerance,
                "failure": c.failure,
            })).collect::<Vec<_>>(),
            "casimir_fits": self.fits.iter().map(|(g, f)| json!({
                "circulations": g,
                "alpha": f.alpha,
                "beta": f.beta,
                "gamma": f.gamma,
                "residual": f.residual,
            })).collect::<Vec<_>>(),
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SuiteOptions {
    pub seed: u64,
    /// Random samples per check.
    pub count: usize,
    /// Corrupts every circulation matrix checked for symmetry and determinant.
    pub inject_fault: bool,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self { seed: 1, count: 200, inject_fault: false }
    }
}

struct Acc {
    name: &'static str,
    tolerance: f64,
    samples: usize,
    worst: f64,
    failure: Option<String>,
}

impl Acc {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Self { name, tolerance, samples: 0, worst: 0.0, failure: None }
    }

    fn record(&mut self, err: f64) {
        self.samples += 1;
        if err.is_nan() {
            self.worst = f64::INFINITY;
        } else {
            self.worst = self.worst.max(err);
        }
    }

    fn fail(&mut self, msg: String) {
        self.samples += 1;
        if self.failure.is_none() {
            self.failure = Some(msg);
        }
    }

    fn finish(self) -> CheckResult {
        CheckResult {
            name: self.name,
            samples: self.samples,
            worst: self.worst,
            tolerance: self.tolerance,
            failure: self.failure,
        }
    }
}

fn rel(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale.max(a.abs()).max(b.abs()).max(f64::MIN_POSITIVE)
}

fn circulation(rng: &mut ChaCha8Rng) -> f64 {
    let m = rng.gen_range(0.2..5.0);
    if rng.gen_bool(0.5) {
        m
    } else {
        -m
    }
}

/// Random circulations whose total is either exactly zero or well away from it.
fn random_circulations(rng: &mut ChaCha8Rng, n: usize, zero_total: bool) -> Vec<f64> {
    loop {
        let mut g: Vec<f64> = (0..n).map(|_| circulation(rng)).collect();
        if zero_total {
            let head: f64 = g[..n - 1].iter().sum();
            if head.abs() < 0.2 {
                continue;
            }
            g[n - 1] = -head;
            return g;
        }
        let total: f64 = g.iter().sum();
        let abs: f64 = g.iter().map(|x| x.abs()).sum();
        if total.abs() >= 0.05 * abs {
            return g;
        }
    }
}

fn random_k(rng: &mut ChaCha8Rng, n_range: std::ops::Range<usize>) -> CirculationMatrix {
    let n = rng.gen_range(n_range);
    let zero = rng.gen_bool(0.5) && n >= 4;
    let g = random_circulations(rng, n, zero);
    circulation_matrix(&CirculationVector::new(g).expect("valid")).expect("invertible")
}

fn random_complex(rng: &mut ChaCha8Rng, r: f64) -> Complex64 {
    Complex64::new(rng.gen_range(-r..r), rng.gen_range(-r..r))
}

fn random_anti(rng: &mut ChaCha8Rng, m: usize, r: f64) -> ComplexMatrix {
    let mut a = ComplexMatrix::zeros(m);
    for j in 0..m {
        a[(j, j)] = Complex64::new(0.0, rng.gen_range(-r..r));
        for k in j + 1..m {
            let v = random_complex(rng, r);
            a[(j, k)] = v;
            a[(k, j)] = -v.conj();
        }
    }
    a
}

fn random_shape(rng: &mut ChaCha8Rng, m: usize) -> ShapeVector {
    loop {
        let z: Vec<Complex64> = (0..m).map(|_| random_complex(rng, 3.0)).collect();
        if let Ok(s) = ShapeVector::new(z) {
            if s.norm() > 0.1 {
                return s;
            }
        }
    }
}

fn check_matrix_kernel(rng: &mut ChaCha8Rng, count: usize, out: &mut Vec<CheckResult>) {
    let mut eig = Acc::new("hermitian eigen reconstruction", 1e-12);
    let mut exp = Acc::new("exp(A) exp(-A) = I", 1e-10);
    let mut det = Acc::new("det(exp A) = exp(tr A)", 1e-10);
    let mut rank = Acc::new("rank-one factor round trip", 1e-8);
    for _ in 0..count {
        let m = rng.gen_range(1..7);
        let a = ComplexMatrix::from_fn(m, |_, _| random_complex(rng, 1.0));
        let h = (&a + &a.adjoint()).scale_real(0.5);
        match matrix::hermitian_eigen(&h) {
            Ok(s) => {
                let e = (&s.reconstruct() - &h).frobenius_norm() / h.frobenius_norm().max(1e-300);
                let v = &s.eigenvectors;
                let o = (&(&v.adjoint() * v) - &ComplexMatrix::identity(m)).frobenius_norm();
                eig.record(e.max(o));
            }
            Err(e) => eig.fail(e.to_string()),
        }
        let norm = a.frobenius_norm();
        let a5 = a.scale_real(rng.gen_range(0.0..5.0) / norm.max(1e-300));
        match (matrix::matrix_exp(&a5), matrix::matrix_exp(&a5.scale_real(-1.0))) {
            (Ok(p), Ok(q)) => {
                exp.record((&(&p * &q) - &ComplexMatrix::identity(m)).frobenius_norm());
                let lhs = p.determinant();
                let rhs = a5.trace().exp();
                det.record((lhs - rhs).norm() / rhs.norm());
            }
            _ => exp.fail("matrix exponential failed".into()),
        }
        let z: Vec<Complex64> = (0..m).map(|_| random_complex(rng, 2.0)).collect();
        let p = ComplexMatrix::outer(&z, &z);
        match matrix::rank_one_factor(&p) {
            Ok(w) => {
                let back = ComplexMatrix::outer(&w, &w);
                rank.record((&back - &p).frobenius_norm() / p.frobenius_norm());
            }
            Err(e) => rank.fail(e.to_string()),
        }
    }
    out.extend([eig.finish(), exp.finish(), det.finish(), rank.finish()]);
}

fn check_vortex(rng: &mut ChaCha8Rng, count: usize, out: &mut Vec<CheckResult>) {
    let mut imp = Acc::new("impulse identity sum G_j v_j = 0", 1e-12);
    let mut se2 = Acc::new("SE(2) equivariance of the vortex field", 1e-12);
    let mut coc = Acc::new("translation cocycle", 1e-12);
    for _ in 0..count {
        let n = rng.gen_range(2..8);
        let g = CirculationVector::new((0..n).map(|_| circulation(rng)).collect()).expect("valid");
        let q: Vec<Complex64> = (0..n).map(|_| random_complex(rng, 3.0)).collect();
        let Ok(cfg) = VortexConfiguration::new(q) else { continue };
        if cfg.min_distance() < 1e-2 {
            continue;
        }
        let v = vortex_velocity(&g, &cfg).expect("collision-free");
        let s: Complex64 = g.gammas().iter().zip(&v).map(|(g, v)| v * g).sum();
        let scale: f64 = g.gammas().iter().zip(&v).map(|(g, v)| (v * g).norm()).sum();
        imp.record(s.norm() / scale.max(1e-300));

        let theta = rng.gen_range(-PI..PI);
        let a = random_complex(rng, 5.0);
        let moved = cfg.rotated(theta).translated(a);
        let w = vortex_velocity(&g, &moved).expect("collision-free");
        let r = Complex64::from_polar(1.0, theta);
        let vmax = v.iter().map(|x| x.norm()).fold(0.0, f64::max);
        let e = v.iter().zip(&w).map(|(v, w)| (r * v - w).norm()).fold(0.0, f64::max);
        se2.record(e / vmax.max(1e-300));

        let lhs = linear_impulse(&g, &cfg.translated(a)).unwrap() - linear_impulse(&g, &cfg).unwrap();
        let rhs = translation_cocycle(&g, a);
        let sc: f64 = g.gammas().iter().map(|x| x.abs()).sum::<f64>() * (a.norm() + 3.0);
        coc.record((lhs - rhs).norm() / sc);
    }
    out.extend([imp.finish(), se2.finish(), coc.finish()]);
}

fn check_reduction(opts: &SuiteOptions, rng: &mut ChaCha8Rng, out: &mut Vec<CheckResult>) {
    let mut det = Acc::new("circulation matrix symmetry and det lemma", 1e-10);
    let mut head = Acc::new("K0 equals K of the first N-1 vortices", 0.0);
    for i in 0..opts.count.max(1000) {
        let n = 3 + i % 6;
        let zero = i % 2 == 1;
        let g = random_circulations(rng, n, zero);
        let cv = CirculationVector::new(g.clone()).expect("valid");
        let k = circulation_matrix(&cv).expect("invertible");
        let checked = if opts.inject_fault { k.corrupted() } else { k.clone() };
        match checked.check() {
            Ok(()) => det.record(rel(checked.determinant(), checked.lemma_determinant(), 0.0)),
            Err(e) => det.fail(e.to_string()),
        }
        if zero {
            let h = circulation_matrix(&CirculationVector::new(g[..n - 1].to_vec()).unwrap()).unwrap();
            let diff = k.entries().iter().zip(h.entries()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            head.record(diff);
        }
    }
    out.extend([det.finish(), head.finish()]);

    let mut c1r = Acc::new("C1(J(z)) = 2 R(z)", 1e-12);
    let mut r1 = Acc::new("rank-one identity mu1 mu2 = mu3^2 + mu4^2", 1e-12);
    let mut eqv = Acc::new("J(Uz) = U J(z) U* and R(Uz) = R(z)", 1e-10);
    let mut emb = Acc::new("embedded shapes have zero linear impulse", 1e-12);
    for _ in 0..opts.count {
        let k = random_k(rng, 3..8);
        let m = k.dim();
        let z = random_shape(rng, m);
        let mu = momentum_map_j(&z);
        let r = angular_impulse(&k, &z).unwrap();
        let c1 = casimir(&k, &mu, 1).unwrap();
        c1r.record((c1 - 2.0 * r).abs() / (k.matrix().frobenius_norm() * z.norm().powi(2)));
        if m == 2 {
            let x = Mu3Coords::from_momentum(&mu).unwrap();
            r1.record(x.rank_residual().abs() / z.norm().powi(4));
        }
        let xi = AlgebraElement::new(random_anti(rng, m, 1.0).scale_real(1.0 / k.inverse().frobenius_norm())).unwrap();
        let u = group_element(&k, &xi, 1.0).unwrap();
        let uz = ShapeVector::new(u.act(z.as_slice())).unwrap();
        let lhs = momentum_map_j(&uz);
        let rhs = coad_group(&k, &u, &mu).unwrap();
        let e1 = lhs.matrix().max_abs_diff(rhs.matrix()) / lhs.norm();
        let e2 = (angular_impulse(&k, &uz).unwrap() - r).abs()
            / (k.matrix().frobenius_norm() * z.norm().powi(2));
        eqv.record(e1.max(e2));
        if let Ok(q) = embed_shape(&k, &z) {
            let sc: f64 = k.circulations().gammas().iter().zip(q.iter()).map(|(g, q)| g.abs() * q.norm()).sum();
            emb.record(linear_impulse(k.circulations(), &q).unwrap().norm() / sc.max(1e-300));
        }
    }
    out.extend([c1r.finish(), r1.finish(), eqv.finish(), emb.finish()]);
}

fn check_algebra(rng: &mut ChaCha8Rng, count: usize, out: &mut Vec<CheckResult>) {
    let mut clo = Acc::new("bracket closure (anti-Hermitian)", 1e-12);
    let mut jac = Acc::new("Jacobi identity", 1e-12);
    let mut pair = Acc::new("<ad*_x mu, eta> = <mu, [x, eta]_K>", 1e-12);
    let mut memb = Acc::new("U*KU = K for U = exp(t K^-1 xi)", 1e-10);
    let mut inv = Acc::new("Ad*-invariance of C1..C4 and D", 1e-10);
    let mut real = Acc::new("Casimir traces are real", 1e-12);
    let mut two = Acc::new("2x2 identity C2 = C1^2 - 2D", 1e-12);
    let mut grad = Acc::new("collective gradient vs finite difference", 1e-6);
    for _ in 0..count {
        let k = random_k(rng, 3..7);
        let m = k.dim();
        let ki = k.inverse().frobenius_norm();
        let x: Vec<AlgebraElement> =
            (0..3).map(|_| AlgebraElement::new(random_anti(rng, m, 1.0)).unwrap()).collect();
        let b = |a: &AlgebraElement, c: &AlgebraElement| bracket(&k, a, c).unwrap();
        let ab = b(&x[0], &x[1]);
        clo.record(ab.matrix().anti_hermitian_defect());
        let j = &(&(b(&x[0], &b(&x[1], &x[2]))).matrix().clone() + b(&x[1], &b(&x[2], &x[0])).matrix())
            + b(&x[2], &b(&x[0], &x[1])).matrix();
        jac.record(j.frobenius_norm() / (ki * ki * 10.0));

        let mu = MomentumValue::new(random_anti(rng, m, 1.0)).unwrap();
        let lhs = pairing(coad_inf(&k, &x[0], &mu).unwrap().matrix(), x[1].matrix());
        let rhs = pairing(mu.matrix(), ab.matrix());
        pair.record((lhs - rhs).abs() / (ki * 10.0));

        let xi = AlgebraElement::new(x[2].matrix().scale_real(1.0 / ki)).unwrap();
        let t = rng.gen_range(-2.0..2.0);
        let u = group_element(&k, &xi, t).unwrap();
        memb.record(u.membership_residual(&k));

        let moved = coad_group(&k, &u, &mu).unwrap();
        let scale = (k.matrix() * mu.matrix()).frobenius_norm();
        let mut worst = 0.0_f64;
        for j in 1..=4u32 {
            match (casimir(&k, &mu, j), casimir(&k, &moved, j)) {
                (Ok(a), Ok(b)) => {
                    worst = worst.max(rel(a, b, scale.powi(j as i32)));
                    real.record(0.0);
                }
                (Err(e), _) | (_, Err(e)) => real.fail(e.to_string()),
            }
        }
        match (casimir_det(&k, &mu), casimir_det(&k, &moved)) {
            (Ok(a), Ok(b)) => worst = worst.max(rel(a, b, scale.powi(m as i32))),
            (Err(e), _) | (_, Err(e)) => real.fail(e.to_string()),
        }
        inv.record(worst);

        if m == 2 {
            let (c1, c2, d) =
                (casimir(&k, &mu, 1).unwrap(), casimir(&k, &mu, 2).unwrap(), casimir_det(&k, &mu).unwrap());
            two.record((c2 - (c1 * c1 - 2.0 * d)).abs() / (c1 * c1 + c2.abs() + d.abs()).max(1e-300));
        }

        let z = random_shape(rng, m);
        let Ok(q) = embed_shape(&k, &z) else { continue };
        if q.min_distance() < 0.3 * z.norm() {
            continue;
        }
        let mu = momentum_map_j(&z);
        let g = collective_gradient(&k, &mu).unwrap();
        let nu = random_anti(rng, m, 1.0);
        let step = 1e-5 * mu.norm();
        let h = |s: f64| collective_hamiltonian(&k, &MomentumValue::new(mu.matrix() + &nu.scale_real(s)).unwrap());
        if let (Ok(hp), Ok(hm)) = (h(step), h(-step)) {
            let fd = (hp - hm) / (2.0 * step);
            let exact = pairing(&nu, g.matrix());
            grad.record((fd - exact).abs() / exact.abs().max(1e-3));
        }
    }
    out.extend([
        clo.finish(),
        jac.finish(),
        pair.finish(),
        memb.finish(),
        inv.finish(),
        real.finish(),
        two.finish(),
        grad.finish(),
    ]);
}

fn check_flow(rng: &mut ChaCha8Rng, count: usize, out: &mut Vec<CheckResult>) {
    let mut conj = Acc::new("lp_field = shape3_field = relative motion", 1e-10);
    let mut rate = Acc::new("Casimir rates vanish along lp_field", 1e-10);
    let mut done = 0;
    while done < count {
        let g = random_circulations(rng, 3, false);
        let g3 = [g[0], g[1], g[2]];
        let m = Mu3Coords::new(
            rng.gen_range(0.1..10.0),
            rng.gen_range(0.1..10.0),
            rng.gen_range(-5.0..5.0),
            rng.gen_range(-5.0..5.0),
        );
        if m.mu1 + m.mu2 - 2.0 * m.mu3 < 0.1 {
            continue;
        }
        done += 1;
        let k = circulation_matrix(&CirculationVector::new(g).unwrap()).unwrap();
        let mu = m.to_momentum();
        let lp = lp_field(&k, &mu).unwrap();
        let a = Mu3Coords::from_momentum(&lp).unwrap().as_array();
        let s3 = shape3_field(&g3, &m).unwrap();
        let b = s3.as_array();
        let rm = relative_motion_field(&g3, &TriangleShape::from(m)).unwrap().as_array();
        let pushed = [s3.mu1, s3.mu2, s3.mu1 + s3.mu2 - 2.0 * s3.mu3, -0.5 * s3.mu4];
        let scale = b.iter().fold(1.0_f64, |s, x| s.max(x.abs()));
        let e = (0..4).map(|i| (a[i] - b[i]).abs().max((rm[i] - pushed[i]).abs())).fold(0.0, f64::max);
        conj.record(e / scale);

        let ika = (k.matrix() * mu.matrix()).scale(Complex64::i());
        let ikr = (k.matrix() * lp.matrix()).scale(Complex64::i());
        for j in 1..=3u32 {
            let d = (&ika.pow(j - 1) * &ikr).trace().re * j as f64;
            let sc = ika.frobenius_norm().powi(j as i32 - 1) * ikr.frobenius_norm();
            rate.record(d.abs() / sc.max(1e-300));
        }
    }
    out.extend([conj.finish(), rate.finish()]);
}

fn casimir_fits(rng: &mut ChaCha8Rng, count: usize, out: &mut Vec<CheckResult>) -> Vec<([f64; 3], CasimirFit)> {
    let mut acc = Acc::new("shape C2 lies in span{C1^2, D, 1}", 1e-10);
    let mut fits = Vec::new();
    let mut sets = vec![[5.0, 10.0, 15.0], [5.0, 10.0, -7.0], [1.0, 2.0, 3.0]];
    let g = random_circulations(rng, 3, false);
    sets.push([g[0], g[1], g[2]]);
    for g in sets {
        let k = circulation_matrix(&CirculationVector::new(g.to_vec()).unwrap()).unwrap();
        let samples: Vec<MomentumValue> =
            (0..count.max(10)).map(|_| MomentumValue::new(random_anti(rng, 2, 10.0)).unwrap()).collect();
        match fit_shape_casimir(&k, &samples) {
            Ok(f) => {
                acc.record(f.residual);
                fits.push((g, f));
            }
            Err(e) => acc.fail(e.to_string()),
        }
    }
    out.push(acc.finish());
    fits
}

pub fn run_suite(opts: &SuiteOptions) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut checks = Vec::new();
    check_matrix_kernel(&mut rng, opts.count, &mut checks);
    check_vortex(&mut rng, opts.count, &mut checks);
    check_reduction(opts, &mut rng, &mut checks);
    check_algebra(&mut rng, opts.count, &mut checks);
    check_flow(&mut rng, opts.count, &mut checks);
    let fits = casimir_fits(&mut rng, opts.count, &mut checks);
    SuiteReport { seed: opts.seed, checks, fits }
}
