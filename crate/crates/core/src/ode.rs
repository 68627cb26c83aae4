//! Adaptive Dormand–Prince 5(4) integration with continuous output.
//!
//! The integrator keeps every accepted step together with the coefficients of
//! the fourth-order continuous extension, so trajectories can be sampled at
//! arbitrary times and searched for returns to their initial state.

use crate::error::{Error, IntegrationError, IntegrationFailure, Result};

/// Tolerances and step limits for [`integrate`].
#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// `None` means unbounded.
    pub max_step: Option<f64>,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { rel_tol: 1e-10, abs_tol: 1e-12, max_step: None, max_steps: 1_000_000 }
    }
}

impl IntegratorConfig {
    pub fn with_tolerances(rel_tol: f64, abs_tol: f64) -> Self {
        Self { rel_tol, abs_tol, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| (1e-14..=1e-2).contains(&x);
        if !ok(self.rel_tol) || !ok(self.abs_tol) {
            return Err(Error::Validation(format!(
                "tolerances must lie in [1e-14, 1e-2] (rel_tol = {:e}, abs_tol = {:e})",
                self.rel_tol, self.abs_tol
            )));
        }
        if let Some(h) = self.max_step {
            if !(h > 0.0) {
                return Err(Error::Validation("max_step must be positive".into()));
            }
        }
        if self.max_steps == 0 {
            return Err(Error::Validation("max_steps must be positive".into()));
        }
        Ok(())
    }
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// continuous extension
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

// step-size control
const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO: f64 = 0.2 - BETA * 0.75;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

/// Accepted steps of an integration plus their continuous extension.
#[derive(Debug, Clone)]
pub struct Trajectory {
    dim: usize,
    times: Vec<f64>,
    /// Flattened, `dim` values per stored time.
    states: Vec<f64>,
    /// Flattened, `5 * dim` coefficients per step.
    dense: Vec<f64>,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn states(&self) -> impl Iterator<Item = &[f64]> {
        self.states.chunks_exact(self.dim)
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn last_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    /// State at `t` from the continuous extension of the step containing it.
    pub fn sample(&self, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.sample_into(t, &mut out)?;
        Ok(out)
    }

    pub fn sample_into(&self, t: f64, out: &mut [f64]) -> Result<()> {
        let (start, end) = (self.start(), self.end());
        if !(t >= start && t <= end) {
            return Err(Error::Range { t, start, end });
        }
        let idx = self.times.partition_point(|&s| s <= t);
        if idx > 0 && self.times[idx - 1] == t {
            out.copy_from_slice(self.state(idx - 1));
            return Ok(());
        }
        let step = idx - 1;
        let (t0, t1) = (self.times[step], self.times[step + 1]);
        let theta = (t - t0) / (t1 - t0);
        let theta1 = 1.0 - theta;
        let n = self.dim;
        let r = &self.dense[step * 5 * n..(step + 1) * 5 * n];
        for i in 0..n {
            out[i] = r[i]
                + theta
                    * (r[n + i]
                        + theta1 * (r[2 * n + i] + theta * (r[3 * n + i] + theta1 * r[4 * n + i])));
        }
        Ok(())
    }
}

/// Integrates `y' = field(t, y)` over `t_span = (t0, t1)`, `t1 > t0`.
///
/// `field` writes the derivative into its third argument. A field error
/// rejects the trial step and retries with a smaller one; if the step size
/// collapses the integration fails with the last accepted state.
pub fn integrate<F>(
    mut field: F,
    y0: &[f64],
    t_span: (f64, f64),
    cfg: &IntegratorConfig,
) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    cfg.validate()?;
    let (t0, t_end) = t_span;
    if !(t0.is_finite() && t_end.is_finite() && t_end > t0) {
        return Err(Error::Validation(format!("invalid time span ({t0}, {t_end})")));
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("initial state is not finite".into()));
    }
    let n = y0.len();
    let max_step = cfg.max_step.unwrap_or(t_end - t0).min(t_end - t0);

    let fail = |reason, t: f64, y: &[f64], detail: Option<String>| {
        Error::Integration(IntegrationError { reason, t, state: y.to_vec(), detail })
    };

    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; n];
    if let Err(e) = field(t0, &y, &mut k1) {
        return Err(fail(IntegrationFailure::FieldFailure, t0, &y, Some(e.to_string())));
    }

    let mut traj = Trajectory { dim: n, times: vec![t0], states: y.clone(), dense: Vec::new() };

    let mut h = initial_step(&mut field, t0, &y, &k1, cfg, max_step);
    let mut t = t0;
    let mut fac_old = 1e-4_f64;
    let mut last_reject = false;
    let mut steps = 0usize;
    let mut last_field_error: Option<String> = None;

    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];

    while t < t_end {
        if steps >= cfg.max_steps {
            return Err(fail(IntegrationFailure::MaxSteps, t, &y, last_field_error));
        }
        steps += 1;
        let remaining = t_end - t;
        if h >= remaining || (remaining - h) <= 1e-12 * t_end.abs().max(1.0) {
            h = remaining;
        }
        if h <= 8.0 * f64::EPSILON * t.abs().max(1.0) {
            let reason = if last_field_error.is_some() {
                IntegrationFailure::FieldFailure
            } else {
                IntegrationFailure::StepUnderflow
            };
            return Err(fail(reason, t, &y, last_field_error));
        }

        let stages = (|| -> Result<()> {
            for i in 0..n {
                ytmp[i] = y[i] + h * A21 * k1[i];
            }
            field(t + C2 * h, &ytmp, &mut k2)?;
            for i in 0..n {
                ytmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
            }
            field(t + C3 * h, &ytmp, &mut k3)?;
            for i in 0..n {
                ytmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            field(t + C4 * h, &ytmp, &mut k4)?;
            for i in 0..n {
                ytmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            field(t + C5 * h, &ytmp, &mut k5)?;
            for i in 0..n {
                ytmp[i] = y[i]
                    + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            field(t + h, &ytmp, &mut k6)?;
            for i in 0..n {
                ynew[i] = y[i]
                    + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
            }
            field(t + h, &ynew, &mut k7)?;
            Ok(())
        })();

        if let Err(e) = stages {
            last_field_error = Some(e.to_string());
            h *= 0.25;
            last_reject = true;
            continue;
        }

        let mut err_sq = 0.0;
        for i in 0..n {
            let e = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = cfg.abs_tol + cfg.rel_tol * y[i].abs().max(ynew[i].abs());
            err_sq += (e / sc) * (e / sc);
        }
        let err = if n == 0 { 0.0 } else { (err_sq / n as f64).sqrt() };
        if !err.is_finite() || ynew.iter().any(|v| !v.is_finite()) {
            last_field_error = Some("non-finite state in trial step".into());
            h *= 0.25;
            last_reject = true;
            continue;
        }

        let fac11 = err.powf(EXPO);
        if err <= 1.0 {
            let fac = (fac11 / fac_old.powf(BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_new = h / fac;
            fac_old = err.max(1e-4);

            let base = traj.dense.len();
            traj.dense.resize(base + 5 * n, 0.0);
            let r = &mut traj.dense[base..];
            for i in 0..n {
                let dy = ynew[i] - y[i];
                let bspl = h * k1[i] - dy;
                r[i] = y[i];
                r[n + i] = dy;
                r[2 * n + i] = bspl;
                r[3 * n + i] = dy - h * k7[i] - bspl;
                r[4 * n + i] = h
                    * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i]
                        + D7 * k7[i]);
            }
            t = if h == remaining { t_end } else { t + h };
            std::mem::swap(&mut y, &mut ynew);
            std::mem::swap(&mut k1, &mut k7);
            traj.times.push(t);
            traj.states.extend_from_slice(&y);

            h_new = h_new.min(max_step);
            if last_reject {
                h_new = h_new.min(h);
            }
            last_reject = false;
            last_field_error = None;
            h = h_new;
        } else {
            h /= (fac11 / SAFETY).min(1.0 / FAC_MIN);
            last_reject = true;
        }
    }
    Ok(traj)
}

fn initial_step<F>(
    field: &mut F,
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    cfg: &IntegratorConfig,
    max_step: f64,
) -> f64
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let n = y0.len();
    if n == 0 {
        return max_step;
    }
    let sc: Vec<f64> = y0.iter().map(|v| cfg.abs_tol + cfg.rel_tol * v.abs()).collect();
    let rms = |v: &[f64]| {
        (v.iter().zip(&sc).map(|(x, s)| (x / s) * (x / s)).sum::<f64>() / n as f64).sqrt()
    };
    let d0 = rms(y0);
    let d1 = rms(f0);
    let mut h0 = if d0 < 1e-10 || d1 < 1e-10 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(max_step);
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + h0 * f).collect();
    let mut f1 = vec![0.0; n];
    if field(t0 + h0, &y1, &mut f1).is_err() {
        return h0 * 1e-3;
    }
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| (a - b) / h0).collect();
    let d2 = rms(&diff);
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / 5.0)
    };
    (100.0 * h0).min(h1).min(max_step)
}

/// A detected return of a trajectory to its initial state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReturnEvent {
    pub time: f64,
    pub distance: f64,
}

/// Golden-section refinement stops once the bracket is narrower than this.
pub const RETURN_TIME_TOL: f64 = 1e-9;

/// Samples of the continuous extension inspected per accepted step.
const SCAN_SUBDIVISIONS: usize = 8;

/// Searches `traj` for the first local minimum of `distance(y(t), y(t0))`
/// with `t >= t_min` and distance at most `threshold`.
///
/// A minimum only counts after the trajectory has first moved farther than
/// `2 * threshold` from its initial state, so a system that never departs has
/// no return.
pub fn find_first_return<D>(
    traj: &Trajectory,
    mut distance: D,
    threshold: f64,
    t_min: f64,
) -> Result<Option<ReturnEvent>>
where
    D: FnMut(&[f64], &[f64]) -> f64,
{
    let y0 = traj.state(0).to_vec();
    let mut buf = vec![0.0; traj.dim()];
    let mut eval = |t: f64, buf: &mut [f64]| -> Result<f64> {
        traj.sample_into(t, buf)?;
        Ok(distance(buf, &y0))
    };

    let mut samples: Vec<f64> = Vec::with_capacity(traj.len() * SCAN_SUBDIVISIONS);
    for w in traj.times().windows(2) {
        for s in 0..SCAN_SUBDIVISIONS {
            samples.push(w[0] + (w[1] - w[0]) * s as f64 / SCAN_SUBDIVISIONS as f64);
        }
    }
    samples.push(traj.end());

    let mut departed = false;
    let mut prev = (samples[0], eval(samples[0], &mut buf)?);
    let mut cur = match samples.get(1) {
        Some(&t) => (t, eval(t, &mut buf)?),
        None => return Ok(None),
    };
    if prev.1 > 2.0 * threshold {
        departed = true;
    }
    for &t_next in &samples[2..] {
        let next = (t_next, eval(t_next, &mut buf)?);
        if cur.1 > 2.0 * threshold {
            departed = true;
        }
        let is_min = cur.1 <= prev.1 && cur.1 <= next.1 && (cur.1 < prev.1 || cur.1 < next.1);
        if departed && is_min && next.0 >= t_min {
            let (mut a, mut b) = (prev.0.max(t_min), next.0);
            let phi = 0.5 * (5f64.sqrt() - 1.0);
            let mut x1 = b - phi * (b - a);
            let mut x2 = a + phi * (b - a);
            let mut f1 = eval(x1, &mut buf)?;
            let mut f2 = eval(x2, &mut buf)?;
            while b - a > RETURN_TIME_TOL {
                if f1 <= f2 {
                    b = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = b - phi * (b - a);
                    f1 = eval(x1, &mut buf)?;
                } else {
                    a = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = a + phi * (b - a);
                    f2 = eval(x2, &mut buf)?;
                }
            }
            let time = 0.5 * (a + b);
            let d = eval(time, &mut buf)?;
            if d <= threshold {
                return Ok(Some(ReturnEvent { time, distance: d }));
            }
        }
        prev = cur;
        cur = next;
    }
    Ok(None)
}

/// Integrates from `t = 0` to `t_max` and returns the first return time, see
/// [`find_first_return`].
pub fn first_return_time<F, D>(
    field: F,
    y0: &[f64],
    distance: D,
    threshold: f64,
    t_min: f64,
    t_max: f64,
    cfg: &IntegratorConfig,
) -> Result<Option<f64>>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    D: FnMut(&[f64], &[f64]) -> f64,
{
    if !(t_min > 0.0) || !(t_max > t_min) {
        return Err(Error::Validation(format!(
            "need 0 < t_min < t_max (t_min = {t_min}, t_max = {t_max})"
        )));
    }
    let traj = integrate(field, y0, (0.0, t_max), cfg)?;
    Ok(find_first_return(&traj, distance, threshold, t_min)?.map(|r| r.time))
}

/// Euclidean distance between two states.
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
