use std::io::Write;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde_json::{json, Value};
use vortex_core::algebra::{casimir, casimir_det, collective_hamiltonian};
use vortex_core::flow::{
    find_shape_period, integrate_lp, shape_casimirs, Mu3Coords, TriangleShape, LpTrajectory,
};
use vortex_core::levelset::{levelset_slice, Axis, LevelSetGrid};
use vortex_core::ode::{euclidean, ReturnEvent};
use vortex_core::reduction::{
    algebra_signature, angular_impulse, embed_shape, momentum_map_j, shape_coordinates,
    CirculationMatrix, MomentumValue, ShapeVector,
};
use vortex_core::vortex::{linear_impulse, simulate, PlaneTrajectory, VortexConfiguration};
use vortex_core::Complex64;

use crate::config::{matrix_rows, Scenario};
use crate::output::{fmt_opt, write_json, write_output, CsvWriter};
use crate::{CliError, EXIT_NO_PERIOD, EXIT_OK};

/// Where a command writes its bulk data and its JSON report.
#[derive(Debug, Clone, Default)]
pub struct Destinations {
    pub data: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

impl Destinations {
    /// `--out` overrides the config's CSV path; the report path comes from
    /// the config. Without a report path the report goes to standard output,
    /// unless the CSV already does.
    pub fn resolve(scenario: &Scenario, out: Option<PathBuf>) -> Self {
        Self {
            data: out.or_else(|| scenario.config.outputs.csv.clone()),
            report: scenario.config.outputs.report.clone(),
        }
    }
}

fn integration_error(e: vortex_core::Error) -> CliError {
    CliError::from(e)
}

fn complex_json(c: Complex64) -> Value {
    json!([c.re, c.im])
}

fn write_report(dest: &Destinations, report: &Value) -> Result<(), CliError> {
    match (dest.report.as_deref(), dest.data.as_deref()) {
        (Some(path), _) => {
            write_json(Some(path), report).map_err(|e| CliError::io(path, e))?;
            info!("report written to {}", path.display());
        }
        (None, Some(_)) => {
            write_json(None, report).map_err(|e| CliError::io(Path::new("<stdout>"), e))?;
        }
        (None, None) => info!("no report path configured; report suppressed"),
    }
    Ok(())
}

fn write_csv<F>(path: Option<&Path>, header: Vec<String>, rows: F) -> Result<(), CliError>
where
    F: FnOnce(&mut CsvWriter<&mut dyn Write>) -> std::io::Result<()>,
{
    write_output(path, |w| {
        let mut csv = CsvWriter::new(w, &header)?;
        rows(&mut csv)
    })
    .map_err(|e| CliError::io(path.unwrap_or(Path::new("<stdout>")), e))
}

fn position_header(n: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for j in 1..=n {
        h.push(format!("re_q{j}"));
        h.push(format!("im_q{j}"));
    }
    h
}

/// Column names for the real coordinates of `P = -iμ`.
pub fn momentum_header(m: usize) -> Vec<String> {
    if m == 2 {
        return ["mu1", "mu2", "mu3", "mu4"].map(String::from).to_vec();
    }
    let mut h: Vec<String> = (1..=m).map(|j| format!("P{j}{j}")).collect();
    for j in 1..=m {
        for k in j + 1..=m {
            h.push(format!("re_P{j}{k}"));
            h.push(format!("im_P{j}{k}"));
        }
    }
    h
}

/// Coordinates matching [`momentum_header`].
pub fn momentum_coords(mu: &MomentumValue) -> Vec<f64> {
    if mu.dim() == 2 {
        Mu3Coords::from_momentum(mu).expect("2x2").as_array().to_vec()
    } else {
        mu.to_real()
    }
}

/// Starting data shared by the reduced pipelines.
#[derive(Debug, Clone)]
pub struct ReducedStart {
    pub k: CirculationMatrix,
    /// Zero-impulse representative of the initial shape.
    pub positions: VortexConfiguration,
    pub shape: ShapeVector,
    pub mu0: MomentumValue,
    /// Linear impulse of the configured positions.
    pub impulse: Complex64,
}

pub fn reduced_start(scenario: &Scenario) -> Result<ReducedStart, CliError> {
    let k = scenario.circulation_matrix()?;
    let q = &scenario.positions;
    let impulse = linear_impulse(&scenario.circulations, q).map_err(CliError::config)?;
    let shape = shape_coordinates(&scenario.circulations, q).map_err(CliError::config)?;
    let positions = embed_shape(&k, &shape).map_err(CliError::config)?;
    let scale: f64 = scenario
        .circulations
        .gammas()
        .iter()
        .zip(q.iter())
        .map(|(g, q)| g.abs() * q.norm())
        .sum();
    if impulse.norm() > 1e-12 * scale.max(1.0) {
        warn!(
            "initial linear impulse {} is nonzero; reduced pipelines start from the \
             zero-impulse representative with the same shape",
            impulse
        );
    }
    let mu0 = momentum_map_j(&shape);
    Ok(ReducedStart { k, positions, shape, mu0, impulse })
}

pub fn cmd_simulate(scenario: &Scenario, dest: &Destinations) -> Result<i32, CliError> {
    let tr = simulate(&scenario.circulations, &scenario.positions, scenario.t_span, &scenario.integrator)
        .map_err(integration_error)?;
    let n = scenario.circulations.len();
    write_csv(dest.data.as_deref(), position_header(n), |csv| {
        let mut row = Vec::with_capacity(2 * n + 1);
        for (i, &t) in tr.trajectory.times().iter().enumerate() {
            row.clear();
            row.push(t);
            row.extend_from_slice(tr.trajectory.state(i));
            csv.numbers(&row)?;
        }
        Ok(())
    })?;
    let report = json!({
        "command": "simulate",
        "steps": tr.trajectory.len() - 1,
        "t_end": tr.trajectory.end(),
        "hamiltonian_initial": tr.initial_hamiltonian,
        "hamiltonian_relative_drift": tr.hamiltonian_drift,
        "impulse_initial": complex_json(tr.initial_impulse),
        "impulse_drift": tr.impulse_drift,
        "impulse_max_abs": tr.max_impulse,
    });
    write_report(dest, &report)?;
    Ok(EXIT_OK)
}

pub fn cmd_reduce(scenario: &Scenario, dest: &Destinations) -> Result<i32, CliError> {
    let start = reduced_start(scenario)?;
    let k = &start.k;
    let gamma = &scenario.circulations;
    let tr = simulate(gamma, &start.positions, scenario.t_span, &scenario.integrator)
        .map_err(integration_error)?;
    let m = k.dim();
    let mut header = vec!["t".to_string()];
    for j in 1..=m {
        header.push(format!("re_z{j}"));
        header.push(format!("im_z{j}"));
    }
    header.push("R".into());
    header.extend(momentum_header(m));

    let r0 = angular_impulse(k, &start.shape)?;
    let mut r_drift = 0.0_f64;
    let mut rows = Vec::with_capacity(tr.trajectory.len());
    for i in 0..tr.trajectory.len() {
        let z = shape_coordinates(gamma, &tr.positions(i))?;
        let r = angular_impulse(k, &z)?;
        r_drift = r_drift.max((r - r0).abs());
        let mut row = vec![tr.trajectory.times()[i]];
        for c in z.as_slice() {
            row.push(c.re);
            row.push(c.im);
        }
        row.push(r);
        row.extend(momentum_coords(&momentum_map_j(&z)));
        rows.push(row);
    }
    write_csv(dest.data.as_deref(), header, |csv| rows.iter().try_for_each(|r| csv.numbers(r)))?;

    let sig = algebra_signature(k)?;
    let report = json!({
        "command": "reduce",
        "branch": k.branch().label(),
        "M": m,
        "K": matrix_rows(k.matrix()),
        "det_K": k.determinant(),
        "det_K_lemma": k.lemma_determinant(),
        "signature": { "n1": sig.n1, "n2": sig.n2 },
        "initial_impulse": complex_json(start.impulse),
        "representative_positions": start.positions.iter().map(|q| complex_json(*q)).collect::<Vec<_>>(),
        "R_initial": r0,
        "R_relative_drift": if r0 != 0.0 { r_drift / r0.abs() } else { r_drift },
    });
    write_report(dest, &report)?;
    Ok(EXIT_OK)
}

/// `C₂` in triangle variables when the shape space is two-dimensional.
fn shape_c2(k: &CirculationMatrix, mu: &MomentumValue) -> Option<f64> {
    let g = vortex_core::flow::shape_circulations(k).ok()?;
    let m = Mu3Coords::from_momentum(mu).ok()?;
    shape_casimirs(&g, &TriangleShape::from(m)).ok().map(|c| c.1)
}

pub fn run_lp(scenario: &Scenario, start: &ReducedStart) -> Result<LpTrajectory, CliError> {
    integrate_lp(&start.k, &start.mu0, scenario.t_span, &scenario.integrator)
        .map_err(integration_error)
}

pub fn cmd_lp(scenario: &Scenario, dest: &Destinations) -> Result<i32, CliError> {
    let start = reduced_start(scenario)?;
    let lp = run_lp(scenario, &start)?;
    let k = &start.k;
    let mut header = vec!["t".to_string()];
    header.extend(momentum_header(k.dim()));
    header.extend(["C1", "C2_shape", "D", "h"].map(String::from));
    let mut lines = Vec::with_capacity(lp.trajectory.len());
    for i in 0..lp.trajectory.len() {
        let mu = lp.momentum(i);
        let mut line: Vec<String> = vec![crate::output::fmt(lp.trajectory.times()[i])];
        line.extend(momentum_coords(&mu).into_iter().map(crate::output::fmt));
        line.push(crate::output::fmt(casimir(k, &mu, 1)?));
        line.push(fmt_opt(shape_c2(k, &mu)));
        line.push(crate::output::fmt(casimir_det(k, &mu)?));
        line.push(fmt_opt(collective_hamiltonian(k, &mu).ok()));
        lines.push(line);
    }
    write_csv(dest.data.as_deref(), header, |csv| lines.iter().try_for_each(|l| csv.row(l)))?;
    let report = json!({
        "command": "lp",
        "M": k.dim(),
        "initial": {
            "C1": lp.initial.c1,
            "C2": lp.initial.c2,
            "C2_shape": lp.initial.c2_shape,
            "D": lp.initial.d,
            "h": lp.initial.h,
        },
        "drift": {
            "C1": lp.drift.c1,
            "C2": lp.drift.c2,
            "C2_shape": lp.drift.c2_shape,
            "D": lp.drift.d,
            "h": lp.drift.h,
        },
        "warning": lp.warning,
    });
    write_report(dest, &report)?;
    Ok(EXIT_OK)
}

/// Parses `a:b:n,a:b:n,a:b:n` into axes for `(μ₁, μ₂, μ₄)`.
pub fn parse_grid(spec: &str) -> Result<[Axis; 3], CliError> {
    let parts: Vec<&str> = spec.split(',').collect();
    if parts.len() != 3 {
        return Err(CliError::config(format!("--grid needs three a:b:n ranges, got {spec:?}")));
    }
    let mut axes = Vec::with_capacity(3);
    for p in parts {
        let f: Vec<&str> = p.split(':').collect();
        let bad = || CliError::config(format!("malformed grid range {p:?}"));
        if f.len() != 3 {
            return Err(bad());
        }
        let a: f64 = f[0].trim().parse().map_err(|_| bad())?;
        let b: f64 = f[1].trim().parse().map_err(|_| bad())?;
        let n: usize = f[2].trim().parse().map_err(|_| bad())?;
        axes.push(Axis::new(a, b, n).map_err(CliError::config)?);
    }
    Ok([axes[0], axes[1], axes[2]])
}

/// Bounding box of the reduced orbit in `(μ₁, μ₂, μ₄)`, widened by `margin`
/// of each extent.
pub fn orbit_box(lp: &LpTrajectory, margin: f64, n: usize) -> Result<[Axis; 3], CliError> {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for i in 0..lp.trajectory.len() {
        let m = Mu3Coords::from_momentum(&lp.momentum(i))?;
        for (d, v) in [m.mu1, m.mu2, m.mu4].into_iter().enumerate() {
            lo[d] = lo[d].min(v);
            hi[d] = hi[d].max(v);
        }
    }
    let mut axes = Vec::with_capacity(3);
    for d in 0..3 {
        let pad = margin * (hi[d] - lo[d]).max(1e-6 * hi[d].abs().max(1.0));
        axes.push(Axis::new(lo[d] - pad, hi[d] + pad, n).map_err(CliError::config)?);
    }
    Ok([axes[0], axes[1], axes[2]])
}

/// Builds the level-set grid the `levelset` command emits.
pub fn levelset_grid(
    scenario: &Scenario,
    c1: Option<f64>,
    grid: Option<&str>,
) -> Result<LevelSetGrid, CliError> {
    let start = reduced_start(scenario)?;
    let k = &start.k;
    if k.dim() != 2 {
        return Err(CliError::config(format!(
            "levelset needs a two-dimensional shape space, this scenario has M = {}",
            k.dim()
        )));
    }
    let c1 = match c1 {
        Some(c) => c,
        None => casimir(k, &start.mu0, 1)?,
    };
    let axes = match grid {
        Some(g) => parse_grid(g)?,
        None => orbit_box(&run_lp(scenario, &start)?, 0.05, 41)?,
    };
    Ok(levelset_slice(k, c1, axes)?)
}

pub fn cmd_levelset(
    scenario: &Scenario,
    dest: &Destinations,
    c1: Option<f64>,
    grid: Option<&str>,
) -> Result<i32, CliError> {
    let g = levelset_grid(scenario, c1, grid)?;
    let header = ["mu1", "mu2", "mu4", "C2", "h", "D"].map(String::from).to_vec();
    write_csv(dest.data.as_deref(), header, |csv| {
        for row in g.rows() {
            csv.row(&[
                crate::output::fmt(row.mu1),
                crate::output::fmt(row.mu2),
                crate::output::fmt(row.mu4),
                crate::output::fmt(row.c2),
                fmt_opt(row.h),
                crate::output::fmt(row.d),
            ])?;
        }
        Ok(())
    })?;
    let report = json!({
        "command": "levelset",
        "c1": g.c1,
        "axes": g.axes.iter().map(|a| json!({"start": a.start, "end": a.end, "n": a.n})).collect::<Vec<_>>(),
        "rows": g.len(),
    });
    write_report(dest, &report)?;
    Ok(EXIT_OK)
}

/// Result of a period search.
#[derive(Debug, Clone)]
pub struct PeriodReport {
    pub t_max: f64,
    pub threshold: f64,
    pub mu0_norm: f64,
    pub event: Option<ReturnEvent>,
    /// `‖q(T) - q(0)‖` of the full configuration, when a period was found.
    pub displacement: Option<f64>,
}

impl PeriodReport {
    pub fn to_json(&self) -> Value {
        json!({
            "command": "period",
            "found": self.event.is_some(),
            "period": self.event.map(|e| e.time),
            "return_distance": self.event.map(|e| e.distance),
            "threshold": self.threshold,
            "mu0_norm": self.mu0_norm,
            "t_max": self.t_max,
            "displacement": self.displacement,
        })
    }
}

/// Relative return threshold applied to `‖μ₀‖`.
pub const PERIOD_THRESHOLD: f64 = 1e-6;

pub fn find_period(scenario: &Scenario, t_max: Option<f64>) -> Result<PeriodReport, CliError> {
    let start = reduced_start(scenario)?;
    let t_max = t_max.unwrap_or(scenario.t_span.1);
    if t_max.is_nan() || t_max <= 0.0 {
        return Err(CliError::config(format!("--t-max must be positive, got {t_max}")));
    }
    let mu0_norm = start.mu0.coordinate_norm();
    let threshold = PERIOD_THRESHOLD * mu0_norm;
    let lp = integrate_lp(&start.k, &start.mu0, (0.0, t_max), &scenario.integrator)
        .map_err(integration_error)?;
    let event = find_shape_period(&lp, threshold)?;
    let displacement = match event {
        Some(ev) => {
            let tr: PlaneTrajectory =
                simulate(&scenario.circulations, &start.positions, (0.0, ev.time), &scenario.integrator)
                    .map_err(integration_error)?;
            let q0 = start.positions.to_flat();
            Some(euclidean(tr.trajectory.last_state(), &q0))
        }
        None => None,
    };
    Ok(PeriodReport { t_max, threshold, mu0_norm, event, displacement })
}

pub fn cmd_period(
    scenario: &Scenario,
    out: Option<PathBuf>,
    t_max: Option<f64>,
) -> Result<i32, CliError> {
    let report = find_period(scenario, t_max)?;
    let path = out.or_else(|| scenario.config.outputs.report.clone());
    write_json(path.as_deref(), &report.to_json())
        .map_err(|e| CliError::io(path.as_deref().unwrap_or(Path::new("<stdout>")), e))?;
    if report.event.is_none() {
        warn!("no return to the initial shape within t_max = {}", report.t_max);
        return Ok(EXIT_NO_PERIOD);
    }
    Ok(EXIT_OK)
}
