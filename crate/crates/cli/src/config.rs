use std::path::{Path, PathBuf};

use serde::Deserialize;
use vortex_core::matrix::ComplexMatrix;
use vortex_core::ode::IntegratorConfig;
use vortex_core::reduction::{circulation_matrix, CirculationMatrix};
use vortex_core::vortex::{CirculationVector, VortexConfiguration};
use vortex_core::Complex64;

use crate::CliError;

/// On-disk scenario description.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub circulations: Vec<f64>,
    pub initial_positions: Vec<[f64; 2]>,
    pub t_span: [f64; 2],
    pub rel_tol: f64,
    pub abs_tol: f64,
    #[serde(default)]
    pub outputs: Outputs,
}

/// Output paths; a missing CSV path means standard output.
#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    pub csv: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("invalid config {}: {e}", path.display())))
    }
}

/// A validated scenario ready for the library.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub circulations: CirculationVector,
    pub positions: VortexConfiguration,
    pub t_span: (f64, f64),
    pub integrator: IntegratorConfig,
}

impl Scenario {
    pub fn new(config: ScenarioConfig) -> Result<Self, CliError> {
        if config.circulations.len() != config.initial_positions.len() {
            return Err(CliError::config(format!(
                "{} circulations but {} initial positions",
                config.circulations.len(),
                config.initial_positions.len()
            )));
        }
        let circulations =
            CirculationVector::new(config.circulations.clone()).map_err(CliError::config)?;
        let positions = VortexConfiguration::new(
            config.initial_positions.iter().map(|p| Complex64::new(p[0], p[1])).collect(),
        )
        .map_err(CliError::config)?;
        let [t0, t1] = config.t_span;
        if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
            return Err(CliError::config(format!("t_span must satisfy t0 < t1, got [{t0}, {t1}]")));
        }
        let integrator = IntegratorConfig::with_tolerances(config.rel_tol, config.abs_tol);
        integrator.validate().map_err(CliError::config)?;
        Ok(Self { config, circulations, positions, t_span: (t0, t1), integrator })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        Self::new(ScenarioConfig::load(path)?)
    }

    pub fn circulation_matrix(&self) -> Result<CirculationMatrix, CliError> {
        circulation_matrix(&self.circulations).map_err(CliError::config)
    }
}

/// `K` as nested rows for the JSON reports.
pub fn matrix_rows(k: &ComplexMatrix) -> Vec<Vec<f64>> {
    (0..k.dim()).map(|i| (0..k.dim()).map(|j| k[(i, j)].re).collect()).collect()
}
