//! Configuration, experiment drivers and output plumbing behind the `nlch` CLI.

pub mod config;
pub mod experiments;
pub mod output;

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

use crate::error::{EvolveError, SpacesError, StationaryError};
use crate::evolve::Model;
use crate::mesh::build_disk_mesh;
use crate::nonlocal::build_kernel_pair;

pub use config::{Experiment, RunConfig};
pub use output::OutDir;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("assumption gate failed: {}", .0.join("; "))]
    Validation(Vec<String>),
    #[error(transparent)]
    Evolve(#[from] EvolveError),
    #[error(transparent)]
    Stationary(#[from] StationaryError),
    #[error(transparent)]
    Spaces(#[from] SpacesError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl HarnessError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.display().to_string(), source }
    }

    /// 2 for configuration and validation problems, 3 for solver failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Validation(_) => 2,
            HarnessError::Evolve(EvolveError::Config(_) | EvolveError::InitialData(_)) => 2,
            HarnessError::Stationary(StationaryError::Mass(_) | StationaryError::Guess) => 2,
            _ => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    /// Finite-time evidence that neither confirms nor refutes the property.
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub detail: String,
}

/// Outcome of one experiment: named checks plus reported numbers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub experiment: String,
    pub checks: Vec<Check>,
    pub metrics: Vec<(String, f64)>,
    pub notes: Vec<String>,
    /// Failed assumption clauses (only the `validate` experiment records these
    /// instead of refusing to run).
    pub gate_failures: Vec<String>,
}

impl Report {
    pub fn new(experiment: Experiment) -> Self {
        Self { experiment: experiment.name().into(), ..Default::default() }
    }

    pub fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) -> bool {
        self.checks.push(Check {
            name: name.into(),
            status: if passed { Status::Pass } else { Status::Fail },
            detail: detail.into(),
        });
        passed
    }

    pub fn inconclusive(&mut self, name: &str, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), status: Status::Inconclusive, detail: detail.into() });
    }

    pub fn metric(&mut self, name: &str, value: f64) {
        self.metrics.push((name.into(), value));
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|(k, _)| k == name).map(|&(_, v)| v)
    }

    pub fn status_of(&self, name: &str) -> Option<Status> {
        self.checks.iter().find(|c| c.name == name).map(|c| c.status)
    }

    pub fn passed(&self) -> bool {
        self.gate_failures.is_empty() && self.checks.iter().all(|c| c.status != Status::Fail)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "experiment = {}", self.experiment);
        for c in &self.checks {
            let tag = match c.status {
                Status::Pass => "PASS",
                Status::Fail => "FAIL",
                Status::Inconclusive => "INCONCLUSIVE",
            };
            let _ = writeln!(s, "[{tag}] {}: {}", c.name, c.detail);
        }
        for g in &self.gate_failures {
            let _ = writeln!(s, "[GATE] {g}");
        }
        for (k, v) in &self.metrics {
            let _ = writeln!(s, "{k} = {v:e}");
        }
        for n in &self.notes {
            let _ = writeln!(s, "# {n}");
        }
        s
    }
}

/// Builds mesh, kernels and model for `cfg`, enforcing the assumption gate
/// unless `skip_validation` is set.
pub fn build_model(cfg: &RunConfig, skip_validation: bool) -> Result<Model, HarnessError> {
    cfg.check_ranges()?;
    let mesh = Arc::new(build_disk_mesh(cfg.mesh_level));
    let kp = Arc::new(build_kernel_pair(cfg.kernel_j, cfg.kernel_k, &mesh));
    let failures = cfg.gate(&kp);
    if !failures.is_empty() && !skip_validation {
        return Err(HarnessError::Validation(failures));
    }
    Ok(Model::new(mesh, kp, cfg.potential, cfg.coupling()?))
}

/// Runs the configured experiment, writing its outputs into `out` if given.
pub fn run_experiment(
    cfg: &RunConfig,
    skip_validation: bool,
    out: Option<&OutDir>,
) -> Result<Report, HarnessError> {
    // the validate experiment reports gate failures instead of refusing
    let skip = skip_validation || cfg.experiment == Experiment::Validate;
    let model = build_model(cfg, skip)?;
    if let Some(out) = out {
        out.write("config.toml", &cfg.emit())?;
    }
    let report = match cfg.experiment {
        Experiment::Simulate => experiments::simulate(cfg, &model, out)?,
        Experiment::Dissipative => experiments::dissipative(cfg, &model, out)?,
        Experiment::LLimit => experiments::l_limit(cfg, &model, out)?,
        Experiment::ContDep => experiments::cont_dep(cfg, &model, out)?,
        Experiment::Equilibrium => experiments::equilibrium(cfg, &model, out)?,
        Experiment::YosidaSweep => experiments::yosida_sweep(cfg, &model, out)?,
        Experiment::Validate => experiments::validate(cfg, &model, out)?,
        Experiment::Steady => experiments::steady(cfg, &model, out)?,
    };
    if let Some(out) = out {
        out.write("report.txt", &report.render())?;
    }
    Ok(report)
}
