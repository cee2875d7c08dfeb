//! Python bindings: configuration, mesh, time stepping, steady states and
//! the experiment driver.

use std::collections::HashMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use nlch_core::evolve::{step, StepState};
use nlch_core::harness::{self, build_model, Experiment, HarnessError, OutDir, RunConfig};
use nlch_core::potentials::{yosida_beta, Potential, YosidaState};
use nlch_core::stationary::solve_steady;
use nlch_core::{build_disk_mesh, DiskMesh, Model};

fn err(e: HarnessError) -> PyErr {
    match e.exit_code() {
        2 => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn experiment(name: &str) -> PyResult<Experiment> {
    Experiment::ALL
        .into_iter()
        .find(|e| e.name() == name)
        .ok_or_else(|| PyValueError::new_err(format!("unknown experiment {name:?}")))
}

/// Resolved run configuration.
#[pyclass(name = "Config", module = "nlch", skip_from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: RunConfig,
}

#[pymethods]
impl PyConfig {
    /// `Config(experiment="simulate", toml=None)`: defaults of `experiment`,
    /// overridden by the keys in `toml`.
    #[new]
    #[pyo3(signature = (experiment = "simulate", toml = None))]
    fn new(experiment: &str, toml: Option<&str>) -> PyResult<Self> {
        let exp = self::experiment(experiment)?;
        let inner = match toml {
            Some(text) => RunConfig::parse(text, Some(exp)).map_err(err)?,
            None => RunConfig::defaults(exp),
        };
        Ok(Self { inner })
    }

    fn to_toml(&self) -> String {
        self.inner.emit()
    }

    #[getter]
    fn experiment(&self) -> &'static str {
        self.inner.experiment.name()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.seed = seed;
    }

    #[getter]
    fn mesh_level(&self) -> usize {
        self.inner.mesh_level
    }

    #[getter]
    fn coupling_l(&self) -> f64 {
        self.inner.coupling_l
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.inner.scheme.dt
    }

    #[getter]
    fn t_end(&self) -> f64 {
        self.inner.scheme.t_end
    }

    fn __repr__(&self) -> String {
        format!("Config(experiment={:?}, mesh_level={})", self.inner.experiment.name(), self.inner.mesh_level)
    }
}

#[pyclass(name = "Mesh", module = "nlch")]
struct PyMesh {
    inner: DiskMesh,
}

#[pymethods]
impl PyMesh {
    #[new]
    fn new(level: usize) -> Self {
        Self { inner: build_disk_mesh(level) }
    }

    #[getter]
    fn n_bulk(&self) -> usize {
        self.inner.n_bulk()
    }

    #[getter]
    fn n_surf(&self) -> usize {
        self.inner.n_surf()
    }

    #[getter]
    fn h(&self) -> f64 {
        self.inner.h
    }

    fn nodes(&self) -> Vec<(f64, f64)> {
        self.inner.nodes.iter().map(|p| (p[0], p[1])).collect()
    }

    fn boundary_angles(&self) -> Vec<f64> {
        self.inner.boundary_angles.clone()
    }

    /// Lumped bulk and surface quadrature weights.
    fn weights(&self) -> (Vec<f64>, Vec<f64>) {
        (self.inner.lumped_bulk.as_slice().to_vec(), self.inner.lumped_surf.as_slice().to_vec())
    }
}

fn diagnostics_dict(state: &StepState) -> HashMap<&'static str, f64> {
    let d = state.diagnostics;
    HashMap::from([
        ("t", d.t),
        ("mean", d.mean),
        ("energy", d.energy),
        ("dissipation", d.dissipation),
        ("sep_gap", d.sep_gap),
        ("linf_phi", d.linf_phi),
        ("newton_iters", d.newton_iters as f64),
        ("eq_residual", d.eq_residual),
    ])
}

/// A trajectory advanced step by step from the configured initial datum.
#[pyclass(name = "Simulation", module = "nlch")]
struct PySimulation {
    cfg: RunConfig,
    model: Model,
    state: StepState,
}

#[pymethods]
impl PySimulation {
    #[new]
    #[pyo3(signature = (config, skip_validation = false))]
    fn new(config: &PyConfig, skip_validation: bool) -> PyResult<Self> {
        let cfg = config.inner.clone();
        let model = build_model(&cfg, skip_validation).map_err(err)?;
        cfg.scheme.validate(&model).map_err(|e| err(e.into()))?;
        let phi0 = cfg.initial.build(&model.mesh, cfg.init_margin, cfg.seed);
        let state = StepState::initial(&phi0, &model, cfg.scheme.mode).map_err(|e| err(e.into()))?;
        Ok(Self { cfg, model, state })
    }

    /// Advances `n` steps and returns the diagnostics of every new step.
    #[pyo3(signature = (n = 1))]
    fn step(&mut self, py: Python<'_>, n: usize) -> PyResult<Vec<HashMap<&'static str, f64>>> {
        let (cfg, model) = (&self.cfg, &self.model);
        let mut state = self.state.clone();
        let rows = py.detach(|| -> Result<_, HarnessError> {
            let mut rows = Vec::with_capacity(n);
            for _ in 0..n {
                state = step(&state, &cfg.scheme, model)?;
                rows.push(diagnostics_dict(&state));
            }
            Ok(rows)
        });
        let rows = rows.map_err(err)?;
        self.state = state;
        Ok(rows)
    }

    #[getter]
    fn t(&self) -> f64 {
        self.state.t
    }

    fn diagnostics(&self) -> HashMap<&'static str, f64> {
        diagnostics_dict(&self.state)
    }

    /// `(bulk, surface)` values of the order parameter.
    fn phi(&self) -> (Vec<f64>, Vec<f64>) {
        (self.state.phi.bulk.as_slice().to_vec(), self.state.phi.surf.as_slice().to_vec())
    }

    /// `(bulk, surface)` values of the chemical potentials.
    fn mu(&self) -> (Vec<f64>, Vec<f64>) {
        (self.state.mu.bulk.as_slice().to_vec(), self.state.mu.surf.as_slice().to_vec())
    }

    /// Steady state with the current mass, started from the current state.
    fn steady(&self, py: Python<'_>) -> PyResult<HashMap<&'static str, Py<PyAny>>> {
        let m = self.state.diagnostics.mean;
        let ss = solve_steady(m, &self.state.phi, &self.model).map_err(|e| err(e.into()))?;
        let mut out = HashMap::new();
        out.insert("phi_bulk", ss.phi.bulk.as_slice().to_vec().into_pyobject(py)?.into_any().unbind());
        out.insert("phi_surf", ss.phi.surf.as_slice().to_vec().into_pyobject(py)?.into_any().unbind());
        for (k, v) in [
            ("mu_inf", ss.mu_inf),
            ("residual", ss.residual),
            ("sep_gap", ss.sep_gap),
            ("energy", ss.energy),
            ("mass", ss.mass),
        ] {
            out.insert(k, v.into_pyobject(py)?.into_any().unbind());
        }
        Ok(out)
    }
}

/// Runs one experiment; returns `(passed, report_text, metrics)`.
#[pyfunction]
#[pyo3(signature = (config, out = None, skip_validation = false))]
fn run_experiment(
    py: Python<'_>,
    config: &PyConfig,
    out: Option<PathBuf>,
    skip_validation: bool,
) -> PyResult<(bool, String, HashMap<String, f64>)> {
    let cfg = config.inner.clone();
    let report = py
        .detach(|| {
            let dir = out.map(OutDir::create).transpose()?;
            harness::run_experiment(&cfg, skip_validation, dir.as_ref())
        })
        .map_err(err)?;
    Ok((report.passed(), report.render(), report.metrics.into_iter().collect()))
}

/// `β_ε(s)` of the logarithmic potential with temperatures `theta`, `theta0`.
#[pyfunction]
fn yosida_log(theta: f64, theta0: f64, epsilon: f64, s: f64) -> PyResult<f64> {
    let pot = Potential::log(theta, theta0);
    let ys = YosidaState { epsilon, epsilon_star: f64::INFINITY };
    yosida_beta(&pot, &ys, s).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule]
fn nlch(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyMesh>()?;
    m.add_class::<PySimulation>()?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(yosida_log, m)?)?;
    m.add("EXPERIMENTS", Experiment::ALL.iter().map(|e| e.name()).collect::<Vec<_>>())?;
    Ok(())
}
