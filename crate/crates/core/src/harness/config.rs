//! Run configuration: TOML text with every key documented and unknown keys rejected.
//!
//! A configuration file only needs the keys it changes; everything else is
//! filled in from the defaults of the selected experiment. [`RunConfig::emit`]
//! writes the fully resolved configuration, which parses back to the same value.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::evolve::{SchemeConfig, SchemeMode};
use crate::initial::InitialCondition;
use crate::nonlocal::{validate_a1, KernelPair, KernelSpec};
use crate::potentials::{validate_assumptions, Potential};
use crate::spaces::CouplingParam;

use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Simulate,
    Dissipative,
    LLimit,
    ContDep,
    Equilibrium,
    YosidaSweep,
    Validate,
    Steady,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::Simulate,
        Experiment::Dissipative,
        Experiment::LLimit,
        Experiment::ContDep,
        Experiment::Equilibrium,
        Experiment::YosidaSweep,
        Experiment::Validate,
        Experiment::Steady,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::Dissipative => "dissipative",
            Experiment::LLimit => "l-limit",
            Experiment::ContDep => "cont-dep",
            Experiment::Equilibrium => "equilibrium",
            Experiment::YosidaSweep => "yosida-sweep",
            Experiment::Validate => "validate",
            Experiment::Steady => "steady",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Keep every n-th diagnostics row (the last row is always kept).
    pub diagnostics_stride: usize,
    /// Write a snapshot every n steps; 0 writes only the initial and final states.
    pub snapshot_every: usize,
}

/// Parameters that only some experiments read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentParams {
    /// Time from which separation is monitored.
    pub separation_start: f64,
    pub separation_floor: f64,
    /// Step sizes of the energy-equality order check (empty disables it).
    pub order_dts: Vec<f64>,
    pub order_horizon: f64,
    /// Start of the window used for the exponential energy fit.
    pub fit_start: f64,
    pub plateau_tolerance: f64,
    /// Kinetic coefficients of the L → 0 sweep (the L = 0 reference is added).
    pub l_list: Vec<f64>,
    /// Size of the zero-mean perturbation in the continuous-dependence run.
    pub perturbation: f64,
    pub holder_base: f64,
    pub holder_levels: usize,
    pub holder_max_spread: f64,
    pub equilibrium_threshold: f64,
    pub smoothing_tau: f64,
    pub epsilon_list: Vec<f64>,
    pub yosida_time: f64,
    pub young_trials: usize,
}

impl Default for ExperimentParams {
    fn default() -> Self {
        Self {
            separation_start: 1.0,
            separation_floor: 1e-3,
            order_dts: vec![],
            order_horizon: 1.0,
            fit_start: 0.0,
            plateau_tolerance: 0.05,
            l_list: vec![1e-1, 3e-2, 1e-2, 3e-3, 1e-3],
            perturbation: 1e-4,
            holder_base: 1.0,
            holder_levels: 8,
            holder_max_spread: 10.0,
            equilibrium_threshold: 1e-3,
            smoothing_tau: 1.0,
            epsilon_list: vec![4e-2, 2e-2, 1e-2],
            yosida_time: 1.0,
            young_trials: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub mesh_level: usize,
    /// Kinetic coefficient `L` of the boundary coupling.
    pub coupling_l: f64,
    /// Initial data are clipped to `[-1 + init_margin, 1 - init_margin]`.
    pub init_margin: f64,
    pub out_dir: String,
    pub kernel_j: KernelSpec,
    pub kernel_k: KernelSpec,
    pub potential: Potential,
    pub scheme: SchemeConfig,
    pub initial: InitialCondition,
    pub output: OutputConfig,
    pub params: ExperimentParams,
}

pub const DEEP_QUENCH: Potential = Potential::Log(crate::potentials::LogPotential { theta: 0.5, theta0: 1.0 });

fn two_bubble() -> InitialCondition {
    InitialCondition::TwoBubble { radius: 0.35, width: 0.1, separation: 0.9, amplitude: 0.9 }
}

impl RunConfig {
    /// Resolved defaults of one experiment.
    pub fn defaults(experiment: Experiment) -> Self {
        let mut cfg = RunConfig {
            experiment,
            seed: 1,
            mesh_level: 2,
            coupling_l: 1.0,
            init_margin: 1e-3,
            out_dir: format!("out/{experiment}"),
            kernel_j: KernelSpec::gaussian(0.25, 2.0),
            kernel_k: KernelSpec::gaussian(0.25, 1.0),
            potential: DEEP_QUENCH,
            scheme: SchemeConfig { dt: 1e-3, t_end: 2.0, ..Default::default() },
            initial: InitialCondition::Random { mean: 0.0, amplitude: 0.4 },
            output: OutputConfig { diagnostics_stride: 1, snapshot_every: 0 },
            params: ExperimentParams::default(),
        };
        match experiment {
            Experiment::Validate => {}
            Experiment::Simulate => {
                cfg.initial = InitialCondition::SmoothRandom { mean: 0.0, amplitude: 0.4 };
                cfg.params.order_dts = vec![4e-3, 2e-3, 1e-3];
                cfg.params.order_horizon = 2.0;
            }
            Experiment::Dissipative => {
                cfg.mesh_level = 1;
                cfg.scheme.t_end = 40.0;
            }
            Experiment::LLimit => {
                cfg.mesh_level = 1;
            }
            Experiment::ContDep => {
                cfg.mesh_level = 1;
                cfg.scheme.dt = 1.0 / 1024.0;
                cfg.initial = two_bubble();
            }
            Experiment::Equilibrium => {
                cfg.mesh_level = 1;
                cfg.scheme.dt = 1.0 / 1024.0;
                cfg.scheme.t_end = 100.0;
                cfg.initial = two_bubble();
                cfg.output.diagnostics_stride = 64;
            }
            Experiment::YosidaSweep => {
                cfg.mesh_level = 1;
                cfg.scheme.t_end = 1.0;
            }
            Experiment::Steady => {
                cfg.mesh_level = 1;
                cfg.scheme.t_end = 50.0;
                cfg.initial = two_bubble();
                cfg.output.diagnostics_stride = 100;
            }
        }
        cfg
    }

    /// Parses configuration text. `experiment` (from the command line) takes
    /// precedence over the `experiment` key; missing keys take that
    /// experiment's defaults.
    pub fn parse(text: &str, experiment: Option<Experiment>) -> Result<Self, HarnessError> {
        let mut user: toml::Table =
            toml::from_str(text).map_err(|e| HarnessError::Config(e.message().to_string()))?;
        let from_file = match user.get("experiment") {
            Some(v) => Some(
                Experiment::deserialize(v.clone())
                    .map_err(|e| HarnessError::Config(format!("experiment: {e}")))?,
            ),
            None => None,
        };
        let experiment = experiment.or(from_file).unwrap_or(Experiment::Simulate);
        user.insert("experiment".into(), toml::Value::String(experiment.name().into()));
        let mut base = toml::Table::try_from(Self::defaults(experiment))
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        merge(&mut base, user, "")?;
        let cfg: RunConfig = toml::Value::Table(base)
            .try_into()
            .map_err(|e: toml::de::Error| HarnessError::Config(e.message().to_string()))?;
        cfg.check_ranges()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, experiment: Option<Experiment>) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, experiment)
    }

    /// Fully resolved configuration as TOML. Requires a seed within the TOML
    /// integer range, which [`check_ranges`](Self::check_ranges) enforces.
    pub fn emit(&self) -> String {
        toml::to_string(self).expect("configuration is always representable")
    }

    pub fn coupling(&self) -> Result<CouplingParam, HarnessError> {
        CouplingParam::new(self.coupling_l).map_err(|e| HarnessError::Config(format!("coupling_l: {e}")))
    }

    /// Range checks that do not need a mesh.
    pub fn check_ranges(&self) -> Result<(), HarnessError> {
        let bad = |key: &str, why: String| Err(HarnessError::Config(format!("{key}: {why}")));
        if self.seed > i64::MAX as u64 {
            return bad("seed", format!("{} exceeds the TOML integer range", self.seed));
        }
        if self.mesh_level > 5 {
            return bad("mesh_level", format!("{} exceeds the supported maximum 5", self.mesh_level));
        }
        self.coupling()?;
        for (key, k) in [("kernel_j", &self.kernel_j), ("kernel_k", &self.kernel_k)] {
            if !k.is_valid() {
                return bad(key, "sigma and mass must be positive and finite".into());
            }
        }
        if let Potential::Log(p) = self.potential {
            if !(p.theta > 0.0 && p.theta0 > 0.0) {
                return bad("potential", "theta and theta0 must be positive".into());
            }
        }
        if !(self.init_margin > 0.0 && self.init_margin < 0.5) {
            return bad("init_margin", format!("{} outside (0, 0.5)", self.init_margin));
        }
        if let SchemeMode::Yosida { epsilon } = self.scheme.mode {
            if epsilon.is_nan() || epsilon <= 0.0 {
                return bad("scheme.mode.epsilon", format!("{epsilon} must be positive"));
            }
        }
        if self.output.diagnostics_stride == 0 {
            return bad("output.diagnostics_stride", "must be at least 1".into());
        }
        Ok(())
    }

    /// Assumption gate: kernel positivity and the structural conditions on
    /// the potential, evaluated on the actual mesh. Returns the failed clauses.
    pub fn gate(&self, kp: &KernelPair) -> Vec<String> {
        let mut failures = Vec::new();
        let a1 = validate_a1(kp);
        if !a1.bulk_positive {
            failures.push(format!("A1: a_* = {:e} must be positive", a1.constants.a_lower));
        }
        if !a1.surf_positive {
            failures.push(format!("A1: a_⊛ = {:e} must be positive", a1.constants.a_surf_lower));
        }
        failures.extend(validate_assumptions(&self.potential, kp).failures());
        failures
    }
}

impl FromStr for RunConfig {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s, None)
    }
}

/// Overlays `user` onto `base`, recursing into tables. Keys absent from the
/// base are kept so that deserialization reports them as unknown.
fn merge(base: &mut toml::Table, user: toml::Table, prefix: &str) -> Result<(), HarnessError> {
    for (key, value) in user {
        let path = if prefix.is_empty() { key.clone() } else { format!("{prefix}.{key}") };
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(u)) => {
                // tagged enums are replaced wholesale when the tag changes
                if u.get("kind").is_some() && u.get("kind") != b.get("kind") {
                    *b = u;
                } else {
                    merge(b, u, &path)?;
                }
            }
            (Some(toml::Value::Table(_)), other) => {
                return Err(HarnessError::Config(format!("{path}: expected a table, got {}", other.type_str())));
            }
            (_, value) => {
                base.insert(key, value);
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_for_every_experiment() {
        for e in Experiment::ALL {
            let cfg = RunConfig::defaults(e);
            let text = cfg.emit();
            assert_eq!(RunConfig::parse(&text, None).unwrap(), cfg, "{e}");
        }
    }

    #[test]
    fn minimal_config_resolves_defaults() {
        let cfg = RunConfig::parse("seed = 7\n[scheme]\ndt = 0.002\n", Some(Experiment::Equilibrium)).unwrap();
        let mut expect = RunConfig::defaults(Experiment::Equilibrium);
        expect.seed = 7;
        expect.scheme.dt = 0.002;
        assert_eq!(cfg, expect);
        assert_eq!(RunConfig::parse("", None).unwrap(), RunConfig::defaults(Experiment::Simulate));
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = RunConfig::parse("sed = 3\n", None).unwrap_err().to_string();
        assert!(err.contains("sed"), "{err}");
        let err = RunConfig::parse("[scheme]\ntend = 3\n", None).unwrap_err().to_string();
        assert!(err.contains("tend"), "{err}");
        let err = RunConfig::parse("[initial]\nkind = \"random\"\nmean = 0.1\nampl = 1\n", None)
            .unwrap_err()
            .to_string();
        assert!(err.contains("ampl"), "{err}");
    }

    #[test]
    fn switching_variants() {
        let text = "[initial]\nkind = \"constant\"\nvalue = 0.2\n[scheme.mode]\nkind = \"yosida\"\nepsilon = 0.01\n";
        let cfg = RunConfig::parse(text, None).unwrap();
        assert_eq!(cfg.initial, InitialCondition::Constant { value: 0.2 });
        assert_eq!(cfg.scheme.mode, SchemeMode::Yosida { epsilon: 0.01 });
        assert_eq!(RunConfig::parse(&cfg.emit(), None).unwrap(), cfg);
        let cfg = RunConfig::parse("[potential]\nkind = \"quartic\"\n", None).unwrap();
        assert_eq!(cfg.potential, Potential::Quartic);
    }

    #[test]
    fn range_errors() {
        assert!(RunConfig::parse("coupling_l = -1.0\n", None).is_err());
        assert!(RunConfig::parse("[kernel_j]\nsigma = 0.0\n", None).is_err());
        assert!(RunConfig::parse("experiment = \"bogus\"\n", None).is_err());
        assert!(RunConfig::parse("scheme = 3\n", None).is_err());
    }
}
