//! Energy-stable time stepping of the coupled bulk–surface gradient flow.
//!
//! Each step is backward Euler with convex splitting: `a_Ω φ + β(φ)` is
//! implicit, `-J∗φ + π(φ)` explicit (and likewise on Γ). Given the chemical
//! potentials, the implicit relation is a strictly increasing scalar map per
//! node, so the new phase field is recovered node by node and the remaining
//! system for the chemical potentials is the gradient of a strictly convex
//! functional. That system is solved by Newton's method with backtracking on
//! the functional.

use std::sync::Arc;

use nalgebra::{Cholesky, DVector};
use serde::{Deserialize, Serialize};

use crate::diagnostics::Diagnostics;
use crate::error::{EvolveError, PotentialError};
use crate::mesh::DiskMesh;
use crate::nonlocal::KernelPair;
use crate::potentials::{yosida_beta, yosida_beta_hat, Potential, YosidaState};
use crate::scalar::increasing_root;
use crate::spaces::{al_form, generalized_mean, BulkSurfaceField, CoupledSystem, CouplingParam};

/// Treatment of the singular part in the implicit relation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SchemeMode {
    Singular,
    Yosida { epsilon: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchemeConfig {
    pub dt: f64,
    pub t_end: f64,
    pub mode: SchemeMode,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Newton trial points must satisfy `|φ| ≤ 1 - safeguard_margin` (singular mode).
    pub safeguard_margin: f64,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 1.0,
            mode: SchemeMode::Singular,
            newton_tol: 1e-12,
            newton_max_iter: 50,
            safeguard_margin: 1e-9,
        }
    }
}

impl SchemeConfig {
    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round().max(0.0) as usize
    }

    pub fn validate(&self, model: &Model) -> Result<(), EvolveError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(EvolveError::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(EvolveError::Config(format!("t_end must be nonnegative, got {}", self.t_end)));
        }
        if !(self.safeguard_margin > 0.0 && self.safeguard_margin < 0.5) {
            return Err(EvolveError::Config(format!(
                "safeguard_margin must lie in (0, 0.5), got {}",
                self.safeguard_margin
            )));
        }
        if self.newton_tol.is_nan() || self.newton_tol <= 0.0 || self.newton_max_iter == 0 {
            return Err(EvolveError::Config("Newton tolerance and iteration cap must be positive".into()));
        }
        if let SchemeMode::Yosida { epsilon } = self.mode {
            YosidaState::new(epsilon, &model.potential, &model.kernels).map_err(EvolveError::Config)?;
        }
        Ok(())
    }
}

/// Everything a trajectory needs besides its state: geometry, kernels,
/// potential and coupling.
#[derive(Debug, Clone)]
pub struct Model {
    pub mesh: Arc<DiskMesh>,
    pub kernels: Arc<KernelPair>,
    pub potential: Potential,
    pub coupling: CouplingParam,
    pub system: CoupledSystem,
}

impl Model {
    pub fn new(
        mesh: Arc<DiskMesh>,
        kernels: Arc<KernelPair>,
        potential: Potential,
        coupling: CouplingParam,
    ) -> Self {
        let system = CoupledSystem::new(&mesh, coupling);
        Self { mesh, kernels, potential, coupling, system }
    }

    /// Same geometry and potential, different kinetic coefficient.
    pub fn with_coupling(&self, coupling: CouplingParam) -> Self {
        Self::new(self.mesh.clone(), self.kernels.clone(), self.potential, coupling)
    }

    fn convex_hat(&self, mode: SchemeMode, s: f64) -> Result<f64, PotentialError> {
        match mode {
            SchemeMode::Singular => self.potential.beta_hat(s),
            SchemeMode::Yosida { epsilon } => {
                yosida_beta_hat(&self.potential, &yosida_state(epsilon), s)
            }
        }
    }

    fn convex_derivative(&self, mode: SchemeMode, s: f64) -> Result<f64, PotentialError> {
        match mode {
            SchemeMode::Singular => self.potential.beta(s),
            SchemeMode::Yosida { epsilon } => yosida_beta(&self.potential, &yosida_state(epsilon), s),
        }
    }
}

fn yosida_state(epsilon: f64) -> YosidaState {
    YosidaState { epsilon, epsilon_star: f64::INFINITY }
}

/// Free energy `½Σw aφ² - ½Σw (J∗φ)φ + Σw (β̂+π̂)(φ)` plus its surface analogue.
/// In Yosida mode `β̂` is replaced by its Moreau envelope.
pub fn energy(phi: &BulkSurfaceField, model: &Model, mode: SchemeMode) -> Result<f64, PotentialError> {
    let mesh = &model.mesh;
    let kp = &model.kernels;
    let part = |v: &DVector<f64>, a: &DVector<f64>, conv: DVector<f64>, w: &DVector<f64>| {
        let mut e = 0.0;
        for i in 0..v.len() {
            let s = v[i];
            let local = self_energy(model, mode, s)?;
            e += w[i] * (0.5 * a[i] * s * s - 0.5 * conv[i] * s + local);
        }
        Ok::<f64, PotentialError>(e)
    };
    let eb = part(&phi.bulk, &kp.a_omega, kp.convolve_bulk(&phi.bulk), &mesh.lumped_bulk)?;
    let es = part(&phi.surf, &kp.a_gamma, kp.convolve_surf(&phi.surf), &mesh.lumped_surf)?;
    Ok(eb + es)
}

fn self_energy(model: &Model, mode: SchemeMode, s: f64) -> Result<f64, PotentialError> {
    Ok(model.convex_hat(mode, s)? + model.potential.pi_hat(s))
}

/// `‖∇μ‖² + ‖∇_Γθ‖² + χ(L)‖θ - μ‖²_Γ`.
pub fn dissipation(mu: &BulkSurfaceField, model: &Model) -> Result<f64, EvolveError> {
    Ok(al_form(mu, mu, &model.coupling, &model.mesh)?)
}

/// Fully implicit chemical potentials `a φ - J∗φ + β(φ) + π(φ)` on Ω and Γ.
pub fn chemical_potential(
    phi: &BulkSurfaceField,
    model: &Model,
    mode: SchemeMode,
) -> Result<BulkSurfaceField, PotentialError> {
    let kp = &model.kernels;
    let side = |v: &DVector<f64>, a: &DVector<f64>, conv: DVector<f64>| {
        let mut out = DVector::zeros(v.len());
        for i in 0..v.len() {
            out[i] = a[i] * v[i] - conv[i]
                + model.convex_derivative(mode, v[i])?
                + model.potential.pi(v[i]);
        }
        Ok::<_, PotentialError>(out)
    };
    Ok(BulkSurfaceField {
        bulk: side(&phi.bulk, &kp.a_omega, kp.convolve_bulk(&phi.bulk))?,
        surf: side(&phi.surf, &kp.a_gamma, kp.convolve_surf(&phi.surf))?,
    })
}

/// Current time level of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct StepState {
    pub step: usize,
    pub t: f64,
    pub phi: BulkSurfaceField,
    pub mu: BulkSurfaceField,
    pub diagnostics: Diagnostics,
    pub initial_energy: f64,
    /// `τ Σ D^k` accumulated so far.
    pub dissipated: f64,
}

impl StepState {
    /// Validates the initial datum and builds the `t = 0` state.
    pub fn initial(
        phi0: &BulkSurfaceField,
        model: &Model,
        mode: SchemeMode,
    ) -> Result<Self, EvolveError> {
        let mesh = &model.mesh;
        phi0.check_dims(mesh).map_err(|e| EvolveError::InitialData(e.to_string()))?;
        let linf = phi0.linf();
        if !linf.is_finite() || (mode == SchemeMode::Singular && model.potential.is_singular() && linf >= 1.0) {
            return Err(EvolveError::InitialData(format!("‖φ₀‖∞ = {linf} must be < 1")));
        }
        let mean = generalized_mean(phi0, mesh);
        if mean.abs() >= 1.0 {
            return Err(EvolveError::InitialData(format!("generalized mean {mean} outside (-1, 1)")));
        }
        let mu = chemical_potential(phi0, model, mode)?;
        let u = model.system.coordinates(&mu);
        let d = u.dot(&(&model.system.form * &u));
        let e = energy(phi0, model, mode)?;
        Ok(Self {
            step: 0,
            t: 0.0,
            phi: phi0.clone(),
            mu,
            diagnostics: Diagnostics {
                t: 0.0,
                mean,
                energy: e,
                dissipation: d,
                sep_gap: 1.0 - linf,
                linf_phi: linf,
                newton_iters: 0,
                eq_residual: 0.0,
            },
            initial_energy: e,
            dissipated: 0.0,
        })
    }
}

/// Node value, its derivative with respect to the chemical potential, and the
/// convex conjugate of the implicit part evaluated at the target.
#[derive(Debug, Clone, Copy)]
struct NodeInverse {
    s: f64,
    ds: f64,
    conj: f64,
    truncated: bool,
}

const NODE_ITERS: usize = 400;

/// Solves `a s + β(s) = y` (or with `β_ε`) for one node.
fn invert_node(
    pot: &Potential,
    mode: SchemeMode,
    a: f64,
    y: f64,
    margin: f64,
) -> Result<NodeInverse, PotentialError> {
    let bound = y.abs() / a;
    match mode {
        SchemeMode::Singular => {
            let g = |s: f64| -> Result<f64, PotentialError> { Ok(a * s + pot.beta(s)?) };
            let mut truncated = None;
            let (lo, hi) = if pot.is_singular() && bound > 1.0 - margin {
                let lim = 1.0 - margin;
                if y > g(lim)? {
                    truncated = Some(lim);
                } else if y < g(-lim)? {
                    truncated = Some(-lim);
                }
                (-lim, lim)
            } else {
                (-bound, bound)
            };
            let s = match truncated {
                Some(s) => s,
                None => increasing_root(
                    |s| match (pot.beta(s), pot.beta_prime(s)) {
                        (Ok(b), Ok(db)) => (a * s + b - y, a + db),
                        _ => (s.signum() * f64::INFINITY, f64::INFINITY),
                    },
                    lo,
                    hi,
                    None,
                    NODE_ITERS,
                )
                .ok_or(PotentialError::RootSolve { target: y, iterations: NODE_ITERS })?,
            };
            let ds = 1.0 / (a + pot.beta_prime(s)?);
            let conj = y * s - (0.5 * a * s * s + pot.beta_hat(s)?);
            Ok(NodeInverse { s, ds, conj, truncated: truncated.is_some() })
        }
        SchemeMode::Yosida { epsilon } => {
            // unknown is b = β_ε(s), with s = β⁻¹(b) + ε b; symmetric in y
            let target = y.abs();
            let b = increasing_root(
                |b| {
                    let v = a * (pot.beta_inverse(b) + epsilon * b) + b - target;
                    (v, a * (pot.beta_inverse_prime(b) + epsilon) + 1.0)
                },
                0.0,
                target,
                None,
                NODE_ITERS,
            )
            .ok_or(PotentialError::RootSolve { target: y, iterations: NODE_ITERS })?;
            let b = y.signum() * b;
            let r = pot.beta_inverse(b);
            let s = r + epsilon * b;
            // dβ_ε/ds = 1/(1/β'(r) + ε)
            let ds = 1.0 / (a + 1.0 / (pot.beta_inverse_prime(b) + epsilon));
            let hat = pot.beta_hat(r)? + 0.5 * epsilon * b * b;
            let conj = y * s - (0.5 * a * s * s + hat);
            Ok(NodeInverse { s, ds, conj, truncated: false })
        }
    }
}

/// Implicit-part evaluation at reduced chemical potentials `u`.
struct Evaluation {
    phi: BulkSurfaceField,
    /// `dφ/dμ` per node.
    dphi: BulkSurfaceField,
    /// Convex objective whose gradient is the residual.
    merit: f64,
    residual: DVector<f64>,
    truncated: bool,
}

struct StepProblem<'a> {
    model: &'a Model,
    mode: SchemeMode,
    margin: f64,
    dt: f64,
    phi_old: &'a BulkSurfaceField,
    /// Explicit parts `-J∗φⁿ + π(φⁿ)`.
    explicit: BulkSurfaceField,
}

impl StepProblem<'_> {
    fn evaluate(&self, u: &DVector<f64>) -> Result<Evaluation, PotentialError> {
        let model = self.model;
        let mesh = &model.mesh;
        let kp = &model.kernels;
        let mu = model.system.expand(u);
        let mut truncated = false;
        let mut merit = 0.0;
        let mut side = |mu: &DVector<f64>,
                        r: &DVector<f64>,
                        a: &DVector<f64>,
                        old: &DVector<f64>,
                        w: &DVector<f64>|
         -> Result<(DVector<f64>, DVector<f64>), PotentialError> {
            let n = mu.len();
            let mut s = DVector::zeros(n);
            let mut ds = DVector::zeros(n);
            for i in 0..n {
                let inv = invert_node(&model.potential, self.mode, a[i], mu[i] - r[i], self.margin)?;
                truncated |= inv.truncated;
                s[i] = inv.s;
                ds[i] = inv.ds;
                merit += w[i] * (inv.conj - old[i] * mu[i]);
            }
            Ok((s, ds))
        };
        let (pb, db) = side(&mu.bulk, &self.explicit.bulk, &kp.a_omega, &self.phi_old.bulk, &mesh.lumped_bulk)?;
        let (ps, ds) = side(&mu.surf, &self.explicit.surf, &kp.a_gamma, &self.phi_old.surf, &mesh.lumped_surf)?;
        let phi = BulkSurfaceField::new(pb, ps);
        let au = &model.system.form * u;
        merit += 0.5 * self.dt * u.dot(&au);
        let residual = model.system.restrict(&(&phi - self.phi_old).weighted(mesh)) + au * self.dt;
        Ok(Evaluation { phi, dphi: BulkSurfaceField::new(db, ds), merit, residual, truncated })
    }
}

/// Advances one time step.
pub fn step(state: &StepState, cfg: &SchemeConfig, model: &Model) -> Result<StepState, EvolveError> {
    let mesh = &model.mesh;
    let kp = &model.kernels;
    let pot = &model.potential;
    let t_new = (state.step + 1) as f64 * cfg.dt;

    let explicit = BulkSurfaceField::new(
        state.phi.bulk.map(|s| pot.pi(s)) - kp.convolve_bulk(&state.phi.bulk),
        state.phi.surf.map(|s| pot.pi(s)) - kp.convolve_surf(&state.phi.surf),
    );
    let problem = StepProblem {
        model,
        mode: cfg.mode,
        margin: cfg.safeguard_margin,
        dt: cfg.dt,
        phi_old: &state.phi,
        explicit,
    };

    let tau_form = &model.system.form * cfg.dt;
    let mut u = model.system.coordinates(&state.mu);
    let mut eval = problem.evaluate(&u)?;
    let mut history = vec![eval.residual.amax()];
    let mut iters = 0;
    while eval.residual.amax() > cfg.newton_tol || eval.truncated {
        if iters == cfg.newton_max_iter {
            return Err(EvolveError::Newton { t: t_new, history });
        }
        iters += 1;
        let diag = model.system.restrict(&eval.dphi.weighted(mesh));
        let mut jac = tau_form.clone();
        for i in 0..diag.len() {
            jac[(i, i)] += diag[i];
        }
        let chol = Cholesky::new(jac).ok_or_else(|| EvolveError::Newton { t: t_new, history: history.clone() })?;
        let dir = -chol.solve(&eval.residual);
        let slope = eval.residual.dot(&dir);
        let res_norm = eval.residual.norm();

        let mut lambda = 1.0;
        loop {
            let trial_u = &u + &dir * lambda;
            let trial = problem.evaluate(&trial_u)?;
            let armijo = trial.merit <= eval.merit + 1e-4 * lambda * slope;
            let res_drop = trial.residual.norm() < (1.0 - 1e-4 * lambda) * res_norm;
            if !trial.truncated && (armijo || res_drop) {
                u = trial_u;
                eval = trial;
                break;
            }
            lambda *= 0.5;
            if lambda < 1e-12 {
                history.push(eval.residual.amax());
                return Err(EvolveError::Newton { t: t_new, history });
            }
        }
        history.push(eval.residual.amax());
    }
    // constants span the kernel of the form, so the residual sum is the mass
    // change; a uniform shift of μ removes it without touching the rest
    let defect = eval.residual.sum();
    if defect != 0.0 {
        let slope = model.system.restrict(&eval.dphi.weighted(mesh)).sum();
        let shifted = u.add_scalar(-defect / slope);
        let trial = problem.evaluate(&shifted)?;
        if !trial.truncated && trial.residual.sum().abs() < defect.abs() && trial.residual.amax() <= cfg.newton_tol {
            u = shifted;
            eval = trial;
        }
    }

    let phi = eval.phi;
    let linf = phi.linf();
    if model.potential.is_singular()
        && cfg.mode == SchemeMode::Singular
        && linf >= 1.0 - cfg.safeguard_margin
    {
        return Err(EvolveError::Separation { t: t_new, value: linf });
    }
    let mu = model.system.expand(&u);
    let d = u.dot(&(&model.system.form * &u));
    let e = energy(&phi, model, cfg.mode)?;
    let dissipated = state.dissipated + cfg.dt * d;
    let diagnostics = Diagnostics {
        t: t_new,
        mean: generalized_mean(&phi, mesh),
        energy: e,
        dissipation: d,
        sep_gap: 1.0 - linf,
        linf_phi: linf,
        newton_iters: iters,
        eq_residual: e - state.initial_energy + dissipated,
    };
    Ok(StepState {
        step: state.step + 1,
        t: t_new,
        phi,
        mu,
        diagnostics,
        initial_energy: state.initial_energy,
        dissipated,
    })
}

/// Stored copy of a time level.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub phi: BulkSurfaceField,
    pub mu: BulkSurfaceField,
}

impl From<&StepState> for Snapshot {
    fn from(s: &StepState) -> Self {
        Self { t: s.t, phi: s.phi.clone(), mu: s.mu.clone() }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub diagnostics: Vec<Diagnostics>,
    /// States at every `snapshot_every`-th step, plus the final one.
    pub snapshots: Vec<Snapshot>,
    pub last: StepState,
}

/// Runs from `initial` to `cfg.t_end`, calling `observe` on every state
/// including the initial one.
pub fn run_with(
    initial: &BulkSurfaceField,
    cfg: &SchemeConfig,
    model: &Model,
    mut observe: impl FnMut(&StepState),
) -> Result<StepState, EvolveError> {
    cfg.validate(model)?;
    let mut state = StepState::initial(initial, model, cfg.mode)?;
    observe(&state);
    for _ in 0..cfg.n_steps() {
        state = step(&state, cfg, model)?;
        observe(&state);
    }
    Ok(state)
}

/// Runs and records diagnostics for every step and snapshots at a stride
/// (`0` keeps only the first and last states).
pub fn run(
    initial: &BulkSurfaceField,
    cfg: &SchemeConfig,
    model: &Model,
    snapshot_every: usize,
) -> Result<Trajectory, EvolveError> {
    let mut diagnostics = Vec::with_capacity(cfg.n_steps() + 1);
    let mut snapshots = Vec::new();
    let last = run_with(initial, cfg, model, |s| {
        diagnostics.push(s.diagnostics);
        let keep = if snapshot_every == 0 { s.step == 0 } else { s.step % snapshot_every == 0 };
        if keep {
            snapshots.push(Snapshot::from(s));
        }
    })?;
    if snapshots.last().map(|s| s.t) != Some(last.t) {
        snapshots.push(Snapshot::from(&last));
    }
    Ok(Trajectory { diagnostics, snapshots, last })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields;
    use crate::initial::InitialCondition;
    use crate::mesh::build_disk_mesh;
    use crate::nonlocal::{build_kernel_pair, KernelSpec};

    fn model(level: usize, l: f64, pot: Potential) -> Model {
        let mesh = Arc::new(build_disk_mesh(level));
        let kp = Arc::new(build_kernel_pair(
            KernelSpec::gaussian(0.25, 2.0),
            KernelSpec::gaussian(0.25, 1.0),
            &mesh,
        ));
        Model::new(mesh, kp, pot, CouplingParam::new(l).unwrap())
    }

    #[test]
    fn zero_field_has_zero_energy_and_constant_mu_no_dissipation() {
        let m = model(1, 1.0, Potential::log(0.5, 1.0));
        let zero = BulkSurfaceField::zeros(&m.mesh);
        assert_eq!(energy(&zero, &m, SchemeMode::Singular).unwrap(), 0.0);
        let c = BulkSurfaceField::constant(&m.mesh, 0.37);
        assert!(dissipation(&c, &m).unwrap().abs() < 1e-12);
    }

    #[test]
    fn energy_matches_double_sum_oracle() {
        let m = model(1, 1.0, Potential::log(0.5, 1.0));
        let mesh = &m.mesh;
        let mut rng = fields::rng(11);
        let phi = BulkSurfaceField::new(
            fields::uniform_bulk(mesh, &mut rng) * 0.9,
            fields::uniform_surf(mesh, &mut rng) * 0.9,
        );
        let pot = m.potential;
        let mut oracle = 0.0;
        let w = &mesh.lumped_bulk;
        for i in 0..mesh.n_bulk() {
            for j in 0..mesh.n_bulk() {
                let (x, y) = (mesh.nodes[i], mesh.nodes[j]);
                let r2 = (x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2);
                oracle += 0.25 * w[i] * w[j] * m.kernels.j_spec.value(r2) * (phi.bulk[i] - phi.bulk[j]).powi(2);
            }
            let s = phi.bulk[i];
            oracle += w[i] * (pot.beta_hat(s).unwrap() + pot.pi_hat(s));
        }
        let s = &mesh.lumped_surf;
        let bl = &mesh.boundary_loop;
        for i in 0..mesh.n_surf() {
            for j in 0..mesh.n_surf() {
                let (x, y) = (mesh.nodes[bl[i]], mesh.nodes[bl[j]]);
                let r2 = (x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2);
                oracle += 0.25 * s[i] * s[j] * m.kernels.k_spec.value(r2) * (phi.surf[i] - phi.surf[j]).powi(2);
            }
            let v = phi.surf[i];
            oracle += s[i] * (pot.beta_hat(v).unwrap() + pot.pi_hat(v));
        }
        let e = energy(&phi, &m, SchemeMode::Singular).unwrap();
        assert!((e - oracle).abs() < 1e-10, "{e} vs {oracle}");
    }

    #[test]
    fn node_inverse_round_trips() {
        let pot = Potential::log(0.5, 1.0);
        for &y in &[-6.0, -2.0, -0.1, 0.0, 0.3, 4.0, 6.5] {
            let inv = invert_node(&pot, SchemeMode::Singular, 1.3, y, 1e-12).unwrap();
            assert!(!inv.truncated);
            // near ±1 the map is steep, so compare at the resolution of s
            let slack = 1e-12 * y.abs().max(1.0) + 4.0 * f64::EPSILON / inv.ds;
            assert!((1.3 * inv.s + pot.beta(inv.s).unwrap() - y).abs() <= slack, "y = {y}");
            let yos = invert_node(&pot, SchemeMode::Yosida { epsilon: 0.02 }, 1.3, y, 1e-12).unwrap();
            let b = yosida_beta(&pot, &yosida_state(0.02), yos.s).unwrap();
            assert!((1.3 * yos.s + b - y).abs() <= 1e-10 * y.abs().max(1.0) + 4.0 * f64::EPSILON / yos.ds, "y={y} s={} res={}", yos.s, 1.3 * yos.s + b - y);
        }
        let t = invert_node(&pot, SchemeMode::Singular, 1.3, 1e3, 1e-9).unwrap();
        assert!(t.truncated);
    }

    #[test]
    fn constant_state_is_a_fixed_point() {
        let m = model(1, 1.0, Potential::log(0.5, 1.0));
        let phi0 = BulkSurfaceField::constant(&m.mesh, 0.2);
        let cfg = SchemeConfig { dt: 1e-2, ..Default::default() };
        let s0 = StepState::initial(&phi0, &m, cfg.mode).unwrap();
        let s1 = step(&s0, &cfg, &m).unwrap();
        assert!((&s1.phi - &phi0).linf() < 1e-12);
    }

    #[test]
    fn mass_and_energy_over_steps_every_coupling() {
        for l in [0.0, 0.05, 1.0] {
            let m = model(1, l, Potential::log(0.5, 1.0));
            let phi0 = InitialCondition::Random { mean: 0.1, amplitude: 0.3 }.build(&m.mesh, 1e-3, 5);
            let cfg = SchemeConfig { dt: 5e-3, t_end: 0.5, ..Default::default() };
            let traj = run(&phi0, &cfg, &m, 0).unwrap();
            let m0 = traj.diagnostics[0].mean;
            for w in traj.diagnostics.windows(2) {
                assert!((w[1].mean - m0).abs() <= 1e-11, "L={l}");
                assert!(w[1].energy <= w[0].energy + 1e-10, "L={l}");
            }
            if l == 0.0 {
                let mu = &traj.last.mu;
                assert_eq!(m.mesh.trace(&mu.bulk), mu.surf);
            }
        }
    }

    #[test]
    fn quartic_smoke_and_yosida_mode_run() {
        let m = model(0, 1.0, Potential::Quartic);
        let phi0 = InitialCondition::Random { mean: 0.0, amplitude: 0.5 }.build(&m.mesh, 1e-3, 2);
        let cfg = SchemeConfig { dt: 1e-2, t_end: 0.2, ..Default::default() };
        run(&phi0, &cfg, &m, 0).unwrap();

        let m = model(0, 1.0, Potential::log(0.5, 1.0));
        let cfg = SchemeConfig { dt: 1e-2, t_end: 0.2, mode: SchemeMode::Yosida { epsilon: 0.02 }, ..Default::default() };
        let traj = run(&phi0, &cfg, &m, 0).unwrap();
        for w in traj.diagnostics.windows(2) {
            assert!(w[1].energy <= w[0].energy + 1e-10);
        }
    }

    #[test]
    fn zero_horizon_returns_initial_state() {
        let m = model(0, 1.0, Potential::log(0.5, 1.0));
        let phi0 = InitialCondition::Random { mean: 0.0, amplitude: 0.2 }.build(&m.mesh, 1e-3, 2);
        let cfg = SchemeConfig { t_end: 0.0, ..Default::default() };
        let traj = run(&phi0, &cfg, &m, 0).unwrap();
        assert_eq!(traj.diagnostics.len(), 1);
        assert_eq!(traj.last.phi, phi0);
    }

    #[test]
    fn rejects_bad_initial_data_and_config() {
        let m = model(0, 1.0, Potential::log(0.5, 1.0));
        let bad = BulkSurfaceField::constant(&m.mesh, 1.0);
        assert!(matches!(
            StepState::initial(&bad, &m, SchemeMode::Singular),
            Err(EvolveError::InitialData(_))
        ));
        let cfg = SchemeConfig { mode: SchemeMode::Yosida { epsilon: 0.9 }, ..Default::default() };
        assert!(matches!(cfg.validate(&m), Err(EvolveError::Config(_))));
        let cfg = SchemeConfig { dt: -1.0, ..Default::default() };
        assert!(cfg.validate(&m).is_err());
    }
}
