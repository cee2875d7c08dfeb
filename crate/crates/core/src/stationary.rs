//! Stationary states at prescribed mass and diagnostics of the approach to them.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::StationaryError;
use crate::evolve::{chemical_potential, energy, Model, SchemeMode, StepState};
use crate::mesh::{element_geometry, DiskMesh};
use crate::spaces::{generalized_mean, project, BulkSurfaceField};

pub const STEADY_TOL: f64 = 1e-10;
const MAX_ITER: usize = 100;
/// Trial points must keep `|φ| ≤ 1 - GUARD`.
const GUARD: f64 = 1e-14;

/// Solution of the stationary problem: `a φ - J∗φ + β(φ) + π(φ) = μ_∞` on
/// bulk nodes, its surface analogue with the same constant, and the mass
/// constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub phi: BulkSurfaceField,
    pub mu_inf: f64,
    /// Max-norm residual of the stationarity and mass equations.
    pub residual: f64,
    pub sep_gap: f64,
    pub energy: f64,
    pub mass: f64,
    pub iterations: usize,
}

fn stationarity(phi: &BulkSurfaceField, model: &Model) -> Result<BulkSurfaceField, StationaryError> {
    Ok(chemical_potential(phi, model, SchemeMode::Singular)?)
}

/// Newton's method on `(φ, ψ, μ_∞)` with one mass row and one multiplier column.
pub fn solve_steady(m: f64, guess: &BulkSurfaceField, model: &Model) -> Result<SteadyState, StationaryError> {
    if m.is_nan() || m.abs() >= 1.0 {
        return Err(StationaryError::Mass(m));
    }
    if guess.linf() >= 1.0 || guess.check_dims(&model.mesh).is_err() {
        return Err(StationaryError::Guess);
    }
    let mesh = &model.mesh;
    let kp = &model.kernels;
    let pot = &model.potential;
    let (nb, ns) = (mesh.n_bulk(), mesh.n_surf());
    let n = nb + ns + 1;
    let total = mesh.bulk_measure() + mesh.surf_measure();

    let residual = |phi: &BulkSurfaceField, mu: f64| -> Result<DVector<f64>, StationaryError> {
        let s = stationarity(phi, model)?;
        let mut r = DVector::zeros(n);
        r.rows_mut(0, nb).copy_from(&s.bulk.add_scalar(-mu));
        r.rows_mut(nb, ns).copy_from(&s.surf.add_scalar(-mu));
        r[n - 1] = generalized_mean(phi, mesh) - m;
        Ok(r)
    };

    let mut phi = guess.clone();
    let mut mu = generalized_mean(&stationarity(&phi, model)?, mesh);
    let mut r = residual(&phi, mu)?;
    let mut iterations = 0;
    while r.amax() > STEADY_TOL {
        if iterations == MAX_ITER {
            return Err(StationaryError::Newton { iterations, residual: r.amax() });
        }
        iterations += 1;
        let mut jac = DMatrix::zeros(n, n);
        jac.view_mut((0, 0), (nb, nb)).copy_from(&(-&kp.conv_bulk));
        jac.view_mut((nb, nb), (ns, ns)).copy_from(&(-&kp.conv_surf));
        for i in 0..nb {
            let s = phi.bulk[i];
            jac[(i, i)] += kp.a_omega[i] + pot.beta_prime(s)? + pot.pi_prime(s);
            jac[(i, n - 1)] = -1.0;
            jac[(n - 1, i)] = mesh.lumped_bulk[i] / total;
        }
        for j in 0..ns {
            let s = phi.surf[j];
            jac[(nb + j, nb + j)] += kp.a_gamma[j] + pot.beta_prime(s)? + pot.pi_prime(s);
            jac[(nb + j, n - 1)] = -1.0;
            jac[(n - 1, nb + j)] = mesh.lumped_surf[j] / total;
        }
        let dir = jac
            .lu()
            .solve(&(-&r))
            .ok_or(StationaryError::Newton { iterations, residual: r.amax() })?;
        let r_norm = r.norm();
        let mut lambda = 1.0;
        loop {
            let cand = BulkSurfaceField::new(
                &phi.bulk + dir.rows(0, nb) * lambda,
                &phi.surf + dir.rows(nb, ns) * lambda,
            );
            if cand.linf() <= 1.0 - GUARD {
                let cand_mu = mu + lambda * dir[n - 1];
                let cand_r = residual(&cand, cand_mu)?;
                if cand_r.norm() < (1.0 - 1e-4 * lambda) * r_norm || cand_r.amax() <= STEADY_TOL {
                    phi = cand;
                    mu = cand_mu;
                    r = cand_r;
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < 1e-12 {
                return Err(StationaryError::Newton { iterations, residual: r.amax() });
            }
        }
    }
    let linf = phi.linf();
    Ok(SteadyState {
        energy: energy(&phi, model, SchemeMode::Singular)?,
        mass: generalized_mean(&phi, mesh),
        phi,
        mu_inf: mu,
        residual: r.amax(),
        sep_gap: 1.0 - linf,
        iterations,
    })
}

/// Both averaging identities: `μ_∞` against the Ω-average and the Γ-average
/// of the stationarity expression. Returns the two absolute defects.
pub fn averaging_defects(ss: &SteadyState, model: &Model) -> Result<(f64, f64), StationaryError> {
    let mesh = &model.mesh;
    let s = stationarity(&ss.phi, model)?;
    let bulk = s.bulk.dot(&mesh.lumped_bulk) / mesh.bulk_measure();
    let surf = s.surf.dot(&mesh.lumped_surf) / mesh.surf_measure();
    Ok(((bulk - ss.mu_inf).abs(), (surf - ss.mu_inf).abs()))
}

/// Separation bound chain: `β(1 - δ_∞) ≤ 2a^* + sup|π| + |μ_∞|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeparationBound {
    pub beta_at_gap: f64,
    pub bound: f64,
}

impl SeparationBound {
    pub fn holds(&self) -> bool {
        self.beta_at_gap <= self.bound
    }
}

pub fn separation_bound(ss: &SteadyState, model: &Model) -> Result<SeparationBound, StationaryError> {
    let c = &model.kernels.constants;
    let pot = &model.potential;
    let sup_pi = pot.pi(1.0).abs().max(pot.pi(-1.0).abs());
    Ok(SeparationBound {
        beta_at_gap: pot.beta(1.0 - ss.sep_gap)?,
        bound: 2.0 * c.a_upper.max(c.a_surf_upper) + sup_pi + ss.mu_inf.abs(),
    })
}

/// Comparison of the finite-element gradient of `φ_∞` with the closed-form
/// expression `(∇J∗φ - ∇a_Ω φ) / (a_Ω + β'(φ) + π'(φ))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradientReport {
    pub max_discrepancy: f64,
    /// Lumped-L² norm of the discrepancy.
    pub l2_discrepancy: f64,
    /// Max of `|∇φ_∞|` from the closed form.
    pub linf_gradient: f64,
    /// Smallest nodal denominator.
    pub min_denominator: f64,
}

/// Area-weighted average of element gradients at each node.
pub fn nodal_gradient(u: &DVector<f64>, mesh: &DiskMesh) -> Vec<[f64; 2]> {
    let mut acc = vec![[0.0; 2]; mesh.n_bulk()];
    let mut area = vec![0.0; mesh.n_bulk()];
    for tri in &mesh.triangles {
        let (a, grads) = element_geometry(&mesh.nodes, tri);
        let mut g = [0.0; 2];
        for k in 0..3 {
            g[0] += u[tri[k]] * grads[k][0];
            g[1] += u[tri[k]] * grads[k][1];
        }
        for &i in tri {
            acc[i][0] += a * g[0];
            acc[i][1] += a * g[1];
            area[i] += a;
        }
    }
    acc.iter().zip(&area).map(|(g, a)| [g[0] / a, g[1] / a]).collect()
}

pub fn check_gradient_regularity(ss: &SteadyState, model: &Model) -> Result<GradientReport, StationaryError> {
    let mesh = &model.mesh;
    let kp = &model.kernels;
    let pot = &model.potential;
    let phi = &ss.phi.bulk;
    let fe = nodal_gradient(phi, mesh);
    let w = &mesh.lumped_bulk;
    let mut report = GradientReport {
        max_discrepancy: 0.0,
        l2_discrepancy: 0.0,
        linf_gradient: 0.0,
        min_denominator: f64::INFINITY,
    };
    let mut l2 = 0.0;
    for i in 0..mesh.n_bulk() {
        let xi = mesh.nodes[i];
        let mut conv = [0.0; 2];
        let mut grad_a = [0.0; 2];
        for j in 0..mesh.n_bulk() {
            let xj = mesh.nodes[j];
            let g = kp.j_spec.gradient([xi[0] - xj[0], xi[1] - xj[1]]);
            for k in 0..2 {
                conv[k] += w[j] * g[k] * phi[j];
                grad_a[k] += w[j] * g[k];
            }
        }
        let denom = kp.a_omega[i] + pot.beta_prime(phi[i])? + pot.pi_prime(phi[i]);
        report.min_denominator = report.min_denominator.min(denom);
        let exact = [(conv[0] - grad_a[0] * phi[i]) / denom, (conv[1] - grad_a[1] * phi[i]) / denom];
        let d = (exact[0] - fe[i][0]).hypot(exact[1] - fe[i][1]);
        report.max_discrepancy = report.max_discrepancy.max(d);
        report.linf_gradient = report.linf_gradient.max(exact[0].hypot(exact[1]));
        l2 += w[i] * d * d;
    }
    report.l2_discrepancy = l2.sqrt();
    Ok(report)
}

/// Quantities recorded along a trajectory for the convergence diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailSample {
    pub t: f64,
    pub energy: f64,
    /// `‖μ - m̄(μ)‖` in the lumped bulk–surface L² norm.
    pub mu_oscillation: f64,
    pub dist_l2: f64,
    pub dist_linf: f64,
}

pub fn tail_sample(state: &StepState, ss: &SteadyState, model: &Model) -> TailSample {
    let mesh = &model.mesh;
    let diff = &state.phi - &ss.phi;
    TailSample {
        t: state.t,
        energy: state.diagnostics.energy,
        mu_oscillation: project(&state.mu, mesh).l2_norm(mesh),
        dist_l2: diff.l2_norm(mesh),
        dist_linf: diff.linf(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum LsReport {
    Inapplicable(String),
    Fitted { gamma: f64, c: f64, samples: usize },
}

/// Largest trajectories may end this far (in L²) from the steady state and
/// still count as converging.
pub const LS_DISTANCE_THRESHOLD: f64 = 1e-2;

/// Fits `|E - E_∞|^{1-γ} ≤ C ‖μ - m̄(μ)‖` over the tail `t ∈ [T/2, T]`.
///
/// The exponent comes from a log-log regression of the energy gap on the
/// oscillation (`e ~ g^q` gives `γ = 1 - 1/q`), clamped to `(0, 1/2]`;
/// `C` is then the smallest constant valid at every tail sample.
pub fn ls_diagnostic(samples: &[TailSample], ss: &SteadyState) -> LsReport {
    let Some(last) = samples.last() else {
        return LsReport::Inapplicable("empty trajectory".into());
    };
    if last.dist_l2 > LS_DISTANCE_THRESHOLD {
        return LsReport::Inapplicable(format!(
            "terminal L2 distance {:.3e} exceeds {:.0e}",
            last.dist_l2, LS_DISTANCE_THRESHOLD
        ));
    }
    let t_half = 0.5 * last.t;
    let tail: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| s.t >= t_half)
        .map(|s| ((s.energy - ss.energy).abs(), s.mu_oscillation))
        .collect();
    let usable: Vec<(f64, f64)> = tail
        .iter()
        .copied()
        .filter(|&(e, g)| e > 1e-11 * ss.energy.abs().max(1.0) && g > 1e-9)
        .collect();
    if usable.len() < 3 {
        // already at the steady state up to round-off
        return LsReport::Fitted { gamma: 0.5, c: 0.0, samples: tail.len() };
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = usable.iter().map(|&(e, g)| (g.ln(), e.ln())).unzip();
    let q = slope(&xs, &ys);
    let gamma = if q.is_finite() && q > 1.0 { (1.0 - 1.0 / q).clamp(1e-3, 0.5) } else { 1e-3 };
    let c = usable.iter().map(|&(e, g)| e.powf(1.0 - gamma) / g).fold(0.0, f64::max);
    LsReport::Fitted { gamma, c, samples: usable.len() }
}

/// Least-squares slope of `ys` against `xs`.
pub fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SmoothingReport {
    AtSteadyState,
    Ratio(f64),
}

/// `sup_{t≥2τ} ‖φ - φ_∞‖_∞ / (sup_{t≥τ} ‖φ - φ_∞‖_{L²})²`.
pub fn smoothing_ratio(samples: &[TailSample], tau: f64) -> SmoothingReport {
    let num = samples.iter().filter(|s| s.t >= 2.0 * tau).map(|s| s.dist_linf).fold(0.0, f64::max);
    let den = samples.iter().filter(|s| s.t >= tau).map(|s| s.dist_l2).fold(0.0, f64::max);
    if den == 0.0 {
        SmoothingReport::AtSteadyState
    } else {
        SmoothingReport::Ratio(num / (den * den))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolve::{step, SchemeConfig};
    use crate::mesh::build_disk_mesh;
    use crate::nonlocal::{build_kernel_pair, KernelSpec};
    use crate::potentials::Potential;
    use crate::spaces::CouplingParam;
    use std::sync::Arc;

    fn model(level: usize, j: KernelSpec, pot: Potential) -> Model {
        let mesh = Arc::new(build_disk_mesh(level));
        let kp = Arc::new(build_kernel_pair(j, KernelSpec::gaussian(0.25, 1.0), &mesh));
        Model::new(mesh, kp, pot, CouplingParam::new(1.0).unwrap())
    }

    #[test]
    fn zero_mass_symmetric_solution() {
        let m = model(1, KernelSpec::gaussian(0.25, 2.0), Potential::log(0.5, 1.0));
        let guess = BulkSurfaceField::constant(&m.mesh, 0.0);
        let ss = solve_steady(0.0, &guess, &m).unwrap();
        assert!(ss.phi.linf() < 1e-14);
        assert!(ss.mu_inf.abs() < 1e-14);
        assert_eq!(ss.iterations, 0);
    }

    #[test]
    fn constant_regime_closed_form() {
        // very wide kernel: a_Ω and J∗m nearly cancel, so μ_∞ ≈ β(m) + π(m)
        let m = model(1, KernelSpec::gaussian(50.0, 1.0), Potential::log(1.0, 0.5));
        let mass = 0.3;
        let guess = BulkSurfaceField::constant(&m.mesh, 0.25);
        let ss = solve_steady(mass, &guess, &m).unwrap();
        assert!(ss.residual <= STEADY_TOL);
        assert!((&ss.phi - &BulkSurfaceField::constant(&m.mesh, mass)).linf() < 1e-10);
        let expect = m.potential.beta(mass).unwrap() + m.potential.pi(mass);
        assert!((ss.mu_inf - expect).abs() < 1e-10);
        let (db, ds) = averaging_defects(&ss, &m).unwrap();
        assert!(db < 1e-8 && ds < 1e-8);
        let g = check_gradient_regularity(&ss, &m).unwrap();
        assert!(g.max_discrepancy < 1e-10);
    }

    #[test]
    fn steady_state_is_a_fixed_point_of_the_step() {
        let m = model(1, KernelSpec::gaussian(0.25, 2.0), Potential::log(0.5, 1.0));
        let guess = m.mesh.interpolate_bulk(|x, _| 0.6 * (3.0 * x).tanh());
        let guess = BulkSurfaceField::from_bulk(&m.mesh, guess);
        let ss = solve_steady(0.0, &guess, &m).unwrap();
        assert!(ss.sep_gap > 0.0);
        assert!(separation_bound(&ss, &m).unwrap().holds());
        let cfg = SchemeConfig { dt: 1e-2, ..Default::default() };
        let s0 = StepState::initial(&ss.phi, &m, cfg.mode).unwrap();
        let s1 = step(&s0, &cfg, &m).unwrap();
        assert!((&s1.phi - &ss.phi).linf() <= 10.0 * cfg.newton_tol);
    }

    #[test]
    fn rejects_bad_inputs() {
        let m = model(0, KernelSpec::gaussian(0.25, 2.0), Potential::log(0.5, 1.0));
        let g = BulkSurfaceField::constant(&m.mesh, 0.0);
        assert!(matches!(solve_steady(1.0, &g, &m), Err(StationaryError::Mass(_))));
        let bad = BulkSurfaceField::constant(&m.mesh, 1.0);
        assert!(matches!(solve_steady(0.0, &bad, &m), Err(StationaryError::Guess)));
    }

    #[test]
    fn diagnostics_at_steady_state() {
        let ss_phi = BulkSurfaceField::new(DVector::zeros(2), DVector::zeros(1));
        let ss = SteadyState {
            phi: ss_phi,
            mu_inf: 0.0,
            residual: 0.0,
            sep_gap: 1.0,
            energy: -1.0,
            mass: 0.0,
            iterations: 0,
        };
        let samples: Vec<TailSample> = (0..10)
            .map(|k| TailSample { t: k as f64, energy: -1.0, mu_oscillation: 0.0, dist_l2: 0.0, dist_linf: 0.0 })
            .collect();
        assert_eq!(smoothing_ratio(&samples, 1.0), SmoothingReport::AtSteadyState);
        assert!(matches!(ls_diagnostic(&samples, &ss), LsReport::Fitted { gamma, .. } if gamma == 0.5));
        let far = [TailSample { t: 1.0, energy: 0.0, mu_oscillation: 1.0, dist_l2: 1.0, dist_linf: 1.0 }];
        assert!(matches!(ls_diagnostic(&far, &ss), LsReport::Inapplicable(_)));
    }

    #[test]
    fn ls_fit_recovers_quadratic_gap() {
        let ss = SteadyState {
            phi: BulkSurfaceField::new(DVector::zeros(1), DVector::zeros(1)),
            mu_inf: 0.0,
            residual: 0.0,
            sep_gap: 1.0,
            energy: 0.0,
            mass: 0.0,
            iterations: 0,
        };
        let samples: Vec<TailSample> = (0..20)
            .map(|k| {
                let g = (-0.5 * k as f64).exp();
                TailSample { t: k as f64, energy: 3.0 * g * g, mu_oscillation: g, dist_l2: g * 1e-3, dist_linf: g }
            })
            .collect();
        match ls_diagnostic(&samples, &ss) {
            LsReport::Fitted { gamma, c, .. } => {
                assert!((gamma - 0.5).abs() < 1e-12);
                assert!((c - 3f64.sqrt()).abs() < 1e-12);
            }
            r => panic!("{r:?}"),
        }
    }
}
