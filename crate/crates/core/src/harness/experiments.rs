//! Experiment drivers. Each returns a [`Report`] whose checks are signs,
//! monotonicity, boundedness and observed orders; fitted constants are
//! reported, never compared with fixed values.

use std::fmt::Write as _;

use crate::diagnostics::Diagnostics;
use crate::evolve::{run, run_with, step, Model, SchemeConfig, SchemeMode, StepState};
use crate::fields;
use crate::mesh::build_disk_mesh;
use crate::nonlocal::{validate_a1, young_trace_check, LpExponent};
use crate::potentials::{epsilon_star, validate_assumptions, yosida_beta, Potential, YosidaState};
use crate::spaces::{generalized_mean, project, BulkSurfaceField, CouplingParam, EllipticSolver};
use crate::stationary::{
    averaging_defects, check_gradient_regularity, ls_diagnostic, separation_bound, slope, smoothing_ratio,
    solve_steady, tail_sample, LsReport, SmoothingReport, SteadyState, TailSample, STEADY_TOL,
};

use super::config::RunConfig;
use super::output::{format_snapshot, OutDir};
use super::{build_model, Experiment, HarnessError, Report};

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn initial(cfg: &RunConfig, model: &Model, seed: u64) -> BulkSurfaceField {
    cfg.initial.build(&model.mesh, cfg.init_margin, seed)
}

/// Largest `|m̄(t) - m̄(0)|` and largest energy increase over a diagnostics stream.
pub fn mass_and_energy(diags: &[Diagnostics]) -> (f64, f64) {
    let m0 = diags[0].mean;
    let drift = diags.iter().map(|d| (d.mean - m0).abs()).fold(0.0, f64::max);
    let rise = diags.windows(2).map(|w| w[1].energy - w[0].energy).fold(f64::NEG_INFINITY, f64::max);
    (drift, rise)
}

/// `δ(τ) = min_{τ ≤ t_n ≤ T} (1 - ‖φ^n‖_∞)`: the separation constant a run
/// certifies for all times after `τ`.
pub fn separation_profile(diags: &[Diagnostics], taus: &[f64]) -> Vec<(f64, f64)> {
    taus.iter()
        .map(|&tau| {
            let d = diags
                .iter()
                .filter(|d| d.t >= tau - 1e-12)
                .map(|d| d.sep_gap)
                .fold(f64::INFINITY, f64::min);
            (tau, d)
        })
        .collect()
}

/// `|eq_residual(T)|` for each step size, and the observed orders between
/// consecutive step sizes.
pub fn energy_equality_order(
    phi0: &BulkSurfaceField,
    scheme: &SchemeConfig,
    model: &Model,
    dts: &[f64],
    horizon: f64,
) -> Result<(Vec<f64>, Vec<f64>), HarnessError> {
    let results: Vec<Result<f64, HarnessError>> = std::thread::scope(|s| {
        let handles: Vec<_> = dts
            .iter()
            .map(|&dt| {
                let cfg = SchemeConfig { dt, t_end: horizon, ..*scheme };
                s.spawn(move || {
                    let last = run_with(phi0, &cfg, model, |_| {})?;
                    Ok(last.diagnostics.eq_residual.abs())
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let residuals = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let orders = residuals
        .windows(2)
        .zip(dts.windows(2))
        .map(|(r, d)| (r[0] / r[1]).ln() / (d[0] / d[1]).ln())
        .collect();
    Ok((residuals, orders))
}

fn write_snapshots(out: &OutDir, model: &Model, snaps: &[crate::evolve::Snapshot], dt: f64) -> Result<(), HarnessError> {
    for s in snaps {
        let step = (s.t / dt).round() as usize;
        out.write(&format!("snapshot_{step:07}.txt"), &format_snapshot(s.t, &model.mesh, &s.phi, &s.mu, false))?;
    }
    Ok(())
}

pub fn simulate(cfg: &RunConfig, model: &Model, out: Option<&OutDir>) -> Result<Report, HarnessError> {
    let mut report = Report::new(Experiment::Simulate);
    let p = &cfg.params;
    let phi0 = initial(cfg, model, cfg.seed);
    let traj = run(&phi0, &cfg.scheme, model, cfg.output.snapshot_every)?;
    let diags = &traj.diagnostics;
    if let Some(out) = out {
        out.diagnostics("diagnostics.csv", diags, cfg.output.diagnostics_stride)?;
        write_snapshots(out, model, &traj.snapshots, cfg.scheme.dt)?;
    }
    let (drift, rise) = mass_and_energy(diags);
    report.metric("steps", (diags.len() - 1) as f64);
    report.metric("max_mass_drift", drift);
    report.metric("max_energy_increase", rise);
    report.metric("final_eq_residual", diags.last().unwrap().eq_residual);
    report.metric("total_newton_iters", diags.iter().map(|d| d.newton_iters).sum::<usize>() as f64);
    report.check("mass", drift <= 1e-10, format!("max |m(t) - m(0)| = {drift:.3e} (limit 1e-10)"));
    if diags.len() > 1 {
        report.check("energy-stability", rise <= 1e-10, format!("max E(n+1) - E(n) = {rise:.3e} (limit 1e-10)"));
    }

    let t_end = diags.last().unwrap().t;
    if model.potential.is_singular() && cfg.scheme.mode == SchemeMode::Singular && t_end >= p.separation_start {
        let taus: Vec<f64> = (0..)
            .map(|k| p.separation_start + 0.5 * k as f64)
            .take_while(|&t| t <= t_end + 1e-12)
            .collect();
        let profile = separation_profile(diags, &taus);
        let delta = profile[0].1;
        report.metric("delta", delta);
        for &(tau, d) in &profile {
            report.metric(&format!("delta({tau})"), d);
            // pointwise gap, not monotone while interfaces sharpen
            if let Some(g) = diags.iter().find(|d| (d.t - tau).abs() < 1e-9) {
                report.metric(&format!("gap({tau})"), g.sep_gap);
            }
        }
        report.check(
            "separation",
            delta >= p.separation_floor,
            format!("min gap for t >= {} is {delta:.4e} (floor {:e})", p.separation_start, p.separation_floor),
        );
        let monotone = profile.windows(2).all(|w| w[1].1 >= 0.9 * w[0].1);
        report.check("separation-profile", monotone, "delta(tau) nondecreasing within 10% on the sampled taus");
    }

    if !p.order_dts.is_empty() {
        let (res, orders) = energy_equality_order(&phi0, &cfg.scheme, model, &p.order_dts, p.order_horizon)?;
        for (dt, r) in p.order_dts.iter().zip(&res) {
            report.metric(&format!("eq_residual(dt={dt})"), *r);
        }
        let min_order = orders.iter().cloned().fold(f64::INFINITY, f64::min);
        report.metric("eq_residual_order", min_order);
        report.check(
            "energy-equality-order",
            min_order >= 0.9,
            format!("observed orders {orders:.3?} (need >= 0.9)"),
        );
    }
    Ok(report)
}

/// Least-squares fit of `A e^{-ωt} + B`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExpFit {
    Fitted { a: f64, omega: f64, b: f64, r2: f64 },
    /// The data are constant: only the plateau is meaningful.
    PlateauOnly { b: f64 },
}

impl ExpFit {
    pub fn plateau(&self) -> f64 {
        match *self {
            ExpFit::Fitted { b, .. } | ExpFit::PlateauOnly { b } => b,
        }
    }
}

/// For fixed `ω` the model is linear in `(A, B)`; `ω` is scanned on a
/// logarithmic grid and refined by golden-section search.
pub fn fit_exponential(ts: &[f64], es: &[f64]) -> ExpFit {
    let n = ts.len() as f64;
    let mean = es.iter().sum::<f64>() / n;
    let sst: f64 = es.iter().map(|e| (e - mean).powi(2)).sum();
    if sst <= 1e-28 * mean.abs().max(1.0).powi(2) * n {
        return ExpFit::PlateauOnly { b: mean };
    }
    let t0 = ts[0];
    let span = ts[ts.len() - 1] - t0;
    let solve = |omega: f64| -> (f64, f64, f64) {
        let xs: Vec<f64> = ts.iter().map(|t| (-omega * (t - t0)).exp()).collect();
        let mx = xs.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let sxy: f64 = xs.iter().zip(es).map(|(x, e)| (x - mx) * (e - mean)).sum();
        let a = if sxx > 0.0 { sxy / sxx } else { 0.0 };
        let b = mean - a * mx;
        let ssr: f64 = xs.iter().zip(es).map(|(x, e)| (e - a * x - b).powi(2)).sum();
        (a, b, ssr)
    };
    let grid: Vec<f64> = (0..=200).map(|k| 10f64.powf(-2.0 + 5.0 * k as f64 / 200.0) / span.max(1e-12)).collect();
    let best = (0..grid.len()).min_by(|&i, &j| solve(grid[i]).2.total_cmp(&solve(grid[j]).2)).unwrap();
    let (mut lo, mut hi) = (grid[best.saturating_sub(1)].ln(), grid[(best + 1).min(grid.len() - 1)].ln());
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let x1 = hi - g * (hi - lo);
        let x2 = lo + g * (hi - lo);
        if solve(x1.exp()).2 <= solve(x2.exp()).2 {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    let omega = (0.5 * (lo + hi)).exp();
    let (a, b, ssr) = solve(omega);
    ExpFit::Fitted { a: a * (omega * t0).exp(), omega, b, r2: 1.0 - ssr / sst }
}

pub fn dissipative(cfg: &RunConfig, model: &Model, out: Option<&OutDir>) -> Result<Report, HarnessError> {
    let mut report = Report::new(Experiment::Dissipative);
    let p = &cfg.params;
    let ics = [initial(cfg, model, cfg.seed), initial(cfg, model, cfg.seed.wrapping_add(1))];
    let (m1, m2) = (generalized_mean(&ics[0], &model.mesh), generalized_mean(&ics[1], &model.mesh));
    report.metric("mass_gap_between_ics", (m1 - m2).abs());
    if (m1 - m2).abs() > 1e-12 {
        return Err(HarnessError::Config(format!("initial conditions have different masses {m1} and {m2}")));
    }
    if ics[0] == ics[1] {
        report.note("the initial condition does not depend on the seed; both runs coincide");
    }
    let trajs: Vec<Result<Vec<Diagnostics>, HarnessError>> = std::thread::scope(|s| {
        let hs: Vec<_> = ics
            .iter()
            .map(|ic| s.spawn(move || Ok(run(ic, &cfg.scheme, model, 0)?.diagnostics)))
            .collect();
        hs.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut plateaus = Vec::new();
    for (k, traj) in trajs.into_iter().enumerate() {
        let diags = traj?;
        if let Some(out) = out {
            out.diagnostics(&format!("diagnostics_ic{}.csv", k + 1), &diags, cfg.output.diagnostics_stride)?;
        }
        let (_, rise) = mass_and_energy(&diags);
        report.check(
            &format!("energy-decay-ic{}", k + 1),
            rise <= 1e-10,
            format!("max energy increase {rise:.3e}"),
        );
        let window: Vec<&Diagnostics> = diags.iter().filter(|d| d.t >= p.fit_start).collect();
        let ts: Vec<f64> = window.iter().map(|d| d.t).collect();
        let es: Vec<f64> = window.iter().map(|d| d.energy).collect();
        let fit = fit_exponential(&ts, &es);
        let e0 = diags[0].energy;
        match fit {
            ExpFit::Fitted { a, omega, b, r2 } => {
                report.metric(&format!("omega_ic{}", k + 1), omega);
                report.metric(&format!("amplitude_ic{}", k + 1), a);
                report.metric(&format!("plateau_ic{}", k + 1), b);
                report.metric(&format!("r2_ic{}", k + 1), r2);
                report.check(&format!("rate-ic{}", k + 1), omega > 0.0 && r2 >= 0.9, format!("omega = {omega:.4e}, R^2 = {r2:.4}"));
                report.check(&format!("plateau-below-initial-ic{}", k + 1), b <= e0, format!("B = {b:.6e}, E(0) = {e0:.6e}"));
            }
            ExpFit::PlateauOnly { b } => {
                report.metric(&format!("plateau_ic{}", k + 1), b);
                report.note(format!("ic{}: energy constant, plateau only", k + 1));
            }
        }
        plateaus.push(fit.plateau());
    }
    let rel = (plateaus[0] - plateaus[1]).abs() / plateaus[0].abs().max(plateaus[1].abs()).max(1e-300);
    report.metric("plateau_relative_gap", rel);
    report.check(
        "plateau-agreement",
        rel <= p.plateau_tolerance,
        format!("plateaus {:.6e} and {:.6e} differ by {:.2}%", plateaus[0], plateaus[1], 100.0 * rel),
    );
    Ok(report)
}

/// Distances of a trajectory at coupling `L` from a reference trajectory
/// stored step by step: `(‖·‖_{L²(0,T;L²)}, max over t ≥ t_from of ‖·‖_{L²})`.
type Distances = (f64, f64, Vec<Diagnostics>);

fn distance_to_reference(
    phi0: &BulkSurfaceField,
    cfg: &SchemeConfig,
    model: &Model,
    reference: &[BulkSurfaceField],
    t_from: f64,
) -> Result<Distances, HarnessError> {
    let mesh = &model.mesh;
    let mut integral = 0.0;
    let mut sup: f64 = 0.0;
    let mut diags = Vec::new();
    run_with(phi0, cfg, model, |s| {
        diags.push(s.diagnostics);
        if s.step > 0 {
            let d = (&s.phi - &reference[s.step]).l2_norm(mesh);
            integral += cfg.dt * d * d;
            if s.t >= t_from - 1e-12 {
                sup = sup.max(d);
            }
        }
    })?;
    Ok((integral.sqrt(), sup, diags))
}

pub fn l_limit(cfg: &RunConfig, model: &Model, out: Option<&OutDir>) -> Result<Report, HarnessError> {
    let mut report = Report::new(Experiment::LLimit);
    let ls = &cfg.params.l_list;
    if ls.len() < 3 || ls.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(HarnessError::Config("params.l_list: need at least 3 positive values".into()));
    }
    let t_from = 1.0f64.min(cfg.scheme.t_end);
    let phi0 = initial(cfg, model, cfg.seed);
    let reference_model = model.with_coupling(CouplingParam::new(0.0)?);
    let mut reference = Vec::with_capacity(cfg.scheme.n_steps() + 1);
    let mut ref_diags = Vec::new();
    run_with(&phi0, &cfg.scheme, &reference_model, |s| {
        reference.push(s.phi.clone());
        ref_diags.push(s.diagnostics);
    })?;
    if let Some(out) = out {
        out.diagnostics("diagnostics_L0.csv", &ref_diags, cfg.output.diagnostics_stride)?;
    }
    let results: Vec<Result<Distances, HarnessError>> = std::thread::scope(|s| {
        let hs: Vec<_> = ls
            .iter()
            .map(|&l| {
                let (phi0, reference) = (&phi0, &reference);
                s.spawn(move || {
                    let m = model.with_coupling(CouplingParam::new(l)?);
                    distance_to_reference(phi0, &cfg.scheme, &m, reference, t_from)
                })
            })
            .collect();
        hs.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut table = String::from("L,e_L,f_L\n");
    let (mut es, mut fs) = (Vec::new(), Vec::new());
    for (l, r) in ls.iter().zip(results) {
        let (e, f, diags) = r?;
        let _ = writeln!(table, "{l:e},{e:e},{f:e}");
        if let Some(out) = out {
            out.diagnostics(&format!("diagnostics_L{l:e}.csv"), &diags, cfg.output.diagnostics_stride)?;
        }
        report.metric(&format!("e_L({l:e})"), e);
        report.metric(&format!("f_L({l:e})"), f);
        es.push(e);
        fs.push(f);
    }
    if let Some(out) = out {
        out.write("rates.csv", &table)?;
    }
    let logl: Vec<f64> = ls.iter().map(|l| l.ln()).collect();
    let slope_e = slope(&logl, &es.iter().map(|e| e.ln()).collect::<Vec<_>>());
    let slope_f = slope(&logl, &fs.iter().map(|f| f.ln()).collect::<Vec<_>>());
    report.metric("slope_e", slope_e);
    report.metric("slope_f", slope_f);
    report.check("slope-l2l2", slope_e >= 0.4, format!("log-log slope of L2(0,T;L2) error = {slope_e:.3} (need >= 0.4)"));
    report.check("slope-sup", slope_f >= 0.2, format!("log-log slope of max over [1,T] = {slope_f:.3} (need >= 0.2)"));
    // paired with `ls`, which must be ordered from large to small L
    let decreasing = |v: &[f64]| {
        let order = ls.windows(2).all(|w| w[1] < w[0]);
        let sign = if order { 1.0 } else { -1.0 };
        v.windows(2).all(|w| sign * (w[0] - w[1]) > 0.0)
    };
    report.check("monotone-l2l2", decreasing(&es), format!("e_L = {}", sci(&es)));
    report.check("monotone-sup", decreasing(&fs), format!("f_L = {}", sci(&fs)));
    Ok(report)
}

fn step_index(t: f64, dt: f64) -> Result<usize, HarnessError> {
    let k = (t / dt).round();
    if ((t / dt) - k).abs() > 1e-9 {
        return Err(HarnessError::Config(format!("time {t} is not a multiple of dt = {dt}")));
    }
    Ok(k as usize)
}

pub fn cont_dep(cfg: &RunConfig, model: &Model, out: Option<&OutDir>) -> Result<Report, HarnessError> {
    let mut report = Report::new(Experiment::ContDep);
    let p = &cfg.params;
    let mesh = &model.mesh;
    let solver = EllipticSolver::new(mesh, model.coupling)?;
    let phi1 = initial(cfg, model, cfg.seed);

    let mut rng = fields::rng(cfg.seed.wrapping_add(1));
    let noise = project(
        &BulkSurfaceField::new(fields::smoothed_uniform_bulk(mesh, &mut rng), fields::smoothed_uniform_surf(mesh, &mut rng)),
        mesh,
    );
    let phi2 = &phi1 + &(&noise * (p.perturbation / noise.linf()));
    if phi2.linf() >= 1.0 {
        return Err(HarnessError::Config("perturbed initial datum leaves (-1, 1)".into()));
    }
    let (m1, m2) = (generalized_mean(&phi1, mesh), generalized_mean(&phi2, mesh));
    report.metric("mean_gap", (m1 - m2).abs());
    if (m1 - m2).abs() > 1e-14 {
        return Err(HarnessError::Config(format!("initial data must share the generalized mean: {m1} vs {m2}")));
    }

    let record = |phi0: &BulkSurfaceField| -> Result<(Vec<BulkSurfaceField>, Vec<Diagnostics>), HarnessError> {
        let mut states = Vec::new();
        let mut diags = Vec::new();
        run_with(phi0, &cfg.scheme, model, |s| {
            states.push(s.phi.clone());
            diags.push(s.diagnostics);
        })?;
        Ok((states, diags))
    };
    let runs: Vec<Result<_, HarnessError>> = std::thread::scope(|s| {
        let hs: Vec<_> = [&phi1, &phi2, &phi1].into_iter().map(|ic| s.spawn(move || record(ic))).collect();
        hs.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut runs = runs.into_iter();
    let (a, da) = runs.next().unwrap()?;
    let (b, db) = runs.next().unwrap()?;
    let (c, _) = runs.next().unwrap()?;
    if let Some(out) = out {
        out.diagnostics("diagnostics_a.csv", &da, cfg.output.diagnostics_stride)?;
        out.diagnostics("diagnostics_b.csv", &db, cfg.output.diagnostics_stride)?;
    }

    let identical = a.iter().zip(&c).all(|(x, y)| x == y);
    report.check("identical-ics", identical, "rerun from the same datum differs at no step");

    let c_star = validate_assumptions(&model.potential, &model.kernels).contraction_constant;
    report.metric("c_star", c_star);
    report.check("c-star-positive", c_star > 0.0, format!("C_* = {c_star:.6}"));

    let dt = cfg.scheme.dt;
    let dual: Vec<f64> = a
        .iter()
        .zip(&b)
        .map(|(x, y)| solver.dual_norm(&(x - y), mesh))
        .collect::<Result<_, _>>()?;
    let l2: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (x - y).l2_norm(mesh)).collect();
    let d0 = dual[0] * dual[0];
    let mut integral_l2 = 0.0;
    let mut integral_dual = 0.0;
    let (mut gronwall, mut m4, mut sup_ratio) = (0.0f64, 0.0f64, 0.0f64);
    for n in 1..dual.len() {
        integral_l2 += dt * l2[n] * l2[n];
        integral_dual += dt * dual[n - 1] * dual[n - 1];
        let t = n as f64 * dt;
        gronwall = gronwall.max((dual[n] * dual[n] + integral_l2) / d0);
        sup_ratio = sup_ratio.max(dual[n] / dual[0]);
        let excess = dual[n] * dual[n] - (-c_star * t).exp() * d0;
        if excess > 0.0 {
            m4 = m4.max(excess / integral_dual);
        }
    }
    report.metric("gronwall_constant", gronwall);
    report.metric("contraction_m4", m4);
    report.metric("sup_dual_ratio", sup_ratio);
    report.check("gronwall-finite", gronwall.is_finite() && d0 > 0.0, format!("fitted C = {gronwall:.4e}"));
    report.check("contraction-finite", m4.is_finite(), format!("fitted M4 = {m4:.4e}"));

    let i1 = step_index(p.holder_base, dt)?;
    let mut ratios = Vec::new();
    for k in 1..=p.holder_levels {
        let h = 0.5f64.powi(k as i32);
        let i2 = step_index(p.holder_base + h, dt)?;
        if i2 >= a.len() {
            return Err(HarnessError::Config(format!("t_end too short for the Hölder pair (1, 1 + 2^-{k})")));
        }
        let r = solver.dual_norm(&(&a[i2] - &a[i1]), mesh)? / h.sqrt();
        report.metric(&format!("holder_ratio(k={k})"), r);
        ratios.push(r);
    }
    if !ratios.is_empty() {
        let max = ratios.iter().cloned().fold(0.0, f64::max);
        let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let spread = max / min;
        report.metric("holder_spread", spread);
        report.check(
            "holder-bounded",
            spread <= p.holder_max_spread,
            format!("max/min of the 1/2-Hölder ratios = {spread:.3} (limit {})", p.holder_max_spread),
        );
    }
    Ok(report)
}

/// States kept for the tail diagnostics of the equilibrium run.
const TAIL_SAMPLES: f64 = 400.0;

pub fn equilibrium(cfg: &RunConfig, model: &Model, out: Option<&OutDir>) -> Result<Report, HarnessError> {
    let mut report = Report::new(Experiment::Equilibrium);
    let p = &cfg.params;
    let phi0 = initial(cfg, model, cfg.seed);
    let every = ((cfg.scheme.n_steps() as f64 / TAIL_SAMPLES).ceil() as usize).max(1);
    let mut kept: Vec<StepState> = Vec::new();
    let mut diags = Vec::new();
    let last = run_with(&phi0, &cfg.scheme, model, |s| {
        diags.push(s.diagnostics);
        if s.step % every == 0 {
            kept.push(s.clone());
        }
    })?;
    if kept.last().map(|s| s.step) != Some(last.step) {
        kept.push(last.clone());
    }
    let m0 = diags[0].mean;
    let ss = solve_steady(m0, &last.phi, model)?;
    finish_equilibrium(cfg, model, out, &mut report, &diags, &kept, &ss)?;
    let tail = &kept;
    let terminal = (&last.phi - &ss.phi).linf();
    report.metric("terminal_linf_distance", terminal);
    if terminal <= p.equilibrium_threshold {
        report.check(
            "terminal-distance",
            true,
            format!("||phi(T) - phi_inf||_inf = {terminal:.3e} (threshold {:e})", p.equilibrium_threshold),
        );
    } else {
        report.inconclusive(
            "terminal-distance",
            format!("||phi(T) - phi_inf||_inf = {terminal:.3e} above {:e}; run longer", p.equilibrium_threshold),
        );
    }
    let samples: Vec<TailSample> = tail.iter().map(|s| tail_sample(s, &ss, model)).collect();
    let t_half = 0.5 * last.t;
    let tail_d: Vec<f64> = samples.iter().filter(|s| s.t >= t_half).map(|s| s.dist_linf).collect();
    let monotone = tail_d.windows(2).all(|w| w[1] <= w[0] + 1e-10);
    report.check("tail-decreasing", monotone, "L-infinity distance to the steady state nonincreasing on [T/2, T]");
    if let Some(out) = out {
        let mut csv = String::from("t,energy,mu_oscillation,dist_l2,dist_linf\n");
        for s in &samples {
            let _ = writeln!(csv, "{:e},{:e},{:e},{:e},{:e}", s.t, s.energy, s.mu_oscillation, s.dist_l2, s.dist_linf);
        }
        out.write("tail.csv", &csv)?;
    }
    match ls_diagnostic(&samples, &ss) {
        LsReport::Fitted { gamma, c, samples } => {
            report.metric("ls_gamma", gamma);
            report.metric("ls_c", c);
            report.metric("ls_samples", samples as f64);
        }
        LsReport::Inapplicable(why) => report.note(format!("Lojasiewicz-Simon fit inapplicable: {why}")),
    }
    match smoothing_ratio(&samples, p.smoothing_tau) {
        SmoothingReport::Ratio(r) => report.metric("smoothing_ratio", r),
        SmoothingReport::AtSteadyState => report.note("smoothing ratio: trajectory at steady state"),
    }
    Ok(report)
}

/// Checks shared by `equilibrium` and `steady` once a steady state is known.
fn finish_equilibrium(
    cfg: &RunConfig,
    model: &Model,
    out: Option<&OutDir>,
    report: &mut Report,
    diags: &[Diagnostics],
    kept: &[StepState],
    ss: &SteadyState,
) -> Result<(), HarnessError> {
    let m0 = diags[0].mean;
    if let Some(out) = out {
        out.diagnostics("diagnostics.csv", diags, cfg.output.diagnostics_stride)?;
        let last = kept.last().unwrap();
        out.write("final.txt", &format_snapshot(last.t, &model.mesh, &last.phi, &last.mu, false))?;
        let mu = BulkSurfaceField::constant(&model.mesh, ss.mu_inf);
        out.write("steady.txt", &format_snapshot(last.t, &model.mesh, &ss.phi, &mu, true))?;
    }
    report.metric("steady_residual", ss.residual);
    report.metric("steady_mu", ss.mu_inf);
    report.metric("steady_sep_gap", ss.sep_gap);
    report.metric("steady_energy", ss.energy);
    report.metric("steady_newton_iters", ss.iterations as f64);
    report.check("steady-residual", ss.residual <= STEADY_TOL, format!("residual = {:.3e}", ss.residual));
    let dm = (ss.mass - m0).abs();
    report.metric("steady_mass_gap", dm);
    report.check("steady-mass", dm <= 1e-11, format!("|m(phi_inf) - m(phi_0)| = {dm:.3e}"));

    let s0 = StepState::initial(&ss.phi, model, cfg.scheme.mode)?;
    let s1 = step(&s0, &cfg.scheme, model)?;
    let moved = (&s1.phi - &ss.phi).linf();
    report.metric("fixed_point_defect", moved);
    report.check(
        "fixed-point",
        moved <= 10.0 * cfg.scheme.newton_tol,
        format!("one step from phi_inf moves it by {moved:.3e} (limit {:e})", 10.0 * cfg.scheme.newton_tol),
    );
    Ok(())
}

pub fn steady(cfg: &RunConfig, model: &Model, out: Option<&OutDir>) -> Result<Report, HarnessError> {
    let mut report = Report::new(Experiment::Steady);
    let phi0 = initial(cfg, model, cfg.seed);
    let traj = run(&phi0, &cfg.scheme, model, 0)?;
    let m0 = traj.diagnostics[0].mean;
    let ss = solve_steady(m0, &traj.last.phi, model)?;
    finish_equilibrium(cfg, model, out, &mut report, &traj.diagnostics, std::slice::from_ref(&traj.last), &ss)?;
    report.metric("guess_linf_distance", (&traj.last.phi - &ss.phi).linf());

    let (db, ds) = averaging_defects(&ss, model)?;
    report.metric("averaging_defect_bulk", db);
    report.metric("averaging_defect_surf", ds);
    report.check("averaging-identities", db <= 1e-8 && ds <= 1e-8, format!("defects {db:.2e} (bulk), {ds:.2e} (surface)"));
    report.check("steady-separation", ss.sep_gap > 0.0, format!("delta_inf = {:.4e}", ss.sep_gap));
    if model.potential.is_singular() {
        let sb = separation_bound(&ss, model)?;
        report.metric("beta_at_gap", sb.beta_at_gap);
        report.metric("separation_bound", sb.bound);
        report.check("separation-bound", sb.holds(), format!("beta(1 - delta_inf) = {:.4} <= {:.4}", sb.beta_at_gap, sb.bound));
    }
    let g = check_gradient_regularity(&ss, model)?;
    report.metric("gradient_max_discrepancy", g.max_discrepancy);
    report.metric("gradient_l2_discrepancy", g.l2_discrepancy);
    report.metric("gradient_linf", g.linf_gradient);
    report.metric("gradient_min_denominator", g.min_denominator);
    let c = &model.kernels.constants;
    let margin = c.a_lower + model.potential.alpha() - model.potential.gamma();
    report.check(
        "denominator-positive",
        g.min_denominator > 0.0 && g.min_denominator >= margin - 1e-12,
        format!("min a + beta' + pi' = {:.4} (a_* + alpha - gamma = {margin:.4})", g.min_denominator),
    );
    Ok(report)
}

/// Independent bisection for `β_ε(s)`: solves `r + ε β(r) = s` on the domain of `β`.
pub fn bisection_yosida(pot: &Potential, epsilon: f64, s: f64) -> f64 {
    let (mut lo, mut hi) = if pot.is_singular() { (-1.0f64, 1.0f64) } else { (-s.abs() - 1.0, s.abs() + 1.0) };
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f = mid + epsilon * pot.beta(mid).expect("inside the domain") - s;
        if f < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (s - 0.5 * (lo + hi)) / epsilon
}

pub fn yosida_sweep(cfg: &RunConfig, model: &Model, out: Option<&OutDir>) -> Result<Report, HarnessError> {
    let mut report = Report::new(Experiment::YosidaSweep);
    let p = &cfg.params;
    let eps_star = epsilon_star(&model.potential, &model.kernels);
    report.metric("epsilon_star", eps_star);
    for &e in &p.epsilon_list {
        YosidaState::new(e, &model.potential, &model.kernels).map_err(|m| HarnessError::Config(format!("params.epsilon_list: {m}")))?;
    }
    let mut oracle_gap: f64 = 0.0;
    for &e in &p.epsilon_list {
        let ys = YosidaState { epsilon: e, epsilon_star: eps_star };
        for k in 0..=40 {
            let s = -2.0 + 0.1 * k as f64;
            let got = yosida_beta(&model.potential, &ys, s).map_err(crate::error::EvolveError::from)?;
            oracle_gap = oracle_gap.max((got - bisection_yosida(&model.potential, e, s)).abs());
        }
    }
    report.metric("oracle_max_gap", oracle_gap);
    report.check("scalar-oracle", oracle_gap <= 1e-12, format!("max |beta_eps - bisection| = {oracle_gap:.2e}"));

    let phi0 = initial(cfg, model, cfg.seed);
    let base = SchemeConfig { t_end: p.yosida_time, ..cfg.scheme };
    let modes: Vec<SchemeMode> = std::iter::once(SchemeMode::Singular)
        .chain(p.epsilon_list.iter().map(|&epsilon| SchemeMode::Yosida { epsilon }))
        .collect();
    let finals: Vec<Result<StepState, HarnessError>> = std::thread::scope(|s| {
        let hs: Vec<_> = modes
            .iter()
            .map(|&mode| {
                let phi0 = &phi0;
                s.spawn(move || Ok(run_with(phi0, &SchemeConfig { mode, ..base }, model, |_| {})?))
            })
            .collect();
        hs.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let finals = finals.into_iter().collect::<Result<Vec<_>, _>>()?;
    let mut dists = Vec::new();
    let mut table = String::from("epsilon,l2_distance\n");
    for (e, f) in p.epsilon_list.iter().zip(&finals[1..]) {
        let d = (&f.phi - &finals[0].phi).l2_norm(&model.mesh);
        report.metric(&format!("distance(eps={e})"), d);
        let _ = writeln!(table, "{e:e},{d:e}");
        dists.push(d);
    }
    if let Some(out) = out {
        out.write("yosida.csv", &table)?;
    }
    let monotone = dists.windows(2).all(|w| w[1] < w[0]);
    report.check("distance-decreasing", monotone, format!("L2 distances at t = {}: {}", p.yosida_time, sci(&dists)));
    Ok(report)
}

/// Levels of the manufactured-solution study.
pub const MANUFACTURED_LEVELS: [usize; 3] = [1, 2, 3];

/// Discrete L² error of the elliptic solver against `u = x³` with boundary
/// part `(1 + 3L) cos³θ`, for which `y = -6x` and
/// `y_Γ = (1 + 3L)(3 cos θ + 9 cos 3θ)/4 + 3 cos³θ`.
pub fn manufactured_error(level: usize, l: f64) -> Result<f64, HarnessError> {
    let mesh = build_disk_mesh(level);
    let coupling = CouplingParam::new(l)?;
    let solver = EllipticSolver::new(&mesh, coupling)?;
    let g = 1.0 + 3.0 * l;
    let y = BulkSurfaceField::new(
        mesh.interpolate_bulk(|x, _| -6.0 * x),
        mesh.interpolate_surf(|t| g * (3.0 * t.cos() + 9.0 * (3.0 * t).cos()) / 4.0 + 3.0 * t.cos().powi(3)),
    );
    let exact = BulkSurfaceField::new(mesh.interpolate_bulk(|x, _| x.powi(3)), mesh.interpolate_surf(|t| g * t.cos().powi(3)));
    let u = solver.solve(&project(&y, &mesh), &mesh)?;
    Ok((&u - &project(&exact, &mesh)).l2_norm(&mesh))
}

/// Errors on [`MANUFACTURED_LEVELS`] and the observed orders between them.
pub fn manufactured_orders(l: f64) -> Result<(Vec<f64>, Vec<f64>), HarnessError> {
    let errs = MANUFACTURED_LEVELS.iter().map(|&k| manufactured_error(k, l)).collect::<Result<Vec<_>, _>>()?;
    let orders = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    Ok((errs, orders))
}

pub fn validate(cfg: &RunConfig, model: &Model, out: Option<&OutDir>) -> Result<Report, HarnessError> {
    let _ = out;
    let mut report = Report::new(Experiment::Validate);
    let kp = &model.kernels;
    let mesh = &model.mesh;
    report.gate_failures = cfg.gate(kp);
    let a1 = validate_a1(kp);
    let c = a1.constants;
    for (k, v) in [
        ("a_lower", c.a_lower),
        ("a_upper", c.a_upper),
        ("a_surf_lower", c.a_surf_lower),
        ("a_surf_upper", c.a_surf_upper),
        ("b_upper", c.b_upper),
        ("b_surf_upper", c.b_surf_upper),
        ("j_w11", kp.j_w11),
    ] {
        report.metric(k, v);
    }
    let assumptions = validate_assumptions(&model.potential, kp);
    report.metric("alpha", assumptions.alpha);
    report.metric("gamma", assumptions.gamma);
    report.metric("a3_bulk_threshold", assumptions.bulk_threshold);
    report.metric("a3_surf_threshold", assumptions.surf_threshold);
    report.metric("c_star", assumptions.contraction_constant);
    report.metric("epsilon_star", epsilon_star(&model.potential, kp));
    report.check("A1", a1.passed(), format!("a_* = {:.4}, a_⊛ = {:.4}", c.a_lower, c.a_surf_lower));
    report.check("A3", assumptions.a3_bulk && assumptions.a3_surf, format!(
        "gamma = {} < {:.4} (bulk), < {:.4} (surface)",
        assumptions.gamma, assumptions.bulk_threshold, assumptions.surf_threshold
    ));
    report.check("A7", assumptions.a7, "1/beta(1-2delta) ~ 1/|ln delta|");
    report.check("A8", assumptions.a8, format!("1/beta'(1-2delta) <= {:.3} delta", assumptions.a8_constant));
    report.check("A9", assumptions.a9, "beta' monotone near the endpoints");

    // elliptic solver on random mean-zero data
    let solver = EllipticSolver::new(mesh, model.coupling)?;
    let mut rng = fields::rng(cfg.seed);
    let mut draw = || {
        let f = BulkSurfaceField::new(fields::uniform_bulk(mesh, &mut rng), fields::uniform_surf(mesh, &mut rng));
        project(&f, mesh)
    };
    let (y1, y2) = (draw(), draw());
    let (u1, u2) = (solver.solve(&y1, mesh)?, solver.solve(&y2, mesh)?);
    let residual = solver.weak_residual(&u1, &y1, mesh).max(solver.weak_residual(&u2, &y2, mesh));
    let defect = (u1.inner(&y2, mesh) - y1.inner(&u2, mesh)).abs();
    report.metric("elliptic_weak_residual", residual);
    report.metric("elliptic_symmetry_defect", defect);
    report.metric("poincare_constant", solver.poincare_estimate(mesh, 50, cfg.seed));
    report.check("elliptic-residual", residual <= 1e-10, format!("{residual:.2e}"));
    report.check("elliptic-self-adjoint", defect <= 1e-11, format!("{defect:.2e}"));
    let (errs, orders) = manufactured_orders(model.coupling.l())?;
    for (k, e) in MANUFACTURED_LEVELS.iter().zip(&errs) {
        report.metric(&format!("manufactured_error(level={k})"), *e);
    }
    report.check(
        "elliptic-convergence",
        orders.iter().all(|o| (1.8..=2.2).contains(o)),
        format!("L2 orders {} on levels {MANUFACTURED_LEVELS:?} (need [1.8, 2.2])", sci(&orders)),
    );

    // trace inequality on this level and the next
    let fine_cfg = RunConfig { mesh_level: cfg.mesh_level + 1, ..cfg.clone() };
    let fine = build_model(&fine_cfg, true)?;
    let mut worst: f64 = 0.0;
    let mut spread: f64 = 0.0;
    for p in LpExponent::ALL {
        let r0 = young_trace_check(kp, mesh, p, cfg.params.young_trials, cfg.seed);
        let r1 = young_trace_check(&fine.kernels, &fine.mesh, p, cfg.params.young_trials, cfg.seed);
        report.metric(&format!("young_ratio({p})"), r0);
        report.metric(&format!("young_ratio_fine({p})"), r1);
        worst = worst.max(r0).max(r1);
        spread = spread.max((r0 - r1).abs() / r0.max(r1));
    }
    report.metric("young_constant", worst);
    report.check("young-bounded", worst.is_finite() && worst > 0.0, format!("max ratio {worst:.4}"));
    report.check("young-mesh-stable", spread <= 0.1, format!("largest relative change across levels {:.2}%", 100.0 * spread));
    Ok(report)
}
