//! Convex/concave splitting of the free-energy densities `F = β̂ + π̂`.
//!
//! The bulk and surface densities share the same singular part, so one
//! [`Potential`] serves both.

use serde::{Deserialize, Serialize};

use crate::error::PotentialError;
use crate::nonlocal::KernelPair;
use crate::scalar::increasing_root;

/// Logarithmic (Flory–Huggins) potential at temperature `theta` below the
/// critical temperature `theta0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogPotential {
    pub theta: f64,
    pub theta0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Potential {
    Log(LogPotential),
    /// `(s² - 1)²/4 - 1/4`, split as `s⁴/4 + s²/2` and `-s²`. Smoke tests only.
    Quartic,
}

fn check_open(s: f64) -> Result<(), PotentialError> {
    if s.abs() < 1.0 {
        Ok(())
    } else {
        Err(PotentialError::Domain(s))
    }
}

impl Potential {
    pub fn log(theta: f64, theta0: f64) -> Self {
        Potential::Log(LogPotential { theta, theta0 })
    }

    pub fn is_singular(&self) -> bool {
        matches!(self, Potential::Log(_))
    }

    /// Lower bound `α` of `β'`.
    pub fn alpha(&self) -> f64 {
        match self {
            Potential::Log(p) => p.theta,
            Potential::Quartic => 1.0,
        }
    }

    /// Lipschitz constant `γ` of `π`.
    pub fn gamma(&self) -> f64 {
        match self {
            Potential::Log(p) => p.theta0,
            Potential::Quartic => 2.0,
        }
    }

    pub fn beta(&self, s: f64) -> Result<f64, PotentialError> {
        match self {
            Potential::Log(p) => {
                check_open(s)?;
                Ok(p.theta * s.signum() * s.abs().atanh())
            }
            Potential::Quartic => Ok(s * s * s + s),
        }
    }

    pub fn beta_prime(&self, s: f64) -> Result<f64, PotentialError> {
        match self {
            Potential::Log(p) => {
                check_open(s)?;
                Ok(p.theta / ((1.0 - s) * (1.0 + s)))
            }
            Potential::Quartic => Ok(3.0 * s * s + 1.0),
        }
    }

    /// Convex part `β̂`; finite on the closed interval for the log family.
    pub fn beta_hat(&self, s: f64) -> Result<f64, PotentialError> {
        match self {
            Potential::Log(p) => {
                if s.abs() > 1.0 || s.is_nan() {
                    return Err(PotentialError::Domain(s));
                }
                let xlogx = |x: f64| if x == 0.0 { 0.0 } else { x * x.ln() };
                Ok(0.5 * p.theta * (xlogx(1.0 + s) + xlogx(1.0 - s)))
            }
            Potential::Quartic => Ok(0.25 * s.powi(4) + 0.5 * s * s),
        }
    }

    pub fn pi(&self, s: f64) -> f64 {
        match self {
            Potential::Log(p) => -p.theta0 * s,
            Potential::Quartic => -2.0 * s,
        }
    }

    pub fn pi_prime(&self, _s: f64) -> f64 {
        -self.gamma()
    }

    pub fn pi_hat(&self, s: f64) -> f64 {
        -0.5 * self.gamma() * s * s
    }

    /// Inverse of `β`, defined on the whole line.
    pub fn beta_inverse(&self, b: f64) -> f64 {
        match self {
            Potential::Log(p) => (b / p.theta).tanh(),
            Potential::Quartic => {
                // s³ + s = b has one real root (Cardano)
                let d = (0.25 * b * b + 1.0 / 27.0).sqrt();
                (0.5 * b + d).cbrt() - (d - 0.5 * b).cbrt()
            }
        }
    }

    /// Derivative of [`Potential::beta_inverse`], i.e. `1/β'(β⁻¹(b))`.
    pub fn beta_inverse_prime(&self, b: f64) -> f64 {
        match self {
            Potential::Log(p) => {
                let c = (b / p.theta).cosh();
                1.0 / (p.theta * c * c)
            }
            Potential::Quartic => {
                let s = self.beta_inverse(b);
                1.0 / (3.0 * s * s + 1.0)
            }
        }
    }
}

/// Moreau–Yosida regularization parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YosidaState {
    pub epsilon: f64,
    pub epsilon_star: f64,
}

/// Upper bound for the regularization parameter:
/// `min{1/(2a^* + 2γ + 1), 1/(2a^⊛ + 2γ + 1)}`.
pub fn epsilon_star(pot: &Potential, kp: &KernelPair) -> f64 {
    let g = pot.gamma();
    let c = &kp.constants;
    (1.0 / (2.0 * c.a_upper + 2.0 * g + 1.0)).min(1.0 / (2.0 * c.a_surf_upper + 2.0 * g + 1.0))
}

impl YosidaState {
    pub fn new(epsilon: f64, pot: &Potential, kp: &KernelPair) -> Result<Self, String> {
        let epsilon_star = epsilon_star(pot, kp);
        if !(epsilon > 0.0 && epsilon < epsilon_star) {
            return Err(format!("epsilon = {epsilon} must lie in (0, {epsilon_star:.6}) for this configuration"));
        }
        Ok(Self { epsilon, epsilon_star })
    }
}

const ROOT_ITERS: usize = 400;

/// Yosida value `b = β_ε(s)` together with the resolvent `R_ε(s) = β⁻¹(b)`.
///
/// The unknown is `b`, which solves `β⁻¹(b) + ε b = s`; this stays well
/// conditioned when the resolvent approaches the singular endpoints.
pub fn yosida_pair(pot: &Potential, epsilon: f64, s: f64) -> Result<(f64, f64), PotentialError> {
    let target = s.abs();
    let b = increasing_root(
        |b| (pot.beta_inverse(b) + epsilon * b - target, pot.beta_inverse_prime(b) + epsilon),
        0.0,
        target / epsilon,
        None,
        ROOT_ITERS,
    )
    .ok_or(PotentialError::RootSolve { target: s, iterations: ROOT_ITERS })?;
    let b = s.signum() * b;
    Ok((pot.beta_inverse(b), b))
}

/// Resolvent `R_ε(s)`: the unique solution of `R + ε β(R) = s`.
pub fn resolvent(pot: &Potential, epsilon: f64, s: f64) -> Result<f64, PotentialError> {
    Ok(yosida_pair(pot, epsilon, s)?.0)
}

/// `β_ε(s) = (s - R_ε(s)) / ε`, defined for every real `s`.
pub fn yosida_beta(pot: &Potential, ys: &YosidaState, s: f64) -> Result<f64, PotentialError> {
    Ok(yosida_pair(pot, ys.epsilon, s)?.1)
}

/// Moreau envelope `β̂_ε(s) = β̂(R_ε(s)) + (ε/2) β_ε(s)²`.
pub fn yosida_beta_hat(pot: &Potential, ys: &YosidaState, s: f64) -> Result<f64, PotentialError> {
    let (r, b) = yosida_pair(pot, ys.epsilon, s)?;
    Ok(pot.beta_hat(r)? + 0.5 * ys.epsilon * b * b)
}

/// Per-clause outcome of the structural assumptions on potential and kernels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub alpha: f64,
    pub gamma: f64,
    /// `a_* + α/(1+α)`
    pub bulk_threshold: f64,
    /// `a_⊛ + α/(1+α)`
    pub surf_threshold: f64,
    pub a3_bulk: bool,
    pub a3_surf: bool,
    /// Samples of `|ln δ| / β(1 - 2δ)`; bounded means the log-rate clause holds with exponent 1.
    pub a7_samples: Vec<(f64, f64)>,
    pub a7: bool,
    /// Fitted `C̃₀` with `1/β'(1 - 2δ) ≤ C̃₀ δ`.
    pub a8_constant: f64,
    pub a8: bool,
    pub a9: bool,
    /// `min{a_* + α - γ₁, a_⊛ + α - γ₂}`
    pub contraction_constant: f64,
}

impl AssumptionReport {
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.a3_bulk {
            out.push(format!(
                "A3: γ₁ = {} ≥ a_* + α/(1+α) = {:.6}",
                self.gamma, self.bulk_threshold
            ));
        }
        if !self.a3_surf {
            out.push(format!(
                "A3: γ₂ = {} ≥ a_⊛ + α/(1+α) = {:.6}",
                self.gamma, self.surf_threshold
            ));
        }
        if !self.a7 {
            out.push("A7: 1/β(1-2δ) does not decay like 1/|ln δ|".into());
        }
        if !self.a8 {
            out.push("A8: 1/β'(1-2δ) is not O(δ)".into());
        }
        if !self.a9 {
            out.push("A9: β' is not monotone near ±1".into());
        }
        out
    }

    pub fn passed(&self) -> bool {
        self.failures().is_empty()
    }
}

pub fn validate_assumptions(pot: &Potential, kp: &KernelPair) -> AssumptionReport {
    let alpha = pot.alpha();
    let gamma = pot.gamma();
    let c = &kp.constants;
    let margin = alpha / (1.0 + alpha);
    let bulk_threshold = c.a_lower + margin;
    let surf_threshold = c.a_surf_lower + margin;

    let deltas: Vec<f64> = (2..=12).map(|k| 10f64.powi(-k)).collect();
    let a7_samples: Vec<(f64, f64)> = deltas
        .iter()
        .map(|&d| {
            let b = pot.beta(1.0 - 2.0 * d).unwrap_or(f64::INFINITY);
            let b_neg = pot.beta(-1.0 + 2.0 * d).unwrap_or(f64::NEG_INFINITY);
            (d, d.ln().abs() / b.min(b_neg.abs()))
        })
        .collect();
    let a7 = {
        let (lo, hi) = a7_samples
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &(_, q)| (lo.min(q), hi.max(q)));
        lo.is_finite() && lo > 0.0 && hi / lo <= 1.5
    };

    let delta0 = 0.25;
    let a8_ratios: Vec<f64> = (0..=8)
        .map(|k| {
            let d = delta0 * 10f64.powi(-k);
            let up = pot.beta_prime(1.0 - 2.0 * d).unwrap_or(f64::INFINITY);
            let dn = pot.beta_prime(-1.0 + 2.0 * d).unwrap_or(f64::INFINITY);
            (1.0 / up).max(1.0 / dn) / d
        })
        .collect();
    let a8_max = a8_ratios.iter().cloned().fold(0.0, f64::max);
    let a8 = a8_max.is_finite() && a8_max <= 10.0 * a8_ratios[0];

    let delta1: f64 = 0.5;
    let a9 = (0..200).all(|k| {
        let s0 = 1.0 - delta1 * (1.0 - k as f64 / 200.0);
        let s1 = 1.0 - delta1 * (1.0 - (k + 1) as f64 / 200.0);
        let s1 = s1.min(1.0 - 1e-9);
        let up = pot.beta_prime(s0).and_then(|a| pot.beta_prime(s1).map(|b| b >= a));
        let dn = pot.beta_prime(-s0).and_then(|a| pot.beta_prime(-s1).map(|b| b >= a));
        matches!((up, dn), (Ok(true), Ok(true)))
    });

    AssumptionReport {
        alpha,
        gamma,
        bulk_threshold,
        surf_threshold,
        a3_bulk: gamma > 0.0 && gamma < bulk_threshold,
        a3_surf: gamma > 0.0 && gamma < surf_threshold,
        a7_samples,
        a7,
        a8_constant: a8_max.max(1.0),
        a8,
        a9,
        contraction_constant: (c.a_lower + alpha - gamma).min(c.a_surf_lower + alpha - gamma),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_disk_mesh;
    use crate::nonlocal::{build_kernel_pair, KernelSpec};

    fn log1() -> Potential {
        Potential::log(1.0, 1.2)
    }

    #[test]
    fn closed_form_values() {
        let p = log1();
        assert_eq!(p.beta(0.0).unwrap(), 0.0);
        assert!((p.beta(0.5).unwrap() - 0.5 * 3f64.ln()).abs() < 1e-15);
        assert!((p.beta(0.5).unwrap() - 0.5493061443340549).abs() < 1e-15);
        assert_eq!(p.beta_hat(0.0).unwrap(), 0.0);
        assert!((p.beta_hat(1.0).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!((p.beta_hat(-1.0).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(p.pi_hat(0.0), 0.0);
    }

    #[test]
    fn domain_errors_carry_argument() {
        let p = log1();
        assert_eq!(p.beta(1.0), Err(PotentialError::Domain(1.0)));
        assert_eq!(p.beta_prime(-1.5), Err(PotentialError::Domain(-1.5)));
        assert!(p.beta_hat(1.0000001).is_err());
    }

    #[test]
    fn beta_prime_matches_finite_differences() {
        let p = log1();
        for k in 0..20 {
            let s = -0.95 + 1.9 * k as f64 / 19.0;
            let h = 1e-6;
            let fd = (p.beta(s + h).unwrap() - p.beta(s - h).unwrap()) / (2.0 * h);
            let exact = p.beta_prime(s).unwrap();
            assert!((fd - exact).abs() <= 1e-6 * exact, "s = {s}");
            assert!(exact >= p.alpha());
        }
    }

    #[test]
    fn convexity_and_oddness() {
        let p = Potential::log(0.7, 1.0);
        let n = 2000;
        let grid: Vec<f64> = (0..=n).map(|k| -1.0 + 2.0 * k as f64 / n as f64).collect();
        for w in grid.windows(3) {
            let (a, b, c) = (
                p.beta_hat(w[0]).unwrap(),
                p.beta_hat(w[1]).unwrap(),
                p.beta_hat(w[2]).unwrap(),
            );
            assert!(a - 2.0 * b + c >= -1e-15);
            assert!(b >= 0.0);
        }
        for &s in &grid[1..n] {
            assert_eq!(p.beta(-s).unwrap(), -p.beta(s).unwrap());
        }
    }

    fn bisection_resolvent(eps: f64, theta: f64, s: f64) -> f64 {
        let (mut lo, mut hi) = (-1.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let f = mid + eps * theta * mid.atanh() - s;
            if f < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn yosida_matches_bisection_oracle() {
        let p = log1();
        let ys = YosidaState { epsilon: 0.1, epsilon_star: 1.0 };
        let r = bisection_resolvent(0.1, 1.0, 0.9);
        let expect = (0.9 - r) / 0.1;
        let got = yosida_beta(&p, &ys, 0.9).unwrap();
        assert!((got - expect).abs() <= 1e-12, "{got} vs {expect}");
        assert_eq!(yosida_beta(&p, &ys, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn yosida_converges_monotonically() {
        let p = log1();
        let exact = p.beta(0.5).unwrap();
        let errs: Vec<f64> = [0.1, 0.05, 0.025]
            .iter()
            .map(|&e| {
                let ys = YosidaState { epsilon: e, epsilon_star: 1.0 };
                (yosida_beta(&p, &ys, 0.5).unwrap() - exact).abs()
            })
            .collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2]);
    }

    #[test]
    fn yosida_defined_everywhere_and_bounded_by_beta() {
        let p = log1();
        let ys = YosidaState { epsilon: 0.05, epsilon_star: 1.0 };
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=400 {
            let s = -3.0 + 6.0 * k as f64 / 400.0;
            let r = resolvent(&p, ys.epsilon, s).unwrap();
            assert!(r.abs() <= 1.0);
            let b = yosida_beta(&p, &ys, s).unwrap();
            assert!(b >= prev);
            prev = b;
            assert_eq!(yosida_beta(&p, &ys, -s).unwrap(), -b);
            if s.abs() < 1.0 {
                assert!(b.abs() <= p.beta(s).unwrap().abs() + 1e-12);
                let h = yosida_beta_hat(&p, &ys, s).unwrap();
                assert!(h >= 0.0 && h <= p.beta_hat(s).unwrap() + 1e-14);
            }
        }
    }

    #[test]
    fn a3_arithmetic_and_failure() {
        let mesh = build_disk_mesh(1);
        let kp = build_kernel_pair(
            KernelSpec::gaussian(0.25, 2.0),
            KernelSpec::gaussian(0.25, 1.0),
            &mesh,
        );
        assert!(kp.constants.a_lower >= 0.8);
        let r = validate_assumptions(&log1(), &kp);
        assert!((r.bulk_threshold - (kp.constants.a_lower + 0.5)).abs() < 1e-15);
        assert!(r.a3_bulk && r.a3_surf && r.a7 && r.a8 && r.a9, "{r:?}");
        assert!(r.a8_constant <= 4.0 + 1e-12);
        assert!(r.contraction_constant > 0.0);

        let hot = validate_assumptions(&Potential::log(1.0, 10.0), &kp);
        assert!(!hot.a3_bulk);
        assert!(hot.failures()[0].starts_with("A3"));

        let q = validate_assumptions(&Potential::Quartic, &kp);
        assert!(!q.a7 && !q.a8);
    }

    #[test]
    fn a7_closed_form_sample() {
        let p = log1();
        let d: f64 = 1e-3;
        let v = 1.0 / p.beta(1.0 - 2.0 * d).unwrap();
        let closed = 2.0 / ((2.0 - 2.0 * d) / (2.0 * d)).ln();
        assert!((v - closed).abs() < 1e-12);
        assert!((v - 0.2895).abs() < 5e-4);
    }
}
