//! Convolution kernels `J` (bulk) and `K` (surface) and their Nyström
//! discretization on the lumped quadrature of a [`DiskMesh`].

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::fields;
use crate::mesh::DiskMesh;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    #[default]
    Gaussian,
}

/// Even, nonnegative kernel on ℝ² with total integral `mass`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    #[serde(default)]
    pub family: KernelFamily,
    pub sigma: f64,
    pub mass: f64,
}

impl KernelSpec {
    pub fn gaussian(sigma: f64, mass: f64) -> Self {
        Self { family: KernelFamily::Gaussian, sigma, mass }
    }

    pub fn is_valid(&self) -> bool {
        self.sigma.is_finite() && self.sigma > 0.0 && self.mass.is_finite() && self.mass > 0.0
    }

    /// Kernel value at squared distance `r2`.
    pub fn value(&self, r2: f64) -> f64 {
        match self.family {
            KernelFamily::Gaussian => {
                let s2 = self.sigma * self.sigma;
                self.mass / (2.0 * PI * s2) * (-0.5 * r2 / s2).exp()
            }
        }
    }

    /// Gradient of the kernel at displacement `d`.
    pub fn gradient(&self, d: [f64; 2]) -> [f64; 2] {
        match self.family {
            KernelFamily::Gaussian => {
                let s2 = self.sigma * self.sigma;
                let v = self.value(d[0] * d[0] + d[1] * d[1]);
                [-d[0] / s2 * v, -d[1] / s2 * v]
            }
        }
    }

    /// Radial profile of `|∇J|` as a function of `r`.
    fn gradient_magnitude(&self, r: f64) -> f64 {
        match self.family {
            KernelFamily::Gaussian => r / (self.sigma * self.sigma) * self.value(r * r),
        }
    }

    fn radial_integral(&self, f: impl Fn(f64) -> f64) -> f64 {
        // composite Simpson on [0, 14σ]; the Gaussian tail beyond is below 1e-40
        let n = 4000;
        let r_max = 14.0 * self.sigma;
        let dr = r_max / n as f64;
        let g = |r: f64| f(r) * 2.0 * PI * r;
        let mut acc = g(0.0) + g(r_max);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * g(i as f64 * dr);
        }
        acc * dr / 3.0
    }

    /// `‖J‖_{L¹(ℝ²)}` by radial quadrature.
    pub fn l1_norm(&self) -> f64 {
        self.radial_integral(|r| self.value(r * r))
    }

    /// `‖J‖_{L¹(ℝ²)} + ‖∇J‖_{L¹(ℝ²)}` by radial quadrature.
    pub fn w11_norm(&self) -> f64 {
        self.l1_norm() + self.radial_integral(|r| self.gradient_magnitude(r))
    }
}

/// The kernel constants of the nonlocal operators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelConstants {
    /// `a_* = min a_Ω`
    pub a_lower: f64,
    /// `a^* = max a_Ω`
    pub a_upper: f64,
    /// `a_⊛ = min a_Γ`
    pub a_surf_lower: f64,
    /// `a^⊛ = max a_Γ`
    pub a_surf_upper: f64,
    /// `b^* = max_x ∫_Ω |∇J(x - y)| dy`
    pub b_upper: f64,
    /// `b^⊛ = max_x ∫_Γ |∇_Γ K(x - y)| dS_y`
    pub b_surf_upper: f64,
}

#[derive(Debug, Clone)]
pub struct KernelPair {
    pub j_spec: KernelSpec,
    pub k_spec: KernelSpec,
    /// `(J∗φ)_i = Σ_j w_j J(x_i - x_j) φ_j`
    pub conv_bulk: DMatrix<f64>,
    /// `(K⊛ψ)_i = Σ_j s_j K(y_i - y_j) ψ_j` with chordal distances.
    pub conv_surf: DMatrix<f64>,
    pub a_omega: DVector<f64>,
    pub a_gamma: DVector<f64>,
    pub constants: KernelConstants,
    /// Numerical `‖J‖_{W^{1,1}(ℝ²)}`.
    pub j_w11: f64,
}

fn sq_dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

fn min_max(v: &DVector<f64>) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

pub fn build_kernel_pair(j_spec: KernelSpec, k_spec: KernelSpec, mesh: &DiskMesh) -> KernelPair {
    let n = mesh.n_bulk();
    let nb = mesh.n_surf();
    let w = &mesh.lumped_bulk;
    let s = &mesh.lumped_surf;

    let conv_bulk = DMatrix::from_fn(n, n, |i, j| {
        j_spec.value(sq_dist(mesh.nodes[i], mesh.nodes[j])) * w[j]
    });
    let surf_node = |j: usize| mesh.nodes[mesh.boundary_loop[j]];
    let conv_surf =
        DMatrix::from_fn(nb, nb, |i, j| k_spec.value(sq_dist(surf_node(i), surf_node(j))) * s[j]);

    let a_omega = &conv_bulk * DVector::from_element(n, 1.0);
    let a_gamma = &conv_surf * DVector::from_element(nb, 1.0);

    let b_upper = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let x = mesh.nodes[i];
                    let y = mesh.nodes[j];
                    let g = j_spec.gradient([x[0] - y[0], x[1] - y[1]]);
                    w[j] * g[0].hypot(g[1])
                })
                .sum::<f64>()
        })
        .fold(0.0, f64::max);
    let b_surf_upper = (0..nb)
        .map(|i| {
            let x = surf_node(i);
            let angle = mesh.boundary_angles[i];
            let tangent = [-angle.sin(), angle.cos()];
            (0..nb)
                .map(|j| {
                    let y = surf_node(j);
                    let g = k_spec.gradient([x[0] - y[0], x[1] - y[1]]);
                    s[j] * (tangent[0] * g[0] + tangent[1] * g[1]).abs()
                })
                .sum::<f64>()
        })
        .fold(0.0, f64::max);

    let (a_lower, a_upper) = min_max(&a_omega);
    let (a_surf_lower, a_surf_upper) = min_max(&a_gamma);

    KernelPair {
        j_spec,
        k_spec,
        conv_bulk,
        conv_surf,
        a_omega,
        a_gamma,
        constants: KernelConstants {
            a_lower,
            a_upper,
            a_surf_lower,
            a_surf_upper,
            b_upper,
            b_surf_upper,
        },
        j_w11: j_spec.w11_norm(),
    }
}

impl KernelPair {
    pub fn convolve_bulk(&self, phi: &DVector<f64>) -> DVector<f64> {
        &self.conv_bulk * phi
    }

    pub fn convolve_surf(&self, psi: &DVector<f64>) -> DVector<f64> {
        &self.conv_surf * psi
    }
}

/// Outcome of the positivity check on the kernel constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct A1Report {
    pub constants: KernelConstants,
    pub bulk_positive: bool,
    pub surf_positive: bool,
}

impl A1Report {
    pub fn passed(&self) -> bool {
        self.bulk_positive && self.surf_positive
    }
}

const POSITIVITY_TOL: f64 = 1e-14;

pub fn validate_a1(kp: &KernelPair) -> A1Report {
    let c = kp.constants;
    A1Report {
        constants: c,
        bulk_positive: c.a_lower > POSITIVITY_TOL && c.a_upper.is_finite(),
        surf_positive: c.a_surf_lower > POSITIVITY_TOL && c.a_surf_upper.is_finite(),
    }
}

/// Exponent for the trace inequality check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LpExponent {
    Finite(f64),
    Infinity,
}

impl LpExponent {
    pub const ALL: [LpExponent; 4] = [
        LpExponent::Finite(1.0),
        LpExponent::Finite(2.0),
        LpExponent::Finite(4.0),
        LpExponent::Infinity,
    ];
}

impl std::fmt::Display for LpExponent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LpExponent::Finite(p) => write!(f, "{p}"),
            LpExponent::Infinity => f.write_str("inf"),
        }
    }
}

/// Weighted discrete `L^p` norm `(Σ w_i |v_i|^p)^{1/p}`.
pub fn lp_norm(v: &DVector<f64>, weights: &DVector<f64>, p: LpExponent) -> f64 {
    match p {
        LpExponent::Infinity => v.amax(),
        LpExponent::Finite(p) => v
            .iter()
            .zip(weights.iter())
            .map(|(x, w)| w * x.abs().powf(p))
            .sum::<f64>()
            .powf(1.0 / p),
    }
}

/// `‖J∗φ‖_{L^p(Γ)} / (‖J‖_{W^{1,1}} ‖φ‖_{L^p(Ω)})`, or `None` for `φ = 0`.
pub fn young_trace_ratio(
    kp: &KernelPair,
    mesh: &DiskMesh,
    phi: &DVector<f64>,
    p: LpExponent,
) -> Option<f64> {
    let denom = lp_norm(phi, &mesh.lumped_bulk, p);
    if denom == 0.0 {
        return None;
    }
    let on_boundary = mesh.trace(&kp.convolve_bulk(phi));
    Some(lp_norm(&on_boundary, &mesh.lumped_surf, p) / (kp.j_w11 * denom))
}

/// Largest trace ratio over `trials` seeded smooth random bulk fields.
pub fn young_trace_check(
    kp: &KernelPair,
    mesh: &DiskMesh,
    p: LpExponent,
    trials: usize,
    seed: u64,
) -> f64 {
    let mut rng = fields::rng(seed);
    (0..trials)
        .filter_map(|_| {
            let phi = fields::smooth_random_bulk(mesh, &mut rng);
            young_trace_ratio(kp, mesh, &phi, p)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_disk_mesh;

    fn pair(level: usize) -> (DiskMesh, KernelPair) {
        let mesh = build_disk_mesh(level);
        let kp = build_kernel_pair(
            KernelSpec::gaussian(0.2, 1.0),
            KernelSpec::gaussian(0.25, 1.0),
            &mesh,
        );
        (mesh, kp)
    }

    #[test]
    fn ones_convolve_to_a_omega_exactly() {
        let (mesh, kp) = pair(1);
        let ones = DVector::from_element(mesh.n_bulk(), 1.0);
        assert_eq!(kp.convolve_bulk(&ones), kp.a_omega);
        let ones = DVector::from_element(mesh.n_surf(), 1.0);
        assert_eq!(kp.convolve_surf(&ones), kp.a_gamma);
    }

    #[test]
    fn single_node_field_gives_single_term() {
        let (mesh, kp) = pair(1);
        let j = 7;
        let mut phi = DVector::zeros(mesh.n_bulk());
        phi[j] = 1.0;
        let out = kp.convolve_bulk(&phi);
        for i in 0..mesh.n_bulk() {
            let expect =
                mesh.lumped_bulk[j] * kp.j_spec.value(sq_dist(mesh.nodes[i], mesh.nodes[j]));
            assert_eq!(out[i], expect);
        }
    }

    #[test]
    fn weighted_symmetry() {
        let (mesh, kp) = pair(1);
        let mut rng = fields::rng(3);
        let u = fields::uniform_bulk(&mesh, &mut rng);
        let v = fields::uniform_bulk(&mesh, &mut rng);
        let w = &mesh.lumped_bulk;
        let lhs = kp.convolve_bulk(&u).component_mul(w).dot(&v);
        let rhs = kp.convolve_bulk(&v).component_mul(w).dot(&u);
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));

        let us = fields::uniform_surf(&mesh, &mut rng);
        let vs = fields::uniform_surf(&mesh, &mut rng);
        let s = &mesh.lumped_surf;
        let lhs = kp.convolve_surf(&us).component_mul(s).dot(&vs);
        let rhs = kp.convolve_surf(&vs).component_mul(s).dot(&us);
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn nonnegative_fields_convolve_to_nonnegative() {
        let (mesh, kp) = pair(1);
        let mut rng = fields::rng(5);
        let u = fields::uniform_bulk(&mesh, &mut rng).map(f64::abs);
        assert!(kp.convolve_bulk(&u).iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn gaussian_norms_match_closed_form() {
        let spec = KernelSpec::gaussian(0.3, 2.0);
        assert!((spec.l1_norm() - 2.0).abs() < 1e-10);
        let exact = 2.0 * (1.0 + (PI / 2.0).sqrt() / 0.3);
        assert!((spec.w11_norm() - exact).abs() < 1e-9 * exact);
    }

    #[test]
    fn a1_passes_for_gaussians_and_scales_linearly() {
        let mesh = build_disk_mesh(1);
        let kp1 = build_kernel_pair(
            KernelSpec::gaussian(0.2, 1.0),
            KernelSpec::gaussian(0.25, 1.0),
            &mesh,
        );
        let kp2 = build_kernel_pair(
            KernelSpec::gaussian(0.2, 2.0),
            KernelSpec::gaussian(0.25, 2.0),
            &mesh,
        );
        let r = validate_a1(&kp1);
        assert!(r.passed());
        let c1 = kp1.constants;
        let c2 = kp2.constants;
        assert!(c1.a_lower <= c1.a_upper && c1.a_surf_lower <= c1.a_surf_upper);
        for (x, y) in [
            (c1.a_lower, c2.a_lower),
            (c1.a_upper, c2.a_upper),
            (c1.a_surf_lower, c2.a_surf_lower),
            (c1.a_surf_upper, c2.a_surf_upper),
        ] {
            assert!((y - 2.0 * x).abs() <= 1e-12 * y);
        }
        assert!(c2.a_lower >= c1.a_lower);
    }

    #[test]
    fn zero_field_is_skipped() {
        let (mesh, kp) = pair(0);
        let zero = DVector::zeros(mesh.n_bulk());
        assert_eq!(young_trace_ratio(&kp, &mesh, &zero, LpExponent::Finite(2.0)), None);
    }

    #[test]
    fn constant_field_sup_ratio_at_most_one() {
        let (mesh, kp) = pair(1);
        let ones = DVector::from_element(mesh.n_bulk(), 1.0);
        let r = young_trace_ratio(&kp, &mesh, &ones, LpExponent::Infinity).unwrap();
        let direct = mesh.trace(&kp.a_omega).amax() / kp.j_w11;
        assert_eq!(r, direct);
        assert!(r <= 1.0);
    }
}
