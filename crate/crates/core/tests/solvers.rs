use std::f64::consts::PI;
use std::sync::Arc;

use nlch_core::harness::experiments::{manufactured_error, manufactured_orders};
use nlch_core::mesh::{h1_seminorm_bulk, h1_seminorm_surf};
use nlch_core::nonlocal::KernelSpec;
use nlch_core::spaces::{generalized_mean, project};
use nlch_core::stationary::{check_gradient_regularity, solve_steady};
use nlch_core::{build_disk_mesh, build_kernel_pair, BulkSurfaceField, CouplingParam, EllipticSolver, InitialCondition, Model, Potential};

#[test]
fn manufactured_solution_is_second_order() {
    for l in [0.0, 0.1, 1.0] {
        let (errs, orders) = manufactured_orders(l).unwrap();
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "L = {l}: {errs:?}");
        for o in orders {
            assert!((1.8..=2.2).contains(&o), "L = {l}: order {o}");
        }
    }
}

#[test]
fn manufactured_error_grows_with_boundary_resistance() {
    // larger L puts more of the solution on the surface, same mesh
    let e0 = manufactured_error(2, 0.0).unwrap();
    let e1 = manufactured_error(2, 1.0).unwrap();
    assert!(e0 < e1);
}

#[test]
fn mesh_measures_and_seminorms_converge() {
    let mut prev = f64::INFINITY;
    for level in 0..4 {
        let mesh = build_disk_mesh(level);
        let area_err = (mesh.bulk_measure() - PI).abs();
        assert!(area_err < prev);
        prev = area_err;
        // polygon perimeter 2n sin(π/n)
        let n = mesh.n_surf() as f64;
        assert!((mesh.surf_measure() - 2.0 * n * (PI / n).sin()).abs() < 1e-12);
        // ∫|∇x|² = |Ω| exactly for a linear field
        let x = mesh.interpolate_bulk(|x, _| x);
        assert!((h1_seminorm_bulk(&x, &mesh).unwrap().powi(2) - mesh.bulk_measure()).abs() < 1e-12);
    }
    // ∫_Γ |∂_θ cos θ|² = π, approached at second order
    let errs: Vec<f64> = (1..4)
        .map(|level| {
            let mesh = build_disk_mesh(level);
            let c = mesh.interpolate_surf(|t| t.cos());
            (h1_seminorm_surf(&c, &mesh).unwrap().powi(2) - PI).abs()
        })
        .collect();
    for w in errs.windows(2) {
        assert!((w[0] / w[1]).log2() > 1.8, "{errs:?}");
    }
}

#[test]
fn dual_norm_is_a_norm_and_matches_the_energy_pairing() {
    let mesh = build_disk_mesh(1);
    for l in [0.0, 0.5] {
        let coupling = CouplingParam::new(l).unwrap();
        let solver = EllipticSolver::new(&mesh, coupling).unwrap();
        let mut y = BulkSurfaceField::new(mesh.interpolate_bulk(|x, y| x * y + x), mesh.interpolate_surf(|t| (2.0 * t).sin()));
        if coupling.identifies_trace() {
            y = BulkSurfaceField::from_bulk(&mesh, y.bulk);
        }
        let y = project(&y, &mesh);
        let u = solver.solve(&y, &mesh).unwrap();
        let n = solver.dual_norm(&y, &mesh).unwrap();
        // ‖y‖²_* = (y, 𝔖y)
        assert!((n * n - y.inner(&u, &mesh)).abs() < 1e-12 * n * n);
        assert!((solver.dual_norm(&(&y * -3.0), &mesh).unwrap() - 3.0 * n).abs() < 1e-12);
        assert!(generalized_mean(&u, &mesh).abs() < 1e-13);
        // constants are measured by their mean
        let c = BulkSurfaceField::constant(&mesh, 0.25);
        assert!((solver.dual_norm(&c, &mesh).unwrap() - 0.25).abs() < 1e-14);
    }
}

fn radial_steady(level: usize) -> f64 {
    let mesh = Arc::new(build_disk_mesh(level));
    let kp = Arc::new(build_kernel_pair(KernelSpec::gaussian(0.25, 2.0), KernelSpec::gaussian(0.25, 1.0), &mesh));
    let model = Model::new(mesh.clone(), kp, Potential::log(0.5, 1.0), CouplingParam::new(1.0).unwrap());
    let guess = InitialCondition::RadialTanh { radius: 0.55, width: 0.15, amplitude: -0.9, offset: 0.0 }.build(&mesh, 1e-3, 0);
    let m = generalized_mean(&guess, &mesh);
    let ss = solve_steady(m, &guess, &model).unwrap();
    assert!(ss.residual <= 1e-10);
    let g = check_gradient_regularity(&ss, &model).unwrap();
    assert!(g.min_denominator > 0.0);
    g.l2_discrepancy
}

#[test]
fn steady_gradient_formula_is_approached_under_refinement() {
    let coarse = radial_steady(1);
    let fine = radial_steady(2);
    assert!(fine < coarse, "{coarse} -> {fine}");
}
