//! Seeded random nodal fields.

use std::f64::consts::PI;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mesh::DiskMesh;

pub type FieldRng = ChaCha8Rng;

pub fn rng(seed: u64) -> FieldRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Nodewise independent samples of `U(-1, 1)` on bulk nodes.
pub fn uniform_bulk(mesh: &DiskMesh, rng: &mut FieldRng) -> DVector<f64> {
    DVector::from_fn(mesh.n_bulk(), |_, _| rng.random_range(-1.0..1.0))
}

/// Nodewise independent samples of `U(-1, 1)` on surface nodes.
pub fn uniform_surf(mesh: &DiskMesh, rng: &mut FieldRng) -> DVector<f64> {
    DVector::from_fn(mesh.n_surf(), |_, _| rng.random_range(-1.0..1.0))
}

/// Uniform noise averaged by one application of the row-normalized mass matrix.
pub fn smoothed_uniform_bulk(mesh: &DiskMesh, rng: &mut FieldRng) -> DVector<f64> {
    let u = uniform_bulk(mesh, rng);
    (&mesh.bulk_mass * u).component_div(&mesh.lumped_bulk)
}

pub fn smoothed_uniform_surf(mesh: &DiskMesh, rng: &mut FieldRng) -> DVector<f64> {
    let u = uniform_surf(mesh, rng);
    (&mesh.surf_mass * u).component_div(&mesh.lumped_surf)
}

const SMOOTH_MODES: usize = 6;
const MAX_FREQUENCY: f64 = 4.0;

/// A random smooth function of position, independent of the mesh that
/// samples it: a constant plus a few plane waves of bounded frequency.
pub fn smooth_random_bulk(mesh: &DiskMesh, rng: &mut FieldRng) -> DVector<f64> {
    let offset: f64 = rng.random_range(-1.0..1.0);
    let waves: Vec<(f64, [f64; 2], f64)> = (0..SMOOTH_MODES)
        .map(|_| {
            let amp = rng.random_range(-1.0..1.0);
            let r = MAX_FREQUENCY * rng.random::<f64>().sqrt();
            let dir = rng.random_range(0.0..2.0 * PI);
            let phase = rng.random_range(0.0..2.0 * PI);
            (amp, [r * dir.cos(), r * dir.sin()], phase)
        })
        .collect();
    mesh.interpolate_bulk(|x, y| {
        offset
            + waves
                .iter()
                .map(|(a, k, b)| a * (k[0] * x + k[1] * y + b).cos())
                .sum::<f64>()
    })
}

/// A random trigonometric polynomial in the boundary angle.
pub fn smooth_random_surf(mesh: &DiskMesh, rng: &mut FieldRng) -> DVector<f64> {
    let offset: f64 = rng.random_range(-1.0..1.0);
    let modes: Vec<(f64, f64)> = (1..=SMOOTH_MODES)
        .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    mesh.interpolate_surf(|t| {
        offset
            + modes
                .iter()
                .enumerate()
                .map(|(k, (a, b))| {
                    let k = (k + 1) as f64;
                    (a * (k * t).cos() + b * (k * t).sin()) / k
                })
                .sum::<f64>()
    })
}
