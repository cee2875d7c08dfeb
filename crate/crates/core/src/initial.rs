//! Initial phase fields.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::fields;
use crate::mesh::DiskMesh;
use crate::spaces::{generalized_mean, BulkSurfaceField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    /// `mean` plus seeded smoothed noise whose generalized mean is exactly removed.
    Random { mean: f64, amplitude: f64 },
    /// A few random plane waves of bounded frequency, scaled to sup-norm
    /// `amplitude` about `mean`; the surface part is the trace.
    SmoothRandom { mean: f64, amplitude: f64 },
    /// Disk-shaped inclusion: `amplitude·tanh((r - radius)/width)` shifted by `offset`.
    RadialTanh { radius: f64, width: f64, amplitude: f64, offset: f64 },
    /// Two circular droplets of the `+` phase centred at `(±separation/2, 0)`.
    TwoBubble { radius: f64, width: f64, separation: f64, amplitude: f64 },
    Constant { value: f64 },
}

impl Default for InitialCondition {
    fn default() -> Self {
        Self::Random { mean: 0.0, amplitude: 0.4 }
    }
}

impl InitialCondition {
    /// Nodal field, clipped to `[-1 + margin, 1 - margin]`.
    pub fn build(&self, mesh: &DiskMesh, margin: f64, seed: u64) -> BulkSurfaceField {
        let field = match *self {
            Self::Random { mean, amplitude } => {
                let mut rng = fields::rng(seed);
                let noise = BulkSurfaceField::new(
                    fields::smoothed_uniform_bulk(mesh, &mut rng),
                    fields::smoothed_uniform_surf(mesh, &mut rng),
                );
                let m = generalized_mean(&noise, mesh);
                noise.map(|v| mean + amplitude * (v - m))
            }
            Self::SmoothRandom { mean, amplitude } => {
                let mut rng = fields::rng(seed);
                let f = BulkSurfaceField::from_bulk(mesh, fields::smooth_random_bulk(mesh, &mut rng));
                let p = crate::spaces::project(&f, mesh);
                let scale = p.linf();
                p.map(|v| mean + amplitude * v / scale)
            }
            Self::RadialTanh { radius, width, amplitude, offset } => {
                let f = |r: f64| offset + amplitude * ((r - radius) / width).tanh();
                BulkSurfaceField::new(
                    mesh.interpolate_bulk(|x, y| f(x.hypot(y))),
                    DVector::from_element(mesh.n_surf(), f(1.0)),
                )
            }
            Self::TwoBubble { radius, width, separation, amplitude } => {
                let f = |x: f64, y: f64| {
                    let d1 = (x - 0.5 * separation).hypot(y);
                    let d2 = (x + 0.5 * separation).hypot(y);
                    amplitude * ((radius - d1.min(d2)) / width).tanh()
                };
                BulkSurfaceField::new(
                    mesh.interpolate_bulk(f),
                    mesh.interpolate_surf(|t| f(t.cos(), t.sin())),
                )
            }
            Self::Constant { value } => BulkSurfaceField::constant(mesh, value),
        };
        let lim = 1.0 - margin;
        field.map(|v| v.clamp(-lim, lim))
    }

    /// Short human-readable description.
    pub fn describe(&self) -> String {
        match self {
            Self::Random { mean, amplitude } => format!("random(mean={mean}, amplitude={amplitude})"),
            Self::SmoothRandom { mean, amplitude } => format!("smooth_random(mean={mean}, amplitude={amplitude})"),
            Self::RadialTanh { radius, width, .. } => format!("radial_tanh(radius={radius}, width={width})"),
            Self::TwoBubble { radius, separation, .. } => {
                format!("two_bubble(radius={radius}, separation={separation})")
            }
            Self::Constant { value } => format!("constant({value})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_disk_mesh;

    #[test]
    fn random_has_exact_mean_and_is_seeded() {
        let mesh = build_disk_mesh(1);
        let ic = InitialCondition::Random { mean: 0.2, amplitude: 0.3 };
        let a = ic.build(&mesh, 1e-3, 1);
        let b = ic.build(&mesh, 1e-3, 2);
        assert!((generalized_mean(&a, &mesh) - 0.2).abs() < 1e-15);
        assert!((generalized_mean(&b, &mesh) - 0.2).abs() < 1e-15);
        assert_ne!(a, b);
        assert_eq!(a, ic.build(&mesh, 1e-3, 1));
    }

    #[test]
    fn clipping_respects_margin() {
        let mesh = build_disk_mesh(0);
        let f = InitialCondition::Constant { value: 2.0 }.build(&mesh, 0.01, 0);
        assert!((f.linf() - 0.99).abs() < 1e-15);
        let t = InitialCondition::TwoBubble { radius: 0.3, width: 0.05, separation: 0.8, amplitude: 1.0 }
            .build(&mesh, 1e-6, 0);
        assert!(t.linf() <= 1.0 - 1e-6);
    }
}
