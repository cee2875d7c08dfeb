//! Nonlocal Cahn–Hilliard dynamics on the unit disk with nonlocal dynamic
//! boundary conditions and a singular logarithmic potential.

pub mod diagnostics;
pub mod error;
pub mod evolve;
pub mod fields;
pub mod harness;
pub mod initial;
pub mod mesh;
pub mod nonlocal;
pub mod potentials;
pub mod scalar;
pub mod spaces;
pub mod stationary;

pub use diagnostics::Diagnostics;
pub use error::{DimensionError, EvolveError, PotentialError, SpacesError, StationaryError};
pub use evolve::{Model, SchemeConfig, SchemeMode, StepState, Trajectory};
pub use initial::InitialCondition;
pub use mesh::{build_disk_mesh, DiskMesh};
pub use nonlocal::{build_kernel_pair, KernelPair, KernelSpec};
pub use potentials::Potential;
pub use spaces::{BulkSurfaceField, CouplingParam, EllipticSolver};
