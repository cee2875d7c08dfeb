//! Bulk–surface product spaces, the coupling form `a_L`, and the solution
//! operator of the Robin-coupled elliptic problem under a mean constraint.
//!
//! Chemical-potential-like unknowns live in a *reduced* coordinate space:
//! for `L > 0` it is bulk ⊕ surface, for `L = 0` the surface value on each
//! boundary node is identified with the bulk value there, so only bulk
//! coordinates remain. [`CoupledSystem`] maps between the two pictures.

use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector, Dyn, LU};

use crate::error::{DimensionError, SpacesError};
use crate::fields;
use crate::mesh::DiskMesh;

const TRACE_TOL: f64 = 1e-12;

/// Kinetic coefficient `L ∈ [0, ∞)` together with `χ(L)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingParam {
    l: f64,
}

impl CouplingParam {
    pub fn new(l: f64) -> Result<Self, SpacesError> {
        if l.is_finite() && l >= 0.0 {
            Ok(Self { l })
        } else {
            Err(SpacesError::InvalidCoupling(l))
        }
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn chi(&self) -> f64 {
        if self.l > 0.0 {
            1.0 / self.l
        } else {
            0.0
        }
    }

    /// `L = 0`: bulk traces and surface values are one unknown.
    pub fn identifies_trace(&self) -> bool {
        self.l == 0.0
    }
}

/// A pair (bulk nodal vector, surface nodal vector).
#[derive(Debug, Clone, PartialEq)]
pub struct BulkSurfaceField {
    pub bulk: DVector<f64>,
    pub surf: DVector<f64>,
}

impl BulkSurfaceField {
    pub fn new(bulk: DVector<f64>, surf: DVector<f64>) -> Self {
        Self { bulk, surf }
    }

    pub fn zeros(mesh: &DiskMesh) -> Self {
        Self::constant(mesh, 0.0)
    }

    pub fn constant(mesh: &DiskMesh, c: f64) -> Self {
        Self {
            bulk: DVector::from_element(mesh.n_bulk(), c),
            surf: DVector::from_element(mesh.n_surf(), c),
        }
    }

    /// Bulk field with its own trace as surface component.
    pub fn from_bulk(mesh: &DiskMesh, bulk: DVector<f64>) -> Self {
        let surf = mesh.trace(&bulk);
        Self { bulk, surf }
    }

    pub fn check_dims(&self, mesh: &DiskMesh) -> Result<(), DimensionError> {
        if self.bulk.len() != mesh.n_bulk() {
            return Err(DimensionError { expected: mesh.n_bulk(), got: self.bulk.len() });
        }
        if self.surf.len() != mesh.n_surf() {
            return Err(DimensionError { expected: mesh.n_surf(), got: self.surf.len() });
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { bulk: self.bulk.map(&f), surf: self.surf.map(&f) }
    }

    pub fn linf(&self) -> f64 {
        self.bulk.amax().max(self.surf.amax())
    }

    /// `max |trace(bulk) - surf|`.
    pub fn trace_defect(&self, mesh: &DiskMesh) -> f64 {
        (mesh.trace(&self.bulk) - &self.surf).amax()
    }

    /// Lumped-quadrature inner product `Σ w_i u_i v_i + Σ s_j u_j v_j`.
    pub fn inner(&self, other: &Self, mesh: &DiskMesh) -> f64 {
        self.bulk.component_mul(&mesh.lumped_bulk).dot(&other.bulk)
            + self.surf.component_mul(&mesh.lumped_surf).dot(&other.surf)
    }

    pub fn l2_norm(&self, mesh: &DiskMesh) -> f64 {
        self.inner(self, mesh).max(0.0).sqrt()
    }

    /// Weighted mass-matrix application `(W u, S u_Γ)`.
    pub fn weighted(&self, mesh: &DiskMesh) -> Self {
        Self {
            bulk: self.bulk.component_mul(&mesh.lumped_bulk),
            surf: self.surf.component_mul(&mesh.lumped_surf),
        }
    }
}

impl Add for &BulkSurfaceField {
    type Output = BulkSurfaceField;
    fn add(self, rhs: Self) -> BulkSurfaceField {
        BulkSurfaceField { bulk: &self.bulk + &rhs.bulk, surf: &self.surf + &rhs.surf }
    }
}

impl Sub for &BulkSurfaceField {
    type Output = BulkSurfaceField;
    fn sub(self, rhs: Self) -> BulkSurfaceField {
        BulkSurfaceField { bulk: &self.bulk - &rhs.bulk, surf: &self.surf - &rhs.surf }
    }
}

impl Mul<f64> for &BulkSurfaceField {
    type Output = BulkSurfaceField;
    fn mul(self, rhs: f64) -> BulkSurfaceField {
        BulkSurfaceField { bulk: &self.bulk * rhs, surf: &self.surf * rhs }
    }
}

/// `(Σ w_i f_i + Σ s_j f_j) / (Σ w + Σ s)`.
pub fn generalized_mean(f: &BulkSurfaceField, mesh: &DiskMesh) -> f64 {
    (f.bulk.dot(&mesh.lumped_bulk) + f.surf.dot(&mesh.lumped_surf))
        / (mesh.bulk_measure() + mesh.surf_measure())
}

/// Subtracts the generalized mean from both components.
pub fn project(f: &BulkSurfaceField, mesh: &DiskMesh) -> BulkSurfaceField {
    let m = generalized_mean(f, mesh);
    f.map(|v| v - m)
}

fn require_trace(u: &BulkSurfaceField, mesh: &DiskMesh) -> Result<(), SpacesError> {
    let defect = u.trace_defect(mesh);
    if defect > TRACE_TOL * u.linf().max(1.0) {
        Err(SpacesError::TraceConstraint(defect))
    } else {
        Ok(())
    }
}

/// The coupling form `a_L(u, v)`.
pub fn al_form(
    u: &BulkSurfaceField,
    v: &BulkSurfaceField,
    coupling: &CouplingParam,
    mesh: &DiskMesh,
) -> Result<f64, SpacesError> {
    u.check_dims(mesh)?;
    v.check_dims(mesh)?;
    if coupling.identifies_trace() {
        require_trace(u, mesh)?;
        require_trace(v, mesh)?;
    }
    let mut val = u.bulk.dot(&(&mesh.bulk_stiffness * &v.bulk))
        + u.surf.dot(&(&mesh.surf_stiffness * &v.surf));
    let chi = coupling.chi();
    if chi > 0.0 {
        let ju = mesh.trace(&u.bulk) - &u.surf;
        let jv = mesh.trace(&v.bulk) - &v.surf;
        val += chi * ju.component_mul(&mesh.lumped_surf).dot(&jv);
    }
    Ok(val)
}

/// `a_L` and the lumped mass, assembled in reduced coordinates.
#[derive(Debug, Clone)]
pub struct CoupledSystem {
    pub coupling: CouplingParam,
    pub n_bulk: usize,
    pub n_surf: usize,
    boundary_loop: Vec<usize>,
    /// Matrix of `a_L` on the reduced space.
    pub form: DMatrix<f64>,
    /// Diagonal of the reduced lumped mass; also the weight vector of the generalized mean.
    pub mass: DVector<f64>,
}

impl CoupledSystem {
    pub fn new(mesh: &DiskMesh, coupling: CouplingParam) -> Self {
        let n = mesh.n_bulk();
        let nb = mesh.n_surf();
        let bl = &mesh.boundary_loop;
        let (form, mass) = if coupling.identifies_trace() {
            let mut a = mesh.bulk_stiffness.clone();
            for j in 0..nb {
                for k in 0..nb {
                    a[(bl[j], bl[k])] += mesh.surf_stiffness[(j, k)];
                }
            }
            (a, &mesh.lumped_bulk + mesh.trace_adjoint(&mesh.lumped_surf))
        } else {
            let chi = coupling.chi();
            let mut a = DMatrix::zeros(n + nb, n + nb);
            a.view_mut((0, 0), (n, n)).copy_from(&mesh.bulk_stiffness);
            a.view_mut((n, n), (nb, nb)).copy_from(&mesh.surf_stiffness);
            for j in 0..nb {
                let s = chi * mesh.lumped_surf[j];
                a[(bl[j], bl[j])] += s;
                a[(n + j, n + j)] += s;
                a[(bl[j], n + j)] -= s;
                a[(n + j, bl[j])] -= s;
            }
            let mut mass = DVector::zeros(n + nb);
            mass.rows_mut(0, n).copy_from(&mesh.lumped_bulk);
            mass.rows_mut(n, nb).copy_from(&mesh.lumped_surf);
            (a, mass)
        };
        Self { coupling, n_bulk: n, n_surf: nb, boundary_loop: bl.clone(), form, mass }
    }

    pub fn dim(&self) -> usize {
        self.mass.len()
    }

    fn trace(&self, bulk: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.n_surf, self.boundary_loop.iter().map(|&i| bulk[i]))
    }

    /// Reduced coordinates to a full field.
    pub fn expand(&self, u: &DVector<f64>) -> BulkSurfaceField {
        if self.coupling.identifies_trace() {
            let surf = self.trace(u);
            BulkSurfaceField { bulk: u.clone(), surf }
        } else {
            BulkSurfaceField {
                bulk: u.rows(0, self.n_bulk).into_owned(),
                surf: u.rows(self.n_bulk, self.n_surf).into_owned(),
            }
        }
    }

    /// Adjoint of [`expand`](Self::expand).
    pub fn restrict(&self, f: &BulkSurfaceField) -> DVector<f64> {
        if self.coupling.identifies_trace() {
            let mut out = f.bulk.clone();
            for (j, &i) in self.boundary_loop.iter().enumerate() {
                out[i] += f.surf[j];
            }
            out
        } else {
            let mut out = DVector::zeros(self.dim());
            out.rows_mut(0, self.n_bulk).copy_from(&f.bulk);
            out.rows_mut(self.n_bulk, self.n_surf).copy_from(&f.surf);
            out
        }
    }

    /// Reduced coordinates of a field that lies in the reduced space.
    pub fn coordinates(&self, f: &BulkSurfaceField) -> DVector<f64> {
        if self.coupling.identifies_trace() {
            f.bulk.clone()
        } else {
            self.restrict(f)
        }
    }
}

/// Solution operator `𝔖^L` of the coupled elliptic problem on mean-zero data.
#[derive(Debug, Clone)]
pub struct EllipticSolver {
    pub system: CoupledSystem,
    lu: LU<f64, Dyn, Dyn>,
}

const MEAN_TOL: f64 = 1e-10;

impl EllipticSolver {
    /// Factorizes the bordered system `[[A, c], [cᵀ, 0]]`, with `c` the mean weights.
    pub fn new(mesh: &DiskMesh, coupling: CouplingParam) -> Result<Self, SpacesError> {
        let system = CoupledSystem::new(mesh, coupling);
        let n = system.dim();
        let mut k = DMatrix::zeros(n + 1, n + 1);
        k.view_mut((0, 0), (n, n)).copy_from(&system.form);
        k.view_mut((0, n), (n, 1)).copy_from(&system.mass);
        k.view_mut((n, 0), (1, n)).copy_from(&system.mass.transpose());
        let lu = k.lu();
        if !lu.is_invertible() {
            return Err(SpacesError::Singular);
        }
        Ok(Self { system, lu })
    }

    pub fn coupling(&self) -> CouplingParam {
        self.system.coupling
    }

    /// `u = 𝔖^L y`: `a_L(u, ζ) = (y, ζ)` for all discrete `ζ`, with zero generalized mean.
    pub fn solve(
        &self,
        y: &BulkSurfaceField,
        mesh: &DiskMesh,
    ) -> Result<BulkSurfaceField, SpacesError> {
        y.check_dims(mesh)?;
        let m = generalized_mean(y, mesh);
        if m.abs() > MEAN_TOL {
            return Err(SpacesError::NonzeroMean(m));
        }
        let n = self.system.dim();
        let rhs = self.system.restrict(&y.weighted(mesh));
        let mut b = DVector::zeros(n + 1);
        b.rows_mut(0, n).copy_from(&rhs);
        let x = self.lu.solve(&b).ok_or(SpacesError::Singular)?;
        Ok(self.system.expand(&x.rows(0, n).into_owned()))
    }

    /// Largest violation of the weak identity over the nodal basis.
    pub fn weak_residual(&self, u: &BulkSurfaceField, y: &BulkSurfaceField, mesh: &DiskMesh) -> f64 {
        let r = &self.system.form * self.system.coordinates(u)
            - self.system.restrict(&y.weighted(mesh));
        r.amax()
    }

    /// `‖y‖_{L,*}`; equals `‖y‖_{L,0,*}` on mean-zero input.
    pub fn dual_norm(&self, y: &BulkSurfaceField, mesh: &DiskMesh) -> Result<f64, SpacesError> {
        let m = generalized_mean(y, mesh);
        let py = y.map(|v| v - m);
        let u = self.solve(&py, mesh)?;
        let zero_part = al_form(&u, &u, &self.system.coupling, mesh)?.max(0.0);
        Ok((zero_part + m * m).sqrt())
    }

    /// `sqrt(a_L(y, y))` for `y` in the reduced space.
    pub fn energy_norm(&self, y: &BulkSurfaceField, mesh: &DiskMesh) -> Result<f64, SpacesError> {
        Ok(al_form(y, y, &self.system.coupling, mesh)?.max(0.0).sqrt())
    }

    /// Largest `‖y‖_{L²} / ‖y‖_{H¹_{L,0}}` over seeded smooth mean-zero fields.
    pub fn poincare_estimate(&self, mesh: &DiskMesh, samples: usize, seed: u64) -> f64 {
        let mut rng = fields::rng(seed);
        let mut best: f64 = 0.0;
        for _ in 0..samples {
            let bulk = fields::smooth_random_bulk(mesh, &mut rng);
            let f = if self.system.coupling.identifies_trace() {
                BulkSurfaceField::from_bulk(mesh, bulk)
            } else {
                BulkSurfaceField::new(bulk, fields::smooth_random_surf(mesh, &mut rng))
            };
            let y = project(&f, mesh);
            let e = self.energy_norm(&y, mesh).unwrap_or(0.0);
            if e > 0.0 {
                best = best.max(y.l2_norm(mesh) / e);
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_disk_mesh;

    fn random_pair(mesh: &DiskMesh, seed: u64) -> BulkSurfaceField {
        let mut rng = fields::rng(seed);
        BulkSurfaceField::new(fields::uniform_bulk(mesh, &mut rng), fields::uniform_surf(mesh, &mut rng))
    }

    #[test]
    fn mean_of_constant_and_split_constant() {
        let mesh = build_disk_mesh(2);
        assert!((generalized_mean(&BulkSurfaceField::constant(&mesh, 0.3), &mesh) - 0.3).abs() < 1e-15);
        let f = BulkSurfaceField::new(
            DVector::from_element(mesh.n_bulk(), 1.0),
            DVector::from_element(mesh.n_surf(), -1.0),
        );
        let m = generalized_mean(&f, &mesh);
        let expect = (mesh.bulk_measure() - mesh.surf_measure()) / (mesh.bulk_measure() + mesh.surf_measure());
        assert!((m - expect).abs() < 1e-15);
        assert!((m + 1.0 / 3.0).abs() < 0.01);
    }

    #[test]
    fn projection_is_idempotent_with_zero_mean() {
        let mesh = build_disk_mesh(1);
        assert!(project(&BulkSurfaceField::constant(&mesh, 2.5), &mesh).linf() < 1e-15);
        for seed in 0..100 {
            let f = random_pair(&mesh, seed);
            let p = project(&f, &mesh);
            assert!(generalized_mean(&p, &mesh).abs() < 1e-14);
            assert!((&project(&p, &mesh) - &p).linf() < 1e-14);
        }
    }

    #[test]
    fn form_constants_robin_and_symmetry() {
        let mesh = build_disk_mesh(1);
        let c = CouplingParam::new(0.5).unwrap();
        let k = BulkSurfaceField::constant(&mesh, 1.7);
        assert!(al_form(&k, &k, &c, &mesh).unwrap().abs() < 1e-12);

        let g = BulkSurfaceField::new(DVector::zeros(mesh.n_bulk()), DVector::from_element(mesh.n_surf(), 0.8));
        let v = al_form(&g, &g, &c, &mesh).unwrap();
        let expect = 2.0 * 0.64 * mesh.surf_measure();
        assert!((v - expect).abs() < 1e-12);

        let u = random_pair(&mesh, 1);
        let w = random_pair(&mesh, 2);
        let a = al_form(&u, &w, &c, &mesh).unwrap();
        let b = al_form(&w, &u, &c, &mesh).unwrap();
        assert!((a - b).abs() <= 1e-13 * a.abs().max(1.0));
    }

    #[test]
    fn l_zero_requires_trace() {
        let mesh = build_disk_mesh(1);
        let c = CouplingParam::new(0.0).unwrap();
        let u = random_pair(&mesh, 3);
        assert!(matches!(al_form(&u, &u, &c, &mesh), Err(SpacesError::TraceConstraint(_))));
        let t = BulkSurfaceField::from_bulk(&mesh, u.bulk.clone());
        // L-independence on trace-compatible fields
        let v0 = al_form(&t, &t, &c, &mesh).unwrap();
        let v1 = al_form(&t, &t, &CouplingParam::new(3.0).unwrap(), &mesh).unwrap();
        assert!((v0 - v1).abs() < 1e-12 * v0);
    }

    #[test]
    fn reduced_form_matches_al_form() {
        let mesh = build_disk_mesh(1);
        for l in [0.0, 0.1, 2.0] {
            let sys = CoupledSystem::new(&mesh, CouplingParam::new(l).unwrap());
            let mut rng = fields::rng(9);
            let u = DVector::from_fn(sys.dim(), |_, _| rand::Rng::random_range(&mut rng, -1.0..1.0));
            let v = DVector::from_fn(sys.dim(), |_, _| rand::Rng::random_range(&mut rng, -1.0..1.0));
            let direct = al_form(&sys.expand(&u), &sys.expand(&v), &sys.coupling, &mesh).unwrap();
            let reduced = u.dot(&(&sys.form * &v));
            assert!((direct - reduced).abs() < 1e-12 * direct.abs().max(1.0));
            // restrict is the adjoint of expand under the Euclidean pairing
            let f = random_pair(&mesh, 4);
            let lhs = sys.expand(&u).bulk.dot(&f.bulk) + sys.expand(&u).surf.dot(&f.surf);
            assert!((lhs - u.dot(&sys.restrict(&f))).abs() < 1e-12);
        }
    }

    #[test]
    fn solver_zero_and_mean_precondition() {
        let mesh = build_disk_mesh(1);
        let s = EllipticSolver::new(&mesh, CouplingParam::new(1.0).unwrap()).unwrap();
        let u = s.solve(&BulkSurfaceField::zeros(&mesh), &mesh).unwrap();
        assert_eq!(u.linf(), 0.0);
        let err = s.solve(&BulkSurfaceField::constant(&mesh, 1.0), &mesh).unwrap_err();
        assert!(matches!(err, SpacesError::NonzeroMean(_)));
    }

    #[test]
    fn dual_norm_of_constant_is_abs() {
        let mesh = build_disk_mesh(1);
        let s = EllipticSolver::new(&mesh, CouplingParam::new(0.3).unwrap()).unwrap();
        assert!((s.dual_norm(&BulkSurfaceField::constant(&mesh, -0.7), &mesh).unwrap() - 0.7).abs() < 1e-12);
        assert_eq!(s.dual_norm(&BulkSurfaceField::zeros(&mesh), &mesh).unwrap(), 0.0);
    }

    #[test]
    fn invalid_coupling_rejected() {
        assert!(CouplingParam::new(-1.0).is_err());
        assert!(CouplingParam::new(f64::INFINITY).is_err());
        assert_eq!(CouplingParam::new(0.0).unwrap().chi(), 0.0);
        assert_eq!(CouplingParam::new(4.0).unwrap().chi() * 4.0, 1.0);
    }
}
