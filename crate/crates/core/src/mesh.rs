//! Triangulated unit disk with a matching P1 boundary discretization.
//!
//! Nodes are laid out in concentric rings: ring `k` (radius `k / n_rings`)
//! carries `6k` equally spaced nodes, and consecutive rings are zipped
//! together by angle. The outermost ring is the boundary loop, so every
//! surface node is also a bulk node and the trace map is an index selection.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::error::DimensionError;

/// Triangulated unit disk together with its assembled P1 operators.
#[derive(Debug, Clone)]
pub struct DiskMesh {
    pub nodes: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    /// Bulk indices of the boundary nodes, counter-clockwise, cyclic.
    pub boundary_loop: Vec<usize>,
    /// Largest edge length.
    pub h: f64,
    pub bulk_mass: DMatrix<f64>,
    pub bulk_stiffness: DMatrix<f64>,
    pub surf_mass: DMatrix<f64>,
    pub surf_stiffness: DMatrix<f64>,
    /// Row sums of `bulk_mass`.
    pub lumped_bulk: DVector<f64>,
    /// Row sums of `surf_mass`.
    pub lumped_surf: DVector<f64>,
    /// Polar angle of each boundary node, in loop order.
    pub boundary_angles: Vec<f64>,
    level: usize,
}

/// Builds the ring mesh for refinement level `n_refine`.
///
/// Level `l` uses `2^(l+1)` rings, so the boundary has `12 * 2^l` nodes and
/// `h` halves with each level.
pub fn build_disk_mesh(n_refine: usize) -> DiskMesh {
    let n_rings = 2usize << n_refine;

    let mut nodes = vec![[0.0, 0.0]];
    let mut ring_start = vec![0usize];
    let mut ring_angles: Vec<Vec<f64>> = vec![vec![0.0]];
    for k in 1..=n_rings {
        ring_start.push(nodes.len());
        let r = k as f64 / n_rings as f64;
        let count = 6 * k;
        let mut angles = Vec::with_capacity(count);
        for j in 0..count {
            let a = 2.0 * PI * j as f64 / count as f64;
            angles.push(a);
            if k == n_rings {
                // exactly on the circle
                nodes.push([a.cos(), a.sin()]);
            } else {
                nodes.push([r * a.cos(), r * a.sin()]);
            }
        }
        ring_angles.push(angles);
    }

    let mut triangles = Vec::with_capacity(6 * n_rings * n_rings);
    for j in 0..6 {
        triangles.push([0, ring_start[1] + j, ring_start[1] + (j + 1) % 6]);
    }
    for k in 2..=n_rings {
        zip_rings(
            ring_start[k - 1],
            &ring_angles[k - 1],
            ring_start[k],
            &ring_angles[k],
            &mut triangles,
        );
    }
    for tri in triangles.iter_mut() {
        if signed_area(&nodes, tri) < 0.0 {
            tri.swap(1, 2);
        }
    }

    let boundary_loop: Vec<usize> = (ring_start[n_rings]..nodes.len()).collect();
    let boundary_angles = ring_angles[n_rings].clone();

    let mut mesh = DiskMesh {
        nodes,
        triangles,
        boundary_loop,
        h: 0.0,
        bulk_mass: DMatrix::zeros(0, 0),
        bulk_stiffness: DMatrix::zeros(0, 0),
        surf_mass: DMatrix::zeros(0, 0),
        surf_stiffness: DMatrix::zeros(0, 0),
        lumped_bulk: DVector::zeros(0),
        lumped_surf: DVector::zeros(0),
        boundary_angles,
        level: n_refine,
    };
    mesh.assemble();
    mesh
}

fn zip_rings(
    inner_start: usize,
    inner_angles: &[f64],
    outer_start: usize,
    outer_angles: &[f64],
    out: &mut Vec<[usize; 3]>,
) {
    let ni = inner_angles.len();
    let no = outer_angles.len();
    let angle_at = |angles: &[f64], idx: usize| {
        let n = angles.len();
        angles[idx % n] + 2.0 * PI * (idx / n) as f64
    };
    let (mut i, mut o) = (0usize, 0usize);
    while i < ni || o < no {
        let next_inner = angle_at(inner_angles, i + 1);
        let next_outer = angle_at(outer_angles, o + 1);
        let a = inner_start + i % ni;
        let b = outer_start + o % no;
        if o < no && (i >= ni || next_outer <= next_inner) {
            out.push([a, b, outer_start + (o + 1) % no]);
            o += 1;
        } else {
            out.push([a, b, inner_start + (i + 1) % ni]);
            i += 1;
        }
    }
}

fn signed_area(nodes: &[[f64; 2]], tri: &[usize; 3]) -> f64 {
    let [p, q, r] = tri.map(|i| nodes[i]);
    0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]))
}

/// Area and the (constant) gradients of the three barycentric basis functions.
pub(crate) fn element_geometry(nodes: &[[f64; 2]], tri: &[usize; 3]) -> (f64, [[f64; 2]; 3]) {
    let [p, q, r] = tri.map(|i| nodes[i]);
    let area = signed_area(nodes, tri);
    let inv = 1.0 / (2.0 * area);
    let grads = [
        [(q[1] - r[1]) * inv, (r[0] - q[0]) * inv],
        [(r[1] - p[1]) * inv, (p[0] - r[0]) * inv],
        [(p[1] - q[1]) * inv, (q[0] - p[0]) * inv],
    ];
    (area, grads)
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

impl DiskMesh {
    fn assemble(&mut self) {
        let n = self.nodes.len();
        let mut mass = DMatrix::zeros(n, n);
        let mut stiff = DMatrix::zeros(n, n);
        let mut h: f64 = 0.0;
        for tri in &self.triangles {
            let (area, grads) = element_geometry(&self.nodes, tri);
            for a in 0..3 {
                h = h.max(dist(self.nodes[tri[a]], self.nodes[tri[(a + 1) % 3]]));
                for b in 0..3 {
                    let m = if a == b { area / 6.0 } else { area / 12.0 };
                    mass[(tri[a], tri[b])] += m;
                    stiff[(tri[a], tri[b])] +=
                        area * (grads[a][0] * grads[b][0] + grads[a][1] * grads[b][1]);
                }
            }
        }

        let nb = self.boundary_loop.len();
        let mut smass = DMatrix::zeros(nb, nb);
        let mut sstiff = DMatrix::zeros(nb, nb);
        for j in 0..nb {
            let jn = (j + 1) % nb;
            let len = self.edge_length(j);
            smass[(j, j)] += len / 3.0;
            smass[(jn, jn)] += len / 3.0;
            smass[(j, jn)] += len / 6.0;
            smass[(jn, j)] += len / 6.0;
            sstiff[(j, j)] += 1.0 / len;
            sstiff[(jn, jn)] += 1.0 / len;
            sstiff[(j, jn)] -= 1.0 / len;
            sstiff[(jn, j)] -= 1.0 / len;
        }

        self.lumped_bulk = DVector::from_iterator(n, mass.row_iter().map(|r| r.sum()));
        self.lumped_surf = DVector::from_iterator(nb, smass.row_iter().map(|r| r.sum()));
        self.bulk_mass = mass;
        self.bulk_stiffness = stiff;
        self.surf_mass = smass;
        self.surf_stiffness = sstiff;
        self.h = h;
    }

    /// Length of the boundary segment from loop position `j` to `j + 1`.
    pub fn edge_length(&self, j: usize) -> f64 {
        let nb = self.boundary_loop.len();
        dist(
            self.nodes[self.boundary_loop[j]],
            self.nodes[self.boundary_loop[(j + 1) % nb]],
        )
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn n_bulk(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_surf(&self) -> usize {
        self.boundary_loop.len()
    }

    /// Discrete |Ω|.
    pub fn bulk_measure(&self) -> f64 {
        self.lumped_bulk.sum()
    }

    /// Discrete |Γ|.
    pub fn surf_measure(&self) -> f64 {
        self.lumped_surf.sum()
    }

    /// Restriction of a bulk vector to the boundary loop.
    pub fn trace(&self, bulk: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.n_surf(), self.boundary_loop.iter().map(|&i| bulk[i]))
    }

    /// Adjoint of [`trace`](Self::trace): scatters a surface vector onto boundary bulk nodes.
    pub fn trace_adjoint(&self, surf: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.n_bulk());
        for (j, &i) in self.boundary_loop.iter().enumerate() {
            out[i] += surf[j];
        }
        out
    }

    /// Evaluates `f` at every bulk node.
    pub fn interpolate_bulk(&self, f: impl Fn(f64, f64) -> f64) -> DVector<f64> {
        DVector::from_iterator(self.n_bulk(), self.nodes.iter().map(|p| f(p[0], p[1])))
    }

    /// Evaluates `f` at every boundary node as a function of the polar angle.
    pub fn interpolate_surf(&self, f: impl Fn(f64) -> f64) -> DVector<f64> {
        DVector::from_iterator(self.n_surf(), self.boundary_angles.iter().map(|&a| f(a)))
    }

    /// Plain-text dump: `node <i> <x> <y>` records, then `tri <a> <b> <c>`,
    /// then `boundary <j> <i>` in loop order.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# level {} nodes {} triangles {} boundary {} h {:e}",
            self.level,
            self.n_bulk(),
            self.triangles.len(),
            self.n_surf(),
            self.h
        );
        for (i, p) in self.nodes.iter().enumerate() {
            let _ = writeln!(s, "node {} {:e} {:e}", i, p[0], p[1]);
        }
        for t in &self.triangles {
            let _ = writeln!(s, "tri {} {} {}", t[0], t[1], t[2]);
        }
        for (j, i) in self.boundary_loop.iter().enumerate() {
            let _ = writeln!(s, "boundary {} {}", j, i);
        }
        s
    }
}

fn check_len(expected: usize, got: usize) -> Result<(), DimensionError> {
    if expected == got {
        Ok(())
    } else {
        Err(DimensionError { expected, got })
    }
}

/// `sqrt(fᵀ K_Ω f)`.
pub fn h1_seminorm_bulk(field: &DVector<f64>, mesh: &DiskMesh) -> Result<f64, DimensionError> {
    check_len(mesh.n_bulk(), field.len())?;
    Ok(field.dot(&(&mesh.bulk_stiffness * field)).max(0.0).sqrt())
}

/// `sqrt(fᵀ K_Γ f)`.
pub fn h1_seminorm_surf(field: &DVector<f64>, mesh: &DiskMesh) -> Result<f64, DimensionError> {
    check_len(mesh.n_surf(), field.len())?;
    Ok(field.dot(&(&mesh.surf_stiffness * field)).max(0.0).sqrt())
}
