//! Snapshot files, diagnostics CSV and experiment reports on disk.

use std::fmt::Write as _;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use crate::diagnostics::{emit_diagnostics, Diagnostics};
use crate::mesh::DiskMesh;
use crate::spaces::BulkSurfaceField;

use super::HarnessError;

/// Flat text snapshot. Header: `# t=<t> n_bulk=<n> n_surf=<n> steady=<bool>`;
/// then `x y phi mu` per bulk node and `angle psi theta` per surface node.
pub fn format_snapshot(
    t: f64,
    mesh: &DiskMesh,
    phi: &BulkSurfaceField,
    mu: &BulkSurfaceField,
    steady: bool,
) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# t={t:e} n_bulk={} n_surf={} steady={steady}", mesh.n_bulk(), mesh.n_surf());
    for (i, p) in mesh.nodes.iter().enumerate() {
        let _ = writeln!(s, "{:e} {:e} {:e} {:e}", p[0], p[1], phi.bulk[i], mu.bulk[i]);
    }
    for (j, a) in mesh.boundary_angles.iter().enumerate() {
        let _ = writeln!(s, "{:e} {:e} {:e}", a, phi.surf[j], mu.surf[j]);
    }
    s
}

/// Parsed snapshot: `(t, steady, phi, mu)`.
pub fn parse_snapshot(text: &str) -> Result<(f64, bool, BulkSurfaceField, BulkSurfaceField), String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty snapshot")?;
    let field = |key: &str| -> Result<&str, String> {
        header
            .split_whitespace()
            .find_map(|w| w.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
            .ok_or_else(|| format!("header lacks {key}"))
    };
    let num = |s: &str| s.parse::<f64>().map_err(|e| format!("{s}: {e}"));
    let t = num(field("t")?)?;
    let nb: usize = field("n_bulk")?.parse().map_err(|e| format!("n_bulk: {e}"))?;
    let ns: usize = field("n_surf")?.parse().map_err(|e| format!("n_surf: {e}"))?;
    let steady = field("steady")? == "true";
    let mut rows = |n: usize, cols: usize| -> Result<Vec<Vec<f64>>, String> {
        (0..n)
            .map(|_| {
                let line = lines.next().ok_or("truncated snapshot")?;
                let v: Vec<f64> = line.split_whitespace().map(num).collect::<Result<_, _>>()?;
                if v.len() == cols {
                    Ok(v)
                } else {
                    Err(format!("expected {cols} columns in {line:?}"))
                }
            })
            .collect()
    };
    let bulk = rows(nb, 4)?;
    let surf = rows(ns, 3)?;
    let col = |r: &[Vec<f64>], k: usize| nalgebra::DVector::from_iterator(r.len(), r.iter().map(|v| v[k]));
    Ok((
        t,
        steady,
        BulkSurfaceField::new(col(&bulk, 2), col(&surf, 1)),
        BulkSurfaceField::new(col(&bulk, 3), col(&surf, 2)),
    ))
}

/// Output directory of one run.
#[derive(Debug, Clone)]
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: impl Into<PathBuf>) -> Result<Self, HarnessError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| HarnessError::io(&root, e))?;
        Ok(Self { root })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<(), HarnessError> {
        let p = self.path(name);
        fs::write(&p, contents).map_err(|e| HarnessError::io(&p, e))
    }

    pub fn diagnostics(&self, name: &str, rows: &[Diagnostics], stride: usize) -> Result<(), HarnessError> {
        let p = self.path(name);
        let f = fs::File::create(&p).map_err(|e| HarnessError::io(&p, e))?;
        emit_diagnostics(BufWriter::new(f), rows, stride)
            .map_err(|e| HarnessError::io(&p, std::io::Error::other(e)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_disk_mesh;

    #[test]
    fn snapshot_round_trip() {
        let mesh = build_disk_mesh(0);
        let phi = BulkSurfaceField::new(
            mesh.interpolate_bulk(|x, y| 0.3 * x - 0.1 * y),
            mesh.interpolate_surf(|a| 0.2 * a.sin()),
        );
        let mu = phi.map(|v| 1.0 / 3.0 + v);
        let text = format_snapshot(0.125, &mesh, &phi, &mu, true);
        assert!(text.starts_with("# t=1.25e-1 n_bulk=19 n_surf=12 steady=true\n"));
        assert_eq!(text.lines().count(), 1 + 19 + 12);
        let (t, steady, p, m) = parse_snapshot(&text).unwrap();
        assert_eq!((t, steady), (0.125, true));
        assert_eq!(p, phi);
        assert_eq!(m, mu);
        assert!(parse_snapshot("# t=0 n_bulk=3 n_surf=1 steady=false\n1 2 3 4\n").is_err());
    }
}
