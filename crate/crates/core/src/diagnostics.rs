//! Per-step diagnostics record and its CSV encoding.

use std::io::Write;

use serde::{Deserialize, Serialize};

/// Column order of the diagnostics CSV.
pub const COLUMNS: [&str; 8] = [
    "t",
    "mean",
    "energy",
    "dissipation",
    "sep_gap",
    "linf_phi",
    "newton_iters",
    "eq_residual",
];

/// One row of the diagnostics stream.
///
/// `eq_residual` is the discrete energy-equality defect `E(t_n) - E(0) + τ Σ_{k≤n} D^k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub t: f64,
    pub mean: f64,
    pub energy: f64,
    pub dissipation: f64,
    pub sep_gap: f64,
    pub linf_phi: f64,
    pub newton_iters: usize,
    pub eq_residual: f64,
}

/// Writes the header and one row per record, keeping every `stride`-th row
/// (the final row is always kept).
pub fn emit_diagnostics<W: Write>(
    out: W,
    rows: &[Diagnostics],
    stride: usize,
) -> Result<(), csv::Error> {
    let stride = stride.max(1);
    let mut w = csv::Writer::from_writer(out);
    for (i, row) in rows.iter().enumerate() {
        if i % stride == 0 || i + 1 == rows.len() {
            w.serialize(row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_diagnostics<R: std::io::Read>(input: R) -> Result<Vec<Diagnostics>, csv::Error> {
    csv::Reader::from_reader(input).deserialize().collect()
}
