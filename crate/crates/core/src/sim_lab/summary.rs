//! Direction-agreement and bias summary of per-cell estimates against
//! Monte Carlo references.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::score_store::CellRef;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionalSummary {
    /// Cells where `sign(est_A - ref_B) == sign(ref_A - ref_B)`.
    pub agree: usize,
    pub n_cells: usize,
    /// Mean of `est_A - ref_A`, in percentage points.
    pub bias_pp: f64,
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// `estimates` and `reference_a` must cover the same cells; `reference_b`
/// must cover at least those cells.
pub fn directional_summary(
    estimates: &BTreeMap<CellRef, f64>,
    reference_a: &BTreeMap<CellRef, f64>,
    reference_b: &BTreeMap<CellRef, f64>,
) -> Result<DirectionalSummary> {
    if estimates.is_empty() {
        return Err(Error::MismatchedCells("no cells to summarize".into()));
    }
    if estimates.keys().ne(reference_a.keys()) {
        return Err(Error::MismatchedCells(
            "estimates and system-A references cover different cells".into(),
        ));
    }
    let mut agree = 0;
    let mut bias = 0.0;
    for (cell, est) in estimates {
        let ra = reference_a[cell];
        let rb = *reference_b
            .get(cell)
            .ok_or_else(|| Error::MismatchedCells(format!("no system-B reference for {cell}")))?;
        if sign(est - rb) == sign(ra - rb) {
            agree += 1;
        }
        bias += est - ra;
    }
    Ok(DirectionalSummary {
        agree,
        n_cells: estimates.len(),
        bias_pp: 100.0 * bias / estimates.len() as f64,
    })
}
