//! Split-level scores, the repeated-split point estimate and the plug-in
//! item-level influence contributions.
//!
//! For split `r` with scoring set `D_r` (size `m`) and held-out set `E_r`
//! (size `l`), the selection scores `S_r` and held-out scores `T_r` are
//! per-artifact means over `D_r` and `E_r`; weights are `q_r = g(S_r)` and the
//! split output is `Y_r = q_r . T_r`. The estimate is `sum_r w_r Y_r`.
//!
//! The contribution of item `i` is
//!
//! ```text
//! psi_i = sum_r w_r [ (M/l) 1{i in E_r} q_r . (Z_i - T_r)
//!                   + (M/m) 1{i in D_r} (Dg(S_r)^T T_r) . (Z_i - S_r) ]
//! ```
//!
//! Each block is centered at its own split mean, so `sum_i psi_i = 0` up to
//! rounding.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::score_store::{CellRef, ScoreMatrix, ScoreTensor, TensorCell};
use crate::selector::{argmax, ResolvedSelector, SelectorSpec, WeightVector};
use crate::split_engine::SplitDesign;
use crate::stats::pairwise_sum;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitScores {
    pub s_hat: Vec<f64>,
    pub t_hat: Vec<f64>,
    pub q_hat: WeightVector,
    pub y_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellEstimate {
    pub cell: CellRef,
    pub theta: f64,
    /// Influence contribution of every item, in tensor item order.
    pub psi: Vec<f64>,
    /// Winner instability of the split design on this cell.
    pub pi_win: f64,
    /// Selector actually used (adaptive specs are resolved per cell).
    pub selector: ResolvedSelector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SirenEstimate {
    pub n_items: usize,
    pub cells: Vec<CellEstimate>,
    pub design: SplitDesign,
    pub selector: SelectorSpec,
}

impl SirenEstimate {
    pub fn cell(&self, cell: &CellRef) -> Result<&CellEstimate> {
        self.cells
            .iter()
            .find(|c| c.cell == *cell)
            .ok_or_else(|| Error::UnknownCell(cell.to_string()))
    }

    pub fn cell_index(&self, cell: &CellRef) -> Result<usize> {
        self.cells
            .iter()
            .position(|c| c.cell == *cell)
            .ok_or_else(|| Error::UnknownCell(cell.to_string()))
    }

    pub fn theta(&self, cell: &CellRef) -> Result<f64> {
        self.cell(cell).map(|c| c.theta)
    }

    pub fn to_json(&self, include_psi: bool) -> serde_json::Value {
        let cells: Vec<serde_json::Value> = self
            .cells
            .iter()
            .map(|c| {
                let mut v = serde_json::json!({
                    "system": c.cell.system,
                    "budget": c.cell.budget,
                    "theta": c.theta,
                    "pi_win": c.pi_win,
                    "selector": c.selector,
                });
                if include_psi {
                    v["psi"] = serde_json::json!(c.psi);
                }
                v
            })
            .collect();
        serde_json::json!({
            "n_items": self.n_items,
            "selector": self.selector,
            "design_seed": self.design.seed,
            "n_splits": self.design.n_splits(),
            "cells": cells,
        })
    }
}

fn check_design(t: &ScoreTensor, d: &SplitDesign) -> Result<()> {
    let n = t.n_items();
    for s in &d.splits {
        if let Some(&bad) = s.score.iter().chain(&s.eval).find(|&&i| i >= n) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                n_items: n,
            });
        }
        if s.score.is_empty() || s.eval.is_empty() {
            return Err(Error::DegenerateSplit {
                n_items: n,
                n_score: s.score.len(),
                n_eval: s.eval.len(),
            });
        }
    }
    if d.weights.len() != d.splits.len() {
        return Err(Error::invalid("split weights do not match split count"));
    }
    Ok(())
}

/// Mean of `col` over the positions `idx`, where position `i` reads row
/// `rows[i]` when a row map is given.
fn subset_mean(col: &[f64], idx: &[usize], rows: Option<&[usize]>, buf: &mut Vec<f64>) -> f64 {
    buf.clear();
    match rows {
        None => buf.extend(idx.iter().map(|&i| col[i])),
        Some(map) => buf.extend(idx.iter().map(|&i| col[map[i]])),
    }
    pairwise_sum(buf) / idx.len() as f64
}

/// Per-split selection and held-out mean vectors.
struct RoleMeans {
    s: Vec<Vec<f64>>,
    t: Vec<Vec<f64>>,
}

fn role_means(cell: &TensorCell, d: &SplitDesign, rows: Option<&[usize]>) -> RoleMeans {
    let k = cell.n_artifacts();
    let (zs, zt) = (cell.score_role(), cell.eval_role());
    let mut buf = Vec::with_capacity(d.n_items);
    let mut s = Vec::with_capacity(d.n_splits());
    let mut t = Vec::with_capacity(d.n_splits());
    for split in &d.splits {
        s.push((0..k).map(|a| subset_mean(zs.column(a), &split.score, rows, &mut buf)).collect());
        t.push((0..k).map(|a| subset_mean(zt.column(a), &split.eval, rows, &mut buf)).collect());
    }
    RoleMeans { s, t }
}

/// Fraction of splits whose scoring-set argmax differs from the most frequent
/// argmax (ties to the lowest artifact index).
pub fn instability_from_scores(s_hats: &[Vec<f64>]) -> f64 {
    if s_hats.is_empty() {
        return 0.0;
    }
    let k = s_hats[0].len();
    let mut counts = vec![0usize; k.max(1)];
    for s in s_hats {
        counts[argmax(s)] += 1;
    }
    let majority = argmax_count(&counts);
    let disagree = s_hats.iter().filter(|s| argmax(s) != majority).count();
    disagree as f64 / s_hats.len() as f64
}

fn argmax_count(counts: &[usize]) -> usize {
    let mut best = 0;
    for (k, c) in counts.iter().enumerate() {
        if *c > counts[best] {
            best = k;
        }
    }
    best
}

fn resolve(spec: &SelectorSpec, means: &RoleMeans) -> (ResolvedSelector, f64) {
    let pi_win = instability_from_scores(&means.s);
    (spec.resolve(pi_win), pi_win)
}

/// Winner instability of `cell` under design `d`.
pub fn winner_instability(t: &ScoreTensor, d: &SplitDesign, cell: &CellRef) -> Result<f64> {
    check_design(t, d)?;
    let c = t.cell(cell)?;
    Ok(instability_from_scores(&role_means(c, d, None).s))
}

/// Per-split scores for one cell.
pub fn split_scores(
    t: &ScoreTensor,
    d: &SplitDesign,
    cell: &CellRef,
    spec: &SelectorSpec,
) -> Result<Vec<SplitScores>> {
    spec.check()?;
    check_design(t, d)?;
    let c = t.cell(cell)?;
    let means = role_means(c, d, None);
    let (sel, _) = resolve(spec, &means);
    means
        .s
        .into_iter()
        .zip(means.t)
        .map(|(s_hat, t_hat)| {
            let q_hat = sel.weights(&s_hat)?;
            let y_hat = q_hat.dot(&t_hat);
            Ok(SplitScores {
                s_hat,
                t_hat,
                q_hat,
                y_hat,
            })
        })
        .collect()
}

fn cell_theta(cell: &TensorCell, d: &SplitDesign, spec: &SelectorSpec, rows: Option<&[usize]>) -> Result<f64> {
    let means = role_means(cell, d, rows);
    let (sel, _) = resolve(spec, &means);
    let mut theta = 0.0;
    for ((s, t), w) in means.s.iter().zip(&means.t).zip(&d.weights) {
        theta += w * sel.weights(s)?.dot(t);
    }
    Ok(theta)
}

fn accumulate_block(
    psi: &mut [f64],
    z: &ScoreMatrix,
    idx: &[usize],
    centers: &[f64],
    coefs: &[f64],
) {
    for (k, (&coef, &center)) in coefs.iter().zip(centers).enumerate() {
        if coef == 0.0 {
            continue;
        }
        let col = z.column(k);
        for &i in idx {
            psi[i] += coef * (col[i] - center);
        }
    }
}

fn cell_estimate(cell: &TensorCell, d: &SplitDesign, spec: &SelectorSpec) -> Result<CellEstimate> {
    let means = role_means(cell, d, None);
    let (sel, pi_win) = resolve(spec, &means);
    let n = d.n_items as f64;
    let mut psi = vec![0.0; cell.items.len()];
    let mut theta = 0.0;
    for (((s, t), w), split) in means.s.iter().zip(&means.t).zip(&d.weights).zip(&d.splits) {
        let q = sel.weights(s)?;
        theta += w * q.dot(t);

        let held_scale = w * n / split.eval.len() as f64;
        let held: Vec<f64> = q.0.iter().map(|qk| held_scale * qk).collect();
        accumulate_block(&mut psi, cell.eval_role(), &split.eval, t, &held);

        if !sel.is_hard() {
            let sel_scale = w * n / split.score.len() as f64;
            let v = sel.jacobian_transpose_apply(&q, t);
            let coefs: Vec<f64> = v.iter().map(|vk| sel_scale * vk).collect();
            accumulate_block(&mut psi, cell.score_role(), &split.score, s, &coefs);
        }
    }
    Ok(CellEstimate {
        cell: cell.cell_ref(),
        theta,
        psi,
        pi_win,
        selector: sel,
    })
}

/// Point estimates and influence contributions for every cell. Cells are
/// processed in parallel; each cell's arithmetic is sequential, so results do
/// not depend on the thread count.
pub fn estimate(t: &ScoreTensor, d: &SplitDesign, spec: &SelectorSpec) -> Result<SirenEstimate> {
    spec.check()?;
    check_design(t, d)?;
    if d.n_items != t.n_items() {
        return Err(Error::invalid(format!(
            "design is for {} items, tensor has {}",
            d.n_items,
            t.n_items()
        )));
    }
    let cells = t
        .cells
        .par_iter()
        .map(|c| cell_estimate(c, d, spec))
        .collect::<Result<Vec<_>>>()?;
    Ok(SirenEstimate {
        n_items: t.n_items(),
        cells,
        design: d.clone(),
        selector: *spec,
    })
}

/// Point estimates only, optionally on a row-resampled view of the tensor
/// (position `i` reads item `rows[i]`). Used by the item bootstrap.
pub fn estimate_theta(
    t: &ScoreTensor,
    d: &SplitDesign,
    spec: &SelectorSpec,
    rows: Option<&[usize]>,
) -> Result<Vec<f64>> {
    spec.check()?;
    check_design(t, d)?;
    if let Some(map) = rows {
        if map.len() != t.n_items() {
            return Err(Error::invalid("row map must have one entry per item"));
        }
        if let Some(&bad) = map.iter().find(|&&i| i >= t.n_items()) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                n_items: t.n_items(),
            });
        }
    }
    t.cells.iter().map(|c| cell_theta(c, d, spec, rows)).collect()
}
