//! Two-artifact margin sweep contrasting hard, softmax and adaptive selection.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{coverage_se, rows_to_csv, sample_tensor, DgpSpec, GroundTruth, MonteCarloConfig, ProtocolConfig};
use crate::bootstrap::{intervals, multiplier_draws, BootstrapConfig};
use crate::error::{Error, Result};
use crate::estimator::{estimate, estimate_theta};
use crate::rng::{derive_indexed, derive_seed};
use crate::selector::{SelectorKind, SelectorSpec};
use crate::stats::{mean, normal_quantile, sample_sd};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyBConfig {
    /// Margins `Delta`; qualities are `[base + Delta, base]`.
    pub deltas: Vec<f64>,
    pub n_items: usize,
    pub n_splits: usize,
    pub base_quality: f64,
    pub selectors: Vec<SelectorKind>,
    pub instability_threshold: f64,
    pub mc: MonteCarloConfig,
}

impl StudyBConfig {
    pub fn new(deltas: Vec<f64>, mc: MonteCarloConfig) -> Self {
        Self {
            deltas,
            n_items: 500,
            n_splits: 5,
            base_quality: 0.5,
            selectors: vec![SelectorKind::Hard, SelectorKind::Softmax, SelectorKind::Adaptive],
            instability_threshold: 0.10,
            mc,
        }
    }

    pub fn default_deltas() -> Vec<f64> {
        vec![0.0, 0.06, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.45, 0.60, 0.80]
    }

    fn spec(&self, kind: SelectorKind) -> SelectorSpec {
        match kind {
            SelectorKind::Hard => SelectorSpec::hard(),
            SelectorKind::Softmax => SelectorSpec::softmax(self.mc.tau),
            SelectorKind::Adaptive => SelectorSpec::adaptive(self.mc.tau, self.instability_threshold),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyBRow {
    pub delta: f64,
    pub selector: String,
    pub n_sim: usize,
    pub theta_star: f64,
    pub theta_star_mc_se: f64,
    pub coverage: f64,
    pub coverage_se: f64,
    pub mean_width: f64,
    pub mean_pi_win: f64,
    /// Sd of the estimate across trials.
    pub true_sd: f64,
    /// Mean half-width divided by the normal `1 - alpha/2` quantile.
    pub implied_sd: f64,
    /// `1 - implied_sd / true_sd`.
    pub sd_underestimation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyBResult {
    pub config: StudyBConfig,
    pub rows: Vec<StudyBRow>,
}

impl StudyBResult {
    pub fn row(&self, delta: f64, selector: SelectorKind) -> Option<&StudyBRow> {
        let name = selector_name(selector);
        self.rows
            .iter()
            .find(|r| (r.delta - delta).abs() < 1e-12 && r.selector == name)
    }

    pub fn to_csv(&self) -> Result<String> {
        rows_to_csv(&self.rows)
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({ "study": "b", "config": self.config, "rows": self.rows })
    }
}

fn selector_name(kind: SelectorKind) -> &'static str {
    match kind {
        SelectorKind::Hard => "hard",
        SelectorKind::Softmax => "softmax",
        SelectorKind::Adaptive => "adaptive",
    }
}

struct Outcome {
    theta: f64,
    covered: bool,
    width: f64,
}

pub fn run_study_b(cfg: &StudyBConfig) -> Result<StudyBResult> {
    cfg.mc.check()?;
    if cfg.deltas.is_empty() || cfg.deltas.iter().any(|d| !(*d >= 0.0) || !d.is_finite()) {
        return Err(Error::invalid("study B margins must be finite and nonnegative"));
    }
    if cfg.selectors.is_empty() {
        return Err(Error::invalid("study B needs at least one selector"));
    }
    let mc = &cfg.mc;
    let specs: Vec<SelectorSpec> = cfg.selectors.iter().map(|k| cfg.spec(*k)).collect();
    let z = normal_quantile(1.0 - mc.alpha / 2.0);
    let mut rows = Vec::new();
    for &delta in &cfg.deltas {
        let base = DgpSpec::new(cfg.n_items, vec![cfg.base_quality + delta, cfg.base_quality], 0);
        let protocol = |spec| ProtocolConfig::new(cfg.n_splits, mc.rho_score, spec);
        // Ground truth per selector over shared replications.
        let gt_label = format!("study-b-gt:{delta}");
        let gt_vals = (0..mc.n_gt)
            .into_par_iter()
            .map(|j| {
                let rs = derive_indexed(mc.seed, &gt_label, j as u64);
                let t = sample_tensor(&base.with_seed(derive_seed(rs, "dgp")))?;
                let d = protocol(specs[0]).design(cfg.n_items, derive_seed(rs, "design"))?;
                specs
                    .iter()
                    .map(|s| Ok(estimate_theta(&t, &d, s, None)?[0]))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let gts: Vec<GroundTruth> = (0..specs.len())
            .map(|s| {
                let v: Vec<f64> = gt_vals.iter().map(|x| x[s]).collect();
                GroundTruth::from_values(&v)
            })
            .collect();

        let label = format!("study-b:{delta}");
        let trials = (0..mc.n_sim)
            .into_par_iter()
            .map(|t| {
                let ts = derive_indexed(mc.seed, &label, t as u64);
                let tensor = sample_tensor(&base.with_seed(derive_seed(ts, "dgp")))?;
                let d = protocol(specs[0]).design(cfg.n_items, derive_seed(ts, "design"))?;
                let bcfg = BootstrapConfig::new(mc.n_boot, mc.alpha, derive_seed(ts, "bootstrap"));
                let mut pi_win = 0.0;
                let outs = specs
                    .iter()
                    .zip(&gts)
                    .map(|(s, gt)| {
                        let est = estimate(&tensor, &d, s)?;
                        pi_win = est.cells[0].pi_win;
                        let draws = multiplier_draws(&est, &bcfg)?;
                        let ci = intervals(&est, &draws, &bcfg)?.cells[0].pointwise;
                        Ok(Outcome {
                            theta: est.cells[0].theta,
                            covered: ci.contains(gt.theta_star),
                            width: ci.width(),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok((outs, pi_win))
            })
            .collect::<Result<Vec<_>>>()?;
        let n = trials.len();
        let mean_pi_win = mean(&trials.iter().map(|x| x.1).collect::<Vec<_>>());
        for (s, kind) in cfg.selectors.iter().enumerate() {
            let coverage = trials.iter().filter(|x| x.0[s].covered).count() as f64 / n as f64;
            let widths: Vec<f64> = trials.iter().map(|x| x.0[s].width).collect();
            let thetas: Vec<f64> = trials.iter().map(|x| x.0[s].theta).collect();
            let mean_width = mean(&widths);
            let true_sd = sample_sd(&thetas);
            let implied_sd = mean_width / 2.0 / z;
            rows.push(StudyBRow {
                delta,
                selector: selector_name(*kind).into(),
                n_sim: n,
                theta_star: gts[s].theta_star,
                theta_star_mc_se: gts[s].mc_se,
                coverage,
                coverage_se: coverage_se(coverage, n),
                mean_width,
                mean_pi_win,
                true_sd,
                implied_sd,
                sd_underestimation: if true_sd > 0.0 { 1.0 - implied_sd / true_sd } else { 0.0 },
            });
        }
    }
    Ok(StudyBResult {
        config: cfg.clone(),
        rows,
    })
}
