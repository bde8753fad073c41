//! Synthetic Bernoulli item-response benchmarks with known ground truth, and
//! the coverage / nonregularity / optimism studies built on them.
//!
//! Item `i` has difficulty `delta_i ~ Uniform(low, high)`, artifact `k` has
//! quality `q_k`, and `Z_ik ~ Bernoulli(sigmoid(q_k - delta_i))`.

mod study_a;
mod study_b;
mod study_c;
mod summary;

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use study_a::{run_study_a, StudyAConfig, StudyAResult, StudyARow, WidthSlope};
pub use study_b::{run_study_b, StudyBConfig, StudyBResult, StudyBRow};
pub use study_c::{run_study_c, Pairing, StudyCConfig, StudyCResult, StudyCRow};
pub use summary::{directional_summary, DirectionalSummary};

use crate::baselines::m1_naive_max;
use crate::bootstrap::Interval;
use crate::error::{Error, Result};
use crate::estimator::estimate_theta;
use crate::rng::{self, derive_indexed, derive_seed};
use crate::score_store::{ScoreMatrix, ScoreTensor, TensorCell};
use crate::selector::SelectorSpec;
use crate::split_engine::{SplitDesign, WeightRule};
use crate::stats::{mean, sample_sd, sigmoid, softplus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub n_items: usize,
    pub qualities: Vec<f64>,
    pub difficulty_low: f64,
    pub difficulty_high: f64,
    pub seed: u64,
}

impl DgpSpec {
    pub fn new(n_items: usize, qualities: Vec<f64>, seed: u64) -> Self {
        Self {
            n_items,
            qualities,
            difficulty_low: -2.0,
            difficulty_high: 2.0,
            seed,
        }
    }

    /// `k` qualities equally spaced over `[0, top]` (a single artifact sits at 0).
    pub fn equally_spaced(n_items: usize, k: usize, top: f64, seed: u64) -> Self {
        let qualities = (0..k)
            .map(|j| if k > 1 { top * j as f64 / (k - 1) as f64 } else { 0.0 })
            .collect();
        Self::new(n_items, qualities, seed)
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn check(&self) -> Result<()> {
        if !(self.difficulty_low < self.difficulty_high) {
            return Err(Error::invalid("difficulty_low must be below difficulty_high"));
        }
        if self.qualities.is_empty() {
            return Err(Error::invalid("need at least one artifact quality"));
        }
        if self.qualities.iter().any(|q| q.is_nan()) {
            return Err(Error::invalid("qualities must not be NaN"));
        }
        if self.n_items == 0 {
            return Err(Error::invalid("need at least one item"));
        }
        Ok(())
    }

    /// Population mean score of an artifact of quality `q`:
    /// `E[sigmoid(q - delta)] = (softplus(q - low) - softplus(q - high)) / (high - low)`.
    pub fn population_mean(&self, q: f64) -> f64 {
        if q == f64::INFINITY {
            return 1.0;
        }
        if q == f64::NEG_INFINITY {
            return 0.0;
        }
        (softplus(q - self.difficulty_low) - softplus(q - self.difficulty_high))
            / (self.difficulty_high - self.difficulty_low)
    }
}

/// Item difficulties for `dgp`.
pub fn sample_difficulties(dgp: &DgpSpec) -> Vec<f64> {
    let mut rng = rng::substream(dgp.seed, "difficulty", 0);
    let span = dgp.difficulty_high - dgp.difficulty_low;
    (0..dgp.n_items)
        .map(|_| dgp.difficulty_low + span * rng.random::<f64>())
        .collect()
}

/// Bernoulli responses given difficulties. Artifact `k` reads substream `k` of
/// `(seed, label)`, so separate labels give independent response tables over
/// the same items.
pub fn sample_responses(difficulties: &[f64], qualities: &[f64], seed: u64, label: &str) -> ScoreMatrix {
    let columns = qualities
        .iter()
        .enumerate()
        .map(|(k, &q)| {
            let mut rng = rng::substream(seed, label, k as u64);
            difficulties
                .iter()
                .map(|&d| {
                    let p = sigmoid(q - d);
                    if rng.random::<f64>() < p {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    ScoreMatrix::from_columns(difficulties.len(), columns).expect("columns have equal length")
}

/// One-cell tensor (system `sim`, budget `0`) drawn from `dgp`.
pub fn sample_tensor(dgp: &DgpSpec) -> Result<ScoreTensor> {
    dgp.check()?;
    let delta = sample_difficulties(dgp);
    let z = sample_responses(&delta, &dgp.qualities, dgp.seed, "response");
    ScoreTensor::single_cell("sim", "0", z)
}

/// Multi-cell panel sharing one item pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelSpec {
    pub systems: Vec<String>,
    pub budgets: Vec<String>,
    /// Qualities per cell, system-major (`systems.len() * budgets.len()` entries).
    pub cell_qualities: Vec<Vec<f64>>,
    pub n_items: usize,
    pub seed: u64,
}

pub fn sample_panel(spec: &PanelSpec) -> Result<ScoreTensor> {
    let n_cells = spec.systems.len() * spec.budgets.len();
    if spec.cell_qualities.len() != n_cells {
        return Err(Error::invalid(format!(
            "{} quality vectors for {n_cells} cells",
            spec.cell_qualities.len()
        )));
    }
    let dgp = DgpSpec::new(spec.n_items, vec![0.0], spec.seed);
    dgp.check()?;
    let delta = sample_difficulties(&dgp);
    let items: Arc<[String]> = (0..spec.n_items).map(|i| i.to_string()).collect();
    let mut cells = Vec::with_capacity(n_cells);
    for (s, system) in spec.systems.iter().enumerate() {
        for (b, budget) in spec.budgets.iter().enumerate() {
            let q = &spec.cell_qualities[s * spec.budgets.len() + b];
            let label = format!("response:{system}:{budget}");
            cells.push(TensorCell {
                system: system.clone(),
                budget: budget.clone(),
                artifacts: (0..q.len()).map(|k| format!("a{k}")).collect(),
                items: items.clone(),
                scores: sample_responses(&delta, q, spec.seed, &label),
                eval_scores: None,
            });
        }
    }
    ScoreTensor::new(spec.budgets.clone(), cells)
}

/// Repeated-split protocol settings used inside simulations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub n_splits: usize,
    pub rho_score: f64,
    pub weight_rule: WeightRule,
    pub selector: SelectorSpec,
}

impl ProtocolConfig {
    pub fn new(n_splits: usize, rho_score: f64, selector: SelectorSpec) -> Self {
        Self {
            n_splits,
            rho_score,
            weight_rule: WeightRule::Uniform,
            selector,
        }
    }

    pub fn design(&self, n_items: usize, seed: u64) -> Result<SplitDesign> {
        SplitDesign::generate(n_items, self.n_splits, self.rho_score, self.weight_rule, seed)
    }
}

/// Whose expectation a ground truth is.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TrialMethod {
    /// The repeated-split estimate under the protocol's selector.
    Siren,
    /// Same-data best-of (M1).
    NaiveMax,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub theta_star: f64,
    pub n_replications: usize,
    pub sd: f64,
    /// `sd / sqrt(n_replications)`.
    pub mc_se: f64,
}

impl GroundTruth {
    pub fn from_values(values: &[f64]) -> Self {
        let sd = sample_sd(values);
        Self {
            theta_star: mean(values),
            n_replications: values.len(),
            sd,
            mc_se: sd / (values.len() as f64).sqrt(),
        }
    }
}

/// Monte Carlo mean of a method's estimate over `n_gt` fresh tensors, each
/// with a fresh split design. Replication `j` is seeded from `(dgp.seed, j)`.
pub fn ground_truth(
    dgp: &DgpSpec,
    protocol: &ProtocolConfig,
    method: TrialMethod,
    n_gt: usize,
) -> Result<GroundTruth> {
    if n_gt < 100 {
        return Err(Error::invalid(format!("ground truth needs n_gt >= 100, got {n_gt}")));
    }
    dgp.check()?;
    let values = (0..n_gt)
        .into_par_iter()
        .map(|j| {
            let rep = derive_indexed(dgp.seed, "ground-truth", j as u64);
            let t = sample_tensor(&dgp.with_seed(derive_seed(rep, "dgp")))?;
            match method {
                TrialMethod::NaiveMax => m1_naive_max(&t, &t.cell_refs()[0]),
                TrialMethod::Siren => {
                    let d = protocol.design(dgp.n_items, derive_seed(rep, "design"))?;
                    Ok(estimate_theta(&t, &d, &protocol.selector, None)?[0])
                }
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(GroundTruth::from_values(&values))
}

/// Outcome of one simulated trial of the repeated-split protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub theta_tilde: f64,
    pub ci: Interval,
    pub covered: bool,
    pub width: f64,
    pub pi_win: f64,
    /// Other methods' point estimates on the same trial, by name.
    pub estimates: BTreeMap<String, f64>,
}

/// Shared Monte Carlo settings of the studies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloConfig {
    pub n_sim: usize,
    pub n_gt: usize,
    pub n_boot: usize,
    pub alpha: f64,
    pub rho_score: f64,
    pub tau: f64,
    pub seed: u64,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        Self {
            n_sim: 2000,
            n_gt: 3000,
            n_boot: 500,
            alpha: 0.05,
            rho_score: 0.5,
            tau: 0.1,
            seed: 20_240_601,
        }
    }
}

impl MonteCarloConfig {
    pub fn check(&self) -> Result<()> {
        if self.n_sim == 0 {
            return Err(Error::invalid("n_sim must be positive"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid("alpha must lie in (0, 1)"));
        }
        if !(self.tau > 0.0) {
            return Err(Error::invalid("tau must be positive"));
        }
        Ok(())
    }
}

/// Binomial standard error of an empirical coverage.
pub fn coverage_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Write rows as CSV with a header.
pub(crate) fn rows_to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
