//! Repeated (scoring, held-out) partitions of the item pool.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// How split weights are set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum WeightRule {
    #[default]
    Uniform,
    /// Proportional to the held-out size of each split.
    EvalSize,
}

impl std::str::FromStr for WeightRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(WeightRule::Uniform),
            "eval-size" | "eval_size" => Ok(WeightRule::EvalSize),
            other => Err(Error::invalid(format!("unknown weight rule `{other}`"))),
        }
    }
}

/// One partition. Indices are 0-based positions in the tensor's item list,
/// sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub score: Vec<usize>,
    pub eval: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitDesign {
    pub seed: u64,
    pub rho_score: f64,
    pub n_items: usize,
    pub splits: Vec<Split>,
    pub weights: Vec<f64>,
}

/// Size of the scoring subset: `floor(rho * M)`.
pub fn scoring_size(n_items: usize, rho_score: f64) -> usize {
    (rho_score * n_items as f64).floor() as usize
}

impl SplitDesign {
    /// Draws `n_splits` independent uniform partitions. Split `r` is a fresh
    /// permutation from substream `r` of the `(seed, "split")` generator: the
    /// first `floor(rho * M)` positions form the scoring set, the rest the
    /// held-out set.
    pub fn generate(
        n_items: usize,
        n_splits: usize,
        rho_score: f64,
        weight_rule: WeightRule,
        seed: u64,
    ) -> Result<Self> {
        if n_splits == 0 {
            return Err(Error::invalid("need at least one split"));
        }
        if !(rho_score > 0.0 && rho_score < 1.0) {
            return Err(Error::invalid(format!("rho_score must lie in (0, 1), got {rho_score}")));
        }
        let m = scoring_size(n_items, rho_score);
        if m == 0 || m >= n_items {
            return Err(Error::DegenerateSplit {
                n_items,
                n_score: m,
                n_eval: n_items.saturating_sub(m),
            });
        }
        let splits: Vec<Split> = (0..n_splits)
            .map(|r| {
                let mut perm: Vec<usize> = (0..n_items).collect();
                perm.shuffle(&mut rng::substream(seed, "split", r as u64));
                let mut score = perm[..m].to_vec();
                let mut eval = perm[m..].to_vec();
                score.sort_unstable();
                eval.sort_unstable();
                Split { score, eval }
            })
            .collect();
        let weights = weights_for(&splits, weight_rule);
        Ok(Self {
            seed,
            rho_score,
            n_items,
            splits,
            weights,
        })
    }

    /// A design from explicit index sets, with weights from `weight_rule`.
    pub fn from_splits(n_items: usize, splits: Vec<Split>, weight_rule: WeightRule) -> Result<Self> {
        let weights = weights_for(&splits, weight_rule);
        let rho_score = splits
            .first()
            .map_or(0.0, |s| s.score.len() as f64 / n_items.max(1) as f64);
        let d = Self {
            seed: 0,
            rho_score,
            n_items,
            splits,
            weights,
        };
        d.check()?;
        Ok(d)
    }

    pub fn n_splits(&self) -> usize {
        self.splits.len()
    }

    pub fn n_score(&self) -> usize {
        self.splits.first().map_or(0, |s| s.score.len())
    }

    pub fn n_eval(&self) -> usize {
        self.splits.first().map_or(0, |s| s.eval.len())
    }

    /// Lists violated design invariants (empty when the design is valid).
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.splits.is_empty() {
            out.push("no splits".to_string());
        }
        if self.weights.len() != self.splits.len() {
            out.push(format!(
                "{} weights for {} splits",
                self.weights.len(),
                self.splits.len()
            ));
        }
        let (m, l) = (self.n_score(), self.n_eval());
        for (r, s) in self.splits.iter().enumerate() {
            if s.score.is_empty() || s.eval.is_empty() {
                out.push(format!("split {r} has an empty side"));
            }
            if s.score.len() != m || s.eval.len() != l {
                out.push(format!("split {r} sizes differ from split 0"));
            }
            let mut seen = vec![false; self.n_items];
            for &i in s.score.iter().chain(&s.eval) {
                match seen.get_mut(i) {
                    None => out.push(format!("split {r}: index {i} out of range")),
                    Some(true) => out.push(format!("split {r}: index {i} repeated or shared")),
                    Some(flag) => *flag = true,
                }
            }
        }
        if self.weights.iter().any(|w| !(*w >= 0.0)) {
            out.push("negative weight".to_string());
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            out.push(format!("weights sum to {total}"));
        }
        out
    }

    fn check(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            return Ok(());
        }
        if let Some(s) = self.splits.iter().find(|s| s.score.is_empty() || s.eval.is_empty()) {
            return Err(Error::DegenerateSplit {
                n_items: self.n_items,
                n_score: s.score.len(),
                n_eval: s.eval.len(),
            });
        }
        Err(Error::invalid(v.join("; ")))
    }

    /// JSON in the audit format `{seed, rho_score, splits: [{score, eval}], weights}`.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "seed": self.seed,
            "rho_score": self.rho_score,
            "n_items": self.n_items,
            "splits": self.splits,
            "weights": self.weights,
        })
    }
}

fn weights_for(splits: &[Split], rule: WeightRule) -> Vec<f64> {
    let r = splits.len();
    match rule {
        WeightRule::Uniform => vec![1.0 / r as f64; r],
        WeightRule::EvalSize => {
            let total: usize = splits.iter().map(|s| s.eval.len()).sum();
            splits
                .iter()
                .map(|s| s.eval.len() as f64 / total as f64)
                .collect()
        }
    }
}
