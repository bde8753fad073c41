//! Winner's-curse study: two systems of identical quality, system A tuned over
//! a larger shortlist than system B.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ground_truth, rows_to_csv, sample_difficulties, sample_responses, DgpSpec, MonteCarloConfig, ProtocolConfig, TrialMethod};
use crate::baselines::m1_naive_max;
use crate::bootstrap::{intervals, multiplier_draws, BootstrapConfig, Interval};
use crate::error::{Error, Result};
use crate::estimator::estimate;
use crate::rng::{derive_indexed, derive_seed};
use crate::score_store::{ScoreTensor, TensorCell};
use crate::selector::SelectorSpec;
use crate::stats::{mean, sample_sd};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pairing {
    /// Both systems answer the same items.
    Paired,
    /// Each system gets its own items, splits and multipliers.
    Independent,
}

impl std::str::FromStr for Pairing {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paired" => Ok(Self::Paired),
            "independent" => Ok(Self::Independent),
            _ => Err(Error::invalid(format!("unknown pairing `{s}` (paired|independent)"))),
        }
    }
}

impl std::fmt::Display for Pairing {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Paired => "paired",
            Self::Independent => "independent",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyCConfig {
    pub h_a: Vec<usize>,
    pub h_b: usize,
    pub n_items: usize,
    pub n_splits: usize,
    pub quality: f64,
    pub pairing: Pairing,
    pub mc: MonteCarloConfig,
}

impl StudyCConfig {
    pub fn new(h_a: Vec<usize>, mc: MonteCarloConfig) -> Self {
        Self {
            h_a,
            h_b: 3,
            n_items: 500,
            n_splits: 5,
            quality: 0.5,
            pairing: Pairing::Paired,
            mc,
        }
    }

    pub fn default_h() -> Vec<usize> {
        vec![3, 5, 10, 20, 50]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyCRow {
    pub h_a: usize,
    pub h_b: usize,
    pub pairing: Pairing,
    pub n_sim: usize,
    /// Population mean shared by every artifact.
    pub theta_star: f64,
    /// Monte Carlo mean of the repeated-split estimate for system A, if requested.
    pub theta_star_mc: Option<f64>,
    pub m1_bias_pp: f64,
    pub siren_bias_pp: f64,
    pub m1_bias_b_pp: f64,
    pub siren_bias_b_pp: f64,
    pub m1_fwr: f64,
    pub siren_fwr: f64,
    /// Fraction of trials in which the two SIREN intervals overlap.
    pub siren_overlap: f64,
    /// Single-artifact sd of the full-pool mean, times `sqrt(M)`.
    pub sigma_hat: f64,
    /// `sigma_hat * sqrt(2 log H_A) / sqrt(M)`, in percentage points.
    pub theory_pp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyCResult {
    pub config: StudyCConfig,
    pub rows: Vec<StudyCRow>,
}

impl StudyCResult {
    pub fn row(&self, h_a: usize) -> Option<&StudyCRow> {
        self.rows.iter().find(|r| r.h_a == h_a)
    }

    pub fn to_csv(&self) -> Result<String> {
        rows_to_csv(&self.rows)
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({ "study": "c", "config": self.config, "rows": self.rows })
    }
}

struct TrialC {
    m1: [f64; 2],
    siren: [f64; 2],
    ci: [Interval; 2],
    single: f64,
}

fn cell(system: &str, items: &Arc<[String]>, scores: crate::score_store::ScoreMatrix) -> TensorCell {
    TensorCell {
        system: system.into(),
        budget: "0".into(),
        artifacts: (0..scores.n_artifacts()).map(|k| format!("a{k}")).collect(),
        items: items.clone(),
        scores,
        eval_scores: None,
    }
}

pub fn run_study_c(cfg: &StudyCConfig) -> Result<StudyCResult> {
    cfg.mc.check()?;
    if cfg.h_a.is_empty() || cfg.h_a.contains(&0) || cfg.h_b == 0 {
        return Err(Error::invalid("study C shortlist sizes must be positive"));
    }
    let mc = &cfg.mc;
    let m = cfg.n_items;
    let selector = SelectorSpec::softmax(mc.tau);
    let protocol = ProtocolConfig::new(cfg.n_splits, mc.rho_score, selector);
    let items: Arc<[String]> = (0..m).map(|i| i.to_string()).collect();
    let base = DgpSpec::new(m, vec![cfg.quality], 0);
    base.check()?;
    let theta_star = base.population_mean(cfg.quality);
    let qb = vec![cfg.quality; cfg.h_b];

    let mut rows = Vec::with_capacity(cfg.h_a.len());
    for &h_a in &cfg.h_a {
        let qa = vec![cfg.quality; h_a];
        let theta_star_mc = if mc.n_gt >= 100 {
            let dgp = DgpSpec::new(m, qa.clone(), derive_seed(mc.seed, &format!("study-c-gt:{h_a}")));
            Some(ground_truth(&dgp, &protocol, TrialMethod::Siren, mc.n_gt)?.theta_star)
        } else {
            None
        };
        let label = format!("study-c:{}:{h_a}:{}", cfg.pairing, cfg.h_b);
        let trials = (0..mc.n_sim)
            .into_par_iter()
            .map(|t| {
                let ts = derive_indexed(mc.seed, &label, t as u64);
                let dgp_seed = derive_seed(ts, "dgp");
                let delta_a = sample_difficulties(&base.with_seed(dgp_seed));
                let za = sample_responses(&delta_a, &qa, dgp_seed, "response-A");
                let single = mean(za.column(0));
                let (m1, siren, ci) = match cfg.pairing {
                    Pairing::Paired => {
                        let zb = sample_responses(&delta_a, &qb, dgp_seed, "response-B");
                        let tensor = ScoreTensor::new(
                            vec!["0".into()],
                            vec![cell("A", &items, za), cell("B", &items, zb)],
                        )?;
                        let refs = tensor.cell_refs();
                        let m1 = [m1_naive_max(&tensor, &refs[0])?, m1_naive_max(&tensor, &refs[1])?];
                        let d = protocol.design(m, derive_seed(ts, "design"))?;
                        let est = estimate(&tensor, &d, &selector)?;
                        let bcfg = BootstrapConfig::new(mc.n_boot, mc.alpha, derive_seed(ts, "bootstrap"));
                        let res = intervals(&est, &multiplier_draws(&est, &bcfg)?, &bcfg)?;
                        (
                            m1,
                            [est.cells[0].theta, est.cells[1].theta],
                            [res.cells[0].pointwise, res.cells[1].pointwise],
                        )
                    }
                    Pairing::Independent => {
                        let seed_b = derive_seed(ts, "dgp-B");
                        let delta_b = sample_difficulties(&base.with_seed(seed_b));
                        let zb = sample_responses(&delta_b, &qb, seed_b, "response-B");
                        let mut m1 = [0.0; 2];
                        let mut siren = [0.0; 2];
                        let mut ci = [Interval { lo: 0.0, hi: 0.0 }; 2];
                        for (s, (name, z)) in [("A", za), ("B", zb)].into_iter().enumerate() {
                            let tensor = ScoreTensor::new(vec!["0".into()], vec![cell(name, &items, z)])?;
                            m1[s] = m1_naive_max(&tensor, &tensor.cell_refs()[0])?;
                            let d = protocol.design(m, derive_seed(ts, &format!("design-{name}")))?;
                            let est = estimate(&tensor, &d, &selector)?;
                            let bcfg = BootstrapConfig::new(
                                mc.n_boot,
                                mc.alpha,
                                derive_seed(ts, &format!("bootstrap-{name}")),
                            );
                            let res = intervals(&est, &multiplier_draws(&est, &bcfg)?, &bcfg)?;
                            siren[s] = est.cells[0].theta;
                            ci[s] = res.cells[0].pointwise;
                        }
                        (m1, siren, ci)
                    }
                };
                Ok(TrialC { m1, siren, ci, single })
            })
            .collect::<Result<Vec<_>>>()?;

        let n = trials.len() as f64;
        let avg = |f: &dyn Fn(&TrialC) -> f64| mean(&trials.iter().map(f).collect::<Vec<_>>());
        let frac = |f: &dyn Fn(&TrialC) -> bool| trials.iter().filter(|x| f(x)).count() as f64 / n;
        let singles: Vec<f64> = trials.iter().map(|x| x.single).collect();
        let sigma_hat = sample_sd(&singles) * (m as f64).sqrt();
        rows.push(StudyCRow {
            h_a,
            h_b: cfg.h_b,
            pairing: cfg.pairing,
            n_sim: trials.len(),
            theta_star,
            theta_star_mc,
            m1_bias_pp: 100.0 * (avg(&|x| x.m1[0]) - theta_star),
            siren_bias_pp: 100.0 * (avg(&|x| x.siren[0]) - theta_star),
            m1_bias_b_pp: 100.0 * (avg(&|x| x.m1[1]) - theta_star),
            siren_bias_b_pp: 100.0 * (avg(&|x| x.siren[1]) - theta_star),
            m1_fwr: frac(&|x| x.m1[0] > x.m1[1]),
            siren_fwr: frac(&|x| x.ci[0].disjoint_above(&x.ci[1])),
            siren_overlap: frac(&|x| x.ci[0].lo <= x.ci[1].hi && x.ci[1].lo <= x.ci[0].hi),
            sigma_hat,
            theory_pp: 100.0 * sigma_hat * (2.0 * (h_a as f64).ln()).sqrt() / (m as f64).sqrt(),
        });
    }
    Ok(StudyCResult {
        config: cfg.clone(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(h: Vec<usize>, pairing: Pairing) -> StudyCConfig {
        let mc = MonteCarloConfig {
            n_sim: 60,
            n_gt: 0,
            n_boot: 100,
            ..Default::default()
        };
        let mut c = StudyCConfig::new(h, mc);
        c.n_items = 100;
        c.pairing = pairing;
        c
    }

    #[test]
    fn zero_shortlist_rejected() {
        assert!(run_study_c(&small(vec![0], Pairing::Paired)).is_err());
    }

    #[test]
    fn both_pairings_run() {
        for p in [Pairing::Paired, Pairing::Independent] {
            let r = run_study_c(&small(vec![1, 8], p)).unwrap();
            assert_eq!(r.rows.len(), 2);
            assert_eq!(r.rows[0].theory_pp, 0.0);
            assert!(r.rows[1].m1_bias_pp > r.rows[0].m1_bias_pp);
            assert!((0.0..=1.0).contains(&r.rows[1].m1_fwr));
        }
    }

    #[test]
    fn pairing_parses() {
        assert_eq!("paired".parse::<Pairing>().unwrap(), Pairing::Paired);
        assert!("both".parse::<Pairing>().is_err());
    }
}
