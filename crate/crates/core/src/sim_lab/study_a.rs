//! Coverage and width of the multiplier-bootstrap interval over an
//! `M x K x R` grid, with an optional item-bootstrap comparison.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{coverage_se, ground_truth, rows_to_csv, sample_tensor, DgpSpec, MonteCarloConfig, ProtocolConfig, TrialMethod, TrialResult};
use crate::baselines::item_bootstrap;
use crate::bootstrap::{intervals, multiplier_draws, BootstrapConfig};
use crate::error::{Error, Result};
use crate::estimator::estimate;
use crate::rng::{derive_indexed, derive_seed};
use crate::selector::SelectorSpec;
use crate::stats::{mean, ols_slope, sample_sd};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyAConfig {
    /// `(M, K, R)` configurations.
    pub grid: Vec<(usize, usize, usize)>,
    pub mc: MonteCarloConfig,
    /// Qualities are equally spaced over `[0, quality_top]`.
    pub quality_top: f64,
    /// Also run the item bootstrap with this many resamples per trial.
    pub item_bootstrap_resamples: Option<usize>,
}

impl StudyAConfig {
    pub fn new(grid: Vec<(usize, usize, usize)>, mc: MonteCarloConfig) -> Self {
        Self {
            grid,
            mc,
            quality_top: 0.3,
            item_bootstrap_resamples: None,
        }
    }

    /// The full sweep: `M in {100, 200, 500, 1000, 2000}`, `K in {2, 5, 10}`, `R = 5`.
    pub fn full_grid() -> Vec<(usize, usize, usize)> {
        let mut g = Vec::new();
        for m in [100, 200, 500, 1000, 2000] {
            for k in [2, 5, 10] {
                g.push((m, k, 5));
            }
        }
        g
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyARow {
    pub m: usize,
    pub k: usize,
    pub r: usize,
    pub n_sim: usize,
    pub theta_star: f64,
    pub theta_star_mc_se: f64,
    pub coverage: f64,
    pub coverage_se: f64,
    pub mean_width: f64,
    pub sd_theta: f64,
    pub item_boot_coverage: Option<f64>,
    pub item_boot_width: Option<f64>,
    /// Multiplier width over item-bootstrap width.
    pub width_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidthSlope {
    pub k: usize,
    pub r: usize,
    /// Least-squares slope of `log(width)` on `log(M)`.
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyAResult {
    pub config: StudyAConfig,
    pub rows: Vec<StudyARow>,
    pub slopes: Vec<WidthSlope>,
}

impl StudyAResult {
    pub fn row(&self, m: usize, k: usize, r: usize) -> Option<&StudyARow> {
        self.rows.iter().find(|x| x.m == m && x.k == k && x.r == r)
    }

    pub fn slope(&self, k: usize, r: usize) -> Option<f64> {
        self.slopes.iter().find(|s| s.k == k && s.r == r).map(|s| s.slope)
    }

    pub fn to_csv(&self) -> Result<String> {
        rows_to_csv(&self.rows)
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "study": "a",
            "config": self.config,
            "rows": self.rows,
            "slopes": self.slopes,
        })
    }
}

struct TrialA {
    main: TrialResult,
    item: Option<(bool, f64)>,
}

/// Runs every configuration of the grid. Trial `t` of `(M, K)` draws the same
/// tensor and the same leading splits for every `R`, so rows that differ only
/// in `R` are directly comparable.
pub fn run_study_a(cfg: &StudyAConfig) -> Result<StudyAResult> {
    if cfg.grid.is_empty() {
        return Err(Error::invalid("study A grid is empty"));
    }
    cfg.mc.check()?;
    let mc = &cfg.mc;
    let selector = SelectorSpec::softmax(mc.tau);
    let mut rows = Vec::with_capacity(cfg.grid.len());
    for &(m, k, r) in &cfg.grid {
        if m < 2 || k == 0 || r == 0 {
            return Err(Error::invalid(format!("bad study A configuration M={m} K={k} R={r}")));
        }
        let protocol = ProtocolConfig::new(r, mc.rho_score, selector);
        let base = DgpSpec::equally_spaced(m, k, cfg.quality_top, 0);
        let gt_seed = derive_seed(mc.seed, &format!("study-a-gt:{m}:{k}:{r}"));
        let gt = ground_truth(&base.with_seed(gt_seed), &protocol, TrialMethod::Siren, mc.n_gt)?;
        let label = format!("study-a:{m}:{k}");
        let trials = (0..mc.n_sim)
            .into_par_iter()
            .map(|t| {
                let ts = derive_indexed(mc.seed, &label, t as u64);
                let tensor = sample_tensor(&base.with_seed(derive_seed(ts, "dgp")))?;
                let design = protocol.design(m, derive_seed(ts, "design"))?;
                let est = estimate(&tensor, &design, &selector)?;
                let bcfg = BootstrapConfig::new(mc.n_boot, mc.alpha, derive_seed(ts, "bootstrap"));
                let draws = multiplier_draws(&est, &bcfg)?;
                let ci = intervals(&est, &draws, &bcfg)?.cells[0].pointwise;
                let item = match cfg.item_bootstrap_resamples {
                    Some(n) => {
                        let ib = item_bootstrap(&tensor, &design, &selector, n, mc.alpha, derive_seed(ts, "item-bootstrap"))?;
                        let ci = ib[0].ci.expect("item bootstrap always yields an interval");
                        Some((ci.contains(gt.theta_star), ci.width()))
                    }
                    None => None,
                };
                let theta = est.cells[0].theta;
                Ok(TrialA {
                    main: TrialResult {
                        theta_tilde: theta,
                        ci,
                        covered: ci.contains(gt.theta_star),
                        width: ci.width(),
                        pi_win: est.cells[0].pi_win,
                        estimates: Default::default(),
                    },
                    item,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let n = trials.len();
        let coverage = trials.iter().filter(|x| x.main.covered).count() as f64 / n as f64;
        let widths: Vec<f64> = trials.iter().map(|x| x.main.width).collect();
        let thetas: Vec<f64> = trials.iter().map(|x| x.main.theta_tilde).collect();
        let mean_width = mean(&widths);
        let (item_boot_coverage, item_boot_width) = if cfg.item_bootstrap_resamples.is_some() {
            let items: Vec<(bool, f64)> = trials.iter().filter_map(|x| x.item).collect();
            let cov = items.iter().filter(|x| x.0).count() as f64 / n as f64;
            let w: Vec<f64> = items.iter().map(|x| x.1).collect();
            (Some(cov), Some(mean(&w)))
        } else {
            (None, None)
        };
        rows.push(StudyARow {
            m,
            k,
            r,
            n_sim: n,
            theta_star: gt.theta_star,
            theta_star_mc_se: gt.mc_se,
            coverage,
            coverage_se: coverage_se(coverage, n),
            mean_width,
            sd_theta: sample_sd(&thetas),
            item_boot_coverage,
            item_boot_width,
            width_ratio: item_boot_width.map(|w| mean_width / w),
        });
    }
    let slopes = width_slopes(&rows);
    Ok(StudyAResult {
        config: cfg.clone(),
        rows,
        slopes,
    })
}

fn width_slopes(rows: &[StudyARow]) -> Vec<WidthSlope> {
    let mut keys: Vec<(usize, usize)> = rows.iter().map(|r| (r.k, r.r)).collect();
    keys.sort_unstable();
    keys.dedup();
    keys.into_iter()
        .filter_map(|(k, r)| {
            let pts: Vec<(f64, f64)> = rows
                .iter()
                .filter(|x| x.k == k && x.r == r && x.mean_width > 0.0)
                .map(|x| ((x.m as f64).ln(), x.mean_width.ln()))
                .collect();
            let distinct = pts.iter().any(|p| p.0 != pts[0].0);
            if pts.len() < 2 || !distinct {
                return None;
            }
            let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
            Some(WidthSlope {
                k,
                r,
                slope: ols_slope(&x, &y),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> MonteCarloConfig {
        MonteCarloConfig {
            n_sim: 40,
            n_gt: 100,
            n_boot: 100,
            ..Default::default()
        }
    }

    #[test]
    fn empty_grid_rejected() {
        assert!(run_study_a(&StudyAConfig::new(vec![], small())).is_err());
    }

    #[test]
    fn smoke_run_is_deterministic() {
        let cfg = StudyAConfig::new(vec![(60, 2, 3), (120, 2, 3)], small());
        let a = run_study_a(&cfg).unwrap();
        let b = run_study_a(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows.len(), 2);
        assert_eq!(a.slopes.len(), 1);
        assert!(a.slopes[0].slope < 0.0);
        assert!(a.rows.iter().all(|r| r.mean_width > 0.0 && (0.0..=1.0).contains(&r.coverage)));
    }
}
