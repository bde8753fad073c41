//! End-to-end report: design, estimate, bootstrap, baselines and diagnostics
//! in one serializable object that is a pure function of
//! `(tensor, config, seed)`.

use serde::{Deserialize, Serialize};

use crate::baselines::{baseline_report, item_bootstrap, BaselineMethod, BaselineReport};
use crate::bootstrap::{contrast_ci, intervals, multiplier_draws, BootstrapConfig, ContrastResult, ContrastSpec, Interval};
use crate::error::{Error, Result};
use crate::estimator::estimate;
use crate::rng::derive_seed;
use crate::score_store::ScoreTensor;
use crate::selector::{ResolvedSelector, SelectorSpec};
use crate::split_engine::{SplitDesign, WeightRule};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    pub n_splits: usize,
    pub rho_score: f64,
    pub selector: SelectorSpec,
    pub weight_rule: WeightRule,
    pub n_boot: usize,
    pub alpha: f64,
    pub seed: u64,
    /// Run M1..M4 alongside the main estimate.
    pub baselines: bool,
    /// Item-bootstrap resamples; 0 skips it.
    pub item_bootstrap_resamples: usize,
    pub contrasts: Vec<ContrastSpec>,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            n_splits: 10,
            rho_score: 0.5,
            selector: SelectorSpec::softmax(1.0),
            weight_rule: WeightRule::Uniform,
            n_boot: 2000,
            alpha: 0.05,
            seed: 0,
            baselines: true,
            item_bootstrap_resamples: 0,
            contrasts: Vec::new(),
        }
    }
}

impl ReportConfig {
    pub fn check(&self) -> Result<()> {
        if self.n_splits == 0 {
            return Err(Error::invalid("R must be at least 1"));
        }
        if !(self.rho_score > 0.0 && self.rho_score < 1.0) {
            return Err(Error::invalid(format!(
                "rho_score must lie in (0, 1), got {}",
                self.rho_score
            )));
        }
        self.selector.check()?;
        BootstrapConfig::new(self.n_boot, self.alpha, 0).check()?;
        for c in &self.contrasts {
            c.check()?;
        }
        Ok(())
    }

    pub fn seeds(&self) -> ReportSeeds {
        let s = self.seed;
        let design = derive_seed(s, "design");
        ReportSeeds {
            master: s,
            design,
            bootstrap: derive_seed(s, "bootstrap"),
            // M3 reuses the first split of the main design.
            m3: design,
            m4: derive_seed(s, "m4"),
            item_bootstrap: derive_seed(s, "item-bootstrap"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportSeeds {
    pub master: u64,
    pub design: u64,
    pub bootstrap: u64,
    pub m3: u64,
    pub m4: u64,
    pub item_bootstrap: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSummary {
    pub n_splits: usize,
    pub n_score: usize,
    pub n_eval: usize,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportCell {
    pub system: String,
    pub budget: String,
    pub n_artifacts: usize,
    pub theta: f64,
    pub pointwise: Interval,
    pub band: Interval,
    pub draws_sd: f64,
    pub pi_win: f64,
    pub selector: ResolvedSelector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub tensor_fingerprint: String,
    pub n_items: usize,
    pub budget_grid: Vec<String>,
    pub config: ReportConfig,
    pub seeds: ReportSeeds,
    pub design: DesignSummary,
    pub quantile_rule: String,
    pub interval_kind: String,
    pub band_quantile: f64,
    pub cells: Vec<ReportCell>,
    pub contrasts: Vec<ContrastResult>,
    pub baselines: Vec<BaselineReport>,
    pub warnings: Vec<String>,
}

/// One row of the flat estimates table.
#[derive(Debug, Clone, PartialEq, Serialize)]
struct FlatRow<'a> {
    method: &'a str,
    system: &'a str,
    budget: &'a str,
    estimate: f64,
    lo_pt: Option<f64>,
    hi_pt: Option<f64>,
    lo_band: Option<f64>,
    hi_band: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct DiagnosticRow<'a> {
    system: &'a str,
    budget: &'a str,
    n_artifacts: usize,
    pi_win: f64,
    selector: &'a str,
    tau: Option<f64>,
    draws_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct ContrastRow<'a> {
    contrast: &'a str,
    estimate: f64,
    lo: f64,
    hi: f64,
}

fn to_csv<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

impl Report {
    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn cell(&self, system: &str, budget: &str) -> Option<&ReportCell> {
        self.cells.iter().find(|c| c.system == system && c.budget == budget)
    }

    /// Main estimates and every baseline in one table, keyed by `method`.
    pub fn estimates_csv(&self) -> Result<String> {
        let main = self.cells.iter().map(|c| FlatRow {
            method: "siren",
            system: &c.system,
            budget: &c.budget,
            estimate: c.theta,
            lo_pt: Some(c.pointwise.lo),
            hi_pt: Some(c.pointwise.hi),
            lo_band: Some(c.band.lo),
            hi_band: Some(c.band.hi),
        });
        let base = self.baselines.iter().flat_map(|b| {
            b.cells.iter().map(move |c| FlatRow {
                method: b.method.name(),
                system: &c.system,
                budget: &c.budget,
                estimate: c.estimate,
                lo_pt: c.ci.map(|i| i.lo),
                hi_pt: c.ci.map(|i| i.hi),
                lo_band: None,
                hi_band: None,
            })
        });
        to_csv(main.chain(base))
    }

    pub fn diagnostics_csv(&self) -> Result<String> {
        to_csv(self.cells.iter().map(|c| {
            let (selector, tau) = match c.selector {
                ResolvedSelector::Softmax { tau } => ("softmax", Some(tau)),
                ResolvedSelector::Hard => ("hard", None),
            };
            DiagnosticRow {
                system: &c.system,
                budget: &c.budget,
                n_artifacts: c.n_artifacts,
                pi_win: c.pi_win,
                selector,
                tau,
                draws_sd: c.draws_sd,
            }
        }))
    }

    pub fn contrasts_csv(&self) -> Result<String> {
        to_csv(self.contrasts.iter().map(|c| ContrastRow {
            contrast: &c.contrast,
            estimate: c.estimate,
            lo: c.interval.lo,
            hi: c.interval.hi,
        }))
    }
}

/// Runs design, estimate, bootstrap, contrasts and baselines.
pub fn build_report(t: &ScoreTensor, cfg: &ReportConfig) -> Result<Report> {
    cfg.check()?;
    let seeds = cfg.seeds();
    let mut warnings = Vec::new();
    let design = SplitDesign::generate(t.n_items(), cfg.n_splits, cfg.rho_score, cfg.weight_rule, seeds.design)?;
    let est = estimate(t, &design, &cfg.selector)?;
    let bcfg = BootstrapConfig::new(cfg.n_boot, cfg.alpha, seeds.bootstrap);
    warnings.extend(bcfg.warnings());
    let draws = multiplier_draws(&est, &bcfg)?;
    let boot = intervals(&est, &draws, &bcfg)?;
    let contrasts = cfg
        .contrasts
        .iter()
        .map(|c| contrast_ci(&est, &draws, c, &bcfg))
        .collect::<Result<Vec<_>>>()?;

    let mut baselines = Vec::new();
    if cfg.baselines {
        baselines.push(baseline_report(t, BaselineMethod::M1, cfg.n_splits, cfg.rho_score, cfg.alpha, 0)?);
        baselines.push(baseline_report(t, BaselineMethod::M2, cfg.n_splits, cfg.rho_score, cfg.alpha, 0)?);
        baselines.push(baseline_report(t, BaselineMethod::M3, 1, cfg.rho_score, cfg.alpha, seeds.m3)?);
        if cfg.n_splits >= 2 {
            baselines.push(baseline_report(t, BaselineMethod::M4, cfg.n_splits, cfg.rho_score, cfg.alpha, seeds.m4)?);
        } else {
            warnings.push("M4 skipped: it needs at least two splits".into());
        }
    }
    if cfg.item_bootstrap_resamples > 0 {
        let cells = item_bootstrap(
            t,
            &design,
            &cfg.selector,
            cfg.item_bootstrap_resamples,
            cfg.alpha,
            seeds.item_bootstrap,
        )?;
        baselines.push(BaselineReport {
            method: BaselineMethod::ItemBootstrap,
            cells,
            seed: Some(seeds.item_bootstrap),
            n_splits: Some(cfg.n_splits),
            rho_score: Some(cfg.rho_score),
            n_resamples: Some(cfg.item_bootstrap_resamples),
        });
    }

    let cells = est
        .cells
        .iter()
        .zip(&boot.cells)
        .zip(&t.cells)
        .map(|((e, b), tc)| ReportCell {
            system: e.cell.system.clone(),
            budget: e.cell.budget.clone(),
            n_artifacts: tc.n_artifacts(),
            theta: e.theta,
            pointwise: b.pointwise,
            band: b.band,
            draws_sd: b.draws_sd,
            pi_win: e.pi_win,
            selector: e.selector,
        })
        .collect();

    Ok(Report {
        tool: "siren".into(),
        version: TOOL_VERSION.into(),
        tensor_fingerprint: t.fingerprint(),
        n_items: t.n_items(),
        budget_grid: t.budget_grid.clone(),
        config: cfg.clone(),
        seeds,
        design: DesignSummary {
            n_splits: design.n_splits(),
            n_score: design.n_score(),
            n_eval: design.n_eval(),
            weights: design.weights.clone(),
        },
        quantile_rule: boot.quantile_rule,
        interval_kind: boot.interval_kind,
        band_quantile: boot.band_quantile,
        cells,
        contrasts,
        baselines,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::score_store::ScoreMatrix;

    #[test]
    fn constant_tensor_gives_zero_width() {
        let t = ScoreTensor::single_cell("s", "1", ScoreMatrix::constant(40, 3, 0.7)).unwrap();
        let r = build_report(&t, &ReportConfig::default()).unwrap();
        let c = &r.cells[0];
        assert!((c.theta - 0.7).abs() < 1e-12);
        assert!(c.pointwise.width().abs() < 1e-12);
        assert!(c.band.width().abs() < 1e-12);
        for b in &r.baselines {
            assert!((b.cells[0].estimate - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn rerun_is_byte_identical() {
        let t = crate::sim_lab::sample_tensor(&crate::sim_lab::DgpSpec::equally_spaced(120, 4, 0.3, 9)).unwrap();
        let cfg = ReportConfig {
            seed: 17,
            n_boot: 300,
            item_bootstrap_resamples: 20,
            ..Default::default()
        };
        let a = build_report(&t, &cfg).unwrap();
        let b = build_report(&t, &cfg).unwrap();
        assert_eq!(a.to_json_string(), b.to_json_string());
        assert_eq!(a.estimates_csv().unwrap(), b.estimates_csv().unwrap());
        assert!(a.estimates_csv().unwrap().starts_with("method,system,budget,estimate,lo_pt,hi_pt,lo_band,hi_band\n"));
    }

    #[test]
    fn single_split_skips_m4() {
        let t = ScoreTensor::single_cell("s", "1", ScoreMatrix::constant(10, 2, 0.0)).unwrap();
        let cfg = ReportConfig {
            n_splits: 1,
            n_boot: 50,
            ..Default::default()
        };
        let r = build_report(&t, &cfg).unwrap();
        assert!(r.baselines.iter().all(|b| b.method != BaselineMethod::M4));
        assert!(r.warnings.iter().any(|w| w.contains("M4")));
    }

    #[test]
    fn invalid_config_rejected() {
        let t = ScoreTensor::single_cell("s", "1", ScoreMatrix::constant(10, 2, 0.0)).unwrap();
        let cfg = ReportConfig {
            rho_score: 1.0,
            ..Default::default()
        };
        assert!(build_report(&t, &cfg).is_err());
    }
}
