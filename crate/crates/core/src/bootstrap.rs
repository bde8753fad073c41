//! Item-level Gaussian multiplier bootstrap over the whole (system, budget) grid.
//!
//! Draw `b` samples `zeta_1..zeta_M ~ N(0, 1)` once and forms, for every cell,
//! `G*_c = M^{-1/2} sum_i zeta_i (psi_ic - mean_c(psi))`. Sharing `zeta` across
//! cells keeps the dependence induced by scoring every cell on one item pool.
//!
//! Intervals are symmetric: `theta_c +/- Q(|G*_c|) / sqrt(M)` with `Q` the
//! nearest-rank upper `(1 - alpha)` quantile. The simultaneous band uses the same
//! quantile of `max_c |G*_c|`.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::SirenEstimate;
use crate::rng;
use crate::score_store::CellRef;
use crate::stats::{abs_quantile, mean, nearest_rank_sorted, sample_sd};

pub const QUANTILE_RULE: &str = "nearest-rank-upper";
pub const INTERVAL_KIND: &str = "symmetric-abs";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub n_draws: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            n_draws: 2000,
            alpha: 0.05,
            seed: 0,
        }
    }
}

impl BootstrapConfig {
    pub fn new(n_draws: usize, alpha: f64, seed: u64) -> Self {
        Self {
            n_draws,
            alpha,
            seed,
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.n_draws == 0 {
            return Err(Error::invalid("n_draws must be positive"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        Ok(())
    }

    /// Non-fatal configuration warnings.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.n_draws < 100 {
            w.push(format!(
                "only {} bootstrap draws; tail quantiles will be coarse",
                self.n_draws
            ));
        }
        w
    }
}

/// `n_draws x n_cells` matrix of multiplier-bootstrap values, draw-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierDraws {
    pub cells: Vec<CellRef>,
    pub n_items: usize,
    n_draws: usize,
    values: Vec<f64>,
}

impl MultiplierDraws {
    /// Wraps precomputed draws (row `b` holds draw `b` for every cell).
    pub fn from_values(cells: Vec<CellRef>, n_items: usize, values: Vec<f64>) -> Result<Self> {
        if cells.is_empty() || values.len() % cells.len() != 0 {
            return Err(Error::invalid("draw matrix does not match the cell count"));
        }
        Ok(Self {
            n_draws: values.len() / cells.len(),
            cells,
            n_items,
            values,
        })
    }

    pub fn n_draws(&self) -> usize {
        self.n_draws
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn draw(&self, b: usize) -> &[f64] {
        let c = self.n_cells();
        &self.values[b * c..(b + 1) * c]
    }

    pub fn cell_draws(&self, c: usize) -> Vec<f64> {
        (0..self.n_draws).map(|b| self.draw(b)[c]).collect()
    }
}

/// Generates the multiplier process. Draw `b` uses substream `b` of the
/// `(seed, "multiplier")` generator, so the matrix is identical however the
/// draws are scheduled.
pub fn multiplier_draws(est: &SirenEstimate, cfg: &BootstrapConfig) -> Result<MultiplierDraws> {
    cfg.check()?;
    let m = est.n_items;
    let n_cells = est.cells.len();
    if n_cells == 0 {
        return Err(Error::invalid("estimate has no cells"));
    }
    // Centered contributions, item-major so each item's cells are contiguous.
    let mut centered = vec![0.0; m * n_cells];
    for (c, cell) in est.cells.iter().enumerate() {
        if cell.psi.len() != m {
            return Err(Error::MissingInfluence(cell.cell.to_string()));
        }
        let bar = mean(&cell.psi);
        for (i, p) in cell.psi.iter().enumerate() {
            centered[i * n_cells + c] = p - bar;
        }
    }
    let scale = 1.0 / (m as f64).sqrt();
    let mut values = vec![0.0; cfg.n_draws * n_cells];
    values
        .par_chunks_mut(n_cells)
        .enumerate()
        .for_each(|(b, out)| {
            let mut rng = rng::substream(cfg.seed, "multiplier", b as u64);
            for row in centered.chunks_exact(n_cells) {
                let zeta: f64 = rng.sample(StandardNormal);
                for (acc, v) in out.iter_mut().zip(row) {
                    *acc += zeta * v;
                }
            }
            for acc in out.iter_mut() {
                *acc *= scale;
            }
        });
    Ok(MultiplierDraws {
        cells: est.cells.iter().map(|c| c.cell.clone()).collect(),
        n_items: m,
        n_draws: cfg.n_draws,
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn centered(center: f64, half_width: f64) -> Self {
        Self {
            lo: center - half_width,
            hi: center + half_width,
        }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn disjoint_above(&self, other: &Interval) -> bool {
        self.lo > other.hi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellInterval {
    pub system: String,
    pub budget: String,
    pub theta: f64,
    pub pointwise: Interval,
    pub band: Interval,
    /// Empirical sd of the cell's bootstrap draws.
    pub draws_sd: f64,
}

impl CellInterval {
    pub fn cell(&self) -> CellRef {
        CellRef::new(&self.system, &self.budget)
    }
}

/// Pre-specified linear contrast over grid cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastSpec {
    pub coefficients: Vec<(CellRef, f64)>,
}

impl ContrastSpec {
    pub fn new(coefficients: Vec<(CellRef, f64)>) -> Result<Self> {
        let spec = Self { coefficients };
        spec.check()?;
        Ok(spec)
    }

    /// Parses `system:budget:coef` terms, e.g. `["A:b2:+1", "A:b1:-1"]`.
    pub fn parse<S: AsRef<str>>(terms: &[S]) -> Result<Self> {
        let mut coefficients = Vec::with_capacity(terms.len());
        for term in terms {
            let term = term.as_ref();
            let bad = || Error::invalid(format!("contrast term `{term}` is not system:budget:coef"));
            let (cell, coef) = term.rsplit_once(':').ok_or_else(bad)?;
            let (system, budget) = cell.rsplit_once(':').ok_or_else(bad)?;
            let coef: f64 = coef.trim().parse().map_err(|_| bad())?;
            if system.is_empty() || budget.is_empty() {
                return Err(bad());
            }
            coefficients.push((CellRef::new(system, budget), coef));
        }
        Self::new(coefficients)
    }

    pub fn check(&self) -> Result<()> {
        if !self.coefficients.iter().any(|(_, c)| *c != 0.0) {
            return Err(Error::invalid("contrast needs at least one nonzero coefficient"));
        }
        if self.coefficients.iter().any(|(_, c)| !c.is_finite()) {
            return Err(Error::invalid("contrast coefficients must be finite"));
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        self.coefficients
            .iter()
            .map(|(cell, c)| format!("{cell}:{c:+}"))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastResult {
    pub contrast: String,
    pub estimate: f64,
    pub interval: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub alpha: f64,
    pub n_draws: usize,
    pub seed: u64,
    pub quantile_rule: String,
    pub interval_kind: String,
    /// `(1 - alpha)` quantile of `max_c |G*_c|`.
    pub band_quantile: f64,
    pub cells: Vec<CellInterval>,
    pub contrasts: Vec<ContrastResult>,
}

impl BootstrapResult {
    pub fn cell(&self, cell: &CellRef) -> Result<&CellInterval> {
        self.cells
            .iter()
            .find(|c| c.system == cell.system && c.budget == cell.budget)
            .ok_or_else(|| Error::UnknownCell(cell.to_string()))
    }
}

fn check_alignment(est: &SirenEstimate, draws: &MultiplierDraws) -> Result<()> {
    let same = draws.n_items == est.n_items
        && draws.cells.len() == est.cells.len()
        && draws.cells.iter().zip(&est.cells).all(|(a, b)| *a == b.cell);
    if same {
        Ok(())
    } else {
        Err(Error::MismatchedCells(
            "bootstrap draws were not produced from this estimate".into(),
        ))
    }
}

/// Pointwise intervals and the simultaneous band.
pub fn intervals(
    est: &SirenEstimate,
    draws: &MultiplierDraws,
    cfg: &BootstrapConfig,
) -> Result<BootstrapResult> {
    cfg.check()?;
    check_alignment(est, draws)?;
    let p = 1.0 - cfg.alpha;
    let root_m = (est.n_items as f64).sqrt();

    let mut max_abs: Vec<f64> = (0..draws.n_draws())
        .map(|b| draws.draw(b).iter().fold(0.0f64, |a, v| a.max(v.abs())))
        .collect();
    max_abs.sort_by(f64::total_cmp);
    let band_quantile = nearest_rank_sorted(&max_abs, p);

    let cells = est
        .cells
        .iter()
        .enumerate()
        .map(|(c, ce)| {
            let g = draws.cell_draws(c);
            let q = abs_quantile(&g, p);
            assert!(
                band_quantile >= q,
                "band quantile {band_quantile} below pointwise quantile {q}"
            );
            CellInterval {
                system: ce.cell.system.clone(),
                budget: ce.cell.budget.clone(),
                theta: ce.theta,
                pointwise: Interval::centered(ce.theta, q / root_m),
                band: Interval::centered(ce.theta, band_quantile / root_m),
                draws_sd: sample_sd(&g),
            }
        })
        .collect();

    Ok(BootstrapResult {
        alpha: cfg.alpha,
        n_draws: draws.n_draws(),
        seed: cfg.seed,
        quantile_rule: QUANTILE_RULE.into(),
        interval_kind: INTERVAL_KIND.into(),
        band_quantile,
        cells,
        contrasts: Vec::new(),
    })
}

/// Estimate and interval for a linear contrast of cell estimates.
pub fn contrast_ci(
    est: &SirenEstimate,
    draws: &MultiplierDraws,
    spec: &ContrastSpec,
    cfg: &BootstrapConfig,
) -> Result<ContrastResult> {
    cfg.check()?;
    spec.check()?;
    check_alignment(est, draws)?;
    let terms = spec
        .coefficients
        .iter()
        .map(|(cell, c)| est.cell_index(cell).map(|idx| (idx, *c)))
        .collect::<Result<Vec<_>>>()?;
    let estimate: f64 = terms.iter().map(|(idx, c)| c * est.cells[*idx].theta).sum();
    let series: Vec<f64> = (0..draws.n_draws())
        .map(|b| {
            let row = draws.draw(b);
            terms.iter().map(|(idx, c)| c * row[*idx]).sum()
        })
        .collect();
    let half = abs_quantile(&series, 1.0 - cfg.alpha) / (est.n_items as f64).sqrt();
    Ok(ContrastResult {
        contrast: spec.label(),
        estimate,
        interval: Interval::centered(estimate, half),
    })
}
