//! Selection-aware reporting for tuned systems on a shared benchmark pool.
//!
//! The pipeline freezes a shortlist of artifacts per (system, budget) cell,
//! scores them on repeated disjoint (scoring, held-out) splits of the item
//! pool, turns scoring-set means into deployment weights with a selector, and
//! averages the weighted held-out means into a procedure-level estimate.
//! Uncertainty comes from an item-level Gaussian multiplier bootstrap over
//! plug-in influence contributions, shared across the whole grid.
//!
//! Module map:
//! - [`score_store`]: the dense score tensor and its file formats
//! - [`split_engine`]: repeated split designs
//! - [`selector`]: softmax / hard-argmax selectors and their Jacobians
//! - [`estimator`]: split scores, point estimates and influence contributions
//! - [`bootstrap`]: multiplier draws, pointwise intervals, bands and contrasts
//! - [`baselines`]: winner-based reporting baselines and the item bootstrap
//! - [`sim_lab`]: synthetic Bernoulli benchmarks and the validation studies
//! - [`reporting`]: the audited end-to-end report
//! - [`cli`]: the `siren` command-line tool

pub mod baselines;
pub mod bootstrap;
pub mod cli;
pub mod error;
pub mod estimator;
pub mod reporting;
pub mod rng;
pub mod score_store;
pub mod selector;
pub mod sim_lab;
pub mod split_engine;
pub mod stats;

pub use baselines::{BaselineCell, BaselineMethod, BaselineReport};
pub use bootstrap::{BootstrapConfig, BootstrapResult, ContrastSpec, MultiplierDraws};
pub use error::{Error, Result};
pub use estimator::{CellEstimate, SirenEstimate, SplitScores};
pub use reporting::{Report, ReportConfig};
pub use score_store::{CellRef, ScoreMatrix, ScoreTensor, TensorCell, Violation};
pub use selector::{ResolvedSelector, SelectorKind, SelectorSpec, WeightVector};
pub use split_engine::{Split, SplitDesign, WeightRule};
