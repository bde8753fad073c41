//! The `siren` command-line tool.
//!
//! Settings resolve as: command-line flag (or `SIREN_SEED` for the seed), then
//! the `--config` JSON file, then built-in defaults.
//!
//! Exit codes: 0 success, 2 usage or input validation failure, 1 internal error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::baselines::{baseline_report, item_bootstrap, BaselineMethod, BaselineReport};
use crate::bootstrap::{contrast_ci, multiplier_draws, BootstrapConfig, ContrastSpec};
use crate::error::{Error, Result};
use crate::estimator::estimate;
use crate::reporting::{build_report, Report, ReportConfig};
use crate::score_store::{ScoreTensor, TensorFormat};
use crate::selector::{SelectorKind, SelectorSpec};
use crate::sim_lab::{
    run_study_a, run_study_b, run_study_c, MonteCarloConfig, Pairing, StudyAConfig, StudyBConfig, StudyCConfig,
};
use crate::split_engine::{SplitDesign, WeightRule};

#[derive(Debug, Parser)]
#[command(name = "siren", version, about = "Selection-aware intervals for tuned systems on a shared benchmark")]
struct Cli {
    /// Master seed; every random stream derives from it.
    #[arg(long, global = true, env = "SIREN_SEED")]
    seed: Option<u64>,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Full report: estimates, intervals, band, baselines, diagnostics.
    Report(ReportArgs),
    /// Run a simulation study.
    Simulate {
        #[command(subcommand)]
        study: Study,
    },
    /// Baseline estimates only.
    Baselines(BaselineArgs),
    /// Interval for a linear contrast of cells, e.g. `A:b2:+1 A:b1:-1`.
    Contrast(ContrastArgs),
    /// Check a score file and print its fingerprint.
    Validate(InputArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Score tensor file (long CSV or JSON).
    #[arg(long)]
    scores: PathBuf,
    /// Input format; guessed from the extension when omitted.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

impl InputArgs {
    fn load(&self) -> Result<ScoreTensor> {
        let format = match self.format {
            Some(FormatArg::Csv) => TensorFormat::Csv,
            Some(FormatArg::Json) => TensorFormat::Json,
            None => TensorFormat::from_path(&self.scores),
        };
        ScoreTensor::load(&self.scores, format)
    }
}

#[derive(Debug, Args)]
struct ProtocolArgs {
    /// JSON file with report settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of repeated splits.
    #[arg(long = "R")]
    n_splits: Option<usize>,
    /// Scoring fraction.
    #[arg(long = "rho")]
    rho_score: Option<f64>,
    /// Selector: softmax, hard or adaptive.
    #[arg(long)]
    selector: Option<String>,
    /// Softmax temperature.
    #[arg(long)]
    tau: Option<f64>,
    /// Winner-instability threshold of the adaptive selector.
    #[arg(long)]
    threshold: Option<f64>,
    /// Split weights: uniform or eval-size.
    #[arg(long)]
    weights: Option<String>,
    /// Multiplier-bootstrap draws.
    #[arg(long = "n-boot")]
    n_boot: Option<usize>,
    /// Miscoverage level.
    #[arg(long)]
    alpha: Option<f64>,
}

impl ProtocolArgs {
    fn resolve(&self, seed: Option<u64>) -> Result<ReportConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|source| Error::Io {
                    path: path.clone(),
                    source,
                })?;
                serde_json::from_str(&text).map_err(|e| Error::Parse {
                    path: path.clone(),
                    message: e.to_string(),
                })?
            }
            None => ReportConfig::default(),
        };
        if let Some(v) = self.n_splits {
            cfg.n_splits = v;
        }
        if let Some(v) = self.rho_score {
            cfg.rho_score = v;
        }
        if let Some(v) = &self.selector {
            cfg.selector.kind = v.parse::<SelectorKind>()?;
        }
        if let Some(v) = self.tau {
            cfg.selector.tau = v;
        }
        if let Some(v) = self.threshold {
            cfg.selector.instability_threshold = v;
        }
        if let Some(v) = &self.weights {
            cfg.weight_rule = v.parse::<WeightRule>()?;
        }
        if let Some(v) = self.n_boot {
            cfg.n_boot = v;
        }
        if let Some(v) = self.alpha {
            cfg.alpha = v;
        }
        if let Some(v) = seed {
            cfg.seed = v;
        }
        cfg.check()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    protocol: ProtocolArgs,
    /// Report JSON path. CSV tables are written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Item-bootstrap resamples to add as a baseline.
    #[arg(long = "item-bootstrap")]
    item_bootstrap: Option<usize>,
    /// Skip the M1-M4 baselines.
    #[arg(long = "no-baselines")]
    no_baselines: bool,
    /// Contrast as comma-separated `system:budget:coef` terms; repeatable.
    #[arg(long, allow_hyphen_values = true)]
    contrast: Vec<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    M1,
    M2,
    M3,
    M4,
    #[value(name = "item-bootstrap")]
    ItemBootstrap,
}

#[derive(Debug, Args)]
struct BaselineArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    protocol: ProtocolArgs,
    /// Methods to run (default: all of M1..M4).
    #[arg(long, value_enum, value_delimiter = ',')]
    method: Vec<MethodArg>,
    /// Resamples for the item bootstrap.
    #[arg(long, default_value_t = 1000)]
    resamples: usize,
    /// Output path; `.csv` writes the flat table, anything else JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ContrastArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    protocol: ProtocolArgs,
    #[arg(long)]
    out: Option<PathBuf>,
    /// `system:budget:coef` triples, or `coef system:budget` pairs.
    #[arg(allow_negative_numbers = true, num_args = 0..)]
    terms: Vec<String>,
}

#[derive(Debug, Args)]
struct SimArgs {
    #[arg(long = "n-sim")]
    n_sim: Option<usize>,
    #[arg(long = "n-gt")]
    n_gt: Option<usize>,
    /// Bootstrap draws per trial.
    #[arg(long = "n-boot")]
    n_boot: Option<usize>,
    /// Miscoverage level.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long = "rho")]
    rho_score: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    /// Study CSV path (summary JSON goes next to it).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl SimArgs {
    fn mc(&self, seed: Option<u64>, n_gt_default: usize) -> MonteCarloConfig {
        let d = MonteCarloConfig::default();
        MonteCarloConfig {
            n_sim: self.n_sim.unwrap_or(d.n_sim),
            n_gt: self.n_gt.unwrap_or(n_gt_default),
            n_boot: self.n_boot.unwrap_or(d.n_boot),
            alpha: self.alpha.unwrap_or(d.alpha),
            rho_score: self.rho_score.unwrap_or(d.rho_score),
            tau: self.tau.unwrap_or(d.tau),
            seed: seed.unwrap_or(d.seed),
        }
    }
}

#[derive(Debug, Subcommand)]
enum Study {
    /// Coverage and width over an M x K x R grid.
    A {
        #[arg(long = "M", value_delimiter = ',', default_values_t = [100usize, 200, 500, 1000, 2000])]
        m: Vec<usize>,
        #[arg(long = "K", value_delimiter = ',', default_values_t = [2usize, 5, 10])]
        k: Vec<usize>,
        #[arg(long = "R", value_delimiter = ',', default_values_t = [5usize])]
        r: Vec<usize>,
        /// Also run the item bootstrap with this many resamples.
        #[arg(long = "item-bootstrap")]
        item_bootstrap: Option<usize>,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Hard vs softmax vs adaptive over a margin grid.
    B {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        delta: Option<Vec<f64>>,
        #[arg(long = "M", default_value_t = 500)]
        m: usize,
        #[arg(long = "R", default_value_t = 5)]
        r: usize,
        #[arg(long, value_delimiter = ',')]
        selector: Option<Vec<String>>,
        #[arg(long, default_value_t = 0.10)]
        threshold: f64,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Winner's curse with unequal shortlists.
    C {
        #[arg(long = "H", value_delimiter = ',', default_values_t = [3usize, 5, 10, 20, 50])]
        h: Vec<usize>,
        #[arg(long = "HB", default_value_t = 3)]
        h_b: usize,
        #[arg(long = "M", default_value_t = 500)]
        m: usize,
        #[arg(long = "R", default_value_t = 5)]
        r: usize,
        #[arg(long, default_value = "paired")]
        pairing: String,
        #[command(flatten)]
        sim: SimArgs,
    },
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let outcome = std::panic::catch_unwind(|| match cli.threads {
        Some(0) => Err(Error::invalid("--threads must be positive")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::invalid(e.to_string()))
            .and_then(|pool| pool.install(|| dispatch(&cli))),
        None => dispatch(&cli),
    });
    match outcome {
        Ok(Ok(())) => 0,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
        Err(_) => 1,
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::MissingInfluence(_) | Error::MismatchedCells(_) => 1,
        _ => 2,
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Report(a) => cmd_report(a, cli.seed),
        Command::Simulate { study } => cmd_simulate(study, cli.seed),
        Command::Baselines(a) => cmd_baselines(a, cli.seed),
        Command::Contrast(a) => cmd_contrast(a, cli.seed),
        Command::Validate(a) => cmd_validate(a),
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

/// Normalizes contrast tokens to `system:budget:coef` triples. Accepts
/// comma-separated lists and `coef system:budget` pairs.
fn contrast_terms(tokens: &[String]) -> Result<Vec<String>> {
    let mut out = Vec::new();
    let mut pending: Option<f64> = None;
    for raw in tokens.iter().flat_map(|t| t.split(',')) {
        let tok = raw.trim().replace('\u{2212}', "-");
        if tok.is_empty() {
            continue;
        }
        if let Ok(c) = tok.parse::<f64>() {
            if pending.replace(c).is_some() {
                return Err(Error::invalid(format!("coefficient `{tok}` follows another coefficient")));
            }
        } else if let Some(c) = pending.take() {
            out.push(format!("{tok}:{c}"));
        } else {
            out.push(tok);
        }
    }
    if pending.is_some() {
        return Err(Error::invalid("contrast ends with a dangling coefficient"));
    }
    if out.is_empty() {
        return Err(Error::invalid("contrast has no terms"));
    }
    Ok(out)
}

fn print_report(r: &Report) {
    println!(
        "{:<16} {:<10} {:>8}  {:>19}  {:>19}  {:>6}  selector",
        "system", "budget", "theta", "pointwise", "band", "pi_win"
    );
    for c in &r.cells {
        let sel = match c.selector {
            crate::selector::ResolvedSelector::Hard => "hard".to_string(),
            crate::selector::ResolvedSelector::Softmax { tau } => format!("softmax({tau})"),
        };
        println!(
            "{:<16} {:<10} {:>8.4}  [{:>7.4}, {:>7.4}]  [{:>7.4}, {:>7.4}]  {:>6.3}  {sel}",
            c.system, c.budget, c.theta, c.pointwise.lo, c.pointwise.hi, c.band.lo, c.band.hi, c.pi_win
        );
    }
    for c in &r.contrasts {
        println!("contrast {}: {:.4} [{:.4}, {:.4}]", c.contrast, c.estimate, c.interval.lo, c.interval.hi);
    }
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
}

fn cmd_report(a: &ReportArgs, seed: Option<u64>) -> Result<()> {
    let mut cfg = a.protocol.resolve(seed)?;
    if let Some(n) = a.item_bootstrap {
        cfg.item_bootstrap_resamples = n;
    }
    if a.no_baselines {
        cfg.baselines = false;
    }
    for c in &a.contrast {
        cfg.contrasts.push(ContrastSpec::parse(&contrast_terms(std::slice::from_ref(c))?)?);
    }
    let t = a.input.load()?;
    let report = build_report(&t, &cfg)?;
    print_report(&report);
    if let Some(out) = &a.out {
        write(out, &report.to_json_string())?;
        write(&sibling(out, ".estimates.csv"), &report.estimates_csv()?)?;
        write(&sibling(out, ".diagnostics.csv"), &report.diagnostics_csv()?)?;
        if !report.contrasts.is_empty() {
            write(&sibling(out, ".contrasts.csv"), &report.contrasts_csv()?)?;
        }
    }
    Ok(())
}

fn cmd_baselines(a: &BaselineArgs, seed: Option<u64>) -> Result<()> {
    let cfg = a.protocol.resolve(seed)?;
    let t = a.input.load()?;
    let methods = if a.method.is_empty() {
        vec![MethodArg::M1, MethodArg::M2, MethodArg::M3, MethodArg::M4]
    } else {
        a.method.clone()
    };
    let seeds = cfg.seeds();
    let mut reports: Vec<BaselineReport> = Vec::new();
    for m in methods {
        let r = match m {
            MethodArg::M1 => baseline_report(&t, BaselineMethod::M1, cfg.n_splits, cfg.rho_score, cfg.alpha, 0)?,
            MethodArg::M2 => baseline_report(&t, BaselineMethod::M2, cfg.n_splits, cfg.rho_score, cfg.alpha, 0)?,
            MethodArg::M3 => baseline_report(&t, BaselineMethod::M3, 1, cfg.rho_score, cfg.alpha, seeds.m3)?,
            MethodArg::M4 => baseline_report(&t, BaselineMethod::M4, cfg.n_splits, cfg.rho_score, cfg.alpha, seeds.m4)?,
            MethodArg::ItemBootstrap => {
                let d = SplitDesign::generate(t.n_items(), cfg.n_splits, cfg.rho_score, cfg.weight_rule, seeds.design)?;
                BaselineReport {
                    method: BaselineMethod::ItemBootstrap,
                    cells: item_bootstrap(&t, &d, &cfg.selector, a.resamples, cfg.alpha, seeds.item_bootstrap)?,
                    seed: Some(seeds.item_bootstrap),
                    n_splits: Some(cfg.n_splits),
                    rho_score: Some(cfg.rho_score),
                    n_resamples: Some(a.resamples),
                }
            }
        };
        reports.push(r);
    }
    let mut csv = csv::Writer::from_writer(Vec::new());
    csv.write_record(["method", "system", "budget", "estimate", "lo_pt", "hi_pt"])?;
    for r in &reports {
        for c in &r.cells {
            let (lo, hi) = c.ci.map(|i| (i.lo.to_string(), i.hi.to_string())).unwrap_or_default();
            csv.write_record([r.method.name(), &c.system, &c.budget, &c.estimate.to_string(), &lo, &hi])?;
            match c.ci {
                Some(i) => println!("{:<15} {}:{}  {:.4} [{:.4}, {:.4}]", r.method.name(), c.system, c.budget, c.estimate, i.lo, i.hi),
                None => println!("{:<15} {}:{}  {:.4}", r.method.name(), c.system, c.budget, c.estimate),
            }
        }
    }
    if let Some(out) = &a.out {
        if out.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
            let bytes = csv.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
            write(out, &String::from_utf8(bytes).expect("csv output is utf-8"))?;
        } else {
            let mut s = serde_json::to_string_pretty(&reports)?;
            s.push('\n');
            write(out, &s)?;
        }
    }
    Ok(())
}

fn cmd_contrast(a: &ContrastArgs, seed: Option<u64>) -> Result<()> {
    let cfg = a.protocol.resolve(seed)?;
    let spec = ContrastSpec::parse(&contrast_terms(&a.terms)?)?;
    let t = a.input.load()?;
    for (cell, _) in &spec.coefficients {
        t.cell_index(cell)?;
    }
    let seeds = cfg.seeds();
    let d = SplitDesign::generate(t.n_items(), cfg.n_splits, cfg.rho_score, cfg.weight_rule, seeds.design)?;
    let est = estimate(&t, &d, &cfg.selector)?;
    let bcfg = BootstrapConfig::new(cfg.n_boot, cfg.alpha, seeds.bootstrap);
    let draws = multiplier_draws(&est, &bcfg)?;
    let res = contrast_ci(&est, &draws, &spec, &bcfg)?;
    println!(
        "{}: {:.4} [{:.4}, {:.4}]",
        res.contrast, res.estimate, res.interval.lo, res.interval.hi
    );
    if let Some(out) = &a.out {
        let v = serde_json::json!({
            "tensor_fingerprint": t.fingerprint(),
            "config": cfg,
            "seeds": seeds,
            "result": res,
        });
        let mut s = serde_json::to_string_pretty(&v)?;
        s.push('\n');
        write(out, &s)?;
    }
    Ok(())
}

fn cmd_validate(a: &InputArgs) -> Result<()> {
    let t = a.load()?;
    println!(
        "ok: {} items, {} cells, budgets [{}], fingerprint {}",
        t.n_items(),
        t.cells.len(),
        t.budget_grid.join(", "),
        t.fingerprint()
    );
    Ok(())
}

fn write_study(default_name: &str, out: &Option<PathBuf>, csv: &str, json: &serde_json::Value) -> Result<()> {
    let path = out.clone().unwrap_or_else(|| PathBuf::from(default_name));
    write(&path, csv)?;
    let mut s = serde_json::to_string_pretty(json)?;
    s.push('\n');
    write(&path.with_extension("json"), &s)?;
    Ok(())
}

fn cmd_simulate(study: &Study, seed: Option<u64>) -> Result<()> {
    match study {
        Study::A { m, k, r, item_bootstrap, sim } => {
            let mut grid = Vec::new();
            for &mm in m {
                for &kk in k {
                    for &rr in r {
                        grid.push((mm, kk, rr));
                    }
                }
            }
            let mut cfg = StudyAConfig::new(grid, sim.mc(seed, 3000));
            cfg.item_bootstrap_resamples = *item_bootstrap;
            let res = run_study_a(&cfg)?;
            println!("{:>6} {:>4} {:>4} {:>9} {:>9} {:>9}", "M", "K", "R", "theta*", "coverage", "width");
            for row in &res.rows {
                println!(
                    "{:>6} {:>4} {:>4} {:>9.4} {:>9.3} {:>9.4}",
                    row.m, row.k, row.r, row.theta_star, row.coverage, row.mean_width
                );
            }
            for s in &res.slopes {
                println!("K={} R={}: log-log width slope {:.3}", s.k, s.r, s.slope);
            }
            write_study("study-a.csv", &sim.out, &res.to_csv()?, &res.summary_json())
        }
        Study::B { delta, m, r, selector, threshold, sim } => {
            let mut cfg = StudyBConfig::new(delta.clone().unwrap_or_else(StudyBConfig::default_deltas), sim.mc(seed, 3000));
            cfg.n_items = *m;
            cfg.n_splits = *r;
            cfg.instability_threshold = *threshold;
            if let Some(list) = selector {
                cfg.selectors = list.iter().map(|s| s.parse()).collect::<Result<Vec<SelectorKind>>>()?;
            }
            SelectorSpec::adaptive(cfg.mc.tau, *threshold).check()?;
            let res = run_study_b(&cfg)?;
            println!("{:>6} {:<9} {:>9} {:>9} {:>7} {:>8}", "delta", "selector", "coverage", "width", "pi_win", "sd_miss");
            for row in &res.rows {
                println!(
                    "{:>6.3} {:<9} {:>9.3} {:>9.4} {:>7.3} {:>8.3}",
                    row.delta, row.selector, row.coverage, row.mean_width, row.mean_pi_win, row.sd_underestimation
                );
            }
            write_study("study-b.csv", &sim.out, &res.to_csv()?, &res.summary_json())
        }
        Study::C { h, h_b, m, r, pairing, sim } => {
            let mut cfg = StudyCConfig::new(h.clone(), sim.mc(seed, 0));
            cfg.h_b = *h_b;
            cfg.n_items = *m;
            cfg.n_splits = *r;
            cfg.pairing = pairing.parse::<Pairing>()?;
            let res = run_study_c(&cfg)?;
            println!("{:>4} {:>10} {:>10} {:>8} {:>8} {:>9}", "H_A", "M1 bias", "SIREN bias", "M1 FWR", "SIREN", "theory");
            for row in &res.rows {
                println!(
                    "{:>4} {:>+10.2} {:>+10.2} {:>8.3} {:>8.3} {:>9.2}",
                    row.h_a, row.m1_bias_pp, row.siren_bias_pp, row.m1_fwr, row.siren_fwr, row.theory_pp
                );
            }
            write_study("study-c.csv", &sim.out, &res.to_csv()?, &res.summary_json())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn contrast_term_forms() {
        assert_eq!(contrast_terms(&s(&["A:b2:+1", "A:b1:-1"])).unwrap(), s(&["A:b2:+1", "A:b1:-1"]));
        assert_eq!(contrast_terms(&s(&["+1", "A:b2", "\u{2212}1", "A:b1"])).unwrap(), s(&["A:b2:1", "A:b1:-1"]));
        assert_eq!(contrast_terms(&s(&["A:1:1,B:1:-1"])).unwrap(), s(&["A:1:1", "B:1:-1"]));
        assert!(contrast_terms(&[]).is_err());
        assert!(contrast_terms(&s(&["A:1", "1"])).is_err());
    }

    #[test]
    fn help_exits_zero_and_bad_flag_two() {
        assert_eq!(run(["siren", "--help"]), 0);
        assert_eq!(run(["siren", "report", "--bogus"]), 2);
    }
}
