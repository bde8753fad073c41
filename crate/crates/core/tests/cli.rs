use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use siren_core::baselines::m3_single_split;
use siren_core::rng::derive_seed;
use siren_core::sim_lab::{sample_panel, PanelSpec};
use siren_core::ScoreTensor;

fn siren(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_siren"))
        .args(args)
        .current_dir(dir)
        .env_remove("SIREN_SEED")
        .output()
        .unwrap()
}

fn write_panel(dir: &Path) -> ScoreTensor {
    let spec = PanelSpec {
        systems: vec!["A".into(), "B".into()],
        budgets: vec!["b1".into(), "b2".into()],
        cell_qualities: vec![vec![0.0, 0.1], vec![0.2, 0.3, 0.1], vec![0.1], vec![0.0, 0.4]],
        n_items: 80,
        seed: 3,
    };
    let t = sample_panel(&spec).unwrap();
    fs::write(dir.join("s.csv"), t.to_csv_string().unwrap()).unwrap();
    t
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(|r| r.unwrap()).collect()
}

#[test]
fn report_writes_json_and_tables() {
    let dir = tempfile::tempdir().unwrap();
    write_panel(dir.path());
    let out = siren(&["report", "--scores", "s.csv", "--out", "r.json", "--n-boot", "300"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(&dir.path().join("r.json"));
    assert_eq!(r["cells"].as_array().unwrap().len(), 4);
    assert!(dir.path().join("r.estimates.csv").exists());
    assert!(dir.path().join("r.diagnostics.csv").exists());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("theta") && stdout.lines().count() == 5);
}

#[test]
fn missing_score_file_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = siren(&["report", "--scores", "no-such-file.csv"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no-such-file.csv"));
}

#[test]
fn invalid_scores_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.csv"), "item_id,system,budget,artifact,score\nq1,A,1,p,1.5\n").unwrap();
    let out = siren(&["validate", "--scores", "bad.csv"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("1.5"));
    let out = siren(&["report", "--scores", "bad.csv", "--R", "0"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn single_split_hard_report_matches_m3() {
    let dir = tempfile::tempdir().unwrap();
    let t = write_panel(dir.path());
    let out = siren(
        &["report", "--scores", "s.csv", "--selector", "hard", "--R", "1", "--seed", "11", "--n-boot", "200", "--out", "r.json"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&dir.path().join("r.estimates.csv"));
    for cell in t.cell_refs() {
        let get = |method: &str| -> f64 {
            rows.iter()
                .find(|r| &r[0] == method && r[1] == cell.system && r[2] == cell.budget)
                .unwrap()[3]
                .parse()
                .unwrap()
        };
        assert_eq!(get("siren"), get("M3"));
        let direct = m3_single_split(&t, &cell, 0.5, derive_seed(11, "design")).unwrap();
        assert_eq!(get("siren"), direct);
    }
}

#[test]
fn output_is_independent_of_threads_and_seed_source() {
    let dir = tempfile::tempdir().unwrap();
    write_panel(dir.path());
    let base = ["report", "--scores", "s.csv", "--n-boot", "400", "--item-bootstrap", "30"];
    let run = |extra: &[&str], out: &str, env_seed: Option<&str>| {
        let mut args: Vec<&str> = base.to_vec();
        args.extend_from_slice(extra);
        args.extend_from_slice(&["--out", out]);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_siren"));
        cmd.args(&args).current_dir(dir.path()).env_remove("SIREN_SEED");
        if let Some(s) = env_seed {
            cmd.env("SIREN_SEED", s);
        }
        let o = cmd.output().unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        fs::read_to_string(dir.path().join(out)).unwrap()
    };
    let one = run(&["--threads", "1", "--seed", "7"], "a.json", None);
    let three = run(&["--threads", "3", "--seed", "7"], "b.json", None);
    let env = run(&[], "c.json", Some("7"));
    let other = run(&["--seed", "8"], "d.json", None);
    assert_eq!(one, three);
    assert_eq!(one, env);
    assert_ne!(one, other);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    write_panel(dir.path());
    fs::write(dir.path().join("cfg.json"), r#"{"n_splits": 3, "alpha": 0.1, "n_boot": 150, "selector": {"kind": "hard"}}"#).unwrap();
    let out = siren(&["report", "--scores", "s.csv", "--config", "cfg.json", "--R", "4", "--out", "r.json"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let cfg = &json(&dir.path().join("r.json"))["config"];
    assert_eq!(cfg["n_splits"], 4);
    assert_eq!(cfg["alpha"], 0.1);
    assert_eq!(cfg["n_boot"], 150);
    assert_eq!(cfg["selector"]["kind"], "hard");

    fs::write(dir.path().join("bad.json"), r#"{"n_split": 3}"#).unwrap();
    let out = siren(&["report", "--scores", "s.csv", "--config", "bad.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn contrast_command() {
    let dir = tempfile::tempdir().unwrap();
    write_panel(dir.path());
    let common = ["--scores", "s.csv", "--seed", "4", "--n-boot", "500"];
    let mut args = vec!["report"];
    args.extend_from_slice(&common);
    args.extend_from_slice(&["--out", "r.json"]);
    assert_eq!(siren(&args, dir.path()).status.code(), Some(0));
    let report = json(&dir.path().join("r.json"));
    let cell = report["cells"].as_array().unwrap().iter().find(|c| c["system"] == "A" && c["budget"] == "b2").unwrap().clone();

    let mut args = vec!["contrast"];
    args.extend_from_slice(&common);
    args.extend_from_slice(&["A:b2:1", "--out", "c.json"]);
    let out = siren(&args, dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let c = json(&dir.path().join("c.json"));
    assert_eq!(c["result"]["interval"], cell["pointwise"]);

    let mut args = vec!["contrast"];
    args.extend_from_slice(&common);
    args.extend_from_slice(&["+1", "A:b2", "-1", "A:b1", "--out", "g.json"]);
    let out = siren(&args, dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let g = json(&dir.path().join("g.json"));
    let a1 = report["cells"].as_array().unwrap().iter().find(|c| c["system"] == "A" && c["budget"] == "b1").unwrap();
    let diff = cell["theta"].as_f64().unwrap() - a1["theta"].as_f64().unwrap();
    assert!((g["result"]["estimate"].as_f64().unwrap() - diff).abs() < 1e-12);

    let mut args = vec!["contrast"];
    args.extend_from_slice(&common);
    assert_eq!(siren(&args, dir.path()).status.code(), Some(2));
    args.push("Z:b1:1");
    let out = siren(&args, dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Z:b1"));
}

#[test]
fn baselines_command_writes_method_table() {
    let dir = tempfile::tempdir().unwrap();
    write_panel(dir.path());
    let out = siren(&["baselines", "--scores", "s.csv", "--method", "m1,m4,item-bootstrap", "--resamples", "50", "--out", "b.csv"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&dir.path().join("b.csv"));
    assert_eq!(rows.len(), 12);
    assert!(rows.iter().any(|r| &r[0] == "item-bootstrap"));
}

#[test]
fn simulate_a_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let out = siren(&["simulate", "a", "--M", "100", "--K", "2", "--R", "5", "--n-sim", "50", "--n-gt", "200", "--out", "a.csv"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(csv_rows(&dir.path().join("a.csv")).len(), 1);
    assert_eq!(json(&dir.path().join("a.json"))["study"], "a");
    let out = siren(&["simulate", "a", "--M", "1", "--K", "2", "--n-sim", "5"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_c_bias_rises_with_shortlist() {
    let dir = tempfile::tempdir().unwrap();
    let out = siren(&["simulate", "c", "--H", "3,50", "--n-sim", "200", "--out", "c.csv"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let mut rdr = csv::Reader::from_path(dir.path().join("c.csv")).unwrap();
    let col = rdr.headers().unwrap().iter().position(|h| h == "m1_bias_pp").unwrap();
    let bias: Vec<f64> = rdr.records().map(|r| r.unwrap()[col].parse().unwrap()).collect();
    assert!(bias[1] > bias[0], "{bias:?}");
}

#[test]
fn simulate_b_hard_undercovers() {
    let dir = tempfile::tempdir().unwrap();
    let out = siren(
        &["simulate", "b", "--delta", "0.2", "--n-sim", "100", "--n-gt", "500", "--selector", "hard", "--out", "b.csv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let mut rdr = csv::Reader::from_path(dir.path().join("b.csv")).unwrap();
    let col = rdr.headers().unwrap().iter().position(|h| h == "coverage").unwrap();
    let cov: Vec<f64> = rdr.records().map(|r| r.unwrap()[col].parse().unwrap()).collect();
    assert_eq!(cov.len(), 1);
    assert!(cov[0] < 0.95, "{cov:?}");
}
