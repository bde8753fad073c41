use siren_core::bootstrap::{intervals, multiplier_draws, BootstrapConfig, ContrastSpec};
use siren_core::estimator::estimate;
use siren_core::reporting::build_report;
use siren_core::rng::derive_seed;
use siren_core::sim_lab::{sample_tensor, DgpSpec};
use siren_core::split_engine::SplitDesign;
use siren_core::{BaselineMethod, ReportConfig, ScoreMatrix, ScoreTensor, SelectorSpec};

#[test]
fn report_agrees_with_standalone_pipeline() {
    let t = sample_tensor(&DgpSpec::equally_spaced(300, 6, 0.3, 4)).unwrap();
    let cfg = ReportConfig {
        seed: 5,
        n_boot: 500,
        selector: SelectorSpec::softmax(0.5),
        ..Default::default()
    };
    let r = build_report(&t, &cfg).unwrap();
    let d = SplitDesign::generate(300, cfg.n_splits, cfg.rho_score, cfg.weight_rule, derive_seed(5, "design")).unwrap();
    let est = estimate(&t, &d, &cfg.selector).unwrap();
    let bcfg = BootstrapConfig::new(500, 0.05, derive_seed(5, "bootstrap"));
    let boot = intervals(&est, &multiplier_draws(&est, &bcfg).unwrap(), &bcfg).unwrap();
    assert_eq!(r.cells[0].theta, est.cells[0].theta);
    assert_eq!(r.cells[0].pointwise, boot.cells[0].pointwise);
    assert_eq!(r.cells[0].band, boot.cells[0].band);
    assert_eq!(r.seeds.design, d.seed);
    assert_eq!(r.tensor_fingerprint, t.fingerprint());
}

#[test]
fn constant_tensor_report() {
    let t = ScoreTensor::single_cell("s", "1", ScoreMatrix::constant(30, 4, 1.0)).unwrap();
    let r = build_report(&t, &ReportConfig::default()).unwrap();
    assert!((r.cells[0].theta - 1.0).abs() < 1e-12);
    assert!(r.cells[0].pointwise.width().abs() < 1e-12);
    for b in &r.baselines {
        for c in &b.cells {
            assert!((c.estimate - 1.0).abs() < 1e-12);
            if let Some(ci) = c.ci {
                assert!(ci.width().abs() < 1e-12);
            }
        }
    }
    let m2 = r.baselines.iter().find(|b| b.method == BaselineMethod::M2).unwrap();
    assert!(m2.cells[0].degenerate);
}

#[test]
fn report_json_is_reproducible_and_ordered() {
    let t = sample_tensor(&DgpSpec::equally_spaced(100, 3, 0.3, 8)).unwrap();
    let mut cfg = ReportConfig {
        seed: 1,
        n_boot: 200,
        ..Default::default()
    };
    cfg.contrasts.push(ContrastSpec::parse(&["sim:0:1"]).unwrap());
    let a = build_report(&t, &cfg).unwrap().to_json_string();
    let b = build_report(&t, &cfg).unwrap().to_json_string();
    assert_eq!(a, b);
    let pos = |k: &str| a.find(&format!("\"{k}\"")).unwrap();
    assert!(pos("tensor_fingerprint") < pos("config"));
    assert!(pos("config") < pos("seeds"));
    assert!(pos("seeds") < pos("cells"));
    let other = build_report(&t, &ReportConfig { seed: 2, ..cfg }).unwrap().to_json_string();
    assert_ne!(a, other);
}

#[test]
fn equal_content_files_share_a_fingerprint() {
    let csv_a = "item_id,system,budget,artifact,score\nq1,A,1,p,1\nq2,A,1,p,0\n";
    let csv_b = "budget,score,artifact,system,item_id\r\n1,0.0,p,A,q2\r\n1,1.0,p,A,q1\r\n";
    let json = r#"{"items": ["q1", "q2"], "cells": [{"system": "A", "budget": 1, "artifacts": ["p"], "scores": [[1], [0]]}]}"#;
    let a = ScoreTensor::from_csv_str(csv_a).unwrap();
    let b = ScoreTensor::from_csv_str(csv_b).unwrap();
    let c = ScoreTensor::from_json_str(json).unwrap();
    assert_eq!(a.fingerprint(), b.fingerprint());
    assert_eq!(a.fingerprint(), c.fingerprint());
}
