//! Selectors map a shortlist's scoring-set means to deployment weights on the
//! simplex.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectorKind {
    Softmax,
    #[serde(alias = "hard-argmax", alias = "argmax")]
    Hard,
    /// Hard when winner instability is at most the threshold, softmax otherwise.
    Adaptive,
}

impl std::str::FromStr for SelectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "softmax" | "soft" => Ok(SelectorKind::Softmax),
            "hard" | "hard-argmax" | "argmax" => Ok(SelectorKind::Hard),
            "adaptive" => Ok(SelectorKind::Adaptive),
            other => Err(Error::invalid(format!("unknown selector `{other}`"))),
        }
    }
}

fn default_tau() -> f64 {
    1.0
}

fn default_threshold() -> f64 {
    0.10
}

/// Selector configuration, e.g. `{"kind": "softmax", "tau": 1.0}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectorSpec {
    pub kind: SelectorKind,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_threshold")]
    pub instability_threshold: f64,
}

impl Default for SelectorSpec {
    fn default() -> Self {
        Self::softmax(1.0)
    }
}

impl SelectorSpec {
    pub fn softmax(tau: f64) -> Self {
        Self {
            kind: SelectorKind::Softmax,
            tau,
            instability_threshold: default_threshold(),
        }
    }

    pub fn hard() -> Self {
        Self {
            kind: SelectorKind::Hard,
            tau: default_tau(),
            instability_threshold: default_threshold(),
        }
    }

    pub fn adaptive(tau: f64, instability_threshold: f64) -> Self {
        Self {
            kind: SelectorKind::Adaptive,
            tau,
            instability_threshold,
        }
    }

    pub fn check(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::invalid(format!("tau must be positive, got {}", self.tau)));
        }
        if !(0.0..=1.0).contains(&self.instability_threshold) {
            return Err(Error::invalid(format!(
                "instability threshold must lie in [0, 1], got {}",
                self.instability_threshold
            )));
        }
        Ok(())
    }

    /// Resolves the adaptive rule against a winner-instability reading.
    pub fn resolve(&self, pi_win: f64) -> ResolvedSelector {
        match self.kind {
            SelectorKind::Softmax => ResolvedSelector::Softmax { tau: self.tau },
            SelectorKind::Hard => ResolvedSelector::Hard,
            SelectorKind::Adaptive if pi_win <= self.instability_threshold => ResolvedSelector::Hard,
            SelectorKind::Adaptive => ResolvedSelector::Softmax { tau: self.tau },
        }
    }

    /// Resolution without split context: adaptive acts as softmax.
    pub fn resolve_direct(&self) -> ResolvedSelector {
        match self.kind {
            SelectorKind::Hard => ResolvedSelector::Hard,
            _ => ResolvedSelector::Softmax { tau: self.tau },
        }
    }
}

/// A concrete selector after any adaptive decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ResolvedSelector {
    Softmax { tau: f64 },
    Hard,
}

impl ResolvedSelector {
    pub fn is_hard(&self) -> bool {
        matches!(self, ResolvedSelector::Hard)
    }

    pub fn weights(&self, s: &[f64]) -> Result<WeightVector> {
        if s.is_empty() {
            return Err(Error::invalid("empty score vector"));
        }
        if s.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteScore);
        }
        Ok(WeightVector(match self {
            ResolvedSelector::Softmax { tau } => softmax(s, *tau),
            ResolvedSelector::Hard => {
                let mut q = vec![0.0; s.len()];
                q[argmax(s)] = 1.0;
                q
            }
        }))
    }

    /// `Dg(s)` as a dense `K x K` matrix (row-major nested vectors).
    pub fn jacobian(&self, s: &[f64]) -> Result<Vec<Vec<f64>>> {
        let q = self.weights(s)?;
        let k = s.len();
        Ok(match self {
            ResolvedSelector::Hard => vec![vec![0.0; k]; k],
            ResolvedSelector::Softmax { tau } => (0..k)
                .map(|a| {
                    (0..k)
                        .map(|b| {
                            let diag = if a == b { q.0[a] } else { 0.0 };
                            (diag - q.0[a] * q.0[b]) / tau
                        })
                        .collect()
                })
                .collect(),
        })
    }

    /// `Dg(s)^T t` given `q = g(s)`, without forming the matrix.
    pub fn jacobian_transpose_apply(&self, q: &WeightVector, t: &[f64]) -> Vec<f64> {
        match self {
            ResolvedSelector::Hard => vec![0.0; t.len()],
            ResolvedSelector::Softmax { tau } => {
                let qt = q.dot(t);
                q.0.iter().zip(t).map(|(qk, tk)| qk * (tk - qt) / tau).collect()
            }
        }
    }
}

/// Nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector(pub Vec<f64>);

impl WeightVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        self.0.iter().zip(x).map(|(a, b)| a * b).sum()
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(s: &[f64]) -> usize {
    let mut best = 0;
    for (k, v) in s.iter().enumerate().skip(1) {
        if *v > s[best] {
            best = k;
        }
    }
    best
}

fn softmax(s: &[f64], tau: f64) -> Vec<f64> {
    let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = s.iter().map(|x| ((x - max) / tau).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|x| x / z).collect()
}

pub fn select(spec: &SelectorSpec, s: &[f64]) -> Result<WeightVector> {
    spec.check()?;
    spec.resolve_direct().weights(s)
}

pub fn jacobian(spec: &SelectorSpec, s: &[f64]) -> Result<Vec<Vec<f64>>> {
    spec.check()?;
    spec.resolve_direct().jacobian(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn symmetric_scores_split_evenly() {
        let q = select(&SelectorSpec::softmax(1.0), &[0.3, 0.3]).unwrap();
        assert_eq!(q.0, vec![0.5, 0.5]);
    }

    #[test]
    fn single_artifact_gets_everything() {
        for spec in [
            SelectorSpec::softmax(1.0),
            SelectorSpec::hard(),
            SelectorSpec::adaptive(0.1, 0.1),
        ] {
            assert_eq!(select(&spec, &[0.7]).unwrap().0, vec![1.0]);
        }
    }

    #[test]
    fn softmax_two_point() {
        // e / (e + 1) and 1 / (e + 1)
        let q = select(&SelectorSpec::softmax(1.0), &[1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(q.0[0], 0.731_058_578_630_004_9, epsilon = 1e-15);
        assert_abs_diff_eq!(q.0[1], 0.268_941_421_369_995_1, epsilon = 1e-15);
    }

    #[test]
    fn hard_ties_break_low() {
        let q = select(&SelectorSpec::hard(), &[0.4, 0.4, 0.2]).unwrap();
        assert_eq!(q.0, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn softmax_jacobian_at_uniform() {
        let j = jacobian(&SelectorSpec::softmax(1.0), &[0.3, 0.3]).unwrap();
        assert_eq!(j, vec![vec![0.25, -0.25], vec![-0.25, 0.25]]);
    }

    #[test]
    fn hard_jacobian_is_zero() {
        let j = jacobian(&SelectorSpec::hard(), &[0.1, 0.9, 0.3]).unwrap();
        assert!(j.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn non_finite_scores_error() {
        assert!(matches!(
            select(&SelectorSpec::softmax(1.0), &[f64::NAN, 0.0]),
            Err(Error::NonFiniteScore)
        ));
        assert!(matches!(
            jacobian(&SelectorSpec::hard(), &[f64::INFINITY]),
            Err(Error::NonFiniteScore)
        ));
    }

    #[test]
    fn small_tau_is_stable() {
        let q = select(&SelectorSpec::softmax(1e-4), &[0.9, 0.1, 0.5]).unwrap();
        assert!(q.0.iter().all(|v| v.is_finite()));
        assert_abs_diff_eq!(q.0[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn adaptive_resolution() {
        let spec = SelectorSpec::adaptive(0.1, 0.10);
        assert_eq!(spec.resolve(0.10), ResolvedSelector::Hard);
        assert_eq!(spec.resolve(0.11), ResolvedSelector::Softmax { tau: 0.1 });
    }

    #[test]
    fn spec_parses_from_config_json() {
        let s: SelectorSpec = serde_json::from_str(r#"{"kind": "softmax", "tau": 0.5}"#).unwrap();
        assert_eq!(s, SelectorSpec::softmax(0.5));
        let h: SelectorSpec = serde_json::from_str(r#"{"kind": "hard-argmax"}"#).unwrap();
        assert_eq!(h.kind, SelectorKind::Hard);
        assert!(SelectorSpec::softmax(0.0).check().is_err());
        assert!(SelectorSpec::adaptive(1.0, 1.5).check().is_err());
    }

    fn scores(max_k: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-3.0f64..3.0, 1..=max_k)
    }

    proptest! {
        #[test]
        fn weights_lie_on_simplex(s in scores(12), tau in 0.01f64..5.0, hard in any::<bool>()) {
            let spec = if hard { SelectorSpec::hard() } else { SelectorSpec::softmax(tau) };
            let q = select(&spec, &s).unwrap();
            prop_assert!(q.0.iter().all(|v| *v >= 0.0));
            prop_assert!((q.0.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn softmax_is_shift_invariant(s in scores(10), c in -50.0f64..50.0, tau in 0.05f64..3.0) {
            let spec = SelectorSpec::softmax(tau);
            let a = select(&spec, &s).unwrap();
            let shifted: Vec<f64> = s.iter().map(|x| x + c).collect();
            let b = select(&spec, &shifted).unwrap();
            for (x, y) in a.0.iter().zip(&b.0) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn jacobian_rows_and_columns_sum_to_zero(s in scores(10), tau in 0.05f64..3.0) {
            let j = jacobian(&SelectorSpec::softmax(tau), &s).unwrap();
            let k = s.len();
            for a in 0..k {
                let row: f64 = j[a].iter().sum();
                let col: f64 = (0..k).map(|b| j[b][a]).sum();
                prop_assert!(row.abs() < 1e-10 && col.abs() < 1e-10);
            }
        }
    }
}
