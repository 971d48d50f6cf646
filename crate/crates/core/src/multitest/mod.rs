//! Subgroup multiple testing: the auxiliary-augmented weighted Bonferroni
//! procedure, its comparators, bootstrap calibration and the exact
//! enumeration of the stylized single-patient example.

mod calibration;
mod example;

pub use calibration::{bootstrap_calibrate, calibration_inputs, fwer_hat, Calibration, CalibrationInput};
pub use example::{enumerate_single_patient_example, enumerate_stylized, ExampleRow};

use crate::data::{GroupSummary, SummaryError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MultitestError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("covariance for group {group} is not positive semidefinite or has zero primary variance")]
    DegenerateCovariance { group: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedBonfConfig {
    pub alpha: f64,
    /// One coefficient per group; a shared scalar is a vector of equal entries.
    pub beta: Vec<f64>,
    #[serde(default)]
    pub calibrated_alpha: Option<f64>,
    /// Optional multiplicative prior weights (e.g. a transform of prevalence).
    #[serde(default)]
    pub prior_weights: Option<Vec<f64>>,
}

impl WeightedBonfConfig {
    pub fn new(alpha: f64, beta: Vec<f64>) -> Result<Self, MultitestError> {
        let c = Self {
            alpha,
            beta,
            calibrated_alpha: None,
            prior_weights: None,
        };
        c.validate(c.beta.len())?;
        Ok(c)
    }

    /// β₁ = … = β_K = `beta`.
    pub fn shared(alpha: f64, beta: f64, k: usize) -> Result<Self, MultitestError> {
        Self::new(alpha, vec![beta; k])
    }

    pub fn validate(&self, k: usize) -> Result<(), MultitestError> {
        let bad = |m: String| Err(MultitestError::Invalid(m));
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0,1), got {}", self.alpha));
        }
        if self.beta.len() != k || k == 0 {
            return bad(format!("beta has {} entries for {k} groups", self.beta.len()));
        }
        if self.beta.iter().any(|b| !b.is_finite()) {
            return bad("beta must be finite".into());
        }
        if let Some(a) = self.calibrated_alpha {
            if !(0.0..=1.0).contains(&a) {
                return bad(format!("calibrated alpha must lie in [0,1], got {a}"));
            }
        }
        if let Some(w) = &self.prior_weights {
            if w.len() != k || w.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                return bad("prior weights must be K positive numbers".into());
            }
        }
        Ok(())
    }

    pub fn effective_alpha(&self) -> f64 {
        self.calibrated_alpha.unwrap_or(self.alpha)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestDecision {
    pub group: usize,
    pub reject: bool,
    pub weight: f64,
    /// p-value threshold actually applied.
    pub threshold: f64,
    /// Set when the group summary could not be formed (never rejects).
    pub flag: Option<SummaryError>,
}

/// ω_k ∝ exp(β_k S̄_k), computed with max-subtraction.
pub fn softmax_weights(beta: &[f64], sbar: &[f64]) -> Vec<f64> {
    weighted_softmax(beta, sbar, None)
}

/// ω_k ∝ π_k · exp(β_k S̄_k).
pub fn weighted_softmax(beta: &[f64], sbar: &[f64], prior: Option<&[f64]>) -> Vec<f64> {
    assert_eq!(beta.len(), sbar.len(), "beta and sbar must have the same length");
    let logits: Vec<f64> = beta
        .iter()
        .zip(sbar)
        .enumerate()
        .map(|(k, (b, s))| b * s + prior.map_or(0.0, |p| p[k].ln()))
        .collect();
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|x| x / z).collect()
}

fn split(summaries: &[Result<GroupSummary, SummaryError>]) -> (Vec<f64>, Vec<f64>, Vec<Option<SummaryError>>) {
    let mut pv = Vec::with_capacity(summaries.len());
    let mut sbar = Vec::with_capacity(summaries.len());
    let mut flags = Vec::with_capacity(summaries.len());
    for s in summaries {
        match s {
            Ok(s) => {
                pv.push(s.pvalue);
                sbar.push(s.sbar_diff);
                flags.push(None);
            }
            Err(e) => {
                pv.push(f64::INFINITY);
                sbar.push(0.0);
                flags.push(Some(*e));
            }
        }
    }
    (pv, sbar, flags)
}

fn decide(pv: &[f64], weights: &[f64], thresholds: &[f64], flags: Vec<Option<SummaryError>>) -> Vec<TestDecision> {
    flags
        .into_iter()
        .enumerate()
        .map(|(k, flag)| TestDecision {
            group: k,
            reject: flag.is_none() && pv[k] <= thresholds[k],
            weight: weights[k],
            threshold: thresholds[k],
            flag,
        })
        .collect()
}

/// Rejects H0,k when pv_k ≤ α_eff · ω_k(β, S̄).
pub fn auxiliary_augmented_test(
    summaries: &[Result<GroupSummary, SummaryError>],
    config: &WeightedBonfConfig,
) -> Vec<TestDecision> {
    let (pv, sbar, flags) = split(summaries);
    let w = weighted_softmax(&config.beta, &sbar, config.prior_weights.as_deref());
    let a = config.effective_alpha();
    let thr: Vec<f64> = w.iter().map(|w| a * w).collect();
    decide(&pv, &w, &thr, flags)
}

pub fn bonferroni_test(summaries: &[Result<GroupSummary, SummaryError>], alpha: f64) -> Vec<TestDecision> {
    let (pv, _, flags) = split(summaries);
    let k = pv.len() as f64;
    let w = vec![1.0 / k; pv.len()];
    let thr: Vec<f64> = w.iter().map(|w| alpha * w).collect();
    decide(&pv, &w, &thr, flags)
}

/// Step-down Holm procedure. Each group's threshold is α/(K − j + 1) at its
/// rank j; groups after the first acceptance are not rejected.
pub fn holm_test(summaries: &[Result<GroupSummary, SummaryError>], alpha: f64) -> Vec<TestDecision> {
    let (pv, _, flags) = split(summaries);
    let k = pv.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| pv[a].total_cmp(&pv[b]).then(a.cmp(&b)));
    let mut thr = vec![0.0; k];
    let mut reject = vec![false; k];
    let mut open = true;
    for (j, &g) in order.iter().enumerate() {
        thr[g] = alpha / (k - j) as f64;
        if open && flags[g].is_none() && pv[g] <= thr[g] {
            reject[g] = true;
        } else {
            open = false;
        }
    }
    flags
        .into_iter()
        .enumerate()
        .map(|(g, flag)| TestDecision {
            group: g,
            reject: reject[g],
            weight: thr[g] / alpha,
            threshold: thr[g],
            flag,
        })
        .collect()
}

/// Bonferroni on summaries built from the auxiliary outcome
/// (see [`crate::data::compute_auxiliary_summaries`]).
pub fn auxiliary_only_test(aux_summaries: &[Result<GroupSummary, SummaryError>], alpha: f64) -> Vec<TestDecision> {
    bonferroni_test(aux_summaries, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Arm;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn summary(group: usize, pvalue: f64, sbar: f64) -> Result<GroupSummary, SummaryError> {
        let z = crate::stats::normal_quantile(1.0 - pvalue);
        Ok(GroupSummary {
            group,
            n0: 50,
            n1: 50,
            ybar_diff: 0.0,
            sbar_diff: sbar,
            var_hat: 0.01,
            z,
            pvalue,
        })
    }

    #[test]
    fn softmax_examples() {
        assert_eq!(softmax_weights(&[0.0; 3], &[0.3, -0.2, 0.9]), vec![1.0 / 3.0; 3]);
        let w = softmax_weights(&[4.45, 4.45], &[0.25, 0.0]);
        // e^{1.1125} / (e^{1.1125} + 1), 30-digit reference
        assert_abs_diff_eq!(w[0], 0.752594894880973371, epsilon = 1e-15);
        assert_abs_diff_eq!(w[1], 1.0 - 0.752594894880973371, epsilon = 1e-15);
        let w = weighted_softmax(&[0.0, 0.0], &[0.0, 0.0], Some(&[3.0, 1.0]));
        assert_abs_diff_eq!(w[0], 0.75, epsilon = 1e-15);
    }

    #[test]
    fn holm_hand_trace() {
        let s = vec![summary(0, 0.02, 0.0), summary(1, 0.03, 0.0)];
        let d = holm_test(&s, 0.05);
        assert!(d[0].reject && d[1].reject);
        let b = bonferroni_test(&s, 0.05);
        assert!(b[0].reject && !b[1].reject);
        let none = holm_test(&[summary(0, 0.2, 0.0), summary(1, 0.06, 0.0)], 0.05);
        assert!(none.iter().all(|d| !d.reject));
    }

    #[test]
    fn single_group_bonferroni_is_plain_test() {
        assert!(bonferroni_test(&[summary(0, 0.05, 0.0)], 0.05)[0].reject);
        assert!(!bonferroni_test(&[summary(0, 0.0500001, 0.0)], 0.05)[0].reject);
    }

    #[test]
    fn ties_reject_and_calibrated_alpha_is_used() {
        let mut cfg = WeightedBonfConfig::shared(0.05, 0.0, 2).unwrap();
        let d = auxiliary_augmented_test(&[summary(0, 0.025, 0.1), summary(1, 0.5, 0.0)], &cfg);
        assert!(d[0].reject);
        cfg.calibrated_alpha = Some(0.04);
        let d = auxiliary_augmented_test(&[summary(0, 0.025, 0.1), summary(1, 0.5, 0.0)], &cfg);
        assert!(!d[0].reject);
        assert_abs_diff_eq!(d[0].threshold, 0.02, epsilon = 1e-15);
    }

    #[test]
    fn empty_arm_never_rejects() {
        let s = vec![
            Err(SummaryError::EmptyArm {
                group: 0,
                arm: Arm::Control,
            }),
            summary(1, 1e-6, 0.0),
        ];
        let cfg = WeightedBonfConfig::shared(0.05, 4.0, 2).unwrap();
        for d in [auxiliary_augmented_test(&s, &cfg), bonferroni_test(&s, 0.05), holm_test(&s, 0.05)] {
            assert!(!d[0].reject);
            assert!(d[0].flag.is_some());
            assert!(d[1].reject);
        }
    }

    #[test]
    fn config_validation() {
        assert!(WeightedBonfConfig::new(0.0, vec![1.0]).is_err());
        assert!(WeightedBonfConfig::new(0.05, vec![f64::NAN]).is_err());
        let mut c = WeightedBonfConfig::shared(0.05, 1.0, 2).unwrap();
        c.calibrated_alpha = Some(1.5);
        assert!(c.validate(2).is_err());
    }

    fn arb_summaries() -> impl Strategy<Value = Vec<Result<GroupSummary, SummaryError>>> {
        prop::collection::vec((0.0f64..1.0, -1.0f64..1.0), 1..8).prop_map(|v| {
            v.into_iter()
                .enumerate()
                .map(|(k, (p, s))| summary(k, p, s))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn weights_normalised_and_shift_invariant(
            beta in prop::collection::vec(-20.0f64..20.0, 1..10),
            seed in prop::collection::vec(-1.0f64..1.0, 10),
            shift in -5.0f64..5.0,
        ) {
            let k = beta.len();
            let sbar = &seed[..k];
            let w = softmax_weights(&beta, sbar);
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(w.iter().all(|x| *x > 0.0));
            // shift invariance holds for a shared coefficient
            let shared = vec![beta[0]; k];
            let shifted: Vec<f64> = sbar.iter().map(|s| s + shift).collect();
            let a = softmax_weights(&shared, sbar);
            let b = softmax_weights(&shared, &shifted);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn holm_contains_bonferroni(s in arb_summaries(), alpha in 0.001f64..0.5) {
            let h = holm_test(&s, alpha);
            let b = bonferroni_test(&s, alpha);
            for (h, b) in h.iter().zip(&b) {
                prop_assert!(!b.reject || h.reject);
            }
        }

        #[test]
        fn zero_beta_is_bonferroni(s in arb_summaries(), alpha in 0.001f64..0.5) {
            let cfg = WeightedBonfConfig::shared(alpha, 0.0, s.len()).unwrap();
            let a = auxiliary_augmented_test(&s, &cfg);
            let b = bonferroni_test(&s, alpha);
            for (a, b) in a.iter().zip(&b) {
                prop_assert_eq!(a.reject, b.reject);
            }
        }
    }
}
