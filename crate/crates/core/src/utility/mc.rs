//! Monte Carlo estimation of expected utility under the prior.
//!
//! Replicate r always uses the seed derived from (master_seed, r), never from
//! the candidate parameter, so estimates for different parameters share their
//! random numbers.

use super::{utility_multitest, utility_sequential, Penalty, SequentialUtility};
use crate::data::{compute_summaries, GroupSummary, SummaryError};
use crate::groupseq::{
    boundary_thresholds, prepare_sequential_trial, BoundarySchedule, DesignPriors, GroupSeqConfig, PreparedTrial,
};
use crate::multitest::{auxiliary_augmented_test, WeightedBonfConfig};
use crate::prior::{sample_pair, PriorHyperparams, ThetaDraw};
use crate::rng::{derive_seed, substream};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UtilityError {
    #[error("invalid utility setup: {0}")]
    Invalid(String),
    #[error("search bounds are empty")]
    BoundsEmpty,
    #[error("all {0} replicates failed")]
    AllFailed(usize),
}

/// A decision rule evaluated on prior-predictive replicates.
pub trait DecisionEngine: Sync {
    /// Parameter-independent work for one replicate (data, summaries, …).
    type Prepared: Send + Sync;
    /// Per-candidate precomputation (e.g. boundaries).
    type Context: Sync;

    fn prepare(&self, master_seed: u64, replicate: u64) -> Result<Self::Prepared, String>;
    fn context(&self, param: &[f64]) -> Result<Self::Context, UtilityError>;
    fn utility(&self, prepared: &Self::Prepared, ctx: &Self::Context) -> f64;
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub replicates: usize,
    pub failed: usize,
    /// Set when more than 1% of the replicates failed.
    pub warning: Option<String>,
}

impl Estimate {
    pub(crate) fn from_values(values: &[f64], failed: usize) -> Result<Self, UtilityError> {
        let n = values.len();
        if n == 0 {
            return Err(UtilityError::AllFailed(failed));
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64 / n as f64).sqrt()
        } else {
            f64::NAN
        };
        let total = n + failed;
        let warning = (failed * 100 > total).then(|| format!("{failed} of {total} replicates failed and were excluded"));
        Ok(Self {
            mean,
            se,
            replicates: n,
            failed,
            warning,
        })
    }
}

/// Prepares replicates 0..r; failed replicates are `Err` entries.
pub fn prepare_pool<E: DecisionEngine>(engine: &E, r: usize, seed: u64) -> Vec<Result<E::Prepared, String>> {
    (0..r as u64).into_par_iter().map(|i| engine.prepare(seed, i)).collect()
}

pub fn expected_utility_mc<E: DecisionEngine>(engine: &E, param: &[f64], r: usize, seed: u64) -> Result<Estimate, UtilityError> {
    if r < 100 {
        return Err(UtilityError::Invalid(format!("need at least 100 replicates, got {r}")));
    }
    let ctx = engine.context(param)?;
    let vals: Vec<Option<f64>> = (0..r as u64)
        .into_par_iter()
        .map(|i| engine.prepare(seed, i).ok().map(|p| engine.utility(&p, &ctx)))
        .collect();
    let failed = vals.iter().filter(|v| v.is_none()).count();
    let ok: Vec<f64> = vals.into_iter().flatten().collect();
    Estimate::from_values(&ok, failed)
}

// ---------------------------------------------------------------------------

/// Weighted Bonferroni with softmax weights. The parameter is either a single
/// shared β or one β per group.
#[derive(Debug, Clone, PartialEq)]
pub struct MultitestEngine {
    pub hyper: PriorHyperparams,
    pub n: usize,
    pub prevalence: Vec<f64>,
    pub alpha: f64,
    pub lambda: Penalty,
}

impl MultitestEngine {
    pub fn new(
        hyper: PriorHyperparams,
        n: usize,
        prevalence: Vec<f64>,
        alpha: f64,
        lambda: Penalty,
    ) -> Result<Self, UtilityError> {
        hyper.validate().map_err(|e| UtilityError::Invalid(e.to_string()))?;
        let k = hyper.k_count();
        if prevalence.len() != k {
            return Err(UtilityError::Invalid("one prevalence per group".into()));
        }
        lambda.validate(k)?;
        Ok(Self {
            hyper,
            n,
            prevalence,
            alpha,
            lambda,
        })
    }
}

impl DecisionEngine for MultitestEngine {
    type Prepared = (ThetaDraw, Vec<Result<GroupSummary, SummaryError>>);
    type Context = WeightedBonfConfig;

    fn prepare(&self, master_seed: u64, replicate: u64) -> Result<Self::Prepared, String> {
        let (theta, data) = sample_pair(&self.hyper, self.n, &self.prevalence, master_seed, replicate);
        Ok((theta, compute_summaries(&data)))
    }

    fn context(&self, param: &[f64]) -> Result<WeightedBonfConfig, UtilityError> {
        let k = self.hyper.k_count();
        let beta = match param.len() {
            1 => vec![param[0]; k],
            n if n == k => param.to_vec(),
            n => return Err(UtilityError::Invalid(format!("expected 1 or {k} β values, got {n}"))),
        };
        WeightedBonfConfig::new(self.alpha, beta).map_err(|e| UtilityError::Invalid(e.to_string()))
    }

    fn utility(&self, prepared: &Self::Prepared, ctx: &WeightedBonfConfig) -> f64 {
        let decisions = auxiliary_augmented_test(&prepared.1, ctx);
        utility_multitest(&decisions, &prepared.0, &self.lambda)
    }
}

/// Group-sequential design; the parameter is (β_E, β_F). The posterior at
/// each interim is computed once per replicate and shared by all candidates.
#[derive(Debug, Clone, PartialEq)]
pub struct SequentialEngine {
    pub hyper: PriorHyperparams,
    pub priors: DesignPriors,
    /// Look schedule, design and sampler; its β values are ignored.
    pub config: GroupSeqConfig,
    pub utility: SequentialUtility,
}

impl SequentialEngine {
    pub fn new(hyper: PriorHyperparams, config: GroupSeqConfig, utility: SequentialUtility) -> Result<Self, UtilityError> {
        let priors = DesignPriors::from_joint(&hyper).map_err(|e| UtilityError::Invalid(e.to_string()))?;
        config.validate().map_err(|e| UtilityError::Invalid(e.to_string()))?;
        utility.validate(config.stages())?;
        Ok(Self {
            hyper,
            priors,
            config,
            utility,
        })
    }
}

impl DecisionEngine for SequentialEngine {
    type Prepared = (ThetaDraw, PreparedTrial);
    type Context = (BoundarySchedule, f64);

    fn prepare(&self, master_seed: u64, replicate: u64) -> Result<Self::Prepared, String> {
        let n = *self.config.m_schedule.last().expect("validated");
        let (theta, data) = sample_pair(&self.hyper, n, &[1.0], master_seed, replicate);
        let seed = substream(derive_seed(master_seed, replicate), "sequential");
        let prep = prepare_sequential_trial(&data, &self.config, &self.priors, seed).map_err(|e| e.to_string())?;
        Ok((theta, prep))
    }

    fn context(&self, param: &[f64]) -> Result<Self::Context, UtilityError> {
        let [be, bf] = param else {
            return Err(UtilityError::Invalid("expected (beta_E, beta_F)".into()));
        };
        if !(*bf > 0.0 && *bf < 1.0) {
            return Err(UtilityError::Invalid(format!("beta_F must lie in (0,1), got {bf}")));
        }
        let b = boundary_thresholds(&self.config.n_schedule, *be, self.config.alpha)
            .map_err(|e| UtilityError::Invalid(e.to_string()))?;
        Ok((b, *bf))
    }

    fn utility(&self, prepared: &Self::Prepared, ctx: &Self::Context) -> f64 {
        let outcome = prepared.1.decide(&ctx.0, ctx.1);
        utility_sequential(&outcome, &prepared.0, &self.utility)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groupseq::{DesignKind, SamplerSettings};
    use crate::prior::EffectSharing;

    fn k2(lambda: f64) -> MultitestEngine {
        MultitestEngine::new(
            PriorHyperparams::reference(2, EffectSharing::Shared),
            200,
            vec![0.6, 0.4],
            0.05,
            Penalty::Scalar(lambda),
        )
        .unwrap()
    }

    #[test]
    fn deterministic_and_validated() {
        let e = k2(0.5);
        let a = expected_utility_mc(&e, &[4.0], 300, 5).unwrap();
        let b = expected_utility_mc(&e, &[4.0], 300, 5).unwrap();
        assert_eq!(a, b);
        assert!(expected_utility_mc(&e, &[4.0], 50, 5).is_err());
        assert!(expected_utility_mc(&e, &[1.0, 2.0, 3.0], 300, 5).is_err());
    }

    #[test]
    fn huge_penalty_punishes_rejection() {
        let e = k2(1e6);
        // β → ∞ concentrates all α on one group, which then rejects often
        let est = expected_utility_mc(&e, &[60.0], 400, 1).unwrap();
        assert!(est.mean <= 2.0 * est.se, "{est:?}");
    }

    #[test]
    fn standard_error_scales_with_root_r() {
        let e = k2(0.5);
        let se: Vec<f64> = [400, 1600, 6400]
            .iter()
            .map(|&r| expected_utility_mc(&e, &[4.45], r, 7).unwrap().se)
            .collect();
        for w in se.windows(2) {
            let ratio = w[0] / w[1];
            assert!((ratio - 2.0).abs() < 0.4, "{se:?}");
        }
    }

    #[test]
    fn common_random_numbers_reduce_difference_variance() {
        let e = k2(0.5);
        let r = 2000;
        let (a, b) = ([3.0], [6.0]);
        let ca = e.context(&a).unwrap();
        let cb = e.context(&b).unwrap();
        let diffs = |sa: u64, sb: u64| -> Vec<f64> {
            (0..r as u64)
                .map(|i| {
                    let pa = e.prepare(sa, i).unwrap();
                    let pb = e.prepare(sb, i).unwrap();
                    e.utility(&pa, &ca) - e.utility(&pb, &cb)
                })
                .collect()
        };
        let var = |v: &[f64]| crate::stats::sd(v).powi(2);
        let paired = var(&diffs(1, 1));
        let indep = var(&diffs(1, 2));
        assert!(paired < indep, "{paired} vs {indep}");
    }

    #[test]
    fn sequential_utility_identity() {
        // λ = 0 and λ'_t = 1: E[u] = pr(γ > 0) · pr(reject | γ > 0)
        let mut cfg = GroupSeqConfig::two_stage(DesignKind::AuxiliaryAugmented, 2.0, 0.13);
        cfg.sampler = SamplerSettings { draws: 300, burn_in: 200 };
        let e = SequentialEngine::new(
            PriorHyperparams::reference(1, EffectSharing::Independent),
            cfg,
            SequentialUtility {
                stage_rewards: vec![1.0, 1.0],
                per_patient_cost: 0.0,
            },
        )
        .unwrap();
        let ctx = e.context(&[2.0, 0.13]).unwrap();
        let pool = prepare_pool(&e, 150, 3);
        let mut pos = 0usize;
        let mut pos_rej = 0usize;
        let mut u = 0.0;
        for p in pool.iter().flatten() {
            let o = p.1.decide(&ctx.0, ctx.1);
            if p.0.groups[0].gamma > 0.0 {
                pos += 1;
                pos_rej += o.rejected as usize;
            }
            u += e.utility(p, &ctx);
        }
        let n = pool.len() as f64;
        let est = expected_utility_mc(&e, &[2.0, 0.13], 150, 3).unwrap();
        assert!((est.mean - u / n).abs() < 1e-12);
        assert!((est.mean - (pos as f64 / n) * (pos_rej as f64 / pos as f64)).abs() < 1e-12);
    }
}
