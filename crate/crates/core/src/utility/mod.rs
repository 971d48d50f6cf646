//! Utility functions, Monte Carlo expected utility and parameter search.

mod mc;
mod search;
mod smooth;

pub use mc::{
    expected_utility_mc, prepare_pool, DecisionEngine, Estimate, MultitestEngine, SequentialEngine, UtilityError,
};
pub use search::{anneal, anneal_engine, grid_search, linspace, AnnealResult, AnnealSettings, GridEvaluation, UtilityCurve};
pub use smooth::local_linear_smooth;

use crate::groupseq::SequentialOutcome;
use crate::multitest::TestDecision;
use crate::prior::ThetaDraw;
use serde::{Deserialize, Serialize};

/// False-positive penalty: one value for all groups or one per group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Penalty {
    Scalar(f64),
    PerGroup(Vec<f64>),
}

impl Penalty {
    pub fn at(&self, k: usize) -> f64 {
        match self {
            Penalty::Scalar(l) => *l,
            Penalty::PerGroup(v) => v[k],
        }
    }

    pub fn validate(&self, k: usize) -> Result<(), UtilityError> {
        let ok = match self {
            Penalty::Scalar(l) => *l >= 0.0 && l.is_finite(),
            Penalty::PerGroup(v) => v.len() == k && v.iter().all(|l| *l >= 0.0 && l.is_finite()),
        };
        if ok {
            Ok(())
        } else {
            Err(UtilityError::Invalid(format!("need {k} nonnegative penalties, got {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequentialUtility {
    /// Reward λ'_t for a correct rejection at look t.
    pub stage_rewards: Vec<f64>,
    /// Cost λ per enrolled patient.
    pub per_patient_cost: f64,
}

impl SequentialUtility {
    /// λ'_1 = 1, λ'_2 = 0.5 and λ = 5e-5 per patient.
    pub fn reference() -> Self {
        Self {
            stage_rewards: vec![1.0, 0.5],
            per_patient_cost: 5e-5,
        }
    }

    pub fn validate(&self, stages: usize) -> Result<(), UtilityError> {
        if self.stage_rewards.len() != stages
            || self.stage_rewards.iter().any(|r| !(*r >= 0.0 && r.is_finite()))
            || !(self.per_patient_cost >= 0.0 && self.per_patient_cost.is_finite())
        {
            return Err(UtilityError::Invalid(format!(
                "need {stages} nonnegative stage rewards and a nonnegative cost"
            )));
        }
        Ok(())
    }
}

/// Σ_k reject_k·1{γ_k > 0} − λ_k·reject_k·1{γ_k ≤ 0}.
pub fn utility_multitest(decisions: &[TestDecision], theta: &ThetaDraw, lambda: &Penalty) -> f64 {
    assert_eq!(decisions.len(), theta.groups.len(), "decisions and θ must cover the same groups");
    decisions
        .iter()
        .zip(&theta.groups)
        .filter(|(d, _)| d.reject)
        .map(|(d, g)| if g.gamma > 0.0 { 1.0 } else { -lambda.at(d.group) })
        .sum()
}

/// λ'_{T*}·1{γ > 0, rejected} − λ·m_{T*}.
pub fn utility_sequential(outcome: &SequentialOutcome, theta: &ThetaDraw, spec: &SequentialUtility) -> f64 {
    let reward = if outcome.rejected && theta.groups[0].gamma > 0.0 {
        spec.stage_rewards[outcome.stop_stage - 1]
    } else {
        0.0
    };
    reward - spec.per_patient_cost * outcome.n_used as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groupseq::{StopReason, SequentialOutcome};
    use crate::prior::GroupTheta;

    fn theta(gammas: &[f64]) -> ThetaDraw {
        ThetaDraw {
            groups: gammas
                .iter()
                .map(|g| {
                    let mut t = GroupTheta::new(-1.0, 0.0, 0.0, 0.5, true, 1.0);
                    t.gamma = *g;
                    t
                })
                .collect(),
        }
    }

    fn dec(group: usize, reject: bool) -> TestDecision {
        TestDecision {
            group,
            reject,
            weight: 0.5,
            threshold: 0.025,
            flag: None,
        }
    }

    #[test]
    fn multitest_reference_values() {
        let l = Penalty::Scalar(0.5);
        assert_eq!(utility_multitest(&[dec(0, true), dec(1, true)], &theta(&[0.1, 0.2]), &l), 2.0);
        assert_eq!(utility_multitest(&[dec(0, true), dec(1, true)], &theta(&[0.1, 0.0]), &l), 0.5);
        assert_eq!(utility_multitest(&[dec(0, false), dec(1, false)], &theta(&[0.1, -0.1]), &l), 0.0);
        let v = Penalty::PerGroup(vec![0.5, 0.5]);
        for g in [[0.1, -0.2], [-0.1, 0.0], [0.3, 0.2]] {
            for r in [[true, false], [true, true], [false, true]] {
                let d = [dec(0, r[0]), dec(1, r[1])];
                assert_eq!(utility_multitest(&d, &theta(&g), &l), utility_multitest(&d, &theta(&g), &v));
            }
        }
        assert!(Penalty::PerGroup(vec![0.5]).validate(2).is_err());
        assert!(Penalty::Scalar(-1.0).validate(2).is_err());
    }

    fn outcome(stage: usize, rejected: bool, n: usize) -> SequentialOutcome {
        SequentialOutcome {
            stop_stage: stage,
            rejected,
            stopped_for: if rejected { StopReason::Efficacy } else { StopReason::Futility },
            n_used: n,
            stages: vec![],
        }
    }

    #[test]
    fn sequential_reference_values() {
        let u = SequentialUtility::reference();
        let pos = theta(&[0.1]);
        assert!((utility_sequential(&outcome(1, true, 100), &pos, &u) - 0.995).abs() < 1e-12);
        assert!((utility_sequential(&outcome(1, false, 100), &pos, &u) + 0.005).abs() < 1e-12);
        assert!((utility_sequential(&outcome(1, false, 100), &theta(&[0.0]), &u) + 0.005).abs() < 1e-12);
        assert!((utility_sequential(&outcome(2, true, 200), &pos, &u) - 0.49).abs() < 1e-12);
        assert!((utility_sequential(&outcome(2, true, 200), &theta(&[-0.1]), &u) + 0.01).abs() < 1e-12);
        assert!(u.validate(3).is_err());
    }
}
