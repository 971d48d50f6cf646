//! Sequential trial execution: efficacy look on the primary Z statistic,
//! then a futility look on the posterior predictive probability of success.

use super::posterior::{sample_posterior, OutcomeModel, PosteriorError, SamplerSettings, SingleOutcomePrior};
use super::predictive::{simulate_future_z, PredictiveError, PredictiveSims};
use super::BoundarySchedule;
use crate::data::{compute_summaries, DataError, TrialDataset};
use crate::prior::PriorHyperparams;
use crate::rng::substream;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Posterior(#[from] PosteriorError),
    #[error(transparent)]
    Predictive(#[from] PredictiveError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DesignKind {
    /// Futility predictions from the joint (Y, S) model.
    AuxiliaryAugmented,
    /// Futility predictions from a Y-only model.
    PrimaryOnly,
    /// S replaces Y for both efficacy and futility.
    AuxiliaryOnly,
}

impl DesignKind {
    pub fn label(self) -> &'static str {
        match self {
            DesignKind::AuxiliaryAugmented => "Auxiliary-Augmented",
            DesignKind::PrimaryOnly => "Primary-Only",
            DesignKind::AuxiliaryOnly => "Auxiliary-Only",
        }
    }

    pub fn all() -> [DesignKind; 3] {
        [DesignKind::AuxiliaryAugmented, DesignKind::PrimaryOnly, DesignKind::AuxiliaryOnly]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSeqConfig {
    pub n_schedule: Vec<usize>,
    /// Enrollments at each look; defaults to `n_schedule`.
    pub m_schedule: Vec<usize>,
    pub alpha: f64,
    pub beta_e: f64,
    pub beta_f: f64,
    pub design: DesignKind,
    #[serde(default)]
    pub sampler: SamplerSettings,
}

impl GroupSeqConfig {
    /// Two looks at n = (100, 200) without enrollment lag.
    pub fn two_stage(design: DesignKind, beta_e: f64, beta_f: f64) -> Self {
        Self {
            n_schedule: vec![100, 200],
            m_schedule: vec![100, 200],
            alpha: 0.05,
            beta_e,
            beta_f,
            design,
            sampler: SamplerSettings::default(),
        }
    }

    pub fn stages(&self) -> usize {
        self.n_schedule.len()
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: String| Err(EngineError::Config(m));
        let n = &self.n_schedule;
        if n.is_empty() || n[0] == 0 || n.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("n_schedule must be positive and strictly increasing: {n:?}"));
        }
        if self.m_schedule.len() != n.len() {
            return bad("m_schedule must have one entry per stage".into());
        }
        if self.m_schedule.iter().zip(n).any(|(m, n)| m < n) {
            return bad("m_t must be at least n_t".into());
        }
        if self.m_schedule.windows(2).any(|w| w[0] > w[1]) {
            return bad("m_schedule must be nondecreasing".into());
        }
        if !(self.beta_f > 0.0 && self.beta_f < 1.0) {
            return bad(format!("beta_F must lie in (0,1), got {}", self.beta_f));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0,1), got {}", self.alpha));
        }
        if self.sampler.draws == 0 {
            return bad("sampler needs at least one draw".into());
        }
        Ok(())
    }

    fn check_boundaries(&self, b: &BoundarySchedule) -> Result<(), EngineError> {
        if b.n != self.n_schedule {
            return Err(EngineError::Config("boundary schedule was computed for other looks".into()));
        }
        Ok(())
    }
}

/// Priors for the three designs, derived from one joint prior (K = 1).
#[derive(Debug, Clone, PartialEq)]
pub struct DesignPriors {
    pub joint: PriorHyperparams,
    pub primary: SingleOutcomePrior,
    pub auxiliary: SingleOutcomePrior,
}

impl DesignPriors {
    pub fn from_joint(joint: &PriorHyperparams) -> Result<Self, EngineError> {
        if joint.k_count() != 1 {
            return Err(EngineError::Config("sequential designs use a single population".into()));
        }
        let g = &joint.groups[0];
        Ok(Self {
            joint: joint.clone(),
            primary: SingleOutcomePrior::matched_primary(g),
            auxiliary: SingleOutcomePrior::matched_auxiliary(g),
        })
    }

    pub fn model(&self, design: DesignKind) -> OutcomeModel {
        match design {
            DesignKind::AuxiliaryAugmented => OutcomeModel::Joint(self.joint.clone()),
            DesignKind::PrimaryOnly => OutcomeModel::Single {
                groups: vec![self.primary.clone()],
                xi: self.joint.xi,
            },
            DesignKind::AuxiliaryOnly => OutcomeModel::Single {
                groups: vec![self.auxiliary.clone()],
                xi: self.joint.xi,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Efficacy,
    Futility,
    Final,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageRecord {
    pub stage: usize,
    pub n: usize,
    pub m: usize,
    pub z: f64,
    pub threshold: f64,
    pub predictive: Option<f64>,
    /// Sampler diagnostics fell outside the accepted range.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequentialOutcome {
    /// 1-based stage at which the trial stopped.
    pub stop_stage: usize,
    pub rejected: bool,
    pub stopped_for: StopReason,
    /// Enrollments at the stopping look, m_{T*}.
    pub n_used: usize,
    pub stages: Vec<StageRecord>,
}

fn design_data(full: &TrialDataset, design: DesignKind) -> TrialDataset {
    match design {
        DesignKind::AuxiliaryOnly => full.auxiliary_as_primary(),
        _ => full.clone(),
    }
}

fn efficacy_z(data: &TrialDataset, n: usize) -> Result<f64, EngineError> {
    let d = data.restrict_to_stage(n, n)?;
    Ok(match &compute_summaries(&d)[0] {
        Ok(s) => s.z,
        Err(_) => f64::NEG_INFINITY,
    })
}

fn interim_sims(
    data: &TrialDataset,
    config: &GroupSeqConfig,
    priors: &DesignPriors,
    t: usize,
    seed: u64,
) -> Result<PredictiveSims, EngineError> {
    let d = data.restrict_to_stage(config.n_schedule[t], config.m_schedule[t])?;
    let draws = sample_posterior(
        &d,
        &priors.model(config.design),
        config.sampler,
        substream(seed, &format!("posterior-{t}")),
    )?;
    Ok(simulate_future_z(
        &d,
        &draws,
        &config.n_schedule[t + 1..],
        substream(seed, &format!("predictive-{t}")),
    )?)
}

fn check_input(full: &TrialDataset, config: &GroupSeqConfig) -> Result<(), EngineError> {
    config.validate()?;
    if full.k_count() != 1 {
        return Err(EngineError::Config("sequential designs use a single population".into()));
    }
    let needed = *config.m_schedule.last().unwrap();
    if full.len() < needed {
        return Err(EngineError::Config(format!(
            "trial has {} patients, the schedule needs {needed}",
            full.len()
        )));
    }
    Ok(())
}

/// Runs one trial through all looks.
pub fn run_sequential_trial(
    full_data: &TrialDataset,
    config: &GroupSeqConfig,
    priors: &DesignPriors,
    boundaries: &BoundarySchedule,
    seed: u64,
) -> Result<SequentialOutcome, EngineError> {
    check_input(full_data, config)?;
    config.check_boundaries(boundaries)?;
    let data = design_data(full_data, config.design);
    let t_max = config.stages();
    let mut stages = Vec::with_capacity(t_max);
    for t in 0..t_max {
        let z = efficacy_z(&data, config.n_schedule[t])?;
        let threshold = boundaries.thresholds[t];
        let mut rec = StageRecord {
            stage: t + 1,
            n: config.n_schedule[t],
            m: config.m_schedule[t],
            z,
            threshold,
            predictive: None,
            flagged: false,
        };
        if z > threshold {
            stages.push(rec);
            return Ok(finish(stages, t, true, StopReason::Efficacy, config));
        }
        if t + 1 == t_max {
            stages.push(rec);
            return Ok(finish(stages, t, false, StopReason::Final, config));
        }
        let sims = interim_sims(&data, config, priors, t, seed)?;
        let p = sims.success_prob(&boundaries.thresholds[t + 1..]);
        rec.predictive = Some(p);
        rec.flagged = sims.flagged;
        stages.push(rec);
        if p <= config.beta_f {
            return Ok(finish(stages, t, false, StopReason::Futility, config));
        }
    }
    unreachable!("the final look always returns")
}

fn finish(stages: Vec<StageRecord>, t: usize, rejected: bool, why: StopReason, config: &GroupSeqConfig) -> SequentialOutcome {
    SequentialOutcome {
        stop_stage: t + 1,
        rejected,
        stopped_for: why,
        n_used: config.m_schedule[t],
        stages,
    }
}

/// Everything about one trial that does not depend on (β_E, β_F): the Z
/// statistics at each look and the predictive simulations at each interim.
/// Scoring many parameter values on one prepared trial gives common random
/// numbers across candidates.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedTrial {
    pub n_schedule: Vec<usize>,
    pub m_schedule: Vec<usize>,
    pub z: Vec<f64>,
    pub sims: Vec<PredictiveSims>,
}

pub fn prepare_sequential_trial(
    full_data: &TrialDataset,
    config: &GroupSeqConfig,
    priors: &DesignPriors,
    seed: u64,
) -> Result<PreparedTrial, EngineError> {
    check_input(full_data, config)?;
    let data = design_data(full_data, config.design);
    let t_max = config.stages();
    let z = (0..t_max)
        .map(|t| efficacy_z(&data, config.n_schedule[t]))
        .collect::<Result<Vec<_>, _>>()?;
    let sims = (0..t_max - 1)
        .map(|t| interim_sims(&data, config, priors, t, seed))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PreparedTrial {
        n_schedule: config.n_schedule.clone(),
        m_schedule: config.m_schedule.clone(),
        z,
        sims,
    })
}

impl PreparedTrial {
    /// Decisions for a given boundary schedule and futility threshold. Equal
    /// to `run_sequential_trial` with the same seed.
    pub fn decide(&self, boundaries: &BoundarySchedule, beta_f: f64) -> SequentialOutcome {
        assert_eq!(boundaries.n, self.n_schedule, "boundary schedule was computed for other looks");
        let t_max = self.z.len();
        let mut stages = Vec::with_capacity(t_max);
        let fin = |stages, t: usize, rejected, why| SequentialOutcome {
            stop_stage: t + 1,
            rejected,
            stopped_for: why,
            n_used: self.m_schedule[t],
            stages,
        };
        for t in 0..t_max {
            let mut rec = StageRecord {
                stage: t + 1,
                n: self.n_schedule[t],
                m: self.m_schedule[t],
                z: self.z[t],
                threshold: boundaries.thresholds[t],
                predictive: None,
                flagged: false,
            };
            if rec.z > rec.threshold {
                stages.push(rec);
                return fin(stages, t, true, StopReason::Efficacy);
            }
            if t + 1 == t_max {
                stages.push(rec);
                return fin(stages, t, false, StopReason::Final);
            }
            let p = self.sims[t].success_prob(&boundaries.thresholds[t + 1..]);
            rec.predictive = Some(p);
            rec.flagged = self.sims[t].flagged;
            stages.push(rec);
            if p <= beta_f {
                return fin(stages, t, false, StopReason::Futility);
            }
        }
        unreachable!("the final look always returns")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groupseq::boundary_thresholds;
    use crate::prior::EffectSharing;
    use crate::rng::replicate_rng;
    use crate::scenario::{presets, simulate_trial};
    use proptest::prelude::*;

    fn setup(design: DesignKind) -> (GroupSeqConfig, DesignPriors, BoundarySchedule) {
        let mut cfg = GroupSeqConfig::two_stage(design, 2.0, 0.13);
        cfg.sampler = SamplerSettings { draws: 600, burn_in: 300 };
        let priors = DesignPriors::from_joint(&PriorHyperparams::reference(1, EffectSharing::Independent)).unwrap();
        let b = boundary_thresholds(&cfg.n_schedule, cfg.beta_e, cfg.alpha).unwrap();
        (cfg, priors, b)
    }

    fn trial(config: u8, seed: u64) -> TrialDataset {
        let spec = presets::single_population(config, 1.0).unwrap();
        simulate_trial(&spec, &mut replicate_rng(seed, 0)).unwrap()
    }

    #[test]
    fn outcome_invariants_and_prepared_equivalence() {
        for design in DesignKind::all() {
            let (cfg, priors, b) = setup(design);
            for s in 0..6 {
                let d = trial(4, s);
                let out = run_sequential_trial(&d, &cfg, &priors, &b, s).unwrap();
                let last = out.stages.last().unwrap();
                if out.rejected {
                    assert!(last.z > last.threshold);
                    assert_eq!(out.stopped_for, StopReason::Efficacy);
                }
                assert_eq!(out.n_used, cfg.m_schedule[out.stop_stage - 1]);
                let prep = prepare_sequential_trial(&d, &cfg, &priors, s).unwrap();
                let again = prep.decide(&b, cfg.beta_f);
                assert_eq!(again.rejected, out.rejected);
                assert_eq!(again.stop_stage, out.stop_stage);
                if let (Some(p), Some(q)) = (out.stages[0].predictive, again.stages[0].predictive) {
                    assert_eq!(p, q);
                }
            }
        }
    }

    #[test]
    fn discordant_auxiliary_triggers_futility() {
        // positive primary effect with negative auxiliary effect: the joint
        // model forces concordant signs, so predictions are pessimistic
        let (cfg, priors, b) = setup(DesignKind::AuxiliaryAugmented);
        let mut fut = 0;
        let mut looked = 0;
        for s in 0..12 {
            let out = run_sequential_trial(&trial(5, 100 + s), &cfg, &priors, &b, s).unwrap();
            if out.stages[0].predictive.is_some() {
                looked += 1;
                fut += (out.stopped_for == StopReason::Futility) as usize;
            }
        }
        assert!(looked > 0 && fut * 10 >= looked * 7, "{fut} of {looked}");
    }

    #[test]
    fn rejects_bad_configs() {
        let (mut cfg, priors, b) = setup(DesignKind::PrimaryOnly);
        let d = trial(1, 1);
        cfg.beta_f = 1.0;
        assert!(run_sequential_trial(&d, &cfg, &priors, &b, 0).is_err());
        cfg.beta_f = 0.1;
        cfg.m_schedule = vec![90, 200];
        assert!(cfg.validate().is_err());
        cfg.m_schedule = vec![100, 200];
        let other = boundary_thresholds(&[50, 200], 2.0, 0.05).unwrap();
        assert!(run_sequential_trial(&d, &cfg, &priors, &other, 0).is_err());
        let short = d.restrict_to_stage(150, 150).unwrap();
        assert!(run_sequential_trial(&short, &cfg, &priors, &b, 0).is_err());
    }

    #[test]
    fn enrollment_lag_adds_pending_auxiliary_data() {
        let (mut cfg, priors, b) = setup(DesignKind::AuxiliaryAugmented);
        cfg.m_schedule = vec![140, 200];
        let d = trial(4, 9);
        let out = run_sequential_trial(&d, &cfg, &priors, &b, 9).unwrap();
        if out.stopped_for == StopReason::Futility {
            assert_eq!(out.n_used, 140);
        }
        assert_eq!(out.stages[0].m, 140);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        // efficacy decisions depend on primary outcomes only
        #[test]
        fn efficacy_ignores_auxiliary(seed in 0u64..500, flips in proptest::collection::vec(any::<bool>(), 200)) {
            let d = trial(3, seed);
            let changed: Vec<_> = d
                .patients()
                .iter()
                .zip(&flips)
                .map(|(p, f)| crate::data::PatientRecord { auxiliary: p.auxiliary ^ f, ..*p })
                .collect();
            let d2 = TrialDataset::new(changed, 1).unwrap();
            for design in [DesignKind::AuxiliaryAugmented, DesignKind::PrimaryOnly] {
                for n in [100, 200] {
                    prop_assert_eq!(efficacy_z(&design_data(&d, design), n).unwrap(), efficacy_z(&design_data(&d2, design), n).unwrap());
                }
            }
        }
    }
}
