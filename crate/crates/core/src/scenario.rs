//! Ground-truth data generation: correlated binary (Y, S) pairs with given
//! margins and odds ratio, multinomial group enrollment, 1:1 randomization,
//! and a resample-with-perturbation harness over a control pool.

use crate::data::{Arm, PatientRecord, TrialDataset};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("no root of the odds-ratio quadratic inside the Fréchet bounds (pY={py}, pS={ps}, R={r})")]
    NoValidRoot { py: f64, ps: f64, r: f64 },
    #[error("control pool has no records with an observed primary outcome")]
    EmptyPool,
}

/// Probabilities of the four (Y, S) cells. `p10` is P(Y=1, S=0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointCell {
    pub p11: f64,
    pub p10: f64,
    pub p01: f64,
    pub p00: f64,
}

impl JointCell {
    pub fn odds_ratio(&self) -> f64 {
        self.p11 * self.p00 / (self.p10 * self.p01)
    }

    /// Maps a uniform draw to a cell; returns (y, s).
    #[inline]
    pub fn draw(&self, u: f64) -> (bool, bool) {
        if u < self.p11 {
            (true, true)
        } else if u < self.p11 + self.p10 {
            (true, false)
        } else if u < self.p11 + self.p10 + self.p01 {
            (false, true)
        } else {
            (false, false)
        }
    }
}

/// Joint distribution of two binary variables with margins `py`, `ps` and
/// odds ratio `r`.
pub fn solve_joint(py: f64, ps: f64, r: f64) -> Result<JointCell, ScenarioError> {
    let valid = |p: f64| p > 0.0 && p < 1.0;
    if !valid(py) || !valid(ps) || !(r > 0.0 && r.is_finite()) {
        return Err(ScenarioError::Invalid(format!(
            "need pY, pS in (0,1) and R > 0, got ({py}, {ps}, {r})"
        )));
    }
    let lo = (py + ps - 1.0).max(0.0);
    let hi = py.min(ps);
    let p11 = if r == 1.0 {
        py * ps
    } else {
        let a = r - 1.0;
        let b = -(a * (py + ps) + 1.0);
        let c = r * py * ps;
        let disc = b * b - 4.0 * a * c;
        let slack = 1e-12;
        let closed = if disc >= 0.0 {
            // numerically stable pair of roots
            let q = -0.5 * (b + b.signum() * disc.sqrt());
            [q / a, c / q]
                .into_iter()
                .find(|p| *p >= lo - slack && *p <= hi + slack)
        } else {
            None
        };
        match closed {
            Some(p) if disc > 1e-14 => p.clamp(lo, hi),
            _ => bisect_p11(py, ps, r, lo, hi)
                .ok_or(ScenarioError::NoValidRoot { py, ps, r })?,
        }
    };
    let p10 = py - p11;
    let p01 = ps - p11;
    Ok(JointCell {
        p11,
        p10,
        p01,
        p00: 1.0 - py - ps + p11,
    })
}

// g(p) = p·p00 − R·p10·p01 is increasing on the Fréchet interval and changes
// sign across it, so plain bisection always brackets the root.
fn bisect_p11(py: f64, ps: f64, r: f64, mut lo: f64, mut hi: f64) -> Option<f64> {
    let g = |p: f64| p * (1.0 - py - ps + p) - r * (py - p) * (ps - p);
    if g(lo) > 0.0 || g(hi) < 0.0 {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-17 {
            break;
        }
    }
    Some(0.5 * (lo + hi))
}

/// A frequentist data-generating configuration. Indexing is `[group][arm]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    #[serde(default)]
    pub name: String,
    pub p_primary: Vec<[f64; 2]>,
    pub p_auxiliary: Vec<[f64; 2]>,
    pub odds_ratio: Vec<[f64; 2]>,
    pub prevalence: Vec<f64>,
    pub n_total: usize,
}

impl ScenarioSpec {
    pub fn k_count(&self) -> usize {
        self.prevalence.len()
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let k = self.prevalence.len();
        let bad = |m: String| Err(ScenarioError::Invalid(m));
        if k == 0 {
            return bad("prevalence must list at least one group".into());
        }
        if self.p_primary.len() != k || self.p_auxiliary.len() != k || self.odds_ratio.len() != k {
            return bad(format!(
                "p_primary, p_auxiliary and odds_ratio must each have {k} entries"
            ));
        }
        let prob = |p: f64| p > 0.0 && p < 1.0;
        for g in 0..k {
            for c in 0..2 {
                if !prob(self.p_primary[g][c]) || !prob(self.p_auxiliary[g][c]) {
                    return bad(format!("group {g} arm {c}: probabilities must lie in (0,1)"));
                }
                if !(self.odds_ratio[g][c] > 0.0 && self.odds_ratio[g][c].is_finite()) {
                    return bad(format!("group {g} arm {c}: odds ratio must be positive"));
                }
            }
        }
        if self.prevalence.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return bad("prevalences must lie in [0,1]".into());
        }
        let total: f64 = self.prevalence.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return bad(format!("prevalences sum to {total}, not 1"));
        }
        if self.n_total == 0 {
            return bad("n_total must be positive".into());
        }
        Ok(())
    }

    /// Joint cells indexed `[group][arm]`.
    pub fn cells(&self) -> Result<Vec<[JointCell; 2]>, ScenarioError> {
        self.validate()?;
        (0..self.k_count())
            .map(|g| {
                Ok([
                    solve_joint(self.p_primary[g][0], self.p_auxiliary[g][0], self.odds_ratio[g][0])?,
                    solve_joint(self.p_primary[g][1], self.p_auxiliary[g][1], self.odds_ratio[g][1])?,
                ])
            })
            .collect()
    }

    /// Groups with no effect on the primary outcome (true nulls).
    pub fn null_groups(&self) -> Vec<bool> {
        self.p_primary.iter().map(|p| p[1] <= p[0]).collect()
    }
}

/// Inverse-CDF draw from a discrete distribution.
#[inline]
pub(crate) fn draw_index(cum: &[f64], u: f64) -> usize {
    cum.iter().position(|&c| u < c).unwrap_or(cum.len() - 1)
}

pub(crate) fn cumulative(p: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    p.iter()
        .map(|x| {
            acc += x;
            acc
        })
        .collect()
}

/// Simulates one trial of `spec.n_total` patients.
pub fn simulate_trial<R: Rng + ?Sized>(spec: &ScenarioSpec, rng: &mut R) -> Result<TrialDataset, ScenarioError> {
    let cells = spec.cells()?;
    Ok(simulate_with_cells(spec, &cells, rng))
}

/// As [`simulate_trial`] with precomputed cells, for hot loops.
pub fn simulate_with_cells<R: Rng + ?Sized>(
    spec: &ScenarioSpec,
    cells: &[[JointCell; 2]],
    rng: &mut R,
) -> TrialDataset {
    let cum = cumulative(&spec.prevalence);
    let patients = (0..spec.n_total)
        .map(|i| {
            let group = draw_index(&cum, rng.random::<f64>());
            let arm = if rng.random::<bool>() {
                Arm::Experimental
            } else {
                Arm::Control
            };
            let (y, s) = cells[group][arm.index()].draw(rng.random::<f64>());
            PatientRecord {
                group,
                arm,
                primary: y,
                auxiliary: s,
                enroll_order: i as u64,
                primary_observed: true,
            }
        })
        .collect();
    TrialDataset::new(patients, spec.k_count()).expect("generated groups are in range")
}

/// In-silico two-arm trial built from a control pool: patients are drawn with
/// replacement and randomized 1:1; experimental-arm negatives flip to positive
/// with probability `p_y` (primary) and `p_s` (auxiliary), independently.
pub fn resample_perturb<R: Rng + ?Sized>(
    pool: &TrialDataset,
    p_y: f64,
    p_s: f64,
    n: usize,
    rng: &mut R,
) -> Result<TrialDataset, ScenarioError> {
    if !(0.0..=1.0).contains(&p_y) || !(0.0..=1.0).contains(&p_s) {
        return Err(ScenarioError::Invalid(format!(
            "perturbation probabilities must lie in [0,1], got ({p_y}, {p_s})"
        )));
    }
    let records: Vec<(bool, bool)> = pool
        .patients()
        .iter()
        .filter(|p| p.primary_observed)
        .map(|p| (p.primary, p.auxiliary))
        .collect();
    if records.is_empty() {
        return Err(ScenarioError::EmptyPool);
    }
    let patients = (0..n)
        .map(|i| {
            let (mut y, mut s) = records[rng.random_range(0..records.len())];
            let arm = if rng.random::<bool>() {
                Arm::Experimental
            } else {
                Arm::Control
            };
            // always consume the same number of draws so arms stay aligned
            let uy: f64 = rng.random();
            let us: f64 = rng.random();
            if arm == Arm::Experimental {
                y |= uy < p_y;
                s |= us < p_s;
            }
            PatientRecord {
                group: 0,
                arm,
                primary: y,
                auxiliary: s,
                enroll_order: i as u64,
                primary_observed: true,
            }
        })
        .collect();
    Ok(TrialDataset::new(patients, 1).expect("single group"))
}

/// The five effect configurations used throughout the simulation studies,
/// applied to the first group; other groups are always null.
pub mod presets {
    use super::ScenarioSpec;

    pub const CONTROL_PY: f64 = 0.2;
    pub const CONTROL_PS: f64 = 0.5;
    pub const EFFECT_PY: f64 = 0.4;
    pub const EFFECT_PS: f64 = 0.75;

    /// `(p_primary, p_auxiliary)` for the first group under configuration 1..=5.
    pub fn configuration(config: u8) -> Option<([f64; 2], [f64; 2])> {
        let (c_y, c_s, e_y, e_s) = (CONTROL_PY, CONTROL_PS, EFFECT_PY, EFFECT_PS);
        Some(match config {
            1 => ([c_y, c_y], [c_s, c_s]),
            2 => ([c_y, c_y], [c_s, e_s]),
            3 => ([c_y, e_y], [c_s, c_s]),
            4 => ([c_y, e_y], [c_s, e_s]),
            // negative auxiliary effect: swap the auxiliary margins across arms
            5 => ([c_y, e_y], [e_s, c_s]),
            _ => return None,
        })
    }

    fn build(config: u8, odds_ratio: f64, prevalence: Vec<f64>, n_total: usize, tag: &str) -> Option<ScenarioSpec> {
        let (py, ps) = configuration(config)?;
        let k = prevalence.len();
        let mut p_primary = vec![[CONTROL_PY, CONTROL_PY]; k];
        let mut p_auxiliary = vec![[CONTROL_PS, CONTROL_PS]; k];
        p_primary[0] = py;
        p_auxiliary[0] = ps;
        Some(ScenarioSpec {
            name: format!("{tag}-s{config}-r{odds_ratio}"),
            p_primary,
            p_auxiliary,
            odds_ratio: vec![[odds_ratio; 2]; k],
            prevalence,
            n_total,
        })
    }

    /// Two subgroups, prevalences 0.6/0.4, N = 200.
    pub fn two_groups(config: u8, odds_ratio: f64) -> Option<ScenarioSpec> {
        build(config, odds_ratio, vec![0.6, 0.4], 200, "k2")
    }

    /// Six subgroups, prevalences 0.25 then 0.15 × 5, N = 600.
    pub fn six_groups(config: u8, odds_ratio: f64) -> Option<ScenarioSpec> {
        let mut prev = vec![0.15; 6];
        prev[0] = 0.25;
        build(config, odds_ratio, prev, 600, "k6")
    }

    /// Single population, N = 200, for the sequential design.
    pub fn single_population(config: u8, odds_ratio: f64) -> Option<ScenarioSpec> {
        build(config, odds_ratio, vec![1.0], 200, "seq")
    }
}
