//! Joint Bayesian logistic model for primary and auxiliary outcomes.
//!
//! For patient i in group k with arm c and latent ε ~ N(0, σ²_k):
//!
//! ```text
//! pr(Y = 1) = F(ζY0_k + ζY1_k·c + ε)      pr(S = 1) = F(ζS0_k + ζS1_k·c + ε)
//! ζS1_k ~ ξ·δ0 + (1 − ξ)·N(m_S, σ²_S)      ζY1_k = c_Y,k · ζS1_k,  c_Y,k ~ Beta(v, o)
//! ```
//!
//! Y and S are conditionally independent given ε, which induces their
//! correlation. Treatment effects can be drawn per group or shared.

use crate::data::{Arm, PatientRecord, TrialDataset};
use crate::rng::replicate_rng;
use crate::scenario::{cumulative, draw_index};
use crate::stats::{gh_for_sd, logistic, marginal_logistic, mean, pearson, quantile_sorted};
use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PriorError {
    #[error("invalid prior: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupPrior {
    pub intercept_y_mean: f64,
    pub intercept_y_sd: f64,
    pub intercept_s_mean: f64,
    pub intercept_s_sd: f64,
    pub sigma2: f64,
    pub slab_mean: f64,
    pub slab_var: f64,
    pub beta_shape_v: f64,
    pub beta_shape_o: f64,
    /// Optional point mass at zero for c_Y (sensitivity variant). Default 0.
    #[serde(default)]
    pub c_spike: f64,
}

/// How the spike indicator and slab value of ζS1 relate across groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EffectSharing {
    /// Each group draws its own spike indicator and slab value.
    #[default]
    Independent,
    /// One spike indicator and one slab value for all groups; intercepts
    /// and c_Y stay group-specific. Slab parameters come from group 0.
    Shared,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorHyperparams {
    pub groups: Vec<GroupPrior>,
    pub xi: f64,
    #[serde(default)]
    pub sharing: EffectSharing,
}

impl GroupPrior {
    /// The reference hyperparameters used for the simulation studies.
    pub fn reference() -> Self {
        Self {
            intercept_y_mean: -1.5,
            intercept_y_sd: 0.5,
            intercept_s_mean: -0.8,
            intercept_s_sd: 0.5,
            sigma2: 1.0,
            slab_mean: 0.0,
            slab_var: 0.8,
            beta_shape_v: 6.0,
            beta_shape_o: 1.0,
            c_spike: 0.0,
        }
    }
}

impl PriorHyperparams {
    /// Reference prior replicated over `k` groups.
    pub fn reference(k: usize, sharing: EffectSharing) -> Self {
        Self {
            groups: vec![GroupPrior::reference(); k],
            xi: 0.1,
            sharing,
        }
    }

    pub fn k_count(&self) -> usize {
        self.groups.len()
    }

    /// Index of the effect slot (spike + slab value) used by group `k`.
    pub fn effect_slot(&self, k: usize) -> usize {
        match self.sharing {
            EffectSharing::Independent => k,
            EffectSharing::Shared => 0,
        }
    }

    pub fn effect_slots(&self) -> usize {
        match self.sharing {
            EffectSharing::Independent => self.groups.len(),
            EffectSharing::Shared => 1,
        }
    }

    pub fn validate(&self) -> Result<(), PriorError> {
        let bad = |m: String| Err(PriorError::Invalid(m));
        if self.groups.is_empty() {
            return bad("at least one group prior is required".into());
        }
        if !(0.0..=1.0).contains(&self.xi) {
            return bad(format!("xi must lie in [0,1], got {}", self.xi));
        }
        for (k, g) in self.groups.iter().enumerate() {
            let pos = [
                ("intercept_y_sd", g.intercept_y_sd),
                ("intercept_s_sd", g.intercept_s_sd),
                ("slab_var", g.slab_var),
                ("beta_shape_v", g.beta_shape_v),
                ("beta_shape_o", g.beta_shape_o),
            ];
            for (name, v) in pos {
                if !(v > 0.0 && v.is_finite()) {
                    return bad(format!("group {k}: {name} must be positive, got {v}"));
                }
            }
            if !(g.sigma2 >= 0.0 && g.sigma2.is_finite()) {
                return bad(format!("group {k}: sigma2 must be nonnegative"));
            }
            if !(0.0..=1.0).contains(&g.c_spike) {
                return bad(format!("group {k}: c_spike must lie in [0,1]"));
            }
            let finite = [g.intercept_y_mean, g.intercept_s_mean, g.slab_mean];
            if finite.iter().any(|v| !v.is_finite()) {
                return bad(format!("group {k}: means must be finite"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupTheta {
    pub intercept_y: f64,
    pub intercept_s: f64,
    /// ζS1
    pub slope_s: f64,
    /// ζY1 = c_Y · ζS1
    pub slope_y: f64,
    pub c_y: f64,
    pub spike: bool,
    pub sigma2: f64,
    /// Latent-integrated difference in marginal pr(Y = 1) between arms.
    pub gamma: f64,
}

impl GroupTheta {
    pub fn new(intercept_y: f64, intercept_s: f64, slope_s: f64, c_y: f64, spike: bool, sigma2: f64) -> Self {
        let slope_s = if spike { 0.0 } else { slope_s };
        let slope_y = c_y * slope_s;
        let sd = sigma2.sqrt();
        let gh = gh_for_sd(sd);
        let gamma = if slope_y == 0.0 {
            0.0
        } else {
            marginal_logistic(gh, intercept_y + slope_y, sd) - marginal_logistic(gh, intercept_y, sd)
        };
        Self {
            intercept_y,
            intercept_s,
            slope_s,
            slope_y,
            c_y,
            spike,
            sigma2,
            gamma,
        }
    }

    /// Marginal pr(Y = 1) and pr(S = 1) in an arm.
    pub fn marginals(&self, arm: Arm) -> (f64, f64) {
        let c = arm.index() as f64;
        let sd = self.sigma2.sqrt();
        let gh = gh_for_sd(sd);
        (
            marginal_logistic(gh, self.intercept_y + self.slope_y * c, sd),
            marginal_logistic(gh, self.intercept_s + self.slope_s * c, sd),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThetaDraw {
    pub groups: Vec<GroupTheta>,
}

impl ThetaDraw {
    pub fn gammas(&self) -> Vec<f64> {
        self.groups.iter().map(|g| g.gamma).collect()
    }
}

/// Draws θ from the prior.
pub fn sample_theta<R: Rng + ?Sized>(hyper: &PriorHyperparams, rng: &mut R) -> ThetaDraw {
    let slots: Vec<(bool, f64)> = (0..hyper.effect_slots())
        .map(|j| {
            let g = &hyper.groups[j];
            let spike = rng.random::<f64>() < hyper.xi;
            let z: f64 = StandardNormal.sample(rng);
            (spike, g.slab_mean + g.slab_var.sqrt() * z)
        })
        .collect();
    let groups = hyper
        .groups
        .iter()
        .enumerate()
        .map(|(k, g)| {
            let zy: f64 = StandardNormal.sample(rng);
            let zs: f64 = StandardNormal.sample(rng);
            let c_y = Beta::new(g.beta_shape_v, g.beta_shape_o)
                .expect("validated shapes")
                .sample(rng);
            let c_zero = rng.random::<f64>() < g.c_spike;
            let (spike, slab) = slots[hyper.effect_slot(k)];
            GroupTheta::new(
                g.intercept_y_mean + g.intercept_y_sd * zy,
                g.intercept_s_mean + g.intercept_s_sd * zs,
                slab,
                if c_zero { 0.0 } else { c_y },
                spike,
                g.sigma2,
            )
        })
        .collect();
    ThetaDraw { groups }
}

/// Generates a trial of `n` patients given θ.
pub fn sample_trial_from_prior<R: Rng + ?Sized>(
    theta: &ThetaDraw,
    n: usize,
    prevalence: &[f64],
    rng: &mut R,
) -> TrialDataset {
    assert_eq!(theta.groups.len(), prevalence.len(), "one prevalence per group");
    let cum = cumulative(prevalence);
    let sds: Vec<f64> = theta.groups.iter().map(|g| g.sigma2.sqrt()).collect();
    let patients = (0..n)
        .map(|i| {
            let group = draw_index(&cum, rng.random::<f64>());
            let arm = if rng.random::<bool>() {
                Arm::Experimental
            } else {
                Arm::Control
            };
            let g = &theta.groups[group];
            let c = arm.index() as f64;
            let z: f64 = StandardNormal.sample(rng);
            let eps = sds[group] * z;
            let py = logistic(g.intercept_y + g.slope_y * c + eps);
            let ps = logistic(g.intercept_s + g.slope_s * c + eps);
            PatientRecord {
                group,
                arm,
                primary: rng.random::<f64>() < py,
                auxiliary: rng.random::<f64>() < ps,
                enroll_order: i as u64,
                primary_observed: true,
            }
        })
        .collect();
    TrialDataset::new(patients, theta.groups.len()).expect("groups in range")
}

/// Draws a (θ, D) pair for replicate `index`.
pub fn sample_pair(
    hyper: &PriorHyperparams,
    n: usize,
    prevalence: &[f64],
    master_seed: u64,
    index: u64,
) -> (ThetaDraw, TrialDataset) {
    let mut rng = replicate_rng(master_seed, index);
    let theta = sample_theta(hyper, &mut rng);
    let data = sample_trial_from_prior(&theta, n, prevalence, &mut rng);
    (theta, data)
}

/// Distribution summary of one prior-predictive characteristic.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub label: String,
    pub mean: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl SummaryRow {
    fn from_values(label: &str, values: &[f64]) -> Self {
        let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
        v.sort_by(|a, b| a.total_cmp(b));
        Self {
            label: label.to_string(),
            mean: mean(&v),
            min: v.first().copied().unwrap_or(f64::NAN),
            q1: quantile_sorted(&v, 0.25),
            median: quantile_sorted(&v, 0.5),
            q3: quantile_sorted(&v, 0.75),
            max: v.last().copied().unwrap_or(f64::NAN),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriorPredictiveReport {
    pub replicates: usize,
    pub rows: Vec<SummaryRow>,
    /// Correlation across replicates between the trial-level treatment
    /// effects (difference in proportions) on Y and on S.
    pub te_correlation: f64,
}

impl PriorPredictiveReport {
    pub fn row(&self, label: &str) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("characteristic,mean,min,q1,median,q3,max\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:.3},{:.3},{:.3},{:.3},{:.3},{:.3}\n",
                r.label, r.mean, r.min, r.q1, r.median, r.q3, r.max
            ));
        }
        out.push_str(&format!("TE correlation (Y vs S),{:.3},,,,,\n", self.te_correlation));
        out
    }
}

pub const ROW_Y_SOC: &str = "Proportion Y=1 (SOC)";
pub const ROW_Y_TRT: &str = "Proportion Y=1 (Treated)";
pub const ROW_TE_Y: &str = "Difference in proportions (TE) for Y";
pub const ROW_S_SOC: &str = "Proportion S=1 (SOC)";
pub const ROW_S_TRT: &str = "Proportion S=1 (Treated)";
pub const ROW_TE_S: &str = "Difference in proportions (TE) for S";
pub const ROW_CORR: &str = "Correlation between Y and S";
pub const ROW_CORR_SOC: &str = "Correlation between Y and S (SOC only)";

/// Characteristics of simulated trials under the prior: arm-wise proportions,
/// treatment effects and the within-trial Y–S correlation (pooled over arms
/// and groups; the SOC-only correlation is reported as an extra row).
pub fn prior_predictive_report(
    hyper: &PriorHyperparams,
    n: usize,
    prevalence: &[f64],
    replicates: usize,
    seed: u64,
) -> Result<PriorPredictiveReport, PriorError> {
    hyper.validate()?;
    if replicates < 100 {
        return Err(PriorError::Invalid("prior-predictive report needs >= 100 replicates".into()));
    }
    if prevalence.len() != hyper.k_count() {
        return Err(PriorError::Invalid("one prevalence per group is required".into()));
    }
    let stats: Vec<[f64; 8]> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let (_, d) = sample_pair(hyper, n, prevalence, seed, r);
            let mut n_arm = [0f64; 2];
            let mut y = [0f64; 2];
            let mut s = [0f64; 2];
            let (mut ys, mut ss) = (Vec::with_capacity(n), Vec::with_capacity(n));
            let (mut ys0, mut ss0) = (Vec::new(), Vec::new());
            for p in d.patients() {
                let a = p.arm.index();
                let (yv, sv) = (p.primary as u8 as f64, p.auxiliary as u8 as f64);
                n_arm[a] += 1.0;
                y[a] += yv;
                s[a] += sv;
                ys.push(yv);
                ss.push(sv);
                if a == 0 {
                    ys0.push(yv);
                    ss0.push(sv);
                }
            }
            let py = [y[0] / n_arm[0], y[1] / n_arm[1]];
            let ps = [s[0] / n_arm[0], s[1] / n_arm[1]];
            [
                py[0],
                py[1],
                py[1] - py[0],
                ps[0],
                ps[1],
                ps[1] - ps[0],
                pearson(&ys, &ss),
                pearson(&ys0, &ss0),
            ]
        })
        .collect();
    let col = |j: usize| stats.iter().map(|s| s[j]).collect::<Vec<f64>>();
    let labels = [
        ROW_Y_SOC, ROW_Y_TRT, ROW_TE_Y, ROW_S_SOC, ROW_S_TRT, ROW_TE_S, ROW_CORR, ROW_CORR_SOC,
    ];
    let rows = labels
        .iter()
        .enumerate()
        .map(|(j, l)| SummaryRow::from_values(l, &col(j)))
        .collect();
    let (te_y, te_s): (Vec<f64>, Vec<f64>) = stats
        .iter()
        .filter(|s| s[2].is_finite() && s[5].is_finite())
        .map(|s| (s[2], s[5]))
        .unzip();
    Ok(PriorPredictiveReport {
        replicates,
        rows,
        te_correlation: pearson(&te_y, &te_s),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use approx::assert_abs_diff_eq;

    #[test]
    fn degenerate_spike_removes_effects() {
        let mut h = PriorHyperparams::reference(2, EffectSharing::Independent);
        h.xi = 1.0;
        let mut rng = rng_from_seed(1);
        for _ in 0..200 {
            let t = sample_theta(&h, &mut rng);
            for g in &t.groups {
                assert!(g.spike);
                assert_eq!((g.slope_s, g.slope_y, g.gamma), (0.0, 0.0, 0.0));
            }
        }
    }

    #[test]
    fn product_constraint_and_gamma_sign() {
        for sharing in [EffectSharing::Independent, EffectSharing::Shared] {
            let h = PriorHyperparams::reference(3, sharing);
            let mut rng = rng_from_seed(2);
            for _ in 0..2000 {
                let t = sample_theta(&h, &mut rng);
                for g in &t.groups {
                    assert_eq!(g.slope_y, g.c_y * g.slope_s);
                    assert!(g.c_y >= 0.0);
                    assert_eq!(g.gamma.signum() * (g.gamma != 0.0) as u8 as f64,
                        g.slope_y.signum() * (g.slope_y != 0.0) as u8 as f64);
                }
                if sharing == EffectSharing::Shared {
                    assert!(t.groups.iter().all(|g| g.spike == t.groups[0].spike
                        && g.slope_s == t.groups[0].slope_s));
                }
            }
        }
    }

    #[test]
    fn gauss_hermite_matches_monte_carlo() {
        let mut rng = rng_from_seed(3);
        let z: Vec<f64> = (0..1_000_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        for &a in &[-2.5, -1.0, 0.0, 0.7] {
            for &b in &[-1.0, 0.0, 1.5] {
                for &s2 in &[0.25, 1.0, 4.0] {
                    let sd: f64 = f64::sqrt(s2);
                    let q = marginal_logistic(gh_for_sd(sd), a + b, sd);
                    let mc = z.iter().map(|z| logistic(a + b + sd * z)).sum::<f64>() / z.len() as f64;
                    assert!((q - mc).abs() < 5e-4, "a={a} b={b} s2={s2}: {q} vs {mc}");
                }
            }
        }
        // and much tighter against a fine trapezoid on the density
        let sd = 3.0;
        let n = 200_000;
        let (lo, hi) = (-12.0 * sd, 12.0 * sd);
        let h = (hi - lo) / n as f64;
        for a in [-3.0, -1.0, 0.5, 2.0] {
            let mut trap = 0.0;
            for i in 0..=n {
                let e = lo + h * i as f64;
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                trap += w * logistic(a + e) * crate::stats::normal_pdf(e / sd) / sd;
            }
            assert_abs_diff_eq!(marginal_logistic(gh_for_sd(sd), a, sd), trap * h, epsilon = 1e-6);
        }
    }

    fn within_arm_corr(sigma2: f64, seed: u64) -> (f64, usize) {
        let theta = ThetaDraw {
            groups: vec![GroupTheta::new(-0.5, 0.0, 0.0, 0.5, true, sigma2)],
        };
        let d = sample_trial_from_prior(&theta, 1_000_000, &[1.0], &mut rng_from_seed(seed));
        let (ys, ss): (Vec<f64>, Vec<f64>) = d
            .patients()
            .iter()
            .filter(|p| p.arm == Arm::Control)
            .map(|p| (p.primary as u8 as f64, p.auxiliary as u8 as f64))
            .unzip();
        (pearson(&ys, &ss), ys.len())
    }

    #[test]
    fn latent_variance_drives_correlation() {
        let (r0, _) = within_arm_corr(0.0, 4);
        assert!(r0.abs() < 0.02, "{r0}");
        let (r1, n1) = within_arm_corr(1.0, 5);
        let (r4, n4) = within_arm_corr(4.0, 6);
        // Fisher z one-sided test at 0.001
        let zf = |r: f64| 0.5 * ((1.0 + r) / (1.0 - r)).ln();
        let stat = (zf(r4) - zf(r1)) / (1.0 / (n1 as f64 - 3.0) + 1.0 / (n4 as f64 - 3.0)).sqrt();
        assert!(stat > 3.09, "{r1} vs {r4}");
    }

    #[test]
    fn spike_only_prior_has_no_mean_effect() {
        let mut h = PriorHyperparams::reference(2, EffectSharing::Independent);
        h.xi = 1.0;
        let rep = prior_predictive_report(&h, 200, &[0.6, 0.4], 1000, 9).unwrap();
        assert!(rep.row(ROW_TE_Y).unwrap().mean.abs() < 0.005);
        assert!(rep.row(ROW_TE_S).unwrap().mean.abs() < 0.005);
        assert!(rep.to_csv().lines().count() == 10);
    }

    #[test]
    fn validation() {
        let mut h = PriorHyperparams::reference(1, EffectSharing::Independent);
        assert!(h.validate().is_ok());
        h.groups[0].slab_var = 0.0;
        assert!(h.validate().is_err());
        let mut h = PriorHyperparams::reference(1, EffectSharing::Independent);
        h.xi = 1.5;
        assert!(h.validate().is_err());
    }
}
