//! Posterior predictive probability that a future look crosses its efficacy
//! boundary.
//!
//! For every posterior draw the primary outcomes still to come are simulated:
//! pending outcomes of enrolled patients are imputed from p(Y | S, arm) and new
//! patients are drawn from the marginal p(Y | arm). Future futility looks are
//! ignored. The simulated Z statistics are kept so the same draws can be
//! scored against any boundary schedule.

use super::posterior::{Latent, PosteriorDraws};
use crate::data::{z_statistic, TrialDataset};
use crate::rng::rng_from_seed;
use crate::stats::{gh_for_sd, logistic, marginal_logistic};
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PredictiveError {
    #[error("predictive simulation supports a single population, got {0} groups")]
    MultipleGroups(usize),
    #[error("invalid look schedule: {0}")]
    Schedule(String),
}

/// Simulated future Z statistics, one row per posterior draw.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveSims {
    /// Primary-outcome counts at the future looks.
    pub looks: Vec<usize>,
    pub z: Vec<Vec<f64>>,
    pub flagged: bool,
}

impl PredictiveSims {
    /// Share of draws in which some future look has Z above its threshold.
    /// `thresholds` are aligned with `looks`.
    pub fn success_prob(&self, thresholds: &[f64]) -> f64 {
        assert_eq!(thresholds.len(), self.looks.len(), "one threshold per future look");
        if self.z.is_empty() {
            return 0.0;
        }
        let hits = self
            .z
            .iter()
            .filter(|row| row.iter().zip(thresholds).any(|(z, c)| z > c))
            .count();
        hits as f64 / self.z.len() as f64
    }
}

/// Per-arm success probabilities implied by one draw: marginal p(Y | arm)
/// and conditional p(Y | S = s, arm) indexed [arm][s].
fn draw_probs(d: &super::GroupParams, sigma2: f64, joint: bool) -> ([f64; 2], [[f64; 2]; 2]) {
    if !joint {
        let p = [logistic(d.intercept_y), logistic(d.intercept_y + d.slope_y)];
        return (p, [[p[0]; 2], [p[1]; 2]]);
    }
    let sd = sigma2.sqrt();
    let gh = gh_for_sd(sd);
    let lat = Latent::new(sigma2);
    let mut marg = [0.0; 2];
    let mut cond = [[0.0; 2]; 2];
    for c in 0..2 {
        let cf = c as f64;
        marg[c] = marginal_logistic(gh, d.intercept_y + d.slope_y * cf, sd);
        let (p, ps) = lat.cell_probs(d.intercept_y + d.slope_y * cf, d.intercept_s + d.slope_s * cf);
        for s in 0..2 {
            cond[c][s] = if ps[s] > 0.0 { p[1][s] / ps[s] } else { marg[c] };
        }
    }
    (marg, cond)
}

/// Simulates Z at each future look in `future_n` for every draw.
///
/// `data_t` is the interim dataset: patients in enrollment order, the first
/// ones with observed primary outcomes, the remainder pending.
pub fn simulate_future_z(
    data_t: &TrialDataset,
    draws: &PosteriorDraws,
    future_n: &[usize],
    seed: u64,
) -> Result<PredictiveSims, PredictiveError> {
    if data_t.k_count() != 1 {
        return Err(PredictiveError::MultipleGroups(data_t.k_count()));
    }
    let n_obs = data_t.primary_observed_count();
    if future_n.is_empty() || future_n[0] <= n_obs || future_n.windows(2).any(|w| w[0] >= w[1]) {
        return Err(PredictiveError::Schedule(format!(
            "future looks {future_n:?} must increase beyond the {n_obs} observed outcomes"
        )));
    }
    let mut patients = data_t.patients().to_vec();
    patients.sort_by_key(|p| p.enroll_order);
    let mut base = [[0u32; 2]; 2]; // [arm][y]
    let mut pending = Vec::new();
    for p in &patients {
        if p.primary_observed {
            base[p.arm.index()][p.primary as usize] += 1;
        } else {
            pending.push((p.arm.index(), p.auxiliary as usize));
        }
    }

    let mut rng = rng_from_seed(seed);
    let sigma2 = draws.sigma2.first().copied().unwrap_or(0.0);
    let mut z = Vec::with_capacity(draws.len());
    for d in &draws.draws {
        let (marg, cond) = draw_probs(&d[0], sigma2, draws.joint);
        let mut cnt = base;
        let mut pos = n_obs;
        let mut pend = pending.iter();
        let mut row = Vec::with_capacity(future_n.len());
        for &target in future_n {
            // enrolled patients with pending outcomes come first
            while pos < target {
                match pend.next() {
                    Some(&(arm, s)) => {
                        let y = rng.random::<f64>() < cond[arm][s];
                        cnt[arm][y as usize] += 1;
                        pos += 1;
                    }
                    None => break,
                }
            }
            if pos < target {
                let new = (target - pos) as u64;
                let n1 = Binomial::new(new, 0.5).expect("valid").sample(&mut rng);
                let n0 = new - n1;
                for (arm, n) in [(0usize, n0), (1usize, n1)] {
                    if n > 0 {
                        let y = Binomial::new(n, marg[arm].clamp(0.0, 1.0)).expect("valid").sample(&mut rng);
                        cnt[arm][1] += y as u32;
                        cnt[arm][0] += (n - y) as u32;
                    }
                }
                pos = target;
            }
            let (n0, n1) = (cnt[0][0] + cnt[0][1], cnt[1][0] + cnt[1][1]);
            row.push(if n0 == 0 || n1 == 0 {
                f64::NEG_INFINITY
            } else {
                z_statistic(cnt[0][1], n0, cnt[1][1], n1).2
            });
        }
        z.push(row);
    }
    Ok(PredictiveSims {
        looks: future_n.to_vec(),
        z,
        flagged: draws.non_convergence,
    })
}

/// pr(some future look t' > t crosses its threshold | interim data), where
/// `stage` is the 0-based index of the current look in `boundaries`.
pub fn predictive_success_prob(
    data_t: &TrialDataset,
    draws: &PosteriorDraws,
    boundaries: &super::BoundarySchedule,
    stage: usize,
    seed: u64,
) -> Result<f64, PredictiveError> {
    if stage + 1 >= boundaries.stages() {
        return Ok(0.0);
    }
    let sims = simulate_future_z(data_t, draws, &boundaries.n[stage + 1..], seed)?;
    Ok(sims.success_prob(&boundaries.thresholds[stage + 1..]))
}
