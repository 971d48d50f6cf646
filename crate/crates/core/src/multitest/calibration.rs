//! Parametric bootstrap calibration of the weighted Bonferroni level.
//!
//! Under the global primary null, draw (S̄_k, Ȳ_k) ~ N((S̃_k, 0), Σ̃_k) per group,
//! form weights and p-values, and pick the largest nominal level whose
//! estimated FWER stays below α.

use super::{weighted_softmax, MultitestError};
use crate::data::{group_counts, TrialDataset};
use crate::rng::replicate_rng;
use crate::stats::normal_sf;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

/// Per-group bootstrap input: estimated auxiliary effect and the 2×2
/// covariance of (S̄_k, Ȳ_k), in that order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationInput {
    pub sbar_tilde: f64,
    pub cov: [[f64; 2]; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub alpha_prime: f64,
    pub b: usize,
    pub seed: u64,
}

/// Plug-in inputs from observed data (binomial covariances including the
/// within-arm cross-covariance of S and Y).
pub fn calibration_inputs(data: &TrialDataset) -> Result<Vec<CalibrationInput>, MultitestError> {
    group_counts(data)
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let cov = c
                .covariance_sy()
                .ok_or(MultitestError::DegenerateCovariance { group: k })?;
            let s = c.summary(k).map_err(|_| MultitestError::DegenerateCovariance { group: k })?;
            Ok(CalibrationInput {
                sbar_tilde: s.sbar_diff,
                cov,
            })
        })
        .collect()
}

// Lower-triangular factor of a PSD 2×2 matrix; None if not PSD or if the
// primary variance is zero.
fn cholesky(cov: &[[f64; 2]; 2]) -> Option<(f64, f64, f64)> {
    let (vs, c, vy) = (cov[0][0], cov[0][1], cov[1][1]);
    if !(vs.is_finite() && vy.is_finite() && c.is_finite()) || (cov[1][0] - c).abs() > 1e-12 * (1.0 + c.abs()) {
        return None;
    }
    let tol = 1e-12 * (vs.abs() + vy.abs()).max(1e-300);
    if vs < -tol || vy <= 0.0 || vs * vy - c * c < -tol * (vs.abs() + vy.abs()) {
        return None;
    }
    let l11 = vs.max(0.0).sqrt();
    let l21 = if l11 > 0.0 { c / l11 } else { 0.0 };
    let l22 = (vy - l21 * l21).max(0.0).sqrt();
    Some((l11, l21, l22))
}

const BLOCK: usize = 256;

/// Draws the bootstrap statistics m_b = min_k pv_k / ω_k for b = 1..B.
fn bootstrap_minima(
    inputs: &[CalibrationInput],
    beta: &[f64],
    prior_weights: Option<&[f64]>,
    b: usize,
    seed: u64,
) -> Result<Vec<f64>, MultitestError> {
    let factors: Vec<(f64, f64, f64)> = inputs
        .iter()
        .enumerate()
        .map(|(k, i)| cholesky(&i.cov).ok_or(MultitestError::DegenerateCovariance { group: k }))
        .collect::<Result<_, _>>()?;
    let k = inputs.len();
    let blocks = b.div_ceil(BLOCK);
    let out: Vec<Vec<f64>> = (0..blocks)
        .into_par_iter()
        .map(|blk| {
            let mut rng = replicate_rng(seed, blk as u64);
            let n = BLOCK.min(b - blk * BLOCK);
            let mut sbar = vec![0.0; k];
            let mut pv = vec![0.0; k];
            (0..n)
                .map(|_| {
                    for g in 0..k {
                        let (l11, l21, l22) = factors[g];
                        let z1: f64 = StandardNormal.sample(&mut rng);
                        let z2: f64 = StandardNormal.sample(&mut rng);
                        sbar[g] = inputs[g].sbar_tilde + l11 * z1;
                        let ybar = l21 * z1 + l22 * z2;
                        pv[g] = normal_sf(ybar / inputs[g].cov[1][1].sqrt());
                    }
                    let w = weighted_softmax(beta, &sbar, prior_weights);
                    pv.iter().zip(&w).map(|(p, w)| p / w).fold(f64::INFINITY, f64::min)
                })
                .collect()
        })
        .collect();
    Ok(out.into_iter().flatten().collect())
}

/// Estimated FWER at nominal level t: the share of draws with some
/// pv_k < ω_k·t, i.e. m_b < t.
pub fn fwer_hat(minima: &[f64], t: f64) -> f64 {
    minima.iter().filter(|m| **m < t).count() as f64 / minima.len() as f64
}

/// α′ = inf{t ∈ [0,1] : FWER-hat(t) ≥ α}. FWER-hat is a step function with
/// jumps at the sorted minima, so the infimum is the ⌈αB⌉-th smallest one.
pub fn bootstrap_calibrate(
    inputs: &[CalibrationInput],
    beta: &[f64],
    prior_weights: Option<&[f64]>,
    alpha: f64,
    b: usize,
    seed: u64,
) -> Result<Calibration, MultitestError> {
    if inputs.is_empty() || beta.len() != inputs.len() {
        return Err(MultitestError::Invalid("one beta per calibration input is required".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(MultitestError::Invalid(format!("alpha must lie in (0,1), got {alpha}")));
    }
    if b < 1000 {
        return Err(MultitestError::Invalid(format!("need at least 1000 bootstrap draws, got {b}")));
    }
    let mut m = bootstrap_minima(inputs, beta, prior_weights, b, seed)?;
    m.sort_by(|a, b| a.total_cmp(b));
    let j = ((alpha * b as f64).ceil() as usize).clamp(1, b);
    Ok(Calibration {
        alpha_prime: m[j - 1].min(1.0),
        b,
        seed,
    })
}
