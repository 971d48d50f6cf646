//! Grid search with smoothing, and simulated annealing.

use super::mc::{prepare_pool, DecisionEngine, Estimate, UtilityError};
use super::{expected_utility_mc, local_linear_smooth};
use crate::rng::{rng_from_seed, substream};
use crate::stats::quantile_sorted;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

/// Utilities of every candidate on every replicate (rows are replicates).
#[derive(Debug, Clone, PartialEq)]
pub struct GridEvaluation {
    pub params: Vec<Vec<f64>>,
    pub utilities: Vec<Vec<f64>>,
    pub failed: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UtilityCurve {
    pub params: Vec<Vec<f64>>,
    pub raw: Vec<f64>,
    pub se: Vec<f64>,
    pub smoothed: Vec<f64>,
    pub argmax: usize,
    pub argmax_param: Vec<f64>,
    pub replicates: usize,
    pub seed: u64,
    pub span: f64,
}

impl UtilityCurve {
    /// CSV with one column per parameter coordinate, then raw, smoothed, se.
    pub fn to_csv(&self) -> String {
        let d = self.params.first().map_or(1, |p| p.len());
        let mut s = String::new();
        let names: Vec<String> = (0..d).map(|j| if d == 1 { "param".into() } else { format!("param{}", j + 1) }).collect();
        s.push_str(&names.join(","));
        s.push_str(",raw,smoothed,se\n");
        for i in 0..self.params.len() {
            let p: Vec<String> = self.params[i].iter().map(|v| format!("{v:.6}")).collect();
            s.push_str(&format!("{},{:.6},{:.6},{:.6}\n", p.join(","), self.raw[i], self.smoothed[i], self.se[i]));
        }
        s
    }
}

/// Evenly spaced points including both ends.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

impl GridEvaluation {
    pub fn replicates(&self) -> usize {
        self.utilities.len()
    }

    pub fn means(&self) -> Vec<f64> {
        let r = self.replicates() as f64;
        (0..self.params.len())
            .map(|j| self.utilities.iter().map(|row| row[j]).sum::<f64>() / r)
            .collect()
    }

    fn se_of(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        let v: Vec<f64> = self.utilities.iter().map(|row| f(row)).collect();
        crate::stats::sd(&v) / (v.len() as f64).sqrt()
    }

    pub fn ses(&self) -> Vec<f64> {
        (0..self.params.len()).map(|j| self.se_of(|row| row[j])).collect()
    }

    /// Standard error of Û(a) − Û(b), using the pairing across replicates.
    pub fn paired_se(&self, a: usize, b: usize) -> f64 {
        self.se_of(|row| row[a] - row[b])
    }

    pub fn curve(&self, span: f64) -> UtilityCurve {
        let raw = self.means();
        let smoothed = local_linear_smooth(&self.params, &raw, span);
        let argmax = smoothed
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        UtilityCurve {
            params: self.params.clone(),
            se: self.ses(),
            raw,
            argmax_param: self.params.get(argmax).cloned().unwrap_or_default(),
            smoothed,
            argmax,
            replicates: self.replicates(),
            seed: self.seed,
            span,
        }
    }
}

/// Evaluates every candidate on the same `r` replicates.
pub fn grid_search<E: DecisionEngine>(
    engine: &E,
    candidates: &[Vec<f64>],
    r: usize,
    seed: u64,
) -> Result<GridEvaluation, UtilityError> {
    if candidates.is_empty() {
        return Err(UtilityError::BoundsEmpty);
    }
    let ctx = candidates
        .iter()
        .map(|c| engine.context(c))
        .collect::<Result<Vec<_>, _>>()?;
    let rows: Vec<Option<Vec<f64>>> = (0..r as u64)
        .into_par_iter()
        .map(|i| {
            engine
                .prepare(seed, i)
                .ok()
                .map(|p| ctx.iter().map(|c| engine.utility(&p, c)).collect())
        })
        .collect();
    let failed = rows.iter().filter(|r| r.is_none()).count();
    let utilities: Vec<Vec<f64>> = rows.into_iter().flatten().collect();
    if utilities.is_empty() {
        return Err(UtilityError::AllFailed(failed));
    }
    Ok(GridEvaluation {
        params: candidates.to_vec(),
        utilities,
        failed,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct AnnealSettings {
    pub epochs: usize,
    pub steps_per_epoch: usize,
    pub decay: f64,
    pub restarts: usize,
    /// Proposal sd as a fraction of each coordinate's range.
    pub step_frac: f64,
    pub pilot: usize,
}

impl Default for AnnealSettings {
    fn default() -> Self {
        Self {
            epochs: 50,
            steps_per_epoch: 10,
            decay: 0.95,
            restarts: 2,
            step_frac: 0.1,
            pilot: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnealResult {
    pub best: Vec<f64>,
    pub best_value: f64,
    pub initial_temperature: f64,
    pub evaluations: usize,
}

fn uniform_point<R: Rng>(bounds: &[(f64, f64)], rng: &mut R) -> Vec<f64> {
    bounds.iter().map(|(lo, hi)| lo + (hi - lo) * rng.random::<f64>()).collect()
}

// Reflect into [lo, hi].
fn reflect(mut v: f64, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return lo;
    }
    let w = hi - lo;
    for _ in 0..4 {
        if v < lo {
            v = 2.0 * lo - v;
        } else if v > hi {
            v = 2.0 * hi - v;
        } else {
            return v;
        }
    }
    v.clamp(lo, hi).min(lo + w)
}

/// Maximizes `objective` over a box by simulated annealing with geometric
/// cooling. The initial temperature is the interquartile range of
/// `pilot` objective values at uniform random points.
pub fn anneal(
    mut objective: impl FnMut(&[f64]) -> f64,
    bounds: &[(f64, f64)],
    settings: AnnealSettings,
    seed: u64,
) -> Result<AnnealResult, UtilityError> {
    if bounds.is_empty() || bounds.iter().any(|(lo, hi)| !(lo <= hi) || !lo.is_finite() || !hi.is_finite()) {
        return Err(UtilityError::BoundsEmpty);
    }
    if !(settings.decay > 0.0 && settings.decay < 1.0) || settings.epochs == 0 || settings.steps_per_epoch == 0 {
        return Err(UtilityError::Invalid("annealing needs epochs, steps and decay in (0,1)".into()));
    }
    let mut rng = rng_from_seed(seed);
    let mut evals = 0usize;
    let mut best = uniform_point(bounds, &mut rng);
    let mut best_value = objective(&best);
    evals += 1;
    let mut pilot = Vec::with_capacity(settings.pilot);
    for _ in 0..settings.pilot {
        let p = uniform_point(bounds, &mut rng);
        let v = objective(&p);
        evals += 1;
        if v > best_value {
            best_value = v;
            best = p;
        }
        pilot.push(v);
    }
    pilot.sort_by(|a, b| a.total_cmp(b));
    let iqr = if pilot.len() >= 2 {
        quantile_sorted(&pilot, 0.75) - quantile_sorted(&pilot, 0.25)
    } else {
        0.0
    };
    let t0 = if iqr > 0.0 { iqr } else { 1e-3 * (best_value.abs() + 1.0) };

    for restart in 0..settings.restarts.max(1) {
        // first run starts from the best pilot point, later ones from random points
        let mut cur = if restart == 0 { best.clone() } else { uniform_point(bounds, &mut rng) };
        let mut cur_v = objective(&cur);
        evals += 1;
        let mut temp = t0;
        for _ in 0..settings.epochs {
            for _ in 0..settings.steps_per_epoch {
                let prop: Vec<f64> = cur
                    .iter()
                    .zip(bounds)
                    .map(|(x, (lo, hi))| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        reflect(x + settings.step_frac * (hi - lo) * z, *lo, *hi)
                    })
                    .collect();
                let v = objective(&prop);
                evals += 1;
                let delta = v - cur_v;
                if delta >= 0.0 || rng.random::<f64>() < (delta / temp).exp() {
                    cur = prop;
                    cur_v = v;
                    if cur_v > best_value {
                        best_value = cur_v;
                        best = cur.clone();
                    }
                }
            }
            temp *= settings.decay;
        }
    }
    Ok(AnnealResult {
        best,
        best_value,
        initial_temperature: t0,
        evaluations: evals,
    })
}

/// Annealing on Û(β) over a fixed pool of `r` replicates (common random
/// numbers for every visited point), followed by re-evaluation of the best
/// point on fresh replicates.
pub fn anneal_engine<E: DecisionEngine>(
    engine: &E,
    bounds: &[(f64, f64)],
    settings: AnnealSettings,
    r: usize,
    seed: u64,
) -> Result<(AnnealResult, Estimate), UtilityError> {
    let pool: Vec<E::Prepared> = prepare_pool(engine, r, seed).into_iter().flatten().collect();
    if pool.is_empty() {
        return Err(UtilityError::AllFailed(r));
    }
    let objective = |p: &[f64]| -> f64 {
        match engine.context(p) {
            Ok(ctx) => {
                // collect first: a parallel float sum would depend on the thread count
                let u: Vec<f64> = pool.par_iter().map(|x| engine.utility(x, &ctx)).collect();
                u.iter().sum::<f64>() / u.len() as f64
            }
            Err(_) => f64::NEG_INFINITY,
        }
    };
    let res = anneal(objective, bounds, settings, substream(seed, "anneal"))?;
    let est = expected_utility_mc(engine, &res.best, r, substream(seed, "reevaluate"))?;
    Ok((res, est))
}
