//! Posterior sampling for the joint (Y, S) logistic model and for the
//! single-outcome comparator model.
//!
//! The latent intercept ε is integrated out per cell by Gauss–Hermite
//! quadrature, so the chain only moves over a handful of parameters per
//! group: random-walk Metropolis for the intercepts, logit(c_Y) and the slab
//! value, and a reversible jump between spike and slab with an independence
//! proposal for the slab value.

use crate::data::TrialDataset;
use crate::prior::{GroupPrior, PriorHyperparams};
use crate::rng::{rng_from_seed, SimRng};
use crate::stats::{gh_for_sd, log_logistic, logistic, GaussHermite};
use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PosteriorError {
    #[error("no observed outcomes in the interim data")]
    NoData,
    #[error("invalid posterior setup: {0}")]
    Invalid(String),
}

/// Prior for the primary-only model pr(Y = 1) = F(a + b·c) with a spike at
/// b = 0 and a Gaussian slab.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleOutcomePrior {
    pub intercept_mean: f64,
    pub intercept_sd: f64,
    pub slab_mean: f64,
    pub slab_var: f64,
}

// Squared attenuation constant of the logistic-normal approximation
// E[F(a + σZ)] ≈ F(a / sqrt(1 + κ²σ²)), κ = 16√3 / (15π).
fn attenuation(sigma2: f64) -> f64 {
    let kappa = 16.0 * 3f64.sqrt() / (15.0 * PI);
    (1.0 + kappa * kappa * sigma2).sqrt()
}

impl SingleOutcomePrior {
    /// Primary-outcome prior matched to the joint prior: intercept moments
    /// are rescaled to the population-averaged scale and the slab variance
    /// is that of c_Y·ζS1 on the same scale.
    pub fn matched_primary(g: &GroupPrior) -> Self {
        let k = attenuation(g.sigma2);
        let (v, o) = (g.beta_shape_v, g.beta_shape_o);
        let ec = v / (v + o);
        let ec2 = ec * (v + 1.0) / (v + o + 1.0);
        Self {
            intercept_mean: g.intercept_y_mean / k,
            intercept_sd: g.intercept_y_sd / k,
            slab_mean: ec * g.slab_mean / k,
            slab_var: ec2 * (g.slab_var + g.slab_mean * g.slab_mean) / (k * k) - (ec * g.slab_mean / k).powi(2),
        }
    }

    /// Same construction for the auxiliary outcome (used when S stands in for Y).
    pub fn matched_auxiliary(g: &GroupPrior) -> Self {
        let k = attenuation(g.sigma2);
        Self {
            intercept_mean: g.intercept_s_mean / k,
            intercept_sd: g.intercept_s_sd / k,
            slab_mean: g.slab_mean / k,
            slab_var: g.slab_var / (k * k),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OutcomeModel {
    Joint(PriorHyperparams),
    /// Y only, one prior per group, spike probability `xi`.
    Single { groups: Vec<SingleOutcomePrior>, xi: f64 },
}

impl OutcomeModel {
    pub fn k_count(&self) -> usize {
        match self {
            OutcomeModel::Joint(h) => h.k_count(),
            OutcomeModel::Single { groups, .. } => groups.len(),
        }
    }

    fn validate(&self) -> Result<(), PosteriorError> {
        match self {
            OutcomeModel::Joint(h) => {
                h.validate().map_err(|e| PosteriorError::Invalid(e.to_string()))?;
                if h.groups.iter().any(|g| g.c_spike > 0.0) {
                    return Err(PosteriorError::Invalid("a point mass on c_Y is not supported by the sampler".into()));
                }
                Ok(())
            }
            OutcomeModel::Single { groups, xi } => {
                if groups.is_empty() || !(0.0..=1.0).contains(xi) {
                    return Err(PosteriorError::Invalid("single-outcome prior needs groups and xi in [0,1]".into()));
                }
                if groups.iter().any(|g| !(g.intercept_sd > 0.0 && g.slab_var > 0.0)) {
                    return Err(PosteriorError::Invalid("single-outcome prior scales must be positive".into()));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerSettings {
    pub draws: usize,
    pub burn_in: usize,
}

impl Default for SamplerSettings {
    fn default() -> Self {
        Self { draws: 2000, burn_in: 500 }
    }
}

/// One posterior draw for one group. Under the single-outcome model the
/// auxiliary fields are zero and `c_y` is one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GroupParams {
    pub intercept_y: f64,
    pub intercept_s: f64,
    pub slope_y: f64,
    pub slope_s: f64,
    pub c_y: f64,
    pub spike: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    pub joint: bool,
    /// `draws[i][k]`: draw i, group k.
    pub draws: Vec<Vec<GroupParams>>,
    /// Latent variance per group (fixed by the prior; zero for the single model).
    pub sigma2: Vec<f64>,
    pub weights: Vec<f64>,
    /// Post-burn-in acceptance rate of the random-walk moves.
    pub acceptance_rate: f64,
    /// Smallest effective sample size over the tracked parameters.
    pub ess: f64,
    pub non_convergence: bool,
}

impl PosteriorDraws {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    /// Posterior mean of a per-group quantity.
    pub fn mean_of(&self, k: usize, f: impl Fn(&GroupParams) -> f64) -> f64 {
        self.draws.iter().zip(&self.weights).map(|(d, w)| w * f(&d[k])).sum()
    }
}

// ---------------------------------------------------------------------------
// sufficient statistics

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct CellCounts {
    /// [arm][y][s] for patients with observed primary.
    pub complete: [[[u32; 2]; 2]; 2],
    /// [arm][s] for patients whose primary is pending.
    pub pending: [[u32; 2]; 2],
}

impl CellCounts {
    fn arm_total(&self, c: usize) -> u32 {
        let p = &self.complete[c];
        p[0][0] + p[0][1] + p[1][0] + p[1][1] + self.pending[c][0] + self.pending[c][1]
    }
}

pub(crate) fn cell_counts(data: &TrialDataset) -> Vec<CellCounts> {
    let mut out = vec![CellCounts::default(); data.k_count()];
    for p in data.patients() {
        let c = &mut out[p.group];
        let (a, s) = (p.arm.index(), p.auxiliary as usize);
        if p.primary_observed {
            c.complete[a][p.primary as usize][s] += 1;
        } else {
            c.pending[a][s] += 1;
        }
    }
    out
}

// ---------------------------------------------------------------------------
// likelihoods

/// Quadrature points for the latent term; a single point at zero when σ = 0.
pub(crate) struct Latent {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Latent {
    pub fn new(sigma2: f64) -> Self {
        if sigma2 == 0.0 {
            return Self {
                nodes: vec![0.0],
                weights: vec![1.0],
            };
        }
        let sd = sigma2.sqrt();
        let gh: &GaussHermite = gh_for_sd(sd);
        Self {
            nodes: gh.nodes.iter().map(|z| sd * z).collect(),
            weights: gh.weights.clone(),
        }
    }

    /// Cell probabilities for one arm: (pr(y, s) indexed [y][s], pr(s)).
    pub fn cell_probs(&self, eta_y: f64, eta_s: f64) -> ([[f64; 2]; 2], [f64; 2]) {
        let mut p = [[0.0; 2]; 2];
        let mut ps1 = 0.0;
        for (e, w) in self.nodes.iter().zip(&self.weights) {
            let fy = logistic(eta_y + e);
            let fs = logistic(eta_s + e);
            p[1][1] += w * fy * fs;
            p[1][0] += w * fy * (1.0 - fs);
            p[0][1] += w * (1.0 - fy) * fs;
            ps1 += w * fs;
        }
        p[0][0] = (1.0 - p[1][1] - p[1][0] - p[0][1]).max(0.0);
        (p, [1.0 - ps1, ps1])
    }
}

fn ln_pos(x: f64) -> f64 {
    if x > 0.0 {
        x.ln()
    } else {
        -745.0
    }
}

fn joint_arm_ll(lat: &Latent, counts: &CellCounts, arm: usize, eta_y: f64, eta_s: f64) -> f64 {
    if counts.arm_total(arm) == 0 {
        return 0.0;
    }
    let (p, ps) = lat.cell_probs(eta_y, eta_s);
    let mut ll = 0.0;
    for y in 0..2 {
        for s in 0..2 {
            let n = counts.complete[arm][y][s];
            if n > 0 {
                ll += n as f64 * ln_pos(p[y][s]);
            }
        }
    }
    for s in 0..2 {
        let n = counts.pending[arm][s];
        if n > 0 {
            ll += n as f64 * ln_pos(ps[s]);
        }
    }
    ll
}

fn single_arm_ll(counts: &CellCounts, arm: usize, eta: f64) -> f64 {
    let c = &counts.complete[arm];
    let (y1, y0) = ((c[1][0] + c[1][1]) as f64, (c[0][0] + c[0][1]) as f64);
    if y1 + y0 == 0.0 {
        return 0.0;
    }
    y1 * log_logistic(eta) + y0 * log_logistic(-eta)
}

fn ln_normal(x: f64, m: f64, var: f64) -> f64 {
    -0.5 * (x - m).powi(2) / var - 0.5 * (2.0 * PI * var).ln()
}

// ---------------------------------------------------------------------------
// chain state

#[derive(Debug, Clone, Copy)]
struct GroupState {
    a_y: f64,
    a_s: f64,
    /// logit(c_Y)
    eta_c: f64,
    /// Cached log-likelihood per arm.
    ll: [f64; 2],
}

#[derive(Debug, Clone, Copy)]
struct SlotState {
    spike: bool,
    b: f64,
}

/// Random-walk scale with batch adaptation toward a 0.44 acceptance rate.
#[derive(Debug, Clone, Copy)]
struct Adaptive {
    log_scale: f64,
    batch_acc: u32,
    batch_n: u32,
    batches: u32,
    acc: u64,
    n: u64,
}

const ADAPT_BATCH: u32 = 25;
const TARGET_ACCEPT: f64 = 0.44;

impl Adaptive {
    fn new(scale: f64) -> Self {
        Self {
            log_scale: scale.ln(),
            batch_acc: 0,
            batch_n: 0,
            batches: 0,
            acc: 0,
            n: 0,
        }
    }

    fn scale(&self) -> f64 {
        self.log_scale.exp()
    }

    fn record(&mut self, accepted: bool, adapting: bool) {
        if adapting {
            self.batch_n += 1;
            self.batch_acc += accepted as u32;
            if self.batch_n == ADAPT_BATCH {
                self.batches += 1;
                let delta = (0.5f64).min(1.0 / (self.batches as f64).sqrt());
                if self.batch_acc as f64 / ADAPT_BATCH as f64 > TARGET_ACCEPT {
                    self.log_scale += delta;
                } else {
                    self.log_scale -= delta;
                }
                self.log_scale = self.log_scale.clamp(-8.0, 3.0);
                self.batch_acc = 0;
                self.batch_n = 0;
            }
        } else {
            self.n += 1;
            self.acc += accepted as u64;
        }
    }
}

struct GroupSetup {
    counts: CellCounts,
    lat: Latent,
    // prior pieces
    ay: (f64, f64),
    as_: (f64, f64),
    beta: (f64, f64),
}

struct SlotSetup {
    groups: Vec<usize>,
    slab: (f64, f64),
}

struct Chain<'a> {
    joint: bool,
    xi: f64,
    groups: Vec<GroupSetup>,
    slots: Vec<SlotSetup>,
    slot_of: Vec<usize>,
    rng: &'a mut SimRng,
}

impl Chain<'_> {
    fn slopes(&self, g: &GroupState, s: &SlotState) -> (f64, f64) {
        let bs = if s.spike { 0.0 } else { s.b };
        if self.joint {
            (logistic(g.eta_c) * bs, bs)
        } else {
            (bs, 0.0)
        }
    }

    fn arm_ll(&self, k: usize, arm: usize, a_y: f64, a_s: f64, by: f64, bs: f64) -> f64 {
        let c = arm as f64;
        let gs = &self.groups[k];
        if self.joint {
            joint_arm_ll(&gs.lat, &gs.counts, arm, a_y + by * c, a_s + bs * c)
        } else {
            single_arm_ll(&gs.counts, arm, a_y + by * c)
        }
    }

    fn group_ll(&self, k: usize, a_y: f64, a_s: f64, by: f64, bs: f64) -> [f64; 2] {
        [
            self.arm_ll(k, 0, a_y, a_s, by, bs),
            self.arm_ll(k, 1, a_y, a_s, by, bs),
        ]
    }

    fn accept(&mut self, log_ratio: f64) -> bool {
        log_ratio >= 0.0 || self.rng.random::<f64>().ln() < log_ratio
    }

    fn normal(&mut self) -> f64 {
        StandardNormal.sample(self.rng)
    }
}

/// Geyer's initial positive sequence estimate of the effective sample size.
pub fn effective_sample_size(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 4 {
        return n as f64;
    }
    let m = x.iter().sum::<f64>() / n as f64;
    let c0 = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64;
    if c0 <= 1e-300 {
        return n as f64;
    }
    let acf = |lag: usize| -> f64 {
        (0..n - lag).map(|i| (x[i] - m) * (x[i + lag] - m)).sum::<f64>() / (n as f64 * c0)
    };
    let mut tau = -1.0;
    let mut t = 0;
    while t + 1 < n {
        let gamma = acf(t) + acf(t + 1);
        if gamma <= 0.0 {
            break;
        }
        tau += 2.0 * gamma;
        t += 2;
    }
    (n as f64 / tau.max(1e-12)).min(n as f64)
}

/// Posterior draws under the joint model with the given hyperparameters.
pub fn posterior_sample(
    data: &TrialDataset,
    hyper: &PriorHyperparams,
    draws: usize,
    seed: u64,
) -> Result<PosteriorDraws, PosteriorError> {
    sample_posterior(
        data,
        &OutcomeModel::Joint(hyper.clone()),
        SamplerSettings {
            draws,
            burn_in: SamplerSettings::default().burn_in,
        },
        seed,
    )
}

pub fn sample_posterior(
    data: &TrialDataset,
    model: &OutcomeModel,
    settings: SamplerSettings,
    seed: u64,
) -> Result<PosteriorDraws, PosteriorError> {
    model.validate()?;
    let k = model.k_count();
    if data.k_count() != k {
        return Err(PosteriorError::Invalid(format!(
            "data has {} groups, prior has {k}",
            data.k_count()
        )));
    }
    if settings.draws == 0 {
        return Err(PosteriorError::Invalid("need at least one draw".into()));
    }
    let counts = cell_counts(data);
    let joint = matches!(model, OutcomeModel::Joint(_));
    let observed: u32 = counts
        .iter()
        .map(|c| {
            let complete: u32 = c.complete.iter().flatten().flatten().sum();
            let pending: u32 = if joint { c.pending.iter().flatten().sum() } else { 0 };
            complete + pending
        })
        .sum();
    if observed == 0 {
        return Err(PosteriorError::NoData);
    }

    let (groups, slots, slot_of, xi, sigma2): (Vec<GroupSetup>, Vec<SlotSetup>, Vec<usize>, f64, Vec<f64>) = match model {
        OutcomeModel::Joint(h) => {
            let groups = h
                .groups
                .iter()
                .zip(&counts)
                .map(|(g, c)| GroupSetup {
                    counts: *c,
                    lat: Latent::new(g.sigma2),
                    ay: (g.intercept_y_mean, g.intercept_y_sd),
                    as_: (g.intercept_s_mean, g.intercept_s_sd),
                    beta: (g.beta_shape_v, g.beta_shape_o),
                })
                .collect();
            let slot_of: Vec<usize> = (0..k).map(|j| h.effect_slot(j)).collect();
            let slots = (0..h.effect_slots())
                .map(|j| SlotSetup {
                    groups: (0..k).filter(|g| slot_of[*g] == j).collect(),
                    slab: (h.groups[j].slab_mean, h.groups[j].slab_var),
                })
                .collect();
            (groups, slots, slot_of, h.xi, h.groups.iter().map(|g| g.sigma2).collect())
        }
        OutcomeModel::Single { groups: priors, xi } => {
            let groups = priors
                .iter()
                .zip(&counts)
                .map(|(g, c)| GroupSetup {
                    counts: *c,
                    lat: Latent::new(0.0),
                    ay: (g.intercept_mean, g.intercept_sd),
                    as_: (0.0, 1.0),
                    beta: (1.0, 1.0),
                })
                .collect();
            let slots = priors
                .iter()
                .enumerate()
                .map(|(j, g)| SlotSetup {
                    groups: vec![j],
                    slab: (g.slab_mean, g.slab_var),
                })
                .collect();
            (groups, slots, (0..k).collect(), *xi, vec![0.0; k])
        }
    };

    let mut rng = rng_from_seed(seed);
    let mut chain = Chain {
        joint,
        xi,
        groups,
        slots,
        slot_of,
        rng: &mut rng,
    };

    // initial state: prior centres, spike state by prior majority
    let mut slot_state: Vec<SlotState> = chain
        .slots
        .iter()
        .map(|s| SlotState {
            spike: xi > 0.5,
            b: s.slab.0,
        })
        .collect();
    let mut gstate: Vec<GroupState> = (0..k)
        .map(|j| {
            let g = &chain.groups[j];
            let (v, o) = g.beta;
            let c0 = (v / (v + o)).clamp(1e-3, 1.0 - 1e-3);
            GroupState {
                a_y: g.ay.0,
                a_s: g.as_.0,
                eta_c: (c0 / (1.0 - c0)).ln(),
                ll: [0.0; 2],
            }
        })
        .collect();
    for j in 0..k {
        let (by, bs) = chain.slopes(&gstate[j], &slot_state[chain.slot_of[j]]);
        gstate[j].ll = chain.group_ll(j, gstate[j].a_y, gstate[j].a_s, by, bs);
    }

    let mut ad_ay: Vec<Adaptive> = (0..k).map(|_| Adaptive::new(0.5)).collect();
    let mut ad_as: Vec<Adaptive> = (0..k).map(|_| Adaptive::new(0.5)).collect();
    let mut ad_c: Vec<Adaptive> = (0..k).map(|_| Adaptive::new(1.0)).collect();
    let mut ad_b: Vec<Adaptive> = chain.slots.iter().map(|_| Adaptive::new(0.5)).collect();

    // independence proposal for entering the slab; starts at the prior slab
    let mut q: Vec<(f64, f64)> = chain.slots.iter().map(|s| (s.slab.0, s.slab.1.sqrt())).collect();
    let mut slab_trace: Vec<Vec<f64>> = vec![Vec::new(); chain.slots.len()];

    let total = settings.burn_in + settings.draws;
    let mut out: Vec<Vec<GroupParams>> = Vec::with_capacity(settings.draws);
    for it in 0..total {
        let adapting = it < settings.burn_in;
        if it == settings.burn_in {
            for (j, tr) in slab_trace.iter().enumerate() {
                if tr.len() >= 50 {
                    let m = tr.iter().sum::<f64>() / tr.len() as f64;
                    let sd = (tr.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (tr.len() - 1) as f64).sqrt();
                    q[j] = (m, (1.5 * sd).max(1e-3));
                }
            }
        }

        for j in 0..k {
            let slot = slot_state[chain.slot_of[j]];
            // primary intercept
            {
                let g = gstate[j];
                let (by, bs) = chain.slopes(&g, &slot);
                let prop = g.a_y + ad_ay[j].scale() * chain.normal();
                let (m, sd) = chain.groups[j].ay;
                let ll = chain.group_ll(j, prop, g.a_s, by, bs);
                let lr = ll[0] + ll[1] - g.ll[0] - g.ll[1] + ln_normal(prop, m, sd * sd) - ln_normal(g.a_y, m, sd * sd);
                let ok = chain.accept(lr);
                if ok {
                    gstate[j].a_y = prop;
                    gstate[j].ll = ll;
                }
                ad_ay[j].record(ok, adapting);
            }
            if !joint {
                continue;
            }
            // auxiliary intercept
            {
                let g = gstate[j];
                let (by, bs) = chain.slopes(&g, &slot);
                let prop = g.a_s + ad_as[j].scale() * chain.normal();
                let (m, sd) = chain.groups[j].as_;
                let ll = chain.group_ll(j, g.a_y, prop, by, bs);
                let lr = ll[0] + ll[1] - g.ll[0] - g.ll[1] + ln_normal(prop, m, sd * sd) - ln_normal(g.a_s, m, sd * sd);
                let ok = chain.accept(lr);
                if ok {
                    gstate[j].a_s = prop;
                    gstate[j].ll = ll;
                }
                ad_as[j].record(ok, adapting);
            }
            // c_Y: exact prior draw when it does not enter the likelihood
            let (v, o) = chain.groups[j].beta;
            if slot.spike {
                let c: f64 = Beta::new(v, o).expect("validated shapes").sample(chain.rng);
                let c = c.clamp(1e-12, 1.0 - 1e-12);
                gstate[j].eta_c = (c / (1.0 - c)).ln();
            } else {
                let g = gstate[j];
                let prop = g.eta_c + ad_c[j].scale() * chain.normal();
                let bs = slot.b;
                let by = logistic(prop) * bs;
                // treatment-arm likelihood only; control does not involve c
                let ll1 = chain.arm_ll(j, 1, g.a_y, g.a_s, by, bs);
                let lp = |e: f64| v * log_logistic(e) + o * log_logistic(-e);
                let lr = ll1 - g.ll[1] + lp(prop) - lp(g.eta_c);
                let ok = chain.accept(lr);
                if ok {
                    gstate[j].eta_c = prop;
                    gstate[j].ll[1] = ll1;
                }
                ad_c[j].record(ok, adapting);
            }
        }

        for s in 0..chain.slots.len() {
            let members = chain.slots[s].groups.clone();
            let (sm, sv) = chain.slots[s].slab;
            let treat_ll = |chain: &Chain, gstate: &[GroupState], st: &SlotState| -> Vec<f64> {
                members
                    .iter()
                    .map(|&j| {
                        let (by, bs) = chain.slopes(&gstate[j], st);
                        chain.arm_ll(j, 1, gstate[j].a_y, gstate[j].a_s, by, bs)
                    })
                    .collect()
            };
            let cur_sum: f64 = members.iter().map(|&j| gstate[j].ll[1]).sum();
            // slab value
            if !slot_state[s].spike {
                let prop = SlotState {
                    spike: false,
                    b: slot_state[s].b + ad_b[s].scale() * chain.normal(),
                };
                let lls = treat_ll(&chain, &gstate, &prop);
                let lr = lls.iter().sum::<f64>() - cur_sum + ln_normal(prop.b, sm, sv) - ln_normal(slot_state[s].b, sm, sv);
                let ok = chain.accept(lr);
                if ok {
                    slot_state[s] = prop;
                    for (i, &j) in members.iter().enumerate() {
                        gstate[j].ll[1] = lls[i];
                    }
                }
                ad_b[s].record(ok, adapting);
            }
            // spike <-> slab jump
            let cur_sum: f64 = members.iter().map(|&j| gstate[j].ll[1]).sum();
            let (qm, qs) = q[s];
            let ln_q = |b: f64| ln_normal(b, qm, qs * qs);
            let ln_odds = if chain.xi <= 0.0 {
                f64::NEG_INFINITY
            } else if chain.xi >= 1.0 {
                f64::INFINITY
            } else {
                (chain.xi / (1.0 - chain.xi)).ln()
            };
            if slot_state[s].spike {
                let b = qm + qs * chain.normal();
                let prop = SlotState { spike: false, b };
                let lls = treat_ll(&chain, &gstate, &prop);
                let lr = -ln_odds + lls.iter().sum::<f64>() - cur_sum + ln_normal(b, sm, sv) - ln_q(b);
                if lr.is_finite() && chain.accept(lr) || lr == f64::INFINITY {
                    slot_state[s] = prop;
                    for (i, &j) in members.iter().enumerate() {
                        gstate[j].ll[1] = lls[i];
                    }
                }
            } else {
                let b = slot_state[s].b;
                let prop = SlotState { spike: true, b };
                let lls = treat_ll(&chain, &gstate, &prop);
                let lr = ln_odds + lls.iter().sum::<f64>() - cur_sum + ln_q(b) - ln_normal(b, sm, sv);
                if lr.is_finite() && chain.accept(lr) || lr == f64::INFINITY {
                    slot_state[s] = prop;
                    for (i, &j) in members.iter().enumerate() {
                        gstate[j].ll[1] = lls[i];
                    }
                }
            }
            if adapting && !slot_state[s].spike {
                slab_trace[s].push(slot_state[s].b);
            }
        }

        if !adapting {
            out.push(
                (0..k)
                    .map(|j| {
                        let g = &gstate[j];
                        let st = &slot_state[chain.slot_of[j]];
                        let (by, bs) = chain.slopes(g, st);
                        GroupParams {
                            intercept_y: g.a_y,
                            intercept_s: if joint { g.a_s } else { 0.0 },
                            slope_y: by,
                            slope_s: bs,
                            c_y: if joint { logistic(g.eta_c) } else { 1.0 },
                            spike: st.spike,
                        }
                    })
                    .collect(),
            );
        }
    }

    let (acc, n) = ad_ay
        .iter()
        .chain(&ad_as)
        .chain(&ad_c)
        .chain(&ad_b)
        .fold((0u64, 0u64), |(a, n), s| (a + s.acc, n + s.n));
    let acceptance_rate = if n == 0 { f64::NAN } else { acc as f64 / n as f64 };
    let mut ess = f64::INFINITY;
    for j in 0..k {
        let series: [Box<dyn Fn(&GroupParams) -> f64>; 3] = [
            Box::new(|p| p.intercept_y),
            Box::new(|p| p.intercept_s),
            Box::new(|p| p.slope_y),
        ];
        for f in series.iter().take(if joint { 3 } else { 1 }) {
            let x: Vec<f64> = out.iter().map(|d| f(&d[j])).collect();
            ess = ess.min(effective_sample_size(&x));
        }
        let x: Vec<f64> = out.iter().map(|d| d[j].slope_y).collect();
        ess = ess.min(effective_sample_size(&x));
    }
    let nd = out.len();
    Ok(PosteriorDraws {
        joint,
        draws: out,
        sigma2,
        weights: vec![1.0 / nd as f64; nd],
        acceptance_rate,
        ess,
        non_convergence: !(0.05..=0.7).contains(&acceptance_rate),
    })
}
