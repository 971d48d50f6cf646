//! Experiment orchestration. Workers get immutable task descriptors and a
//! replicate index; every random stream is derived from (master seed, task,
//! replicate), so results do not depend on the number of workers.

use crate::config::{EngineKind, ExperimentConfig, GridAxis, Method, Mode, ResolvedScenario, RetroSection, Search};
use crate::oc::{MethodResult, OperatingCharacteristics, Tally};
use crate::table::{emit_table, Layout};
use auxtrial::data::{compute_auxiliary_summaries, compute_summaries, Arm, PatientRecord, TrialDataset};
use auxtrial::groupseq::{boundary_thresholds, run_sequential_trial, DesignPriors, StopReason};
use auxtrial::multitest::{
    auxiliary_augmented_test, auxiliary_only_test, bonferroni_test, bootstrap_calibrate, calibration_inputs, enumerate_single_patient_example,
    holm_test, TestDecision, WeightedBonfConfig,
};
use auxtrial::prior::prior_predictive_report;
use auxtrial::rng::{derive_seed, replicate_rng, rng_from_seed, substream};
use auxtrial::scenario::{resample_perturb, simulate_with_cells, solve_joint};
use auxtrial::utility::{
    anneal_engine, grid_search, linspace, AnnealSettings, DecisionEngine, MultitestEngine, SequentialEngine, SequentialUtility,
};
use rand::Rng;
use rayon::prelude::*;
use serde_json::json;
use std::panic::{catch_unwind, AssertUnwindSafe};
use thiserror::Error;

use crate::config::ConfigError;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("run failed: {0}")]
    Failed(String),
}

/// Everything an experiment produces, before it is written to disk.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunOutput {
    pub oc: Option<OperatingCharacteristics>,
    /// (file name, contents), in a fixed order.
    pub files: Vec<(String, String)>,
    /// Human-readable summary for the terminal.
    pub summary: String,
    pub failed: usize,
    pub attempted: usize,
}

impl RunOutput {
    pub fn file(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }
}

/// Validates the config and runs it on a pool of `workers` threads.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutput, RunError> {
    config.validate()?;
    let workers = config.workers.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| RunError::Failed(format!("cannot start workers: {e}")))?;
    pool.install(|| dispatch(config))
}

fn dispatch(c: &ExperimentConfig) -> Result<RunOutput, RunError> {
    match c.mode()? {
        Mode::MultitestSim => Ok(sim_output(simulate_multitest(c)?, Layout::PerGroup)),
        Mode::Calibrate => Ok(sim_output(simulate_multitest(c)?, Layout::PerGroup)),
        Mode::GroupseqSim => Ok(sim_output(simulate_groupseq(c)?, Layout::Sequential)),
        Mode::RetroSim => Ok(sim_output(simulate_retro(c)?, Layout::Sequential)),
        Mode::Optimize => optimize(c),
        Mode::PriorReport => prior_report(c),
        Mode::Boundaries => boundaries(c),
        Mode::EnumerateExample => Ok(enumerate()),
    }
}

fn sim_output(oc: OperatingCharacteristics, layout: Layout) -> RunOutput {
    let long = emit_table(&oc, Layout::Long);
    let pivot = emit_table(&oc, layout);
    RunOutput {
        failed: oc.failed(),
        attempted: oc.attempted(),
        summary: pivot.text.clone(),
        files: vec![
            ("results.csv".into(), long.csv),
            ("table.csv".into(), pivot.csv),
            ("table.txt".into(), pivot.text),
        ],
        oc: Some(oc),
    }
}

// Runs `f`, turning a panic into a failed replicate.
fn guarded<T>(f: impl FnOnce() -> Option<T>) -> Option<T> {
    catch_unwind(AssertUnwindSafe(f)).ok().flatten()
}

fn task_seed(master: u64, kind: &str, s: &ResolvedScenario) -> u64 {
    let or = s.odds_ratio.map_or_else(|| "na".to_string(), |r| format!("{r}"));
    substream(master, &format!("{kind}/{}/{or}", s.label))
}

// ---------------------------------------------------------------------------
// Multiple testing

fn simulate_multitest(c: &ExperimentConfig) -> Result<OperatingCharacteristics, RunError> {
    let m = c.multitest();
    let methods = m.methods(c.mode()?);
    let r_count = c.replicates() as u64;
    let mut results = Vec::new();
    for s in c.resolved_scenarios()? {
        let k = s.spec.k_count();
        let beta = if m.beta.len() == 1 { vec![m.beta[0]; k] } else { m.beta.clone() };
        let mut wb = WeightedBonfConfig::new(m.alpha, beta.clone()).map_err(|e| RunError::Failed(e.to_string()))?;
        wb.prior_weights.clone_from(&m.prior_weights);
        let cells = s.spec.cells().map_err(|e| RunError::Failed(e.to_string()))?;
        let nulls = s.spec.null_groups();
        let seed = task_seed(c.seed(), "multitest", &s);
        let rows: Vec<Option<Vec<Option<Vec<bool>>>>> = (0..r_count)
            .into_par_iter()
            .map(|r| {
                guarded(|| {
                    let mut rng = replicate_rng(seed, r);
                    let data = simulate_with_cells(&s.spec, &cells, &mut rng);
                    let sums = compute_summaries(&data);
                    let rejects = |d: Vec<TestDecision>| Some(d.iter().map(|d| d.reject).collect::<Vec<bool>>());
                    let out = methods
                        .iter()
                        .map(|method| match method {
                            Method::AuxiliaryAugmented => rejects(auxiliary_augmented_test(&sums, &wb)),
                            Method::Bonferroni => rejects(bonferroni_test(&sums, m.alpha)),
                            Method::Holm => rejects(holm_test(&sums, m.alpha)),
                            Method::AuxiliaryOnly => rejects(auxiliary_only_test(&compute_auxiliary_summaries(&data), m.alpha)),
                            Method::AuxiliaryAugmentedB => {
                                let cal_seed = substream(derive_seed(seed, r), "calibrate");
                                let cal = calibration_inputs(&data).and_then(|inp| {
                                    bootstrap_calibrate(&inp, &beta, m.prior_weights.as_deref(), m.alpha, m.calibration_draws, cal_seed)
                                });
                                cal.ok().and_then(|cal| {
                                    let mut cfg = wb.clone();
                                    cfg.calibrated_alpha = Some(cal.alpha_prime);
                                    rejects(auxiliary_augmented_test(&sums, &cfg))
                                })
                            }
                        })
                        .collect();
                    Some(out)
                })
            })
            .collect();
        for (j, method) in methods.iter().enumerate() {
            let mut rejections = vec![0usize; k];
            let (mut any_false, mut any_rest, mut ok, mut failed) = (0, 0, 0, 0);
            for row in &rows {
                match row.as_ref().and_then(|v| v[j].as_ref()) {
                    None => failed += 1,
                    Some(rej) => {
                        ok += 1;
                        for (g, &x) in rej.iter().enumerate() {
                            rejections[g] += x as usize;
                        }
                        any_false += rej.iter().zip(&nulls).any(|(&x, &n)| x && n) as usize;
                        any_rest += rej.iter().skip(1).any(|&x| x) as usize;
                    }
                }
            }
            results.push(MethodResult {
                scenario: s.label.clone(),
                odds_ratio: s.odds_ratio,
                method: method.label().into(),
                replicates: ok,
                failed,
                tally: Tally::Multitest {
                    rejections,
                    null_groups: nulls.clone(),
                    any_false,
                    any_rest,
                },
            });
        }
    }
    Ok(OperatingCharacteristics { results })
}

// ---------------------------------------------------------------------------
// Group-sequential designs

#[derive(Debug, Clone, Copy)]
struct Compact {
    stage: usize,
    rejected: bool,
    futility: bool,
    n_used: usize,
    flagged: bool,
}

/// Runs every configured design on `replicates` trials from `generate`;
/// all designs see the same trial for a given replicate.
fn sequential_block(
    c: &ExperimentConfig,
    label: &str,
    odds_ratio: Option<f64>,
    seed: u64,
    generate: &(dyn Fn(u64) -> Option<TrialDataset> + Sync),
) -> Result<Vec<MethodResult>, RunError> {
    let g = c.groupseq();
    let priors = DesignPriors::from_joint(&c.prior(1)).map_err(|e| RunError::Failed(e.to_string()))?;
    let bounds = boundary_thresholds(&g.n_schedule, g.beta_e, g.alpha).map_err(|e| RunError::Failed(e.to_string()))?;
    let configs: Vec<_> = g.designs.iter().map(|&d| g.engine_config(d)).collect();
    let t_max = g.n_schedule.len();
    let rows: Vec<Option<Vec<Option<Compact>>>> = (0..c.replicates() as u64)
        .into_par_iter()
        .map(|r| {
            guarded(|| {
                let data = generate(r)?;
                let engine_seed = substream(derive_seed(seed, r), "engine");
                Some(
                    configs
                        .iter()
                        .map(|cfg| {
                            guarded(|| {
                                let o = run_sequential_trial(&data, cfg, &priors, &bounds, engine_seed).ok()?;
                                Some(Compact {
                                    stage: o.stop_stage,
                                    rejected: o.rejected,
                                    futility: o.stopped_for == StopReason::Futility,
                                    n_used: o.n_used,
                                    flagged: o.stages.iter().any(|s| s.flagged),
                                })
                            })
                        })
                        .collect(),
                )
            })
        })
        .collect();
    Ok(g.designs
        .iter()
        .enumerate()
        .map(|(j, d)| {
            let (mut efficacy, mut futility) = (vec![0usize; t_max], vec![0usize; t_max]);
            let (mut n_sum, mut n_sumsq, mut flagged, mut ok, mut failed) = (0u64, 0u64, 0, 0, 0);
            for row in &rows {
                match row.as_ref().and_then(|v| v[j]) {
                    None => failed += 1,
                    Some(o) => {
                        ok += 1;
                        if o.rejected {
                            efficacy[o.stage - 1] += 1;
                        }
                        if o.futility {
                            futility[o.stage - 1] += 1;
                        }
                        n_sum += o.n_used as u64;
                        n_sumsq += (o.n_used * o.n_used) as u64;
                        flagged += o.flagged as usize;
                    }
                }
            }
            MethodResult {
                scenario: label.into(),
                odds_ratio,
                method: d.label().into(),
                replicates: ok,
                failed,
                tally: Tally::Sequential {
                    efficacy,
                    futility,
                    n_sum,
                    n_sumsq,
                    flagged,
                },
            }
        })
        .collect())
}

fn simulate_groupseq(c: &ExperimentConfig) -> Result<OperatingCharacteristics, RunError> {
    let mut results = Vec::new();
    for s in c.resolved_scenarios()? {
        let cells = s.spec.cells().map_err(|e| RunError::Failed(e.to_string()))?;
        let seed = task_seed(c.seed(), "groupseq", &s);
        let generate = |r: u64| Some(simulate_with_cells(&s.spec, &cells, &mut replicate_rng(seed, r)));
        results.extend(sequential_block(c, &s.label, s.odds_ratio, seed, &generate)?);
    }
    Ok(OperatingCharacteristics { results })
}

/// Control pool for the resampling harness.
pub fn retro_pool(r: &RetroSection, seed: u64) -> Result<TrialDataset, RunError> {
    if let Some(path) = &r.pool {
        let f = std::fs::File::open(path)
            .map_err(|e| ConfigError::new("retro.pool", format!("cannot open {}: {e}", path.display())))?;
        return TrialDataset::read_csv(f, None).map_err(|e| ConfigError::new("retro.pool", e.to_string()).into());
    }
    let s = r.synthetic.expect("validated: pool or synthetic");
    let cell = solve_joint(s.p_y, s.p_s, s.odds_ratio).map_err(|e| ConfigError::new("retro.synthetic", e.to_string()))?;
    let mut rng = rng_from_seed(substream(seed, "pool"));
    let patients = (0..s.size)
        .map(|i| {
            let (y, a) = cell.draw(rng.random::<f64>());
            PatientRecord {
                group: 0,
                arm: Arm::Control,
                primary: y,
                auxiliary: a,
                enroll_order: i as u64,
                primary_observed: true,
            }
        })
        .collect();
    Ok(TrialDataset::new(patients, 1).expect("single group"))
}

fn simulate_retro(c: &ExperimentConfig) -> Result<OperatingCharacteristics, RunError> {
    let r = c.retro.as_ref().expect("validated");
    let need = *c.groupseq().engine_config(auxtrial::groupseq::DesignKind::PrimaryOnly).m_schedule.last().unwrap();
    if r.n < need {
        return Err(ConfigError::new("retro.n", format!("{} patients, the schedule enrolls {need}", r.n)).into());
    }
    let pool = retro_pool(r, c.seed())?;
    let mut results = Vec::new();
    for p in &r.perturbations {
        let seed = substream(c.seed(), &format!("retro/{}", p.label));
        let generate = |i: u64| resample_perturb(&pool, p.p_y, p.p_s, r.n, &mut replicate_rng(seed, i)).ok();
        results.extend(sequential_block(c, &p.label, None, seed, &generate)?);
    }
    Ok(OperatingCharacteristics { results })
}

// ---------------------------------------------------------------------------
// Optimization

fn grid_points(axes: &[GridAxis]) -> Vec<Vec<f64>> {
    axes.iter().fold(vec![vec![]], |acc, a| {
        acc.iter()
            .flat_map(|p| {
                linspace(a.lo, a.hi, a.points).into_iter().map(move |v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect()
    })
}

fn optimize(c: &ExperimentConfig) -> Result<RunOutput, RunError> {
    let o = c.optimize.clone().expect("validated");
    let fail = |e: auxtrial::utility::UtilityError| RunError::Failed(e.to_string());
    match o.engine {
        EngineKind::Multitest => {
            let prevalence = o.prevalence.clone().unwrap_or_else(|| vec![0.6, 0.4]);
            let hyper = c.prior(prevalence.len());
            let e = MultitestEngine::new(hyper, o.n, prevalence, o.alpha, o.lambda.clone()).map_err(fail)?;
            search(c, &o, &e)
        }
        EngineKind::Sequential => {
            let g = c.groupseq();
            let cfg = g.engine_config(g.designs[0]);
            let utility = o.utility.clone().unwrap_or_else(SequentialUtility::reference);
            let e = SequentialEngine::new(c.prior(1), cfg, utility).map_err(fail)?;
            search(c, &o, &e)
        }
    }
}

fn search<E: DecisionEngine>(c: &ExperimentConfig, o: &crate::config::OptimizeSection, e: &E) -> Result<RunOutput, RunError> {
    let (seed, r) = (c.seed(), c.replicates());
    let fail = |e: auxtrial::utility::UtilityError| RunError::Failed(e.to_string());
    match o.search {
        Search::Grid => {
            let cands = grid_points(&o.grid);
            let ev = grid_search(e, &cands, r, seed).map_err(fail)?;
            let curve = ev.curve(o.span);
            // β closest to the origin is the unweighted baseline
            let base = (0..cands.len())
                .min_by(|&a, &b| {
                    let n = |p: &[f64]| p.iter().map(|x| x * x).sum::<f64>();
                    n(&cands[a]).total_cmp(&n(&cands[b]))
                })
                .unwrap_or(0);
            let sidecar = json!({
                "argmax": curve.argmax_param,
                "smoothed_at_argmax": curve.smoothed[curve.argmax],
                "raw_at_argmax": curve.raw[curve.argmax],
                "se_at_argmax": curve.se[curve.argmax],
                "baseline": cands[base],
                "raw_at_baseline": curve.raw[base],
                "paired_se_vs_baseline": ev.paired_se(curve.argmax, base),
                "replicates": curve.replicates,
                "failed": ev.failed,
                "seed": seed,
                "smoother": {"kind": "local-linear", "kernel": "tricube", "span": o.span},
            });
            let summary = format!(
                "argmax {:?}: smoothed U = {:.5} (raw {:.5} ± {:.5}); baseline {:?}: raw U = {:.5}; paired se of difference {:.5}\n",
                curve.argmax_param,
                curve.smoothed[curve.argmax],
                curve.raw[curve.argmax],
                curve.se[curve.argmax],
                cands[base],
                curve.raw[base],
                ev.paired_se(curve.argmax, base)
            );
            Ok(RunOutput {
                oc: None,
                files: vec![
                    ("curve.csv".into(), curve.to_csv()),
                    ("optimum.json".into(), serde_json::to_string_pretty(&sidecar).expect("json") + "\n"),
                ],
                summary,
                failed: ev.failed,
                attempted: ev.failed + ev.replicates(),
            })
        }
        Search::Anneal => {
            let bounds: Vec<(f64, f64)> = o
                .bounds
                .clone()
                .unwrap_or_else(|| o.grid.iter().map(|a| [a.lo, a.hi]).collect())
                .iter()
                .map(|b| (b[0], b[1]))
                .collect();
            let settings = o.anneal.unwrap_or_else(AnnealSettings::default);
            let (res, est) = anneal_engine(e, &bounds, settings, r, seed).map_err(fail)?;
            let sidecar = json!({
                "best": res.best,
                "best_value_on_pool": res.best_value,
                "reevaluated": est,
                "initial_temperature": res.initial_temperature,
                "evaluations": res.evaluations,
                "settings": settings,
                "replicates": r,
                "seed": seed,
            });
            Ok(RunOutput {
                oc: None,
                files: vec![("anneal.json".into(), serde_json::to_string_pretty(&sidecar).expect("json") + "\n")],
                summary: format!("best {:?}: U = {:.5} ± {:.5} on fresh replicates\n", res.best, est.mean, est.se),
                failed: est.failed,
                attempted: est.failed + est.replicates,
            })
        }
    }
}

// ---------------------------------------------------------------------------
// Deterministic and report modes

fn prior_report(c: &ExperimentConfig) -> Result<RunOutput, RunError> {
    let sec = c.prior_report();
    let k = match (&sec.prevalence, &c.prior) {
        (Some(p), _) => p.len(),
        (None, Some(_)) => c.prior(1).k_count(),
        (None, None) => 1,
    };
    let prevalence = sec.prevalence.clone().unwrap_or_else(|| vec![1.0 / k as f64; k]);
    let hyper = c.prior(k);
    let rep = prior_predictive_report(&hyper, sec.n, &prevalence, c.replicates(), c.seed())
        .map_err(|e| ConfigError::new("prior", e.to_string()))?;
    let csv = rep.to_csv();
    Ok(RunOutput {
        summary: csv.clone(),
        files: vec![("prior_report.csv".into(), csv)],
        attempted: c.replicates(),
        ..Default::default()
    })
}

fn boundaries(c: &ExperimentConfig) -> Result<RunOutput, RunError> {
    let g = c.groupseq();
    let b = boundary_thresholds(&g.n_schedule, g.beta_e, g.alpha).map_err(|e| ConfigError::new("groupseq", e.to_string()))?;
    let csv = b.to_csv();
    Ok(RunOutput {
        summary: csv.clone(),
        files: vec![("boundaries.csv".into(), csv)],
        ..Default::default()
    })
}

pub fn enumerate() -> RunOutput {
    let rows = enumerate_single_patient_example();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "index",
        "function",
        "reject_y0s0",
        "reject_y0s1",
        "reject_y1s0",
        "reject_y1s1",
        "uses_auxiliary",
        "max_type1",
        "level_alpha",
        "expected_utility",
    ])
    .expect("in-memory write");
    for r in &rows {
        let b = |v: bool| (v as u8).to_string();
        w.write_record([
            r.index.to_string(),
            r.label.clone(),
            b(r.rejects[0][0]),
            b(r.rejects[0][1]),
            b(r.rejects[1][0]),
            b(r.rejects[1][1]),
            b(r.uses_auxiliary),
            format!("{:.6}", r.max_type1),
            b(r.level_alpha),
            format!("{:.6}", r.expected_utility),
        ])
        .expect("in-memory write");
    }
    let csv = String::from_utf8(w.into_inner().expect("flush")).expect("utf-8");
    let ok: Vec<String> = rows
        .iter()
        .filter(|r| r.level_alpha)
        .map(|r| format!("  {:<24} E[u] = {:.5}", r.label, r.expected_utility))
        .collect();
    RunOutput {
        summary: format!("{} of 16 functions satisfy the level constraint:\n{}\n", ok.len(), ok.join("\n")),
        files: vec![("example.csv".into(), csv)],
        ..Default::default()
    }
}
