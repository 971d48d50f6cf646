//! Experiment configuration: a TOML file plus command-line and environment
//! overrides. Every section has defaults matching the reference studies, so a
//! config only needs what differs.

use auxtrial::groupseq::{DesignKind, GroupSeqConfig, SamplerSettings};
use auxtrial::prior::{EffectSharing, PriorHyperparams};
use auxtrial::scenario::{presets, ScenarioSpec};
use auxtrial::utility::{AnnealSettings, Penalty, SequentialUtility};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    MultitestSim,
    GroupseqSim,
    Optimize,
    Calibrate,
    Boundaries,
    PriorReport,
    EnumerateExample,
    RetroSim,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::MultitestSim => "multitest-sim",
            Mode::GroupseqSim => "groupseq-sim",
            Mode::Optimize => "optimize",
            Mode::Calibrate => "calibrate",
            Mode::Boundaries => "boundaries",
            Mode::PriorReport => "prior-report",
            Mode::EnumerateExample => "enumerate-example",
            Mode::RetroSim => "retro-sim",
        }
    }

    /// Modes whose output does not depend on a random seed.
    pub fn deterministic(self) -> bool {
        matches!(self, Mode::Boundaries | Mode::EnumerateExample)
    }
}

/// One problem with a config, tied to the offending field.
#[derive(Debug, Clone, PartialEq)]
pub struct Issue {
    pub field: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub issues: Vec<Issue>,
}

impl ConfigError {
    pub fn new(field: &str, message: impl Into<String>) -> Self {
        Self {
            issues: vec![Issue {
                field: field.into(),
                message: message.into(),
            }],
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, is) in self.issues.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{}: {}", is.field, is.message)?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// K = 2, prevalences 0.6/0.4, N = 200.
    TwoGroups,
    /// K = 6, prevalences 0.25 then 0.15 × 5, N = 600.
    SixGroups,
    /// K = 1, N = 200.
    SinglePopulation,
}

impl Preset {
    fn build(self, config: u8, odds_ratio: f64) -> Option<ScenarioSpec> {
        match self {
            Preset::TwoGroups => presets::two_groups(config, odds_ratio),
            Preset::SixGroups => presets::six_groups(config, odds_ratio),
            Preset::SinglePopulation => presets::single_population(config, odds_ratio),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioEntry {
    Preset {
        preset: Preset,
        config: u8,
        odds_ratio: f64,
        #[serde(default)]
        n_total: Option<usize>,
    },
    Explicit(ScenarioSpec),
}

/// Cartesian product of effect configurations and odds ratios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub preset: Preset,
    pub configs: Vec<u8>,
    pub odds_ratios: Vec<f64>,
    #[serde(default)]
    pub n_total: Option<usize>,
}

/// A scenario ready to simulate, with the labels used in tables.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedScenario {
    pub label: String,
    pub odds_ratio: Option<f64>,
    pub spec: ScenarioSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PriorSpec {
    Full(PriorHyperparams),
    Reference {
        k: usize,
        #[serde(default)]
        sharing: Option<EffectSharing>,
    },
}

impl PriorSpec {
    fn resolve(&self) -> PriorHyperparams {
        match self {
            PriorSpec::Full(h) => h.clone(),
            PriorSpec::Reference { k, sharing } => PriorHyperparams::reference(*k, sharing.unwrap_or(default_sharing(*k))),
        }
    }
}

// Effects are shared across subgroups unless stated otherwise.
fn default_sharing(k: usize) -> EffectSharing {
    if k > 1 {
        EffectSharing::Shared
    } else {
        EffectSharing::Independent
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    AuxiliaryAugmented,
    /// Auxiliary-Augmented with a bootstrap-calibrated level.
    AuxiliaryAugmentedB,
    Bonferroni,
    Holm,
    AuxiliaryOnly,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::AuxiliaryAugmented => "Auxiliary-Augmented",
            Method::AuxiliaryAugmentedB => "Auxiliary-Augmented-B",
            Method::Bonferroni => "Bonferroni",
            Method::Holm => "Holm",
            Method::AuxiliaryOnly => "Auxiliary-Only",
        }
    }
}

fn default_alpha() -> f64 {
    0.05
}
fn default_beta() -> Vec<f64> {
    vec![4.45]
}
fn default_calibration_draws() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultitestSection {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// One shared β or one per group.
    #[serde(default = "default_beta")]
    pub beta: Vec<f64>,
    /// Defaults to all uncalibrated methods; calibrate mode defaults to the
    /// Auxiliary-Augmented procedure with and without calibration.
    #[serde(default)]
    pub methods: Option<Vec<Method>>,
    #[serde(default = "default_calibration_draws")]
    pub calibration_draws: usize,
    #[serde(default)]
    pub prior_weights: Option<Vec<f64>>,
}

impl MultitestSection {
    pub fn methods(&self, mode: Mode) -> Vec<Method> {
        match (&self.methods, mode) {
            (Some(m), _) => m.clone(),
            (None, Mode::Calibrate) => vec![Method::AuxiliaryAugmented, Method::AuxiliaryAugmentedB],
            (None, _) => vec![Method::AuxiliaryAugmented, Method::Bonferroni, Method::Holm, Method::AuxiliaryOnly],
        }
    }
}

impl Default for MultitestSection {
    fn default() -> Self {
        Self {
            alpha: default_alpha(),
            beta: default_beta(),
            methods: None,
            calibration_draws: default_calibration_draws(),
            prior_weights: None,
        }
    }
}

fn default_n_schedule() -> Vec<usize> {
    vec![100, 200]
}
fn default_beta_e() -> f64 {
    2.0
}
fn default_beta_f() -> f64 {
    0.13
}
fn default_designs() -> Vec<DesignKind> {
    DesignKind::all().to_vec()
}
fn default_draws() -> usize {
    SamplerSettings::default().draws
}
fn default_burn_in() -> usize {
    SamplerSettings::default().burn_in
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSeqSection {
    #[serde(default = "default_n_schedule")]
    pub n_schedule: Vec<usize>,
    /// Enrollments at each look; defaults to `n_schedule` (no lag).
    #[serde(default)]
    pub m_schedule: Option<Vec<usize>>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_beta_e")]
    pub beta_e: f64,
    #[serde(default = "default_beta_f")]
    pub beta_f: f64,
    #[serde(default = "default_designs")]
    pub designs: Vec<DesignKind>,
    #[serde(default = "default_draws")]
    pub draws: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
}

impl Default for GroupSeqSection {
    fn default() -> Self {
        Self {
            n_schedule: default_n_schedule(),
            m_schedule: None,
            alpha: default_alpha(),
            beta_e: default_beta_e(),
            beta_f: default_beta_f(),
            designs: default_designs(),
            draws: default_draws(),
            burn_in: default_burn_in(),
        }
    }
}

impl GroupSeqSection {
    pub fn engine_config(&self, design: DesignKind) -> GroupSeqConfig {
        GroupSeqConfig {
            n_schedule: self.n_schedule.clone(),
            m_schedule: self.m_schedule.clone().unwrap_or_else(|| self.n_schedule.clone()),
            alpha: self.alpha,
            beta_e: self.beta_e,
            beta_f: self.beta_f,
            design,
            sampler: SamplerSettings {
                draws: self.draws,
                burn_in: self.burn_in,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EngineKind {
    Multitest,
    Sequential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Search {
    #[default]
    Grid,
    Anneal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridAxis {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

fn default_n() -> usize {
    200
}
fn default_lambda() -> Penalty {
    Penalty::Scalar(0.5)
}
fn default_span() -> f64 {
    0.4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeSection {
    pub engine: EngineKind,
    #[serde(default)]
    pub search: Search,
    /// Trial size for the multitest engine.
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub prevalence: Option<Vec<f64>>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_lambda")]
    pub lambda: Penalty,
    /// Multitest: one axis (shared β) or one per group. Sequential: β_E then β_F.
    #[serde(default)]
    pub grid: Vec<GridAxis>,
    #[serde(default = "default_span")]
    pub span: f64,
    #[serde(default)]
    pub anneal: Option<AnnealSettings>,
    /// Annealing box; defaults to the grid's ranges.
    #[serde(default)]
    pub bounds: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub utility: Option<SequentialUtility>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorReportSection {
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub prevalence: Option<Vec<f64>>,
}

impl Default for PriorReportSection {
    fn default() -> Self {
        Self {
            n: default_n(),
            prevalence: None,
        }
    }
}

/// Control pool built from an odds-ratio joint when no data file is given.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticPool {
    pub size: usize,
    pub p_y: f64,
    pub p_s: f64,
    pub odds_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perturbation {
    pub label: String,
    pub p_y: f64,
    pub p_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetroSection {
    /// Control-arm records in the columnar trial CSV format.
    #[serde(default)]
    pub pool: Option<PathBuf>,
    #[serde(default)]
    pub synthetic: Option<SyntheticPool>,
    #[serde(default = "default_n")]
    pub n: usize,
    pub perturbations: Vec<Perturbation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub mode: Option<Mode>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub replicates: Option<usize>,
    /// Worker threads; 0 or absent means one per core.
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub scenarios: Vec<ScenarioEntry>,
    #[serde(default)]
    pub sweep: Option<Sweep>,
    #[serde(default)]
    pub prior: Option<PriorSpec>,
    #[serde(default)]
    pub multitest: Option<MultitestSection>,
    #[serde(default)]
    pub groupseq: Option<GroupSeqSection>,
    #[serde(default)]
    pub optimize: Option<OptimizeSection>,
    #[serde(default)]
    pub prior_report: Option<PriorReportSection>,
    #[serde(default)]
    pub retro: Option<RetroSection>,
}

/// Command-line and environment values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub replicates: Option<usize>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| {
            let msg = e.message().to_string();
            let field = e
                .span()
                .map(|s| {
                    let line = text[..s.start.min(text.len())].lines().count().max(1);
                    format!("line {line}")
                })
                .unwrap_or_else(|| "config".into());
            ConfigError::new(&field, msg)
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("--config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if o.seed.is_some() {
            self.seed = o.seed;
        }
        if o.replicates.is_some() {
            self.replicates = o.replicates;
        }
        if o.workers.is_some() {
            self.workers = o.workers;
        }
        if o.out.is_some() {
            self.out.clone_from(&o.out);
        }
    }

    /// Fixes the mode to the one implied by a subcommand. A config naming a
    /// different mode is rejected.
    pub fn set_mode(&mut self, allowed: &[Mode]) -> Result<Mode, ConfigError> {
        match self.mode {
            Some(m) if allowed.contains(&m) => Ok(m),
            Some(m) => Err(ConfigError::new(
                "mode",
                format!(
                    "config is for {}, but this command runs {}",
                    m.name(),
                    allowed.iter().map(|m| m.name()).collect::<Vec<_>>().join(" or ")
                ),
            )),
            None if allowed.len() == 1 => {
                self.mode = Some(allowed[0]);
                Ok(allowed[0])
            }
            None => {
                // simulate: infer from the sections present
                let m = if self.groupseq.is_some() && self.multitest.is_none() {
                    Mode::GroupseqSim
                } else {
                    Mode::MultitestSim
                };
                if !allowed.contains(&m) {
                    return Err(ConfigError::new("mode", "required"));
                }
                self.mode = Some(m);
                Ok(m)
            }
        }
    }

    pub fn mode(&self) -> Result<Mode, ConfigError> {
        self.mode.ok_or_else(|| ConfigError::new("mode", "required"))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn replicates(&self) -> usize {
        self.replicates.unwrap_or(0)
    }

    pub fn multitest(&self) -> MultitestSection {
        self.multitest.clone().unwrap_or_default()
    }

    pub fn groupseq(&self) -> GroupSeqSection {
        self.groupseq.clone().unwrap_or_default()
    }

    pub fn prior_report(&self) -> PriorReportSection {
        self.prior_report.clone().unwrap_or_default()
    }

    /// Prior hyperparameters, or the reference prior for `k` groups.
    pub fn prior(&self, k: usize) -> PriorHyperparams {
        self.prior
            .as_ref()
            .map(PriorSpec::resolve)
            .unwrap_or_else(|| PriorHyperparams::reference(k, default_sharing(k)))
    }

    /// Sweep scenarios first, then the explicit list.
    pub fn resolved_scenarios(&self) -> Result<Vec<ResolvedScenario>, ConfigError> {
        let mut out = Vec::new();
        let build = |field: String, preset: Preset, config: u8, or: f64, n: Option<usize>| match preset.build(config, or) {
            Some(mut spec) => {
                if let Some(n) = n {
                    spec.n_total = n;
                }
                Ok(ResolvedScenario {
                    label: format!("{config}"),
                    odds_ratio: Some(or),
                    spec,
                })
            }
            None => Err(ConfigError::new(&field, format!("effect configuration {config} is not in 1..=5"))),
        };
        if let Some(s) = &self.sweep {
            for &c in &s.configs {
                for &r in &s.odds_ratios {
                    out.push(build("sweep.configs".into(), s.preset, c, r, s.n_total)?);
                }
            }
        }
        for (i, e) in self.scenarios.iter().enumerate() {
            match e {
                ScenarioEntry::Preset {
                    preset,
                    config,
                    odds_ratio,
                    n_total,
                } => out.push(build(format!("scenarios[{i}].config"), *preset, *config, *odds_ratio, *n_total)?),
                ScenarioEntry::Explicit(spec) => {
                    let or = spec.odds_ratio.first().map(|r| r[0]);
                    let uniform = spec.odds_ratio.iter().all(|r| Some(r[0]) == or && Some(r[1]) == or);
                    out.push(ResolvedScenario {
                        label: if spec.name.is_empty() { format!("scenario-{i}") } else { spec.name.clone() },
                        odds_ratio: if uniform { or } else { None },
                        spec: spec.clone(),
                    });
                }
            }
        }
        Ok(out)
    }

    /// Checks everything the selected mode will use.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mode = self.mode()?;
        let mut issues = Vec::new();
        let mut bad = |f: &str, m: String| {
            issues.push(Issue {
                field: f.into(),
                message: m,
            })
        };
        if !mode.deterministic() {
            if self.seed.is_none() {
                bad("seed", "required (set it in the config, with --seed or AUXTRIAL_SEED)".into());
            }
            match self.replicates {
                None => bad("replicates", "required".into()),
                Some(0) => bad("replicates", "must be positive".into()),
                Some(r) if r < 100 && matches!(mode, Mode::Optimize | Mode::PriorReport) => {
                    bad("replicates", format!("needs at least 100, got {r}"))
                }
                _ => {}
            }
        }
        if let Some(p) = &self.prior {
            if let Err(e) = p.resolve().validate() {
                bad("prior", e.to_string());
            }
        }
        let scenarios = match self.resolved_scenarios() {
            Ok(s) => s,
            Err(e) => {
                issues.extend(e.issues);
                vec![]
            }
        };
        let needs_scenarios = matches!(mode, Mode::MultitestSim | Mode::GroupseqSim | Mode::Calibrate);
        if needs_scenarios && scenarios.is_empty() && self.sweep.is_none() && self.scenarios.is_empty() {
            issues.push(Issue {
                field: "scenarios".into(),
                message: "list at least one scenario or a sweep".into(),
            });
        }
        for (i, s) in scenarios.iter().enumerate() {
            if let Err(e) = s.spec.cells() {
                issues.push(Issue {
                    field: format!("scenarios[{i}]"),
                    message: e.to_string(),
                });
            }
        }
        match mode {
            Mode::MultitestSim | Mode::Calibrate => {
                let m = self.multitest();
                if !(m.alpha > 0.0 && m.alpha < 1.0) {
                    issues.push(issue("multitest.alpha", format!("must lie in (0,1), got {}", m.alpha)));
                }
                if m.methods(mode).is_empty() {
                    issues.push(issue("multitest.methods", "list at least one method".into()));
                }
                for s in &scenarios {
                    let k = s.spec.k_count();
                    if m.beta.len() != 1 && m.beta.len() != k {
                        issues.push(issue("multitest.beta", format!("give one value or {k} values")));
                        break;
                    }
                    if m.prior_weights.as_ref().is_some_and(|w| w.len() != k) {
                        issues.push(issue("multitest.prior_weights", format!("give {k} values")));
                        break;
                    }
                }
                if m.beta.iter().any(|b| !b.is_finite()) {
                    issues.push(issue("multitest.beta", "values must be finite".into()));
                }
                let calibrated = m.methods(mode).contains(&Method::AuxiliaryAugmentedB);
                if calibrated && m.calibration_draws < 1000 {
                    issues.push(issue("multitest.calibration_draws", "needs at least 1000".into()));
                }
            }
            Mode::GroupseqSim | Mode::RetroSim => {
                self.check_groupseq(&mut issues);
                if mode == Mode::GroupseqSim {
                    for (i, s) in scenarios.iter().enumerate() {
                        if s.spec.k_count() != 1 {
                            issues.push(issue(&format!("scenarios[{i}]"), "sequential designs need one group".into()));
                        }
                        let need = *self.groupseq().engine_config(DesignKind::PrimaryOnly).m_schedule.last().unwrap_or(&0);
                        if s.spec.n_total < need {
                            issues.push(issue(
                                &format!("scenarios[{i}].n_total"),
                                format!("{} patients, the schedule enrolls {need}", s.spec.n_total),
                            ));
                        }
                    }
                } else {
                    match &self.retro {
                        None => issues.push(issue("retro", "section required".into())),
                        Some(r) => {
                            if r.pool.is_none() == r.synthetic.is_none() {
                                issues.push(issue("retro", "give exactly one of pool or synthetic".into()));
                            }
                            if r.perturbations.is_empty() {
                                issues.push(issue("retro.perturbations", "list at least one".into()));
                            }
                            for (i, p) in r.perturbations.iter().enumerate() {
                                if !(0.0..=1.0).contains(&p.p_y) || !(0.0..=1.0).contains(&p.p_s) {
                                    issues.push(issue(&format!("retro.perturbations[{i}]"), "probabilities must lie in [0,1]".into()));
                                }
                            }
                            if let Some(s) = &r.synthetic {
                                if s.size == 0 {
                                    issues.push(issue("retro.synthetic.size", "must be positive".into()));
                                }
                                if auxtrial::scenario::solve_joint(s.p_y, s.p_s, s.odds_ratio).is_err() {
                                    issues.push(issue("retro.synthetic", "invalid margins or odds ratio".into()));
                                }
                            }
                        }
                    }
                }
            }
            Mode::Boundaries => self.check_groupseq(&mut issues),
            Mode::Optimize => match &self.optimize {
                None => issues.push(issue("optimize", "section required".into())),
                Some(o) => {
                    if o.span <= 0.0 || o.span > 1.0 {
                        issues.push(issue("optimize.span", "must lie in (0,1]".into()));
                    }
                    let dims = match o.engine {
                        EngineKind::Multitest => {
                            let k = o.prevalence.as_ref().map_or(2, Vec::len);
                            if let Err(e) = o.lambda.validate(k) {
                                issues.push(issue("optimize.lambda", e.to_string()));
                            }
                            vec![1, k]
                        }
                        EngineKind::Sequential => {
                            self.check_groupseq(&mut issues);
                            vec![2]
                        }
                    };
                    if o.search == Search::Grid {
                        if !dims.contains(&o.grid.len()) {
                            issues.push(issue("optimize.grid", format!("give {} axes", dims.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(" or "))));
                        }
                        for (i, a) in o.grid.iter().enumerate() {
                            if !(a.lo <= a.hi) || a.points == 0 {
                                issues.push(issue(&format!("optimize.grid[{i}]"), "need lo <= hi and points > 0".into()));
                            }
                        }
                    } else {
                        let b = o.bounds.clone().unwrap_or_else(|| o.grid.iter().map(|a| [a.lo, a.hi]).collect());
                        if !dims.contains(&b.len()) {
                            issues.push(issue("optimize.bounds", "wrong number of dimensions".into()));
                        }
                    }
                }
            },
            Mode::PriorReport | Mode::EnumerateExample => {}
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(ConfigError { issues })
        }
    }

    fn check_groupseq(&self, issues: &mut Vec<Issue>) {
        let g = self.groupseq();
        if g.designs.is_empty() {
            issues.push(issue("groupseq.designs", "list at least one design".into()));
        }
        if let Err(e) = g.engine_config(DesignKind::PrimaryOnly).validate() {
            issues.push(issue("groupseq", e.to_string()));
        }
    }
}

fn issue(field: &str, message: String) -> Issue {
    Issue {
        field: field.into(),
        message,
    }
}
