use auxtrial_cli::config::{ConfigError, ExperimentConfig, Mode, Overrides};
use auxtrial_cli::manifest::{write_outputs, Manifest};
use auxtrial_cli::run::{run_experiment, RunError};
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

const EXIT_CONFIG: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "auxtrial", version, about = "Trial designs that borrow strength from an auxiliary outcome")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed; overrides the config.
    #[arg(long, global = true, env = "AUXTRIAL_SEED")]
    seed: Option<u64>,

    /// Monte Carlo replicates; overrides the config.
    #[arg(long, global = true)]
    replicates: Option<usize>,

    /// Worker threads (0 = one per core); overrides the config.
    #[arg(long, global = true, env = "AUXTRIAL_WORKERS")]
    workers: Option<usize>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Operating characteristics of multiple-testing or group-sequential designs.
    Simulate,
    /// Expected-utility optimization of decision-rule parameters.
    Optimize,
    /// Bootstrap-calibrated multiple testing.
    Calibrate,
    /// Efficacy boundaries for a look schedule.
    Boundaries,
    /// Prior-predictive summaries of simulated trials.
    PriorReport,
    /// All 16 tests for the single-patient example with their utilities.
    EnumerateExample,
    /// Group-sequential designs on trials resampled from a control pool.
    Retro,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Optimize => "optimize",
            Command::Calibrate => "calibrate",
            Command::Boundaries => "boundaries",
            Command::PriorReport => "prior-report",
            Command::EnumerateExample => "enumerate-example",
            Command::Retro => "retro",
        }
    }

    fn modes(self) -> &'static [Mode] {
        match self {
            Command::Simulate => &[Mode::MultitestSim, Mode::GroupseqSim],
            Command::Optimize => &[Mode::Optimize],
            Command::Calibrate => &[Mode::Calibrate],
            Command::Boundaries => &[Mode::Boundaries],
            Command::PriorReport => &[Mode::PriorReport],
            Command::EnumerateExample => &[Mode::EnumerateExample],
            Command::Retro => &[Mode::RetroSim],
        }
    }

    fn needs_config(self) -> bool {
        !matches!(self, Command::Boundaries | Command::EnumerateExample | Command::PriorReport)
    }
}

fn config_error(e: &ConfigError) -> ExitCode {
    eprintln!("config error:\n{e}");
    ExitCode::from(EXIT_CONFIG)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cmd = cli.command;
    let mut config = match &cli.config {
        Some(p) => match ExperimentConfig::load(p) {
            Ok(c) => c,
            Err(e) => return config_error(&e),
        },
        None if cmd.needs_config() => return config_error(&ConfigError::new("--config", "required for this command")),
        None => ExperimentConfig::default(),
    };
    config.apply(&Overrides {
        seed: cli.seed,
        replicates: cli.replicates,
        workers: cli.workers,
        out: cli.out.clone(),
    });
    if let Err(e) = config.set_mode(cmd.modes()) {
        return config_error(&e);
    }
    let workers = match config.workers {
        Some(0) | None => std::thread::available_parallelism().map_or(1, |n| n.get()),
        Some(w) => w,
    };
    let out_dir = config.out.clone().unwrap_or_else(|| PathBuf::from("results"));

    let start = Instant::now();
    let output = match run_experiment(&config) {
        Ok(o) => o,
        Err(RunError::Config(e)) => return config_error(&e),
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(EXIT_PARTIAL);
        }
    };
    let manifest = Manifest::new(cmd.name(), &config, &output, workers, start.elapsed().as_secs_f64());
    if let Err(e) = write_outputs(&out_dir, &output, &manifest) {
        eprintln!("cannot write results to {}: {e}", out_dir.display());
        return ExitCode::FAILURE;
    }
    print!("{}", output.summary);
    eprintln!(
        "wrote {} file(s) and manifest.json to {} in {:.1}s",
        output.files.len(),
        out_dir.display(),
        manifest.wall_time_seconds
    );
    if output.failed > 0 {
        eprintln!("{} of {} replicates failed; results are partial", output.failed, output.attempted);
        return ExitCode::from(EXIT_PARTIAL);
    }
    ExitCode::SUCCESS
}
