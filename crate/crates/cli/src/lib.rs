//! Configuration, experiment orchestration and table output for the
//! `auxtrial` command-line tool.

pub mod config;
pub mod manifest;
pub mod oc;
pub mod run;
pub mod table;

pub use config::{ConfigError, ExperimentConfig, Mode, Overrides};
pub use oc::{MethodResult, OperatingCharacteristics, Tally};
pub use run::{run_experiment, RunError, RunOutput};
pub use table::{emit_table, Layout, Table};
