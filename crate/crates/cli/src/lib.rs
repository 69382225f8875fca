//! Command-line harness around the dialog pipeline: training, evaluation,
//! ablation grids with CSV/JSON reports, corpus generation and a terminal
//! chat.

pub mod chat;
pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod report;

pub use chat::run_chat;
pub use commands::{cmd_ablate, cmd_eval, cmd_generate, cmd_train, output_dir, Artifacts, EvalDocument};
pub use config::{parse_fusion, AblationConfig, AdaptConfig, CorpusFiles, CorpusSource, ExperimentConfig};
pub use data::{load_dataset, Dataset};
pub use error::{CliError, Result};
pub use report::{Report, ReportRow};
