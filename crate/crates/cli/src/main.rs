use std::io::IsTerminal;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use dialog_cli::config::fusion_name;
use dialog_cli::{
    cmd_ablate, cmd_eval, cmd_generate, cmd_train, output_dir, parse_fusion, run_chat, Artifacts, CliError,
    CorpusSource, ExperimentConfig, Result,
};
use dialog_core::corpus::CorpusProfile;

#[derive(Parser)]
#[command(name = "dialog", version, about = "Goal-oriented dialog pipeline: train, evaluate, ablate, chat")]
struct Cli {
    /// JSON experiment config; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default: $DIALOG_OUTPUT_ROOT/<command>-<hash>, or runs/...).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Profile {
    Default,
    Cooperative,
    Digressive,
}

#[derive(Subcommand)]
enum Command {
    /// Train NLU, policy and adaptation models and write checkpoints.
    Train {
        /// Policy memory configuration: C1..C7 or none.
        #[arg(long)]
        fusion: Option<String>,
    },
    /// Score saved models on the configured test data.
    Eval {
        /// Directory written by `train`.
        #[arg(long)]
        model: PathBuf,
    },
    /// Run the fusion x exclusion x seed grid and write reports.
    Ablate {
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Comma-separated exclusion percentages, e.g. 0,50,95.
        #[arg(long, value_delimiter = ',')]
        splits: Option<Vec<f64>>,
        /// Comma-separated fusion modes, e.g. C1,C4,none.
        #[arg(long, value_delimiter = ',')]
        fusion: Option<Vec<String>>,
        /// Comma-separated seeds.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Add the NLU feature grid.
        #[arg(long)]
        nlu: bool,
    },
    /// Talk to trained models on stdin/stdout.
    Chat {
        #[arg(long)]
        model: PathBuf,
    },
    /// Write a synthetic corpus.
    GenerateCorpus {
        /// Used when the config does not describe a generated corpus.
        #[arg(long, value_enum)]
        profile: Option<Profile>,
    },
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    match cli.command {
        Command::Train { fusion } => {
            if let Some(f) = fusion {
                cfg.policy.fusion = parse_fusion(&f)?;
            }
            let out = output_dir(cli.out.as_deref(), "train", &cfg);
            let doc = cmd_train(&cfg, &out)?;
            println!("trained {} into {}", fusion_name(cfg.policy.fusion), out.display());
            println!("{}", serde_json::to_string_pretty(&doc).expect("metrics serialize"));
        }
        Command::Eval { model } => {
            let out = cli.out.clone().unwrap_or_else(|| model.clone());
            let doc = cmd_eval(&cfg, &model, &out)?;
            println!("{}", serde_json::to_string_pretty(&doc).expect("metrics serialize"));
        }
        Command::Ablate {
            jobs,
            splits,
            fusion,
            seeds,
            nlu,
        } => {
            if let Some(s) = splits {
                cfg.ablation.exclusions = s;
            }
            if let Some(f) = fusion {
                cfg.ablation.fusions = f.iter().map(|s| parse_fusion(s)).collect::<Result<_>>()?;
            }
            if let Some(s) = seeds {
                cfg.ablation.seeds = s;
            }
            cfg.ablation.nlu |= nlu;
            let out = output_dir(cli.out.as_deref(), "ablate", &cfg);
            let report = cmd_ablate(&cfg, jobs)?;
            report.write_to(&out)?;
            let failures = report.rows.iter().filter(|r| !r.ok()).count();
            println!("{} rows ({failures} failed) written to {}", report.rows.len(), out.display());
            for b in report.best() {
                println!("best {} {}: {} at {}% exclusion = {:.4}", b.kind, b.metric, b.config_id, b.exclusion, b.value);
            }
        }
        Command::Chat { model } => {
            let art = Artifacts::load(&model)?;
            let stdin = std::io::stdin();
            if stdin.is_terminal() {
                println!("{}", dialog_cli::chat::HELP);
            }
            run_chat(&art, stdin.lock(), std::io::stdout().lock())?;
        }
        Command::GenerateCorpus { profile } => {
            let profile = match (&cfg.corpus, profile) {
                (_, Some(Profile::Default)) => CorpusProfile::default(),
                (_, Some(Profile::Cooperative)) => CorpusProfile::cooperative(),
                (_, Some(Profile::Digressive)) => CorpusProfile::digressive(),
                (CorpusSource::Generate { profile }, None) => profile.clone(),
                (CorpusSource::Files(_), None) => {
                    return Err(CliError::Usage("config names corpus files; pass --profile to generate".into()))
                }
            };
            let out = output_dir(cli.out.as_deref(), "corpus", &cfg);
            cmd_generate(&profile, cfg.seed, &out)?;
            println!("corpus written to {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
