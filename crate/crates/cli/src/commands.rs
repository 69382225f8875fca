use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use dialog_core::adapt::{self, auto_label_instances, cross_validate, AdaptationModel};
use dialog_core::corpus::{generate_synthetic_corpus, split_corpus, CorpusProfile, Domain, Split, SplitSpec};
use dialog_core::nlu::{ablation_grid, evaluate_nlu, train_intent_classifier, IntentModel};
use dialog_core::policy::{evaluate_policy, train_policy, FusionMode, PolicyConfig, PolicyModel};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{fusion_name, ExperimentConfig};
use crate::data::{load_dataset, Dataset};
use crate::error::{CliError, Result};
use crate::report::{Environment, Report, ReportRow};

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_VAR: &str = "DIALOG_OUTPUT_ROOT";

/// `--out` if given, else `<root>/<command>-<hash prefix>` under the
/// environment root or `runs/`.
pub fn output_dir(out: Option<&Path>, command: &str, cfg: &ExperimentConfig) -> PathBuf {
    if let Some(o) = out {
        return o.to_path_buf();
    }
    let root = std::env::var_os(OUTPUT_ROOT_VAR).map_or_else(|| PathBuf::from("runs"), PathBuf::from);
    root.join(format!("{command}-{}", &cfg.hash()[..12]))
}

fn write(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).map_err(|e| CliError::io(path, e))
}

fn loss_csv(trace: &[f64]) -> String {
    let mut s = String::from("epoch,loss\n");
    for (i, l) in trace.iter().enumerate() {
        s.push_str(&format!("{},{l}\n", i + 1));
    }
    s
}

/// Trained models plus the domain whose templates the chat speaks.
pub struct Artifacts {
    pub domain: Domain,
    pub nlu: IntentModel,
    pub policy: PolicyModel,
    pub adapt: Option<AdaptationModel>,
}

pub const DOMAIN_FILE: &str = "domain.json";
pub const NLU_FILE: &str = "nlu.json";
pub const POLICY_FILE: &str = "policy.json";
pub const ADAPT_FILE: &str = "adapt.json";
pub const METRICS_FILE: &str = "metrics.json";

impl Artifacts {
    pub fn train(cfg: &ExperimentConfig, data: &Dataset) -> Result<Self> {
        let nlu = train_intent_classifier(
            &data.domain.verbal_intents(),
            &data.nlu_train,
            &cfg.nlu,
            data.embeddings.clone(),
            cfg.seed,
        )?;
        let policy = train_policy(&data.train_stories, &cfg.policy, cfg.seed)?;
        let adapt = if data.adaptation.is_empty() {
            None
        } else {
            Some(AdaptationModel::train(&data.adaptation, cfg.adapt.rule, cfg.adapt.tree)?)
        };
        Ok(Self {
            domain: data.domain.clone(),
            nlu,
            policy,
            adapt,
        })
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        write(&dir.join(DOMAIN_FILE), &self.domain.to_json())?;
        self.nlu.save(&dir.join(NLU_FILE))?;
        self.policy.save(&dir.join(POLICY_FILE))?;
        if let Some(a) = &self.adapt {
            a.save(&dir.join(ADAPT_FILE))?;
        }
        write(&dir.join("loss_nlu.csv"), &loss_csv(&self.nlu.loss_trace))?;
        write(&dir.join("loss_policy.csv"), &loss_csv(&self.policy.loss_trace))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let need = |name: &str| {
            let p = dir.join(name);
            if p.is_file() {
                Ok(p)
            } else {
                Err(CliError::input(&p, "missing artifact; run `train` first"))
            }
        };
        let domain_path = need(DOMAIN_FILE)?;
        let text = std::fs::read_to_string(&domain_path).map_err(|e| CliError::input(&domain_path, e))?;
        let domain = dialog_core::corpus::parse_domain(&text).map_err(|e| CliError::input(&domain_path, e))?;
        let nlu_path = need(NLU_FILE)?;
        let nlu = IntentModel::load(&nlu_path).map_err(|e| CliError::input(&nlu_path, e))?;
        let policy_path = need(POLICY_FILE)?;
        let policy = PolicyModel::load(&policy_path).map_err(|e| CliError::input(&policy_path, e))?;
        let adapt_path = dir.join(ADAPT_FILE);
        let adapt = if adapt_path.is_file() {
            Some(AdaptationModel::load(&adapt_path).map_err(|e| CliError::input(&adapt_path, e))?)
        } else {
            None
        };
        Ok(Self {
            domain,
            nlu,
            policy,
            adapt,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NluMetrics {
    pub examples: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyMetrics {
    pub stories: usize,
    pub correct_stories: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub listen_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptMetrics {
    pub dialogs: usize,
    pub positive: usize,
    pub negative: usize,
    /// Agreement of the trained tree with the labeling rule.
    pub accuracy: f64,
    /// Mean accuracy over folds that hold out whole dialogs.
    pub cv_accuracy: f64,
}

/// Held-out metrics of all three components; absent parts had no test data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalDocument {
    pub config_hash: String,
    pub environment: Environment,
    pub nlu: Option<NluMetrics>,
    pub policy: Option<PolicyMetrics>,
    pub adaptation: Option<AdaptMetrics>,
}

fn check_inventory(art: &Artifacts, data: &Dataset) -> Result<()> {
    let intents: BTreeSet<&str> = art.nlu.intents.iter().map(|l| l.name.as_str()).collect();
    let mut bad: BTreeSet<String> = data
        .nlu_test
        .iter()
        .filter(|e| !intents.contains(e.intent.as_str()))
        .map(|e| format!("intent {}", e.intent))
        .collect();
    let actions: BTreeSet<&str> = art.policy.inventory.actions.iter().map(String::as_str).collect();
    bad.extend(
        data.test_stories
            .iter()
            .flat_map(|s| &s.turns)
            .filter(|t| !t.is_user() && !actions.contains(t.label.as_str()))
            .map(|t| format!("action {}", t.label)),
    );
    if bad.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(bad.into_iter().collect::<Vec<_>>().join(", ")))
    }
}

pub fn evaluate(cfg: &ExperimentConfig, art: &Artifacts, data: &Dataset) -> Result<EvalDocument> {
    check_inventory(art, data)?;
    let nlu = if data.nlu_test.is_empty() {
        None
    } else {
        let r = evaluate_nlu(&art.nlu, &data.nlu_test)?;
        Some(NluMetrics {
            examples: data.nlu_test.len(),
            precision: r.precision,
            recall: r.recall,
            f1: r.f1,
            accuracy: r.accuracy,
        })
    };
    let policy = if data.test_stories.is_empty() {
        None
    } else {
        let r = evaluate_policy(&art.policy, &data.test_stories)?;
        Some(PolicyMetrics {
            stories: r.stories,
            correct_stories: r.correct_stories,
            precision: r.precision,
            recall: r.recall,
            f1: r.f1,
            accuracy: r.accuracy,
            listen_accuracy: r.listen_accuracy,
        })
    };
    let adaptation = match &art.adapt {
        Some(m) if !data.adaptation.is_empty() => {
            let (inst, counts) = auto_label_instances(&data.adaptation, m.rule)?;
            let folds = cross_validate(&inst, cfg.adapt.folds, m.tree.params)?;
            Some(AdaptMetrics {
                dialogs: data.adaptation.len(),
                positive: counts.positive,
                negative: counts.negative,
                accuracy: adapt::accuracy(&m.tree, &inst),
                cv_accuracy: folds.iter().sum::<f64>() / folds.len() as f64,
            })
        }
        _ => None,
    };
    Ok(EvalDocument {
        config_hash: cfg.hash(),
        environment: Environment::current(),
        nlu,
        policy,
        adaptation,
    })
}

fn write_metrics(dir: &Path, doc: &EvalDocument) -> Result<()> {
    write(&dir.join(METRICS_FILE), &serde_json::to_string_pretty(doc).expect("metrics serialize"))
}

/// Trains every component, writes checkpoints, loss traces, the resolved
/// config and held-out metrics into `out`.
pub fn cmd_train(cfg: &ExperimentConfig, out: &Path) -> Result<EvalDocument> {
    cfg.validate()?;
    let data = load_dataset(cfg)?;
    let art = Artifacts::train(cfg, &data)?;
    art.save(out)?;
    write(&out.join("config.json"), &cfg.to_json())?;
    let doc = evaluate(cfg, &art, &data)?;
    write_metrics(out, &doc)?;
    Ok(doc)
}

/// Scores saved artifacts against the test portion of the configured corpus.
pub fn cmd_eval(cfg: &ExperimentConfig, artifacts: &Path, out: &Path) -> Result<EvalDocument> {
    cfg.validate()?;
    let art = Artifacts::load(artifacts)?;
    let data = load_dataset(cfg)?;
    let doc = evaluate(cfg, &art, &data)?;
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    write_metrics(out, &doc)?;
    Ok(doc)
}

pub fn cmd_generate(profile: &CorpusProfile, seed: u64, out: &Path) -> Result<()> {
    let c = generate_synthetic_corpus(profile, seed)?;
    c.write_to(out)?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
enum Cell {
    Policy {
        fusion: Option<FusionMode>,
        split: usize,
        seed: u64,
    },
    Nlu {
        variant: usize,
        seed: u64,
    },
}

fn failed(kind: &str, config_id: String, exclusion: f64, seed: u64, train_size: usize, err: impl std::fmt::Display) -> ReportRow {
    ReportRow {
        kind: kind.into(),
        config_id,
        exclusion,
        seed,
        train_size,
        precision: None,
        recall: None,
        f1: None,
        accuracy: None,
        correct_stories: None,
        stories: None,
        status: format!("error: {err}"),
    }
}

fn policy_cell(base: &PolicyConfig, fusion: Option<FusionMode>, split: &Split, seed: u64) -> ReportRow {
    let id = fusion_name(fusion);
    let run = || -> Result<ReportRow> {
        let cfg = PolicyConfig {
            fusion,
            ..base.clone()
        };
        let model = train_policy(&split.train, &cfg, seed)?;
        let r = evaluate_policy(&model, &split.test)?;
        Ok(ReportRow {
            kind: "policy".into(),
            config_id: id.clone(),
            exclusion: split.exclusion,
            seed,
            train_size: split.train.len(),
            precision: Some(r.precision),
            recall: Some(r.recall),
            f1: Some(r.f1),
            accuracy: Some(r.accuracy),
            correct_stories: Some(r.correct_stories),
            stories: Some(r.stories),
            status: "ok".into(),
        })
    };
    run().unwrap_or_else(|e| failed("policy", id.clone(), split.exclusion, seed, split.train.len(), e))
}

/// Runs the configured grid on `jobs` worker threads. Rows come out in grid
/// order (seed, fusion, exclusion; NLU rows last) whatever the scheduling;
/// a failing cell becomes an error row and the grid continues.
pub fn cmd_ablate(cfg: &ExperimentConfig, jobs: usize) -> Result<Report> {
    cfg.validate()?;
    if cfg.ablation.seeds.is_empty() || (cfg.ablation.fusions.is_empty() && !cfg.ablation.nlu) {
        return Err(CliError::Usage("empty ablation grid".into()));
    }
    let data = load_dataset(cfg)?;
    let base = cfg.ablation.policy.clone().unwrap_or_else(|| cfg.policy.clone());
    let mut splits = Vec::new();
    for &seed in &cfg.ablation.seeds {
        let spec = SplitSpec {
            exclusions: cfg.ablation.exclusions.clone(),
            seed,
        };
        splits.push(split_corpus(&data.train_stories, &data.test_stories, &spec)?);
    }
    let variants = ablation_grid("use", "bert");
    let mut cells = Vec::new();
    for (si, &seed) in cfg.ablation.seeds.iter().enumerate() {
        for &fusion in &cfg.ablation.fusions {
            for split in 0..splits[si].len() {
                cells.push((si, Cell::Policy { fusion, split, seed }));
            }
        }
    }
    if cfg.ablation.nlu {
        for &seed in &cfg.ablation.seeds {
            for variant in 0..variants.len() {
                cells.push((0, Cell::Nlu { variant, seed }));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let rows: Vec<ReportRow> = pool.install(|| {
        cells
            .par_iter()
            .map(|(si, cell)| match cell {
                Cell::Policy { fusion, split, seed } => policy_cell(&base, *fusion, &splits[*si][*split], *seed),
                Cell::Nlu { variant, seed } => {
                    let v = &variants[*variant];
                    let run = || -> Result<ReportRow> {
                        let m = train_intent_classifier(
                            &data.domain.verbal_intents(),
                            &data.nlu_train,
                            &v.config,
                            data.embeddings.clone(),
                            *seed,
                        )?;
                        let r = evaluate_nlu(&m, &data.nlu_test)?;
                        Ok(ReportRow {
                            kind: "nlu".into(),
                            config_id: v.name.clone(),
                            exclusion: 0.0,
                            seed: *seed,
                            train_size: data.nlu_train.len(),
                            precision: Some(r.precision),
                            recall: Some(r.recall),
                            f1: Some(r.f1),
                            accuracy: Some(r.accuracy),
                            correct_stories: None,
                            stories: None,
                            status: "ok".into(),
                        })
                    };
                    run().unwrap_or_else(|e| failed("nlu", v.name.clone(), 0.0, *seed, data.nlu_train.len(), e))
                }
            })
            .collect()
    });
    let mut report = Report::new(cfg.hash());
    rows.into_iter().for_each(|r| report.push(r));
    Ok(report)
}
