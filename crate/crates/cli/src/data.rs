use std::collections::BTreeMap;
use std::path::Path;

use dialog_core::corpus::{
    generate_synthetic_corpus, parse_domain, read_nlu_file, read_stories_file, AdaptationDialog, CorpusError, Domain,
    Story,
};
use dialog_core::featurize::{load_external_embeddings, ExternalEmbeddingTable};
use dialog_core::nlu::IntentExample;
use serde::Deserialize;

use crate::config::{CorpusFiles, CorpusSource, ExperimentConfig};
use crate::error::{CliError, Result};

/// A corpus loaded into memory.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub domain: Domain,
    pub nlu_train: Vec<IntentExample>,
    pub nlu_test: Vec<IntentExample>,
    pub train_stories: Vec<Story>,
    pub test_stories: Vec<Story>,
    pub adaptation: Vec<AdaptationDialog>,
    pub embeddings: BTreeMap<String, ExternalEmbeddingTable>,
}

pub fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    match &cfg.corpus {
        CorpusSource::Generate { profile } => {
            let c = generate_synthetic_corpus(profile, cfg.seed)?;
            Ok(Dataset {
                domain: c.domain,
                nlu_train: c.nlu_train,
                nlu_test: c.nlu_test,
                train_stories: c.train_stories,
                test_stories: c.test_stories,
                adaptation: c.adaptation,
                embeddings: c.embeddings,
            })
        }
        CorpusSource::Files(files) => load_files(files),
    }
}

/// Wraps parse failures so the message names the offending file.
fn in_file<T>(path: &Path, r: std::result::Result<T, CorpusError>) -> Result<T> {
    r.map_err(|e| match e {
        CorpusError::Io { source, .. } => CliError::input(path, source),
        CorpusError::Validation(v) => CliError::input(path, format!("unknown labels: {}", v.join(", "))),
        other => CliError::input(path, other),
    })
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::input(path, e))
}

fn nlu(path: &Path) -> Result<Vec<IntentExample>> {
    Ok(in_file(path, read_nlu_file(path))?.iter().map(|e| e.example()).collect())
}

fn stories(path: &Path, domain: &Domain) -> Result<Vec<Story>> {
    Ok(in_file(path, read_stories_file(path, Some(domain)))?.stories)
}

#[derive(Deserialize)]
struct AdaptationRecord {
    #[serde(default)]
    dialog: Option<usize>,
    context: String,
    candidates: Vec<String>,
    #[serde(default)]
    realized: Option<String>,
}

/// JSON lines of `{context, candidates, realized}`; `dialog` defaults to
/// the line number.
pub fn parse_adaptation(path: &Path, text: &str) -> Result<Vec<AdaptationDialog>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let r: AdaptationRecord =
            serde_json::from_str(line).map_err(|e| CliError::input(path, format!("line {}: {e}", i + 1)))?;
        if r.candidates.is_empty() {
            return Err(CliError::input(path, format!("line {}: no candidates", i + 1)));
        }
        out.push(AdaptationDialog {
            dialog: r.dialog.unwrap_or(i),
            realized: r.realized.unwrap_or_else(|| r.candidates[0].clone()),
            context: r.context,
            candidates: r.candidates,
        });
    }
    Ok(out)
}

fn load_files(f: &CorpusFiles) -> Result<Dataset> {
    let domain = in_file(&f.domain, parse_domain(&read(&f.domain)?))?;
    let nlu_train = nlu(&f.nlu_train)?;
    let nlu_test = f.nlu_test.as_deref().map(nlu).transpose()?.unwrap_or_default();
    let train_stories = stories(&f.stories_train, &domain)?;
    let test_stories = f.stories_test.as_deref().map(|p| stories(p, &domain)).transpose()?.unwrap_or_default();
    let adaptation = match &f.adaptation {
        Some(p) => parse_adaptation(p, &read(p)?)?,
        None => Vec::new(),
    };
    let mut embeddings = BTreeMap::new();
    for (name, p) in &f.embeddings {
        let table = load_external_embeddings(p).map_err(|e| CliError::input(p, e))?;
        embeddings.insert(name.clone(), table);
    }
    Ok(Dataset {
        domain,
        nlu_train,
        nlu_test,
        train_stories,
        test_stories,
        adaptation,
        embeddings,
    })
}
