use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use dialog_core::adapt::{LabelRule, TreeParams};
use dialog_core::corpus::{CorpusProfile, DEFAULT_EXCLUSIONS};
use dialog_core::nlu::NluConfig;
use dialog_core::policy::{FusionMode, PolicyConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

/// Where the dialogs come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum CorpusSource {
    /// Seeded synthetic corpus; the experiment seed drives generation.
    Generate {
        #[serde(default)]
        profile: CorpusProfile,
    },
    Files(CorpusFiles),
}

impl Default for CorpusSource {
    fn default() -> Self {
        CorpusSource::Generate {
            profile: CorpusProfile::default(),
        }
    }
}

/// Corpus files. Relative paths resolve against the config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusFiles {
    pub domain: PathBuf,
    pub nlu_train: PathBuf,
    #[serde(default)]
    pub nlu_test: Option<PathBuf>,
    pub stories_train: PathBuf,
    #[serde(default)]
    pub stories_test: Option<PathBuf>,
    #[serde(default)]
    pub adaptation: Option<PathBuf>,
    /// External sentence embedding tables by name.
    #[serde(default)]
    pub embeddings: BTreeMap<String, PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaptConfig {
    pub rule: LabelRule,
    pub tree: TreeParams,
    pub folds: usize,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        Self {
            rule: LabelRule::default(),
            tree: TreeParams::default(),
            folds: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AblationConfig {
    /// `None` entries are the plain LSTM baseline.
    pub fusions: Vec<Option<FusionMode>>,
    pub exclusions: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Also run the eight-row NLU feature grid once per seed.
    pub nlu: bool,
    /// Overrides applied to `policy` for every grid cell.
    pub policy: Option<PolicyConfig>,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            fusions: FusionMode::ALL.iter().copied().map(Some).collect(),
            exclusions: DEFAULT_EXCLUSIONS.to_vec(),
            seeds: vec![1, 2, 3, 4, 5],
            nlu: false,
            policy: None,
        }
    }
}

/// Everything a run depends on; config plus seed reproduce the outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub corpus: CorpusSource,
    pub nlu: NluConfig,
    pub policy: PolicyConfig,
    pub adapt: AdaptConfig,
    pub ablation: AblationConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            corpus: CorpusSource::default(),
            nlu: NluConfig::default(),
            policy: PolicyConfig::default(),
            adapt: AdaptConfig::default(),
            ablation: AblationConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Reads a JSON config; corpus paths become relative to its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::input(path, e))?;
        let mut cfg: Self = serde_json::from_str(&text).map_err(|e| CliError::input(path, e))?;
        if let CorpusSource::Files(files) = &mut cfg.corpus {
            let base = path.parent().unwrap_or(Path::new("."));
            let fix = |p: &mut PathBuf| {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            };
            fix(&mut files.domain);
            fix(&mut files.nlu_train);
            fix(&mut files.stories_train);
            for p in [&mut files.nlu_test, &mut files.stories_test, &mut files.adaptation].into_iter().flatten() {
                fix(p);
            }
            files.embeddings.values_mut().for_each(fix);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.nlu.validate()?;
        self.policy.validate()?;
        if let Some(p) = &self.ablation.policy {
            p.validate()?;
        }
        if self.adapt.folds < 2 {
            return Err(CliError::Usage("adapt.folds must be at least 2".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the compact JSON form.
    pub fn hash(&self) -> String {
        let body = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(body.as_bytes()))
    }
}

/// Parses `C4`, `c4` or `none`.
pub fn parse_fusion(s: &str) -> Result<Option<FusionMode>> {
    if s.eq_ignore_ascii_case("none") {
        return Ok(None);
    }
    s.parse().map(Some).map_err(|_| CliError::Usage(format!("unknown fusion mode {s:?}; expected C1..C7 or none")))
}

pub fn fusion_name(f: Option<FusionMode>) -> String {
    f.map_or_else(|| "none".to_string(), |m| m.to_string())
}
