//! Utterance featurization: tokenizer, bag-of-n-grams counts, a registry
//! of hand-written textual features, rule-based speech-act scores, and
//! ingestion of precomputed sentence embeddings.

mod external;
mod speech_acts;
mod textual;
mod vocab;

pub use external::{load_external_embeddings, parse_external_embeddings, ExternalEmbeddingTable};
pub use speech_acts::{speech_act_features, SPEECH_ACTS};
pub use textual::{textual_features, TextualConfig, TextualFamily};
pub use vocab::{count_vectorize, Vocabulary};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::Tensor;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("featurizer config: {0}")]
    Config(String),
    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Lowercased tokens of one utterance, with byte spans into `raw`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedUtterance {
    pub raw: String,
    pub tokens: Vec<String>,
    pub char_spans: Vec<(usize, usize)>,
}

impl TokenizedUtterance {
    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Tokens that are not standalone punctuation.
    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str).filter(|t| !is_punct(t))
    }
}

const SPLIT_CHARS: [char; 5] = ['?', '!', '.', ',', '\''];

pub(crate) fn is_punct(tok: &str) -> bool {
    tok.len() == 1 && tok.chars().all(|c| SPLIT_CHARS.contains(&c))
}

/// Splits on whitespace and emits each of `? ! . , '` as its own token.
pub fn tokenize(raw: &str) -> TokenizedUtterance {
    let mut tokens = Vec::new();
    let mut spans = Vec::new();
    let mut start: Option<usize> = None;
    let flush = |start: &mut Option<usize>, end: usize, tokens: &mut Vec<String>, spans: &mut Vec<(usize, usize)>| {
        if let Some(s) = start.take() {
            tokens.push(raw[s..end].to_lowercase());
            spans.push((s, end));
        }
    };
    for (i, c) in raw.char_indices() {
        if c.is_whitespace() {
            flush(&mut start, i, &mut tokens, &mut spans);
        } else if SPLIT_CHARS.contains(&c) {
            flush(&mut start, i, &mut tokens, &mut spans);
            tokens.push(c.to_string());
            spans.push((i, i + c.len_utf8()));
        } else if start.is_none() {
            start = Some(i);
        }
    }
    flush(&mut start, raw.len(), &mut tokens, &mut spans);
    TokenizedUtterance {
        raw: raw.to_string(),
        tokens,
        char_spans: spans,
    }
}

/// One contiguous block of a [`FeatureVector`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilySpan {
    pub family: String,
    pub offset: usize,
    pub width: usize,
}

/// Dense feature vector plus a record of which family owns which slots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub dense: Tensor,
    pub provenance: Vec<FamilySpan>,
}

impl FeatureVector {
    pub fn single(family: impl Into<String>, data: Vec<f64>) -> Self {
        let width = data.len();
        Self {
            dense: Tensor::vector(data),
            provenance: vec![FamilySpan {
                family: family.into(),
                offset: 0,
                width,
            }],
        }
    }

    /// Concatenation with provenance offsets shifted accordingly.
    pub fn concat(parts: Vec<FeatureVector>) -> Self {
        let mut data = Vec::new();
        let mut provenance = Vec::new();
        for p in parts {
            let base = data.len();
            provenance.extend(p.provenance.into_iter().map(|s| FamilySpan {
                offset: s.offset + base,
                ..s
            }));
            data.extend_from_slice(p.dense.data());
        }
        Self {
            dense: Tensor::vector(data),
            provenance,
        }
    }

    pub fn len(&self) -> usize {
        self.dense.numel()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn values(&self) -> &[f64] {
        self.dense.data()
    }

    pub fn family(&self, name: &str) -> Option<&[f64]> {
        self.provenance
            .iter()
            .find(|s| s.family == name)
            .map(|s| &self.values()[s.offset..s.offset + s.width])
    }
}

/// Feature families that can be switched on for the sentence vector.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Counts,
    Textual,
    SpeechActs,
    External { table: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeaturizerConfig {
    pub families: Vec<Family>,
    /// Also emit token-id sequences for recurrent/attention encoders.
    #[serde(default)]
    pub sequence: bool,
    #[serde(default)]
    pub textual: TextualConfig,
}

impl FeaturizerConfig {
    pub fn counts_only() -> Self {
        Self {
            families: vec![Family::Counts],
            sequence: false,
            textual: TextualConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<(), FeatureError> {
        if self.families.is_empty() && !self.sequence {
            return Err(FeatureError::Config("no feature families enabled".into()));
        }
        for (i, f) in self.families.iter().enumerate() {
            if self.families[..i].contains(f) {
                return Err(FeatureError::Config(format!("family {f:?} listed twice")));
            }
        }
        Ok(())
    }

    pub fn external_tables(&self) -> impl Iterator<Item = &str> {
        self.families.iter().filter_map(|f| match f {
            Family::External { table } => Some(table.as_str()),
            _ => None,
        })
    }
}

/// Token ids over the vocabulary's unigram slots; equivalent to one-hot
/// rows of width `width`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SequenceFeatures {
    pub ids: Vec<usize>,
    pub width: usize,
}

impl SequenceFeatures {
    pub fn to_one_hot(&self) -> Vec<FeatureVector> {
        self.ids
            .iter()
            .map(|&i| {
                let mut v = vec![0.0; self.width];
                v[i] = 1.0;
                FeatureVector::single("token", v)
            })
            .collect()
    }
}

/// Fitted featurizer: configuration, training vocabulary and any external
/// embedding tables. Pure after construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Featurizer {
    pub config: FeaturizerConfig,
    pub vocab: Vocabulary,
    pub tables: BTreeMap<String, ExternalEmbeddingTable>,
}

impl Featurizer {
    /// Builds the vocabulary from training utterances only.
    pub fn fit<'a>(
        config: FeaturizerConfig,
        training: impl IntoIterator<Item = &'a TokenizedUtterance>,
        mut tables: BTreeMap<String, ExternalEmbeddingTable>,
    ) -> Result<Self, FeatureError> {
        config.validate()?;
        for name in config.external_tables() {
            if !tables.contains_key(name) {
                return Err(FeatureError::Config(format!("external table {name:?} not provided")));
            }
        }
        tables.retain(|k, _| config.external_tables().any(|n| n == k));
        Ok(Self {
            vocab: Vocabulary::build(training),
            config,
            tables,
        })
    }

    pub fn sentence_width(&self) -> usize {
        self.config
            .families
            .iter()
            .map(|f| match f {
                Family::Counts => self.vocab.width(),
                Family::Textual => self.config.textual.width(),
                Family::SpeechActs => SPEECH_ACTS.len(),
                Family::External { table } => self.tables[table].dimension,
            })
            .sum()
    }

    pub fn sequence_width(&self) -> usize {
        self.vocab.sequence_width()
    }

    pub fn featurize_utterance(&self, u: &TokenizedUtterance) -> (FeatureVector, SequenceFeatures) {
        let parts = self
            .config
            .families
            .iter()
            .map(|f| match f {
                Family::Counts => count_vectorize(u, &self.vocab),
                Family::Textual => textual_features(u, &self.config.textual),
                Family::SpeechActs => speech_act_features(u),
                Family::External { table } => {
                    FeatureVector::single(format!("external.{table}"), self.tables[table].lookup(&u.raw).to_vec())
                }
            })
            .collect();
        let seq = SequenceFeatures {
            ids: if self.config.sequence {
                self.vocab.token_ids(u)
            } else {
                Vec::new()
            },
            width: self.vocab.sequence_width(),
        };
        (FeatureVector::concat(parts), seq)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s).tokens
    }

    #[test]
    fn tokenizer_golden_cases() {
        assert!(toks("").is_empty());
        assert!(toks("   \t ").is_empty());
        assert_eq!(toks("are you Alexa?"), ["are", "you", "alexa", "?"]);
        assert_eq!(toks("i am okay"), ["i", "am", "okay"]);
        assert_eq!(toks("that ain't me Oscar"), ["that", "ain", "'", "t", "me", "oscar"]);
        assert_eq!(toks("Hi,  there!!"), ["hi", ",", "there", "!", "!"]);
        assert_eq!(toks("wait... ok"), ["wait", ".", ".", ".", "ok"]);
    }

    #[test]
    fn spans_point_into_raw() {
        let t = tokenize("Are you ALEXA?");
        for (tok, (s, e)) in t.tokens.iter().zip(&t.char_spans) {
            assert_eq!(&t.raw[*s..*e].to_lowercase(), tok);
        }
    }

    #[test]
    fn counts_only_config_matches_count_vectorizer() {
        let train = [tokenize("simon says jump"), tokenize("hello there")];
        let f = Featurizer::fit(FeaturizerConfig::counts_only(), &train, BTreeMap::new()).unwrap();
        let u = tokenize("simon says hello");
        assert_eq!(f.featurize_utterance(&u).0, count_vectorize(&u, &f.vocab));
    }

    #[test]
    fn provenance_is_contiguous_for_counts_plus_speech_acts() {
        let train = [tokenize("simon says jump"), tokenize("hello there")];
        let config = FeaturizerConfig {
            families: vec![Family::Counts, Family::SpeechActs],
            ..FeaturizerConfig::counts_only()
        };
        let f = Featurizer::fit(config, &train, BTreeMap::new()).unwrap();
        let (fv, _) = f.featurize_utterance(&tokenize("hello"));
        assert_eq!(fv.len(), f.vocab.width() + 7);
        assert_eq!(fv.len(), f.sentence_width());
        assert_eq!(fv.provenance[1].offset, f.vocab.width());
    }

    #[test]
    fn empty_or_unknown_config_is_rejected() {
        let config = FeaturizerConfig {
            families: vec![],
            ..FeaturizerConfig::counts_only()
        };
        assert!(matches!(Featurizer::fit(config, &[], BTreeMap::new()), Err(FeatureError::Config(_))));
        let config = FeaturizerConfig {
            families: vec![Family::External { table: "use".into() }],
            ..FeaturizerConfig::counts_only()
        };
        assert!(Featurizer::fit(config, &[], BTreeMap::new()).is_err());
    }

    #[test]
    fn sequence_ids_follow_vocabulary() {
        let train = [tokenize("touch your head")];
        let config = FeaturizerConfig {
            sequence: true,
            ..FeaturizerConfig::counts_only()
        };
        let f = Featurizer::fit(config, &train, BTreeMap::new()).unwrap();
        let (_, seq) = f.featurize_utterance(&tokenize("touch my head"));
        let oov = f.vocab.sequence_width() - 1;
        assert_eq!(seq.ids.len(), 3);
        assert_eq!(seq.ids[1], oov);
        let onehot = seq.to_one_hot();
        assert_eq!(onehot[0].values().iter().sum::<f64>(), 1.0);
    }
}
