//! Embedding intent classifier: utterances and intents are embedded in one
//! space and trained with a two-sided cosine hinge against sampled negative
//! intents.

mod encoder;

pub use encoder::EncoderKind;

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::featurize::{
    tokenize, ExternalEmbeddingTable, FeatureError, FeatureVector, Family, Featurizer, FeaturizerConfig,
    SequenceFeatures, TokenizedUtterance,
};
use crate::metrics::{classify, Classification};
use crate::tensor::{cosine_similarity, Adam, Graph, ParamStore, Tensor, TensorError};

use encoder::Encoder;

#[derive(Debug, Error)]
pub enum NluError {
    #[error("nlu config: {0}")]
    Config(String),
    #[error("training: {0}")]
    Training(String),
    #[error("unknown intent {0:?}")]
    UnknownIntent(String),
    #[error("{0}")]
    Argument(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("checkpoint: {0}")]
    Format(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, NluError>;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntentLabel {
    pub name: String,
    pub goal_oriented: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntentExample {
    pub text: String,
    pub intent: String,
}

impl IntentExample {
    pub fn new(text: impl Into<String>, intent: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            intent: intent.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NluConfig {
    pub featurizer: FeaturizerConfig,
    pub encoder: EncoderKind,
    pub d_embed: usize,
    /// Width of the sentence-level dense layer.
    pub hidden: usize,
    pub token_dim: usize,
    pub rnn_hidden: usize,
    pub model_dim: usize,
    pub heads: usize,
    /// Longer token sequences are truncated.
    pub max_len: usize,
    pub mu_pos: f64,
    pub mu_neg: f64,
    pub negatives: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Diagnostic: replace self-attention weights with `1/T`.
    pub uniform_attention: bool,
}

impl Default for NluConfig {
    fn default() -> Self {
        Self {
            featurizer: FeaturizerConfig::counts_only(),
            encoder: EncoderKind::Feedforward,
            d_embed: 20,
            hidden: 64,
            token_dim: 32,
            rnn_hidden: 32,
            model_dim: 32,
            heads: 2,
            max_len: 64,
            mu_pos: 0.8,
            mu_neg: -0.4,
            negatives: 20,
            epochs: 300,
            batch_size: 32,
            learning_rate: 0.01,
            uniform_attention: false,
        }
    }
}

impl NluConfig {
    pub fn validate(&self) -> Result<()> {
        let fc = &self.featurizer;
        fc.validate()?;
        if fc.families.is_empty() && !self.encoder.is_sequence() {
            return Err(NluError::Config("feedforward encoder needs sentence-level families".into()));
        }
        if self.encoder.is_sequence() && !fc.sequence {
            return Err(NluError::Config(format!(
                "{:?} encoder needs sequence features (set featurizer.sequence)",
                self.encoder
            )));
        }
        let dims = [
            self.d_embed,
            self.hidden,
            self.token_dim,
            self.rnn_hidden,
            self.model_dim,
            self.heads,
            self.max_len,
            self.batch_size,
        ];
        if dims.contains(&0) {
            return Err(NluError::Config("all dimensions must be positive".into()));
        }
        if self.model_dim % self.heads != 0 {
            return Err(NluError::Config("model_dim must be divisible by heads".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(NluError::Config("learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// Named NLU configuration of the feature/encoder ablation grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NluVariant {
    pub name: String,
    pub config: NluConfig,
}

/// The eight-row feature ablation: the count baseline, its sentence-level
/// enrichments, and word-level sequence encoders with and without the
/// second external table. `use_table`/`bert_table` name external tables.
pub fn ablation_grid(use_table: &str, bert_table: &str) -> Vec<NluVariant> {
    let ext = |t: &str| Family::External { table: t.to_string() };
    let sentence = |families: Vec<Family>| NluConfig {
        featurizer: FeaturizerConfig {
            families,
            ..FeaturizerConfig::counts_only()
        },
        ..NluConfig::default()
    };
    let sequence = |families: Vec<Family>, encoder| NluConfig {
        featurizer: FeaturizerConfig {
            families,
            sequence: true,
            ..FeaturizerConfig::counts_only()
        },
        encoder,
        ..NluConfig::default()
    };
    let rows = [
        ("baseline", sentence(vec![Family::Counts])),
        ("baseline+sa", sentence(vec![Family::Counts, Family::Textual, Family::SpeechActs])),
        ("baseline+use", sentence(vec![Family::Counts, ext(use_table)])),
        ("baseline+bert", sentence(vec![Family::Counts, ext(bert_table)])),
        ("baseline+bilstm", sequence(vec![], EncoderKind::Bilstm)),
        ("baseline+transformer", sequence(vec![], EncoderKind::Transformer)),
        ("baseline+bert+bilstm", sequence(vec![ext(bert_table)], EncoderKind::Bilstm)),
        ("baseline+bert+transformer", sequence(vec![ext(bert_table)], EncoderKind::Transformer)),
    ];
    rows.into_iter()
        .map(|(name, config)| NluVariant {
            name: name.to_string(),
            config,
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntentPrediction {
    pub intent: String,
    pub similarity: f64,
    pub confidence: f64,
}

/// Trained classifier. The intent table row order follows `intents`.
#[derive(Clone, Debug)]
pub struct IntentModel {
    pub config: NluConfig,
    pub featurizer: Featurizer,
    pub intents: Vec<IntentLabel>,
    pub params: ParamStore,
    pub loss_trace: Vec<f64>,
    encoder: Encoder,
}

pub const NLU_FORMAT: &str = "dialog-nlu";

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    config: NluConfig,
    featurizer: Featurizer,
    intents: Vec<IntentLabel>,
    loss_trace: Vec<f64>,
    params: ParamStore,
}

struct Prepared {
    sentence: Vec<f64>,
    sequence: Vec<usize>,
}

fn prepare(featurizer: &Featurizer, u: &TokenizedUtterance) -> Prepared {
    let (fv, seq) = featurizer.featurize_utterance(u);
    Prepared {
        sentence: fv.dense.into_data(),
        sequence: seq.ids,
    }
}

fn sentence_matrix(rows: &[&Prepared], width: usize) -> Tensor {
    let data = rows.iter().flat_map(|p| p.sentence.iter().copied()).collect();
    Tensor::new(vec![rows.len(), width], data).expect("fixed sentence width")
}

/// Negatives for one example: uniform over the other intents, without
/// replacement when enough exist.
fn sample_negatives<R: Rng>(gold: usize, n: usize, k: usize, rng: &mut R) -> Vec<usize> {
    let others: Vec<usize> = (0..n).filter(|&i| i != gold).collect();
    if others.len() >= k {
        others.choose_multiple(rng, k).copied().collect()
    } else {
        (0..k).map(|_| others[rng.gen_range(0..others.len())]).collect()
    }
}

/// Per-example hinge loss for precomputed similarities.
pub fn hinge_loss(pos: f64, negs: &[f64], mu_pos: f64, mu_neg: f64) -> f64 {
    (mu_pos - pos).max(0.0) + negs.iter().map(|s| (s - mu_neg).max(0.0)).sum::<f64>()
}

/// Trains on `examples`; the intent inventory fixes the row order of the
/// intent table. Intents without examples are rejected.
pub fn train_intent_classifier(
    intents: &[IntentLabel],
    examples: &[IntentExample],
    config: &NluConfig,
    tables: BTreeMap<String, ExternalEmbeddingTable>,
    seed: u64,
) -> Result<IntentModel> {
    config.validate()?;
    if intents.len() < 2 {
        return Err(NluError::Training("at least two intents are required".into()));
    }
    let index: BTreeMap<&str, usize> = intents.iter().enumerate().map(|(i, l)| (l.name.as_str(), i)).collect();
    if index.len() != intents.len() {
        return Err(NluError::Training("duplicate intent names".into()));
    }
    let mut gold = Vec::with_capacity(examples.len());
    for ex in examples {
        gold.push(*index.get(ex.intent.as_str()).ok_or_else(|| NluError::UnknownIntent(ex.intent.clone()))?);
    }
    if let Some(l) = intents.iter().enumerate().find(|(i, _)| !gold.contains(i)) {
        return Err(NluError::Training(format!("intent {:?} has no examples", l.1.name)));
    }
    let tokenized: Vec<TokenizedUtterance> = examples.iter().map(|e| tokenize(&e.text)).collect();
    let featurizer = Featurizer::fit(config.featurizer.clone(), &tokenized, tables)?;
    let data: Vec<Prepared> = tokenized.iter().map(|u| prepare(&featurizer, u)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ParamStore::new();
    let width = featurizer.sentence_width();
    let encoder = Encoder::build(config, width, featurizer.sequence_width(), intents.len(), &mut params, &mut rng);
    let mut adam = Adam::new(config.learning_rate);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut loss_trace = Vec::with_capacity(config.epochs);
    let n_int = intents.len();
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let g = Graph::new();
            let p = params.bind(&g);
            let rows: Vec<&Prepared> = batch.iter().map(|&i| &data[i]).collect();
            let seqs: Vec<&[usize]> = rows.iter().map(|r| r.sequence.as_slice()).collect();
            let u = encoder.encode_batch(&g, &p, &sentence_matrix(&rows, width), &seqs)?;
            let un = g.normalize_rows(u)?;
            let yn = g.normalize_rows(p[encoder.intents])?;
            let sims = g.matmul(un, g.transpose(yn)?)?;
            let mut pos_idx = Vec::with_capacity(batch.len());
            let mut neg_idx = Vec::with_capacity(batch.len() * config.negatives);
            for (r, &i) in batch.iter().enumerate() {
                pos_idx.push(r * n_int + gold[i]);
                if config.negatives > 0 {
                    neg_idx.extend(sample_negatives(gold[i], n_int, config.negatives, &mut rng).into_iter().map(|k| r * n_int + k));
                }
            }
            let pos = g.pick(sims, &pos_idx)?;
            let mut loss = g.sum(g.relu(g.add_scalar(g.scale(pos, -1.0), config.mu_pos)));
            if !neg_idx.is_empty() {
                let neg = g.pick(sims, &neg_idx)?;
                loss = g.add(loss, g.sum(g.relu(g.add_scalar(neg, -config.mu_neg))))?;
            }
            let loss = g.scale(loss, 1.0 / batch.len() as f64);
            epoch_loss += g.value(loss).item().unwrap_or(0.0) * batch.len() as f64;
            g.backward(loss)?;
            adam.step(&mut params, &p.grads(&g));
        }
        loss_trace.push(epoch_loss / data.len().max(1) as f64);
    }
    Ok(IntentModel {
        config: config.clone(),
        featurizer,
        intents: intents.to_vec(),
        params,
        loss_trace,
        encoder,
    })
}

impl IntentModel {
    pub fn d_embed(&self) -> usize {
        self.config.d_embed
    }

    /// Intent table rows as stored.
    pub fn intent_embeddings(&self) -> &Tensor {
        self.params.get(self.encoder.intents)
    }

    pub fn intent_index(&self, name: &str) -> Option<usize> {
        self.intents.iter().position(|l| l.name == name)
    }

    /// Utterance embedding from already-featurized input.
    pub fn encode_features(&self, sentence: &FeatureVector, sequence: &SequenceFeatures) -> Result<Tensor> {
        if self.config.encoder.is_sequence() && !self.config.featurizer.sequence {
            return Err(NluError::Config("sequence encoder without sequence features".into()));
        }
        let width = self.featurizer.sentence_width();
        if sentence.len() != width {
            return Err(NluError::Argument(format!(
                "sentence features have width {}, model expects {width}",
                sentence.len()
            )));
        }
        let g = Graph::new();
        let p = self.params.bind_frozen(&g);
        let x = Tensor::new(vec![1, width], sentence.values().to_vec())?;
        let u = self.encoder.encode_batch(&g, &p, &x, &[&sequence.ids])?;
        Ok(Tensor::vector(g.value(u).into_data()))
    }

    pub fn encode(&self, text: &str) -> Result<Tensor> {
        let (fv, seq) = self.featurizer.featurize_utterance(&tokenize(text));
        self.encode_features(&fv, &seq)
    }

    /// Ranks intents by cosine similarity for an utterance embedding.
    pub fn rank_embedding(&self, u: &Tensor) -> Vec<IntentPrediction> {
        let table = self.intent_embeddings();
        let mut out: Vec<IntentPrediction> = self
            .intents
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let s = cosine_similarity(u.data(), table.row(i)).unwrap_or(0.0);
                IntentPrediction {
                    intent: l.name.clone(),
                    similarity: s,
                    confidence: (s + 1.0) / 2.0,
                }
            })
            .collect();
        out.sort_by(|a, b| b.similarity.total_cmp(&a.similarity).then_with(|| a.intent.cmp(&b.intent)));
        out
    }

    pub fn to_json(&self) -> Result<String> {
        let c = Checkpoint {
            format: NLU_FORMAT.to_string(),
            version: 1,
            config: self.config.clone(),
            featurizer: self.featurizer.clone(),
            intents: self.intents.clone(),
            loss_trace: self.loss_trace.clone(),
            params: self.params.clone(),
        };
        serde_json::to_string(&c).map_err(|e| NluError::Format(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Checkpoint = serde_json::from_str(s).map_err(|e| NluError::Format(e.to_string()))?;
        if c.format != NLU_FORMAT || c.version != 1 {
            return Err(NluError::Format(format!("unsupported checkpoint {} v{}", c.format, c.version)));
        }
        c.config.validate()?;
        let mut layout = ParamStore::new();
        let encoder = Encoder::build(
            &c.config,
            c.featurizer.sentence_width(),
            c.featurizer.sequence_width(),
            c.intents.len(),
            &mut layout,
            &mut ChaCha8Rng::seed_from_u64(0),
        );
        let same_layout = layout.len() == c.params.len()
            && layout
                .ids()
                .all(|id| layout.name(id) == c.params.name(id) && layout.get(id).shape() == c.params.get(id).shape());
        if !same_layout {
            return Err(NluError::Format("parameter layout does not match config".into()));
        }
        Ok(Self {
            config: c.config,
            featurizer: c.featurizer,
            intents: c.intents,
            params: c.params,
            loss_trace: c.loss_trace,
            encoder,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|source| NluError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|source| NluError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&s)
    }
}

pub fn encode_utterance(model: &IntentModel, sentence: &FeatureVector, sequence: &SequenceFeatures) -> Result<Tensor> {
    model.encode_features(sentence, sequence)
}

/// Full ranking, best first; ties go to the lexicographically smaller name.
pub fn predict_intent(model: &IntentModel, text: &str) -> Result<Vec<IntentPrediction>> {
    Ok(model.rank_embedding(&model.encode(text)?))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NluReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub detail: Classification,
}

pub fn evaluate_nlu(model: &IntentModel, test: &[IntentExample]) -> Result<NluReport> {
    if test.is_empty() {
        return Err(NluError::Argument("empty test set".into()));
    }
    let mut pairs = Vec::with_capacity(test.len());
    for ex in test {
        let gold = model
            .intent_index(&ex.intent)
            .ok_or_else(|| NluError::UnknownIntent(ex.intent.clone()))?;
        let top = &predict_intent(model, &ex.text)?[0];
        pairs.push((gold, model.intent_index(&top.intent).expect("ranked intents come from the model")));
    }
    let labels: Vec<String> = model.intents.iter().map(|l| l.name.clone()).collect();
    let detail = classify(&labels, &pairs).expect("non-empty");
    Ok(NluReport {
        precision: detail.precision,
        recall: detail.recall,
        f1: detail.f1,
        accuracy: detail.accuracy,
        detail,
    })
}
