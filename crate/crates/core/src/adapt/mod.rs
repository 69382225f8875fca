//! Response adaptation by lexical and syntactic entrainment.
//!
//! A (context, candidate) pair is described by overlap features; training
//! labels come from a fixed overlap rule, a CART tree learns them, and the
//! tree's positive probability ranks candidate responses.

mod lexicon;
mod tree;

pub use lexicon::{polarity, stem, tag, TAGS};
pub use tree::{gini, gini_of_labels, DecisionTree, Node, TreeParams};

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::AdaptationDialog;
use crate::featurize::{tokenize, FeatureVector, TokenizedUtterance};

#[derive(Debug, Error)]
pub enum AdaptError {
    #[error("{0}")]
    Argument(String),
    #[error("labeling: {0}")]
    Labeling(String),
    #[error("model file: {0}")]
    Format(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, AdaptError>;

/// Names of the feature columns, in order.
pub fn feature_names() -> Vec<String> {
    let mut names: Vec<String> = [
        "stem_overlap",
        "stem_jaccard",
        "token_overlap",
        "token_jaccard",
        "pos_overlap",
        "pos_jaccard",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    names.extend(TAGS.iter().map(|t| format!("shared_tag.{t}")));
    names.extend(
        [
            "pos_bigram_overlap",
            "pos_bigram_jaccard",
            "context_negative",
            "context_neutral",
            "context_positive",
            "candidate_negative",
            "candidate_neutral",
            "candidate_positive",
            "polarity_match",
            "length_ratio",
            "context_length",
            "candidate_length",
            "candidate_coverage",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    names
}

pub const STEM_OVERLAP: usize = 0;
pub const POS_BIGRAM_OVERLAP: usize = 6 + TAGS.len();
pub const POLARITY_MATCH: usize = POS_BIGRAM_OVERLAP + 8;

fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        1.0
    } else {
        a.intersection(b).count() as f64 / union as f64
    }
}

fn multiset_overlap(a: &[&str], b: &[&str]) -> usize {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for t in a {
        *counts.entry(t).or_default() += 1;
    }
    let mut shared = 0;
    for t in b {
        if let Some(c) = counts.get_mut(t) {
            if *c > 0 {
                *c -= 1;
                shared += 1;
            }
        }
    }
    shared
}

struct Analysis {
    words: Vec<String>,
    stems: BTreeSet<String>,
    tags: Vec<&'static str>,
    bigrams: BTreeSet<(&'static str, &'static str)>,
    polarity: i8,
}

fn analyze(u: &TokenizedUtterance) -> Analysis {
    let words: Vec<String> = u.words().map(str::to_string).collect();
    let stems = words
        .iter()
        .filter(|w| !lexicon::is_function_word(w))
        .map(|w| stem(w))
        .collect();
    let tags: Vec<&'static str> = u.tokens.iter().map(|t| tag(t)).collect();
    let padded: Vec<&'static str> = std::iter::once("<s>").chain(tags.iter().copied()).chain(std::iter::once("</s>")).collect();
    let bigrams = padded.windows(2).map(|w| (w[0], w[1])).collect();
    Analysis {
        polarity: polarity(&words),
        words,
        stems,
        tags,
        bigrams,
    }
}

/// Overlap features of a (context, candidate) pair; see [`feature_names`].
pub fn extract_adaptation_features(context: &TokenizedUtterance, candidate: &TokenizedUtterance) -> FeatureVector {
    let a = analyze(context);
    let b = analyze(candidate);
    let mut f = Vec::with_capacity(feature_names().len());
    let stem_shared = a.stems.intersection(&b.stems).count();
    f.push(stem_shared as f64);
    f.push(jaccard(&a.stems, &b.stems));
    let wa: Vec<&str> = a.words.iter().map(String::as_str).collect();
    let wb: Vec<&str> = b.words.iter().map(String::as_str).collect();
    f.push(multiset_overlap(&wa, &wb) as f64);
    f.push(jaccard(&wa.iter().collect(), &wb.iter().collect()));
    f.push(multiset_overlap(&a.tags, &b.tags) as f64);
    let (ta, tb): (BTreeSet<&str>, BTreeSet<&str>) = (a.tags.iter().copied().collect(), b.tags.iter().copied().collect());
    f.push(jaccard(&ta, &tb));
    for t in TAGS {
        f.push(f64::from(u8::from(ta.contains(t) && tb.contains(t))));
    }
    f.push(a.bigrams.intersection(&b.bigrams).count() as f64);
    f.push(jaccard(&a.bigrams, &b.bigrams));
    for p in [a.polarity, b.polarity] {
        for class in [-1, 0, 1] {
            f.push(f64::from(u8::from(p == class)));
        }
    }
    f.push(f64::from(u8::from(a.polarity == b.polarity)));
    let (la, lb) = (a.words.len() as f64, b.words.len() as f64);
    f.push(if la.max(lb) == 0.0 { 1.0 } else { la.min(lb) / la.max(lb) });
    f.push(la);
    f.push(lb);
    f.push(if b.stems.is_empty() { 0.0 } else { stem_shared as f64 / b.stems.len() as f64 });
    FeatureVector::single("adapt", f)
}

/// Positive iff `stem_overlap + [stem_overlap >= 1 and polarity match and
/// shared POS bigram] >= theta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelRule {
    pub theta: f64,
}

impl Default for LabelRule {
    fn default() -> Self {
        Self { theta: 2.0 }
    }
}

impl LabelRule {
    pub fn score(features: &[f64]) -> f64 {
        let overlap = features[STEM_OVERLAP];
        let bonus = overlap >= 1.0 && features[POLARITY_MATCH] == 1.0 && features[POS_BIGRAM_OVERLAP] >= 1.0;
        overlap + f64::from(u8::from(bonus))
    }

    pub fn label(&self, features: &[f64]) -> bool {
        Self::score(features) >= self.theta
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptationInstance {
    pub dialog: usize,
    pub context: String,
    pub candidate: String,
    pub features: Vec<f64>,
    pub label: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub positive: usize,
    pub negative: usize,
}

impl LabelCounts {
    /// Negatives per positive.
    pub fn ratio(&self) -> f64 {
        self.negative as f64 / self.positive.max(1) as f64
    }
}

/// One instance per (context, candidate) pair, labeled by `rule`.
pub fn auto_label_instances(dialogs: &[AdaptationDialog], rule: LabelRule) -> Result<(Vec<AdaptationInstance>, LabelCounts)> {
    let mut out = Vec::new();
    for d in dialogs {
        let ctx = tokenize(&d.context);
        for c in &d.candidates {
            let features = extract_adaptation_features(&ctx, &tokenize(c)).values().to_vec();
            let label = rule.label(&features);
            out.push(AdaptationInstance {
                dialog: d.dialog,
                context: d.context.clone(),
                candidate: c.clone(),
                features,
                label,
            });
        }
    }
    let positive = out.iter().filter(|i| i.label).count();
    let counts = LabelCounts {
        positive,
        negative: out.len() - positive,
    };
    if positive == 0 {
        return Err(AdaptError::Labeling(format!(
            "theta {} labels none of {} instances positive; lower it",
            rule.theta,
            out.len()
        )));
    }
    Ok((out, counts))
}

pub fn train_decision_tree(instances: &[AdaptationInstance], params: TreeParams) -> Result<DecisionTree> {
    let x: Vec<Vec<f64>> = instances.iter().map(|i| i.features.clone()).collect();
    let y: Vec<bool> = instances.iter().map(|i| i.label).collect();
    DecisionTree::fit(&x, &y, params)
}

pub fn accuracy(tree: &DecisionTree, instances: &[AdaptationInstance]) -> f64 {
    if instances.is_empty() {
        return 0.0;
    }
    let ok = instances.iter().filter(|i| tree.predict(&i.features) == i.label).count();
    ok as f64 / instances.len() as f64
}

/// Accuracy per fold when whole dialogs are held out together
/// (`dialog % folds`).
pub fn cross_validate(instances: &[AdaptationInstance], folds: usize, params: TreeParams) -> Result<Vec<f64>> {
    if folds < 2 {
        return Err(AdaptError::Argument("need at least two folds".into()));
    }
    let mut out = Vec::with_capacity(folds);
    for k in 0..folds {
        let (test, train): (Vec<AdaptationInstance>, Vec<AdaptationInstance>) =
            instances.iter().cloned().partition(|i| i.dialog % folds == k);
        if test.is_empty() || train.is_empty() {
            return Err(AdaptError::Argument(format!("fold {k} is empty")));
        }
        out.push(accuracy(&train_decision_tree(&train, params)?, &test));
    }
    Ok(out)
}

/// Scores every candidate by the tree's positive probability and returns
/// the index of the best one; ties go to the earlier candidate.
pub fn select_response(tree: &DecisionTree, context: &str, candidates: &[String]) -> Result<(usize, Vec<f64>)> {
    if candidates.is_empty() {
        return Err(AdaptError::Argument("no candidate responses".into()));
    }
    let ctx = tokenize(context);
    let scores: Vec<f64> = candidates
        .iter()
        .map(|c| tree.predict_proba(&extract_adaptation_features(&ctx, &tokenize(c)).values()))
        .collect();
    let best = (0..scores.len()).fold(0, |b, i| if scores[i] > scores[b] { i } else { b });
    Ok((best, scores))
}

/// Trained adaptation artifact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptationModel {
    pub rule: LabelRule,
    pub features: Vec<String>,
    pub tree: DecisionTree,
    pub counts: LabelCounts,
}

impl AdaptationModel {
    pub fn train(dialogs: &[AdaptationDialog], rule: LabelRule, params: TreeParams) -> Result<Self> {
        let (instances, counts) = auto_label_instances(dialogs, rule)?;
        Ok(Self {
            rule,
            features: feature_names(),
            tree: train_decision_tree(&instances, params)?,
            counts,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let body = serde_json::to_string_pretty(self).map_err(|e| AdaptError::Format(e.to_string()))?;
        std::fs::write(path, body).map_err(|source| AdaptError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|source| AdaptError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let m: Self = serde_json::from_str(&s).map_err(|e| AdaptError::Format(e.to_string()))?;
        if m.features != feature_names() || m.tree.width != m.features.len() {
            return Err(AdaptError::Format("feature layout differs from this build".into()));
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests;
