use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{FeatureVector, TokenizedUtterance};

/// Unigram and bigram index built from training utterances.
///
/// Layout of a count vector: unigrams (sorted), bigrams (sorted), then one
/// OOV slot counting unknown unigrams. Unknown bigrams are dropped.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    unigrams: BTreeMap<String, usize>,
    bigrams: BTreeMap<String, usize>,
}

fn bigram_key(a: &str, b: &str) -> String {
    format!("{a} {b}")
}

impl Vocabulary {
    pub fn build<'a>(training: impl IntoIterator<Item = &'a TokenizedUtterance>) -> Self {
        let mut uni = std::collections::BTreeSet::new();
        let mut bi = std::collections::BTreeSet::new();
        for u in training {
            for t in &u.tokens {
                uni.insert(t.clone());
            }
            for w in u.tokens.windows(2) {
                bi.insert(bigram_key(&w[0], &w[1]));
            }
        }
        Self {
            unigrams: uni.into_iter().enumerate().map(|(i, t)| (t, i)).collect(),
            bigrams: bi.into_iter().enumerate().map(|(i, t)| (t, i)).collect(),
        }
    }

    /// Vocabulary from explicit lists (bigrams given as token pairs).
    pub fn from_lists(unigrams: &[&str], bigrams: &[(&str, &str)]) -> Self {
        let uni: std::collections::BTreeSet<String> = unigrams.iter().map(|s| s.to_string()).collect();
        let bi: std::collections::BTreeSet<String> = bigrams.iter().map(|(a, b)| bigram_key(a, b)).collect();
        Self {
            unigrams: uni.into_iter().enumerate().map(|(i, t)| (t, i)).collect(),
            bigrams: bi.into_iter().enumerate().map(|(i, t)| (t, i)).collect(),
        }
    }

    pub fn num_unigrams(&self) -> usize {
        self.unigrams.len()
    }

    pub fn num_bigrams(&self) -> usize {
        self.bigrams.len()
    }

    /// Width of a count vector.
    pub fn width(&self) -> usize {
        self.unigrams.len() + self.bigrams.len() + 1
    }

    /// Number of token ids, OOV id included.
    pub fn sequence_width(&self) -> usize {
        self.unigrams.len() + 1
    }

    pub fn unigram_slot(&self, tok: &str) -> Option<usize> {
        self.unigrams.get(tok).copied()
    }

    pub fn bigram_slot(&self, a: &str, b: &str) -> Option<usize> {
        self.bigrams.get(&bigram_key(a, b)).map(|i| self.unigrams.len() + i)
    }

    pub fn oov_slot(&self) -> usize {
        self.width() - 1
    }

    /// Token ids; unknown tokens map to the last id.
    pub fn token_ids(&self, u: &TokenizedUtterance) -> Vec<usize> {
        let oov = self.unigrams.len();
        u.tokens.iter().map(|t| self.unigram_slot(t).unwrap_or(oov)).collect()
    }
}

pub fn count_vectorize(u: &TokenizedUtterance, vocab: &Vocabulary) -> FeatureVector {
    let mut v = vec![0.0; vocab.width()];
    for t in &u.tokens {
        let slot = vocab.unigram_slot(t).unwrap_or(vocab.oov_slot());
        v[slot] += 1.0;
    }
    for w in u.tokens.windows(2) {
        if let Some(slot) = vocab.bigram_slot(&w[0], &w[1]) {
            v[slot] += 1.0;
        }
    }
    FeatureVector::single("counts", v)
}
