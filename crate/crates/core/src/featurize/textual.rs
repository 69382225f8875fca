use serde::{Deserialize, Serialize};

use super::{FeatureVector, TokenizedUtterance};

/// One named block of hand-written textual features.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextualFamily {
    WordCount,
    FirstWord,
    LastWord,
    WhWords,
    QuestionMark,
    Pronouns,
    Imperative,
    InvertedOrder,
    TopWords,
    WordLength,
    Morphology,
    Negation,
}

impl TextualFamily {
    pub const ALL: [TextualFamily; 12] = [
        TextualFamily::WordCount,
        TextualFamily::FirstWord,
        TextualFamily::LastWord,
        TextualFamily::WhWords,
        TextualFamily::QuestionMark,
        TextualFamily::Pronouns,
        TextualFamily::Imperative,
        TextualFamily::InvertedOrder,
        TextualFamily::TopWords,
        TextualFamily::WordLength,
        TextualFamily::Morphology,
        TextualFamily::Negation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TextualFamily::WordCount => "word_count",
            TextualFamily::FirstWord => "first_word",
            TextualFamily::LastWord => "last_word",
            TextualFamily::WhWords => "wh_words",
            TextualFamily::QuestionMark => "question_mark",
            TextualFamily::Pronouns => "pronouns",
            TextualFamily::Imperative => "imperative",
            TextualFamily::InvertedOrder => "inverted_order",
            TextualFamily::TopWords => "top_words",
            TextualFamily::WordLength => "word_length",
            TextualFamily::Morphology => "morphology",
            TextualFamily::Negation => "negation",
        }
    }

    fn width(self, buckets: usize) -> usize {
        match self {
            TextualFamily::FirstWord | TextualFamily::LastWord => buckets,
            TextualFamily::WhWords => 1 + WH_WORDS.len(),
            TextualFamily::Pronouns | TextualFamily::Morphology => 3,
            TextualFamily::TopWords => TOP_WORDS.len(),
            TextualFamily::WordLength => 2,
            _ => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextualConfig {
    pub families: Vec<TextualFamily>,
    /// Hash buckets for first/last word identity.
    pub hash_buckets: usize,
}

impl Default for TextualConfig {
    fn default() -> Self {
        Self {
            families: TextualFamily::ALL.to_vec(),
            hash_buckets: 32,
        }
    }
}

impl TextualConfig {
    pub fn width(&self) -> usize {
        self.families.iter().map(|f| f.width(self.hash_buckets)).sum()
    }
}

pub(crate) const WH_WORDS: [&str; 7] = ["what", "where", "when", "who", "why", "how", "which"];
const FIRST_PERSON: [&str; 9] = ["i", "me", "my", "mine", "myself", "we", "us", "our", "ours"];
const SECOND_PERSON: [&str; 5] = ["you", "your", "yours", "yourself", "u"];
const THIRD_PERSON: [&str; 10] = ["he", "she", "it", "they", "him", "her", "them", "his", "their", "its"];
pub(crate) const SUBJECT_PRONOUNS: [&str; 7] = ["i", "you", "we", "he", "she", "they", "it"];
pub(crate) const AUXILIARIES: [&str; 16] = [
    "am", "are", "is", "was", "were", "do", "does", "did", "can", "could", "will", "would", "should", "have", "has",
    "shall",
];
pub(crate) const BASE_VERBS: [&str; 38] = [
    "touch", "jump", "clap", "wave", "spin", "tell", "show", "let", "stop", "play", "come", "look", "say", "do", "give",
    "go", "help", "sing", "dance", "put", "raise", "try", "listen", "wait", "stand", "sit", "turn", "open", "close",
    "take", "make", "start", "repeat", "hop", "stomp", "call", "explain", "keep",
];
const TOP_WORDS: [&str; 40] = [
    "i", "you", "the", "a", "is", "am", "are", "my", "your", "name", "yes", "no", "not", "okay", "ok", "what", "how",
    "do", "it", "to", "and", "that", "this", "me", "play", "game", "simon", "says", "again", "good", "bad", "hi",
    "hello", "bye", "ready", "like", "want", "can", "please", "thanks",
];
const NEGATIONS: [&str; 6] = ["not", "no", "never", "nope", "nah", "nothing"];

/// FNV-1a, stable across platforms and releases.
fn stable_hash(s: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in s.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn count_in(words: &[&str], list: &[&str]) -> f64 {
    words.iter().filter(|w| list.contains(w)).count() as f64
}

pub(crate) fn is_imperative(words: &[&str]) -> bool {
    match words.first() {
        Some(w) => BASE_VERBS.contains(w) && !words.iter().any(|w| SUBJECT_PRONOUNS.contains(w)),
        None => false,
    }
}

pub(crate) fn is_inverted(words: &[&str]) -> bool {
    words.len() >= 2 && AUXILIARIES.contains(&words[0])
}

/// Contracted negation shows up as `n ' t` after tokenization.
fn has_negation(u: &TokenizedUtterance) -> bool {
    let t = &u.tokens;
    t.iter().any(|w| NEGATIONS.contains(&w.as_str()))
        || t.windows(3).any(|w| w[0].ends_with('n') && w[1] == "'" && w[2] == "t")
}

pub fn textual_features(u: &TokenizedUtterance, config: &TextualConfig) -> FeatureVector {
    let words: Vec<&str> = u.words().collect();
    let k = config.hash_buckets.max(1);
    let parts = config
        .families
        .iter()
        .map(|&fam| {
            let data = match fam {
                TextualFamily::WordCount => vec![words.len() as f64],
                TextualFamily::FirstWord | TextualFamily::LastWord => {
                    let mut v = vec![0.0; k];
                    let w = if fam == TextualFamily::FirstWord {
                        words.first()
                    } else {
                        words.last()
                    };
                    if let Some(w) = w {
                        v[(stable_hash(w) % k as u64) as usize] = 1.0;
                    }
                    v
                }
                TextualFamily::WhWords => {
                    let mut v = vec![0.0];
                    v.extend(WH_WORDS.iter().map(|wh| f64::from(u8::from(words.contains(wh)))));
                    v[0] = if v[1..].iter().any(|&x| x > 0.0) { 1.0 } else { 0.0 };
                    v
                }
                TextualFamily::QuestionMark => vec![f64::from(u8::from(u.tokens.iter().any(|t| t == "?")))],
                TextualFamily::Pronouns => vec![
                    count_in(&words, &FIRST_PERSON),
                    count_in(&words, &SECOND_PERSON),
                    count_in(&words, &THIRD_PERSON),
                ],
                TextualFamily::Imperative => vec![f64::from(u8::from(is_imperative(&words)))],
                TextualFamily::InvertedOrder => vec![f64::from(u8::from(is_inverted(&words)))],
                TextualFamily::TopWords => TOP_WORDS
                    .iter()
                    .map(|t| f64::from(u8::from(words.contains(t))))
                    .collect(),
                TextualFamily::WordLength => {
                    if words.is_empty() {
                        vec![0.0, 0.0]
                    } else {
                        let lens: Vec<f64> = words.iter().map(|w| w.chars().count() as f64).collect();
                        let mean = lens.iter().sum::<f64>() / lens.len() as f64;
                        let max = lens.iter().copied().fold(0.0, f64::max);
                        vec![mean / 10.0, max / 10.0]
                    }
                }
                TextualFamily::Morphology => {
                    let ends = |suf: &str| words.iter().filter(|w| w.len() > suf.len() + 2 && w.ends_with(suf)).count() as f64;
                    vec![ends("ing"), ends("ed"), ends("ly")]
                }
                TextualFamily::Negation => vec![f64::from(u8::from(has_negation(u)))],
            };
            FeatureVector::single(format!("textual.{}", fam.name()), data)
        })
        .collect();
    FeatureVector::concat(parts)
}
