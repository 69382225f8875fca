use super::textual::{is_imperative, is_inverted, WH_WORDS};
use super::{FeatureVector, TokenizedUtterance};

/// Verbal response mode classes; disclosure absorbs edification.
pub const SPEECH_ACTS: [&str; 7] = [
    "question",
    "disclosure",
    "advisement",
    "acknowledgement",
    "reflection",
    "interpretation",
    "confirmation",
];

const Q: usize = 0;
const DISCLOSURE: usize = 1;
const ADVISEMENT: usize = 2;
const ACK: usize = 3;
const REFLECTION: usize = 4;
const INTERPRETATION: usize = 5;
const CONFIRMATION: usize = 6;

const ACK_CUES: [&str; 14] = [
    "okay", "ok", "well", "yeah", "yes", "alright", "sure", "oh", "hmm", "uh", "mhm", "thanks", "thank", "cool",
];
const ADVICE_CUES: [&str; 6] = ["should", "please", "must", "need", "let", "better"];
const REFLECT_VERBS: [&str; 7] = ["feel", "think", "want", "like", "seem", "said", "mean"];
const INTERPRET_CUES: [&str; 4] = ["sounds", "seems", "probably", "because"];
const CONFIRM_CUES: [&str; 7] = ["we", "us", "our", "too", "same", "both", "agree"];

/// Cue-weighted scores over [`SPEECH_ACTS`], normalized to sum to 1.
/// With no cue hits the result is uniform.
pub fn speech_act_features(u: &TokenizedUtterance) -> FeatureVector {
    let words: Vec<&str> = u.words().collect();
    let mut s = [0.0f64; 7];
    if u.tokens.iter().any(|t| t == "?") {
        s[Q] += 2.0;
    }
    if words.first().is_some_and(|w| WH_WORDS.contains(w)) {
        s[Q] += 1.5;
    }
    if is_inverted(&words) {
        s[Q] += 1.5;
    }
    for (i, w) in words.iter().enumerate() {
        let next = words.get(i + 1).copied();
        match *w {
            "i" | "me" | "my" | "mine" => s[DISCLOSURE] += 1.0,
            "you" => match next {
                Some(n) if REFLECT_VERBS.contains(&n) => s[REFLECTION] += 1.5,
                Some("are" | "re") => s[INTERPRETATION] += 1.5,
                _ => {}
            },
            _ => {}
        }
        if ACK_CUES.contains(w) {
            s[ACK] += 1.5;
        }
        if ADVICE_CUES.contains(w) {
            s[ADVISEMENT] += 1.0;
        }
        if INTERPRET_CUES.contains(w) {
            s[INTERPRETATION] += 1.0;
        }
        if CONFIRM_CUES.contains(w) {
            s[CONFIRMATION] += 1.0;
        }
    }
    if words.len() > 6 {
        s[DISCLOSURE] += 0.5;
    }
    if is_imperative(&words) {
        s[ADVISEMENT] += 2.0;
    }
    if s[ACK] > 0.0 && words.len() <= 2 {
        s[ACK] += 0.5;
    }
    let total: f64 = s.iter().sum();
    let data = if total > 0.0 {
        s.iter().map(|v| v / total).collect()
    } else {
        vec![1.0 / 7.0; 7]
    };
    FeatureVector::single("speech_acts", data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::featurize::tokenize;

    fn argmax(s: &str) -> &'static str {
        let fv = speech_act_features(&tokenize(s));
        let v = fv.values();
        let i = (0..7).fold(0, |b, i| if v[i] > v[b] { i } else { b });
        SPEECH_ACTS[i]
    }

    #[test]
    fn cue_traces() {
        assert_eq!(argmax("what is your name ?"), "question");
        assert_eq!(argmax("okay"), "acknowledgement");
        assert_eq!(argmax("well"), "acknowledgement");
        assert_eq!(argmax("touch your nose"), "advisement");
        assert_eq!(argmax("my name is oscar"), "disclosure");
        assert_eq!(argmax("you feel happy"), "reflection");
    }

    #[test]
    fn no_cues_gives_uniform() {
        for s in ["", "purple elephant"] {
            let fv = speech_act_features(&tokenize(s));
            assert!(fv.values().iter().all(|&v| v == 1.0 / 7.0));
        }
    }

    #[test]
    fn always_on_simplex() {
        for s in ["", "?", "i i i you are we", "okay well yes sure", "did you clap ? i did"] {
            let fv = speech_act_features(&tokenize(s));
            assert_eq!(fv.len(), 7);
            assert!(fv.values().iter().all(|&v| v >= 0.0));
            assert!((fv.values().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
