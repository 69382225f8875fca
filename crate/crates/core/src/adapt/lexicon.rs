//! Tiny closed-vocabulary resources: a suffix stemmer, a lexicon POS
//! tagger with suffix fallbacks, and a word polarity list.

/// Coarse tag set used by the tagger.
pub const TAGS: [&str; 14] = ["PRP", "DT", "IN", "CC", "MD", "AUX", "VB", "JJ", "RB", "NN", "UH", "WH", "CD", "PUNCT"];

const LEXICON: &[(&str, &str)] = &[
    ("i", "PRP"),
    ("you", "PRP"),
    ("he", "PRP"),
    ("she", "PRP"),
    ("it", "PRP"),
    ("we", "PRP"),
    ("they", "PRP"),
    ("me", "PRP"),
    ("him", "PRP"),
    ("her", "PRP"),
    ("us", "PRP"),
    ("them", "PRP"),
    ("my", "PRP"),
    ("your", "PRP"),
    ("our", "PRP"),
    ("their", "PRP"),
    ("its", "PRP"),
    ("mine", "PRP"),
    ("yours", "PRP"),
    ("myself", "PRP"),
    ("yourself", "PRP"),
    ("m", "AUX"),
    ("s", "AUX"),
    ("re", "AUX"),
    ("ll", "MD"),
    ("t", "RB"),
    ("a", "DT"),
    ("an", "DT"),
    ("the", "DT"),
    ("this", "DT"),
    ("that", "DT"),
    ("these", "DT"),
    ("those", "DT"),
    ("some", "DT"),
    ("any", "DT"),
    ("every", "DT"),
    ("another", "DT"),
    ("all", "DT"),
    ("in", "IN"),
    ("on", "IN"),
    ("at", "IN"),
    ("for", "IN"),
    ("with", "IN"),
    ("about", "IN"),
    ("of", "IN"),
    ("to", "IN"),
    ("from", "IN"),
    ("like", "IN"),
    ("by", "IN"),
    ("up", "IN"),
    ("around", "IN"),
    ("there", "RB"),
    ("and", "CC"),
    ("or", "CC"),
    ("but", "CC"),
    ("so", "CC"),
    ("because", "CC"),
    ("if", "CC"),
    ("can", "MD"),
    ("could", "MD"),
    ("will", "MD"),
    ("would", "MD"),
    ("shall", "MD"),
    ("should", "MD"),
    ("may", "MD"),
    ("might", "MD"),
    ("must", "MD"),
    ("wanna", "MD"),
    ("am", "AUX"),
    ("is", "AUX"),
    ("are", "AUX"),
    ("was", "AUX"),
    ("were", "AUX"),
    ("be", "AUX"),
    ("been", "AUX"),
    ("do", "AUX"),
    ("does", "AUX"),
    ("did", "AUX"),
    ("have", "AUX"),
    ("has", "AUX"),
    ("had", "AUX"),
    ("don", "AUX"),
    ("didn", "AUX"),
    ("go", "VB"),
    ("play", "VB"),
    ("want", "VB"),
    ("like", "VB"),
    ("love", "VB"),
    ("know", "VB"),
    ("tell", "VB"),
    ("say", "VB"),
    ("said", "VB"),
    ("call", "VB"),
    ("feel", "VB"),
    ("see", "VB"),
    ("hear", "VB"),
    ("make", "VB"),
    ("get", "VB"),
    ("got", "VB"),
    ("give", "VB"),
    ("help", "VB"),
    ("try", "VB"),
    ("jump", "VB"),
    ("clap", "VB"),
    ("wave", "VB"),
    ("spin", "VB"),
    ("turn", "VB"),
    ("stop", "VB"),
    ("wait", "VB"),
    ("start", "VB"),
    ("listen", "VB"),
    ("copy", "VB"),
    ("meet", "VB"),
    ("eat", "VB"),
    ("fly", "VB"),
    ("drive", "VB"),
    ("live", "VB"),
    ("laugh", "VB"),
    ("keep", "VB"),
    ("guide", "VB"),
    ("worry", "VB"),
    ("repeat", "VB"),
    ("explain", "VB"),
    ("quit", "VB"),
    ("let", "VB"),
    ("hang", "VB"),
    ("take", "VB"),
    ("good", "JJ"),
    ("great", "JJ"),
    ("bad", "JJ"),
    ("sad", "JJ"),
    ("happy", "JJ"),
    ("fine", "JJ"),
    ("okay", "JJ"),
    ("ok", "JJ"),
    ("alright", "JJ"),
    ("nice", "JJ"),
    ("cool", "JJ"),
    ("funny", "JJ"),
    ("smart", "JJ"),
    ("awesome", "JJ"),
    ("terrible", "JJ"),
    ("boring", "JJ"),
    ("bored", "JJ"),
    ("tired", "JJ"),
    ("upset", "JJ"),
    ("ready", "JJ"),
    ("old", "JJ"),
    ("young", "JJ"),
    ("big", "JJ"),
    ("cute", "JJ"),
    ("fun", "JJ"),
    ("wrong", "JJ"),
    ("right", "JJ"),
    ("different", "JJ"),
    ("favorite", "JJ"),
    ("best", "JJ"),
    ("lovely", "JJ"),
    ("wonderful", "JJ"),
    ("glad", "JJ"),
    ("sorry", "JJ"),
    ("sure", "JJ"),
    ("blue", "JJ"),
    ("red", "JJ"),
    ("green", "JJ"),
    ("purple", "JJ"),
    ("high", "JJ"),
    ("low", "JJ"),
    ("lost", "JJ"),
    ("confused", "JJ"),
    ("welcome", "JJ"),
    ("not", "RB"),
    ("very", "RB"),
    ("really", "RB"),
    ("too", "RB"),
    ("again", "RB"),
    ("now", "RB"),
    ("later", "RB"),
    ("soon", "RB"),
    ("only", "RB"),
    ("once", "RB"),
    ("more", "RB"),
    ("here", "RB"),
    ("then", "RB"),
    ("pretty", "RB"),
    ("almost", "RB"),
    ("quite", "RB"),
    ("yet", "RB"),
    ("never", "RB"),
    ("just", "RB"),
    ("hi", "UH"),
    ("hello", "UH"),
    ("hey", "UH"),
    ("hiya", "UH"),
    ("howdy", "UH"),
    ("bye", "UH"),
    ("goodbye", "UH"),
    ("yes", "UH"),
    ("yeah", "UH"),
    ("yep", "UH"),
    ("no", "UH"),
    ("nope", "UH"),
    ("nah", "UH"),
    ("oh", "UH"),
    ("wow", "UH"),
    ("um", "UH"),
    ("uh", "UH"),
    ("hmm", "UH"),
    ("oops", "UH"),
    ("aw", "UH"),
    ("please", "UH"),
    ("thanks", "UH"),
    ("haha", "UH"),
    ("meh", "UH"),
    ("pardon", "UH"),
    ("what", "WH"),
    ("who", "WH"),
    ("where", "WH"),
    ("when", "WH"),
    ("why", "WH"),
    ("how", "WH"),
    ("which", "WH"),
    ("one", "CD"),
    ("two", "CD"),
    ("three", "CD"),
    ("first", "CD"),
];

const POSITIVE: &[&str] = &[
    "good", "great", "happy", "fine", "okay", "ok", "alright", "nice", "cool", "funny", "smart", "awesome", "love", "like",
    "fun", "yes", "yeah", "sure", "glad", "wonderful", "lovely", "best", "welcome", "thanks", "thank", "wow", "cute", "friend",
    "pleasure", "well", "ready", "favorite",
];

const NEGATIVE: &[&str] = &[
    "bad", "sad", "terrible", "boring", "bored", "tired", "upset", "wrong", "hate", "no", "nope", "nah", "sorry", "lost",
    "confused", "worry", "meh", "oops", "low", "quit", "stop",
];

const NEGATORS: &[&str] = &["not", "t", "never", "no"];

/// Strips one of `ing`, `ed`, `es`, `s` when at least three letters remain.
pub fn stem(word: &str) -> String {
    for suffix in ["ing", "ed", "es", "s"] {
        if let Some(base) = word.strip_suffix(suffix) {
            if base.chars().count() >= 3 && !(suffix == "s" && base.ends_with('s')) {
                return base.to_string();
            }
        }
    }
    word.to_string()
}

pub fn tag(token: &str) -> &'static str {
    if token.chars().all(|c| c.is_ascii_punctuation()) {
        return "PUNCT";
    }
    if let Some((_, t)) = LEXICON.iter().find(|(w, _)| *w == token) {
        return t;
    }
    if token.chars().all(|c| c.is_ascii_digit()) {
        "CD"
    } else if token.ends_with("ly") {
        "RB"
    } else if token.ends_with("ing") || token.ends_with("ed") {
        "VB"
    } else if token.ends_with("ful") || token.ends_with("ous") || token.ends_with("ive") {
        "JJ"
    } else {
        "NN"
    }
}

/// Closed-class words carry no content for stem overlap.
pub fn is_function_word(token: &str) -> bool {
    matches!(tag(token), "PRP" | "DT" | "IN" | "CC" | "MD" | "AUX" | "WH" | "PUNCT")
        || matches!(token, "oh" | "um" | "uh" | "hmm" | "okay" | "ok" | "so" | "wow" | "not" | "too" | "very")
}

/// Lexicon polarity in {-1, 0, 1}; a negator flips the next polar word.
pub fn polarity(tokens: &[String]) -> i8 {
    let mut score = 0i32;
    let mut flip = false;
    for t in tokens {
        let w = t.as_str();
        let p = if POSITIVE.contains(&w) {
            1
        } else if NEGATIVE.contains(&w) && !NEGATORS.contains(&w) {
            -1
        } else {
            0
        };
        if p != 0 {
            score += if flip { -p } else { p };
            flip = false;
        } else if NEGATORS.contains(&w) {
            flip = true;
        }
    }
    score.signum() as i8
}
