//! Dialog data: NLU and story file formats, the domain description, a
//! seeded synthetic corpus generator, a history-window solvability check
//! and nested exclusion splits.

mod domain_data;
mod format;
mod generate;
mod oracle;
mod split;

pub use format::{
    parse_domain, parse_nlu_data, parse_stories, read_nlu_file, read_stories_file, serialize_nlu_data,
    serialize_stories, validate_stories, NluEntry, StoryParse,
};
pub use generate::{
    generate_synthetic_corpus, stand_in_embedding, AdaptationDialog, CorpusProfile, EmbeddingStyle, SyntheticCorpus,
};
pub use oracle::{check_solvable, decision_points, DecisionPoint, Event, WindowTable, LISTEN};
pub use split::{split_corpus, Split, SplitSpec, DEFAULT_EXCLUSIONS};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nlu::IntentLabel;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unknown labels: {}", .0.join(", "))]
    Validation(Vec<String>),
    #[error("generation: {0}")]
    Generation(String),
    #[error("{0}")]
    Argument(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, CorpusError>;

pub(crate) fn read_file(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Actor {
    User,
    System,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Turn {
    pub actor: Actor,
    pub label: String,
}

impl Turn {
    pub fn user(label: impl Into<String>) -> Self {
        Self {
            actor: Actor::User,
            label: label.into(),
        }
    }

    pub fn system(label: impl Into<String>) -> Self {
        Self {
            actor: Actor::System,
            label: label.into(),
        }
    }

    pub fn is_user(&self) -> bool {
        self.actor == Actor::User
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Story {
    pub title: String,
    /// The agent speaks first; system turns may precede any user turn.
    #[serde(default)]
    pub agent_initiated: bool,
    pub turns: Vec<Turn>,
}

impl Story {
    pub fn user_turns(&self) -> usize {
        self.turns.iter().filter(|t| t.is_user()).count()
    }

    pub fn system_turns(&self) -> usize {
        self.turns.len() - self.user_turns()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntentSpec {
    pub name: String,
    pub goal_oriented: bool,
    /// Invented names for non-verbal (physical) intents.
    #[serde(default)]
    pub synthetic: bool,
    /// Physical intents bypass the NLU and have no training text.
    #[serde(default)]
    pub physical: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Domain {
    pub intents: Vec<IntentSpec>,
    pub actions: Vec<String>,
    #[serde(default)]
    pub templates: BTreeMap<String, Vec<String>>,
}

impl Domain {
    pub fn intent_names(&self) -> Vec<String> {
        self.intents.iter().map(|i| i.name.clone()).collect()
    }

    /// Labels of the intents the NLU is trained on.
    pub fn verbal_intents(&self) -> Vec<IntentLabel> {
        self.intents
            .iter()
            .filter(|i| !i.physical)
            .map(|i| IntentLabel {
                name: i.name.clone(),
                goal_oriented: i.goal_oriented,
            })
            .collect()
    }

    pub fn intent(&self, name: &str) -> Option<&IntentSpec> {
        self.intents.iter().find(|i| i.name == name)
    }

    pub fn is_goal(&self, intent: &str) -> bool {
        self.intent(intent).is_some_and(|i| i.goal_oriented)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("domain serializes")
    }
}

/// Summary counts over a set of stories.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStatistics {
    pub stories: usize,
    pub user_turns: usize,
    pub system_turns: usize,
    pub goal_turns: usize,
    pub non_goal_turns: usize,
    pub turns_per_dialog: f64,
    pub non_goal_fraction: f64,
    pub distinct_intents: usize,
    pub distinct_actions: usize,
}

/// System turns count as non-goal when they answer a non-goal user turn
/// directly.
pub fn corpus_statistics(stories: &[Story], domain: &Domain) -> CorpusStatistics {
    let mut s = CorpusStatistics {
        stories: stories.len(),
        ..Default::default()
    };
    let mut intents = std::collections::BTreeSet::new();
    let mut actions = std::collections::BTreeSet::new();
    for story in stories {
        let mut last_user_goal = true;
        let mut first_reply = false;
        for t in &story.turns {
            let goal = if t.is_user() {
                s.user_turns += 1;
                intents.insert(t.label.as_str());
                last_user_goal = domain.is_goal(&t.label);
                first_reply = true;
                last_user_goal
            } else {
                s.system_turns += 1;
                actions.insert(t.label.as_str());
                let g = !(first_reply && !last_user_goal);
                first_reply = false;
                g
            };
            if goal {
                s.goal_turns += 1;
            } else {
                s.non_goal_turns += 1;
            }
        }
    }
    let turns = s.user_turns + s.system_turns;
    if s.stories > 0 {
        s.turns_per_dialog = turns as f64 / s.stories as f64;
    }
    if turns > 0 {
        s.non_goal_fraction = s.non_goal_turns as f64 / turns as f64;
    }
    s.distinct_intents = intents.len();
    s.distinct_actions = actions.len();
    s
}
