use std::collections::BTreeMap;

use super::{Story, Turn};

/// Target meaning "stop acting and wait for the user".
pub const LISTEN: &str = "action_listen";

/// One element of a history window.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Event {
    Start,
    User(String),
    System(String),
}

impl From<&Turn> for Event {
    fn from(t: &Turn) -> Self {
        if t.is_user() {
            Event::User(t.label.clone())
        } else {
            Event::System(t.label.clone())
        }
    }
}

/// A point where the policy must choose: `history` turns have happened and
/// `target` (an action or [`LISTEN`]) comes next.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecisionPoint {
    pub history: usize,
    pub target: String,
}

/// Decisions of one story. The agent acts after each user turn until it
/// listens; nothing is predicted before the first user turn unless the
/// story is agent-initiated, and a dangling user turn has no gold action.
pub fn decision_points(story: &Story) -> Vec<DecisionPoint> {
    let t = &story.turns;
    let mut out = Vec::new();
    let start = if story.agent_initiated { 0 } else { 1 };
    for k in start..=t.len() {
        let target = match t.get(k) {
            Some(next) if !next.is_user() => next.label.clone(),
            _ if k == 0 || !t[k - 1].is_user() => LISTEN.to_string(),
            _ => continue,
        };
        out.push(DecisionPoint { history: k, target });
    }
    out
}

pub fn window(story: &Story, history: usize, size: usize) -> Vec<Event> {
    (0..size)
        .map(|i| {
            let back = size - i;
            if history >= back {
                Event::from(&story.turns[history - back])
            } else {
                Event::Start
            }
        })
        .collect()
}

/// Lookup table from the last `size` turns to the next decision.
#[derive(Clone, Debug, Default)]
pub struct WindowTable {
    pub size: usize,
    pub table: BTreeMap<Vec<Event>, String>,
}

impl WindowTable {
    pub fn new(size: usize) -> Self {
        Self {
            size,
            table: BTreeMap::new(),
        }
    }

    /// First window of `story` that disagrees with the table, if any.
    pub fn conflict(&self, story: &Story) -> Option<(Vec<Event>, String, String)> {
        let mut local: BTreeMap<Vec<Event>, String> = BTreeMap::new();
        for d in decision_points(story) {
            let w = window(story, d.history, self.size);
            let known = self.table.get(&w).or(local.get(&w));
            match known {
                Some(prev) if *prev != d.target => return Some((w, prev.clone(), d.target)),
                _ => {
                    local.insert(w, d.target);
                }
            }
        }
        None
    }

    pub fn insert(&mut self, story: &Story) -> Result<(), String> {
        if let Some((w, a, b)) = self.conflict(story) {
            return Err(format!("window {w:?} leads to both {a} and {b}"));
        }
        for d in decision_points(story) {
            self.table.insert(window(story, d.history, self.size), d.target);
        }
        Ok(())
    }

    pub fn predict(&self, story: &Story, history: usize) -> Option<&str> {
        self.table.get(&window(story, history, self.size)).map(String::as_str)
    }
}

/// Builds the table over all stories and checks that it reproduces every
/// gold decision.
pub fn check_solvable(stories: &[Story], size: usize) -> Result<WindowTable, String> {
    let mut table = WindowTable::new(size);
    for s in stories {
        table.insert(s).map_err(|e| format!("story {:?}: {e}", s.title))?;
    }
    for s in stories {
        for d in decision_points(s) {
            if table.predict(s, d.history) != Some(d.target.as_str()) {
                return Err(format!("story {:?}: decision {} not reproduced", s.title, d.history));
            }
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn story(turns: &[(&str, bool)]) -> Story {
        Story {
            title: "t".into(),
            agent_initiated: false,
            turns: turns
                .iter()
                .map(|&(l, user)| if user { Turn::user(l) } else { Turn::system(l) })
                .collect(),
        }
    }

    #[test]
    fn decisions_cover_actions_and_listens() {
        let s = story(&[("greet", true), ("a", false), ("b", false), ("bye", true), ("c", false)]);
        let targets: Vec<String> = decision_points(&s).into_iter().map(|d| d.target).collect();
        assert_eq!(targets, ["a", "b", LISTEN, "c", LISTEN]);
        let dangling = story(&[("greet", true), ("a", false), ("bye", true)]);
        assert_eq!(decision_points(&dangling).len(), 2);
    }

    #[test]
    fn conflicting_windows_are_detected() {
        let a = story(&[("x", true), ("p", false), ("y", true), ("q", false)]);
        let b = story(&[("x", true), ("p", false), ("y", true), ("r", false)]);
        assert!(check_solvable(&[a.clone()], 3).is_ok());
        assert!(check_solvable(&[a, b], 3).is_err());
    }
}
