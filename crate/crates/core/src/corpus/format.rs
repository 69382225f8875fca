use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use super::{read_file, Actor, CorpusError, Domain, Result, Story, Turn};
use crate::nlu::IntentExample;

const INTENT_HEADER: &str = "## intent:";
const AGENT_INITIATED: &str = "> agent-initiated";

fn parse_err(line: usize, msg: impl Into<String>) -> CorpusError {
    CorpusError::Parse { line, msg: msg.into() }
}

/// A `#` line that is not a `##` header.
fn is_comment(line: &str) -> bool {
    line.starts_with('#') && !line.starts_with("##")
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NluEntry {
    pub text: String,
    pub intent: String,
    /// 1-based source line.
    pub line: usize,
}

impl NluEntry {
    pub fn example(&self) -> IntentExample {
        IntentExample::new(self.text.clone(), self.intent.clone())
    }
}

pub fn parse_nlu_data(src: &str) -> Result<Vec<NluEntry>> {
    let mut out: Vec<NluEntry> = Vec::new();
    let mut seen: BTreeMap<String, (String, usize)> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (i, raw) in src.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim_end();
        if line.trim().is_empty() || is_comment(line) {
            continue;
        }
        if let Some(name) = line.strip_prefix(INTENT_HEADER) {
            let name = name.trim();
            if name.is_empty() || name.contains(char::is_whitespace) {
                return Err(parse_err(lineno, format!("bad intent name {name:?}")));
            }
            current = Some(name.to_string());
        } else if line.starts_with("##") {
            return Err(parse_err(lineno, format!("malformed header {line:?}, expected `{INTENT_HEADER}<name>`")));
        } else if let Some(text) = line.strip_prefix("- ") {
            let intent = current
                .clone()
                .ok_or_else(|| parse_err(lineno, "example outside an intent section"))?;
            let text = text.trim();
            if text.is_empty() {
                return Err(parse_err(lineno, "empty example"));
            }
            if let Some((other, at)) = seen.get(text) {
                if *other != intent {
                    return Err(parse_err(
                        lineno,
                        format!("example {text:?} already labelled {other:?} on line {at}"),
                    ));
                }
            }
            seen.insert(text.to_string(), (intent.clone(), lineno));
            out.push(NluEntry {
                text: text.to_string(),
                intent,
                line: lineno,
            });
        } else {
            return Err(parse_err(lineno, format!("unrecognized line {line:?}")));
        }
    }
    Ok(out)
}

/// Sections in order of first appearance, examples in input order.
pub fn serialize_nlu_data(examples: &[IntentExample]) -> String {
    let mut order: Vec<&str> = Vec::new();
    let mut by_intent: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for e in examples {
        let v = by_intent.entry(&e.intent).or_default();
        if v.is_empty() {
            order.push(&e.intent);
        }
        v.push(&e.text);
    }
    let mut out = String::new();
    for (k, intent) in order.iter().enumerate() {
        if k > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "{INTENT_HEADER}{intent}");
        for text in &by_intent[intent] {
            let _ = writeln!(out, "- {text}");
        }
    }
    out
}

pub fn read_nlu_file(path: &Path) -> Result<Vec<NluEntry>> {
    parse_nlu_data(&read_file(path)?)
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StoryParse {
    pub stories: Vec<Story>,
    /// Non-fatal findings such as a trailing user turn with no reply.
    pub warnings: Vec<String>,
}

fn label(rest: &str, lineno: usize) -> Result<String> {
    let l = rest.trim();
    if l.is_empty() || l.contains(char::is_whitespace) {
        return Err(parse_err(lineno, format!("bad label {l:?}")));
    }
    Ok(l.to_string())
}

pub fn parse_stories(src: &str, domain: Option<&Domain>) -> Result<StoryParse> {
    let mut out = StoryParse::default();
    let mut current: Option<(Story, usize)> = None;
    let finish = |cur: Option<(Story, usize)>, out: &mut StoryParse| -> Result<()> {
        if let Some((story, line)) = cur {
            if story.turns.is_empty() {
                return Err(parse_err(line, format!("story {:?} has no turns", story.title)));
            }
            if story.turns.last().is_some_and(Turn::is_user) {
                out.warnings.push(format!("story {:?} (line {line}) ends with an unanswered user turn", story.title));
            }
            out.stories.push(story);
        }
        Ok(())
    };
    for (i, raw) in src.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim_end();
        if line.trim().is_empty() || is_comment(line) {
            continue;
        }
        if let Some(title) = line.strip_prefix("## ") {
            finish(current.take(), &mut out)?;
            let title = title.trim();
            if title.is_empty() {
                return Err(parse_err(lineno, "empty story title"));
            }
            current = Some((
                Story {
                    title: title.to_string(),
                    agent_initiated: false,
                    turns: Vec::new(),
                },
                lineno,
            ));
            continue;
        }
        let Some((story, _)) = current.as_mut() else {
            return Err(parse_err(lineno, "content before the first `## <title>` header"));
        };
        if line.trim() == AGENT_INITIATED {
            if !story.turns.is_empty() {
                return Err(parse_err(lineno, "agent-initiated directive must precede all turns"));
            }
            story.agent_initiated = true;
        } else if let Some(rest) = line.strip_prefix("* ") {
            story.turns.push(Turn::user(label(rest, lineno)?));
        } else if let Some(rest) = line.strip_prefix("- ") {
            if !story.agent_initiated && !story.turns.iter().any(Turn::is_user) {
                return Err(parse_err(lineno, "system turn before any user turn (story is not agent-initiated)"));
            }
            story.turns.push(Turn::system(label(rest, lineno)?));
        } else {
            return Err(parse_err(lineno, format!("unrecognized line {line:?}")));
        }
    }
    finish(current, &mut out)?;
    if let Some(d) = domain {
        validate_stories(&out.stories, d)?;
    }
    Ok(out)
}

pub fn read_stories_file(path: &Path, domain: Option<&Domain>) -> Result<StoryParse> {
    parse_stories(&read_file(path)?, domain)
}

pub fn serialize_stories(stories: &[Story]) -> String {
    let mut out = String::new();
    for (k, s) in stories.iter().enumerate() {
        if k > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "## {}", s.title);
        if s.agent_initiated {
            let _ = writeln!(out, "{AGENT_INITIATED}");
        }
        for t in &s.turns {
            let mark = if t.actor == Actor::User { '*' } else { '-' };
            let _ = writeln!(out, "{mark} {}", t.label);
        }
    }
    out
}

/// Lists every label not declared by the domain.
pub fn validate_stories(stories: &[Story], domain: &Domain) -> Result<()> {
    let intents: BTreeSet<&str> = domain.intents.iter().map(|i| i.name.as_str()).collect();
    let actions: BTreeSet<&str> = domain.actions.iter().map(String::as_str).collect();
    let mut bad = BTreeSet::new();
    for t in stories.iter().flat_map(|s| &s.turns) {
        let known = if t.is_user() {
            intents.contains(t.label.as_str())
        } else {
            actions.contains(t.label.as_str())
        };
        if !known {
            let kind = if t.is_user() { "intent" } else { "action" };
            bad.insert(format!("{kind} {}", t.label));
        }
    }
    if bad.is_empty() {
        Ok(())
    } else {
        Err(CorpusError::Validation(bad.into_iter().collect()))
    }
}

pub fn parse_domain(src: &str) -> Result<Domain> {
    let d: Domain = serde_json::from_str(src).map_err(|e| parse_err(e.line(), e.to_string()))?;
    let mut names = BTreeSet::new();
    for n in d.intents.iter().map(|i| &i.name).chain(&d.actions) {
        if !names.insert(n.as_str()) {
            return Err(parse_err(0, format!("duplicate domain label {n:?}")));
        }
    }
    if let Some(a) = d.templates.keys().find(|a| !d.actions.contains(a)) {
        return Err(parse_err(0, format!("templates for undeclared action {a:?}")));
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nlu_examples() {
        assert!(parse_nlu_data("").unwrap().is_empty());
        let two = parse_nlu_data("## intent:greet\n- hi\n- hello there\n").unwrap();
        assert_eq!(two.len(), 2);
        assert_eq!(two[1].line, 3);
        let err = parse_nlu_data("## intent:a\n- hi\n\n## intent:b\n- hi\n").unwrap_err();
        assert!(matches!(err, CorpusError::Parse { line: 5, .. }), "{err}");
    }

    #[test]
    fn nlu_malformed_lines() {
        for (src, line) in [
            ("- hi\n", 1),
            ("## intent:a\n- ok\n## greet\n", 3),
            ("## intent:\n", 1),
            ("## intent:a\n-\n", 2),
            ("## intent:a\nhello\n", 2),
            ("## intent:a\n- \n", 2),
        ] {
            match parse_nlu_data(src) {
                Err(CorpusError::Parse { line: l, .. }) => assert_eq!(l, line, "{src:?}"),
                other => panic!("{src:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn nlu_canonical_round_trip() {
        let src = "## intent:greet\n- hi\n- hello there\n\n## intent:bye\n- bye now\n";
        let parsed: Vec<IntentExample> = parse_nlu_data(src).unwrap().iter().map(NluEntry::example).collect();
        assert_eq!(serialize_nlu_data(&parsed), src);
    }

    #[test]
    fn story_examples() {
        let p = parse_stories("## s\n* greet\n- utter_greet\n", None).unwrap();
        assert_eq!(p.stories[0].turns.len(), 2);
        assert!(p.warnings.is_empty());
        let p = parse_stories("## s\n* greet\n- a\n- b\n- c\n", None).unwrap();
        assert_eq!(p.stories[0].system_turns(), 3);
        let p = parse_stories("## s\n* greet\n", None).unwrap();
        assert_eq!(p.warnings.len(), 1);
        let p = parse_stories("# comment\n## s\n> agent-initiated\n- utter_hi\n* greet\n- utter_ok\n", None).unwrap();
        assert!(p.stories[0].agent_initiated);
    }

    #[test]
    fn story_errors_name_the_line() {
        for (src, line) in [
            ("* greet\n", 1),
            ("## s\n- utter_greet\n", 2),
            ("## s\n* greet\n? what\n", 3),
            ("## s\n* greet now\n", 2),
            ("## s\n\n## t\n* a\n", 1),
            ("## s\n* a\n> agent-initiated\n", 3),
        ] {
            match parse_stories(src, None) {
                Err(CorpusError::Parse { line: l, .. }) => assert_eq!(l, line, "{src:?}"),
                other => panic!("{src:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn domain_validation_lists_offenders() {
        let d = Domain {
            intents: vec![super::super::IntentSpec {
                name: "greet".into(),
                goal_oriented: true,
                synthetic: false,
                physical: false,
            }],
            actions: vec!["utter_greet".into()],
            templates: BTreeMap::new(),
        };
        let err = parse_stories("## s\n* greet\n- utter_x\n* dance\n- utter_greet\n", Some(&d)).unwrap_err();
        match err {
            CorpusError::Validation(v) => assert_eq!(v, ["action utter_x", "intent dance"]),
            other => panic!("{other:?}"),
        }
        assert_eq!(parse_domain(&d.to_json()).unwrap(), d);
        assert!(parse_domain("{\"intents\": [}").is_err());
    }

    #[test]
    fn canonical_story_file_round_trips_bytewise() {
        let src = "## a\n* greet\n- utter_greet\n\n## b\n> agent-initiated\n- utter_hi\n* bye\n- utter_bye\n";
        let p = parse_stories(src, None).unwrap();
        assert_eq!(serialize_stories(&p.stories), src);
    }
}
