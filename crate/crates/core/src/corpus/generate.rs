use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::domain_data::{ACTIONS, MIRROR, NAMES, PHYSICAL_INTENTS, PREFIXES, SUFFIXES, TEMPLATE_STYLES, VERBAL_INTENTS};
use super::format::{serialize_nlu_data, serialize_stories};
use super::oracle::WindowTable;
use super::{CorpusError, Domain, IntentSpec, Result, Story, Turn};
use crate::featurize::{tokenize, ExternalEmbeddingTable};
use crate::nlu::IntentExample;

/// Knobs of the synthetic corpus. Rates are per opportunity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusProfile {
    pub train_stories: usize,
    pub test_stories: usize,
    pub nlu_train_per_intent: usize,
    pub nlu_test_per_intent: usize,
    /// Chance of a non-goal digression at each listen point after the first.
    pub digression_rate: f64,
    pub repeat_rate: f64,
    pub simon_says_share: f64,
    pub name_repair_rate: f64,
    pub not_ready_rate: f64,
    pub ask_rules_rate: f64,
    pub wrong_move_rate: f64,
    pub early_stop_rate: f64,
    pub second_round_rate: f64,
    pub adaptation_dialogs: usize,
    /// Generic responses offered next to the entrained one per context.
    pub adaptation_candidates: usize,
    /// Window size the generated stories must be solvable with.
    pub window: usize,
}

impl Default for CorpusProfile {
    fn default() -> Self {
        Self {
            train_stories: 65,
            test_stories: 15,
            nlu_train_per_intent: 30,
            nlu_test_per_intent: 11,
            digression_rate: 0.13,
            repeat_rate: 0.03,
            simon_says_share: 0.5,
            name_repair_rate: 0.2,
            not_ready_rate: 0.15,
            ask_rules_rate: 0.1,
            wrong_move_rate: 0.06,
            early_stop_rate: 0.04,
            second_round_rate: 0.1,
            adaptation_dialogs: 60,
            adaptation_candidates: 11,
            window: 3,
        }
    }
}

impl CorpusProfile {
    /// Children who never wander off topic.
    pub fn cooperative() -> Self {
        Self {
            digression_rate: 0.0,
            repeat_rate: 0.0,
            ..Self::default()
        }
    }

    /// Heavy digression load used for the policy comparison.
    pub fn digressive() -> Self {
        Self {
            digression_rate: 0.35,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        let rates = [
            ("digression_rate", self.digression_rate),
            ("repeat_rate", self.repeat_rate),
            ("simon_says_share", self.simon_says_share),
            ("name_repair_rate", self.name_repair_rate),
            ("not_ready_rate", self.not_ready_rate),
            ("ask_rules_rate", self.ask_rules_rate),
            ("wrong_move_rate", self.wrong_move_rate),
            ("early_stop_rate", self.early_stop_rate),
            ("second_round_rate", self.second_round_rate),
        ];
        for (name, r) in rates {
            if !(0.0..=1.0).contains(&r) {
                return Err(CorpusError::Argument(format!("{name} = {r} is not a probability")));
            }
        }
        if self.digression_rate + self.repeat_rate >= 0.95 {
            return Err(CorpusError::Argument("digression_rate + repeat_rate must stay below 0.95".into()));
        }
        if self.not_ready_rate + self.ask_rules_rate > 1.0 {
            return Err(CorpusError::Argument("not_ready_rate + ask_rules_rate exceeds 1".into()));
        }
        if self.train_stories == 0 || self.nlu_train_per_intent == 0 {
            return Err(CorpusError::Argument("need at least one training story and example".into()));
        }
        if self.window == 0 {
            return Err(CorpusError::Argument("window must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingStyle {
    /// Coarse 32-d sentence vectors.
    Use,
    /// Sharper 48-d sentence vectors.
    Bert,
}

impl EmbeddingStyle {
    pub fn name(self) -> &'static str {
        match self {
            EmbeddingStyle::Use => "use",
            EmbeddingStyle::Bert => "bert",
        }
    }

    pub fn dimension(self) -> usize {
        match self {
            EmbeddingStyle::Use => 32,
            EmbeddingStyle::Bert => 48,
        }
    }

    fn noise(self) -> f64 {
        match self {
            EmbeddingStyle::Use => 0.9,
            EmbeddingStyle::Bert => 0.55,
        }
    }

    fn seed(self) -> u64 {
        match self {
            EmbeddingStyle::Use => 0x5553_45,
            EmbeddingStyle::Bert => 0x4245_5254,
        }
    }
}

/// One context of an adaptation dialog: the child's utterance, the robot
/// responses that could follow, and the one actually used.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptationDialog {
    pub dialog: usize,
    pub context: String,
    pub candidates: Vec<String>,
    pub realized: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticCorpus {
    pub domain: Domain,
    pub nlu_train: Vec<IntentExample>,
    pub nlu_test: Vec<IntentExample>,
    pub train_stories: Vec<Story>,
    pub test_stories: Vec<Story>,
    pub adaptation: Vec<AdaptationDialog>,
    pub embeddings: BTreeMap<String, ExternalEmbeddingTable>,
}

impl SyntheticCorpus {
    /// Writes every artifact into `dir` under fixed file names.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        let io = |path: &Path, source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        };
        std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        let put = |name: &str, body: String| {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(|e| io(&p, e))
        };
        put("domain.json", self.domain.to_json())?;
        put("nlu_train.md", serialize_nlu_data(&self.nlu_train))?;
        put("nlu_test.md", serialize_nlu_data(&self.nlu_test))?;
        put("stories_train.md", serialize_stories(&self.train_stories))?;
        put("stories_test.md", serialize_stories(&self.test_stories))?;
        let mut jsonl = String::new();
        for a in &self.adaptation {
            jsonl.push_str(&serde_json::to_string(a).expect("adaptation record serializes"));
            jsonl.push('\n');
        }
        put("adaptation.jsonl", jsonl)?;
        for (name, table) in &self.embeddings {
            put(&format!("{name}.emb"), table.to_file_string())?;
        }
        Ok(())
    }
}

pub fn generate_synthetic_corpus(profile: &CorpusProfile, seed: u64) -> Result<SyntheticCorpus> {
    profile.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let domain = build_domain();
    let (nlu_train, nlu_test) = generate_nlu(profile, &mut rng)?;
    let total = profile.train_stories + profile.test_stories;
    let stories = generate_stories(profile, total, &mut rng)?;
    let (train_stories, test_stories) = {
        let mut s = stories;
        let test = s.split_off(profile.train_stories);
        (s, test)
    };
    let adaptation = generate_adaptation(profile, &train_stories, &nlu_train, &mut rng);
    let mut embeddings = BTreeMap::new();
    for style in [EmbeddingStyle::Use, EmbeddingStyle::Bert] {
        let entries = nlu_train
            .iter()
            .chain(&nlu_test)
            .map(|e| (e.text.clone(), stand_in_embedding(&e.text, style)))
            .collect();
        let table = ExternalEmbeddingTable::new(style.dimension(), entries)
            .map_err(|e| CorpusError::Generation(e.to_string()))?;
        embeddings.insert(style.name().to_string(), table);
    }
    Ok(SyntheticCorpus {
        domain,
        nlu_train,
        nlu_test,
        train_stories,
        test_stories,
        adaptation,
        embeddings,
    })
}

fn build_domain() -> Domain {
    let mut intents: Vec<IntentSpec> = VERBAL_INTENTS
        .iter()
        .map(|&(name, goal, _)| IntentSpec {
            name: name.to_string(),
            goal_oriented: goal,
            synthetic: false,
            physical: false,
        })
        .collect();
    intents.extend(PHYSICAL_INTENTS.iter().map(|&name| IntentSpec {
        name: name.to_string(),
        goal_oriented: true,
        synthetic: true,
        physical: true,
    }));
    let templates = ACTIONS
        .iter()
        .map(|&(a, _)| (a.to_string(), action_templates(a)))
        .collect();
    Domain {
        intents,
        actions: ACTIONS.iter().map(|&(a, _)| a.to_string()).collect(),
        templates,
    }
}

/// All surface variants of an action's responses.
fn action_templates(action: &str) -> Vec<String> {
    let base = ACTIONS.iter().find(|(a, _)| *a == action).map(|(_, b)| *b).unwrap_or(&[]);
    TEMPLATE_STYLES
        .iter()
        .flat_map(|style| base.iter().map(move |b| format!("{style}{b}")))
        .collect()
}

fn generate_nlu(profile: &CorpusProfile, rng: &mut ChaCha8Rng) -> Result<(Vec<IntentExample>, Vec<IntentExample>)> {
    let need = profile.nlu_train_per_intent + profile.nlu_test_per_intent;
    let mut seen = HashSet::new();
    let mut train = Vec::new();
    let mut test = Vec::new();
    for &(intent, _, cores) in VERBAL_INTENTS {
        let mut pool = Vec::new();
        for core in cores {
            let fills: Vec<String> = if core.contains("{n}") {
                NAMES.iter().map(|n| core.replace("{n}", n)).collect()
            } else {
                vec![core.to_string()]
            };
            for f in &fills {
                let prefixes: BTreeSet<&str> = PREFIXES.iter().copied().collect();
                let suffixes: BTreeSet<&str> = SUFFIXES.iter().copied().collect();
                for p in &prefixes {
                    for s in &suffixes {
                        let mut text = if p.is_empty() { f.clone() } else { format!("{p} {f}") };
                        match *s {
                            "" => {}
                            "!" | "." => text.push_str(s),
                            _ => {
                                text.push(' ');
                                text.push_str(s);
                            }
                        }
                        pool.push(text);
                    }
                }
            }
        }
        // Plain cores are what children say most; favor them before shuffling.
        pool.shuffle(rng);
        let plain: HashSet<String> = cores
            .iter()
            .flat_map(|c| NAMES.iter().map(move |n| c.replace("{n}", n)))
            .collect();
        let mut keyed: Vec<(bool, String)> = pool
            .into_iter()
            .map(|t| (!(plain.contains(&t) && rng.gen_bool(0.5)), t))
            .collect();
        keyed.sort_by_key(|(k, _)| *k);
        let pool = keyed.into_iter().map(|(_, t)| t);
        let mut picked = Vec::new();
        for text in pool {
            if picked.len() == need {
                break;
            }
            if seen.insert(text.clone()) {
                picked.push(text);
            }
        }
        if picked.len() < need {
            return Err(CorpusError::Generation(format!(
                "intent {intent} has only {} distinct utterances, {need} requested",
                picked.len()
            )));
        }
        picked.shuffle(rng);
        let test_part = picked.split_off(profile.nlu_train_per_intent);
        train.extend(picked.into_iter().map(|t| IntentExample::new(t, intent)));
        test.extend(test_part.into_iter().map(|t| IntentExample::new(t, intent)));
    }
    Ok((train, test))
}

const NON_GOAL: &[&str] = &[
    "ask_robot_name",
    "ask_robot_age",
    "talk_colors",
    "request_joke",
    "complain_bored",
    "ask_help",
    "out_of_scope",
    "compliment_robot",
    "ask_robot_feelings",
    "share_pet",
];

struct StoryBuilder<'a> {
    profile: &'a CorpusProfile,
    rng: &'a mut ChaCha8Rng,
    turns: Vec<Turn>,
}

impl StoryBuilder<'_> {
    /// A goal user turn, preceded by any digressions or repeat requests
    /// at this listen point.
    fn user(&mut self, intent: &str) {
        if let Some(prompt) = self.turns.last().map(|t| t.label.clone()) {
            loop {
                let r: f64 = self.rng.gen();
                if r < self.profile.digression_rate {
                    let d = NON_GOAL[self.rng.gen_range(0..NON_GOAL.len())];
                    self.turns.push(Turn::user(d));
                    self.turns.push(Turn::system(format!("utter_respond_{d}")));
                } else if r < self.profile.digression_rate + self.profile.repeat_rate {
                    self.turns.push(Turn::user("repeat_please"));
                } else {
                    break;
                }
                self.turns.push(Turn::system(prompt.clone()));
            }
        }
        self.turns.push(Turn::user(intent));
    }

    fn sys(&mut self, action: &str) {
        self.turns.push(Turn::system(action));
    }

    fn chance(&mut self, p: f64) -> bool {
        self.rng.gen_bool(p)
    }

    fn meet_and_greet(&mut self) {
        self.user("greet");
        self.sys("utter_greet_ask_name");
        self.user("my_name_is");
        self.sys("utter_nice_to_meet_ask_how");
        if self.chance(self.profile.name_repair_rate) {
            self.user("wrong_name");
            self.sys("utter_apologize_ask_name");
            self.user("my_name_is");
            self.sys("utter_nice_to_meet_ask_how");
        }
        let r: f64 = self.rng.gen();
        let (mood, reply) = if r < 0.45 {
            ("doing_good", "utter_glad_ask_play")
        } else if r < 0.75 {
            ("doing_okay", "utter_ok_ask_play")
        } else {
            ("doing_bad", "utter_sorry_ask_play")
        };
        self.user(mood);
        self.sys(reply);
        if self.chance(0.6) {
            self.user("affirm");
            self.sys("utter_great_see_you");
        } else {
            self.user("deny");
            self.sys("utter_maybe_later");
        }
        if self.chance(0.6) {
            self.user("goodbye");
            self.sys("utter_goodbye");
        } else {
            self.user("thank_you");
            self.sys("utter_youre_welcome");
        }
    }

    fn simon_says(&mut self) {
        self.user("want_to_play");
        self.sys("utter_explain_rules");
        let r: f64 = self.rng.gen();
        if r < self.profile.not_ready_rate {
            self.user("not_ready");
            self.sys("utter_take_your_time");
        } else if r < self.profile.not_ready_rate + self.profile.ask_rules_rate {
            self.user("ask_rules");
            self.sys("utter_explain_rules");
        }
        self.user("ready");
        if !self.round(&["jump", "clap"]) {
            return;
        }
        if self.chance(self.profile.second_round_rate) {
            self.user("affirm");
            if !self.round(&["wave", "spin"]) {
                return;
            }
        }
        let end = if self.chance(0.7) { "deny" } else { "stop_game" };
        self.user(end);
        self.sys("utter_thanks_bye");
    }

    /// Returns false when the child quit mid-round.
    fn round(&mut self, moves: &[&str]) -> bool {
        for m in moves {
            let command = format!("utter_simon_{m}");
            self.sys(&command);
            while self.chance(self.profile.wrong_move_rate) {
                self.user("did_wrong_move");
                self.sys("utter_try_again");
                self.sys(&command);
            }
            if self.chance(self.profile.early_stop_rate) {
                self.user("stop_game");
                self.sys("utter_thanks_bye");
                return false;
            }
            self.user(&format!("did_{m}"));
            self.sys("utter_good_job");
        }
        self.sys("utter_ask_play_again");
        true
    }
}

fn generate_stories(profile: &CorpusProfile, total: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Story>> {
    let mut seen: HashSet<Vec<Turn>> = HashSet::new();
    let mut table = WindowTable::new(profile.window);
    let mut out = Vec::with_capacity(total);
    let budget = 200 * total.max(1);
    let mut attempts = 0;
    while out.len() < total {
        attempts += 1;
        if attempts > budget {
            return Err(CorpusError::Generation(format!(
                "only {} distinct stories found after {budget} attempts, {total} requested",
                out.len()
            )));
        }
        let simon = rng.gen_bool(profile.simon_says_share);
        let mut b = StoryBuilder {
            profile,
            rng: &mut *rng,
            turns: Vec::new(),
        };
        if simon {
            b.simon_says();
        } else {
            b.meet_and_greet();
        }
        let turns = b.turns;
        if seen.contains(&turns) {
            continue;
        }
        let kind = if simon { "simon says" } else { "meet and greet" };
        let story = Story {
            title: format!("{kind} {:03}", out.len() + 1),
            agent_initiated: false,
            turns: turns.clone(),
        };
        table.insert(&story).map_err(CorpusError::Generation)?;
        seen.insert(turns);
        out.push(story);
    }
    Ok(out)
}

/// Repeats the child's words back in second person.
fn mirror(text: &str) -> String {
    text.trim_end_matches(['.', '!', '?', ','])
        .split_whitespace()
        .map(|w| MIRROR.iter().find(|(a, _)| *a == w).map_or(w, |(_, b)| *b))
        .collect::<Vec<_>>()
        .join(" ")
}

fn generate_adaptation(
    profile: &CorpusProfile,
    stories: &[Story],
    nlu: &[IntentExample],
    rng: &mut ChaCha8Rng,
) -> Vec<AdaptationDialog> {
    let mut by_intent: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for e in nlu {
        by_intent.entry(e.intent.as_str()).or_default().push(&e.text);
    }
    let mut out = Vec::new();
    for dialog in 0..profile.adaptation_dialogs {
        let story = &stories[dialog % stories.len()];
        for pair in story.turns.windows(2) {
            let [u, s] = pair else { continue };
            let Some(texts) = by_intent.get(u.label.as_str()) else {
                continue;
            };
            if !u.is_user() || s.is_user() {
                continue;
            }
            let context = texts[rng.gen_range(0..texts.len())].to_string();
            let mut candidates = action_templates(&s.label);
            candidates.shuffle(rng);
            candidates.truncate(profile.adaptation_candidates);
            let base = &candidates[rng.gen_range(0..candidates.len())];
            let realized = format!("{}! {base}", mirror(&context));
            let at = rng.gen_range(0..=candidates.len());
            candidates.insert(at, realized.clone());
            out.push(AdaptationDialog {
                dialog,
                context,
                candidates,
                realized,
            });
        }
    }
    out
}

/// Words of each verbal intent's paraphrase cores; words shared by many
/// intents are treated as function words and carry no topic.
fn lexicon() -> &'static BTreeMap<String, Vec<usize>> {
    static LEX: OnceLock<BTreeMap<String, Vec<usize>>> = OnceLock::new();
    LEX.get_or_init(|| {
        let mut lex: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, &(_, _, cores)) in VERBAL_INTENTS.iter().enumerate() {
            for core in cores {
                for w in tokenize(&core.replace("{n}", "")).words() {
                    let e = lex.entry(w.to_string()).or_default();
                    if !e.contains(&i) {
                        e.push(i);
                    }
                }
            }
        }
        lex.retain(|_, v| v.len() <= 3);
        lex
    })
}

fn fnv(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

fn unit_noise(seed: u64, dim: usize) -> Vec<f64> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let v: Vec<f64> = (0..dim).map(|_| r.gen_range(-1.0..1.0)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
    v.into_iter().map(|x| x / n).collect()
}

/// Deterministic sentence vector standing in for a pretrained encoder:
/// the mean of word vectors, where topical words sit near a shared center
/// and every word carries its own fixed offset.
pub fn stand_in_embedding(text: &str, style: EmbeddingStyle) -> Vec<f64> {
    let dim = style.dimension();
    let lex = lexicon();
    let mut sum = vec![0.0; dim];
    let mut n = 0usize;
    for w in tokenize(text).words() {
        let mut v: Vec<f64> = unit_noise(style.seed() ^ fnv(w), dim).into_iter().map(|x| x * style.noise()).collect();
        if let Some(members) = lex.get(w) {
            for &i in members {
                let c = unit_noise(style.seed().wrapping_add(1 + i as u64), dim);
                for (a, b) in v.iter_mut().zip(c) {
                    *a += b / members.len() as f64;
                }
            }
        }
        for (s, x) in sum.iter_mut().zip(v) {
            *s += x;
        }
        n += 1;
    }
    if n > 0 {
        sum.iter_mut().for_each(|s| *s /= n as f64);
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{check_solvable, corpus_statistics, parse_nlu_data, parse_stories, validate_stories};

    fn default_corpus() -> SyntheticCorpus {
        generate_synthetic_corpus(&CorpusProfile::default(), 7).unwrap()
    }

    #[test]
    fn default_profile_shape() {
        let c = default_corpus();
        assert_eq!(c.train_stories.len(), 65);
        assert_eq!(c.test_stories.len(), 15);
        let verbal = c.domain.verbal_intents().len();
        assert_eq!(verbal, 26);
        assert_eq!(c.nlu_train.len(), 30 * verbal);
        assert_eq!(c.nlu_test.len(), 11 * verbal);
        let all: Vec<Story> = c.train_stories.iter().chain(&c.test_stories).cloned().collect();
        validate_stories(&all, &c.domain).unwrap();
        check_solvable(&all, 3).unwrap();
        let distinct: HashSet<&Vec<Turn>> = all.iter().map(|s| &s.turns).collect();
        assert_eq!(distinct.len(), all.len());
    }

    #[test]
    fn statistics_near_targets() {
        for seed in [1, 2, 3, 4, 5, 6] {
            let c = generate_synthetic_corpus(&CorpusProfile::default(), seed).unwrap();
            let all: Vec<Story> = c.train_stories.iter().chain(&c.test_stories).cloned().collect();
            let s = corpus_statistics(&all, &c.domain);
            assert!((13.0..=16.0).contains(&s.turns_per_dialog), "{s:?}");
            assert!((s.non_goal_fraction - 0.126).abs() <= 0.126 * 0.15, "{s:?}");
        }
    }

    #[test]
    fn cooperative_stories_have_no_digressions() {
        let c = generate_synthetic_corpus(&CorpusProfile::cooperative(), 3).unwrap();
        for s in c.train_stories.iter().chain(&c.test_stories) {
            assert!(s.turns.iter().all(|t| c.domain.is_goal(&t.label) || !t.is_user()));
            assert!(s.turns.iter().all(|t| t.label != "repeat_please"));
        }
    }

    #[test]
    fn deterministic_and_round_trips() {
        let a = default_corpus();
        let b = default_corpus();
        assert_eq!(a, b);
        let text = serialize_stories(&a.train_stories);
        let parsed = parse_stories(&text, Some(&a.domain)).unwrap();
        assert_eq!(parsed.stories, a.train_stories);
        let nlu: Vec<IntentExample> = parse_nlu_data(&serialize_nlu_data(&a.nlu_test))
            .unwrap()
            .into_iter()
            .map(|e| e.example())
            .collect();
        let mut want = a.nlu_test.clone();
        want.sort_by(|x, y| (&x.intent, &x.text).cmp(&(&y.intent, &y.text)));
        let mut got = nlu;
        got.sort_by(|x, y| (&x.intent, &x.text).cmp(&(&y.intent, &y.text)));
        assert_eq!(got, want);
        let c = generate_synthetic_corpus(&CorpusProfile::default(), 8).unwrap();
        assert_ne!(a.train_stories, c.train_stories);
    }

    #[test]
    fn nlu_splits_are_disjoint() {
        let c = default_corpus();
        let train: HashSet<&str> = c.nlu_train.iter().map(|e| e.text.as_str()).collect();
        assert!(c.nlu_test.iter().all(|e| !train.contains(e.text.as_str())));
        for e in c.nlu_train.iter().chain(&c.nlu_test) {
            assert_eq!(c.embeddings["use"].get(&e.text).unwrap().len(), 32);
            assert_eq!(c.embeddings["bert"].get(&e.text).unwrap().len(), 48);
        }
    }

    #[test]
    fn infeasible_requests_fail() {
        let too_many = CorpusProfile {
            nlu_train_per_intent: 5000,
            ..CorpusProfile::default()
        };
        assert!(matches!(generate_synthetic_corpus(&too_many, 1), Err(CorpusError::Generation(_))));
        let few_variants = CorpusProfile {
            train_stories: 200,
            wrong_move_rate: 0.0,
            early_stop_rate: 0.0,
            ..CorpusProfile::cooperative()
        };
        assert!(matches!(generate_synthetic_corpus(&few_variants, 1), Err(CorpusError::Generation(_))));
        let bad = CorpusProfile {
            digression_rate: 1.5,
            ..CorpusProfile::default()
        };
        assert!(matches!(generate_synthetic_corpus(&bad, 1), Err(CorpusError::Argument(_))));
    }

    #[test]
    fn embeddings_are_deterministic_and_topical() {
        let a = stand_in_embedding("i want to play", EmbeddingStyle::Bert);
        assert_eq!(a, stand_in_embedding("i want to play", EmbeddingStyle::Bert));
        let b = stand_in_embedding("can we play a game", EmbeddingStyle::Bert);
        let c = stand_in_embedding("how old are you", EmbeddingStyle::Bert);
        let cos = |x: &[f64], y: &[f64]| crate::tensor::cosine_similarity(x, y).unwrap();
        assert!(cos(&a, &b) > cos(&a, &c));
        assert_eq!(stand_in_embedding("", EmbeddingStyle::Use), vec![0.0; 32]);
    }

    #[test]
    fn adaptation_contexts_hold_their_realized_response() {
        let c = default_corpus();
        assert!(c.adaptation.len() > 60);
        assert_eq!(c.adaptation.iter().map(|a| a.dialog).max(), Some(59));
        for a in &c.adaptation {
            assert!(a.candidates.contains(&a.realized));
            assert_eq!(a.candidates.len(), 12);
        }
        assert_eq!(mirror("i am good"), "you are good");
    }
}
