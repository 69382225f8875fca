//! Recurrent embedding dialog policy.
//!
//! The dialog state is an LSTM over decision points. Each step reads a
//! one-hot turn vector (latest user intent, previous action) together with
//! attention contexts over memory blocks built from past user intents and
//! system actions, then embeds the hidden state into the action space.
//! A copy unit attends over past system actions by content and age and
//! adds the gated result to the state, so a prompt interrupted by
//! chit-chat can be reissued. Actions are ranked by cosine similarity.

mod net;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{decision_points, Story, LISTEN};
use crate::metrics::{classify, Classification};
use crate::tensor::{cosine_slice, Adam, Bound, Graph, ParamStore, Tensor, TensorError, Var};
use net::{Net, Tracker};

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("invalid policy config: {0}")]
    Config(String),
    #[error("{0}")]
    Argument(String),
    #[error("training: {0}")]
    Training(String),
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

pub type Result<T> = std::result::Result<T, PolicyError>;

/// One memory unit of a fusion configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    /// Past user intents.
    User,
    /// Past system actions.
    System,
    /// `[u ; s]` per exchange.
    Concat,
    /// `u ⊗ s` flattened row-major (user index outer).
    TensorDot,
    /// `[u;1] ⊗ [s;1]` flattened row-major.
    TensorFusion,
}

impl BlockKind {
    pub fn width(self, d_u: usize, d_s: usize) -> usize {
        match self {
            BlockKind::User => d_u,
            BlockKind::System => d_s,
            BlockKind::Concat => d_u + d_s,
            BlockKind::TensorDot => d_u * d_s,
            BlockKind::TensorFusion => (d_u + 1) * (d_s + 1),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BlockKind::User => "user",
            BlockKind::System => "system",
            BlockKind::Concat => "concat",
            BlockKind::TensorDot => "tensor_dot",
            BlockKind::TensorFusion => "tensor_fusion",
        }
    }

    /// Rows pair a user intent with the action that followed it.
    pub fn is_paired(self) -> bool {
        matches!(self, BlockKind::Concat | BlockKind::TensorDot | BlockKind::TensorFusion)
    }
}

/// Fused memory row for a paired block; single-memory kinds return their
/// own input.
pub fn fused_row(kind: BlockKind, u: &[f64], s: &[f64]) -> Vec<f64> {
    let outer = |a: &[f64], b: &[f64]| a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect::<Vec<f64>>();
    match kind {
        BlockKind::User => u.to_vec(),
        BlockKind::System => s.to_vec(),
        BlockKind::Concat => [u, s].concat(),
        BlockKind::TensorDot => outer(u, s),
        BlockKind::TensorFusion => outer(&[u, &[1.0]].concat(), &[s, &[1.0]].concat()),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionMode {
    C1,
    C2,
    C3,
    C4,
    C5,
    C6,
    C7,
}

impl FusionMode {
    pub const ALL: [FusionMode; 7] = [
        FusionMode::C1,
        FusionMode::C2,
        FusionMode::C3,
        FusionMode::C4,
        FusionMode::C5,
        FusionMode::C6,
        FusionMode::C7,
    ];

    /// Memory units, each with its own attention.
    pub fn blocks(self) -> Vec<BlockKind> {
        use BlockKind::*;
        match self {
            FusionMode::C1 => vec![Concat],
            FusionMode::C2 => vec![TensorDot],
            FusionMode::C3 => vec![TensorFusion],
            FusionMode::C4 => vec![User, System],
            FusionMode::C5 => vec![User, TensorDot],
            FusionMode::C6 => vec![User, System, TensorDot],
            FusionMode::C7 => vec![User, System, TensorFusion],
        }
    }

    pub fn has_system_memory(self) -> bool {
        self.blocks().contains(&BlockKind::System)
    }
}

impl fmt::Display for FusionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "C{}", *self as usize + 1)
    }
}

impl FromStr for FusionMode {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self> {
        let n = s
            .strip_prefix(['c', 'C'])
            .and_then(|d| d.parse::<usize>().ok())
            .filter(|n| (1..=7).contains(n))
            .ok_or_else(|| PolicyError::Argument(format!("unknown fusion mode {s:?}, expected C1..C7")))?;
        Ok(FusionMode::ALL[n - 1])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyConfig {
    /// `None` is a plain LSTM without memories or copy.
    pub fusion: Option<FusionMode>,
    pub d_u: usize,
    /// Width of the state and of the action embeddings (system memory rows).
    pub d_state: usize,
    pub hidden: usize,
    pub attention_dim: usize,
    pub gamma: f64,
    /// Attend to the most recent `window` rows; `None` is the full history.
    pub window: Option<usize>,
    /// Distinct ages with their own copy offset; older rows share the last.
    pub max_age: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub mu_pos: f64,
    pub mu_neg: f64,
    pub negatives: usize,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            fusion: Some(FusionMode::C4),
            d_u: 20,
            d_state: 20,
            hidden: 32,
            attention_dim: 20,
            gamma: 2.0,
            window: None,
            max_age: 8,
            epochs: 200,
            batch_size: 8,
            learning_rate: 0.01,
            mu_pos: 0.8,
            mu_neg: -0.2,
            negatives: 20,
        }
    }
}

impl PolicyConfig {
    pub fn with_fusion(fusion: Option<FusionMode>) -> Self {
        Self {
            fusion,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("d_u", self.d_u),
            ("d_state", self.d_state),
            ("hidden", self.hidden),
            ("attention_dim", self.attention_dim),
            ("max_age", self.max_age),
            ("batch_size", self.batch_size),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(PolicyError::Config(format!("{name} must be positive")));
        }
        if !(self.gamma >= 1.0) {
            return Err(PolicyError::Config(format!("gamma must be >= 1, got {}", self.gamma)));
        }
        if self.window == Some(0) {
            return Err(PolicyError::Config("window must be positive".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(PolicyError::Config("learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// Label inventories. Action 0 is always [`LISTEN`], which doubles as the
/// reserved "no previous action" slot of the turn vector.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Inventory {
    pub intents: Vec<String>,
    pub actions: Vec<String>,
}

impl Inventory {
    pub fn from_stories(stories: &[Story]) -> Self {
        let mut intents = BTreeSet::new();
        let mut actions = BTreeSet::new();
        for t in stories.iter().flat_map(|s| &s.turns) {
            if t.is_user() {
                intents.insert(t.label.clone());
            } else if t.label != LISTEN {
                actions.insert(t.label.clone());
            }
        }
        Self::new(intents, actions)
    }

    pub fn new(intents: impl IntoIterator<Item = String>, actions: impl IntoIterator<Item = String>) -> Self {
        let intents: BTreeSet<String> = intents.into_iter().collect();
        let actions: BTreeSet<String> = actions.into_iter().filter(|a| a != LISTEN).collect();
        Self {
            intents: intents.into_iter().collect(),
            actions: std::iter::once(LISTEN.to_string()).chain(actions).collect(),
        }
    }

    /// Intent block (with OOV) followed by the previous-action block
    /// (listen slot, actions, OOV).
    pub fn turn_width(&self) -> usize {
        self.intents.len() + 1 + self.actions.len() + 1
    }

    pub fn intent_slot(&self, label: &str) -> usize {
        self.intents.binary_search_by(|x| x.as_str().cmp(label)).unwrap_or(self.intents.len())
    }

    pub fn action_slot(&self, label: &str) -> usize {
        if label == LISTEN {
            return 0;
        }
        self.actions[1..]
            .binary_search_by(|x| x.as_str().cmp(label))
            .map_or(self.actions.len(), |i| i + 1)
    }

    pub(crate) fn turn_vector(&self, user: Option<usize>, prev_action: Option<usize>) -> Tensor {
        let mut v = vec![0.0; self.turn_width()];
        if let Some(u) = user {
            v[u] = 1.0;
        }
        v[self.intents.len() + 1 + prev_action.unwrap_or(0)] = 1.0;
        Tensor::vector(v)
    }
}

/// One-hot turn vector; `None` stands for "no user turn yet" and for the
/// reserved listen slot. Unknown labels set the OOV bit of their block.
pub fn featurize_turn(prev_action: Option<&str>, user_intent: Option<&str>, inv: &Inventory) -> Tensor {
    inv.turn_vector(user_intent.map(|u| inv.intent_slot(u)), prev_action.map(|a| inv.action_slot(a)))
}

/// Cosine ranking of `state` against `embeddings` rows named by `names`;
/// ties go to the lexicographically smaller name.
pub fn rank_actions(state: &[f64], embeddings: &Tensor, names: &[String]) -> Vec<(String, f64)> {
    let mut out: Vec<(String, f64)> = names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.clone(), cosine_slice(state, embeddings.row(i))))
        .collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

#[derive(Clone, Debug)]
pub struct PolicyModel {
    pub config: PolicyConfig,
    pub inventory: Inventory,
    pub params: ParamStore,
    pub loss_trace: Vec<f64>,
    /// Training stories dropped because they had no system turn.
    pub skipped: usize,
    net: Net,
}

/// Decision points of a story as `(history, target index)`.
fn targets(story: &Story, inv: &Inventory) -> Vec<(usize, usize)> {
    decision_points(story)
        .into_iter()
        .map(|d| (d.history, inv.action_slot(&d.target)))
        .collect()
}

/// Teacher-forced state vectors at every decision point of `story`.
fn unroll(g: &Graph, p: &Bound, net: &Net, inv: &Inventory, config: &PolicyConfig, story: &Story) -> Result<Vec<net::StepVars>> {
    let mut tracker = Tracker::new(g, net, config);
    let decisions = decision_points(story);
    let mut out = Vec::with_capacity(decisions.len());
    let mut seen = 0;
    for d in decisions {
        while seen < d.history {
            let t = &story.turns[seen];
            tracker.observe(g, p, net, inv, &t.label, t.is_user())?;
            seen += 1;
        }
        out.push(tracker.decide(g, p, net, inv, config)?);
    }
    Ok(out)
}

/// Which pieces of the hinge loss are active at one decision: the gold
/// margin, and the sampled negative (as an action slot) that sets the
/// negative term. The loss is smooth wherever this stays fixed.
pub type HingePattern = Vec<(bool, Option<usize>)>;

/// Hinge loss of one story (gold margin plus the hardest sampled negative
/// per decision), summed over decisions, the number of decisions in it, and
/// its active pattern.
fn story_loss<R: Rng>(
    g: &Graph,
    p: &Bound,
    net: &Net,
    inv: &Inventory,
    config: &PolicyConfig,
    story: &Story,
    actions: Var,
    rng: &mut R,
) -> Result<(Var, usize, HingePattern)> {
    let steps = unroll(g, p, net, inv, config, story)?;
    let gold = targets(story, inv);
    let states: Vec<Var> = steps.iter().map(|s| s.state).collect();
    let sn = g.normalize_rows(g.stack_rows(&states)?)?;
    let sims = g.matmul(sn, g.transpose(actions)?)?;
    let n = inv.actions.len();
    let mut pos = Vec::with_capacity(gold.len());
    let mut neg = Vec::new();
    for (r, &(_, t)) in gold.iter().enumerate() {
        pos.push(r * n + t);
        let others: Vec<usize> = (0..n).filter(|&k| k != t).collect();
        if others.len() <= config.negatives {
            neg.extend(others.into_iter().map(|k| r * n + k));
        } else {
            neg.extend(others.choose_multiple(rng, config.negatives).map(|&k| r * n + k));
        }
    }
    let pos_v = g.pick(sims, &pos)?;
    let margins = g.add_scalar(g.scale(pos_v, -1.0), config.mu_pos);
    let mut pattern: HingePattern = g.value(margins).data().iter().map(|&m| (m > 0.0, None)).collect();
    let mut loss = g.sum(g.relu(margins));
    if !neg.is_empty() {
        let picked = g.pick(sims, &neg)?;
        let hinge = g.relu(g.add_scalar(picked, -config.mu_neg));
        let idx = hardest_per_row(g, hinge, gold.len());
        let values = g.value(hinge);
        for (r, &i) in idx.iter().enumerate() {
            if values.data()[i] > 0.0 {
                pattern[r].1 = Some(neg[i] % n);
            }
        }
        loss = g.add(loss, g.sum(g.pick(hinge, &idx)?))?;
    }
    Ok((loss, gold.len(), pattern))
}

/// Index of the largest entry in each of `rows` equal chunks of `v`.
fn hardest_per_row(g: &Graph, v: Var, rows: usize) -> Vec<usize> {
    g.with_value(v, |t| {
        let data = t.data();
        let k = data.len() / rows;
        (0..rows)
            .map(|r| {
                let row = &data[r * k..(r + 1) * k];
                r * k + (0..k).fold(0, |b, i| if row[i] > row[b] { i } else { b })
            })
            .collect()
    })
}

/// Initializes the network for `stories` without training it.
pub fn init_policy(stories: &[Story], config: &PolicyConfig, seed: u64) -> Result<PolicyModel> {
    config.validate()?;
    let inventory = Inventory::from_stories(stories);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ParamStore::new();
    let net = Net::build(config, &inventory, &mut params, &mut rng);
    Ok(PolicyModel {
        config: config.clone(),
        inventory,
        params,
        loss_trace: Vec::new(),
        skipped: 0,
        net,
    })
}

/// Loss of `story` for parameters given as one flat vector in store order,
/// with negatives drawn from `seed`. Used by the gradient check.
pub fn story_loss_flat(model: &PolicyModel, g: &Graph, flat: Var, story: &Story, seed: u64) -> Result<Var> {
    let p = model.params.bind_flat(g, flat)?;
    let actions = model.net.ranked_actions(g, &p, &model.inventory)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (loss, _, _) = story_loss(g, &p, &model.net, &model.inventory, &model.config, story, actions, &mut rng)?;
    Ok(loss)
}

/// Active hinge pattern of `story_loss_flat` at `flat`.
pub fn story_loss_pattern(model: &PolicyModel, flat: &Tensor, story: &Story, seed: u64) -> Result<HingePattern> {
    let g = Graph::new();
    let p = model.params.bind_flat(&g, g.constant(flat.clone()))?;
    let actions = model.net.ranked_actions(&g, &p, &model.inventory)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (_, _, pattern) = story_loss(&g, &p, &model.net, &model.inventory, &model.config, story, actions, &mut rng)?;
    Ok(pattern)
}

/// Trains on whole stories, unrolled, with Adam on mini-batches of stories.
/// Stops early after an epoch with zero loss.
pub fn train_policy(stories: &[Story], config: &PolicyConfig, seed: u64) -> Result<PolicyModel> {
    let usable: Vec<&Story> = stories.iter().filter(|s| s.system_turns() > 0).collect();
    if usable.is_empty() {
        return Err(PolicyError::Training("no story has a system turn".into()));
    }
    let owned: Vec<Story> = usable.iter().map(|s| (*s).clone()).collect();
    let mut model = init_policy(&owned, config, seed)?;
    model.skipped = stories.len() - usable.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut adam = Adam::new(config.learning_rate);
    let mut order: Vec<usize> = (0..owned.len()).collect();
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut decisions = 0;
        for batch in order.chunks(config.batch_size) {
            let g = Graph::new();
            let p = model.params.bind(&g);
            let actions = model.net.ranked_actions(&g, &p, &model.inventory)?;
            let mut total = None;
            let mut count = 0;
            for &i in batch {
                let (l, n, _) = story_loss(&g, &p, &model.net, &model.inventory, config, &owned[i], actions, &mut rng)?;
                total = Some(match total {
                    None => l,
                    Some(t) => g.add(t, l)?,
                });
                count += n;
            }
            let loss = g.scale(total.expect("batch is non-empty"), 1.0 / count.max(1) as f64);
            epoch_loss += g.value(loss).item().unwrap_or(0.0) * count as f64;
            decisions += count;
            g.backward(loss)?;
            adam.step(&mut model.params, &p.grads(&g));
        }
        let mean = epoch_loss / decisions.max(1) as f64;
        if !mean.is_finite() {
            return Err(PolicyError::Training("loss diverged".into()));
        }
        model.loss_trace.push(mean);
        if mean == 0.0 {
            break;
        }
    }
    Ok(model)
}

/// Prediction at one decision point with what the model looked at.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTrace {
    pub history: usize,
    pub gold: String,
    pub predicted: String,
    pub similarity: f64,
    /// Attention weights per memory block (empty before the block has rows).
    pub attention: Vec<Vec<f64>>,
    pub copy_weights: Vec<f64>,
    pub copy_gate: Option<f64>,
    pub user_rows: usize,
    pub system_rows: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoryTrace {
    pub title: String,
    pub correct: bool,
    pub decisions: Vec<DecisionTrace>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    /// Listen decisions, reported apart from the action metrics.
    pub listen_accuracy: f64,
    pub correct_stories: usize,
    pub stories: usize,
    pub detail: Classification,
    pub traces: Vec<StoryTrace>,
}

impl PolicyModel {
    /// Ranked actions for a state vector.
    pub fn rank(&self, state: &[f64]) -> Vec<(String, f64)> {
        let emb = self.params.get(self.net.action_emb);
        rank_actions(state, emb, &self.inventory.actions)
    }

    /// Teacher-forced predictions for every decision point of `story`.
    pub fn trace_story(&self, story: &Story) -> Result<StoryTrace> {
        let g = Graph::new();
        let p = self.params.bind_frozen(&g);
        let steps = unroll(&g, &p, &self.net, &self.inventory, &self.config, story)?;
        let mut decisions = Vec::with_capacity(steps.len());
        for (step, d) in steps.iter().zip(decision_points(story)) {
            decisions.push(self.describe(&g, step, d.history, d.target));
        }
        let correct = decisions.iter().filter(|d| d.gold != LISTEN).all(|d| d.gold == d.predicted);
        Ok(StoryTrace {
            title: story.title.clone(),
            correct,
            decisions,
        })
    }

    fn describe(&self, g: &Graph, step: &net::StepVars, history: usize, gold: String) -> DecisionTrace {
        let state = g.value(step.state);
        let (predicted, similarity) = self.rank(state.data()).swap_remove(0);
        DecisionTrace {
            history,
            gold,
            predicted,
            similarity,
            attention: step
                .attention
                .iter()
                .map(|w| w.map(|w| g.value(w).into_data()).unwrap_or_default())
                .collect(),
            copy_weights: step.copy.map(|(w, _)| g.value(w).into_data()).unwrap_or_default(),
            copy_gate: step.copy.and_then(|(_, gate)| g.value(gate).data().first().copied()),
            user_rows: step.user_rows,
            system_rows: step.system_rows,
        }
    }

    pub fn session(&self) -> PolicySession<'_> {
        let graph = Graph::new();
        let bound = self.params.bind_frozen(&graph);
        let tracker = Tracker::new(&graph, &self.net, &self.config);
        PolicySession {
            model: self,
            graph,
            bound,
            tracker,
            turns: Vec::new(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            config: self.config.clone(),
            inventory: self.inventory.clone(),
            loss_trace: self.loss_trace.clone(),
            params: serde_json::from_str(&self.params.to_json()?).map_err(|e| PolicyError::Format(e.to_string()))?,
        };
        serde_json::to_string(&doc).map_err(|e| PolicyError::Format(e.to_string()))
    }

    /// Rebuilds the network from the stored config and inventory and
    /// checks that every parameter matches the expected layout.
    pub fn from_json(s: &str) -> Result<Self> {
        let doc: Checkpoint = serde_json::from_str(s).map_err(|e| PolicyError::Format(e.to_string()))?;
        if doc.format != CHECKPOINT_FORMAT {
            return Err(PolicyError::Format(format!("unexpected format {:?}", doc.format)));
        }
        doc.config.validate()?;
        let params = ParamStore::from_json(&doc.params.to_string())?;
        let mut layout = ParamStore::new();
        let net = Net::build(&doc.config, &doc.inventory, &mut layout, &mut ChaCha8Rng::seed_from_u64(0));
        if layout.len() != params.len()
            || layout
                .ids()
                .any(|id| layout.name(id) != params.name(id) || layout.get(id).shape() != params.get(id).shape())
        {
            return Err(PolicyError::Format("parameters do not match the configured network".into()));
        }
        Ok(Self {
            config: doc.config,
            inventory: doc.inventory,
            params,
            loss_trace: doc.loss_trace,
            skipped: 0,
            net,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|source| PolicyError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|source| PolicyError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&s)
    }
}

const CHECKPOINT_FORMAT: &str = "dialog-policy";

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    config: PolicyConfig,
    inventory: Inventory,
    loss_trace: Vec<f64>,
    params: serde_json::Value,
}

/// Teacher-forced evaluation. Metrics cover system actions only; a story
/// is correct when every one of its actions is predicted.
pub fn evaluate_policy(model: &PolicyModel, stories: &[Story]) -> Result<PolicyReport> {
    if stories.is_empty() {
        return Err(PolicyError::Argument("empty test set".into()));
    }
    let mut labels = model.inventory.actions.clone();
    let mut index: BTreeMap<String, usize> = labels.iter().enumerate().map(|(i, l)| (l.clone(), i)).collect();
    let mut pairs = Vec::new();
    let mut traces = Vec::with_capacity(stories.len());
    let (mut listen_ok, mut listen_n) = (0usize, 0usize);
    for story in stories {
        let trace = model.trace_story(story)?;
        for d in &trace.decisions {
            if d.gold == LISTEN {
                listen_n += 1;
                listen_ok += usize::from(d.predicted == LISTEN);
                continue;
            }
            let mut id = |l: &str| {
                let next = labels.len();
                *index.entry(l.to_string()).or_insert_with(|| {
                    labels.push(l.to_string());
                    next
                })
            };
            let gold = id(&d.gold);
            let pred = id(&d.predicted);
            pairs.push((gold, pred));
        }
        traces.push(trace);
    }
    let detail = classify(&labels, &pairs).ok_or_else(|| PolicyError::Argument("test stories contain no system actions".into()))?;
    Ok(PolicyReport {
        precision: detail.precision,
        recall: detail.recall,
        f1: detail.f1,
        accuracy: detail.accuracy,
        listen_accuracy: if listen_n == 0 { 1.0 } else { listen_ok as f64 / listen_n as f64 },
        correct_stories: traces.iter().filter(|t| t.correct).count(),
        stories: stories.len(),
        detail,
        traces,
    })
}

/// Live conversation state over a frozen model. Each session owns its
/// memories; the model itself is shared read-only.
pub struct PolicySession<'a> {
    model: &'a PolicyModel,
    graph: Graph,
    bound: Bound,
    tracker: Tracker,
    turns: Vec<crate::corpus::Turn>,
}

impl PolicySession<'_> {
    pub fn observe_user(&mut self, intent: &str) -> Result<()> {
        self.observe(intent, true)
    }

    pub fn observe_system(&mut self, action: &str) -> Result<()> {
        self.observe(action, false)
    }

    fn observe(&mut self, label: &str, is_user: bool) -> Result<()> {
        let m = self.model;
        self.tracker.observe(&self.graph, &self.bound, &m.net, &m.inventory, label, is_user)?;
        self.turns.push(if is_user {
            crate::corpus::Turn::user(label)
        } else {
            crate::corpus::Turn::system(label)
        });
        Ok(())
    }

    /// Advances the state once and returns the top-ranked action. The
    /// caller reports the executed action back with `observe_system`.
    pub fn next_action(&mut self) -> Result<DecisionTrace> {
        let m = self.model;
        let step = self.tracker.decide(&self.graph, &self.bound, &m.net, &m.inventory, &m.config)?;
        Ok(m.describe(&self.graph, &step, self.turns.len(), String::new()))
    }

    /// Actions until the model chooses to listen, capped at `max`.
    pub fn respond(&mut self, max: usize) -> Result<Vec<DecisionTrace>> {
        let mut out = Vec::new();
        for _ in 0..max {
            let d = self.next_action()?;
            let listen = d.predicted == LISTEN;
            if !listen {
                self.observe_system(&d.predicted.clone())?;
            }
            out.push(d);
            if listen {
                break;
            }
        }
        Ok(out)
    }

    pub fn turns(&self) -> &[crate::corpus::Turn] {
        &self.turns
    }
}
