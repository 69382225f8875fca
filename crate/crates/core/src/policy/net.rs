//! Graph-level pieces of the policy: memory blocks, additive attention,
//! the location-aware copy unit and the per-dialog state tracker.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{BlockKind, Inventory, PolicyConfig};
use crate::nn::{Dense, LstmCell};
use crate::tensor::{Bound, Graph, ParamId, ParamStore, Result, Tensor, Var};

/// Additive scoring `vᵀ tanh(W_q q + W_m m)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub(crate) struct Attention {
    pub wq: ParamId,
    pub wm: ParamId,
    pub v: ParamId,
}

impl Attention {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, query: usize, width: usize, dim: usize, rng: &mut R) -> Self {
        Self {
            wq: store.xavier(format!("{name}.wq"), &[query, dim], rng),
            wm: store.xavier(format!("{name}.wm"), &[width, dim], rng),
            v: store.xavier(format!("{name}.v"), &[dim, 1], rng),
        }
    }

    /// Key of one memory row; computed once when the row is appended.
    pub fn project(&self, g: &Graph, p: &Bound, row: Var) -> Result<Var> {
        g.vecmat(row, p[self.wm])
    }

    /// Unnormalized scores of `keys` (already projected rows) for `query`.
    pub fn scores(&self, g: &Graph, p: &Bound, query: Var, keys: &[Var]) -> Result<Var> {
        let q = g.vecmat(query, p[self.wq])?;
        let k = g.stack_rows(keys)?;
        let e = g.tanh(g.add_row(k, q)?);
        let s = g.matmul(e, p[self.v])?;
        g.reshape(s, &[keys.len()])
    }
}

/// Rows of one memory unit with their cached keys.
#[derive(Clone, Debug, Default)]
pub(crate) struct MemoryBlock {
    pub rows: Vec<Var>,
    pub keys: Vec<Var>,
}

impl MemoryBlock {
    fn recent(&self, window: Option<usize>) -> (&[Var], &[Var]) {
        let start = window.map_or(0, |w| self.rows.len().saturating_sub(w));
        (&self.rows[start..], &self.keys[start..])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub(crate) struct CopyUnit {
    pub att: Attention,
    /// State-dependent score offset per row age (most recent row has age 0).
    pub age: Dense,
    pub gate: Dense,
}

/// Parameter layout of a policy network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub(crate) struct Net {
    pub intent_emb: ParamId,
    pub action_emb: ParamId,
    pub blocks: Vec<(BlockKind, Attention)>,
    pub lstm: LstmCell,
    pub embed: Dense,
    pub copy: Option<CopyUnit>,
}

impl Net {
    pub fn build<R: Rng>(config: &PolicyConfig, inv: &Inventory, store: &mut ParamStore, rng: &mut R) -> Self {
        let (du, ds, hidden, a) = (config.d_u, config.d_state, config.hidden, config.attention_dim);
        let intent_emb = store.xavier("intent.emb", &[inv.intents.len() + 1, du], rng);
        let action_emb = store.xavier("action.emb", &[inv.actions.len() + 1, ds], rng);
        let kinds = config.fusion.map(|f| f.blocks()).unwrap_or_default();
        let blocks: Vec<(BlockKind, Attention)> = kinds
            .iter()
            .enumerate()
            .map(|(i, &k)| (k, Attention::new(store, &format!("att{i}.{}", k.name()), hidden, k.width(du, ds), a, rng)))
            .collect();
        let ctx: usize = kinds.iter().map(|k| k.width(du, ds)).sum();
        let lstm = LstmCell::new(store, "lstm", inv.turn_width() + ctx, hidden, rng);
        let embed = Dense::new(store, "embed", hidden, ds, rng);
        let copy = config.fusion.map(|_| CopyUnit {
            att: Attention::new(store, "copy", hidden, ds, a, rng),
            age: Dense::new(store, "copy.age", hidden, config.max_age, rng),
            gate: Dense::new(store, "copy.gate", hidden, 1, rng),
        });
        Self {
            intent_emb,
            action_emb,
            blocks,
            lstm,
            embed,
            copy,
        }
    }

    fn embedding_row(&self, g: &Graph, p: &Bound, table: ParamId, id: usize) -> Result<Var> {
        let r = g.rows(p[table], &[id])?;
        let d = g.shape(r)[1];
        g.reshape(r, &[d])
    }

    /// Unit-normalized embeddings of the rankable actions, `[n x d]`.
    pub fn ranked_actions(&self, g: &Graph, p: &Bound, inv: &Inventory) -> Result<Var> {
        let ids: Vec<usize> = (0..inv.actions.len()).collect();
        g.normalize_rows(g.rows(p[self.action_emb], &ids)?)
    }
}

/// Values recorded at one decision for traces.
#[derive(Clone, Debug)]
pub(crate) struct StepVars {
    pub state: Var,
    pub attention: Vec<Option<Var>>,
    pub copy: Option<(Var, Var)>,
    pub user_rows: usize,
    pub system_rows: usize,
}

/// Incremental dialog state for one conversation inside one graph.
pub(crate) struct Tracker {
    h: Var,
    c: Var,
    blocks: Vec<MemoryBlock>,
    users: Vec<Var>,
    systems: Vec<Var>,
    copy_keys: Vec<Var>,
    last_user: Option<(usize, Var)>,
    last_system: Option<usize>,
    user_dangling: bool,
    zero_u: Var,
    zero_s: Var,
    one: Var,
}

impl Tracker {
    pub fn new(g: &Graph, net: &Net, config: &PolicyConfig) -> Self {
        let (h, c) = net.lstm.zero_state(g);
        Self {
            h,
            c,
            blocks: vec![MemoryBlock::default(); net.blocks.len()],
            users: Vec::new(),
            systems: Vec::new(),
            copy_keys: Vec::new(),
            last_user: None,
            last_system: None,
            user_dangling: false,
            zero_u: g.constant(Tensor::zeros(&[config.d_u])),
            zero_s: g.constant(Tensor::zeros(&[config.d_state])),
            one: g.constant(Tensor::vector(vec![1.0])),
        }
    }

    fn append(&mut self, g: &Graph, p: &Bound, net: &Net, kind_filter: impl Fn(BlockKind) -> bool, u: Var, s: Var) -> Result<()> {
        for (i, (kind, att)) in net.blocks.iter().enumerate() {
            if !kind_filter(*kind) {
                continue;
            }
            let row = match kind {
                BlockKind::User => u,
                BlockKind::System => s,
                BlockKind::Concat => g.concat(&[u, s])?,
                BlockKind::TensorDot => {
                    let o = g.outer(u, s)?;
                    let n = g.shape(o).iter().product();
                    g.reshape(o, &[n])?
                }
                BlockKind::TensorFusion => {
                    let o = g.outer(g.concat(&[u, self.one])?, g.concat(&[s, self.one])?)?;
                    let n = g.shape(o).iter().product();
                    g.reshape(o, &[n])?
                }
            };
            let key = att.project(g, p, row)?;
            self.blocks[i].rows.push(row);
            self.blocks[i].keys.push(key);
        }
        Ok(())
    }

    /// Records a turn. Paired blocks get a row per system turn (with the
    /// latest user intent) and a zero-action row for a user turn that was
    /// never answered.
    pub fn observe(&mut self, g: &Graph, p: &Bound, net: &Net, inv: &Inventory, label: &str, is_user: bool) -> Result<()> {
        if is_user {
            let id = inv.intent_slot(label);
            let u = net.embedding_row(g, p, net.intent_emb, id)?;
            if self.user_dangling {
                let prev = self.last_user.map(|(_, v)| v).unwrap_or(self.zero_u);
                let zero_s = self.zero_s;
                self.append(g, p, net, BlockKind::is_paired, prev, zero_s)?;
            }
            self.append(g, p, net, |k| k == BlockKind::User, u, u)?;
            self.users.push(u);
            self.last_user = Some((id, u));
            self.last_system = None;
            self.user_dangling = true;
        } else {
            let id = inv.action_slot(label);
            let s = net.embedding_row(g, p, net.action_emb, id)?;
            let u = self.last_user.map(|(_, v)| v).unwrap_or(self.zero_u);
            self.append(g, p, net, |k| k == BlockKind::System || k.is_paired(), u, s)?;
            if let Some(copy) = &net.copy {
                self.copy_keys.push(copy.att.project(g, p, s)?);
            }
            self.systems.push(s);
            self.last_system = Some(id);
            self.user_dangling = false;
        }
        Ok(())
    }

    #[cfg(test)]
    pub fn block_rows(&self, block: usize) -> &[Var] {
        &self.blocks[block].rows
    }

    /// One state update followed by the embedding used for ranking.
    pub fn decide(&mut self, g: &Graph, p: &Bound, net: &Net, inv: &Inventory, config: &PolicyConfig) -> Result<StepVars> {
        let fv = inv.turn_vector(self.last_user.map(|(i, _)| i), self.last_system);
        let mut inputs = vec![g.constant(fv)];
        let mut attention = Vec::with_capacity(net.blocks.len());
        for ((kind, att), mem) in net.blocks.iter().zip(&self.blocks) {
            let (rows, keys) = mem.recent(config.window);
            if rows.is_empty() {
                inputs.push(g.constant(Tensor::zeros(&[kind.width(config.d_u, config.d_state)])));
                attention.push(None);
                continue;
            }
            let w = g.softmax(att.scores(g, p, self.h, keys)?)?;
            inputs.push(g.vecmat(w, g.stack_rows(rows)?)?);
            attention.push(Some(w));
        }
        let x = if inputs.len() == 1 { inputs[0] } else { g.concat(&inputs)? };
        let (h, c) = net.lstm.step(g, p, x, self.h, self.c)?;
        self.h = h;
        self.c = c;
        let mut state = net.embed.vec(g, p, h)?;
        let mut copy_vars = None;
        if let Some(copy) = &net.copy {
            let start = config.window.map_or(0, |w| self.systems.len().saturating_sub(w));
            let (rows, keys) = (&self.systems[start..], &self.copy_keys[start..]);
            if !rows.is_empty() {
                let n = rows.len();
                let ages: Vec<usize> = (0..n).map(|i| (n - 1 - i).min(config.max_age - 1)).collect();
                let scores = g.add(copy.att.scores(g, p, h, keys)?, g.pick(copy.age.vec(g, p, h)?, &ages)?)?;
                let w = g.sharpen(g.softmax(scores)?, config.gamma)?;
                let copied = g.vecmat(w, g.stack_rows(rows)?)?;
                let gate = g.sigmoid(copy.gate.vec(g, p, h)?);
                let gated = g.reshape(g.outer(gate, copied)?, &[config.d_state])?;
                state = g.add(state, gated)?;
                copy_vars = Some((w, gate));
            }
        }
        Ok(StepVars {
            state,
            attention,
            copy: copy_vars,
            user_rows: self.users.len(),
            system_rows: self.systems.len(),
        })
    }
}
