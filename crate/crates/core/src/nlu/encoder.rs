use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::nn::{Dense, LstmCell};
use crate::tensor::{Bound, Graph, ParamId, ParamStore, Result, Tensor, Var};

use super::NluConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    Feedforward,
    Lstm,
    Bilstm,
    Transformer,
}

impl EncoderKind {
    pub fn is_sequence(self) -> bool {
        self != EncoderKind::Feedforward
    }
}

#[derive(Clone, Debug)]
struct Head {
    wq: ParamId,
    wk: ParamId,
    wv: ParamId,
    wo: ParamId,
}

#[derive(Clone, Debug)]
struct TransformerBlock {
    pos: ParamId,
    heads: Vec<Head>,
    ff1: Dense,
    ff2: Dense,
}

/// Parameter layout of one utterance encoder plus the intent table.
#[derive(Clone, Debug)]
pub(crate) struct Encoder {
    kind: EncoderKind,
    sentence: Option<(Dense, Dense)>,
    tokens: Option<ParamId>,
    fwd: Option<LstmCell>,
    bwd: Option<LstmCell>,
    block: Option<TransformerBlock>,
    proj: Option<Dense>,
    pub intents: ParamId,
    oov: usize,
    max_len: usize,
    uniform_attention: bool,
}

pub(crate) const LN_EPS: f64 = 1e-5;

impl Encoder {
    /// Registers parameters in a fixed order so a checkpoint can be matched
    /// against a freshly built layout.
    pub fn build<R: Rng>(
        config: &NluConfig,
        sentence_width: usize,
        sequence_width: usize,
        num_intents: usize,
        store: &mut ParamStore,
        rng: &mut R,
    ) -> Self {
        let d = config.d_embed;
        let sentence = (sentence_width > 0).then(|| {
            (
                Dense::new(store, "sent.l1", sentence_width, config.hidden, rng),
                Dense::new(store, "sent.l2", config.hidden, d, rng),
            )
        });
        let mut enc = Self {
            kind: config.encoder,
            sentence,
            tokens: None,
            fwd: None,
            bwd: None,
            block: None,
            proj: None,
            intents: ParamId(0),
            oov: sequence_width.saturating_sub(1),
            max_len: config.max_len,
            uniform_attention: config.uniform_attention,
        };
        let t = config.token_dim;
        match config.encoder {
            EncoderKind::Feedforward => {}
            EncoderKind::Lstm => {
                enc.tokens = Some(store.xavier("tok.emb", &[sequence_width, t], rng));
                enc.fwd = Some(LstmCell::new(store, "lstm.fwd", t, config.rnn_hidden, rng));
                enc.proj = Some(Dense::new(store, "proj", config.rnn_hidden, d, rng));
            }
            EncoderKind::Bilstm => {
                enc.tokens = Some(store.xavier("tok.emb", &[sequence_width, t], rng));
                enc.fwd = Some(LstmCell::new(store, "lstm.fwd", t, config.rnn_hidden, rng));
                enc.bwd = Some(LstmCell::new(store, "lstm.bwd", t, config.rnn_hidden, rng));
                enc.proj = Some(Dense::new(store, "proj", 2 * config.rnn_hidden, d, rng));
            }
            EncoderKind::Transformer => {
                let m = config.model_dim;
                let dh = m / config.heads;
                enc.tokens = Some(store.xavier("tok.emb", &[sequence_width, m], rng));
                let pos = store.xavier("tf.pos", &[config.max_len, m], rng);
                let heads = (0..config.heads)
                    .map(|h| Head {
                        wq: store.xavier(format!("tf.h{h}.wq"), &[m, dh], rng),
                        wk: store.xavier(format!("tf.h{h}.wk"), &[m, dh], rng),
                        wv: store.xavier(format!("tf.h{h}.wv"), &[m, dh], rng),
                        wo: store.xavier(format!("tf.h{h}.wo"), &[dh, m], rng),
                    })
                    .collect();
                enc.block = Some(TransformerBlock {
                    pos,
                    heads,
                    ff1: Dense::new(store, "tf.ff1", m, 2 * m, rng),
                    ff2: Dense::new(store, "tf.ff2", 2 * m, m, rng),
                });
                enc.proj = Some(Dense::new(store, "proj", m, d, rng));
            }
        }
        enc.intents = store.xavier("intent.emb", &[num_intents, d], rng);
        enc
    }

    fn token_ids(&self, ids: &[usize]) -> Vec<usize> {
        if ids.is_empty() {
            return vec![self.oov];
        }
        ids.iter().take(self.max_len).copied().collect()
    }

    fn encode_sequence(&self, g: &Graph, p: &Bound, ids: &[usize]) -> Result<Var> {
        let ids = self.token_ids(ids);
        let x = g.rows(p[self.tokens.expect("sequence encoder")], &ids)?;
        let proj = self.proj.expect("sequence encoder");
        let h = match self.kind {
            EncoderKind::Lstm => self.fwd.unwrap().run(g, p, x, false)?,
            EncoderKind::Bilstm => {
                let f = self.fwd.unwrap().run(g, p, x, false)?;
                let b = self.bwd.unwrap().run(g, p, x, true)?;
                g.concat(&[f, b])?
            }
            EncoderKind::Transformer => self.transformer(g, p, x, ids.len())?,
            EncoderKind::Feedforward => unreachable!("no sequence path"),
        };
        proj.vec(g, p, h)
    }

    fn transformer(&self, g: &Graph, p: &Bound, x: Var, t: usize) -> Result<Var> {
        let blk = self.block.as_ref().expect("transformer block");
        let positions: Vec<usize> = (0..t).collect();
        let x = g.add(x, g.rows(p[blk.pos], &positions)?)?;
        let mut attn: Option<Var> = None;
        for head in &blk.heads {
            let v = g.matmul(x, p[head.wv])?;
            let a = if self.uniform_attention {
                g.constant(Tensor::new(vec![t, t], vec![1.0 / t as f64; t * t])?)
            } else {
                let q = g.matmul(x, p[head.wq])?;
                let k = g.matmul(x, p[head.wk])?;
                let dh = g.shape(q)[1] as f64;
                let s = g.scale(g.matmul(q, g.transpose(k)?)?, 1.0 / dh.sqrt());
                g.softmax_rows(s)?
            };
            let o = g.matmul(g.matmul(a, v)?, p[head.wo])?;
            attn = Some(match attn {
                Some(acc) => g.add(acc, o)?,
                None => o,
            });
        }
        let x1 = g.layer_norm_rows(g.add(x, attn.expect("at least one head"))?, LN_EPS)?;
        let f = blk.ff2.rows(g, p, g.relu(blk.ff1.rows(g, p, x1)?))?;
        let x2 = g.layer_norm_rows(g.add(x1, f)?, LN_EPS)?;
        g.mean_rows(x2)
    }

    /// Encodes a batch: `sentences` is `[b x sentence_width]` (ignored when
    /// the width is zero), `sequences` holds one id list per row.
    pub fn encode_batch(&self, g: &Graph, p: &Bound, sentences: &Tensor, sequences: &[&[usize]]) -> Result<Var> {
        let sent = match &self.sentence {
            Some((l1, l2)) => {
                let x = g.constant(sentences.clone());
                Some(l2.rows(g, p, g.relu(l1.rows(g, p, x)?))?)
            }
            None => None,
        };
        if !self.kind.is_sequence() {
            return Ok(sent.expect("feedforward encoder has sentence features"));
        }
        let rows = sequences
            .iter()
            .map(|ids| self.encode_sequence(g, p, ids))
            .collect::<Result<Vec<_>>>()?;
        let seq = g.stack_rows(&rows)?;
        match sent {
            Some(s) => g.add(s, seq),
            None => Ok(seq),
        }
    }
}
