use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Graph, Result, Tensor, TensorError, Var};

pub const CHECKPOINT_FORMAT: &str = "dialog-params";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Index of a parameter inside a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamId(pub usize);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedParam {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// Ordered collection of named trainable tensors.
///
/// Serializes as a versioned container; `f64` values survive a JSON round
/// trip bit for bit.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

#[derive(Serialize, Deserialize)]
struct Container {
    format: String,
    version: u32,
    params: Vec<NamedParam>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Total number of scalar weights.
    pub fn numel(&self) -> usize {
        self.tensors.iter().map(Tensor::numel).sum()
    }

    pub fn add(&mut self, name: impl Into<String>, t: Tensor) -> ParamId {
        let name = name.into();
        debug_assert!(!self.names.contains(&name), "duplicate parameter {name}");
        self.names.push(name);
        self.tensors.push(t);
        ParamId(self.tensors.len() - 1)
    }

    pub fn zeros(&mut self, name: impl Into<String>, shape: &[usize]) -> ParamId {
        self.add(name, Tensor::zeros(shape))
    }

    /// Xavier/Glorot uniform: `U(-a, a)` with `a = sqrt(6 / (fan_in + fan_out))`.
    /// Vectors use `fan_in = 1`.
    pub fn xavier<R: Rng>(&mut self, name: impl Into<String>, shape: &[usize], rng: &mut R) -> ParamId {
        let (fan_in, fan_out) = match shape {
            [n] => (1, *n),
            [a, b] => (*a, *b),
            _ => (shape.iter().product(), 1),
        };
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| rng.gen_range(-bound..bound)).collect();
        self.add(name, Tensor::new(shape.to_vec(), data).expect("shape matches data"))
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    /// Every weight concatenated in store order.
    pub fn flatten(&self) -> Tensor {
        Tensor::vector(self.tensors.iter().flat_map(|t| t.data().iter().copied()).collect())
    }

    /// Places every parameter on `g` as a gradient-tracking leaf.
    pub fn bind(&self, g: &Graph) -> Bound {
        Bound(self.tensors.iter().map(|t| g.param(t.clone())).collect())
    }

    /// Places every parameter on `g` as a constant.
    pub fn bind_frozen(&self, g: &Graph) -> Bound {
        Bound(self.tensors.iter().map(|t| g.constant(t.clone())).collect())
    }

    /// Carves the parameters out of one flat vector already on `g`
    /// (layout of [`ParamStore::flatten`]), so a single input covers every
    /// weight.
    pub fn bind_flat(&self, g: &Graph, flat: Var) -> Result<Bound> {
        let mut off = 0;
        let mut vars = Vec::with_capacity(self.tensors.len());
        for t in &self.tensors {
            let piece = g.slice(flat, off, t.numel())?;
            vars.push(g.reshape(piece, t.shape())?);
            off += t.numel();
        }
        Ok(Bound(vars))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| TensorError::Format(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| TensorError::Format(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|source| TensorError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|source| TensorError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&s)
    }
}

impl Serialize for ParamStore {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let c = Container {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            params: self
                .names
                .iter()
                .zip(&self.tensors)
                .map(|(n, t)| NamedParam {
                    name: n.clone(),
                    shape: t.shape().to_vec(),
                    data: t.data().to_vec(),
                })
                .collect(),
        };
        c.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ParamStore {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let c = Container::deserialize(d)?;
        if c.format != CHECKPOINT_FORMAT {
            return Err(D::Error::custom(format!("unknown checkpoint format {:?}", c.format)));
        }
        if c.version != CHECKPOINT_VERSION {
            return Err(D::Error::custom(format!("unsupported checkpoint version {}", c.version)));
        }
        let mut store = ParamStore::new();
        for p in c.params {
            let t = Tensor::new(p.shape, p.data).map_err(|e| D::Error::custom(format!("{}: {e}", p.name)))?;
            if store.find(&p.name).is_some() {
                return Err(D::Error::custom(format!("duplicate parameter {}", p.name)));
            }
            store.add(p.name, t);
        }
        Ok(store)
    }
}

/// Graph handles for the parameters of one store, indexed by [`ParamId`].
#[derive(Clone, Debug)]
pub struct Bound(Vec<Var>);

impl Bound {
    pub fn get(&self, id: ParamId) -> Var {
        self.0[id.0]
    }

    pub fn vars(&self) -> &[Var] {
        &self.0
    }

    /// Reads each parameter's gradient after `g.backward`; parameters that
    /// did not influence the root get `None`.
    pub fn grads(&self, g: &Graph) -> Vec<Option<Tensor>> {
        self.0.iter().map(|v| g.grad(*v)).collect()
    }
}

impl std::ops::Index<ParamId> for Bound {
    type Output = Var;

    fn index(&self, id: ParamId) -> &Var {
        &self.0[id.0]
    }
}
