use serde::{Deserialize, Serialize};

use super::{AdaptError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Weight classes inversely to their frequency.
    pub balanced: bool,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: 8,
            min_samples_leaf: 5,
            balanced: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    /// Samples with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        /// Weighted class distribution `[negative, positive]`.
        probs: [f64; 2],
        samples: usize,
    },
}

/// Binary CART classifier stored as a node arena with the root at 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
    pub params: TreeParams,
    pub width: usize,
}

/// Gini impurity of a weighted two-class distribution.
pub fn gini(weights: [f64; 2]) -> f64 {
    let total = weights[0] + weights[1];
    if total <= 0.0 {
        return 0.0;
    }
    let (p, q) = (weights[0] / total, weights[1] / total);
    1.0 - p * p - q * q
}

/// Gini impurity of unweighted labels.
pub fn gini_of_labels(labels: &[bool]) -> f64 {
    let pos = labels.iter().filter(|l| **l).count() as f64;
    gini([labels.len() as f64 - pos, pos])
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [bool],
    class_w: [f64; 2],
    params: TreeParams,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn dist(&self, idx: &[usize]) -> [f64; 2] {
        let mut d = [0.0; 2];
        for &i in idx {
            let c = usize::from(self.y[i]);
            d[c] += self.class_w[c];
        }
        d
    }

    fn leaf(&mut self, idx: &[usize]) -> usize {
        let d = self.dist(idx);
        let total = d[0] + d[1];
        let probs = if total > 0.0 { [d[0] / total, d[1] / total] } else { [0.5, 0.5] };
        self.nodes.push(Node::Leaf {
            probs,
            samples: idx.len(),
        });
        self.nodes.len() - 1
    }

    /// Best `(feature, threshold)` by weighted impurity decrease; the first
    /// feature and the lowest threshold win ties.
    fn best_split(&self, idx: &[usize]) -> Option<(usize, f64)> {
        let parent = self.dist(idx);
        let total = parent[0] + parent[1];
        let base = gini(parent);
        let min_leaf = self.params.min_samples_leaf.max(1);
        let mut best: Option<(f64, usize, f64)> = None;
        let width = self.x[idx[0]].len();
        let mut order = idx.to_vec();
        for f in 0..width {
            order.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]));
            let mut left = [0.0; 2];
            for k in 0..order.len() - 1 {
                let i = order[k];
                let c = usize::from(self.y[i]);
                left[c] += self.class_w[c];
                let (v, next) = (self.x[i][f], self.x[order[k + 1]][f]);
                if v == next || k + 1 < min_leaf || order.len() - k - 1 < min_leaf {
                    continue;
                }
                let right = [parent[0] - left[0], parent[1] - left[1]];
                let wl = left[0] + left[1];
                let wr = right[0] + right[1];
                let gain = base - (wl * gini(left) + wr * gini(right)) / total;
                if gain > 1e-12 && best.is_none_or(|(g, _, _)| gain > g + 1e-12) {
                    best = Some((gain, f, (v + next) / 2.0));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }

    fn grow(&mut self, idx: &[usize], depth: usize) -> usize {
        let d = self.dist(idx);
        if depth >= self.params.max_depth || d[0] == 0.0 || d[1] == 0.0 || idx.len() < 2 * self.params.min_samples_leaf.max(1) {
            return self.leaf(idx);
        }
        let Some((feature, threshold)) = self.best_split(idx) else {
            return self.leaf(idx);
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x[i][feature] <= threshold);
        let at = self.nodes.len();
        self.nodes.push(Node::Split {
            feature,
            threshold,
            left: 0,
            right: 0,
        });
        let left = self.grow(&l, depth + 1);
        let right = self.grow(&r, depth + 1);
        self.nodes[at] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        at
    }
}

impl DecisionTree {
    /// Greedy CART growth. Single-class data yields a one-leaf tree.
    pub fn fit(x: &[Vec<f64>], y: &[bool], params: TreeParams) -> Result<Self> {
        if x.is_empty() || x.len() != y.len() {
            return Err(AdaptError::Argument(format!("{} rows but {} labels", x.len(), y.len())));
        }
        let width = x[0].len();
        if x.iter().any(|r| r.len() != width) {
            return Err(AdaptError::Argument("rows differ in width".into()));
        }
        if params.max_depth == 0 {
            return Err(AdaptError::Argument("max_depth must be positive".into()));
        }
        let pos = y.iter().filter(|v| **v).count() as f64;
        let neg = y.len() as f64 - pos;
        let class_w = if params.balanced && pos > 0.0 && neg > 0.0 {
            let n = y.len() as f64;
            [n / (2.0 * neg), n / (2.0 * pos)]
        } else {
            [1.0, 1.0]
        };
        let mut b = Builder {
            x,
            y,
            class_w,
            params,
            nodes: Vec::new(),
        };
        let idx: Vec<usize> = (0..x.len()).collect();
        b.grow(&idx, 0);
        Ok(Self {
            nodes: b.nodes,
            params,
            width,
        })
    }

    fn leaf_of(&self, x: &[f64]) -> (&Node, usize) {
        let mut at = 0;
        let mut depth = 0;
        loop {
            match &self.nodes[at] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x[*feature] <= *threshold { *left } else { *right };
                    depth += 1;
                }
                leaf => return (leaf, depth),
            }
        }
    }

    /// Probability of the positive class.
    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        match self.leaf_of(x).0 {
            Node::Leaf { probs, .. } => probs[1],
            Node::Split { .. } => unreachable!("leaf_of stops at leaves"),
        }
    }

    pub fn predict(&self, x: &[f64]) -> bool {
        self.predict_proba(x) > 0.5
    }

    /// Number of splits on the path of `x`.
    pub fn path_length(&self, x: &[f64]) -> usize {
        self.leaf_of(x).1
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}
