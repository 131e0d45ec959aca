//! CART classification trees used as single-tree surrogates of the rule engine.
//!
//! Splits are binary on one feature: a row goes left iff `value <= threshold`.
//! The same predicate drives prediction and Shapley path logic.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{FeatureSchema, FeatureVector, SchemaError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeError {
    #[error("empty training set")]
    EmptyInput,
    #[error("row {row} has {got} values, expected {expected}")]
    InconsistentLength { row: usize, expected: usize, got: usize },
    #[error("{rows} rows but {labels} labels")]
    LabelCountMismatch { rows: usize, labels: usize },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("invalid train config: {0}")]
    InvalidConfig(String),
    #[error("malformed tree: {0}")]
    Malformed(String),
    #[error(transparent)]
    Schema(#[from] SchemaError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_gain: f64,
    pub seed: u64,
    /// Fraction of rows to subsample before fitting; `None` uses every row.
    pub subsample: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { max_depth: 5, min_samples_split: 4, min_gain: 1e-7, seed: 42, subsample: None }
    }
}

impl TrainConfig {
    /// Grow until every leaf is pure or cannot be split.
    pub fn unbounded() -> Self {
        Self { max_depth: usize::MAX, min_samples_split: 2, min_gain: 0.0, ..Self::default() }
    }

    pub fn with_max_depth(self, max_depth: usize) -> Self {
        Self { max_depth, ..self }
    }

    pub fn validate(&self) -> Result<(), TreeError> {
        if self.max_depth < 1 {
            return Err(TreeError::InvalidConfig("max_depth must be >= 1".into()));
        }
        if self.min_samples_split < 2 {
            return Err(TreeError::InvalidConfig("min_samples_split must be >= 2".into()));
        }
        if self.min_gain.is_nan() || self.min_gain < 0.0 {
            return Err(TreeError::InvalidConfig("min_gain must be >= 0".into()));
        }
        if let Some(f) = self.subsample {
            if !(f > 0.0 && f <= 1.0) {
                return Err(TreeError::InvalidConfig("subsample must be in (0, 1]".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Node {
    Split { feature_index: usize, threshold: f64, left: usize, right: usize, cover: u64 },
    Leaf { class_counts: Vec<u64>, cover: u64 },
}

impl Node {
    pub fn cover(&self) -> u64 {
        match self {
            Node::Split { cover, .. } | Node::Leaf { cover, .. } => *cover,
        }
    }
}

#[derive(Deserialize)]
struct RawTree {
    schema: FeatureSchema,
    classes: Vec<String>,
    nodes: Vec<Node>,
}

/// A fitted classification tree; `nodes` are stored in preorder with the root at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTree")]
pub struct DecisionTree {
    schema: FeatureSchema,
    classes: Vec<String>,
    nodes: Vec<Node>,
}

impl TryFrom<RawTree> for DecisionTree {
    type Error = TreeError;

    fn try_from(raw: RawTree) -> Result<Self, Self::Error> {
        DecisionTree::from_parts(raw.schema, raw.classes, raw.nodes)
    }
}

pub fn gini(counts: &[u64]) -> f64 {
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

/// Impurity decrease of splitting `parent` into `left` and the remainder; never negative.
pub fn gini_gain(parent: &[u64], left: &[u64]) -> f64 {
    let right: Vec<u64> = parent.iter().zip(left).map(|(p, l)| p - l).collect();
    let n = parent.iter().sum::<u64>() as f64;
    let nl = left.iter().sum::<u64>() as f64;
    let nr = n - nl;
    (gini(parent) - nl / n * gini(left) - nr / n * gini(&right)).max(0.0)
}

struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
}

struct Builder<'a> {
    rows: &'a [FeatureVector],
    labels: &'a [usize],
    n_classes: usize,
    n_features: usize,
    config: &'a TrainConfig,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn counts(&self, idx: &[usize]) -> Vec<u64> {
        let mut c = vec![0u64; self.n_classes];
        for &i in idx {
            c[self.labels[i]] += 1;
        }
        c
    }

    fn best_split(&self, idx: &[usize], parent: &[u64]) -> Option<Split> {
        let mut best: Option<Split> = None;
        let mut order: Vec<usize> = idx.to_vec();
        for f in 0..self.n_features {
            order.sort_by(|&a, &b| self.rows[a][f].total_cmp(&self.rows[b][f]));
            let mut left = vec![0u64; self.n_classes];
            for w in 0..order.len() - 1 {
                left[self.labels[order[w]]] += 1;
                let lo = self.rows[order[w]][f];
                let hi = self.rows[order[w + 1]][f];
                if lo == hi {
                    continue;
                }
                let mid = lo + (hi - lo) / 2.0;
                let threshold = if mid < hi { mid } else { lo };
                let gain = gini_gain(parent, &left);
                if best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(Split { feature: f, threshold, gain });
                }
            }
        }
        best
    }

    fn grow(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let counts = self.counts(idx);
        let cover = idx.len() as u64;
        let me = self.nodes.len();
        self.nodes.push(Node::Leaf { class_counts: counts.clone(), cover });

        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || depth >= self.config.max_depth || idx.len() < self.config.min_samples_split {
            return me;
        }
        let Some(split) = self.best_split(idx, &counts) else {
            return me;
        };
        if split.gain < self.config.min_gain {
            return me;
        }

        let f = split.feature;
        let t = split.threshold;
        let mut boundary = 0;
        for k in 0..idx.len() {
            if self.rows[idx[k]][f] <= t {
                idx.swap(k, boundary);
                boundary += 1;
            }
        }
        let (l, r) = idx.split_at_mut(boundary);
        // keep original relative order inside each side for deterministic sorts
        l.sort_unstable();
        r.sort_unstable();
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[me] = Node::Split { feature_index: f, threshold: t, left, right, cover };
        me
    }
}

/// Greedy CART on Gini gain.
///
/// Candidate thresholds are midpoints between consecutive distinct values; the
/// best split is the first maximum when scanning features and thresholds in
/// ascending order.
pub fn fit(
    schema: &FeatureSchema,
    rows: &[FeatureVector],
    labels: &[usize],
    classes: Vec<String>,
    config: &TrainConfig,
) -> Result<DecisionTree, TreeError> {
    config.validate()?;
    if rows.is_empty() {
        return Err(TreeError::EmptyInput);
    }
    if rows.len() != labels.len() {
        return Err(TreeError::LabelCountMismatch { rows: rows.len(), labels: labels.len() });
    }
    for (row, v) in rows.iter().enumerate() {
        if v.len() != schema.len() {
            return Err(TreeError::InconsistentLength { row, expected: schema.len(), got: v.len() });
        }
    }
    if classes.is_empty() {
        return Err(TreeError::InvalidConfig("at least one class is required".into()));
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= classes.len()) {
        return Err(TreeError::LabelOutOfRange { label, classes: classes.len() });
    }

    let mut idx: Vec<usize> = match config.subsample {
        Some(frac) if frac < 1.0 => {
            let k = ((rows.len() as f64 * frac).ceil() as usize).max(1);
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let mut picked = rand::seq::index::sample(&mut rng, rows.len(), k).into_vec();
            picked.sort_unstable();
            picked
        }
        _ => (0..rows.len()).collect(),
    };

    let mut builder =
        Builder { rows, labels, n_classes: classes.len(), n_features: schema.len(), config, nodes: Vec::new() };
    builder.grow(&mut idx, 0);
    Ok(DecisionTree { schema: schema.clone(), classes, nodes: builder.nodes })
}

impl DecisionTree {
    /// Assemble a tree from parts, checking structural invariants.
    pub fn from_parts(schema: FeatureSchema, classes: Vec<String>, nodes: Vec<Node>) -> Result<Self, TreeError> {
        let tree = Self { schema, classes, nodes };
        tree.check_structure()?;
        Ok(tree)
    }

    fn check_structure(&self) -> Result<(), TreeError> {
        let bad = |m: String| Err(TreeError::Malformed(m));
        if self.nodes.is_empty() {
            return bad("no nodes".into());
        }
        if self.classes.is_empty() {
            return bad("no classes".into());
        }
        // preorder: every node's children follow it; each node referenced exactly once
        let mut referenced = vec![false; self.nodes.len()];
        referenced[0] = true;
        for (i, node) in self.nodes.iter().enumerate() {
            match node {
                Node::Split { feature_index, threshold, left, right, cover } => {
                    if *feature_index >= self.schema.len() || !threshold.is_finite() {
                        return bad(format!("node {i}: bad split"));
                    }
                    for &c in [left, right] {
                        if c <= i || c >= self.nodes.len() || referenced[c] {
                            return bad(format!("node {i}: bad child {c}"));
                        }
                        referenced[c] = true;
                    }
                    if self.nodes[*left].cover() + self.nodes[*right].cover() != *cover {
                        return bad(format!("node {i}: cover not conserved"));
                    }
                }
                Node::Leaf { class_counts, cover } => {
                    if class_counts.len() != self.classes.len() {
                        return bad(format!(
                            "node {i}: {} counts for {} classes",
                            class_counts.len(),
                            self.classes.len()
                        ));
                    }
                    if class_counts.iter().sum::<u64>() != *cover || *cover == 0 {
                        return bad(format!("node {i}: counts do not sum to cover"));
                    }
                }
            }
        }
        if referenced.iter().any(|r| !r) {
            return bad("unreachable nodes".into());
        }
        Ok(())
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == label)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }

    /// Index of the leaf reached by `x`. Caller guarantees the length.
    pub(crate) fn leaf_of(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split { feature_index, threshold, left, right, .. } => {
                    i = if x[*feature_index] <= *threshold { *left } else { *right }
                }
            }
        }
    }

    /// Normalized class counts of leaf `leaf`.
    pub(crate) fn leaf_proba(&self, leaf: usize) -> Vec<f64> {
        match &self.nodes[leaf] {
            Node::Leaf { class_counts, cover } => class_counts.iter().map(|&c| c as f64 / *cover as f64).collect(),
            Node::Split { .. } => unreachable!("not a leaf"),
        }
    }

    pub(crate) fn leaf_value(&self, leaf: usize, class: usize) -> f64 {
        match &self.nodes[leaf] {
            Node::Leaf { class_counts, cover } => class_counts[class] as f64 / *cover as f64,
            Node::Split { .. } => unreachable!("not a leaf"),
        }
    }

    pub(crate) fn check_input(&self, x: &FeatureVector) -> Result<(), TreeError> {
        if x.len() != self.schema.len() {
            return Err(SchemaError::LengthMismatch { expected: self.schema.len(), got: x.len() }.into());
        }
        Ok(())
    }

    pub fn predict_proba(&self, x: &FeatureVector) -> Result<Vec<f64>, TreeError> {
        self.check_input(x)?;
        Ok(self.leaf_proba(self.leaf_of(x.values())))
    }

    /// Argmax class index; ties go to the lowest index.
    pub fn predict_class(&self, x: &FeatureVector) -> Result<usize, TreeError> {
        self.check_input(x)?;
        let leaf = self.leaf_of(x.values());
        let Node::Leaf { class_counts, .. } = &self.nodes[leaf] else { unreachable!() };
        let mut best = 0;
        for (k, &c) in class_counts.iter().enumerate() {
            if c > class_counts[best] {
                best = k;
            }
        }
        Ok(best)
    }

    pub fn predict_label(&self, x: &FeatureVector) -> Result<&str, TreeError> {
        Ok(&self.classes[self.predict_class(x)?])
    }
}

/// Fraction of rows whose predicted class equals the given label.
pub fn fidelity(tree: &DecisionTree, rows: &[FeatureVector], labels: &[usize]) -> Result<f64, TreeError> {
    if rows.is_empty() {
        return Err(TreeError::EmptyInput);
    }
    if rows.len() != labels.len() {
        return Err(TreeError::LabelCountMismatch { rows: rows.len(), labels: labels.len() });
    }
    let mut hits = 0usize;
    for (x, &y) in rows.iter().zip(labels) {
        if tree.predict_class(x)? == y {
            hits += 1;
        }
    }
    Ok(hits as f64 / rows.len() as f64)
}
