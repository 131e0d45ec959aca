//! Exact interventional Shapley values for [`DecisionTree`] predictions.
//!
//! The value of a coalition `S` is the mean, over background rows `b`, of the
//! target-class probability at the composite point that takes `x` on `S` and
//! `b` elsewhere. Two independent routes compute the same attribution:
//!
//! * [`shap_bruteforce`] enumerates all `2^F` coalitions.
//! * [`shap_tree`] walks root-to-leaf paths once per background row. A leaf is
//!   reached by the composite point iff every feature in `X` (paths only `x`
//!   can follow) is in `S` and every feature in `B` (paths only `b` can follow)
//!   is not. That game has the closed form
//!   `phi_i = v (|X|-1)! |B|! / (|X|+|B|)!` for `i` in `X` and
//!   `phi_i = -v |X|! (|B|-1)! / (|X|+|B|)!` for `i` in `B`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{decode_value, FeatureSchema, FeatureVector, RawValue, SchemaError};
use crate::tree::{DecisionTree, Node, TreeError};

/// Coalition enumeration limit for [`shap_bruteforce`].
pub const MAX_BRUTEFORCE_FEATURES: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShapError {
    #[error("brute-force enumeration supports at most {MAX_BRUTEFORCE_FEATURES} features, got {0}")]
    TooManyFeatures(usize),
    #[error("background set is empty")]
    EmptyBackground,
    #[error("target class {target} out of range for {classes} classes")]
    UnknownClass { target: usize, classes: usize },
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

/// Reference distribution the coalition value function averages over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<FeatureVector>", into = "Vec<FeatureVector>")]
pub struct BackgroundSet {
    rows: Vec<FeatureVector>,
}

impl TryFrom<Vec<FeatureVector>> for BackgroundSet {
    type Error = ShapError;
    fn try_from(rows: Vec<FeatureVector>) -> Result<Self, Self::Error> {
        Self::new(rows)
    }
}

impl From<BackgroundSet> for Vec<FeatureVector> {
    fn from(b: BackgroundSet) -> Self {
        b.rows
    }
}

impl BackgroundSet {
    pub fn new(rows: Vec<FeatureVector>) -> Result<Self, ShapError> {
        if rows.is_empty() {
            return Err(ShapError::EmptyBackground);
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[FeatureVector] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureAttribution {
    /// v(empty set): mean target probability over the background.
    pub base_value: f64,
    pub phis: Vec<f64>,
    pub model_output: f64,
    pub target_class: String,
    /// The explained instance, kept so entries can show raw values.
    pub instance: FeatureVector,
}

impl FeatureAttribution {
    /// `|base + sum(phi) - output|`.
    pub fn efficiency_gap(&self) -> f64 {
        (self.base_value + self.phis.iter().sum::<f64>() - self.model_output).abs()
    }
}

fn check_inputs(
    tree: &DecisionTree,
    x: &FeatureVector,
    background: &BackgroundSet,
    target_class: usize,
) -> Result<(), ShapError> {
    tree.check_input(x)?;
    for b in background.rows() {
        tree.check_input(b)?;
    }
    if target_class >= tree.classes().len() {
        return Err(ShapError::UnknownClass { target: target_class, classes: tree.classes().len() });
    }
    Ok(())
}

fn finish(
    tree: &DecisionTree,
    x: &FeatureVector,
    target_class: usize,
    base_value: f64,
    phis: Vec<f64>,
) -> FeatureAttribution {
    FeatureAttribution {
        base_value,
        phis,
        model_output: tree.leaf_value(tree.leaf_of(x.values()), target_class),
        target_class: tree.classes()[target_class].clone(),
        instance: x.clone(),
    }
}

/// Shapley weight `|S|! (F-|S|-1)! / F!` as `1 / (F * C(F-1, |S|))`.
fn coalition_weights(f: usize) -> Vec<f64> {
    let mut binom = 1.0f64;
    (0..f)
        .map(|s| {
            if s > 0 {
                binom = binom * (f - s) as f64 / s as f64;
            }
            1.0 / (f as f64 * binom)
        })
        .collect()
}

/// Exact Shapley values by enumerating every coalition.
pub fn shap_bruteforce(
    tree: &DecisionTree,
    x: &FeatureVector,
    background: &BackgroundSet,
    target_class: usize,
) -> Result<FeatureAttribution, ShapError> {
    let f = tree.schema().len();
    if f > MAX_BRUTEFORCE_FEATURES {
        return Err(ShapError::TooManyFeatures(f));
    }
    check_inputs(tree, x, background, target_class)?;

    let n_coalitions = 1usize << f;
    let mut value = vec![0.0f64; n_coalitions];
    let mut composite = vec![0.0f64; f];
    for (mask, v) in value.iter_mut().enumerate() {
        let mut acc = 0.0;
        for b in background.rows() {
            for (j, c) in composite.iter_mut().enumerate() {
                *c = if mask & (1 << j) != 0 { x[j] } else { b[j] };
            }
            acc += tree.leaf_value(tree.leaf_of(&composite), target_class);
        }
        *v = acc / background.len() as f64;
    }

    let weights = coalition_weights(f);
    let mut phis = vec![0.0f64; f];
    for (i, phi) in phis.iter_mut().enumerate() {
        let bit = 1usize << i;
        for mask in 0..n_coalitions {
            if mask & bit == 0 {
                let size = mask.count_ones() as usize;
                *phi += weights[size] * (value[mask | bit] - value[mask]);
            }
        }
    }
    Ok(finish(tree, x, target_class, value[0], phis))
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Side {
    /// Both `x` and `b` follow every split on this feature seen so far.
    Either,
    /// Only `x` does: the feature must come from `x`.
    XOnly,
    /// Only `b` does: the feature must come from the background row.
    BOnly,
}

struct PathWalk<'a> {
    tree: &'a DecisionTree,
    x: &'a [f64],
    b: &'a [f64],
    target: usize,
    side: Vec<Side>,
    x_feats: Vec<usize>,
    b_feats: Vec<usize>,
    /// `fact[n] = n!`
    fact: &'a [f64],
    phis: &'a mut [f64],
}

impl PathWalk<'_> {
    fn visit(&mut self, node: usize) {
        match &self.tree.nodes()[node] {
            Node::Leaf { .. } => self.credit_leaf(node),
            Node::Split { feature_index, threshold, left, right, .. } => {
                let j = *feature_index;
                let x_left = self.x[j] <= *threshold;
                let b_left = self.b[j] <= *threshold;
                let prev = self.side[j];
                for (child, go_left) in [(*left, true), (*right, false)] {
                    let x_ok = prev != Side::BOnly && x_left == go_left;
                    let b_ok = prev != Side::XOnly && b_left == go_left;
                    let next = match (x_ok, b_ok) {
                        (true, true) => Side::Either,
                        (true, false) => Side::XOnly,
                        (false, true) => Side::BOnly,
                        (false, false) => continue,
                    };
                    let pushed = if prev == Side::Either && next != Side::Either {
                        match next {
                            Side::XOnly => self.x_feats.push(j),
                            _ => self.b_feats.push(j),
                        }
                        true
                    } else {
                        false
                    };
                    self.side[j] = next;
                    self.visit(child);
                    self.side[j] = prev;
                    if pushed {
                        match next {
                            Side::XOnly => self.x_feats.pop(),
                            _ => self.b_feats.pop(),
                        };
                    }
                }
            }
        }
    }

    fn credit_leaf(&mut self, leaf: usize) {
        let v = self.tree.leaf_value(leaf, self.target);
        if v == 0.0 {
            return;
        }
        let a = self.x_feats.len();
        let c = self.b_feats.len();
        if a + c == 0 {
            return;
        }
        let total = self.fact[a + c];
        if a > 0 {
            let w = v * self.fact[a - 1] * self.fact[c] / total;
            for &i in &self.x_feats {
                self.phis[i] += w;
            }
        }
        if c > 0 {
            let w = v * self.fact[a] * self.fact[c - 1] / total;
            for &i in &self.b_feats {
                self.phis[i] -= w;
            }
        }
    }
}

/// Exact Shapley values by path enumeration; agrees with [`shap_bruteforce`].
pub fn shap_tree(
    tree: &DecisionTree,
    x: &FeatureVector,
    background: &BackgroundSet,
    target_class: usize,
) -> Result<FeatureAttribution, ShapError> {
    check_inputs(tree, x, background, target_class)?;
    let f = tree.schema().len();

    let mut fact = vec![1.0f64; f + 1];
    for n in 1..=f {
        fact[n] = fact[n - 1] * n as f64;
    }

    let mut phis = vec![0.0f64; f];
    let mut row_phis = vec![0.0f64; f];
    let mut base = 0.0;
    for b in background.rows() {
        row_phis.iter_mut().for_each(|p| *p = 0.0);
        let mut walk = PathWalk {
            tree,
            x: x.values(),
            b: b.values(),
            target: target_class,
            side: vec![Side::Either; f],
            x_feats: Vec::new(),
            b_feats: Vec::new(),
            fact: &fact,
            phis: &mut row_phis,
        };
        walk.visit(0);
        for (p, r) in phis.iter_mut().zip(&row_phis) {
            *p += r;
        }
        base += tree.leaf_value(tree.leaf_of(b.values()), target_class);
    }
    let n = background.len() as f64;
    phis.iter_mut().for_each(|p| *p /= n);
    Ok(finish(tree, x, target_class, base / n, phis))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub feature: String,
    pub raw_value: RawValue,
    pub phi: f64,
}

/// Top-`k` features by `|phi|` descending, ties by schema index.
pub fn rank_features(
    attr: &FeatureAttribution,
    schema: &FeatureSchema,
    k: usize,
) -> Result<Vec<RankedFeature>, SchemaError> {
    if attr.phis.len() != schema.len() || attr.instance.len() != schema.len() {
        return Err(SchemaError::LengthMismatch { expected: schema.len(), got: attr.phis.len() });
    }
    let mut order: Vec<usize> = (0..attr.phis.len()).collect();
    // stable sort keeps index order among equal magnitudes
    order.sort_by(|&a, &b| attr.phis[b].abs().total_cmp(&attr.phis[a].abs()));
    order
        .into_iter()
        .take(k)
        .map(|i| {
            let def = &schema.features()[i];
            Ok(RankedFeature {
                feature: def.name.clone(),
                raw_value: decode_value(def, attr.instance[i])?,
                phi: attr.phis[i],
            })
        })
        .collect()
}

/// Wire form of an attribution inside API responses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionReport {
    pub base_value: f64,
    pub model_output: f64,
    pub target_class: String,
    pub entries: Vec<RankedFeature>,
}

impl AttributionReport {
    pub fn new(attr: &FeatureAttribution, schema: &FeatureSchema) -> Result<Self, SchemaError> {
        Ok(Self {
            base_value: attr.base_value,
            model_output: attr.model_output,
            target_class: attr.target_class.clone(),
            entries: rank_features(attr, schema, schema.len())?,
        })
    }
}
