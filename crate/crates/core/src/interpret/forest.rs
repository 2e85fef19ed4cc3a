//! Random-forest binary classifier (pain vs neutral) over AU intensities.
//!
//! Trees are grown on bootstrap samples with Gini-impurity splits over a
//! random subset of `max(1, floor(sqrt(n_features)))` features per node.
//! Each tree draws from its own ChaCha stream (`seed`, stream = tree index),
//! so a model depends only on the data, the parameters and the seed, not on
//! how many threads trained it.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::InterpretError;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` grows trees until leaves are pure or cannot be split.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Draw half of each bootstrap sample from each class.
    pub balanced_bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            min_samples_leaf: 1,
            balanced_bootstrap: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node {
    Leaf {
        pain: usize,
        neutral: usize,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Nodes in an arena; the root is node 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    /// The tree's vote: the leaf's majority class, pain on ties.
    pub fn votes_pain(&self, row: &[f64]) -> bool {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { pain, neutral } => return pain >= neutral,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub format_version: u32,
    /// The AU intensity columns the model was trained on, in column order.
    pub feature_au_ids: Vec<u8>,
    pub params: ForestParams,
    pub seed: u64,
    pub trees: Vec<Tree>,
}

impl ForestModel {
    /// Fraction of trees voting pain.
    pub fn confidence(&self, row: &[f64]) -> f64 {
        let votes = self.trees.iter().filter(|t| t.votes_pain(row)).count();
        votes as f64 / self.trees.len() as f64
    }

    /// Builds the feature row for `aus` in the model's column order.
    pub fn row_from_aus(&self, aus: &BTreeMap<u8, f64>) -> Result<Vec<f64>, InterpretError> {
        self.feature_au_ids
            .iter()
            .map(|au| aus.get(au).copied().ok_or(InterpretError::MissingFeature { au: *au }))
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("forest model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, InterpretError> {
        let model: ForestModel =
            serde_json::from_str(text).map_err(|e| InterpretError::Model(e.to_string()))?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(InterpretError::Model(format!(
                "unsupported model format version {}",
                model.format_version
            )));
        }
        if model.trees.is_empty() {
            return Err(InterpretError::Model("model has no trees".into()));
        }
        for tree in &model.trees {
            for node in &tree.nodes {
                if let Node::Split {
                    feature, left, right, ..
                } = node
                {
                    if *feature >= model.feature_au_ids.len()
                        || *left >= tree.nodes.len()
                        || *right >= tree.nodes.len()
                    {
                        return Err(InterpretError::Model("split refers to a missing feature or node".into()));
                    }
                }
            }
        }
        Ok(model)
    }
}

fn gini(pain: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let p = pain as f64 / total as f64;
    2.0 * p * (1.0 - p)
}

struct Grower<'a> {
    rows: &'a [Vec<f64>],
    labels: &'a [bool],
    params: &'a ForestParams,
    n_features: usize,
    mtry: usize,
    nodes: Vec<Node>,
}

struct Split {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

impl Grower<'_> {
    fn leaf(&self, samples: &[usize]) -> Node {
        let pain = samples.iter().filter(|&&i| self.labels[i]).count();
        Node::Leaf {
            pain,
            neutral: samples.len() - pain,
        }
    }

    /// Lowest weighted child impurity over the thresholds of one feature.
    /// The first threshold wins ties.
    fn best_split_on(&self, samples: &[usize], feature: usize) -> Option<Split> {
        let mut sorted: Vec<(f64, bool)> = samples
            .iter()
            .map(|&i| (self.rows[i][feature], self.labels[i]))
            .collect();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = sorted.len();
        let total_pain = sorted.iter().filter(|s| s.1).count();
        let min_leaf = self.params.min_samples_leaf.max(1);

        let mut best: Option<Split> = None;
        let mut left_pain = 0;
        for k in 1..n {
            if sorted[k - 1].1 {
                left_pain += 1;
            }
            let (lo, hi) = (sorted[k - 1].0, sorted[k].0);
            if lo == hi || k < min_leaf || n - k < min_leaf {
                continue;
            }
            let impurity = (k as f64 * gini(left_pain, k)
                + (n - k) as f64 * gini(total_pain - left_pain, n - k))
                / n as f64;
            if best.as_ref().is_none_or(|b| impurity < b.impurity) {
                let mid = lo + (hi - lo) / 2.0;
                let threshold = if mid < hi { mid } else { lo };
                best = Some(Split {
                    feature,
                    threshold,
                    impurity,
                });
            }
        }
        best
    }

    fn grow(&mut self, samples: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let id = self.nodes.len();
        self.nodes.push(self.leaf(&samples));

        let pain = samples.iter().filter(|&&i| self.labels[i]).count();
        let pure = pain == 0 || pain == samples.len();
        let depth_reached = self.params.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_reached || samples.len() < 2 * self.params.min_samples_leaf.max(1) {
            return id;
        }

        let mut order: Vec<usize> = (0..self.n_features).collect();
        order.shuffle(rng);
        let mut best: Option<Split> = None;
        for &feature in &order[..self.mtry] {
            if let Some(s) = self.best_split_on(&samples, feature) {
                if best.as_ref().is_none_or(|b| s.impurity < b.impurity) {
                    best = Some(s);
                }
            }
        }
        if best.is_none() {
            // none of the drawn features separates these samples
            best = order[self.mtry..]
                .iter()
                .find_map(|&f| self.best_split_on(&samples, f));
        }
        let Some(split) = best else {
            return id;
        };

        let (left, right): (Vec<usize>, Vec<usize>) = samples
            .into_iter()
            .partition(|&i| self.rows[i][split.feature] <= split.threshold);
        let left_id = self.grow(left, depth + 1, rng);
        let right_id = self.grow(right, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: left_id,
            right: right_id,
        };
        id
    }
}

fn bootstrap(labels: &[bool], balanced: bool, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = labels.len();
    if !balanced {
        return (0..n).map(|_| rng.random_range(0..n)).collect();
    }
    let pain: Vec<usize> = (0..n).filter(|&i| labels[i]).collect();
    let neutral: Vec<usize> = (0..n).filter(|&i| !labels[i]).collect();
    let half = n / 2;
    let mut sample: Vec<usize> = (0..half).map(|_| pain[rng.random_range(0..pain.len())]).collect();
    sample.extend((half..n).map(|_| neutral[rng.random_range(0..neutral.len())]));
    sample
}

/// Trains a forest on `rows` (one feature vector per sample, columns matching
/// `feature_au_ids`) and boolean pain labels.
pub fn train_forest(
    rows: &[Vec<f64>],
    labels: &[bool],
    feature_au_ids: &[u8],
    params: &ForestParams,
    seed: u64,
) -> Result<ForestModel, InterpretError> {
    if rows.len() != labels.len() {
        return Err(InterpretError::Shape(format!(
            "{} rows but {} labels",
            rows.len(),
            labels.len()
        )));
    }
    let n_features = feature_au_ids.len();
    if n_features == 0 {
        return Err(InterpretError::Shape("no feature columns".into()));
    }
    if let Some(bad) = rows.iter().find(|r| r.len() != n_features) {
        return Err(InterpretError::Shape(format!(
            "row has {} values for {n_features} features",
            bad.len()
        )));
    }
    if params.n_trees == 0 {
        return Err(InterpretError::Params("n_trees must be at least 1".into()));
    }
    let pain = labels.iter().filter(|&&l| l).count();
    if pain == 0 || pain == labels.len() {
        return Err(InterpretError::DegenerateLabels);
    }
    let mtry = ((n_features as f64).sqrt().floor() as usize).max(1);

    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let samples = bootstrap(labels, params.balanced_bootstrap, &mut rng);
            let mut grower = Grower {
                rows,
                labels,
                params,
                n_features,
                mtry,
                nodes: Vec::new(),
            };
            grower.grow(samples, 0, &mut rng);
            Tree { nodes: grower.nodes }
        })
        .collect();

    Ok(ForestModel {
        format_version: MODEL_FORMAT_VERSION,
        feature_au_ids: feature_au_ids.to_vec(),
        params: params.clone(),
        seed,
        trees,
    })
}
