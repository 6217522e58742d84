use std::fs;
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::ClassWeights;
use crate::error::{Error, Result};

/// Random forest hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// `None` grows until purity or `min_leaf`.
    pub max_depth: Option<usize>,
    /// Minimum number of (bootstrap) samples on each side of a split.
    pub min_leaf: usize,
    /// `None` uses `floor(sqrt(V))`, at least 1.
    pub features_per_split: Option<usize>,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig { n_trees: 200, max_depth: None, min_leaf: 2, features_per_split: None }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidConfig("n_trees must be at least 1".into()));
        }
        if self.min_leaf == 0 {
            return Err(Error::InvalidConfig("min_leaf must be at least 1".into()));
        }
        if self.features_per_split == Some(0) {
            return Err(Error::InvalidConfig("features_per_split must be at least 1".into()));
        }
        Ok(())
    }

    fn split_features(&self, n_features: usize) -> usize {
        self.features_per_split
            .unwrap_or_else(|| (n_features as f64).sqrt().floor() as usize)
            .clamp(1, n_features)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    /// Samples with `x[feature] <= threshold` go left.
    Split { feature: usize, threshold: f64, left: Box<Node>, right: Box<Node> },
    /// Class-weighted sample mass per class.
    Leaf { counts: [f64; 2] },
}

impl Node {
    fn leaf<'a>(&'a self, x: &[f64]) -> &'a [f64; 2] {
        let mut node = self;
        loop {
            match node {
                Node::Split { feature, threshold, left, right } => {
                    node = if x[*feature] <= *threshold { left } else { right };
                }
                Node::Leaf { counts } => return counts,
            }
        }
    }

    /// Class frequencies of the leaf reached by `x`.
    pub fn frequencies(&self, x: &[f64]) -> [f64; 2] {
        let counts = self.leaf(x);
        let total = counts[0] + counts[1];
        [counts[0] / total, counts[1] / total]
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
            Node::Leaf { .. } => 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub config: ForestConfig,
    pub seed: u64,
    pub n_features: usize,
    pub trees: Vec<Node>,
    /// Mean decrease in weighted Gini impurity per feature, summing to 1
    /// unless no tree split at all.
    pub importances: Vec<f64>,
}

/// `1 - sum_k p_k^2` of class-weighted counts; 0 for an empty node.
pub fn gini(counts: [f64; 2]) -> f64 {
    let total = counts[0] + counts[1];
    if total <= 0.0 {
        return 0.0;
    }
    let (p0, p1) = (counts[0] / total, counts[1] / total);
    1.0 - p0 * p0 - p1 * p1
}

struct Grower<'a> {
    x: &'a [Vec<f64>],
    y: &'a [u8],
    weights: ClassWeights,
    config: &'a ForestConfig,
    mtry: usize,
    importances: Vec<f64>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
    at: usize,
}

impl Grower<'_> {
    fn counts(&self, samples: &[usize]) -> [f64; 2] {
        let mut c = [0.0; 2];
        for &i in samples {
            c[usize::from(self.y[i])] += self.weights.get(self.y[i]);
        }
        c
    }

    fn best_split(&self, samples: &mut [usize], parent: [f64; 2], rng: &mut ChaCha8Rng) -> Option<BestSplit> {
        let n_features = self.x[0].len();
        let total = parent[0] + parent[1];
        let parent_impurity = total * gini(parent);
        let min_leaf = self.config.min_leaf;
        let mut best: Option<BestSplit> = None;
        let mut candidates = sample(rng, n_features, self.mtry).into_vec();
        candidates.sort_unstable();
        for feature in candidates {
            samples.sort_by(|&a, &b| self.x[a][feature].total_cmp(&self.x[b][feature]).then(a.cmp(&b)));
            let mut left = [0.0; 2];
            for at in 1..samples.len() {
                let prev = samples[at - 1];
                left[usize::from(self.y[prev])] += self.weights.get(self.y[prev]);
                let (lo, hi) = (self.x[prev][feature], self.x[samples[at]][feature]);
                if lo == hi || at < min_leaf || samples.len() - at < min_leaf {
                    continue;
                }
                let right = [parent[0] - left[0], parent[1] - left[1]];
                let children = (left[0] + left[1]) * gini(left) + (right[0] + right[1]) * gini(right);
                let gain = parent_impurity - children;
                if gain > 1e-12 && best.as_ref().is_none_or(|b| gain > b.gain) {
                    let mut threshold = lo + (hi - lo) / 2.0;
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some(BestSplit { feature, threshold, gain, at });
                }
            }
        }
        if let Some(b) = &best {
            let f = b.feature;
            samples.sort_by(|&a, &c| self.x[a][f].total_cmp(&self.x[c][f]).then(a.cmp(&c)));
            debug_assert!(b.at > 0 && b.at < samples.len());
        }
        best
    }

    fn grow(&mut self, samples: &mut [usize], depth: usize, root_mass: f64, rng: &mut ChaCha8Rng) -> Node {
        let counts = self.counts(samples);
        let pure = counts[0] == 0.0 || counts[1] == 0.0;
        let capped = self.config.max_depth.is_some_and(|d| depth >= d);
        if pure || capped || samples.len() < 2 * self.config.min_leaf {
            return Node::Leaf { counts };
        }
        let Some(split) = self.best_split(samples, counts, rng) else {
            return Node::Leaf { counts };
        };
        self.importances[split.feature] += split.gain / root_mass;
        let (left, right) = samples.split_at_mut(split.at);
        let left = self.grow(left, depth + 1, root_mass, rng);
        let right = self.grow(right, depth + 1, root_mass, rng);
        Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: Box::new(left),
            right: Box::new(right),
        }
    }
}

fn check_matrix(x: &[Vec<f64>], width: Option<usize>) -> Result<usize> {
    let width = width.or_else(|| x.first().map(Vec::len)).unwrap_or(0);
    if width == 0 {
        return Err(Error::ShapeMismatch("feature vectors are empty".into()));
    }
    for row in x {
        if row.len() != width {
            return Err(Error::ShapeMismatch(format!("expected {width} features, got {}", row.len())));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature vector".into()));
        }
    }
    Ok(width)
}

/// Trains a forest of CART trees on bootstrap resamples. Tree `i` draws from
/// a generator seeded with `seed + i`, so results do not depend on scheduling.
pub fn rf_train(x: &[Vec<f64>], y: &[u8], weights: ClassWeights, config: &ForestConfig, seed: u64) -> Result<ForestModel> {
    config.validate()?;
    if x.len() != y.len() {
        return Err(Error::ShapeMismatch(format!("{} feature rows for {} labels", x.len(), y.len())));
    }
    let n_features = check_matrix(x, None)?;
    if let Some(&bad) = y.iter().find(|&&l| l > 1) {
        return Err(Error::Malformed(format!("label {bad} is not binary")));
    }
    if !(y.contains(&0) && y.contains(&1)) {
        return Err(Error::DegenerateLabels("random forest needs both classes".into()));
    }
    let mtry = config.split_features(n_features);

    let grown: Vec<(Node, Vec<f64>)> = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(t as u64));
            let mut samples: Vec<usize> = (0..x.len()).map(|_| rng.gen_range(0..x.len())).collect();
            let mut grower = Grower { x, y, weights, config, mtry, importances: vec![0.0; n_features] };
            let mass = {
                let c = grower.counts(&samples);
                c[0] + c[1]
            };
            let tree = grower.grow(&mut samples, 0, mass, &mut rng);
            (tree, grower.importances)
        })
        .collect();

    let mut importances = vec![0.0; n_features];
    let mut trees = Vec::with_capacity(grown.len());
    for (tree, imp) in grown {
        for (a, b) in importances.iter_mut().zip(&imp) {
            *a += b;
        }
        trees.push(tree);
    }
    let total: f64 = importances.iter().sum();
    if total > 0.0 {
        importances.iter_mut().for_each(|v| *v /= total);
    }
    Ok(ForestModel { config: config.clone(), seed, n_features, trees, importances })
}

impl ForestModel {
    /// Mean per-tree leaf frequencies of both classes.
    pub fn class_scores(&self, x: &[f64]) -> Result<[f64; 2]> {
        if x.len() != self.n_features {
            return Err(Error::ShapeMismatch(format!("expected {} features, got {}", self.n_features, x.len())));
        }
        let mut sum = [0.0; 2];
        for tree in &self.trees {
            let f = tree.frequencies(x);
            sum[0] += f[0];
            sum[1] += f[1];
        }
        let n = self.trees.len() as f64;
        Ok([sum[0] / n, sum[1] / n])
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: ForestModel = serde_json::from_str(text)?;
        if model.trees.is_empty() || model.importances.len() != model.n_features {
            return Err(Error::Malformed("forest checkpoint is inconsistent".into()));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        Ok(fs::write(path, self.to_json()?)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// Predicted label and its mean leaf frequency; ties go to class 0.
pub fn rf_predict(model: &ForestModel, x: &[f64]) -> Result<(u8, f64)> {
    let scores = model.class_scores(x)?;
    Ok(if scores[1] > scores[0] { (1, scores[1]) } else { (0, scores[0]) })
}
