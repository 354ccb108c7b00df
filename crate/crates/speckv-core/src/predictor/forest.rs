//! Bagged CART regression trees with variance-reduction splits.
//!
//! Determinism contract: each tree draws its bootstrap bag and per-split
//! feature subsets from an rng derived from `(seed, tree index)`, and bag
//! draws index a canonical row order (rows sorted lexicographically by
//! features then target). Fitting is therefore reproducible across runs,
//! across thread schedules, and across permutations of the training rows.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::predictor::{FeatureVector, FEATURE_DIM};
use crate::rng::mix_seed;

/// Features examined per split: ceil(sqrt(FEATURE_DIM)).
const FEATURES_PER_SPLIT: usize = 3;

/// Nodes with fewer samples than this become leaves.
const MIN_SAMPLES_SPLIT: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: u32,
        right: u32,
    },
}

/// A single regression tree stored as a node arena; the root is node 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn predict(&self, x: &FeatureVector) -> f64 {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x.0[*feature] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }
}

/// A trained forest plus its normalized impurity-decrease importances.
#[derive(Debug, Clone, PartialEq)]
pub struct ForestParams {
    pub trees: Vec<Tree>,
    pub importance: [f64; FEATURE_DIM],
}

impl ForestParams {
    pub fn raw_predict(&self, x: &FeatureVector) -> f64 {
        let total: f64 = self.trees.iter().map(|t| t.predict(x)).sum();
        total / self.trees.len() as f64
    }
}

struct TreeBuilder<'a> {
    x: &'a [FeatureVector],
    y: &'a [f64],
    nodes: Vec<TreeNode>,
    importance: [f64; FEATURE_DIM],
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    children_sse: f64,
}

impl<'a> TreeBuilder<'a> {
    fn node_stats(&self, indices: &[usize]) -> (f64, f64) {
        let n = indices.len() as f64;
        let sum: f64 = indices.iter().map(|&i| self.y[i]).sum();
        let sum_sq: f64 = indices.iter().map(|&i| self.y[i] * self.y[i]).sum();
        let sse = (sum_sq - sum * sum / n).max(0.0);
        (sum / n, sse)
    }

    /// Best (feature, threshold) among `features`, minimizing the summed
    /// child SSE. Ties break toward the lower feature index, then the lower
    /// threshold, keeping the search order-independent.
    fn best_split(&self, indices: &[usize], features: &[usize]) -> Option<BestSplit> {
        let mut best: Option<BestSplit> = None;
        let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(indices.len());
        for &feature in features {
            pairs.clear();
            pairs.extend(indices.iter().map(|&i| (self.x[i].0[feature], self.y[i])));
            pairs.sort_by(|a, b| a.partial_cmp(b).expect("finite features and targets"));

            let total: f64 = pairs.iter().map(|(_, y)| y).sum();
            let total_sq: f64 = pairs.iter().map(|(_, y)| y * y).sum();
            let n = pairs.len() as f64;
            let mut left_sum = 0.0;
            let mut left_sq = 0.0;
            for i in 1..pairs.len() {
                left_sum += pairs[i - 1].1;
                left_sq += pairs[i - 1].1 * pairs[i - 1].1;
                if pairs[i].0 <= pairs[i - 1].0 {
                    continue; // can only cut between distinct values
                }
                let nl = i as f64;
                let nr = n - nl;
                let sse_l = (left_sq - left_sum * left_sum / nl).max(0.0);
                let right_sum = total - left_sum;
                let sse_r = (total_sq - left_sq - right_sum * right_sum / nr).max(0.0);
                let children_sse = sse_l + sse_r;
                let threshold = 0.5 * (pairs[i - 1].0 + pairs[i].0);
                let better = match &best {
                    None => true,
                    Some(b) => {
                        children_sse < b.children_sse
                            || (children_sse == b.children_sse
                                && (feature, threshold) < (b.feature, b.threshold))
                    }
                };
                if better {
                    best = Some(BestSplit {
                        feature,
                        threshold,
                        children_sse,
                    });
                }
            }
        }
        best
    }

    fn grow(&mut self, indices: Vec<usize>, rng: &mut ChaCha8Rng) -> u32 {
        let (mean, sse) = self.node_stats(&indices);
        if indices.len() < MIN_SAMPLES_SPLIT || sse <= 1e-12 {
            self.nodes.push(TreeNode::Leaf { value: mean });
            return (self.nodes.len() - 1) as u32;
        }

        let mut features: Vec<usize> = (0..FEATURE_DIM).collect();
        let (sampled, _) = features.partial_shuffle(rng, FEATURES_PER_SPLIT);
        let mut split = self.best_split(&indices, sampled);
        if split.is_none() {
            // Sampled features were constant within the node; fall back to
            // scanning all of them before giving up.
            let all: Vec<usize> = (0..FEATURE_DIM).collect();
            split = self.best_split(&indices, &all);
        }
        let Some(split) = split else {
            self.nodes.push(TreeNode::Leaf { value: mean });
            return (self.nodes.len() - 1) as u32;
        };

        self.importance[split.feature] += sse - split.children_sse;

        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
            .into_iter()
            .partition(|&i| self.x[i].0[split.feature] <= split.threshold);

        let slot = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { value: mean }); // placeholder
        let left = self.grow(left_idx, rng);
        let right = self.grow(right_idx, rng);
        self.nodes[slot] = TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        slot as u32
    }
}

fn grow_tree(
    x: &[FeatureVector],
    y: &[f64],
    indices: Vec<usize>,
    rng: &mut ChaCha8Rng,
) -> (Tree, [f64; FEATURE_DIM]) {
    let mut builder = TreeBuilder {
        x,
        y,
        nodes: Vec::new(),
        importance: [0.0; FEATURE_DIM],
    };
    let root = builder.grow(indices, rng);
    debug_assert_eq!(root, 0);
    (
        Tree {
            nodes: builder.nodes,
        },
        builder.importance,
    )
}

/// Fits a bagged forest of full-depth CART regression trees.
pub fn forest_fit(
    x: &[FeatureVector],
    y: &[f64],
    n_trees: usize,
    seed: u64,
) -> Result<ForestParams> {
    if n_trees < 1 {
        return Err(Error::invalid("forest needs at least one tree"));
    }
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "design has {} rows but targets have {}",
            x.len(),
            y.len()
        )));
    }
    if x.is_empty() {
        return Err(Error::invalid("forest needs at least one row"));
    }
    if let Some(bad) = y.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::invalid(format!(
            "acceptance-rate target {bad} is outside [0, 1]"
        )));
    }
    if x.iter().any(|r| r.0.iter().any(|v| !v.is_finite())) {
        return Err(Error::invalid("features must be finite"));
    }

    // Canonical row order: bag draws address rows by sorted position, so the
    // fitted forest does not depend on how the caller ordered the data.
    let mut canonical: Vec<usize> = (0..x.len()).collect();
    canonical.sort_by(|&i, &j| {
        (x[i].0, y[i])
            .partial_cmp(&(x[j].0, y[j]))
            .expect("finite features and targets")
    });

    let n = x.len();
    let mut trees = Vec::with_capacity(n_trees);
    let mut importance_sum = [0.0; FEATURE_DIM];
    for t in 0..n_trees {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, t as u64));
        let bag: Vec<usize> = (0..n).map(|_| canonical[rng.gen_range(0..n)]).collect();
        let (tree, raw_importance) = grow_tree(x, y, bag, &mut rng);
        let total: f64 = raw_importance.iter().sum();
        if total > 0.0 {
            for (acc, v) in importance_sum.iter_mut().zip(&raw_importance) {
                *acc += v / total;
            }
        }
        trees.push(tree);
    }

    let grand_total: f64 = importance_sum.iter().sum();
    let mut importance = [0.0; FEATURE_DIM];
    if grand_total > 0.0 {
        for (out, v) in importance.iter_mut().zip(&importance_sum) {
            *out = v / grand_total;
        }
    }

    Ok(ForestParams { trees, importance })
}
