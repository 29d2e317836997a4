//! From-scratch random forest over the four ranking features.
//!
//! Trees are CART classifiers grown greedily on Gini impurity, with
//! bootstrap sampling and per-split feature subsampling. Everything is
//! seeded through ChaCha streams derived from `(seed, tree index)`, so a
//! training run is exactly reproducible — including the serialized model
//! bytes — for a given example order and configuration.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::features::{FeatureVector, LabeledExample};

pub const MODEL_VERSION: &str = "1";

const RANKS: usize = 5;

#[derive(Debug, Error)]
pub enum RankError {
    #[error("query keyword set is empty")]
    EmptyQueryKeywords,
    #[error("provider has no reviews to derive a label from")]
    NoReviews,
    #[error("too few examples: have {have}, need {need}")]
    TooFewExamples { have: usize, need: usize },
    #[error("split ratio {0} outside (0, 1)")]
    InvalidRatio(f64),
    #[error("label {0} outside 1..=5")]
    LabelOutOfRange(u8),
    #[error("model has no trees")]
    EmptyModel,
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("unsupported model version {0:?} (expected {MODEL_VERSION:?})")]
    UnsupportedModelVersion(String),
    #[error("corrupt model: {0}")]
    CorruptModel(String),
}

/// Forest hyperparameters. The defaults are conventional, not tuned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub features_per_split: usize,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 8,
            min_samples_split: 2,
            features_per_split: 2,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature: usize,
        left: usize,
        right: usize,
        threshold: f64,
    },
    Leaf {
        label: u8,
    },
}

/// One decision tree as a flat node arena; the root is node 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
}

impl DecisionTree {
    /// Route a feature vector to its leaf label.
    pub fn predict(&self, f: &FeatureVector) -> u8 {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { label } => return *label,
                TreeNode::Split {
                    feature,
                    left,
                    right,
                    threshold,
                } => {
                    at = if f.value(*feature) < *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub examples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForestModel {
    pub config: ForestConfig,
    pub meta: TrainingMeta,
    pub trees: Vec<DecisionTree>,
}

/// Classification quality over a held-out set. `confusion[a][p]` counts
/// examples with actual rank `a + 1` predicted as `p + 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub confusion: [[u64; RANKS]; RANKS],
    pub n_test: usize,
}

fn shuffle<T>(items: &mut [T], rng: &mut ChaCha8Rng) {
    for i in (1..items.len()).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        items.swap(i, j);
    }
}

/// Deterministic shuffled split: `floor(ratio · n)` examples to train, the
/// rest to test; errors if either side would be empty.
pub fn split_train_test(
    examples: &[LabeledExample],
    ratio: f64,
    seed: u64,
) -> Result<(Vec<LabeledExample>, Vec<LabeledExample>), RankError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(RankError::InvalidRatio(ratio));
    }
    if examples.len() < 2 {
        return Err(RankError::TooFewExamples {
            have: examples.len(),
            need: 2,
        });
    }
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffle(&mut order, &mut rng);

    let train_n = (ratio * examples.len() as f64).floor() as usize;
    if train_n == 0 || train_n == examples.len() {
        return Err(RankError::TooFewExamples {
            have: examples.len(),
            need: 2,
        });
    }
    let train = order[..train_n].iter().map(|&i| examples[i]).collect();
    let test = order[train_n..].iter().map(|&i| examples[i]).collect();
    Ok((train, test))
}

fn gini(counts: &[u64; RANKS], total: f64) -> f64 {
    let mut sum_sq = 0.0;
    for &c in counts {
        let p = c as f64 / total;
        sum_sq += p * p;
    }
    1.0 - sum_sq
}

/// Majority label with ties broken toward the lower rank.
fn majority(counts: &[u64; RANKS]) -> u8 {
    let mut best = 0usize;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best as u8 + 1
}

struct TreeBuilder<'a> {
    examples: &'a [LabeledExample],
    max_depth: usize,
    min_samples_split: usize,
    features_per_split: usize,
    nodes: Vec<TreeNode>,
}

impl<'a> TreeBuilder<'a> {
    fn class_counts(&self, samples: &[u32]) -> [u64; RANKS] {
        let mut counts = [0u64; RANKS];
        for &s in samples {
            counts[(self.examples[s as usize].label - 1) as usize] += 1;
        }
        counts
    }

    /// Grow a subtree over `samples`; returns its node index.
    fn grow(&mut self, samples: Vec<u32>, depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let counts = self.class_counts(&samples);
        let total = samples.len() as f64;
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;

        if pure || depth >= self.max_depth || samples.len() < self.min_samples_split {
            let idx = self.nodes.len();
            self.nodes.push(TreeNode::Leaf {
                label: majority(&counts),
            });
            return idx;
        }

        // Feature subsample: partial Fisher-Yates over the feature indices.
        let mut features: [usize; FeatureVector::DIM] = [0, 1, 2, 3];
        for i in 0..self.features_per_split.min(FeatureVector::DIM) {
            let j = i + (rng.next_u64() % (FeatureVector::DIM - i) as u64) as usize;
            features.swap(i, j);
        }
        let chosen = &features[..self.features_per_split.min(FeatureVector::DIM)];

        let parent_gini = gini(&counts, total);
        let mut best: Option<(usize, f64, f64)> = None; // (feature, threshold, weighted gini)

        let mut sorted = samples.clone();
        for &feature in chosen {
            sorted.sort_by(|&a, &b| {
                self.examples[a as usize]
                    .features
                    .value(feature)
                    .total_cmp(&self.examples[b as usize].features.value(feature))
            });
            let mut left_counts = [0u64; RANKS];
            let mut right_counts = counts;
            for i in 0..sorted.len() - 1 {
                let sample = sorted[i] as usize;
                let label = (self.examples[sample].label - 1) as usize;
                left_counts[label] += 1;
                right_counts[label] -= 1;

                let here = self.examples[sample].features.value(feature);
                let next = self.examples[sorted[i + 1] as usize].features.value(feature);
                if here == next {
                    continue;
                }
                let threshold = (here + next) / 2.0;
                if threshold <= here {
                    continue; // midpoint collapsed onto the lower value
                }
                let nl = (i + 1) as f64;
                let nr = total - nl;
                let weighted = (nl / total) * gini(&left_counts, nl) + (nr / total) * gini(&right_counts, nr);
                if best.map_or(weighted < parent_gini, |(_, _, b)| weighted < b) {
                    best = Some((feature, threshold, weighted));
                }
            }
        }

        let Some((feature, threshold, _)) = best else {
            let idx = self.nodes.len();
            self.nodes.push(TreeNode::Leaf {
                label: majority(&counts),
            });
            return idx;
        };

        let (left_samples, right_samples): (Vec<u32>, Vec<u32>) = samples
            .iter()
            .partition(|&&s| self.examples[s as usize].features.value(feature) < threshold);
        debug_assert!(!left_samples.is_empty() && !right_samples.is_empty());

        let idx = self.nodes.len();
        self.nodes.push(TreeNode::Split {
            feature,
            left: 0,
            right: 0,
            threshold,
        });
        let left = self.grow(left_samples, depth + 1, rng);
        let right = self.grow(right_samples, depth + 1, rng);
        if let TreeNode::Split {
            left: l, right: r, ..
        } = &mut self.nodes[idx]
        {
            *l = left;
            *r = right;
        }
        idx
    }
}

fn tree_seed(seed: u64, tree_index: u64) -> u64 {
    // splitmix64 of the pair, so per-tree streams are independent.
    let mut z = seed ^ tree_index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Train a forest: each tree fits a bootstrap resample of the examples.
pub fn train(examples: &[LabeledExample], config: &ForestConfig) -> Result<RandomForestModel, RankError> {
    if examples.len() < config.min_samples_split.max(1) {
        return Err(RankError::TooFewExamples {
            have: examples.len(),
            need: config.min_samples_split.max(1),
        });
    }
    for ex in examples {
        if !(1..=5).contains(&ex.label) {
            return Err(RankError::LabelOutOfRange(ex.label));
        }
    }

    let n = examples.len();
    let mut trees = Vec::with_capacity(config.n_trees);
    for t in 0..config.n_trees {
        let mut rng = ChaCha8Rng::seed_from_u64(tree_seed(config.seed, t as u64));
        let bootstrap: Vec<u32> = (0..n).map(|_| (rng.next_u64() % n as u64) as u32).collect();
        let mut builder = TreeBuilder {
            examples,
            max_depth: config.max_depth,
            min_samples_split: config.min_samples_split.max(2),
            features_per_split: config.features_per_split.clamp(1, FeatureVector::DIM),
            nodes: Vec::new(),
        };
        let root = builder.grow(bootstrap, 0, &mut rng);
        debug_assert_eq!(root, 0);
        trees.push(DecisionTree {
            nodes: builder.nodes,
        });
    }
    Ok(RandomForestModel {
        config: *config,
        meta: TrainingMeta { examples: n },
        trees,
    })
}

/// Majority vote across trees; vote ties resolve toward the lower rank.
pub fn predict(model: &RandomForestModel, features: &FeatureVector) -> Result<u8, RankError> {
    if model.trees.is_empty() {
        return Err(RankError::EmptyModel);
    }
    let mut votes = [0u64; RANKS];
    for tree in &model.trees {
        votes[(tree.predict(features) - 1) as usize] += 1;
    }
    Ok(majority(&votes))
}

/// Accuracy and confusion over a held-out set.
pub fn evaluate(model: &RandomForestModel, test: &[LabeledExample]) -> Result<EvalReport, RankError> {
    if test.is_empty() {
        return Err(RankError::EmptyTestSet);
    }
    let mut confusion = [[0u64; RANKS]; RANKS];
    let mut correct = 0u64;
    for ex in test {
        let predicted = predict(model, &ex.features)?;
        confusion[(ex.label - 1) as usize][(predicted - 1) as usize] += 1;
        if predicted == ex.label {
            correct += 1;
        }
    }
    Ok(EvalReport {
        accuracy: correct as f64 / test.len() as f64,
        confusion,
        n_test: test.len(),
    })
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    version: String,
    config: ForestConfig,
    meta: TrainingMeta,
    trees: Vec<DecisionTree>,
}

#[derive(Deserialize)]
struct ModelVersionProbe {
    version: Option<String>,
}

/// Serialize a model to its canonical JSON string.
pub fn model_to_string(model: &RandomForestModel) -> String {
    let doc = ModelDoc {
        version: MODEL_VERSION.to_string(),
        config: model.config,
        meta: model.meta,
        trees: model.trees.clone(),
    };
    serde_json::to_string(&doc).expect("model serialization cannot fail")
}

pub fn model_from_str(input: &str) -> Result<RandomForestModel, RankError> {
    let probe: ModelVersionProbe = serde_json::from_str(input)
        .map_err(|e| RankError::CorruptModel(format!("not a model document: {e}")))?;
    match probe.version.as_deref() {
        Some(MODEL_VERSION) => {}
        Some(other) => return Err(RankError::UnsupportedModelVersion(other.to_string())),
        None => return Err(RankError::CorruptModel("missing version field".into())),
    }
    let doc: ModelDoc = serde_json::from_str(input).map_err(|e| RankError::CorruptModel(e.to_string()))?;
    let model = RandomForestModel {
        config: doc.config,
        meta: doc.meta,
        trees: doc.trees,
    };
    for tree in &model.trees {
        if tree.nodes.is_empty() {
            return Err(RankError::CorruptModel("tree with no nodes".into()));
        }
        for node in &tree.nodes {
            match node {
                TreeNode::Leaf { label } if !(1..=5).contains(label) => {
                    return Err(RankError::CorruptModel(format!("leaf label {label} out of range")));
                }
                TreeNode::Split {
                    feature,
                    left,
                    right,
                    ..
                } if *feature >= FeatureVector::DIM
                    || *left >= tree.nodes.len()
                    || *right >= tree.nodes.len() =>
                {
                    return Err(RankError::CorruptModel("split node out of bounds".into()));
                }
                _ => {}
            }
        }
    }
    Ok(model)
}

pub fn save_model(model: &RandomForestModel, path: impl AsRef<Path>) -> Result<(), RankError> {
    let mut body = model_to_string(model);
    body.push('\n');
    fs::write(path, body)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<RandomForestModel, RankError> {
    let body = fs::read_to_string(path)?;
    model_from_str(&body)
}
