//! The four ranking features and training-label construction.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::forest::RankError;
use crate::graph::{GeosocialGraph, ServiceProviderNode, SpStats};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A provider's feature vector for one query:
/// matched keyword ratio, specific keyword ratio, review count, and
/// average review score (0 when unreviewed).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub ratio_m: f64,
    pub ratio_s: f64,
    pub count: u64,
    pub score_avg: f64,
}

impl FeatureVector {
    pub const DIM: usize = 4;

    /// Feature by index, for tree routing.
    pub fn value(&self, feature: usize) -> f64 {
        match feature {
            0 => self.ratio_m,
            1 => self.ratio_s,
            2 => self.count as f64,
            3 => self.score_avg,
            _ => panic!("feature index {feature} out of range"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub features: FeatureVector,
    pub label: u8,
}

/// Build the feature vector of `sp` against the query keyword set.
///
/// `ratio_m` is the matched share of the query's keywords, `ratio_s` the
/// matched share of the provider's own keywords (0 for a keyword-less
/// provider).
pub fn extract_features(
    query_keywords: &BTreeSet<String>,
    sp: &ServiceProviderNode,
    stats: &SpStats,
) -> Result<FeatureVector, RankError> {
    if query_keywords.is_empty() {
        return Err(RankError::EmptyQueryKeywords);
    }
    let matched = query_keywords.intersection(&sp.keywords).count() as f64;
    let ratio_s = if sp.keywords.is_empty() {
        0.0
    } else {
        matched / sp.keywords.len() as f64
    };
    Ok(FeatureVector {
        ratio_m: matched / query_keywords.len() as f64,
        ratio_s,
        count: stats.count,
        score_avg: stats.avg_stars().unwrap_or(0.0),
    })
}

/// Ground-truth rank of a reviewed provider: its average star rating,
/// rounded half-up and clamped to 1..=5.
pub fn derive_label(stats: &SpStats) -> Result<u8, RankError> {
    let avg = stats.avg_stars().ok_or(RankError::NoReviews)?;
    let rounded = (avg + 0.5).floor();
    Ok(rounded.clamp(1.0, 5.0) as u8)
}

/// Assemble labeled examples from every reviewed provider in the graph.
///
/// Each provider contributes one base example queried with its own keyword
/// set (when nonempty) plus `augment_per_sp` synthetic queries whose
/// keywords are drawn from the provider's set and the graph-wide pool, so
/// the ratio features vary instead of pinning at 1. Fully deterministic
/// given `seed`.
pub fn training_examples(
    graph: &GeosocialGraph,
    augment_per_sp: usize,
    seed: u64,
) -> Vec<LabeledExample> {
    let pool: Vec<&str> = graph.keywords();
    let mut examples = Vec::new();

    for sp in graph.service_providers() {
        let stats = match graph.sp_stats(sp.id) {
            Ok(s) if s.count >= 1 => s,
            _ => continue,
        };
        let label = derive_label(&stats).expect("count checked above");

        if !sp.keywords.is_empty() {
            let features = extract_features(&sp.keywords, sp, &stats).expect("nonempty keywords");
            examples.push(LabeledExample { features, label });
        }

        if pool.is_empty() {
            continue;
        }
        let own: Vec<&str> = sp.keywords.iter().map(String::as_str).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x9E37_79B9_7F4A_7C15u64.wrapping_mul(sp.id.0 as u64 + 1)));
        for _ in 0..augment_per_sp {
            let size = rng.next_u64() % 3 + 1;
            let mut query: BTreeSet<String> = BTreeSet::new();
            for _ in 0..size {
                // Half the draws favor the provider's own keywords so that
                // intersections are actually exercised.
                let from_own = !own.is_empty() && rng.next_u64() % 2 == 0;
                let kw = if from_own {
                    own[(rng.next_u64() % own.len() as u64) as usize]
                } else {
                    pool[(rng.next_u64() % pool.len() as u64) as usize]
                };
                query.insert(kw.to_string());
            }
            let features = extract_features(&query, sp, &stats).expect("size >= 1");
            examples.push(LabeledExample { features, label });
        }
    }
    examples
}
