//! The two-stage re-ranking pipeline: classify raw query candidates into
//! ranks, adjust each provider's rating by comment volume, and emit the
//! final ordering (rank first, adjusted score within a rank).

use thiserror::Error;

use crate::features::extract_features;
use crate::forest::{predict, RandomForestModel, RankError};
use crate::graph::{GeosocialGraph, NodeId};
use crate::query::{Candidate, Query};
use crate::score::{alpha, count_stats, score_c, AlphaParams, AlphaScope, ScoreError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Rank(#[from] RankError),
    #[error(transparent)]
    Score(#[from] ScoreError),
}

/// One fully-scored recommendation. `alpha` is reported so a caller can see
/// how much the comment-volume adjustment moved the score.
#[derive(Debug, Clone, PartialEq)]
pub struct Recommendation {
    pub sp: NodeId,
    pub rank: u8,
    pub score_c: f64,
    pub alpha: f64,
    pub path_cost: f64,
    pub path: Vec<NodeId>,
}

/// Re-rank raw query candidates.
///
/// Every candidate keeps its shortest-path cost and path; the output is a
/// permutation of the input ordered by (rank desc, score_c desc,
/// path_cost asc, id asc). Providers without reviews score 0 within their
/// rank. Count statistics for α come from the candidate set itself or from
/// the whole graph, per `scope`.
pub fn optimize(
    graph: &GeosocialGraph,
    query: &Query,
    candidates: &[Candidate],
    model: &RandomForestModel,
    params: &AlphaParams,
    scope: AlphaScope,
) -> Result<Vec<Recommendation>, PipelineError> {
    if candidates.is_empty() {
        return Ok(Vec::new());
    }

    let counts: Vec<u64> = match scope {
        AlphaScope::Candidates => candidates
            .iter()
            .map(|c| graph.sp_stats(c.sp).map(|s| s.count).unwrap_or(0))
            .collect(),
        AlphaScope::Global => graph.all_sp_counts(),
    };
    let stats = count_stats(&counts)?;

    let mut out = Vec::with_capacity(candidates.len());
    for candidate in candidates {
        let sp = graph
            .service_provider(candidate.sp)
            .expect("candidates come from this graph");
        let sp_stats = graph.sp_stats(candidate.sp).expect("sp id valid");
        let features = extract_features(&query.keywords, sp, &sp_stats)?;
        let rank = predict(model, &features)?;
        let a = alpha(sp_stats.count, &stats, params)?;
        let score = match sp_stats.avg_stars() {
            Some(rating) => score_c(a, rating)?,
            None => 0.0, // unreviewed providers sort last within their rank
        };
        out.push(Recommendation {
            sp: candidate.sp,
            rank,
            score_c: score,
            alpha: a,
            path_cost: candidate.cost,
            path: candidate.path.clone(),
        });
    }

    out.sort_by(|x, y| {
        y.rank
            .cmp(&x.rank)
            .then_with(|| y.score_c.total_cmp(&x.score_c))
            .then_with(|| x.path_cost.total_cmp(&y.path_cost))
            .then_with(|| x.sp.cmp(&y.sp))
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::{DecisionTree, ForestConfig, TrainingMeta, TreeNode};
    use crate::geo::GeoPoint;
    use crate::graph::EdgeKind;
    use std::collections::BTreeSet;

    fn kws(words: &[&str]) -> BTreeSet<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    fn constant_model(label: u8) -> RandomForestModel {
        RandomForestModel {
            config: ForestConfig::default(),
            meta: TrainingMeta { examples: 0 },
            trees: vec![DecisionTree {
                nodes: vec![TreeNode::Leaf { label }],
            }],
        }
    }

    /// ratio_m-keyed model: below 0.75 → rank `low`, else rank `high`.
    fn threshold_model(low: u8, high: u8) -> RandomForestModel {
        RandomForestModel {
            config: ForestConfig::default(),
            meta: TrainingMeta { examples: 0 },
            trees: vec![DecisionTree {
                nodes: vec![
                    TreeNode::Split {
                        feature: 0,
                        left: 1,
                        right: 2,
                        threshold: 0.75,
                    },
                    TreeNode::Leaf { label: low },
                    TreeNode::Leaf { label: high },
                ],
            }],
        }
    }

    struct Fixture {
        graph: GeosocialGraph,
        query: Query,
        candidates: Vec<Candidate>,
    }

    /// Three providers reviewed to different counts/averages, all reachable.
    fn fixture() -> Fixture {
        let mut g = GeosocialGraph::new();
        let u = g.add_user("u").unwrap();
        let mut sps = Vec::new();
        // (reviews, keyword sets): a has both query keywords, b and c one.
        let specs: [(&str, &[&str], &[u8]); 3] = [
            ("a", &["sushi", "ramen"], &[4, 4, 4, 4]),
            ("b", &["sushi"], &[5, 4]),
            ("c", &["ramen"], &[5, 5, 5, 5, 5, 4]),
        ];
        for (ext, keywords, stars) in specs {
            let id = g
                .add_service_provider(ext, ext, kws(keywords), GeoPoint::new(0.0, 0.0).unwrap())
                .unwrap();
            for &s in stars {
                g.record_review(id, s).unwrap();
            }
            g.connect(u, id, 0.9, EdgeKind::Review { stars: stars[0] }).unwrap();
            sps.push(id);
        }
        let query = Query {
            origin: u,
            keywords: kws(&["sushi", "ramen"]),
            center: GeoPoint::new(0.0, 0.0).unwrap(),
            radius_m: 1_000.0,
            k: 3,
        };
        let candidates = crate::query::top_k_nearest(&g, &query).unwrap();
        assert_eq!(candidates.len(), 3);
        Fixture {
            graph: g,
            query,
            candidates,
        }
    }

    #[test]
    fn orders_by_rank_then_score() {
        let f = fixture();
        // ratio_m: a = 1.0 → rank 5; b, c = 0.5 → rank 3.
        let model = threshold_model(3, 5);
        let got = optimize(
            &f.graph,
            &f.query,
            &f.candidates,
            &model,
            &AlphaParams::default(),
            AlphaScope::Candidates,
        )
        .unwrap();
        assert_eq!(got.len(), 3);
        assert_eq!(f.graph.external_id(got[0].sp), Some("a"));
        assert_eq!(got[0].rank, 5);
        // Within rank 3: c has more reviews and a higher average than b.
        assert_eq!(f.graph.external_id(got[1].sp), Some("c"));
        assert_eq!(f.graph.external_id(got[2].sp), Some("b"));
        assert!(got[1].score_c >= got[2].score_c);
    }

    #[test]
    fn output_is_permutation_of_input() {
        let f = fixture();
        let got = optimize(
            &f.graph,
            &f.query,
            &f.candidates,
            &constant_model(4),
            &AlphaParams::default(),
            AlphaScope::Candidates,
        )
        .unwrap();
        let mut in_ids: Vec<NodeId> = f.candidates.iter().map(|c| c.sp).collect();
        let mut out_ids: Vec<NodeId> = got.iter().map(|r| r.sp).collect();
        in_ids.sort();
        out_ids.sort();
        assert_eq!(in_ids, out_ids);
    }

    #[test]
    fn empty_candidates_give_empty_output() {
        let f = fixture();
        let got = optimize(
            &f.graph,
            &f.query,
            &[],
            &constant_model(1),
            &AlphaParams::default(),
            AlphaScope::Candidates,
        )
        .unwrap();
        assert!(got.is_empty());
    }

    #[test]
    fn single_candidate_passes_through() {
        let f = fixture();
        let one = &f.candidates[..1];
        let got = optimize(
            &f.graph,
            &f.query,
            one,
            &constant_model(2),
            &AlphaParams::default(),
            AlphaScope::Global,
        )
        .unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].sp, one[0].sp);
        assert_eq!(got[0].rank, 2);
        assert_eq!(got[0].path, one[0].path);
        assert_eq!(got[0].path_cost, one[0].cost);
    }

    #[test]
    fn degenerate_stats_reduce_to_raw_order() {
        // All providers share count and average, a constant model votes one
        // rank, so α ≡ 1 and score_c is constant: the ordering must fall
        // back to (path_cost asc, id asc), i.e. the raw query order.
        let mut g = GeosocialGraph::new();
        let u = g.add_user("u").unwrap();
        for (ext, w) in [("a", 0.9), ("b", 0.7), ("c", 0.8)] {
            let id = g
                .add_service_provider(ext, ext, kws(&["k"]), GeoPoint::new(0.0, 0.0).unwrap())
                .unwrap();
            g.record_review(id, 4).unwrap();
            g.connect(u, id, w, EdgeKind::Review { stars: 4 }).unwrap();
        }
        let query = Query {
            origin: u,
            keywords: kws(&["k"]),
            center: GeoPoint::new(0.0, 0.0).unwrap(),
            radius_m: 100.0,
            k: 3,
        };
        let raw = crate::query::top_k_nearest(&g, &query).unwrap();
        let got = optimize(
            &g,
            &query,
            &raw,
            &constant_model(3),
            &AlphaParams::default(),
            AlphaScope::Candidates,
        )
        .unwrap();
        let raw_ids: Vec<NodeId> = raw.iter().map(|c| c.sp).collect();
        let got_ids: Vec<NodeId> = got.iter().map(|r| r.sp).collect();
        assert_eq!(raw_ids, got_ids);
        for r in &got {
            assert_eq!(r.alpha, 1.0);
        }
    }

    #[test]
    fn equal_rank_and_score_break_by_cost() {
        // Two providers with identical stats and a constant model: rank and
        // score_c tie, so path cost must decide.
        let mut g = GeosocialGraph::new();
        let u = g.add_user("u").unwrap();
        let mut ids = Vec::new();
        for (ext, w) in [("x", 0.8), ("y", 0.5)] {
            let id = g
                .add_service_provider(ext, ext, kws(&["k"]), GeoPoint::new(0.0, 0.0).unwrap())
                .unwrap();
            g.record_review(id, 3).unwrap();
            g.connect(u, id, w, EdgeKind::Review { stars: 3 }).unwrap();
            ids.push(id);
        }
        let query = Query {
            origin: u,
            keywords: kws(&["k"]),
            center: GeoPoint::new(0.0, 0.0).unwrap(),
            radius_m: 100.0,
            k: 2,
        };
        let raw = crate::query::top_k_nearest(&g, &query).unwrap();
        assert!((raw[0].cost - 0.2).abs() < 1e-12);
        assert!((raw[1].cost - 0.5).abs() < 1e-12);
        let got = optimize(
            &g,
            &query,
            &raw,
            &constant_model(4),
            &AlphaParams::default(),
            AlphaScope::Candidates,
        )
        .unwrap();
        assert_eq!(got[0].sp, ids[0]); // lower cost first
        assert_eq!(got[1].sp, ids[1]);
    }
}
