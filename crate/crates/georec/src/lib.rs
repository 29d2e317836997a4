//! Geosocial recommendation engine.
//!
//! A weighted undirected graph mixes social edges (user–user intimacy) and
//! rating edges (user–provider reviews), both with weights in `[0, 1]`.
//! Queries find the k service providers matching a keyword set inside a
//! spatial radius with the cheapest shortest path from the querying user,
//! then a two-stage pipeline re-ranks them: a random-forest classifier
//! assigns each provider a 1–5 rank, and a comment-volume multiplier α
//! orders providers within a rank by `α · rating`.
//!
//! Modules:
//! - [`graph`]: the in-memory network and its invariants
//! - [`snapshot`]: deterministic versioned JSON persistence
//! - [`ingest`]: JSON-lines ingestion (Yelp Open Dataset layout)
//! - [`query`]: Dijkstra-based top-k keyword/spatial search
//! - [`score`]: the α multiplier and adjusted score
//! - [`features`] / [`forest`]: ranking features and the random forest
//! - [`pipeline`]: the end-to-end re-ranking step

pub mod features;
pub mod forest;
pub mod geo;
pub mod graph;
pub mod ingest;
pub mod pipeline;
pub mod query;
pub mod score;
pub mod snapshot;

pub use features::{derive_label, extract_features, training_examples, FeatureVector, LabeledExample};
pub use forest::{
    evaluate, load_model, model_from_str, model_to_string, predict, save_model, split_train_test,
    train, DecisionTree, EvalReport, ForestConfig, RandomForestModel, RankError, TrainingMeta,
    TreeNode,
};
pub use geo::{haversine_m, GeoPoint, InvalidCoordinate, EARTH_RADIUS_M};
pub use graph::{Edge, EdgeKind, GeosocialGraph, GraphError, NodeId, ServiceProviderNode, SpStats, UserNode};
pub use ingest::{
    build_graph, ingest_readers, intimacy, keywords_from_categories, parse_businesses,
    parse_reviews, parse_users, stars_to_weight, BusinessRecord, IngestConfig, IngestError,
    IngestReport, ReviewRecord, UserRecord,
};
pub use pipeline::{optimize, PipelineError, Recommendation};
pub use query::{edge_cost, is_eligible, top_k_nearest, Candidate, Query, QueryError};
pub use score::{alpha, count_stats, score_c, sgnpow, AlphaParams, AlphaScope, CountStats, ScoreError};
pub use snapshot::{
    graph_from_snapshot_str, graphs_equal, load_snapshot, save_snapshot, snapshot_to_string,
    SnapshotError, SNAPSHOT_VERSION,
};
