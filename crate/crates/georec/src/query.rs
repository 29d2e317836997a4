//! Top-k nearest keyword/spatial queries over the geosocial graph.
//!
//! The query runs Dijkstra from the querying user across the whole graph
//! (users and providers alike can be intermediate hops). Edge weight `w`
//! becomes traversal cost `1 - w`, so strong trust is cheap to cross. A
//! settled service provider that matches the keyword and radius constraints
//! becomes a candidate; the search stops once the k-th candidate's cost
//! plateau is exhausted, which keeps results identical to an exhaustive
//! shortest-path computation even in the presence of zero-cost edges.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::collections::BTreeSet;

use thiserror::Error;

use crate::geo::{haversine_m, GeoPoint};
use crate::graph::{GeosocialGraph, NodeId, ServiceProviderNode};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QueryError {
    #[error("unknown node id {0}")]
    UnknownNode(NodeId),
    #[error("query origin {0} is not a user node")]
    OriginNotUser(NodeId),
    #[error("query keyword set is empty")]
    EmptyKeywords,
    #[error("edge weight {0} outside [0, 1]")]
    WeightOutOfRange(f64),
}

/// A top-k nearest query: who is asking, what they want, and where.
#[derive(Debug, Clone)]
pub struct Query {
    pub origin: NodeId,
    pub keywords: BTreeSet<String>,
    pub center: GeoPoint,
    pub radius_m: f64,
    pub k: usize,
}

/// A provider reached by the query, with its shortest-path cost and path.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub sp: NodeId,
    pub cost: f64,
    pub path: Vec<NodeId>,
}

/// Traversal cost of an edge with weight `w` in [0, 1]: `1 - w`.
pub fn edge_cost(weight: f64) -> Result<f64, QueryError> {
    if !(0.0..=1.0).contains(&weight) {
        return Err(QueryError::WeightOutOfRange(weight));
    }
    Ok(1.0 - weight)
}

/// Whether `sp` satisfies the query constraints: within the radius (closed
/// disk) and sharing at least one keyword.
pub fn is_eligible(sp: &ServiceProviderNode, query: &Query) -> bool {
    haversine_m(sp.location, query.center) <= query.radius_m
        && query.keywords.iter().any(|k| sp.keywords.contains(k))
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Frontier {
    cost: f64,
    node: NodeId,
}

impl Eq for Frontier {}

// BinaryHeap is a max-heap; reverse so pops come out (cost asc, id asc).
impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Run the top-k nearest query. Results are sorted by (cost asc, id asc)
/// and capped at `query.k`.
pub fn top_k_nearest(graph: &GeosocialGraph, query: &Query) -> Result<Vec<Candidate>, QueryError> {
    if query.origin.index() >= graph.node_count() {
        return Err(QueryError::UnknownNode(query.origin));
    }
    if !graph.is_user(query.origin) {
        return Err(QueryError::OriginNotUser(query.origin));
    }
    if query.keywords.is_empty() {
        return Err(QueryError::EmptyKeywords);
    }
    if query.k == 0 {
        return Ok(Vec::new());
    }

    let n = graph.node_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut pred: Vec<Option<NodeId>> = vec![None; n];
    let mut settled = vec![false; n];
    let mut heap = BinaryHeap::new();
    let mut found: Vec<(NodeId, f64)> = Vec::new();
    // Once k candidates exist, keep settling the equal-cost plateau so that
    // id tie-breaking matches the exhaustive oracle, then stop.
    let mut cutoff: Option<f64> = None;

    dist[query.origin.index()] = 0.0;
    heap.push(Frontier {
        cost: 0.0,
        node: query.origin,
    });

    while let Some(Frontier { cost, node }) = heap.pop() {
        if settled[node.index()] {
            continue;
        }
        if let Some(limit) = cutoff {
            if cost > limit {
                break;
            }
        }
        settled[node.index()] = true;

        if let Some(sp) = graph.service_provider(node) {
            if is_eligible(sp, query) {
                found.push((node, cost));
                if found.len() == query.k {
                    cutoff = Some(cost);
                }
            }
        }

        for (neighbor, edge) in graph.neighbors(node).expect("node id validated") {
            if settled[neighbor.index()] {
                continue;
            }
            debug_assert!((0.0..=1.0).contains(&edge.weight));
            let next = cost + (1.0 - edge.weight);
            if next < dist[neighbor.index()] {
                dist[neighbor.index()] = next;
                pred[neighbor.index()] = Some(node);
                heap.push(Frontier {
                    cost: next,
                    node: *neighbor,
                });
            }
        }
    }

    found.sort_by(|(na, ca), (nb, cb)| ca.total_cmp(cb).then_with(|| na.cmp(nb)));
    found.truncate(query.k);

    Ok(found
        .into_iter()
        .map(|(sp, cost)| {
            let mut path = vec![sp];
            let mut cur = sp;
            while let Some(prev) = pred[cur.index()] {
                path.push(prev);
                cur = prev;
            }
            path.reverse();
            debug_assert_eq!(path.first(), Some(&query.origin));
            Candidate { sp, cost, path }
        })
        .collect())
}
