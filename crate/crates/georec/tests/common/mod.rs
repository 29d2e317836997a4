//! Shared helpers for integration tests: a seeded random graph generator
//! and an exhaustive Floyd–Warshall oracle to check the query engine
//! against.
#![allow(dead_code)] // each test target uses a different subset

use std::collections::BTreeSet;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use georec::{EdgeKind, GeoPoint, GeosocialGraph, NodeId, Query};

pub struct Rng(pub ChaCha8Rng);

impl Rng {
    pub fn seeded(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn unit(&mut self) -> f64 {
        // 53 random mantissa bits, uniform on [0, 1).
        (self.0.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn below(&mut self, bound: u64) -> u64 {
        self.0.next_u64() % bound
    }

    pub fn chance(&mut self, p: f64) -> bool {
        self.unit() < p
    }
}

pub const KEYWORD_POOL: [&str; 6] = ["sushi", "ramen", "cafe", "bar", "pizza", "books"];

/// A random geosocial graph of at most `max_nodes` nodes, plus a random
/// query against it. Node kinds, keyword sets, locations, edges, and
/// weights are all randomized; about one weight in ten is exactly 1.0 so
/// zero-cost plateaus are exercised.
pub fn random_graph_and_query(seed: u64, max_nodes: u64) -> (GeosocialGraph, Query) {
    let mut rng = Rng::seeded(seed);
    let n = rng.below(max_nodes - 1) + 2; // 2..=max_nodes

    let mut graph = GeosocialGraph::new();
    let mut users = Vec::new();
    let mut sps = Vec::new();
    for i in 0..n {
        // Keep at least one user so a query origin exists.
        if users.is_empty() && i == n - 1 || rng.chance(0.5) {
            users.push(graph.add_user(&format!("u{i}")).unwrap());
        } else {
            let kw_count = rng.below(4); // 0..=3, empty sets allowed
            let mut keywords = BTreeSet::new();
            for _ in 0..kw_count {
                keywords.insert(KEYWORD_POOL[rng.below(KEYWORD_POOL.len() as u64) as usize].to_string());
            }
            let location = GeoPoint::new(rng.unit() - 0.5, rng.unit() - 0.5).unwrap();
            sps.push(
                graph
                    .add_service_provider(&format!("s{i}"), &format!("S{i}"), keywords, location)
                    .unwrap(),
            );
        }
    }

    for a in 0..n as u32 {
        for b in (a + 1)..n as u32 {
            let (na, nb) = (NodeId(a), NodeId(b));
            if !rng.chance(0.4) {
                continue;
            }
            let weight = if rng.chance(0.1) { 1.0 } else { rng.unit() };
            let kind = match (graph.is_user(na), graph.is_user(nb)) {
                (true, true) => EdgeKind::Friendship,
                (true, false) | (false, true) => EdgeKind::Review {
                    stars: rng.below(5) as u8 + 1,
                },
                (false, false) => continue, // provider-provider edges do not exist
            };
            graph.connect(na, nb, weight, kind).unwrap();
        }
    }

    let mut query_keywords = BTreeSet::new();
    for _ in 0..rng.below(3) + 1 {
        query_keywords.insert(KEYWORD_POOL[rng.below(KEYWORD_POOL.len() as u64) as usize].to_string());
    }
    let query = Query {
        origin: users[rng.below(users.len() as u64) as usize],
        keywords: query_keywords,
        center: GeoPoint::new(rng.unit() - 0.5, rng.unit() - 0.5).unwrap(),
        radius_m: rng.unit() * 120_000.0,
        k: rng.below(n + 1) as usize,
    };
    (graph, query)
}

/// Exhaustive all-pairs shortest paths over edge costs `1 - w`.
pub fn floyd_warshall(graph: &GeosocialGraph) -> Vec<Vec<f64>> {
    let n = graph.node_count();
    let mut dist = vec![vec![f64::INFINITY; n]; n];
    for (i, row) in dist.iter_mut().enumerate() {
        row[i] = 0.0;
        for (nbr, edge) in graph.neighbors(NodeId(i as u32)).unwrap() {
            row[nbr.index()] = 1.0 - edge.weight;
        }
    }
    for k in 0..n {
        for i in 0..n {
            if dist[i][k].is_infinite() {
                continue;
            }
            for j in 0..n {
                let through = dist[i][k] + dist[k][j];
                if through < dist[i][j] {
                    dist[i][j] = through;
                }
            }
        }
    }
    dist
}

/// The oracle answer: eligible, reachable providers sorted by
/// (cost asc, id asc), truncated to `k`.
pub fn oracle_top_k(graph: &GeosocialGraph, query: &Query) -> Vec<(NodeId, f64)> {
    let dist = floyd_warshall(graph);
    let mut eligible: Vec<(NodeId, f64)> = graph
        .service_providers()
        .iter()
        .filter(|sp| georec::is_eligible(sp, query))
        .map(|sp| (sp.id, dist[query.origin.index()][sp.id.index()]))
        .filter(|(_, cost)| cost.is_finite())
        .collect();
    eligible.sort_by(|(na, ca), (nb, cb)| ca.total_cmp(cb).then_with(|| na.cmp(nb)));
    eligible.truncate(query.k);
    eligible
}
