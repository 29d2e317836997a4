//! In-memory geosocial network: users and service providers joined by
//! weighted friendship/review edges, with a keyword index and per-provider
//! review statistics.
//!
//! Node ids are dense (`0..node_count`) and shared between users and
//! service providers. The graph is built single-writer and read-only
//! afterwards; queries never mutate it.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{GeoPoint, InvalidCoordinate};

/// Dense node identifier, stable across snapshot save/load.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("duplicate node: {0:?}")]
    DuplicateNode(String),
    #[error(transparent)]
    InvalidCoordinate(#[from] InvalidCoordinate),
    #[error("self loop on node {0}")]
    SelfLoop(NodeId),
    #[error("unknown node id {0}")]
    UnknownNode(NodeId),
    #[error("edge weight {0} outside [0, 1]")]
    WeightOutOfRange(f64),
    #[error("edge kind does not match endpoint node kinds ({0} - {1})")]
    KindMismatch(NodeId, NodeId),
    #[error("node {0} is not a service provider")]
    NotAServiceProvider(NodeId),
    #[error("stars {0} outside 1..=5")]
    StarsOutOfRange(u8),
}

/// A user vertex. Users carry no location; spatial constraints apply to
/// service providers only, and queries supply their own center point.
#[derive(Debug, Clone, PartialEq)]
pub struct UserNode {
    pub id: NodeId,
    pub external_id: String,
}

/// A service provider vertex with its keyword set and location.
/// An empty keyword set is legal; such providers simply never match a query.
#[derive(Debug, Clone, PartialEq)]
pub struct ServiceProviderNode {
    pub id: NodeId,
    pub external_id: String,
    pub name: String,
    pub keywords: BTreeSet<String>,
    pub location: GeoPoint,
}

/// Edge kind; review edges carry the star rating they were collapsed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    Friendship,
    Review { stars: u8 },
}

/// An undirected edge. Stored with `a < b`; visible from both endpoints
/// through [`GeosocialGraph::neighbors`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub a: NodeId,
    pub b: NodeId,
    pub weight: f64,
    pub kind: EdgeKind,
}

impl Edge {
    /// The endpoint that is not `n`.
    pub fn other(&self, n: NodeId) -> NodeId {
        if self.a == n {
            self.b
        } else {
            self.a
        }
    }
}

/// Review statistics for one service provider. `count` is the number of
/// reviews ingested for the provider, not the number of collapsed review
/// edges; the two differ when a user reviews the same place repeatedly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SpStats {
    pub count: u64,
    pub stars_sum: u64,
}

impl SpStats {
    /// Arithmetic mean of all review stars, absent when there are no reviews.
    pub fn avg_stars(&self) -> Option<f64> {
        if self.count == 0 {
            None
        } else {
            Some(self.stars_sum as f64 / self.count as f64)
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum NodeRef {
    User(u32),
    Sp(u32),
}

/// The geosocial network.
#[derive(Debug, Default, Clone)]
pub struct GeosocialGraph {
    nodes: Vec<NodeRef>,
    users: Vec<UserNode>,
    sps: Vec<ServiceProviderNode>,
    adjacency: Vec<Vec<(NodeId, Edge)>>,
    keyword_index: HashMap<String, BTreeSet<NodeId>>,
    stats: HashMap<NodeId, SpStats>,
    user_ids: HashMap<String, NodeId>,
    sp_ids: HashMap<String, NodeId>,
    edge_count: usize,
}

impl GeosocialGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn users(&self) -> &[UserNode] {
        &self.users
    }

    pub fn service_providers(&self) -> &[ServiceProviderNode] {
        &self.sps
    }

    pub fn is_user(&self, n: NodeId) -> bool {
        matches!(self.nodes.get(n.index()), Some(NodeRef::User(_)))
    }

    pub fn is_service_provider(&self, n: NodeId) -> bool {
        matches!(self.nodes.get(n.index()), Some(NodeRef::Sp(_)))
    }

    pub fn user(&self, n: NodeId) -> Option<&UserNode> {
        match self.nodes.get(n.index())? {
            NodeRef::User(i) => self.users.get(*i as usize),
            NodeRef::Sp(_) => None,
        }
    }

    pub fn service_provider(&self, n: NodeId) -> Option<&ServiceProviderNode> {
        match self.nodes.get(n.index())? {
            NodeRef::Sp(i) => self.sps.get(*i as usize),
            NodeRef::User(_) => None,
        }
    }

    pub fn user_by_external_id(&self, external_id: &str) -> Option<NodeId> {
        self.user_ids.get(external_id).copied()
    }

    pub fn sp_by_external_id(&self, external_id: &str) -> Option<NodeId> {
        self.sp_ids.get(external_id).copied()
    }

    /// External id of any node, for display.
    pub fn external_id(&self, n: NodeId) -> Option<&str> {
        match self.nodes.get(n.index())? {
            NodeRef::User(i) => Some(self.users[*i as usize].external_id.as_str()),
            NodeRef::Sp(i) => Some(self.sps[*i as usize].external_id.as_str()),
        }
    }

    /// Service providers carrying `keyword`, if any.
    pub fn sps_with_keyword(&self, keyword: &str) -> Option<&BTreeSet<NodeId>> {
        self.keyword_index.get(keyword)
    }

    /// All distinct keywords, sorted. Intended for building keyword pools.
    pub fn keywords(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self.keyword_index.keys().map(String::as_str).collect();
        v.sort_unstable();
        v
    }

    pub fn add_user(&mut self, external_id: &str) -> Result<NodeId, GraphError> {
        if self.user_ids.contains_key(external_id) {
            return Err(GraphError::DuplicateNode(external_id.to_string()));
        }
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(NodeRef::User(self.users.len() as u32));
        self.users.push(UserNode {
            id,
            external_id: external_id.to_string(),
        });
        self.adjacency.push(Vec::new());
        self.user_ids.insert(external_id.to_string(), id);
        Ok(id)
    }

    pub fn add_service_provider(
        &mut self,
        external_id: &str,
        name: &str,
        keywords: BTreeSet<String>,
        location: GeoPoint,
    ) -> Result<NodeId, GraphError> {
        if self.sp_ids.contains_key(external_id) {
            return Err(GraphError::DuplicateNode(external_id.to_string()));
        }
        if !location.in_bounds() {
            return Err(GraphError::InvalidCoordinate(InvalidCoordinate {
                lat: location.lat(),
                lon: location.lon(),
            }));
        }
        let id = NodeId(self.nodes.len() as u32);
        for kw in &keywords {
            self.keyword_index.entry(kw.clone()).or_default().insert(id);
        }
        self.nodes.push(NodeRef::Sp(self.sps.len() as u32));
        self.sps.push(ServiceProviderNode {
            id,
            external_id: external_id.to_string(),
            name: name.to_string(),
            keywords,
            location,
        });
        self.adjacency.push(Vec::new());
        self.sp_ids.insert(external_id.to_string(), id);
        self.stats.insert(id, SpStats::default());
        Ok(id)
    }

    /// Insert or replace the undirected edge between `a` and `b`.
    /// A repeated connect on the same pair replaces the previous edge
    /// (last write wins); the graph never holds parallel edges.
    pub fn connect(
        &mut self,
        a: NodeId,
        b: NodeId,
        weight: f64,
        kind: EdgeKind,
    ) -> Result<Edge, GraphError> {
        if a == b {
            return Err(GraphError::SelfLoop(a));
        }
        if a.index() >= self.nodes.len() {
            return Err(GraphError::UnknownNode(a));
        }
        if b.index() >= self.nodes.len() {
            return Err(GraphError::UnknownNode(b));
        }
        if !(0.0..=1.0).contains(&weight) {
            return Err(GraphError::WeightOutOfRange(weight));
        }
        let kind_ok = match kind {
            EdgeKind::Friendship => self.is_user(a) && self.is_user(b),
            EdgeKind::Review { stars } => {
                if !(1..=5).contains(&stars) {
                    return Err(GraphError::StarsOutOfRange(stars));
                }
                (self.is_user(a) && self.is_service_provider(b))
                    || (self.is_service_provider(a) && self.is_user(b))
            }
        };
        if !kind_ok {
            return Err(GraphError::KindMismatch(a, b));
        }

        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let edge = Edge {
            a: lo,
            b: hi,
            weight,
            kind,
        };
        let inserted = Self::put_adjacent(&mut self.adjacency[a.index()], b, edge);
        Self::put_adjacent(&mut self.adjacency[b.index()], a, edge);
        if inserted {
            self.edge_count += 1;
        }
        Ok(edge)
    }

    /// Returns true when the entry is new, false when it replaced one.
    fn put_adjacent(list: &mut Vec<(NodeId, Edge)>, neighbor: NodeId, edge: Edge) -> bool {
        match list.binary_search_by_key(&neighbor, |(n, _)| *n) {
            Ok(pos) => {
                list[pos] = (neighbor, edge);
                false
            }
            Err(pos) => {
                list.insert(pos, (neighbor, edge));
                true
            }
        }
    }

    /// Neighbors of `n` in ascending id order.
    pub fn neighbors(&self, n: NodeId) -> Result<&[(NodeId, Edge)], GraphError> {
        self.adjacency
            .get(n.index())
            .map(Vec::as_slice)
            .ok_or(GraphError::UnknownNode(n))
    }

    /// The edge between `a` and `b`, if one exists.
    pub fn edge_between(&self, a: NodeId, b: NodeId) -> Option<&Edge> {
        let list = self.adjacency.get(a.index())?;
        list.binary_search_by_key(&b, |(n, _)| *n)
            .ok()
            .map(|pos| &list[pos].1)
    }

    pub fn sp_stats(&self, sp: NodeId) -> Result<SpStats, GraphError> {
        if sp.index() >= self.nodes.len() {
            return Err(GraphError::UnknownNode(sp));
        }
        match self.stats.get(&sp) {
            Some(s) => Ok(*s),
            None => Err(GraphError::NotAServiceProvider(sp)),
        }
    }

    /// Account one review in the provider's statistics. Statistics are kept
    /// separately from edges: the same user reviewing twice collapses to one
    /// edge but still counts twice here.
    pub fn record_review(&mut self, sp: NodeId, stars: u8) -> Result<(), GraphError> {
        if !(1..=5).contains(&stars) {
            return Err(GraphError::StarsOutOfRange(stars));
        }
        if sp.index() >= self.nodes.len() {
            return Err(GraphError::UnknownNode(sp));
        }
        match self.stats.get_mut(&sp) {
            Some(s) => {
                s.count += 1;
                s.stars_sum += stars as u64;
                Ok(())
            }
            None => Err(GraphError::NotAServiceProvider(sp)),
        }
    }

    /// Overwrite the stored statistics for `sp`. Used by snapshot load.
    pub(crate) fn set_sp_stats(&mut self, sp: NodeId, stats: SpStats) -> Result<(), GraphError> {
        if sp.index() >= self.nodes.len() {
            return Err(GraphError::UnknownNode(sp));
        }
        match self.stats.get_mut(&sp) {
            Some(s) => {
                *s = stats;
                Ok(())
            }
            None => Err(GraphError::NotAServiceProvider(sp)),
        }
    }

    /// Review counts of every service provider, in id order.
    pub fn all_sp_counts(&self) -> Vec<u64> {
        self.sps
            .iter()
            .map(|sp| self.stats.get(&sp.id).map(|s| s.count).unwrap_or(0))
            .collect()
    }

    /// Total reviews ingested across all providers.
    pub fn total_reviews(&self) -> u64 {
        self.sps
            .iter()
            .filter_map(|sp| self.stats.get(&sp.id))
            .map(|s| s.count)
            .sum()
    }

    /// Full structural audit: adjacency symmetry, weight bounds, keyword
    /// index exactness, stats keyed exactly by provider ids, coordinates in
    /// bounds. Returns the first violation found.
    pub fn audit(&self) -> Result<(), String> {
        if self.adjacency.len() != self.nodes.len() {
            return Err("adjacency length differs from node count".into());
        }
        for (i, list) in self.adjacency.iter().enumerate() {
            let here = NodeId(i as u32);
            let mut prev: Option<NodeId> = None;
            for (nbr, edge) in list {
                if *nbr == here {
                    return Err(format!("self loop at node {here}"));
                }
                if let Some(p) = prev {
                    if *nbr <= p {
                        return Err(format!("adjacency of {here} not strictly ascending"));
                    }
                }
                prev = Some(*nbr);
                if !(0.0..=1.0).contains(&edge.weight) {
                    return Err(format!("edge {}-{} weight {} out of range", edge.a, edge.b, edge.weight));
                }
                let mirror = self
                    .adjacency
                    .get(nbr.index())
                    .and_then(|l| l.binary_search_by_key(&here, |(n, _)| *n).ok().map(|p| &l[p].1));
                match mirror {
                    Some(m) if m == edge => {}
                    _ => return Err(format!("edge {here}-{nbr} not mirrored identically")),
                }
                if let EdgeKind::Review { stars } = edge.kind {
                    if !(1..=5).contains(&stars) {
                        return Err(format!("edge {}-{} stars {} out of range", edge.a, edge.b, stars));
                    }
                }
            }
        }
        // Keyword index must match a full rebuild.
        let mut rebuilt: HashMap<&str, BTreeSet<NodeId>> = HashMap::new();
        for sp in &self.sps {
            if !sp.location.in_bounds() {
                return Err(format!("sp {} location out of bounds", sp.id));
            }
            for kw in &sp.keywords {
                rebuilt.entry(kw.as_str()).or_default().insert(sp.id);
            }
        }
        if rebuilt.len() != self.keyword_index.len() {
            return Err("keyword index size mismatch".into());
        }
        for (kw, ids) in &rebuilt {
            if self.keyword_index.get(*kw) != Some(ids) {
                return Err(format!("keyword index entry {kw:?} inconsistent"));
            }
        }
        if self.stats.len() != self.sps.len() {
            return Err("stats key set differs from sp set".into());
        }
        for sp in &self.sps {
            if !self.stats.contains_key(&sp.id) {
                return Err(format!("missing stats for sp {}", sp.id));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point() -> GeoPoint {
        GeoPoint::new(10.0, 20.0).unwrap()
    }

    fn kws(words: &[&str]) -> BTreeSet<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn first_user_gets_id_zero() {
        let mut g = GeosocialGraph::new();
        assert_eq!(g.add_user("u1").unwrap(), NodeId(0));
    }

    #[test]
    fn ids_are_dense_across_node_kinds() {
        let mut g = GeosocialGraph::new();
        g.add_user("u1").unwrap();
        g.add_service_provider("s1", "S1", kws(&["a"]), point()).unwrap();
        g.add_user("u2").unwrap();
        assert_eq!(g.add_user("u9").unwrap(), NodeId(3));
    }

    #[test]
    fn duplicate_user_rejected() {
        let mut g = GeosocialGraph::new();
        g.add_user("u1").unwrap();
        assert!(matches!(g.add_user("u1"), Err(GraphError::DuplicateNode(_))));
    }

    #[test]
    fn sp_keywords_register_in_index() {
        let mut g = GeosocialGraph::new();
        let id = g
            .add_service_provider("s1", "Sushi Place", kws(&["sushi", "bar"]), point())
            .unwrap();
        assert_eq!(g.sps_with_keyword("sushi").unwrap().iter().copied().collect::<Vec<_>>(), vec![id]);
        assert_eq!(g.sps_with_keyword("bar").unwrap().iter().copied().collect::<Vec<_>>(), vec![id]);
        assert!(g.sps_with_keyword("ramen").is_none());
    }

    #[test]
    fn empty_keyword_sp_absent_from_index() {
        let mut g = GeosocialGraph::new();
        g.add_service_provider("s1", "S1", BTreeSet::new(), point()).unwrap();
        assert!(g.keyword_index.is_empty());
        g.audit().unwrap();
    }

    #[test]
    fn invalid_coordinate_rejected() {
        let mut g = GeosocialGraph::new();
        // GeoPoint::new refuses lat 91 outright; a deserialized point that
        // dodges the constructor is caught by add_service_provider.
        assert!(GeoPoint::new(91.0, 0.0).is_err());
        let bad: GeoPoint = serde_json::from_str(r#"{"lat": 91.0, "lon": 0.0}"#).unwrap();
        assert!(matches!(
            g.add_service_provider("s1", "S1", kws(&["a"]), bad),
            Err(GraphError::InvalidCoordinate(_))
        ));
    }

    #[test]
    fn connect_is_symmetric() {
        let mut g = GeosocialGraph::new();
        let u = g.add_user("u").unwrap();
        let s = g.add_service_provider("s", "S", kws(&["a"]), point()).unwrap();
        g.connect(u, s, 0.8, EdgeKind::Review { stars: 4 }).unwrap();
        assert_eq!(g.neighbors(u).unwrap()[0].0, s);
        assert_eq!(g.neighbors(s).unwrap()[0].0, u);
        assert_eq!(g.neighbors(u).unwrap()[0].1.weight, 0.8);
        assert_eq!(g.neighbors(s).unwrap()[0].1.weight, 0.8);
    }

    #[test]
    fn self_loop_rejected() {
        let mut g = GeosocialGraph::new();
        let u = g.add_user("u").unwrap();
        assert!(matches!(
            g.connect(u, u, 0.5, EdgeKind::Friendship),
            Err(GraphError::SelfLoop(_))
        ));
    }

    #[test]
    fn weight_out_of_range_rejected() {
        let mut g = GeosocialGraph::new();
        let u = g.add_user("u").unwrap();
        let v = g.add_user("v").unwrap();
        assert!(matches!(
            g.connect(u, v, 1.3, EdgeKind::Friendship),
            Err(GraphError::WeightOutOfRange(_))
        ));
    }

    #[test]
    fn kind_mismatch_rejected() {
        let mut g = GeosocialGraph::new();
        let u = g.add_user("u").unwrap();
        let s = g.add_service_provider("s", "S", kws(&["a"]), point()).unwrap();
        assert!(matches!(
            g.connect(u, s, 0.5, EdgeKind::Friendship),
            Err(GraphError::KindMismatch(..))
        ));
        let v = g.add_user("v").unwrap();
        assert!(matches!(
            g.connect(u, v, 0.5, EdgeKind::Review { stars: 3 }),
            Err(GraphError::KindMismatch(..))
        ));
    }

    #[test]
    fn repeated_connect_replaces() {
        let mut g = GeosocialGraph::new();
        let u = g.add_user("u").unwrap();
        let s = g.add_service_provider("s", "S", kws(&["a"]), point()).unwrap();
        g.connect(u, s, 0.4, EdgeKind::Review { stars: 2 }).unwrap();
        g.connect(s, u, 1.0, EdgeKind::Review { stars: 5 }).unwrap();
        assert_eq!(g.edge_count(), 1);
        let e = g.edge_between(u, s).unwrap();
        assert_eq!(e.weight, 1.0);
        assert_eq!(e.kind, EdgeKind::Review { stars: 5 });
        g.audit().unwrap();
    }

    #[test]
    fn neighbors_sorted_ascending() {
        let mut g = GeosocialGraph::new();
        let ids: Vec<NodeId> = (0..8).map(|i| g.add_user(&format!("u{i}")).unwrap()).collect();
        g.connect(ids[0], ids[7], 0.5, EdgeKind::Friendship).unwrap();
        g.connect(ids[0], ids[2], 0.5, EdgeKind::Friendship).unwrap();
        g.connect(ids[0], ids[5], 0.5, EdgeKind::Friendship).unwrap();
        let ns: Vec<NodeId> = g.neighbors(ids[0]).unwrap().iter().map(|(n, _)| *n).collect();
        assert_eq!(ns, vec![ids[2], ids[5], ids[7]]);
    }

    #[test]
    fn isolated_node_has_no_neighbors() {
        let mut g = GeosocialGraph::new();
        let u = g.add_user("u").unwrap();
        assert!(g.neighbors(u).unwrap().is_empty());
        assert!(g.neighbors(NodeId(5)).is_err());
    }

    #[test]
    fn stats_average_of_recorded_reviews() {
        let mut g = GeosocialGraph::new();
        let s = g.add_service_provider("s", "S", kws(&["a"]), point()).unwrap();
        for stars in [4, 5, 3] {
            g.record_review(s, stars).unwrap();
        }
        let st = g.sp_stats(s).unwrap();
        assert_eq!(st.count, 3);
        assert_eq!(st.avg_stars(), Some(4.0));
    }

    #[test]
    fn zero_review_stats_have_no_average() {
        let mut g = GeosocialGraph::new();
        let s = g.add_service_provider("s", "S", kws(&["a"]), point()).unwrap();
        let st = g.sp_stats(s).unwrap();
        assert_eq!(st.count, 0);
        assert_eq!(st.avg_stars(), None);
    }

    #[test]
    fn sp_stats_on_user_fails() {
        let mut g = GeosocialGraph::new();
        let u = g.add_user("u").unwrap();
        assert!(matches!(g.sp_stats(u), Err(GraphError::NotAServiceProvider(_))));
        assert!(matches!(g.sp_stats(NodeId(9)), Err(GraphError::UnknownNode(_))));
    }
}
