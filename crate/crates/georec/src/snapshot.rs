//! Versioned JSON persistence for [`GeosocialGraph`].
//!
//! The document is byte-deterministic: object keys appear in lexicographic
//! order, arrays are sorted by node id, and each undirected edge is written
//! once with `a < b`. Loading replays the document through the normal graph
//! API and finishes with a full structural audit, so a corrupted file cannot
//! produce an invalid graph.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{EdgeKind, GeosocialGraph, NodeId, SpStats};

pub const SNAPSHOT_VERSION: &str = "1";

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("unsupported snapshot version {0:?} (expected {SNAPSHOT_VERSION:?})")]
    UnsupportedVersion(String),
    #[error("corrupt snapshot: {0}")]
    Corrupt(String),
}

// Field order in these rows is alphabetical on purpose: serde emits struct
// fields in declaration order, and the format promises lexicographic keys.

#[derive(Serialize, Deserialize)]
struct EdgeRow {
    a: u32,
    b: u32,
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    stars: Option<u8>,
    weight: f64,
}

#[derive(Serialize, Deserialize)]
struct LocationRow {
    lat: f64,
    lon: f64,
}

#[derive(Serialize, Deserialize)]
struct SpRow {
    external_id: String,
    id: u32,
    keywords: BTreeSet<String>,
    location: LocationRow,
    name: String,
}

#[derive(Serialize, Deserialize)]
struct StatsRow {
    count: u64,
    stars_sum: u64,
}

#[derive(Serialize, Deserialize)]
struct UserRow {
    external_id: String,
    id: u32,
}

#[derive(Serialize, Deserialize)]
struct SnapshotDoc {
    edges: Vec<EdgeRow>,
    sps: Vec<SpRow>,
    stats: BTreeMap<String, StatsRow>,
    users: Vec<UserRow>,
    version: String,
}

#[derive(Deserialize)]
struct VersionProbe {
    version: Option<String>,
}

/// Serialize the graph to its canonical snapshot string.
pub fn snapshot_to_string(graph: &GeosocialGraph) -> String {
    let users = graph
        .users()
        .iter()
        .map(|u| UserRow {
            external_id: u.external_id.clone(),
            id: u.id.0,
        })
        .collect();
    let sps = graph
        .service_providers()
        .iter()
        .map(|sp| SpRow {
            external_id: sp.external_id.clone(),
            id: sp.id.0,
            keywords: sp.keywords.clone(),
            location: LocationRow {
                lat: sp.location.lat(),
                lon: sp.location.lon(),
            },
            name: sp.name.clone(),
        })
        .collect();

    let mut edges = Vec::with_capacity(graph.edge_count());
    for id in 0..graph.node_count() as u32 {
        let here = NodeId(id);
        for (nbr, edge) in graph.neighbors(here).expect("dense ids") {
            if *nbr > here {
                let (kind, stars) = match edge.kind {
                    EdgeKind::Friendship => ("friendship", None),
                    EdgeKind::Review { stars } => ("review", Some(stars)),
                };
                edges.push(EdgeRow {
                    a: edge.a.0,
                    b: edge.b.0,
                    kind: kind.to_string(),
                    stars,
                    weight: edge.weight,
                });
            }
        }
    }

    let mut stats = BTreeMap::new();
    for sp in graph.service_providers() {
        let s = graph.sp_stats(sp.id).expect("sp stats present");
        stats.insert(
            sp.id.0.to_string(),
            StatsRow {
                count: s.count,
                stars_sum: s.stars_sum,
            },
        );
    }

    let doc = SnapshotDoc {
        edges,
        sps,
        stats,
        users,
        version: SNAPSHOT_VERSION.to_string(),
    };
    serde_json::to_string(&doc).expect("snapshot serialization cannot fail")
}

pub fn save_snapshot(graph: &GeosocialGraph, path: impl AsRef<Path>) -> Result<(), SnapshotError> {
    let mut body = snapshot_to_string(graph);
    body.push('\n');
    fs::write(path, body)?;
    Ok(())
}

/// Rebuild a graph from a snapshot string, validating version and structure.
pub fn graph_from_snapshot_str(input: &str) -> Result<GeosocialGraph, SnapshotError> {
    let probe: VersionProbe = serde_json::from_str(input)
        .map_err(|e| SnapshotError::Corrupt(format!("not a snapshot document: {e}")))?;
    match probe.version.as_deref() {
        Some(SNAPSHOT_VERSION) => {}
        Some(other) => return Err(SnapshotError::UnsupportedVersion(other.to_string())),
        None => return Err(SnapshotError::Corrupt("missing version field".into())),
    }
    let doc: SnapshotDoc =
        serde_json::from_str(input).map_err(|e| SnapshotError::Corrupt(e.to_string()))?;

    // Nodes must form a dense 0..n id range across both kinds.
    enum Row<'a> {
        User(&'a UserRow),
        Sp(&'a SpRow),
    }
    let mut rows: Vec<Row> = Vec::with_capacity(doc.users.len() + doc.sps.len());
    rows.extend(doc.users.iter().map(Row::User));
    rows.extend(doc.sps.iter().map(Row::Sp));
    rows.sort_by_key(|r| match r {
        Row::User(u) => u.id,
        Row::Sp(s) => s.id,
    });

    let mut graph = GeosocialGraph::new();
    for (expected, row) in rows.iter().enumerate() {
        let assigned = match row {
            Row::User(u) => {
                if u.id as usize != expected {
                    return Err(SnapshotError::Corrupt(format!(
                        "node ids not dense: expected {expected}, found {}",
                        u.id
                    )));
                }
                graph
                    .add_user(&u.external_id)
                    .map_err(|e| SnapshotError::Corrupt(e.to_string()))?
            }
            Row::Sp(s) => {
                if s.id as usize != expected {
                    return Err(SnapshotError::Corrupt(format!(
                        "node ids not dense: expected {expected}, found {}",
                        s.id
                    )));
                }
                let location = crate::geo::GeoPoint::new(s.location.lat, s.location.lon)
                    .map_err(|e| SnapshotError::Corrupt(e.to_string()))?;
                graph
                    .add_service_provider(&s.external_id, &s.name, s.keywords.clone(), location)
                    .map_err(|e| SnapshotError::Corrupt(e.to_string()))?
            }
        };
        debug_assert_eq!(assigned.index(), expected);
    }

    for row in &doc.edges {
        let kind = match (row.kind.as_str(), row.stars) {
            ("friendship", None) => EdgeKind::Friendship,
            ("review", Some(stars)) => EdgeKind::Review { stars },
            _ => {
                return Err(SnapshotError::Corrupt(format!(
                    "edge {}-{}: kind {:?} inconsistent with stars {:?}",
                    row.a, row.b, row.kind, row.stars
                )))
            }
        };
        graph
            .connect(NodeId(row.a), NodeId(row.b), row.weight, kind)
            .map_err(|e| SnapshotError::Corrupt(e.to_string()))?;
    }

    for (key, row) in &doc.stats {
        let id: u32 = key
            .parse()
            .map_err(|_| SnapshotError::Corrupt(format!("bad stats key {key:?}")))?;
        graph
            .set_sp_stats(
                NodeId(id),
                SpStats {
                    count: row.count,
                    stars_sum: row.stars_sum,
                },
            )
            .map_err(|e| SnapshotError::Corrupt(e.to_string()))?;
    }

    graph.audit().map_err(SnapshotError::Corrupt)?;
    Ok(graph)
}

pub fn load_snapshot(path: impl AsRef<Path>) -> Result<GeosocialGraph, SnapshotError> {
    let body = fs::read_to_string(path)?;
    graph_from_snapshot_str(&body)
}

/// Structural equality between two graphs: same nodes, edges, and stats.
/// Used by round-trip tests.
pub fn graphs_equal(a: &GeosocialGraph, b: &GeosocialGraph) -> bool {
    if a.node_count() != b.node_count() || a.edge_count() != b.edge_count() {
        return false;
    }
    if a.users() != b.users() || a.service_providers() != b.service_providers() {
        return false;
    }
    for id in 0..a.node_count() as u32 {
        let n = NodeId(id);
        if a.neighbors(n).ok() != b.neighbors(n).ok() {
            return false;
        }
    }
    a.service_providers()
        .iter()
        .all(|sp| a.sp_stats(sp.id).ok() == b.sp_stats(sp.id).ok())
}
