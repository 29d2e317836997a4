//! JSON-lines ingestion: businesses, users, and reviews in the Yelp Open
//! Dataset layout, assembled into a [`GeosocialGraph`].
//!
//! Parsing is lenient by default: malformed or invariant-violating lines are
//! counted and skipped. Strict mode turns the first bad line into an error
//! carrying its line number. Field quirks of the public dataset are
//! tolerated (friends as a comma-separated string, stars as `4.0`, unknown
//! fields everywhere).

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::BufRead;

use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

use crate::geo::GeoPoint;
use crate::graph::{EdgeKind, GeosocialGraph, GraphError, NodeId};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("stars {0} outside 1..=5")]
    StarsOutOfRange(u8),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IngestConfig {
    /// When set, the first malformed input line aborts ingestion.
    pub strict: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BusinessRecord {
    pub business_id: String,
    pub name: String,
    pub latitude: f64,
    pub longitude: f64,
    pub categories: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserRecord {
    pub user_id: String,
    pub friends: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReviewRecord {
    pub user_id: String,
    pub business_id: String,
    pub stars: u8,
    pub date: String,
}

/// Counters reported by [`build_graph`] and the file-level ingest.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub users_added: u64,
    pub sps_added: u64,
    pub friendship_edges: u64,
    pub review_edges: u64,
    pub reviews_total: u64,
    pub reviews_collapsed: u64,
    pub lines_skipped: u64,
}

#[derive(Deserialize)]
struct RawBusiness {
    business_id: String,
    #[serde(default)]
    name: String,
    latitude: f64,
    longitude: f64,
    #[serde(default)]
    categories: Option<String>,
}

#[derive(Deserialize)]
struct RawUser {
    user_id: String,
    #[serde(default, deserialize_with = "friends_field")]
    friends: Vec<String>,
}

#[derive(Deserialize)]
struct RawReview {
    user_id: String,
    business_id: String,
    stars: f64,
    #[serde(default)]
    date: String,
}

/// The public dataset writes `friends` either as a JSON array or as one
/// comma-separated string (with the literal `"None"` for no friends).
fn friends_field<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<String>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Friends {
        List(Vec<String>),
        Joined(String),
    }
    Ok(match Option::<Friends>::deserialize(d)? {
        None => Vec::new(),
        Some(Friends::List(v)) => v,
        Some(Friends::Joined(s)) if s == "None" => Vec::new(),
        Some(Friends::Joined(s)) => s
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(str::to_string)
            .collect(),
    })
}

/// Result of a lenient line-by-line parse.
#[derive(Debug)]
pub struct Parsed<T> {
    pub records: Vec<T>,
    pub skipped: u64,
}

fn parse_lines<R, T, F>(reader: R, strict: bool, mut convert: F) -> Result<Parsed<T>, IngestError>
where
    R: BufRead,
    F: FnMut(&str) -> Result<T, String>,
{
    let mut records = Vec::new();
    let mut skipped = 0u64;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match convert(&line) {
            Ok(record) => records.push(record),
            Err(message) => {
                if strict {
                    return Err(IngestError::Parse {
                        line: idx as u64 + 1,
                        message,
                    });
                }
                skipped += 1;
            }
        }
    }
    Ok(Parsed { records, skipped })
}

pub fn parse_businesses<R: BufRead>(reader: R, strict: bool) -> Result<Parsed<BusinessRecord>, IngestError> {
    parse_lines(reader, strict, |line| {
        let raw: RawBusiness = serde_json::from_str(line).map_err(|e| e.to_string())?;
        if raw.business_id.is_empty() {
            return Err("empty business_id".into());
        }
        GeoPoint::new(raw.latitude, raw.longitude).map_err(|e| e.to_string())?;
        Ok(BusinessRecord {
            business_id: raw.business_id,
            name: raw.name,
            latitude: raw.latitude,
            longitude: raw.longitude,
            categories: raw.categories,
        })
    })
}

pub fn parse_users<R: BufRead>(reader: R, strict: bool) -> Result<Parsed<UserRecord>, IngestError> {
    parse_lines(reader, strict, |line| {
        let raw: RawUser = serde_json::from_str(line).map_err(|e| e.to_string())?;
        if raw.user_id.is_empty() {
            return Err("empty user_id".into());
        }
        Ok(UserRecord {
            user_id: raw.user_id,
            friends: raw.friends,
        })
    })
}

pub fn parse_reviews<R: BufRead>(reader: R, strict: bool) -> Result<Parsed<ReviewRecord>, IngestError> {
    parse_lines(reader, strict, |line| {
        let raw: RawReview = serde_json::from_str(line).map_err(|e| e.to_string())?;
        if raw.user_id.is_empty() || raw.business_id.is_empty() {
            return Err("empty user_id or business_id".into());
        }
        let stars = raw.stars;
        if stars.fract() != 0.0 || !(1.0..=5.0).contains(&stars) {
            return Err(format!("stars {stars} not an integer in 1..=5"));
        }
        Ok(ReviewRecord {
            user_id: raw.user_id,
            business_id: raw.business_id,
            stars: stars as u8,
            date: raw.date,
        })
    })
}

/// Normalize a comma-separated category string into a keyword set:
/// split on commas, trim, lowercase, drop empties.
pub fn keywords_from_categories(categories: Option<&str>) -> std::collections::BTreeSet<String> {
    categories
        .unwrap_or("")
        .split(',')
        .map(|t| t.trim().to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}

/// Map a 1..=5 star rating onto the [0, 1] edge-weight range.
pub fn stars_to_weight(stars: u8) -> Result<f64, IngestError> {
    if !(1..=5).contains(&stars) {
        return Err(IngestError::StarsOutOfRange(stars));
    }
    Ok(stars as f64 / 5.0)
}

/// Intimacy of two declared friends: Jaccard similarity of their friend
/// sets, floored at 0.1 so that a declared friendship always remains a
/// usable (if expensive) path.
pub fn intimacy(friends_a: &HashSet<&str>, friends_b: &HashSet<&str>) -> f64 {
    let union = friends_a.union(friends_b).count();
    if union == 0 {
        return 0.1;
    }
    let inter = friends_a.intersection(friends_b).count();
    (inter as f64 / union as f64).max(0.1)
}

/// Assemble a graph from parsed records.
///
/// Every business becomes a service provider; every user record becomes a
/// user node, plus implicit user nodes for review authors missing from the
/// user file. Multiple reviews of one (user, provider) pair collapse to a
/// single edge whose stars come from the latest-dated review (date ties go
/// to the higher rating), while all of them still feed the provider's
/// statistics. Dangling references are skipped and counted, never fatal.
pub fn build_graph(
    businesses: &[BusinessRecord],
    users: &[UserRecord],
    reviews: &[ReviewRecord],
    _config: &IngestConfig,
) -> Result<(GeosocialGraph, IngestReport), IngestError> {
    let mut graph = GeosocialGraph::new();
    let mut report = IngestReport::default();

    for b in businesses {
        let keywords = keywords_from_categories(b.categories.as_deref());
        let location = GeoPoint::new(b.latitude, b.longitude).map_err(GraphError::from)?;
        match graph.add_service_provider(&b.business_id, &b.name, keywords, location) {
            Ok(_) => report.sps_added += 1,
            Err(GraphError::DuplicateNode(_)) => report.lines_skipped += 1,
            Err(e) => return Err(e.into()),
        }
    }

    for u in users {
        match graph.add_user(&u.user_id) {
            Ok(_) => report.users_added += 1,
            Err(GraphError::DuplicateNode(_)) => report.lines_skipped += 1,
            Err(e) => return Err(e.into()),
        }
    }
    // Review authors without a user record still become graph nodes.
    for r in reviews {
        if graph.user_by_external_id(&r.user_id).is_none() {
            graph.add_user(&r.user_id)?;
            report.users_added += 1;
        }
    }

    // Friendship edges: one per unordered declared pair where both users
    // exist. Weight is the Jaccard intimacy of the two friend sets (empty
    // for implicit users, which only floors the weight at 0.1).
    let friend_sets: HashMap<&str, HashSet<&str>> = users
        .iter()
        .map(|u| {
            (
                u.user_id.as_str(),
                u.friends.iter().map(String::as_str).collect(),
            )
        })
        .collect();
    let empty: HashSet<&str> = HashSet::new();
    let mut seen_pairs: HashSet<(NodeId, NodeId)> = HashSet::new();
    for u in users {
        let ua = match graph.user_by_external_id(&u.user_id) {
            Some(id) => id,
            None => continue, // duplicate record skipped above
        };
        for friend in &u.friends {
            if *friend == u.user_id {
                report.lines_skipped += 1;
                continue;
            }
            let ub = match graph.user_by_external_id(friend) {
                Some(id) => id,
                None => {
                    report.lines_skipped += 1;
                    continue;
                }
            };
            let key = if ua < ub { (ua, ub) } else { (ub, ua) };
            if !seen_pairs.insert(key) {
                continue;
            }
            let weight = intimacy(
                friend_sets.get(u.user_id.as_str()).unwrap_or(&empty),
                friend_sets.get(friend.as_str()).unwrap_or(&empty),
            );
            graph.connect(ua, ub, weight, EdgeKind::Friendship)?;
            report.friendship_edges += 1;
        }
    }

    // Reviews: accumulate stats per provider, keep the collapsing winner
    // per (user, provider) pair.
    let mut winners: BTreeMap<(NodeId, NodeId), (&str, u8)> = BTreeMap::new();
    for r in reviews {
        let sp = match graph.sp_by_external_id(&r.business_id) {
            Some(id) => id,
            None => {
                report.lines_skipped += 1;
                continue;
            }
        };
        let user = graph
            .user_by_external_id(&r.user_id)
            .expect("review authors were added above");
        graph.record_review(sp, r.stars)?;
        report.reviews_total += 1;
        let candidate = (r.date.as_str(), r.stars);
        winners
            .entry((user, sp))
            .and_modify(|best| {
                if candidate > *best {
                    *best = candidate;
                }
            })
            .or_insert(candidate);
    }
    for ((user, sp), (_, stars)) in &winners {
        let weight = stars_to_weight(*stars)?;
        graph.connect(*user, *sp, weight, EdgeKind::Review { stars: *stars })?;
        report.review_edges += 1;
    }
    report.reviews_collapsed = report.reviews_total - report.review_edges;

    debug_assert!(graph.audit().is_ok());
    Ok((graph, report))
}

/// Parse all three inputs and build the graph; parse-level skips are folded
/// into the report's `lines_skipped`.
pub fn ingest_readers<B: BufRead, U: BufRead, R: BufRead>(
    business: B,
    user: U,
    review: R,
    config: &IngestConfig,
) -> Result<(GeosocialGraph, IngestReport), IngestError> {
    let businesses = parse_businesses(business, config.strict)?;
    let users = parse_users(user, config.strict)?;
    let reviews = parse_reviews(review, config.strict)?;
    let (graph, mut report) = build_graph(&businesses.records, &users.records, &reviews.records, config)?;
    report.lines_skipped += businesses.skipped + users.skipped + reviews.skipped;
    Ok((graph, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    #[test]
    fn empty_stream_parses_to_nothing() {
        let parsed = parse_businesses(Cursor::new(""), false).unwrap();
        assert!(parsed.records.is_empty());
        assert_eq!(parsed.skipped, 0);
    }

    #[test]
    fn business_fields_map_through() {
        let line = r#"{"business_id":"b1","name":"X","latitude":10.0,"longitude":20.0,"categories":"Sushi Bars, Ramen"}"#;
        let parsed = parse_businesses(Cursor::new(line), false).unwrap();
        assert_eq!(
            parsed.records,
            vec![BusinessRecord {
                business_id: "b1".into(),
                name: "X".into(),
                latitude: 10.0,
                longitude: 20.0,
                categories: Some("Sushi Bars, Ramen".into()),
            }]
        );
    }

    #[test]
    fn malformed_line_is_counted_or_fatal() {
        let parsed = parse_businesses(Cursor::new("{oops"), false).unwrap();
        assert_eq!(parsed.skipped, 1);
        match parse_businesses(Cursor::new("{oops"), true) {
            Err(IngestError::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected Parse error, got {other:?}"),
        }
    }

    #[test]
    fn friends_accept_list_and_joined_string() {
        let as_list = r#"{"user_id":"u1","friends":["a","b"]}"#;
        let as_string = r#"{"user_id":"u2","friends":"a, b ,c"}"#;
        let none = r#"{"user_id":"u3","friends":"None"}"#;
        let absent = r#"{"user_id":"u4"}"#;
        let input = [as_list, as_string, none, absent].join("\n");
        let parsed = parse_users(Cursor::new(input), true).unwrap();
        assert_eq!(parsed.records[0].friends, vec!["a", "b"]);
        assert_eq!(parsed.records[1].friends, vec!["a", "b", "c"]);
        assert!(parsed.records[2].friends.is_empty());
        assert!(parsed.records[3].friends.is_empty());
    }

    #[test]
    fn category_normalization() {
        let got = keywords_from_categories(Some("Sushi Bars, Ramen"));
        let want: std::collections::BTreeSet<String> =
            ["sushi bars", "ramen"].iter().map(|s| s.to_string()).collect();
        assert_eq!(got, want);
        assert!(keywords_from_categories(Some("")).is_empty());
        assert!(keywords_from_categories(None).is_empty());
        let deduped = keywords_from_categories(Some("Ramen, ramen ,"));
        assert_eq!(deduped.len(), 1);
        assert!(deduped.contains("ramen"));
    }

    #[test]
    fn stars_map_linearly_onto_unit_interval() {
        assert_eq!(stars_to_weight(5).unwrap(), 1.0);
        assert_eq!(stars_to_weight(3).unwrap(), 0.6);
        assert_eq!(stars_to_weight(1).unwrap(), 0.2);
        assert!(matches!(stars_to_weight(0), Err(IngestError::StarsOutOfRange(0))));
        assert!(matches!(stars_to_weight(6), Err(IngestError::StarsOutOfRange(6))));
    }

    #[test]
    fn intimacy_cases() {
        let a: HashSet<&str> = ["x", "y"].into_iter().collect();
        let b: HashSet<&str> = ["x", "y"].into_iter().collect();
        assert_eq!(intimacy(&a, &b), 1.0);

        let c: HashSet<&str> = ["p"].into_iter().collect();
        assert_eq!(intimacy(&a, &c), 0.1); // disjoint clips to the floor

        let d: HashSet<&str> = ["x", "y", "z"].into_iter().collect();
        let e: HashSet<&str> = ["x", "y", "q"].into_iter().collect();
        assert_eq!(intimacy(&d, &e), 0.5); // |∩|=2, |∪|=4

        assert_eq!(intimacy(&HashSet::new(), &HashSet::new()), 0.1);
    }

    #[test]
    fn latest_review_wins_and_stats_keep_all() {
        let businesses = vec![BusinessRecord {
            business_id: "b1".into(),
            name: "B".into(),
            latitude: 0.0,
            longitude: 0.0,
            categories: Some("Cafe".into()),
        }];
        let users = vec![UserRecord {
            user_id: "u1".into(),
            friends: vec![],
        }];
        let reviews = vec![
            ReviewRecord {
                user_id: "u1".into(),
                business_id: "b1".into(),
                stars: 3,
                date: "2020-01-01".into(),
            },
            ReviewRecord {
                user_id: "u1".into(),
                business_id: "b1".into(),
                stars: 5,
                date: "2021-01-01".into(),
            },
        ];
        let (graph, report) = build_graph(&businesses, &users, &reviews, &IngestConfig::default()).unwrap();
        let sp = graph.sp_by_external_id("b1").unwrap();
        let user = graph.user_by_external_id("u1").unwrap();
        let edge = graph.edge_between(user, sp).unwrap();
        assert_eq!(edge.weight, 1.0);
        assert_eq!(edge.kind, EdgeKind::Review { stars: 5 });
        let stats = graph.sp_stats(sp).unwrap();
        assert_eq!(stats.count, 2);
        assert_eq!(stats.avg_stars(), Some(4.0));
        assert_eq!(report.reviews_total, 2);
        assert_eq!(report.review_edges, 1);
        assert_eq!(report.reviews_collapsed, 1);
    }

    #[test]
    fn date_tie_prefers_higher_stars() {
        let businesses = vec![BusinessRecord {
            business_id: "b1".into(),
            name: "B".into(),
            latitude: 0.0,
            longitude: 0.0,
            categories: None,
        }];
        let reviews = vec![
            ReviewRecord {
                user_id: "u1".into(),
                business_id: "b1".into(),
                stars: 5,
                date: "2020-06-01".into(),
            },
            ReviewRecord {
                user_id: "u1".into(),
                business_id: "b1".into(),
                stars: 2,
                date: "2020-06-01".into(),
            },
        ];
        let (graph, _) = build_graph(&businesses, &[], &reviews, &IngestConfig::default()).unwrap();
        let sp = graph.sp_by_external_id("b1").unwrap();
        let user = graph.user_by_external_id("u1").unwrap();
        assert_eq!(graph.edge_between(user, sp).unwrap().kind, EdgeKind::Review { stars: 5 });
    }

    #[test]
    fn no_reviews_leaves_zero_stats() {
        let businesses = vec![BusinessRecord {
            business_id: "b1".into(),
            name: "B".into(),
            latitude: 0.0,
            longitude: 0.0,
            categories: None,
        }];
        let (graph, report) = build_graph(&businesses, &[], &[], &IngestConfig::default()).unwrap();
        let sp = graph.sp_by_external_id("b1").unwrap();
        assert_eq!(graph.sp_stats(sp).unwrap().count, 0);
        assert_eq!(report.review_edges, 0);
        assert_eq!(report.reviews_total, 0);
    }

    #[test]
    fn ghost_friend_skipped_and_counted() {
        let users = vec![
            UserRecord {
                user_id: "u1".into(),
                friends: vec!["ghost".into(), "u2".into()],
            },
            UserRecord {
                user_id: "u2".into(),
                friends: vec!["u1".into()],
            },
        ];
        let (graph, report) = build_graph(&[], &users, &[], &IngestConfig::default()).unwrap();
        assert_eq!(report.friendship_edges, 1);
        assert_eq!(report.lines_skipped, 1);
        let u1 = graph.user_by_external_id("u1").unwrap();
        let u2 = graph.user_by_external_id("u2").unwrap();
        // Identical friend sets would give 1.0; here sets {ghost,u2} vs {u1}
        // are disjoint, so the floor applies.
        assert_eq!(graph.edge_between(u1, u2).unwrap().weight, 0.1);
    }

    #[test]
    fn dangling_review_skipped() {
        let reviews = vec![ReviewRecord {
            user_id: "u1".into(),
            business_id: "nowhere".into(),
            stars: 4,
            date: "2020-01-01".into(),
        }];
        let (graph, report) = build_graph(&[], &[], &reviews, &IngestConfig::default()).unwrap();
        assert_eq!(report.lines_skipped, 1);
        assert_eq!(report.reviews_total, 0);
        // The author still becomes a node: build adds review authors before
        // resolving targets.
        assert!(graph.user_by_external_id("u1").is_some());
        assert_eq!(report.users_added, 1);
    }

    #[test]
    fn report_totals_match_stats_sum() {
        let businesses: Vec<BusinessRecord> = (0..3)
            .map(|i| BusinessRecord {
                business_id: format!("b{i}"),
                name: format!("B{i}"),
                latitude: 1.0,
                longitude: 1.0,
                categories: Some("cafe".into()),
            })
            .collect();
        let reviews: Vec<ReviewRecord> = (0..10)
            .map(|i| ReviewRecord {
                user_id: format!("u{}", i % 4),
                business_id: format!("b{}", i % 3),
                stars: (i % 5) as u8 + 1,
                date: format!("2020-01-{:02}", i + 1),
            })
            .collect();
        let (graph, report) = build_graph(&businesses, &[], &reviews, &IngestConfig::default()).unwrap();
        assert_eq!(report.reviews_total, graph.total_reviews());
        graph.audit().unwrap();
    }
}
