//! `georec` — build, train, and query a geosocial recommendation engine.

mod config;
mod error;
mod output;

use std::collections::BTreeSet;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use georec::{
    count_stats, evaluate, ingest_readers, load_model, load_snapshot, optimize, save_model,
    save_snapshot, split_train_test, top_k_nearest, train, training_examples, AlphaParams,
    Candidate, EdgeKind, EvalReport, GeoPoint, GeosocialGraph, IngestConfig, IngestReport, NodeId,
    Query, Recommendation,
};

use config::AppConfig;
use error::AppError;
use output::{grid_table, kv_table, to_canonical_json, OutputFormat};

#[derive(Parser)]
#[command(name = "georec", version, about = "Geosocial top-k recommendations over a trust graph")]
struct Cli {
    /// Flat key = value config file; flags override it.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output format for reports and results.
    #[arg(long, global = true, value_enum, default_value = "table")]
    format: OutputFormat,

    /// Seed for every random choice (splits, bootstrap, augmentation).
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse business/user/review JSON-lines files into a graph snapshot.
    Ingest {
        #[arg(long, value_name = "PATH")]
        business: PathBuf,
        #[arg(long, value_name = "PATH")]
        user: PathBuf,
        #[arg(long, value_name = "PATH")]
        review: PathBuf,
        /// Where to write the snapshot.
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
        /// Abort on the first malformed input line instead of skipping it.
        #[arg(long)]
        strict: bool,
    },
    /// Train the rank classifier from a snapshot and write the model file.
    Train {
        #[arg(long, value_name = "PATH")]
        snapshot: PathBuf,
        #[arg(long = "model-out", value_name = "PATH")]
        model_out: PathBuf,
        #[arg(long)]
        n_trees: Option<usize>,
        #[arg(long)]
        max_depth: Option<usize>,
        #[arg(long)]
        min_samples_split: Option<usize>,
        #[arg(long)]
        features_per_split: Option<usize>,
        /// Fraction of examples used for training (rest evaluate the model).
        #[arg(long)]
        split_ratio: Option<f64>,
        /// Synthetic keyword queries per provider for ratio-feature variety.
        #[arg(long)]
        augment: Option<usize>,
    },
    /// Run a top-k query and re-rank the results.
    Query {
        #[arg(long, value_name = "PATH")]
        snapshot: PathBuf,
        #[arg(long, value_name = "PATH")]
        model: PathBuf,
        /// External id of the querying user.
        #[arg(long)]
        user: String,
        /// Comma-separated query keywords.
        #[arg(long)]
        keywords: String,
        #[arg(long, allow_negative_numbers = true)]
        lat: f64,
        #[arg(long, allow_negative_numbers = true)]
        lon: f64,
        #[arg(long = "radius-m")]
        radius_m: f64,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        /// Population for the α count statistics: candidates | global.
        #[arg(long = "alpha-scope")]
        alpha_scope: Option<String>,
        /// Also print the raw shortest-path order before re-ranking.
        #[arg(long = "show-raw")]
        show_raw: bool,
    },
    /// Summarize a snapshot: node/edge counts and review statistics.
    Stats {
        #[arg(long, value_name = "PATH")]
        snapshot: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), AppError> {
    let mut config = AppConfig::default();
    if let Some(path) = &cli.config {
        config.apply_file(path)?;
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }

    match cli.command {
        Command::Ingest {
            business,
            user,
            review,
            out,
            strict,
        } => cmd_ingest(&config, cli.format, &business, &user, &review, &out, strict),
        Command::Train {
            snapshot,
            model_out,
            n_trees,
            max_depth,
            min_samples_split,
            features_per_split,
            split_ratio,
            augment,
        } => {
            if let Some(v) = n_trees {
                config.n_trees = v;
            }
            if let Some(v) = max_depth {
                config.max_depth = v;
            }
            if let Some(v) = min_samples_split {
                config.min_samples_split = v;
            }
            if let Some(v) = features_per_split {
                config.features_per_split = v;
            }
            if let Some(v) = split_ratio {
                config.split_ratio = v;
            }
            if let Some(v) = augment {
                config.augment = v;
            }
            cmd_train(&config, cli.format, &snapshot, &model_out)
        }
        Command::Query {
            snapshot,
            model,
            user,
            keywords,
            lat,
            lon,
            radius_m,
            k,
            beta,
            gamma,
            alpha_scope,
            show_raw,
        } => {
            if let Some(v) = beta {
                config.beta = v;
            }
            if let Some(v) = gamma {
                config.gamma = v;
            }
            if let Some(v) = alpha_scope {
                config.alpha_scope = v
                    .parse()
                    .map_err(|e: String| AppError::parse(e))?;
            }
            cmd_query(
                &config, cli.format, &snapshot, &model, &user, &keywords, lat, lon, radius_m, k,
                show_raw,
            )
        }
        Command::Stats { snapshot } => cmd_stats(cli.format, &snapshot),
    }
}

fn open(path: &Path) -> Result<BufReader<File>, AppError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| AppError::io(format!("cannot open {}: {e}", path.display())))
}

fn cmd_ingest(
    config: &AppConfig,
    format: OutputFormat,
    business: &Path,
    user: &Path,
    review: &Path,
    out: &Path,
    strict_flag: bool,
) -> Result<(), AppError> {
    let ingest_config = IngestConfig {
        strict: strict_flag || config.strict_ingest,
    };
    let (graph, report) = ingest_readers(open(business)?, open(user)?, open(review)?, &ingest_config)?;
    save_snapshot(&graph, out)
        .map_err(|e| AppError::io(format!("cannot write {}: {e}", out.display())))?;

    match format {
        OutputFormat::Json => print!(
            "{}",
            to_canonical_json(&json!({
                "report": report,
                "snapshot": out.display().to_string(),
            }))
        ),
        OutputFormat::Table => print!("{}", ingest_table(&report, out)),
    }
    Ok(())
}

fn ingest_table(report: &IngestReport, out: &Path) -> String {
    kv_table(&[
        ("users added", report.users_added.to_string()),
        ("providers added", report.sps_added.to_string()),
        ("friendship edges", report.friendship_edges.to_string()),
        ("review edges", report.review_edges.to_string()),
        ("reviews total", report.reviews_total.to_string()),
        ("reviews collapsed", report.reviews_collapsed.to_string()),
        ("lines skipped", report.lines_skipped.to_string()),
        ("snapshot", out.display().to_string()),
    ])
}

fn cmd_train(
    config: &AppConfig,
    format: OutputFormat,
    snapshot: &Path,
    model_out: &Path,
) -> Result<(), AppError> {
    let graph = load_snapshot(snapshot)?;

    let reviewed = graph
        .service_providers()
        .iter()
        .filter(|sp| graph.sp_stats(sp.id).map(|s| s.count >= 1).unwrap_or(false))
        .count();
    if reviewed < 2 {
        return Err(AppError::data(format!(
            "too few examples: need at least 2 reviewed providers, have {reviewed}"
        )));
    }

    let examples = training_examples(&graph, config.augment, config.seed);
    let (train_set, test_set) = split_train_test(&examples, config.split_ratio, config.seed)?;
    let model = train(&train_set, &config.forest_config())?;
    let report = evaluate(&model, &test_set)?;
    save_model(&model, model_out)
        .map_err(|e| AppError::io(format!("cannot write {}: {e}", model_out.display())))?;

    match format {
        OutputFormat::Json => print!(
            "{}",
            to_canonical_json(&json!({
                "evaluation": report,
                "examples": { "test": test_set.len(), "total": examples.len(), "train": train_set.len() },
                "model": model_out.display().to_string(),
            }))
        ),
        OutputFormat::Table => print!("{}", train_table(&report, examples.len(), train_set.len(), model_out)),
    }
    Ok(())
}

fn train_table(report: &EvalReport, total: usize, train_n: usize, model_out: &Path) -> String {
    let mut out = kv_table(&[
        ("examples", total.to_string()),
        ("train / test", format!("{} / {}", train_n, report.n_test)),
        ("holdout accuracy", format!("{:.4}", report.accuracy)),
        ("model", model_out.display().to_string()),
    ]);
    out.push('\n');
    out.push_str("confusion (rows = actual rank, columns = predicted):\n");
    let header = ["", "p1", "p2", "p3", "p4", "p5"];
    let rows: Vec<Vec<String>> = report
        .confusion
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut cells = vec![format!("a{}", i + 1)];
            cells.extend(row.iter().map(|c| c.to_string()));
            cells
        })
        .collect();
    out.push_str(&grid_table(&header, &rows));
    out
}

#[allow(clippy::too_many_arguments)]
fn cmd_query(
    config: &AppConfig,
    format: OutputFormat,
    snapshot: &Path,
    model_path: &Path,
    user: &str,
    keywords: &str,
    lat: f64,
    lon: f64,
    radius_m: f64,
    k: usize,
    show_raw: bool,
) -> Result<(), AppError> {
    let graph = load_snapshot(snapshot)?;
    let model = load_model(model_path)?;

    let origin = graph
        .user_by_external_id(user)
        .ok_or_else(|| AppError::lookup(format!("unknown user {user:?}")))?;
    let keyword_set: BTreeSet<String> = keywords
        .split(',')
        .map(|t| t.trim().to_lowercase())
        .filter(|t| !t.is_empty())
        .collect();
    if keyword_set.is_empty() {
        return Err(AppError::parse("query keyword set is empty".to_string()));
    }
    let center = GeoPoint::new(lat, lon).map_err(|e| AppError::parse(e.to_string()))?;
    let params = AlphaParams::new(config.beta, config.gamma)?;

    let query = Query {
        origin,
        keywords: keyword_set,
        center,
        radius_m,
        k,
    };
    let raw = top_k_nearest(&graph, &query)?;
    let optimized = optimize(&graph, &query, &raw, &model, &params, config.alpha_scope)?;

    match format {
        OutputFormat::Json => {
            let mut doc = json!({
                "optimized": optimized.iter().enumerate().map(|(i, r)| recommendation_json(&graph, i, r)).collect::<Vec<_>>(),
                "query": {
                    "alpha_scope": config.alpha_scope,
                    "beta": config.beta,
                    "gamma": config.gamma,
                    "k": k,
                    "keywords": query.keywords,
                    "lat": lat,
                    "lon": lon,
                    "radius_m": radius_m,
                    "user": user,
                },
            });
            if show_raw {
                doc["raw"] = json!(raw
                    .iter()
                    .enumerate()
                    .map(|(i, c)| candidate_json(&graph, i, c))
                    .collect::<Vec<_>>());
            }
            print!("{}", to_canonical_json(&doc));
        }
        OutputFormat::Table => {
            if show_raw {
                println!("raw shortest-path order:");
                print!("{}", raw_table(&graph, &raw));
                println!();
                println!("optimized order:");
            }
            print!("{}", optimized_table(&graph, &optimized));
        }
    }
    Ok(())
}

fn path_names(graph: &GeosocialGraph, path: &[NodeId]) -> Vec<String> {
    path.iter()
        .map(|n| graph.external_id(*n).unwrap_or("?").to_string())
        .collect()
}

fn recommendation_json(graph: &GeosocialGraph, index: usize, r: &Recommendation) -> serde_json::Value {
    let sp = graph.service_provider(r.sp);
    json!({
        "alpha": r.alpha,
        "name": sp.map(|s| s.name.clone()).unwrap_or_default(),
        "path": path_names(graph, &r.path),
        "path_cost": r.path_cost,
        "position": index + 1,
        "rank": r.rank,
        "score_c": r.score_c,
        "sp": sp.map(|s| s.external_id.clone()).unwrap_or_default(),
    })
}

fn candidate_json(graph: &GeosocialGraph, index: usize, c: &Candidate) -> serde_json::Value {
    json!({
        "cost": c.cost,
        "path": path_names(graph, &c.path),
        "position": index + 1,
        "sp": graph.external_id(c.sp).unwrap_or("?"),
    })
}

fn optimized_table(graph: &GeosocialGraph, recs: &[Recommendation]) -> String {
    let header = ["#", "sp", "name", "rank", "score_c", "alpha", "cost", "path"];
    let rows: Vec<Vec<String>> = recs
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let sp = graph.service_provider(r.sp);
            vec![
                (i + 1).to_string(),
                sp.map(|s| s.external_id.clone()).unwrap_or_default(),
                sp.map(|s| s.name.clone()).unwrap_or_default(),
                r.rank.to_string(),
                format!("{:.4}", r.score_c),
                format!("{:.4}", r.alpha),
                format!("{:.4}", r.path_cost),
                path_names(graph, &r.path).join(" -> "),
            ]
        })
        .collect();
    grid_table(&header, &rows)
}

fn raw_table(graph: &GeosocialGraph, candidates: &[Candidate]) -> String {
    let header = ["#", "sp", "cost", "path"];
    let rows: Vec<Vec<String>> = candidates
        .iter()
        .enumerate()
        .map(|(i, c)| {
            vec![
                (i + 1).to_string(),
                graph.external_id(c.sp).unwrap_or("?").to_string(),
                format!("{:.4}", c.cost),
                path_names(graph, &c.path).join(" -> "),
            ]
        })
        .collect();
    grid_table(&header, &rows)
}

fn cmd_stats(format: OutputFormat, snapshot: &Path) -> Result<(), AppError> {
    let graph = load_snapshot(snapshot)?;

    let mut friendship = 0u64;
    let mut review = 0u64;
    for id in 0..graph.node_count() as u32 {
        let here = NodeId(id);
        for (nbr, edge) in graph.neighbors(here).expect("dense ids") {
            if *nbr > here {
                match edge.kind {
                    EdgeKind::Friendship => friendship += 1,
                    EdgeKind::Review { .. } => review += 1,
                }
            }
        }
    }

    let counts = graph.all_sp_counts();
    let stats_json = match count_stats(&counts) {
        Ok(s) => json!({ "average": s.average, "max": s.max, "min": s.min, "n": s.n }),
        Err(_) => json!({ "average": 0.0, "max": 0, "min": 0, "n": 0 }),
    };
    let doc = json!({
        "count_stats": stats_json,
        "edges": { "friendship": friendship, "review": review, "total": graph.edge_count() },
        "nodes": { "providers": graph.service_providers().len(), "total": graph.node_count(), "users": graph.users().len() },
        "reviews_total": graph.total_reviews(),
    });

    match format {
        OutputFormat::Json => print!("{}", to_canonical_json(&doc)),
        OutputFormat::Table => {
            let s = &doc["count_stats"];
            print!(
                "{}",
                kv_table(&[
                    ("nodes", graph.node_count().to_string()),
                    ("  users", graph.users().len().to_string()),
                    ("  providers", graph.service_providers().len().to_string()),
                    ("edges", graph.edge_count().to_string()),
                    ("  friendship", friendship.to_string()),
                    ("  review", review.to_string()),
                    ("reviews total", graph.total_reviews().to_string()),
                    ("review count min", s["min"].to_string()),
                    ("review count max", s["max"].to_string()),
                    ("review count avg", s["average"].to_string()),
                ])
            );
        }
    }
    Ok(())
}
