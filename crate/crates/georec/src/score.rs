//! Comment-volume score adjustment: the α multiplier and the adjusted
//! score `score_c = α · rating`.
//!
//! α rescales a provider's rating by how its review count sits relative to
//! the population: counts above the mean push α above 1, counts below pull
//! it under 1, bounded to `[1 - 1/β, 1 + 1/β]`. The exponent is applied
//! sign-preservingly so below-average counts always shrink the score, for
//! every γ (a plain even power would flip the penalty into a bonus).

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoreError {
    #[error("empty input: count statistics need at least one value")]
    EmptyInput,
    #[error("invalid count statistics: min {min}, average {average}, max {max}, n {n}")]
    InvalidStats {
        min: u64,
        average: f64,
        max: u64,
        n: usize,
    },
    #[error("rating {0} outside [1, 5]")]
    RatingOutOfRange(f64),
    #[error("alpha parameters must be positive: beta {beta}, gamma {gamma}")]
    InvalidParams { beta: f64, gamma: f64 },
}

/// The adjustable α parameters. Defaults are β = 5, γ = 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaParams {
    beta: f64,
    gamma: f64,
}

impl Default for AlphaParams {
    fn default() -> Self {
        Self {
            beta: 5.0,
            gamma: 2.0,
        }
    }
}

impl AlphaParams {
    pub fn new(beta: f64, gamma: f64) -> Result<Self, ScoreError> {
        if !(beta > 0.0 && beta.is_finite() && gamma > 0.0 && gamma.is_finite()) {
            return Err(ScoreError::InvalidParams { beta, gamma });
        }
        Ok(Self { beta, gamma })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

/// Which population the count statistics are computed over.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaScope {
    /// Statistics over the providers returned by the current query (default).
    #[default]
    Candidates,
    /// Statistics over every provider in the graph.
    Global,
}

impl std::str::FromStr for AlphaScope {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "candidates" => Ok(Self::Candidates),
            "global" => Ok(Self::Global),
            other => Err(format!("unknown alpha scope {other:?} (expected candidates|global)")),
        }
    }
}

/// Review-count statistics over a provider population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CountStats {
    pub min: u64,
    pub max: u64,
    pub average: f64,
    pub n: usize,
}

/// Exact min, max, and arithmetic mean of a nonempty count list.
pub fn count_stats(counts: &[u64]) -> Result<CountStats, ScoreError> {
    if counts.is_empty() {
        return Err(ScoreError::EmptyInput);
    }
    let min = *counts.iter().min().expect("nonempty");
    let max = *counts.iter().max().expect("nonempty");
    let sum: u64 = counts.iter().sum();
    Ok(CountStats {
        min,
        max,
        average: sum as f64 / counts.len() as f64,
        n: counts.len(),
    })
}

/// Sign-preserving power: `sign(x) · |x|^gamma`.
pub fn sgnpow(x: f64, gamma: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    x.signum() * x.abs().powf(gamma)
}

/// The α multiplier for a provider with `count` reviews.
///
/// The relative position `x` is `(count - average) / (average - min)` below
/// the mean and `(count - average) / (max - average)` at or above it; then
/// `α = 1 + sgnpow(x, γ) / β`. Degenerate denominators (all counts equal,
/// or a single provider) yield the neutral α = 1. `count` is expected to
/// lie within `[stats.min, stats.max]`.
pub fn alpha(count: u64, stats: &CountStats, params: &AlphaParams) -> Result<f64, ScoreError> {
    if stats.n == 0
        || !stats.average.is_finite()
        || (stats.min as f64) > stats.average
        || stats.average > stats.max as f64
    {
        return Err(ScoreError::InvalidStats {
            min: stats.min,
            average: stats.average,
            max: stats.max,
            n: stats.n,
        });
    }
    debug_assert!(count >= stats.min && count <= stats.max);

    let c = count as f64;
    let x = if c < stats.average {
        let denom = stats.average - stats.min as f64;
        if denom == 0.0 {
            return Ok(1.0);
        }
        (c - stats.average) / denom
    } else {
        let denom = stats.max as f64 - stats.average;
        if denom == 0.0 {
            return Ok(1.0);
        }
        (c - stats.average) / denom
    };
    Ok(1.0 + sgnpow(x, params.gamma()) / params.beta())
}

/// The adjusted score: `α · rating`, with the rating in [1, 5].
pub fn score_c(alpha: f64, rating: f64) -> Result<f64, ScoreError> {
    if !(1.0..=5.0).contains(&rating) {
        return Err(ScoreError::RatingOutOfRange(rating));
    }
    Ok(alpha * rating)
}
