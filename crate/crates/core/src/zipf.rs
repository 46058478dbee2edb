//! Rank/frequency analysis and power-law fitting.
//!
//! Zipf's law predicts `f(r) = C / r^alpha` with `alpha` close to 1 for
//! natural language. The fit here is ordinary least squares on
//! `(ln r, ln count)`, with a free scale constant `C`.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng as _;
use thiserror::Error;

use crate::math;
use crate::rng::Rng;
use crate::vocab::FrequencyTable;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ZipfError {
    #[error("frequency table is empty")]
    Empty,
    #[error("need at least 2 ranks with distinct counts, got {0} usable points")]
    TooFewPoints(usize),
    #[error("count at rank {0} is zero")]
    ZeroCount(usize),
    #[error("exponent must be positive and finite, got {0}")]
    InvalidAlpha(f64),
    #[error("support size must be at least 1")]
    EmptySupport,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankEntry {
    pub rank: usize,
    pub token: String,
    pub count: u64,
}

/// Tokens ordered by descending count, ranks 1..=K.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankFrequency {
    pub entries: Vec<RankEntry>,
}

impl RankFrequency {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Builds from raw counts already in rank order (rank 1 first). Tokens
    /// are named `r1`, `r2`, ...
    pub fn from_counts(counts: &[u64]) -> Self {
        RankFrequency {
            entries: counts
                .iter()
                .enumerate()
                .map(|(i, &count)| RankEntry {
                    rank: i + 1,
                    token: alloc::format!("r{}", i + 1),
                    count,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZipfFit {
    /// Fitted exponent (negated log-log slope).
    pub alpha: f64,
    /// Natural log of the fitted scale constant.
    pub ln_scale: f64,
    /// Coefficient of determination of the log-log regression.
    pub log_log_r2: f64,
    pub n_points: usize,
}

pub fn rank_frequency(freq: &FrequencyTable) -> Result<RankFrequency, ZipfError> {
    if freq.is_empty() {
        return Err(ZipfError::Empty);
    }
    Ok(RankFrequency {
        entries: freq
            .ranked()
            .into_iter()
            .enumerate()
            .map(|(i, (token, count))| RankEntry {
                rank: i + 1,
                token: token.to_string(),
                count,
            })
            .collect(),
    })
}

/// `scale / rank^alpha`. With `scale == alpha` this is the classic
/// `alpha * 1/r^alpha` form.
pub fn zipf_expected(rank: usize, alpha: f64, scale: f64) -> f64 {
    scale / math::powf(rank as f64, alpha)
}

/// Least-squares fit of `ln count = ln C - alpha ln rank` over ranks
/// `1..=min(K, max_rank)`.
pub fn fit_zipf(rf: &RankFrequency, max_rank: Option<usize>) -> Result<ZipfFit, ZipfError> {
    let k = max_rank.map_or(rf.len(), |m| m.min(rf.len()));
    let entries = &rf.entries[..k];
    if let Some(e) = entries.iter().find(|e| e.count == 0) {
        return Err(ZipfError::ZeroCount(e.rank));
    }
    let distinct = entries.windows(2).any(|w| w[0].count != w[1].count);
    if k < 2 || !distinct {
        return Err(ZipfError::TooFewPoints(k));
    }

    let n = k as f64;
    let xs: Vec<f64> = entries.iter().map(|e| math::ln(e.rank as f64)).collect();
    let ys: Vec<f64> = entries.iter().map(|e| math::ln(e.count as f64)).collect();
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        let dx = x - mean_x;
        let dy = y - mean_y;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let r2 = (1.0 - ss_res / syy).clamp(0.0, 1.0);

    Ok(ZipfFit {
        alpha: -slope,
        ln_scale: intercept,
        log_log_r2: r2,
        n_points: k,
    })
}

/// One row of the rank/frequency plot data.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotRow {
    pub rank: usize,
    pub token: String,
    pub observed_count: u64,
    pub zipf_expected_count: f64,
}

/// The first `top_n` ranks with the Zipf curve anchored at the observed
/// rank-1 count.
pub fn plot_rows(rf: &RankFrequency, fit: &ZipfFit, top_n: usize) -> Vec<PlotRow> {
    let Some(first) = rf.entries.first() else {
        return Vec::new();
    };
    let scale = first.count as f64;
    rf.entries
        .iter()
        .take(top_n)
        .map(|e| PlotRow {
            rank: e.rank,
            token: e.token.clone(),
            observed_count: e.count,
            zipf_expected_count: zipf_expected(e.rank, fit.alpha, scale),
        })
        .collect()
}

/// Samples ranks (0-based) with probability proportional to `1/(r+1)^alpha`.
#[derive(Debug, Clone)]
pub struct ZipfSampler {
    cdf: Vec<f64>,
}

impl ZipfSampler {
    pub fn new(n: usize, alpha: f64) -> Result<Self, ZipfError> {
        if n == 0 {
            return Err(ZipfError::EmptySupport);
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(ZipfError::InvalidAlpha(alpha));
        }
        let mut acc = 0.0;
        let cdf = (1..=n)
            .map(|r| {
                acc += zipf_expected(r, alpha, 1.0);
                acc
            })
            .collect();
        Ok(ZipfSampler { cdf })
    }

    pub fn support(&self) -> usize {
        self.cdf.len()
    }

    pub fn sample(&self, rng: &mut Rng) -> usize {
        let total = *self.cdf.last().expect("non-empty support");
        let u = rng.gen::<f64>() * total;
        self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1)
    }
}
