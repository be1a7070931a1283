//! Attribute-scoring metrics and the attribute ordering used to pick the
//! cut dimension during tree construction.
//!
//! Two metrics are supported. The diversity index rewards attributes whose
//! values span a wide range and rarely repeat; the sample standard
//! deviation rewards spread around the mean. Both are computed per
//! attribute column and the columns are ranked by descending score.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logstore::{normalize_column, Attribute, LogTable};

#[derive(Debug, Error)]
pub enum RankingError {
    #[error("empty input")]
    EmptyInput,
    #[error("non-positive value {0}")]
    NonPositiveValue(f64),
    #[error("need at least 2 values, got {0}")]
    TooFewValues(usize),
}

/// Attribute selection metric for tree construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    Di,
    Sd,
}

/// Which statistic produced an [`AttributeScore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScoreMetric {
    Di,
    Sd,
    Var,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributeScore {
    pub attribute: Attribute,
    pub score: f64,
    pub metric: ScoreMetric,
}

/// Diversity index of a positive value multiset.
///
/// The values are normalized by their maximum; the index is the normalized
/// range times the sum of inverse occurrence counts over the distinct
/// normalized values. Repeated values are penalized because each distinct
/// value contributes the reciprocal of its multiplicity.
///
/// ```
/// use xfertune::ranking::diversity_index;
/// let di = diversity_index(&[10.0, 15.0, 20.0, 5.0, 8.0, 10.0, 15.0, 20.0, 5.0, 8.0]).unwrap();
/// assert!((di - 1.875).abs() < 1e-12);
/// ```
pub fn diversity_index(values: &[f64]) -> Result<f64, RankingError> {
    let mut norm = normalize_column(values).map_err(|e| match e {
        crate::logstore::LogError::EmptyInput => RankingError::EmptyInput,
        crate::logstore::LogError::NonPositiveValue(v) => RankingError::NonPositiveValue(v),
        _ => RankingError::EmptyInput,
    })?;
    norm.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let range = norm[norm.len() - 1] - norm[0];

    let mut inverse_freq_sum = 0.0;
    let mut i = 0;
    while i < norm.len() {
        let mut j = i + 1;
        while j < norm.len() && norm[j] == norm[i] {
            j += 1;
        }
        inverse_freq_sum += 1.0 / (j - i) as f64;
        i = j;
    }
    Ok(range * inverse_freq_sum)
}

/// Sample standard deviation with the N−1 denominator.
pub fn std_dev(values: &[f64]) -> Result<f64, RankingError> {
    variance(values).map(f64::sqrt)
}

/// Sample variance with the N−1 denominator; equals `std_dev(values)^2`.
pub fn variance(values: &[f64]) -> Result<f64, RankingError> {
    if values.len() < 2 {
        return Err(RankingError::TooFewValues(values.len()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sum_sq = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    Ok(sum_sq / (n - 1.0))
}

/// Scores one column under a metric. SD is computed on the max-normalized
/// column unless `sd_on_normalized` is false, so attributes with different
/// units stay comparable.
pub fn score_column(
    values: &[f64],
    metric: Metric,
    sd_on_normalized: bool,
) -> Result<f64, RankingError> {
    match metric {
        Metric::Di => diversity_index(values),
        Metric::Sd => {
            if sd_on_normalized {
                let norm = normalize_column(values).map_err(|e| match e {
                    crate::logstore::LogError::EmptyInput => RankingError::EmptyInput,
                    crate::logstore::LogError::NonPositiveValue(v) => {
                        RankingError::NonPositiveValue(v)
                    }
                    _ => RankingError::EmptyInput,
                })?;
                std_dev(&norm)
            } else {
                std_dev(values)
            }
        }
    }
}

/// Scores all five attributes of a table and orders them descending by
/// score. Ties keep the canonical attribute order (file size, file count,
/// RTT, buffer size, bandwidth), which makes the ranking deterministic.
pub fn rank_attributes(
    table: &LogTable,
    metric: Metric,
) -> Result<Vec<AttributeScore>, RankingError> {
    rank_attributes_with(table, metric, true)
}

/// As [`rank_attributes`], with an explicit choice of raw or normalized
/// columns for the SD metric.
pub fn rank_attributes_with(
    table: &LogTable,
    metric: Metric,
    sd_on_normalized: bool,
) -> Result<Vec<AttributeScore>, RankingError> {
    if table.is_empty() {
        return Err(RankingError::EmptyInput);
    }
    let tag = match metric {
        Metric::Di => ScoreMetric::Di,
        Metric::Sd => ScoreMetric::Sd,
    };
    let mut scores: Vec<AttributeScore> = Attribute::ALL
        .iter()
        .map(|&attribute| {
            let column = table.column(attribute);
            score_column(&column, metric, sd_on_normalized).map(|score| AttributeScore {
                attribute,
                score,
                metric: tag,
            })
        })
        .collect::<Result<_, _>>()?;
    // stable sort keeps the canonical order on equal scores
    scores.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap());
    Ok(scores)
}
