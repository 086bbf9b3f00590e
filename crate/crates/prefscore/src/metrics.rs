//! Evaluation metrics: quadratic weighted kappa, Spearman rank correlation,
//! judge inconsistency, and gold-agreement rates.
//!
//! A metric that is mathematically undefined on its inputs (degenerate
//! marginals, constant rank vector, empty denominator) raises a typed error
//! instead of returning 0 — a silent zero would corrupt sweep curves and
//! comparisons downstream.

use serde::{Deserialize, Serialize};

use crate::data::{EssaySet, PairwiseRecord};
use crate::error::{Error, Result};

/// Evaluation summary for one scored run.
///
/// `None` marks a metric that was undefined for the given inputs (the typed
/// error is reported by the CLI; the field is simply absent in JSON).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qwk: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spearman: Option<f64>,
    /// Number of essays the metrics were computed over.
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inconsistency_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub agreement_all: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub agreement_excl_ties: Option<f64>,
    /// Agreement of the raw forward labels with gold, for comparison with
    /// the debiased agreement above.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub agreement_raw_all: Option<f64>,
}

/// Quadratic weighted kappa between two level sequences.
///
/// `level_set` declares the rubric's levels (ascending); weights are built
/// from level indices `u, v` as `(u − v)² / (K − 1)²`, so levels that happen
/// not to occur in the data still shape the weighting. Returns
/// `1 − Σ w·O / Σ w·E` where `O` is the normalized observed contingency
/// matrix and `E` the outer product of its marginals.
pub fn qwk(pred: &[f64], gold: &[f64], level_set: &[f64]) -> Result<f64> {
    if pred.len() != gold.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} predictions vs {} golds",
            pred.len(),
            gold.len()
        )));
    }
    if pred.len() < 2 {
        return Err(Error::UndefinedMetric {
            metric: "qwk",
            reason: format!("needs at least 2 observations, got {}", pred.len()),
        });
    }
    let k = level_set.len();
    if k < 2 {
        return Err(Error::UndefinedMetric {
            metric: "qwk",
            reason: format!("needs at least 2 levels, got {k}"),
        });
    }
    if !level_set.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::invalid(
            "level_set must be strictly ascending".to_string(),
        ));
    }

    let index_of = |value: f64| -> Result<usize> {
        level_set
            .iter()
            .position(|&level| level == value)
            .ok_or_else(|| Error::invalid(format!("value {value} is not in the level set")))
    };

    let n = pred.len() as f64;
    let mut observed = vec![vec![0.0f64; k]; k];
    let mut pred_marginal = vec![0.0f64; k];
    let mut gold_marginal = vec![0.0f64; k];
    for (&p, &g) in pred.iter().zip(gold) {
        let (u, v) = (index_of(p)?, index_of(g)?);
        observed[u][v] += 1.0;
        pred_marginal[u] += 1.0;
        gold_marginal[v] += 1.0;
    }

    let denom_sq = ((k - 1) * (k - 1)) as f64;
    let mut weighted_observed = 0.0;
    let mut weighted_expected = 0.0;
    for u in 0..k {
        for v in 0..k {
            let weight = ((u as f64 - v as f64) * (u as f64 - v as f64)) / denom_sq;
            weighted_observed += weight * observed[u][v] / n;
            weighted_expected += weight * (pred_marginal[u] / n) * (gold_marginal[v] / n);
        }
    }

    if weighted_expected == 0.0 {
        return Err(Error::UndefinedMetric {
            metric: "qwk",
            reason: "both marginals are concentrated on one identical level".to_string(),
        });
    }
    Ok(1.0 - weighted_observed / weighted_expected)
}

/// Spearman rank correlation: average ranks on ties, then Pearson
/// correlation of the two rank vectors.
pub fn spearman(pred: &[f64], gold: &[f64]) -> Result<f64> {
    if pred.len() != gold.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} predictions vs {} golds",
            pred.len(),
            gold.len()
        )));
    }
    if pred.len() < 2 {
        return Err(Error::UndefinedMetric {
            metric: "spearman",
            reason: format!("needs at least 2 observations, got {}", pred.len()),
        });
    }
    for (name, values) in [("pred", pred), ("gold", gold)] {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "{name} contains a non-finite value"
            )));
        }
    }

    let pred_ranks = average_ranks(pred);
    let gold_ranks = average_ranks(gold);
    pearson(&pred_ranks, &gold_ranks)
}

/// 1-based ranks with ties sharing the average of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values"));

    let mut ranks = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start;
        while end + 1 < n && values[order[end + 1]] == values[order[start]] {
            end += 1;
        }
        // positions start..=end (0-based) share the mean of ranks start+1..=end+1
        let shared = (start + end) as f64 / 2.0 + 1.0;
        for &index in &order[start..=end] {
            ranks[index] = shared;
        }
        start = end + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let mut covariance = 0.0;
    let mut variance_x = 0.0;
    let mut variance_y = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        let dx = a - mean_x;
        let dy = b - mean_y;
        covariance += dx * dy;
        variance_x += dx * dx;
        variance_y += dy * dy;
    }
    if variance_x == 0.0 || variance_y == 0.0 {
        return Err(Error::UndefinedMetric {
            metric: "spearman",
            reason: "one side is constant (zero rank variance)".to_string(),
        });
    }
    Ok(covariance / (variance_x.sqrt() * variance_y.sqrt()))
}

/// Fraction of records whose two presentation orders contradict each other
/// (`c_ij ≠ 1 − c_ji`).
pub fn inconsistency_rate(records: &[PairwiseRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::Empty {
            context: "inconsistency_rate over no records".to_string(),
        });
    }
    let inconsistent = records.iter().filter(|r| r.c_ij != 1.0 - r.c_ji).count();
    Ok(inconsistent as f64 / records.len() as f64)
}

/// Agreement rates of judge labels against the gold ordering.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Agreement {
    /// Fraction of records whose label equals the gold label.
    pub all: f64,
    /// Same fraction over records whose gold label is not a tie;
    /// `None` when every pair is gold-tied.
    pub excl_ties: Option<f64>,
}

/// Agreement of the debiased labels `c̃` with the gold ordering
/// (1 if `gold_i > gold_j`, 0 if `<`, 0.5 if equal).
pub fn agreement_rate(records: &[PairwiseRecord], essay_set: &EssaySet) -> Result<Agreement> {
    agreement_of(records, essay_set, |r| r.c_tilde)
}

/// Agreement of the raw forward labels `c_ij` with the gold ordering — the
/// counterpart to [`agreement_rate`] for judging how much debiasing helps.
pub fn agreement_rate_raw(records: &[PairwiseRecord], essay_set: &EssaySet) -> Result<Agreement> {
    agreement_of(records, essay_set, |r| r.c_ij)
}

fn agreement_of(
    records: &[PairwiseRecord],
    essay_set: &EssaySet,
    label: impl Fn(&PairwiseRecord) -> f64,
) -> Result<Agreement> {
    if records.is_empty() {
        return Err(Error::Empty {
            context: "agreement_rate over no records".to_string(),
        });
    }
    let gold_of = |id: &str| -> Result<f64> {
        essay_set
            .get(id)?
            .gold_score
            .ok_or_else(|| Error::invalid(format!("essay {id:?} has no gold score for agreement")))
    };

    let mut matching = 0usize;
    let mut decisive = 0usize;
    let mut decisive_matching = 0usize;
    for record in records {
        let gold_i = gold_of(&record.i)?;
        let gold_j = gold_of(&record.j)?;
        let gold_label = if gold_i > gold_j {
            1.0
        } else if gold_i < gold_j {
            0.0
        } else {
            0.5
        };
        let hit = label(record) == gold_label;
        if hit {
            matching += 1;
        }
        if gold_label != 0.5 {
            decisive += 1;
            if hit {
                decisive_matching += 1;
            }
        }
    }
    Ok(Agreement {
        all: matching as f64 / records.len() as f64,
        excl_ties: if decisive == 0 {
            None
        } else {
            Some(decisive_matching as f64 / decisive as f64)
        },
    })
}
