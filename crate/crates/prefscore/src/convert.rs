//! Rubric alignment: map latent scores onto a rubric scale, snap them to
//! discrete levels, bucket them into categories, and rank the essays.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{CategorySpec, RubricSpec, ScoreTable};
use crate::error::{Error, Result};
use crate::io::atomic_write;

/// One essay's converted outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvertedRow {
    pub id: String,
    /// Latent score straight from the fitted model.
    pub latent: f64,
    /// Latent mapped linearly onto `[y_min, y_max]`.
    pub score: f64,
    /// `score` snapped to the rubric's discrete levels, when declared.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
    /// `score` bucketed by the rubric's category thresholds, when declared.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    /// 1 = highest latent; ties broken by ascending id.
    pub rank: usize,
}

/// Full conversion of a score table under a rubric, in the table's order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvertedScores {
    pub rows: Vec<ConvertedRow>,
}

/// Linearly rescale latent scores onto `[y_min, y_max]`: the minimum latent
/// maps to `y_min`, the maximum to `y_max`. When all latents are equal the
/// scale carries no information and every essay maps to the midpoint.
pub fn to_scale(scores: &ScoreTable, rubric: &RubricSpec) -> Result<Vec<(String, f64)>> {
    if scores.is_empty() {
        return Err(Error::Empty {
            context: "to_scale over an empty score table".to_string(),
        });
    }
    for (id, latent) in scores.entries() {
        if !latent.is_finite() {
            return Err(Error::invalid(format!(
                "non-finite latent score for essay {id:?}"
            )));
        }
    }
    let values = scores.values();
    let s_min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let s_max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let midpoint = (rubric.y_min + rubric.y_max) / 2.0;
    Ok(scores
        .entries()
        .iter()
        .map(|(id, latent)| {
            let score = if s_max == s_min {
                midpoint
            } else {
                (latent - s_min) / (s_max - s_min) * (rubric.y_max - rubric.y_min) + rubric.y_min
            };
            (id.clone(), score)
        })
        .collect())
}

/// Snap a scale score to the nearest declared level; an exact midpoint
/// between two adjacent levels resolves to the higher one.
pub fn round_to_levels(score: f64, levels: &[f64]) -> Result<f64> {
    if levels.is_empty() {
        return Err(Error::invalid("levels must be nonempty".to_string()));
    }
    if !levels.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::invalid(
            "levels must be strictly ascending".to_string(),
        ));
    }
    let mut best = levels[0];
    let mut best_distance = (score - best).abs();
    for &level in &levels[1..] {
        let distance = (score - level).abs();
        // `<=` prefers the later (higher) level on an exact-midpoint tie
        if distance <= best_distance {
            best = level;
            best_distance = distance;
        }
    }
    Ok(best)
}

/// Bucket a scale score by ascending thresholds: a score below the first
/// threshold lands in the first category, and a score equal to a threshold
/// lands in the category above it.
pub fn to_category(score: f64, spec: &CategorySpec) -> Result<String> {
    if spec.names.len() != spec.thresholds.len() + 1 {
        return Err(Error::invalid(format!(
            "{} categories need exactly {} thresholds, got {}",
            spec.names.len(),
            spec.names.len().saturating_sub(1),
            spec.thresholds.len()
        )));
    }
    if !spec.thresholds.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::invalid(
            "category thresholds must be strictly ascending".to_string(),
        ));
    }
    let index = spec.thresholds.iter().filter(|&&t| score >= t).count();
    Ok(spec.names[index].clone())
}

/// Rank essays by descending latent score, rank 1 highest; equal latents
/// are ordered by ascending id so the ranking is deterministic.
pub fn to_ranking(scores: &ScoreTable) -> Result<Vec<(String, usize)>> {
    if scores.is_empty() {
        return Err(Error::Empty {
            context: "to_ranking over an empty score table".to_string(),
        });
    }
    let mut order: Vec<&(String, f64)> = scores.entries().iter().collect();
    order.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .expect("finite latent scores")
            .then_with(|| a.0.cmp(&b.0))
    });
    Ok(order
        .into_iter()
        .enumerate()
        .map(|(position, (id, _))| (id.clone(), position + 1))
        .collect())
}

/// Run the full conversion for a score table under a rubric. Rows come back
/// in the table's input order; levels and categories are filled only when
/// the rubric declares them.
pub fn convert(scores: &ScoreTable, rubric: &RubricSpec) -> Result<ConvertedScores> {
    let scaled = to_scale(scores, rubric)?;
    let ranking = to_ranking(scores)?;
    let rank_of: std::collections::HashMap<&str, usize> = ranking
        .iter()
        .map(|(id, rank)| (id.as_str(), *rank))
        .collect();

    let mut rows = Vec::with_capacity(scaled.len());
    for ((id, score), (latent_id, latent)) in scaled.iter().zip(scores.entries()) {
        debug_assert_eq!(id, latent_id);
        let level = match &rubric.levels {
            Some(levels) => Some(round_to_levels(*score, levels)?),
            None => None,
        };
        let category = match &rubric.categories {
            Some(spec) => Some(to_category(*score, spec)?),
            None => None,
        };
        rows.push(ConvertedRow {
            id: id.clone(),
            latent: *latent,
            score: *score,
            level,
            category,
            rank: rank_of[id.as_str()],
        });
    }
    Ok(ConvertedScores { rows })
}

impl ConvertedScores {
    /// Scale scores in row order.
    pub fn scores(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.score).collect()
    }

    /// Levels in row order, when every row has one.
    pub fn levels(&self) -> Option<Vec<f64>> {
        self.rows.iter().map(|r| r.level).collect()
    }

    /// Categories in row order, when every row has one.
    pub fn categories(&self) -> Option<Vec<String>> {
        self.rows.iter().map(|r| r.category.clone()).collect()
    }

    /// Write `id,latent,score,level,category,rank` as CSV. Floats use the
    /// shortest representation that round-trips exactly; absent levels and
    /// categories become empty fields.
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let context = path.display().to_string();
        let as_io = |e: csv::Error| Error::io(&context, std::io::Error::other(e));
        let mut writer = csv::WriterBuilder::new().from_writer(Vec::new());
        writer
            .write_record(["id", "latent", "score", "level", "category", "rank"])
            .map_err(as_io)?;
        for row in &self.rows {
            writer
                .write_record([
                    row.id.as_str(),
                    &format_float(row.latent),
                    &format_float(row.score),
                    &row.level.map(format_float).unwrap_or_default(),
                    row.category.as_deref().unwrap_or(""),
                    &row.rank.to_string(),
                ])
                .map_err(as_io)?;
        }
        let bytes = writer
            .into_inner()
            .map_err(|e| Error::io(&context, std::io::Error::other(e)))?;
        atomic_write(path, &bytes)
    }
}

/// Shortest decimal representation that parses back to the same f64.
pub fn format_float(value: f64) -> String {
    let mut buffer = ryu_like(value);
    if !buffer.contains('.')
        && !buffer.contains('e')
        && !buffer.contains("inf")
        && !buffer.contains("NaN")
    {
        buffer.push_str(".0");
    }
    buffer
}

fn ryu_like(value: f64) -> String {
    // Rust's Display for f64 already produces the shortest round-tripping
    // decimal form.
    format!("{value}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Essay, EssaySet, ScoreMethod};

    fn table(pairs: &[(&str, f64)]) -> ScoreTable {
        let set = EssaySet::new(
            pairs
                .iter()
                .map(|&(id, _)| Essay::new(id, "p", format!("text {id}")))
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let dense: Vec<f64> = pairs.iter().map(|&(_, s)| s).collect();
        ScoreTable::from_dense(&set, ScoreMethod::Ranknet, &dense).unwrap()
    }

    #[test]
    fn to_scale_direct_formula_oracle() {
        // latents {0, 5, 10} onto [2, 12]: (s−0)/10·10+2 → {2, 7, 12}
        let scores = table(&[("a", 0.0), ("b", 5.0), ("c", 10.0)]);
        let rubric = RubricSpec::new(2.0, 12.0).unwrap();
        let scaled = to_scale(&scores, &rubric).unwrap();
        assert_eq!(
            scaled,
            vec![
                ("a".to_string(), 2.0),
                ("b".to_string(), 7.0),
                ("c".to_string(), 12.0)
            ]
        );
    }

    #[test]
    fn to_scale_endpoints_and_monotonicity() {
        let scores = table(&[("a", -3.0), ("b", 1.25), ("c", 0.5), ("d", 9.0)]);
        let rubric = RubricSpec::new(1.0, 5.0).unwrap();
        let scaled = to_scale(&scores, &rubric).unwrap();
        let value = |id: &str| scaled.iter().find(|(i, _)| i == id).unwrap().1;
        assert_eq!(value("a"), 1.0);
        assert_eq!(value("d"), 5.0);
        assert!(value("c") < value("b"));
        assert!(scaled.iter().all(|&(_, y)| (1.0..=5.0).contains(&y)));
    }

    #[test]
    fn to_scale_degenerate_and_singleton_map_to_midpoint() {
        let rubric = RubricSpec::new(1.0, 5.0).unwrap();
        let equal = table(&[("a", 4.2), ("b", 4.2), ("c", 4.2)]);
        for (_, y) in to_scale(&equal, &rubric).unwrap() {
            assert_eq!(y, 3.0);
        }
        let single = table(&[("only", -7.0)]);
        assert_eq!(to_scale(&single, &rubric).unwrap()[0].1, 3.0);
    }

    #[test]
    fn round_to_levels_nearest_midpoint_and_extremes() {
        let levels: Vec<f64> = (2..=12).map(f64::from).collect();
        assert_eq!(round_to_levels(7.4, &levels).unwrap(), 7.0);
        assert_eq!(round_to_levels(7.5, &levels).unwrap(), 8.0);
        assert_eq!(round_to_levels(1.0, &levels).unwrap(), 2.0);
        assert_eq!(round_to_levels(99.0, &levels).unwrap(), 12.0);
        assert_eq!(round_to_levels(7.0, &levels).unwrap(), 7.0);
        // non-uniform spacing still picks the true nearest
        assert_eq!(round_to_levels(3.9, &[1.0, 4.0, 10.0]).unwrap(), 4.0);
        assert_eq!(round_to_levels(7.1, &[1.0, 4.0, 10.0]).unwrap(), 10.0);
    }

    #[test]
    fn round_to_levels_always_returns_a_member() {
        let levels = [1.0, 2.5, 3.0, 8.0];
        let mut probe = -5.0;
        while probe < 12.0 {
            let snapped = round_to_levels(probe, &levels).unwrap();
            assert!(levels.contains(&snapped));
            probe += 0.13;
        }
    }

    #[test]
    fn categories_three_bucket_oracle() {
        let spec = CategorySpec {
            names: vec!["low".into(), "medium".into(), "high".into()],
            thresholds: vec![2.25, 3.75],
        };
        assert_eq!(to_category(2.0, &spec).unwrap(), "low");
        assert_eq!(to_category(3.0, &spec).unwrap(), "medium");
        assert_eq!(to_category(3.75, &spec).unwrap(), "high");
        assert_eq!(to_category(2.25, &spec).unwrap(), "medium");
        assert_eq!(to_category(5.0, &spec).unwrap(), "high");
        assert_eq!(to_category(1.0, &spec).unwrap(), "low");
    }

    #[test]
    fn categories_are_monotone_in_score() {
        let spec = CategorySpec {
            names: vec!["a".into(), "b".into(), "c".into(), "d".into()],
            thresholds: vec![1.0, 2.0, 3.5],
        };
        let index_of = |score: f64| {
            let name = to_category(score, &spec).unwrap();
            spec.names.iter().position(|n| *n == name).unwrap()
        };
        let mut previous = 0usize;
        let mut probe = -1.0;
        while probe < 5.0 {
            let current = index_of(probe);
            assert!(current >= previous, "category dropped at score {probe}");
            previous = current;
            probe += 0.01;
        }
    }

    #[test]
    fn ranking_sorting_and_tie_break_oracles() {
        let ranking = to_ranking(&table(&[("a", 2.0), ("b", 5.0), ("c", 3.0)])).unwrap();
        assert_eq!(
            ranking,
            vec![
                ("b".to_string(), 1),
                ("c".to_string(), 2),
                ("a".to_string(), 3)
            ]
        );
        let tied = to_ranking(&table(&[("b", 1.0), ("a", 1.0)])).unwrap();
        assert_eq!(tied, vec![("a".to_string(), 1), ("b".to_string(), 2)]);
        let single = to_ranking(&table(&[("x", 0.0)])).unwrap();
        assert_eq!(single, vec![("x".to_string(), 1)]);
    }

    #[test]
    fn ranking_is_invariant_under_rescaling() {
        let scores = table(&[("a", -3.0), ("b", 1.25), ("c", 0.5), ("d", 9.0), ("e", 0.0)]);
        let rubric = RubricSpec::new(1.0, 5.0).unwrap();
        let direct = to_ranking(&scores).unwrap();

        let scaled_pairs = to_scale(&scores, &rubric).unwrap();
        let set = EssaySet::new(
            scaled_pairs
                .iter()
                .map(|(id, _)| Essay::new(id.clone(), "p", format!("text {id}")))
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let dense: Vec<f64> = scaled_pairs.iter().map(|&(_, y)| y).collect();
        let rescaled = ScoreTable::from_dense(&set, ScoreMethod::Ranknet, &dense).unwrap();
        assert_eq!(to_ranking(&rescaled).unwrap(), direct);
    }

    #[test]
    fn convert_fills_levels_and_categories_per_rubric() {
        let scores = table(&[("a", 0.0), ("b", 5.0), ("c", 10.0)]);
        let rubric = RubricSpec::new(1.0, 5.0)
            .unwrap()
            .with_levels(vec![1.0, 2.0, 3.0, 4.0, 5.0])
            .unwrap()
            .with_categories(
                vec!["low".into(), "medium".into(), "high".into()],
                vec![2.25, 3.75],
            )
            .unwrap();
        let converted = convert(&scores, &rubric).unwrap();
        assert_eq!(converted.rows.len(), 3);
        let row = |id: &str| converted.rows.iter().find(|r| r.id == id).unwrap();
        assert_eq!(row("a").score, 1.0);
        assert_eq!(row("b").score, 3.0);
        assert_eq!(row("c").score, 5.0);
        assert_eq!(row("a").level, Some(1.0));
        assert_eq!(row("b").level, Some(3.0));
        assert_eq!(row("a").category.as_deref(), Some("low"));
        assert_eq!(row("b").category.as_deref(), Some("medium"));
        assert_eq!(row("c").category.as_deref(), Some("high"));
        assert_eq!(row("c").rank, 1);
        assert_eq!(row("a").rank, 3);

        // plain rubric → no levels, no categories
        let plain = convert(&scores, &RubricSpec::new(1.0, 5.0).unwrap()).unwrap();
        assert!(plain
            .rows
            .iter()
            .all(|r| r.level.is_none() && r.category.is_none()));
    }

    #[test]
    fn csv_round_trips_full_precision() {
        let scores = table(&[("a", 0.1 + 0.2), ("b", 1.0 / 3.0)]);
        let rubric = RubricSpec::new(1.0, 5.0).unwrap();
        let converted = convert(&scores, &rubric).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scores.csv");
        converted.save_csv(&path).unwrap();

        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "id,latent,score,level,category,rank");
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        for (record, row) in reader.records().zip(&converted.rows) {
            let record = record.unwrap();
            assert_eq!(&record[0], row.id.as_str());
            let latent_back: f64 = record[1].parse().unwrap();
            let score_back: f64 = record[2].parse().unwrap();
            assert_eq!(latent_back, row.latent, "latent must round-trip exactly");
            assert_eq!(score_back, row.score, "score must round-trip exactly");
            assert_eq!(&record[3], "");
            assert_eq!(&record[4], "");
            assert_eq!(record[5].parse::<usize>().unwrap(), row.rank);
        }
    }
}
