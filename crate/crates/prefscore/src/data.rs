//! Domain data model: essays, rubrics, pairwise records, and score tables.
//!
//! Values are immutable after construction and safe to share across threads;
//! anything that mutates builds a new value. Ids are opaque strings so
//! external datasets need no re-indexing; dense indices are assigned per
//! [`EssaySet`] in input order and used internally by the fitting code.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One text item to be scored, with optional supervision and features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Essay {
    /// Unique, non-empty identifier (opaque string).
    pub id: String,
    /// Identifier of the prompt/task the essay answers.
    pub prompt_id: String,
    /// The essay text itself. Non-empty.
    pub text: String,
    /// Human score in rubric units, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_score: Option<f64>,
    /// Feature vector used by the neural ranker, when available.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f64>>,
}

impl Essay {
    pub fn new(
        id: impl Into<String>,
        prompt_id: impl Into<String>,
        text: impl Into<String>,
    ) -> Self {
        Essay {
            id: id.into(),
            prompt_id: prompt_id.into(),
            text: text.into(),
            gold_score: None,
            embedding: None,
        }
    }

    pub fn with_gold(mut self, gold: f64) -> Self {
        self.gold_score = Some(gold);
        self
    }

    pub fn with_embedding(mut self, embedding: Vec<f64>) -> Self {
        self.embedding = Some(embedding);
        self
    }
}

/// Names and boundaries for mapping a continuous scale into ordered categories.
///
/// `thresholds` has one fewer entry than `names`; a value `v` falls in
/// category `k` where `k` is the number of thresholds strictly below `v`
/// (values exactly on a threshold belong to the higher category).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategorySpec {
    pub names: Vec<String>,
    pub thresholds: Vec<f64>,
}

/// Target scale for converted scores: bounds, optional discrete levels,
/// optional ordered categories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RubricSpec {
    pub y_min: f64,
    pub y_max: f64,
    /// Valid discrete scores on the scale, strictly ascending, when the
    /// rubric is discrete.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<f64>>,
    /// Ordered categories over the scale, when the rubric is categorical.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<CategorySpec>,
}

impl RubricSpec {
    /// A rubric spanning `[y_min, y_max]` with no levels or categories.
    pub fn new(y_min: f64, y_max: f64) -> Result<Self> {
        if !(y_min.is_finite() && y_max.is_finite()) || y_min >= y_max {
            return Err(Error::config(format!(
                "rubric bounds must be finite with y_min < y_max, got [{y_min}, {y_max}]"
            )));
        }
        Ok(RubricSpec {
            y_min,
            y_max,
            levels: None,
            categories: None,
        })
    }

    /// The unit interval; placeholder rubric for freshly loaded sets.
    pub fn unit() -> Self {
        RubricSpec {
            y_min: 0.0,
            y_max: 1.0,
            levels: None,
            categories: None,
        }
    }

    pub fn with_levels(mut self, levels: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::config("level set must be non-empty".to_string()));
        }
        if !levels.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::config(
                "levels must be strictly ascending".to_string(),
            ));
        }
        if levels[0] < self.y_min || *levels.last().unwrap() > self.y_max {
            return Err(Error::config(format!(
                "levels must lie within [{}, {}]",
                self.y_min, self.y_max
            )));
        }
        self.levels = Some(levels);
        Ok(self)
    }

    /// Re-checks every invariant the builder methods enforce; call this on
    /// rubrics that arrived through deserialization instead of the builders.
    pub fn validate(&self) -> Result<()> {
        let mut rebuilt = RubricSpec::new(self.y_min, self.y_max)?;
        if let Some(levels) = &self.levels {
            rebuilt = rebuilt.with_levels(levels.clone())?;
        }
        if let Some(cats) = &self.categories {
            rebuilt = rebuilt.with_categories(cats.names.clone(), cats.thresholds.clone())?;
        }
        let _ = rebuilt;
        Ok(())
    }

    pub fn with_categories(mut self, names: Vec<String>, thresholds: Vec<f64>) -> Result<Self> {
        if names.len() < 2 || thresholds.len() + 1 != names.len() {
            return Err(Error::config(format!(
                "need at least 2 categories and exactly names-1 thresholds, got {} names, {} thresholds",
                names.len(),
                thresholds.len()
            )));
        }
        if !thresholds.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::config(
                "thresholds must be strictly ascending".to_string(),
            ));
        }
        if thresholds[0] <= self.y_min || *thresholds.last().unwrap() >= self.y_max {
            return Err(Error::config(format!(
                "thresholds must lie strictly inside ({}, {})",
                self.y_min, self.y_max
            )));
        }
        self.categories = Some(CategorySpec { names, thresholds });
        Ok(self)
    }
}

/// An ordered collection of essays plus the shared judging context.
#[derive(Debug, Clone, PartialEq)]
pub struct EssaySet {
    essays: Vec<Essay>,
    /// Prompt/task statement shown to the judge.
    pub prompt_text: String,
    /// Rubric text shown to the judge.
    pub rubric_text: String,
    /// Target scale for converted outputs.
    pub rubric: RubricSpec,
    embedding_dim: Option<usize>,
    index: HashMap<String, usize>,
}

impl EssaySet {
    /// Validates ids, texts, and embedding dimensions, and assigns dense
    /// indices in input order.
    pub fn new(essays: Vec<Essay>) -> Result<Self> {
        if essays.is_empty() {
            return Err(Error::Empty {
                context: "no essays".to_string(),
            });
        }
        let mut index = HashMap::with_capacity(essays.len());
        let mut embedding_dim: Option<usize> = None;
        for (pos, essay) in essays.iter().enumerate() {
            if essay.id.is_empty() {
                return Err(Error::invalid(format!(
                    "essay at position {pos} has an empty id"
                )));
            }
            if essay.text.is_empty() {
                return Err(Error::invalid(format!(
                    "essay {:?} has empty text",
                    essay.id
                )));
            }
            if index.insert(essay.id.clone(), pos).is_some() {
                return Err(Error::DuplicateId {
                    id: essay.id.clone(),
                });
            }
            if let Some(gold) = essay.gold_score {
                if !gold.is_finite() {
                    return Err(Error::invalid(format!(
                        "essay {:?} has non-finite gold score {gold}",
                        essay.id
                    )));
                }
            }
            if let Some(embedding) = &essay.embedding {
                match embedding_dim {
                    None => embedding_dim = Some(embedding.len()),
                    Some(expected) if expected != embedding.len() => {
                        return Err(Error::DimensionMismatch {
                            id: essay.id.clone(),
                            expected,
                            actual: embedding.len(),
                        });
                    }
                    Some(_) => {}
                }
                if embedding.iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid(format!(
                        "essay {:?} has a non-finite embedding component",
                        essay.id
                    )));
                }
            }
        }
        Ok(EssaySet {
            essays,
            prompt_text: String::new(),
            rubric_text: String::new(),
            rubric: RubricSpec::unit(),
            embedding_dim,
            index,
        })
    }

    pub fn with_context(
        mut self,
        prompt_text: impl Into<String>,
        rubric_text: impl Into<String>,
    ) -> Self {
        self.prompt_text = prompt_text.into();
        self.rubric_text = rubric_text.into();
        self
    }

    pub fn with_rubric(mut self, rubric: RubricSpec) -> Self {
        self.rubric = rubric;
        self
    }

    /// Replaces every essay's embedding. `embeddings[k]` belongs to essay `k`
    /// in input order; all rows must share one dimension.
    pub fn with_embeddings(mut self, embeddings: Vec<Vec<f64>>) -> Result<Self> {
        if embeddings.len() != self.essays.len() {
            return Err(Error::invalid(format!(
                "got {} embeddings for {} essays",
                embeddings.len(),
                self.essays.len()
            )));
        }
        let dim = embeddings.first().map(|e| e.len()).unwrap_or(0);
        for (essay, embedding) in self.essays.iter_mut().zip(embeddings) {
            if embedding.len() != dim {
                return Err(Error::DimensionMismatch {
                    id: essay.id.clone(),
                    expected: dim,
                    actual: embedding.len(),
                });
            }
            essay.embedding = Some(embedding);
        }
        self.embedding_dim = Some(dim);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.essays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.essays.is_empty()
    }

    pub fn essays(&self) -> &[Essay] {
        &self.essays
    }

    /// Dense index of `id` in input order.
    pub fn position(&self, id: &str) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownId { id: id.to_string() })
    }

    pub fn get(&self, id: &str) -> Result<&Essay> {
        self.position(id).map(|pos| &self.essays[pos])
    }

    pub fn by_position(&self, pos: usize) -> &Essay {
        &self.essays[pos]
    }

    /// Shared embedding dimension, if any essay carries one.
    pub fn embedding_dim(&self) -> Option<usize> {
        self.embedding_dim
    }

    /// All gold scores in input order; fails naming the essays that have none.
    pub fn require_golds(&self) -> Result<Vec<f64>> {
        self.require_field(|e| e.gold_score, "gold score")
    }

    /// All embeddings in input order; fails naming the essays that have none.
    pub fn require_embeddings(&self) -> Result<Vec<&[f64]>> {
        let missing: Vec<&str> = self
            .essays
            .iter()
            .filter(|e| e.embedding.is_none())
            .map(|e| e.id.as_str())
            .collect();
        if let Some(first) = missing.first() {
            return Err(Error::MissingEmbedding {
                count: missing.len(),
                first: (*first).to_string(),
            });
        }
        Ok(self
            .essays
            .iter()
            .map(|e| e.embedding.as_deref().expect("checked above"))
            .collect())
    }

    fn require_field(&self, field: impl Fn(&Essay) -> Option<f64>, what: &str) -> Result<Vec<f64>> {
        let mut values = Vec::with_capacity(self.essays.len());
        let mut missing = Vec::new();
        for essay in &self.essays {
            match field(essay) {
                Some(v) => values.push(v),
                None => missing.push(essay.id.clone()),
            }
        }
        if missing.is_empty() {
            Ok(values)
        } else {
            Err(Error::invalid(format!(
                "{} essay(s) have no {what} (first: {:?})",
                missing.len(),
                missing[0]
            )))
        }
    }
}

/// One judged pair: raw verdicts from both presentation orders plus the
/// debiased label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseRecord {
    /// Id of the essay presented first in the forward query.
    pub i: String,
    /// Id of the essay presented first in the reversed query.
    pub j: String,
    /// Label from the forward query (1 = `i` preferred, 0 = `j`, 0.5 = tie).
    pub c_ij: f64,
    /// Label from the reversed query (1 = `j` preferred, 0 = `i`, 0.5 = tie).
    pub c_ji: f64,
    /// Debiased label: `c_ij` when the two queries are consistent, else 0.5.
    pub c_tilde: f64,
    /// Provenance of the judge that produced the verdicts.
    pub judge_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reasoning_fwd: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reasoning_rev: Option<String>,
}

/// True when `value` is one of the three legal comparison labels.
pub fn is_valid_label(value: f64) -> bool {
    value == 0.0 || value == 0.5 || value == 1.0
}

impl PairwiseRecord {
    /// Checks the structural invariants; `index` is the record's position in
    /// its containing sequence, for error reporting.
    pub fn validate(&self, index: usize) -> Result<()> {
        if self.i == self.j {
            return Err(Error::invalid(format!(
                "record {index}: pair compares essay {:?} with itself",
                self.i
            )));
        }
        for value in [self.c_ij, self.c_ji, self.c_tilde] {
            if !is_valid_label(value) {
                return Err(Error::InvalidLabel { value });
            }
        }
        let expected = crate::judge::debias(self.c_ij, self.c_ji)?;
        if self.c_tilde != expected {
            return Err(Error::DebiasMismatch {
                index,
                c_ij: self.c_ij,
                c_ji: self.c_ji,
                stored: self.c_tilde,
                expected,
            });
        }
        Ok(())
    }
}

/// Which fitting method produced a score table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMethod {
    Ranknet,
    BradleyTerry,
    Elo,
}

impl ScoreMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScoreMethod::Ranknet => "ranknet",
            ScoreMethod::BradleyTerry => "bradley_terry",
            ScoreMethod::Elo => "elo",
        }
    }
}

impl std::str::FromStr for ScoreMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ranknet" => Ok(ScoreMethod::Ranknet),
            "bt" | "bradley_terry" => Ok(ScoreMethod::BradleyTerry),
            "elo" => Ok(ScoreMethod::Elo),
            other => Err(Error::config(format!(
                "unknown method {other:?} (expected ranknet, bt, or elo)"
            ))),
        }
    }
}

impl std::fmt::Display for ScoreMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Latent scores for every essay in a set, in the set's input order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub method: ScoreMethod,
    entries: Vec<(String, f64)>,
}

impl ScoreTable {
    /// Builds a table over `essay_set`'s ids from dense-indexed `scores`.
    /// All values must be finite.
    pub fn from_dense(essay_set: &EssaySet, method: ScoreMethod, scores: &[f64]) -> Result<Self> {
        if scores.len() != essay_set.len() {
            return Err(Error::invalid(format!(
                "got {} scores for {} essays",
                scores.len(),
                essay_set.len()
            )));
        }
        let mut entries = Vec::with_capacity(scores.len());
        for (essay, &score) in essay_set.essays().iter().zip(scores) {
            if !score.is_finite() {
                return Err(Error::invalid(format!(
                    "non-finite latent score for essay {:?}",
                    essay.id
                )));
            }
            entries.push((essay.id.clone(), score));
        }
        Ok(ScoreTable { method, entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `(id, latent score)` pairs in essay-set input order.
    pub fn entries(&self) -> &[(String, f64)] {
        &self.entries
    }

    pub fn get(&self, id: &str) -> Option<f64> {
        self.entries
            .iter()
            .find(|(entry_id, _)| entry_id == id)
            .map(|&(_, score)| score)
    }

    /// Latent scores in essay-set input order.
    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|&(_, v)| v).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn essay(id: &str) -> Essay {
        Essay::new(id, "p1", format!("text of {id}"))
    }

    #[test]
    fn essay_set_assigns_dense_indices_in_input_order() {
        let set = EssaySet::new(vec![essay("a"), essay("b"), essay("c")]).unwrap();
        assert_eq!(set.len(), 3);
        assert_eq!(set.position("a").unwrap(), 0);
        assert_eq!(set.position("c").unwrap(), 2);
        assert_eq!(set.by_position(1).id, "b");
    }

    #[test]
    fn essay_set_rejects_duplicate_id() {
        let err = EssaySet::new(vec![essay("a"), essay("a")]).unwrap_err();
        match err {
            Error::DuplicateId { id } => assert_eq!(id, "a"),
            other => panic!("expected DuplicateId, got {other:?}"),
        }
    }

    #[test]
    fn essay_set_rejects_empty() {
        let err = EssaySet::new(vec![]).unwrap_err();
        assert!(err.to_string().contains("no essays"));
    }

    #[test]
    fn essay_set_rejects_empty_text_and_empty_id() {
        let mut blank_text = essay("a");
        blank_text.text.clear();
        assert!(EssaySet::new(vec![blank_text]).is_err());

        let blank_id = Essay::new("", "p1", "body");
        assert!(EssaySet::new(vec![blank_id]).is_err());
    }

    #[test]
    fn essay_set_tracks_embedding_dimension() {
        let set = EssaySet::new(vec![
            essay("a").with_embedding(vec![1.0, 2.0]),
            essay("b").with_embedding(vec![3.0, 4.0]),
        ])
        .unwrap();
        assert_eq!(set.embedding_dim(), Some(2));

        let err = EssaySet::new(vec![
            essay("a").with_embedding(vec![1.0, 2.0]),
            essay("b").with_embedding(vec![3.0]),
        ])
        .unwrap_err();
        match err {
            Error::DimensionMismatch {
                id,
                expected,
                actual,
            } => {
                assert_eq!(id, "b");
                assert_eq!((expected, actual), (2, 1));
            }
            other => panic!("expected DimensionMismatch, got {other:?}"),
        }
    }

    #[test]
    fn missing_embeddings_are_legal_until_required() {
        let set = EssaySet::new(vec![essay("a").with_embedding(vec![1.0]), essay("b")]).unwrap();
        let err = set.require_embeddings().unwrap_err();
        match err {
            Error::MissingEmbedding { count, first } => {
                assert_eq!(count, 1);
                assert_eq!(first, "b");
            }
            other => panic!("expected MissingEmbedding, got {other:?}"),
        }
    }

    #[test]
    fn require_golds_names_missing_essays() {
        let set = EssaySet::new(vec![essay("a").with_gold(3.0), essay("b")]).unwrap();
        let err = set.require_golds().unwrap_err();
        assert!(err.to_string().contains("\"b\""));
    }

    #[test]
    fn rubric_rejects_bad_bounds_levels_thresholds() {
        assert!(RubricSpec::new(5.0, 5.0).is_err());
        assert!(RubricSpec::new(f64::NAN, 1.0).is_err());
        assert!(RubricSpec::new(2.0, 12.0)
            .unwrap()
            .with_levels(vec![2.0, 2.0, 3.0])
            .is_err());
        assert!(RubricSpec::new(2.0, 12.0)
            .unwrap()
            .with_levels(vec![1.0, 3.0])
            .is_err());
        // threshold on the boundary is not "strictly inside"
        assert!(RubricSpec::new(1.0, 5.0)
            .unwrap()
            .with_categories(vec!["low".into(), "high".into()], vec![1.0])
            .is_err());
        // count mismatch
        assert!(RubricSpec::new(1.0, 5.0)
            .unwrap()
            .with_categories(vec!["low".into(), "high".into()], vec![2.0, 3.0])
            .is_err());
        let ok = RubricSpec::new(1.0, 5.0)
            .unwrap()
            .with_categories(
                vec!["low".into(), "medium".into(), "high".into()],
                vec![2.25, 3.75],
            )
            .unwrap();
        assert_eq!(ok.categories.unwrap().thresholds, vec![2.25, 3.75]);
    }

    #[test]
    fn score_table_preserves_order_and_rejects_non_finite() {
        let set = EssaySet::new(vec![essay("a"), essay("b")]).unwrap();
        let table = ScoreTable::from_dense(&set, ScoreMethod::Elo, &[1500.0, 1400.0]).unwrap();
        assert_eq!(table.get("a"), Some(1500.0));
        assert_eq!(table.entries()[1].0, "b");
        assert!(ScoreTable::from_dense(&set, ScoreMethod::Elo, &[f64::NAN, 0.0]).is_err());
        assert!(ScoreTable::from_dense(&set, ScoreMethod::Elo, &[1.0]).is_err());
    }

    #[test]
    fn score_method_parses_cli_names() {
        assert_eq!(
            "ranknet".parse::<ScoreMethod>().unwrap(),
            ScoreMethod::Ranknet
        );
        assert_eq!(
            "bt".parse::<ScoreMethod>().unwrap(),
            ScoreMethod::BradleyTerry
        );
        assert_eq!("elo".parse::<ScoreMethod>().unwrap(), ScoreMethod::Elo);
        assert!("glicko".parse::<ScoreMethod>().is_err());
    }
}
