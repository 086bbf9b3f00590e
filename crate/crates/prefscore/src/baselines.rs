//! Classical pairwise-to-score baselines: Bradley–Terry maximum likelihood
//! and Elo rating updates, both consuming the same debiased labels as the
//! neural scorer so the three methods are directly comparable.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{EssaySet, PairwiseRecord, ScoreMethod, ScoreTable};
use crate::error::{Error, Result};
use crate::seeding::rng_for_context;

/// Bradley–Terry fitting controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BTConfig {
    pub iterations: usize,
    pub learning_rate: f64,
    /// Stop when no score moved more than this in one step.
    pub tolerance: f64,
}

impl Default for BTConfig {
    fn default() -> Self {
        BTConfig {
            iterations: 2000,
            learning_rate: 0.05,
            tolerance: 1e-8,
        }
    }
}

impl BTConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::config("iterations must be positive"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::config("learning_rate must be positive and finite"));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::config("tolerance must be positive and finite"));
        }
        Ok(())
    }
}

/// Elo rating controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EloConfig {
    pub k_factor: f64,
    pub initial_rating: f64,
    /// How many shuffled sweeps over the records to run.
    pub passes: usize,
    /// Seed for the per-pass record order.
    pub seed: u64,
}

impl Default for EloConfig {
    fn default() -> Self {
        EloConfig {
            k_factor: 32.0,
            initial_rating: 1500.0,
            passes: 1,
            seed: 0,
        }
    }
}

impl EloConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_factor.is_finite() && self.k_factor > 0.0) {
            return Err(Error::config("k_factor must be positive and finite"));
        }
        if !self.initial_rating.is_finite() {
            return Err(Error::config("initial_rating must be finite"));
        }
        if self.passes == 0 {
            return Err(Error::config("passes must be positive"));
        }
        Ok(())
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn resolve_pairs(
    essay_set: &EssaySet,
    records: &[PairwiseRecord],
    what: &str,
) -> Result<Vec<(usize, usize, f64)>> {
    if records.is_empty() {
        return Err(Error::Empty {
            context: format!("{what} over no pairwise records"),
        });
    }
    let mut pairs = Vec::with_capacity(records.len());
    for (position, record) in records.iter().enumerate() {
        record.validate(position)?;
        pairs.push((
            essay_set.position(&record.i)?,
            essay_set.position(&record.j)?,
            record.c_tilde,
        ));
    }
    Ok(pairs)
}

/// Fit one latent strength per essay by gradient ascent on the mean
/// Bradley–Terry log-likelihood of the debiased labels.
///
/// After every step the scores of essays that appear in at least one record
/// are re-centered to mean zero (the likelihood is translation-invariant);
/// essays appearing in no record keep score exactly 0. Stops early once no
/// score moves more than `cfg.tolerance` in a step.
pub fn bt_fit(
    essay_set: &EssaySet,
    records: &[PairwiseRecord],
    cfg: &BTConfig,
) -> Result<ScoreTable> {
    cfg.validate()?;
    let pairs = resolve_pairs(essay_set, records, "bradley-terry fit")?;
    let n = essay_set.len();

    let mut participates = vec![false; n];
    for &(i, j, _) in &pairs {
        participates[i] = true;
        participates[j] = true;
    }
    let participant_count = participates.iter().filter(|&&p| p).count() as f64;

    let mut scores = vec![0.0f64; n];
    let mut gradient = vec![0.0f64; n];
    let inv_m = 1.0 / pairs.len() as f64;

    for _ in 0..cfg.iterations {
        gradient.iter_mut().for_each(|g| *g = 0.0);
        for &(i, j, target) in &pairs {
            let predicted = sigmoid(scores[i] - scores[j]);
            let push = (target - predicted) * inv_m;
            gradient[i] += push;
            gradient[j] -= push;
        }

        let mut max_move: f64 = 0.0;
        let mut mean = 0.0;
        for index in 0..n {
            if participates[index] {
                scores[index] += cfg.learning_rate * gradient[index];
                mean += scores[index];
            }
        }
        mean /= participant_count;
        for index in 0..n {
            if participates[index] {
                let moved = cfg.learning_rate * gradient[index] - mean;
                scores[index] -= mean;
                max_move = max_move.max(moved.abs());
            }
        }
        if max_move < cfg.tolerance {
            break;
        }
    }

    ScoreTable::from_dense(essay_set, ScoreMethod::BradleyTerry, &scores)
}

/// Run Elo rating updates over the records.
///
/// Each pass visits the records in a freshly shuffled seeded order. For a
/// record `(i, j, c̃)` the expected first-essay result is
/// `1/(1 + 10^((r_j − r_i)/400))`; the first essay gains
/// `K · (c̃ − expected)` and the second loses exactly the same amount, so
/// the total rating mass is conserved by construction.
pub fn elo_run(
    essay_set: &EssaySet,
    records: &[PairwiseRecord],
    cfg: &EloConfig,
) -> Result<ScoreTable> {
    cfg.validate()?;
    let pairs = resolve_pairs(essay_set, records, "elo run")?;
    let n = essay_set.len();

    let mut ratings = vec![cfg.initial_rating; n];
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut rng = rng_for_context(cfg.seed, &["elo-pass-order"]);

    for _ in 0..cfg.passes {
        for k in (1..order.len()).rev() {
            let pick = rng.gen_range(0..=k);
            order.swap(k, pick);
        }
        for &t in &order {
            let (i, j, target) = pairs[t];
            let expected = 1.0 / (1.0 + 10f64.powf((ratings[j] - ratings[i]) / 400.0));
            let delta = cfg.k_factor * (target - expected);
            ratings[i] += delta;
            ratings[j] -= delta;
        }
    }

    ScoreTable::from_dense(essay_set, ScoreMethod::Elo, &ratings)
}
