//! Pairwise-preference scoring for text items.
//!
//! This crate estimates continuous quality scores for a set of text items
//! (typically essays) from noisy pairwise preference judgments. The pipeline:
//!
//! 1. [`pairing`] — sample which unordered pairs get judged;
//! 2. [`judge`] — query a judge (a remote chat-completion model or a local
//!    simulator) in both presentation orders and debias the two verdicts into
//!    a single label in `{0, 0.5, 1}`;
//! 3. [`ranknet`] / [`baselines`] — fit latent scores to the labels with a
//!    shared-weight neural ranker, Bradley–Terry, or Elo;
//! 4. [`convert`] — map latent scores onto a rubric scale, discrete levels,
//!    categories, and a ranking;
//! 5. [`metrics`] — quadratic weighted kappa, Spearman correlation, judge
//!    inconsistency, and gold-agreement rates.
//!
//! [`pipeline`] wires the stages into the three operations exposed by the
//! `prefscore` binary: `generate`, `score`, and `sweep`.

pub mod baselines;
pub mod convert;
pub mod data;
pub mod embeddings;
pub mod error;
pub mod io;
pub mod judge;
pub mod metrics;
pub mod pairing;
pub mod pipeline;
pub mod ranknet;
pub mod seeding;

pub use error::{Error, Result};
