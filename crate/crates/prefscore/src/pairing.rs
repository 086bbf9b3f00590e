//! Sampling which essay pairs get judged.
//!
//! Judging costs two model calls per pair, so only a budget of M pairs out
//! of the N(N−1)/2 possible ones is judged. Pairs are drawn uniformly
//! without replacement — each drawn pair yields both presentation orders
//! downstream, so sampling unordered pairs wastes no budget on mirrored
//! duplicates — and the stored orientation of each pair is randomized with a
//! fair coin from the same seeded generator.

use std::collections::HashSet;
use std::path::Path;

use rand::Rng;
use serde::Serialize;

use crate::data::EssaySet;
use crate::error::{Error, Result};
use crate::io::atomic_write;
use crate::seeding::rng_from_seed;

/// A reproducible list of essay-id pairs to judge.
#[derive(Debug, Clone, PartialEq)]
pub struct PairPlan {
    pairs: Vec<(String, String)>,
    pub seed: u64,
    pub m: usize,
}

impl PairPlan {
    /// The planned pairs in draw order; the tuple order is the presentation
    /// order of the forward query.
    pub fn pairs(&self) -> &[(String, String)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Writes the plan as JSONL (`{"i": …, "j": …}` per line) for audit.
    pub fn save_jsonl(&self, path: &Path) -> Result<()> {
        #[derive(Serialize)]
        struct Row<'a> {
            i: &'a str,
            j: &'a str,
        }
        let mut out = String::new();
        for (i, j) in &self.pairs {
            let row = Row { i, j };
            out.push_str(&serde_json::to_string(&row).expect("plain strings serialize"));
            out.push('\n');
        }
        atomic_write(path, out.as_bytes())
    }
}

/// Number of distinct unordered pairs over `n` items.
pub fn pair_capacity(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Draws `m` distinct unordered pairs uniformly without replacement, with
/// randomized orientation. The same `(essay_set, m, seed)` triple always
/// produces the identical plan.
pub fn sample_pairs(essay_set: &EssaySet, m: usize, seed: u64) -> Result<PairPlan> {
    let n = essay_set.len();
    let capacity = pair_capacity(n);
    if m == 0 {
        return Err(Error::config(
            "pair budget M must be at least 1".to_string(),
        ));
    }
    if m > capacity {
        return Err(Error::PairCapacity {
            requested: m,
            capacity,
            n,
        });
    }

    let mut rng = rng_from_seed(seed);
    // Rejection sampling is O(M) expected work while fewer than half of all
    // pairs are wanted; past that the expected retries climb, so fall back
    // to enumerating and partially shuffling the full pair list.
    let index_pairs = if m <= capacity / 2 {
        sample_by_rejection(n, m, &mut rng)
    } else {
        sample_by_enumeration(n, m, &mut rng)
    };

    let pairs = index_pairs
        .into_iter()
        .map(|(a, b)| {
            let flip: bool = rng.gen();
            let (x, y) = if flip { (b, a) } else { (a, b) };
            (
                essay_set.by_position(x).id.clone(),
                essay_set.by_position(y).id.clone(),
            )
        })
        .collect();

    Ok(PairPlan { pairs, seed, m })
}

fn sample_by_rejection(n: usize, m: usize, rng: &mut impl Rng) -> Vec<(usize, usize)> {
    let mut seen = HashSet::with_capacity(m * 2);
    let mut pairs = Vec::with_capacity(m);
    while pairs.len() < m {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a == b {
            continue;
        }
        let key = (a.min(b), a.max(b));
        if seen.insert(key) {
            pairs.push(key);
        }
    }
    pairs
}

fn sample_by_enumeration(n: usize, m: usize, rng: &mut impl Rng) -> Vec<(usize, usize)> {
    let mut all: Vec<(usize, usize)> = Vec::with_capacity(pair_capacity(n));
    for a in 0..n {
        for b in (a + 1)..n {
            all.push((a, b));
        }
    }
    // partial Fisher–Yates: after k steps the first k slots are a uniform
    // sample without replacement
    for k in 0..m {
        let pick = rng.gen_range(k..all.len());
        all.swap(k, pick);
    }
    all.truncate(m);
    all
}
