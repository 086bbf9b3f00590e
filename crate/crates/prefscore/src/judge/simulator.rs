//! Deterministic judge simulator.
//!
//! Stands in for a remote judge in tests, sweeps, and offline runs. It sees
//! the essays' gold scores and produces verdicts with three controllable
//! imperfections: a tie margin (gold gaps up to τ read as ties), label noise
//! (the correct verdict is flipped with probability ε), and position bias
//! (with probability β it prefers the first slot unconditionally, the
//! failure mode the order-swap debiasing exists to cancel).

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Judge, Verdict, VerdictLabel};
use crate::data::{Essay, EssaySet};
use crate::error::{Error, Result};
use crate::seeding::rng_for_context;

/// Behavior knobs for the simulated judge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimJudgeConfig {
    /// Gold-score gap at or below which the simulator answers "tie" (τ ≥ 0).
    #[serde(default)]
    pub tie_margin: f64,
    /// Probability of flipping a decisive verdict to the wrong slot (ε ∈ [0, 1)).
    #[serde(default)]
    pub flip_prob: f64,
    /// Probability of answering "essay 1" regardless of content (β ∈ [0, 1)).
    #[serde(default)]
    pub position_bias: f64,
    /// Seed for all randomness this judge uses.
    #[serde(default)]
    pub seed: u64,
}

impl Default for SimJudgeConfig {
    fn default() -> Self {
        SimJudgeConfig {
            tie_margin: 0.0,
            flip_prob: 0.0,
            position_bias: 0.0,
            seed: 0,
        }
    }
}

impl SimJudgeConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.tie_margin.is_finite() || self.tie_margin < 0.0 {
            return Err(Error::config(format!(
                "tie_margin must be a finite nonnegative real, got {}",
                self.tie_margin
            )));
        }
        for (name, value) in [
            ("flip_prob", self.flip_prob),
            ("position_bias", self.position_bias),
        ] {
            if !(0.0..1.0).contains(&value) {
                return Err(Error::config(format!(
                    "{name} must lie in [0, 1), got {value}"
                )));
            }
        }
        Ok(())
    }
}

/// One simulated verdict for golds presented in (first, second) order.
///
/// Draw order: the position-bias coin first (so β = 1 would always answer
/// "essay 1"), then the tie margin, then the flip coin on decisive verdicts.
pub fn simulate_verdict(
    gold_first: f64,
    gold_second: f64,
    cfg: &SimJudgeConfig,
    rng: &mut impl Rng,
) -> VerdictLabel {
    let bias_draw: f64 = rng.gen();
    if bias_draw < cfg.position_bias {
        return VerdictLabel::Essay1;
    }
    if (gold_first - gold_second).abs() <= cfg.tie_margin {
        return VerdictLabel::Tie;
    }
    let honest = if gold_first > gold_second {
        VerdictLabel::Essay1
    } else {
        VerdictLabel::Essay2
    };
    let flip_draw: f64 = rng.gen();
    if flip_draw < cfg.flip_prob {
        honest.opposite()
    } else {
        honest
    }
}

/// [`Judge`] implementation backed by [`simulate_verdict`].
///
/// Each query's randomness is derived from (seed, first id, second id), so
/// results do not depend on query order or concurrency.
#[derive(Debug, Clone)]
pub struct SimJudge {
    cfg: SimJudgeConfig,
}

impl SimJudge {
    pub fn new(cfg: SimJudgeConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(SimJudge { cfg })
    }

    pub fn config(&self) -> &SimJudgeConfig {
        &self.cfg
    }
}

impl Judge for SimJudge {
    fn id(&self) -> String {
        format!(
            "sim(seed={},tau={},eps={},beta={})",
            self.cfg.seed, self.cfg.tie_margin, self.cfg.flip_prob, self.cfg.position_bias
        )
    }

    fn judge_once(&self, _set: &EssaySet, first: &Essay, second: &Essay) -> Result<Verdict> {
        let gold_first = require_gold(first)?;
        let gold_second = require_gold(second)?;
        let mut rng = rng_for_context(self.cfg.seed, &["sim-judge", &first.id, &second.id]);
        let label = simulate_verdict(gold_first, gold_second, &self.cfg, &mut rng);
        Ok(Verdict {
            label,
            reasoning: String::new(),
            raw: String::new(),
        })
    }
}

fn require_gold(essay: &Essay) -> Result<f64> {
    match essay.gold_score {
        Some(gold) if gold.is_finite() => Ok(gold),
        Some(gold) => Err(Error::invalid(format!(
            "essay {:?} has non-finite gold score {gold}",
            essay.id
        ))),
        None => Err(Error::invalid(format!(
            "simulated judge requires gold scores, essay {:?} has none",
            essay.id
        ))),
    }
}
