//! Pairwise judging: verdicts, debiasing, and the judge abstraction.
//!
//! A judge looks at two essays in a fixed presentation order and states which
//! one is better (or that they tie). Because judges can systematically favor
//! a presentation slot, every pair is queried twice — once per order — and
//! the two raw labels are folded into a debiased label: kept when the orders
//! agree, collapsed to a tie when they contradict each other.

mod remote;
mod simulator;
mod template;

pub use remote::{RemoteJudge, RemoteJudgeConfig};
pub use simulator::{simulate_verdict, SimJudge, SimJudgeConfig};
pub use template::{render_prompt, PromptTemplate, PLACEHOLDERS};

use crate::data::{is_valid_label, Essay, EssaySet, PairwiseRecord};
use crate::error::{Error, Result};

/// Which slot a judge preferred.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VerdictLabel {
    /// The essay presented first scores higher.
    Essay1,
    /// The essay presented second scores higher.
    Essay2,
    /// The essays score the same.
    Tie,
}

impl VerdictLabel {
    /// The label a judge would emit for the same decision with the slots
    /// swapped.
    pub fn opposite(self) -> Self {
        match self {
            VerdictLabel::Essay1 => VerdictLabel::Essay2,
            VerdictLabel::Essay2 => VerdictLabel::Essay1,
            VerdictLabel::Tie => VerdictLabel::Tie,
        }
    }
}

/// One parsed judge response.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub label: VerdictLabel,
    /// The judge's stated justification ("" when none was given).
    pub reasoning: String,
    /// The raw response text the label was parsed from.
    pub raw: String,
}

/// Numeric comparison label: first-slot win → 1, second-slot win → 0,
/// tie → 0.5.
pub fn label_to_numeric(label: VerdictLabel) -> f64 {
    match label {
        VerdictLabel::Essay1 => 1.0,
        VerdictLabel::Essay2 => 0.0,
        VerdictLabel::Tie => 0.5,
    }
}

/// Folds the two presentation orders' labels into one debiased label.
///
/// The orders are consistent exactly when `c_ij == 1 − c_ji` (the reversed
/// query mirrors the forward one); then the forward label stands. Any
/// contradiction — including the judge preferring the first slot both times —
/// collapses to a tie, so a pure position preference cancels instead of
/// polluting the training labels.
pub fn debias(c_ij: f64, c_ji: f64) -> Result<f64> {
    for value in [c_ij, c_ji] {
        if !is_valid_label(value) {
            return Err(Error::InvalidLabel { value });
        }
    }
    if c_ij == 1.0 - c_ji {
        Ok(c_ij)
    } else {
        Ok(0.5)
    }
}

/// Extracts a verdict from raw judge output.
///
/// The response is expected to contain a JSON object with a `preference`
/// field in {"essay1", "essay2", "tie"} (any letter case). The first
/// well-formed JSON object found in the text decides; surrounding prose is
/// ignored and never used to infer a label.
pub fn parse_verdict(raw: &str) -> Result<Verdict> {
    let object_text = first_json_object(raw).ok_or_else(|| Error::VerdictParse {
        reason: format!("no JSON object in response: {raw:?}"),
    })?;
    let value: serde_json::Value =
        serde_json::from_str(object_text).expect("candidate was validated as JSON");

    let preference = value
        .get("preference")
        .and_then(|p| p.as_str())
        .ok_or_else(|| Error::VerdictParse {
            reason: format!("object has no string `preference` field: {raw:?}"),
        })?;

    let label = if preference.eq_ignore_ascii_case("essay1") {
        VerdictLabel::Essay1
    } else if preference.eq_ignore_ascii_case("essay2") {
        VerdictLabel::Essay2
    } else if preference.eq_ignore_ascii_case("tie") {
        VerdictLabel::Tie
    } else {
        return Err(Error::VerdictParse {
            reason: format!(
                "`preference` must be essay1, essay2, or tie; got {preference:?} in {raw:?}"
            ),
        });
    };

    let reasoning = value
        .get("reasoning")
        .and_then(|r| r.as_str())
        .unwrap_or("")
        .to_string();

    Ok(Verdict {
        label,
        reasoning,
        raw: raw.to_string(),
    })
}

/// Finds the first substring of `raw` that parses as a JSON object.
fn first_json_object(raw: &str) -> Option<&str> {
    let bytes = raw.as_bytes();
    for (start, _) in raw.char_indices().filter(|&(_, c)| c == '{') {
        if let Some(end) = matching_close(bytes, start) {
            let candidate = &raw[start..end];
            if let Ok(value) = serde_json::from_str::<serde_json::Value>(candidate) {
                if value.is_object() {
                    return Some(candidate);
                }
            }
        }
    }
    None
}

/// Returns the exclusive end index of the brace-balanced region opening at
/// `start`, tracking JSON string literals so braces inside strings don't
/// count.
fn matching_close(bytes: &[u8], start: usize) -> Option<usize> {
    debug_assert_eq!(bytes[start], b'{');
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (offset, &b) in bytes[start..].iter().enumerate() {
        if in_string {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'"' {
                in_string = false;
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(start + offset + 1);
                }
            }
            _ => {}
        }
    }
    None
}

/// A source of pairwise verdicts.
///
/// Implementations must be safe to call from multiple threads: verdicts for
/// distinct pairs are independent and the caller may issue them concurrently.
pub trait Judge: Sync {
    /// Stable provenance string recorded on every [`PairwiseRecord`].
    fn id(&self) -> String;

    /// How many attempts a single query gets before the pair is skipped.
    /// Only parse and transport failures are retried.
    fn max_attempts(&self) -> usize {
        1
    }

    /// One judgment of `first` vs `second` in that presentation order.
    fn judge_once(&self, set: &EssaySet, first: &Essay, second: &Essay) -> Result<Verdict>;
}

/// True when retrying the same query could plausibly succeed.
fn retryable(error: &Error) -> bool {
    matches!(error, Error::VerdictParse { .. } | Error::Remote { .. })
}

fn query_with_retries(
    judge: &dyn Judge,
    set: &EssaySet,
    first: &Essay,
    second: &Essay,
) -> Result<Verdict> {
    let attempts = judge.max_attempts().max(1);
    let mut last_error = None;
    for _ in 0..attempts {
        match judge.judge_once(set, first, second) {
            Ok(verdict) => return Ok(verdict),
            Err(error) if retryable(&error) => last_error = Some(error),
            Err(error) => return Err(error),
        }
    }
    Err(Error::JudgeExhausted {
        i: first.id.clone(),
        j: second.id.clone(),
        attempts,
        last_error: last_error.expect("at least one attempt ran").to_string(),
    })
}

/// Queries the judge in both presentation orders and assembles the debiased
/// record for the pair `(i, j)`.
///
/// A query that still fails after the judge's retry budget makes the whole
/// pair fail; callers running a batch treat that as "skip this pair" and
/// count it in the run report.
pub fn compare_pair(judge: &dyn Judge, set: &EssaySet, i: &str, j: &str) -> Result<PairwiseRecord> {
    if i == j {
        return Err(Error::invalid(format!(
            "cannot compare essay {i:?} with itself"
        )));
    }
    let first = set.get(i)?;
    let second = set.get(j)?;

    let forward = query_with_retries(judge, set, first, second)?;
    let reverse = query_with_retries(judge, set, second, first)?;

    let c_ij = label_to_numeric(forward.label);
    let c_ji = label_to_numeric(reverse.label);
    let c_tilde = debias(c_ij, c_ji)?;

    Ok(PairwiseRecord {
        i: i.to_string(),
        j: j.to_string(),
        c_ij,
        c_ji,
        c_tilde,
        judge_id: judge.id(),
        reasoning_fwd: none_if_empty(forward.reasoning),
        reasoning_rev: none_if_empty(reverse.reasoning),
    })
}

fn none_if_empty(s: String) -> Option<String> {
    if s.is_empty() {
        None
    } else {
        Some(s)
    }
}
