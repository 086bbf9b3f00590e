//! C ABI over the `prefscore` library.
//!
//! Conventions:
//!
//! * Every fallible call returns a [`PsStatus`]; `PS_STATUS_OK` (0) means
//!   success. On failure, [`ps_last_error_message`] returns a human-readable
//!   description of the most recent error on the calling thread; the pointer
//!   stays valid until the next call into the library from that thread.
//! * `PsEssaySet` and `PsScoreTable` are opaque handles. Pointers returned
//!   through `out` parameters are owned by the caller and must be released
//!   with the matching `_free` function exactly once. `_free` accepts null.
//! * All `char*` arguments are NUL-terminated UTF-8.
//! * Handles are safe to share across threads for read-only calls; creation
//!   and destruction of a given handle must not race with its use.
//!
//! The generated header lives at `include/prefscore.h` (regenerated by the
//! build script whenever this file changes).

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use prefscore::baselines::{bt_fit, elo_run, BTConfig, EloConfig};
use prefscore::convert::format_float;
use prefscore::data::{EssaySet, ScoreTable};
use prefscore::error::Error;
use prefscore::io::{detect_essay_format, load_comparisons, load_essays};
use prefscore::judge::debias;
use prefscore::metrics::{qwk, spearman};
use prefscore::pipeline::Method;
use prefscore::ranknet::{train, TrainConfig};

/// Status code returned by every fallible function in this ABI.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsStatus {
    /// Success.
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// File could not be read or written.
    Io = 3,
    /// File contents could not be parsed.
    Parse = 4,
    /// An input value or configuration violated an invariant.
    InvalidInput = 5,
    /// An id was not found in the referenced set or table.
    UnknownId = 6,
    /// The requested metric is mathematically undefined on these inputs.
    MetricUndefined = 7,
    /// A remote endpoint or judge failed.
    Remote = 8,
    /// A credential environment variable is missing or empty.
    Credential = 9,
    /// Artifacts from different configurations were mixed.
    Provenance = 10,
    /// Too many pairwise queries were skipped for the run to be trusted.
    TooManySkips = 11,
    /// A caller-supplied buffer is too small for the value.
    BufferTooSmall = 12,
    /// The library panicked; this is a bug in the library.
    Internal = 13,
}

/// Opaque handle to a loaded essay collection.
pub struct PsEssaySet {
    inner: EssaySet,
}

/// Opaque handle to fitted latent scores, in essay input order.
pub struct PsScoreTable {
    inner: ScoreTable,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> =
        RefCell::new(CString::new("").expect("empty string has no NUL"));
}

fn set_last_error(message: String) {
    let stored = CString::new(message)
        .unwrap_or_else(|_| CString::new("error message contained a NUL byte").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = stored);
}

/// Maps a library error onto its stable status code.
fn status_of(err: &Error) -> PsStatus {
    match err {
        Error::Io { .. } => PsStatus::Io,
        Error::Parse { .. } => PsStatus::Parse,
        Error::UnknownId { .. } => PsStatus::UnknownId,
        Error::UndefinedMetric { .. } => PsStatus::MetricUndefined,
        Error::Remote { .. } | Error::VerdictParse { .. } | Error::JudgeExhausted { .. } => {
            PsStatus::Remote
        }
        Error::MissingCredential { .. } => PsStatus::Credential,
        Error::Provenance { .. } => PsStatus::Provenance,
        Error::TooManySkips { .. } => PsStatus::TooManySkips,
        // Everything else is a structural problem with the inputs.
        _ => PsStatus::InvalidInput,
    }
}

fn fail(err: Error) -> PsStatus {
    let status = status_of(&err);
    set_last_error(err.to_string());
    status
}

fn fail_with(status: PsStatus, message: &str) -> PsStatus {
    set_last_error(message.to_string());
    status
}

/// Runs an FFI body, converting panics into [`PsStatus::Internal`] instead of
/// unwinding across the C boundary.
fn guarded<F: FnOnce() -> PsStatus>(body: F) -> PsStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => fail_with(PsStatus::Internal, "internal panic; please report this"),
    }
}

/// Borrows a C string argument as UTF-8, or reports why it can't be.
///
/// # Safety
/// `ptr` must be null or point to a NUL-terminated string.
unsafe fn utf8_arg<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, PsStatus> {
    if ptr.is_null() {
        return Err(fail_with(
            PsStatus::NullArgument,
            &format!("argument {name} is null"),
        ));
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        fail_with(
            PsStatus::InvalidUtf8,
            &format!("argument {name} is not valid UTF-8"),
        )
    })
}

fn require<'a, T>(ptr: *const T, name: &str) -> Result<&'a T, PsStatus> {
    // Safety: the caller contract for every function taking handles is that
    // non-null pointers come from this library and are still live.
    unsafe { ptr.as_ref() }
        .ok_or_else(|| fail_with(PsStatus::NullArgument, &format!("argument {name} is null")))
}

fn require_out<'a, T>(ptr: *mut T, name: &str) -> Result<&'a mut T, PsStatus> {
    unsafe { ptr.as_mut() }
        .ok_or_else(|| fail_with(PsStatus::NullArgument, &format!("argument {name} is null")))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ps_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message for the most recent error on the calling thread.
///
/// Returns a pointer to a NUL-terminated UTF-8 string (empty if no error has
/// occurred yet). The pointer is invalidated by the next library call made
/// from the same thread.
#[no_mangle]
pub extern "C" fn ps_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Loads essays from `path` into a new handle stored in `*out`.
///
/// The format is inferred from the extension: `.jsonl`/`.ndjson` is JSON
/// Lines (which may carry embeddings and gold scores), anything else is CSV
/// with an `id,prompt_id,text[,gold_score]` header.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be a valid location to
/// store the handle. On success the caller owns `*out` and must release it
/// with [`ps_essay_set_free`].
#[no_mangle]
pub unsafe extern "C" fn ps_essay_set_load(
    path: *const c_char,
    out: *mut *mut PsEssaySet,
) -> PsStatus {
    guarded(|| {
        let out = match require_out(out, "out") {
            Ok(v) => v,
            Err(s) => return s,
        };
        let path = match utf8_arg(path, "path") {
            Ok(v) => Path::new(v),
            Err(s) => return s,
        };
        match load_essays(path, detect_essay_format(path)) {
            Ok(set) => {
                *out = Box::into_raw(Box::new(PsEssaySet { inner: set }));
                PsStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Number of essays in the set; 0 when `set` is null.
///
/// # Safety
/// `set` must be null or a live pointer from [`ps_essay_set_load`].
#[no_mangle]
pub unsafe extern "C" fn ps_essay_set_len(set: *const PsEssaySet) -> usize {
    set.as_ref().map_or(0, |s| s.inner.len())
}

/// Releases a handle from [`ps_essay_set_load`]. Accepts null.
///
/// # Safety
/// `set` must be null or an owned pointer from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn ps_essay_set_free(set: *mut PsEssaySet) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

/// Fits latent scores for `set` from the judged pairs in `comparisons_path`
/// (JSON Lines, as written by the `prefscore generate` command) and stores a
/// new score-table handle in `*out`.
///
/// `method` is `"ranknet"`, `"bt"`, or `"elo"`; each runs with its default
/// hyperparameters. `seed` drives the method's randomness (batch shuffling
/// and weight initialization for ranknet, record-order shuffling for elo; bt
/// is deterministic and ignores it). The ranknet method requires every essay
/// to carry an embedding, so it needs JSONL input with `embedding` fields.
///
/// # Safety
/// Pointer arguments follow the same rules as [`ps_essay_set_load`]. On
/// success the caller owns `*out` and must release it with
/// [`ps_score_table_free`].
#[no_mangle]
pub unsafe extern "C" fn ps_fit_scores(
    set: *const PsEssaySet,
    comparisons_path: *const c_char,
    method: *const c_char,
    seed: u64,
    out: *mut *mut PsScoreTable,
) -> PsStatus {
    guarded(|| {
        let out = match require_out(out, "out") {
            Ok(v) => v,
            Err(s) => return s,
        };
        let set = match require(set, "set") {
            Ok(v) => v,
            Err(s) => return s,
        };
        let comparisons_path = match utf8_arg(comparisons_path, "comparisons_path") {
            Ok(v) => Path::new(v),
            Err(s) => return s,
        };
        let method = match utf8_arg(method, "method") {
            Ok(v) => v,
            Err(s) => return s,
        };
        let method: Method = match method.parse() {
            Ok(m) => m,
            Err(e) => return fail(e),
        };
        let records = match load_comparisons(comparisons_path) {
            Ok(r) => r,
            Err(e) => return fail(e),
        };
        let fitted = match method {
            Method::Ranknet => {
                let cfg = TrainConfig {
                    seed,
                    ..TrainConfig::default()
                };
                train(&set.inner, &records, &cfg)
                    .map(|report| report.model.score_all(&set.inner))
                    .and_then(|table| table)
            }
            Method::Bt => bt_fit(&set.inner, &records, &BTConfig::default()),
            Method::Elo => {
                let cfg = EloConfig {
                    seed,
                    ..EloConfig::default()
                };
                elo_run(&set.inner, &records, &cfg)
            }
        };
        match fitted {
            Ok(table) => {
                *out = Box::into_raw(Box::new(PsScoreTable { inner: table }));
                PsStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Number of scored essays; 0 when `table` is null.
///
/// # Safety
/// `table` must be null or a live pointer from [`ps_fit_scores`].
#[no_mangle]
pub unsafe extern "C" fn ps_score_table_len(table: *const PsScoreTable) -> usize {
    table.as_ref().map_or(0, |t| t.inner.len())
}

/// Looks up the latent score for `id` and stores it in `*out`.
///
/// # Safety
/// Pointer arguments follow the same rules as [`ps_essay_set_load`].
#[no_mangle]
pub unsafe extern "C" fn ps_score_table_get(
    table: *const PsScoreTable,
    id: *const c_char,
    out: *mut f64,
) -> PsStatus {
    guarded(|| {
        let out = match require_out(out, "out") {
            Ok(v) => v,
            Err(s) => return s,
        };
        let table = match require(table, "table") {
            Ok(v) => v,
            Err(s) => return s,
        };
        let id = match utf8_arg(id, "id") {
            Ok(v) => v,
            Err(s) => return s,
        };
        match table.inner.get(id) {
            Some(score) => {
                *out = score;
                PsStatus::Ok
            }
            None => fail(Error::UnknownId { id: id.to_string() }),
        }
    })
}

/// Latent score at position `index` (essay input order), stored in `*out`.
///
/// # Safety
/// Pointer arguments follow the same rules as [`ps_essay_set_load`].
#[no_mangle]
pub unsafe extern "C" fn ps_score_table_value_at(
    table: *const PsScoreTable,
    index: usize,
    out: *mut f64,
) -> PsStatus {
    guarded(|| {
        let out = match require_out(out, "out") {
            Ok(v) => v,
            Err(s) => return s,
        };
        let table = match require(table, "table") {
            Ok(v) => v,
            Err(s) => return s,
        };
        match table.inner.entries().get(index) {
            Some(&(_, score)) => {
                *out = score;
                PsStatus::Ok
            }
            None => fail_with(
                PsStatus::InvalidInput,
                &format!(
                    "index {index} out of bounds for table of {} entries",
                    table.inner.len()
                ),
            ),
        }
    })
}

/// Copies the essay id at position `index` into `buf` as a NUL-terminated
/// string. `buf_len` is the capacity of `buf` in bytes, including the NUL.
///
/// # Safety
/// `buf` must point to at least `buf_len` writable bytes; other arguments
/// follow the same rules as [`ps_essay_set_load`].
#[no_mangle]
pub unsafe extern "C" fn ps_score_table_id_at(
    table: *const PsScoreTable,
    index: usize,
    buf: *mut c_char,
    buf_len: usize,
) -> PsStatus {
    guarded(|| {
        let table = match require(table, "table") {
            Ok(v) => v,
            Err(s) => return s,
        };
        if buf.is_null() {
            return fail_with(PsStatus::NullArgument, "argument buf is null");
        }
        let id = match table.inner.entries().get(index) {
            Some((id, _)) => id,
            None => {
                return fail_with(
                    PsStatus::InvalidInput,
                    &format!(
                        "index {index} out of bounds for table of {} entries",
                        table.inner.len()
                    ),
                )
            }
        };
        if buf_len < id.len() + 1 {
            return fail_with(
                PsStatus::BufferTooSmall,
                &format!("id needs {} bytes, buffer holds {buf_len}", id.len() + 1),
            );
        }
        std::ptr::copy_nonoverlapping(id.as_ptr() as *const c_char, buf, id.len());
        *buf.add(id.len()) = 0;
        PsStatus::Ok
    })
}

/// Writes the table as a two-column CSV (`id,score`) to `path`.
///
/// Scores are written with the shortest decimal representation that parses
/// back to the identical value.
///
/// # Safety
/// Pointer arguments follow the same rules as [`ps_essay_set_load`].
#[no_mangle]
pub unsafe extern "C" fn ps_score_table_save_csv(
    table: *const PsScoreTable,
    path: *const c_char,
) -> PsStatus {
    guarded(|| {
        let table = match require(table, "table") {
            Ok(v) => v,
            Err(s) => return s,
        };
        let path = match utf8_arg(path, "path") {
            Ok(v) => Path::new(v),
            Err(s) => return s,
        };
        let mut text = String::from("id,score\n");
        for (id, score) in table.inner.entries() {
            text.push_str(id);
            text.push(',');
            text.push_str(&format_float(*score));
            text.push('\n');
        }
        match std::fs::write(path, text) {
            Ok(()) => PsStatus::Ok,
            Err(e) => fail(Error::io(path.display().to_string(), e)),
        }
    })
}

/// Releases a handle from [`ps_fit_scores`]. Accepts null.
///
/// # Safety
/// `table` must be null or an owned pointer from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn ps_score_table_free(table: *mut PsScoreTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// Combines the two query orders of one pair into a position-debiased label,
/// stored in `*out`: if the reversed label mirrors the forward one the
/// forward label is kept, otherwise the pair collapses to a tie (0.5).
///
/// Labels must be 0, 0.5, or 1.
///
/// # Safety
/// `out` must be a valid location to store the result.
#[no_mangle]
pub unsafe extern "C" fn ps_debias(c_ij: f64, c_ji: f64, out: *mut f64) -> PsStatus {
    guarded(|| {
        let out = match require_out(out, "out") {
            Ok(v) => v,
            Err(s) => return s,
        };
        match debias(c_ij, c_ji) {
            Ok(label) => {
                *out = label;
                PsStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Quadratic weighted kappa between `pred` and `gold` (each `len` values),
/// where both must take values from the `levels` array (`levels_len`
/// ascending distinct values). Stores the result in `*out`.
///
/// # Safety
/// `pred` and `gold` must point to `len` readable doubles, `levels` to
/// `levels_len` readable doubles, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ps_qwk(
    pred: *const f64,
    gold: *const f64,
    len: usize,
    levels: *const f64,
    levels_len: usize,
    out: *mut f64,
) -> PsStatus {
    guarded(|| {
        let out = match require_out(out, "out") {
            Ok(v) => v,
            Err(s) => return s,
        };
        for (ptr, name, n) in [
            (pred, "pred", len),
            (gold, "gold", len),
            (levels, "levels", levels_len),
        ] {
            if ptr.is_null() && n > 0 {
                return fail_with(PsStatus::NullArgument, &format!("argument {name} is null"));
            }
        }
        let pred = std::slice::from_raw_parts(pred, len);
        let gold = std::slice::from_raw_parts(gold, len);
        let levels = std::slice::from_raw_parts(levels, levels_len);
        match qwk(pred, gold, levels) {
            Ok(value) => {
                *out = value;
                PsStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Spearman rank correlation between `pred` and `gold` (each `len` values),
/// stored in `*out`. Undefined when either side is constant.
///
/// # Safety
/// `pred` and `gold` must point to `len` readable doubles and `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn ps_spearman(
    pred: *const f64,
    gold: *const f64,
    len: usize,
    out: *mut f64,
) -> PsStatus {
    guarded(|| {
        let out = match require_out(out, "out") {
            Ok(v) => v,
            Err(s) => return s,
        };
        for (ptr, name) in [(pred, "pred"), (gold, "gold")] {
            if ptr.is_null() && len > 0 {
                return fail_with(PsStatus::NullArgument, &format!("argument {name} is null"));
            }
        }
        let pred = std::slice::from_raw_parts(pred, len);
        let gold = std::slice::from_raw_parts(gold, len);
        match spearman(pred, gold) {
            Ok(value) => {
                *out = value;
                PsStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}
