//! File formats and persistence.
//!
//! All writers go through [`atomic_write`] (temp file + rename in the target
//! directory), so readers never observe a half-written artifact. All numbers
//! are serialized in full precision: the shortest decimal form that parses
//! back to the identical float, which is what both `serde_json` and the CSV
//! writer emit for `f64`.

use std::io::Write;
use std::path::Path;

use crate::data::{Essay, EssaySet, PairwiseRecord};
use crate::error::{Error, Result};

/// Input format for essay files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EssayFormat {
    Csv,
    Jsonl,
}

impl std::str::FromStr for EssayFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(EssayFormat::Csv),
            "jsonl" => Ok(EssayFormat::Jsonl),
            other => Err(Error::config(format!(
                "unknown essay format {other:?} (expected csv or jsonl)"
            ))),
        }
    }
}

/// Guesses the format from the file extension, defaulting to CSV.
pub fn detect_essay_format(path: &Path) -> EssayFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some("jsonl") | Some("ndjson") => EssayFormat::Jsonl,
        _ => EssayFormat::Csv,
    }
}

/// Writes `contents` to `path` atomically: the data lands in a temporary
/// file in the same directory and is renamed over the target.
pub fn atomic_write(path: &Path, contents: &[u8]) -> Result<()> {
    let display = path.display().to_string();
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut temp = match dir {
        Some(dir) => tempfile_in(dir),
        None => tempfile_in(Path::new(".")),
    }
    .map_err(|e| Error::io(display.clone(), e))?;
    temp.write_all(contents)
        .and_then(|_| temp.flush())
        .map_err(|e| Error::io(display.clone(), e))?;
    let (_, temp_path) = temp.into_parts();
    std::fs::rename(&temp_path, path).map_err(|e| Error::io(display, e))?;
    std::mem::forget(temp_path); // renamed away; nothing left to clean up
    Ok(())
}

fn tempfile_in(dir: &Path) -> std::io::Result<tempfile::NamedTempFile> {
    tempfile::Builder::new()
        .prefix(".tmp-prefscore-")
        .tempfile_in(dir)
}

/// Loads an essay file into an [`EssaySet`] (with empty judging context and
/// a unit-interval placeholder rubric; attach the real ones with
/// [`EssaySet::with_context`] / [`EssaySet::with_rubric`]).
pub fn load_essays(path: &Path, format: EssayFormat) -> Result<EssaySet> {
    let essays = match format {
        EssayFormat::Csv => load_essays_csv(path)?,
        EssayFormat::Jsonl => load_essays_jsonl(path)?,
    };
    EssaySet::new(essays)
}

#[derive(serde::Deserialize)]
struct CsvEssayRow {
    id: String,
    prompt_id: String,
    text: String,
    gold_score: Option<f64>,
}

fn load_essays_csv(path: &Path) -> Result<Vec<Essay>> {
    let display = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_error(&display, &e))?;

    let headers = reader
        .headers()
        .map_err(|e| csv_error(&display, &e))?
        .clone();
    let expected = ["id", "prompt_id", "text", "gold_score"];
    let actual: Vec<&str> = headers.iter().collect();
    if actual != expected {
        return Err(Error::Parse {
            path: display,
            line: 1,
            message: format!("expected header {expected:?}, found {actual:?}"),
        });
    }

    let mut essays = Vec::new();
    for row in reader.deserialize::<CsvEssayRow>() {
        let row = row.map_err(|e| csv_error(&display, &e))?;
        let mut essay = Essay::new(row.id, row.prompt_id, row.text);
        essay.gold_score = row.gold_score;
        essays.push(essay);
    }
    Ok(essays)
}

fn csv_error(path: &str, error: &csv::Error) -> Error {
    // A file that can't be opened or read is an I/O failure, not bad CSV.
    if let csv::ErrorKind::Io(io) = error.kind() {
        return Error::Io {
            path: path.to_string(),
            source: std::io::Error::new(io.kind(), io.to_string()),
        };
    }
    let line = match error.position() {
        Some(position) => position.line() as usize,
        None => 0,
    };
    Error::Parse {
        path: path.to_string(),
        line,
        message: error.to_string(),
    }
}

fn load_essays_jsonl(path: &Path) -> Result<Vec<Essay>> {
    let display = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(display.clone(), e))?;
    let mut essays = Vec::new();
    for (line_index, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let essay: Essay = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: display.clone(),
            line: line_index + 1,
            message: e.to_string(),
        })?;
        essays.push(essay);
    }
    Ok(essays)
}

/// Writes essays as JSONL (the only essay format that can carry embeddings).
pub fn save_essays_jsonl(essays: &[Essay], path: &Path) -> Result<()> {
    let mut out = String::new();
    for essay in essays {
        out.push_str(&serde_json::to_string(essay).expect("essay serializes"));
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}

/// Persists judged pairs as JSONL, one record per line, full precision.
pub fn save_comparisons(records: &[PairwiseRecord], path: &Path) -> Result<()> {
    let mut out = String::new();
    for record in records {
        out.push_str(&serde_json::to_string(record).expect("record serializes"));
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}

/// Loads judged pairs, re-checking every record's structural invariants
/// (label domain and debias consistency); a violating record is rejected
/// with its index.
pub fn load_comparisons(path: &Path) -> Result<Vec<PairwiseRecord>> {
    let display = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(display.clone(), e))?;
    let mut records = Vec::new();
    for (line_index, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: PairwiseRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: display.clone(),
            line: line_index + 1,
            message: e.to_string(),
        })?;
        record.validate(records.len())?;
        records.push(record);
    }
    Ok(records)
}
