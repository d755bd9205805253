//! Core domain records and dataset I/O.
//!
//! Datasets are instruction-tuning records in the Alpaca shape
//! (`instruction` / optional `input` / `output`), read either as a single
//! JSON array or as JSON lines. Ids are assigned by file order and are the
//! stable identity used everywhere downstream.

mod template;

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fingerprint::sha256_hex;

pub use template::{render, DemoPosition, PromptTemplate};

/// Stable identity of an example within one dataset: its 0-based position
/// among the usable records of the source file.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct ExampleId(pub u64);

impl fmt::Display for ExampleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl From<u64> for ExampleId {
    fn from(v: u64) -> Self {
        ExampleId(v)
    }
}

/// One candidate instruction-tuning example: a question part (instruction,
/// optionally extended by an input) and an answer part.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionExample {
    pub id: ExampleId,
    pub instruction: String,
    pub input: Option<String>,
    pub output: String,
}

impl InstructionExample {
    /// The rendered question: the instruction, with the input appended on
    /// the following line when present. Deterministic in the two fields.
    pub fn question(&self) -> String {
        match &self.input {
            Some(input) if !input.is_empty() => format!("{}\n{}", self.instruction, input),
            _ => self.instruction.clone(),
        }
    }

    /// Content hash, independent of the id. Two examples with identical
    /// texts share a hash, which is exactly what score caching wants.
    pub fn content_hash(&self) -> String {
        sha256_hex(&[
            self.instruction.as_bytes(),
            self.input.as_deref().unwrap_or("").as_bytes(),
            self.output.as_bytes(),
        ])
    }
}

/// How a predefined task entered the task set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskProvenance {
    Elite,
    Coreset,
    Random,
}

/// One evaluation task: a task text whose reference answer is scored under
/// the prospector backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredefinedTask {
    pub task_id: u32,
    pub task_text: String,
    pub answer_text: String,
    pub provenance: TaskProvenance,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub source_example_id: Option<ExampleId>,
    /// Token count of the answer under the scoring backend; populated by
    /// zero-shot scoring.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub answer_token_count: Option<u32>,
    /// Mean per-token log-probability of the answer given only the task;
    /// populated by zero-shot scoring.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub zero_shot_score: Option<f64>,
}

impl PredefinedTask {
    pub fn from_example(task_id: u32, example: &InstructionExample, provenance: TaskProvenance) -> Self {
        PredefinedTask {
            task_id,
            task_text: example.question(),
            answer_text: example.output.clone(),
            provenance,
            source_example_id: Some(example.id),
            answer_token_count: None,
            zero_shot_score: None,
        }
    }
}

/// Content hash of a task set. Scores depend on task/answer texts and their
/// order, so those are exactly what is hashed.
pub fn task_set_fingerprint(tasks: &[PredefinedTask]) -> String {
    let mut parts: Vec<&[u8]> = Vec::with_capacity(tasks.len() * 2);
    for task in tasks {
        parts.push(task.task_text.as_bytes());
        parts.push(task.answer_text.as_bytes());
    }
    sha256_hex(&parts)
}

/// Content hash of a dataset (example hashes in id order).
pub fn dataset_fingerprint(examples: &[InstructionExample]) -> String {
    let hashes: Vec<String> = examples.iter().map(|e| e.content_hash()).collect();
    let parts: Vec<&[u8]> = hashes.iter().map(|h| h.as_bytes()).collect();
    sha256_hex(&parts)
}

/// Per-candidate scoring record: the one-shot score vector over the task
/// set and the aggregated golden score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub example_id: ExampleId,
    pub golden_score: f64,
    pub wins: u32,
    pub m: u32,
    pub one_shot_scores: Vec<f64>,
}

/// Which end of the golden-score ranking a selection takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Top,
    Bottom,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Direction::Top => write!(f, "top"),
            Direction::Bottom => write!(f, "bottom"),
        }
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "top" => Ok(Direction::Top),
            "bottom" => Ok(Direction::Bottom),
            other => Err(Error::Config(format!(
                "unknown direction {other:?} (expected \"top\" or \"bottom\")"
            ))),
        }
    }
}

/// An ordered slice of the golden-score ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedSelection {
    pub fraction: f64,
    pub direction: Direction,
    pub example_ids: Vec<ExampleId>,
}

/// On-disk dataset formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    /// A single JSON array of records.
    AlpacaJson,
    /// One JSON record per line.
    Jsonl,
}

impl FromStr for DatasetFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alpaca_json" | "json" => Ok(DatasetFormat::AlpacaJson),
            "jsonl" => Ok(DatasetFormat::Jsonl),
            other => Err(Error::Config(format!(
                "unknown dataset format {other:?} (expected \"alpaca_json\" or \"jsonl\")"
            ))),
        }
    }
}

/// What `load_dataset` kept and what it dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    pub total_records: usize,
    pub loaded: usize,
    pub dropped_empty_output: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawRecord {
    instruction: String,
    #[serde(default)]
    input: Option<String>,
    output: String,
}

impl RawRecord {
    fn from_example(example: &InstructionExample) -> Self {
        RawRecord {
            instruction: example.instruction.clone(),
            // Alpaca files conventionally carry an empty string rather than
            // omitting the field.
            input: Some(example.input.clone().unwrap_or_default()),
            output: example.output.clone(),
        }
    }
}

/// Load a dataset file. Records with an empty `output` are dropped (their
/// answers cannot be scored) and counted in the report; ids are assigned to
/// the kept records in file order, starting at 0.
pub fn load_dataset(
    path: impl AsRef<Path>,
    format: DatasetFormat,
) -> Result<(Vec<InstructionExample>, LoadReport)> {
    let path = path.as_ref();
    let raw = read_raw_records(path, format)?;

    let total_records = raw.len();
    let mut examples = Vec::with_capacity(total_records);
    let mut dropped = 0usize;
    for record in raw {
        if record.output.is_empty() {
            dropped += 1;
            continue;
        }
        let input = match record.input {
            Some(s) if !s.is_empty() => Some(s),
            _ => None,
        };
        examples.push(InstructionExample {
            id: ExampleId(examples.len() as u64),
            instruction: record.instruction,
            input,
            output: record.output,
        });
    }

    if examples.is_empty() {
        return Err(Error::EmptyDataset {
            path: path.to_path_buf(),
            detail: format!("{total_records} records, all dropped or file empty"),
        });
    }

    let report = LoadReport {
        total_records,
        loaded: examples.len(),
        dropped_empty_output: dropped,
    };
    Ok((examples, report))
}

fn read_raw_records(path: &Path, format: DatasetFormat) -> Result<Vec<RawRecord>> {
    match format {
        DatasetFormat::AlpacaJson => {
            let text = fs::read_to_string(path)?;
            let values: Vec<serde_json::Value> =
                serde_json::from_str(&text).map_err(|e| Error::Parse {
                    path: path.to_path_buf(),
                    index: 0,
                    message: format!("not a JSON array of records: {e}"),
                })?;
            values
                .into_iter()
                .enumerate()
                .map(|(index, value)| {
                    serde_json::from_value(value).map_err(|e| Error::Parse {
                        path: path.to_path_buf(),
                        index,
                        message: e.to_string(),
                    })
                })
                .collect()
        }
        DatasetFormat::Jsonl => {
            let file = fs::File::open(path)?;
            let reader = BufReader::new(file);
            let mut records = Vec::new();
            for (index, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let record = serde_json::from_str(&line).map_err(|e| Error::Parse {
                    path: path.to_path_buf(),
                    index,
                    message: e.to_string(),
                })?;
                records.push(record);
            }
            Ok(records)
        }
    }
}

/// Write examples back out in a loadable format. Absent inputs are written
/// as empty strings, matching the Alpaca convention.
pub fn save_dataset(
    path: impl AsRef<Path>,
    format: DatasetFormat,
    examples: &[InstructionExample],
) -> Result<()> {
    let file = fs::File::create(path.as_ref())?;
    let mut writer = BufWriter::new(file);
    match format {
        DatasetFormat::AlpacaJson => {
            let raw: Vec<RawRecord> = examples.iter().map(RawRecord::from_example).collect();
            serde_json::to_writer_pretty(&mut writer, &raw)?;
            writer.write_all(b"\n")?;
        }
        DatasetFormat::Jsonl => {
            for example in examples {
                serde_json::to_writer(&mut writer, &RawRecord::from_example(example))?;
                writer.write_all(b"\n")?;
            }
        }
    }
    writer.flush()?;
    Ok(())
}

/// Load a task-set file (JSON lines, one task per line).
pub fn load_task_set(path: impl AsRef<Path>) -> Result<Vec<PredefinedTask>> {
    let path = path.as_ref();
    let file = fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut tasks = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let task: PredefinedTask = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            index,
            message: e.to_string(),
        })?;
        tasks.push(task);
    }
    if tasks.is_empty() {
        return Err(Error::EmptyDataset {
            path: path.to_path_buf(),
            detail: "task set file has no tasks".into(),
        });
    }
    let mut seen = HashSet::new();
    for task in &tasks {
        if !seen.insert(task.task_id) {
            return Err(Error::InvalidInput(format!(
                "duplicate task_id {} in {}",
                task.task_id,
                path.display()
            )));
        }
        if task.answer_text.is_empty() {
            return Err(Error::InvalidInput(format!(
                "task {} has an empty answer",
                task.task_id
            )));
        }
    }
    Ok(tasks)
}

/// Write a task set as JSON lines.
pub fn save_task_set(path: impl AsRef<Path>, tasks: &[PredefinedTask]) -> Result<()> {
    let file = fs::File::create(path.as_ref())?;
    let mut writer = BufWriter::new(file);
    for task in tasks {
        serde_json::to_writer(&mut writer, task)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

/// Load a scores file (JSON lines, one `ScoreReport` per line).
pub fn load_score_reports(path: impl AsRef<Path>) -> Result<Vec<ScoreReport>> {
    let path = path.as_ref();
    let file = fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut reports = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let report: ScoreReport = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            index,
            message: e.to_string(),
        })?;
        reports.push(report);
    }
    Ok(reports)
}

/// Write score reports as JSON lines, one report per line.
pub fn save_score_reports(path: impl AsRef<Path>, reports: &[ScoreReport]) -> Result<()> {
    let file = fs::File::create(path.as_ref())?;
    let mut writer = BufWriter::new(file);
    for report in reports {
        serde_json::to_writer(&mut writer, report)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}
