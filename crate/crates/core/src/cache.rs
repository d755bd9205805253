//! Append-only score caches keyed by content hashes.
//!
//! Cache files are JSON lines under a cache directory; names embed the run
//! fingerprint (backend + task set + template), so a change to any of those
//! starts a fresh cache instead of poisoning an old one. Entries are keyed
//! by content hash, which makes edits to individual examples invalidate
//! precisely the affected entries.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fingerprint::{sha256_hex, short};

/// Identity of a scoring run: everything the scores depend on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunFingerprint {
    pub backend: String,
    pub task_set: String,
    pub template: String,
}

impl RunFingerprint {
    pub fn new(backend: &str, task_set: &str, template: &str) -> Self {
        RunFingerprint {
            backend: backend.into(),
            task_set: task_set.into(),
            template: template.into(),
        }
    }

    /// Combined hash, used in cache file names.
    pub fn combined(&self) -> String {
        sha256_hex(&[
            self.backend.as_bytes(),
            self.task_set.as_bytes(),
            self.template.as_bytes(),
        ])
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct OneShotEntry {
    example_hash: String,
    example_id: u64,
    scores: Vec<f64>,
}

/// Cached zero-shot scores for a task set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ZeroShotRecord {
    pub fingerprint: RunFingerprint,
    pub scores: Vec<f64>,
    pub token_counts: Vec<u32>,
}

/// One-shot score cache with a single serialized writer; readers load the
/// whole file up front. Safe to share behind a reference across scoring
/// workers.
pub struct ScoreCache {
    dir: PathBuf,
    fingerprint: RunFingerprint,
    entries: HashMap<String, Vec<f64>>,
    writer: Mutex<BufWriter<File>>,
}

impl ScoreCache {
    pub fn open(dir: &Path, fingerprint: RunFingerprint) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let path = Self::one_shot_path(dir, &fingerprint);
        let mut entries = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(&path)?);
            for line in reader.lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                // A run killed mid-write can leave a truncated last line;
                // skip anything unparseable rather than failing the resume.
                if let Ok(entry) = serde_json::from_str::<OneShotEntry>(&line) {
                    entries.insert(entry.example_hash, entry.scores);
                }
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(ScoreCache {
            dir: dir.to_path_buf(),
            fingerprint,
            entries,
            writer: Mutex::new(BufWriter::new(file)),
        })
    }

    fn one_shot_path(dir: &Path, fingerprint: &RunFingerprint) -> PathBuf {
        dir.join(format!("one_shot-{}.jsonl", short(&fingerprint.combined())))
    }

    fn zero_shot_path(&self) -> PathBuf {
        self.dir.join(format!(
            "zero_shot-{}.json",
            short(&self.fingerprint.combined())
        ))
    }

    pub fn cached_one_shot(&self, example_hash: &str) -> Option<&Vec<f64>> {
        self.entries.get(example_hash)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Append one scored example. Flushed immediately so an interrupted run
    /// keeps everything scored so far.
    pub fn record_one_shot(
        &self,
        example_hash: &str,
        example_id: u64,
        scores: &[f64],
    ) -> Result<()> {
        let entry = OneShotEntry {
            example_hash: example_hash.to_string(),
            example_id,
            scores: scores.to_vec(),
        };
        let mut writer = self.writer.lock().expect("cache writer lock");
        serde_json::to_writer(&mut *writer, &entry)?;
        writer.write_all(b"\n")?;
        writer.flush()?;
        Ok(())
    }

    /// Load the cached zero-shot record if it matches this run's
    /// fingerprints.
    pub fn load_zero_shot(&self) -> Option<ZeroShotRecord> {
        let path = self.zero_shot_path();
        let text = fs::read_to_string(path).ok()?;
        let record: ZeroShotRecord = serde_json::from_str(&text).ok()?;
        (record.fingerprint == self.fingerprint).then_some(record)
    }

    pub fn store_zero_shot(&self, record: &ZeroShotRecord) -> Result<()> {
        let path = self.zero_shot_path();
        fs::write(path, serde_json::to_string_pretty(record)?)?;
        Ok(())
    }
}

/// Reward score cache: rendered-text hash -> reward.
pub struct RewardCache {
    entries: HashMap<String, f64>,
    writer: BufWriter<File>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RewardEntry {
    text_hash: String,
    reward: f64,
}

impl RewardCache {
    pub fn open(dir: &Path, backend_fingerprint: &str) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let path = dir.join(format!(
            "rewards-{}.jsonl",
            short(&sha256_hex(&[backend_fingerprint.as_bytes()]))
        ));
        let mut entries = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(&path)?);
            for line in reader.lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                if let Ok(entry) = serde_json::from_str::<RewardEntry>(&line) {
                    entries.insert(entry.text_hash, entry.reward);
                }
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(RewardCache {
            entries,
            writer: BufWriter::new(file),
        })
    }

    pub fn get(&self, text: &str) -> Option<f64> {
        self.entries.get(&text_hash(text)).copied()
    }

    pub fn put(&mut self, text: &str, reward: f64) -> Result<()> {
        let entry = RewardEntry {
            text_hash: text_hash(text),
            reward,
        };
        serde_json::to_writer(&mut self.writer, &entry)?;
        self.writer.write_all(b"\n")?;
        self.writer.flush()?;
        self.entries.insert(entry.text_hash, reward);
        Ok(())
    }
}

fn text_hash(text: &str) -> String {
    sha256_hex(&[text.as_bytes()])
}
