//! The prospecting engine: zero-shot and one-shot score vectors over the
//! predefined task set, golden scores, rankings, and the inference-cost
//! model.
//!
//! A candidate's golden score is the fraction of predefined tasks whose
//! answer log-likelihood strictly improves when the candidate is prepended
//! as a one-shot demonstration. Ties count as non-wins; with tiny backends
//! ties are common, so this is load-bearing, not a corner case.
//!
//! Scoring runs are resumable: one-shot vectors are cached per example
//! content hash under a fingerprint of (backend, task set, template), and
//! the engine skips any example already in the cache. Results are keyed by
//! example id and assembled in dataset order, so output is identical for
//! any parallelism and any completion order.

use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cache::{RunFingerprint, ScoreCache, ZeroShotRecord};
use crate::datamodel::{
    task_set_fingerprint, Direction, ExampleId, InstructionExample, PredefinedTask,
    PromptTemplate, RankedSelection, ScoreReport,
};
use crate::error::{Error, Result};
use crate::scorer::{mean_logprob, ConditionalScoreRequest, ScorerBackend};

/// The task-set zero-shot score vector, tagged with the fingerprints it was
/// computed under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroShotVector {
    pub scores: Vec<f64>,
    pub task_set_fingerprint: String,
    pub backend_fingerprint: String,
}

impl ZeroShotVector {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// Scorer call counters for one engine.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunStats {
    pub zero_shot_calls: u64,
    pub one_shot_calls: u64,
    pub cache_hits: u64,
}

pub struct ProspectEngine<'a> {
    scorer: &'a dyn ScorerBackend,
    template: &'a PromptTemplate,
    cache_dir: Option<PathBuf>,
    parallelism: usize,
    zero_shot_calls: AtomicU64,
    one_shot_calls: AtomicU64,
    cache_hits: AtomicU64,
}

impl<'a> ProspectEngine<'a> {
    pub fn new(scorer: &'a dyn ScorerBackend, template: &'a PromptTemplate) -> Self {
        ProspectEngine {
            scorer,
            template,
            cache_dir: None,
            parallelism: 1,
            zero_shot_calls: AtomicU64::new(0),
            one_shot_calls: AtomicU64::new(0),
            cache_hits: AtomicU64::new(0),
        }
    }

    /// Enable the score cache under `dir`; scoring runs become resumable
    /// and warm reruns cost zero backend calls.
    pub fn with_cache_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.cache_dir = Some(dir.into());
        self
    }

    pub fn with_parallelism(mut self, parallelism: usize) -> Self {
        self.parallelism = parallelism.max(1);
        self
    }

    pub fn stats(&self) -> RunStats {
        RunStats {
            zero_shot_calls: self.zero_shot_calls.load(Ordering::SeqCst),
            one_shot_calls: self.one_shot_calls.load(Ordering::SeqCst),
            cache_hits: self.cache_hits.load(Ordering::SeqCst),
        }
    }

    fn run_fingerprint(&self, tasks: &[PredefinedTask]) -> RunFingerprint {
        RunFingerprint::new(
            &self.scorer.fingerprint(),
            &task_set_fingerprint(tasks),
            &self.template.fingerprint(),
        )
    }

    fn open_cache(&self, tasks: &[PredefinedTask]) -> Result<Option<ScoreCache>> {
        match &self.cache_dir {
            Some(dir) => Ok(Some(ScoreCache::open(dir, self.run_fingerprint(tasks))?)),
            None => Ok(None),
        }
    }

    fn score_mean(&self, context: String, continuation: &str) -> Result<f64> {
        let result = self.scorer.score(&ConditionalScoreRequest {
            context,
            continuation: continuation.to_string(),
        })?;
        mean_logprob(&result)
    }

    /// Compute (or restore from cache) the zero-shot score vector, filling
    /// each task's `zero_shot_score` and `answer_token_count`.
    pub fn compute_zero_shot(&self, tasks: &mut [PredefinedTask]) -> Result<ZeroShotVector> {
        let cache = self.open_cache(tasks)?;
        self.compute_zero_shot_with(tasks, cache.as_ref())
    }

    fn compute_zero_shot_with(
        &self,
        tasks: &mut [PredefinedTask],
        cache: Option<&ScoreCache>,
    ) -> Result<ZeroShotVector> {
        if tasks.is_empty() {
            return Err(Error::InvalidInput("task set is empty".into()));
        }
        if let Some(task) = tasks.iter().find(|t| t.answer_text.is_empty()) {
            return Err(Error::InvalidInput(format!(
                "task {} has an empty answer",
                task.task_id
            )));
        }
        let fingerprint = self.run_fingerprint(tasks);

        if let Some(record) = cache.and_then(|c| c.load_zero_shot()) {
            for (task, (score, count)) in tasks
                .iter_mut()
                .zip(record.scores.iter().zip(&record.token_counts))
            {
                task.zero_shot_score = Some(*score);
                task.answer_token_count = Some(*count);
            }
            return Ok(ZeroShotVector {
                scores: record.scores,
                task_set_fingerprint: fingerprint.task_set,
                backend_fingerprint: fingerprint.backend,
            });
        }

        let scored: Vec<(f64, u32)> = self.in_pool(|| {
            tasks
                .par_iter()
                .map(|task| {
                    let context = self.template.zero_shot_context(task)?;
                    let result = self.scorer.score(&ConditionalScoreRequest {
                        context,
                        continuation: task.answer_text.clone(),
                    })?;
                    self.zero_shot_calls.fetch_add(1, Ordering::SeqCst);
                    Ok((mean_logprob(&result)?, result.token_count))
                })
                .collect::<Result<_>>()
        })?;

        let scores: Vec<f64> = scored.iter().map(|(s, _)| *s).collect();
        let token_counts: Vec<u32> = scored.iter().map(|(_, c)| *c).collect();
        for (task, (score, count)) in tasks.iter_mut().zip(scores.iter().zip(&token_counts)) {
            task.zero_shot_score = Some(*score);
            task.answer_token_count = Some(*count);
        }
        if let Some(cache) = cache {
            cache.store_zero_shot(&ZeroShotRecord {
                fingerprint: fingerprint.clone(),
                scores: scores.clone(),
                token_counts,
            })?;
        }
        Ok(ZeroShotVector {
            scores,
            task_set_fingerprint: fingerprint.task_set,
            backend_fingerprint: fingerprint.backend,
        })
    }

    /// One-shot score vector for a single candidate: entry `j` is the mean
    /// per-token log-prob of task j's answer with the candidate rendered as
    /// the demonstration in the context.
    pub fn compute_one_shot(
        &self,
        example: &InstructionExample,
        tasks: &[PredefinedTask],
        zero_shot: &ZeroShotVector,
    ) -> Result<Vec<f64>> {
        self.check_fingerprints(tasks, zero_shot)?;
        tasks
            .iter()
            .map(|task| {
                let context = self.template.one_shot_context(example, task)?;
                let score = self.score_mean(context, &task.answer_text)?;
                self.one_shot_calls.fetch_add(1, Ordering::SeqCst);
                Ok(score)
            })
            .collect()
    }

    fn check_fingerprints(
        &self,
        tasks: &[PredefinedTask],
        zero_shot: &ZeroShotVector,
    ) -> Result<()> {
        let current_tasks = task_set_fingerprint(tasks);
        if zero_shot.task_set_fingerprint != current_tasks {
            return Err(Error::StaleCache {
                expected: current_tasks,
                found: zero_shot.task_set_fingerprint.clone(),
            });
        }
        let current_backend = self.scorer.fingerprint();
        if zero_shot.backend_fingerprint != current_backend {
            return Err(Error::StaleCache {
                expected: current_backend,
                found: zero_shot.backend_fingerprint.clone(),
            });
        }
        Ok(())
    }

    /// Score the whole dataset: one report per example, in dataset order.
    /// Already-cached examples cost no scorer calls; newly scored ones are
    /// persisted incrementally, so an interrupted run resumes where it
    /// stopped.
    pub fn prospect(
        &self,
        dataset: &[InstructionExample],
        tasks: &mut [PredefinedTask],
    ) -> Result<Vec<ScoreReport>> {
        if dataset.is_empty() {
            return Err(Error::InvalidInput("dataset is empty".into()));
        }
        let cache = self.open_cache(tasks)?;
        let zero_shot = self.compute_zero_shot_with(tasks, cache.as_ref())?;
        let tasks: &[PredefinedTask] = tasks;

        self.in_pool(|| {
            dataset
                .par_iter()
                .map(|example| {
                    let hash = example.content_hash();
                    let one_shot = match cache.as_ref().and_then(|c| c.cached_one_shot(&hash)) {
                        Some(scores) => {
                            if scores.len() != tasks.len() {
                                return Err(Error::StaleCache {
                                    expected: format!("{} scores", tasks.len()),
                                    found: format!("{} scores", scores.len()),
                                });
                            }
                            self.cache_hits.fetch_add(1, Ordering::SeqCst);
                            scores.clone()
                        }
                        None => {
                            let scores = self.compute_one_shot(example, tasks, &zero_shot)?;
                            if let Some(cache) = cache.as_ref() {
                                cache.record_one_shot(&hash, example.id.0, &scores)?;
                            }
                            scores
                        }
                    };
                    golden_score(example.id, one_shot, &zero_shot)
                })
                .collect()
        })
    }

    fn in_pool<T: Send>(&self, op: impl FnOnce() -> Result<T> + Send) -> Result<T> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.parallelism)
            .build()
            .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
        pool.install(op)
    }
}

/// Aggregate a one-shot vector against the zero-shot vector: wins are
/// strict improvements, the golden score is `wins / m`.
pub fn golden_score(
    example_id: ExampleId,
    one_shot_scores: Vec<f64>,
    zero_shot: &ZeroShotVector,
) -> Result<ScoreReport> {
    if one_shot_scores.len() != zero_shot.scores.len() {
        return Err(Error::Invariant(format!(
            "one-shot vector has {} entries, zero-shot has {}",
            one_shot_scores.len(),
            zero_shot.scores.len()
        )));
    }
    if one_shot_scores.is_empty() {
        return Err(Error::InvalidInput("score vectors are empty".into()));
    }
    if let Some(bad) = one_shot_scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::Invariant(format!("non-finite one-shot score {bad}")));
    }
    let m = one_shot_scores.len() as u32;
    let wins = one_shot_scores
        .iter()
        .zip(&zero_shot.scores)
        .filter(|(one, zero)| one > zero)
        .count() as u32;
    Ok(ScoreReport {
        example_id,
        golden_score: wins as f64 / m as f64,
        wins,
        m,
        one_shot_scores,
    })
}

/// Order reports by golden score (descending for `Top`, ascending for
/// `Bottom`, ties by ascending id) and keep the leading
/// `floor(fraction * n)` ids, never fewer than one.
pub fn rank_and_select(
    reports: &[ScoreReport],
    fraction: f64,
    direction: Direction,
) -> Result<RankedSelection> {
    if reports.is_empty() {
        return Err(Error::InvalidInput("no score reports to rank".into()));
    }
    if fraction.is_nan() || fraction <= 0.0 || fraction > 1.0 {
        return Err(Error::Config(format!(
            "fraction must be in (0, 1], got {fraction}"
        )));
    }
    let mut ranked: Vec<&ScoreReport> = reports.iter().collect();
    ranked.sort_by(|a, b| {
        let by_score = match direction {
            Direction::Top => b.golden_score.total_cmp(&a.golden_score),
            Direction::Bottom => a.golden_score.total_cmp(&b.golden_score),
        };
        by_score.then(a.example_id.cmp(&b.example_id))
    });
    // The small epsilon compensates decimal fractions that are not exactly
    // representable (0.29 * 100 must select 29, not 28).
    let count = ((fraction * reports.len() as f64 + 1e-9).floor() as usize)
        .clamp(1, reports.len());
    Ok(RankedSelection {
        fraction,
        direction,
        example_ids: ranked[..count].iter().map(|r| r.example_id).collect(),
    })
}

/// Structure of the run being compared against in
/// [`estimate_cost`]'s relative-compute ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBaseline {
    pub task_count: u64,
    /// Parameter count of the baseline's scoring model, in any unit as long
    /// as it matches `prospector_params`.
    pub params: f64,
}

impl Default for CostBaseline {
    fn default() -> Self {
        CostBaseline {
            task_count: 1000,
            params: 1.0,
        }
    }
}

/// Inference-count accounting for a prospecting run.
///
/// `zero_shot_calls` follows the one-zero-shot-call-per-example accounting
/// convention; the engine itself only needs `engine_zero_shot_calls = m`
/// calls. Both are reported.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate {
    pub dataset_size: u64,
    pub task_count: u64,
    pub zero_shot_calls: u64,
    pub one_shot_calls: u64,
    pub total_calls: u64,
    pub engine_zero_shot_calls: u64,
    pub engine_total_calls: u64,
    /// (total_calls x prospector params) / (baseline total calls x baseline
    /// params).
    pub relative_compute: f64,
}

pub fn estimate_cost(
    dataset_size: u64,
    task_count: u64,
    prospector_params: f64,
    baseline: &CostBaseline,
) -> Result<CostEstimate> {
    if dataset_size == 0 {
        return Err(Error::Config("dataset_size must be positive".into()));
    }
    if prospector_params.is_nan()
        || prospector_params <= 0.0
        || baseline.params.is_nan()
        || baseline.params <= 0.0
    {
        return Err(Error::Config("parameter counts must be positive".into()));
    }
    let one_shot_calls = dataset_size
        .checked_mul(task_count)
        .ok_or_else(|| Error::Config("call count overflows u64".into()))?;
    let total_calls = dataset_size
        .checked_add(one_shot_calls)
        .ok_or_else(|| Error::Config("call count overflows u64".into()))?;
    let baseline_one_shot = dataset_size
        .checked_mul(baseline.task_count)
        .ok_or_else(|| Error::Config("baseline call count overflows u64".into()))?;
    let baseline_total = dataset_size + baseline_one_shot;
    let relative_compute =
        (total_calls as f64 * prospector_params) / (baseline_total as f64 * baseline.params);
    Ok(CostEstimate {
        dataset_size,
        task_count,
        zero_shot_calls: dataset_size,
        one_shot_calls,
        total_calls,
        engine_zero_shot_calls: task_count,
        engine_total_calls: task_count + one_shot_calls,
        relative_compute,
    })
}
