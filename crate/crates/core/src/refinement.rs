//! Predefined task set construction.
//!
//! The refined set combines a reward-elite subset with a k-center-greedy
//! coreset drawn from the reward quality pool: reward-score the dataset,
//! keep the top of the ranking as pool, peel off the very top as elite,
//! then pick coreset points by iterative max-min distance over the pool
//! embeddings, seeded with the elite embeddings. A random sampler provides
//! ablation-style task sets.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cache::RewardCache;
use crate::datamodel::{
    ExampleId, InstructionExample, PredefinedTask, PromptTemplate, TaskProvenance,
};
use crate::embedder::{embed_with_ids, EmbedderBackend, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::reward::RewardBackend;

/// Sizes for the refinement pipeline. Defaults build the standard
/// 100-task set: a 10,000-strong quality pool, 20 elite, 80 coreset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefinementConfig {
    #[serde(default = "default_pool_size")]
    pub pool_size: usize,
    #[serde(default = "default_elite_size")]
    pub elite_size: usize,
    #[serde(default = "default_coreset_size")]
    pub coreset_size: usize,
}

fn default_pool_size() -> usize {
    10_000
}

fn default_elite_size() -> usize {
    20
}

fn default_coreset_size() -> usize {
    80
}

impl Default for RefinementConfig {
    fn default() -> Self {
        RefinementConfig {
            pool_size: default_pool_size(),
            elite_size: default_elite_size(),
            coreset_size: default_coreset_size(),
        }
    }
}

/// One example's scalar quality score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardScoredExample {
    pub example_id: ExampleId,
    pub reward: f64,
}

/// The assembled task set plus the ids that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinedTaskSet {
    pub elite_ids: Vec<ExampleId>,
    pub coreset_ids: Vec<ExampleId>,
    pub tasks: Vec<PredefinedTask>,
}

/// Counters for one reward-scoring pass.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewardStats {
    pub backend_batches: u64,
    pub scored: u64,
    pub cache_hits: u64,
}

/// Score every example with the reward backend, in dataset order. Scores
/// are cached by the hash of the rendered text, so reruns and unchanged
/// examples cost no backend calls, and a failed run keeps its progress.
pub fn score_rewards(
    dataset: &[InstructionExample],
    backend: &dyn RewardBackend,
    template: &PromptTemplate,
    cache_dir: Option<&Path>,
    batch_size: usize,
) -> Result<(Vec<RewardScoredExample>, RewardStats)> {
    let batch_size = batch_size.max(1);
    let mut cache = match cache_dir {
        Some(dir) => Some(RewardCache::open(dir, &backend.fingerprint())?),
        None => None,
    };

    let rendered: Vec<String> = dataset
        .iter()
        .map(|example| template.demonstration(example))
        .collect::<Result<_>>()?;

    let mut rewards: Vec<Option<f64>> = vec![None; dataset.len()];
    let mut stats = RewardStats::default();

    let mut pending: Vec<usize> = Vec::new();
    for (i, text) in rendered.iter().enumerate() {
        match cache.as_ref().and_then(|c| c.get(text)) {
            Some(reward) => {
                rewards[i] = Some(reward);
                stats.cache_hits += 1;
            }
            None => pending.push(i),
        }
    }

    for chunk in pending.chunks(batch_size) {
        let texts: Vec<String> = chunk.iter().map(|&i| rendered[i].clone()).collect();
        let scores = backend.score_batch(&texts)?;
        stats.backend_batches += 1;
        if scores.len() != texts.len() {
            return Err(Error::backend(
                format!(
                    "reward backend returned {} scores for {} texts",
                    scores.len(),
                    texts.len()
                ),
                false,
            ));
        }
        for (&i, score) in chunk.iter().zip(&scores) {
            if !score.is_finite() {
                return Err(Error::backend(
                    format!("non-finite reward {score} for example {}", dataset[i].id),
                    false,
                ));
            }
            rewards[i] = Some(*score);
            if let Some(cache) = cache.as_mut() {
                cache.put(&rendered[i], *score)?;
            }
        }
    }

    let scored: Vec<RewardScoredExample> = dataset
        .iter()
        .zip(rewards)
        .map(|(example, reward)| RewardScoredExample {
            example_id: example.id,
            reward: reward.expect("every example scored or cached"),
        })
        .collect();
    stats.scored = scored.len() as u64;
    Ok((scored, stats))
}

/// Rank by reward (descending, ties by ascending id) and split the top of
/// the ranking into elite ids and the remaining quality pool.
pub fn build_quality_pool(
    rewards: &[RewardScoredExample],
    pool_size: usize,
    elite_size: usize,
) -> Result<(Vec<ExampleId>, Vec<ExampleId>)> {
    if pool_size > rewards.len() {
        return Err(Error::Config(format!(
            "pool_size {pool_size} exceeds dataset size {}",
            rewards.len()
        )));
    }
    if elite_size >= pool_size {
        return Err(Error::Config(format!(
            "elite_size {elite_size} must be smaller than pool_size {pool_size}"
        )));
    }
    let mut ranked: Vec<&RewardScoredExample> = rewards.iter().collect();
    ranked.sort_by(|a, b| {
        b.reward
            .total_cmp(&a.reward)
            .then(a.example_id.cmp(&b.example_id))
    });
    let elite = ranked[..elite_size].iter().map(|r| r.example_id).collect();
    let pool = ranked[elite_size..pool_size]
        .iter()
        .map(|r| r.example_id)
        .collect();
    Ok((elite, pool))
}

/// Output of k-center greedy: ids in selection order plus the max-min
/// radius at which each was chosen and the final coverage radius.
#[derive(Debug, Clone, PartialEq)]
pub struct CoresetSelection {
    pub ids: Vec<ExampleId>,
    /// Distance from each selected point to the center set at the moment
    /// it was selected (infinite for a seedless initial pick).
    pub radii: Vec<f64>,
    /// Max over pool points of the distance to the nearest center after
    /// selection finished.
    pub coverage_radius: f64,
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Iterative max-min (farthest-point) selection of `k` pool points.
///
/// Each pool point tracks its distance to the nearest chosen center, seeds
/// included; every step selects the point with the maximum such distance,
/// ties broken by ascending id. With no seeds the first selection is the
/// point farthest from the pool's mean vector.
pub fn kcenter_greedy(
    pool: &EmbeddingMatrix,
    k: usize,
    seeds: &EmbeddingMatrix,
) -> Result<CoresetSelection> {
    if k > pool.len() {
        return Err(Error::Config(format!(
            "cannot select {k} coreset points from a pool of {}",
            pool.len()
        )));
    }
    if !seeds.is_empty() && seeds.dim != pool.dim {
        return Err(Error::InvalidInput(format!(
            "seed dimension {} does not match pool dimension {}",
            seeds.dim, pool.dim
        )));
    }
    let mut selection = CoresetSelection {
        ids: Vec::with_capacity(k),
        radii: Vec::with_capacity(k),
        coverage_radius: 0.0,
    };
    // Distance of each pool point to the nearest chosen center so far.
    let mut min_dist: Vec<f64> = if seeds.is_empty() {
        vec![f64::INFINITY; pool.len()]
    } else {
        pool.rows
            .iter()
            .map(|(_, point)| {
                seeds
                    .rows
                    .iter()
                    .map(|(_, seed)| euclidean(point, seed))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    };
    let mut selected = vec![false; pool.len()];

    for step in 0..k {
        let pick = if seeds.is_empty() && step == 0 {
            farthest_from_mean(pool)
        } else {
            argmax_min_dist(pool, &min_dist, &selected)
        };
        let (id, _) = pool.rows[pick];
        selection.ids.push(id);
        selection.radii.push(min_dist[pick]);
        selected[pick] = true;
        min_dist[pick] = 0.0;
        let center = &pool.rows[pick].1;
        for (j, (_, point)) in pool.rows.iter().enumerate() {
            let d = euclidean(point, center);
            if d < min_dist[j] {
                min_dist[j] = d;
            }
        }
    }

    selection.coverage_radius = coverage_from(&min_dist);
    Ok(selection)
}

fn coverage_from(min_dist: &[f64]) -> f64 {
    // Infinite when some pool point has seen no center at all (k = 0 with
    // no seeds).
    min_dist.iter().copied().fold(0.0, f64::max)
}

fn argmax_min_dist(pool: &EmbeddingMatrix, min_dist: &[f64], selected: &[bool]) -> usize {
    let mut best: Option<usize> = None;
    for (j, (id, _)) in pool.rows.iter().enumerate() {
        if selected[j] {
            continue;
        }
        match best {
            None => best = Some(j),
            Some(b) => {
                let better = min_dist[j] > min_dist[b]
                    || (min_dist[j] == min_dist[b] && *id < pool.rows[b].0);
                if better {
                    best = Some(j);
                }
            }
        }
    }
    best.expect("k <= pool size leaves an unselected point")
}

fn farthest_from_mean(pool: &EmbeddingMatrix) -> usize {
    let dim = pool.dim;
    let mut mean = vec![0.0f64; dim];
    for (_, point) in &pool.rows {
        for (m, x) in mean.iter_mut().zip(point) {
            *m += x;
        }
    }
    for m in mean.iter_mut() {
        *m /= pool.rows.len() as f64;
    }
    let mut best = 0usize;
    let mut best_dist = f64::NEG_INFINITY;
    for (j, (id, point)) in pool.rows.iter().enumerate() {
        let d = euclidean(point, &mean);
        if d > best_dist || (d == best_dist && *id < pool.rows[best].0) {
            best = j;
            best_dist = d;
        }
    }
    best
}

/// Build the task set from elite + coreset ids, elite first. Task ids are
/// positions in that order.
pub fn assemble_refined_set(
    dataset: &[InstructionExample],
    elite_ids: &[ExampleId],
    coreset_ids: &[ExampleId],
) -> Result<RefinedTaskSet> {
    let elite_set: HashSet<ExampleId> = elite_ids.iter().copied().collect();
    if let Some(dup) = coreset_ids.iter().find(|id| elite_set.contains(id)) {
        return Err(Error::Invariant(format!(
            "example {dup} appears in both elite and coreset"
        )));
    }
    let by_id: HashMap<ExampleId, &InstructionExample> =
        dataset.iter().map(|e| (e.id, e)).collect();
    let mut tasks = Vec::with_capacity(elite_ids.len() + coreset_ids.len());
    for (ids, provenance) in [
        (elite_ids, TaskProvenance::Elite),
        (coreset_ids, TaskProvenance::Coreset),
    ] {
        for id in ids {
            let example = by_id.get(id).ok_or_else(|| {
                Error::InvalidInput(format!("example {id} not found in dataset"))
            })?;
            tasks.push(PredefinedTask::from_example(
                tasks.len() as u32,
                example,
                provenance,
            ));
        }
    }
    Ok(RefinedTaskSet {
        elite_ids: elite_ids.to_vec(),
        coreset_ids: coreset_ids.to_vec(),
        tasks,
    })
}

/// Uniform sample of `m` examples without replacement, reproducible from
/// the seed, as a task set.
pub fn sample_random_predefined(
    dataset: &[InstructionExample],
    m: usize,
    rng_seed: u64,
) -> Result<RefinedTaskSet> {
    if m > dataset.len() {
        return Err(Error::Config(format!(
            "cannot sample {m} tasks from {} examples",
            dataset.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    // Partial Fisher-Yates: the first m slots end up a uniform sample.
    let mut indices: Vec<usize> = (0..dataset.len()).collect();
    for i in 0..m {
        let j = rng.random_range(i..indices.len());
        indices.swap(i, j);
    }
    let tasks = indices[..m]
        .iter()
        .enumerate()
        .map(|(task_id, &idx)| {
            PredefinedTask::from_example(task_id as u32, &dataset[idx], TaskProvenance::Random)
        })
        .collect();
    Ok(RefinedTaskSet {
        elite_ids: Vec::new(),
        coreset_ids: Vec::new(),
        tasks,
    })
}

/// End-to-end refinement: rewards, quality pool, embeddings, coreset,
/// assembly.
pub fn refine(
    dataset: &[InstructionExample],
    reward_backend: &dyn RewardBackend,
    embedder: &dyn EmbedderBackend,
    template: &PromptTemplate,
    config: &RefinementConfig,
    cache_dir: Option<&Path>,
) -> Result<(RefinedTaskSet, RewardStats)> {
    let (rewards, stats) = score_rewards(dataset, reward_backend, template, cache_dir, 64)?;
    let (elite_ids, pool_ids) = build_quality_pool(&rewards, config.pool_size, config.elite_size)?;

    let by_id: HashMap<ExampleId, &InstructionExample> =
        dataset.iter().map(|e| (e.id, e)).collect();
    let embed_text = |id: &ExampleId| -> Result<(ExampleId, String)> {
        let example = by_id
            .get(id)
            .ok_or_else(|| Error::InvalidInput(format!("example {id} not found in dataset")))?;
        Ok((*id, format!("{}\n{}", example.question(), example.output)))
    };
    let elite_items: Vec<(ExampleId, String)> =
        elite_ids.iter().map(embed_text).collect::<Result<_>>()?;
    let pool_items: Vec<(ExampleId, String)> =
        pool_ids.iter().map(embed_text).collect::<Result<_>>()?;

    let seeds = embed_with_ids(embedder, &elite_items)?;
    let pool = embed_with_ids(embedder, &pool_items)?;
    let coreset = kcenter_greedy(&pool, config.coreset_size, &seeds)?;

    let refined = assemble_refined_set(dataset, &elite_ids, &coreset.ids)?;
    Ok((refined, stats))
}
