//! Instruction-data prospecting.
//!
//! Ranks instruction-tuning examples by **golden score** — the fraction of
//! predefined tasks whose answer log-likelihood strictly improves when the
//! example is used as a one-shot demonstration — and builds the refined
//! predefined task set itself: reward-ranked elite examples plus a
//! k-center-greedy coreset over the quality pool.
//!
//! The pieces, bottom to top:
//!
//! * [`datamodel`] — records, dataset/task-set/score files, prompt
//!   templates;
//! * [`scorer`] — log-prob backends (built-in bigram model, HTTP clients);
//! * [`embedder`] — embedding backends (built-in feature hashing, HTTP);
//! * [`reward`] — scalar quality backends (stub, HTTP);
//! * [`refinement`] — quality pool, k-center greedy, task set assembly;
//! * [`prospector`] — zero/one-shot scoring engine, golden scores,
//!   rankings, cost model;
//! * [`analysis`] — overlap metrics and report emission.

pub mod analysis;
pub mod cache;
pub mod datamodel;
pub mod embedder;
pub mod error;
pub mod fingerprint;
pub mod prospector;
pub mod refinement;
pub mod reward;
pub mod scorer;

#[cfg(test)]
pub(crate) mod testutil;

pub use analysis::{emit_report, overlap, overlap_matrix_csv, OverlapReport, ReportInputs};
pub use datamodel::{
    dataset_fingerprint, load_dataset, load_score_reports, load_task_set, save_dataset,
    save_score_reports, save_task_set, task_set_fingerprint, DatasetFormat, DemoPosition,
    Direction, ExampleId, InstructionExample, LoadReport, PredefinedTask, PromptTemplate,
    RankedSelection, ScoreReport, TaskProvenance,
};
pub use embedder::{embed, embed_with_ids, EmbedderBackend, EmbeddingMatrix, HashingEmbedder, HttpEmbedder};
pub use error::{Error, Result};
pub use prospector::{
    estimate_cost, golden_score, rank_and_select, CostBaseline, CostEstimate, ProspectEngine,
    RunStats, ZeroShotVector,
};
pub use refinement::{
    assemble_refined_set, build_quality_pool, kcenter_greedy, refine, sample_random_predefined,
    score_rewards, CoresetSelection, RefinedTaskSet, RefinementConfig, RewardScoredExample,
    RewardStats,
};
pub use reward::{HttpReward, RewardBackend, StubReward};
pub use scorer::{
    mean_logprob, BigramLm, ConditionalScoreRequest, ConditionalScoreResult, HttpScorer,
    ScoreProtocol, ScorerBackend,
};
