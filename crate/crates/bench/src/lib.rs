//! Synthetic inputs shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use prospector_core::datamodel::{
    DemoPosition, ExampleId, InstructionExample, PredefinedTask, PromptTemplate, TaskProvenance,
};
use prospector_core::embedder::EmbeddingMatrix;

pub fn synthetic_dataset(n: u64) -> Vec<InstructionExample> {
    (0..n)
        .map(|i| InstructionExample {
            id: ExampleId(i),
            instruction: format!("write a short note about subject number {i}"),
            input: None,
            output: format!("subject {i} is mostly about variant {}", i % 23),
        })
        .collect()
}

pub fn synthetic_tasks(m: u32) -> Vec<PredefinedTask> {
    (0..m)
        .map(|i| PredefinedTask {
            task_id: i,
            task_text: format!("summarize subject number {}", 10_000 + i),
            answer_text: format!("{} key points about subject {}", i % 9, 10_000 + i),
            provenance: TaskProvenance::Random,
            source_example_id: None,
            answer_token_count: None,
            zero_shot_score: None,
        })
        .collect()
}

pub fn bench_template() -> PromptTemplate {
    PromptTemplate {
        task_block: "Q: {instruction}\nA:".into(),
        demo_block: " example {instruction} -> {output}".into(),
        demo_position: DemoPosition::AfterTask,
    }
}

/// Random points on the unit sphere, the shape k-center sees in practice.
pub fn random_embeddings(n: usize, dim: usize, seed: u64) -> EmbeddingMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..n)
        .map(|i| {
            let mut vector: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let norm = vector.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            for x in vector.iter_mut() {
                *x /= norm;
            }
            (ExampleId(i as u64), vector)
        })
        .collect();
    EmbeddingMatrix { dim, rows }
}
