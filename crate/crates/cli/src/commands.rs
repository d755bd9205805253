//! Subcommand implementations.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::json;

use prospector_core::analysis::{overlap, overlap_matrix_csv, ReportInputs};
use prospector_core::error::{Error, Result};
use prospector_core::prospector::{estimate_cost, rank_and_select, CostBaseline, ProspectEngine};
use prospector_core::refinement::{refine, sample_random_predefined, RefinedTaskSet};
use prospector_core::{
    dataset_fingerprint, emit_report, load_dataset, load_score_reports, load_task_set,
    save_dataset, save_score_reports, save_task_set, task_set_fingerprint, Direction,
    InstructionExample, RankedSelection, ScoreReport,
};

use crate::config::{ConfigArgs, RunConfig};

/// Prefix message-bearing errors with the pipeline stage that raised them.
fn stage(err: Error, stage: &str) -> Error {
    match err {
        Error::Backend { message, retryable } => Error::Backend {
            message: format!("{stage}: {message}"),
            retryable,
        },
        Error::Config(message) => Error::Config(format!("{stage}: {message}")),
        Error::InvalidInput(message) => Error::InvalidInput(format!("{stage}: {message}")),
        Error::Invariant(message) => Error::Invariant(format!("{stage}: {message}")),
        other => other,
    }
}

fn write_manifest(output: &Path, manifest: &impl Serialize) -> Result<PathBuf> {
    let path = manifest_path(output);
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    std::fs::write(&path, text)?;
    Ok(path)
}

fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    output.with_file_name(name)
}

fn load_configured_dataset(config: &RunConfig) -> Result<Vec<InstructionExample>> {
    let (examples, report) = load_dataset(config.dataset_path()?, config.dataset_format()?)?;
    if report.dropped_empty_output > 0 {
        eprintln!(
            "note: dropped {} record(s) with empty output ({} kept)",
            report.dropped_empty_output, report.loaded
        );
    }
    Ok(examples)
}

pub fn cmd_refine(
    args: &ConfigArgs,
    output: &Path,
    random: Option<usize>,
) -> Result<()> {
    let config = args.resolve()?;
    config.validate(args.offline)?;
    let started = Instant::now();
    let dataset = load_configured_dataset(&config)?;

    let (set, reward_stats, mode): (RefinedTaskSet, Option<_>, &str) = match random {
        Some(m) => {
            let set = sample_random_predefined(&dataset, m, config.seed)
                .map_err(|e| stage(e, "random sampling stage"))?;
            (set, None, "random")
        }
        None => {
            let reward = config.build_reward()?;
            let embedder = config.build_embedder()?;
            let (set, stats) = refine(
                &dataset,
                reward.as_ref(),
                embedder.as_ref(),
                &config.template,
                &config.refinement,
                Some(&config.cache_dir),
            )
            .map_err(|e| stage(e, "refinement stage"))?;
            (set, Some(stats), "refined")
        }
    };

    save_task_set(output, &set.tasks)?;
    let manifest = json!({
        "command": "refine",
        "mode": mode,
        "config_hash": config.config_hash(),
        "dataset": config.dataset_path()?.display().to_string(),
        "dataset_fingerprint": dataset_fingerprint(&dataset),
        "task_set_fingerprint": task_set_fingerprint(&set.tasks),
        "task_count": set.tasks.len(),
        "elite_ids": set.elite_ids,
        "coreset_ids": set.coreset_ids,
        "seed": config.seed,
        "reward_stats": reward_stats,
        "wall_time_ms": started.elapsed().as_millis() as u64,
    });
    let manifest_file = write_manifest(output, &manifest)?;
    println!(
        "wrote {} tasks to {} ({mode}); manifest {}",
        set.tasks.len(),
        output.display(),
        manifest_file.display()
    );
    Ok(())
}

pub fn cmd_prospect(args: &ConfigArgs, tasks_path: &Path, output: &Path) -> Result<()> {
    let config = args.resolve()?;
    config.validate(args.offline)?;
    let started = Instant::now();
    let dataset = load_configured_dataset(&config)?;
    let mut tasks = load_task_set(tasks_path)?;
    let scorer = config.build_scorer()?;

    let engine = ProspectEngine::new(scorer.as_ref(), &config.template)
        .with_parallelism(config.parallelism)
        .with_cache_dir(&config.cache_dir);
    let reports = engine
        .prospect(&dataset, &mut tasks)
        .map_err(|e| stage(e, "prospecting stage"))?;
    let stats = engine.stats();

    save_score_reports(output, &reports)?;
    let manifest = json!({
        "command": "prospect",
        "config_hash": config.config_hash(),
        "dataset": config.dataset_path()?.display().to_string(),
        "dataset_fingerprint": dataset_fingerprint(&dataset),
        "task_set": tasks_path.display().to_string(),
        "task_set_fingerprint": task_set_fingerprint(&tasks),
        "backend_fingerprint": scorer.fingerprint(),
        "template_fingerprint": config.template.fingerprint(),
        "dataset_size": dataset.len(),
        "task_count": tasks.len(),
        "zero_shot_calls": stats.zero_shot_calls,
        "one_shot_calls": stats.one_shot_calls,
        "total_calls": stats.zero_shot_calls + stats.one_shot_calls,
        "cache_hits": stats.cache_hits,
        "parallelism": config.parallelism,
        "seed": config.seed,
        "wall_time_ms": started.elapsed().as_millis() as u64,
    });
    let manifest_file = write_manifest(output, &manifest)?;
    println!(
        "scored {} examples against {} tasks: {} zero-shot + {} one-shot calls, {} cache hits",
        reports.len(),
        tasks.len(),
        stats.zero_shot_calls,
        stats.one_shot_calls,
        stats.cache_hits
    );
    println!("scores {}; manifest {}", output.display(), manifest_file.display());
    Ok(())
}

/// Sidecar line: the compact per-example score record.
#[derive(Serialize)]
struct SidecarRecord {
    example_id: u64,
    golden_score: f64,
    wins: u32,
    m: u32,
}

pub fn cmd_export(
    scores_path: &Path,
    dataset_path: &Path,
    format: &str,
    fraction: f64,
    direction: Direction,
    output: &Path,
) -> Result<()> {
    let reports = load_score_reports(scores_path)?;
    let format = format.parse()?;
    let (dataset, _) = load_dataset(dataset_path, format)?;
    let selection = rank_and_select(&reports, fraction, direction)?;

    let by_id: std::collections::HashMap<_, _> =
        dataset.iter().map(|e| (e.id, e)).collect();
    let report_by_id: std::collections::HashMap<_, _> =
        reports.iter().map(|r| (r.example_id, r)).collect();
    let mut subset = Vec::with_capacity(selection.example_ids.len());
    let mut sidecar = Vec::with_capacity(selection.example_ids.len());
    for id in &selection.example_ids {
        let example = by_id.get(id).ok_or_else(|| {
            Error::InvalidInput(format!(
                "scores reference example {id} that is not in {}",
                dataset_path.display()
            ))
        })?;
        subset.push((*example).clone());
        let report = report_by_id[id];
        sidecar.push(SidecarRecord {
            example_id: id.0,
            golden_score: report.golden_score,
            wins: report.wins,
            m: report.m,
        });
    }
    save_dataset(output, format, &subset)?;

    let sidecar_path = {
        let mut name = output.file_name().unwrap_or_default().to_os_string();
        name.push(".scores.jsonl");
        output.with_file_name(name)
    };
    let mut lines = String::new();
    for record in &sidecar {
        lines.push_str(&serde_json::to_string(record)?);
        lines.push('\n');
    }
    std::fs::write(&sidecar_path, lines)?;

    println!(
        "exported {} of {} examples ({} {}) to {}; sidecar {}",
        subset.len(),
        reports.len(),
        fraction,
        direction,
        output.display(),
        sidecar_path.display()
    );
    Ok(())
}

fn label_for(path: &Path, explicit: Option<&String>) -> String {
    match explicit {
        Some(label) => label.clone(),
        None => path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string()),
    }
}

type LabelledSelections = Vec<(String, RankedSelection)>;

fn build_selections(
    scores: &[PathBuf],
    labels: &[String],
    fraction: f64,
    direction: Direction,
) -> Result<(LabelledSelections, Vec<Vec<ScoreReport>>)> {
    if !labels.is_empty() && labels.len() != scores.len() {
        return Err(Error::Config(format!(
            "{} labels for {} scores files",
            labels.len(),
            scores.len()
        )));
    }
    let mut selections = Vec::new();
    let mut all_reports = Vec::new();
    for (i, path) in scores.iter().enumerate() {
        let reports = load_score_reports(path)?;
        let selection = rank_and_select(&reports, fraction, direction)?;
        selections.push((label_for(path, labels.get(i)), selection));
        all_reports.push(reports);
    }
    Ok((selections, all_reports))
}

pub fn cmd_overlap(
    scores: &[PathBuf],
    labels: &[String],
    fraction: f64,
    direction: Direction,
    output: Option<&Path>,
) -> Result<()> {
    if scores.len() < 2 {
        return Err(Error::Config(
            "overlap needs at least two --scores files".into(),
        ));
    }
    let (selections, _) = build_selections(scores, labels, fraction, direction)?;
    let mut overlaps = Vec::new();
    for i in 0..selections.len() {
        for j in (i + 1)..selections.len() {
            let (label_a, sel_a) = &selections[i];
            let (label_b, sel_b) = &selections[j];
            let report = overlap(label_a, sel_a, label_b, sel_b)?;
            println!(
                "{} vs {}: {:.4} ({} shared of {})",
                report.label_a,
                report.label_b,
                report.fraction,
                (report.fraction * report.set_size as f64).round() as usize,
                report.set_size
            );
            overlaps.push(report);
        }
    }
    let csv = overlap_matrix_csv(&overlaps)?;
    print!("{csv}");
    if let Some(path) = output {
        std::fs::write(path, csv)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

pub fn cmd_cost(
    dataset_size: u64,
    task_count: u64,
    prospector_params: f64,
    baseline_tasks: u64,
    baseline_params: f64,
    output: Option<&Path>,
) -> Result<()> {
    let baseline = CostBaseline {
        task_count: baseline_tasks,
        params: baseline_params,
    };
    let estimate = estimate_cost(dataset_size, task_count, prospector_params, &baseline)?;
    println!("dataset size:          {}", estimate.dataset_size);
    println!("task count (m):        {}", estimate.task_count);
    println!("zero-shot calls:       {}", estimate.zero_shot_calls);
    println!("one-shot calls:        {}", estimate.one_shot_calls);
    println!("total calls:           {}", estimate.total_calls);
    println!(
        "engine calls (m + |D|*m): {}",
        estimate.engine_total_calls
    );
    println!(
        "relative compute vs baseline (m={}, params x{}): {:.6}",
        baseline.task_count, baseline.params, estimate.relative_compute
    );
    if estimate.relative_compute > 0.0 {
        println!(
            "cost ratio baseline/this: {:.2}x",
            1.0 / estimate.relative_compute
        );
    }
    if let Some(path) = output {
        let mut text = serde_json::to_string_pretty(&estimate)?;
        text.push('\n');
        std::fs::write(path, text)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

pub fn cmd_report(
    scores: &[PathBuf],
    labels: &[String],
    fraction: f64,
    direction: Direction,
    out_dir: &Path,
) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::Config("report needs at least one --scores file".into()));
    }
    let (selections, all_reports) = build_selections(scores, labels, fraction, direction)?;
    let primary = &all_reports[0];
    for (path, reports) in scores.iter().zip(&all_reports).skip(1) {
        if reports.len() != primary.len() {
            return Err(Error::InvalidInput(format!(
                "{} has {} reports, expected {} (different dataset?)",
                path.display(),
                reports.len(),
                primary.len()
            )));
        }
    }
    let mut overlaps = Vec::new();
    for i in 0..selections.len() {
        for j in (i + 1)..selections.len() {
            overlaps.push(overlap(
                &selections[i].0,
                &selections[i].1,
                &selections[j].0,
                &selections[j].1,
            )?);
        }
    }
    let written = emit_report(
        &ReportInputs {
            reports: primary,
            selections: &selections,
            overlaps: &overlaps,
        },
        out_dir,
    )?;
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}
