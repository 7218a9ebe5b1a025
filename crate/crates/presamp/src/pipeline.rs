//! End-to-end orchestration over a work directory:
//!
//! ```text
//! workdir/
//!   full/                     canonical dataset after ingest
//!   split.json                train/val/test edge assignment + eval users
//!   train/                    training graph (full index space) + KG
//!   baseline/seed_<s>/        full-data model, metrics, toppop metrics
//!   cells/<sampler>_<ratio>_<seed>/   sample, fidelity, model, metrics
//!   report.csv, report.json   consolidated results
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::{EvalWhich, PipelineConfig};
use crate::error::{Error, Result};
use crate::eval::{evaluate_model, evaluate_toppop};
use crate::fidelity::fidelity_report;
use crate::graph::io::{load_dataset, save_dataset, Dataset};
use crate::graph::{CollabGraph, IndexMap, KnowledgeGraph};
use crate::ingest::{
    filter_min_activity, generate_synthetic, holdout_context, load_ratings, load_split,
    load_triples, restrict_to_items, save_split, temporal_split, EvalUser, EvaluationSplit,
};
use crate::metrics::MetricsReport;
use crate::model::{save_checkpoint, train, Checkpoint, TrainConfig};
use crate::sample::{sample_pipeline, SampleSpec, SamplerKind, StartEvent};

/// Rewire the item -> entity map after the item index space changed.
fn remap_item_entities(kg: &KnowledgeGraph, item_map: &IndexMap) -> Result<KnowledgeGraph> {
    let mut map = BTreeMap::new();
    for new_item in 0..item_map.len() {
        if let Some(&e) = kg.item_entity_map().get(&item_map.to_old(new_item)) {
            map.insert(new_item, e);
        }
    }
    KnowledgeGraph::new(
        kg.num_entities(),
        kg.relation_labels().to_vec(),
        kg.triples().to_vec(),
        map,
    )
}

/// Ingest inputs (or generate the synthetic dataset) into `workdir/full`.
pub fn ingest_stage(config: &PipelineConfig) -> Result<(CollabGraph, KnowledgeGraph)> {
    let (cg, kg) = if config.synthetic {
        generate_synthetic(&config.synthetic_spec)?
    } else {
        let ratings_path = config
            .ratings
            .as_ref()
            .ok_or_else(|| Error::validation("no ratings path configured".to_string()))?;
        if !ratings_path.exists() {
            return Err(Error::MissingInput(ratings_path.clone()));
        }
        let raw = load_ratings(ratings_path, config.dedup)?;
        let (cg, kg) = match &config.kg {
            Some(kg_path) => {
                if !kg_path.exists() {
                    return Err(Error::MissingInput(kg_path.clone()));
                }
                let raw_kg = load_triples(kg_path, &raw.item_ids)?;
                let linked = raw_kg.kg.item_entity_map().keys().copied().collect();
                (restrict_to_items(&raw.cg, &linked)?, raw_kg.kg)
            }
            None => (raw.cg, KnowledgeGraph::empty()),
        };
        let filtered = filter_min_activity(&cg, config.min_ratings, config.min_span_days, config.day_unit)?;
        let kg = remap_item_entities(&kg, &filtered.item_map)?;
        (filtered.graph, kg)
    };
    if cg.num_edges() == 0 {
        return Err(Error::validation("ingest produced an empty interaction graph".to_string()));
    }
    save_dataset(&config.workdir.join("full"), &cg, &kg, None, None, None)?;
    Ok((cg, kg))
}

/// Split the full dataset and persist `split.json` plus the `train/` dir.
pub fn split_stage(
    config: &PipelineConfig,
    cg: &CollabGraph,
    kg: &KnowledgeGraph,
) -> Result<EvaluationSplit> {
    let skeleton = temporal_split(cg, config.split_ratios)?;
    let split = holdout_context(
        cg,
        &skeleton,
        config.context_fraction,
        config.min_context,
        config.min_target,
    )?;
    save_split(&config.workdir.join("split.json"), &split)?;
    save_dataset(&config.workdir.join("train"), &split.train, kg, None, None, None)?;
    Ok(split)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleArtifact {
    pub sampler: SamplerKind,
    pub ratio: f64,
    pub seed: u64,
    pub achieved_ratio_cg: f64,
    pub achieved_ratio_kg: Option<f64>,
    pub cg_seconds: f64,
    pub kg_seconds: f64,
    pub kg_seed_entities: Vec<usize>,
    pub kg_start_trace: Vec<StartEvent>,
}

/// One pipeline run: either a baseline (no sampler) or a grid cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub sampler: Option<SamplerKind>,
    pub ratio: f64,
    pub seed: u64,
    pub achieved_ratio_cg: Option<f64>,
    pub achieved_ratio_kg: Option<f64>,
    pub sample_seconds: Option<f64>,
    pub train_seconds: f64,
    pub evaluate_seconds: f64,
    pub model_path: PathBuf,
    pub metrics_path: PathBuf,
    pub fidelity_path: Option<PathBuf>,
    /// Relative change vs the same-seed full-data baseline, keyed
    /// `metric@k`; `train_seconds` is included under key `train_seconds`.
    pub deltas: BTreeMap<String, f64>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

fn metric_keys(report: &MetricsReport) -> Vec<(String, f64)> {
    let mut out = Vec::new();
    for at in &report.at_k {
        for name in ["hr", "ndcg", "precision", "recall", "coverage"] {
            out.push((format!("{name}@{}", at.k), report.mean(name, at.k).unwrap()));
        }
    }
    out.push(("pr_auc_ap".to_string(), report.pr_auc_ap.mean));
    out
}

fn relative_deltas(cell: &MetricsReport, base: &MetricsReport, cell_train: f64, base_train: f64) -> BTreeMap<String, f64> {
    let mut deltas = BTreeMap::new();
    let base_vals: BTreeMap<String, f64> = metric_keys(base).into_iter().collect();
    for (key, value) in metric_keys(cell) {
        if let Some(&b) = base_vals.get(&key) {
            if b != 0.0 {
                deltas.insert(key, (value - b) / b);
            }
        }
    }
    if base_train > 0.0 {
        deltas.insert("train_seconds".to_string(), (cell_train - base_train) / base_train);
    }
    deltas
}

fn eval_users<'a>(config: &PipelineConfig, split: &'a EvaluationSplit) -> &'a [EvalUser] {
    match config.eval_split {
        EvalWhich::Val => &split.val,
        EvalWhich::Test => &split.test,
    }
}

fn cell_dir(workdir: &Path, sampler: SamplerKind, ratio: f64, seed: u64) -> PathBuf {
    workdir.join("cells").join(format!("{}_{ratio}_{seed}", sampler.name()))
}

/// Standalone sampling of the `train/` dataset into `out`; used by the
/// `sample` subcommand (the grid runner goes through [`cell_run`]).
pub fn sample_stage(
    config: &PipelineConfig,
    sampler: SamplerKind,
    ratio: f64,
    seed: u64,
    out: &Path,
) -> Result<SampleArtifact> {
    let train_set = load_dataset(&config.workdir.join("train"))?;
    let mut spec = SampleSpec::new(sampler, ratio, seed);
    spec.p_f = config.p_f;
    spec.p_b = config.p_b;
    spec.p_c = config.p_c;
    spec.walk_len = config.walk_len;
    spec.walks_per_node = config.walks_per_node;
    spec.ffb_mean = config.ffb_mean;
    let sample = sample_pipeline(&train_set.cg, &train_set.kg, &spec)?;
    save_dataset(
        out,
        &sample.cg.graph,
        &sample.kg.graph,
        Some(&sample.cg.user_map),
        Some(&sample.cg.item_map),
        Some(&sample.kg.entity_map),
    )?;
    let artifact = SampleArtifact {
        sampler,
        ratio,
        seed,
        achieved_ratio_cg: sample.achieved_ratio_cg,
        achieved_ratio_kg: sample.achieved_ratio_kg,
        cg_seconds: sample.timing.cg_seconds,
        kg_seconds: sample.timing.kg_seconds,
        kg_seed_entities: sample.kg_seed_entities,
        kg_start_trace: sample.kg_start_trace,
    };
    write_json(&out.join("sample.json"), &artifact)?;
    Ok(artifact)
}

/// Compare two dataset directories; `sample_dir` may carry index maps.
pub fn fidelity_between(original_dir: &Path, sample_dir: &Path) -> Result<crate::fidelity::FidelityReport> {
    let original = load_dataset(original_dir)?;
    let sample = load_dataset(sample_dir)?;
    let cg = crate::graph::CgSubgraph {
        user_map: sample.user_map.unwrap_or_else(|| IndexMap::identity(sample.cg.num_users())),
        item_map: sample.item_map.unwrap_or_else(|| IndexMap::identity(sample.cg.num_items())),
        graph: sample.cg,
    };
    let kg = crate::graph::KgSubgraph {
        entity_map: sample.entity_map.unwrap_or_else(|| IndexMap::identity(sample.kg.num_entities())),
        graph: sample.kg,
    };
    fidelity_report(&original.cg, &original.kg, &cg, &kg)
}

/// Train and evaluate on the full training graph for one seed.
pub fn baseline_run(
    config: &PipelineConfig,
    full: &CollabGraph,
    split: &EvaluationSplit,
    seed: u64,
) -> Result<RunRecord> {
    let dir = config.workdir.join("baseline").join(format!("seed_{seed}"));
    fs::create_dir_all(&dir)?;
    let train_config = TrainConfig { seed, ..config.train.clone() };

    let t0 = Instant::now();
    let out = train(&split.train, &train_config)?;
    let train_seconds = t0.elapsed().as_secs_f64();
    let model_path = dir.join("model.json");
    save_checkpoint(
        &model_path,
        &Checkpoint { params: out.params.clone(), config: train_config, loss_trace: out.loss_trace },
    )?;

    let users = eval_users(config, split);
    let t1 = Instant::now();
    let report = evaluate_model(&out.params, &split.train, full, users, &config.ks)?;
    let evaluate_seconds = t1.elapsed().as_secs_f64();
    let metrics_path = dir.join("metrics.json");
    write_json(&metrics_path, &report)?;
    let toppop_report = evaluate_toppop(&split.train, full, users, &config.ks)?;
    write_json(&dir.join("metrics_toppop.json"), &toppop_report)?;

    let record = RunRecord {
        sampler: None,
        ratio: 1.0,
        seed,
        achieved_ratio_cg: None,
        achieved_ratio_kg: None,
        sample_seconds: None,
        train_seconds,
        evaluate_seconds,
        model_path,
        metrics_path,
        fidelity_path: None,
        deltas: BTreeMap::new(),
    };
    write_json(&dir.join("run.json"), &record)?;
    Ok(record)
}

/// Run one (sampler, ratio, seed) grid cell against a known baseline.
#[allow(clippy::too_many_arguments)]
pub fn cell_run(
    config: &PipelineConfig,
    full: &CollabGraph,
    kg: &KnowledgeGraph,
    split: &EvaluationSplit,
    sampler: SamplerKind,
    ratio: f64,
    seed: u64,
    baseline: &RunRecord,
) -> Result<RunRecord> {
    let dir = cell_dir(&config.workdir, sampler, ratio, seed);
    fs::create_dir_all(&dir)?;

    let mut spec = SampleSpec::new(sampler, ratio, seed);
    spec.p_f = config.p_f;
    spec.p_b = config.p_b;
    spec.p_c = config.p_c;
    spec.walk_len = config.walk_len;
    spec.walks_per_node = config.walks_per_node;
    spec.ffb_mean = config.ffb_mean;
    let sample = sample_pipeline(&split.train, kg, &spec).map_err(Error::in_stage("sample"))?;
    save_dataset(
        &dir.join("sample"),
        &sample.cg.graph,
        &sample.kg.graph,
        Some(&sample.cg.user_map),
        Some(&sample.cg.item_map),
        Some(&sample.kg.entity_map),
    )?;
    write_json(
        &dir.join("sample.json"),
        &SampleArtifact {
            sampler,
            ratio,
            seed,
            achieved_ratio_cg: sample.achieved_ratio_cg,
            achieved_ratio_kg: sample.achieved_ratio_kg,
            cg_seconds: sample.timing.cg_seconds,
            kg_seconds: sample.timing.kg_seconds,
            kg_seed_entities: sample.kg_seed_entities.clone(),
            kg_start_trace: sample.kg_start_trace.clone(),
        },
    )?;

    let fidelity = fidelity_report(&split.train, kg, &sample.cg, &sample.kg)
        .map_err(Error::in_stage("fidelity"))?;
    let fidelity_path = dir.join("fidelity.json");
    write_json(&fidelity_path, &fidelity)?;

    // The full-data model is trained once per seed; a ratio-1 cell reuses it.
    let (model_path, metrics_path, train_seconds, evaluate_seconds, report) = if ratio >= 1.0 {
        let report: MetricsReport = read_json(&baseline.metrics_path)?;
        (
            baseline.model_path.clone(),
            baseline.metrics_path.clone(),
            baseline.train_seconds,
            baseline.evaluate_seconds,
            report,
        )
    } else {
        let train_config = TrainConfig { seed, ..config.train.clone() };
        let t0 = Instant::now();
        let out = train(&sample.cg.graph, &train_config).map_err(Error::in_stage("train"))?;
        let train_seconds = t0.elapsed().as_secs_f64();
        let mut params = out.params;
        params.remap_keys(&sample.cg.user_map, &sample.cg.item_map);
        let model_path = dir.join("model.json");
        save_checkpoint(
            &model_path,
            &Checkpoint { params: params.clone(), config: train_config, loss_trace: out.loss_trace },
        )?;

        let users = eval_users(config, split);
        let t1 = Instant::now();
        let report = evaluate_model(&params, &split.train, full, users, &config.ks)
            .map_err(Error::in_stage("evaluate"))?;
        let evaluate_seconds = t1.elapsed().as_secs_f64();
        let metrics_path = dir.join("metrics.json");
        write_json(&metrics_path, &report)?;
        (model_path, metrics_path, train_seconds, evaluate_seconds, report)
    };

    let baseline_report: MetricsReport = read_json(&baseline.metrics_path)?;
    let record = RunRecord {
        sampler: Some(sampler),
        ratio,
        seed,
        achieved_ratio_cg: Some(sample.achieved_ratio_cg),
        achieved_ratio_kg: sample.achieved_ratio_kg,
        sample_seconds: Some(sample.timing.cg_seconds + sample.timing.kg_seconds),
        train_seconds,
        evaluate_seconds,
        model_path,
        metrics_path,
        fidelity_path: Some(fidelity_path),
        deltas: relative_deltas(&report, &baseline_report, train_seconds, baseline.train_seconds),
    };
    write_json(&dir.join("run.json"), &record)?;
    Ok(record)
}

/// Execute every stage for the whole grid. The full-data baseline is trained
/// once per seed and shared by all cells of that seed.
pub fn run_pipeline(config: &PipelineConfig) -> Result<Vec<RunRecord>> {
    config.validate()?;
    fs::create_dir_all(&config.workdir)?;
    let (cg, kg) = ingest_stage(config).map_err(Error::in_stage("ingest"))?;
    let split = split_stage(config, &cg, &kg).map_err(Error::in_stage("split"))?;

    let mut records = Vec::new();
    let mut baselines: BTreeMap<u64, RunRecord> = BTreeMap::new();
    for &seed in &config.seeds {
        let record = baseline_run(config, &cg, &split, seed).map_err(Error::in_stage("train"))?;
        baselines.insert(seed, record.clone());
        records.push(record);
    }
    for &sampler in &config.samplers {
        for &ratio in &config.ratios {
            for &seed in &config.seeds {
                let record = cell_run(config, &cg, &kg, &split, sampler, ratio, seed, &baselines[&seed])?;
                records.push(record);
            }
        }
    }
    report_stage(&config.workdir)?;
    Ok(records)
}

/// Reload the split written by [`split_stage`] against the `full/` dataset.
pub fn load_workdir_split(workdir: &Path) -> Result<(Dataset, EvaluationSplit)> {
    let dataset = load_dataset(&workdir.join("full"))?;
    let split = load_split(&workdir.join("split.json"), &dataset.cg)?;
    Ok((dataset, split))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: String,
    pub sampler: String,
    pub ratio: f64,
    pub seed: u64,
    pub metric: String,
    pub k: usize,
    pub value: f64,
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellSummary {
    pub method: String,
    pub sampler: String,
    pub ratio: f64,
    pub metric: String,
    pub k: usize,
    pub mean: f64,
    /// Population standard deviation over seeds; absent for a single seed.
    pub std_dev: Option<f64>,
    pub seeds: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub rows: Vec<ReportRow>,
    pub summary: Vec<CellSummary>,
    pub skipped_runs: usize,
}

fn rows_from_report(
    report: &MetricsReport,
    method: &str,
    sampler: &str,
    ratio: f64,
    seed: u64,
    deltas: &BTreeMap<String, f64>,
) -> Vec<ReportRow> {
    let mut rows = Vec::new();
    for at in &report.at_k {
        for name in ["hr", "ndcg", "precision", "recall", "coverage"] {
            rows.push(ReportRow {
                method: method.to_string(),
                sampler: sampler.to_string(),
                ratio,
                seed,
                metric: name.to_string(),
                k: at.k,
                value: report.mean(name, at.k).unwrap(),
                delta: deltas.get(&format!("{name}@{}", at.k)).copied(),
            });
        }
    }
    rows.push(ReportRow {
        method: method.to_string(),
        sampler: sampler.to_string(),
        ratio,
        seed,
        metric: "pr_auc_ap".to_string(),
        k: 0,
        value: report.pr_auc_ap.mean,
        delta: deltas.get("pr_auc_ap").copied(),
    });
    rows
}

/// Consolidate every readable run in the work directory into `report.csv`
/// and `report.json`; unreadable run records are skipped and counted.
pub fn report_stage(workdir: &Path) -> Result<Report> {
    let mut rows = Vec::new();
    let mut skipped = 0usize;

    let mut run_dirs: Vec<PathBuf> = Vec::new();
    for sub in ["baseline", "cells"] {
        let root = workdir.join(sub);
        if let Ok(entries) = fs::read_dir(&root) {
            let mut dirs: Vec<PathBuf> = entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_dir())
                .collect();
            dirs.sort();
            run_dirs.extend(dirs);
        }
    }
    if run_dirs.is_empty() {
        return Err(Error::validation(format!(
            "{}: no completed runs to report",
            workdir.display()
        )));
    }

    for dir in run_dirs {
        let record: RunRecord = match read_json(&dir.join("run.json")) {
            Ok(r) => r,
            Err(_) => {
                skipped += 1;
                continue;
            }
        };
        let report: MetricsReport = match read_json(&record.metrics_path) {
            Ok(r) => r,
            Err(_) => {
                skipped += 1;
                continue;
            }
        };
        let sampler = record.sampler.map(|s| s.name().to_string()).unwrap_or_else(|| "none".to_string());
        rows.extend(rows_from_report(&report, "inmo_lite", &sampler, record.ratio, record.seed, &record.deltas));
        if record.sampler.is_none() {
            if let Ok(tp) = read_json::<MetricsReport>(&dir.join("metrics_toppop.json")) {
                rows.extend(rows_from_report(&tp, "toppop", "none", 1.0, record.seed, &BTreeMap::new()));
            }
        }
    }

    // Per-cell dispersion over seeds.
    let mut groups: BTreeMap<(String, String, String, String, usize), Vec<f64>> = BTreeMap::new();
    for row in &rows {
        groups
            .entry((
                row.method.clone(),
                row.sampler.clone(),
                format!("{:.6}", row.ratio),
                row.metric.clone(),
                row.k,
            ))
            .or_default()
            .push(row.value);
    }
    let mut summary = Vec::new();
    for ((method, sampler, ratio, metric, k), values) in groups {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std_dev = if values.len() > 1 {
            Some((values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt())
        } else {
            None
        };
        summary.push(CellSummary {
            method,
            sampler,
            ratio: ratio.parse().unwrap(),
            metric,
            k,
            mean,
            std_dev,
            seeds: values.len(),
        });
    }

    let mut csv = String::from("method,sampler,ratio,seed,metric,k,value,delta\n");
    for r in &rows {
        let delta = r.delta.map(|d| format!("{d}")).unwrap_or_default();
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.method, r.sampler, r.ratio, r.seed, r.metric, r.k, r.value, delta
        ));
    }
    fs::write(workdir.join("report.csv"), csv)?;
    let report = Report { rows, summary, skipped_runs: skipped };
    write_json(&workdir.join("report.json"), &report)?;
    Ok(report)
}
