//! Flat `key = value` configuration shared by the CLI subcommands. Every key
//! can also be supplied as a command-line flag of the same name; flags win
//! over the file, the file wins over defaults.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{DedupPolicy, SplitRatios, SyntheticSpec};
use crate::model::TrainConfig;
use crate::sample::SamplerKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalWhich {
    Val,
    Test,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    // inputs
    pub ratings: Option<PathBuf>,
    pub kg: Option<PathBuf>,
    pub workdir: PathBuf,
    /// Generate a planted-cluster dataset instead of reading input files.
    pub synthetic: bool,
    pub synthetic_spec: SyntheticSpec,
    // ingest
    pub dedup: DedupPolicy,
    pub min_ratings: usize,
    pub min_span_days: u64,
    pub day_unit: u64,
    // split
    pub split_ratios: SplitRatios,
    pub context_fraction: f64,
    pub min_context: usize,
    pub min_target: usize,
    pub eval_split: EvalWhich,
    // sampling grid
    pub samplers: Vec<SamplerKind>,
    pub ratios: Vec<f64>,
    pub seeds: Vec<u64>,
    pub p_f: f64,
    pub p_b: f64,
    pub p_c: f64,
    pub walk_len: usize,
    pub walks_per_node: usize,
    pub ffb_mean: Option<f64>,
    // training (seed is taken from `seeds` per run)
    pub train: TrainConfig,
    // evaluation cutoffs
    pub ks: Vec<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            ratings: None,
            kg: None,
            workdir: PathBuf::from("work"),
            synthetic: false,
            synthetic_spec: SyntheticSpec::default(),
            dedup: DedupPolicy::KeepLatest,
            min_ratings: 5,
            min_span_days: 5,
            day_unit: 86_400,
            split_ratios: SplitRatios::default(),
            context_fraction: 0.5,
            min_context: 1,
            min_target: 1,
            eval_split: EvalWhich::Test,
            samplers: SamplerKind::ALL.to_vec(),
            ratios: vec![0.05, 0.1, 0.2, 0.5, 1.0],
            seeds: vec![0, 1, 2],
            p_f: 0.35,
            p_b: 0.2,
            p_c: 0.15,
            walk_len: 10,
            walks_per_node: 1,
            ffb_mean: None,
            train: TrainConfig::default(),
            ks: vec![20],
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::validation(format!("invalid value {value:?} for key {key}")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

impl PipelineConfig {
    /// Apply one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "ratings" => self.ratings = Some(PathBuf::from(value)),
            "kg" => self.kg = Some(PathBuf::from(value)),
            "workdir" => self.workdir = PathBuf::from(value),
            "synthetic" => self.synthetic = parse(key, value)?,
            "synthetic_users" => self.synthetic_spec.num_users = parse(key, value)?,
            "synthetic_items" => self.synthetic_spec.num_items = parse(key, value)?,
            "synthetic_edges_per_user" => self.synthetic_spec.edges_per_user = parse(key, value)?,
            "synthetic_clusters" => self.synthetic_spec.num_clusters = parse(key, value)?,
            "synthetic_noise" => self.synthetic_spec.cross_cluster_noise = parse(key, value)?,
            "synthetic_seed" => self.synthetic_spec.seed = parse(key, value)?,
            "dedup" => {
                self.dedup = match value {
                    "keep_latest" => DedupPolicy::KeepLatest,
                    "keep_first" => DedupPolicy::KeepFirst,
                    other => {
                        return Err(Error::validation(format!("unknown dedup policy {other:?}")))
                    }
                }
            }
            "min_ratings" => self.min_ratings = parse(key, value)?,
            "min_span_days" => self.min_span_days = parse(key, value)?,
            "day_unit" => self.day_unit = parse(key, value)?,
            "train_ratio" => self.split_ratios.train = parse(key, value)?,
            "val_ratio" => self.split_ratios.val = parse(key, value)?,
            "test_ratio" => self.split_ratios.test = parse(key, value)?,
            "context_fraction" => self.context_fraction = parse(key, value)?,
            "min_context" => self.min_context = parse(key, value)?,
            "min_target" => self.min_target = parse(key, value)?,
            "eval_split" => {
                self.eval_split = match value {
                    "val" => EvalWhich::Val,
                    "test" => EvalWhich::Test,
                    other => return Err(Error::validation(format!("unknown eval split {other:?}"))),
                }
            }
            "samplers" => {
                self.samplers = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(SamplerKind::parse)
                    .collect::<Result<_>>()?
            }
            "ratios" => self.ratios = parse_list(key, value)?,
            "seeds" => self.seeds = parse_list(key, value)?,
            "p_f" => self.p_f = parse(key, value)?,
            "p_b" => self.p_b = parse(key, value)?,
            "p_c" => self.p_c = parse(key, value)?,
            "walk_len" => self.walk_len = parse(key, value)?,
            "walks_per_node" => self.walks_per_node = parse(key, value)?,
            "ffb_mean" => self.ffb_mean = Some(parse(key, value)?),
            "dim" => self.train.dim = parse(key, value)?,
            "layers" => self.train.layers = parse(key, value)?,
            "norm_exponent" => self.train.norm_exponent = parse(key, value)?,
            "key_fraction" => self.train.key_fraction = parse(key, value)?,
            "learning_rate" => self.train.learning_rate = parse(key, value)?,
            "epochs" => self.train.epochs = parse(key, value)?,
            "batch_size" => self.train.batch_size = parse(key, value)?,
            "self_loss_weight" => self.train.self_loss_weight = parse(key, value)?,
            "negatives_per_positive" => self.train.negatives_per_positive = parse(key, value)?,
            "ks" => self.ks = parse_list(key, value)?,
            other => return Err(Error::validation(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Load assignments from a flat config file over the defaults.
    pub fn load(path: &Path) -> Result<Self> {
        let mut config = PipelineConfig::default();
        config.merge_file(path)?;
        Ok(config)
    }

    pub fn merge_file(&mut self, path: &Path) -> Result<()> {
        if !path.exists() {
            return Err(Error::MissingInput(path.to_path_buf()));
        }
        for (lineno, raw) in fs::read_to_string(path)?.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                msg: format!("expected `key = value`, got {raw:?}"),
            })?;
            self.set(key.trim(), value.trim()).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                msg: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::validation("need at least one seed".to_string()));
        }
        if self.ratios.iter().any(|r| !(*r > 0.0 && *r <= 1.0)) {
            return Err(Error::validation("every ratio must be in (0,1]".to_string()));
        }
        if self.samplers.is_empty() {
            return Err(Error::validation("need at least one sampler".to_string()));
        }
        if self.ks.is_empty() {
            return Err(Error::validation("need at least one cutoff k".to_string()));
        }
        if !self.synthetic && self.ratings.is_none() {
            return Err(Error::validation(
                "no input: set `ratings` or `synthetic = true`".to_string(),
            ));
        }
        self.split_ratios.validate()?;
        self.train.validate()?;
        Ok(())
    }
}
