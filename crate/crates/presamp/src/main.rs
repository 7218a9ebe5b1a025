//! Command-line front end. Every configuration key accepts a flag of the
//! same name; flags override `--config FILE`, which overrides defaults.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Arg, ArgAction, ArgMatches, Command};

use presamp::config::{EvalWhich, PipelineConfig};
use presamp::error::{Error, Result};
use presamp::eval::{evaluate_model, evaluate_toppop};
use presamp::graph::io::load_dataset;
use presamp::model::{load_checkpoint, save_checkpoint, train, Checkpoint, TrainConfig};
use presamp::pipeline::{
    fidelity_between, ingest_stage, report_stage, run_pipeline, sample_stage, split_stage,
};
use presamp::sample::SamplerKind;

/// Keys understood by [`PipelineConfig::set`]; each becomes a `--key VALUE`
/// flag on every subcommand.
const CONFIG_KEYS: &[&str] = &[
    "ratings",
    "kg",
    "workdir",
    "synthetic",
    "synthetic_users",
    "synthetic_items",
    "synthetic_edges_per_user",
    "synthetic_clusters",
    "synthetic_noise",
    "synthetic_seed",
    "dedup",
    "min_ratings",
    "min_span_days",
    "day_unit",
    "train_ratio",
    "val_ratio",
    "test_ratio",
    "context_fraction",
    "min_context",
    "min_target",
    "eval_split",
    "samplers",
    "ratios",
    "seeds",
    "p_f",
    "p_b",
    "p_c",
    "walk_len",
    "walks_per_node",
    "ffb_mean",
    "dim",
    "layers",
    "norm_exponent",
    "key_fraction",
    "learning_rate",
    "epochs",
    "batch_size",
    "self_loss_weight",
    "negatives_per_positive",
    "ks",
];

fn with_config_flags(cmd: Command) -> Command {
    let cmd = cmd.arg(
        Arg::new("config")
            .long("config")
            .value_name("FILE")
            .help("flat `key = value` configuration file"),
    );
    CONFIG_KEYS.iter().fold(cmd, |c, key| {
        c.arg(Arg::new(*key).long(*key).value_name("VALUE").help("config override"))
    })
}

fn build_config(matches: &ArgMatches) -> Result<PipelineConfig> {
    let mut config = PipelineConfig::default();
    if let Some(path) = matches.get_one::<String>("config") {
        config.merge_file(Path::new(path))?;
    }
    for key in CONFIG_KEYS {
        if let Some(value) = matches.get_one::<String>(*key) {
            config.set(key, value)?;
        }
    }
    Ok(config)
}

fn cli() -> Command {
    Command::new("presamp")
        .about("graph subsampling toolkit for inductive recommender pre-training")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .subcommand(with_config_flags(Command::new("ingest").about(
            "read ratings (and optional triples) or generate synthetic data into workdir/full",
        )))
        .subcommand(with_config_flags(
            Command::new("split").about("temporal train/val/test split of workdir/full"),
        ))
        .subcommand(with_config_flags(
            Command::new("sample")
                .about("subsample workdir/train under an edge budget")
                .arg(Arg::new("sampler").long("sampler").value_name("NAME").required(true).help(
                    "one of ff, ffb, rw, rj, ps, ts, ns",
                ))
                .arg(Arg::new("ratio").long("ratio").value_name("FLOAT").required(true))
                .arg(Arg::new("seed").long("seed").value_name("INT").required(true))
                .arg(Arg::new("out").long("out").value_name("DIR").help(
                    "output dataset directory (default workdir/cells/<cell>/sample)",
                )),
        ))
        .subcommand(
            Command::new("fidelity")
                .about("distribution-fit report between two dataset directories")
                .arg(Arg::new("original").long("original").value_name("DIR").required(true))
                .arg(Arg::new("sample").long("sample").value_name("DIR").required(true))
                .arg(Arg::new("out").long("out").value_name("FILE").required(true)),
        )
        .subcommand(with_config_flags(
            Command::new("train")
                .about("train the inductive embedding model on a dataset directory")
                .arg(Arg::new("data").long("data").value_name("DIR").required(true))
                .arg(Arg::new("seed").long("seed").value_name("INT").required(true))
                .arg(Arg::new("out").long("out").value_name("FILE").help(
                    "checkpoint path (default <data>/model.json)",
                )),
        ))
        .subcommand(with_config_flags(
            Command::new("evaluate")
                .about("rank held-out users of the workdir split with a trained model")
                .arg(Arg::new("model").long("model").value_name("FILE").required(true))
                .arg(Arg::new("out").long("out").value_name("FILE").required(true))
                .arg(
                    Arg::new("toppop")
                        .long("toppop")
                        .action(ArgAction::SetTrue)
                        .help("evaluate the popularity baseline instead of the model"),
                ),
        ))
        .subcommand(with_config_flags(
            Command::new("pipeline").about("run ingest, split, the whole sampling grid, and the report"),
        ))
        .subcommand(with_config_flags(
            Command::new("report").about("consolidate completed runs in workdir into report.csv/json"),
        ))
}

fn cmd_ingest(matches: &ArgMatches) -> Result<()> {
    let config = build_config(matches)?;
    let (cg, kg) = ingest_stage(&config)?;
    println!(
        "ingested {} users, {} items, {} interactions, {} triples -> {}",
        cg.num_users(),
        cg.num_items(),
        cg.num_edges(),
        kg.num_triples(),
        config.workdir.join("full").display()
    );
    Ok(())
}

fn cmd_split(matches: &ArgMatches) -> Result<()> {
    let config = build_config(matches)?;
    let dataset = load_dataset(&config.workdir.join("full"))?;
    let split = split_stage(&config, &dataset.cg, &dataset.kg)?;
    println!(
        "split: {} train edges, {} val users, {} test users ({} val / {} test excluded) -> {}",
        split.train.num_edges(),
        split.val.len(),
        split.test.len(),
        split.excluded_val,
        split.excluded_test,
        config.workdir.join("split.json").display()
    );
    Ok(())
}

fn cmd_sample(matches: &ArgMatches) -> Result<()> {
    let config = build_config(matches)?;
    let sampler = SamplerKind::parse(matches.get_one::<String>("sampler").unwrap())?;
    let ratio: f64 = parse_flag(matches, "ratio")?;
    let seed: u64 = parse_flag(matches, "seed")?;
    let out = match matches.get_one::<String>("out") {
        Some(p) => PathBuf::from(p),
        None => config
            .workdir
            .join("cells")
            .join(format!("{}_{ratio}_{seed}", sampler.name()))
            .join("sample"),
    };
    let artifact = sample_stage(&config, sampler, ratio, seed, &out)?;
    match artifact.achieved_ratio_kg {
        Some(kg) => println!(
            "sampled {}: interaction ratio {:.4}, triple ratio {:.4} -> {}",
            sampler.name(),
            artifact.achieved_ratio_cg,
            kg,
            out.display()
        ),
        None => println!(
            "sampled {}: interaction ratio {:.4} -> {}",
            sampler.name(),
            artifact.achieved_ratio_cg,
            out.display()
        ),
    }
    Ok(())
}

fn cmd_fidelity(matches: &ArgMatches) -> Result<()> {
    let original = PathBuf::from(matches.get_one::<String>("original").unwrap());
    let sample = PathBuf::from(matches.get_one::<String>("sample").unwrap());
    let out = PathBuf::from(matches.get_one::<String>("out").unwrap());
    let report = fidelity_between(&original, &sample)?;
    if let Some(parent) = out.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(&out, serde_json::to_string_pretty(&report)?)?;
    println!(
        "D_user {:.4}, D_item {:.4}, stime {:.4} -> {:.4}; report -> {}",
        report.d_user,
        report.d_item,
        report.stime_original,
        report.stime_sample,
        out.display()
    );
    Ok(())
}

fn cmd_train(matches: &ArgMatches) -> Result<()> {
    let config = build_config(matches)?;
    let data = PathBuf::from(matches.get_one::<String>("data").unwrap());
    let seed: u64 = parse_flag(matches, "seed")?;
    let out = matches
        .get_one::<String>("out")
        .map(PathBuf::from)
        .unwrap_or_else(|| data.join("model.json"));
    let dataset = load_dataset(&data)?;
    let train_config = TrainConfig { seed, ..config.train };
    let result = train(&dataset.cg, &train_config)?;
    let mut params = result.params;
    // A sampled dataset carries index maps; lift keys back into the original
    // index space so the checkpoint evaluates against the full catalog.
    if let (Some(user_map), Some(item_map)) = (&dataset.user_map, &dataset.item_map) {
        params.remap_keys(user_map, item_map);
    }
    let final_loss = result.loss_trace.last().copied().unwrap_or(f64::NAN);
    save_checkpoint(&out, &Checkpoint { params, config: train_config, loss_trace: result.loss_trace })?;
    println!("trained {} epochs, final loss {final_loss:.6} -> {}", config.train.epochs, out.display());
    Ok(())
}

fn cmd_evaluate(matches: &ArgMatches) -> Result<()> {
    let config = build_config(matches)?;
    let (dataset, split) = presamp::pipeline::load_workdir_split(&config.workdir)?;
    let users = match config.eval_split {
        EvalWhich::Val => &split.val,
        EvalWhich::Test => &split.test,
    };
    let report = if matches.get_flag("toppop") {
        evaluate_toppop(&split.train, &dataset.cg, users, &config.ks)?
    } else {
        let ckpt = load_checkpoint(Path::new(matches.get_one::<String>("model").unwrap()))?;
        evaluate_model(&ckpt.params, &split.train, &dataset.cg, users, &config.ks)?
    };
    let out = PathBuf::from(matches.get_one::<String>("out").unwrap());
    if let Some(parent) = out.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(&out, serde_json::to_string_pretty(&report)?)?;
    for at in &report.at_k {
        println!(
            "k={}: hr {:.4}, ndcg {:.4}, precision {:.4}, recall {:.4}, coverage {:.4}",
            at.k, at.hr.mean, at.ndcg.mean, at.precision.mean, at.recall.mean, at.coverage
        );
    }
    println!(
        "pr_auc_ap {:.4} over {} users ({} excluded) -> {}",
        report.pr_auc_ap.mean,
        report.evaluated_users,
        report.excluded_users,
        out.display()
    );
    Ok(())
}

fn cmd_pipeline(matches: &ArgMatches) -> Result<()> {
    let config = build_config(matches)?;
    let records = run_pipeline(&config)?;
    for r in &records {
        let sampler = r.sampler.map(|s| s.name().to_string()).unwrap_or_else(|| "baseline".into());
        println!(
            "{sampler} ratio {} seed {}: train {:.2}s, eval {:.2}s",
            r.ratio, r.seed, r.train_seconds, r.evaluate_seconds
        );
    }
    println!("report -> {}", config.workdir.join("report.csv").display());
    Ok(())
}

fn cmd_report(matches: &ArgMatches) -> Result<()> {
    let config = build_config(matches)?;
    let report = report_stage(&config.workdir)?;
    println!(
        "{} rows, {} summary cells, {} runs skipped -> {}",
        report.rows.len(),
        report.summary.len(),
        report.skipped_runs,
        config.workdir.join("report.csv").display()
    );
    Ok(())
}

fn parse_flag<T: std::str::FromStr>(matches: &ArgMatches, name: &str) -> Result<T> {
    let raw = matches.get_one::<String>(name).unwrap();
    raw.parse()
        .map_err(|_| Error::validation(format!("invalid value {raw:?} for --{name}")))
}

fn run() -> Result<()> {
    let matches = cli().get_matches();
    match matches.subcommand().expect("subcommand required") {
        ("ingest", m) => cmd_ingest(m),
        ("split", m) => cmd_split(m),
        ("sample", m) => cmd_sample(m),
        ("fidelity", m) => cmd_fidelity(m),
        ("train", m) => cmd_train(m),
        ("evaluate", m) => cmd_evaluate(m),
        ("pipeline", m) => cmd_pipeline(m),
        ("report", m) => cmd_report(m),
        _ => unreachable!(),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
