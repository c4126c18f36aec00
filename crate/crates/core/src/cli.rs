//! Command-line surface. `run` returns the process exit code: 0 on success,
//! 1 for usage or configuration errors, 2 for data errors, 3 for numeric
//! failure during training.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::data::{self, BackgroundMode, Corpus, CorpusSpec};
use crate::diversity::{layer_report, reports_to_csv};
use crate::error::{Error, Result};
use crate::harness::{
    self, evaluate, metrics_to_csv, sweep_privileged, Split, TrainConfig, TrainOutputs,
};
use crate::model::{parse_key_values, GoCnnModel};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Checkpoint and metrics names inside a `train --out-dir`.
pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const METRICS_FILE: &str = "metrics.csv";

#[derive(Parser, Debug)]
#[command(
    name = "gocnn",
    version,
    about = "Group orthogonal CNN experiments on a synthetic corpus"
)]
struct Cli {
    /// Seed for generation, initialization and shuffling.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// `key = value` file; its entries override command-line flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a synthetic shapes-on-textures corpus.
    Generate(GenerateArgs),
    /// Train a model, writing the best checkpoint and per-epoch metrics.
    Train(TrainArgs),
    /// Evaluate every head of a checkpoint.
    Eval(EvalArgs),
    /// Privileged-fraction sweep with a vanilla baseline row.
    Sweep(SweepArgs),
    /// Correlation-based diversity of each conv layer.
    Diversity(DiversityArgs),
    /// Group heatmaps of the final layer as PGM and CSV.
    Visualize(VisualizeArgs),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long, default_value_t = 8)]
    classes: usize,
    #[arg(long, default_value_t = 200)]
    per_class: usize,
    #[arg(long, default_value_t = 32)]
    image_size: usize,
    /// Fraction of each class that keeps its mask.
    #[arg(long, default_value_t = 1.0)]
    privileged: f64,
    /// `informative` or `noise`.
    #[arg(long, default_value = "informative")]
    background: BackgroundMode,
    #[arg(long, default_value_t = 0.5)]
    texture_mixing: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct ModelArgs {
    /// gocnn, only_fg, only_bg or vanilla.
    #[arg(long, default_value = "gocnn")]
    mode: String,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Share of each class held out for validation.
    #[arg(long, default_value_t = 1.0 / 3.0)]
    val_fraction: f64,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    /// `train` or `val`.
    #[arg(long, default_value = "val")]
    split: String,
    #[arg(long, default_value_t = 1.0 / 3.0)]
    val_fraction: f64,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0,0.2,0.4,0.6,0.8,1")]
    fractions: Vec<f64>,
    /// Defaults to the global seed.
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DiversityArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    /// 1-based conv layers; all when omitted.
    #[arg(long, value_delimiter = ',')]
    layers: Vec<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VisualizeArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 8)]
    samples: usize,
    #[arg(long)]
    out_dir: PathBuf,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Numeric(_) => EXIT_NUMERIC,
        Error::MalformedHeader(_)
        | Error::Truncated(_)
        | Error::Checksum { .. }
        | Error::Data(_)
        | Error::Io(_) => EXIT_DATA,
        Error::Shape(_) | Error::InvalidArgument(_) | Error::Config(_) => EXIT_USAGE,
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn config_entries(path: Option<&Path>) -> Result<Vec<(String, String)>> {
    match path {
        Some(p) => parse_key_values(&std::fs::read_to_string(p)?),
        None => Ok(Vec::new()),
    }
}

const CORPUS_KEYS: [&str; 6] = [
    "per_class",
    "image_size",
    "privileged",
    "background",
    "texture_mixing",
    "corpus_seed",
];

fn apply_corpus_key(spec: &mut CorpusSpec, key: &str, value: &str) -> Result<bool> {
    let bad = |e: &dyn std::fmt::Display| Error::Config(format!("`{key} = {value}`: {e}"));
    match key {
        "classes" => spec.classes = value.parse().map_err(|e| bad(&e))?,
        "per_class" => spec.per_class = value.parse().map_err(|e| bad(&e))?,
        "image_size" => spec.image_size = value.parse().map_err(|e| bad(&e))?,
        "privileged" => spec.privileged_fraction = value.parse().map_err(|e| bad(&e))?,
        "background" => spec.background = value.parse()?,
        "texture_mixing" => spec.texture_mixing = value.parse().map_err(|e| bad(&e))?,
        "seed" | "corpus_seed" => spec.seed = value.parse().map_err(|e| bad(&e))?,
        _ => return Ok(false),
    }
    Ok(true)
}

fn train_config(cli_seed: u64, config: Option<&Path>, args: &ModelArgs) -> Result<TrainConfig> {
    let mut c = TrainConfig {
        seed: cli_seed,
        ..TrainConfig::default()
    };
    c.model.variant = args.mode.parse()?;
    if let Some(v) = args.epochs {
        c.epochs = v;
    }
    if let Some(v) = args.batch_size {
        c.batch_size = v;
    }
    if let Some(v) = args.lr {
        c.lr = v;
    }
    for (k, v) in config_entries(config)? {
        if !CORPUS_KEYS.contains(&k.as_str()) {
            c.apply(&k, &v)?;
        }
    }
    c.validate()?;
    Ok(c)
}

fn load_split(path: &Path, val_fraction: f64) -> Result<(Corpus, Corpus)> {
    if !(0.0..1.0).contains(&val_fraction) || val_fraction == 0.0 {
        return Err(Error::Config(format!(
            "validation fraction must be in (0,1), got {val_fraction}"
        )));
    }
    let corpus = data::read_corpus(path)?;
    Ok(corpus.holdout(val_fraction))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    let config = cli.config.as_deref();
    match cli.command {
        Command::Generate(a) => {
            let mut spec = CorpusSpec {
                classes: a.classes,
                per_class: a.per_class,
                image_size: a.image_size,
                privileged_fraction: a.privileged,
                background: a.background,
                texture_mixing: a.texture_mixing,
                seed: cli.seed,
                flag_seed: None,
            };
            let mut probe = TrainConfig::default();
            for (k, v) in config_entries(config)? {
                if !apply_corpus_key(&mut spec, &k, &v)? {
                    probe.apply(&k, &v)?;
                }
            }
            let corpus = data::generate(&spec)?;
            data::write_corpus(&corpus, &a.out)?;
            eprintln!(
                "wrote {} records ({} privileged) to {}",
                corpus.records.len(),
                corpus.privileged_count(),
                a.out.display()
            );
        }
        Command::Train(a) => {
            let c = train_config(cli.seed, config, &a.model)?;
            let (train_set, val_set) = load_split(&a.corpus, a.model.val_fraction)?;
            std::fs::create_dir_all(&a.out_dir)?;
            let outputs = TrainOutputs {
                metrics: Some(a.out_dir.join(METRICS_FILE)),
                checkpoint: Some(a.out_dir.join(CHECKPOINT_FILE)),
            };
            let outcome = harness::train(&c, &train_set, &val_set, &outputs)?;
            eprintln!(
                "best validation top-1 {:.4} at epoch {}",
                outcome.best_val.top1_main, outcome.best_epoch
            );
        }
        Command::Eval(a) => {
            let (model, _) = GoCnnModel::load(&a.checkpoint)?;
            let (train_set, val_set) = load_split(&a.corpus, a.val_fraction)?;
            let (split, corpus) = match a.split.as_str() {
                "train" => (Split::Train, train_set),
                "val" => (Split::Val, val_set),
                other => return Err(Error::Config(format!("unknown split `{other}`"))),
            };
            let eval = evaluate(&model, &corpus, 64)?;
            emit(a.out.as_deref(), &metrics_to_csv(&eval.rows(0, split, 0.0)))?;
        }
        Command::Sweep(a) => {
            let c = train_config(cli.seed, config, &a.model)?;
            let (train_set, val_set) = load_split(&a.corpus, a.model.val_fraction)?;
            let seeds = if a.seeds.is_empty() {
                vec![c.seed]
            } else {
                a.seeds
            };
            let table = sweep_privileged(&c, &train_set, &val_set, &a.fractions, &seeds)?;
            emit(a.out.as_deref(), &table.to_csv())?;
        }
        Command::Diversity(a) => {
            let (model, _) = GoCnnModel::load(&a.checkpoint)?;
            let corpus = data::read_corpus(&a.corpus)?;
            let layers = if a.layers.is_empty() {
                (1..=model.config().architecture.conv_layers()).collect()
            } else {
                a.layers
            };
            let reports = layers
                .iter()
                .map(|&k| layer_report(&model, k, &corpus.records))
                .collect::<Result<Vec<_>>>()?;
            emit(a.out.as_deref(), &reports_to_csv(&reports))?;
        }
        Command::Visualize(a) => {
            let (model, _) = GoCnnModel::load(&a.checkpoint)?;
            let corpus = data::read_corpus(&a.corpus)?;
            let n = a.samples.min(corpus.records.len());
            let written = harness::visualize_groups(&model, &corpus.records[..n], &a.out_dir)?;
            eprintln!("wrote {} files to {}", written.len(), a.out_dir.display());
        }
    }
    Ok(())
}
