//! The `gccvit` command line.
//!
//! Exit codes: 0 on success, 1 for internal or numeric failures, 2 for bad
//! input (missing files, malformed configs or containers, usage errors).

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::chromatic::{gcc_image, gcc_stats, Grouping};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::model::{Classifier, Provenance};
use crate::model_io::{decode_image, load_dataset, load_model, save_model, IngestReport, LoadedModel};
use crate::quantize::{compare, quantize_model};
use crate::training::{evaluate, stratified_split, train, Dataset, EvalReport};

#[derive(Debug, Parser)]
#[command(name = "gccvit", version, about = "GCC + ViT leaf-disease classifier")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train on a class-per-directory image folder.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// `key = value` config file; unset keys use the defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Model container to write. History goes to `<out>.history.csv`,
        /// the held-out report to `<out>.eval.csv` and `<out>.confusion.txt`.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Override a config key, e.g. `--set train.epochs=5`. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Evaluate a model on the held-out split it was trained with.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Evaluate on every image instead of the held-out split.
        #[arg(long)]
        all: bool,
        /// Write the per-class report as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classify one image.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        image: PathBuf,
        #[arg(long, default_value_t = 5)]
        top: usize,
    },
    /// Quantize a float model to int8 weights.
    Quantize {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare a float model with its quantized version.
    Compare {
        #[arg(long = "float")]
        float_model: PathBuf,
        #[arg(long = "quant")]
        quant_model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        all: bool,
        /// Write the comparison as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-image GCC box-plot statistics by health and by class.
    GccStats {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = GroupingArg::Both)]
        grouping: GroupingArg,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GroupingArg {
    Health,
    Class,
    Both,
}

impl From<GroupingArg> for Grouping {
    fn from(g: GroupingArg) -> Self {
        match g {
            GroupingArg::Health => Grouping::Health,
            GroupingArg::Class => Grouping::Class,
            GroupingArg::Both => Grouping::Both,
        }
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .try_init();
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input_error() {
                2
            } else {
                1
            }
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Train {
            data,
            config,
            out,
            seed,
            overrides,
        } => cmd_train(&data, config.as_deref(), &out, seed, &overrides),
        Command::Evaluate {
            model,
            data,
            all,
            out,
        } => cmd_evaluate(&model, &data, all, out.as_deref()),
        Command::Predict { model, image, top } => cmd_predict(&model, &image, top),
        Command::Quantize { model, out } => cmd_quantize(&model, &out),
        Command::Compare {
            float_model,
            quant_model,
            data,
            all,
            out,
        } => cmd_compare(&float_model, &quant_model, &data, all, out.as_deref()),
        Command::GccStats {
            data,
            out,
            grouping,
        } => cmd_gcc_stats(&data, &out, grouping.into()),
    }
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// `<path><suffix>`, e.g. `model.gvsm` → `model.gvsm.history.csv`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn load_data(dir: &Path) -> Result<Dataset> {
    let (ds, report) = load_dataset(dir)?;
    warn_ingest(&report);
    log::info!(
        "{}: {} images in {} classes",
        dir.display(),
        ds.len(),
        ds.num_classes()
    );
    Ok(ds)
}

fn warn_ingest(r: &IngestReport) {
    for (what, paths) in [
        ("non-image file", &r.non_image),
        ("corrupt image", &r.corrupt),
        ("grayscale image (channel replicated)", &r.grayscale),
    ] {
        if !paths.is_empty() {
            log::warn!("{} {what}(s), e.g. {}", paths.len(), paths[0].display());
        }
    }
}

fn check_classes(model: &[String], ds: &Dataset) -> Result<()> {
    if model != ds.class_names() {
        return Err(Error::Config(format!(
            "model classes {model:?} differ from dataset classes {:?}",
            ds.class_names()
        )));
    }
    Ok(())
}

/// The held-out part of `ds` a model was trained with, or all of `ds`.
fn held_out(model: &dyn Classifier, training: Option<crate::model::TrainingRecord>, ds: Dataset, all: bool) -> Result<Dataset> {
    check_classes(model.class_names(), &ds)?;
    match training {
        Some(t) if !all => Ok(stratified_split(&ds, t.split_ratio, t.split_seed)?.1),
        _ => Ok(ds),
    }
}

fn print_report(r: &EvalReport) {
    println!(
        "accuracy {:.4}  macro precision {:.4}  macro recall {:.4}  macro F1 {:.4}  ({} images)",
        r.accuracy,
        r.macro_precision,
        r.macro_recall,
        r.macro_f1,
        r.total()
    );
}

fn cmd_train(
    data: &Path,
    config: Option<&Path>,
    out: &Path,
    seed: Option<u64>,
    overrides: &[String],
) -> Result<()> {
    let mut cfg = match config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    for o in overrides {
        cfg.set_override(o)?;
    }
    if let Some(s) = seed {
        cfg.train.seed = s;
    }
    cfg.validate()?;
    let ds = load_data(data)?;
    cfg.model.head.num_classes = ds.num_classes();
    eprint!("effective config:\n{}", cfg.to_text());

    let outcome = train(&ds, &cfg.model, &cfg.train, |e| {
        log::info!(
            "epoch {:>3}  loss {:.4}  acc {:.4}  val_loss {:.4}  val_acc {:.4}",
            e.epoch,
            e.train_loss,
            e.train_acc,
            e.val_loss.unwrap_or(f64::NAN),
            e.val_acc.unwrap_or(f64::NAN)
        );
    })?;
    let bytes = save_model(&outcome.model, out)?;
    write(&sibling(out, ".history.csv"), &outcome.history.to_csv())?;
    let report = evaluate(&outcome.model, &outcome.test)?;
    write(&sibling(out, ".eval.csv"), &report.to_csv())?;
    write(&sibling(out, ".confusion.txt"), &report.confusion_text())?;
    println!("wrote {} ({bytes} bytes)", out.display());
    print_report(&report);
    Ok(())
}

fn cmd_evaluate(model: &Path, data: &Path, all: bool, out: Option<&Path>) -> Result<()> {
    let loaded = load_model(model)?;
    let ds = load_data(data)?;
    let report = match &loaded {
        LoadedModel::Float(m) => evaluate(m, &held_out(m, m.training, ds, all)?)?,
        LoadedModel::Quantized(m) => evaluate(m, &held_out(m, m.training, ds, all)?)?,
    };
    print!("{}", report.confusion_text());
    print_report(&report);
    if let Some(out) = out {
        write(out, &report.to_csv())?;
    }
    Ok(())
}

fn cmd_predict(model: &Path, image: &Path, top: usize) -> Result<()> {
    let loaded = load_model(model)?;
    let (probs, names) = match &loaded {
        LoadedModel::Float(m) => {
            let img = decode_image(image, m.config.vit.image_size)?;
            (m.predict(&img)?, &m.class_names)
        }
        LoadedModel::Quantized(m) => {
            let img = decode_image(image, m.config.vit.image_size)?;
            (m.predict(&img)?, &m.class_names)
        }
    };
    for (k, p) in probs.top_k(top) {
        println!("{}\t{p:.6}", names[k]);
    }
    Ok(())
}

/// Seconds since the epoch, or `SOURCE_DATE_EPOCH` when set so that
/// quantized containers can be made reproducible.
fn timestamp() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or_else(|| {
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs())
        })
}

fn cmd_quantize(model: &Path, out: &Path) -> Result<()> {
    let bytes = fs::read(model).map_err(|e| Error::io(model, e))?;
    let float = crate::model_io::decode_model(&bytes)?.into_float()?;
    let sha: String = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
    let qm = quantize_model(
        &float,
        Provenance {
            source_sha256: sha,
            quantized_at: timestamp(),
        },
    )?;
    let written = save_model(&qm, out)?;
    println!(
        "wrote {} ({written} bytes, {:.3}x smaller than {} bytes)",
        out.display(),
        bytes.len() as f64 / written as f64,
        bytes.len()
    );
    Ok(())
}

fn cmd_compare(
    float_path: &Path,
    quant_path: &Path,
    data: &Path,
    all: bool,
    out: Option<&Path>,
) -> Result<()> {
    let float = load_model(float_path)?.into_float()?;
    let qm = load_model(quant_path)?.into_quantized()?;
    let test = held_out(&float, float.training, load_data(data)?, all)?;
    let report = compare(&float, &qm, &test)?;
    for (path, counted) in [(float_path, report.float_bytes), (quant_path, report.quant_bytes)] {
        let on_disk = fs::metadata(path).map_err(|e| Error::io(path, e))?.len();
        if on_disk != counted {
            log::warn!("{} is {on_disk} bytes but re-encodes to {counted}", path.display());
        }
    }
    println!("{report}");
    if let Some(out) = out {
        write(out, &report.to_csv())?;
    }
    Ok(())
}

fn cmd_gcc_stats(data: &Path, out: &Path, grouping: Grouping) -> Result<()> {
    let ds = load_data(data)?;
    let values: Vec<f64> = (0..ds.len())
        .into_par_iter()
        .map(|i| ds.original(i).map(|img| gcc_image(&img)))
        .collect::<Result<_>>()?;
    let names = ds.class_names();
    let stats = gcc_stats(
        ds.items()
            .iter()
            .zip(&values)
            .map(|(item, &v)| (names[item.label].as_str(), v)),
        names,
        grouping,
    );
    let csv = stats.to_csv();
    write(out, &csv)?;
    print!("{csv}");
    Ok(())
}
