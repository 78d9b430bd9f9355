//! The `soundmix` command line.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 numeric failure during training.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::features::FeatureConfig;
use crate::metrics::{classification_report, EvalReport};
use crate::mixer::{MixMode, MixSpec};
use crate::model::{load_checkpoint, save_checkpoint};
use crate::pipeline::{
    discover_pool, featurize_dir, load_corpus, read_corpus_metadata, render_mixes, Predictor,
    Preprocess, RunConfig,
};
use crate::trainer::{self, split_dataset, split_dataset_stratified, EpochRecord, ProgressSink, Split};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

pub const MANIFEST_FILE: &str = "run_manifest.json";
pub const THREADS_ENV: &str = "SOUNDMIX_THREADS";

#[derive(Parser, Debug)]
#[command(name = "soundmix", version, about = "Multilabel sound classification from Mel spectrograms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Fixed3,
    Variable,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FeatureArg {
    Melspec,
    Mfcc,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SubsetArg {
    All,
    Test,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Mix pool segments into a multilabel corpus.
    Mix {
        #[arg(long)]
        pool: PathBuf,
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 10)]
        folds: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Fewest components in variable mode.
        #[arg(long, default_value_t = 1)]
        min: usize,
        /// Most components in variable mode.
        #[arg(long, default_value_t = 4)]
        max: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract log-Mel or MFCC features from every WAV under a directory.
    Featurize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        feature: FeatureArg,
        #[arg(long)]
        out: PathBuf,
        /// Also write grayscale PNG renderings.
        #[arg(long)]
        png: bool,
    },
    /// Train a model and write a checkpoint and per-epoch history.
    Train {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        meta: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        quiet: bool,
    },
    /// Score a checkpoint against labelled features.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        meta: PathBuf,
        /// Defaults to an `eval` directory beside the checkpoint.
        #[arg(long)]
        out: Option<PathBuf>,
        /// `test` scores only the held-out split recorded at training time.
        #[arg(long, value_enum, default_value_t = SubsetArg::All)]
        subset: SubsetArg,
    },
    /// Per-class probabilities for one WAV file.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        wav: PathBuf,
        /// CSV of plot data; an SVG chart is written beside it.
        #[arg(long)]
        plot_out: Option<PathBuf>,
    },
    /// Render a pool of synthetic sound classes.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        per_class: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Summarize a metadata file.
    Inspect {
        #[arg(long)]
        meta: PathBuf,
    },
}

#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    argv: Vec<String>,
    config_path: Option<String>,
    seed: Option<u64>,
    inputs: Vec<String>,
    output_dir: String,
    version: &'static str,
    timestamp_unix: u64,
}

fn write_manifest(
    dir: &Path,
    command: &str,
    argv: &[String],
    config_path: Option<&Path>,
    seed: Option<u64>,
    inputs: &[&Path],
) -> Result<()> {
    let manifest = RunManifest {
        command,
        argv: argv.to_vec(),
        config_path: config_path.map(|p| p.display().to_string()),
        seed,
        inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
        output_dir: dir.display().to_string(),
        version: env!("CARGO_PKG_VERSION"),
        timestamp_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
    };
    let path = dir.join(MANIFEST_FILE);
    std::fs::write(&path, serde_json::to_vec_pretty(&manifest)?).map_err(|e| Error::io(&path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Maps an error to its process exit code.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_numeric() {
        EXIT_NUMERIC
    } else if matches!(e, Error::InvalidConfig(_)) {
        EXIT_USAGE
    } else {
        EXIT_DATA
    }
}

/// Caps rayon's pool at `SOUNDMIX_THREADS` when set.
pub fn init_threads() {
    if let Some(n) = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        // A pool already built by an earlier call keeps its size.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

/// Parses `argv` (program name first) and runs the command.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    init_threads();
    let argv: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match dispatch(cli.command, &argv) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("soundmix: error: {e}");
            exit_code(&e)
        }
    }
}

struct StderrProgress;

impl ProgressSink for StderrProgress {
    fn on_epoch(&mut self, r: &EpochRecord) {
        eprintln!(
            "epoch {:>3}  train_loss {:.5}  val_loss {:.5}  val_acc {:.2}%  val_macro_f1 {:.4}",
            r.epoch, r.train_loss, r.val_loss, r.val_accuracy, r.val_macro_f1
        );
    }
}

fn dispatch(command: Command, argv: &[String]) -> Result<()> {
    match command {
        Command::Mix {
            pool,
            mode,
            count,
            folds,
            seed,
            min,
            max,
            out,
        } => {
            let pool_data = discover_pool(&pool)?;
            let mode = match mode {
                ModeArg::Fixed3 => MixMode::FIXED3,
                ModeArg::Variable => MixMode::Variable { min, max },
            };
            let spec = MixSpec {
                mode,
                total_samples: count,
                num_folds: folds,
                rng_seed: seed,
                class_count: pool_data.class_names.len(),
            };
            spec.validate()?;
            create_dir(&out)?;
            let records = render_mixes(&pool_data, &spec, &out)?;
            write_manifest(&out, "mix", argv, None, Some(seed), &[&pool])?;
            println!("wrote {} mixtures to {}", records.len(), out.display());
            Ok(())
        }
        Command::Featurize {
            input,
            feature,
            out,
            png,
        } => {
            let cfg = match feature {
                FeatureArg::Melspec => FeatureConfig::log_mel(),
                FeatureArg::Mfcc => FeatureConfig::mfcc(),
            };
            create_dir(&out)?;
            let n = featurize_dir(&input, &out, &cfg, png)?;
            write_manifest(&out, "featurize", argv, None, None, &[&input])?;
            println!("wrote {n} feature files to {}", out.display());
            Ok(())
        }
        Command::Train {
            features,
            meta,
            config,
            out,
            quiet,
        } => {
            let run_cfg = RunConfig::load(&config)?;
            create_dir(&out)?;
            let summary = train_command(&features, &meta, &run_cfg, &out, quiet)?;
            write_manifest(
                &out,
                "train",
                argv,
                Some(&config),
                Some(run_cfg.train.seed),
                &[&features, &meta],
            )?;
            println!("{summary}");
            Ok(())
        }
        Command::Eval {
            checkpoint,
            features,
            meta,
            out,
            subset,
        } => {
            let out = out.unwrap_or_else(|| {
                checkpoint
                    .parent()
                    .unwrap_or_else(|| Path::new("."))
                    .join("eval")
            });
            create_dir(&out)?;
            let text = eval_command(&checkpoint, &features, &meta, &out, subset)?;
            write_manifest(&out, "eval", argv, None, None, &[&checkpoint, &features, &meta])?;
            print!("{text}");
            Ok(())
        }
        Command::Predict {
            checkpoint,
            wav,
            plot_out,
        } => {
            let predictor = Predictor::load(&checkpoint)?;
            let probs = predictor.predict_wav(&wav)?;
            let rows = plot_rows(&predictor.preprocess, &probs);
            for r in &rows {
                println!(
                    "{}\t{:.6}{}",
                    r.class_name,
                    r.probability,
                    if r.above_threshold { "\tdetected" } else { "" }
                );
            }
            if let Some(path) = plot_out {
                if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                    create_dir(dir)?;
                }
                write_plot_csv(&rows, &path)?;
                let svg = path.with_extension("svg");
                std::fs::write(&svg, render_svg(&rows, predictor.preprocess.threshold))
                    .map_err(|e| Error::io(&svg, e))?;
                let dir = path
                    .parent()
                    .filter(|d| !d.as_os_str().is_empty())
                    .unwrap_or_else(|| Path::new("."));
                write_manifest(dir, "predict", argv, None, None, &[&checkpoint, &wav])?;
            }
            Ok(())
        }
        Command::Synth {
            out,
            per_class,
            seed,
        } => {
            create_dir(&out)?;
            let recs = crate::synth::write_pool(&out, per_class, seed)?;
            let names: Vec<String> = crate::synth::SynthClass::ALL
                .iter()
                .map(|c| c.name().to_string())
                .collect();
            crate::pipeline::write_class_names(&out, &names)?;
            write_manifest(&out, "synth", argv, None, Some(seed), &[])?;
            println!("wrote {} segments to {}", recs.len(), out.display());
            Ok(())
        }
        Command::Inspect { meta } => {
            let (table, names) = read_corpus_metadata(&meta)?;
            let s = table.summary();
            println!("schema      {:?}", s.schema);
            println!("rows        {}", s.num_rows);
            println!("classes     {}", s.num_classes);
            println!(
                "folds       {}",
                s.folds.iter().map(u32::to_string).collect::<Vec<_>>().join(",")
            );
            for (c, n) in &s.per_class {
                println!("  {c:>3} {:<24} {n}", names.get(*c).map_or("", String::as_str));
            }
            Ok(())
        }
    }
}

fn train_command(features: &Path, meta: &Path, run_cfg: &RunConfig, out: &Path, quiet: bool) -> Result<String> {
    let (table, names) = read_corpus_metadata(meta)?;
    let m = &run_cfg.model;
    let corpus = load_corpus(features, &table, names, m.input_height, m.input_width)?;
    let tc = &run_cfg.train;
    let split = if tc.stratified {
        split_dataset_stratified(&table.label_matrix(), tc)?
    } else {
        split_dataset(corpus.len(), tc)?
    };
    let stats = corpus.fit_stats(&split.train)?;
    let data = corpus.to_dataset(&stats)?;
    let model_cfg = m.to_config(corpus.labels.cols());

    let outcome = if quiet {
        trainer::train(&data, &split, &model_cfg, tc, &mut trainer::Silent)?
    } else {
        trainer::train(&data, &split, &model_cfg, tc, &mut StderrProgress)?
    };

    let preprocess = Preprocess {
        feature: FeatureConfig::for_kind(corpus.kind),
        input_height: m.input_height,
        input_width: m.input_width,
        stats,
        class_names: corpus.class_names.clone(),
        threshold: tc.threshold,
    };
    let mut extra = preprocess.to_extra();
    extra["split"] = serde_json::to_value(&split)?;
    extra["best_epoch"] = outcome.best_epoch.into();
    extra["metadata_rows"] = corpus.len().into();
    save_checkpoint(&out.join("model.ckpt"), &outcome.params, &extra)?;
    trainer::write_history(&outcome.history, &out.join("history.jsonl"))?;
    let split_path = out.join("split.json");
    std::fs::write(&split_path, serde_json::to_vec(&split)?).map_err(|e| Error::io(&split_path, e))?;

    let mut summary = format!(
        "trained {} epochs, best epoch {} (val loss {:.5})",
        outcome.history.len(),
        outcome.best_epoch,
        outcome.history[outcome.best_epoch - 1].val_loss
    );
    if !split.test.is_empty() {
        let report = trainer::evaluate(&outcome.params, &data, &split.test, tc.threshold)?;
        let rendered = write_report(&report, &corpus.class_names, out)?;
        let _ = write!(
            summary,
            "\ntest: element-wise accuracy {:.2}%, macro F1 {:.4}\n{}",
            report.elementwise_accuracy, report.macro_f1, rendered
        );
    }
    Ok(summary)
}

fn write_report(report: &EvalReport, names: &[String], out: &Path) -> Result<String> {
    let rendered = classification_report(report, names)?;
    for (name, body) in [("report.csv", &rendered.csv), ("report.txt", &rendered.text)] {
        let p = out.join(name);
        std::fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
    }
    Ok(rendered.text)
}

fn eval_command(checkpoint: &Path, features: &Path, meta: &Path, out: &Path, subset: SubsetArg) -> Result<String> {
    let (params, extra) = load_checkpoint(checkpoint, None)?;
    let pre = Preprocess::from_extra(&extra)?;
    let (table, _) = read_corpus_metadata(meta)?;
    if table.num_classes > params.config().num_classes {
        return Err(Error::LabelOutOfRange {
            class_id: table.num_classes - 1,
            num_classes: params.config().num_classes,
        });
    }
    let mut table = table;
    table.num_classes = params.config().num_classes;
    let corpus = load_corpus(features, &table, pre.class_names.clone(), pre.input_height, pre.input_width)?;
    if corpus.kind != pre.feature.kind {
        return Err(Error::FeatureFile(format!(
            "checkpoint expects {:?} features, directory holds {:?}",
            pre.feature.kind, corpus.kind
        )));
    }
    let data = corpus.to_dataset(&pre.stats)?;
    let idx: Vec<usize> = match subset {
        SubsetArg::All => (0..data.len()).collect(),
        SubsetArg::Test => {
            let split: Split = serde_json::from_value(extra.get("split").cloned().unwrap_or_default())
                .map_err(|_| Error::Checkpoint("checkpoint records no split".into()))?;
            let rows = extra.get("metadata_rows").and_then(|v| v.as_u64());
            if rows != Some(data.len() as u64) {
                return Err(Error::LengthMismatch {
                    expected: rows.unwrap_or(0) as usize,
                    got: data.len(),
                });
            }
            split.test
        }
    };
    let report = trainer::evaluate(&params, &data, &idx, pre.threshold)?;
    write_report(&report, &pre.class_names, out)
}

/// One bar of the prediction chart.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotRow {
    pub class_name: String,
    pub probability: f64,
    pub log10_probability: f64,
    pub above_threshold: bool,
}

pub fn plot_rows(pre: &Preprocess, probs: &[f64]) -> Vec<PlotRow> {
    pre.class_names
        .iter()
        .zip(probs)
        .map(|(name, &p)| PlotRow {
            class_name: name.clone(),
            probability: p,
            log10_probability: p.log10(),
            above_threshold: p >= pre.threshold,
        })
        .collect()
}

fn write_plot_csv(rows: &[PlotRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["class_name", "probability", "log10_probability", "above_threshold"])?;
    for r in rows {
        w.write_record([
            r.class_name.clone(),
            format!("{:.6e}", r.probability),
            format!("{:.6}", r.log10_probability),
            r.above_threshold.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Horizontal bars on a log10 axis; detected classes in orange, the
/// threshold as a dashed line.
pub fn render_svg(rows: &[PlotRow], threshold: f64) -> String {
    let floor = rows
        .iter()
        .map(|r| r.log10_probability)
        .fold(threshold.log10(), f64::min)
        .floor()
        .clamp(-12.0, -1.0);
    let (left, width, bar_h, top) = (170.0, 420.0, 22.0, 40.0);
    let height = top + bar_h * rows.len() as f64 + 40.0;
    let x_of = |lg: f64| left + width * ((lg.max(floor) - floor) / -floor);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{height}" font-family="sans-serif" font-size="12">"#,
        left + width + 30.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{left}" y="20">Predicted classes (log10 probability)</text>"#
    );
    for (i, r) in rows.iter().enumerate() {
        let y = top + bar_h * i as f64;
        let colour = if r.above_threshold { "#f28e2b" } else { "#4e79a7" };
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            left - 6.0,
            y + bar_h * 0.65,
            xml_escape(&r.class_name)
        );
        let _ = writeln!(
            s,
            r#"<rect x="{left}" y="{}" width="{:.2}" height="{}" fill="{colour}"/>"#,
            y + 3.0,
            x_of(r.log10_probability) - left,
            bar_h - 6.0
        );
    }
    let tx = x_of(threshold.log10());
    let bottom = top + bar_h * rows.len() as f64;
    let _ = writeln!(
        s,
        r#"<line x1="{tx:.2}" y1="{}" x2="{tx:.2}" y2="{bottom}" stroke="black" stroke-dasharray="5,4"/>"#,
        top - 4.0
    );
    for k in (floor as i64)..=0 {
        let x = x_of(k as f64);
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{}" text-anchor="middle">1e{k}</text>"#,
            bottom + 18.0
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_subcommand_is_a_usage_error() {
        assert_eq!(run(["soundmix", "frobnicate"]), EXIT_USAGE);
        assert_eq!(run(["soundmix"]), EXIT_USAGE);
        assert_eq!(run(["soundmix", "mix", "--pool"]), EXIT_USAGE);
    }

    #[test]
    fn missing_inputs_are_data_errors() {
        let dir = tempfile::tempdir().unwrap();
        let code = run([
            "soundmix".into(),
            "inspect".into(),
            "--meta".into(),
            dir.path().join("absent.csv").into_os_string(),
        ]);
        assert_eq!(code, EXIT_DATA);
    }

    #[test]
    fn numeric_errors_map_to_three() {
        assert_eq!(exit_code(&Error::NonFiniteLoss { epoch: 1, batch: 2 }), EXIT_NUMERIC);
        assert_eq!(exit_code(&Error::InvalidConfig("x".into())), EXIT_USAGE);
        assert_eq!(exit_code(&Error::EmptySplit), EXIT_DATA);
    }

    #[test]
    fn plot_rows_flag_threshold_inclusively() {
        let pre = Preprocess {
            feature: FeatureConfig::log_mel(),
            input_height: 8,
            input_width: 8,
            stats: crate::features::FeatureStats { mean: 0.0, std: 1.0 },
            class_names: vec!["a".into(), "b".into(), "c<d".into()],
            threshold: 0.5,
        };
        let rows = plot_rows(&pre, &[0.5, 0.01, 0.9]);
        assert_eq!(
            rows.iter().map(|r| r.above_threshold).collect::<Vec<_>>(),
            vec![true, false, true]
        );
        assert!((rows[1].log10_probability + 2.0).abs() < 1e-12);
        let svg = render_svg(&rows, 0.5);
        assert_eq!(svg.matches("<rect").count(), 3);
        assert_eq!(svg.matches("#f28e2b").count(), 2);
        assert!(svg.contains("c&lt;d"));
        assert!(svg.contains("stroke-dasharray"));
    }
}
