//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 internal error. Every output file is written to a temporary sibling and
//! renamed into place, so a failed command leaves no partial files.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::aggregation::{
    ablation_grid, extract_all, AblationConfig, FeatureSchema, WindowFeatures,
};
use crate::data::{
    load_dataset, read_cache_file, synth_dataset, write_atomic, write_cache_file, write_dataset,
    Label, ModalityMask, RawWindow, SynthOptions, WINDOW_LEN,
};
use crate::error::{Error, Result};
use crate::features::FeatureOptions;
use crate::model::{confusion_matrix, macro_f1, GbtParams};
use crate::pipeline::{final_model, run_ablation, vote, FinalFlags, ModelBundle, PipelineOptions};

#[derive(Debug, Parser)]
#[command(
    name = "locomode",
    version,
    about = "Transportation-mode recognition with one missing sensor modality"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset in the SHL text layout.
    Synth(SynthArgs),
    /// Write per-mask feature matrices and schema files.
    Extract(ExtractArgs),
    /// Train a model bundle.
    Train(TrainArgs),
    /// Predict one label per window by fold majority vote.
    Predict(PredictArgs),
    /// Macro F1 and per-mask confusion matrices.
    Evaluate(EvaluateArgs),
    /// Train and score a list of feature configurations.
    Ablate(AblateArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 600)]
    pub windows: usize,
    #[arg(long, default_value_t = 3)]
    pub classes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Zero one random modality per window.
    #[arg(long)]
    pub masked: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Dataset directory (SHL text layout) or window cache file.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "rot_inv_stat2+smv+smv_dt2")]
    pub config: String,
    /// Accept data without a label file.
    #[arg(long)]
    pub no_labels: bool,
    #[arg(long)]
    pub no_znorm: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Clone)]
pub struct TrainingFlags {
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub iterations: usize,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long)]
    pub min_samples_leaf: Option<usize>,
    /// Turn off z-normalisation before the spectral features.
    #[arg(long)]
    pub no_znorm: bool,
}

impl TrainingFlags {
    fn options(&self) -> Result<PipelineOptions> {
        let d = GbtParams::default();
        let params = GbtParams {
            n_iterations: self.iterations,
            learning_rate: self.learning_rate.unwrap_or(d.learning_rate),
            max_depth: self.max_depth.unwrap_or(d.max_depth),
            min_samples_leaf: self.min_samples_leaf.unwrap_or(d.min_samples_leaf),
            seed: self.seed,
            ..d
        };
        params.validate().map_err(|e| usage(e.to_string()))?;
        if self.k < 2 {
            return Err(usage(format!("--k must be at least 2, got {}", self.k)));
        }
        Ok(PipelineOptions {
            k: self.k,
            seed: self.seed,
            params,
            features: FeatureOptions {
                znorm: !self.no_znorm,
            },
        })
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Validation data, used only with --include-validation.
    #[arg(long)]
    pub val: Option<PathBuf>,
    #[arg(long, default_value = "rot_inv_stat2+smv+smv_dt2")]
    pub config: String,
    #[command(flatten)]
    pub training: TrainingFlags,
    #[arg(long)]
    pub exclude_hand: bool,
    #[arg(long)]
    pub include_validation: bool,
    /// Output bundle file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Raw windows to classify.
    #[arg(
        long,
        conflicts_with = "features",
        required_unless_present = "features"
    )]
    pub data: Option<PathBuf>,
    /// Directory written by `extract` instead of raw windows.
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Repeat each label 500 times per line, like the SHL label files.
    #[arg(long)]
    pub per_sample: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Labelled windows.
    #[arg(long)]
    pub data: PathBuf,
    /// Bundle to evaluate by majority vote.
    #[arg(
        long,
        conflicts_with = "predictions",
        required_unless_present = "predictions"
    )]
    pub model: Option<PathBuf>,
    /// Label file from `predict` (one id per line, or 500 per line).
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// Output directory for the JSON summary.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub val: Option<PathBuf>,
    /// Comma-separated configurations, or `all` for the full 18-row grid.
    #[arg(long, default_value = "all")]
    pub configs: String,
    #[command(flatten)]
    pub training: TrainingFlags,
    #[arg(long)]
    pub out: PathBuf,
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Config {
        input: "command line".into(),
        reason: msg.into(),
    }
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } => 1,
        Error::Parse { .. }
        | Error::Shape(_)
        | Error::AmbiguousMask(_)
        | Error::Schema(_)
        | Error::Validation(_)
        | Error::Format { .. }
        | Error::Io { .. } => 2,
    }
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => cmd_synth(&a),
        Command::Extract(a) => cmd_extract(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Predict(a) => cmd_predict(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Ablate(a) => cmd_ablate(&a),
    }
}

/// A directory in the SHL layout or a window cache file.
pub fn load_windows(path: &Path, require_labels: bool) -> Result<Vec<RawWindow>> {
    if path.is_file() {
        read_cache_file(path)
    } else {
        load_dataset(path, require_labels)
    }
}

fn parse_config(s: &str) -> Result<AblationConfig> {
    s.parse()
}

pub fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let windows = synth_dataset(&SynthOptions::new(a.windows, a.classes, a.seed).masked(a.masked))?;
    if a.out.extension().is_some_and(|e| e == "lmw") {
        write_cache_file(&a.out, &windows)?;
    } else {
        write_dataset(&a.out, &windows)?;
    }
    eprintln!("wrote {} windows to {}", windows.len(), a.out.display());
    Ok(())
}

/// File stem for a mask, e.g. `acc0`.
pub fn mask_stem(mask: ModalityMask) -> String {
    format!("{}0", mask.missing.prefix())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaFile {
    pub config: String,
    pub mask: String,
    pub hash: String,
    pub names: Vec<String>,
}

pub fn cmd_extract(a: &ExtractArgs) -> Result<()> {
    let config = parse_config(&a.config)?;
    let windows = load_windows(&a.data, !a.no_labels)?;
    let feats = extract_all(&windows, FeatureOptions { znorm: !a.no_znorm })?;
    for mask in ModalityMask::ALL {
        let schema = FeatureSchema::for_config(&config, mask);
        let rows: Vec<&WindowFeatures> = feats.iter().filter(|w| w.supports(mask)).collect();
        let mut csv = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["window_id".to_string(), "label".to_string()];
        header.extend(schema.names().iter().cloned());
        csv_err(csv.write_record(&header))?;
        for w in rows {
            let mut rec = vec![
                w.window_id.to_string(),
                w.label.map_or(0, |l| l.id()).to_string(),
            ];
            rec.extend(w.assemble(&config, mask)?.iter().map(|v| v.to_string()));
            csv_err(csv.write_record(&rec))?;
        }
        let bytes = csv
            .into_inner()
            .map_err(|e| Error::Validation(e.to_string()))?;
        let stem = mask_stem(mask);
        write_atomic(&a.out.join(format!("features_{stem}.csv")), &bytes)?;
        let file = SchemaFile {
            config: config.to_string(),
            mask: mask.to_string(),
            hash: format!("{:016x}", schema.hash()),
            names: schema.names().to_vec(),
        };
        let json = serde_json::to_string_pretty(&file).expect("schema serialises");
        write_atomic(&a.out.join(format!("schema_{stem}.json")), json.as_bytes())?;
    }
    eprintln!(
        "wrote features for {} windows to {}",
        feats.len(),
        a.out.display()
    );
    Ok(())
}

fn csv_err<T>(r: csv::Result<T>) -> Result<T> {
    r.map_err(|e| Error::Validation(format!("csv: {e}")))
}

/// Rows of one extracted mask file: `(window_id, values)`.
pub type FeatureRows = Vec<(u64, Vec<f64>)>;

pub fn read_feature_file(
    dir: &Path,
    mask: ModalityMask,
) -> Result<Option<(FeatureSchema, FeatureRows)>> {
    let stem = mask_stem(mask);
    let schema_path = dir.join(format!("schema_{stem}.json"));
    let csv_path = dir.join(format!("features_{stem}.csv"));
    if !schema_path.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(&schema_path).map_err(|e| Error::io(&schema_path, e))?;
    let file: SchemaFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: schema_path.clone(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let schema = FeatureSchema::new(file.names);
    if format!("{:016x}", schema.hash()) != file.hash {
        return Err(Error::Schema(format!(
            "{}: hash does not match names",
            schema_path.display()
        )));
    }
    let mut reader = csv::Reader::from_path(&csv_path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(&csv_path, io),
        other => Error::Validation(format!("{other:?}")),
    })?;
    let header = csv_err(reader.headers())?.clone();
    let names: Vec<&str> = header.iter().skip(2).collect();
    if names.len() != schema.len() || names.iter().zip(schema.names()).any(|(a, b)| *a != b) {
        return Err(Error::Schema(format!(
            "{}: header does not match schema",
            csv_path.display()
        )));
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = csv_err(rec)?;
        let bad = |message: String| Error::Parse {
            path: csv_path.clone(),
            line: i + 2,
            message,
        };
        let id: u64 = rec[0]
            .parse()
            .map_err(|_| bad(format!("invalid window id `{}`", &rec[0])))?;
        let values = rec
            .iter()
            .skip(2)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| bad(format!("invalid number `{v}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push((id, values));
    }
    Ok(Some((schema, rows)))
}

pub fn cmd_train(a: &TrainArgs) -> Result<()> {
    let config = parse_config(&a.config)?;
    let opts = a.training.options()?;
    if a.include_validation && a.val.is_none() {
        return Err(usage("--include-validation needs --val"));
    }
    let train = extract_all(&load_windows(&a.data, true)?, opts.features)?;
    let val = match (&a.val, a.include_validation) {
        (Some(v), true) => extract_all(&load_windows(v, true)?, opts.features)?,
        _ => Vec::new(),
    };
    let flags = FinalFlags {
        exclude_hand: a.exclude_hand,
        include_validation: a.include_validation,
    };
    let bundle = final_model(&train, &val, &config, flags, &opts)?;
    bundle.save(&a.out)?;
    eprintln!(
        "trained {} models ({} features per mask) -> {}",
        bundle.model_count(),
        config.length(),
        a.out.display()
    );
    Ok(())
}

fn label_lines(labels: &[u8], per_sample: bool) -> String {
    let mut out = String::new();
    for &l in labels {
        if per_sample {
            let row: Vec<String> = std::iter::repeat_n(l.to_string(), WINDOW_LEN).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        } else {
            let _ = writeln!(out, "{l}");
        }
    }
    out
}

pub fn cmd_predict(a: &PredictArgs) -> Result<()> {
    let bundle = ModelBundle::load(&a.model)?;
    let labels: Vec<u8> = if let Some(data) = &a.data {
        let feats = extract_all(&load_windows(data, false)?, bundle.features)?;
        bundle.predict_mv(&feats)?.iter().map(|p| p.label).collect()
    } else {
        let dir = a
            .features
            .as_ref()
            .expect("clap enforces --data or --features");
        let mut pooled: BTreeMap<u64, Vec<Vec<f64>>> = BTreeMap::new();
        let mut found = false;
        for mask in ModalityMask::ALL {
            let Some((schema, rows)) = read_feature_file(dir, mask)? else {
                continue;
            };
            found = true;
            let values: Vec<Vec<f64>> = rows.iter().map(|(_, v)| v.clone()).collect();
            for ((id, _), p) in rows
                .iter()
                .zip(bundle.fold_probas_rows(mask, &schema, &values)?)
            {
                pooled.entry(*id).or_default().extend(p);
            }
        }
        if !found {
            return Err(Error::io(
                dir.join("schema_acc0.json"),
                std::io::Error::new(std::io::ErrorKind::NotFound, "no extracted feature files"),
            ));
        }
        pooled
            .values()
            .map(|p| vote(p, &bundle.classes))
            .collect::<Result<_>>()?
    };
    write_atomic(&a.out, label_lines(&labels, a.per_sample).as_bytes())?;
    eprintln!("wrote {} predictions to {}", labels.len(), a.out.display());
    Ok(())
}

/// One window label per line; lines of 500 sample labels are reduced by
/// majority.
pub fn read_predictions(path: &Path) -> Result<Vec<u8>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let ids = l
                .split_whitespace()
                .map(|t| t.parse::<u8>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .ok()
                .filter(|ids| ids.len() == 1 || ids.len() == WINDOW_LEN);
            ids.and_then(|ids| crate::data::majority_label(&ids))
                .map(Label::id)
                .ok_or_else(|| Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: "expected one label id or 500 sample ids".into(),
                })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PredictionScore {
    n_windows: usize,
    macro_f1: f64,
    confusion: crate::model::ConfusionMatrix,
}

pub fn cmd_evaluate(a: &EvaluateArgs) -> Result<()> {
    let windows = load_windows(&a.data, true)?;
    let json = if let Some(model) = &a.model {
        let bundle = ModelBundle::load(model)?;
        let eval = bundle.evaluate(&extract_all(&windows, bundle.features)?)?;
        println!(
            "macro_f1\t{}",
            eval.macro_f1.map_or("NA".into(), |f| format!("{f:.4}"))
        );
        for m in &eval.per_mask {
            println!("{}\t{:.4}\t{} windows", m.mask, m.macro_f1, m.n_windows);
        }
        serde_json::to_string_pretty(&eval).expect("evaluation serialises")
    } else {
        let path = a
            .predictions
            .as_ref()
            .expect("clap enforces --model or --predictions");
        let pred = read_predictions(path)?;
        let truth: Vec<u8> = windows
            .iter()
            .map(|w| w.label.map_or(0, |l| l.id()))
            .collect();
        if pred.len() != truth.len() {
            return Err(Error::Shape(format!(
                "{} predictions for {} windows",
                pred.len(),
                truth.len()
            )));
        }
        let classes: Vec<u8> = truth
            .iter()
            .chain(&pred)
            .copied()
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        let score = PredictionScore {
            n_windows: truth.len(),
            macro_f1: macro_f1(&truth, &pred, &classes)?,
            confusion: confusion_matrix(&truth, &pred, &classes)?,
        };
        println!("macro_f1\t{:.4}", score.macro_f1);
        serde_json::to_string_pretty(&score).expect("score serialises")
    };
    if let Some(out) = &a.out {
        write_atomic(&out.join("evaluation.json"), json.as_bytes())?;
    }
    Ok(())
}

pub fn cmd_ablate(a: &AblateArgs) -> Result<()> {
    let configs: Vec<AblationConfig> = if a.configs.trim() == "all" {
        ablation_grid()
    } else {
        a.configs
            .split(',')
            .map(|s| parse_config(s.trim()))
            .collect::<Result<_>>()?
    };
    let opts = a.training.options()?;
    let train = extract_all(&load_windows(&a.data, true)?, opts.features)?;
    let val = match &a.val {
        Some(v) => extract_all(&load_windows(v, true)?, opts.features)?,
        None => Vec::new(),
    };
    let report = run_ablation(&train, &val, &configs, &opts)?;
    print!("{}", report.to_tsv());
    report.write(&a.out)?;
    Ok(())
}
