//! Command-line pipeline: split a labelled pool, value the training points, trace
//! removal curves, audit mislabels, test contingency tables and render heatmaps.
//! A synthetic-data command produces noisy fixtures with known mislabels.
//!
//! Every command writes its artifacts plus a JSON run manifest beside them. Exit codes:
//! 0 on success, 1 on I/O failures, 2 on invalid input or configuration.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use clap::{Args, Parser, Subcommand};
use datum_worth::evaluation::{self, CurveSettings, Direction, EvalSet};
use datum_worth::heatmap::{compute_heatmap, normalize_heatmap};
use datum_worth::ingest::{self, SplitSize, SplitSpec};
use datum_worth::learner::LearnerConfig;
use datum_worth::shapley::{self, Method};
use datum_worth::stats::chi_square_test;
use datum_worth::synthetic::{gaussian_classes, GaussianSpec};
use datum_worth::{Metric, ValuationConfig};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub const SEED_ENV: &str = "DATUM_WORTH_SEED";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] datum_worth::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Core(e) if e.is_io() => 1,
            _ => 2,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "datum-worth", version, about = "Data Shapley valuation and dataset audits")]
pub struct Cli {
    /// Worker threads for valuation and curve retraining (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Stratified train/validation/test split with exact class counts.
    Split(SplitArgs),
    /// Value every training point.
    Value(ValueArgs),
    /// Retrain after removing points in value order.
    Curve(CurveArgs),
    /// Count flagged points among the most, least and randomly chosen valued points.
    Audit(AuditArgs),
    /// Pearson chi-square test of independence on a contingency table.
    Chi2(Chi2Args),
    /// Class-activation heatmap from a feature-map stack and class weights.
    Heatmap(HeatmapArgs),
    /// Synthetic two-class Gaussian data with known flipped labels.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub pool: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub train_size: usize,
    #[arg(long)]
    pub train_positives: usize,
    #[arg(long)]
    pub val_size: usize,
    #[arg(long)]
    pub val_positives: usize,
    #[arg(long)]
    pub test_size: usize,
    #[arg(long)]
    pub test_positives: usize,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct LearnerArgs {
    #[arg(long, default_value_t = LearnerConfig::default().learning_rate)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = LearnerConfig::default().iterations)]
    pub iterations: usize,
    #[arg(long, default_value_t = LearnerConfig::default().l2_penalty)]
    pub l2_penalty: f64,
    /// Fit without an intercept term.
    #[arg(long)]
    pub no_intercept: bool,
}

impl LearnerArgs {
    fn config(&self) -> LearnerConfig {
        LearnerConfig {
            learning_rate: self.learning_rate,
            iterations: self.iterations,
            l2_penalty: self.l2_penalty,
            fit_intercept: !self.no_intercept,
        }
    }
}

#[derive(Debug, Args)]
pub struct ValueArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub val: PathBuf,
    /// exact, tmc, g-shapley or loo.
    #[arg(long, default_value = "tmc")]
    pub method: Method,
    /// accuracy, precision or recall.
    #[arg(long, default_value = "accuracy")]
    pub metric: Metric,
    #[arg(long, default_value_t = ValuationConfig::default().truncation_tolerance)]
    pub truncation_tolerance: f64,
    #[arg(long, default_value_t = ValuationConfig::default().convergence_threshold)]
    pub convergence_threshold: f64,
    #[arg(long, default_value_t = ValuationConfig::default().convergence_window)]
    pub convergence_window: usize,
    #[arg(long, default_value_t = ValuationConfig::default().min_permutations)]
    pub min_permutations: usize,
    #[arg(long, default_value_t = ValuationConfig::default().max_permutations)]
    pub max_permutations: usize,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = ValuationConfig::default().g_learning_rate)]
    pub g_learning_rate: f64,
    #[command(flatten)]
    pub learner: LearnerArgs,
    /// Valuation JSON output path.
    #[arg(long)]
    pub out: PathBuf,
}

impl ValueArgs {
    pub fn config(&self) -> ValuationConfig {
        ValuationConfig {
            method: self.method,
            metric: self.metric,
            truncation_tolerance: self.truncation_tolerance,
            convergence_threshold: self.convergence_threshold,
            convergence_window: self.convergence_window,
            min_permutations: self.min_permutations,
            max_permutations: self.max_permutations,
            seed: self.seed,
            g_learning_rate: self.g_learning_rate,
            learner: self.learner.config(),
        }
    }
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    #[arg(long)]
    pub train: PathBuf,
    /// Set the retrained models are scored on.
    #[arg(long)]
    pub eval: PathBuf,
    #[arg(long)]
    pub valuation: PathBuf,
    /// most, least or random.
    #[arg(long, default_value = "most")]
    pub direction: Direction,
    /// Seed for the random direction.
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    /// Fraction of the training set removed per step.
    #[arg(long, default_value_t = 0.01)]
    pub step: f64,
    /// Stop after removing this fraction of the training set.
    #[arg(long, default_value_t = 1.0)]
    pub max_fraction: f64,
    /// Recorded label for the evaluation set: test or validation.
    #[arg(long, default_value = "test")]
    pub eval_set: EvalSet,
    #[command(flatten)]
    pub learner: LearnerArgs,
    /// Curve JSON output path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    #[arg(long)]
    pub valuation: PathBuf,
    /// CSV of `id,flag` rows marking known mislabels.
    #[arg(long)]
    pub flags: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub k: usize,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct Chi2Args {
    #[arg(long)]
    pub table: PathBuf,
    /// Comma-separated row indices (0-based) of a sub-table to test.
    #[arg(long, value_delimiter = ',')]
    pub rows: Option<Vec<usize>>,
    /// Comma-separated column indices (0-based) of a sub-table to test.
    #[arg(long, value_delimiter = ',')]
    pub cols: Option<Vec<usize>>,
    /// Also write the result JSON here; it is always printed.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HeatmapArgs {
    /// Feature-map stack, CSV or binary tensor.
    #[arg(long)]
    pub stack: PathBuf,
    /// Class weights, one per map: comma/newline separated or a rank-1 tensor.
    #[arg(long)]
    pub weights: PathBuf,
    /// Min-max rescale the grid to [0, 1].
    #[arg(long)]
    pub normalize: bool,
    /// Heatmap CSV output path.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional 8-bit PGM rendering.
    #[arg(long)]
    pub pgm: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = GaussianSpec::default().n)]
    pub n: usize,
    #[arg(long, default_value_t = GaussianSpec::default().dim)]
    pub dim: usize,
    #[arg(long, default_value_t = GaussianSpec::default().separation)]
    pub separation: f64,
    #[arg(long, default_value_t = GaussianSpec::default().flip_fraction)]
    pub flip_fraction: f64,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    /// Random stream index; use distinct streams for sets sharing a seed.
    #[arg(long, default_value_t = 0)]
    pub stream: u64,
    #[arg(long, default_value = "p")]
    pub id_prefix: String,
    /// Feature CSV output path.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional `id,flag` CSV marking the flipped labels.
    #[arg(long)]
    pub flags_out: Option<PathBuf>,
}

/// Provenance record written beside every command's outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: &'static str,
    pub config: Value,
    /// SHA-256 of each input file's bytes, keyed by role.
    pub inputs: BTreeMap<&'static str, InputDigest>,
    pub seed: Option<u64>,
    pub started_at: String,
    pub finished_at: String,
    pub outputs: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

struct Run {
    command: &'static str,
    started_at: String,
    inputs: BTreeMap<&'static str, InputDigest>,
    outputs: Vec<String>,
}

impl Run {
    fn start(command: &'static str) -> Self {
        Self {
            command,
            started_at: timestamp(),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    /// Reads an input file, recording its digest.
    fn read(&mut self, role: &'static str, path: &Path) -> Result<Vec<u8>> {
        let bytes = fs::read(path).map_err(|source| CliError::Io {
            path: path.to_owned(),
            source,
        })?;
        self.inputs.insert(
            role,
            InputDigest {
                path: path.display().to_string(),
                sha256: hex::encode(Sha256::digest(&bytes)),
            },
        );
        Ok(bytes)
    }

    fn read_text(&mut self, role: &'static str, path: &Path) -> Result<String> {
        let bytes = self.read(role, path)?;
        String::from_utf8(bytes).map_err(|_| {
            CliError::Core(datum_worth::Error::Schema(format!(
                "{}: not valid UTF-8",
                path.display()
            )))
        })
    }

    fn write(&mut self, path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
        write_file(path, contents)?;
        self.outputs.push(path.display().to_string());
        Ok(())
    }

    fn finish(self, manifest_path: &Path, config: Value, seed: Option<u64>) -> Result<()> {
        let manifest = RunManifest {
            command: self.command,
            config,
            inputs: self.inputs,
            seed,
            started_at: self.started_at,
            finished_at: timestamp(),
            outputs: self.outputs,
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
        write_file(manifest_path, text)
    }
}

fn timestamp() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

/// `<output>.manifest.json`, next to the output file.
pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

fn pretty<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable") + "\n"
}

pub fn cmd_split(args: &SplitArgs) -> Result<()> {
    let mut run = Run::start("split");
    let pool = ingest::parse_dataset(run.read("pool", &args.pool)?.as_slice())?;
    let spec = SplitSpec {
        train: SplitSize { size: args.train_size, positives: args.train_positives },
        validation: SplitSize { size: args.val_size, positives: args.val_positives },
        test: SplitSize { size: args.test_size, positives: args.test_positives },
        seed: args.seed,
    };
    let split = ingest::stratified_split(&pool, &spec)?;
    fs::create_dir_all(&args.out_dir).map_err(|source| CliError::Io {
        path: args.out_dir.clone(),
        source,
    })?;
    for (name, data) in [("train.csv", &split.train), ("val.csv", &split.validation), ("test.csv", &split.test)] {
        run.write(&args.out_dir.join(name), ingest::dataset_to_csv(data))?;
    }
    println!(
        "train {} ({} positive), validation {} ({} positive), test {} ({} positive)",
        split.train.len(),
        split.train.positives(),
        split.validation.len(),
        split.validation.positives(),
        split.test.len(),
        split.test.positives()
    );
    run.finish(&args.out_dir.join("manifest.json"), json!(spec), Some(args.seed))
}

pub fn cmd_value(args: &ValueArgs) -> Result<()> {
    let mut run = Run::start("value");
    let train = ingest::parse_dataset(run.read("train", &args.train)?.as_slice())?;
    let validation = ingest::parse_dataset(run.read("validation", &args.val)?.as_slice())?;
    let config = args.config();
    let result = shapley::value(&train, &validation, &config)?;
    run.write(&args.out, ingest::valuation_to_json(&result))?;
    println!(
        "{} values for {} points; V(D) = {}, V(empty) = {}, permutations {}, converged {}",
        result.method,
        result.values.len(),
        result.full_score,
        result.empty_score,
        result.permutations_used,
        result.converged
    );
    run.finish(&manifest_path(&args.out), json!(config), Some(config.seed))
}

pub fn cmd_curve(args: &CurveArgs) -> Result<()> {
    let mut run = Run::start("curve");
    let train = ingest::parse_dataset(run.read("train", &args.train)?.as_slice())?;
    let eval = ingest::parse_dataset(run.read("eval", &args.eval)?.as_slice())?;
    let valuation = ingest::valuation_from_json(&run.read_text("valuation", &args.valuation)?)?;
    let ranking = evaluation::rank_points(&valuation, args.direction, args.seed);
    let settings = CurveSettings {
        step_fraction: args.step,
        max_fraction: args.max_fraction,
        learner: args.learner.config(),
        metrics: Metric::ALL.to_vec(),
        eval_set: args.eval_set,
    };
    let curve = evaluation::removal_curve(&train, &eval, &ranking, &settings)?;
    run.write(&args.out, ingest::curve_to_json(&curve))?;
    print!("{}", ingest::curve_table(&curve));
    let config = json!({
        "direction": args.direction,
        "step_fraction": args.step,
        "max_fraction": args.max_fraction,
        "eval_set": args.eval_set,
        "learner": settings.learner,
    });
    run.finish(&manifest_path(&args.out), config, Some(args.seed))
}

pub fn cmd_audit(args: &AuditArgs) -> Result<()> {
    let mut run = Run::start("audit");
    let valuation = ingest::valuation_from_json(&run.read_text("valuation", &args.valuation)?)?;
    let flags = ingest::parse_flags(&run.read_text("flags", &args.flags)?)?;
    let audit = evaluation::audit(&valuation, &flags, args.k, args.seed)?;
    let body = json!({ "schema_version": ingest::SCHEMA_VERSION, "audit": audit });
    run.write(&args.out, pretty(&body))?;
    println!("{}", audit.summary);
    run.finish(&manifest_path(&args.out), json!({ "k": args.k }), Some(args.seed))
}

pub fn cmd_chi2(args: &Chi2Args) -> Result<()> {
    let mut run = Run::start("chi2");
    let mut table = ingest::parse_contingency_csv(&run.read_text("table", &args.table)?)?;
    if args.rows.is_some() || args.cols.is_some() {
        let (r, c) = table.shape();
        let rows = args.rows.clone().unwrap_or_else(|| (0..r).collect());
        let cols = args.cols.clone().unwrap_or_else(|| (0..c).collect());
        table = table.sub_table(&rows, &cols)?;
    }
    let result = chi_square_test(&table)?;
    let body = pretty(&json!({
        "schema_version": ingest::SCHEMA_VERSION,
        "rows": table.row_labels,
        "cols": table.col_labels,
        "result": result,
    }));
    print!("{body}");
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(out) = &args.out {
        run.write(out, &body)?;
        let config = json!({ "rows": args.rows, "cols": args.cols });
        run.finish(&manifest_path(out), config, None)?;
    }
    Ok(())
}

pub fn cmd_heatmap(args: &HeatmapArgs) -> Result<()> {
    let mut run = Run::start("heatmap");
    let stack = ingest::parse_stack(&run.read("stack", &args.stack)?)?;
    let weights = ingest::parse_weights(&run.read("weights", &args.weights)?)?;
    let mut map = compute_heatmap(&stack, &weights)?;
    if args.normalize {
        map = normalize_heatmap(&map);
    }
    run.write(&args.out, map.to_csv())?;
    if let Some(pgm) = &args.pgm {
        run.write(pgm, map.to_pgm())?;
    }
    println!("{}x{} heatmap from {} maps", map.height, map.width, stack.maps());
    run.finish(&manifest_path(&args.out), json!({ "normalize": args.normalize }), None)
}

pub fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let mut run = Run::start("synth");
    let spec = GaussianSpec {
        n: args.n,
        dim: args.dim,
        separation: args.separation,
        flip_fraction: args.flip_fraction,
        seed: args.seed,
        stream: args.stream,
    };
    let noisy = gaussian_classes(&spec, &args.id_prefix)?;
    run.write(&args.out, ingest::dataset_to_csv(&noisy.data))?;
    if let Some(path) = &args.flags_out {
        let mut text = String::from("id,flag\n");
        for (id, &f) in noisy.data.ids().iter().zip(&noisy.flipped) {
            text.push_str(&format!("{id},{}\n", u8::from(f)));
        }
        run.write(path, text)?;
    }
    let config = json!({
        "n": spec.n,
        "dim": spec.dim,
        "separation": spec.separation,
        "flip_fraction": spec.flip_fraction,
        "stream": spec.stream,
        "id_prefix": args.id_prefix,
    });
    run.finish(&manifest_path(&args.out), config, Some(args.seed))
}

pub fn execute(cli: &Cli) -> Result<()> {
    let body = || match &cli.command {
        Command::Split(a) => cmd_split(a),
        Command::Value(a) => cmd_value(a),
        Command::Curve(a) => cmd_curve(a),
        Command::Audit(a) => cmd_audit(a),
        Command::Chi2(a) => cmd_chi2(a),
        Command::Heatmap(a) => cmd_heatmap(a),
        Command::Synth(a) => cmd_synth(a),
    };
    match cli.workers {
        Some(0) => Err(CliError::Usage("--workers must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start {n} workers: {e}")))?
            .install(body),
        None => body(),
    }
}

/// Parses `args` and runs the command, returning the process exit code.
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
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
