//! Command-line pipeline driver: audit a classifier for group bias, train a
//! conditional generator for the flagged groups, synthesize and mix in new
//! rows, retrain, and compare. One subcommand per process; every artifact
//! carries the tool version, seed, and configuration hash.

mod artifacts;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use artifacts::{
    load_classifier_artifact, load_gan_artifact, write_sidecar, AnalyzeArtifact,
    ClassifierArtifact, EvalArtifact, GanArtifact, RunMeta,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use fairgen::artifact::{atomic_write, svg_bar_chart, write_json};
use fairgen::bias::{self, BiasReport};
use fairgen::cgan::{GanCheckpoint, GanHyper, GanState, TrainAlgorithm};
use fairgen::classifier::{train_classifier, ClassifierCheckpoint, ClassifierConfig};
use fairgen::dataset::{AugmentationPlan, DatasetTable, GroupPredicate, PlanEntry, Schema};
use fairgen::numerics::SeededRng;
use fairgen::{Error, Result};
use serde::Serialize;

const DEFAULT_SEED: u64 = 42;

#[derive(Parser)]
#[command(
    name = "fairgen",
    version,
    about = "Audit tabular classifiers for group bias and rebalance training data with a conditional generator"
)]
struct Cli {
    /// Seed for every stochastic step (falls back to FAIRGEN_SEED, then 42).
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Audit a classifier's predictions per population group.
    Analyze(AnalyzeArgs),
    /// Train a conditional generator for one group.
    TrainGan(TrainGanArgs),
    /// Sample synthetic rows from a trained generator.
    Generate(GenerateArgs),
    /// Mix synthetic rows into a table, per-group by fraction.
    Augment(AugmentArgs),
    /// Train the reference classifier on a table.
    TrainClf(TrainClfArgs),
    /// Repeat train/test runs and report accuracy with confidence intervals.
    Evaluate(EvaluateArgs),
    /// Write a full audit bundle: report, summary table, histograms.
    Report(ReportArgs),
}

/// Classifier settings shared by the training-capable subcommands; unset
/// flags inherit the library defaults.
#[derive(Args)]
struct ClfOpts {
    /// Training epoch budget.
    #[arg(long)]
    epochs: Option<usize>,
    /// SGD learning rate.
    #[arg(long)]
    lr: Option<f64>,
    /// SGD momentum.
    #[arg(long)]
    momentum: Option<f64>,
    /// Minibatch size.
    #[arg(long)]
    batch_size: Option<usize>,
    /// Fraction of training rows held out for early stopping.
    #[arg(long)]
    val_fraction: Option<f64>,
    /// Epochs without validation improvement before stopping.
    #[arg(long)]
    patience: Option<usize>,
}

impl ClfOpts {
    fn config(&self, hidden_units: Option<usize>, seed: u64) -> ClassifierConfig {
        let d = ClassifierConfig::default();
        ClassifierConfig {
            hidden_units: hidden_units.unwrap_or(d.hidden_units),
            epochs: self.epochs.unwrap_or(d.epochs),
            lr: self.lr.unwrap_or(d.lr),
            momentum: self.momentum.unwrap_or(d.momentum),
            batch_size: self.batch_size.unwrap_or(d.batch_size),
            val_fraction: self.val_fraction.unwrap_or(d.val_fraction),
            patience: self.patience.unwrap_or(d.patience),
            seed,
        }
    }
}

#[derive(Args)]
struct AnalyzeArgs {
    /// CSV table to audit.
    #[arg(long)]
    data: PathBuf,
    /// Schema JSON describing the table.
    #[arg(long)]
    schema: PathBuf,
    /// Report output path (JSON).
    #[arg(long)]
    out: PathBuf,
    /// Largest tolerated shortfall behind the best group before flagging.
    #[arg(long, default_value_t = bias::DEFAULT_GAP_THRESHOLD)]
    gap_threshold: f64,
    /// Score with this classifier checkpoint instead of training one.
    #[arg(long)]
    classifier: Option<PathBuf>,
    /// Table to train the internal classifier on (defaults to --data).
    #[arg(long)]
    train_data: Option<PathBuf>,
    /// Hidden units per layer for the internal classifier.
    #[arg(long)]
    hidden_units: Option<usize>,
    #[command(flatten)]
    clf: ClfOpts,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum AlgorithmOpt {
    /// Adversarial objective plus the density-target penalty.
    PrimalDual,
    /// Adversarial objective only.
    Standard,
}

impl From<AlgorithmOpt> for TrainAlgorithm {
    fn from(opt: AlgorithmOpt) -> TrainAlgorithm {
        match opt {
            AlgorithmOpt::PrimalDual => TrainAlgorithm::PrimalDual,
            AlgorithmOpt::Standard => TrainAlgorithm::Standard,
        }
    }
}

#[derive(Args)]
struct TrainGanArgs {
    /// CSV table holding the real rows.
    #[arg(long)]
    data: PathBuf,
    /// Schema JSON describing the table.
    #[arg(long)]
    schema: PathBuf,
    /// Group to synthesize, e.g. "sex=Female" or "sex=Female,race=Black".
    #[arg(long)]
    group: String,
    /// Generator checkpoint output path (JSON).
    #[arg(long)]
    out: PathBuf,
    /// Optional per-round diagnostics CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Training rounds.
    #[arg(long)]
    rounds: Option<usize>,
    /// Real samples per round.
    #[arg(long)]
    n1: Option<usize>,
    /// Noise samples per round.
    #[arg(long)]
    n2: Option<usize>,
    /// Discriminator ascent steps per round.
    #[arg(long)]
    k_steps: Option<usize>,
    /// Dual step size for the density targets.
    #[arg(long)]
    beta: Option<f64>,
    /// Kernel bandwidth (measured from the data when unset).
    #[arg(long)]
    sigma: Option<f64>,
    /// Width of the generator's noise input.
    #[arg(long)]
    noise_dim: Option<usize>,
    /// Hidden layer width for both networks.
    #[arg(long)]
    hidden_units: Option<usize>,
    /// Generator learning rate.
    #[arg(long)]
    lr_gen: Option<f64>,
    /// Discriminator learning rate.
    #[arg(long)]
    lr_dis: Option<f64>,
    /// Gumbel-Softmax temperature for categorical outputs.
    #[arg(long)]
    temperature: Option<f64>,
    /// Use the normalized Gaussian kernel in the density penalty.
    #[arg(long)]
    normalized_kernel: bool,
    /// Training objective.
    #[arg(long, value_enum, default_value_t = AlgorithmOpt::PrimalDual)]
    algorithm: AlgorithmOpt,
}

impl TrainGanArgs {
    fn hyper(&self) -> GanHyper {
        let d = GanHyper::default();
        GanHyper {
            n1: self.n1.unwrap_or(d.n1),
            n2: self.n2.unwrap_or(d.n2),
            k_steps: self.k_steps.unwrap_or(d.k_steps),
            beta: self.beta.unwrap_or(d.beta),
            sigma: self.sigma.or(d.sigma),
            epsilon_rounds: self.rounds.unwrap_or(d.epsilon_rounds),
            noise_dim: self.noise_dim.unwrap_or(d.noise_dim),
            hidden_units: self.hidden_units.unwrap_or(d.hidden_units),
            lr_gen: self.lr_gen.unwrap_or(d.lr_gen),
            lr_dis: self.lr_dis.unwrap_or(d.lr_dis),
            temperature: self.temperature.unwrap_or(d.temperature),
            kernel_normalized: self.normalized_kernel || d.kernel_normalized,
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    /// Generator checkpoint from train-gan.
    #[arg(long)]
    gan: PathBuf,
    /// Number of rows to synthesize.
    #[arg(long)]
    count: usize,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AugmentArgs {
    /// CSV table to extend.
    #[arg(long)]
    data: PathBuf,
    /// Schema JSON describing both tables.
    #[arg(long)]
    schema: PathBuf,
    /// CSV pool of synthetic rows (from generate).
    #[arg(long)]
    pool: PathBuf,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Group to augment; repeat with a matching --fraction.
    #[arg(long = "group")]
    groups: Vec<String>,
    /// Rows to add as a fraction of the group's original count; pairs with
    /// --group by position.
    #[arg(long = "fraction")]
    fractions: Vec<f64>,
}

#[derive(Args)]
struct TrainClfArgs {
    /// CSV table to train on.
    #[arg(long)]
    data: PathBuf,
    /// Schema JSON describing the table.
    #[arg(long)]
    schema: PathBuf,
    /// Classifier checkpoint output path (JSON).
    #[arg(long)]
    out: PathBuf,
    /// Hidden units per layer (three layers).
    #[arg(long)]
    hidden_units: Option<usize>,
    #[command(flatten)]
    clf: ClfOpts,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Training table (CSV).
    #[arg(long)]
    train: PathBuf,
    /// Held-out test table (CSV).
    #[arg(long)]
    test: PathBuf,
    /// Schema JSON describing both tables.
    #[arg(long)]
    schema: PathBuf,
    /// Results output path (JSON).
    #[arg(long)]
    out: PathBuf,
    /// Training repetitions per setting (seeds seed..seed+repeats-1).
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    /// Comma-separated hidden-layer widths to sweep.
    #[arg(long, value_delimiter = ',', default_value = "300")]
    hidden_units: Vec<usize>,
    /// Optional summary table CSV; cells hold "mean ± half-width" percents.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Row label for the CSV summary.
    #[arg(long, default_value = "run")]
    label: String,
    #[command(flatten)]
    clf: ClfOpts,
}

#[derive(Args)]
struct ReportArgs {
    /// CSV table to audit.
    #[arg(long)]
    data: PathBuf,
    /// Schema JSON describing the table.
    #[arg(long)]
    schema: PathBuf,
    /// Classifier checkpoint to audit.
    #[arg(long)]
    classifier: PathBuf,
    /// Directory for the report bundle.
    #[arg(long)]
    out_dir: PathBuf,
    /// Largest tolerated shortfall behind the best group before flagging.
    #[arg(long, default_value_t = bias::DEFAULT_GAP_THRESHOLD)]
    gap_threshold: f64,
    /// Also render SVG histograms per group.
    #[arg(long)]
    plot: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 64,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("fairgen: error: {}", err.to_string().replace('\n', "; "));
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let seed = resolve_seed(cli.seed)?;
    match cli.command {
        Command::Analyze(args) => cmd_analyze(args, seed),
        Command::TrainGan(args) => cmd_train_gan(args, seed),
        Command::Generate(args) => cmd_generate(args, seed),
        Command::Augment(args) => cmd_augment(args, seed),
        Command::TrainClf(args) => cmd_train_clf(args, seed),
        Command::Evaluate(args) => cmd_evaluate(args, seed),
        Command::Report(args) => cmd_report(args, seed),
    }
}

fn resolve_seed(flag: Option<u64>) -> Result<u64> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match std::env::var("FAIRGEN_SEED") {
        Ok(text) => text.trim().parse::<u64>().map_err(|_| Error::InvalidParam {
            name: "FAIRGEN_SEED",
            reason: format!("must be an unsigned integer, got \"{text}\""),
        }),
        Err(std::env::VarError::NotPresent) => Ok(DEFAULT_SEED),
        Err(std::env::VarError::NotUnicode(_)) => Err(Error::InvalidParam {
            name: "FAIRGEN_SEED",
            reason: "must be valid UTF-8".into(),
        }),
    }
}

/// Prefixes a load error with the offending path so the one-line CLI error
/// names the file instead of just the underlying cause.
fn with_file<T>(result: Result<T>, path: &Path) -> Result<T> {
    result.map_err(|e| Error::Usage(format!("{}: {e}", path.display())))
}

fn load_schema(path: &Path) -> Result<Schema> {
    with_file(Schema::load(path), path)
}

fn load_table(data: &Path, schema: &Schema) -> Result<DatasetTable> {
    with_file(DatasetTable::load_csv(data, schema), data)
}

/// Loads a classifier checkpoint and refuses to score tables whose schema
/// differs from the one it was trained against.
fn load_checked_classifier(
    path: &Path,
    schema: &Schema,
) -> Result<fairgen::classifier::TrainedClassifier> {
    let clf = with_file(load_classifier_artifact(path), path)?;
    let trained_digest = clf.encoder().schema().digest();
    let data_digest = schema.digest();
    if trained_digest != data_digest {
        return Err(Error::Usage(format!(
            "classifier was trained against a different schema (digest {trained_digest} vs {data_digest})"
        )));
    }
    Ok(clf)
}

fn announce(path: &Path) {
    println!("wrote {}", path.display());
}

#[derive(Serialize)]
struct AnalyzeEcho<'a> {
    command: &'static str,
    data: &'a Path,
    schema: &'a Path,
    gap_threshold: f64,
    classifier: Option<&'a Path>,
    train_data: Option<&'a Path>,
    classifier_config: Option<&'a ClassifierConfig>,
}

fn cmd_analyze(args: AnalyzeArgs, seed: u64) -> Result<()> {
    let schema = load_schema(&args.schema)?;
    let table = load_table(&args.data, &schema)?;

    let (clf, config) = match &args.classifier {
        Some(path) => (load_checked_classifier(path, &schema)?, None),
        None => {
            let config = args.clf.config(args.hidden_units, seed);
            let train = match &args.train_data {
                Some(path) => load_table(path, &schema)?,
                None => table.clone(),
            };
            (train_classifier(&train, &config)?, Some(config))
        }
    };

    let report = bias::analyze(clf.model(), clf.encoder(), &table, args.gap_threshold)?;
    let meta = RunMeta::new(
        seed,
        &AnalyzeEcho {
            command: "analyze",
            data: &args.data,
            schema: &args.schema,
            gap_threshold: args.gap_threshold,
            classifier: args.classifier.as_deref(),
            train_data: args.train_data.as_deref(),
            classifier_config: config.as_ref(),
        },
    )?;
    let flagged: Vec<String> =
        report.flagged_groups().iter().map(|g| g.to_string()).collect();
    write_json(&args.out, &AnalyzeArtifact { meta, report })?;
    announce(&args.out);
    if flagged.is_empty() {
        println!("no groups flagged at gap threshold {}", args.gap_threshold);
    } else {
        println!("flagged: {}", flagged.join(", "));
    }
    Ok(())
}

#[derive(Serialize)]
struct TrainGanEcho<'a> {
    command: &'static str,
    data: &'a Path,
    schema: &'a Path,
    group: &'a str,
    hyper: &'a GanHyper,
    algorithm: TrainAlgorithm,
}

fn cmd_train_gan(args: TrainGanArgs, seed: u64) -> Result<()> {
    let schema = load_schema(&args.schema)?;
    let table = load_table(&args.data, &schema)?;
    let group: GroupPredicate = args.group.parse()?;
    let hyper = args.hyper();
    let algorithm: TrainAlgorithm = args.algorithm.into();

    let meta = RunMeta::new(
        seed,
        &TrainGanEcho {
            command: "train-gan",
            data: &args.data,
            schema: &args.schema,
            group: &args.group,
            hyper: &hyper,
            algorithm,
        },
    )?;

    let mut state = GanState::new(&table, group, hyper, algorithm, seed)?;
    let trace = state.train()?;
    write_json(
        &args.out,
        &GanArtifact { meta: meta.clone(), checkpoint: GanCheckpoint::from_state(&state) },
    )?;
    announce(&args.out);
    if let Some(trace_path) = &args.trace {
        trace.save_csv(trace_path)?;
        announce(trace_path);
        announce(&write_sidecar(trace_path, &meta)?);
    }
    Ok(())
}

#[derive(Serialize)]
struct GenerateEcho<'a> {
    command: &'static str,
    gan: &'a Path,
    count: usize,
}

fn cmd_generate(args: GenerateArgs, seed: u64) -> Result<()> {
    let state = with_file(load_gan_artifact(&args.gan), &args.gan)?;
    let mut rng = SeededRng::new(seed);
    let synth = state.generate(args.count, &mut rng)?;
    let meta = RunMeta::new(
        seed,
        &GenerateEcho { command: "generate", gan: &args.gan, count: args.count },
    )?;
    synth.save_csv(&args.out)?;
    announce(&args.out);
    announce(&write_sidecar(&args.out, &meta)?);
    Ok(())
}

#[derive(Serialize)]
struct AugmentEcho<'a> {
    command: &'static str,
    data: &'a Path,
    schema: &'a Path,
    pool: &'a Path,
    groups: &'a [String],
    fractions: &'a [f64],
}

fn cmd_augment(args: AugmentArgs, seed: u64) -> Result<()> {
    if args.groups.len() != args.fractions.len() {
        return Err(Error::InvalidParam {
            name: "fraction",
            reason: format!(
                "{} --group flags but {} --fraction flags; they pair by position",
                args.groups.len(),
                args.fractions.len()
            ),
        });
    }
    let schema = load_schema(&args.schema)?;
    let table = load_table(&args.data, &schema)?;
    let pool = load_table(&args.pool, &schema)?;

    let mut entries = Vec::with_capacity(args.groups.len());
    for (group, &fraction) in args.groups.iter().zip(&args.fractions) {
        entries.push(PlanEntry { group: group.parse()?, fraction });
    }
    let out_table = table.augment(&pool, &AugmentationPlan { entries })?;

    let meta = RunMeta::new(
        seed,
        &AugmentEcho {
            command: "augment",
            data: &args.data,
            schema: &args.schema,
            pool: &args.pool,
            groups: &args.groups,
            fractions: &args.fractions,
        },
    )?;
    out_table.save_csv(&args.out)?;
    announce(&args.out);
    announce(&write_sidecar(&args.out, &meta)?);
    println!(
        "added {} synthetic rows ({} -> {})",
        out_table.n_rows() - table.n_rows(),
        table.n_rows(),
        out_table.n_rows()
    );
    Ok(())
}

#[derive(Serialize)]
struct TrainClfEcho<'a> {
    command: &'static str,
    data: &'a Path,
    schema: &'a Path,
    config: &'a ClassifierConfig,
}

fn cmd_train_clf(args: TrainClfArgs, seed: u64) -> Result<()> {
    let schema = load_schema(&args.schema)?;
    let table = load_table(&args.data, &schema)?;
    let config = args.clf.config(args.hidden_units, seed);
    let meta = RunMeta::new(
        seed,
        &TrainClfEcho { command: "train-clf", data: &args.data, schema: &args.schema, config: &config },
    )?;
    let clf = train_classifier(&table, &config)?;
    match clf.best_val_accuracy() {
        Some(acc) => {
            println!("trained {} epochs, best validation accuracy {acc:.4}", clf.epochs_run());
        }
        None => println!("trained {} epochs", clf.epochs_run()),
    }
    write_json(
        &args.out,
        &ClassifierArtifact { meta, checkpoint: ClassifierCheckpoint::from_classifier(&clf, seed) },
    )?;
    announce(&args.out);
    Ok(())
}

#[derive(Serialize)]
struct EvaluateEcho<'a> {
    command: &'static str,
    train: &'a Path,
    test: &'a Path,
    schema: &'a Path,
    repeats: usize,
    hidden_units: &'a [usize],
    config: &'a ClassifierConfig,
    label: &'a str,
}

/// Escapes one CSV cell: quotes it when it holds a comma, quote, or newline.
fn csv_cell(text: &str) -> String {
    if text.contains(',') || text.contains('"') || text.contains('\n') {
        format!("\"{}\"", text.replace('"', "\"\""))
    } else {
        text.to_owned()
    }
}

fn cmd_evaluate(args: EvaluateArgs, seed: u64) -> Result<()> {
    let schema = load_schema(&args.schema)?;
    let train = load_table(&args.train, &schema)?;
    let test = load_table(&args.test, &schema)?;
    let config = args.clf.config(None, seed);

    let results =
        fairgen::classifier::evaluate_sweep(&train, &test, &config, &args.hidden_units, args.repeats)?;

    let meta = RunMeta::new(
        seed,
        &EvaluateEcho {
            command: "evaluate",
            train: &args.train,
            test: &args.test,
            schema: &args.schema,
            repeats: args.repeats,
            hidden_units: &args.hidden_units,
            config: &config,
            label: &args.label,
        },
    )?;

    if let Some(csv_path) = &args.csv {
        let single = results.len() == 1;
        let mut lines = Vec::with_capacity(results.len() + 1);
        let mut header = vec!["run".to_owned(), "overall".to_owned()];
        if let Some(first) = results.first() {
            header.extend(first.groups.iter().map(|g| csv_cell(&g.group.to_string())));
        }
        lines.push(header.join(","));
        for result in &results {
            let name = if single {
                args.label.clone()
            } else {
                format!("{} (h={})", args.label, result.hidden_units)
            };
            let mut cells = vec![
                csv_cell(&name),
                format!("{:.1} ± {:.2}", result.overall.mean * 100.0, result.overall.ci_half_width * 100.0),
            ];
            cells.extend(result.groups.iter().map(|g| {
                format!("{:.1} ± {:.2}", g.accuracy.mean * 100.0, g.accuracy.ci_half_width * 100.0)
            }));
            lines.push(cells.join(","));
        }
        let mut text = lines.join("\n");
        text.push('\n');
        atomic_write(csv_path, text.as_bytes())?;
        announce(csv_path);
        announce(&write_sidecar(csv_path, &meta)?);
    }

    write_json(&args.out, &EvalArtifact { meta, results })?;
    announce(&args.out);
    Ok(())
}

#[derive(Serialize)]
struct ReportEcho<'a> {
    command: &'static str,
    data: &'a Path,
    schema: &'a Path,
    classifier: &'a Path,
    gap_threshold: f64,
    plot: bool,
}

/// File-name-safe rendering of a group predicate.
fn sanitize(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect()
}

fn write_summary_csv(path: &Path, report: &BiasReport) -> Result<()> {
    let mut lines = Vec::with_capacity(report.groups.len() + 1);
    lines.push("group,rows,mean_predicted_positive,accuracy,ci_half_width,flagged".to_owned());
    for group in &report.groups {
        let flagged = report.flags.iter().any(|f| f.group == group.group);
        lines.push(format!(
            "{},{},{:.6},{:.6},{:.6},{}",
            csv_cell(&group.group.to_string()),
            group.rows,
            group.mean_predicted_positive,
            group.accuracy.accuracy,
            group.accuracy.ci_half_width,
            if flagged { "yes" } else { "no" }
        ));
    }
    let mut text = lines.join("\n");
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

fn cmd_report(args: ReportArgs, seed: u64) -> Result<()> {
    let schema = load_schema(&args.schema)?;
    let table = load_table(&args.data, &schema)?;
    let clf = load_checked_classifier(&args.classifier, &schema)?;
    let report = bias::analyze(clf.model(), clf.encoder(), &table, args.gap_threshold)?;

    let meta = RunMeta::new(
        seed,
        &ReportEcho {
            command: "report",
            data: &args.data,
            schema: &args.schema,
            classifier: &args.classifier,
            gap_threshold: args.gap_threshold,
            plot: args.plot,
        },
    )?;

    let dir = &args.out_dir;
    let summary = dir.join("summary.csv");
    write_summary_csv(&summary, &report)?;
    announce(&summary);

    for group in &report.groups {
        let stem = sanitize(&group.group.to_string());
        let hist_path = dir.join(format!("hist_{stem}.csv"));
        group.histogram.save_csv(&hist_path)?;
        announce(&hist_path);
        if args.plot {
            let bars: Vec<(String, f64)> = group
                .histogram
                .normalized
                .iter()
                .enumerate()
                .map(|(i, &v)| (format!("{:.1}-{:.1}", i as f64 / 10.0, (i + 1) as f64 / 10.0), v))
                .collect();
            let svg = svg_bar_chart(&group.group.to_string(), &bars);
            let svg_path = dir.join(format!("hist_{stem}.svg"));
            atomic_write(&svg_path, svg.as_bytes())?;
            announce(&svg_path);
        }
    }

    let report_path = dir.join("report.json");
    write_json(&report_path, &AnalyzeArtifact { meta: meta.clone(), report })?;
    announce(&report_path);
    let meta_path = dir.join("meta.json");
    write_json(&meta_path, &meta)?;
    announce(&meta_path);
    Ok(())
}
