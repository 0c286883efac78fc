//! Command-line pipeline: synthesize benchmarks, augment datasets, train
//! and evaluate the desk-scale classifier, check gradients, and run the
//! ambiguity/extremity reports.
//!
//! Every subcommand accepts `--config <file>` with `key = value` lines;
//! explicit flags override file entries. The resolved configuration is
//! echoed to stderr so runs are auditable, and all outputs are
//! deterministic under the seed. Exit codes: 0 on success, 1 on
//! validation or I/O errors, 2 on usage errors.

use std::fmt::Display;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use global_mixup::pipeline::{
    ambiguity_report, extremity_report, load_jsonl, run_augment, save_jsonl, synth, write_jsonl,
    write_traces, AmbiguityOptions, ConfigFile, SyntheticSpec,
};
use global_mixup::trainer::{
    evaluate, gradient_check, load_checkpoint, save_checkpoint, train_with_eval, TrainConfig,
};
use global_mixup::{AugmentConfig64, Dataset64, Error, LambdaMode, LossWeights};

#[derive(Parser)]
#[command(
    name = "global-mixup",
    version,
    about = "Two-stage mixup augmentation: interpolate sample pairs, then relabel overconfident virtual samples from global similarity"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic Gaussian-cluster benchmark as JSONL.
    Synth(SynthArgs),
    /// Augment a JSONL dataset with vanilla and globally relabeled examples.
    Augment(AugmentArgs),
    /// Train the linear classifier on an augmented JSONL dataset.
    Train(TrainArgs),
    /// Score a checkpoint against a JSONL dataset.
    Eval(EvalArgs),
    /// Compare analytic gradients of the mixed loss with finite differences.
    Gradcheck(GradcheckArgs),
    /// Run the ambiguity and extremity analyses on a dataset.
    Report(ReportArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Augment(args) => cmd_augment(args),
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Gradcheck(args) => cmd_gradcheck(args),
        Command::Report(args) => cmd_report(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

// ---------------------------------------------------------------------------
// config-file resolution

struct Settings {
    file: Option<ConfigFile>,
}

impl Settings {
    fn load(path: Option<&Path>, allowed: &[&str]) -> Result<Self, Error> {
        let Some(path) = path else {
            return Ok(Self { file: None });
        };
        let file = ConfigFile::load(path)?;
        for key in file.keys() {
            if !allowed.iter().any(|a| a.replace('-', "_") == key) {
                return Err(Error::Config(format!(
                    "unknown config key {key:?}; expected one of: {}",
                    allowed.join(", ")
                )));
            }
        }
        Ok(Self { file: Some(file) })
    }

    /// Flag value if given, else the config-file entry, else the default.
    fn resolve<T>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, Error>
    where
        T: FromStr,
        T::Err: Display,
    {
        if let Some(value) = flag {
            return Ok(value);
        }
        if let Some(file) = &self.file {
            if let Some(text) = file.get(key) {
                return text
                    .parse()
                    .map_err(|e| Error::Config(format!("config key {key} = {text:?}: {e}")));
            }
        }
        Ok(default)
    }
}

fn print_resolved(command: &str, entries: &[(&str, String)]) {
    eprintln!("resolved config ({command}):");
    for (key, value) in entries {
        eprintln!("  {key} = {value}");
    }
}

// ---------------------------------------------------------------------------
// synth

#[derive(Args)]
struct SynthArgs {
    /// Number of cluster classes.
    #[arg(long)]
    clusters: Option<usize>,
    /// Examples generated per cluster.
    #[arg(long)]
    per_cluster: Option<usize>,
    /// Embedding width of each token row.
    #[arg(long)]
    dims: Option<usize>,
    /// Token rows per example.
    #[arg(long)]
    rows: Option<usize>,
    /// Noise standard deviation around each center.
    #[arg(long)]
    spread: Option<f64>,
    /// Inter-center distance in units of the spread.
    #[arg(long)]
    overlap: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output JSONL path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// `key = value` file supplying any of the flags above.
    #[arg(long)]
    config: Option<PathBuf>,
}

const SYNTH_KEYS: &[&str] = &[
    "clusters",
    "per-cluster",
    "dims",
    "rows",
    "spread",
    "overlap",
    "seed",
];

fn cmd_synth(args: SynthArgs) -> Result<(), Error> {
    let settings = Settings::load(args.config.as_deref(), SYNTH_KEYS)?;
    let defaults = SyntheticSpec::default();
    let spec = SyntheticSpec {
        clusters: settings.resolve(args.clusters, "clusters", defaults.clusters)?,
        per_cluster: settings.resolve(args.per_cluster, "per-cluster", defaults.per_cluster)?,
        dims: settings.resolve(args.dims, "dims", defaults.dims)?,
        rows: settings.resolve(args.rows, "rows", defaults.rows)?,
        centers: None,
        spread: settings.resolve(args.spread, "spread", defaults.spread)?,
        overlap: settings.resolve(args.overlap, "overlap", defaults.overlap)?,
        seed: settings.resolve(args.seed, "seed", defaults.seed)?,
    };
    print_resolved(
        "synth",
        &[
            ("clusters", spec.clusters.to_string()),
            ("per-cluster", spec.per_cluster.to_string()),
            ("dims", spec.dims.to_string()),
            ("rows", spec.rows.to_string()),
            ("spread", spec.spread.to_string()),
            ("overlap", spec.overlap.to_string()),
            ("seed", spec.seed.to_string()),
        ],
    );
    let dataset: Dataset64 = synth(&spec)?;
    match &args.out {
        Some(path) => save_jsonl(dataset.examples(), path)?,
        None => write_jsonl(dataset.examples(), BufWriter::new(std::io::stdout().lock()))?,
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// augment (shared with report)

#[derive(Args)]
struct AugmentParams {
    /// Beta shape parameter for the mixing coefficient.
    #[arg(long)]
    alpha: Option<f64>,
    /// Coefficient distribution: beta or extended-uniform.
    #[arg(long)]
    lambda_mode: Option<LambdaMode>,
    /// Virtual samples generated per selected pair.
    #[arg(long)]
    t_gen: Option<usize>,
    /// Reference pool size for relabeling.
    #[arg(long)]
    t_ref: Option<usize>,
    /// Number of top similarities kept by the relabeling softmax.
    #[arg(long)]
    s: Option<usize>,
    /// Gate threshold on the max label component, in [1/c, 1].
    #[arg(long)]
    theta: Option<f64>,
    /// Similarity scale.
    #[arg(long)]
    gamma: Option<f64>,
    /// Similarity denominator guard.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Fraction of available pairs mixed per pass.
    #[arg(long)]
    pair_fraction: Option<f64>,
    /// Use the mask-weighted similarity instead of the flattened one.
    #[arg(long)]
    masked: bool,
    #[arg(long)]
    seed: Option<u64>,
}

const AUGMENT_KEYS: &[&str] = &[
    "alpha",
    "lambda-mode",
    "t-gen",
    "t-ref",
    "s",
    "theta",
    "gamma",
    "epsilon",
    "pair-fraction",
    "masked",
    "seed",
];

fn resolve_augment_config(
    params: &AugmentParams,
    settings: &Settings,
) -> Result<(AugmentConfig64, Vec<(&'static str, String)>), Error> {
    let defaults = AugmentConfig64::default();
    let config = AugmentConfig64 {
        alpha: settings.resolve(params.alpha, "alpha", defaults.alpha)?,
        lambda_mode: settings.resolve(params.lambda_mode, "lambda-mode", defaults.lambda_mode)?,
        t_gen: settings.resolve(params.t_gen, "t-gen", defaults.t_gen)?,
        t_ref: settings.resolve(params.t_ref, "t-ref", defaults.t_ref)?,
        s: settings.resolve(params.s, "s", defaults.s)?,
        theta: settings.resolve(params.theta, "theta", defaults.theta)?,
        gamma: settings.resolve(params.gamma, "gamma", defaults.gamma)?,
        epsilon: settings.resolve(params.epsilon, "epsilon", defaults.epsilon)?,
        pair_fraction: settings.resolve(
            params.pair_fraction,
            "pair-fraction",
            defaults.pair_fraction,
        )?,
        masked: if params.masked {
            true
        } else {
            settings.resolve(None, "masked", false)?
        },
        seed: settings.resolve(params.seed, "seed", defaults.seed)?,
    };
    let entries = vec![
        ("alpha", config.alpha.to_string()),
        ("lambda-mode", config.lambda_mode.to_string()),
        ("t-gen", config.t_gen.to_string()),
        ("t-ref", config.t_ref.to_string()),
        ("s", config.s.to_string()),
        ("theta", config.theta.to_string()),
        ("gamma", config.gamma.to_string()),
        ("epsilon", config.epsilon.to_string()),
        ("pair-fraction", config.pair_fraction.to_string()),
        ("masked", config.masked.to_string()),
        ("seed", config.seed.to_string()),
    ];
    Ok((config, entries))
}

#[derive(Args)]
struct AugmentArgs {
    /// Input dataset (JSONL).
    #[arg(long)]
    input: PathBuf,
    /// Write the vanilla virtual examples here.
    #[arg(long)]
    vanilla_out: Option<PathBuf>,
    /// Write the globally relabeled examples here.
    #[arg(long)]
    global_out: Option<PathBuf>,
    /// Write originals + vanilla + global as one training file.
    #[arg(long)]
    combined_out: Option<PathBuf>,
    /// Write per-sample similarity reports (JSONL) here.
    #[arg(long)]
    report_out: Option<PathBuf>,
    /// Skip the relabeling stage entirely.
    #[arg(long)]
    no_global: bool,
    #[command(flatten)]
    params: AugmentParams,
    /// `key = value` file supplying any of the hyperparameters.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn cmd_augment(args: AugmentArgs) -> Result<(), Error> {
    let settings = Settings::load(args.config.as_deref(), AUGMENT_KEYS)?;
    let (config, mut entries) = resolve_augment_config(&args.params, &settings)?;
    let enable_global = !args.no_global;
    if !enable_global && (args.global_out.is_some() || args.report_out.is_some()) {
        return Err(Error::Config(
            "--no-global cannot be combined with --global-out or --report-out".into(),
        ));
    }
    if args.vanilla_out.is_none()
        && args.global_out.is_none()
        && args.combined_out.is_none()
        && args.report_out.is_none()
    {
        return Err(Error::Config(
            "no output requested; pass at least one of --vanilla-out, --global-out, --combined-out, --report-out".into(),
        ));
    }
    entries.insert(0, ("input", args.input.display().to_string()));
    entries.push(("global-stage", enable_global.to_string()));
    print_resolved("augment", &entries);

    let dataset: Dataset64 = load_jsonl(&args.input)?;
    let outcome = run_augment(&dataset, &config, enable_global)?;
    eprintln!(
        "augmented: {} vanilla, {} global from {} originals",
        outcome.vanilla.len(),
        outcome.global.len(),
        dataset.len()
    );

    if let Some(path) = &args.vanilla_out {
        save_jsonl(&outcome.vanilla_examples(), path)?;
    }
    if let Some(path) = &args.global_out {
        save_jsonl(&outcome.global, path)?;
    }
    if let Some(path) = &args.combined_out {
        save_jsonl(&outcome.combined(&dataset), path)?;
    }
    if let Some(path) = &args.report_out {
        write_traces(&outcome.traces, path)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// train

#[derive(Args)]
struct TrainArgs {
    /// Training dataset (JSONL), typically an augment --combined-out file.
    #[arg(long)]
    input: PathBuf,
    /// Optional held-out dataset scored after every epoch.
    #[arg(long)]
    eval: Option<PathBuf>,
    /// Where to write the trained model.
    #[arg(long)]
    checkpoint_out: PathBuf,
    /// Where to write per-epoch metrics (JSONL).
    #[arg(long)]
    metrics_out: Option<PathBuf>,
    /// Weight of the original-population loss term.
    #[arg(long)]
    delta: Option<f64>,
    /// Weight of the vanilla-population loss term.
    #[arg(long)]
    tau: Option<f64>,
    /// Weight of the global-population loss term.
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// `key = value` file supplying any of the hyperparameters.
    #[arg(long)]
    config: Option<PathBuf>,
}

const TRAIN_KEYS: &[&str] = &[
    "delta",
    "tau",
    "eta",
    "learning-rate",
    "epochs",
    "batch-size",
    "seed",
];

fn cmd_train(args: TrainArgs) -> Result<(), Error> {
    let settings = Settings::load(args.config.as_deref(), TRAIN_KEYS)?;
    let defaults = TrainConfig::<f64>::default();
    let config = TrainConfig {
        loss_weights: LossWeights {
            delta: settings.resolve(args.delta, "delta", defaults.loss_weights.delta)?,
            tau: settings.resolve(args.tau, "tau", defaults.loss_weights.tau)?,
            eta: settings.resolve(args.eta, "eta", defaults.loss_weights.eta)?,
        },
        learning_rate: settings.resolve(
            args.learning_rate,
            "learning-rate",
            defaults.learning_rate,
        )?,
        epochs: settings.resolve(args.epochs, "epochs", defaults.epochs)?,
        batch_size: settings.resolve(args.batch_size, "batch-size", defaults.batch_size)?,
        seed: settings.resolve(args.seed, "seed", defaults.seed)?,
    };
    print_resolved(
        "train",
        &[
            ("input", args.input.display().to_string()),
            ("delta", config.loss_weights.delta.to_string()),
            ("tau", config.loss_weights.tau.to_string()),
            ("eta", config.loss_weights.eta.to_string()),
            ("learning-rate", config.learning_rate.to_string()),
            ("epochs", config.epochs.to_string()),
            ("batch-size", config.batch_size.to_string()),
            ("seed", config.seed.to_string()),
        ],
    );

    let dataset: Dataset64 = load_jsonl(&args.input)?;
    let eval_set: Option<Dataset64> = match &args.eval {
        Some(path) => Some(load_jsonl(path)?),
        None => None,
    };
    let (model, records) = train_with_eval(&dataset, eval_set.as_ref(), &config)?;
    save_checkpoint(&model, &args.checkpoint_out)?;
    if let Some(path) = &args.metrics_out {
        let mut out = BufWriter::new(std::fs::File::create(path)?);
        for record in &records {
            serde_json::to_writer(&mut out, record).map_err(|e| Error::Io(e.into()))?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
    }
    if let Some(last) = records.last() {
        eprintln!(
            "trained {} epochs; final {} accuracy {:.4}",
            config.epochs, last.split, last.accuracy
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// eval

#[derive(Args)]
struct EvalArgs {
    /// Model checkpoint written by train.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Dataset to score (JSONL).
    #[arg(long)]
    input: PathBuf,
}

fn cmd_eval(args: EvalArgs) -> Result<(), Error> {
    print_resolved(
        "eval",
        &[
            ("checkpoint", args.checkpoint.display().to_string()),
            ("input", args.input.display().to_string()),
        ],
    );
    let model = load_checkpoint::<f64>(&args.checkpoint)?;
    let dataset: Dataset64 = load_jsonl(&args.input)?;
    let accuracy = evaluate(&model, &dataset)?;
    println!("accuracy {accuracy}");
    Ok(())
}

// ---------------------------------------------------------------------------
// gradcheck

#[derive(Args)]
struct GradcheckArgs {
    /// Number of random (model, batch) instances.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// `key = value` file supplying any of the flags above.
    #[arg(long)]
    config: Option<PathBuf>,
}

const GRADCHECK_KEYS: &[&str] = &["trials", "seed"];
const GRADCHECK_BOUND: f64 = 1e-4;

fn cmd_gradcheck(args: GradcheckArgs) -> Result<(), Error> {
    let settings = Settings::load(args.config.as_deref(), GRADCHECK_KEYS)?;
    let trials = settings.resolve(args.trials, "trials", 20)?;
    let seed = settings.resolve(args.seed, "seed", 0)?;
    print_resolved(
        "gradcheck",
        &[
            ("trials", trials.to_string()),
            ("seed", seed.to_string()),
        ],
    );
    let check = gradient_check(trials, seed)?;
    println!(
        "max relative error {:e} over {} trials",
        check.max_relative_error, check.trials
    );
    if check.max_relative_error < GRADCHECK_BOUND {
        println!("gradcheck passed (bound {GRADCHECK_BOUND:e})");
        Ok(())
    } else {
        Err(Error::Config(format!(
            "gradcheck failed: max relative error {:e} is not below {GRADCHECK_BOUND:e}",
            check.max_relative_error
        )))
    }
}

// ---------------------------------------------------------------------------
// report

#[derive(Args)]
struct ReportArgs {
    /// Input dataset (JSONL).
    #[arg(long)]
    input: PathBuf,
    /// Coincident pair-of-pairs constructions to attempt.
    #[arg(long)]
    pairs: Option<usize>,
    /// Matrix-distance tolerance for counting virtuals as coincident.
    #[arg(long)]
    midpoint_tolerance: Option<f64>,
    /// Output path for the JSON report; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    params: AugmentParams,
    /// `key = value` file supplying any of the hyperparameters.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Serialize)]
struct CombinedReport {
    ambiguity: global_mixup::pipeline::AmbiguityReport,
    extremity: Option<global_mixup::pipeline::ExtremityReport>,
}

fn report_keys() -> Vec<&'static str> {
    let mut keys = AUGMENT_KEYS.to_vec();
    keys.extend(["pairs", "midpoint-tolerance"]);
    keys
}

fn cmd_report(args: ReportArgs) -> Result<(), Error> {
    let settings = Settings::load(args.config.as_deref(), &report_keys())?;
    let (config, mut entries) = resolve_augment_config(&args.params, &settings)?;
    let default_options = AmbiguityOptions::default();
    let options = AmbiguityOptions {
        pairs: settings.resolve(args.pairs, "pairs", default_options.pairs)?,
        tolerance: settings.resolve(
            args.midpoint_tolerance,
            "midpoint-tolerance",
            default_options.tolerance,
        )?,
        seed: config.seed,
    };
    entries.insert(0, ("input", args.input.display().to_string()));
    entries.push(("pairs", options.pairs.to_string()));
    entries.push(("midpoint-tolerance", options.tolerance.to_string()));
    print_resolved("report", &entries);

    let dataset: Dataset64 = load_jsonl(&args.input)?;
    let ambiguity = ambiguity_report(&dataset, &config, &options)?;
    if ambiguity.warning {
        eprintln!(
            "warning: only {} of {} coincident constructions found",
            ambiguity.pairs_found, ambiguity.requested_pairs
        );
    }

    let outcome = run_augment(&dataset, &config, true)?;
    let extremity = if outcome.global.is_empty() {
        eprintln!("warning: no examples passed the gate; extremity report skipped");
        None
    } else {
        Some(extremity_report(
            &outcome.vanilla_examples(),
            &outcome.global,
        )?)
    };

    let combined = CombinedReport {
        ambiguity,
        extremity,
    };
    let json =
        serde_json::to_string_pretty(&combined).map_err(|e| Error::Config(e.to_string()))?;
    match &args.out {
        Some(path) => {
            let mut out = BufWriter::new(std::fs::File::create(path)?);
            out.write_all(json.as_bytes())?;
            out.write_all(b"\n")?;
            out.flush()?;
        }
        None => println!("{json}"),
    }
    Ok(())
}
