mod commands;
mod config;
mod data;
mod error;
mod extract;
mod output;

use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use config::{parse_assignment, DelimiterChoice, Precision, RunConfig};
use error::{CliError, CliResult};

#[derive(Parser)]
#[command(
    name = "leafnet",
    version = output::VERSION,
    about = "Leaf contour and time-series classification with a multi-branch 1D CNN",
    after_help = "Settings merge in this order: built-in defaults, --config file, --set pairs, flags.\n\
                  Run `leafnet --dump-config` to see every key.\n\n\
                  Exit codes: 0 success, 1 partial failure, 2 configuration, 3 data, 4 numeric."
)]
struct Cli {
    /// Configuration file: JSON, or `key = value` lines.
    #[arg(short, long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Override one setting by dotted key, e.g. `train.lr0=0.01` (repeatable).
    #[arg(short, long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Print the resolved configuration as JSON and exit.
    #[arg(long, global = true)]
    dump_config: bool,

    /// Floating point precision of the network.
    #[arg(long, global = true, value_enum)]
    precision: Option<Precision>,

    /// Training seed; repeated runs use seed, seed+1, ...
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Number of independent training runs.
    #[arg(long, global = true)]
    repeats: Option<usize>,

    /// Output directory (the output CSV for `extract`).
    #[arg(short, long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// More logging (-v info, -vv debug); RUST_LOG overrides.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Turn silhouettes or contour files into a contour-distance dataset.
    Extract {
        /// Directory of PGM/PBM silhouettes; class = subdirectory or `<class>_` file prefix.
        #[arg(long, value_name = "DIR", conflicts_with = "contours")]
        masks: Option<PathBuf>,
        /// Directory of `x,y` contour CSVs; class as for --masks.
        #[arg(long, value_name = "DIR")]
        contours: Option<PathBuf>,
        /// Samples per series.
        #[arg(long, short = 'n')]
        n: Option<usize>,
    },
    /// Train the network, optionally scoring a held-out test file.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
        /// Where to write the weights (default: <out>/model.lnm).
        #[arg(long, value_name = "FILE")]
        model: Option<PathBuf>,
    },
    /// Score a trained network on a dataset.
    Eval {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_name = "FILE")]
        model: Option<PathBuf>,
    },
    /// Stratified k-fold cross-validation of one or more pipelines.
    Crossval {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
        /// Number of folds.
        #[arg(long)]
        k: Option<usize>,
        /// Comma-separated pipelines: net, net+knn, net+pca+svm.
        #[arg(long, value_delimiter = ',')]
        pipeline: Vec<String>,
    },
    /// Write the penultimate-layer features of a dataset.
    Features {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_name = "FILE")]
        model: Option<PathBuf>,
    },
    /// Grad-CAM attention maps over input positions.
    Gradcam {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_name = "FILE")]
        model: Option<PathBuf>,
        /// Target class id (default: each sample's label).
        #[arg(long)]
        class: Option<usize>,
        /// Only explain this sample id (repeatable).
        #[arg(long)]
        sample: Vec<String>,
    },
    /// Synthesize inputs that maximize a class logit.
    Actmax {
        #[arg(long, value_name = "FILE")]
        model: Option<PathBuf>,
        /// Target class id (default: every class).
        #[arg(long)]
        class: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        step_size: Option<f64>,
        /// Weight of the L2 penalty on the input.
        #[arg(long)]
        l2: Option<f64>,
        /// Clamp the input to [0, 1.2] after each step.
        #[arg(long)]
        clip: bool,
    },
    /// 2-D t-SNE embedding of model features, or of the raw series without --model.
    Tsne {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_name = "FILE")]
        model: Option<PathBuf>,
        #[arg(long)]
        perplexity: Option<f64>,
        #[arg(long)]
        iterations: Option<usize>,
    },
}

#[derive(Args)]
struct DataArgs {
    /// Canonical dataset CSV or delimited `label values...` file.
    #[arg(long, value_name = "FILE")]
    data: Option<PathBuf>,
    /// Held-out test file (train only).
    #[arg(long, value_name = "FILE")]
    test_data: Option<PathBuf>,
    /// Feature table; repeat with --concat to join several by sample id.
    #[arg(long, value_name = "FILE")]
    table: Vec<PathBuf>,
    /// Concatenate the --table files per sample.
    #[arg(long)]
    concat: bool,
    #[arg(long, value_enum)]
    delimiter: Option<DelimiterChoice>,
    /// Z-normalize each series after loading.
    #[arg(long)]
    z_normalize: bool,
    /// Drop classes with fewer samples.
    #[arg(long)]
    min_class_size: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Initial learning rate.
    #[arg(long)]
    lr: Option<f64>,
    /// Learning-rate decay per update.
    #[arg(long)]
    decay: Option<f64>,
    /// Epochs without validation improvement before stopping.
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    val_fraction: Option<f64>,
}

/// Collects flag values as dotted-key overrides.
#[derive(Default)]
struct Overrides(Vec<(String, Value)>);

impl Overrides {
    fn opt<V: serde::Serialize>(&mut self, key: &str, value: Option<V>) {
        if let Some(v) = value {
            self.0.push((key.to_string(), serde_json::to_value(v).expect("flag value serializes")));
        }
    }

    fn flag(&mut self, key: &str, on: bool) {
        if on {
            self.0.push((key.to_string(), Value::Bool(true)));
        }
    }

    fn data(&mut self, d: &DataArgs) {
        self.opt("data.path", d.data.as_ref());
        self.opt("data.test_path", d.test_data.as_ref());
        if !d.table.is_empty() {
            self.opt("data.tables", Some(&d.table));
        }
        if d.concat {
            self.opt("data.table_mode", Some("concat"));
        }
        self.opt("data.delimiter", d.delimiter);
        self.flag("data.z_normalize", d.z_normalize);
        self.opt("data.min_class_size", d.min_class_size);
    }

    fn train(&mut self, t: &TrainArgs) {
        self.opt("train.max_epochs", t.epochs);
        self.opt("train.batch_size", t.batch_size);
        self.opt("train.lr0", t.lr);
        self.opt("train.decay", t.decay);
        self.opt("train.patience", t.patience);
        self.opt("train.val_fraction", t.val_fraction);
    }
}

fn overrides(cli: &Cli) -> CliResult<Vec<(String, Value)>> {
    let mut o = Overrides::default();
    for s in &cli.set {
        o.0.push(parse_assignment(s)?);
    }
    o.opt("precision", cli.precision);
    o.opt("train.seed", cli.seed);
    o.opt("repeats", cli.repeats);
    o.opt("out", cli.out.as_ref());
    match &cli.command {
        Some(Command::Extract { masks, contours, n }) => {
            o.opt("extract.masks", masks.as_ref());
            o.opt("extract.contours", contours.as_ref());
            o.opt("extract.length", *n);
        }
        Some(Command::Train { data, train, model }) => {
            o.data(data);
            o.train(train);
            o.opt("model", model.as_ref());
        }
        Some(Command::Eval { data, model }) | Some(Command::Features { data, model }) => {
            o.data(data);
            o.opt("model", model.as_ref());
        }
        Some(Command::Crossval { data, train, k, pipeline }) => {
            o.data(data);
            o.train(train);
            o.opt("crossval.k", *k);
            if !pipeline.is_empty() {
                o.opt("crossval.pipelines", Some(pipeline));
            }
        }
        Some(Command::Gradcam { data, model, class, sample }) => {
            o.data(data);
            o.opt("model", model.as_ref());
            o.opt("interpret.class", *class);
            if !sample.is_empty() {
                o.opt("interpret.samples", Some(sample));
            }
        }
        Some(Command::Actmax { model, class, steps, step_size, l2, clip }) => {
            o.opt("model", model.as_ref());
            o.opt("interpret.class", *class);
            o.opt("actmax.steps", *steps);
            o.opt("actmax.step_size", *step_size);
            o.opt("actmax.l2_penalty", *l2);
            o.flag("actmax.clip", *clip);
        }
        Some(Command::Tsne { data, model, perplexity, iterations }) => {
            o.data(data);
            o.opt("model", model.as_ref());
            o.opt("tsne.perplexity", *perplexity);
            o.opt("tsne.iterations", *iterations);
        }
        None => {}
    }
    Ok(o.0)
}

fn dispatch<T: leafnet::Scalar>(command: &Command, cfg: &RunConfig) -> CliResult<()> {
    match command {
        Command::Extract { .. } => extract::run(cfg),
        Command::Train { .. } => commands::train::<T>(cfg),
        Command::Eval { .. } => commands::eval::<T>(cfg),
        Command::Crossval { .. } => commands::crossvalidate::<T>(cfg),
        Command::Features { .. } => commands::features::<T>(cfg),
        Command::Gradcam { .. } => commands::gradcam::<T>(cfg),
        Command::Actmax { .. } => commands::actmax::<T>(cfg),
        Command::Tsne { .. } => commands::embed::<T>(cfg),
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let cfg = RunConfig::resolve(cli.config.as_deref(), &overrides(&cli)?)?;
    if cli.dump_config {
        // A closed pipe (`| head`) is not an error worth reporting.
        let _ = writeln!(std::io::stdout().lock(), "{}", cfg.to_json());
        return Ok(());
    }
    let Some(command) = &cli.command else {
        return Err(CliError::new(error::EXIT_CONFIG, "usage", "no subcommand given; see `leafnet --help`"));
    };
    log::debug!("configuration {}", json!(cfg));
    match cfg.precision {
        Precision::F32 => dispatch::<f32>(command, &cfg),
        Precision::F64 => dispatch::<f64>(command, &cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("leafnet: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
