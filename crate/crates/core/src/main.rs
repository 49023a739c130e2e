use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use opclass::balance::{adasyn, write_audit, AdasynConfig};
use opclass::config::{self, SynthSettings};
use opclass::dataset::{self, LabeledDataset};
use opclass::error::{Error, Result};
use opclass::evaluate::ExperimentConfig;
use opclass::models::{train_classifier, Classifier, ClassifierKind};
use opclass::neural::TrainConfig;
use opclass::pipeline;
use opclass::reduce::{self, ReducerKind, ReducerModel, ReducerSpec};
use opclass::seed;

#[derive(Parser, Debug)]
#[command(name = "opclass", version, about = "Opcode-frequency malware classification")]
struct Cli {
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for the evaluation grid.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse a directory of .asm listings into an opcode-count dataset.
    Extract(ExtractArgs),
    /// Generate a synthetic opcode-count corpus.
    Synth(SynthArgs),
    /// Oversample the minority class with ADASYN.
    Balance(BalanceArgs),
    /// Fit or apply a feature reducer.
    Reduce(ReduceArgs),
    /// Train a classifier.
    Train(TrainArgs),
    /// Score a dataset with a trained classifier.
    Predict(PredictArgs),
    /// Cross-validate the reducer × classifier grid.
    Evaluate(EvaluateArgs),
    /// Run the whole pipeline from a config file.
    Run { config: PathBuf },
}

#[derive(Args, Debug)]
struct ExtractArgs {
    #[arg(long)]
    asm_dir: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    master_out: PathBuf,
    /// `file_id,label` CSV. Without it, files under malware/ and benign/ are labeled by directory.
    #[arg(long)]
    labels: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 200)]
    minority: usize,
    #[arg(long, default_value_t = 800)]
    majority: usize,
    #[arg(long, default_value_t = 50)]
    opcodes: usize,
    #[arg(long, default_value_t = 0.9)]
    sep: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct BalanceArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Write synthetic_row_id,parent_a,parent_b,lambda here.
    #[arg(long)]
    audit: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReduceArgs {
    #[arg(long, conflicts_with = "apply", required_unless_present = "apply")]
    fit: bool,
    #[arg(long)]
    apply: bool,
    /// none, vt, ae1 or ae3 (with --fit).
    #[arg(long, default_value = "vt")]
    kind: String,
    #[arg(long, default_value_t = reduce::DEFAULT_VARIANCE_THRESHOLD)]
    threshold: f64,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long = "in")]
    input: PathBuf,
    /// Reducer file written by --fit and read by --apply.
    #[arg(long)]
    model: PathBuf,
    /// Reduced dataset (--apply).
    #[arg(long, required_if_eq("apply", "true"))]
    out: Option<PathBuf>,
    /// Autoencoder loss trace CSV (--fit).
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// rf, dnn2, dnn4 or dnn7.
    #[arg(long)]
    model: String,
    #[arg(long = "in")]
    input: PathBuf,
    /// Reducer applied to the inputs before training.
    #[arg(long)]
    reducer: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    trees: Option<usize>,
    /// DNN loss trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    reducer: Option<PathBuf>,
    /// row_id,label,proba,predicted
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// `all`, or `REDUCERS:CLASSIFIERS` such as `none,vt:rf,dnn2`.
    #[arg(long, default_value = "all")]
    grid: String,
    #[arg(long)]
    out: PathBuf,
    /// Config file supplying training settings; its input and output sections are ignored.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    folds: Option<usize>,
}

fn parse_grid(grid: &str) -> Result<(Vec<ReducerKind>, Vec<ClassifierKind>)> {
    if grid == "all" {
        return Ok((ReducerKind::ALL.to_vec(), ClassifierKind::ALL.to_vec()));
    }
    let (r, c) = grid
        .split_once(':')
        .ok_or_else(|| Error::InvalidArgument(format!("grid `{grid}` is not `all` or REDUCERS:CLASSIFIERS")))?;
    let reducers = r
        .split(',')
        .map(|s| s.trim().parse())
        .collect::<Result<Vec<ReducerKind>>>()?;
    let classifiers = c
        .split(',')
        .map(|s| s.trim().parse())
        .collect::<Result<Vec<ClassifierKind>>>()?;
    Ok((reducers, classifiers))
}

fn args_stamp(args: &impl std::fmt::Debug, seed: u64) -> String {
    format!(
        "config_hash={} seed={seed}",
        seed::content_hash(format!("{args:?}").as_bytes())
    )
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path)?))
}

fn reduced_input(path: &Path, reducer: Option<&Path>) -> Result<(LabeledDataset, String)> {
    let data = dataset::load(path)?;
    match reducer {
        None => Ok((data, ReducerKind::None.tag().to_string())),
        Some(p) => {
            let model = ReducerModel::load(p)?;
            Ok((model.apply_dataset(&data)?, model.kind().tag().to_string()))
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    let seed = cli.seed.unwrap_or(0);
    match cli.command {
        Command::Extract(args) => {
            let ex = pipeline::extract_dataset(&args.asm_dir, args.labels.as_deref())?;
            let comment = args_stamp(&args, seed);
            dataset::persist_with_comment(&ex.dataset, &args.out, Some(&comment))?;
            fs::write(&args.master_out, format!("# {comment}\n{}", ex.master.to_text()))?;
            info!(
                "{} rows, {} opcodes, {} excluded",
                ex.dataset.n_rows(),
                ex.master.len(),
                ex.excluded.len()
            );
        }
        Command::Synth(args) => {
            let settings = SynthSettings {
                n_minority: args.minority,
                n_majority: args.majority,
                n_opcodes: args.opcodes,
                separation: args.sep,
            };
            let data = pipeline::synth_from_master(&settings, seed)?;
            dataset::persist_with_comment(&data, &args.out, Some(&args_stamp(&args, seed)))?;
        }
        Command::Balance(args) => {
            let data = dataset::load(&args.input)?;
            let cfg = AdasynConfig {
                k: args.k,
                beta: args.beta,
                seed,
            };
            let outcome = adasyn(&data, &cfg)?;
            let comment = args_stamp(&args, seed);
            dataset::persist_with_comment(&outcome.dataset, &args.out, Some(&comment))?;
            if let Some(path) = &args.audit {
                let mut out = create(path)?;
                writeln!(out, "# {comment}")?;
                write_audit(&outcome, &data, &mut out)?;
                out.flush()?;
            }
            info!("added {} synthetic rows", outcome.parents.len());
        }
        Command::Reduce(args) => {
            let data = dataset::load(&args.input)?;
            if args.fit {
                let mut spec = ReducerSpec::new(args.kind.parse()?);
                spec.threshold = args.threshold;
                spec.train = TrainConfig {
                    epochs: args.epochs.unwrap_or(spec.train.epochs),
                    seed,
                    ..spec.train
                };
                let fit = reduce::fit(&spec, data.matrix.view())?;
                fit.model.save(&args.model)?;
                if let (Some(path), Some(trace)) = (&args.trace, &fit.trace) {
                    let mut out = create(path)?;
                    trace.write_csv(&mut out, Some(&args_stamp(&args, seed)))?;
                    out.flush()?;
                }
                info!("{} → {} features", fit.model.input_width(), fit.model.output_width());
            } else {
                let model = ReducerModel::load(&args.model)?;
                let out = args.out.as_ref().expect("clap requires --out with --apply");
                dataset::persist_with_comment(&model.apply_dataset(&data)?, out, Some(&args_stamp(&args, seed)))?;
            }
        }
        Command::Train(args) => {
            let kind: ClassifierKind = args.model.parse()?;
            let (data, reducer_tag) = reduced_input(&args.input, args.reducer.as_deref())?;
            let mut cfg = opclass::models::ClassifierConfig::default();
            if let Some(e) = args.epochs {
                cfg.dnn.epochs = e;
            }
            if let Some(t) = args.trees {
                cfg.forest.n_trees = t;
            }
            let (model, trace) = train_classifier(kind, &data, &cfg, seed, &reducer_tag)?;
            model.save(&args.out)?;
            if let (Some(path), Some(trace)) = (&args.trace, &trace) {
                let mut out = create(path)?;
                trace.write_csv(&mut out, Some(&args_stamp(&args, seed)))?;
                out.flush()?;
            }
        }
        Command::Predict(args) => {
            let model = Classifier::load(&args.model)?;
            let (data, _) = reduced_input(&args.input, args.reducer.as_deref())?;
            let prediction = model.predict(data.matrix.view())?;
            let mut out = create(&args.out)?;
            writeln!(out, "# {}", args_stamp(&args, seed))?;
            writeln!(out, "row_id,label,proba,predicted")?;
            for i in 0..data.n_rows() {
                writeln!(
                    out,
                    "{},{},{},{}",
                    data.row_ids[i],
                    data.labels[i].as_u8(),
                    prediction.proba[i],
                    prediction.labels[i].as_u8()
                )?;
            }
            out.flush()?;
        }
        Command::Evaluate(args) => {
            let mut cfg = match &args.config {
                Some(path) => config::load(path)?.experiment,
                None => ExperimentConfig::default(),
            };
            let (reducers, classifiers) = parse_grid(&args.grid)?;
            cfg.reducers = reducers;
            cfg.classifiers = classifiers;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            if let Some(j) = cli.jobs {
                cfg.jobs = j;
            }
            if let Some(f) = args.folds {
                cfg.folds = f;
            }
            let data = dataset::load(&args.input)?;
            pipeline::evaluate_to_dir(&data, &cfg, &args.out)?;
        }
        Command::Run { config: path } => {
            let mut cfg = config::load(&path)?;
            if let Some(s) = cli.seed {
                cfg.experiment.seed = s;
            }
            if let Some(j) = cli.jobs {
                cfg.experiment.jobs = j;
            }
            pipeline::run(&cfg)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
