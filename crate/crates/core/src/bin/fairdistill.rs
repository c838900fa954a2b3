//! Batch command-line surface: generate synthetic benchmarks, train the
//! baseline or the full pipeline, evaluate checkpoints or prediction
//! files, run the rank-statistics suite, and consolidate experiment
//! directories. Flags override JSON config values, which override the
//! built-in defaults; the effective config is echoed into every output
//! directory.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fairdistill::cli::{self, EvaluateInput, SplitChoice, TrainConfig, TrainMethod};
use fairdistill::datagen::GenSpec;
use fairdistill::pipeline::SplitRatios;
use fairdistill::Error;

#[derive(Parser)]
#[command(name = "fairdistill", version, about = "Fairness-aware training and evaluation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic biased benchmark (dataset CSV + analytic oracle)
    Generate(GenerateArgs),
    /// Train a model: erm, fis (stage 0 only), or fairdi (all three stages)
    Train(TrainArgs),
    /// Evaluate a checkpoint or prediction file into a metrics report
    Evaluate(EvaluateArgs),
    /// Friedman test + Nemenyi critical-difference data over a scores CSV
    Stats(StatsArgs),
    /// Consolidate an experiment directory into a summary
    Report(ReportArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// output directory
    #[arg(long)]
    out: PathBuf,
    /// GenSpec JSON to start from (flags below override its fields)
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    n_samples: Option<usize>,
    #[arg(long)]
    n_features: Option<usize>,
    /// switch to image mode with this side length
    #[arg(long)]
    image_side: Option<usize>,
    #[arg(long)]
    n_groups: Option<usize>,
    /// comma-separated group proportions, e.g. 0.65,0.35
    #[arg(long)]
    proportions: Option<String>,
    #[arg(long)]
    separation: Option<f64>,
    #[arg(long)]
    bias: Option<f64>,
    #[arg(long)]
    label_noise: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TrainArgs {
    /// dataset CSV
    #[arg(long)]
    data: PathBuf,
    /// erm | fis | fairdi
    #[arg(long)]
    method: String,
    /// output directory
    #[arg(long)]
    out: PathBuf,
    /// full TrainConfig JSON (flags override it)
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// train,val,test ratios, e.g. 0.8,0.1,0.1
    #[arg(long)]
    split: Option<String>,
    /// cap max_epochs for every stage
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    /// individual/group mixing c (stages 0 and 2)
    #[arg(long)]
    c: Option<f64>,
    /// distillation mix λ (stage 2)
    #[arg(long)]
    lambda: Option<f64>,
    /// distillation temperature τ (stage 2)
    #[arg(long)]
    tau: Option<f64>,
    /// stage-1/2 learning rate
    #[arg(long)]
    head_lr: Option<f64>,
    /// comma-separated backbone hidden widths, e.g. 64,64
    #[arg(long)]
    hidden: Option<String>,
    /// disable CutMix in every stage
    #[arg(long)]
    no_cutmix: bool,
    /// CutMix Beta parameter
    #[arg(long)]
    cutmix_beta: Option<f64>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// output directory
    #[arg(long)]
    out: PathBuf,
    /// model checkpoint (needs --data)
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// dataset CSV for checkpoint evaluation
    #[arg(long)]
    data: Option<PathBuf>,
    /// splits.json from the training run
    #[arg(long)]
    splits: Option<PathBuf>,
    /// train | val | test | all
    #[arg(long, default_value = "test")]
    split: String,
    /// classification predictions CSV (id,score,label,attribute)
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// segmentation index CSV (id,pred_path,truth_path,attribute)
    #[arg(long)]
    segmentation_index: Option<PathBuf>,
    /// group-values fixture JSON (reproduces a results-table row)
    #[arg(long)]
    group_values: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    /// scores CSV: header of algorithm names, one row per task
    #[arg(long)]
    scores: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// rank ascending scores as better (default: higher is better)
    #[arg(long)]
    lower_is_better: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// experiment directory holding records, timing, and reports
    #[arg(long)]
    dir: PathBuf,
    /// output directory (defaults to the experiment directory)
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, Error> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<T>()
                .map_err(|_| Error::Config(format!("bad {what} entry {p:?}")))
        })
        .collect()
}

/// Relative output paths resolve under FAIRDISTILL_OUT_ROOT when it is set.
fn resolve_out(path: PathBuf) -> PathBuf {
    match std::env::var_os("FAIRDISTILL_OUT_ROOT") {
        Some(root) if path.is_relative() => PathBuf::from(root).join(path),
        _ => path,
    }
}

fn run_generate(args: GenerateArgs) -> Result<(), Error> {
    let mut spec = match &args.spec {
        Some(path) => fairdistill::datagen::load_spec(path)?,
        None => GenSpec::default(),
    };
    if let Some(v) = args.n_samples {
        spec.n_samples = v;
    }
    if let Some(v) = args.n_features {
        spec.n_features = v;
    }
    if args.image_side.is_some() {
        spec.image_side = args.image_side;
    }
    if let Some(v) = args.n_groups {
        spec.n_groups = v;
        spec.group_proportions = vec![1.0 / v as f64; v];
    }
    if let Some(p) = &args.proportions {
        spec.group_proportions = parse_list(p, "proportion")?;
        spec.n_groups = spec.group_proportions.len();
    }
    if let Some(v) = args.separation {
        spec.base_separation = v;
    }
    if let Some(v) = args.bias {
        spec.bias_strength = v;
    }
    if let Some(v) = args.label_noise {
        spec.label_noise = v;
    }
    if let Some(v) = args.seed {
        spec.seed = v;
    }
    cli::cmd_generate(&spec, &resolve_out(args.out))
}

fn run_train(args: TrainArgs) -> Result<(), Error> {
    let method = TrainMethod::parse(&args.method)?;
    let seed = args.seed.unwrap_or(42);
    let mut cfg = match &args.config {
        Some(path) => TrainConfig::from_json_file(path)?,
        None => TrainConfig::new(args.data.clone(), args.out.clone(), method, seed),
    };
    // flags override the JSON config
    cfg.dataset = args.data;
    cfg.out_dir = resolve_out(args.out);
    cfg.method = method;
    if let Some(s) = args.seed {
        if args.config.is_some() {
            // reseed the per-stage plans off the new master seed
            let fresh = TrainConfig::new(cfg.dataset.clone(), cfg.out_dir.clone(), method, s);
            cfg.seed = s;
            cfg.stage0.rng_seed = fresh.stage0.rng_seed;
            cfg.stage1.rng_seed = fresh.stage1.rng_seed;
            cfg.stage2.rng_seed = fresh.stage2.rng_seed;
        }
    }
    if let Some(s) = &args.split {
        let parts: Vec<f64> = parse_list(s, "split ratio")?;
        if parts.len() != 3 {
            return Err(Error::Config("--split needs train,val,test".into()));
        }
        cfg.split = SplitRatios::new(parts[0], parts[1], parts[2])?;
    }
    for plan in [&mut cfg.stage0, &mut cfg.stage1, &mut cfg.stage2] {
        if let Some(v) = args.max_epochs {
            plan.max_epochs = v;
        }
        if let Some(v) = args.batch_size {
            plan.batch_size = v;
        }
        if let Some(v) = args.patience {
            plan.patience = v;
        }
        if args.no_cutmix {
            plan.cutmix_beta = None;
        } else if let Some(beta) = args.cutmix_beta {
            plan.cutmix_beta = Some(beta);
        }
    }
    if let Some(v) = args.c {
        cfg.stage0.c = v;
        cfg.stage2.c = v;
    }
    if let Some(v) = args.lambda {
        cfg.stage2.lambda = v;
    }
    if let Some(v) = args.tau {
        cfg.stage2.tau = v;
    }
    if let Some(v) = args.head_lr {
        cfg.stage1.optimizer.learning_rate = v;
        cfg.stage2.optimizer.learning_rate = v;
    }
    if let Some(h) = &args.hidden {
        cfg.stage0.hidden_dims = parse_list(h, "hidden width")?;
    }
    cli::cmd_train(&cfg)
}

fn run_evaluate(args: EvaluateArgs) -> Result<(), Error> {
    let input = match (
        &args.checkpoint,
        &args.predictions,
        &args.segmentation_index,
        &args.group_values,
    ) {
        (Some(ckpt), None, None, None) => {
            let dataset = args
                .data
                .clone()
                .ok_or_else(|| Error::Config("--checkpoint evaluation needs --data".into()))?;
            EvaluateInput::Checkpoint {
                checkpoint: ckpt.clone(),
                dataset,
                splits: args.splits.clone(),
                split: SplitChoice::parse(&args.split)?,
            }
        }
        (None, Some(p), None, None) => EvaluateInput::Predictions(p.clone()),
        (None, None, Some(p), None) => EvaluateInput::SegmentationIndex(p.clone()),
        (None, None, None, Some(p)) => EvaluateInput::GroupValues(p.clone()),
        _ => {
            return Err(Error::Config(
                "pass exactly one of --checkpoint, --predictions, \
                 --segmentation-index, --group-values"
                    .into(),
            ))
        }
    };
    cli::cmd_evaluate(&input, &resolve_out(args.out))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(args) => run_generate(args),
        Command::Train(args) => run_train(args),
        Command::Evaluate(args) => run_evaluate(args),
        Command::Stats(args) => cli::cmd_stats(
            &args.scores,
            args.alpha,
            !args.lower_is_better,
            &resolve_out(args.out),
        ),
        Command::Report(args) => {
            let out = resolve_out(args.out.clone().unwrap_or_else(|| args.dir.clone()));
            cli::cmd_report(&args.dir, &out)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
