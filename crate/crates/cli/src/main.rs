//! Command-line front end: diagrams, simplification, value-space descent and
//! training runs, all writing JSON and CSV for external plotting.

mod inputs;
mod sweep;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use toposimp::merge_tree::persistence_diagram;
use toposimp::neural::data::three_blobs;
use toposimp::neural::{train_model, EpsilonPolicy, SimplifyDirections, Task, TrainConfig, TrainReport};
use toposimp::optim_values::{gaussian_grid, optimize_values_observed, ranked_persistences, ValueLoss};
use toposimp::simplify::{epsilon_largest_gap, epsilon_top_j, simplify_field};
use toposimp::{Direction, PersistenceDiagram};

use inputs::{grid_csv, load_field, load_mixture, load_table, TableFormat};
use sweep::{run_sweep, SweepGrid};

#[derive(Parser)]
#[command(name = "toposimp", version, about = "Persistence, simplification and topological regularization")]
struct Cli {
    /// Random seed for every stochastic step [default: 0]
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for output files [default: current directory]
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// TOML file with defaults for any command; flags take precedence
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the 0-dimensional persistence diagram of a field
    Persistence {
        /// Field as JSON ({vertex_count, edges, values}) or a CSV grid of values
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = DirectionArg::Sublevel)]
        direction: DirectionArg,
    },
    /// Compute an ε-simplification of a field
    Simplify {
        /// Field as JSON ({vertex_count, edges, values}) or a CSV grid of values
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = DirectionArg::Sublevel)]
        direction: DirectionArg,
        /// Remove every feature with persistence at most this value
        #[arg(long, group = "eps", required_unless_present_any = ["top_j", "largest_gap"])]
        epsilon: Option<f64>,
        /// Keep the j most persistent features
        #[arg(long, group = "eps")]
        top_j: Option<usize>,
        /// Cut at the largest gap in the sorted persistences
        #[arg(long, group = "eps")]
        largest_gap: bool,
    },
    /// Gradient descent directly on the values of a grid field
    OptimizeValues(ValueArgs),
    /// Train a network on a labeled CSV table
    Train(TrainArgs),
    /// Noisy three-class demo with simplification switched on late
    Blobs(BlobArgs),
    /// Hyperparameter sweep over k, t, n and σ on a labeled CSV table
    Sweep(TrainArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectionArg {
    Sublevel,
    Superlevel,
}

impl From<DirectionArg> for Direction {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::Sublevel => Direction::Sublevel,
            DirectionArg::Superlevel => Direction::Superlevel,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum LossMode {
    Pso,
    Diagram,
    Both,
}

/// Options of `optimize-values`; the `[optimize_values]` table of the config
/// file uses the same names with underscores.
#[derive(Args, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ValueArgs {
    /// Builtin field [default: four-gaussians]
    #[arg(long)]
    preset: Option<String>,
    /// JSON or TOML file with a `gaussians` list, instead of a preset
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Grid side length [default: 100]
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long, value_enum)]
    /// Loss to descend [default: both]
    loss: Option<LossMode>,
    /// Number of descent steps [default: 50]
    #[arg(long)]
    steps: Option<usize>,
    /// Step size [default: 0.1]
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Simplification threshold [default: 0.5]
    #[arg(long)]
    epsilon: Option<f64>,
    /// Weight of the term pushing persistent pairs apart [default: 0]
    #[arg(long)]
    anti_squash: Option<f64>,
    /// Steps whose grid values are written as CSV [default: 0 and the last]
    #[arg(long, value_delimiter = ',')]
    snapshots: Option<Vec<usize>>,
}

/// Overrides of the training configuration. The `[train]` table of the
/// config file accepts every field of the configuration.
#[derive(Args, Clone, Default)]
struct TrainOverrides {
    /// Number of epochs [default: 100]
    #[arg(long)]
    epochs: Option<usize>,
    /// Minibatch size [default: 64]
    #[arg(long)]
    batch_size: Option<usize>,
    /// Adam learning rate [default: 0.001]
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Hidden layers [default: 5]
    #[arg(long)]
    hidden_layers: Option<usize>,
    /// Units per hidden layer [default: 100]
    #[arg(long)]
    hidden_width: Option<usize>,
    /// Validation-loss increase that triggers simplification; negative values trigger every epoch [default: 0.001]
    #[arg(long, allow_negative_numbers = true)]
    threshold: Option<f64>,
    /// Simplify after every epoch from this one on [default: off]
    #[arg(long)]
    always_from_epoch: Option<usize>,
    /// Optimizer steps per simplification phase, 1 to 50 [default: 10]
    #[arg(long)]
    topo_steps: Option<usize>,
    /// Fixed learning rate for simplification phases [default: scaled by gradient norms]
    #[arg(long)]
    topo_learning_rate: Option<f64>,
    /// Neighbors in the domain graph [default: 15]
    #[arg(long)]
    k: Option<usize>,
    /// Extra samples per training point in the domain graph [default: 0]
    #[arg(long)]
    n: Option<usize>,
    /// Standard deviation of the extra samples [default: 0.001]
    #[arg(long)]
    sigma: Option<f64>,
    /// Build the domain graph on this many principal components [default: off]
    #[arg(long)]
    pca_dims: Option<usize>,
    /// ε policy: validation-loss, top-j:J, largest-gap or fixed:E [default: validation-loss]
    #[arg(long, value_parser = parse_policy)]
    epsilon: Option<EpsilonPolicy>,
    /// Regression extrema to simplify [default: both]
    #[arg(long, value_enum)]
    directions: Option<DirectionsArg>,
    /// Run without simplification phases
    #[arg(long)]
    no_topo: bool,
    /// Squared-weight penalty coefficient λ [default: 0]
    #[arg(long)]
    l2: Option<f64>,
    /// Skip per-epoch diagram recording
    #[arg(long)]
    no_vineyard: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectionsArg {
    Both,
    Sublevel,
    Superlevel,
}

fn parse_policy(s: &str) -> std::result::Result<EpsilonPolicy, String> {
    let bad = || format!("invalid ε policy {s:?}");
    match s.split_once(':') {
        None if s == "validation-loss" => Ok(EpsilonPolicy::ValidationLoss),
        None if s == "largest-gap" => Ok(EpsilonPolicy::LargestGap),
        Some(("top-j", j)) => j.parse().map(EpsilonPolicy::TopJ).map_err(|_| bad()),
        Some(("fixed", e)) => e.parse().map(EpsilonPolicy::Fixed).map_err(|_| bad()),
        _ => Err(bad()),
    }
}

impl TrainOverrides {
    fn apply(&self, c: &mut TrainConfig) {
        macro_rules! set {
            ($($field:ident),*) => {$(if let Some(v) = self.$field.clone() { c.$field = v; })*};
        }
        set!(epochs, batch_size, learning_rate, hidden_layers, hidden_width, topo_steps, k, n, sigma, epsilon);
        if let Some(t) = self.threshold {
            c.threshold = Some(t);
        }
        if self.always_from_epoch.is_some() {
            c.always_from_epoch = self.always_from_epoch;
        }
        if self.topo_learning_rate.is_some() {
            c.topo_learning_rate = self.topo_learning_rate;
        }
        if self.pca_dims.is_some() {
            c.pca_dims = self.pca_dims;
        }
        if let Some(d) = self.directions {
            c.directions = match d {
                DirectionsArg::Both => SimplifyDirections::Both,
                DirectionsArg::Sublevel => SimplifyDirections::Sublevel,
                DirectionsArg::Superlevel => SimplifyDirections::Superlevel,
            };
        }
        if self.no_topo {
            c.topo = false;
        }
        if let Some(l) = self.l2 {
            c.weight_decay = l;
        }
        if self.no_vineyard {
            c.record_vineyard = false;
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Labeled CSV table, one row per point
    data: PathBuf,
    /// Learning task [default: regression]
    #[arg(long, value_enum)]
    task: Option<TaskArg>,
    /// Label column, negative counts from the end [default: -1]
    #[arg(long, allow_negative_numbers = true)]
    label_column: Option<isize>,
    /// The table has no header row
    #[arg(long)]
    no_header: bool,
    /// Field delimiter [default: ,]
    #[arg(long)]
    delimiter: Option<char>,
    /// Run the hyperparameter grid instead of a single configuration
    #[arg(long)]
    sweep: bool,
    /// Write the trained network weights to this JSON file
    #[arg(long)]
    save_model: Option<PathBuf>,
    #[command(flatten)]
    overrides: TrainOverrides,
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Regression,
    Classification,
}

#[derive(Args)]
struct BlobArgs {
    /// Points per class [default: 1000]
    #[arg(long)]
    per_class: Option<usize>,
    /// Share of points whose labels are shuffled [default: 0.2]
    #[arg(long)]
    noise: Option<f64>,
    /// Epochs after activation over which the validation drop is measured [default: 20]
    #[arg(long)]
    window: Option<usize>,
    /// Write the trained network weights to this JSON file
    #[arg(long)]
    save_model: Option<PathBuf>,
    #[command(flatten)]
    overrides: TrainOverrides,
}

#[derive(Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    out: Option<PathBuf>,
    train: Option<TrainConfig>,
    sweep: Option<SweepGrid>,
    optimize_values: Option<ValueArgs>,
}

/// Marks failures caused by unreadable or malformed input.
#[derive(Debug)]
struct DataInput;

impl fmt::Display for DataInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("bad input")
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<DataInput>().is_some() {
        return 2;
    }
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<toposimp::Error>() {
            return match e {
                toposimp::Error::Numeric(_) => 3,
                toposimp::Error::InvalidParameter(_) => 1,
                _ => 2,
            };
        }
    }
    1
}

struct Session {
    seed: u64,
    out: PathBuf,
    file: FileConfig,
}

impl Session {
    fn write(&self, name: &str, contents: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        let path = self.out.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    fn base_train_config(&self) -> TrainConfig {
        self.file.train.clone().unwrap_or_default()
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => FileConfig::default(),
    };
    let ctx = Session {
        seed: cli.seed.or(file.seed).unwrap_or(0),
        out: cli.out.clone().or(file.out.clone()).unwrap_or_else(|| PathBuf::from(".")),
        file,
    };
    let write_out = cli.out.is_some() || ctx.file.out.is_some();
    match cli.command {
        Command::Persistence { input, direction } => {
            let field = load_field(&input).context(DataInput)?;
            let diagram = persistence_diagram(&field, direction.into());
            let json = serde_json::to_string_pretty(&diagram)?;
            if write_out {
                ctx.write("diagram.json", &json)?;
            }
            println!("{json}");
        }
        Command::Simplify {
            input,
            direction,
            epsilon,
            top_j,
            largest_gap,
        } => cmd_simplify(&ctx, &input, direction.into(), epsilon, top_j, largest_gap, write_out)?,
        Command::OptimizeValues(args) => cmd_optimize_values(&ctx, args)?,
        Command::Train(args) => cmd_train(&ctx, args, false)?,
        Command::Sweep(args) => cmd_train(&ctx, args, true)?,
        Command::Blobs(args) => cmd_blobs(&ctx, args)?,
    }
    Ok(())
}

fn cmd_simplify(
    ctx: &Session,
    input: &Path,
    direction: Direction,
    epsilon: Option<f64>,
    top_j: Option<usize>,
    largest_gap: bool,
    write_out: bool,
) -> Result<()> {
    let field = load_field(input).context(DataInput)?;
    let diagram = persistence_diagram(&field, direction);
    let eps = match (epsilon, top_j) {
        (Some(e), _) => e,
        (None, Some(j)) => epsilon_top_j(&diagram, j),
        (None, None) if largest_gap => epsilon_largest_gap(&diagram),
        _ => bail!("one of --epsilon, --top-j or --largest-gap is required"),
    };
    let target = simplify_field(&field, direction, eps)?;
    let simplified = field.with_values(target.g_values.clone())?;
    #[derive(serde::Serialize)]
    struct Output<'a> {
        epsilon: f64,
        g_values: &'a [f64],
        changed: &'a [usize],
        diagram: PersistenceDiagram,
    }
    let json = serde_json::to_string_pretty(&Output {
        epsilon: eps,
        g_values: &target.g_values,
        changed: &target.changed,
        diagram: persistence_diagram(&simplified, direction).off_diagonal(),
    })?;
    if write_out {
        ctx.write("simplified.json", &json)?;
    }
    println!("{json}");
    Ok(())
}

fn cmd_optimize_values(ctx: &Session, flags: ValueArgs) -> Result<()> {
    let file = ctx.file.optimize_values.as_ref();
    macro_rules! pick {
        ($field:ident, $default:expr) => {
            flags.$field.clone().or_else(|| file.and_then(|f| f.$field.clone())).unwrap_or($default)
        };
    }
    let preset: String = pick!(preset, "four-gaussians".to_string());
    let spec = flags.spec.clone().or_else(|| file.and_then(|f| f.spec.clone()));
    let side = pick!(grid, 100);
    let mode = pick!(loss, LossMode::Both);
    let steps = pick!(steps, 50);
    let lr = pick!(learning_rate, 0.1);
    let eps = pick!(epsilon, 0.5);
    let anti_squash = pick!(anti_squash, 0.0);
    let snapshots = pick!(snapshots, vec![0, steps]);

    let gaussians = load_mixture(&preset, spec.as_deref()).context(DataInput)?;
    let field = gaussian_grid(side, side, &gaussians)?;
    let mut losses = Vec::new();
    if mode != LossMode::Diagram {
        losses.push(("pso", ValueLoss::Pso));
    }
    if mode != LossMode::Pso {
        losses.push(("diagram", ValueLoss::Diagram { anti_squash }));
    }
    for (name, loss) in losses {
        let mut grids = Vec::new();
        let report = optimize_values_observed(&field, Direction::Superlevel, loss, eps, steps, lr, |step, values| {
            if snapshots.contains(&step) {
                grids.push((step, grid_csv(values, side)));
            }
        })?;
        ctx.write(&format!("{name}_report.json"), &serde_json::to_string_pretty(&report)?)?;
        let mut csv = Vec::new();
        report.vineyard.write_csv(&mut csv)?;
        ctx.write(&format!("{name}_vineyard.csv"), &String::from_utf8(csv)?)?;
        for (step, text) in grids {
            ctx.write(&format!("{name}_step{step}.csv"), &text)?;
        }
        let final_field = field.with_values(report.final_values.clone())?;
        let top: Vec<String> = ranked_persistences(&final_field, Direction::Superlevel)
            .iter()
            .take(4)
            .map(|p| format!("{p:.6}"))
            .collect();
        println!(
            "{name}: loss {:.6} -> {:.6}, top persistences [{}]",
            report.losses[0],
            report.losses.last().unwrap(),
            top.join(", ")
        );
    }
    Ok(())
}

fn write_report(ctx: &Session, prefix: &str, report: &TrainReport) -> Result<()> {
    ctx.write(&format!("{prefix}report.json"), &serde_json::to_string_pretty(report)?)?;
    let mut csv = Vec::new();
    report.vineyard.write_csv(&mut csv)?;
    ctx.write(&format!("{prefix}vineyard.csv"), &String::from_utf8(csv)?)?;
    Ok(())
}

fn print_metrics(report: &TrainReport) {
    let t = &report.test;
    match (t.rmsd, t.accuracy) {
        (Some(rmsd), _) => println!("test rmsd {rmsd:.6} ({} phases)", report.phases.len()),
        (_, Some(acc)) => println!(
            "test cross-entropy {:.6}, accuracy {:.4} ({} phases)",
            t.loss,
            acc,
            report.phases.len()
        ),
        _ => println!("test loss {:.6}", t.loss),
    }
}

fn cmd_train(ctx: &Session, args: TrainArgs, force_sweep: bool) -> Result<()> {
    let mut config = ctx.base_train_config();
    config.seed = ctx.seed;
    if let Some(task) = args.task {
        config.task = match task {
            TaskArg::Regression => Task::Regression,
            TaskArg::Classification => Task::Classification,
        };
    }
    args.overrides.apply(&mut config);
    let delimiter = args.delimiter.unwrap_or(',');
    if !delimiter.is_ascii() {
        bail!("delimiter must be a single ASCII character");
    }
    let fmt = TableFormat {
        label_column: args.label_column.unwrap_or(-1),
        has_header: !args.no_header,
        delimiter: delimiter as u8,
    };
    let data =
        load_table(&args.data, config.task == Task::Classification, &fmt).context(DataInput)?;
    if args.sweep || force_sweep {
        let grid = ctx.file.sweep.clone().unwrap_or_else(|| SweepGrid::defaults(config.task));
        return run_sweep(&config, &grid, &data, |name, text| ctx.write(name, text).map(|_| ()));
    }
    let (report, model) = train_model(&config, &data)?;
    write_report(ctx, "", &report)?;
    if let Some(path) = args.save_model {
        fs::write(&path, serde_json::to_string(&model)?).with_context(|| format!("writing {}", path.display()))?;
    }
    print_metrics(&report);
    Ok(())
}

fn cmd_blobs(ctx: &Session, args: BlobArgs) -> Result<()> {
    let mut config = match &ctx.file.train {
        Some(c) => TrainConfig {
            seed: ctx.seed,
            task: Task::Classification,
            ..c.clone()
        },
        None => TrainConfig::three_blob_preset(ctx.seed),
    };
    args.overrides.apply(&mut config);
    let data = three_blobs(args.per_class.unwrap_or(1000), args.noise.unwrap_or(0.2), ctx.seed)?;
    let (report, model) = train_model(&config, &data)?;
    write_report(ctx, "", &report)?;
    if let Some(path) = args.save_model {
        fs::write(&path, serde_json::to_string(&model)?).with_context(|| format!("writing {}", path.display()))?;
    }
    print_metrics(&report);
    if let Some(start) = config.always_from_epoch.filter(|&s| s < report.validation_losses.len()) {
        let window = args.window.unwrap_or(20);
        if let Some(drop) = report.validation_drop(start, window) {
            println!(
                "validation loss {:.6} at epoch {start}, drop {:.1}% within {window} epochs",
                report.validation_losses[start],
                100.0 * drop
            );
        }
    }
    Ok(())
}
