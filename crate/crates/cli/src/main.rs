//! `colanet` command-line tool.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use colanet::config::Dynamics;

#[derive(Parser, Debug)]
#[command(name = "colanet", version, about = "Spiking microcolumn network for MNIST")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Converts IDX image/label pairs into the flat MNIST.bin / MNIST.target pair.
    Convert(ConvertArgs),
    /// Trains on the training images, freezes plasticity and classifies the test images.
    TrainEval(TrainEvalArgs),
    /// Searches the hyperparameter space with a genetic algorithm.
    Optimize(OptimizeArgs),
    /// Renders a weight snapshot as a PPM weight grid.
    ExportWeights(ExportArgs),
}

#[derive(Args, Debug)]
struct ConvertArgs {
    /// IDX image files, in timeline order. Defaults to the four MNIST files in the data directory.
    #[arg(long = "images", num_args = 1..)]
    images: Vec<PathBuf>,
    /// IDX label files, one per image file.
    #[arg(long = "labels", num_args = 1..)]
    labels: Vec<PathBuf>,
    #[arg(long, env = "COLANET_DATA")]
    data_dir: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct DataArgs {
    /// Image file: flat 784-byte records or IDX.
    #[arg(long, requires = "labels")]
    images: Option<PathBuf>,
    /// Label file: one decimal label per line or IDX.
    #[arg(long, requires = "images")]
    labels: Option<PathBuf>,
    /// Directory with MNIST.bin / MNIST.target or the four IDX files.
    #[arg(long, env = "COLANET_DATA")]
    data_dir: Option<PathBuf>,
    /// Records before this index train, the rest test (default: 60,000, or all
    /// records when there are fewer).
    #[arg(long)]
    train_split: Option<usize>,
    /// Training images taken from the start of the training split (default: all).
    #[arg(long)]
    train_count: Option<usize>,
    /// Test images taken from the start of the test split (default: all).
    #[arg(long)]
    test_count: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DynamicsArg {
    /// Threshold 8.64249 with saturating plastic weights.
    ConfigUnits,
    /// Threshold 1 with clamped plastic weights.
    Normalized,
}

#[derive(Args, Debug, Clone)]
struct DynamicsArgs {
    #[arg(long, value_enum, default_value = "config-units")]
    dynamics: DynamicsArg,
    /// Overrides the neuron threshold of the chosen dynamics.
    #[arg(long)]
    threshold: Option<f64>,
}

impl DynamicsArgs {
    fn resolve(&self) -> Dynamics {
        let mut d = match self.dynamics {
            DynamicsArg::ConfigUnits => Dynamics::CONFIG_UNITS,
            DynamicsArg::Normalized => Dynamics::NORMALIZED,
        };
        if let Some(t) = self.threshold {
            d.threshold = t;
        }
        d
    }
}

#[derive(Args, Debug)]
struct TrainEvalArgs {
    /// Network config XML (default: the built-in reference network).
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Presentation window per image in ms (overrides the config).
    #[arg(long)]
    presentation: Option<u32>,
    /// Silence after each image in ms (overrides the config).
    #[arg(long)]
    silence: Option<u32>,
    #[command(flatten)]
    dynamics: DynamicsArgs,
}

#[derive(Args, Debug)]
struct OptimizeArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Seed of the initial population and breeding rng.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "ga-out")]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 100)]
    ga_population: usize,
    #[arg(long, default_value_t = 3)]
    ga_stagnation: usize,
    /// Seeded runs averaged per genome.
    #[arg(long, default_value_t = 4)]
    ga_repeats: usize,
    #[arg(long, default_value_t = 0.1)]
    ga_elitism: f64,
    #[arg(long, default_value_t = 0.5)]
    ga_mutation: f64,
    #[arg(long, default_value_t = 3)]
    ga_tournament: usize,
    /// Stops after this many generations, counting the initial one.
    #[arg(long)]
    ga_max_generations: Option<usize>,
    /// First simulation seed; run k of every genome uses base + k.
    #[arg(long, default_value_t = 0)]
    ga_base_seed: u64,
    /// Continues from the checkpoint in the output directory.
    #[arg(long)]
    resume: bool,
    /// Scores genomes with a closed-form surrogate instead of simulating.
    #[arg(long)]
    synthetic_fitness: bool,
    #[command(flatten)]
    dynamics: DynamicsArgs,
}

#[derive(Args, Debug)]
struct ExportArgs {
    /// Snapshot CSV `section,post_index,pre_index,weight`.
    #[arg(long)]
    weights: PathBuf,
    /// Output PPM path.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 10)]
    classes: usize,
    /// Also writes the grid as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Convert(a) => commands::convert(&a),
        Command::TrainEval(a) => commands::train_eval(&a),
        Command::Optimize(a) => commands::optimize(&a),
        Command::ExportWeights(a) => commands::export_weights(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
