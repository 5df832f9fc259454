use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use colanet::config::{
    generate_config, parse_config, reference_config, serialize_config, ConfigDocument, ConfigError, Hyperparameters,
    ReceptorKind,
};
use colanet::data::{load_flat, load_idx, load_idx_parts, load_mnist_dir, write_flat, DataError, Dataset, IDX_FILES};
use colanet::evaluation::{predictions_csv, EvalError, WeightGrid};
use colanet::experiment::{train_eval_with, RunError, RunOutcome};
use colanet::ga::{log_csv, resume_ga, Fitness, FnFitness, GaError, GaParams, GaState, Genome, SimulationFitness};
use colanet::plasticity::{parse_snapshot, snapshot_csv, SnapshotError};
use thiserror::Error;

use crate::{ConvertArgs, DataArgs, ExportArgs, OptimizeArgs, TrainEvalArgs};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("reading {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Config { path: String, source: ConfigError },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("{path}: {source}")]
    Snapshot { path: PathBuf, source: SnapshotError },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Ga(#[from] GaError),
    #[error("writing {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("writing output: {0}")]
    Output(DataError),
}

impl CliError {
    /// 2 for bad arguments or inputs, 1 for failures after the inputs were accepted.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_)
            | CliError::Read { .. }
            | CliError::Config { .. }
            | CliError::Data(_)
            | CliError::Snapshot { .. }
            | CliError::Eval(_)
            | CliError::Run(RunError::Config(_))
            | CliError::Ga(GaError::Params(_) | GaError::Checkpoint { .. }) => 2,
            _ => 1,
        }
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Read { path: path.to_path_buf(), source })
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Write { path: path.to_path_buf(), source })
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Write { path: dir.to_path_buf(), source })
}

fn is_idx(path: &Path) -> Result<bool, CliError> {
    use std::io::Read;
    let mut magic = [0u8; 4];
    let mut f = fs::File::open(path).map_err(|source| CliError::Read { path: path.to_path_buf(), source })?;
    Ok(f.read_exact(&mut magic).is_ok() && magic == [0, 0, 8, 3])
}

fn no_data() -> CliError {
    CliError::Usage("no dataset: pass --images and --labels, --data-dir, or set COLANET_DATA".into())
}

/// Loads the full timeline, then trims it to the requested counts.
fn load_dataset(args: &DataArgs) -> Result<(Dataset, String), CliError> {
    let (full, source) = match (&args.images, &args.labels, &args.data_dir) {
        (Some(images), Some(labels), _) => {
            let ds = if is_idx(images)? { load_idx(images, labels)? } else { load_flat(images, labels)? };
            (ds, format!("{} + {}", images.display(), labels.display()))
        }
        (None, None, Some(dir)) => (load_mnist_dir(dir)?, dir.display().to_string()),
        _ => return Err(no_data()),
    };
    let full = match args.train_split {
        Some(split) => Dataset::new(full.records().to_vec(), split)?,
        None => full,
    };
    let train = args.train_count.unwrap_or(full.train_count());
    let test = args.test_count.unwrap_or(full.len() - full.train_count());
    if train > full.train_count() || test > full.len() - full.train_count() {
        return Err(CliError::Usage(format!(
            "requested {train} train / {test} test images but the data has {} / {}",
            full.train_count(),
            full.len() - full.train_count()
        )));
    }
    if test == 0 {
        return Err(CliError::Usage("no test images: the data has no test split or --test-count is 0".into()));
    }
    Ok((full.subset(train, test), source))
}

fn load_config(path: Option<&Path>) -> Result<(ConfigDocument, String), CliError> {
    match path {
        None => Ok((reference_config(), "<reference>".into())),
        Some(p) => {
            let text = read_text(p)?;
            let doc =
                parse_config(&text).map_err(|source| CliError::Config { path: p.display().to_string(), source })?;
            Ok((doc, p.display().to_string()))
        }
    }
}

fn override_timing(doc: &mut ConfigDocument, presentation: Option<u32>, silence: Option<u32>) -> Result<(), CliError> {
    if presentation.is_none() && silence.is_none() {
        return Ok(());
    }
    let args = doc
        .receptors
        .iter_mut()
        .find_map(|r| match &mut r.kind {
            ReceptorKind::Image(a) => Some(a),
            _ => None,
        })
        .ok_or_else(|| CliError::Usage("config has no image receptor to retime".into()))?;
    let old_silence = args.ntact_per_image - args.image_presentation_time;
    let p = presentation.unwrap_or(args.image_presentation_time);
    let s = silence.unwrap_or(old_silence);
    args.image_presentation_time = p;
    args.ntact_per_image = p + s;
    Ok(())
}

pub fn convert(args: &ConvertArgs) -> Result<(), CliError> {
    let ds = if args.images.is_empty() && args.labels.is_empty() {
        let dir = args.data_dir.as_ref().ok_or_else(no_data)?;
        let paths: Vec<_> = IDX_FILES.iter().map(|(i, l)| (dir.join(i), dir.join(l))).collect();
        let parts: Vec<(&Path, &Path)> = paths.iter().map(|(i, l)| (i.as_path(), l.as_path())).collect();
        load_idx_parts(&parts)?
    } else {
        if args.images.len() != args.labels.len() {
            return Err(CliError::Usage(format!(
                "{} image files but {} label files",
                args.images.len(),
                args.labels.len()
            )));
        }
        let parts: Vec<(&Path, &Path)> =
            args.images.iter().zip(&args.labels).map(|(i, l)| (i.as_path(), l.as_path())).collect();
        load_idx_parts(&parts)?
    };
    create_dir(&args.out_dir)?;
    let (bin, target) = (args.out_dir.join("MNIST.bin"), args.out_dir.join("MNIST.target"));
    write_flat(&ds, &bin, &target).map_err(CliError::Output)?;
    println!("wrote {} records to {} and {}", ds.len(), bin.display(), target.display());
    Ok(())
}

fn plastic_snapshot(out: &RunOutcome) -> Option<String> {
    let s = out.network.plastic_section()?;
    Some(snapshot_csv(out.network.section_name(s), out.network.plastic_into(s)?))
}

pub fn train_eval(args: &TrainEvalArgs) -> Result<(), CliError> {
    let (mut doc, config_source) = load_config(args.config.as_deref())?;
    override_timing(&mut doc, args.presentation, args.silence)?;
    let (ds, data_source) = load_dataset(&args.data)?;
    let dynamics = args.dynamics.resolve();
    let out = train_eval_with(&doc, &ds, args.seed, dynamics)?;

    create_dir(&args.out_dir)?;
    let dir = &args.out_dir;
    write(&dir.join("predictions.csv"), predictions_csv(&out.predictions))?;
    write(&dir.join("metrics.txt"), out.metrics.summary())?;
    if let Some(csv) = plastic_snapshot(&out) {
        write(&dir.join("weights.csv"), &csv)?;
        let s = out.network.plastic_section().expect("snapshot implies a plastic section");
        let grid = WeightGrid::from_matrix(out.network.plastic_into(s).expect("plastic"), out.network.class_dim())?;
        write(&dir.join("weights.ppm"), grid.to_ppm())?;
    }
    let mut manifest = String::new();
    let _ = writeln!(manifest, "config={config_source}");
    let _ = writeln!(manifest, "data={data_source}");
    let _ = writeln!(manifest, "seed={}", args.seed);
    let _ = writeln!(manifest, "train_images={}", ds.train_count());
    let _ = writeln!(manifest, "test_images={}", ds.len() - ds.train_count());
    let _ = writeln!(manifest, "threshold={}", dynamics.threshold);
    let _ = writeln!(manifest, "weight_map={:?}", dynamics.weight_map);
    let _ = writeln!(manifest, "learning_until={}", out.learning_until);
    let _ = writeln!(manifest, "output_dir={}", dir.display());
    write(&dir.join("manifest.txt"), manifest)?;

    print!("{}", out.metrics.summary());
    Ok(())
}

/// Squared distance from the published optimum in log space, for smoke
/// tests that must not simulate.
fn surrogate_error(g: &Genome, _seed: u64) -> f64 {
    let o = Hyperparameters::OPTIMUM;
    let (mlo, mhi) = Hyperparameters::MICROCOLUMNS;
    let log_gap = |a: f64, b: f64| (a.abs().ln() - b.abs().ln()) / 10.0;
    let m_gap = (f64::from(g.m) - f64::from(o.microcolumns)) / f64::from(mhi - mlo);
    log_gap(g.d, o.learning_rate).powi(2)
        + log_gap(g.w_max, o.w_max).powi(2)
        + log_gap(g.w_min, o.w_min).powi(2)
        + m_gap.powi(2)
}

pub fn optimize(args: &OptimizeArgs) -> Result<(), CliError> {
    let dynamics = args.dynamics.resolve();
    let dataset = if args.synthetic_fitness { None } else { Some(load_dataset(&args.data)?.0) };
    let surrogate = FnFitness(surrogate_error);
    let simulation = dataset.as_ref().map(|d| SimulationFitness { dataset: d, dynamics });
    let fitness: &dyn Fitness = match &simulation {
        Some(s) => s,
        None => &surrogate,
    };

    create_dir(&args.out_dir)?;
    let checkpoint = args.out_dir.join("ga.checkpoint");
    let state = if args.resume {
        let mut state = GaState::from_checkpoint(&read_text(&checkpoint)?)?;
        state.params.max_generations = args.ga_max_generations;
        state
    } else {
        let params = GaParams {
            population: args.ga_population,
            mutation_prob: args.ga_mutation,
            elitism: args.ga_elitism,
            stagnation_limit: args.ga_stagnation,
            repeats: args.ga_repeats,
            tournament: args.ga_tournament,
            max_generations: args.ga_max_generations,
            base_seed: args.ga_base_seed,
            ..GaParams::default()
        };
        let state = GaState::new(params, fitness, args.seed)?;
        write(&checkpoint, state.to_checkpoint())?;
        state
    };

    let mut write_err = None;
    let outcome = resume_ga(state, fitness, |s| {
        eprintln!("generation {} best error {:.4}", s.generation(), s.best.fitness);
        if let Err(e) = write(&checkpoint, s.to_checkpoint()) {
            write_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = write_err {
        return Err(e);
    }

    write(&args.out_dir.join("ga_log.csv"), log_csv(&outcome.history))?;
    let best = outcome.best.genome;
    let doc = generate_config(&best.hyperparameters())
        .map_err(|source| CliError::Config { path: "best genome".into(), source })?;
    write(&args.out_dir.join("best_config.xml"), serialize_config(&doc))?;
    if let Some(ds) = &dataset {
        let out = train_eval_with(&doc, ds, args.ga_base_seed, dynamics)?;
        if let Some(csv) = plastic_snapshot(&out) {
            write(&args.out_dir.join("best_weights.csv"), csv)?;
        }
    }
    println!("best {best} error {:.4} after {} generations", outcome.best.fitness, outcome.history.len());
    Ok(())
}

pub fn export_weights(args: &ExportArgs) -> Result<(), CliError> {
    if args.classes == 0 {
        return Err(CliError::Usage("--classes must be positive".into()));
    }
    let text = read_text(&args.weights)?;
    let rows = parse_snapshot(&text).map_err(|source| CliError::Snapshot { path: args.weights.clone(), source })?;
    let grid = WeightGrid::from_snapshot(&rows, args.classes)?;
    write(&args.out, grid.to_ppm())?;
    if let Some(csv) = &args.csv {
        write(csv, grid.to_csv())?;
    }
    println!("wrote {}x{} grid to {}", grid.width(), grid.height(), args.out.display());
    Ok(())
}
