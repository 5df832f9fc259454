//! End-to-end training and testing run over a dataset.

use thiserror::Error;

use crate::config::{build_network_with, encoding_params, readout_section, ConfigDocument, ConfigError, Dynamics};
use crate::data::Dataset;
use crate::encoding::build_stream;
use crate::engine::{run, EngineError, Network};
use crate::evaluation::{classify_window, evaluate, EvalError, Metrics, Prediction};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("readout section {0:?} is not declared")]
    NoReadout(String),
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub predictions: Vec<Prediction>,
    pub metrics: Metrics,
    pub network: Network,
    /// Timestep from which plasticity was frozen.
    pub learning_until: u64,
}

/// Trains on `dataset.train()` then classifies every test image.
///
/// Plasticity stops at the end of the last training window, whatever
/// learning time the config declares. Output spikes are tallied per class
/// over each full test window (presentation plus silence).
pub fn train_eval(doc: &ConfigDocument, dataset: &Dataset, seed: u64) -> Result<RunOutcome, RunError> {
    train_eval_with(doc, dataset, seed, Dynamics::default())
}

/// As [`train_eval`] with explicit dynamics.
pub fn train_eval_with(
    doc: &ConfigDocument,
    dataset: &Dataset,
    seed: u64,
    dynamics: Dynamics,
) -> Result<RunOutcome, RunError> {
    let params = encoding_params(doc)?;
    let mut network = build_network_with(doc, seed, dynamics)?;
    let readout = readout_section(doc).unwrap_or("OUT");
    let out = network.section_index(readout).ok_or_else(|| RunError::NoReadout(readout.into()))?;
    let classes = network.class_dim();

    let period = params.period();
    let learning_until = dataset.train_count() as u64 * period;
    network.set_learning_until(learning_until);

    let mut stream = build_stream(dataset, &params).peekable();
    let end = dataset.len() as u64 * period;
    run(&mut network, &mut stream, 0, learning_until, true, |_, _| {})?;

    let first_test = dataset.train_count();
    let mut counts = vec![vec![0u32; classes]; dataset.len() - first_test];
    run(&mut network, &mut stream, learning_until, end, false, |t, fired| {
        let window = (t / period) as usize - first_test;
        for &n in &fired[out] {
            counts[window][n as usize % classes] += 1;
        }
    })?;

    let predictions: Vec<Prediction> = counts
        .iter()
        .zip(dataset.test())
        .enumerate()
        .map(|(k, (c, rec))| Prediction {
            image_index: first_test + k,
            predicted: classify_window(c),
            actual: rec.label(),
        })
        .collect();
    let metrics = evaluate(&predictions)?;
    Ok(RunOutcome { predictions, metrics, network, learning_until })
}
