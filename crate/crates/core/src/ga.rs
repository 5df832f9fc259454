//! Genetic search over the four network hyperparameters, minimizing the
//! mean absolute classification error of repeated seeded runs.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::config::{generate_config, Dynamics, Hyperparameters};
use crate::data::Dataset;
use crate::experiment::{train_eval_with, RunError};

#[derive(Debug, Error)]
pub enum GaError {
    #[error("invalid GA parameters: {0}")]
    Params(String),
    #[error("run with genome {genome} and seed {seed} failed: {source}")]
    Run {
        genome: Genome,
        seed: u64,
        #[source]
        source: Box<RunError>,
    },
    #[error("fitness for genome {genome} failed: {reason}")]
    Fitness { genome: Genome, reason: String },
    #[error("checkpoint line {line}: {reason}")]
    Checkpoint { line: usize, reason: String },
}

/// Learning rate, weight bounds and microcolumn count.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Genome {
    pub d: f64,
    pub w_max: f64,
    pub w_min: f64,
    pub m: u32,
}

impl std::fmt::Display for Genome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(d={}, w_max={}, w_min={}, M={})", self.d, self.w_max, self.w_min, self.m)
    }
}

fn log_uniform(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    rng.random_range(lo.ln()..=hi.ln()).exp()
}

impl Genome {
    pub fn from_hyperparameters(h: &Hyperparameters) -> Self {
        Self { d: h.learning_rate, w_max: h.w_max, w_min: h.w_min, m: h.microcolumns }
    }

    pub fn hyperparameters(&self) -> Hyperparameters {
        Hyperparameters { learning_rate: self.d, w_max: self.w_max, w_min: self.w_min, microcolumns: self.m }
    }

    pub fn in_range(&self) -> bool {
        self.hyperparameters().validate().is_ok()
    }

    /// Clamps every gene into its range.
    pub fn clamped(self) -> Self {
        let c = |v: f64, (lo, hi): (f64, f64)| v.clamp(lo, hi);
        let (mlo, mhi) = Hyperparameters::MICROCOLUMNS;
        Self {
            d: c(self.d, Hyperparameters::LEARNING_RATE),
            w_max: c(self.w_max, Hyperparameters::W_MAX),
            w_min: c(self.w_min, Hyperparameters::W_MIN),
            m: self.m.clamp(mlo, mhi),
        }
    }

    /// Log-uniform in the magnitude of each real gene, uniform in `M`.
    pub fn random(rng: &mut impl Rng) -> Self {
        let (wlo, whi) = Hyperparameters::W_MIN;
        let (mlo, mhi) = Hyperparameters::MICROCOLUMNS;
        Self {
            d: log_uniform(rng, Hyperparameters::LEARNING_RATE),
            w_max: log_uniform(rng, Hyperparameters::W_MAX),
            w_min: -log_uniform(rng, (-whi, -wlo)),
            m: rng.random_range(mlo..=mhi),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaParams {
    pub population: usize,
    /// Chance that an offspring is mutated at all.
    pub mutation_prob: f64,
    /// Chance that each gene of a mutated offspring changes.
    pub gene_mutation_prob: f64,
    pub elitism: f64,
    /// Generations without strict improvement before the search stops.
    pub stagnation_limit: usize,
    pub repeats: usize,
    pub tournament: usize,
    /// Standard deviation of the log-space jitter on real genes.
    pub sigma: f64,
    /// Largest step applied to `M` by a mutation.
    pub max_m_step: u32,
    /// Hard cap on generations, counting the initial one.
    pub max_generations: Option<usize>,
    pub base_seed: u64,
}

impl Default for GaParams {
    fn default() -> Self {
        Self {
            population: 100,
            mutation_prob: 0.5,
            gene_mutation_prob: 0.5,
            elitism: 0.1,
            stagnation_limit: 3,
            repeats: 4,
            tournament: 3,
            sigma: 0.3,
            max_m_step: 3,
            max_generations: None,
            base_seed: 0,
        }
    }
}

impl GaParams {
    pub fn validate(&self) -> Result<(), GaError> {
        let bad = |m: &str| Err(GaError::Params(m.into()));
        if self.population == 0 {
            return bad("population must be positive");
        }
        if !(self.elitism > 0.0 && self.elitism < 1.0) {
            return bad("elitism must lie strictly between 0 and 1");
        }
        if self.repeats == 0 {
            return bad("repeats must be at least 1");
        }
        if self.tournament == 0 {
            return bad("tournament size must be positive");
        }
        if !(0.0..=1.0).contains(&self.mutation_prob) || !(0.0..=1.0).contains(&self.gene_mutation_prob) {
            return bad("mutation probabilities must lie in [0, 1]");
        }
        if self.sigma.is_nan() || self.sigma < 0.0 {
            return bad("sigma must be non-negative");
        }
        Ok(())
    }

    /// `ceil(elitism * population)`, never the whole population.
    pub fn elite_count(&self) -> usize {
        let n = (self.elitism * self.population as f64 - 1e-9).ceil() as usize;
        n.clamp(1, self.population)
    }
}

/// Error of one training-and-test run.
pub trait Fitness: Sync {
    fn run_error(&self, genome: &Genome, seed: u64) -> Result<f64, GaError>;
}

/// Trains and tests the network generated from each genome.
pub struct SimulationFitness<'a> {
    pub dataset: &'a Dataset,
    pub dynamics: Dynamics,
}

impl Fitness for SimulationFitness<'_> {
    fn run_error(&self, genome: &Genome, seed: u64) -> Result<f64, GaError> {
        let wrap = |e: RunError| GaError::Run { genome: *genome, seed, source: Box::new(e) };
        let doc = generate_config(&genome.hyperparameters()).map_err(|e| wrap(e.into()))?;
        let out = train_eval_with(&doc, self.dataset, seed, self.dynamics).map_err(wrap)?;
        Ok(1.0 - out.metrics.accuracy)
    }
}

/// Wraps a closure as a fitness, for surrogate objectives.
pub struct FnFitness<F>(pub F);

impl<F: Fn(&Genome, u64) -> f64 + Sync> Fitness for FnFitness<F> {
    fn run_error(&self, genome: &Genome, seed: u64) -> Result<f64, GaError> {
        Ok((self.0)(genome, seed))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Individual {
    pub genome: Genome,
    /// Mean of `per_run_errors`.
    pub fitness: f64,
    pub per_run_errors: Vec<f64>,
}

impl Individual {
    fn from_errors(genome: Genome, per_run_errors: Vec<f64>) -> Self {
        let fitness = per_run_errors.iter().sum::<f64>() / per_run_errors.len() as f64;
        Self { genome, fitness, per_run_errors }
    }
}

fn evaluate_jobs(fitness: &dyn Fitness, jobs: &[(Genome, u64)]) -> Result<Vec<f64>, GaError> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        jobs.par_iter().map(|(g, s)| fitness.run_error(g, *s)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        jobs.iter().map(|(g, s)| fitness.run_error(g, *s)).collect()
    }
}

/// Runs `repeats` independent evaluations with seeds `base_seed + k`.
pub fn evaluate_genome(
    fitness: &dyn Fitness,
    genome: Genome,
    repeats: usize,
    base_seed: u64,
) -> Result<Individual, GaError> {
    Ok(evaluate_population(fitness, &[genome], repeats, base_seed)?.remove(0))
}

/// Evaluates every genome. Results are merged by genome and repeat index,
/// so parallel and serial runs agree exactly.
pub fn evaluate_population(
    fitness: &dyn Fitness,
    genomes: &[Genome],
    repeats: usize,
    base_seed: u64,
) -> Result<Vec<Individual>, GaError> {
    let jobs: Vec<(Genome, u64)> =
        genomes.iter().flat_map(|&g| (0..repeats as u64).map(move |k| (g, base_seed.wrapping_add(k)))).collect();
    let errors = evaluate_jobs(fitness, &jobs)?;
    Ok(genomes.iter().zip(errors.chunks(repeats)).map(|(&g, e)| Individual::from_errors(g, e.to_vec())).collect())
}

/// Indices sorted best first; ties keep population order.
fn ranking(population: &[Individual]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..population.len()).collect();
    idx.sort_by(|&a, &b| population[a].fitness.total_cmp(&population[b].fitness));
    idx
}

fn tournament<'a>(population: &'a [Individual], size: usize, rng: &mut impl Rng) -> &'a Individual {
    (0..size)
        .map(|_| &population[rng.random_range(0..population.len())])
        .min_by(|a, b| a.fitness.total_cmp(&b.fitness))
        .expect("tournament size is positive")
}

fn mutate(g: Genome, params: &GaParams, rng: &mut impl Rng) -> Genome {
    let jitter = Normal::new(0.0, params.sigma).expect("validated sigma");
    let mut g = g;
    let p = params.gene_mutation_prob;
    if rng.random_bool(p) {
        g.d *= jitter.sample(rng).exp();
    }
    if rng.random_bool(p) {
        g.w_max *= jitter.sample(rng).exp();
    }
    if rng.random_bool(p) {
        g.w_min *= jitter.sample(rng).exp();
    }
    if rng.random_bool(p) && params.max_m_step > 0 {
        let step = rng.random_range(1..=params.max_m_step) as i64;
        let signed = if rng.random_bool(0.5) { step } else { -step };
        g.m = (i64::from(g.m) + signed).max(0) as u32;
    }
    g.clamped()
}

/// Produces the next generation's genomes: the elites first, unchanged,
/// then offspring of tournament-selected parents by uniform crossover and
/// occasional mutation.
pub fn evolve_generation(population: &[Individual], params: &GaParams, rng: &mut impl Rng) -> Vec<Genome> {
    let n = params.population;
    let elites = params.elite_count().min(population.len());
    let mut next: Vec<Genome> = ranking(population).into_iter().take(elites).map(|i| population[i].genome).collect();
    while next.len() < n {
        let a = tournament(population, params.tournament, rng).genome;
        let b = tournament(population, params.tournament, rng).genome;
        let pick = |rng: &mut _, x, y| if Rng::random_bool(rng, 0.5) { x } else { y };
        let mut child = Genome {
            d: pick(rng, a.d, b.d),
            w_max: pick(rng, a.w_max, b.w_max),
            w_min: pick(rng, a.w_min, b.w_min),
            m: if rng.random_bool(0.5) { a.m } else { b.m },
        };
        if rng.random_bool(params.mutation_prob) {
            child = mutate(child, params, rng);
        }
        next.push(child.clamped());
    }
    next
}

/// One line of the GA log.
#[derive(Clone, Debug, PartialEq)]
pub struct GenerationRecord {
    pub generation: usize,
    pub best_error: f64,
    pub mean_error: f64,
    pub best: Genome,
}

pub const LOG_HEADER: &str = "generation,best_error,mean_error,best_d,best_wmax,best_wmin,best_M";

impl GenerationRecord {
    pub fn csv_line(&self) -> String {
        let b = &self.best;
        format!("{},{},{},{},{},{},{}", self.generation, self.best_error, self.mean_error, b.d, b.w_max, b.w_min, b.m)
    }
}

/// CSV log with header.
pub fn log_csv(history: &[GenerationRecord]) -> String {
    let mut out = format!("{LOG_HEADER}\n");
    for r in history {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    out
}

/// Resumable search state, saved after every generation.
#[derive(Clone, Debug)]
pub struct GaState {
    pub params: GaParams,
    /// Evaluated current generation.
    pub population: Vec<Individual>,
    pub best: Individual,
    pub stagnant: usize,
    pub history: Vec<GenerationRecord>,
    rng: ChaCha8Rng,
}

impl GaState {
    /// Evaluates a random initial population (generation 0).
    pub fn new(params: GaParams, fitness: &dyn Fitness, seed: u64) -> Result<Self, GaError> {
        params.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let genomes: Vec<Genome> = (0..params.population).map(|_| Genome::random(&mut rng)).collect();
        Self::from_genomes(params, fitness, &genomes, rng)
    }

    /// Evaluates a given initial population.
    pub fn with_population(
        params: GaParams,
        fitness: &dyn Fitness,
        genomes: &[Genome],
        seed: u64,
    ) -> Result<Self, GaError> {
        params.validate()?;
        if genomes.is_empty() {
            return Err(GaError::Params("initial population is empty".into()));
        }
        Self::from_genomes(params, fitness, genomes, ChaCha8Rng::seed_from_u64(seed))
    }

    fn from_genomes(
        params: GaParams,
        fitness: &dyn Fitness,
        genomes: &[Genome],
        rng: ChaCha8Rng,
    ) -> Result<Self, GaError> {
        let population = evaluate_population(fitness, genomes, params.repeats, params.base_seed)?;
        let best = population[ranking(&population)[0]].clone();
        let mut state = Self { params, population, best, stagnant: 0, history: Vec::new(), rng };
        state.record();
        Ok(state)
    }

    fn record(&mut self) {
        let gen_best = &self.population[ranking(&self.population)[0]];
        let mean = self.population.iter().map(|i| i.fitness).sum::<f64>() / self.population.len() as f64;
        self.history.push(GenerationRecord {
            generation: self.history.len(),
            best_error: gen_best.fitness,
            mean_error: mean,
            best: gen_best.genome,
        });
    }

    pub fn generation(&self) -> usize {
        self.history.len() - 1
    }

    pub fn finished(&self) -> bool {
        self.stagnant >= self.params.stagnation_limit
            || self.params.max_generations.is_some_and(|cap| self.history.len() >= cap)
    }

    /// Breeds and evaluates one generation. Elites keep their fitness.
    pub fn advance(&mut self, fitness: &dyn Fitness) -> Result<(), GaError> {
        let genomes = evolve_generation(&self.population, &self.params, &mut self.rng);
        let elites = self.params.elite_count().min(self.population.len());
        let carried: Vec<Individual> =
            ranking(&self.population).into_iter().take(elites).map(|i| self.population[i].clone()).collect();
        let offspring = evaluate_population(fitness, &genomes[elites..], self.params.repeats, self.params.base_seed)?;
        self.population = carried.into_iter().chain(offspring).collect();
        let gen_best = &self.population[ranking(&self.population)[0]];
        if gen_best.fitness < self.best.fitness {
            self.best = gen_best.clone();
            self.stagnant = 0;
        } else {
            self.stagnant += 1;
        }
        self.record();
        Ok(())
    }

    /// Text checkpoint: scalars as `key=value`, then one line per individual
    /// and per log row.
    pub fn to_checkpoint(&self) -> String {
        let p = &self.params;
        let mut out = String::from("colanet-ga-checkpoint 1\n");
        let _ = writeln!(out, "population={}", p.population);
        let _ = writeln!(out, "mutation_prob={}", p.mutation_prob);
        let _ = writeln!(out, "gene_mutation_prob={}", p.gene_mutation_prob);
        let _ = writeln!(out, "elitism={}", p.elitism);
        let _ = writeln!(out, "stagnation_limit={}", p.stagnation_limit);
        let _ = writeln!(out, "repeats={}", p.repeats);
        let _ = writeln!(out, "tournament={}", p.tournament);
        let _ = writeln!(out, "sigma={}", p.sigma);
        let _ = writeln!(out, "max_m_step={}", p.max_m_step);
        let _ = writeln!(out, "max_generations={}", p.max_generations.map_or("-".into(), |g| g.to_string()));
        let _ = writeln!(out, "base_seed={}", p.base_seed);
        let _ = writeln!(out, "stagnant={}", self.stagnant);
        let seed: String = self.rng.get_seed().iter().map(|b| format!("{b:02x}")).collect();
        let _ = writeln!(out, "rng_seed={seed}");
        let _ = writeln!(out, "rng_stream={}", self.rng.get_stream());
        let _ = writeln!(out, "rng_word_pos={}", self.rng.get_word_pos());
        let _ = writeln!(out, "best={}", individual_line(&self.best));
        for i in &self.population {
            let _ = writeln!(out, "individual={}", individual_line(i));
        }
        for r in &self.history {
            let _ = writeln!(out, "log={}", r.csv_line());
        }
        out
    }

    pub fn from_checkpoint(text: &str) -> Result<Self, GaError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, "colanet-ga-checkpoint 1")) => {}
            _ => return Err(GaError::Checkpoint { line: 1, reason: "missing checkpoint header".into() }),
        }
        let mut params = GaParams::default();
        let mut stagnant = 0;
        let mut seed = None;
        let mut stream = 0u64;
        let mut word_pos = 0u128;
        let mut best = None;
        let mut population = Vec::new();
        let mut history = Vec::new();
        for (i, line) in lines {
            let n = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |reason: &str| GaError::Checkpoint { line: n, reason: reason.into() };
            let (key, value) = line.split_once('=').ok_or_else(|| bad("expected key=value"))?;
            fn num<T: std::str::FromStr>(v: &str, n: usize) -> Result<T, GaError> {
                v.trim().parse().map_err(|_| GaError::Checkpoint { line: n, reason: format!("bad number {v:?}") })
            }
            match key {
                "population" => params.population = num(value, n)?,
                "mutation_prob" => params.mutation_prob = num(value, n)?,
                "gene_mutation_prob" => params.gene_mutation_prob = num(value, n)?,
                "elitism" => params.elitism = num(value, n)?,
                "stagnation_limit" => params.stagnation_limit = num(value, n)?,
                "repeats" => params.repeats = num(value, n)?,
                "tournament" => params.tournament = num(value, n)?,
                "sigma" => params.sigma = num(value, n)?,
                "max_m_step" => params.max_m_step = num(value, n)?,
                "max_generations" => params.max_generations = if value == "-" { None } else { Some(num(value, n)?) },
                "base_seed" => params.base_seed = num(value, n)?,
                "stagnant" => stagnant = num(value, n)?,
                "rng_seed" => {
                    let bytes: Vec<u8> = (0..value.len())
                        .step_by(2)
                        .map(|k| value.get(k..k + 2).and_then(|h| u8::from_str_radix(h, 16).ok()))
                        .collect::<Option<_>>()
                        .ok_or_else(|| bad("bad rng seed"))?;
                    seed = Some(<[u8; 32]>::try_from(bytes).map_err(|_| bad("rng seed must be 32 bytes"))?);
                }
                "rng_stream" => stream = num(value, n)?,
                "rng_word_pos" => word_pos = num(value, n)?,
                "best" => best = Some(parse_individual(value, n)?),
                "individual" => population.push(parse_individual(value, n)?),
                "log" => history.push(parse_record(value, n)?),
                _ => return Err(bad(&format!("unknown key {key:?}"))),
            }
        }
        params.validate()?;
        let missing = |what: &str| GaError::Checkpoint { line: 0, reason: format!("missing {what}") };
        let mut rng = ChaCha8Rng::from_seed(seed.ok_or_else(|| missing("rng_seed"))?);
        rng.set_stream(stream);
        rng.set_word_pos(word_pos);
        if population.is_empty() {
            return Err(missing("individuals"));
        }
        if history.is_empty() {
            return Err(missing("log"));
        }
        Ok(Self { params, population, best: best.ok_or_else(|| missing("best"))?, stagnant, history, rng })
    }
}

fn individual_line(i: &Individual) -> String {
    let g = &i.genome;
    let errs: Vec<String> = i.per_run_errors.iter().map(f64::to_string).collect();
    format!("{},{},{},{},{}", g.d, g.w_max, g.w_min, g.m, errs.join(";"))
}

fn parse_individual(v: &str, line: usize) -> Result<Individual, GaError> {
    let bad = |reason: &str| GaError::Checkpoint { line, reason: reason.into() };
    let f: Vec<&str> = v.split(',').collect();
    let [d, w_max, w_min, m, errs] = f[..] else {
        return Err(bad("individual needs 5 fields"));
    };
    let p = |s: &str| s.parse::<f64>().map_err(|_| bad("bad number"));
    let genome = Genome { d: p(d)?, w_max: p(w_max)?, w_min: p(w_min)?, m: m.parse().map_err(|_| bad("bad M"))? };
    let errors: Vec<f64> = errs.split(';').map(p).collect::<Result<_, _>>()?;
    if errors.is_empty() {
        return Err(bad("no run errors"));
    }
    Ok(Individual::from_errors(genome, errors))
}

fn parse_record(v: &str, line: usize) -> Result<GenerationRecord, GaError> {
    let bad = || GaError::Checkpoint { line, reason: "bad log row".into() };
    let f: Vec<&str> = v.split(',').collect();
    let [g, best, mean, d, w_max, w_min, m] = f[..] else {
        return Err(bad());
    };
    let p = |s: &str| s.parse::<f64>().map_err(|_| bad());
    Ok(GenerationRecord {
        generation: g.parse().map_err(|_| bad())?,
        best_error: p(best)?,
        mean_error: p(mean)?,
        best: Genome { d: p(d)?, w_max: p(w_max)?, w_min: p(w_min)?, m: m.parse().map_err(|_| bad())? },
    })
}

#[derive(Clone, Debug)]
pub struct GaOutcome {
    pub best: Individual,
    pub history: Vec<GenerationRecord>,
}

/// Runs the search to completion from a fresh random population.
pub fn run_ga(params: GaParams, fitness: &dyn Fitness, seed: u64) -> Result<GaOutcome, GaError> {
    let state = GaState::new(params, fitness, seed)?;
    resume_ga(state, fitness, |_| {})
}

/// Continues a search, calling `on_generation` after each generation
/// (e.g. to write a checkpoint).
pub fn resume_ga(
    mut state: GaState,
    fitness: &dyn Fitness,
    mut on_generation: impl FnMut(&GaState),
) -> Result<GaOutcome, GaError> {
    while !state.finished() {
        state.advance(fitness)?;
        on_generation(&state);
    }
    Ok(GaOutcome { best: state.best, history: state.history })
}
