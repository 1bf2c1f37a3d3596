//! Generational genetic algorithm with tournament selection, uniform
//! crossover, replacement mutation, elitism and memoised fitness.
//!
//! A run evaluates `generations` populations: the random initial population
//! is generation 0, and every later generation is bred from its predecessor.
//! Each population member is looked up in the [`EvaluationCache`] first; only
//! genomes never seen before reach the backend, so the best fitness so far can
//! only go up.

mod operators;

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fitness::{BackendError, FitnessBackend};
use crate::pulse_codec::{random_genome, GeneSpace, Genome};
use crate::runlog::{LogRecord, RunLog, RunLogHeader};

pub use operators::{
    crossover_with_mask, next_generation, pairing_schedule, random_mutation, tournament_select, uniform_crossover,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GaError {
    #[error("invalid GA configuration: {0}")]
    Config(String),
    #[error("individual {0} has not been evaluated")]
    Unevaluated(usize),
    #[error("parents have different gene counts ({a} vs {b})")]
    Mismatch { a: usize, b: usize },
}

/// Hyper-parameters of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub genes: usize,
    pub generations: usize,
    pub population_size: usize,
    pub parents_mating: usize,
    pub tournament_size: usize,
    pub elitism_size: usize,
    pub mutation_probability: f64,
    pub rng_seed: u64,
    /// Stop after this many generations without improvement. Off unless set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stall_generations: Option<usize>,
}

impl GaConfig {
    /// 16 genes, 50 generations, 60 solutions, 10 parents, tournament 10,
    /// elitism 5, mutation 0.3.
    pub fn freeform(seed: u64) -> Self {
        Self {
            genes: 16,
            generations: 50,
            population_size: 60,
            parents_mating: 10,
            tournament_size: 10,
            elitism_size: 5,
            mutation_probability: 0.3,
            rng_seed: seed,
            stall_generations: None,
        }
    }

    /// As [`GaConfig::freeform`] with 3 genes and 25 generations.
    pub fn gaussian(seed: u64) -> Self {
        Self {
            genes: 3,
            generations: 25,
            ..Self::freeform(seed)
        }
    }

    pub fn children_per_generation(&self) -> usize {
        self.population_size - self.elitism_size
    }

    pub fn validate(&self) -> Result<(), GaError> {
        let fail = |msg: String| Err(GaError::Config(msg));
        if self.generations == 0 {
            return fail("generations must be at least 1".into());
        }
        if self.population_size == 0 {
            return fail("population_size must be at least 1".into());
        }
        if self.elitism_size > self.population_size {
            return fail(format!(
                "elitism_size {} exceeds population_size {}",
                self.elitism_size, self.population_size
            ));
        }
        if self.children_per_generation() > 0 {
            if self.parents_mating < 2 {
                return fail(format!("parents_mating must be at least 2, got {}", self.parents_mating));
            }
            if self.tournament_size == 0 || self.tournament_size > self.population_size {
                return fail(format!(
                    "tournament_size must be in 1..={}, got {}",
                    self.population_size, self.tournament_size
                ));
            }
        }
        if !(0.0..=1.0).contains(&self.mutation_probability) {
            return fail(format!(
                "mutation_probability must be in [0, 1], got {}",
                self.mutation_probability
            ));
        }
        if self.stall_generations == Some(0) {
            return fail("stall_generations must be positive when set".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub genome: Genome,
    pub fitness: Option<f64>,
}

impl Individual {
    pub fn new(genome: Genome) -> Self {
        Self { genome, fitness: None }
    }
}

/// Fitness and renormalisation factor stored per genome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CachedFitness {
    pub fitness: f64,
    pub beta: Option<f64>,
}

/// Memo table keyed by the exact genome value.
#[derive(Debug, Default, Clone)]
pub struct EvaluationCache {
    table: HashMap<Genome, CachedFitness>,
}

impl EvaluationCache {
    pub fn get(&self, genome: &Genome) -> Option<CachedFitness> {
        self.table.get(genome).copied()
    }

    pub fn contains(&self, genome: &Genome) -> bool {
        self.table.contains_key(genome)
    }

    /// Stores the first fitness seen for a genome; later inserts are ignored.
    pub fn insert(&mut self, genome: Genome, value: CachedFitness) -> CachedFitness {
        *self.table.entry(genome).or_insert(value)
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

/// Snapshot of the search after one generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: usize,
    pub best_fitness: f64,
    /// Genomes sent to the backend in this generation (cache misses).
    pub new_evaluations: usize,
    pub best_genome: Genome,
}

/// Independent deterministic random streams derived from one root seed.
#[derive(Debug, Clone)]
pub struct RngStreams {
    pub init: ChaCha8Rng,
    pub selection: ChaCha8Rng,
    pub crossover: ChaCha8Rng,
    pub mutation: ChaCha8Rng,
}

impl RngStreams {
    pub fn new(seed: u64) -> Self {
        let stream = |id: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(id);
            rng
        };
        Self {
            init: stream(0),
            selection: stream(1),
            crossover: stream(2),
            mutation: stream(3),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub best: Individual,
    pub history: Vec<GenerationRecord>,
    pub log: RunLog,
    pub backend_calls: usize,
}

/// A run stopped early. Everything evaluated before the failure is kept.
#[derive(Debug, Error)]
pub enum RunFailure {
    #[error(transparent)]
    Config(GaError),
    #[error("backend failed in generation {generation}: {source}")]
    Backend {
        generation: usize,
        #[source]
        source: BackendError,
        history: Vec<GenerationRecord>,
        log: RunLog,
    },
    #[error("generation observer failed: {0}")]
    Observer(#[source] std::io::Error, RunLog),
}

impl RunFailure {
    /// The partial log, when the run got far enough to have one.
    pub fn partial_log(&self) -> Option<&RunLog> {
        match self {
            Self::Config(_) => None,
            Self::Backend { log, .. } | Self::Observer(_, log) => Some(log),
        }
    }
}

/// Runs the GA to completion.
pub fn run<B: FitnessBackend + ?Sized>(space: &GeneSpace, backend: &B, config: &GaConfig) -> Result<RunOutcome, RunFailure> {
    run_with_observer(space, backend, config, |_, _| Ok(()))
}

/// Runs the GA, handing each finished generation and its new log records to
/// `observer` (used to persist the log incrementally).
pub fn run_with_observer<B, F>(
    space: &GeneSpace,
    backend: &B,
    config: &GaConfig,
    mut observer: F,
) -> Result<RunOutcome, RunFailure>
where
    B: FitnessBackend + ?Sized,
    F: FnMut(&GenerationRecord, &[LogRecord]) -> std::io::Result<()>,
{
    config.validate().map_err(RunFailure::Config)?;
    if config.genes != space.len() {
        return Err(RunFailure::Config(GaError::Config(format!(
            "config has {} genes but the gene space has {}",
            config.genes,
            space.len()
        ))));
    }

    let mut streams = RngStreams::new(config.rng_seed);
    let mut cache = EvaluationCache::default();
    let mut log = RunLog::new(RunLogHeader {
        encoding: None,
        genes: config.genes,
        generations: config.generations,
        population_size: config.population_size,
        seed: config.rng_seed,
    });
    let mut history: Vec<GenerationRecord> = Vec::with_capacity(config.generations);
    let mut best: Option<Individual> = None;
    let mut backend_calls = 0;
    let mut stalled = 0;

    let mut population: Vec<Individual> = (0..config.population_size)
        .map(|_| Individual::new(random_genome(space, &mut streams.init)))
        .collect();

    for generation in 0..config.generations {
        if generation > 0 {
            population = next_generation(&population, config, space, &mut streams).map_err(RunFailure::Config)?;
        }

        // cache misses in population order, each distinct genome once
        let mut pending: Vec<Genome> = Vec::new();
        for ind in &population {
            if !cache.contains(&ind.genome) && !pending.contains(&ind.genome) {
                pending.push(ind.genome.clone());
            }
        }
        let results = backend.evaluate_batch(&pending);
        backend_calls += pending.len();
        let mut failure = None;
        let mut fresh = Vec::with_capacity(pending.len());
        for (genome, result) in pending.into_iter().zip(results) {
            match result {
                Ok(eval) => {
                    cache.insert(
                        genome.clone(),
                        CachedFitness {
                            fitness: eval.fitness,
                            beta: eval.beta,
                        },
                    );
                    fresh.push(genome);
                }
                Err(e) => {
                    failure.get_or_insert(e);
                }
            }
        }

        let first_record = log.records.len();
        let mut new_evaluations = 0;
        for ind in population.iter_mut() {
            let Some(hit) = cache.get(&ind.genome) else { continue };
            ind.fitness = Some(hit.fitness);
            let is_new = fresh.iter().position(|g| *g == ind.genome).map(|i| fresh.swap_remove(i)).is_some();
            new_evaluations += is_new as usize;
            log.records.push(LogRecord {
                generation,
                genome: ind.genome.clone(),
                fitness: hit.fitness,
                beta: hit.beta,
                cached: !is_new,
            });
            let improves = best.as_ref().is_none_or(|b| hit.fitness > b.fitness.expect("best is evaluated"));
            if improves {
                best = Some(ind.clone());
            }
        }

        if let Some(source) = failure {
            return Err(RunFailure::Backend {
                generation,
                source,
                history,
                log,
            });
        }

        let best_now = best.as_ref().expect("population is non-empty");
        let best_fitness = best_now.fitness.expect("best is evaluated");
        let improved = history.last().is_none_or(|r| best_fitness > r.best_fitness);
        let record = GenerationRecord {
            generation,
            best_fitness,
            new_evaluations,
            best_genome: best_now.genome.clone(),
        };
        if let Err(e) = observer(&record, &log.records[first_record..]) {
            return Err(RunFailure::Observer(e, log));
        }
        history.push(record);

        stalled = if improved { 0 } else { stalled + 1 };
        if config.stall_generations.is_some_and(|limit| stalled >= limit) {
            break;
        }
    }

    Ok(RunOutcome {
        best: best.expect("at least one generation ran"),
        history,
        log,
        backend_calls,
    })
}
