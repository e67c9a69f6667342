//! Nested GA/MLP plane generation.
//!
//! Every generation, each chromosome's handles join the pins as labeled
//! training points, a fresh MLP is fit to them, the board raster is
//! classified, and the island fitness of the resulting partition is scored.
//! Elites carry their cached evaluation forward. The run stops after the
//! configured generations, on the first feasible zero-extra-island candidate,
//! or when the time budget runs out.
//!
//! Every network of a run starts from the same initialization seed (see
//! [`candidate_seed`]), so a run is fully determined by its GA seed and the
//! evaluation order or worker count never changes the outcome.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::eval::{fitness, FitnessBreakdown, FitnessOptions};
use crate::genopt::{derive_seed, handle_count, initialize_population, next_generation, Chromosome, GaConfig};
use crate::model::{check_feasible, extra_islands, LabelGrid, Partition, Problem};
use crate::neural::{train_anchored, FeatureMode, LabeledPoint, TrainConfig};

const STREAM_MLP: u64 = 0x6d6c70;
const STREAM_MLP_ONLY: u64 = 0x6f6e6c79;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub time_budget: Duration,
    pub fitness: FitnessOptions,
    /// Record the best partition of every generation.
    pub snapshots: bool,
    /// Evaluation worker threads; 0 uses the global rayon pool.
    pub workers: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            time_budget: Duration::from_secs(60),
            fitness: FitnessOptions::default(),
            snapshots: false,
            workers: 0,
        }
    }
}

/// Component switches used by the ablation studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ablation {
    pub disable_feature_expansion: bool,
    pub disable_distance_terms: bool,
}

impl Ablation {
    /// Applies the switches to a training config and solve options.
    pub fn apply(&self, train: &mut TrainConfig, options: &mut SolveOptions) {
        if self.disable_feature_expansion {
            train.features = FeatureMode::Raw;
        }
        if self.disable_distance_terms {
            options.fitness.distance_terms = false;
        }
    }
}

/// One scored candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub partition: Partition,
    pub fitness: FitnessBreakdown,
    pub ei: Option<usize>,
    pub feasible: bool,
    /// Set when the inner training diverged and a fallback partition was scored.
    pub training_failed: bool,
}

impl Evaluation {
    pub fn is_desirable(&self) -> bool {
        self.feasible && self.ei == Some(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best: f64,
    pub mean: f64,
    pub evaluated: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub generation: usize,
    pub partition: Partition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GomlpResult {
    pub best_partition: Partition,
    /// `None` for the MLP-only baseline, which has no handles.
    pub best_chromosome: Option<Chromosome>,
    pub best_fitness: FitnessBreakdown,
    pub fitness_history: Vec<GenerationStats>,
    /// `None` when some net owns no cell at all.
    pub ei: Option<usize>,
    pub feasible: bool,
    pub generations_run: usize,
    pub evaluations: usize,
    pub early_success: bool,
    pub timed_out: bool,
    pub wall_time: f64,
    pub generation_snapshots: Vec<Snapshot>,
}

/// Network initialization seed shared by every candidate of a run.
///
/// All candidates start from the same weights, so fitness differences come
/// from the handles alone rather than from initialization luck, and a
/// re-evaluated chromosome always scores the same.
pub fn candidate_seed(rng_seed: u64) -> u64 {
    derive_seed(rng_seed, &[STREAM_MLP])
}

/// Trains on pins plus optional handles and scores the resulting partition.
///
/// Early stopping waits only for the pins to be classified correctly:
/// handles steer the regions but are not hard constraints.
pub fn evaluate_candidate(
    problem: &Problem,
    handles: Option<&Chromosome>,
    train_config: &TrainConfig,
    fitness_options: &FitnessOptions,
    seed: u64,
) -> Evaluation {
    let m = problem.net_count();
    let mut points: Vec<LabeledPoint> = problem
        .nets
        .iter()
        .flat_map(|n| n.pins.iter().map(move |p| LabeledPoint { x: p.x, y: p.y, net: n.id }))
        .collect();
    if let Some(c) = handles {
        points.extend(c.labeled_handles().map(|(x, y, net)| LabeledPoint { x, y, net }));
    }

    let res = problem.grid_resolution;
    let pins = problem.total_pins();
    let (grid, training_failed) = match train_anchored(&points, pins, m, train_config, seed) {
        Ok(mlp) => (mlp.predict_grid(res), false),
        Err(_) => (LabelGrid::uniform(res, 1), true),
    };
    let partition = Partition::new(grid, m);
    let fitness = fitness(problem, &partition, fitness_options);
    let feasible = check_feasible(problem, &partition.grid).map(|r| r.is_feasible()).unwrap_or(false);
    let ei = extra_islands(&partition, m).ok();
    Evaluation {
        partition,
        fitness,
        ei,
        feasible,
        training_failed,
    }
}

fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    if workers == 0 {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

/// Runs the nested GA/MLP loop.
pub fn solve(problem: &Problem, ga: &GaConfig, train_config: &TrainConfig, options: &SolveOptions) -> Result<GomlpResult> {
    ga.validate()?;
    train_config.validate()?;
    with_pool(options.workers, || run(problem, ga, train_config, options))
}

fn run(problem: &Problem, ga: &GaConfig, train_config: &TrainConfig, options: &SolveOptions) -> Result<GomlpResult> {
    let start = Instant::now();
    let deadline = start + options.time_budget;
    let k = handle_count(problem);
    let m = problem.net_count();

    let mlp_seed = candidate_seed(ga.rng_seed);
    let evaluate_all = |population: &[Chromosome], cached: &[Option<Evaluation>], generation: usize| -> Vec<Option<Evaluation>> {
        (0..population.len())
            .into_par_iter()
            .map(|i| {
                if let Some(e) = &cached[i] {
                    return Some(e.clone());
                }
                // the very first candidate always runs so a result exists
                if (generation > 0 || i > 0) && Instant::now() >= deadline {
                    return None;
                }
                Some(evaluate_candidate(problem, Some(&population[i]), train_config, &options.fitness, mlp_seed))
            })
            .collect()
    };

    let mut population = initialize_population(ga, k, m);
    let mut evals = evaluate_all(&population, &vec![None; population.len()], 0);
    let mut evaluations = evals.iter().flatten().count();

    let mut history = Vec::new();
    let mut snapshots = Vec::new();
    let mut best: Option<(Chromosome, Evaluation)> = None;
    let mut generation = 0;
    let mut early_success = false;
    let mut timed_out = false;

    loop {
        let scored: Vec<(usize, &Evaluation)> = evals.iter().enumerate().filter_map(|(i, e)| e.as_ref().map(|e| (i, e))).collect();
        let (best_idx, best_eval) = scored
            .iter()
            .copied()
            .max_by(|a, b| a.1.fitness.total.total_cmp(&b.1.fitness.total).then(b.0.cmp(&a.0)))
            .expect("at least one candidate is evaluated");
        let mean = scored.iter().map(|(_, e)| e.fitness.total).sum::<f64>() / scored.len() as f64;
        history.push(GenerationStats {
            generation,
            best: best_eval.fitness.total,
            mean,
            evaluated: scored.len(),
        });
        if options.snapshots {
            snapshots.push(Snapshot {
                generation,
                partition: best_eval.partition.clone(),
            });
        }
        if best.as_ref().map_or(true, |(_, e)| best_eval.fitness.total > e.fitness.total) {
            best = Some((population[best_idx].clone(), best_eval.clone()));
        }

        if scored.len() < population.len() {
            timed_out = true;
            break;
        }
        if best_eval.is_desirable() {
            early_success = true;
            break;
        }
        if generation == ga.generations {
            break;
        }
        if Instant::now() >= deadline {
            timed_out = true;
            break;
        }

        generation += 1;
        let fitnesses: Vec<f64> = evals.iter().map(|e| e.as_ref().expect("complete generation").fitness.total).collect();
        let next = next_generation(&population, &fitnesses, ga, generation);
        let mut cached: Vec<Option<Evaluation>> = vec![None; next.population.len()];
        for (slot, &src) in next.elite_sources.iter().enumerate() {
            cached[slot] = evals[src].take();
        }
        population = next.population;
        evals = evaluate_all(&population, &cached, generation);
        evaluations += evals.iter().flatten().count() - next.elite_sources.len();
    }

    let (chromosome, eval) = best.expect("best candidate recorded");
    Ok(GomlpResult {
        ei: eval.ei,
        feasible: eval.feasible,
        best_fitness: eval.fitness,
        best_partition: eval.partition,
        best_chromosome: Some(chromosome),
        fitness_history: history,
        generations_run: generation,
        evaluations,
        early_success,
        timed_out,
        wall_time: start.elapsed().as_secs_f64(),
        generation_snapshots: snapshots,
    })
}

/// The classifier-only baseline: one MLP fit to the pins, no handles, no evolution.
pub fn solve_mlp_only(problem: &Problem, train_config: &TrainConfig, fitness_options: &FitnessOptions, seed: u64) -> Result<GomlpResult> {
    train_config.validate()?;
    let start = Instant::now();
    let eval = evaluate_candidate(problem, None, train_config, fitness_options, derive_seed(seed, &[STREAM_MLP_ONLY]));
    Ok(GomlpResult {
        ei: eval.ei,
        feasible: eval.feasible,
        best_fitness: eval.fitness,
        fitness_history: vec![GenerationStats {
            generation: 0,
            best: eval.fitness.total,
            mean: eval.fitness.total,
            evaluated: 1,
        }],
        early_success: eval.is_desirable(),
        best_partition: eval.partition,
        best_chromosome: None,
        generations_run: 0,
        evaluations: 1,
        timed_out: false,
        wall_time: start.elapsed().as_secs_f64(),
        generation_snapshots: Vec::new(),
    })
}
