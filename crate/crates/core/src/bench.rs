//! Head-to-head comparison of the GA/MLP solver against the A* baseline.
//!
//! Each problem is solved by both methods; the row outcome compares extra
//! islands, with an infeasible or failed result counting as the worst
//! possible score. Aggregates include a two-sided sign test over the
//! non-tied rows and, where it is defined, a paired t-test on the EI
//! differences.

use std::panic::{catch_unwind, AssertUnwindSafe};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, ContinuousCDF, DiscreteCDF, StudentsT};
use statrs::statistics::Statistics;

use crate::astar::{solve_astar, AstarOptions};
use crate::error::{Error, Result};
use crate::genopt::{derive_seed, GaConfig};
use crate::gomlp::{solve, SolveOptions};
use crate::model::Problem;
use crate::neural::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub ga: GaConfig,
    pub train: TrainConfig,
    pub solve: SolveOptions,
    pub astar: AstarOptions,
    /// Problems solved concurrently. Each solve runs against its own wall
    /// clock budget, so this should not exceed the available cores.
    pub workers: usize,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            ga: GaConfig::default(),
            train: TrainConfig::default(),
            solve: SolveOptions::default(),
            astar: AstarOptions::default(),
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Win,
    Tie,
    Loss,
    /// One of the solvers returned an error or panicked.
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub problem_id: String,
    pub net_count: usize,
    pub ei_gomlp: Option<usize>,
    pub ei_astar: Option<usize>,
    pub feasible_gomlp: bool,
    pub feasible_astar: bool,
    pub wall_time_gomlp: f64,
    pub wall_time_astar: f64,
    /// GA seed used for this problem.
    pub rng_seed: u64,
    pub outcome: Outcome,
    /// Failure message for `Outcome::Error` rows.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignTest {
    pub wins: usize,
    pub losses: usize,
    /// Two-sided exact binomial p-value over the non-tied rows.
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedTTest {
    /// Number of rows where both solvers produced a feasible partition.
    pub n: usize,
    /// Mean of `ei_astar - ei_gomlp`; positive favors GA/MLP.
    pub mean_difference: f64,
    pub t_statistic: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSummary {
    pub problems: usize,
    pub wins: usize,
    pub ties: usize,
    pub losses: usize,
    pub errors: usize,
    /// `(wins + ties) / (wins + ties + losses)`.
    pub win_or_tie_rate: f64,
    pub sign_test: SignTest,
    /// Absent when fewer than two paired rows exist or all differences agree.
    pub t_test: Option<PairedTTest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    /// Sorted by GA/MLP extra islands, best first.
    pub rows: Vec<BenchmarkRow>,
    pub summary: BenchmarkSummary,
}

/// Score used for comparisons: lower is better, failures are worst.
fn score(ei: Option<usize>, feasible: bool) -> usize {
    match ei {
        Some(e) if feasible => e,
        _ => usize::MAX,
    }
}

pub fn outcome(ei_gomlp: Option<usize>, feasible_gomlp: bool, ei_astar: Option<usize>, feasible_astar: bool) -> Outcome {
    match score(ei_gomlp, feasible_gomlp).cmp(&score(ei_astar, feasible_astar)) {
        std::cmp::Ordering::Less => Outcome::Win,
        std::cmp::Ordering::Equal => Outcome::Tie,
        std::cmp::Ordering::Greater => Outcome::Loss,
    }
}

fn panic_message(payload: Box<dyn std::any::Any + Send>) -> String {
    payload
        .downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| payload.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "solver panicked".into())
}

fn guarded<T>(f: impl FnOnce() -> Result<T>) -> std::result::Result<T, String> {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(v)) => Ok(v),
        Ok(Err(e)) => Err(e.to_string()),
        Err(p) => Err(panic_message(p)),
    }
}

fn run_row(index: usize, id: &str, problem: &Problem, config: &BenchmarkConfig) -> BenchmarkRow {
    let ga = GaConfig {
        rng_seed: derive_seed(config.ga.rng_seed, &[index as u64]),
        ..config.ga.clone()
    };
    let gomlp = guarded(|| solve(problem, &ga, &config.train, &config.solve));
    let astar = guarded(|| solve_astar(problem, &config.astar));
    let mut row = BenchmarkRow {
        problem_id: id.to_string(),
        net_count: problem.net_count(),
        ei_gomlp: None,
        ei_astar: None,
        feasible_gomlp: false,
        feasible_astar: false,
        wall_time_gomlp: 0.0,
        wall_time_astar: 0.0,
        rng_seed: ga.rng_seed,
        outcome: Outcome::Error,
        error: None,
    };
    let mut errors = Vec::new();
    match gomlp {
        Ok(r) => {
            row.ei_gomlp = r.ei;
            row.feasible_gomlp = r.feasible;
            row.wall_time_gomlp = r.wall_time;
        }
        Err(e) => errors.push(format!("gomlp: {e}")),
    }
    match astar {
        Ok(r) => {
            row.ei_astar = r.ei;
            row.feasible_astar = r.feasible;
            row.wall_time_astar = r.wall_time;
        }
        Err(e) => errors.push(format!("astar: {e}")),
    }
    if errors.is_empty() {
        row.outcome = outcome(row.ei_gomlp, row.feasible_gomlp, row.ei_astar, row.feasible_astar);
    } else {
        row.error = Some(errors.join("; "));
    }
    row
}

/// Solves every `(id, problem)` pair with both methods and summarizes.
///
/// Results depend only on the inputs and seeds, never on `workers`, apart
/// from the recorded wall times.
pub fn run_benchmark(problems: &[(String, Problem)], config: &BenchmarkConfig) -> Result<BenchmarkReport> {
    config.ga.validate()?;
    config.train.validate()?;
    if config.workers == 0 {
        return Err(Error::InvalidConfig("workers must be positive".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?;
    let rows = pool.install(|| {
        problems
            .par_iter()
            .enumerate()
            .map(|(i, (id, p))| run_row(i, id, p, config))
            .collect::<Vec<_>>()
    });
    Ok(summarize(rows))
}

/// Sorts rows and computes the aggregate statistics.
pub fn summarize(mut rows: Vec<BenchmarkRow>) -> BenchmarkReport {
    rows.sort_by(|a, b| {
        score(a.ei_gomlp, a.feasible_gomlp)
            .cmp(&score(b.ei_gomlp, b.feasible_gomlp))
            .then_with(|| a.problem_id.cmp(&b.problem_id))
    });
    let count = |o: Outcome| rows.iter().filter(|r| r.outcome == o).count();
    let (wins, ties, losses, errors) = (count(Outcome::Win), count(Outcome::Tie), count(Outcome::Loss), count(Outcome::Error));
    // Failed rows are reported but excluded from every aggregate.
    let decided = wins + ties + losses;
    let win_or_tie_rate = if decided == 0 {
        0.0
    } else {
        (wins + ties) as f64 / decided as f64
    };
    let differences: Vec<f64> = rows
        .iter()
        .filter(|r| r.outcome != Outcome::Error && r.feasible_gomlp && r.feasible_astar)
        .filter_map(|r| Some(r.ei_astar? as f64 - r.ei_gomlp? as f64))
        .collect();
    let summary = BenchmarkSummary {
        problems: rows.len(),
        wins,
        ties,
        losses,
        errors,
        win_or_tie_rate,
        sign_test: sign_test(wins, losses),
        t_test: paired_t_test(&differences),
    };
    BenchmarkReport { rows, summary }
}

/// Exact two-sided sign test of `wins` against `losses` under p = 1/2.
pub fn sign_test(wins: usize, losses: usize) -> SignTest {
    let n = (wins + losses) as u64;
    let p_value = if n == 0 {
        1.0
    } else {
        let b = Binomial::new(0.5, n).expect("valid binomial");
        (2.0 * b.cdf(wins.min(losses) as u64)).min(1.0)
    };
    SignTest { wins, losses, p_value }
}

/// Two-sided one-sample t-test of the mean difference against zero.
pub fn paired_t_test(differences: &[f64]) -> Option<PairedTTest> {
    let n = differences.len();
    if n < 2 {
        return None;
    }
    let mean = differences.mean();
    let sd = differences.std_dev();
    if !(sd > 0.0) {
        return None;
    }
    let t = mean / (sd / (n as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("positive degrees of freedom");
    Some(PairedTTest {
        n,
        mean_difference: mean,
        t_statistic: t,
        p_value: (2.0 * (1.0 - dist.cdf(t.abs()))).min(1.0),
    })
}
