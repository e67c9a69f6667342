use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use planegen::astar::{solve_astar, AstarOptions};
use planegen::bench::{run_benchmark, BenchmarkConfig};
use planegen::genopt::GaConfig;
use planegen::gomlp::{solve, solve_mlp_only, Ablation, SolveOptions};
use planegen::io::{self, ResultDocument, ResultKind};
use planegen::model::{BoardExtent, Problem};
use planegen::multilayer::{solve_multilayer, DistanceMetric, Linkage, MultilayerOptions};
use planegen::neural::TrainConfig;
use planegen::render::{render_dendrogram, render_partition, write_snapshots, RenderOptions};
use planegen::synth::{generate_problems, SyntheticSpec};
use planegen::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_SOLVER: u8 = 3;

#[derive(Parser)]
#[command(name = "planegen", version, about = "Power-plane generation for multi-net PCB layers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem with the GA/MLP solver.
    SolveGomlp(GomlpArgs),
    /// Solve one problem with the MST + A* baseline.
    SolveAstar(AstarArgs),
    /// Assign nets to layers by clustering, then solve each layer.
    SolveMultilayer(MultilayerArgs),
    /// Generate a suite of synthetic problems.
    GenProblems(GenArgs),
    /// Compare the GA/MLP solver against the A* baseline over a suite.
    Bench(BenchArgs),
    /// Render a result document as SVG.
    Render(RenderArgs),
}

#[derive(Args)]
struct GaArgs {
    /// Base random seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    generations: usize,
    #[arg(long, default_value_t = 30)]
    population: usize,
    #[arg(long, default_value_t = 10)]
    elite: usize,
    /// Per-gene mutation probability.
    #[arg(long, default_value_t = 0.05)]
    mutation: f64,
    /// Override the problem's grid resolution.
    #[arg(long)]
    grid: Option<usize>,
    /// Wall-clock budget per solve, in seconds.
    #[arg(long, default_value_t = 60.0)]
    budget: f64,
}

#[derive(Args)]
struct GomlpArgs {
    problem: PathBuf,
    #[command(flatten)]
    ga: GaArgs,
    /// Use raw (x, y) inputs instead of the expanded features.
    #[arg(long)]
    no_feature_expansion: bool,
    /// Drop the island distance terms from the fitness.
    #[arg(long)]
    no_distance_terms: bool,
    /// Record the best partition of every generation.
    #[arg(long)]
    snapshots: bool,
    /// Train one MLP on the pins alone, without the GA.
    #[arg(long)]
    mlp_only: bool,
    /// Result document path (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AstarArgs {
    problem: PathBuf,
    /// Override the problem's grid resolution.
    #[arg(long)]
    grid: Option<usize>,
    /// Recorded for provenance; the baseline is deterministic.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Hd,
    Emd,
}

#[derive(Clone, Copy, ValueEnum)]
enum LinkageArg {
    Avg,
    Single,
    Complete,
}

#[derive(Args)]
struct MultilayerArgs {
    problem: PathBuf,
    #[command(flatten)]
    ga: GaArgs,
    #[arg(long, value_enum, default_value = "hd")]
    metric: MetricArg,
    #[arg(long, value_enum, default_value = "avg")]
    linkage: LinkageArg,
    /// Fixed number of layers.
    #[arg(long, conflicts_with = "auto_mcdl")]
    layers: Option<usize>,
    /// Search for the minimum layer count with zero extra islands (default).
    #[arg(long)]
    auto_mcdl: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 5)]
    nets: usize,
    #[arg(long, default_value_t = 10)]
    count: usize,
    #[arg(long, default_value_t = 0.3)]
    interleave: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 64)]
    grid: usize,
    #[arg(long, default_value_t = 2)]
    min_pins: usize,
    #[arg(long, default_value_t = 5)]
    max_pins: usize,
    #[arg(long, default_value_t = 0.04)]
    spread: f64,
    /// Directory for the problem files and manifest.json.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Directory of problem files (manifest.json is skipped).
    #[arg(long)]
    suite_dir: PathBuf,
    #[command(flatten)]
    ga: GaArgs,
    /// Problems solved concurrently.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Report path (stdout when absent).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct RenderArgs {
    /// A result document written by one of the solve commands.
    #[arg(long)]
    result: PathBuf,
    /// Output SVG. Multilayer results also write `<stem>_layerN.svg`.
    #[arg(long)]
    out: PathBuf,
    /// Also write per-generation snapshots into this directory.
    #[arg(long)]
    snapshot_dir: Option<PathBuf>,
}

/// A failure with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Parse { .. }
            | Error::Io(_)
            | Error::InvalidBoard { .. }
            | Error::GridTooSmall(_)
            | Error::NoNets
            | Error::EmptyNet(_)
            | Error::PinOutsideBoard { .. }
            | Error::DuplicateCrossNetPin { .. }
            | Error::InvalidConfig(_) => EXIT_INPUT,
            _ => EXIT_SOLVER,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

type CliResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let command_line: Vec<String> = std::env::args().skip(1).collect();
    match run(cli.command, command_line) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(command: Command, command_line: Vec<String>) -> CliResult<()> {
    let start = Instant::now();
    let (doc, out) = match command {
        Command::SolveGomlp(a) => (cmd_gomlp(&a, command_line)?, a.out),
        Command::SolveAstar(a) => (cmd_astar(&a, command_line)?, a.out),
        Command::SolveMultilayer(a) => (cmd_multilayer(&a, command_line)?, a.out),
        Command::GenProblems(a) => {
            let doc = cmd_gen(&a, command_line)?;
            (doc, Some(a.out_dir.join("manifest.json")))
        }
        Command::Bench(a) => (cmd_bench(&a, command_line)?, a.report),
        Command::Render(a) => return cmd_render(&a),
    };
    emit(&doc.with_timing("total", start.elapsed().as_secs_f64()), out.as_deref())
}

fn emit(doc: &ResultDocument, out: Option<&Path>) -> CliResult<()> {
    let text = doc.to_json();
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Failure::from(Error::Io(e)))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn load_problem(path: &Path, grid: Option<usize>) -> CliResult<Problem> {
    let problem = io::read_problem(path)?;
    Ok(match grid {
        Some(g) => problem.with_grid_resolution(g)?,
        None => problem,
    })
}

fn ga_config(a: &GaArgs) -> CliResult<(GaConfig, SolveOptions)> {
    if !(a.budget > 0.0 && a.budget.is_finite()) {
        return Err(usage(format!("--budget must be a positive number of seconds, got {}", a.budget)));
    }
    let ga = GaConfig {
        population_size: a.population,
        generations: a.generations,
        elite_size: a.elite,
        mutation_rate: a.mutation,
        rng_seed: a.seed,
        ..GaConfig::default()
    };
    ga.validate()?;
    let options = SolveOptions {
        time_budget: Duration::from_secs_f64(a.budget),
        ..SolveOptions::default()
    };
    Ok((ga, options))
}

fn cmd_gomlp(a: &GomlpArgs, command_line: Vec<String>) -> CliResult<ResultDocument> {
    let problem = load_problem(&a.problem, a.ga.grid)?;
    let (ga, mut options) = ga_config(&a.ga)?;
    let mut train = TrainConfig::default();
    let ablation = Ablation {
        disable_feature_expansion: a.no_feature_expansion,
        disable_distance_terms: a.no_distance_terms,
    };
    ablation.apply(&mut train, &mut options);
    options.snapshots = a.snapshots;
    let result = if a.mlp_only {
        solve_mlp_only(&problem, &train, &options.fitness, ga.rng_seed)?
    } else {
        solve(&problem, &ga, &train, &options)?
    };
    let config = json!({
        "ga": ga,
        "train": train,
        "solve": options,
        "ablation": ablation,
        "mlp_only": a.mlp_only,
    });
    let metrics = json!({
        "ei": result.ei,
        "feasible": result.feasible,
        "fitness": result.best_fitness.total,
        "generations_run": result.generations_run,
        "evaluations": result.evaluations,
        "early_success": result.early_success,
        "timed_out": result.timed_out,
    });
    Ok(ResultDocument::new(ResultKind::Gomlp, command_line, Some(&problem), &config, &metrics, &result))
}

fn cmd_astar(a: &AstarArgs, command_line: Vec<String>) -> CliResult<ResultDocument> {
    let problem = load_problem(&a.problem, a.grid)?;
    let options = AstarOptions::default();
    let result = solve_astar(&problem, &options)?;
    let config = json!({ "astar": options, "seed": a.seed });
    let metrics = json!({ "ei": result.ei, "feasible": result.feasible });
    Ok(ResultDocument::new(ResultKind::Astar, command_line, Some(&problem), &config, &metrics, &result))
}

fn cmd_multilayer(a: &MultilayerArgs, command_line: Vec<String>) -> CliResult<ResultDocument> {
    let problem = load_problem(&a.problem, a.ga.grid)?;
    let (ga, solve_options) = ga_config(&a.ga)?;
    let options = MultilayerOptions {
        metric: match a.metric {
            MetricArg::Hd => DistanceMetric::Hausdorff,
            MetricArg::Emd => DistanceMetric::EarthMover,
        },
        linkage: match a.linkage {
            LinkageArg::Avg => Linkage::Average,
            LinkageArg::Single => Linkage::Single,
            LinkageArg::Complete => Linkage::Complete,
        },
        layers: a.layers,
        search_budget: None,
    };
    let train = TrainConfig::default();
    let result = solve_multilayer(&problem, &options, &ga, &train, &solve_options)?;
    let config = json!({
        "multilayer": options,
        "ga": ga,
        "train": train,
        "solve": solve_options,
    });
    let metrics = json!({
        "mcdl": result.mcdl,
        "best_layer_count": result.best_layer_count,
        "attempts": result.attempts.len(),
    });
    Ok(ResultDocument::new(ResultKind::Multilayer, command_line, Some(&problem), &config, &metrics, &result))
}

fn cmd_gen(a: &GenArgs, command_line: Vec<String>) -> CliResult<ResultDocument> {
    let spec = SyntheticSpec {
        net_count: a.nets,
        pins_per_net: (a.min_pins, a.max_pins),
        cluster_spread: a.spread,
        interleave_factor: a.interleave,
        board: BoardExtent {
            width: 100.0,
            height: 100.0,
        },
        grid_resolution: a.grid,
        rng_seed: a.seed,
    };
    let problems = generate_problems(&spec, a.count)?;
    fs::create_dir_all(&a.out_dir).map_err(|e| Failure::from(Error::Io(e)))?;
    let mut names = Vec::with_capacity(problems.len());
    for (i, p) in problems.iter().enumerate() {
        let name = format!("problem_{i:03}.json");
        io::write_problem(&a.out_dir.join(&name), p)?;
        names.push(name);
    }
    let metrics = json!({ "count": names.len() });
    Ok(ResultDocument::new(ResultKind::Problems, command_line, None, &spec, &metrics, &names))
}

fn cmd_bench(a: &BenchArgs, command_line: Vec<String>) -> CliResult<ResultDocument> {
    let (ga, solve) = ga_config(&a.ga)?;
    let mut files: Vec<PathBuf> = fs::read_dir(&a.suite_dir)
        .map_err(|e| Failure::from(Error::Io(e)))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json") && p.file_name().is_some_and(|n| n != "manifest.json"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Failure::from(Error::InvalidConfig(format!(
            "no problem files in {}",
            a.suite_dir.display()
        ))));
    }
    let problems = files
        .iter()
        .map(|path| {
            let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            Ok((id, load_problem(path, a.ga.grid)?))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let config = BenchmarkConfig {
        ga,
        solve,
        workers: a.workers,
        ..BenchmarkConfig::default()
    };
    let report = run_benchmark(&problems, &config)?;
    let metrics = json!({
        "win_or_tie_rate": report.summary.win_or_tie_rate,
        "sign_test_p": report.summary.sign_test.p_value,
        "t_test_p": report.summary.t_test.as_ref().map(|t| t.p_value),
    });
    Ok(ResultDocument::new(ResultKind::Benchmark, command_line, None, &config, &metrics, &report))
}

fn write_svg(path: &Path, svg: String) -> CliResult<()> {
    fs::write(path, svg).map_err(|e| Failure::from(Error::Io(e)))
}

fn cmd_render(a: &RenderArgs) -> CliResult<()> {
    let doc = io::read_document(&a.result)?;
    let problem = match &doc.problem {
        Some(p) => p.to_problem()?,
        None => return Err(usage("only solver result documents can be rendered")),
    };
    match doc.kind {
        ResultKind::Gomlp => {
            let r: planegen::gomlp::GomlpResult = doc.payload()?;
            let title = format!("GA/MLP: {} extra islands", ei_text(r.ei));
            let options = RenderOptions {
                title: Some(title),
                handles: r.best_chromosome.as_ref(),
            };
            write_svg(&a.out, render_partition(&problem, &r.best_partition, &options))?;
            if let Some(dir) = &a.snapshot_dir {
                write_snapshots(&problem, &r.generation_snapshots, dir)?;
            }
        }
        ResultKind::Astar => {
            let r: planegen::astar::AstarResult = doc.payload()?;
            let options = RenderOptions {
                title: Some(format!("A*: {} extra islands", ei_text(r.ei))),
                handles: None,
            };
            write_svg(&a.out, render_partition(&problem, &r.partition, &options))?;
        }
        ResultKind::Multilayer => {
            let r: planegen::multilayer::MultilayerResult = doc.payload()?;
            let labels: Vec<String> = r.dendrogram.leaves.iter().map(|&id| problem.net(id).label.clone()).collect();
            write_svg(&a.out, render_dendrogram(&r.dendrogram, &labels))?;
            let stem = a.out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let dir = a.out.parent().unwrap_or(Path::new("."));
            if let Some(attempt) = r.attempts.iter().find(|t| t.layer_count == r.best_layer_count) {
                for layer in &attempt.layers {
                    let sub = problem.subproblem(&layer.nets);
                    let options = RenderOptions {
                        title: Some(format!("layer {}: {} extra islands", layer.layer, ei_text(layer.result.ei))),
                        handles: None,
                    };
                    let path = dir.join(format!("{stem}_layer{}.svg", layer.layer));
                    write_svg(&path, render_partition(&sub, &layer.result.best_partition, &options))?;
                }
            }
        }
        ResultKind::Problems | ResultKind::Benchmark => {
            return Err(usage("only solver result documents can be rendered"));
        }
    }
    Ok(())
}

fn ei_text(ei: Option<usize>) -> String {
    ei.map_or_else(|| "n/a".into(), |e| e.to_string())
}
