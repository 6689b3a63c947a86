//! `mcsched`: analysis tools for dual-criticality fluid scheduling.
//!
//! Exit codes: 0 on success, 1 when a test or assigner reports an
//! infeasible/unschedulable verdict (or a simulated deadline miss), 2 on
//! input errors.

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mcsched_core::dualrate::{dual_rate_assign, dual_rate_test, DualRateAssignment};
use mcsched_core::experiment::{
    parse_csv, render_csv, report, rows_from_points, run_experiment_points, Algorithm,
    ExperimentConfig, ReportFormat,
};
use mcsched_core::model::TaskSet;
use mcsched_core::multirate::{multi_rate_test, MultiRateAssignment};
use mcsched_core::rat::Rat;
use mcsched_core::simulator::ScenarioSpec;
use mcsched_core::soma::{soma_with, SomaParams};
use mcsched_core::taskgen::{generate, GeneratorConfig};
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

#[derive(Parser)]
#[command(name = "mcsched", version, about = "Multi-rate fluid scheduling analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random task set.
    Generate(GenerateArgs),
    /// Run a schedulability test on a task set and an assignment.
    Analyze(AnalyzeArgs),
    /// Compute a rate assignment for a task set.
    Assign(AssignArgs),
    /// Simulate a scenario under an assignment and report deadline misses.
    Simulate(SimulateArgs),
    /// Run an acceptance-ratio sweep.
    Experiment(ExperimentArgs),
    /// Re-render experiment results as CSV or SVG.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Number of processors.
    #[arg(long)]
    m: u32,
    /// Target normalized load max(U_H^H, U_H^L + U_L^L).
    #[arg(long)]
    ub: String,
    /// Fraction of HI tasks.
    #[arg(long, default_value = "0.5")]
    ph: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Maximum individual task utilization.
    #[arg(long)]
    umax: Option<String>,
    /// Minimum individual task utilization.
    #[arg(long)]
    umin: Option<String>,
    #[arg(long, value_name = "N")]
    nh_min: Option<usize>,
    #[arg(long, value_name = "N")]
    nh_max: Option<usize>,
    /// Output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TestKind {
    Dual,
    Multi,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    taskset: PathBuf,
    /// Which model's test to run; selects the assignment schema.
    #[arg(long)]
    test: TestKind,
    #[arg(long)]
    assignment: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum AssignAlgo {
    Soma,
    Dualrate,
}

#[derive(Args)]
struct AssignArgs {
    #[arg(long)]
    taskset: PathBuf,
    #[arg(long)]
    algo: AssignAlgo,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Cap on search rounds per candidate structure.
    #[arg(long, default_value_t = 200)]
    max_iters: usize,
    /// Relative objective tolerance for convergence.
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
    /// Evaluate only the dual-rate-seeded candidate.
    #[arg(long)]
    seed_only: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    taskset: PathBuf,
    /// Multi-rate assignment file.
    #[arg(long)]
    assignment: PathBuf,
    #[arg(long)]
    scenario: PathBuf,
    /// Trace output path; stdout when absent.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Span windows with the three-term allocation rule instead of
    /// splitting partitions at window boundaries.
    #[arg(long)]
    spanning_windows: bool,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Comma-separated processor counts, e.g. 2,4,8.
    #[arg(long, default_value = "2", value_delimiter = ',')]
    m: Vec<u32>,
    /// Single load point (alternative to --ub-grid).
    #[arg(long)]
    ub: Option<String>,
    /// Load grid start:end:step, default 0.50:1.00:0.05.
    #[arg(long)]
    ub_grid: Option<String>,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "soma,dualrate", value_delimiter = ',')]
    algos: Vec<String>,
    #[arg(long, default_value = "0.5")]
    ph: String,
    #[arg(long)]
    umax: Option<String>,
    #[arg(long)]
    nh_min: Option<usize>,
    #[arg(long)]
    nh_max: Option<usize>,
    /// Pin the normalized LO-task utilization component.
    #[arg(long)]
    ull: Option<String>,
    #[arg(long, default_value_t = 200)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
    #[arg(long)]
    seed_only: bool,
    /// CSV output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Results CSV produced by `experiment`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    format: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// What a successful command run decided.
enum Outcome {
    Ok,
    Rejected,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(Outcome::Ok) => ExitCode::from(0),
        Ok(Outcome::Rejected) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn parse_rat(s: &str, what: &str) -> Result<Rat> {
    Rat::from_str(s).map_err(|e| anyhow!("{what}: {e}"))
}

fn read(path: &PathBuf) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn emit(path: &Option<PathBuf>, content: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, content).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn dispatch(cmd: Command) -> Result<Outcome> {
    match cmd {
        Command::Generate(a) => cmd_generate(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Assign(a) => cmd_assign(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Report(a) => cmd_report(a),
    }
}

fn cmd_generate(a: GenerateArgs) -> Result<Outcome> {
    let mut cfg =
        GeneratorConfig::new(a.m, parse_rat(&a.ub, "--ub")?, parse_rat(&a.ph, "--ph")?, a.seed);
    if let Some(u) = &a.umax {
        cfg.u_max = parse_rat(u, "--umax")?;
    }
    if let Some(u) = &a.umin {
        cfg.u_min = parse_rat(u, "--umin")?;
    }
    if let Some(n) = a.nh_min {
        cfg.n_hi_range.0 = n;
    }
    if let Some(n) = a.nh_max {
        cfg.n_hi_range.1 = n;
    }
    let ts = generate(&cfg).map_err(|e| anyhow!("generation failed: {e}"))?;
    emit(&a.out, &(ts.to_json() + "\n"))?;
    Ok(Outcome::Ok)
}

fn cmd_analyze(a: AnalyzeArgs) -> Result<Outcome> {
    let ts = TaskSet::from_json(&read(&a.taskset)?).map_err(|e| anyhow!("{e}"))?;
    match a.test {
        TestKind::Dual => {
            let asg = DualRateAssignment::from_json(&read(&a.assignment)?)
                .context("parsing dual-rate assignment")?;
            match dual_rate_test(&ts, &asg).map_err(|e| anyhow!("{e}"))? {
                mcsched_core::dualrate::DualRateVerdict::Schedulable => {
                    println!("schedulable");
                    Ok(Outcome::Ok)
                }
                mcsched_core::dualrate::DualRateVerdict::Failed { eq, task } => {
                    match task {
                        Some(t) => println!("not schedulable: {eq} violated by task {t}"),
                        None => println!("not schedulable: {eq} violated"),
                    }
                    Ok(Outcome::Rejected)
                }
            }
        }
        TestKind::Multi => {
            let asg = MultiRateAssignment::from_json(&read(&a.assignment)?)
                .context("parsing multi-rate assignment")?;
            match multi_rate_test(&ts, &asg).map_err(|e| anyhow!("{e}"))? {
                mcsched_core::multirate::MultiRateVerdict::Schedulable => {
                    println!("schedulable");
                    Ok(Outcome::Ok)
                }
                mcsched_core::multirate::MultiRateVerdict::Failed { condition, task } => {
                    match task {
                        Some(t) => println!("not schedulable: {condition} (task {t})"),
                        None => println!("not schedulable: {condition}"),
                    }
                    Ok(Outcome::Rejected)
                }
            }
        }
    }
}

fn cmd_assign(a: AssignArgs) -> Result<Outcome> {
    let ts = TaskSet::from_json(&read(&a.taskset)?).map_err(|e| anyhow!("{e}"))?;
    match a.algo {
        AssignAlgo::Dualrate => match dual_rate_assign(&ts) {
            Some(asg) => {
                emit(&a.out, &(asg.to_json() + "\n"))?;
                Ok(Outcome::Ok)
            }
            None => {
                println!("infeasible");
                Ok(Outcome::Rejected)
            }
        },
        AssignAlgo::Soma => {
            let params = SomaParams {
                max_iters: a.max_iters,
                tol: a.tol,
                seed_only: a.seed_only,
            };
            let out = soma_with(&ts, &params);
            match out.assignment {
                Some(asg) if out.is_success() => {
                    emit(&a.out, &(asg.to_json() + "\n"))?;
                    eprintln!(
                        "objective={} iterations={} seed_candidate={}",
                        out.objective.expect("objective on success"),
                        out.iterations,
                        out.used_seed_candidate
                    );
                    Ok(Outcome::Ok)
                }
                _ => {
                    println!("infeasible");
                    Ok(Outcome::Rejected)
                }
            }
        }
    }
}

fn cmd_simulate(a: SimulateArgs) -> Result<Outcome> {
    let ts = TaskSet::from_json(&read(&a.taskset)?).map_err(|e| anyhow!("{e}"))?;
    let asg = MultiRateAssignment::from_json(&read(&a.assignment)?)
        .context("parsing multi-rate assignment")?;
    let sc = ScenarioSpec::from_json(&read(&a.scenario)?).context("parsing scenario")?;
    let opts = mcsched_core::simulator::SimOptions {
        split_at_window_boundaries: !a.spanning_windows,
    };
    let (trace, verdict) =
        mcsched_core::simulator::simulate_with(&ts, &asg, &sc, opts).map_err(|e| anyhow!("{e}"))?;
    emit(&a.trace, &trace.render())?;
    match verdict {
        mcsched_core::simulator::SimVerdict::AllMet => {
            eprintln!("all deadlines met");
            Ok(Outcome::Ok)
        }
        mcsched_core::simulator::SimVerdict::Miss {
            task,
            release,
            deadline,
        } => {
            eprintln!("deadline miss: task {task}, release {release}, deadline {deadline}");
            Ok(Outcome::Rejected)
        }
    }
}

fn parse_grid(spec: &str) -> Result<Vec<Rat>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(anyhow!("--ub-grid expects start:end:step"));
    }
    let start = parse_rat(parts[0], "grid start")?;
    let end = parse_rat(parts[1], "grid end")?;
    let step = parse_rat(parts[2], "grid step")?;
    if !step.is_positive() || end < start {
        return Err(anyhow!("--ub-grid expects start <= end and step > 0"));
    }
    let mut out = Vec::new();
    let mut v = start;
    while v <= end {
        out.push(v.clone());
        v = v + step.clone();
    }
    Ok(out)
}

fn cmd_experiment(a: ExperimentArgs) -> Result<Outcome> {
    let mut cfg = ExperimentConfig::new(a.m.clone(), a.trials, a.seed);
    cfg.p_hi = parse_rat(&a.ph, "--ph")?;
    if let Some(g) = &a.ub_grid {
        cfg.u_bound_grid = parse_grid(g)?;
    }
    if let Some(ub) = &a.ub {
        cfg.u_bound_grid = vec![parse_rat(ub, "--ub")?];
    }
    if let Some(u) = &a.umax {
        cfg.u_max = parse_rat(u, "--umax")?;
    }
    if a.nh_min.is_some() || a.nh_max.is_some() {
        let lo = a.nh_min.unwrap_or(1);
        let hi = a.nh_max.unwrap_or(lo.max(64));
        cfg.n_hi_range = Some((lo, hi));
    }
    if let Some(c) = &a.ull {
        cfg.fixed_lo_lo = Some(parse_rat(c, "--ull")?);
    }
    cfg.algorithms = a
        .algos
        .iter()
        .map(|s| Algorithm::from_str(s).map_err(|e| anyhow!(e)))
        .collect::<Result<Vec<_>>>()?;
    cfg.soma_params = SomaParams {
        max_iters: a.max_iters,
        tol: a.tol,
        seed_only: a.seed_only,
    };

    let points = run_experiment_points(&cfg);
    let rows = rows_from_points(&cfg, &points);
    emit(&a.out, &render_csv(&rows))?;
    // Derived summary: share of dual-rate infeasible sets the multi-rate
    // search schedules, per grid point.
    if cfg.algorithms.contains(&Algorithm::Soma) && cfg.algorithms.contains(&Algorithm::DualRate) {
        for p in &points {
            if let Some(c) = p.conditional_improvement() {
                eprintln!(
                    "m={} U_B={}: soma {} / dual {} of {}; {} of {} dual-infeasible schedulable ({:.1}%)",
                    p.processors,
                    p.u_bound,
                    p.soma_accepted,
                    p.dual_accepted,
                    p.total,
                    p.soma_not_dual,
                    p.total - p.dual_accepted,
                    c.to_f64() * 100.0
                );
            }
        }
    }
    Ok(Outcome::Ok)
}

fn cmd_report(a: ReportArgs) -> Result<Outcome> {
    let rows = parse_csv(&read(&a.input)?).map_err(|e| anyhow!("{e}"))?;
    let format = ReportFormat::from_str(&a.format).map_err(|e| anyhow!(e))?;
    let rendered = report(&rows, format).map_err(|e| anyhow!(e))?;
    emit(&a.out, &rendered)?;
    Ok(Outcome::Ok)
}
