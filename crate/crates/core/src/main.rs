use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use uavmec::baselines::{solve, SolverConfig, SolverKind, DEFAULT_NODE_BUDGET};
use uavmec::feasibility::{check_assignment, Assignment};
use uavmec::harness::{self, ExperimentSpec, ORACLE_REL_TOL};
use uavmec::model::NoiseMode;
use uavmec::rlaa::{self, RlaaParams, StateKeying};
use uavmec::scenario::{self, Preset};

const EXIT_USAGE: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_ORACLE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "uavmec",
    version,
    about = "Multi-UAV edge computing: instance generation, solvers and experiment sweeps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a random instance and write it as JSON.
    Generate(GenerateArgs),
    /// Solve an instance with one solver.
    Solve(SolveArgs),
    /// Sweep N over a set of solvers and write CSVs.
    Sweep(SweepArgs),
    /// Check an assignment against an instance.
    Verify(VerifyArgs),
    /// Compare Q-learning against exhaustive search on small instances.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Scenario file; overrides --preset/--n/--seed/--noise-mode.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value = "fig2")]
    preset: Preset,
    #[arg(long, default_value_t = 5)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "total")]
    noise_mode: NoiseMode,
    /// Also write the scenario used.
    #[arg(long)]
    emit_spec: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct LearnArgs {
    /// Training episodes.
    #[arg(long, default_value_t = harness::DESK_EPISODES)]
    episodes: usize,
    /// Exploration probability.
    #[arg(long, default_value_t = 0.9)]
    epsilon: f64,
    /// Final exploration probability for a linear decay; off when omitted.
    #[arg(long)]
    epsilon_final: Option<f64>,
    /// Learning rate.
    #[arg(long, default_value_t = 0.2)]
    beta: f64,
    /// Reward decay.
    #[arg(long, default_value_t = 0.9)]
    gamma: f64,
    /// per-ue | joint-hash
    #[arg(long, default_value = "per-ue")]
    state_key: StateKeying,
    /// Node budget for exhaustive search.
    #[arg(long, default_value_t = DEFAULT_NODE_BUDGET)]
    es_budget: u64,
    /// Let random offloading also draw local execution.
    #[arg(long)]
    ro_include_local: bool,
}

impl LearnArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            rlaa: RlaaParams {
                epsilon: self.epsilon,
                beta: self.beta,
                gamma: self.gamma,
                max_episodes: self.episodes,
                rng_seed: 0,
                keying: self.state_key,
                epsilon_final: self.epsilon_final,
            },
            es_node_budget: self.es_budget,
            ro_include_local: self.ro_include_local,
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    /// es | le | ro | go | rlaa
    #[arg(long)]
    solver: SolverKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    learn: LearnArgs,
    /// Write the assignment as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the per-episode training trace (rlaa only).
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write the learned Q-table (rlaa only).
    #[arg(long)]
    qtable: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, default_value = "fig2")]
    preset: Preset,
    /// Comma-separated UE counts; preset default when omitted.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// Comma-separated solvers; preset default when omitted.
    #[arg(long, value_delimiter = ',')]
    solvers: Option<Vec<SolverKind>>,
    #[arg(long, default_value_t = 10)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "total")]
    noise_mode: NoiseMode,
    #[command(flatten)]
    learn: LearnArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    assignment: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, default_value = "fig2")]
    preset: Preset,
    #[arg(long, value_delimiter = ',', default_value = "3,4,5")]
    n: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "total")]
    noise_mode: NoiseMode,
    #[command(flatten)]
    learn: LearnArgs,
}

fn write(path: &PathBuf, text: &str) -> Result<(), String> {
    std::fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
}

fn generate(args: GenerateArgs) -> Result<ExitCode, String> {
    let spec = match &args.spec {
        Some(path) => scenario::load_spec(path).map_err(|e| e.to_string())?,
        None => {
            let mut s = scenario::preset(args.preset, args.n, args.noise_mode);
            s.seed = args.seed;
            s
        }
    };
    let instance = scenario::generate(&spec).map_err(|e| e.to_string())?;
    scenario::save_instance(&instance, &args.out).map_err(|e| e.to_string())?;
    if let Some(path) = &args.emit_spec {
        scenario::save_spec(&spec, path).map_err(|e| e.to_string())?;
    }
    println!(
        "wrote {} ({} UEs, {} UAVs)",
        args.out.display(),
        instance.num_ues(),
        instance.num_uavs()
    );
    Ok(ExitCode::SUCCESS)
}

fn solve_cmd(args: SolveArgs) -> Result<ExitCode, String> {
    let instance = scenario::load_instance(&args.instance).map_err(|e| e.to_string())?;
    let config = args.learn.config();
    let (assignment, objective, wall) =
        if args.solver == SolverKind::Rlaa && (args.trace.is_some() || args.qtable.is_some()) {
            let params = RlaaParams {
                rng_seed: args.seed,
                ..config.rlaa
            };
            let start = std::time::Instant::now();
            let out = rlaa::train(&instance, &params).map_err(|e| e.to_string())?;
            let wall = start.elapsed().as_secs_f64();
            if let Some(path) = &args.trace {
                write(path, &out.trace.to_csv())?;
            }
            if let Some(path) = &args.qtable {
                write(path, &out.q.to_csv(&instance))?;
            }
            let e = uavmec::objective_energy(&instance, &out.assignment);
            (out.assignment, e, wall)
        } else {
            let out = solve(&instance, args.solver, args.seed, &config).map_err(|e| e.to_string())?;
            (out.assignment, out.objective_j, out.wall_time_s)
        };
    if let Some(path) = &args.out {
        let text = serde_json::to_string_pretty(&assignment).map_err(|e| e.to_string())?;
        write(path, &(text + "\n"))?;
    }
    let report = check_assignment(&instance, &assignment);
    println!("solver: {}", args.solver);
    println!("total energy: {objective:?} J");
    println!("wall time: {wall:.3} s");
    if !report.is_feasible() {
        eprint!("{}", report.to_text());
        return Ok(ExitCode::from(EXIT_INFEASIBLE));
    }
    Ok(ExitCode::SUCCESS)
}

fn experiment(
    preset: Preset,
    n: Option<Vec<usize>>,
    solvers: Option<Vec<SolverKind>>,
    reps: usize,
    seed: u64,
    noise_mode: NoiseMode,
    learn: &LearnArgs,
) -> ExperimentSpec {
    let mut spec = ExperimentSpec::desk(preset);
    if let Some(n) = n {
        spec.n_values = n;
    }
    if let Some(s) = solvers {
        spec.solvers = s;
    }
    spec.replications = reps;
    spec.base_seed = seed;
    spec.noise_mode = noise_mode;
    spec.solver = learn.config();
    spec
}

fn harness_exit(e: &harness::HarnessError) -> ExitCode {
    match e {
        harness::HarnessError::Infeasible { .. } => ExitCode::from(EXIT_INFEASIBLE),
        _ => ExitCode::from(EXIT_USAGE),
    }
}

fn sweep(args: SweepArgs) -> Result<ExitCode, String> {
    let spec = experiment(
        args.preset,
        args.n,
        args.solvers,
        args.reps,
        args.seed,
        args.noise_mode,
        &args.learn,
    );
    let rows = match harness::run_experiment(&spec) {
        Ok(rows) => rows,
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(harness_exit(&e));
        }
    };
    let files = harness::emit_csv(&rows, &args.out).map_err(|e| e.to_string())?;
    let spec_json = serde_json::to_string_pretty(&spec).map_err(|e| e.to_string())?;
    write(&args.out.join("experiment.json"), &(spec_json + "\n"))?;
    println!(
        "{:>6} {:>6} {:>6} {:>16} {:>16}",
        "N", "solver", "count", "mean_J", "stddev_J"
    );
    for a in harness::aggregate(&rows) {
        println!(
            "{:>6} {:>6} {:>6} {:>16.6} {:>16.6}",
            a.n, a.solver, a.count, a.mean_j, a.stddev_j
        );
    }
    println!(
        "wrote {}, {}, {}",
        files.results.display(),
        files.aggregate.display(),
        files.timings.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn verify(args: VerifyArgs) -> Result<ExitCode, String> {
    let instance = scenario::load_instance(&args.instance).map_err(|e| e.to_string())?;
    let text = std::fs::read_to_string(&args.assignment).map_err(|e| format!("{}: {e}", args.assignment.display()))?;
    let assignment: Assignment =
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", args.assignment.display()))?;
    let report = check_assignment(&instance, &assignment);
    if report.is_feasible() {
        println!(
            "feasible; total energy: {:?} J",
            uavmec::objective_energy(&instance, &assignment)
        );
        Ok(ExitCode::SUCCESS)
    } else {
        print!("{}", report.to_text());
        Ok(ExitCode::from(EXIT_INFEASIBLE))
    }
}

fn oracle(args: OracleArgs) -> Result<ExitCode, String> {
    let spec = experiment(
        args.preset,
        Some(args.n),
        None,
        args.reps,
        args.seed,
        args.noise_mode,
        &args.learn,
    );
    let points = match harness::oracle_comparison(&spec) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(harness_exit(&e));
        }
    };
    let mut ok = true;
    for p in &points {
        let verdict = if p.passes() { "PASS" } else { "FAIL" };
        ok &= p.passes();
        println!(
            "{verdict} N={} es_mean={:.6} J rlaa_mean={:.6} J gap={:.4}% worst={:.4}% skipped={}",
            p.n,
            p.es_mean_j,
            p.rlaa_mean_j,
            100.0 * p.rel_gap,
            100.0 * p.worst_rel_gap,
            p.skipped
        );
    }
    println!("tolerance {:.1}%", 100.0 * ORACLE_REL_TOL);
    Ok(if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_ORACLE)
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Solve(a) => solve_cmd(a),
        Command::Sweep(a) => sweep(a),
        Command::Verify(a) => verify(a),
        Command::Oracle(a) => oracle(a),
    };
    result.unwrap_or_else(|msg| {
        eprintln!("error: {msg}");
        ExitCode::from(EXIT_USAGE)
    })
}
