//! Replicated solver sweeps over generated instances, CSV output and the
//! small-N exhaustive-search comparison.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{solve, SolveError, SolverConfig, SolverKind};
use crate::feasibility::{check_assignment, ConstraintReport};
use crate::model::NoiseMode;
use crate::rlaa::RlaaParams;
use crate::scenario::{generate, preset, Preset, ScenarioError};

/// Largest relative gap of mean RLAA energy over mean ES energy that still passes the oracle.
pub const ORACLE_REL_TOL: f64 = 0.02;
/// Episodes used by the harness unless overridden.
pub const DESK_EPISODES: usize = 10_000;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("{solver} produced an infeasible assignment ({preset}, N={n}, replication {replication}):\n{report}")]
    Infeasible {
        preset: Preset,
        n: usize,
        solver: SolverKind,
        replication: usize,
        report: String,
    },
    #[error("{solver} failed ({preset}, N={n}, replication {replication}): {source}")]
    Solve {
        preset: Preset,
        n: usize,
        solver: SolverKind,
        replication: usize,
        #[source]
        source: SolveError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid experiment: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub preset: Preset,
    pub n_values: Vec<usize>,
    pub solvers: Vec<SolverKind>,
    pub replications: usize,
    pub base_seed: u64,
    #[serde(default)]
    pub noise_mode: NoiseMode,
    pub solver: SolverConfig,
}

impl ExperimentSpec {
    /// Desk-scale defaults for a preset: N from 3 to 7 for fig2, up to 100 UEs otherwise.
    pub fn desk(preset: Preset) -> Self {
        let (n_values, solvers) = match preset {
            Preset::Fig2 => ((3..=7).collect(), SolverKind::ALL.to_vec()),
            Preset::Fig3 | Preset::Fig4 => (
                vec![25, 50, 75, 100],
                vec![SolverKind::Le, SolverKind::Ro, SolverKind::Go, SolverKind::Rlaa],
            ),
        };
        ExperimentSpec {
            preset,
            n_values,
            solvers,
            replications: 10,
            base_seed: 0,
            noise_mode: NoiseMode::Total,
            solver: SolverConfig {
                rlaa: RlaaParams {
                    max_episodes: DESK_EPISODES,
                    ..RlaaParams::default()
                },
                ..SolverConfig::default()
            },
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.replications == 0 {
            return Err(HarnessError::InvalidSpec("replications must be >= 1".into()));
        }
        if self.n_values.is_empty() || self.n_values.contains(&0) {
            return Err(HarnessError::InvalidSpec(
                "N values must be positive and non-empty".into(),
            ));
        }
        if self.solvers.is_empty() {
            return Err(HarnessError::InvalidSpec("no solvers selected".into()));
        }
        if self.solvers.contains(&SolverKind::Es) && self.solver.es_node_budget == 0 {
            return Err(HarnessError::InvalidSpec(
                "exhaustive search needs a node budget".into(),
            ));
        }
        self.solver
            .rlaa
            .validate()
            .map_err(|e| HarnessError::InvalidSpec(e.to_string()))
    }
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Order-sensitive 64-bit hash of a sequence of integers, stable across platforms and releases.
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(0x5EED_u64, |h, &p| mix64(h ^ mix64(p)))
}

fn preset_code(p: Preset) -> u64 {
    match p {
        Preset::Fig2 => 2,
        Preset::Fig3 => 3,
        Preset::Fig4 => 4,
    }
}

fn solver_code(s: SolverKind) -> u64 {
    SolverKind::ALL.iter().position(|&k| k == s).unwrap() as u64 + 1
}

/// Seed of the instance shared by every solver at one (preset, N, replication) point.
pub fn instance_seed(base_seed: u64, preset: Preset, n: usize, replication: usize) -> u64 {
    derive_seed(&[base_seed, preset_code(preset), n as u64, replication as u64])
}

/// Seed for one solver's random choices on one instance.
pub fn solver_seed(instance_seed: u64, solver: SolverKind) -> u64 {
    derive_seed(&[instance_seed, solver_code(solver)])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Ok,
    /// Exhaustive search refused because of its node budget.
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub preset: Preset,
    pub n: usize,
    pub solver: SolverKind,
    pub replication: usize,
    pub instance_seed: u64,
    pub solver_seed: u64,
    pub status: RowStatus,
    pub total_energy_j: f64,
    pub wall_time_s: f64,
    pub feasible: bool,
}

fn run_point(spec: &ExperimentSpec, n: usize, replication: usize) -> Result<Vec<ResultRow>, HarnessError> {
    let seed = instance_seed(spec.base_seed, spec.preset, n, replication);
    let mut scenario = preset(spec.preset, n, spec.noise_mode);
    scenario.seed = seed;
    let instance = generate(&scenario)?;
    let mut rows = Vec::with_capacity(spec.solvers.len());
    for &solver in &spec.solvers {
        let s_seed = solver_seed(seed, solver);
        let mut row = ResultRow {
            preset: spec.preset,
            n,
            solver,
            replication,
            instance_seed: seed,
            solver_seed: s_seed,
            status: RowStatus::Ok,
            total_energy_j: f64::NAN,
            wall_time_s: 0.0,
            feasible: true,
        };
        match solve(&instance, solver, s_seed, &spec.solver) {
            Ok(out) => {
                let report = check_assignment(&instance, &out.assignment);
                if !report.is_feasible() {
                    return Err(HarnessError::Infeasible {
                        preset: spec.preset,
                        n,
                        solver,
                        replication,
                        report: report.to_text(),
                    });
                }
                row.total_energy_j = out.objective_j;
                row.wall_time_s = out.wall_time_s;
            }
            Err(SolveError::BudgetExceeded { .. }) => row.status = RowStatus::Skipped,
            Err(source) => {
                return Err(HarnessError::Solve {
                    preset: spec.preset,
                    n,
                    solver,
                    replication,
                    source,
                })
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Runs every (N, replication) point in parallel, solving one shared instance
/// per point with each solver. Every solved assignment is verified before its
/// row is kept. Rows come back sorted by (N, solver, replication).
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<ResultRow>, HarnessError> {
    spec.validate()?;
    let points: Vec<(usize, usize)> = spec
        .n_values
        .iter()
        .flat_map(|&n| (0..spec.replications).map(move |r| (n, r)))
        .collect();
    let nested = points
        .par_iter()
        .map(|&(n, r)| run_point(spec, n, r))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rows: Vec<ResultRow> = nested.into_iter().flatten().collect();
    rows.sort_by_key(|r| (r.n, r.solver, r.replication));
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub preset: Preset,
    pub n: usize,
    pub solver: SolverKind,
    pub count: usize,
    pub skipped: usize,
    pub mean_j: f64,
    /// Sample standard deviation; zero for a single replication.
    pub stddev_j: f64,
}

pub fn mean_stddev(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Per-(N, solver) mean and standard deviation over non-skipped rows, in row order.
pub fn aggregate(rows: &[ResultRow]) -> Vec<AggregateRow> {
    let mut keys: Vec<(Preset, usize, SolverKind)> = rows.iter().map(|r| (r.preset, r.n, r.solver)).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .map(|(preset, n, solver)| {
            let group: Vec<&ResultRow> = rows
                .iter()
                .filter(|r| r.preset == preset && r.n == n && r.solver == solver)
                .collect();
            let energies: Vec<f64> = group
                .iter()
                .filter(|r| r.status == RowStatus::Ok)
                .map(|r| r.total_energy_j)
                .collect();
            let (mean_j, stddev_j) = mean_stddev(&energies);
            AggregateRow {
                preset,
                n,
                solver,
                count: energies.len(),
                skipped: group.len() - energies.len(),
                mean_j,
                stddev_j,
            }
        })
        .collect()
}

/// 17 significant digits, enough to round-trip any f64.
fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

pub const RESULTS_HEADER: &str = "preset,n,solver,replication,instance_seed,solver_seed,status,total_energy_J,feasible";

pub fn results_csv(rows: &[ResultRow]) -> String {
    let mut out = format!("{RESULTS_HEADER}\n");
    for r in rows {
        let status = match r.status {
            RowStatus::Ok => "ok",
            RowStatus::Skipped => "skipped",
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.preset,
            r.n,
            r.solver,
            r.replication,
            r.instance_seed,
            r.solver_seed,
            status,
            num(r.total_energy_j),
            r.feasible
        );
    }
    out
}

pub fn aggregate_csv(rows: &[AggregateRow]) -> String {
    let mut out = String::from("preset,n,solver,count,skipped,mean_J,stddev_J\n");
    for a in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            a.preset,
            a.n,
            a.solver,
            a.count,
            a.skipped,
            num(a.mean_j),
            num(a.stddev_j)
        );
    }
    out
}

/// Wall-clock times live apart from the energy results so those stay byte-reproducible.
pub fn timings_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from("preset,n,solver,replication,wall_time_s\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.preset,
            r.n,
            r.solver,
            r.replication,
            num(r.wall_time_s)
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmittedFiles {
    pub results: PathBuf,
    pub aggregate: PathBuf,
    pub timings: PathBuf,
}

fn write_file(path: &Path, text: &str) -> Result<(), HarnessError> {
    std::fs::write(path, text).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `results.csv`, `aggregate.csv` and `timings.csv` into `dir`, creating it if needed.
pub fn emit_csv(rows: &[ResultRow], dir: &Path) -> Result<EmittedFiles, HarnessError> {
    if rows.is_empty() {
        return Err(HarnessError::InvalidSpec("no result rows to emit".into()));
    }
    std::fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let files = EmittedFiles {
        results: dir.join("results.csv"),
        aggregate: dir.join("aggregate.csv"),
        timings: dir.join("timings.csv"),
    };
    write_file(&files.results, &results_csv(rows))?;
    write_file(&files.aggregate, &aggregate_csv(&aggregate(rows)))?;
    write_file(&files.timings, &timings_csv(rows))?;
    Ok(files)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OraclePoint {
    pub n: usize,
    pub es_mean_j: f64,
    pub rlaa_mean_j: f64,
    /// `(rlaa - es) / es` on the means.
    pub rel_gap: f64,
    /// Largest per-replication relative gap.
    pub worst_rel_gap: f64,
    pub skipped: usize,
}

impl OraclePoint {
    pub fn passes(&self) -> bool {
        self.skipped == 0 && self.rel_gap <= ORACLE_REL_TOL
    }
}

/// Runs ES and RLAA side by side and compares their mean energies per N.
pub fn oracle_comparison(spec: &ExperimentSpec) -> Result<Vec<OraclePoint>, HarnessError> {
    let spec = ExperimentSpec {
        solvers: vec![SolverKind::Es, SolverKind::Rlaa],
        ..spec.clone()
    };
    let rows = run_experiment(&spec)?;
    let points = spec
        .n_values
        .iter()
        .map(|&n| {
            let pick =
                |s: SolverKind| -> Vec<&ResultRow> { rows.iter().filter(|r| r.n == n && r.solver == s).collect() };
            let es = pick(SolverKind::Es);
            let rl = pick(SolverKind::Rlaa);
            let skipped = es.iter().filter(|r| r.status == RowStatus::Skipped).count();
            let paired: Vec<(f64, f64)> = es
                .iter()
                .zip(&rl)
                .filter(|(e, _)| e.status == RowStatus::Ok)
                .map(|(e, r)| (e.total_energy_j, r.total_energy_j))
                .collect();
            let es_mean_j = mean_stddev(&paired.iter().map(|p| p.0).collect::<Vec<_>>()).0;
            let rlaa_mean_j = mean_stddev(&paired.iter().map(|p| p.1).collect::<Vec<_>>()).0;
            let worst_rel_gap = paired
                .iter()
                .map(|(e, r)| (r - e) / e)
                .fold(f64::NEG_INFINITY, f64::max);
            OraclePoint {
                n,
                es_mean_j,
                rlaa_mean_j,
                rel_gap: (rlaa_mean_j - es_mean_j) / es_mean_j,
                worst_rel_gap,
                skipped,
            }
        })
        .collect();
    Ok(points)
}

/// Regenerates a row's instance from its seed, re-solves it and returns the constraint report.
pub fn recheck(spec: &ExperimentSpec, row: &ResultRow) -> Result<ConstraintReport, HarnessError> {
    let mut scenario = preset(spec.preset, row.n, spec.noise_mode);
    scenario.seed = row.instance_seed;
    let instance = generate(&scenario)?;
    let out = solve(&instance, row.solver, row.solver_seed, &spec.solver).map_err(|source| HarnessError::Solve {
        preset: spec.preset,
        n: row.n,
        solver: row.solver,
        replication: row.replication,
        source,
    })?;
    Ok(check_assignment(&instance, &out.assignment))
}
