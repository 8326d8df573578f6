//! End-to-end acceptance suite. Runs without the libtest harness so every
//! criterion prints exactly one PASS/FAIL line; the process exits nonzero when
//! any criterion fails.

use std::fs;
use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

use uavmec::baselines::{solve_es, solve_le, SolverKind, DEFAULT_NODE_BUDGET};
use uavmec::feasibility::{check_assignment, min_offload_freq, objective_energy, Allocation, Assignment};
use uavmec::harness::{aggregate, oracle_comparison, run_experiment, ExperimentSpec, ResultRow, RowStatus};
use uavmec::model::{self, ComputeParams, ExecutionKind, NoiseMode, RadioParams, Task, UavTrajectory, UePosition};
use uavmec::rlaa::{q_update, QTable, RlaaParams};
use uavmec::scenario::{generate, preset, Instance, Preset, UavCenter, UserEquipment};
use uavmec::{solve, Action, SolverConfig};

struct Verdict {
    pass: bool,
    detail: String,
}

type Criterion = (&'static str, fn() -> Verdict);

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn rel_err(got: f64, want: f64) -> f64 {
    if want == 0.0 {
        got.abs()
    } else {
        ((got - want) / want).abs()
    }
}

fn small_optimality() -> Verdict {
    let mut spec = ExperimentSpec::desk(Preset::Fig2);
    spec.n_values = vec![3, 4, 5];
    spec.replications = 10;
    let points = match oracle_comparison(&spec) {
        Ok(p) => p,
        Err(e) => return verdict(false, format!("oracle run failed: {e}")),
    };
    let detail = points
        .iter()
        .map(|p| format!("N={} gap={:.4}%", p.n, 100.0 * p.rel_gap))
        .collect::<Vec<_>>()
        .join(", ");
    verdict(points.len() == 3 && points.iter().all(|p| p.passes()), detail)
}

/// One-sided paired t-test that `lower` has the smaller mean; returns the p-value.
fn paired_p_value(lower: &[f64], upper: &[f64]) -> f64 {
    let d: Vec<f64> = upper.iter().zip(lower).map(|(u, l)| u - l).collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if var == 0.0 {
        return if mean > 0.0 { 0.0 } else { 1.0 };
    }
    let t = mean / (var / n).sqrt();
    let dist = StudentsT::new(0.0, 1.0, n - 1.0).expect("valid t distribution");
    1.0 - dist.cdf(t)
}

fn energies(rows: &[ResultRow], n: usize, solver: SolverKind) -> Vec<f64> {
    rows.iter()
        .filter(|r| r.n == n && r.solver == solver && r.status == RowStatus::Ok)
        .map(|r| r.total_energy_j)
        .collect()
}

fn solver_ordering() -> Verdict {
    const ALPHA: f64 = 0.05;
    let mut pass = true;
    let mut notes = Vec::new();
    for p in [Preset::Fig3, Preset::Fig4] {
        let mut spec = ExperimentSpec::desk(p);
        spec.n_values = vec![50, 100];
        spec.solvers = vec![SolverKind::Rlaa, SolverKind::Go, SolverKind::Ro, SolverKind::Le];
        spec.replications = 10;
        let rows = match run_experiment(&spec) {
            Ok(r) => r,
            Err(e) => return verdict(false, format!("{p}: sweep failed: {e}")),
        };
        for &n in &spec.n_values {
            let [rl, go, ro, le] =
                [SolverKind::Rlaa, SolverKind::Go, SolverKind::Ro, SolverKind::Le].map(|s| energies(&rows, n, s));
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            let (m_rl, m_go, m_ro, m_le) = (mean(&rl), mean(&go), mean(&ro), mean(&le));
            let ordered = m_rl <= m_go && m_go <= m_ro && m_ro <= m_le;
            let p_go_ro = paired_p_value(&go, &ro);
            let p_ro_le = paired_p_value(&ro, &le);
            let ok = ordered && p_go_ro < ALPHA && p_ro_le < ALPHA;
            pass &= ok;
            notes.push(format!(
                "{p} N={n}: rlaa={m_rl:.3} go={m_go:.3} ro={m_ro:.3} le={m_le:.3} p(go<ro)={p_go_ro:.2e} p(ro<le)={p_ro_le:.2e}{}",
                if ok { "" } else { " [violated]" }
            ));
        }
    }
    verdict(pass, notes.join("; "))
}

fn le_closed_form() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for case in 0..300 {
        let p = [Preset::Fig2, Preset::Fig3, Preset::Fig4][case % 3];
        let mut spec = preset(p, rng.gen_range(0..60), NoiseMode::Total);
        spec.seed = rng.gen();
        spec.compute.t_max_s = rng.gen_range(0.2..5.0);
        let mut inst = generate(&spec).expect("preset generates");
        for ue in inst.ues.iter_mut() {
            if rng.gen_bool(0.3) {
                ue.switched_capacitance = Some(rng.gen_range(1e-28..1e-26));
            }
        }
        let t = inst.compute.t_max_s;
        let want: f64 = (0..inst.num_ues())
            .map(|i| inst.switched_capacitance(i) * inst.ues[i].task.cycles.powi(3) / (t * t))
            .sum();
        let got = objective_energy(&inst, &solve_le(&inst));
        worst = worst.max(rel_err(got, want));
    }
    verdict(
        worst <= 1e-12,
        format!("300 instances, worst relative error {worst:.3e}"),
    )
}

fn deadline_identity() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut checked, mut worst, mut draws) = (0usize, 0.0f64, 0usize);
    while checked < 10_000 {
        draws += 1;
        let task = Task {
            data_bits: 10f64.powf(rng.gen_range(3.0..8.0)),
            cycles: 10f64.powf(rng.gen_range(6.0..10.5)),
        };
        let rate = 10f64.powf(rng.gen_range(4.0..9.0));
        let t_max = rng.gen_range(0.05..10.0);
        let Some(f) = min_offload_freq(&task, rate, t_max) else {
            continue;
        };
        let t_tr = model::transmission_time(task.data_bits, rate).unwrap();
        let t_c = model::compute_time(task.cycles, f).unwrap();
        worst = worst.max((model::total_time(ExecutionKind::Offload, t_tr, t_c) - t_max).abs());
        checked += 1;
    }
    verdict(
        worst <= 1e-9,
        format!("{checked} pairs ({draws} drawn), worst |T - T_max| = {worst:.3e} s"),
    )
}

fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let num_uavs = rng.gen_range(1..=3);
    let mut spec = preset(Preset::Fig2, rng.gen_range(1..=6), NoiseMode::Total);
    spec.uav_centers = (0..num_uavs)
        .map(|_| UavCenter {
            x_m: rng.gen_range(-1500.0..1500.0),
            y_m: rng.gen_range(-1000.0..1000.0),
            altitude_m: rng.gen_range(100.0..500.0),
        })
        .collect();
    spec.num_slots = rng.gen_range(1..=4);
    spec.radius_m = rng.gen_range(0.0..900.0);
    spec.compute.slot_ue_cap = rng.gen_range(1..=3);
    spec.compute.f_max_hz = 10f64.powf(rng.gen_range(8.5..10.5));
    spec.compute.t_max_s = rng.gen_range(0.3..2.0);
    spec.seed = rng.gen();
    generate(&spec).expect("random spec is valid")
}

fn feasibility_fuzz() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let config = SolverConfig {
        rlaa: RlaaParams {
            max_episodes: 150,
            ..RlaaParams::default()
        },
        ..SolverConfig::default()
    };
    let mut offloads = 0usize;
    for case in 0..1000 {
        let inst = random_instance(&mut rng);
        for kind in SolverKind::ALL {
            let out = match solve(&inst, kind, case as u64, &config) {
                Ok(o) => o,
                Err(e) => return verdict(false, format!("instance {case} {kind}: {e}")),
            };
            let report = check_assignment(&inst, &out.assignment);
            if !report.is_feasible() {
                return verdict(false, format!("instance {case} {kind}: {}", report.to_text()));
            }
            offloads += out.assignment.actions().filter(|a| *a != Action::Local).count();
        }
    }
    verdict(
        true,
        format!("1000 instances x 5 solvers, {offloads} offload decisions, no violations"),
    )
}

fn q_update_arithmetic() -> Verdict {
    let mut q = QTable::new(2);
    let a = q_update(&mut q, 0, 0, 10.0, 1, [0], 0.2, 0.9);
    q.set(0, 0, 2.0);
    q.set(1, 0, 2.0);
    let b = q_update(&mut q, 0, 0, 10.0, 1, [0], 0.2, 0.9);
    q.set(0, 1, 7.25);
    let c = q_update(&mut q, 0, 1, 10.0, 1, [0], 0.0, 0.9);
    let want_b = 2.0 + 0.2 * (10.0 + 0.9 * 2.0 - 2.0);
    let pass = a == 2.0 && b == want_b && (b - 3.96).abs() < 1e-12 && c == 7.25;
    verdict(pass, format!("0 -> {a}, 2 -> {b}, beta=0 keeps {c}"))
}

/// Every combination of actions with minimal allocation, no pruning.
fn brute_force_optimum(inst: &Instance) -> f64 {
    let actions: Vec<Action> = inst.actions().collect();
    let n = inst.num_ues();
    let mut best = f64::INFINITY;
    let mut idx = vec![0usize; n];
    loop {
        let allocations = idx
            .iter()
            .enumerate()
            .map(|(i, &k)| {
                let action = actions[k];
                let task = &inst.ues[i].task;
                let freq_hz = match action {
                    Action::Local => task.cycles / inst.compute.t_max_s,
                    Action::Offload { uav, slot } => uavmec::feasibility::link(inst, i, uav, slot)
                        .and_then(|l| min_offload_freq(task, l.rate_bps, inst.compute.t_max_s))
                        .unwrap_or(f64::INFINITY),
                };
                Allocation { action, freq_hz }
            })
            .collect();
        let assignment = Assignment { allocations };
        if check_assignment(inst, &assignment).is_feasible() {
            best = best.min(objective_energy(inst, &assignment));
        }
        let mut d = 0;
        while d < n {
            idx[d] += 1;
            if idx[d] < actions.len() {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
        if d == n {
            return best;
        }
    }
}

fn trap_instance() -> Instance {
    let ue = |x: f64, d: f64, f: f64| {
        UserEquipment::new(
            UePosition { x_m: x, y_m: 0.0 },
            Task {
                data_bits: d,
                cycles: f,
            },
        )
    };
    Instance {
        ues: vec![ue(800.0, 1e6, 5e8), ue(800.0, 819_200.0, 1e9), ue(790.0, 9e5, 9e8)],
        uavs: vec![UavTrajectory {
            center_x_m: 0.0,
            center_y_m: 0.0,
            radius_m: 800.0,
            altitude_m: 350.0,
            num_slots: 1,
            phase_rad: 0.0,
        }],
        radio: RadioParams::standard(NoiseMode::Total),
        compute: ComputeParams {
            slot_ue_cap: 1,
            ..ComputeParams::standard()
        },
    }
}

fn es_equals_enumeration() -> Verdict {
    let mut cases = vec![trap_instance()];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    while cases.len() < 200 {
        let mut inst = random_instance(&mut rng);
        inst.ues.truncate(rng.gen_range(1..=3));
        inst.compute.slot_ue_cap = 1;
        cases.push(inst);
    }
    let mut binding = 0usize;
    for (c, inst) in cases.iter().enumerate() {
        let es = match solve_es(inst, DEFAULT_NODE_BUDGET) {
            Ok(a) => a,
            Err(e) => return verdict(false, format!("case {c}: {e}")),
        };
        let got = objective_energy(inst, &es);
        let want = brute_force_optimum(inst);
        if got != want {
            return verdict(false, format!("case {c}: es={got:?} enumeration={want:?}"));
        }
        let unconstrained: f64 = (0..inst.num_ues())
            .map(|i| {
                uavmec::feasibility::deadline_feasible_options(inst, i)
                    .iter()
                    .map(|o| o.energy_j)
                    .fold(f64::INFINITY, f64::min)
            })
            .sum();
        if want > unconstrained * (1.0 + 1e-12) {
            binding += 1;
        }
    }
    let trap_binds = {
        let inst = &cases[0];
        let free: f64 = (0..3)
            .map(|i| {
                uavmec::feasibility::deadline_feasible_options(inst, i)
                    .iter()
                    .map(|o| o.energy_j)
                    .fold(f64::INFINITY, f64::min)
            })
            .sum();
        brute_force_optimum(inst) > free
    };
    verdict(
        trap_binds,
        format!(
            "{} instances with K=1 match exactly, capacity binds in {binding}",
            cases.len()
        ),
    )
}

fn sweep_twice(bin: &str, dir: &std::path::Path, args: &[&str]) -> Result<(Vec<u8>, Vec<u8>), String> {
    let status = Command::new(bin)
        .arg("sweep")
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .map_err(|e| e.to_string())?;
    if !status.status.success() {
        return Err(String::from_utf8_lossy(&status.stderr).into_owned());
    }
    let read = |f: &str| fs::read(dir.join(f)).map_err(|e| e.to_string());
    Ok((read("results.csv")?, read("aggregate.csv")?))
}

fn determinism() -> Verdict {
    let bin = env!("CARGO_BIN_EXE_uavmec");
    let tmp = tempfile::tempdir().expect("temp dir");
    let mut notes = Vec::new();
    for (label, args) in [
        ("fig2", vec!["--preset", "fig2", "--reps", "4", "--episodes", "3000"]),
        (
            "fig3",
            vec!["--preset", "fig3", "--n", "25,50", "--reps", "3", "--episodes", "1000"],
        ),
    ] {
        let a = sweep_twice(bin, &tmp.path().join(format!("{label}-a")), &args);
        let b = sweep_twice(bin, &tmp.path().join(format!("{label}-b")), &args);
        match (a, b) {
            (Ok(a), Ok(b)) => {
                if a != b {
                    return verdict(false, format!("{label}: CSV bytes differ between runs"));
                }
                notes.push(format!("{label}: {} + {} identical bytes", a.0.len(), a.1.len()));
            }
            (Err(e), _) | (_, Err(e)) => return verdict(false, format!("{label}: sweep failed: {e}")),
        }
    }
    let spec = ExperimentSpec {
        n_values: vec![3, 5],
        replications: 3,
        ..ExperimentSpec::desk(Preset::Fig2)
    };
    let one = run_experiment(&spec).map(|r| aggregate(&r));
    let two = run_experiment(&spec).map(|r| aggregate(&r));
    let same = matches!((&one, &two), (Ok(x), Ok(y)) if x == y);
    notes.push(format!("library aggregates identical: {same}"));
    verdict(same, notes.join("; "))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("small-scale optimality (RLAA within 2% of ES)", small_optimality),
        ("solver ordering RLAA <= GO <= RO <= LE", solver_ordering),
        ("all-local closed form", le_closed_form),
        ("minimal-allocation deadline identity", deadline_identity),
        ("feasibility fuzzing", feasibility_fuzz),
        ("Q-update arithmetic", q_update_arithmetic),
        ("ES equals full enumeration", es_equals_enumeration),
        ("sweep determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = run();
        let secs = start.elapsed().as_secs_f64();
        failed += usize::from(!v.pass);
        println!(
            "{} criterion {} {name} ({secs:.1}s): {}",
            if v.pass { "PASS" } else { "FAIL" },
            i + 1,
            v.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
