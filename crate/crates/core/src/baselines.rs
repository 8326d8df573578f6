//! Comparison solvers (exhaustive search, all-local, random offload, nearest
//! UAV) and the common solver entry point used by the harness.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::feasibility::{allocate, objective_energy, Action, ActionCatalog, Assignment, CapacityState};
use crate::rlaa::{self, RlaaError, RlaaParams};
use crate::scenario::Instance;

pub const DEFAULT_NODE_BUDGET: u64 = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SolverKind {
    Es,
    Le,
    Ro,
    Go,
    Rlaa,
}

impl SolverKind {
    pub const ALL: [SolverKind; 5] = [
        SolverKind::Es,
        SolverKind::Le,
        SolverKind::Ro,
        SolverKind::Go,
        SolverKind::Rlaa,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Es => "es",
            SolverKind::Le => "le",
            SolverKind::Ro => "ro",
            SolverKind::Go => "go",
            SolverKind::Rlaa => "rlaa",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SolverKind::ALL
            .into_iter()
            .find(|k| k.name() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown solver `{s}` (expected es | le | ro | go | rlaa)"))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("exhaustive search exceeded its budget of {budget} nodes")]
    BudgetExceeded { budget: u64 },
    #[error(transparent)]
    Rlaa(#[from] RlaaError),
}

struct Search<'a> {
    catalog: &'a ActionCatalog,
    /// Per UE, option indices by ascending energy (ties by ordinal).
    order: Vec<Vec<usize>>,
    /// `suffix_min[i]`: sum of the unconstrained per-UE minima of UEs `i..`.
    suffix_min: Vec<f64>,
    cap: CapacityState,
    current: Vec<usize>,
    best: Option<(f64, Vec<usize>)>,
    nodes: u64,
    budget: u64,
}

impl Search<'_> {
    fn incumbent(&self) -> f64 {
        self.best.as_ref().map_or(f64::INFINITY, |b| b.0)
    }

    fn dfs(&mut self, ue: usize, acc: f64) -> Result<(), SolveError> {
        if ue == self.current.len() {
            if acc < self.incumbent() {
                self.best = Some((acc, self.current.clone()));
            }
            return Ok(());
        }
        let opts = self.catalog.options(ue);
        for pos in 0..self.order[ue].len() {
            let k = self.order[ue][pos];
            let o = opts[k];
            // Children are sorted by energy, so once one is bounded out the rest are too.
            if acc + o.energy_j + self.suffix_min[ue + 1] >= self.incumbent() {
                break;
            }
            if !self.cap.admits(o.action, o.min_freq_hz) {
                continue;
            }
            self.nodes += 1;
            if self.nodes > self.budget {
                return Err(SolveError::BudgetExceeded { budget: self.budget });
            }
            let saved = match o.action {
                Action::Offload { uav, slot } => self.cap.load(uav, slot).map(|l| (uav, slot, l)),
                Action::Local => None,
            };
            self.cap
                .commit(o.action, o.min_freq_hz)
                .expect("admits() checked above");
            self.current[ue] = k;
            let result = self.dfs(ue + 1, acc + o.energy_j);
            if let Some((uav, slot, l)) = saved {
                self.cap.restore(uav, slot, l);
            }
            result?;
        }
        Ok(())
    }
}

/// Minimum-energy assignment by depth-first search over UEs with
/// branch-and-bound. Refuses with [`SolveError::BudgetExceeded`] rather than
/// returning an approximation.
pub fn solve_es(instance: &Instance, node_budget: u64) -> Result<Assignment, SolveError> {
    let catalog = ActionCatalog::new(instance);
    let n = instance.num_ues();
    let cap = CapacityState::new(instance);
    let order = (0..n)
        .map(|i| {
            let opts = catalog.options(i);
            let mut idx: Vec<usize> = (0..opts.len()).collect();
            idx.sort_by(|&a, &b| {
                opts[a]
                    .energy_j
                    .total_cmp(&opts[b].energy_j)
                    .then(opts[a].ordinal.cmp(&opts[b].ordinal))
            });
            idx
        })
        .collect();
    let mut suffix_min = vec![0.0; n + 1];
    for i in (0..n).rev() {
        suffix_min[i] = suffix_min[i + 1] + catalog.unconstrained_min_energy(i, &cap);
    }
    let mut search = Search {
        catalog: &catalog,
        order,
        suffix_min,
        cap,
        current: vec![0; n],
        best: None,
        nodes: 0,
        budget: node_budget,
    };
    search.dfs(0, 0.0)?;
    let (_, picks) = search
        .best
        .expect("all-local is always feasible, so the search finds a leaf");
    Ok(Assignment {
        allocations: picks
            .iter()
            .enumerate()
            .map(|(i, &k)| allocate(&catalog.options(i)[k]))
            .collect(),
    })
}

/// Every UE computes its own task at the minimal frequency.
pub fn solve_le(instance: &Instance) -> Assignment {
    let catalog = ActionCatalog::new(instance);
    Assignment {
        allocations: (0..instance.num_ues())
            .map(|i| allocate(&catalog.options(i)[0]))
            .collect(),
    }
}

/// UEs in index order draw uniformly among their currently feasible offloads,
/// falling back to local execution when none is left. With `include_local`
/// the draw is over the whole feasible set instead.
pub fn solve_ro<R: Rng + ?Sized>(instance: &Instance, rng: &mut R, include_local: bool) -> Assignment {
    let catalog = ActionCatalog::new(instance);
    let mut cap = CapacityState::new(instance);
    let mut allocations = Vec::with_capacity(instance.num_ues());
    for i in 0..instance.num_ues() {
        let feasible = catalog.feasible_actions(i, &cap);
        let pool = if include_local { &feasible[..] } else { &feasible[1..] };
        let choice = if pool.is_empty() {
            feasible[0]
        } else {
            pool[rng.gen_range(0..pool.len())]
        };
        cap.commit(choice.action, choice.min_freq_hz)
            .expect("feasible set only holds admissible actions");
        allocations.push(allocate(&choice));
    }
    Assignment { allocations }
}

/// UEs in index order take the nearest (UAV, slot) by 3-D distance that still
/// has room under both the UE cap and the frequency budget; local otherwise.
pub fn solve_go(instance: &Instance) -> Assignment {
    let catalog = ActionCatalog::new(instance);
    let mut cap = CapacityState::new(instance);
    let mut allocations = Vec::with_capacity(instance.num_ues());
    for i in 0..instance.num_ues() {
        let feasible = catalog.feasible_actions(i, &cap);
        let choice = feasible[1..]
            .iter()
            .min_by(|a, b| {
                a.distance_3d_m
                    .total_cmp(&b.distance_3d_m)
                    .then(a.ordinal.cmp(&b.ordinal))
            })
            .copied()
            .unwrap_or(feasible[0]);
        cap.commit(choice.action, choice.min_freq_hz)
            .expect("feasible set only holds admissible actions");
        allocations.push(allocate(&choice));
    }
    Assignment { allocations }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Q-learning settings; the seed is replaced by the per-call seed.
    pub rlaa: RlaaParams,
    pub es_node_budget: u64,
    pub ro_include_local: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rlaa: RlaaParams::default(),
            es_node_budget: DEFAULT_NODE_BUDGET,
            ro_include_local: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub assignment: Assignment,
    pub objective_j: f64,
    pub wall_time_s: f64,
}

/// Runs one solver. `seed` drives the random choices of RO and RLAA; the
/// other solvers ignore it.
pub fn solve(
    instance: &Instance,
    kind: SolverKind,
    seed: u64,
    config: &SolverConfig,
) -> Result<SolveOutcome, SolveError> {
    let start = Instant::now();
    let assignment = match kind {
        SolverKind::Es => solve_es(instance, config.es_node_budget)?,
        SolverKind::Le => solve_le(instance),
        SolverKind::Ro => solve_ro(instance, &mut ChaCha8Rng::seed_from_u64(seed), config.ro_include_local),
        SolverKind::Go => solve_go(instance),
        SolverKind::Rlaa => {
            let params = RlaaParams {
                rng_seed: seed,
                ..config.rlaa
            };
            rlaa::train(instance, &params)?.assignment
        }
    };
    let wall_time_s = start.elapsed().as_secs_f64();
    Ok(SolveOutcome {
        objective_j: objective_energy(instance, &assignment),
        assignment,
        wall_time_s,
    })
}
