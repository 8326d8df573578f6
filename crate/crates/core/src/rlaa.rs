//! Tabular Q-learning for joint user association and resource allocation.
//!
//! Each episode sweeps the UEs in index order. A UE picks an action from its
//! currently feasible set with an epsilon-greedy policy, receives the minimal
//! frequency for it, is rewarded with the inverse of the resulting energy, and
//! the Q-table cell for (state, action) moves toward
//! `reward + gamma * max Q(next state, .)`. Slot capacity resets every
//! episode. After the last episode the greedy policy is read out of the table.

use std::collections::hash_map::DefaultHasher;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::feasibility::{allocate, Action, ActionCatalog, ActionOption, Assignment, CapacityState};
use crate::model::ModelError;
use crate::scenario::Instance;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RlaaError {
    #[error("parameter `{name}` = {value} outside [0, 1]")]
    OutOfUnitRange { name: &'static str, value: f64 },
    #[error("ue {ue} action {action}: {source}")]
    Reward {
        ue: usize,
        action: Action,
        #[source]
        source: ModelError,
    },
}

/// What the Q-table rows are keyed by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateKeying {
    /// One row per UE; the table is N x |actions|.
    #[default]
    PerUe,
    /// One row per (deciding UE, full decision vector). Only practical for tiny N.
    JointHash,
}

impl FromStr for StateKeying {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "per-ue" => Ok(StateKeying::PerUe),
            "joint-hash" => Ok(StateKeying::JointHash),
            other => Err(format!("unknown state keying `{other}` (expected per-ue | joint-hash)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RlaaParams {
    /// Exploration probability.
    pub epsilon: f64,
    /// Learning rate.
    pub beta: f64,
    /// Reward decay.
    pub gamma: f64,
    pub max_episodes: usize,
    pub rng_seed: u64,
    #[serde(default)]
    pub keying: StateKeying,
    /// When set, epsilon decays linearly to this value over the run.
    #[serde(default)]
    pub epsilon_final: Option<f64>,
}

impl Default for RlaaParams {
    fn default() -> Self {
        RlaaParams {
            epsilon: 0.9,
            beta: 0.2,
            gamma: 0.9,
            max_episodes: 10_000,
            rng_seed: 0,
            keying: StateKeying::PerUe,
            epsilon_final: None,
        }
    }
}

impl RlaaParams {
    pub fn validate(&self) -> Result<(), RlaaError> {
        let unit = |name, value: f64| {
            if (0.0..=1.0).contains(&value) {
                Ok(())
            } else {
                Err(RlaaError::OutOfUnitRange { name, value })
            }
        };
        unit("epsilon", self.epsilon)?;
        unit("beta", self.beta)?;
        unit("gamma", self.gamma)?;
        if let Some(e) = self.epsilon_final {
            unit("epsilon_final", e)?;
        }
        Ok(())
    }

    fn epsilon_at(&self, episode: usize) -> f64 {
        match self.epsilon_final {
            Some(end) if self.max_episodes > 1 => {
                let frac = episode as f64 / (self.max_episodes - 1) as f64;
                self.epsilon + (end - self.epsilon) * frac
            }
            _ => self.epsilon,
        }
    }
}

/// Action values keyed by (state key, action ordinal). Unvisited cells read as zero.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct QTable {
    num_actions: usize,
    rows: BTreeMap<u64, Vec<f64>>,
}

impl QTable {
    pub fn new(num_actions: usize) -> Self {
        QTable {
            num_actions,
            rows: BTreeMap::new(),
        }
    }

    pub fn get(&self, state_key: u64, ordinal: usize) -> f64 {
        self.rows.get(&state_key).map_or(0.0, |r| r[ordinal])
    }

    pub fn set(&mut self, state_key: u64, ordinal: usize, value: f64) {
        let n = self.num_actions;
        self.rows.entry(state_key).or_insert_with(|| vec![0.0; n])[ordinal] = value;
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows.values().flat_map(|r| r.iter().copied())
    }

    /// `state_key,action,value` lines for every visited row, in key order.
    pub fn to_csv(&self, instance: &Instance) -> String {
        let actions: Vec<Action> = instance.actions().collect();
        let mut out = String::from("state_key,action,value\n");
        for (key, row) in &self.rows {
            for (ordinal, v) in row.iter().enumerate() {
                let _ = writeln!(out, "{key},{},{v:.16e}", actions[ordinal]);
            }
        }
        out
    }
}

/// The current decision of every UE.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateVector(pub Vec<Action>);

impl StateVector {
    pub fn all_local(num_ues: usize) -> Self {
        StateVector(vec![Action::Local; num_ues])
    }
}

/// Inverse energy of the chosen action.
pub fn reward(energy_j: f64) -> Result<f64, ModelError> {
    if energy_j > 0.0 {
        Ok(1.0 / energy_j)
    } else {
        Err(ModelError::NonPositiveEnergy(energy_j))
    }
}

/// Returns the position (within the candidate list) of the first maximal Q value.
fn argmax(q: &QTable, state_key: u64, ordinals: impl Iterator<Item = usize>) -> usize {
    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for (pos, ordinal) in ordinals.enumerate() {
        let v = q.get(state_key, ordinal);
        if v > best_value {
            best = pos;
            best_value = v;
        }
    }
    best
}

fn choose<R: Rng + ?Sized>(
    q: &QTable,
    state_key: u64,
    num_candidates: usize,
    ordinals: impl Iterator<Item = usize>,
    epsilon: f64,
    rng: &mut R,
) -> usize {
    assert!(num_candidates > 0, "candidate set always contains local execution");
    if rng.gen::<f64>() < epsilon {
        rng.gen_range(0..num_candidates)
    } else {
        argmax(q, state_key, ordinals)
    }
}

/// Epsilon-greedy choice among `candidates`. Ties in the greedy branch go to
/// the lowest action ordinal, so candidates must be in ordinal order.
pub fn select_action<R: Rng + ?Sized>(
    q: &QTable,
    state_key: u64,
    candidates: &[ActionOption],
    epsilon: f64,
    rng: &mut R,
) -> ActionOption {
    let pos = choose(
        q,
        state_key,
        candidates.len(),
        candidates.iter().map(|c| c.ordinal),
        epsilon,
        rng,
    );
    candidates[pos]
}

/// One temporal-difference step on the (state_key, ordinal) cell; returns the new value.
#[allow(clippy::too_many_arguments)]
pub fn q_update(
    q: &mut QTable,
    state_key: u64,
    ordinal: usize,
    reward_z: f64,
    next_state_key: u64,
    next_ordinals: impl IntoIterator<Item = usize>,
    beta: f64,
    gamma: f64,
) -> f64 {
    let next_max = next_ordinals
        .into_iter()
        .map(|o| q.get(next_state_key, o))
        .fold(f64::NEG_INFINITY, f64::max);
    let next_max = if next_max.is_finite() { next_max } else { 0.0 };
    let old = q.get(state_key, ordinal);
    let new = old + beta * (reward_z + gamma * next_max - old);
    q.set(state_key, ordinal, new);
    new
}

fn state_key(keying: StateKeying, ue: usize, state: &[usize]) -> u64 {
    match keying {
        StateKeying::PerUe => ue as u64,
        StateKeying::JointHash => {
            let mut h = DefaultHasher::new();
            ue.hash(&mut h);
            state.hash(&mut h);
            h.finish()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub episode: usize,
    pub total_energy_j: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingTrace {
    pub rows: Vec<TraceRow>,
}

impl TrainingTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("episode,total_energy_J,epsilon_used\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{:.16e},{:.16e}", r.episode, r.total_energy_j, r.epsilon);
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub assignment: Assignment,
    pub trace: TrainingTrace,
    pub q: QTable,
    /// Decision vector at the end of training.
    pub state: StateVector,
}

/// Runs the episodic training loop and extracts the greedy assignment.
pub fn train(instance: &Instance, params: &RlaaParams) -> Result<TrainOutcome, RlaaError> {
    params.validate()?;
    let catalog = ActionCatalog::new(instance);
    let n = instance.num_ues();

    // Rewards only depend on (ue, action), so invalid ones are caught up front.
    let mut rewards: Vec<Vec<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        let row = catalog
            .options(i)
            .iter()
            .map(|o| {
                reward(o.energy_j).map_err(|source| RlaaError::Reward {
                    ue: i,
                    action: o.action,
                    source,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rewards.push(row);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let mut q = QTable::new(catalog.num_ordinals());
    let mut state = vec![0usize; n];
    let mut trace = TrainingTrace {
        rows: Vec::with_capacity(params.max_episodes),
    };
    let empty = CapacityState::new(instance);
    let mut cands = Vec::new();
    let mut next_cands = Vec::new();

    for episode in 0..params.max_episodes {
        let epsilon = params.epsilon_at(episode);
        let mut cap = empty.clone();
        let mut total = 0.0;
        if n > 0 {
            catalog.feasible_into(0, &cap, &mut cands);
        }
        for i in 0..n {
            let opts = catalog.options(i);
            let key = state_key(params.keying, i, &state);
            let pos = choose(
                &q,
                key,
                cands.len(),
                cands.iter().map(|&k| opts[k].ordinal),
                epsilon,
                &mut rng,
            );
            let chosen = cands[pos];
            let option = opts[chosen];
            cap.commit(option.action, option.min_freq_hz)
                .expect("feasible set only holds admissible actions");
            total += option.energy_j;
            state[i] = option.ordinal;

            // Successor: the next UE in the sweep, wrapping into a fresh episode.
            let next = (i + 1) % n;
            let next_key = state_key(params.keying, next, &state);
            if next == 0 {
                catalog.feasible_into(0, &empty, &mut next_cands);
            } else {
                catalog.feasible_into(next, &cap, &mut next_cands);
            }
            let next_opts = catalog.options(next);
            q_update(
                &mut q,
                key,
                option.ordinal,
                rewards[i][chosen],
                next_key,
                next_cands.iter().map(|&k| next_opts[k].ordinal),
                params.beta,
                params.gamma,
            );
            std::mem::swap(&mut cands, &mut next_cands);
        }
        trace.rows.push(TraceRow {
            episode,
            total_energy_j: total,
            epsilon,
        });
    }

    let actions: Vec<Action> = instance.actions().collect();
    let state = StateVector(state.iter().map(|&o| actions[o]).collect());
    let assignment = extract_with(&catalog, &q, instance, params.keying, &state);
    Ok(TrainOutcome {
        assignment,
        trace,
        q,
        state,
    })
}

/// Greedy read-out: UEs in index order take the highest-valued action that
/// still fits the slots claimed by earlier UEs.
pub fn extract_policy(q: &QTable, instance: &Instance, keying: StateKeying, state: &StateVector) -> Assignment {
    extract_with(&ActionCatalog::new(instance), q, instance, keying, state)
}

fn extract_with(
    catalog: &ActionCatalog,
    q: &QTable,
    instance: &Instance,
    keying: StateKeying,
    state: &StateVector,
) -> Assignment {
    let mut ordinals: Vec<usize> = state
        .0
        .iter()
        .map(|&a| instance.action_ordinal(a).unwrap_or(0))
        .collect();
    ordinals.resize(instance.num_ues(), 0);
    let mut cap = CapacityState::new(instance);
    let mut cands = Vec::new();
    let mut allocations = Vec::with_capacity(instance.num_ues());
    for i in 0..instance.num_ues() {
        let opts = catalog.options(i);
        catalog.feasible_into(i, &cap, &mut cands);
        let key = state_key(keying, i, &ordinals);
        let pos = argmax(q, key, cands.iter().map(|&k| opts[k].ordinal));
        let option = opts[cands[pos]];
        cap.commit(option.action, option.min_freq_hz)
            .expect("feasible set only holds admissible actions");
        ordinals[i] = option.ordinal;
        allocations.push(allocate(&option));
    }
    Assignment { allocations }
}
