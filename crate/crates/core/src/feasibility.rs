//! Minimal resource allocation, per-UE feasible action sets, slot capacity
//! tracking and the constraint checker for complete assignments.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{self, Task};
use crate::scenario::Instance;

/// Absolute slack on the deadline check.
pub const DEADLINE_SLACK_S: f64 = 1e-9;
/// Relative slack on the per-slot frequency budget check.
pub const FREQ_BUDGET_RTOL: f64 = 1e-12;

/// One UE's decision. Local execution carries no UAV or slot; offload indices are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Action {
    Local,
    Offload { uav: usize, slot: usize },
}

impl Action {
    pub fn kind(self) -> model::ExecutionKind {
        match self {
            Action::Local => model::ExecutionKind::Local,
            Action::Offload { .. } => model::ExecutionKind::Offload,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Local => f.write_str("local"),
            Action::Offload { uav, slot } => write!(f, "uav{uav}:slot{slot}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub action: Action,
    pub freq_hz: f64,
}

/// A complete decision: entry `i` belongs to UE `i`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Assignment {
    pub allocations: Vec<Allocation>,
}

impl Assignment {
    pub fn len(&self) -> usize {
        self.allocations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.allocations.is_empty()
    }

    pub fn actions(&self) -> impl Iterator<Item = Action> + '_ {
        self.allocations.iter().map(|a| a.action)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeasibilityError {
    #[error("action {action} does not exist in this instance")]
    UnknownAction { action: Action },
    #[error("uav {uav} slot {slot} cannot host {freq_hz} Hz more (load {ue_count} UEs, {freq_used_hz} Hz used)")]
    CapacityExceeded {
        uav: usize,
        slot: usize,
        freq_hz: f64,
        ue_count: usize,
        freq_used_hz: f64,
    },
}

/// Smallest server frequency finishing the task by the deadline after the
/// upload, or `None` when the upload alone takes `t_max_s` or longer.
pub fn min_offload_freq(task: &Task, rate_bps: f64, t_max_s: f64) -> Option<f64> {
    let t_tr = model::transmission_time(task.data_bits, rate_bps).ok()?;
    let slack = t_max_s - t_tr;
    if slack > 0.0 {
        Some(task.cycles / slack)
    } else {
        None
    }
}

pub fn min_local_freq(task: &Task, t_max_s: f64) -> f64 {
    task.cycles / t_max_s
}

/// Geometry and rate of one UE to one (UAV, slot) link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub horizontal_m: f64,
    pub altitude_m: f64,
    pub rate_bps: f64,
}

impl Link {
    pub fn distance_3d_m(&self) -> f64 {
        self.horizontal_m.hypot(self.altitude_m)
    }
}

pub fn link(instance: &Instance, ue: usize, uav: usize, slot: usize) -> Option<Link> {
    let traj = instance.uavs.get(uav.checked_sub(1)?)?;
    let [x, y, z] = model::uav_position(traj, slot).ok()?;
    let horizontal_m = model::horizontal_distance(&instance.ues[ue].position, (x, y));
    let radio = instance.radio.with_tx_power(instance.tx_power(ue));
    Some(Link {
        horizontal_m,
        altitude_m: z,
        rate_bps: model::data_rate(&radio, horizontal_m, z),
    })
}

/// An action that meets UE `i`'s deadline, priced under minimal allocation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionOption {
    pub action: Action,
    pub ordinal: usize,
    pub min_freq_hz: f64,
    pub energy_j: f64,
    /// UE-to-UAV distance for offloads, zero for local execution.
    pub distance_3d_m: f64,
}

fn local_option(instance: &Instance, ue: usize) -> ActionOption {
    let task = &instance.ues[ue].task;
    let f = min_local_freq(task, instance.compute.t_max_s);
    let energy_j = model::local_energy(instance.switched_capacitance(ue), instance.exponent(ue), f, task.cycles)
        .unwrap_or(f64::NAN);
    ActionOption {
        action: Action::Local,
        ordinal: 0,
        min_freq_hz: f,
        energy_j,
        distance_3d_m: 0.0,
    }
}

/// All deadline-feasible actions of one UE, local first, then ordinal order.
/// Capacity is not considered here.
pub fn deadline_feasible_options(instance: &Instance, ue: usize) -> Vec<ActionOption> {
    let task = instance.ues[ue].task;
    let t_max = instance.compute.t_max_s;
    let mut out = vec![local_option(instance, ue)];
    let mut ordinal = 1;
    for (j, traj) in instance.uavs.iter().enumerate() {
        for slot in 1..=traj.num_slots {
            let l = link(instance, ue, j + 1, slot).expect("indices come from the instance");
            if let Some(min_freq_hz) = min_offload_freq(&task, l.rate_bps, t_max) {
                out.push(ActionOption {
                    action: Action::Offload { uav: j + 1, slot },
                    ordinal,
                    min_freq_hz,
                    energy_j: model::offload_energy(instance.tx_power(ue), task.data_bits / l.rate_bps),
                    distance_3d_m: l.distance_3d_m(),
                });
            }
            ordinal += 1;
        }
    }
    out
}

/// Precomputed deadline-feasible options for every UE of an instance.
#[derive(Debug, Clone)]
pub struct ActionCatalog {
    options: Vec<Vec<ActionOption>>,
    num_ordinals: usize,
}

impl ActionCatalog {
    pub fn new(instance: &Instance) -> Self {
        ActionCatalog {
            options: (0..instance.num_ues())
                .map(|i| deadline_feasible_options(instance, i))
                .collect(),
            num_ordinals: instance.num_action_ordinals(),
        }
    }

    pub fn num_ues(&self) -> usize {
        self.options.len()
    }

    pub fn num_ordinals(&self) -> usize {
        self.num_ordinals
    }

    pub fn options(&self, ue: usize) -> &[ActionOption] {
        &self.options[ue]
    }

    /// Indices into [`Self::options`] of the actions UE `ue` can take given `cap`.
    pub fn feasible_into(&self, ue: usize, cap: &CapacityState, out: &mut Vec<usize>) {
        out.clear();
        out.extend(
            self.options[ue]
                .iter()
                .enumerate()
                .filter(|(_, o)| cap.admits(o.action, o.min_freq_hz))
                .map(|(k, _)| k),
        );
    }

    pub fn feasible_actions(&self, ue: usize, cap: &CapacityState) -> Vec<ActionOption> {
        self.options[ue]
            .iter()
            .copied()
            .filter(|o| cap.admits(o.action, o.min_freq_hz))
            .collect()
    }

    /// Cheapest option ignoring other UEs, if any offload or local fits an empty slot.
    pub fn unconstrained_min_energy(&self, ue: usize, cap: &CapacityState) -> f64 {
        self.options[ue]
            .iter()
            .filter(|o| cap.admits_when_empty(o.action, o.min_freq_hz))
            .map(|o| o.energy_j)
            .fold(f64::INFINITY, f64::min)
    }
}

/// The actions UE `ue` can take given the slots already committed in `cap`.
/// Local execution is always present.
pub fn feasible_actions(instance: &Instance, ue: usize, cap: &CapacityState) -> Vec<ActionOption> {
    deadline_feasible_options(instance, ue)
        .into_iter()
        .filter(|o| cap.admits(o.action, o.min_freq_hz))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SlotLoad {
    pub ue_count: usize,
    pub freq_used_hz: f64,
}

/// Running load of every (UAV, slot) while UEs are assigned one at a time.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityState {
    loads: Vec<Vec<SlotLoad>>,
    slot_ue_cap: usize,
    f_max_hz: f64,
}

impl CapacityState {
    pub fn new(instance: &Instance) -> Self {
        CapacityState {
            loads: instance
                .uavs
                .iter()
                .map(|u| vec![SlotLoad::default(); u.num_slots])
                .collect(),
            slot_ue_cap: instance.compute.slot_ue_cap,
            f_max_hz: instance.compute.f_max_hz,
        }
    }

    pub fn load(&self, uav: usize, slot: usize) -> Option<SlotLoad> {
        self.loads.get(uav.checked_sub(1)?)?.get(slot.checked_sub(1)?).copied()
    }

    fn load_mut(&mut self, uav: usize, slot: usize) -> Option<&mut SlotLoad> {
        self.loads.get_mut(uav.checked_sub(1)?)?.get_mut(slot.checked_sub(1)?)
    }

    /// Whether committing `action` with `freq_hz` keeps the slot within its UE and frequency caps.
    pub fn admits(&self, action: Action, freq_hz: f64) -> bool {
        match action {
            Action::Local => true,
            Action::Offload { uav, slot } => match self.load(uav, slot) {
                Some(l) => l.ue_count < self.slot_ue_cap && l.freq_used_hz + freq_hz <= self.f_max_hz,
                None => false,
            },
        }
    }

    fn admits_when_empty(&self, action: Action, freq_hz: f64) -> bool {
        match action {
            Action::Local => true,
            Action::Offload { uav, slot } => self.load(uav, slot).is_some() && freq_hz <= self.f_max_hz,
        }
    }

    pub fn commit(&mut self, action: Action, freq_hz: f64) -> Result<(), FeasibilityError> {
        let Action::Offload { uav, slot } = action else {
            return Ok(());
        };
        if !self.admits(action, freq_hz) {
            return Err(match self.load(uav, slot) {
                Some(l) => FeasibilityError::CapacityExceeded {
                    uav,
                    slot,
                    freq_hz,
                    ue_count: l.ue_count,
                    freq_used_hz: l.freq_used_hz,
                },
                None => FeasibilityError::UnknownAction { action },
            });
        }
        let l = self.load_mut(uav, slot).expect("admits() checked the indices");
        l.ue_count += 1;
        l.freq_used_hz += freq_hz;
        Ok(())
    }

    /// Overwrites a slot's load; used to undo a commit exactly.
    pub fn restore(&mut self, uav: usize, slot: usize, load: SlotLoad) {
        if let Some(l) = self.load_mut(uav, slot) {
            *l = load;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstraintTag {
    C1,
    C2,
    C3,
    C4,
    C5,
}

impl fmt::Display for ConstraintTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub tag: ConstraintTag,
    pub ue: Option<usize>,
    pub uav: Option<usize>,
    pub slot: Option<usize>,
    pub measured: f64,
    pub bound: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.tag)?;
        if let Some(i) = self.ue {
            write!(f, " ue={i}")?;
        }
        if let Some(j) = self.uav {
            write!(f, " uav={j}")?;
        }
        if let Some(t) = self.slot {
            write!(f, " slot={t}")?;
        }
        write!(f, " measured={} bound={}", self.measured, self.bound)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub violations: Vec<Violation>,
}

impl ConstraintReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, tag: ConstraintTag) -> usize {
        self.violations.iter().filter(|v| v.tag == tag).count()
    }

    /// One violation per line: tag, indices, measured value, bound.
    pub fn to_text(&self) -> String {
        self.violations.iter().map(|v| format!("{v}\n")).collect()
    }
}

/// Time UE `ue` needs to finish under `alloc`, or `None` for an action the instance does not have.
pub fn completion_time(instance: &Instance, ue: usize, alloc: &Allocation) -> Option<f64> {
    let task = &instance.ues[ue].task;
    let t_c = model::compute_time(task.cycles, alloc.freq_hz).unwrap_or(f64::INFINITY);
    match alloc.action {
        Action::Local => Some(model::total_time(model::ExecutionKind::Local, 0.0, t_c)),
        Action::Offload { uav, slot } => {
            let l = link(instance, ue, uav, slot)?;
            let t_tr = model::transmission_time(task.data_bits, l.rate_bps).unwrap_or(f64::INFINITY);
            Some(model::total_time(model::ExecutionKind::Offload, t_tr, t_c))
        }
    }
}

/// Energy UE `ue` spends under `alloc`; NaN for an action the instance does not have.
pub fn allocation_energy(instance: &Instance, ue: usize, alloc: &Allocation) -> f64 {
    let task = &instance.ues[ue].task;
    match alloc.action {
        Action::Local => model::local_energy(
            instance.switched_capacitance(ue),
            instance.exponent(ue),
            alloc.freq_hz,
            task.cycles,
        )
        .unwrap_or(f64::NAN),
        Action::Offload { uav, slot } => match link(instance, ue, uav, slot) {
            Some(l) => model::offload_energy(instance.tx_power(ue), task.data_bits / l.rate_bps),
            None => f64::NAN,
        },
    }
}

/// Total UE energy of a complete assignment, local executions included.
pub fn objective_energy(instance: &Instance, assignment: &Assignment) -> f64 {
    assignment
        .allocations
        .iter()
        .enumerate()
        .map(|(i, a)| allocation_energy(instance, i, a))
        .sum()
}

/// Checks an assignment against the binary-choice, one-decision-per-UE,
/// slot UE cap, slot frequency budget and deadline constraints.
pub fn check_assignment(instance: &Instance, assignment: &Assignment) -> ConstraintReport {
    let mut violations = Vec::new();
    let n = instance.num_ues();
    if assignment.len() != n {
        violations.push(Violation {
            tag: ConstraintTag::C2,
            ue: None,
            uav: None,
            slot: None,
            measured: assignment.len() as f64,
            bound: n as f64,
        });
    }

    let mut loads: Vec<Vec<SlotLoad>> = instance
        .uavs
        .iter()
        .map(|u| vec![SlotLoad::default(); u.num_slots])
        .collect();
    let t_max = instance.compute.t_max_s;

    for (i, alloc) in assignment.allocations.iter().enumerate().take(n) {
        if instance.action_ordinal(alloc.action).is_none() {
            let (uav, slot) = match alloc.action {
                Action::Offload { uav, slot } => (Some(uav), Some(slot)),
                Action::Local => (None, None),
            };
            violations.push(Violation {
                tag: ConstraintTag::C1,
                ue: Some(i),
                uav,
                slot,
                measured: 1.0,
                bound: 0.0,
            });
            continue;
        }
        let time = completion_time(instance, i, alloc).expect("action validated above");
        let meets_deadline = alloc.freq_hz > 0.0 && time <= t_max + DEADLINE_SLACK_S;
        if !meets_deadline {
            violations.push(Violation {
                tag: ConstraintTag::C5,
                ue: Some(i),
                uav: None,
                slot: None,
                measured: time,
                bound: t_max,
            });
        }
        if let Action::Offload { uav, slot } = alloc.action {
            let l = &mut loads[uav - 1][slot - 1];
            l.ue_count += 1;
            l.freq_used_hz += alloc.freq_hz;
        }
    }

    let cap = instance.compute.slot_ue_cap;
    let f_max = instance.compute.f_max_hz;
    for (j, slots) in loads.iter().enumerate() {
        for (t, l) in slots.iter().enumerate() {
            if l.ue_count > cap {
                violations.push(Violation {
                    tag: ConstraintTag::C3,
                    ue: None,
                    uav: Some(j + 1),
                    slot: Some(t + 1),
                    measured: l.ue_count as f64,
                    bound: cap as f64,
                });
            }
            if l.freq_used_hz > f_max * (1.0 + FREQ_BUDGET_RTOL) {
                violations.push(Violation {
                    tag: ConstraintTag::C4,
                    ue: None,
                    uav: Some(j + 1),
                    slot: Some(t + 1),
                    measured: l.freq_used_hz,
                    bound: f_max,
                });
            }
        }
    }
    ConstraintReport { violations }
}

/// Minimal-allocation `Allocation` for an option.
pub fn allocate(option: &ActionOption) -> Allocation {
    Allocation {
        action: option.action,
        freq_hz: option.min_freq_hz,
    }
}
