//! Multi-UAV mobile edge computing: system model, feasibility checking,
//! Q-learning association and allocation, comparison baselines, scenario
//! generation and an experiment harness.

pub mod baselines;
pub mod feasibility;
pub mod harness;
pub mod model;
pub mod rlaa;
pub mod scenario;

pub use baselines::{solve, SolveError, SolveOutcome, SolverConfig, SolverKind};
pub use feasibility::{check_assignment, objective_energy, Action, Allocation, Assignment, ConstraintReport};
pub use rlaa::{RlaaParams, StateKeying};
pub use scenario::{Instance, Preset, ScenarioSpec};
