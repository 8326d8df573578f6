//! Problem instances: the data model, seeded random generation and JSON persistence.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::feasibility::Action;
use crate::model::{ComputeParams, NoiseMode, RadioParams, Task, UavTrajectory, UePosition, BITS_PER_KB};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: parse error at line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid field `{field}`: {reason}")]
    Invalid { field: String, reason: String },
    #[error("unknown preset `{0}` (expected fig2 | fig3 | fig4)")]
    UnknownPreset(String),
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        field: field.into(),
        reason: reason.into(),
    }
}

fn require_positive(field: &str, value: f64) -> Result<(), ScenarioError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be finite and > 0, got {value}")))
    }
}

fn require_finite(field: &str, value: f64) -> Result<(), ScenarioError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be finite, got {value}")))
    }
}

/// A ground device and its single task. The optional fields override the
/// instance-wide radio and compute parameters for this UE only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserEquipment {
    pub position: UePosition,
    pub task: Task,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tx_power_w: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub switched_capacitance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent: Option<f64>,
}

impl UserEquipment {
    pub fn new(position: UePosition, task: Task) -> Self {
        UserEquipment {
            position,
            task,
            tx_power_w: None,
            switched_capacitance: None,
            exponent: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub ues: Vec<UserEquipment>,
    pub uavs: Vec<UavTrajectory>,
    pub radio: RadioParams,
    pub compute: ComputeParams,
}

impl Instance {
    pub fn num_ues(&self) -> usize {
        self.ues.len()
    }

    pub fn num_uavs(&self) -> usize {
        self.uavs.len()
    }

    pub fn tx_power(&self, ue: usize) -> f64 {
        self.ues[ue].tx_power_w.unwrap_or(self.radio.tx_power_w)
    }

    pub fn switched_capacitance(&self, ue: usize) -> f64 {
        self.ues[ue]
            .switched_capacitance
            .unwrap_or(self.compute.switched_capacitance)
    }

    pub fn exponent(&self, ue: usize) -> f64 {
        self.ues[ue].exponent.unwrap_or(self.compute.exponent)
    }

    /// Size of the action space: local plus one entry per (UAV, slot).
    pub fn num_action_ordinals(&self) -> usize {
        1 + self.uavs.iter().map(|u| u.num_slots).sum::<usize>()
    }

    /// Stable position of `action` in the action space: local is 0, then
    /// (uav, slot) pairs in lexicographic order. `None` for out-of-range indices.
    pub fn action_ordinal(&self, action: Action) -> Option<usize> {
        match action {
            Action::Local => Some(0),
            Action::Offload { uav, slot } => {
                let traj = self.uavs.get(uav.checked_sub(1)?)?;
                if slot == 0 || slot > traj.num_slots {
                    return None;
                }
                let before: usize = self.uavs[..uav - 1].iter().map(|u| u.num_slots).sum();
                Some(1 + before + slot - 1)
            }
        }
    }

    /// Every action in ordinal order.
    pub fn actions(&self) -> impl Iterator<Item = Action> + '_ {
        std::iter::once(Action::Local).chain(
            self.uavs
                .iter()
                .enumerate()
                .flat_map(|(j, u)| (1..=u.num_slots).map(move |slot| Action::Offload { uav: j + 1, slot })),
        )
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let r = &self.radio;
        require_positive("radio.bandwidth_hz", r.bandwidth_hz)?;
        require_positive("radio.tx_power_w", r.tx_power_w)?;
        require_positive("radio.g0", r.g0)?;
        require_positive("radio.big_g0", r.big_g0)?;
        require_positive("radio.noise_power_w", r.noise_power_w)?;
        require_positive("radio.alpha", r.alpha())?;

        let c = &self.compute;
        if !(c.switched_capacitance >= 0.0 && c.switched_capacitance.is_finite()) {
            return Err(invalid(
                "compute.switched_capacitance",
                format!("must be finite and >= 0, got {}", c.switched_capacitance),
            ));
        }
        if !(c.exponent >= 1.0 && c.exponent.is_finite()) {
            return Err(invalid("compute.exponent", format!("must be >= 1, got {}", c.exponent)));
        }
        require_positive("compute.f_max_hz", c.f_max_hz)?;
        if c.slot_ue_cap == 0 {
            return Err(invalid("compute.slot_ue_cap", "must be >= 1"));
        }
        require_positive("compute.t_max_s", c.t_max_s)?;

        for (j, u) in self.uavs.iter().enumerate() {
            let f = |name: &str| format!("uavs[{j}].{name}");
            require_finite(&f("center_x_m"), u.center_x_m)?;
            require_finite(&f("center_y_m"), u.center_y_m)?;
            require_finite(&f("phase_rad"), u.phase_rad)?;
            if !(u.radius_m >= 0.0 && u.radius_m.is_finite()) {
                return Err(invalid(f("radius_m"), format!("must be >= 0, got {}", u.radius_m)));
            }
            require_positive(&f("altitude_m"), u.altitude_m)?;
            if u.num_slots == 0 {
                return Err(invalid(f("num_slots"), "must be >= 1"));
            }
        }

        for (i, ue) in self.ues.iter().enumerate() {
            let f = |name: &str| format!("ues[{i}].{name}");
            require_finite(&f("position.x_m"), ue.position.x_m)?;
            require_finite(&f("position.y_m"), ue.position.y_m)?;
            require_positive(&f("task.data_bits"), ue.task.data_bits)?;
            require_positive(&f("task.cycles"), ue.task.cycles)?;
            if let Some(p) = ue.tx_power_w {
                require_positive(&f("tx_power_w"), p)?;
            }
            if let Some(k) = ue.switched_capacitance {
                if !(k >= 0.0 && k.is_finite()) {
                    return Err(invalid(f("switched_capacitance"), format!("must be >= 0, got {k}")));
                }
            }
            if let Some(v) = ue.exponent {
                if !(v >= 1.0 && v.is_finite()) {
                    return Err(invalid(f("exponent"), format!("must be >= 1, got {v}")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UavCenter {
    pub x_m: f64,
    pub y_m: f64,
    pub altitude_m: f64,
}

/// Axis-aligned rectangle UEs are dropped into.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub x_min_m: f64,
    pub x_max_m: f64,
    pub y_min_m: f64,
    pub y_max_m: f64,
}

impl Region {
    pub fn contains(&self, p: &UePosition) -> bool {
        (self.x_min_m..=self.x_max_m).contains(&p.x_m) && (self.y_min_m..=self.y_max_m).contains(&p.y_m)
    }
}

/// Everything needed to draw a random instance. Generation is a pure function of this value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub num_ues: usize,
    pub uav_centers: Vec<UavCenter>,
    pub radius_m: f64,
    pub num_slots: usize,
    #[serde(default)]
    pub phase_rad: f64,
    pub ue_region: Region,
    pub data_range_bits: [f64; 2],
    pub cycles_range: [f64; 2],
    pub radio: RadioParams,
    pub compute: ComputeParams,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let range = |field: &str, r: [f64; 2]| {
            if r[0] > 0.0 && r[0] <= r[1] && r[1].is_finite() {
                Ok(())
            } else {
                Err(invalid(field, format!("need 0 < min <= max, got [{}, {}]", r[0], r[1])))
            }
        };
        range("data_range_bits", self.data_range_bits)?;
        range("cycles_range", self.cycles_range)?;
        let g = &self.ue_region;
        if !(g.x_min_m < g.x_max_m && g.y_min_m < g.y_max_m)
            || ![g.x_min_m, g.x_max_m, g.y_min_m, g.y_max_m]
                .iter()
                .all(|v| v.is_finite())
        {
            return Err(invalid("ue_region", "rectangle is degenerate"));
        }
        // Radio, compute and UAV checks are shared with the instance.
        Instance {
            ues: Vec::new(),
            uavs: self.trajectories(),
            radio: self.radio,
            compute: self.compute,
        }
        .validate()
    }

    fn trajectories(&self) -> Vec<UavTrajectory> {
        self.uav_centers
            .iter()
            .map(|c| UavTrajectory {
                center_x_m: c.x_m,
                center_y_m: c.y_m,
                radius_m: self.radius_m,
                altitude_m: c.altitude_m,
                num_slots: self.num_slots,
                phase_rad: self.phase_rad,
            })
            .collect()
    }
}

/// Draws UE positions, data sizes and cycle counts uniformly over the spec's
/// inclusive ranges.
pub fn generate(spec: &ScenarioSpec) -> Result<Instance, ScenarioError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let g = spec.ue_region;
    let ues = (0..spec.num_ues)
        .map(|_| {
            let position = UePosition {
                x_m: rng.gen_range(g.x_min_m..=g.x_max_m),
                y_m: rng.gen_range(g.y_min_m..=g.y_max_m),
            };
            let task = Task {
                data_bits: rng.gen_range(spec.data_range_bits[0]..=spec.data_range_bits[1]),
                cycles: rng.gen_range(spec.cycles_range[0]..=spec.cycles_range[1]),
            };
            UserEquipment::new(position, task)
        })
        .collect();
    Ok(Instance {
        ues,
        uavs: spec.trajectories(),
        radio: spec.radio,
        compute: spec.compute,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Two UAVs, small-N comparison against exhaustive search.
    Fig2,
    /// Three UAVs.
    Fig3,
    /// Five UAVs.
    Fig4,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig2 => "fig2",
            Preset::Fig3 => "fig3",
            Preset::Fig4 => "fig4",
        }
    }

    fn centers(self) -> &'static [(f64, f64)] {
        match self {
            Preset::Fig2 => &[(1200.0, 1200.0), (-1200.0, -1200.0)],
            Preset::Fig3 => &[(1200.0, 1200.0), (-1200.0, -1200.0), (-1200.0, 1200.0)],
            Preset::Fig4 => &[
                (1200.0, 1200.0),
                (-1200.0, -1200.0),
                (-1200.0, 1200.0),
                (1200.0, -1200.0),
                (0.0, 0.0),
            ],
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fig2" => Ok(Preset::Fig2),
            "fig3" => Ok(Preset::Fig3),
            "fig4" => Ok(Preset::Fig4),
            other => Err(ScenarioError::UnknownPreset(other.to_string())),
        }
    }
}

/// Default experiment geometry for `preset` with `num_ues` UEs and seed 0.
pub fn preset(preset: Preset, num_ues: usize, noise: NoiseMode) -> ScenarioSpec {
    const ALTITUDE_M: f64 = 350.0;
    ScenarioSpec {
        num_ues,
        uav_centers: preset
            .centers()
            .iter()
            .map(|&(x_m, y_m)| UavCenter {
                x_m,
                y_m,
                altitude_m: ALTITUDE_M,
            })
            .collect(),
        radius_m: 800.0,
        num_slots: 12,
        phase_rad: 0.0,
        ue_region: Region {
            x_min_m: -2000.0,
            x_max_m: 2000.0,
            y_min_m: -1000.0,
            y_max_m: 1000.0,
        },
        data_range_bits: [100.0 * BITS_PER_KB, 1000.0 * BITS_PER_KB],
        cycles_range: [1e8, 1e9],
        radio: RadioParams::standard(noise),
        compute: ComputeParams::standard(),
        seed: 0,
    }
}

/// Looks a preset up by name.
pub fn preset_by_name(name: &str, num_ues: usize, noise: NoiseMode) -> Result<ScenarioSpec, ScenarioError> {
    Ok(preset(name.parse()?, num_ues, noise))
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| ScenarioError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ScenarioError> {
    let mut text = serde_json::to_string_pretty(value).expect("in-memory values always serialize");
    text.push('\n');
    std::fs::write(path, text).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn save_instance(instance: &Instance, path: &Path) -> Result<(), ScenarioError> {
    write_json(path, instance)
}

/// Reads and validates an instance file. Nothing is returned unless the whole
/// document parses and every field passes validation.
pub fn load_instance(path: &Path) -> Result<Instance, ScenarioError> {
    let instance: Instance = read_json(path)?;
    instance.validate()?;
    Ok(instance)
}

pub fn save_spec(spec: &ScenarioSpec, path: &Path) -> Result<(), ScenarioError> {
    write_json(path, spec)
}

pub fn load_spec(path: &Path) -> Result<ScenarioSpec, ScenarioError> {
    let spec: ScenarioSpec = read_json(path)?;
    spec.validate()?;
    Ok(spec)
}
