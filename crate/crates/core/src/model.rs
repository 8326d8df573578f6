//! Geometry, channel, timing and energy equations of the multi-UAV MEC system.
//!
//! Everything here is a pure function of its inputs. Units are SI throughout:
//! metres, seconds, hertz, watts, joules. Task sizes are carried in bits and
//! CPU cycles.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Bits in one kilobyte (1 KB = 1024 B).
pub const BITS_PER_KB: f64 = 8192.0;
/// Hertz in one gigahertz.
pub const HZ_PER_GHZ: f64 = 1e9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("slot {slot} out of range 1..={num_slots}")]
    SlotOutOfRange { slot: usize, num_slots: usize },
    #[error("data rate must be positive, got {0}")]
    NonPositiveRate(f64),
    #[error("frequency must be positive, got {0}")]
    NonPositiveFrequency(f64),
    #[error("energy must be positive to define a reward, got {0}")]
    NonPositiveEnergy(f64),
}

/// How the configured noise level is turned into a total noise power.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// The dBm figure is the total noise power over the band.
    #[default]
    Total,
    /// The dBm figure is a power spectral density, integrated over the bandwidth.
    Psd,
}

impl std::str::FromStr for NoiseMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "total" => Ok(NoiseMode::Total),
            "psd" => Ok(NoiseMode::Psd),
            other => Err(format!("unknown noise mode `{other}` (expected total | psd)")),
        }
    }
}

/// Converts a level in dBm (or dBm/Hz under [`NoiseMode::Psd`]) to watts.
pub fn noise_power_w(level_dbm: f64, mode: NoiseMode, bandwidth_hz: f64) -> f64 {
    let watts = 10f64.powf(level_dbm / 10.0) * 1e-3;
    match mode {
        NoiseMode::Total => watts,
        NoiseMode::Psd => watts * bandwidth_hz,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioParams {
    pub bandwidth_hz: f64,
    pub tx_power_w: f64,
    /// Channel power gain at the 1 m reference distance.
    pub g0: f64,
    /// Dimensionless antenna gain factor `G_0`.
    pub big_g0: f64,
    pub noise_power_w: f64,
}

impl RadioParams {
    pub const DEFAULT_NOISE_DBM: f64 = -90.0;

    /// Default radio configuration: 1 MHz, 1 W, g0 = 1.42e-4, G0 = 2.2846, -90 dBm noise.
    pub fn standard(mode: NoiseMode) -> Self {
        let bandwidth_hz = 1e6;
        RadioParams {
            bandwidth_hz,
            tx_power_w: 1.0,
            g0: 1.42e-4,
            big_g0: 2.2846,
            noise_power_w: noise_power_w(Self::DEFAULT_NOISE_DBM, mode, bandwidth_hz),
        }
    }

    /// Reference SNR factor `g0 * G0 / sigma^2`.
    pub fn alpha(&self) -> f64 {
        self.g0 * self.big_g0 / self.noise_power_w
    }

    pub fn with_tx_power(mut self, tx_power_w: f64) -> Self {
        self.tx_power_w = tx_power_w;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub data_bits: f64,
    pub cycles: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UePosition {
    pub x_m: f64,
    pub y_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UavTrajectory {
    pub center_x_m: f64,
    pub center_y_m: f64,
    pub radius_m: f64,
    pub altitude_m: f64,
    pub num_slots: usize,
    /// Angular position of slot 1 on the circle.
    #[serde(default)]
    pub phase_rad: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComputeParams {
    /// Effective switched capacitance `k`.
    pub switched_capacitance: f64,
    /// Power exponent `v` in `k * f^v`.
    pub exponent: f64,
    /// Per-UAV, per-slot frequency budget.
    pub f_max_hz: f64,
    /// Maximum number of UEs one UAV accepts in one slot.
    pub slot_ue_cap: usize,
    pub t_max_s: f64,
}

impl ComputeParams {
    pub fn standard() -> Self {
        ComputeParams {
            switched_capacitance: 1e-27,
            exponent: 3.0,
            f_max_hz: 150.0 * HZ_PER_GHZ,
            slot_ue_cap: 150,
            t_max_s: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecutionKind {
    Local,
    Offload,
}

/// Position of a UAV during `slot` (1-based), evenly spaced around its circle.
pub fn uav_position(traj: &UavTrajectory, slot: usize) -> Result<[f64; 3], ModelError> {
    if slot == 0 || slot > traj.num_slots {
        return Err(ModelError::SlotOutOfRange {
            slot,
            num_slots: traj.num_slots,
        });
    }
    let theta = traj.phase_rad + 2.0 * PI * (slot - 1) as f64 / traj.num_slots as f64;
    Ok([
        traj.center_x_m + traj.radius_m * theta.cos(),
        traj.center_y_m + traj.radius_m * theta.sin(),
        traj.altitude_m,
    ])
}

pub fn horizontal_distance(ue: &UePosition, uav_xy: (f64, f64)) -> f64 {
    (uav_xy.0 - ue.x_m).hypot(uav_xy.1 - ue.y_m)
}

/// Line-of-sight uplink rate in bits/s, `B log2(1 + alpha P / (H^2 + R^2))`.
pub fn data_rate(rp: &RadioParams, horiz_dist_m: f64, altitude_m: f64) -> f64 {
    let path = altitude_m * altitude_m + horiz_dist_m * horiz_dist_m;
    rp.bandwidth_hz * (rp.alpha() * rp.tx_power_w / path).ln_1p() / std::f64::consts::LN_2
}

pub fn transmission_time(data_bits: f64, rate_bps: f64) -> Result<f64, ModelError> {
    if rate_bps <= 0.0 || rate_bps.is_nan() {
        return Err(ModelError::NonPositiveRate(rate_bps));
    }
    Ok(data_bits / rate_bps)
}

pub fn compute_time(cycles: f64, freq_hz: f64) -> Result<f64, ModelError> {
    if freq_hz <= 0.0 || freq_hz.is_nan() {
        return Err(ModelError::NonPositiveFrequency(freq_hz));
    }
    Ok(cycles / freq_hz)
}

/// UE-side transmit energy. The UAV's compute energy is not charged to the UE.
pub fn offload_energy(tx_power_w: f64, t_tr_s: f64) -> f64 {
    tx_power_w * t_tr_s
}

/// Local execution energy `k f^v (F / f) = k f^(v-1) F`.
pub fn local_energy(k: f64, v: f64, freq_hz: f64, cycles: f64) -> Result<f64, ModelError> {
    if freq_hz <= 0.0 || freq_hz.is_nan() {
        return Err(ModelError::NonPositiveFrequency(freq_hz));
    }
    Ok(k * freq_hz.powf(v - 1.0) * cycles)
}

pub fn total_time(kind: ExecutionKind, t_tr_s: f64, t_c_s: f64) -> f64 {
    match kind {
        ExecutionKind::Local => t_c_s,
        ExecutionKind::Offload => t_tr_s + t_c_s,
    }
}
