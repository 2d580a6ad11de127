//! Longitudinal truck model, forward sensor and the per-role decision and
//! control logic (DCL).

mod control;
mod dcl;
mod dynamics;
mod sensor;

use crate::protocol::{Role, TruckId};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use control::{
    cacc_command, fallback_policy, leader_driver_model, CaccGains, CaccInputs, CohesionLimits, ControlConfig,
    ControlError, FallbackConfig, FallbackDecision, LeaderConfig, LeaderDecision, LeaderInputs,
};
pub use dcl::{dcl_step, DclCommand, DclError, DclInputs, DclOutput, DclState, EgoSense};
pub use dynamics::step_dynamics;
pub use sensor::{sensor_measure, Measurement, NIGHT_NOISE_FACTOR};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruckParams {
    pub length: f64,
    /// Magnitude.
    pub max_decel: f64,
    pub max_accel: f64,
    pub actuator_time_constant: f64,
    pub standstill_gap: f64,
    pub sensor_range: f64,
    pub sensor_noise_sigma_range: f64,
    pub sensor_noise_sigma_speed: f64,
}

impl Default for TruckParams {
    fn default() -> Self {
        TruckParams {
            length: 16.5,
            max_decel: 6.0,
            max_accel: 1.5,
            actuator_time_constant: 0.3,
            standstill_gap: 3.0,
            sensor_range: 150.0,
            sensor_noise_sigma_range: 0.0,
            sensor_noise_sigma_speed: 0.0,
        }
    }
}

impl TruckParams {
    pub const MAX_DECEL_LIMIT: f64 = 10.0;

    pub fn validate(&self) -> Result<(), &'static str> {
        let pos = |x: f64| x.is_finite() && x > 0.0;
        if !pos(self.length) {
            return Err("length must be positive");
        }
        if !pos(self.max_decel) || self.max_decel > Self::MAX_DECEL_LIMIT {
            return Err("max_decel must be in (0, 10] m/s²");
        }
        if !pos(self.max_accel) {
            return Err("max_accel must be positive");
        }
        if !pos(self.actuator_time_constant) {
            return Err("actuator_time_constant must be positive");
        }
        if !pos(self.standstill_gap) {
            return Err("standstill_gap must be positive");
        }
        if !pos(self.sensor_range) {
            return Err("sensor_range must be positive");
        }
        let nonneg = |x: f64| x.is_finite() && x >= 0.0;
        if !nonneg(self.sensor_noise_sigma_range) || !nonneg(self.sensor_noise_sigma_speed) {
            return Err("sensor noise sigmas must be ≥ 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ControllerMode {
    #[serde(rename = "CACC")]
    Cacc,
    #[serde(rename = "ACC_Fallback")]
    AccFallback,
    #[serde(rename = "ManualLead")]
    ManualLead,
}

impl ControllerMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ControllerMode::Cacc => "CACC",
            ControllerMode::AccFallback => "ACC_Fallback",
            ControllerMode::ManualLead => "ManualLead",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruckState {
    pub truck_id: TruckId,
    pub x_front: f64,
    pub v: f64,
    /// Realized acceleration.
    pub a: f64,
    pub role: Role,
    pub thw_setpoint: f64,
    pub controller_mode: ControllerMode,
    pub last_op_msg_age: f64,
}

impl TruckState {
    pub fn moving(truck_id: TruckId, x_front: f64, v: f64, role: Role, thw_setpoint: f64) -> Self {
        TruckState {
            truck_id,
            x_front,
            v,
            a: 0.0,
            role,
            thw_setpoint,
            controller_mode: if role == Role::Leader { ControllerMode::ManualLead } else { ControllerMode::Cacc },
            last_op_msg_age: 0.0,
        }
    }
}

/// Actuator set point, saturated to the truck's limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccelCommand {
    pub a_cmd: f64,
}

impl AccelCommand {
    pub fn saturated(a: f64, params: &TruckParams) -> Self {
        AccelCommand { a_cmd: a.clamp(-params.max_decel, params.max_accel) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("negative gap: vehicles overlap")]
pub struct NegativeGap;

/// Time headway: bumper-to-bumper gap over ego speed. `Ok(None)` when the
/// ego vehicle stands still.
pub fn compute_thw(gap: f64, v_ego: f64) -> Result<Option<f64>, NegativeGap> {
    if gap < 0.0 {
        return Err(NegativeGap);
    }
    if v_ego <= 0.0 {
        return Ok(None);
    }
    Ok(Some(gap / v_ego))
}

/// Constant-speed time to collision; `f64::INFINITY` when not closing.
pub fn compute_ttc(gap: f64, v_ego: f64, v_prec: f64) -> Result<f64, NegativeGap> {
    if gap < 0.0 {
        return Err(NegativeGap);
    }
    let closing = v_ego - v_prec;
    if closing > 0.0 {
        Ok(gap / closing)
    } else {
        Ok(f64::INFINITY)
    }
}

/// First contact time when both vehicles keep constant accelerations until
/// they stop (no reversing). `None` when they never touch.
pub fn time_to_contact(gap: f64, v_ego: f64, a_ego: f64, v_prec: f64, a_prec: f64) -> Option<f64> {
    if gap <= 0.0 {
        return Some(0.0);
    }
    let stop = |v: f64, a: f64| if a < 0.0 { v / -a } else { f64::INFINITY };
    let (ts_e, ts_p) = (stop(v_ego, a_ego), stop(v_prec, a_prec));
    let mut breaks = vec![0.0, ts_e.min(ts_p), ts_e.max(ts_p)];
    breaks.retain(|t| t.is_finite());
    breaks.push(f64::INFINITY);
    breaks.dedup();
    // gap(t) = gap + s_p(t) - s_e(t) is quadratic on each piece
    let travelled = |v: f64, a: f64, ts: f64, t: f64| {
        let t = t.min(ts);
        v * t + 0.5 * a * t * t
    };
    for w in breaks.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let (ae, ve0) = if t0 < ts_e { (a_ego, v_ego + a_ego * t0) } else { (0.0, 0.0) };
        let (ap, vp0) = if t0 < ts_p { (a_prec, v_prec + a_prec * t0) } else { (0.0, 0.0) };
        let g0 = gap + travelled(v_prec, a_prec, ts_p, t0) - travelled(v_ego, a_ego, ts_e, t0);
        // g(t0 + s) = g0 + (vp0 - ve0) s + 0.5 (ap - ae) s²
        let qa = 0.5 * (ap - ae);
        let qb = vp0 - ve0;
        let span = t1 - t0;
        let root = smallest_root(qa, qb, g0).filter(|s| *s <= span);
        if let Some(s) = root {
            return Some(t0 + s);
        }
    }
    None
}

fn smallest_root(a: f64, b: f64, c: f64) -> Option<f64> {
    if c <= 0.0 {
        return Some(0.0);
    }
    if a.abs() < 1e-12 {
        return (b < 0.0).then(|| -c / b);
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let mut roots = [(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)];
    roots.sort_by(f64::total_cmp);
    roots.into_iter().find(|r| *r >= 0.0)
}
