use super::{AccelCommand, ControllerMode, Measurement, TruckParams};
use crate::protocol::{ControlMessage, I2VAdvisory, IntentReason, ManagementKind, TrafficCondition};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CaccGains {
    /// Gap error gain, 1/s².
    pub kp: f64,
    /// Range-rate gain, 1/s.
    pub kd: f64,
    /// Feed-forward weight.
    pub ff: f64,
}

impl Default for CaccGains {
    fn default() -> Self {
        CaccGains { kp: 0.2, kd: 0.7, ff: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FallbackConfig {
    /// Operational message age after which CACC is abandoned.
    pub timeout: f64,
    /// Added to the headway set point in fallback.
    pub thw_increment: f64,
}

impl Default for FallbackConfig {
    fn default() -> Self {
        FallbackConfig { timeout: 0.5, thw_increment: 0.7 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LeaderConfig {
    /// Speed-tracking gain, 1/s.
    pub speed_gain: f64,
    /// Preceding-vehicle deceleration (magnitude) that counts as braking.
    pub brake_cue_threshold: f64,
}

impl Default for LeaderConfig {
    fn default() -> Self {
        LeaderConfig { speed_gain: 0.5, brake_cue_threshold: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlConfig {
    pub gains: CaccGains,
    pub fallback: FallbackConfig,
    pub leader: LeaderConfig,
    pub decel_tolerance: f64,
    /// Extra tactical periods a platoon update is repeated for.
    pub update_repeats: u32,
}

impl Default for ControlConfig {
    fn default() -> Self {
        ControlConfig {
            gains: CaccGains::default(),
            fallback: FallbackConfig::default(),
            leader: LeaderConfig::default(),
            decel_tolerance: crate::protocol::DEFAULT_DECEL_TOLERANCE,
            update_repeats: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ControlError {
    #[error("no input: neither a sensor target nor an operational message is available")]
    NoInput,
}

#[derive(Debug, Clone, Copy)]
pub struct CaccInputs<'a> {
    pub meas: &'a Measurement,
    /// Fresh operational message from the predecessor, if any.
    pub op_msg: Option<&'a ControlMessage>,
    pub v_ego: f64,
    pub thw_setpoint: f64,
}

/// Constant-time-headway CACC law.
///
/// With a valid measurement: `kp (range - d*) + kd range_rate + ff a_ff`
/// where `d* = standstill_gap + thw v`. Without one, the predecessor's
/// reported speed stands in for the range rate and the gap term is dropped.
pub fn cacc_command(inputs: &CaccInputs<'_>, params: &TruckParams, gains: &CaccGains) -> Result<AccelCommand, ControlError> {
    let a_ff = inputs.op_msg.map_or(0.0, ControlMessage::feedforward);
    let a = if inputs.meas.valid {
        let d_star = params.standstill_gap + inputs.thw_setpoint * inputs.v_ego;
        gains.kp * (inputs.meas.range - d_star) + gains.kd * inputs.meas.range_rate + gains.ff * a_ff
    } else if let Some(op) = inputs.op_msg {
        gains.kd * (op.speed - inputs.v_ego) + gains.ff * a_ff
    } else {
        return Err(ControlError::NoInput);
    };
    Ok(AccelCommand::saturated(a, params))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FallbackDecision {
    pub mode: ControllerMode,
    pub thw_setpoint: f64,
}

pub fn fallback_policy(last_op_msg_age: f64, base_thw: f64, cfg: &FallbackConfig) -> FallbackDecision {
    if last_op_msg_age <= cfg.timeout {
        FallbackDecision { mode: ControllerMode::Cacc, thw_setpoint: base_thw }
    } else {
        FallbackDecision { mode: ControllerMode::AccFallback, thw_setpoint: base_thw + cfg.thw_increment }
    }
}

/// Upper bounds the rest of the platoon asks the leader to respect.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CohesionLimits {
    pub max_speed: f64,
    pub max_accel: f64,
}

impl CohesionLimits {
    pub fn tighten(self, other: CohesionLimits) -> CohesionLimits {
        CohesionLimits { max_speed: self.max_speed.min(other.max_speed), max_accel: self.max_accel.min(other.max_accel) }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LeaderInputs<'a> {
    pub meas: &'a Measurement,
    pub v_ego: f64,
    pub cruise_speed: f64,
    pub thw_setpoint: f64,
    pub least_performing_decel: f64,
    pub i2v: Option<&'a I2VAdvisory>,
    pub cohesion: Option<CohesionLimits>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeaderDecision {
    pub a_cmd: AccelCommand,
    /// Present while the leader is reacting to braking or a jam ahead.
    pub intent: Option<ManagementKind>,
}

/// Driver model for the human-driven leader: track the lowest applicable
/// speed, keep a headway to the vehicle ahead, and never brake harder than
/// the weakest member of the platoon can.
pub fn leader_driver_model(
    inputs: &LeaderInputs<'_>,
    params: &TruckParams,
    gains: &CaccGains,
    cfg: &LeaderConfig,
) -> LeaderDecision {
    let mut v_set = inputs.cruise_speed;
    if let Some(limit) = inputs.i2v.and_then(|i| i.speed_limit) {
        v_set = v_set.min(limit);
    }
    let mut accel_cap = params.max_accel;
    if let Some(c) = inputs.cohesion {
        v_set = v_set.min(c.max_speed);
        accel_cap = accel_cap.min(c.max_accel);
    }
    let a_speed = cfg.speed_gain * (v_set - inputs.v_ego);
    let meas = inputs.meas;
    let a_gap = meas.valid.then(|| {
        let d_star = params.standstill_gap + inputs.thw_setpoint * inputs.v_ego;
        gains.kp * (meas.range - d_star) + gains.kd * meas.range_rate + meas.preceding_accel
    });
    let decel_cap = inputs.least_performing_decel.min(params.max_decel);
    let wanted = a_gap.map_or(a_speed, |g| g.min(a_speed));
    let a = wanted.clamp(-decel_cap, accel_cap.max(0.0));

    let braking_ahead = meas.valid && meas.preceding_accel < -cfg.brake_cue_threshold;
    let jam_advised = inputs.i2v.and_then(|i| i.traffic_condition) == Some(TrafficCondition::JamAhead);
    let intent = (braking_ahead || jam_advised).then(|| ManagementKind::SpeedProfileIntent {
        intent_decel: a.min(0.0),
        intent_target_speed: if meas.valid { meas.preceding_speed.min(v_set) } else { v_set },
        intent_reason: IntentReason::TrafficJamAhead,
    });
    LeaderDecision { a_cmd: AccelCommand { a_cmd: a }, intent }
}
