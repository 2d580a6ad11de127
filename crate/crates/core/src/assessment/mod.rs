//! Test modes that assess one truck in one role, and the safety metrics
//! computed from their traces.

mod engine;
mod export;
mod metrics;
mod runners;

use crate::channel::{ChannelConfig, ChannelOverrides, ChannelError, MessageRecord};
use crate::protocol::{Role, TruckId};
use crate::scenario::{RoleNotRealizable, ScenarioError};
use crate::vehicle::{ControlConfig, ControllerMode, DclError, DclInputs};
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

pub use engine::{simulate, SimOutput};
pub use export::{messages_csv, report_json, sweep_csv, trace_csv, sensor_csv};
pub use metrics::{evaluate_metrics, string_stability_ratios};
pub use runners::{
    run_closed_loop, run_comm_test, run_open_loop, run_sensor_test, CommRow, Consistency, OpenLoopResult, SensorRow,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub min_ttc: f64,
    pub min_thw: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { min_ttc: 2.0, min_thw: 0.4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    pub seed: u64,
    pub control: ControlConfig,
    pub thresholds: Thresholds,
    /// Layered over the scenario's channel block.
    pub channel: ChannelOverrides,
    /// Trucks ignore their set points and hold speed (actuation suppressed).
    pub hold_speed: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 0.01,
            seed: 0,
            control: ControlConfig::default(),
            thresholds: Thresholds::default(),
            channel: ChannelOverrides::default(),
            hold_speed: false,
        }
    }
}

impl SimConfig {
    /// Overrides that turn any channel into a lossless, zero-latency one.
    pub fn ideal_channel_overrides() -> ChannelOverrides {
        let i = ChannelConfig::ideal();
        ChannelOverrides {
            latency_mean: Some(i.latency_mean),
            latency_jitter: Some(i.latency_jitter),
            loss_prob: Some(i.loss_prob),
            congestion_extra_latency: Some(i.congestion_extra_latency),
            congestion_threshold: Some(i.congestion_threshold),
            seed: None,
        }
    }

    pub fn with_ideal_channel(mut self) -> Self {
        self.channel = Self::ideal_channel_overrides();
        self
    }

    pub fn validate(&self) -> Result<(), &'static str> {
        if !(self.dt.is_finite() && self.dt > 0.0 && self.dt <= 0.1) {
            return Err("dt must be in (0, 0.1] s");
        }
        let g = &self.control.gains;
        if ![g.kp, g.kd, g.ff].iter().all(|x| x.is_finite()) {
            return Err("controller gains must be finite");
        }
        let f = &self.control.fallback;
        if !(f.timeout.is_finite() && f.timeout > 0.0 && f.thw_increment.is_finite() && f.thw_increment >= 0.0) {
            return Err("fallback timeout must be positive and the increment ≥ 0");
        }
        if !(self.thresholds.min_ttc.is_finite() && self.thresholds.min_thw.is_finite()) {
            return Err("thresholds must be finite");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Role(#[from] RoleNotRealizable),
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error("truck {truck} at tick {tick}: {source}")]
    Dcl { truck: TruckId, tick: u64, source: DclError },
    #[error("tick {tick}: {source}")]
    Channel { tick: u64, source: ChannelError },
    #[error("input log has no entry for tick {tick}")]
    InputLogGap { tick: u64 },
    #[error("sweep is empty")]
    EmptySweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VehicleKind {
    Truck,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleMeta {
    pub label: String,
    pub kind: VehicleKind,
    pub truck_id: Option<TruckId>,
    pub length: f64,
    /// Brake capability; infinite for scripted vehicles.
    pub max_decel: f64,
}

/// State of one vehicle at one tick.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleRecord {
    pub tick: u64,
    pub t: f64,
    /// Index into [`Trace::vehicles`].
    pub vehicle: usize,
    pub lane: u32,
    pub x_front: f64,
    pub v: f64,
    pub a: f64,
    pub a_cmd: Option<f64>,
    pub role: Option<Role>,
    pub mode: Option<ControllerMode>,
    pub thw_setpoint: Option<f64>,
    pub op_msg_age: Option<f64>,
    /// Bumper gap to the nearest vehicle ahead in the same lane.
    pub gap: Option<f64>,
    pub thw: Option<f64>,
    pub ttc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventFiring {
    pub tick: u64,
    pub t: f64,
    pub index: usize,
    pub kind: &'static str,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub dt: f64,
    pub n_ticks: u64,
    pub vehicles: Vec<VehicleMeta>,
    /// Ordered by tick, then vehicle.
    pub records: Vec<VehicleRecord>,
    pub messages: Vec<MessageRecord>,
    pub events: Vec<EventFiring>,
    /// Initial platoon members, front first.
    pub platoon: Vec<TruckId>,
    pub least_performing_decel: f64,
}

impl Trace {
    pub fn vehicle_index(&self, id: TruckId) -> Option<usize> {
        self.vehicles.iter().position(|v| v.truck_id == Some(id))
    }

    pub fn series(&self, vehicle: usize) -> impl Iterator<Item = &VehicleRecord> {
        self.records.iter().filter(move |r| r.vehicle == vehicle)
    }
}

/// Inputs the vehicle-under-test's DCL saw, one entry per tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputLog {
    pub truck: TruckId,
    pub role: Role,
    pub dt: f64,
    pub entries: Vec<DclInputs>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputEntry {
    pub tick: u64,
    pub a_cmd: f64,
    /// Encoded outgoing messages.
    pub messages: Vec<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OutputLog {
    pub entries: Vec<OutputEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Pass,
    Fail,
}

fn inf_as_string<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    if x.is_finite() {
        s.serialize_f64(*x)
    } else if x.is_nan() {
        s.serialize_str("nan")
    } else if *x > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

fn vec_inf_as_string<S: Serializer>(xs: &[f64], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    struct F(f64);
    impl Serialize for F {
        fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
            inf_as_string(&self.0, s)
        }
    }
    let mut seq = s.serialize_seq(Some(xs.len()))?;
    for x in xs {
        seq.serialize_element(&F(*x))?;
    }
    seq.end()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommStats {
    pub sent: usize,
    pub delivered: usize,
    pub dropped: usize,
    /// Mean delivery latency of delivered messages, s.
    pub mean_latency: f64,
    /// Age of the operational message in use by the vehicle-under-test,
    /// averaged over the ticks it drives as a follower.
    pub mean_age_at_use: f64,
    pub max_age_at_use: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SafetyReport {
    pub vehicle_under_test: TruckId,
    pub role: Role,
    pub collision: bool,
    #[serde(serialize_with = "inf_as_string")]
    pub min_gap: f64,
    #[serde(serialize_with = "inf_as_string")]
    pub min_thw: f64,
    #[serde(serialize_with = "inf_as_string")]
    pub min_ttc: f64,
    pub max_decel_used: f64,
    pub max_decel_limit: f64,
    #[serde(serialize_with = "vec_inf_as_string")]
    pub string_stability_ratios: Vec<f64>,
    pub comm_stats: CommStats,
    pub thresholds: Thresholds,
    pub verdict: Verdict,
}

impl SafetyReport {
    /// Recomputes the verdict from the report's own fields.
    pub fn recompute_verdict(&self) -> Verdict {
        metrics::verdict(self.collision, self.min_thw, self.min_ttc, self.max_decel_used, self.max_decel_limit, &self.thresholds)
    }
}
