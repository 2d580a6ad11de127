//! Platooning protocol: message types, wire codec, roles and membership logic.
//!
//! Operational [`ControlMessage`]s travel one hop between adjacent trucks at a
//! high rate. Tactical [`ManagementMessage`]s are relayed hop by hop through the
//! platoon. Join handshakes happen between the trailing truck and a candidate
//! behind it, and infrastructure advisories are one-way broadcasts.

mod codec;
mod join;
mod role;

use serde::{Deserialize, Serialize};
use std::fmt;

pub use codec::{decode_message, decode_stream, encode_message, CodecError, Malformed, MalformedMessage};
pub use join::{
    apply_platoon_update, handle_join_request, JoinView, UpdateError, DEFAULT_DECEL_TOLERANCE,
};
pub use role::{role_for_index, role_transition, RoleEvent, TransitionError};

/// Protocol version spoken by every truck built from this crate.
pub const PROTOCOL_VERSION: u16 = 1;

/// Lower bound on the time headway while platooning.
pub const MIN_PLATOON_THW: f64 = 0.8;

/// Default upper bound on the number of trucks in one platoon.
pub const DEFAULT_MAX_PLATOON_SIZE: usize = 7;

/// Acceleration magnitude bound carried by control messages.
pub const MAX_MESSAGE_ACCEL: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Leader,
    Follower,
    Trailing,
    Candidate,
}

impl Role {
    pub fn is_member(self) -> bool {
        !matches!(self, Role::Candidate)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Leader => "leader",
            Role::Follower => "follower",
            Role::Trailing => "trailing",
            Role::Candidate => "candidate",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "leader" => Ok(Role::Leader),
            "follower" => Ok(Role::Follower),
            "trailing" => Ok(Role::Trailing),
            "candidate" => Ok(Role::Candidate),
            other => Err(format!("unknown role `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TruckId(pub u32);

impl fmt::Display for TruckId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "T{}", self.0)
    }
}

/// Where a message comes from or goes to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Endpoint {
    Truck(TruckId),
    Infrastructure,
    /// Every platoon member; only valid as a destination.
    Broadcast,
}

impl Endpoint {
    pub fn truck(self) -> Option<TruckId> {
        match self {
            Endpoint::Truck(id) => Some(id),
            _ => None,
        }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Truck(id) => write!(f, "{id}"),
            Endpoint::Infrastructure => f.write_str("infra"),
            Endpoint::Broadcast => f.write_str("broadcast"),
        }
    }
}

/// Operational-layer message sent to the adjacent truck.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlMessage {
    pub sender: TruckId,
    pub seq: u32,
    pub t_tx: f64,
    pub speed: f64,
    pub acceleration: f64,
    /// Commanded acceleration when braking (≤ 0), otherwise 0.
    pub commanded_decel: f64,
    pub gap_setpoint_thw: f64,
}

impl ControlMessage {
    /// Feed-forward acceleration a receiver should use: the commanded value
    /// while braking, the realized acceleration otherwise.
    pub fn feedforward(&self) -> f64 {
        if self.commanded_decel < 0.0 {
            self.commanded_decel
        } else {
            self.acceleration
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IntentReason {
    TrafficJamAhead,
    Downhill,
    DriverPreference,
    Other,
}

/// Payload of a tactical message; only the fields of the active kind exist.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ManagementKind {
    SpeedProfileIntent {
        intent_decel: f64,
        intent_target_speed: f64,
        intent_reason: IntentReason,
    },
    CohesionReport {
        cohesion_max_speed: f64,
        cohesion_max_accel: f64,
    },
    PlatoonUpdate {
        config: PlatoonConfig,
    },
    LeaveAnnounce,
}

/// Tactical-layer message relayed hop by hop. `sender` is the originator and
/// does not change while the message is relayed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManagementMessage {
    pub sender: TruckId,
    pub seq: u32,
    pub t_tx: f64,
    pub kind: ManagementKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JoinRequest {
    pub candidate: TruckId,
    pub protocol_version: u16,
    /// Magnitude, strictly positive.
    pub max_decel_capability: f64,
    pub truck_length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum JoinReason {
    Accepted,
    PlatoonFull,
    IncompatibleProtocol,
    DecelMismatch,
    UnsafeSituation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JoinResponse {
    pub reason: JoinReason,
    /// Present iff the request was accepted.
    pub config: Option<PlatoonConfig>,
}

impl JoinResponse {
    pub fn accepted(config: PlatoonConfig) -> Self {
        JoinResponse { reason: JoinReason::Accepted, config: Some(config) }
    }

    pub fn rejected(reason: JoinReason) -> Self {
        debug_assert_ne!(reason, JoinReason::Accepted);
        JoinResponse { reason, config: None }
    }

    pub fn is_accepted(&self) -> bool {
        self.reason == JoinReason::Accepted
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrafficCondition {
    Free,
    JamAhead,
}

/// One-way infrastructure advisory. At least one field is present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct I2VAdvisory {
    pub t_tx: f64,
    pub speed_limit: Option<f64>,
    pub advised_thw: Option<f64>,
    pub traffic_condition: Option<TrafficCondition>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatoonConfig {
    pub platoon_id: u32,
    /// Front to rear.
    pub members: Vec<TruckId>,
    pub max_size: usize,
    /// Magnitude of the weakest member's maximum deceleration.
    pub least_performing_decel: f64,
    pub comm_update_rate_operational: f64,
    pub comm_update_rate_tactical: f64,
}

impl PlatoonConfig {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn index_of(&self, id: TruckId) -> Option<usize> {
        self.members.iter().position(|m| *m == id)
    }

    pub fn role_of(&self, id: TruckId) -> Option<Role> {
        self.index_of(id).map(|i| role_for_index(i, self.members.len()))
    }

    pub fn predecessor_of(&self, id: TruckId) -> Option<TruckId> {
        let i = self.index_of(id)?;
        i.checked_sub(1).map(|p| self.members[p])
    }

    pub fn successor_of(&self, id: TruckId) -> Option<TruckId> {
        let i = self.index_of(id)?;
        self.members.get(i + 1).copied()
    }

    pub fn trailing(&self) -> Option<TruckId> {
        self.members.last().copied()
    }

    pub fn validate(&self) -> Result<(), &'static str> {
        if self.members.len() < 2 {
            return Err("platoon needs at least two members");
        }
        if self.members.len() > self.max_size {
            return Err("platoon exceeds max_size");
        }
        let mut seen = self.members.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.members.len() {
            return Err("duplicate platoon member");
        }
        if !(self.least_performing_decel.is_finite() && self.least_performing_decel > 0.0) {
            return Err("least_performing_decel must be positive");
        }
        if !(positive(self.comm_update_rate_operational) && positive(self.comm_update_rate_tactical)) {
            return Err("update rates must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Payload {
    Control(ControlMessage),
    Management(ManagementMessage),
    JoinRequest(JoinRequest),
    JoinResponse(JoinResponse),
    I2V(I2VAdvisory),
}

impl Payload {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Payload::Control(_) => "control",
            Payload::Management(m) => match m.kind {
                ManagementKind::SpeedProfileIntent { .. } => "speed_profile_intent",
                ManagementKind::CohesionReport { .. } => "cohesion_report",
                ManagementKind::PlatoonUpdate { .. } => "platoon_update",
                ManagementKind::LeaveAnnounce => "leave_announce",
            },
            Payload::JoinRequest(_) => "join_request",
            Payload::JoinResponse(_) => "join_response",
            Payload::I2V(_) => "i2v_advisory",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub source: Endpoint,
    pub destination: Endpoint,
    pub payload: Payload,
}

impl Message {
    pub fn v2v(from: TruckId, to: TruckId, payload: Payload) -> Self {
        Message { source: Endpoint::Truck(from), destination: Endpoint::Truck(to), payload }
    }

    pub fn is_i2v(&self) -> bool {
        self.source == Endpoint::Infrastructure
    }

    /// Checks the payload and addressing invariants that hold independently of
    /// where trucks are on the road.
    pub fn validate(&self) -> Result<(), &'static str> {
        if self.source == Endpoint::Broadcast {
            return Err("broadcast is not a valid source");
        }
        if self.destination == Endpoint::Infrastructure {
            return Err("infrastructure is not a valid destination");
        }
        match &self.payload {
            Payload::I2V(_) => {
                if self.source != Endpoint::Infrastructure || self.destination != Endpoint::Broadcast {
                    return Err("I2V advisories go from infrastructure to broadcast");
                }
            }
            _ => {
                if self.source.truck().is_none() || self.destination.truck().is_none() {
                    return Err("V2V messages are truck-to-truck unicast");
                }
            }
        }
        match &self.payload {
            Payload::Control(c) => {
                if !(c.t_tx.is_finite() && c.t_tx >= 0.0) {
                    return Err("t_tx must be a non-negative time");
                }
                if !(c.speed.is_finite() && c.speed >= 0.0) {
                    return Err("speed must be non-negative");
                }
                if !(c.acceleration.is_finite() && c.acceleration.abs() <= MAX_MESSAGE_ACCEL) {
                    return Err("acceleration out of range");
                }
                if !(c.commanded_decel.is_finite()
                    && c.commanded_decel <= 0.0
                    && c.commanded_decel >= -MAX_MESSAGE_ACCEL)
                {
                    return Err("commanded_decel must be in [-12, 0]");
                }
                if !(c.gap_setpoint_thw.is_finite() && c.gap_setpoint_thw >= MIN_PLATOON_THW) {
                    return Err("gap_setpoint_thw below 0.8 s");
                }
            }
            Payload::Management(m) => {
                if !(m.t_tx.is_finite() && m.t_tx >= 0.0) {
                    return Err("t_tx must be a non-negative time");
                }
                match &m.kind {
                    ManagementKind::SpeedProfileIntent { intent_decel, intent_target_speed, .. } => {
                        if !(intent_decel.is_finite() && *intent_decel <= 0.0) {
                            return Err("intent_decel must be ≤ 0");
                        }
                        if !(intent_target_speed.is_finite() && *intent_target_speed >= 0.0) {
                            return Err("intent_target_speed must be non-negative");
                        }
                    }
                    ManagementKind::CohesionReport { cohesion_max_speed, cohesion_max_accel } => {
                        if !(positive(*cohesion_max_speed) && positive(*cohesion_max_accel)) {
                            return Err("cohesion limits must be positive");
                        }
                    }
                    ManagementKind::PlatoonUpdate { config } => config.validate()?,
                    ManagementKind::LeaveAnnounce => {}
                }
            }
            Payload::JoinRequest(r) => {
                if !positive(r.max_decel_capability) {
                    return Err("max_decel_capability must be positive");
                }
                if !positive(r.truck_length) {
                    return Err("truck_length must be positive");
                }
            }
            Payload::JoinResponse(r) => match (&r.config, r.reason) {
                (Some(cfg), JoinReason::Accepted) => cfg.validate()?,
                (None, JoinReason::Accepted) => return Err("accepted join response without config"),
                (Some(_), _) => return Err("rejected join response carries a config"),
                (None, _) => {}
            },
            Payload::I2V(a) => {
                if !(a.t_tx.is_finite() && a.t_tx >= 0.0) {
                    return Err("t_tx must be a non-negative time");
                }
                if a.speed_limit.is_none() && a.advised_thw.is_none() && a.traffic_condition.is_none() {
                    return Err("I2V advisory carries no field");
                }
                if a.speed_limit.is_some_and(|v| !positive(v)) {
                    return Err("speed_limit must be positive");
                }
                if a.advised_thw.is_some_and(|v| !positive(v)) {
                    return Err("advised_thw must be positive");
                }
            }
        }
        Ok(())
    }
}

fn positive(x: f64) -> bool {
    x.is_finite() && x > 0.0
}
