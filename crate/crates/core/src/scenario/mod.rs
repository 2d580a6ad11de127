//! Scenario descriptions extended with a communication layer.

mod parse;

use crate::channel::{ChannelConfig, ChannelOverrides};
use crate::protocol::{
    IntentReason, PlatoonConfig, Role, TrafficCondition, TruckId, DEFAULT_MAX_PLATOON_SIZE, MIN_PLATOON_THW,
    PROTOCOL_VERSION,
};
use crate::vehicle::TruckParams;
use crate::world::PLATOON_LANE;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

pub use parse::{parse_scenario, serialize_scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lighting {
    Day,
    Night,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Tunnel,
    Bridge,
    Gantry,
}

/// Stretch of road that degrades the radio channel for senders inside it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub kind: SegmentKind,
    pub from_x: f64,
    pub to_x: f64,
    pub loss_multiplier: f64,
    pub latency_multiplier: f64,
}

impl Segment {
    pub fn contains(&self, x: f64) -> bool {
        self.from_x <= x && x < self.to_x
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentConditions {
    /// Multiplies sensor noise; 1 is clear weather.
    pub visibility_factor: f64,
    pub lighting: Lighting,
    pub segments: Vec<Segment>,
}

impl Default for EnvironmentConditions {
    fn default() -> Self {
        EnvironmentConditions { visibility_factor: 1.0, lighting: Lighting::Day, segments: Vec::new() }
    }
}

impl EnvironmentConditions {
    pub fn active_at(&self, x: f64) -> impl Iterator<Item = &Segment> {
        self.segments.iter().filter(move |s| s.contains(x))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Trigger {
    /// Simulation time in seconds.
    At(f64),
    /// Gap ahead of the platoon member at `truck` (0 = leader) drops to
    /// `threshold` or below.
    GapBelow { truck: usize, threshold: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EventKind {
    PrecedingVehicleBrakes {
        /// Index into the scenario's other vehicles.
        vehicle: usize,
        /// Magnitude, m/s².
        decel: f64,
        target_speed: f64,
    },
    CutIn {
        /// The vehicle enters the gap behind platoon member `between_index`.
        between_index: usize,
        /// Defaults to the speed of the truck behind the gap.
        entry_speed: Option<f64>,
        /// Where the vehicle's front lands, as a fraction of the gap measured
        /// from the rear of the truck ahead.
        entry_gap_fraction: f64,
        length: f64,
        /// Seconds until the vehicle leaves the lane again.
        dwell: Option<f64>,
    },
    CandidateJoinRequest {
        protocol_version: Option<u16>,
        max_decel_capability: Option<f64>,
    },
    I2VBroadcast {
        speed_limit: Option<f64>,
        advised_thw: Option<f64>,
        traffic_condition: Option<TrafficCondition>,
    },
    ChannelDegrade(ChannelOverrides),
    LeaderThwAdjust {
        new_thw: f64,
        reason: IntentReason,
    },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::PrecedingVehicleBrakes { .. } => "preceding_vehicle_brakes",
            EventKind::CutIn { .. } => "cut_in",
            EventKind::CandidateJoinRequest { .. } => "candidate_join_request",
            EventKind::I2VBroadcast { .. } => "i2v_broadcast",
            EventKind::ChannelDegrade(_) => "channel_degrade",
            EventKind::LeaderThwAdjust { .. } => "leader_thw_adjust",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEvent {
    pub trigger: Trigger,
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Road {
    pub lanes: u32,
    pub speed_limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatoonInit {
    pub platoon_id: u32,
    pub n_trucks: usize,
    pub max_size: usize,
    pub initial_thw: f64,
    pub initial_speed: f64,
    pub op_rate_hz: f64,
    pub tactical_rate_hz: f64,
    /// One entry per truck, front first.
    pub trucks: Vec<TruckParams>,
}

impl PlatoonInit {
    pub fn uniform(n_trucks: usize, initial_thw: f64, initial_speed: f64) -> Self {
        PlatoonInit {
            platoon_id: 1,
            n_trucks,
            max_size: DEFAULT_MAX_PLATOON_SIZE,
            initial_thw,
            initial_speed,
            op_rate_hz: 25.0,
            tactical_rate_hz: 2.0,
            trucks: vec![TruckParams::default(); n_trucks],
        }
    }
}

/// A truck driving behind the platoon that may ask to join.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateInit {
    pub thw: f64,
    pub protocol_version: u16,
    pub params: TruckParams,
}

impl Default for CandidateInit {
    fn default() -> Self {
        CandidateInit { thw: 2.0, protocol_version: PROTOCOL_VERSION, params: TruckParams::default() }
    }
}

/// Scripted, non-reactive road user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OtherVehicle {
    /// Front bumper position; the leader's front starts at 0.
    pub x_front: f64,
    pub v: f64,
    pub length: f64,
    pub lane: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub duration: f64,
    pub ego_role: Role,
    pub i2v_present: bool,
    pub road: Road,
    pub platoon: PlatoonInit,
    pub candidate: Option<CandidateInit>,
    pub other_vehicles: Vec<OtherVehicle>,
    pub events: Vec<ScenarioEvent>,
    pub environment: EnvironmentConditions,
    pub channel: ChannelConfig,
}

/// One violated scenario invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationIssue {
    /// Dotted field path such as `platoon.initial_thw` or `event[1].decel`.
    pub field: String,
    pub message: String,
    /// Source line, when the scenario came from text.
    pub line: Option<usize>,
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}: {}", self.field, self.message),
            None => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("line {line}: syntax error: expected {expected}, found {found}")]
    Syntax { line: usize, expected: String, found: String },
    #[error("invalid scenario: {}", join_issues(.0))]
    Validation(Vec<ValidationIssue>),
}

fn join_issues(issues: &[ValidationIssue]) -> String {
    issues.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("role {role} is not realizable in this scenario")]
pub struct RoleNotRealizable {
    pub role: Role,
}

/// Desired CACC gap at speed `v`.
pub fn equilibrium_gap(params: &TruckParams, thw: f64, v: f64) -> f64 {
    params.standstill_gap + thw * v
}

fn finite(x: f64) -> bool {
    x.is_finite()
}

impl Scenario {
    /// The smallest scenario: `n` default trucks cruising on an empty road.
    pub fn cruise(name: &str, n: usize, thw: f64, speed: f64, duration: f64) -> Self {
        Scenario {
            name: name.to_string(),
            duration,
            ego_role: Role::Trailing,
            i2v_present: false,
            road: Road { lanes: 3, speed_limit: speed.max(1.0) },
            platoon: PlatoonInit::uniform(n, thw, speed),
            candidate: None,
            other_vehicles: Vec::new(),
            events: Vec::new(),
            environment: EnvironmentConditions::default(),
            channel: ChannelConfig::ideal(),
        }
    }

    pub fn realizable_roles(&self) -> Vec<Role> {
        let n = self.platoon.n_trucks;
        let mut roles = Vec::new();
        if n >= 2 {
            roles.push(Role::Leader);
        }
        if n >= 3 {
            roles.push(Role::Follower);
        }
        if n >= 2 {
            roles.push(Role::Trailing);
        }
        if self.candidate.is_some() {
            roles.push(Role::Candidate);
        }
        roles
    }

    /// Index of the truck that is tested in `role`: platoon members first,
    /// the candidate (if any) last.
    pub fn truck_index_for_role(&self, role: Role) -> Result<usize, RoleNotRealizable> {
        if !self.realizable_roles().contains(&role) {
            return Err(RoleNotRealizable { role });
        }
        let n = self.platoon.n_trucks;
        Ok(match role {
            Role::Leader => 0,
            Role::Follower => 1,
            Role::Trailing => n - 1,
            Role::Candidate => n,
        })
    }

    /// Front bumper positions of all trucks, candidate last.
    pub fn initial_truck_positions(&self) -> Vec<f64> {
        let p = &self.platoon;
        let mut xs = Vec::with_capacity(p.n_trucks + 1);
        let mut x = 0.0;
        for (i, params) in p.trucks.iter().enumerate() {
            if i > 0 {
                x -= p.trucks[i - 1].length + equilibrium_gap(params, p.initial_thw, p.initial_speed);
            }
            xs.push(x);
        }
        if let (Some(c), Some(last)) = (&self.candidate, p.trucks.last()) {
            x -= last.length + equilibrium_gap(&c.params, c.thw, p.initial_speed);
            xs.push(x);
        }
        xs
    }

    pub fn initial_config(&self) -> PlatoonConfig {
        let p = &self.platoon;
        PlatoonConfig {
            platoon_id: p.platoon_id,
            members: (1..=p.n_trucks as u32).map(TruckId).collect(),
            max_size: p.max_size,
            least_performing_decel: p.trucks.iter().map(|t| t.max_decel).fold(f64::INFINITY, f64::min),
            comm_update_rate_operational: p.op_rate_hz,
            comm_update_rate_tactical: p.tactical_rate_hz,
        }
    }

    /// Checks every invariant and returns all violations.
    pub fn validate(&self) -> Result<(), Vec<ValidationIssue>> {
        let mut issues = Vec::new();
        let mut bad = |field: String, message: String| issues.push(ValidationIssue { field, message, line: None });

        if self.name.trim().is_empty() {
            bad("scenario.name".into(), "name must not be empty".into());
        }
        if !(finite(self.duration) && self.duration > 0.0) {
            bad("scenario.duration".into(), "duration must be positive".into());
        }
        if self.road.lanes == 0 {
            bad("road.lanes".into(), "road needs at least one lane".into());
        }
        if !(finite(self.road.speed_limit) && self.road.speed_limit > 0.0) {
            bad("road.speed_limit".into(), "speed_limit must be positive".into());
        }

        let p = &self.platoon;
        if p.n_trucks < 2 {
            bad("platoon.n_trucks".into(), "a platoon needs at least 2 trucks".into());
        }
        if p.n_trucks > p.max_size {
            bad("platoon.n_trucks".into(), format!("{} trucks exceed max_size {}", p.n_trucks, p.max_size));
        }
        if p.trucks.len() != p.n_trucks {
            bad("platoon.trucks".into(), format!("{} truck parameter sets for {} trucks", p.trucks.len(), p.n_trucks));
        }
        if !(finite(p.initial_thw) && p.initial_thw >= MIN_PLATOON_THW) {
            bad(
                "platoon.initial_thw".into(),
                format!("initial_thw {} is below the minimum platooning headway of 0.8 s", p.initial_thw),
            );
        }
        if !(finite(p.initial_speed) && p.initial_speed >= 0.0) {
            bad("platoon.initial_speed".into(), "initial_speed must be ≥ 0".into());
        } else if p.initial_speed > self.road.speed_limit {
            bad("platoon.initial_speed".into(), "initial_speed exceeds the road speed limit".into());
        }
        if !(finite(p.op_rate_hz) && p.op_rate_hz > 0.0) {
            bad("platoon.op_rate_hz".into(), "operational update rate must be positive".into());
        }
        if !(finite(p.tactical_rate_hz) && p.tactical_rate_hz > 0.0) {
            bad("platoon.tactical_rate_hz".into(), "tactical update rate must be positive".into());
        }
        for (i, t) in p.trucks.iter().enumerate() {
            if let Err(e) = t.validate() {
                bad(format!("truck[{i}]"), e.into());
            }
        }

        if let Some(c) = &self.candidate {
            if !(finite(c.thw) && c.thw > 0.0) {
                bad("candidate.thw".into(), "candidate thw must be positive".into());
            }
            if let Err(e) = c.params.validate() {
                bad("candidate".into(), e.into());
            }
        }

        if !self.realizable_roles().contains(&self.ego_role) {
            bad(
                "scenario.ego_role".into(),
                format!("role {} is not realizable with {} trucks", self.ego_role, p.n_trucks),
            );
        }

        for (i, v) in self.other_vehicles.iter().enumerate() {
            if v.lane >= self.road.lanes {
                bad(format!("vehicle[{i}].lane"), format!("lane {} does not exist", v.lane));
            }
            if !(finite(v.length) && v.length > 0.0) {
                bad(format!("vehicle[{i}].length"), "length must be positive".into());
            }
            if !(finite(v.v) && v.v >= 0.0) {
                bad(format!("vehicle[{i}].v"), "speed must be ≥ 0".into());
            }
            if !finite(v.x_front) {
                bad(format!("vehicle[{i}].x_front"), "position must be finite".into());
            }
        }
        if p.trucks.len() == p.n_trucks && self.other_vehicles.iter().all(|v| v.length > 0.0) {
            self.check_overlaps(&mut bad);
        }

        let env = &self.environment;
        if !(finite(env.visibility_factor) && env.visibility_factor >= 0.0) {
            bad("environment.visibility_factor".into(), "visibility_factor must be ≥ 0".into());
        }
        for (i, s) in env.segments.iter().enumerate() {
            if !(finite(s.from_x) && finite(s.to_x) && s.from_x < s.to_x) {
                bad(format!("segment[{i}]"), "from_x must be less than to_x".into());
            }
            if !(finite(s.loss_multiplier) && s.loss_multiplier >= 0.0) {
                bad(format!("segment[{i}].loss_multiplier"), "multiplier must be ≥ 0".into());
            }
            if !(finite(s.latency_multiplier) && s.latency_multiplier >= 0.0) {
                bad(format!("segment[{i}].latency_multiplier"), "multiplier must be ≥ 0".into());
            }
        }
        if let Err(e) = self.channel.validate() {
            bad("channel".into(), e.into());
        }

        for (i, ev) in self.events.iter().enumerate() {
            match &ev.trigger {
                Trigger::At(t) => {
                    if !(finite(*t) && *t >= 0.0 && *t <= self.duration) {
                        bad(format!("event[{i}].at"), "trigger time must lie within [0, duration]".into());
                    }
                }
                Trigger::GapBelow { truck, threshold } => {
                    if *truck >= p.n_trucks {
                        bad(format!("event[{i}].truck"), format!("no platoon member with index {truck}"));
                    }
                    if !(finite(*threshold) && *threshold > 0.0) {
                        bad(format!("event[{i}].gap_below"), "gap threshold must be positive".into());
                    }
                }
            }
            match &ev.kind {
                EventKind::PrecedingVehicleBrakes { vehicle, decel, target_speed } => {
                    if *vehicle >= self.other_vehicles.len() {
                        bad(format!("event[{i}].vehicle"), format!("no vehicle with index {vehicle}"));
                    }
                    if !(finite(*decel) && *decel > 0.0 && *decel <= TruckParams::MAX_DECEL_LIMIT) {
                        bad(format!("event[{i}].decel"), "decel magnitude must be in (0, 10] m/s²".into());
                    }
                    if !(finite(*target_speed) && *target_speed >= 0.0) {
                        bad(format!("event[{i}].target_speed"), "target_speed must be ≥ 0".into());
                    }
                }
                EventKind::CutIn { between_index, entry_speed, entry_gap_fraction, length, dwell } => {
                    if *between_index + 1 >= p.n_trucks {
                        bad(format!("event[{i}].between_index"), format!("no gap behind member {between_index}"));
                    }
                    if !(finite(*entry_gap_fraction) && *entry_gap_fraction > 0.0 && *entry_gap_fraction < 1.0) {
                        bad(format!("event[{i}].entry_gap_fraction"), "entry_gap_fraction must be in (0, 1)".into());
                    }
                    if !(finite(*length) && *length > 0.0) {
                        bad(format!("event[{i}].length"), "length must be positive".into());
                    }
                    if entry_speed.is_some_and(|v| !(finite(v) && v >= 0.0)) {
                        bad(format!("event[{i}].entry_speed"), "entry_speed must be ≥ 0".into());
                    }
                    if dwell.is_some_and(|d| !(finite(d) && d > 0.0)) {
                        bad(format!("event[{i}].dwell"), "dwell must be positive".into());
                    }
                    if self.road.lanes < 2 {
                        bad(format!("event[{i}]"), "a cut-in needs a second lane".into());
                    }
                }
                EventKind::CandidateJoinRequest { max_decel_capability, .. } => {
                    if self.candidate.is_none() {
                        bad(format!("event[{i}]"), "join request without a [candidate] section".into());
                    }
                    if max_decel_capability.is_some_and(|d| !(finite(d) && d > 0.0)) {
                        bad(format!("event[{i}].max_decel_capability"), "must be positive".into());
                    }
                }
                EventKind::I2VBroadcast { speed_limit, advised_thw, traffic_condition } => {
                    if !self.i2v_present {
                        bad(format!("event[{i}]"), "I2V broadcast on a road without I2V (i2v_present = false)".into());
                    }
                    if speed_limit.is_none() && advised_thw.is_none() && traffic_condition.is_none() {
                        bad(format!("event[{i}]"), "I2V advisory carries no field".into());
                    }
                    if speed_limit.is_some_and(|v| !(finite(v) && v > 0.0)) {
                        bad(format!("event[{i}].speed_limit"), "speed_limit must be positive".into());
                    }
                    if advised_thw.is_some_and(|v| !(finite(v) && v > 0.0)) {
                        bad(format!("event[{i}].advised_thw"), "advised_thw must be positive".into());
                    }
                }
                EventKind::ChannelDegrade(o) => {
                    if o.is_empty() {
                        bad(format!("event[{i}]"), "channel_degrade overrides nothing".into());
                    } else if let Err(e) = o.apply(&self.channel).validate() {
                        bad(format!("event[{i}]"), e.into());
                    }
                }
                EventKind::LeaderThwAdjust { new_thw, .. } => {
                    if !(finite(*new_thw) && *new_thw >= MIN_PLATOON_THW) {
                        bad(format!("event[{i}].new_thw"), format!("new_thw {new_thw} is below the 0.8 s minimum"));
                    }
                }
            }
        }

        if issues.is_empty() {
            Ok(())
        } else {
            Err(issues)
        }
    }

    fn check_overlaps(&self, bad: &mut impl FnMut(String, String)) {
        let xs = self.initial_truck_positions();
        let mut lengths: Vec<f64> = self.platoon.trucks.iter().map(|t| t.length).collect();
        if let Some(c) = &self.candidate {
            lengths.push(c.params.length);
        }
        let mut spans: Vec<(String, f64, f64, u32)> = xs
            .iter()
            .zip(&lengths)
            .enumerate()
            .map(|(i, (x, l))| (format!("truck[{i}]"), x - l, *x, PLATOON_LANE))
            .collect();
        for (i, v) in self.other_vehicles.iter().enumerate() {
            spans.push((format!("vehicle[{i}]"), v.x_front - v.length, v.x_front, v.lane));
        }
        for a in 0..spans.len() {
            for b in a + 1..spans.len() {
                let (na, ra, fa, la) = &spans[a];
                let (nb, rb, fb, lb) = &spans[b];
                if la == lb && ra < fb && rb < fa {
                    let field = if nb.starts_with("vehicle") { nb } else { na };
                    bad(format!("{field}.x_front"), format!("{na} and {nb} overlap at the start"));
                }
            }
        }
    }
}

/// One event firing.
#[derive(Debug, Clone, PartialEq)]
pub struct FiredEvent {
    /// Position of the event in the scenario file.
    pub index: usize,
    pub kind: EventKind,
}

/// Fires every scenario event at most once, in file order when several are
/// due at the same tick.
#[derive(Debug, Clone)]
pub struct EventSchedule {
    events: Vec<ScenarioEvent>,
    fired: Vec<bool>,
    last_t: f64,
}

impl EventSchedule {
    pub fn new(events: &[ScenarioEvent]) -> Self {
        EventSchedule { events: events.to_vec(), fired: vec![false; events.len()], last_t: f64::NEG_INFINITY }
    }

    /// `gap_ahead(i)` reports the current gap in front of platoon member `i`.
    pub fn fire(&mut self, t: f64, gap_ahead: impl Fn(usize) -> Option<f64>) -> Vec<FiredEvent> {
        debug_assert!(t >= self.last_t, "event times must be monotone");
        self.last_t = t;
        let mut out = Vec::new();
        for (i, ev) in self.events.iter().enumerate() {
            if self.fired[i] {
                continue;
            }
            let due = match ev.trigger {
                Trigger::At(at) => t + 1e-9 >= at,
                Trigger::GapBelow { truck, threshold } => gap_ahead(truck).is_some_and(|g| g <= threshold),
            };
            if due {
                self.fired[i] = true;
                out.push(FiredEvent { index: i, kind: ev.kind.clone() });
            }
        }
        out
    }

    pub fn fired_count(&self) -> usize {
        self.fired.iter().filter(|f| **f).count()
    }
}

/// Scenario files shipped with the crate.
pub fn bundled() -> Vec<(&'static str, &'static str)> {
    vec![
        ("traffic_jam_tail", include_str!("../../scenarios/traffic_jam_tail.scn")),
        ("candidate_join", include_str!("../../scenarios/candidate_join.scn")),
        ("cut_in_follower_gap", include_str!("../../scenarios/cut_in_follower_gap.scn")),
        ("comm_degrade_tunnel", include_str!("../../scenarios/comm_degrade_tunnel.scn")),
        ("i2v_speed_advice", include_str!("../../scenarios/i2v_speed_advice.scn")),
        ("string_chain", include_str!("../../scenarios/string_chain.scn")),
    ]
}

pub fn bundled_scenario(name: &str) -> Option<Scenario> {
    let name = name.trim_end_matches(".scn");
    bundled()
        .into_iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| parse_scenario(text).expect("bundled scenarios are valid"))
}
