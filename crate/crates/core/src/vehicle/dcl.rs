use super::control::{cacc_command, fallback_policy, leader_driver_model, CaccInputs, CohesionLimits, LeaderInputs};
use super::{AccelCommand, ControlConfig, ControllerMode, Measurement, TruckParams};
use crate::protocol::{
    apply_platoon_update, handle_join_request, role_transition, ControlMessage, I2VAdvisory, IntentReason,
    JoinRequest, JoinResponse, JoinView, ManagementKind, ManagementMessage, Message, Payload, PlatoonConfig, Role,
    RoleEvent, TransitionError, TruckId, UpdateError, MAX_MESSAGE_ACCEL, MIN_PLATOON_THW, PROTOCOL_VERSION,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

const DEFAULT_OP_RATE: f64 = 25.0;
const DEFAULT_TACTICAL_RATE: f64 = 2.0;

/// What the truck knows about its own motion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgoSense {
    pub v: f64,
    pub a: f64,
}

/// Operator or scenario instructions handed to one truck's DCL.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DclCommand {
    /// Candidate only: ask `trailing` for admission.
    RequestJoin { request: JoinRequest, trailing: TruckId },
    /// Leader only: change the platoon headway.
    ThwAdjust { new_thw: f64, reason: IntentReason },
    /// Member only: leave the platoon.
    Leave,
}

/// Everything a DCL step reads besides its own state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DclInputs {
    pub tick: u64,
    pub t: f64,
    pub ego: EgoSense,
    pub meas: Measurement,
    /// Messages delivered to this truck since the previous step, in order.
    pub received: Vec<Message>,
    pub commands: Vec<DclCommand>,
    /// Whether a join could currently be carried out without added hazard.
    pub situation_safe: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DclOutput {
    pub a_cmd: AccelCommand,
    pub outgoing: Vec<Message>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DclError {
    #[error(transparent)]
    Update(#[from] UpdateError),
    #[error(transparent)]
    Transition(#[from] TransitionError),
}

/// Persistent state of one truck's decision and control logic.
#[derive(Debug, Clone, PartialEq)]
pub struct DclState {
    pub id: TruckId,
    pub role: Role,
    pub config: Option<PlatoonConfig>,
    /// Headway requested by the platoon, before any fallback increment.
    pub base_thw: f64,
    /// Headway currently in use.
    pub thw_setpoint: f64,
    pub mode: ControllerMode,
    pub last_op_msg_age: f64,
    pub cruise_speed: f64,
    pub own_limits: CohesionLimits,
    pub join_outcome: Option<JoinResponse>,
    dt: f64,
    op_period: u64,
    tactical_period: u64,
    last_op: Option<ControlMessage>,
    last_op_rx: f64,
    seq: u32,
    cohesion_behind: Option<CohesionLimits>,
    i2v: Option<I2VAdvisory>,
    intent_active: bool,
    pending_update: Option<(PlatoonConfig, u32)>,
    join_request: Option<(JoinRequest, TruckId)>,
}

fn period_ticks(rate_hz: f64, dt: f64) -> u64 {
    ((1.0 / (rate_hz * dt)).round() as u64).max(1)
}

impl DclState {
    pub fn new(
        id: TruckId,
        config: Option<PlatoonConfig>,
        base_thw: f64,
        cruise_speed: f64,
        own_limits: CohesionLimits,
        dt: f64,
    ) -> Self {
        let role = config.as_ref().and_then(|c| c.role_of(id)).unwrap_or(Role::Candidate);
        let mut s = DclState {
            id,
            role,
            config,
            base_thw,
            thw_setpoint: base_thw,
            mode: ControllerMode::Cacc,
            last_op_msg_age: 0.0,
            cruise_speed,
            own_limits,
            join_outcome: None,
            dt,
            op_period: 1,
            tactical_period: 1,
            last_op: None,
            last_op_rx: 0.0,
            seq: 0,
            cohesion_behind: None,
            i2v: None,
            intent_active: false,
            pending_update: None,
            join_request: None,
        };
        s.refresh_roles();
        s
    }

    fn refresh_roles(&mut self) {
        let (op, tac) = match &self.config {
            Some(c) => (c.comm_update_rate_operational, c.comm_update_rate_tactical),
            None => (DEFAULT_OP_RATE, DEFAULT_TACTICAL_RATE),
        };
        self.op_period = period_ticks(op, self.dt);
        self.tactical_period = period_ticks(tac, self.dt);
        self.mode = match self.role {
            Role::Leader => ControllerMode::ManualLead,
            Role::Follower | Role::Trailing => ControllerMode::Cacc,
            Role::Candidate => ControllerMode::AccFallback,
        };
    }

    pub fn op_period(&self) -> u64 {
        self.op_period
    }

    pub fn tactical_period(&self) -> u64 {
        self.tactical_period
    }

    fn predecessor(&self) -> Option<TruckId> {
        self.config.as_ref().and_then(|c| c.predecessor_of(self.id))
    }

    fn successor(&self) -> Option<TruckId> {
        self.config.as_ref().and_then(|c| c.successor_of(self.id))
    }

    fn next_seq(&mut self) -> u32 {
        let s = self.seq;
        self.seq = self.seq.wrapping_add(1);
        s
    }

    fn management(&mut self, t: f64, kind: ManagementKind) -> Payload {
        Payload::Management(ManagementMessage { sender: self.id, seq: self.next_seq(), t_tx: t, kind })
    }

    fn adopt(&mut self, config: PlatoonConfig) {
        let old_successor = self.successor();
        self.role = config.role_of(self.id).unwrap_or(Role::Candidate);
        self.config = Some(config);
        if self.successor() != old_successor {
            self.cohesion_behind = None;
        }
        self.refresh_roles();
    }

    fn drop_out(&mut self) {
        self.role = Role::Candidate;
        self.config = None;
        self.pending_update = None;
        self.cohesion_behind = None;
        self.last_op = None;
        self.refresh_roles();
    }
}

/// One step of the decision and control logic of a truck.
///
/// This is a pure function of `state` and `inputs`: the same sequence of
/// inputs always produces the same set points and outgoing messages.
pub fn dcl_step(
    state: &mut DclState,
    inputs: &DclInputs,
    params: &TruckParams,
    cfg: &ControlConfig,
) -> Result<DclOutput, DclError> {
    let t = inputs.t;
    let tactical_tick = inputs.tick.is_multiple_of(state.tactical_period);
    let mut out: Vec<Message> = Vec::new();
    let mut join_sent = false;

    for cmd in &inputs.commands {
        match cmd {
            DclCommand::RequestJoin { request, trailing } => {
                if state.role == Role::Candidate {
                    state.join_request = Some((request.clone(), *trailing));
                    state.join_outcome = None;
                    out.push(Message::v2v(state.id, *trailing, Payload::JoinRequest(request.clone())));
                    join_sent = true;
                }
            }
            DclCommand::ThwAdjust { new_thw, reason } => {
                if state.role == Role::Leader {
                    state.base_thw = new_thw.max(MIN_PLATOON_THW);
                    if let Some(next) = state.successor() {
                        let kind = ManagementKind::SpeedProfileIntent {
                            intent_decel: 0.0,
                            intent_target_speed: inputs.ego.v,
                            intent_reason: *reason,
                        };
                        let p = state.management(t, kind);
                        out.push(Message::v2v(state.id, next, p));
                    }
                }
            }
            DclCommand::Leave => {
                if state.role.is_member() {
                    let p = state.management(t, ManagementKind::LeaveAnnounce);
                    for n in [state.predecessor(), state.successor()].into_iter().flatten() {
                        out.push(Message::v2v(state.id, n, p.clone()));
                    }
                    role_transition(state.role, RoleEvent::SelfLeave)?;
                    state.drop_out();
                }
            }
        }
    }

    for m in &inputs.received {
        let from = m.source.truck();
        match &m.payload {
            Payload::Control(c) => {
                if state.role.is_member() && from.is_some() && from == state.predecessor() {
                    state.base_thw = c.gap_setpoint_thw.max(MIN_PLATOON_THW);
                    state.last_op = Some(c.clone());
                    state.last_op_rx = t;
                }
            }
            Payload::Management(mm) => match &mm.kind {
                ManagementKind::SpeedProfileIntent { .. } => {
                    if from.is_some() && from == state.predecessor() {
                        if let Some(next) = state.successor() {
                            out.push(Message::v2v(state.id, next, m.payload.clone()));
                        }
                    }
                }
                ManagementKind::CohesionReport { cohesion_max_speed, cohesion_max_accel } => {
                    if from.is_some() && from == state.successor() {
                        state.cohesion_behind =
                            Some(CohesionLimits { max_speed: *cohesion_max_speed, max_accel: *cohesion_max_accel });
                    }
                }
                ManagementKind::PlatoonUpdate { config } => {
                    let Some(old) = state.config.clone() else { continue };
                    if from.is_none() || from != state.successor() || *config == old {
                        continue;
                    }
                    match apply_platoon_update(&old, config, state.id) {
                        Ok(new) => {
                            state.adopt(new.clone());
                            if let Some(prev) = state.predecessor() {
                                out.push(Message::v2v(state.id, prev, m.payload.clone()));
                                state.pending_update = Some((new, cfg.update_repeats));
                            }
                        }
                        Err(UpdateError::NotAMember(_)) => state.drop_out(),
                        Err(e) => return Err(e.into()),
                    }
                }
                ManagementKind::LeaveAnnounce => {
                    let Some(old) = state.config.clone() else { continue };
                    let Some(idx) = old.index_of(mm.sender) else { continue };
                    let my_idx = old.index_of(state.id).expect("member of own config");
                    let onward = if idx < my_idx { old.successor_of(state.id) } else { old.predecessor_of(state.id) };
                    if let Some(n) = onward {
                        out.push(Message::v2v(state.id, n, m.payload.clone()));
                    }
                    let mut next = old.clone();
                    next.members.remove(idx);
                    if next.members.len() < 2 {
                        role_transition(state.role, RoleEvent::PlatoonDissolved)?;
                        state.drop_out();
                    } else {
                        state.adopt(next);
                    }
                }
            },
            Payload::JoinRequest(req) => {
                let Some(config) = state.config.clone() else { continue };
                if state.role == Role::Trailing {
                    let view = JoinView { config: &config, protocol_version: PROTOCOL_VERSION, situation_safe: inputs.situation_safe };
                    let resp = handle_join_request(&view, req, cfg.decel_tolerance);
                    out.push(Message::v2v(state.id, req.candidate, Payload::JoinResponse(resp.clone())));
                    if let Some(new) = resp.config {
                        let next_role = role_transition(state.role, RoleEvent::NewMemberBehind)?;
                        state.adopt(new.clone());
                        debug_assert_eq!(state.role, next_role);
                        if let Some(prev) = state.predecessor() {
                            let p = state.management(t, ManagementKind::PlatoonUpdate { config: new.clone() });
                            out.push(Message::v2v(state.id, prev, p));
                            state.pending_update = Some((new, cfg.update_repeats));
                        }
                    }
                } else if state.successor() == Some(req.candidate) {
                    // the candidate missed our earlier acceptance
                    out.push(Message::v2v(state.id, req.candidate, Payload::JoinResponse(JoinResponse::accepted(config))));
                }
            }
            Payload::JoinResponse(resp) => {
                if state.role != Role::Candidate || state.join_request.is_none() {
                    continue;
                }
                state.join_outcome = Some(resp.clone());
                state.join_request = None;
                if let Some(config) = &resp.config {
                    role_transition(state.role, RoleEvent::JoinAccepted)?;
                    state.adopt(config.clone());
                    state.last_op_rx = t;
                }
            }
            Payload::I2V(adv) => {
                if state.role == Role::Leader {
                    if let Some(thw) = adv.advised_thw {
                        state.base_thw = thw.max(MIN_PLATOON_THW);
                    }
                }
                state.i2v = Some(adv.clone());
            }
        }
    }

    let meas = &inputs.meas;
    let v = inputs.ego.v;
    let a_cmd = match state.role {
        Role::Leader => {
            state.mode = ControllerMode::ManualLead;
            state.thw_setpoint = state.base_thw;
            state.last_op_msg_age = 0.0;
            let lpd = state.config.as_ref().map_or(params.max_decel, |c| c.least_performing_decel);
            let li = LeaderInputs {
                meas,
                v_ego: v,
                cruise_speed: state.cruise_speed,
                thw_setpoint: state.thw_setpoint,
                least_performing_decel: lpd,
                i2v: state.i2v.as_ref(),
                cohesion: state.cohesion_behind,
            };
            let decision = leader_driver_model(&li, params, &cfg.gains, &cfg.leader);
            match decision.intent {
                Some(kind) => {
                    if !state.intent_active || tactical_tick {
                        if let Some(next) = state.successor() {
                            let p = state.management(t, kind);
                            out.push(Message::v2v(state.id, next, p));
                        }
                    }
                    state.intent_active = true;
                }
                None => state.intent_active = false,
            }
            decision.a_cmd
        }
        Role::Follower | Role::Trailing => {
            let age = t - state.last_op_rx;
            state.last_op_msg_age = age;
            let decision = fallback_policy(age, state.base_thw, &cfg.fallback);
            state.mode = decision.mode;
            state.thw_setpoint = decision.thw_setpoint;
            let op = match decision.mode {
                ControllerMode::Cacc if !meas.cut_in_detected => state.last_op.as_ref(),
                _ => None,
            };
            let ci = CaccInputs { meas, op_msg: op, v_ego: v, thw_setpoint: state.thw_setpoint };
            cacc_command(&ci, params, &cfg.gains).unwrap_or(AccelCommand { a_cmd: 0.0 })
        }
        Role::Candidate => {
            state.mode = ControllerMode::AccFallback;
            state.thw_setpoint = state.base_thw;
            state.last_op_msg_age = t - state.last_op_rx;
            let ci = CaccInputs { meas, op_msg: None, v_ego: v, thw_setpoint: state.thw_setpoint };
            cacc_command(&ci, params, &cfg.gains).unwrap_or(AccelCommand { a_cmd: 0.0 })
        }
    };

    if state.role.is_member() && inputs.tick.is_multiple_of(state.op_period) {
        if let Some(next) = state.successor() {
            let msg = ControlMessage {
                sender: state.id,
                seq: state.next_seq(),
                t_tx: t,
                speed: v.max(0.0),
                acceleration: inputs.ego.a.clamp(-MAX_MESSAGE_ACCEL, MAX_MESSAGE_ACCEL),
                commanded_decel: a_cmd.a_cmd.min(0.0),
                gap_setpoint_thw: state.base_thw,
            };
            out.push(Message::v2v(state.id, next, Payload::Control(msg)));
        }
    }

    if tactical_tick {
        if matches!(state.role, Role::Follower | Role::Trailing) {
            if let Some(prev) = state.predecessor() {
                let limits = match state.cohesion_behind {
                    Some(b) => state.own_limits.tighten(b),
                    None => state.own_limits,
                };
                let kind = ManagementKind::CohesionReport {
                    cohesion_max_speed: limits.max_speed,
                    cohesion_max_accel: limits.max_accel,
                };
                let p = state.management(t, kind);
                out.push(Message::v2v(state.id, prev, p));
            }
        }
        if let Some((config, remaining)) = state.pending_update.take() {
            if remaining > 0 {
                if let Some(prev) = state.predecessor() {
                    let p = state.management(t, ManagementKind::PlatoonUpdate { config: config.clone() });
                    out.push(Message::v2v(state.id, prev, p));
                    state.pending_update = Some((config, remaining - 1));
                }
            }
        }
        if !join_sent {
            if let Some((req, trailing)) = &state.join_request {
                out.push(Message::v2v(state.id, *trailing, Payload::JoinRequest(req.clone())));
            }
        }
    }

    Ok(DclOutput { a_cmd, outgoing: out })
}
