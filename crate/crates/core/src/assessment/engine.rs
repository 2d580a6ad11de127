use super::{
    evaluate_metrics, EventFiring, InputLog, OutputEntry, OutputLog, SafetyReport, SimConfig, SimError, Trace,
    VehicleKind, VehicleMeta, VehicleRecord,
};
use crate::channel::{Channel, Topology};
use crate::protocol::{encode_message, Endpoint, I2VAdvisory, JoinRequest, Message, Payload, Role, TruckId};
use crate::rng::{self, Stream};
use crate::scenario::{EventKind, EventSchedule, Scenario};
use crate::vehicle::{
    compute_thw, compute_ttc, dcl_step, sensor_measure, step_dynamics, AccelCommand, CohesionLimits, DclCommand,
    DclInputs, DclState, EgoSense, TruckParams, TruckState,
};
use crate::world::{Body, BodyKind, World, PLATOON_LANE};

/// Trailing-truck deceleration beyond which a join is not considered safe.
const JOIN_SAFE_DECEL: f64 = 1.0;

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub trace: Trace,
    /// Inputs of the vehicle-under-test, for open-loop replay.
    pub inputs: InputLog,
    pub outputs: OutputLog,
    pub report: SafetyReport,
}

struct TruckSim {
    params: TruckParams,
    state: TruckState,
    dcl: DclState,
    rng: Stream,
    a_cmd: f64,
    commands: Vec<DclCommand>,
    inbox: Vec<Message>,
}

struct OtherSim {
    body: usize,
    brake: Option<(f64, f64)>,
    leave_at: Option<f64>,
}

pub(crate) fn truck_id(index: usize) -> TruckId {
    TruckId(index as u32 + 1)
}

/// Initial DCL state of truck `index` (members first, candidate last).
pub(crate) fn initial_dcl(s: &Scenario, index: usize, cfg: &SimConfig) -> DclState {
    let n = s.platoon.n_trucks;
    let (params, thw, config) = if index < n {
        (&s.platoon.trucks[index], s.platoon.initial_thw, Some(s.initial_config()))
    } else {
        let c = s.candidate.as_ref().expect("candidate index without candidate");
        (&c.params, c.thw, None)
    };
    let limits = CohesionLimits { max_speed: s.road.speed_limit, max_accel: params.max_accel };
    DclState::new(truck_id(index), config, thw, s.platoon.initial_speed, limits, cfg.dt)
}

pub(crate) fn prepare(s: &Scenario, role: Role, cfg: &SimConfig) -> Result<usize, SimError> {
    cfg.validate().map_err(|e| SimError::Config(e.into()))?;
    s.validate().map_err(|issues| SimError::Scenario(crate::scenario::ScenarioError::Validation(issues)))?;
    Ok(s.truck_index_for_role(role)?)
}

fn record(world: &World, tick: u64, t: f64, trucks: &[TruckSim], out: &mut Vec<VehicleRecord>) {
    for (i, b) in world.bodies.iter().enumerate() {
        let (gap, thw, ttc) = match world.nearest_ahead(i) {
            Some((j, gap)) => {
                let ahead = &world.bodies[j];
                match compute_thw(gap, b.v) {
                    Ok(thw) => (Some(gap), thw, compute_ttc(gap, b.v, ahead.v).ok()),
                    Err(_) => (Some(gap), None, Some(0.0)),
                }
            }
            None => (None, None, None),
        };
        let truck = trucks.get(i).filter(|_| b.is_truck());
        out.push(VehicleRecord {
            tick,
            t,
            vehicle: i,
            lane: b.lane,
            x_front: b.x_front,
            v: b.v,
            a: b.a,
            a_cmd: truck.map(|tr| tr.a_cmd),
            role: truck.map(|tr| tr.dcl.role),
            mode: truck.map(|tr| tr.dcl.mode),
            thw_setpoint: truck.map(|tr| tr.dcl.thw_setpoint),
            op_msg_age: truck.map(|tr| tr.dcl.last_op_msg_age),
            gap,
            thw,
            ttc,
        });
    }
}

/// Runs a scenario in closed loop with the truck in `role` as the
/// vehicle-under-test.
pub fn simulate(s: &Scenario, role: Role, cfg: &SimConfig) -> Result<SimOutput, SimError> {
    let vut = prepare(s, role, cfg)?;
    let dt = cfg.dt;
    let base = cfg.channel.apply(&s.channel);
    base.validate().map_err(|e| SimError::Config(e.into()))?;
    let mut channel = Channel::new(base, cfg.seed);

    let xs = s.initial_truck_positions();
    let mut world = World::default();
    let mut vehicles = Vec::new();
    let mut trucks = Vec::new();
    for (i, x) in xs.iter().enumerate() {
        let params = if i < s.platoon.n_trucks {
            s.platoon.trucks[i].clone()
        } else {
            s.candidate.as_ref().expect("candidate position").params.clone()
        };
        let id = truck_id(i);
        let dcl = initial_dcl(s, i, cfg);
        let mut state = TruckState::moving(id, *x, s.platoon.initial_speed, dcl.role, dcl.base_thw);
        state.controller_mode = dcl.mode;
        world.bodies.push(Body {
            kind: BodyKind::Truck(id),
            x_front: *x,
            v: state.v,
            a: 0.0,
            length: params.length,
            lane: PLATOON_LANE,
        });
        vehicles.push(VehicleMeta {
            label: id.to_string(),
            kind: VehicleKind::Truck,
            truck_id: Some(id),
            length: params.length,
            max_decel: params.max_decel,
        });
        trucks.push(TruckSim {
            rng: rng::stream(cfg.seed, rng::DOMAIN_SENSOR, id.0 as u64),
            params,
            state,
            dcl,
            a_cmd: 0.0,
            commands: Vec::new(),
            inbox: Vec::new(),
        });
    }
    let mut others: Vec<OtherSim> = Vec::new();
    for (i, o) in s.other_vehicles.iter().enumerate() {
        others.push(OtherSim { body: world.bodies.len(), brake: None, leave_at: None });
        world.bodies.push(Body { kind: BodyKind::Other, x_front: o.x_front, v: o.v, a: 0.0, length: o.length, lane: o.lane });
        vehicles.push(VehicleMeta {
            label: format!("V{i}"),
            kind: VehicleKind::Other,
            truck_id: None,
            length: o.length,
            max_decel: f64::INFINITY,
        });
    }

    let n_members = s.platoon.n_trucks;
    let has_candidate = s.candidate.is_some();
    let mut schedule = EventSchedule::new(&s.events);
    let n_ticks = (s.duration / dt).round() as u64;
    let mut records = Vec::with_capacity((n_ticks as usize + 1) * world.bodies.len());
    let mut firings = Vec::new();
    let mut inputs_log = Vec::with_capacity(n_ticks as usize + 1);
    let mut outputs_log = Vec::with_capacity(n_ticks as usize + 1);
    let initial_config = s.initial_config();

    for tick in 0..=n_ticks {
        let t = tick as f64 * dt;

        for o in &others {
            if o.leave_at.is_some_and(|at| t + 1e-9 >= at) {
                world.bodies[o.body].lane = PLATOON_LANE + 1;
            }
        }

        let fired = schedule.fire(t, |i| (i < n_members).then(|| world.nearest_ahead(i).map(|(_, g)| g)).flatten());
        for ev in fired {
            firings.push(EventFiring { tick, t, index: ev.index, kind: ev.kind.name() });
            match ev.kind {
                EventKind::PrecedingVehicleBrakes { vehicle, decel, target_speed } => {
                    let o = &mut others[vehicle];
                    o.brake = Some((decel, target_speed));
                    if world.bodies[o.body].v > target_speed {
                        world.bodies[o.body].a = -decel;
                    }
                }
                EventKind::CutIn { between_index, entry_speed, entry_gap_fraction, length, dwell } => {
                    let ahead = &world.bodies[between_index];
                    let behind = &world.bodies[between_index + 1];
                    let gap = ahead.x_rear() - behind.x_front;
                    let x_front = ahead.x_rear() - entry_gap_fraction * gap;
                    let v = entry_speed.unwrap_or(behind.v);
                    others.push(OtherSim { body: world.bodies.len(), brake: None, leave_at: dwell.map(|d| t + d) });
                    vehicles.push(VehicleMeta {
                        label: format!("V{}", vehicles.len() - trucks.len()),
                        kind: VehicleKind::Other,
                        truck_id: None,
                        length,
                        max_decel: f64::INFINITY,
                    });
                    world.bodies.push(Body { kind: BodyKind::Other, x_front, v, a: 0.0, length, lane: PLATOON_LANE });
                }
                EventKind::CandidateJoinRequest { protocol_version, max_decel_capability } => {
                    let Some(c) = &s.candidate else { continue };
                    let cand = n_members;
                    let chain = world.truck_chain();
                    let me = truck_id(cand);
                    let pos = chain.iter().position(|id| *id == me).expect("candidate on the road");
                    if pos == 0 {
                        continue;
                    }
                    let request = JoinRequest {
                        candidate: me,
                        protocol_version: protocol_version.unwrap_or(c.protocol_version),
                        max_decel_capability: max_decel_capability.unwrap_or(c.params.max_decel),
                        truck_length: c.params.length,
                    };
                    trucks[cand].commands.push(DclCommand::RequestJoin { request, trailing: chain[pos - 1] });
                }
                EventKind::I2VBroadcast { speed_limit, advised_thw, traffic_condition } => {
                    if !s.i2v_present {
                        continue;
                    }
                    let msg = Message {
                        source: Endpoint::Infrastructure,
                        destination: Endpoint::Broadcast,
                        payload: Payload::I2V(I2VAdvisory { t_tx: t, speed_limit, advised_thw, traffic_condition }),
                    };
                    let topo = Topology::new(world.truck_chain());
                    channel.send(msg, t, std::iter::empty(), &topo).map_err(|e| SimError::Channel { tick, source: e })?;
                }
                EventKind::ChannelDegrade(o) => channel.degrade(&o),
                EventKind::LeaderThwAdjust { new_thw, reason } => {
                    if let Some(leader) = trucks.iter_mut().find(|tr| tr.dcl.role == Role::Leader) {
                        leader.commands.push(DclCommand::ThwAdjust { new_thw, reason });
                    }
                }
            }
        }

        for m in channel.deliver_due(t + 1e-9) {
            match m.msg.destination {
                Endpoint::Truck(id) => {
                    if let Some(tr) = trucks.get_mut(id.0 as usize - 1) {
                        tr.inbox.push(m.msg);
                    }
                }
                Endpoint::Broadcast => {
                    for tr in trucks.iter_mut() {
                        tr.inbox.push(m.msg.clone());
                    }
                }
                Endpoint::Infrastructure => {}
            }
        }

        let topology = Topology::new(world.truck_chain());
        let front = trucks.iter().position(|tr| tr.dcl.role == Role::Leader).unwrap_or(0);
        let rear = if has_candidate { n_members } else { trucks.len() - 1 };
        let lane_clear = world.lane_clear_between(front, rear);
        let trailing_calm = trucks
            .iter()
            .find(|tr| tr.dcl.role == Role::Trailing)
            .is_none_or(|tr| tr.state.a >= -JOIN_SAFE_DECEL);
        let situation_safe = lane_clear && trailing_calm;

        for (i, tr) in trucks.iter_mut().enumerate() {
            let meas = sensor_measure(&world, i, tr.dcl.role, &tr.params, &s.environment, &mut tr.rng);
            let inputs = DclInputs {
                tick,
                t,
                ego: EgoSense { v: tr.state.v, a: tr.state.a },
                meas,
                received: std::mem::take(&mut tr.inbox),
                commands: std::mem::take(&mut tr.commands),
                situation_safe,
            };
            let out = dcl_step(&mut tr.dcl, &inputs, &tr.params, &cfg.control)
                .map_err(|e| SimError::Dcl { truck: tr.state.truck_id, tick, source: e })?;
            tr.a_cmd = out.a_cmd.a_cmd;
            tr.state.role = tr.dcl.role;
            tr.state.controller_mode = tr.dcl.mode;
            tr.state.thw_setpoint = tr.dcl.thw_setpoint;
            tr.state.last_op_msg_age = tr.dcl.last_op_msg_age;
            if i == vut {
                outputs_log.push(OutputEntry {
                    tick,
                    a_cmd: out.a_cmd.a_cmd,
                    messages: out.outgoing.iter().map(encode_message).collect(),
                });
                inputs_log.push(inputs);
            }
            let x = tr.state.x_front;
            for msg in out.outgoing {
                channel
                    .send(msg, t, s.environment.active_at(x), &topology)
                    .map_err(|e| SimError::Channel { tick, source: e })?;
            }
        }

        record(&world, tick, t, &trucks, &mut records);

        for (i, tr) in trucks.iter_mut().enumerate() {
            let cmd = if cfg.hold_speed { AccelCommand { a_cmd: 0.0 } } else { AccelCommand { a_cmd: tr.a_cmd } };
            tr.state = step_dynamics(&tr.state, &tr.params, cmd, dt);
            let b = &mut world.bodies[i];
            b.x_front = tr.state.x_front;
            b.v = tr.state.v;
            b.a = tr.state.a;
        }
        for o in &others {
            let b = &mut world.bodies[o.body];
            let v0 = b.v;
            let v1 = match o.brake {
                Some((decel, target)) if v0 > target => (v0 - decel * dt).max(target),
                _ => v0,
            };
            b.x_front += 0.5 * (v0 + v1) * dt;
            b.v = v1;
            b.a = match o.brake {
                Some((decel, target)) if v1 > target => -decel,
                _ => 0.0,
            };
        }
    }

    let trace = Trace {
        dt,
        n_ticks,
        vehicles,
        records,
        messages: channel.into_log(),
        events: firings,
        platoon: initial_config.members.clone(),
        least_performing_decel: initial_config.least_performing_decel,
    };
    let vut_id = truck_id(vut);
    let report = evaluate_metrics(&trace, vut_id, &cfg.thresholds);
    Ok(SimOutput {
        inputs: InputLog { truck: vut_id, role, dt, entries: inputs_log },
        outputs: OutputLog { entries: outputs_log },
        trace,
        report,
    })
}
