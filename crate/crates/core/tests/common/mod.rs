#![allow(dead_code)]

use platoon_core::protocol::*;
use proptest::prelude::*;

pub fn truck_id() -> impl Strategy<Value = TruckId> {
    (1u32..1000).prop_map(TruckId)
}

fn time() -> impl Strategy<Value = f64> {
    0.0..1.0e4
}

pub fn config() -> impl Strategy<Value = PlatoonConfig> {
    (2usize..=7)
        .prop_flat_map(|max_size| {
            (
                any::<u32>(),
                proptest::sample::subsequence((1u32..=40).collect::<Vec<_>>(), 2..=max_size).prop_shuffle(),
                Just(max_size),
                0.1..10.0f64,
                1.0..50.0f64,
                0.1..10.0f64,
            )
        })
        .prop_map(|(platoon_id, members, max_size, lpd, op, tac)| PlatoonConfig {
            platoon_id,
            members: members.into_iter().map(TruckId).collect(),
            max_size,
            least_performing_decel: lpd,
            comm_update_rate_operational: op,
            comm_update_rate_tactical: tac,
        })
}

fn intent_reason() -> impl Strategy<Value = IntentReason> {
    prop_oneof![
        Just(IntentReason::TrafficJamAhead),
        Just(IntentReason::Downhill),
        Just(IntentReason::DriverPreference),
        Just(IntentReason::Other),
    ]
}

fn management_kind() -> impl Strategy<Value = ManagementKind> {
    prop_oneof![
        (-12.0..=0.0f64, 0.0..50.0f64, intent_reason()).prop_map(|(d, v, r)| ManagementKind::SpeedProfileIntent {
            intent_decel: d,
            intent_target_speed: v,
            intent_reason: r,
        }),
        (0.1..50.0f64, 0.1..5.0f64)
            .prop_map(|(s, a)| ManagementKind::CohesionReport { cohesion_max_speed: s, cohesion_max_accel: a }),
        config().prop_map(|config| ManagementKind::PlatoonUpdate { config }),
        Just(ManagementKind::LeaveAnnounce),
    ]
}

fn join_response() -> impl Strategy<Value = JoinResponse> {
    prop_oneof![
        config().prop_map(JoinResponse::accepted),
        prop_oneof![
            Just(JoinReason::PlatoonFull),
            Just(JoinReason::IncompatibleProtocol),
            Just(JoinReason::DecelMismatch),
            Just(JoinReason::UnsafeSituation),
        ]
        .prop_map(JoinResponse::rejected),
    ]
}

fn advisory() -> impl Strategy<Value = I2VAdvisory> {
    (
        time(),
        proptest::option::of(1.0..40.0f64),
        proptest::option::of(0.5..4.0f64),
        proptest::option::of(prop_oneof![Just(TrafficCondition::Free), Just(TrafficCondition::JamAhead)]),
    )
        .prop_filter("advisory needs a field", |(_, s, h, c)| s.is_some() || h.is_some() || c.is_some())
        .prop_map(|(t_tx, speed_limit, advised_thw, traffic_condition)| I2VAdvisory {
            t_tx,
            speed_limit,
            advised_thw,
            traffic_condition,
        })
}

fn v2v_payload() -> impl Strategy<Value = Payload> {
    prop_oneof![
        (truck_id(), any::<u32>(), time(), 0.0..50.0f64, -12.0..=12.0f64, -12.0..=0.0f64, 0.8..5.0f64).prop_map(
            |(sender, seq, t_tx, speed, acceleration, commanded_decel, gap_setpoint_thw)| {
                Payload::Control(ControlMessage {
                    sender,
                    seq,
                    t_tx,
                    speed,
                    acceleration,
                    commanded_decel,
                    gap_setpoint_thw,
                })
            }
        ),
        (truck_id(), any::<u32>(), time(), management_kind())
            .prop_map(|(sender, seq, t_tx, kind)| Payload::Management(ManagementMessage { sender, seq, t_tx, kind })),
        (truck_id(), any::<u16>(), 0.1..12.0f64, 1.0..30.0f64).prop_map(|(candidate, v, d, l)| {
            Payload::JoinRequest(JoinRequest {
                candidate,
                protocol_version: v,
                max_decel_capability: d,
                truck_length: l,
            })
        }),
        join_response().prop_map(Payload::JoinResponse),
    ]
}

/// Any message that passes `Message::validate`.
pub fn message() -> impl Strategy<Value = Message> {
    prop_oneof![
        4 => (truck_id(), truck_id(), v2v_payload()).prop_map(|(a, b, p)| Message::v2v(a, b, p)),
        1 => advisory().prop_map(|a| Message {
            source: Endpoint::Infrastructure,
            destination: Endpoint::Broadcast,
            payload: Payload::I2V(a),
        }),
    ]
}

/// One message of every kind, with fixed field values.
pub fn golden_messages() -> Vec<Message> {
    let cfg = PlatoonConfig {
        platoon_id: 1,
        members: vec![TruckId(1), TruckId(2), TruckId(3), TruckId(4)],
        max_size: 7,
        least_performing_decel: 5.5,
        comm_update_rate_operational: 25.0,
        comm_update_rate_tactical: 2.0,
    };
    let mgmt = |kind| {
        Message::v2v(TruckId(2), TruckId(1), Payload::Management(ManagementMessage { sender: TruckId(3), seq: 17, t_tx: 5.5, kind }))
    };
    vec![
        Message::v2v(
            TruckId(1),
            TruckId(2),
            Payload::Control(ControlMessage {
                sender: TruckId(1),
                seq: 125,
                t_tx: 5.0,
                speed: 22.22,
                acceleration: -1.5,
                commanded_decel: -3.0,
                gap_setpoint_thw: 1.5,
            }),
        ),
        Message::v2v(
            TruckId(1),
            TruckId(2),
            Payload::Management(ManagementMessage {
                sender: TruckId(1),
                seq: 10,
                t_tx: 30.0,
                kind: ManagementKind::SpeedProfileIntent {
                    intent_decel: -3.0,
                    intent_target_speed: 0.0,
                    intent_reason: IntentReason::TrafficJamAhead,
                },
            }),
        ),
        mgmt(ManagementKind::CohesionReport { cohesion_max_speed: 22.22, cohesion_max_accel: 1.5 }),
        mgmt(ManagementKind::PlatoonUpdate { config: cfg.clone() }),
        mgmt(ManagementKind::LeaveAnnounce),
        Message::v2v(
            TruckId(4),
            TruckId(3),
            Payload::JoinRequest(JoinRequest {
                candidate: TruckId(4),
                protocol_version: PROTOCOL_VERSION,
                max_decel_capability: 5.5,
                truck_length: 16.5,
            }),
        ),
        Message::v2v(TruckId(3), TruckId(4), Payload::JoinResponse(JoinResponse::accepted(cfg))),
        Message::v2v(TruckId(3), TruckId(4), Payload::JoinResponse(JoinResponse::rejected(JoinReason::DecelMismatch))),
        Message {
            source: Endpoint::Infrastructure,
            destination: Endpoint::Broadcast,
            payload: Payload::I2V(I2VAdvisory {
                t_tx: 30.0,
                speed_limit: Some(13.89),
                advised_thw: Some(1.8),
                traffic_condition: Some(TrafficCondition::JamAhead),
            }),
        },
    ]
}
