//! Acceptance criteria. Each criterion prints one PASS or FAIL line; the
//! process exits non-zero if any criterion fails.

mod common;

use platoon_core::assessment::*;
use platoon_core::channel::{Channel, ChannelConfig, ChannelOverrides, Topology};
use platoon_core::protocol::*;
use platoon_core::scenario::*;
use platoon_core::vehicle::{compute_thw, compute_ttc, time_to_contact, ControllerMode};
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::{Duration, Instant};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn scenario(name: &str) -> Scenario {
    bundled_scenario(name).expect("bundled scenario")
}

fn first_mode_time(trace: &Trace, id: TruckId, mode: ControllerMode) -> Option<f64> {
    let vi = trace.vehicle_index(id)?;
    trace.series(vi).find(|r| r.mode == Some(mode)).map(|r| r.t)
}

fn traffic_jam_roles() -> Outcome {
    let s = scenario("traffic_jam_tail");
    let cfg = SimConfig::default().with_ideal_channel();
    let mut slowest = Duration::ZERO;
    let mut worst_gap = f64::INFINITY;
    for role in [Role::Leader, Role::Follower, Role::Trailing] {
        let start = Instant::now();
        let out = run_closed_loop(&s, role, &cfg).map_err(|e| e.to_string())?;
        let elapsed = start.elapsed();
        slowest = slowest.max(elapsed);
        let r = &out.report;
        ensure(!r.collision && r.min_gap > 0.0, || format!("{role}: collision, min_gap {}", r.min_gap))?;
        worst_gap = worst_gap.min(r.min_gap);
        let lpd = out.trace.least_performing_decel;
        let leader = out.trace.vehicle_index(TruckId(1)).unwrap();
        let peak = out.trace.series(leader).map(|x| -x.a).fold(0.0, f64::max);
        ensure(peak <= lpd + 1e-9, || format!("{role}: leader decel {peak} exceeds {lpd}"))?;
        ensure(elapsed < Duration::from_secs(1), || format!("{role}: run took {elapsed:?}"))?;
    }
    Ok(format!("3 roles collision-free, min_gap {worst_gap:.2} m, slowest run {:.0} ms", slowest.as_secs_f64() * 1e3))
}

fn string_stability() -> Outcome {
    let s = scenario("string_chain");
    let with_ff = SimConfig::default().with_ideal_channel();
    let mut without_ff = with_ff.clone();
    without_ff.control.gains.ff = 0.0;
    let a = run_closed_loop(&s, Role::Leader, &with_ff).map_err(|e| e.to_string())?;
    let b = run_closed_loop(&s, Role::Leader, &without_ff).map_err(|e| e.to_string())?;
    let ra = &a.report.string_stability_ratios;
    let rb = &b.report.string_stability_ratios;
    ensure(ra.len() == 4, || format!("expected 4 pairs, got {}", ra.len()))?;
    let max_a = ra.iter().cloned().fold(0.0, f64::max);
    let max_b = rb.iter().cloned().fold(0.0, f64::max);
    ensure(max_a <= 1.0, || format!("with feedforward ratios {ra:?}"))?;
    ensure(max_b > 1.0, || format!("without feedforward ratios {rb:?}"))?;
    Ok(format!("max ratio {max_a:.3} with feedforward, {max_b:.3} without"))
}

fn join_cube() -> Result<(), String> {
    let base = PlatoonConfig {
        platoon_id: 1,
        members: vec![TruckId(1), TruckId(2), TruckId(3)],
        max_size: 7,
        least_performing_decel: 6.0,
        comm_update_rate_operational: 25.0,
        comm_update_rate_tactical: 2.0,
    };
    for bits in 0u8..16 {
        let (full, proto_ok, decel_ok, safe) = (bits & 1 != 0, bits & 2 != 0, bits & 4 != 0, bits & 8 != 0);
        let mut cfg = base.clone();
        if full {
            cfg.max_size = cfg.members.len();
        }
        let req = JoinRequest {
            candidate: TruckId(9),
            protocol_version: if proto_ok { PROTOCOL_VERSION } else { PROTOCOL_VERSION + 1 },
            max_decel_capability: if decel_ok { 5.0 } else { 4.9 },
            truck_length: 16.5,
        };
        let view = JoinView { config: &cfg, protocol_version: PROTOCOL_VERSION, situation_safe: safe };
        let resp = handle_join_request(&view, &req, DEFAULT_DECEL_TOLERANCE);
        let expected = if full {
            JoinReason::PlatoonFull
        } else if !proto_ok {
            JoinReason::IncompatibleProtocol
        } else if !decel_ok {
            JoinReason::DecelMismatch
        } else if !safe {
            JoinReason::UnsafeSituation
        } else {
            JoinReason::Accepted
        };
        ensure(resp.reason == expected, || format!("case {bits:04b}: got {:?}, expected {expected:?}", resp.reason))?;
        match &resp.config {
            Some(next) => {
                ensure(expected == JoinReason::Accepted, || format!("case {bits:04b}: config on rejection"))?;
                ensure(next.members[..3] == cfg.members[..] && next.trailing() == Some(TruckId(9)), || {
                    format!("case {bits:04b}: members {:?}", next.members)
                })?;
                ensure(next.least_performing_decel == 5.0, || format!("case {bits:04b}: lpd not recomputed"))?;
            }
            None => ensure(expected != JoinReason::Accepted, || format!("case {bits:04b}: acceptance without config"))?,
        }
    }
    Ok(())
}

fn role_invariants(roles: &[Role]) -> bool {
    let n = roles.len();
    n >= 2
        && roles[0] == Role::Leader
        && roles[n - 1] == Role::Trailing
        && roles[1..n - 1].iter().all(|r| *r == Role::Follower)
}

fn join_scenario(n: usize) -> Scenario {
    let mut s = scenario("candidate_join");
    let keep = s.platoon.clone();
    s.platoon = PlatoonInit { n_trucks: n, trucks: vec![keep.trucks[0].clone(); n], ..keep };
    s.duration = 20.0;
    s
}

/// Joins a candidate behind platoons of 2 to 6 trucks and checks how fast the
/// new configuration reaches every member.
fn join_convergence() -> Result<usize, String> {
    let mut worst_hops = 0;
    for n in 2..=6usize {
        let s = join_scenario(n);
        let out = run_closed_loop(&s, Role::Candidate, &SimConfig::default()).map_err(|e| e.to_string())?;
        let trace = &out.trace;
        let accept = trace
            .messages
            .iter()
            .find(|m| matches!(&m.msg.payload, Payload::JoinResponse(r) if r.is_accepted()))
            .ok_or_else(|| format!("n={n}: no accepted join response"))?;
        let Payload::JoinResponse(JoinResponse { config: Some(new_cfg), .. }) = &accept.msg.payload else {
            unreachable!()
        };
        let tactical = 1.0 / new_cfg.comm_update_rate_tactical;
        for (i, member) in new_cfg.members[..n - 1].iter().enumerate() {
            let hops_away = n - 1 - i;
            let got = trace
                .messages
                .iter()
                .filter(|m| m.delivered && m.msg.destination == Endpoint::Truck(*member))
                .find_map(|m| match &m.msg.payload {
                    Payload::Management(ManagementMessage { kind: ManagementKind::PlatoonUpdate { config }, .. }) => {
                        Some((m.t_deliver.unwrap(), config))
                    }
                    _ => None,
                })
                .ok_or_else(|| format!("n={n}: {member} never received the update"))?;
            ensure(got.1 == new_cfg, || format!("n={n}: {member} received a different config"))?;
            let hops = ((got.0 - accept.t_send) / tactical - 1e-9).ceil().max(0.0) as usize;
            ensure(hops <= hops_away && hops < new_cfg.len(), || {
                format!("n={n}: {member} updated after {hops} tactical periods, {hops_away} hops away")
            })?;
            worst_hops = worst_hops.max(hops);
        }
        let last = trace.n_ticks;
        let mut at_end: Vec<(f64, Role)> = trace
            .records
            .iter()
            .filter(|r| r.tick == last && trace.vehicles[r.vehicle].kind == VehicleKind::Truck)
            .map(|r| (r.x_front, r.role.unwrap()))
            .collect();
        at_end.sort_by(|a, b| b.0.total_cmp(&a.0));
        let roles: Vec<Role> = at_end.into_iter().map(|(_, r)| r).collect();
        ensure(roles.len() == n + 1 && role_invariants(&roles), || format!("n={n}: final roles {roles:?}"))?;
    }
    Ok(worst_hops)
}

fn join_protocol() -> Outcome {
    join_cube()?;
    for n in 2..=7usize {
        let roles: Vec<Role> = (0..n).map(|i| role_for_index(i, n)).collect();
        ensure(role_invariants(&roles), || format!("size {n}: {roles:?}"))?;
        if n < 7 {
            let after: Vec<Role> = (0..=n).map(|i| role_for_index(i, n + 1)).collect();
            let old_trailing = role_transition(Role::Trailing, RoleEvent::NewMemberBehind).map_err(|e| e.to_string())?;
            let joiner = role_transition(Role::Candidate, RoleEvent::JoinAccepted).map_err(|e| e.to_string())?;
            ensure(after[n - 1] == old_trailing && after[n] == joiner && role_invariants(&after), || {
                format!("size {n} after join: {after:?}")
            })?;
        }
    }
    let hops = join_convergence()?;
    Ok(format!("16/16 cube cases, roles valid for sizes 2-7, updates reached every member within {hops} tactical period(s), at most one per hop"))
}

fn open_loop_replay() -> Outcome {
    let cfg = SimConfig::default();
    let mut runs = 0;
    for (name, _) in bundled() {
        let s = scenario(name);
        for role in s.realizable_roles() {
            let closed = run_closed_loop(&s, role, &cfg).map_err(|e| format!("{name}/{role}: {e}"))?;
            let open = run_open_loop(&s, role, &cfg, &closed.inputs, &closed.outputs)
                .map_err(|e| format!("{name}/{role}: {e}"))?;
            ensure(open.consistency == Consistency::Pass, || format!("{name}/{role}: {:?}", open.consistency))?;
            runs += 1;
        }
    }
    // a tampered input must be caught
    let s = scenario("traffic_jam_tail");
    let closed = run_closed_loop(&s, Role::Follower, &cfg).map_err(|e| e.to_string())?;
    let mut inputs = closed.inputs.clone();
    let entry = inputs
        .entries
        .iter_mut()
        .find(|e| e.t > 6.0 && e.received.iter().any(|m| matches!(m.payload, Payload::Control(_))))
        .ok_or("no control message during braking")?;
    let tampered_tick = entry.tick;
    entry.received.retain(|m| !matches!(m.payload, Payload::Control(_)));
    let open = run_open_loop(&s, Role::Follower, &cfg, &inputs, &closed.outputs).map_err(|e| e.to_string())?;
    ensure(matches!(open.consistency, Consistency::Fail { first_divergence_tick } if first_divergence_tick >= tampered_tick), || {
        format!("tampered replay reported {:?}", open.consistency)
    })?;
    Ok(format!("{runs} scenario/role replays bit-identical, tampered replay detected"))
}

fn determinism() -> Outcome {
    let s = scenario("comm_degrade_tunnel");
    let cfg = SimConfig { seed: 42, ..SimConfig::default() };
    let a = run_closed_loop(&s, Role::Trailing, &cfg).map_err(|e| e.to_string())?;
    let b = run_closed_loop(&s, Role::Trailing, &cfg).map_err(|e| e.to_string())?;
    ensure(trace_csv(&a.trace) == trace_csv(&b.trace), || "trace CSVs differ".into())?;
    ensure(messages_csv(&a.trace) == messages_csv(&b.trace), || "message CSVs differ".into())?;
    ensure(report_json(&a.report) == report_json(&b.report), || "reports differ".into())?;
    let other = run_closed_loop(&s, Role::Trailing, &SimConfig { seed: 43, ..cfg.clone() }).map_err(|e| e.to_string())?;
    ensure(messages_csv(&a.trace) != messages_csv(&other.trace), || "seed has no effect on a lossy channel".into())?;

    let jam = scenario("traffic_jam_tail");
    let coarse = run_closed_loop(&jam, jam.ego_role, &SimConfig::default()).map_err(|e| e.to_string())?;
    let fine = run_closed_loop(&jam, jam.ego_role, &SimConfig { dt: 0.005, ..SimConfig::default() })
        .map_err(|e| e.to_string())?;
    let rel = (coarse.report.min_gap - fine.report.min_gap).abs() / coarse.report.min_gap;
    ensure(rel < 0.01, || format!("min_gap {} vs {} ({:.3} %)", coarse.report.min_gap, fine.report.min_gap, rel * 100.0))?;
    Ok(format!("byte-identical outputs, dt halving changes min_gap by {:.4} %", rel * 100.0))
}

fn channel_statistics() -> Outcome {
    let topology = Topology::new(vec![TruckId(1), TruckId(2)]);
    let msg = common::golden_messages().remove(0);
    let mut worst = 0.0f64;
    for (i, p) in [0.05, 0.2, 0.5, 0.8].into_iter().enumerate() {
        let cfg = ChannelConfig { loss_prob: p, ..ChannelConfig::default() };
        let mut ch = Channel::new(cfg, 1000 + i as u64);
        let n = 10_000;
        for k in 0..n {
            let t = k as f64 * 0.04;
            ch.send(msg.clone(), t, [], &topology).map_err(|e| e.to_string())?;
            ch.deliver_due(t);
        }
        let dropped = ch.log().iter().filter(|m| m.dropped).count();
        let rate = dropped as f64 / n as f64;
        worst = worst.max((rate - p).abs());
        ensure((rate - p).abs() <= 0.02, || format!("loss {p}: measured drop rate {rate}"))?;
    }

    let cfg = SimConfig {
        channel: ChannelOverrides { loss_prob: Some(1.0), ..ChannelOverrides::default() },
        ..SimConfig::default()
    };
    let limit = cfg.control.fallback.timeout + cfg.dt + 1e-9;
    let mut followers = 0;
    for name in ["traffic_jam_tail", "string_chain"] {
        let s = scenario(name);
        let out = run_closed_loop(&s, Role::Leader, &cfg).map_err(|e| e.to_string())?;
        for id in out.trace.platoon.iter().skip(1) {
            let t = first_mode_time(&out.trace, *id, ControllerMode::AccFallback)
                .ok_or_else(|| format!("{name}: {id} never fell back"))?;
            ensure(t <= limit, || format!("{name}: {id} fell back at {t} s, limit {limit} s"))?;
            followers += 1;
        }
    }
    Ok(format!("drop rate within {worst:.4} of loss_prob over 4x10^4 messages, {followers} followers fell back in time"))
}

/// First contact time by 1 ms stepping of both trajectories.
fn contact_by_stepping(gap: f64, ve: f64, ae: f64, vp: f64, ap: f64, horizon: f64) -> Option<f64> {
    let h = 1e-3;
    let pos = |v: f64, a: f64, t: f64| {
        let ts = if a < 0.0 { v / -a } else { f64::INFINITY };
        let t = t.min(ts);
        v * t + 0.5 * a * t * t
    };
    let steps = (horizon / h) as usize;
    (0..=steps).map(|k| k as f64 * h).find(|t| gap + pos(vp, ap, *t) - pos(ve, ae, *t) <= 0.0)
}

struct Synthetic {
    trace: Trace,
    min_gap: f64,
    min_thw: f64,
    min_ttc: f64,
    max_decel: f64,
    ratio: f64,
}

/// Car, leader and follower driving sinusoidal acceleration profiles; the
/// follower is the vehicle-under-test.
fn synthetic_trace(rng: &mut ChaCha8Rng) -> Synthetic {
    let dt = 0.05;
    let n_ticks = 400u64;
    let len = [4.5, 16.5, 16.5];
    let mut x = [0.0, -rng.random_range(8.0..40.0), 0.0];
    x[2] = x[1] - len[1] - rng.random_range(2.0..40.0);
    let mut v = [rng.random_range(10.0..25.0), rng.random_range(10.0..25.0), rng.random_range(10.0..25.0)];
    let amp: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.0..3.0));
    let freq: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.05..0.5));
    let event_t = if rng.random_bool(0.7) { Some(rng.random_range(0.0..15.0)) } else { None };

    let vehicles = vec![
        VehicleMeta { label: "car0".into(), kind: VehicleKind::Other, truck_id: None, length: len[0], max_decel: f64::INFINITY },
        VehicleMeta { label: "T1".into(), kind: VehicleKind::Truck, truck_id: Some(TruckId(1)), length: len[1], max_decel: 6.0 },
        VehicleMeta { label: "T2".into(), kind: VehicleKind::Truck, truck_id: Some(TruckId(2)), length: len[2], max_decel: 6.0 },
    ];
    let mut records = Vec::new();
    let (mut min_gap, mut min_thw, mut min_ttc, mut max_decel) = (f64::INFINITY, f64::INFINITY, f64::INFINITY, 0.0f64);
    for k in 0..=n_ticks {
        let t = k as f64 * dt;
        let a: [f64; 3] = std::array::from_fn(|i| if v[i] > 0.0 { amp[i] * (freq[i] * t * std::f64::consts::TAU).sin() } else { 0.0 });
        for i in 0..3 {
            let ahead = (i > 0).then(|| i - 1);
            let gap = ahead.map(|j| x[j] - len[j] - x[i]);
            let (thw, ttc) = match (gap, ahead) {
                (Some(g), Some(j)) if g >= 0.0 => (compute_thw(g, v[i]).unwrap(), compute_ttc(g, v[i], v[j]).ok()),
                (Some(_), _) => (None, Some(0.0)),
                _ => (None, None),
            };
            if i == 2 {
                let g = gap.unwrap();
                min_gap = min_gap.min(g);
                if g >= 0.0 && v[2] > 0.0 {
                    min_thw = min_thw.min(g / v[2]);
                }
                let closing = v[2] - v[1];
                let tt = if g < 0.0 { 0.0 } else if closing > 0.0 { g / closing } else { f64::INFINITY };
                min_ttc = min_ttc.min(tt);
                max_decel = max_decel.max(-a[2]);
            }
            records.push(VehicleRecord {
                tick: k,
                t,
                vehicle: i,
                lane: 0,
                x_front: x[i],
                v: v[i],
                a: a[i],
                a_cmd: (i > 0).then_some(a[i]),
                role: match i {
                    1 => Some(Role::Leader),
                    2 => Some(Role::Trailing),
                    _ => None,
                },
                mode: match i {
                    1 => Some(ControllerMode::ManualLead),
                    2 => Some(ControllerMode::Cacc),
                    _ => None,
                },
                thw_setpoint: (i > 0).then_some(1.5),
                op_msg_age: (i == 2).then_some(0.0),
                gap,
                thw,
                ttc,
            });
        }
        for i in 0..3 {
            let v_next = (v[i] + a[i] * dt).max(0.0);
            x[i] += 0.5 * (v[i] + v_next) * dt;
            v[i] = v_next;
        }
    }
    let events = event_t
        .map(|e| {
            let tick = (e / dt).ceil() as u64;
            vec![EventFiring { tick, t: tick as f64 * dt, index: 0, kind: "preceding_vehicle_brakes" }]
        })
        .unwrap_or_default();
    let ratio = if let Some(e) = events.first() {
        let (start, end) = (e.t, e.t + 30.0);
        let peak = |i: usize| {
            records
                .iter()
                .filter(|r| r.vehicle == i && r.t >= start - 1e-9 && r.t <= end + 1e-9)
                .fold(0.0f64, |m, r| m.max(r.a.abs()))
        };
        let (p, q) = (peak(1), peak(2));
        if p == 0.0 && q == 0.0 {
            1.0
        } else if p == 0.0 {
            f64::INFINITY
        } else {
            q / p
        }
    } else {
        1.0
    };
    let trace = Trace {
        dt,
        n_ticks,
        vehicles,
        records,
        messages: Vec::new(),
        events,
        platoon: vec![TruckId(1), TruckId(2)],
        least_performing_decel: 6.0,
    };
    Synthetic { trace, min_gap, min_thw, min_ttc, max_decel, ratio }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a.is_infinite() && b.is_infinite() && a.signum() == b.signum()) || (a - b).abs() <= tol
}

fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cases = 200;
    for case in 0..cases {
        let gap = rng.random_range(0.0..80.0);
        let ve = rng.random_range(0.0..35.0);
        let vp = rng.random_range(0.0..35.0);
        match compute_thw(gap, ve).unwrap() {
            Some(thw) => ensure(ve > 0.0 && close(thw * ve, gap, 1e-9), || format!("case {case}: thw {thw}"))?,
            None => ensure(ve == 0.0, || format!("case {case}: thw undefined at v {ve}"))?,
        }
        let ttc = compute_ttc(gap, ve, vp).unwrap();
        let horizon = 200.0;
        let stepped = contact_by_stepping(gap, ve, 0.0, vp, 0.0, horizon);
        match stepped {
            Some(t) => ensure((ttc - t).abs() <= 1e-3 + 1e-9, || format!("case {case}: ttc {ttc} vs stepped {t}"))?,
            None => ensure(ttc > horizon - 1e-3, || format!("case {case}: ttc {ttc}, no contact by stepping"))?,
        }

        let ap = -rng.random_range(0.5..8.0);
        let ae = rng.random_range(-3.0..1.0);
        let g = rng.random_range(0.5..60.0);
        let v1 = rng.random_range(5.0..30.0);
        let v2 = rng.random_range(5.0..30.0);
        let exact = time_to_contact(g, v2, ae, v1, ap);
        let stepped = contact_by_stepping(g, v2, ae, v1, ap, 60.0);
        match (exact, stepped) {
            (Some(a), Some(b)) => ensure((a - b).abs() <= 1e-3 + 1e-9, || format!("case {case}: contact {a} vs {b}"))?,
            (None, None) => {}
            (Some(a), None) => ensure(a > 60.0 - 1e-3, || format!("case {case}: contact at {a}, none by stepping"))?,
            (a, b) => return Err(format!("case {case}: contact {a:?} vs stepped {b:?}")),
        }

        let syn = synthetic_trace(&mut rng);
        let th = Thresholds::default();
        let r = evaluate_metrics(&syn.trace, TruckId(2), &th);
        ensure(close(r.min_gap, syn.min_gap, 1e-3), || format!("case {case}: min_gap {} vs {}", r.min_gap, syn.min_gap))?;
        ensure(close(r.min_thw, syn.min_thw, 1e-3), || format!("case {case}: min_thw {} vs {}", r.min_thw, syn.min_thw))?;
        ensure(close(r.min_ttc, syn.min_ttc, 1e-3), || format!("case {case}: min_ttc {} vs {}", r.min_ttc, syn.min_ttc))?;
        ensure(close(r.max_decel_used, syn.max_decel, 1e-3), || format!("case {case}: max decel {}", r.max_decel_used))?;
        ensure(r.collision == (syn.min_gap <= 0.0), || format!("case {case}: collision flag"))?;
        ensure(r.string_stability_ratios.len() == 1 && close(r.string_stability_ratios[0], syn.ratio, 1e-3), || {
            format!("case {case}: ratio {:?} vs {}", r.string_stability_ratios, syn.ratio)
        })?;
        let pass = syn.min_gap > 0.0 && syn.min_thw >= th.min_thw && syn.min_ttc >= th.min_ttc && syn.max_decel <= 6.0;
        ensure((r.verdict == Verdict::Pass) == pass, || format!("case {case}: verdict {:?}", r.verdict))?;
    }
    Ok(format!("{cases} randomized cases for thw, ttc, contact time and trace metrics"))
}

fn codec() -> Outcome {
    let mut runner = TestRunner::new(PropConfig { cases: 1000, failure_persistence: None, ..PropConfig::default() });
    runner
        .run(&common::message(), |msg| {
            let bytes = encode_message(&msg);
            proptest::prop_assert_eq!(decode_message(&bytes), Ok(msg));
            for n in 0..bytes.len() {
                let r = std::panic::catch_unwind(|| decode_message(&bytes[..n]));
                proptest::prop_assert!(matches!(r, Ok(Err(MalformedMessage(_)))));
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok("1000 randomized round trips, every truncation rejected as malformed".into())
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("traffic jam tail, every role", traffic_jam_roles),
        ("string stability with and without feedforward", string_stability),
        ("join protocol", join_protocol),
        ("open-loop consistency", open_loop_replay),
        ("determinism and refinement", determinism),
        ("channel statistics and fallback", channel_statistics),
        ("metric oracles", metric_oracles),
        ("codec round trip and truncation", codec),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
