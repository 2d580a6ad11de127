use platoon_core::assessment::*;
use platoon_core::channel::ChannelOverrides;
use platoon_core::protocol::Role;
use platoon_core::scenario::{bundled_scenario, EnvironmentConditions, Lighting, Scenario};

fn noisy_pair(sigma: f64) -> Scenario {
    let mut s = Scenario::cruise("noisy", 2, 1.5, 22.22, 110.0);
    for t in &mut s.platoon.trucks {
        t.sensor_noise_sigma_range = sigma;
    }
    s
}

#[test]
fn noiseless_sensor_has_zero_error() {
    let s = noisy_pair(0.0);
    let env = [EnvironmentConditions { visibility_factor: 3.0, ..Default::default() }];
    let rows = run_sensor_test(&s, Role::Trailing, &SimConfig::default(), &env).unwrap();
    assert_eq!(rows[0].rms_range_error, 0.0);
}

#[test]
fn sensor_rms_matches_configured_sigma() {
    let s = noisy_pair(0.2);
    let env = [
        EnvironmentConditions::default(),
        EnvironmentConditions { visibility_factor: 2.0, ..Default::default() },
        EnvironmentConditions { lighting: Lighting::Night, ..Default::default() },
    ];
    let rows = run_sensor_test(&s, Role::Trailing, &SimConfig { seed: 5, ..SimConfig::default() }, &env).unwrap();
    assert!(rows[0].samples >= 10_000);
    let rel = |r: &SensorRow, expected: f64| (r.rms_range_error - expected).abs() / expected;
    assert!(rel(&rows[0], 0.2) < 0.15, "rms {}", rows[0].rms_range_error);
    assert!(rel(&rows[1], 0.4) < 0.15, "rms {}", rows[1].rms_range_error);
    assert!(rows[2].rms_range_error > rows[0].rms_range_error);
}

#[test]
fn cut_in_is_flagged_on_its_first_tick() {
    let s = bundled_scenario("cut_in_follower_gap").unwrap();
    let rows = run_sensor_test(&s, Role::Follower, &SimConfig::default(), &[EnvironmentConditions::default()]).unwrap();
    assert_eq!(rows[0].cut_in_detection_ticks, Some(0));
}

#[test]
fn comm_sweep_has_one_row_per_setting() {
    let s = bundled_scenario("traffic_jam_tail").unwrap();
    let sweep: Vec<ChannelOverrides> =
        [0.0, 0.3, 1.0].iter().map(|p| ChannelOverrides { loss_prob: Some(*p), ..Default::default() }).collect();
    let cfg = SimConfig { seed: 9, ..SimConfig::default() };
    let rows = run_comm_test(&s, Role::Trailing, &cfg, &sweep).unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0].report.comm_stats.dropped, 0);
    assert_eq!(rows[2].report.comm_stats.dropped, rows[2].report.comm_stats.sent);
    assert!(rows[0].fallback_at.is_none());
    assert!(rows[2].fallback_at.unwrap() <= cfg.control.fallback.timeout + cfg.dt + 1e-9);
    let seeds: std::collections::HashSet<u64> = rows.iter().map(|r| r.seed).collect();
    assert_eq!(seeds.len(), 3);
    let table = sweep_csv(&rows);
    assert_eq!(table.lines().count(), 4);
}

#[test]
fn empty_sweeps_are_rejected() {
    let s = bundled_scenario("traffic_jam_tail").unwrap();
    assert_eq!(run_comm_test(&s, Role::Trailing, &SimConfig::default(), &[]).unwrap_err(), SimError::EmptySweep);
    assert_eq!(run_sensor_test(&s, Role::Trailing, &SimConfig::default(), &[]).unwrap_err(), SimError::EmptySweep);
}

#[test]
fn unrealizable_role_is_an_error() {
    let s = Scenario::cruise("pair", 2, 1.5, 22.22, 5.0);
    assert!(matches!(run_closed_loop(&s, Role::Follower, &SimConfig::default()), Err(SimError::Role(_))));
    assert!(matches!(run_closed_loop(&s, Role::Candidate, &SimConfig::default()), Err(SimError::Role(_))));
}

#[test]
fn invalid_run_configuration_is_an_error() {
    let s = Scenario::cruise("pair", 2, 1.5, 22.22, 5.0);
    let cfg = SimConfig { dt: 0.0, ..SimConfig::default() };
    assert!(matches!(run_closed_loop(&s, Role::Leader, &cfg), Err(SimError::Config(_))));
}

#[test]
fn open_loop_needs_every_tick() {
    let s = Scenario::cruise("pair", 2, 1.5, 22.22, 2.0);
    let cfg = SimConfig::default();
    let closed = run_closed_loop(&s, Role::Trailing, &cfg).unwrap();
    let mut inputs = closed.inputs.clone();
    inputs.entries.remove(50);
    let err = run_open_loop(&s, Role::Trailing, &cfg, &inputs, &closed.outputs).unwrap_err();
    assert_eq!(err, SimError::InputLogGap { tick: 50 });
}

#[test]
fn held_speed_overrides_set_points() {
    let s = bundled_scenario("traffic_jam_tail").unwrap();
    let cfg = SimConfig { hold_speed: true, ..SimConfig::default().with_ideal_channel() };
    let out = run_closed_loop(&s, Role::Follower, &cfg).unwrap();
    let vi = out.trace.vehicle_index(out.report.vehicle_under_test).unwrap();
    assert!(out.trace.series(vi).all(|r| r.v == 22.22));
    assert!(out.report.collision);
    assert_eq!(out.report.verdict, Verdict::Fail);
}

#[test]
fn empty_road_reports_infinite_margins() {
    let s = Scenario::cruise("pair", 2, 1.5, 22.22, 5.0);
    let out = run_closed_loop(&s, Role::Leader, &SimConfig::default()).unwrap();
    assert!(out.report.min_gap.is_infinite());
    assert_eq!(out.report.string_stability_ratios, vec![1.0]);
    let json = report_json(&out.report);
    assert!(json.contains("\"min_ttc\": \"inf\""), "{json}");
    assert_eq!(out.report.recompute_verdict(), out.report.verdict);
}

#[test]
fn trace_table_has_one_row_per_vehicle_and_tick() {
    let s = bundled_scenario("traffic_jam_tail").unwrap();
    let out = run_closed_loop(&s, Role::Leader, &SimConfig::default()).unwrap();
    let csv = trace_csv(&out.trace);
    let rows = csv.lines().count() - 1;
    assert_eq!(rows as u64, (out.trace.n_ticks + 1) * out.trace.vehicles.len() as u64);
    assert!(csv.starts_with("tick,t,vehicle,kind,lane,role,mode,"));
    let messages = messages_csv(&out.trace);
    assert_eq!(messages.lines().count() - 1, out.report.comm_stats.sent);
}
