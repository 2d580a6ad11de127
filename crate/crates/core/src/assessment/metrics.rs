use super::{CommStats, SafetyReport, Thresholds, Trace, Verdict};
use crate::protocol::{Role, TruckId};

/// Length of the string-stability window after the first event, s.
pub const STRING_WINDOW: f64 = 30.0;

pub(crate) fn verdict(
    collision: bool,
    min_thw: f64,
    min_ttc: f64,
    max_decel_used: f64,
    max_decel_limit: f64,
    th: &Thresholds,
) -> Verdict {
    let ok = !collision && min_thw >= th.min_thw && min_ttc >= th.min_ttc && max_decel_used <= max_decel_limit + 1e-9;
    if ok {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

/// Ratio of peak |acceleration| of each initial platoon member to its
/// predecessor's, over the window starting at the first event. A window with
/// no signal counts as 1.
pub fn string_stability_ratios(trace: &Trace) -> Vec<f64> {
    let pairs = trace.platoon.len().saturating_sub(1);
    let Some(start) = trace.events.first().map(|e| e.t) else {
        return vec![1.0; pairs];
    };
    let end = start + STRING_WINDOW;
    let peaks: Vec<f64> = trace
        .platoon
        .iter()
        .map(|id| {
            let vi = trace.vehicle_index(*id).expect("platoon member in trace");
            trace
                .series(vi)
                .filter(|r| r.t >= start - 1e-9 && r.t <= end + 1e-9)
                .map(|r| r.a.abs())
                .fold(0.0, f64::max)
        })
        .collect();
    peaks
        .windows(2)
        .map(|w| match (w[0], w[1]) {
            (a, b) if a == 0.0 && b == 0.0 => 1.0,
            (0.0, _) => f64::INFINITY,
            (a, b) => b / a,
        })
        .collect()
}

/// Safety metrics of the vehicle-under-test; a pure function of the trace.
pub fn evaluate_metrics(trace: &Trace, vut: TruckId, thresholds: &Thresholds) -> SafetyReport {
    let vi = trace.vehicle_index(vut).expect("vehicle-under-test in trace");
    let mut role = None;
    let mut min_gap = f64::INFINITY;
    let mut min_thw = f64::INFINITY;
    let mut min_ttc = f64::INFINITY;
    let mut max_decel_used: f64 = 0.0;
    let mut age_sum = 0.0;
    let mut age_n = 0usize;
    let mut age_max: f64 = 0.0;
    for r in trace.series(vi) {
        role.get_or_insert(r.role.unwrap_or(Role::Candidate));
        if let Some(g) = r.gap {
            min_gap = min_gap.min(g);
        }
        if let Some(t) = r.thw {
            min_thw = min_thw.min(t);
        }
        if let Some(t) = r.ttc {
            min_ttc = min_ttc.min(t);
        }
        max_decel_used = max_decel_used.max(-r.a);
        if matches!(r.role, Some(Role::Follower | Role::Trailing)) {
            if let Some(a) = r.op_msg_age {
                age_sum += a;
                age_n += 1;
                age_max = age_max.max(a);
            }
        }
    }
    let collision = min_gap <= 0.0;
    let delivered: Vec<f64> = trace
        .messages
        .iter()
        .filter(|m| m.delivered)
        .filter_map(|m| m.t_deliver.map(|d| d - m.t_send))
        .collect();
    let comm_stats = CommStats {
        sent: trace.messages.len(),
        delivered: delivered.len(),
        dropped: trace.messages.iter().filter(|m| m.dropped).count(),
        mean_latency: if delivered.is_empty() { 0.0 } else { delivered.iter().sum::<f64>() / delivered.len() as f64 },
        mean_age_at_use: if age_n == 0 { 0.0 } else { age_sum / age_n as f64 },
        max_age_at_use: age_max,
    };
    let max_decel_limit = trace.vehicles[vi].max_decel;
    SafetyReport {
        vehicle_under_test: vut,
        role: role.unwrap_or(Role::Candidate),
        collision,
        min_gap,
        min_thw,
        min_ttc,
        max_decel_used,
        max_decel_limit,
        string_stability_ratios: string_stability_ratios(trace),
        comm_stats,
        thresholds: *thresholds,
        verdict: verdict(collision, min_thw, min_ttc, max_decel_used, max_decel_limit, thresholds),
    }
}
