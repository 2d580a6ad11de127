//! Plot-ready CSV tables and the JSON safety report.

use super::{CommRow, SafetyReport, SensorRow, Trace};
use crate::protocol::encode_message;

fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        x.to_string()
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    let bytes = w.into_inner().expect("in-memory writer");
    String::from_utf8(bytes).expect("csv output is UTF-8")
}

/// One row per (tick, vehicle).
pub fn trace_csv(trace: &Trace) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let header = [
        "tick", "t", "vehicle", "kind", "lane", "role", "mode", "x_front", "v", "a", "a_cmd", "thw_setpoint",
        "op_msg_age", "gap", "thw", "ttc",
    ];
    w.write_record(header).expect("in-memory write");
    for r in &trace.records {
        let meta = &trace.vehicles[r.vehicle];
        let kind = match meta.kind {
            super::VehicleKind::Truck => "truck",
            super::VehicleKind::Other => "other",
        };
        w.write_record([
            r.tick.to_string(),
            num(r.t),
            meta.label.clone(),
            kind.to_string(),
            r.lane.to_string(),
            r.role.map(|x| x.as_str().to_string()).unwrap_or_default(),
            r.mode.map(|m| m.as_str().to_string()).unwrap_or_default(),
            num(r.x_front),
            num(r.v),
            num(r.a),
            opt(r.a_cmd),
            opt(r.thw_setpoint),
            opt(r.op_msg_age),
            opt(r.gap),
            opt(r.thw),
            opt(r.ttc),
        ])
        .expect("in-memory write");
    }
    finish(w)
}

/// One row per transmitted message, in send order.
pub fn messages_csv(trace: &Trace) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["order", "t_send", "t_deliver", "dropped", "delivered", "source", "destination", "kind", "bytes"])
        .expect("in-memory write");
    for m in &trace.messages {
        w.write_record([
            m.order.to_string(),
            num(m.t_send),
            opt(m.t_deliver),
            m.dropped.to_string(),
            m.delivered.to_string(),
            m.msg.source.to_string(),
            m.msg.destination.to_string(),
            m.msg.payload.kind_name().to_string(),
            hex::encode(encode_message(&m.msg)),
        ])
        .expect("in-memory write");
    }
    finish(w)
}

pub fn report_json(report: &SafetyReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

fn report_cells(r: &SafetyReport) -> Vec<String> {
    let ratios = r.string_stability_ratios.iter().map(|x| num(*x)).collect::<Vec<_>>().join(";");
    vec![
        r.vehicle_under_test.to_string(),
        r.role.as_str().to_string(),
        r.collision.to_string(),
        num(r.min_gap),
        num(r.min_thw),
        num(r.min_ttc),
        num(r.max_decel_used),
        ratios,
        r.comm_stats.sent.to_string(),
        r.comm_stats.delivered.to_string(),
        r.comm_stats.dropped.to_string(),
        num(r.comm_stats.mean_latency),
        num(r.comm_stats.mean_age_at_use),
        num(r.comm_stats.max_age_at_use),
        format!("{:?}", r.verdict),
    ]
}

const REPORT_COLUMNS: [&str; 15] = [
    "vehicle", "role", "collision", "min_gap", "min_thw", "min_ttc", "max_decel_used", "string_stability_ratios",
    "sent", "delivered", "dropped", "mean_latency", "mean_age_at_use", "max_age_at_use", "verdict",
];

/// One row per channel setting of a communication sweep.
pub fn sweep_csv(rows: &[CommRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<&str> = vec![
        "row", "seed", "latency_mean", "latency_jitter", "loss_prob", "congestion_extra_latency",
        "congestion_threshold", "fallback_at",
    ];
    header.extend(REPORT_COLUMNS);
    w.write_record(&header).expect("in-memory write");
    for r in rows {
        let c = &r.channel;
        let mut rec = vec![
            r.index.to_string(),
            r.seed.to_string(),
            num(c.latency_mean),
            num(c.latency_jitter),
            num(c.loss_prob),
            num(c.congestion_extra_latency),
            c.congestion_threshold.to_string(),
            opt(r.fallback_at),
        ];
        rec.extend(report_cells(&r.report));
        w.write_record(&rec).expect("in-memory write");
    }
    finish(w)
}

/// One row per environment setting of a sensor sweep.
pub fn sensor_csv(rows: &[SensorRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<&str> =
        vec!["row", "visibility_factor", "lighting", "samples", "rms_range_error", "cut_in_detection_ticks"];
    header.extend(REPORT_COLUMNS);
    w.write_record(&header).expect("in-memory write");
    for r in rows {
        let lighting = match r.conditions.lighting {
            crate::scenario::Lighting::Day => "day",
            crate::scenario::Lighting::Night => "night",
        };
        let mut rec = vec![
            r.index.to_string(),
            num(r.conditions.visibility_factor),
            lighting.to_string(),
            r.samples.to_string(),
            num(r.rms_range_error),
            r.cut_in_detection_ticks.map(|t| t.to_string()).unwrap_or_default(),
        ];
        rec.extend(report_cells(&r.report));
        w.write_record(&rec).expect("in-memory write");
    }
    finish(w)
}
