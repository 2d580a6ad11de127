use super::engine::{initial_dcl, prepare, simulate};
use super::{OutputEntry, OutputLog, SafetyReport, SimConfig, SimError, SimOutput, InputLog};
use crate::channel::{ChannelConfig, ChannelOverrides};
use crate::protocol::{encode_message, Role};
use crate::rng;
use crate::scenario::{EnvironmentConditions, Scenario};
use crate::vehicle::{dcl_step, ControllerMode};
use serde::Serialize;

/// Closed-loop test: set points actuate the trucks and messages go over the
/// simulated channel.
pub fn run_closed_loop(s: &Scenario, role: Role, cfg: &SimConfig) -> Result<SimOutput, SimError> {
    simulate(s, role, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Consistency {
    Pass,
    Fail { first_divergence_tick: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpenLoopResult {
    pub outputs: OutputLog,
    pub consistency: Consistency,
}

impl OpenLoopResult {
    pub fn setpoints(&self) -> Vec<f64> {
        self.outputs.entries.iter().map(|e| e.a_cmd).collect()
    }
}

/// Open-loop test: replays recorded inputs through the vehicle-under-test's
/// DCL without actuation and diffs set points and encoded messages against
/// `reference` bit for bit.
pub fn run_open_loop(
    s: &Scenario,
    role: Role,
    cfg: &SimConfig,
    inputs: &InputLog,
    reference: &OutputLog,
) -> Result<OpenLoopResult, SimError> {
    let vut = prepare(s, role, cfg)?;
    let n_ticks = (s.duration / cfg.dt).round() as u64;
    for k in 0..=n_ticks {
        if inputs.entries.get(k as usize).is_none_or(|e| e.tick != k) {
            return Err(SimError::InputLogGap { tick: k });
        }
    }
    let params = if vut < s.platoon.n_trucks {
        &s.platoon.trucks[vut]
    } else {
        &s.candidate.as_ref().expect("candidate").params
    };
    let mut state = initial_dcl(s, vut, cfg);
    let mut outputs = OutputLog::default();
    for entry in &inputs.entries {
        let out = dcl_step(&mut state, entry, params, &cfg.control)
            .map_err(|e| SimError::Dcl { truck: state.id, tick: entry.tick, source: e })?;
        outputs.entries.push(OutputEntry {
            tick: entry.tick,
            a_cmd: out.a_cmd.a_cmd,
            messages: out.outgoing.iter().map(encode_message).collect(),
        });
    }
    let mismatch = outputs
        .entries
        .iter()
        .zip(&reference.entries)
        .find(|(a, b)| a.a_cmd.to_bits() != b.a_cmd.to_bits() || a.messages != b.messages)
        .map(|(a, _)| a.tick);
    let consistency = match mismatch {
        Some(tick) => Consistency::Fail { first_divergence_tick: tick },
        None if outputs.entries.len() != reference.entries.len() => {
            Consistency::Fail { first_divergence_tick: outputs.entries.len().min(reference.entries.len()) as u64 }
        }
        None => Consistency::Pass,
    };
    Ok(OpenLoopResult { outputs, consistency })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommRow {
    pub index: usize,
    pub seed: u64,
    pub channel: ChannelConfig,
    /// First time the vehicle-under-test ran in ACC fallback.
    pub fallback_at: Option<f64>,
    pub report: SafetyReport,
}

/// Per-row seed of a sweep.
pub fn sweep_seed(master: u64, index: usize) -> u64 {
    rng::derive_seed(master, rng::DOMAIN_SWEEP, index as u64)
}

/// Configuration of one sweep row: the row's channel overrides layered over the
/// configuration's, with a seed derived from the master seed.
pub(crate) fn row_config(cfg: &SimConfig, sweep: &ChannelOverrides, index: usize) -> SimConfig {
    let mut row = cfg.clone();
    row.seed = sweep_seed(cfg.seed, index);
    row.channel.merge(sweep);
    row
}

/// Communication test: one closed-loop run per channel setting.
pub fn run_comm_test(
    s: &Scenario,
    role: Role,
    cfg: &SimConfig,
    sweep: &[ChannelOverrides],
) -> Result<Vec<CommRow>, SimError> {
    if sweep.is_empty() {
        return Err(SimError::EmptySweep);
    }
    sweep
        .iter()
        .enumerate()
        .map(|(index, o)| {
            let row = row_config(cfg, o, index);
            let out = simulate(s, role, &row)?;
            let vi = out.trace.vehicle_index(out.report.vehicle_under_test).expect("vut");
            let fallback_at =
                out.trace.series(vi).find(|r| r.mode == Some(ControllerMode::AccFallback)).map(|r| r.t);
            Ok(CommRow { index, seed: row.seed, channel: row.channel.apply(&s.channel), fallback_at, report: out.report })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensorRow {
    pub index: usize,
    pub conditions: EnvironmentConditions,
    /// Ticks with both a valid measurement and a true target.
    pub samples: usize,
    pub rms_range_error: f64,
    /// Ticks from the first cut-in until the vehicle-under-test flags it.
    pub cut_in_detection_ticks: Option<u64>,
    pub report: SafetyReport,
}

/// Sensor test: compares the vehicle-under-test's measurements with the
/// ground truth under each environment setting.
pub fn run_sensor_test(
    s: &Scenario,
    role: Role,
    cfg: &SimConfig,
    conditions: &[EnvironmentConditions],
) -> Result<Vec<SensorRow>, SimError> {
    if conditions.is_empty() {
        return Err(SimError::EmptySweep);
    }
    conditions
        .iter()
        .enumerate()
        .map(|(index, env)| {
            let mut sc = s.clone();
            sc.environment = env.clone();
            let out = simulate(&sc, role, cfg)?;
            let vi = out.trace.vehicle_index(out.inputs.truck).expect("vut");
            let truth: Vec<Option<f64>> = out.trace.series(vi).map(|r| r.gap).collect();
            let mut sq = 0.0;
            let mut samples = 0usize;
            for (entry, gap) in out.inputs.entries.iter().zip(&truth) {
                if let (true, Some(g)) = (entry.meas.valid, gap) {
                    sq += (entry.meas.range - g).powi(2);
                    samples += 1;
                }
            }
            let rms_range_error = if samples == 0 { 0.0 } else { (sq / samples as f64).sqrt() };
            let cut_in_detection_ticks = out.trace.events.iter().find(|e| e.kind == "cut_in").and_then(|e| {
                out.inputs.entries.iter().find(|x| x.tick >= e.tick && x.meas.cut_in_detected).map(|x| x.tick - e.tick)
            });
            Ok(SensorRow { index, conditions: env.clone(), samples, rms_range_error, cut_in_detection_ticks, report: out.report })
        })
        .collect()
}
