//! Line-oriented `.scn` format: `[section]` headers, `key = value` pairs and
//! `#` comment lines.

use super::{
    CandidateInit, EnvironmentConditions, EventKind, Lighting, OtherVehicle, PlatoonInit, Road, Scenario,
    ScenarioError, ScenarioEvent, Segment, SegmentKind, Trigger,
};
use crate::channel::{ChannelConfig, ChannelOverrides};
use crate::protocol::{IntentReason, Role, TrafficCondition, DEFAULT_MAX_PLATOON_SIZE, PROTOCOL_VERSION};
use crate::vehicle::TruckParams;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

struct RawEntry {
    key: String,
    value: String,
    line: usize,
}

struct RawSection {
    name: String,
    line: usize,
    entries: Vec<RawEntry>,
}

fn syntax(line: usize, expected: impl Into<String>, found: impl Into<String>) -> ScenarioError {
    ScenarioError::Syntax { line, expected: expected.into(), found: found.into() }
}

fn lex(text: &str) -> Result<Vec<RawSection>, ScenarioError> {
    let mut sections: Vec<RawSection> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let l = raw.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        if let Some(rest) = l.strip_prefix('[') {
            let Some(name) = rest.strip_suffix(']') else {
                return Err(syntax(line, "`]` closing the section header", l));
            };
            let name = name.trim();
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(syntax(line, "section name", name));
            }
            sections.push(RawSection { name: name.to_string(), line, entries: Vec::new() });
            continue;
        }
        let Some((k, v)) = l.split_once('=') else {
            return Err(syntax(line, "`key = value` or `[section]`", l));
        };
        let key = k.trim();
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(syntax(line, "key name", key));
        }
        let Some(section) = sections.last_mut() else {
            return Err(syntax(line, "a `[section]` header", l));
        };
        if section.entries.iter().any(|e| e.key == key) {
            return Err(syntax(line, format!("a key not yet set in [{}]", section.name), format!("duplicate `{key}`")));
        }
        section.entries.push(RawEntry { key: key.to_string(), value: v.trim().to_string(), line });
    }
    Ok(sections)
}

/// Words used for enumerations in the file format.
trait Token: Sized {
    const EXPECTED: &'static str;
    fn from_token(s: &str) -> Option<Self>;
    fn token(&self) -> &'static str;
}

macro_rules! tokens {
    ($ty:ty, $expected:literal, $($variant:path => $word:literal),+ $(,)?) => {
        impl Token for $ty {
            const EXPECTED: &'static str = $expected;
            fn from_token(s: &str) -> Option<Self> {
                match s { $($word => Some($variant),)+ _ => None }
            }
            fn token(&self) -> &'static str {
                match self { $($variant => $word,)+ }
            }
        }
    };
}

tokens!(Lighting, "day or night", Lighting::Day => "day", Lighting::Night => "night");
tokens!(SegmentKind, "tunnel, bridge or gantry",
    SegmentKind::Tunnel => "tunnel", SegmentKind::Bridge => "bridge", SegmentKind::Gantry => "gantry");
tokens!(TrafficCondition, "free or jam_ahead",
    TrafficCondition::Free => "free", TrafficCondition::JamAhead => "jam_ahead");
tokens!(IntentReason, "traffic_jam_ahead, downhill, driver_preference or other",
    IntentReason::TrafficJamAhead => "traffic_jam_ahead", IntentReason::Downhill => "downhill",
    IntentReason::DriverPreference => "driver_preference", IntentReason::Other => "other");
tokens!(Role, "leader, follower, trailing or candidate",
    Role::Leader => "leader", Role::Follower => "follower", Role::Trailing => "trailing",
    Role::Candidate => "candidate");

struct Fields<'a> {
    section: String,
    prefix: String,
    line: usize,
    map: BTreeMap<String, (String, usize)>,
    lines: &'a mut BTreeMap<String, usize>,
}

impl<'a> Fields<'a> {
    fn new(raw: &RawSection, prefix: String, lines: &'a mut BTreeMap<String, usize>) -> Self {
        lines.insert(prefix.clone(), raw.line);
        let map = raw.entries.iter().map(|e| (e.key.clone(), (e.value.clone(), e.line))).collect();
        Fields { section: raw.name.clone(), prefix, line: raw.line, map, lines }
    }

    fn raw(&mut self, key: &str) -> Option<(String, usize)> {
        let got = self.map.remove(key);
        if let Some((_, line)) = &got {
            self.lines.insert(format!("{}.{key}", self.prefix), *line);
        }
        got
    }

    fn num<T: FromStr>(&mut self, key: &str, expected: &str) -> Result<Option<T>, ScenarioError> {
        match self.raw(key) {
            None => Ok(None),
            Some((v, line)) => v.parse().map(Some).map_err(|_| syntax(line, expected, v)),
        }
    }

    fn f64(&mut self, key: &str) -> Result<Option<f64>, ScenarioError> {
        self.num(key, "a number")
    }

    fn token<T: Token>(&mut self, key: &str) -> Result<Option<T>, ScenarioError> {
        match self.raw(key) {
            None => Ok(None),
            Some((v, line)) => T::from_token(&v).map(Some).ok_or_else(|| syntax(line, T::EXPECTED, v)),
        }
    }

    fn bool(&mut self, key: &str) -> Result<Option<bool>, ScenarioError> {
        self.num(key, "true or false")
    }

    fn required<T>(&self, key: &str, v: Option<T>) -> Result<T, ScenarioError> {
        v.ok_or_else(|| syntax(self.line, format!("key `{key}` in [{}]", self.section), "end of section"))
    }

    fn finish(self) -> Result<(), ScenarioError> {
        match self.map.into_iter().min_by_key(|(_, (_, line))| *line) {
            None => Ok(()),
            Some((key, (_, line))) => Err(syntax(line, format!("a known key for [{}]", self.section), key)),
        }
    }
}

fn truck_params(f: &mut Fields<'_>, base: &TruckParams) -> Result<TruckParams, ScenarioError> {
    Ok(TruckParams {
        length: f.f64("length")?.unwrap_or(base.length),
        max_decel: f.f64("max_decel")?.unwrap_or(base.max_decel),
        max_accel: f.f64("max_accel")?.unwrap_or(base.max_accel),
        actuator_time_constant: f.f64("actuator_time_constant")?.unwrap_or(base.actuator_time_constant),
        standstill_gap: f.f64("standstill_gap")?.unwrap_or(base.standstill_gap),
        sensor_range: f.f64("sensor_range")?.unwrap_or(base.sensor_range),
        sensor_noise_sigma_range: f.f64("sensor_noise_sigma_range")?.unwrap_or(base.sensor_noise_sigma_range),
        sensor_noise_sigma_speed: f.f64("sensor_noise_sigma_speed")?.unwrap_or(base.sensor_noise_sigma_speed),
    })
}

fn channel_overrides(f: &mut Fields<'_>) -> Result<ChannelOverrides, ScenarioError> {
    Ok(ChannelOverrides {
        latency_mean: f.f64("latency_mean")?,
        latency_jitter: f.f64("latency_jitter")?,
        loss_prob: f.f64("loss_prob")?,
        congestion_extra_latency: f.f64("congestion_extra_latency")?,
        congestion_threshold: f.num("congestion_threshold", "a non-negative integer")?,
        seed: f.num("seed", "a non-negative integer")?,
    })
}

fn event(f: &mut Fields<'_>) -> Result<ScenarioEvent, ScenarioError> {
    let at = f.f64("at")?;
    let gap_below = f.f64("gap_below")?;
    let truck: Option<usize> = f.num("truck", "a platoon index")?;
    let trigger = match (at, gap_below) {
        (Some(t), None) if truck.is_none() => Trigger::At(t),
        (None, Some(threshold)) => Trigger::GapBelow { truck: truck.unwrap_or(0), threshold },
        _ => return Err(syntax(f.line, "exactly one trigger: `at`, or `gap_below` with optional `truck`", "none or both")),
    };
    let kind_word: Option<String> = f.num("kind", "an event kind")?;
    let kind_word = f.required("kind", kind_word)?;
    let kind = match kind_word.as_str() {
        "preceding_vehicle_brakes" => EventKind::PrecedingVehicleBrakes {
            vehicle: f.num("vehicle", "a vehicle index")?.unwrap_or(0),
            decel: {
                let d = f.f64("decel")?;
                f.required("decel", d)?
            },
            target_speed: f.f64("target_speed")?.unwrap_or(0.0),
        },
        "cut_in" => EventKind::CutIn {
            between_index: {
                let b = f.num("between_index", "a platoon index")?;
                f.required("between_index", b)?
            },
            entry_speed: f.f64("entry_speed")?,
            entry_gap_fraction: f.f64("entry_gap_fraction")?.unwrap_or(0.5),
            length: f.f64("length")?.unwrap_or(4.5),
            dwell: f.f64("dwell")?,
        },
        "candidate_join_request" => EventKind::CandidateJoinRequest {
            protocol_version: f.num("protocol_version", "a protocol version number")?,
            max_decel_capability: f.f64("max_decel_capability")?,
        },
        "i2v_broadcast" => EventKind::I2VBroadcast {
            speed_limit: f.f64("speed_limit")?,
            advised_thw: f.f64("advised_thw")?,
            traffic_condition: f.token("traffic_condition")?,
        },
        "channel_degrade" => EventKind::ChannelDegrade(channel_overrides(f)?),
        "leader_thw_adjust" => EventKind::LeaderThwAdjust {
            new_thw: {
                let t = f.f64("new_thw")?;
                f.required("new_thw", t)?
            },
            reason: f.token("reason")?.unwrap_or(IntentReason::Other),
        },
        other => {
            return Err(syntax(
                f.line,
                "preceding_vehicle_brakes, cut_in, candidate_join_request, i2v_broadcast, channel_degrade or leader_thw_adjust",
                other,
            ))
        }
    };
    Ok(ScenarioEvent { trigger, kind })
}

fn lookup_line(lines: &BTreeMap<String, usize>, field: &str) -> Option<usize> {
    if let Some(l) = lines.get(field) {
        return Some(*l);
    }
    let mut path = field;
    while let Some((head, _)) = path.rsplit_once('.') {
        if let Some(l) = lines.get(head) {
            return Some(*l);
        }
        path = head;
    }
    if field.starts_with("truck[") {
        return lines.get("truck_defaults").or_else(|| lines.get("platoon")).copied();
    }
    let section = field.split(['.', '[']).next().unwrap_or(field);
    lines.get(section).copied()
}

/// Parses and validates a scenario.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let sections = lex(text)?;
    let mut lines = BTreeMap::new();

    let singletons = ["scenario", "road", "platoon", "truck_defaults", "candidate", "environment", "channel"];
    let repeated = ["truck", "vehicle", "segment", "event"];
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    for s in &sections {
        if let Some(name) = singletons.iter().find(|n| **n == s.name) {
            if seen.insert(name, s.line).is_some() {
                return Err(syntax(s.line, format!("a single [{name}] section"), "a second one"));
            }
        } else if !repeated.contains(&s.name.as_str()) {
            return Err(syntax(s.line, "a known section name", s.name.clone()));
        }
    }
    let single = |name: &str| sections.iter().find(|s| s.name == name);
    let many = |name: &'static str| sections.iter().filter(move |s| s.name == name);

    let Some(sc) = single("scenario") else {
        return Err(syntax(1, "a [scenario] section", "none"));
    };
    let Some(pl) = single("platoon") else {
        return Err(syntax(1, "a [platoon] section", "none"));
    };

    let mut f = Fields::new(sc, "scenario".into(), &mut lines);
    let name: Option<String> = f.num("name", "a name")?;
    let name = f.required("name", name)?;
    let duration = f.f64("duration")?;
    let duration = f.required("duration", duration)?;
    let ego_role = f.token("ego_role")?.unwrap_or(Role::Trailing);
    let i2v_present = f.bool("i2v_present")?.unwrap_or(false);
    f.finish()?;

    let road = match single("road") {
        Some(r) => {
            let mut f = Fields::new(r, "road".into(), &mut lines);
            let road = Road {
                lanes: f.num("lanes", "a lane count")?.unwrap_or(3),
                speed_limit: f.f64("speed_limit")?.unwrap_or(25.0),
            };
            f.finish()?;
            road
        }
        None => Road { lanes: 3, speed_limit: 25.0 },
    };

    let defaults = match single("truck_defaults") {
        Some(d) => {
            let mut f = Fields::new(d, "truck_defaults".into(), &mut lines);
            let p = truck_params(&mut f, &TruckParams::default())?;
            f.finish()?;
            p
        }
        None => TruckParams::default(),
    };

    let mut f = Fields::new(pl, "platoon".into(), &mut lines);
    let n_trucks = f.num("n_trucks", "a truck count")?;
    let n_trucks: usize = f.required("n_trucks", n_trucks)?;
    let initial_thw = f.f64("initial_thw")?;
    let initial_thw = f.required("initial_thw", initial_thw)?;
    let initial_speed = f.f64("initial_speed")?;
    let initial_speed = f.required("initial_speed", initial_speed)?;
    let mut platoon = PlatoonInit {
        platoon_id: f.num("id", "a platoon id")?.unwrap_or(1),
        n_trucks,
        max_size: f.num("max_size", "a count")?.unwrap_or(DEFAULT_MAX_PLATOON_SIZE),
        initial_thw,
        initial_speed,
        op_rate_hz: f.f64("op_rate_hz")?.unwrap_or(25.0),
        tactical_rate_hz: f.f64("tactical_rate_hz")?.unwrap_or(2.0),
        trucks: vec![defaults.clone(); n_trucks.min(64)],
    };
    f.finish()?;

    for t in many("truck") {
        let mut f = Fields::new(t, "truck".into(), &mut lines);
        let idx: Option<usize> = f.num("index", "a platoon index")?;
        let idx = f.required("index", idx)?;
        if idx >= platoon.trucks.len() {
            return Err(syntax(t.line, format!("index below n_trucks = {}", platoon.n_trucks), idx.to_string()));
        }
        f.lines.insert(format!("truck[{idx}]"), t.line);
        platoon.trucks[idx] = truck_params(&mut f, &defaults)?;
        f.finish()?;
    }

    let candidate = match single("candidate") {
        Some(c) => {
            let mut f = Fields::new(c, "candidate".into(), &mut lines);
            let cand = CandidateInit {
                thw: f.f64("thw")?.unwrap_or(2.0),
                protocol_version: f.num("protocol_version", "a protocol version number")?.unwrap_or(PROTOCOL_VERSION),
                params: truck_params(&mut f, &defaults)?,
            };
            f.finish()?;
            Some(cand)
        }
        None => None,
    };

    let mut other_vehicles = Vec::new();
    for (i, v) in many("vehicle").enumerate() {
        let mut f = Fields::new(v, format!("vehicle[{i}]"), &mut lines);
        let x = f.f64("x_front")?;
        let x_front = f.required("x_front", x)?;
        let sp = f.f64("v")?;
        let speed = f.required("v", sp)?;
        other_vehicles.push(OtherVehicle {
            x_front,
            v: speed,
            length: f.f64("length")?.unwrap_or(4.5),
            lane: f.num("lane", "a lane index")?.unwrap_or(0),
        });
        f.finish()?;
    }

    let mut environment = match single("environment") {
        Some(e) => {
            let mut f = Fields::new(e, "environment".into(), &mut lines);
            let env = EnvironmentConditions {
                visibility_factor: f.f64("visibility_factor")?.unwrap_or(1.0),
                lighting: f.token("lighting")?.unwrap_or(Lighting::Day),
                segments: Vec::new(),
            };
            f.finish()?;
            env
        }
        None => EnvironmentConditions::default(),
    };
    for (i, s) in many("segment").enumerate() {
        let mut f = Fields::new(s, format!("segment[{i}]"), &mut lines);
        let kind = f.token("kind")?;
        let kind = f.required("kind", kind)?;
        let from = f.f64("from_x")?;
        let from_x = f.required("from_x", from)?;
        let to = f.f64("to_x")?;
        let to_x = f.required("to_x", to)?;
        environment.segments.push(Segment {
            kind,
            from_x,
            to_x,
            loss_multiplier: f.f64("loss_multiplier")?.unwrap_or(1.0),
            latency_multiplier: f.f64("latency_multiplier")?.unwrap_or(1.0),
        });
        f.finish()?;
    }

    let channel = match single("channel") {
        Some(c) => {
            let mut f = Fields::new(c, "channel".into(), &mut lines);
            let o = channel_overrides(&mut f)?;
            f.finish()?;
            o.apply(&ChannelConfig::default())
        }
        None => ChannelConfig::default(),
    };

    let mut events = Vec::new();
    for (i, e) in many("event").enumerate() {
        let mut f = Fields::new(e, format!("event[{i}]"), &mut lines);
        events.push(event(&mut f)?);
        f.finish()?;
    }

    let scenario = Scenario {
        name,
        duration,
        ego_role,
        i2v_present,
        road,
        platoon,
        candidate,
        other_vehicles,
        events,
        environment,
        channel,
    };
    scenario.validate().map_err(|issues| {
        ScenarioError::Validation(
            issues
                .into_iter()
                .map(|mut i| {
                    i.line = lookup_line(&lines, &i.field);
                    i
                })
                .collect(),
        )
    })?;
    Ok(scenario)
}

fn write_params(out: &mut String, p: &TruckParams) {
    let _ = writeln!(out, "length = {}", p.length);
    let _ = writeln!(out, "max_decel = {}", p.max_decel);
    let _ = writeln!(out, "max_accel = {}", p.max_accel);
    let _ = writeln!(out, "actuator_time_constant = {}", p.actuator_time_constant);
    let _ = writeln!(out, "standstill_gap = {}", p.standstill_gap);
    let _ = writeln!(out, "sensor_range = {}", p.sensor_range);
    let _ = writeln!(out, "sensor_noise_sigma_range = {}", p.sensor_noise_sigma_range);
    let _ = writeln!(out, "sensor_noise_sigma_speed = {}", p.sensor_noise_sigma_speed);
}

fn write_overrides(out: &mut String, o: &ChannelOverrides) {
    let mut opt = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            let _ = writeln!(out, "{k} = {v}");
        }
    };
    opt("latency_mean", o.latency_mean.map(|v| v.to_string()));
    opt("latency_jitter", o.latency_jitter.map(|v| v.to_string()));
    opt("loss_prob", o.loss_prob.map(|v| v.to_string()));
    opt("congestion_extra_latency", o.congestion_extra_latency.map(|v| v.to_string()));
    opt("congestion_threshold", o.congestion_threshold.map(|v| v.to_string()));
    opt("seed", o.seed.map(|v| v.to_string()));
}

/// Writes a scenario in the `.scn` format; `parse_scenario` reads it back to
/// an equal value.
pub fn serialize_scenario(s: &Scenario) -> String {
    let mut out = String::new();
    let o = &mut out;
    let _ = writeln!(o, "[scenario]\nname = {}\nduration = {}\nego_role = {}\ni2v_present = {}", s.name, s.duration, s.ego_role.token(), s.i2v_present);
    let _ = writeln!(o, "\n[road]\nlanes = {}\nspeed_limit = {}", s.road.lanes, s.road.speed_limit);
    let p = &s.platoon;
    let _ = writeln!(
        o,
        "\n[platoon]\nid = {}\nn_trucks = {}\nmax_size = {}\ninitial_thw = {}\ninitial_speed = {}\nop_rate_hz = {}\ntactical_rate_hz = {}",
        p.platoon_id, p.n_trucks, p.max_size, p.initial_thw, p.initial_speed, p.op_rate_hz, p.tactical_rate_hz
    );
    let defaults = p.trucks.first().cloned().unwrap_or_default();
    let _ = writeln!(o, "\n[truck_defaults]");
    write_params(o, &defaults);
    for (i, t) in p.trucks.iter().enumerate() {
        if *t != defaults {
            let _ = writeln!(o, "\n[truck]\nindex = {i}");
            write_params(o, t);
        }
    }
    if let Some(c) = &s.candidate {
        let _ = writeln!(o, "\n[candidate]\nthw = {}\nprotocol_version = {}", c.thw, c.protocol_version);
        write_params(o, &c.params);
    }
    for v in &s.other_vehicles {
        let _ = writeln!(o, "\n[vehicle]\nx_front = {}\nv = {}\nlength = {}\nlane = {}", v.x_front, v.v, v.length, v.lane);
    }
    let env = &s.environment;
    let _ = writeln!(o, "\n[environment]\nvisibility_factor = {}\nlighting = {}", env.visibility_factor, env.lighting.token());
    for seg in &env.segments {
        let _ = writeln!(
            o,
            "\n[segment]\nkind = {}\nfrom_x = {}\nto_x = {}\nloss_multiplier = {}\nlatency_multiplier = {}",
            seg.kind.token(),
            seg.from_x,
            seg.to_x,
            seg.loss_multiplier,
            seg.latency_multiplier
        );
    }
    let c = &s.channel;
    let _ = writeln!(o, "\n[channel]");
    write_overrides(
        o,
        &ChannelOverrides {
            latency_mean: Some(c.latency_mean),
            latency_jitter: Some(c.latency_jitter),
            loss_prob: Some(c.loss_prob),
            congestion_extra_latency: Some(c.congestion_extra_latency),
            congestion_threshold: Some(c.congestion_threshold),
            seed: Some(c.seed),
        },
    );
    for ev in &s.events {
        let _ = writeln!(o, "\n[event]");
        match &ev.trigger {
            Trigger::At(t) => {
                let _ = writeln!(o, "at = {t}");
            }
            Trigger::GapBelow { truck, threshold } => {
                let _ = writeln!(o, "gap_below = {threshold}\ntruck = {truck}");
            }
        }
        let _ = writeln!(o, "kind = {}", ev.kind.name());
        match &ev.kind {
            EventKind::PrecedingVehicleBrakes { vehicle, decel, target_speed } => {
                let _ = writeln!(o, "vehicle = {vehicle}\ndecel = {decel}\ntarget_speed = {target_speed}");
            }
            EventKind::CutIn { between_index, entry_speed, entry_gap_fraction, length, dwell } => {
                let _ = writeln!(o, "between_index = {between_index}\nentry_gap_fraction = {entry_gap_fraction}\nlength = {length}");
                if let Some(v) = entry_speed {
                    let _ = writeln!(o, "entry_speed = {v}");
                }
                if let Some(d) = dwell {
                    let _ = writeln!(o, "dwell = {d}");
                }
            }
            EventKind::CandidateJoinRequest { protocol_version, max_decel_capability } => {
                if let Some(v) = protocol_version {
                    let _ = writeln!(o, "protocol_version = {v}");
                }
                if let Some(d) = max_decel_capability {
                    let _ = writeln!(o, "max_decel_capability = {d}");
                }
            }
            EventKind::I2VBroadcast { speed_limit, advised_thw, traffic_condition } => {
                if let Some(v) = speed_limit {
                    let _ = writeln!(o, "speed_limit = {v}");
                }
                if let Some(v) = advised_thw {
                    let _ = writeln!(o, "advised_thw = {v}");
                }
                if let Some(c) = traffic_condition {
                    let _ = writeln!(o, "traffic_condition = {}", c.token());
                }
            }
            EventKind::ChannelDegrade(ov) => write_overrides(o, ov),
            EventKind::LeaderThwAdjust { new_thw, reason } => {
                let _ = writeln!(o, "new_thw = {new_thw}\nreason = {}", reason.token());
            }
        }
    }
    out
}
