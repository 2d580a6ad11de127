//! Binary wire codec.
//!
//! Every frame is `tag: u8 | body_len: u32 LE | body`. Bodies are fixed-order
//! little-endian fields; see `docs/wire-format.md` for the full layout.

use super::{
    ControlMessage, Endpoint, I2VAdvisory, IntentReason, JoinReason, JoinRequest, JoinResponse,
    ManagementKind, ManagementMessage, Message, Payload, PlatoonConfig, TrafficCondition, TruckId,
};
use thiserror::Error;

const TAG_CONTROL: u8 = 0x01;
const TAG_MANAGEMENT: u8 = 0x02;
const TAG_JOIN_REQUEST: u8 = 0x03;
const TAG_JOIN_RESPONSE: u8 = 0x04;
const TAG_I2V: u8 = 0x05;

const HEADER_LEN: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed message: {0}")]
pub struct MalformedMessage(pub Malformed);

pub type CodecError = MalformedMessage;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Malformed {
    #[error("empty input")]
    Empty,
    #[error("truncated: needed {needed} bytes, {available} available")]
    Truncated { needed: usize, available: usize },
    #[error("unknown {field} tag {value:#04x}")]
    UnknownTag { field: &'static str, value: u8 },
    #[error("body length {declared} does not match decoded length {used}")]
    LengthMismatch { declared: usize, used: usize },
    #[error("{0} trailing bytes after frame")]
    TrailingBytes(usize),
    #[error("invariant violated: {0}")]
    Invalid(&'static str),
}

impl From<Malformed> for MalformedMessage {
    fn from(m: Malformed) -> Self {
        MalformedMessage(m)
    }
}

pub fn encode_message(msg: &Message) -> Vec<u8> {
    let mut body = Writer::default();
    body.endpoint(msg.source);
    body.endpoint(msg.destination);
    let tag = match &msg.payload {
        Payload::Control(c) => {
            body.u32(c.sender.0);
            body.u32(c.seq);
            body.f64(c.t_tx);
            body.f64(c.speed);
            body.f64(c.acceleration);
            body.f64(c.commanded_decel);
            body.f64(c.gap_setpoint_thw);
            TAG_CONTROL
        }
        Payload::Management(m) => {
            body.u32(m.sender.0);
            body.u32(m.seq);
            body.f64(m.t_tx);
            match &m.kind {
                ManagementKind::SpeedProfileIntent { intent_decel, intent_target_speed, intent_reason } => {
                    body.u8(0);
                    body.f64(*intent_decel);
                    body.f64(*intent_target_speed);
                    body.u8(reason_code(*intent_reason));
                }
                ManagementKind::CohesionReport { cohesion_max_speed, cohesion_max_accel } => {
                    body.u8(1);
                    body.f64(*cohesion_max_speed);
                    body.f64(*cohesion_max_accel);
                }
                ManagementKind::PlatoonUpdate { config } => {
                    body.u8(2);
                    body.config(config);
                }
                ManagementKind::LeaveAnnounce => body.u8(3),
            }
            TAG_MANAGEMENT
        }
        Payload::JoinRequest(r) => {
            body.u32(r.candidate.0);
            body.u16(r.protocol_version);
            body.f64(r.max_decel_capability);
            body.f64(r.truck_length);
            TAG_JOIN_REQUEST
        }
        Payload::JoinResponse(r) => {
            body.u8(r.is_accepted() as u8);
            body.u8(join_reason_code(r.reason));
            if let Some(cfg) = &r.config {
                body.config(cfg);
            }
            TAG_JOIN_RESPONSE
        }
        Payload::I2V(a) => {
            body.f64(a.t_tx);
            let flags = a.speed_limit.is_some() as u8
                | (a.advised_thw.is_some() as u8) << 1
                | (a.traffic_condition.is_some() as u8) << 2;
            body.u8(flags);
            if let Some(v) = a.speed_limit {
                body.f64(v);
            }
            if let Some(v) = a.advised_thw {
                body.f64(v);
            }
            if let Some(c) = a.traffic_condition {
                body.u8(match c {
                    TrafficCondition::Free => 0,
                    TrafficCondition::JamAhead => 1,
                });
            }
            TAG_I2V
        }
    };
    let body = body.0;
    let mut out = Vec::with_capacity(HEADER_LEN + body.len());
    out.push(tag);
    out.extend_from_slice(&(body.len() as u32).to_le_bytes());
    out.extend_from_slice(&body);
    out
}

/// Decodes exactly one frame; trailing bytes are an error.
pub fn decode_message(bytes: &[u8]) -> Result<Message, MalformedMessage> {
    let (msg, used) = decode_frame(bytes)?;
    if used != bytes.len() {
        return Err(Malformed::TrailingBytes(bytes.len() - used).into());
    }
    Ok(msg)
}

/// Decodes a concatenation of frames.
pub fn decode_stream(mut bytes: &[u8]) -> Result<Vec<Message>, MalformedMessage> {
    let mut out = Vec::new();
    while !bytes.is_empty() {
        let (msg, used) = decode_frame(bytes)?;
        out.push(msg);
        bytes = &bytes[used..];
    }
    Ok(out)
}

fn decode_frame(bytes: &[u8]) -> Result<(Message, usize), MalformedMessage> {
    if bytes.is_empty() {
        return Err(Malformed::Empty.into());
    }
    let mut header = Reader::new(bytes);
    let tag = header.u8()?;
    let declared = header.u32()? as usize;
    let body = header.take(declared)?;
    let mut r = Reader::new(body);
    let source = r.endpoint()?;
    let destination = r.endpoint()?;
    let payload = match tag {
        TAG_CONTROL => Payload::Control(ControlMessage {
            sender: TruckId(r.u32()?),
            seq: r.u32()?,
            t_tx: r.f64()?,
            speed: r.f64()?,
            acceleration: r.f64()?,
            commanded_decel: r.f64()?,
            gap_setpoint_thw: r.f64()?,
        }),
        TAG_MANAGEMENT => {
            let sender = TruckId(r.u32()?);
            let seq = r.u32()?;
            let t_tx = r.f64()?;
            let kind = match r.u8()? {
                0 => ManagementKind::SpeedProfileIntent {
                    intent_decel: r.f64()?,
                    intent_target_speed: r.f64()?,
                    intent_reason: reason_from(r.u8()?)?,
                },
                1 => ManagementKind::CohesionReport {
                    cohesion_max_speed: r.f64()?,
                    cohesion_max_accel: r.f64()?,
                },
                2 => ManagementKind::PlatoonUpdate { config: r.config()? },
                3 => ManagementKind::LeaveAnnounce,
                value => return Err(Malformed::UnknownTag { field: "management kind", value }.into()),
            };
            Payload::Management(ManagementMessage { sender, seq, t_tx, kind })
        }
        TAG_JOIN_REQUEST => Payload::JoinRequest(JoinRequest {
            candidate: TruckId(r.u32()?),
            protocol_version: r.u16()?,
            max_decel_capability: r.f64()?,
            truck_length: r.f64()?,
        }),
        TAG_JOIN_RESPONSE => {
            let accepted = match r.u8()? {
                0 => false,
                1 => true,
                value => return Err(Malformed::UnknownTag { field: "accepted flag", value }.into()),
            };
            let reason = join_reason_from(r.u8()?)?;
            let config = if accepted { Some(r.config()?) } else { None };
            if accepted != (reason == JoinReason::Accepted) {
                return Err(Malformed::Invalid("accepted flag disagrees with reason").into());
            }
            Payload::JoinResponse(JoinResponse { reason, config })
        }
        TAG_I2V => {
            let t_tx = r.f64()?;
            let flags = r.u8()?;
            if flags & !0b111 != 0 {
                return Err(Malformed::UnknownTag { field: "advisory flags", value: flags }.into());
            }
            let speed_limit = if flags & 1 != 0 { Some(r.f64()?) } else { None };
            let advised_thw = if flags & 2 != 0 { Some(r.f64()?) } else { None };
            let traffic_condition = if flags & 4 != 0 {
                Some(match r.u8()? {
                    0 => TrafficCondition::Free,
                    1 => TrafficCondition::JamAhead,
                    value => return Err(Malformed::UnknownTag { field: "traffic condition", value }.into()),
                })
            } else {
                None
            };
            Payload::I2V(I2VAdvisory { t_tx, speed_limit, advised_thw, traffic_condition })
        }
        value => return Err(Malformed::UnknownTag { field: "message", value }.into()),
    };
    if r.pos != body.len() {
        return Err(Malformed::LengthMismatch { declared, used: r.pos }.into());
    }
    let msg = Message { source, destination, payload };
    msg.validate().map_err(Malformed::Invalid)?;
    Ok((msg, HEADER_LEN + declared))
}

fn reason_code(r: IntentReason) -> u8 {
    match r {
        IntentReason::TrafficJamAhead => 0,
        IntentReason::Downhill => 1,
        IntentReason::DriverPreference => 2,
        IntentReason::Other => 3,
    }
}

fn reason_from(v: u8) -> Result<IntentReason, Malformed> {
    Ok(match v {
        0 => IntentReason::TrafficJamAhead,
        1 => IntentReason::Downhill,
        2 => IntentReason::DriverPreference,
        3 => IntentReason::Other,
        value => return Err(Malformed::UnknownTag { field: "intent reason", value }),
    })
}

fn join_reason_code(r: JoinReason) -> u8 {
    match r {
        JoinReason::Accepted => 0,
        JoinReason::PlatoonFull => 1,
        JoinReason::IncompatibleProtocol => 2,
        JoinReason::DecelMismatch => 3,
        JoinReason::UnsafeSituation => 4,
    }
}

fn join_reason_from(v: u8) -> Result<JoinReason, Malformed> {
    Ok(match v {
        0 => JoinReason::Accepted,
        1 => JoinReason::PlatoonFull,
        2 => JoinReason::IncompatibleProtocol,
        3 => JoinReason::DecelMismatch,
        4 => JoinReason::UnsafeSituation,
        value => return Err(Malformed::UnknownTag { field: "join reason", value }),
    })
}

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn endpoint(&mut self, e: Endpoint) {
        match e {
            Endpoint::Truck(id) => {
                self.u8(0);
                self.u32(id.0);
            }
            Endpoint::Infrastructure => self.u8(1),
            Endpoint::Broadcast => self.u8(2),
        }
    }
    fn config(&mut self, c: &PlatoonConfig) {
        self.u32(c.platoon_id);
        self.u16(c.max_size as u16);
        self.f64(c.least_performing_decel);
        self.f64(c.comm_update_rate_operational);
        self.f64(c.comm_update_rate_tactical);
        self.u16(c.members.len() as u16);
        for m in &c.members {
            self.u32(m.0);
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], Malformed> {
        let available = self.buf.len() - self.pos;
        if n > available {
            return Err(Malformed::Truncated { needed: n, available });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], Malformed> {
        let mut out = [0u8; N];
        out.copy_from_slice(self.take(N)?);
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8, Malformed> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16, Malformed> {
        Ok(u16::from_le_bytes(self.array()?))
    }
    fn u32(&mut self) -> Result<u32, Malformed> {
        Ok(u32::from_le_bytes(self.array()?))
    }
    fn f64(&mut self) -> Result<f64, Malformed> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    fn endpoint(&mut self) -> Result<Endpoint, Malformed> {
        match self.u8()? {
            0 => Ok(Endpoint::Truck(TruckId(self.u32()?))),
            1 => Ok(Endpoint::Infrastructure),
            2 => Ok(Endpoint::Broadcast),
            value => Err(Malformed::UnknownTag { field: "endpoint", value }),
        }
    }

    fn config(&mut self) -> Result<PlatoonConfig, Malformed> {
        let platoon_id = self.u32()?;
        let max_size = self.u16()? as usize;
        let least_performing_decel = self.f64()?;
        let comm_update_rate_operational = self.f64()?;
        let comm_update_rate_tactical = self.f64()?;
        let count = self.u16()? as usize;
        let mut members = Vec::with_capacity(count.min(64));
        for _ in 0..count {
            members.push(TruckId(self.u32()?));
        }
        Ok(PlatoonConfig {
            platoon_id,
            members,
            max_size,
            least_performing_decel,
            comm_update_rate_operational,
            comm_update_rate_tactical,
        })
    }
}
