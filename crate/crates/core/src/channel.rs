//! Simulated V2V/I2V medium with latency, jitter, loss and a congestion step.

use crate::protocol::{Endpoint, Message, TruckId};
use crate::rng::{self, Stream};
use crate::scenario::Segment;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub latency_mean: f64,
    /// Half-width of the uniform jitter band.
    pub latency_jitter: f64,
    pub loss_prob: f64,
    pub congestion_extra_latency: f64,
    /// Extra latency applies once more than this many messages are in flight.
    pub congestion_threshold: usize,
    pub seed: u64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            latency_mean: 0.02,
            latency_jitter: 0.005,
            loss_prob: 0.0,
            congestion_extra_latency: 0.05,
            congestion_threshold: 64,
            seed: 0,
        }
    }
}

impl ChannelConfig {
    /// Zero latency, no loss, never congested.
    pub fn ideal() -> Self {
        ChannelConfig {
            latency_mean: 0.0,
            latency_jitter: 0.0,
            loss_prob: 0.0,
            congestion_extra_latency: 0.0,
            congestion_threshold: usize::MAX,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), &'static str> {
        if !(self.latency_mean.is_finite() && self.latency_mean >= 0.0) {
            return Err("latency_mean must be ≥ 0");
        }
        if !(self.loss_prob.is_finite() && (0.0..=1.0).contains(&self.loss_prob)) {
            return Err("loss_prob must be in [0, 1]");
        }
        if !(self.latency_jitter.is_finite() && self.latency_jitter >= 0.0) {
            return Err("latency_jitter must be ≥ 0");
        }
        if self.latency_jitter > self.latency_mean {
            return Err("latency_jitter must not exceed latency_mean");
        }
        if !(self.congestion_extra_latency.is_finite() && self.congestion_extra_latency >= 0.0) {
            return Err("congestion_extra_latency must be ≥ 0");
        }
        Ok(())
    }
}

/// Partial channel settings layered over a base configuration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelOverrides {
    pub latency_mean: Option<f64>,
    pub latency_jitter: Option<f64>,
    pub loss_prob: Option<f64>,
    pub congestion_extra_latency: Option<f64>,
    pub congestion_threshold: Option<usize>,
    pub seed: Option<u64>,
}

impl ChannelOverrides {
    pub fn is_empty(&self) -> bool {
        *self == ChannelOverrides::default()
    }

    pub fn apply(&self, base: &ChannelConfig) -> ChannelConfig {
        ChannelConfig {
            latency_mean: self.latency_mean.unwrap_or(base.latency_mean),
            latency_jitter: self.latency_jitter.unwrap_or(base.latency_jitter),
            loss_prob: self.loss_prob.unwrap_or(base.loss_prob),
            congestion_extra_latency: self.congestion_extra_latency.unwrap_or(base.congestion_extra_latency),
            congestion_threshold: self.congestion_threshold.unwrap_or(base.congestion_threshold),
            seed: self.seed.unwrap_or(base.seed),
        }
    }

    /// Later overrides win field by field.
    pub fn merge(&mut self, other: &ChannelOverrides) {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(latency_mean, latency_jitter, loss_prob, congestion_extra_latency, congestion_threshold, seed);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InFlightMessage {
    pub msg: Message,
    pub t_send: f64,
    pub t_deliver: f64,
    pub dropped: bool,
    /// Global send order; breaks ties between equal delivery times.
    pub order: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChannelError {
    #[error("{sender} may not address {destination}: V2V messages go to an adjacent truck only")]
    NonAdjacentDestination { sender: Endpoint, destination: Endpoint },
    #[error("sender {0} is not on the road")]
    UnknownSender(Endpoint),
    #[error("invalid message: {0}")]
    InvalidMessage(&'static str),
}

/// Physical front-to-rear order of every truck on the road, members and
/// candidates alike.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Topology {
    pub chain: Vec<TruckId>,
}

impl Topology {
    pub fn new(chain: Vec<TruckId>) -> Self {
        Topology { chain }
    }

    pub fn index_of(&self, id: TruckId) -> Option<usize> {
        self.chain.iter().position(|t| *t == id)
    }

    pub fn check(&self, msg: &Message) -> Result<(), ChannelError> {
        msg.validate().map_err(ChannelError::InvalidMessage)?;
        if msg.is_i2v() {
            return Ok(());
        }
        let (Some(src), Some(dst)) = (msg.source.truck(), msg.destination.truck()) else {
            return Err(ChannelError::NonAdjacentDestination { sender: msg.source, destination: msg.destination });
        };
        let si = self.index_of(src).ok_or(ChannelError::UnknownSender(msg.source))?;
        let adjacent = self.index_of(dst).is_some_and(|di| si.abs_diff(di) == 1);
        if !adjacent {
            return Err(ChannelError::NonAdjacentDestination { sender: msg.source, destination: msg.destination });
        }
        Ok(())
    }
}

/// Decides the fate of one message. Always draws exactly two uniforms from
/// `rng` so the stream position does not depend on the outcome.
pub fn transmit(
    cfg: &ChannelConfig,
    msg: Message,
    t: f64,
    rng: &mut impl Rng,
    in_flight: usize,
    topology: &Topology,
) -> Result<InFlightMessage, ChannelError> {
    topology.check(&msg)?;
    let u_loss: f64 = rng.random();
    let u_jitter: f64 = rng.random();
    let dropped = u_loss < cfg.loss_prob;
    let mut latency = cfg.latency_mean + (2.0 * u_jitter - 1.0) * cfg.latency_jitter;
    if in_flight > cfg.congestion_threshold {
        latency += cfg.congestion_extra_latency;
    }
    let latency = latency.max(0.0);
    Ok(InFlightMessage {
        msg,
        t_send: t,
        t_deliver: if dropped { t } else { t + latency },
        dropped,
        order: 0,
    })
}

/// Scales loss and latency by every active segment; loss is clamped to 1.
pub fn environment_modifier<'a>(
    base: &ChannelConfig,
    active: impl IntoIterator<Item = &'a Segment>,
) -> ChannelConfig {
    let mut cfg = base.clone();
    for seg in active {
        cfg.loss_prob *= seg.loss_multiplier;
        cfg.latency_mean *= seg.latency_multiplier;
        cfg.latency_jitter *= seg.latency_multiplier;
    }
    cfg.loss_prob = cfg.loss_prob.clamp(0.0, 1.0);
    cfg
}

#[derive(Debug, Clone)]
struct Queued(InFlightMessage);

impl Queued {
    fn key(&self) -> (f64, u64) {
        (self.0.t_deliver, self.0.order)
    }
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Queued {}
impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        let (ta, oa) = self.key();
        let (tb, ob) = other.key();
        ta.total_cmp(&tb).then(oa.cmp(&ob))
    }
}

/// Pending deliveries ordered by `(t_deliver, send order)`.
#[derive(Debug, Clone, Default)]
pub struct DeliveryQueue {
    heap: BinaryHeap<Reverse<Queued>>,
    next_order: u64,
}

impl DeliveryQueue {
    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Assigns the send order and enqueues; dropped messages are not queued.
    pub fn push(&mut self, mut m: InFlightMessage) -> u64 {
        let order = self.next_order;
        self.next_order += 1;
        m.order = order;
        if !m.dropped {
            self.heap.push(Reverse(Queued(m)));
        }
        order
    }
}

/// Removes and returns every message due by `t`, earliest first.
pub fn deliver_due(queue: &mut DeliveryQueue, t: f64) -> Vec<InFlightMessage> {
    let mut out = Vec::new();
    while let Some(Reverse(head)) = queue.heap.peek() {
        if head.0.t_deliver > t {
            break;
        }
        let Reverse(Queued(m)) = queue.heap.pop().expect("peeked");
        out.push(m);
    }
    out
}

/// One logged transmission.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageRecord {
    pub order: u64,
    pub msg: Message,
    pub t_send: f64,
    /// Scheduled delivery time; `None` when dropped.
    pub t_deliver: Option<f64>,
    pub dropped: bool,
    pub delivered: bool,
}

/// Channel state owned by one simulation run.
#[derive(Debug, Clone)]
pub struct Channel {
    base: ChannelConfig,
    degrade: ChannelOverrides,
    run_seed: u64,
    queue: DeliveryQueue,
    streams: BTreeMap<Endpoint, Stream>,
    log: Vec<MessageRecord>,
}

impl Channel {
    pub fn new(base: ChannelConfig, run_seed: u64) -> Self {
        Channel {
            base,
            degrade: ChannelOverrides::default(),
            run_seed,
            queue: DeliveryQueue::default(),
            streams: BTreeMap::new(),
            log: Vec::new(),
        }
    }

    pub fn degrade(&mut self, overrides: &ChannelOverrides) {
        self.degrade.merge(overrides);
    }

    pub fn current_config(&self) -> ChannelConfig {
        self.degrade.apply(&self.base)
    }

    pub fn in_flight(&self) -> usize {
        self.queue.len()
    }

    fn stream_for(&mut self, sender: Endpoint) -> &mut Stream {
        let salt = self.run_seed ^ self.base.seed;
        self.streams.entry(sender).or_insert_with(|| {
            let index = match sender {
                Endpoint::Truck(id) => id.0 as u64,
                Endpoint::Infrastructure => 1 << 32,
                Endpoint::Broadcast => (1 << 32) + 1,
            };
            rng::stream(salt, rng::DOMAIN_CHANNEL, index)
        })
    }

    /// Transmits using the current configuration modified by the segments
    /// active at the sender's position.
    pub fn send<'a>(
        &mut self,
        msg: Message,
        t: f64,
        active: impl IntoIterator<Item = &'a Segment>,
        topology: &Topology,
    ) -> Result<(), ChannelError> {
        let cfg = environment_modifier(&self.current_config(), active);
        let in_flight = self.queue.len();
        let sender = msg.source;
        let rng = self.stream_for(sender);
        let m = transmit(&cfg, msg, t, rng, in_flight, topology)?;
        let record = MessageRecord {
            order: 0,
            msg: m.msg.clone(),
            t_send: m.t_send,
            t_deliver: (!m.dropped).then_some(m.t_deliver),
            dropped: m.dropped,
            delivered: false,
        };
        let order = self.queue.push(m);
        self.log.push(MessageRecord { order, ..record });
        Ok(())
    }

    pub fn deliver_due(&mut self, t: f64) -> Vec<InFlightMessage> {
        let due = deliver_due(&mut self.queue, t);
        for m in &due {
            // the log is indexed by send order
            self.log[m.order as usize].delivered = true;
        }
        due
    }

    pub fn log(&self) -> &[MessageRecord] {
        &self.log
    }

    pub fn into_log(self) -> Vec<MessageRecord> {
        self.log
    }
}
