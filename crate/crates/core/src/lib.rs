//! Deterministic simulator and test harness for V2V-enabled truck platoons.
//!
//! Each truck is assessed individually in its platoon role (leader,
//! follower, trailing truck or join candidate) under sensor, communication,
//! open-loop and closed-loop test modes.

pub mod assessment;
pub mod channel;
pub mod protocol;
pub mod rng;
pub mod scenario;
pub mod vehicle;
pub mod world;
