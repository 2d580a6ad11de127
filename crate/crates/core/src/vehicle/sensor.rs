use super::TruckParams;
use crate::protocol::Role;
use crate::scenario::{EnvironmentConditions, Lighting};
use crate::world::{BodyKind, World};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Noise multiplier applied on top of the visibility factor at night.
pub const NIGHT_NOISE_FACTOR: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub valid: bool,
    /// Preceding rear bumper to ego front bumper.
    pub range: f64,
    /// Negative when closing.
    pub range_rate: f64,
    pub preceding_speed: f64,
    /// Acceleration cue of the object ahead (brake lights); not noised.
    pub preceding_accel: f64,
    pub cut_in_detected: bool,
}

impl Measurement {
    pub fn invalid() -> Self {
        Measurement {
            valid: false,
            range: 0.0,
            range_rate: 0.0,
            preceding_speed: 0.0,
            preceding_accel: 0.0,
            cut_in_detected: false,
        }
    }

    /// Noise-free measurement, used by tests and scripted inputs.
    pub fn exact(range: f64, range_rate: f64, v_ego: f64) -> Self {
        Measurement {
            valid: true,
            range,
            range_rate,
            preceding_speed: v_ego + range_rate,
            preceding_accel: 0.0,
            cut_in_detected: false,
        }
    }
}

fn noise_factor(conditions: &EnvironmentConditions) -> f64 {
    let light = match conditions.lighting {
        Lighting::Day => 1.0,
        Lighting::Night => NIGHT_NOISE_FACTOR,
    };
    conditions.visibility_factor * light
}

/// Measures the nearest same-lane object ahead of body `ego`.
///
/// Two normal deviates are drawn on every call, whether or not anything is
/// in range, so a truck's noise stream does not depend on the traffic.
pub fn sensor_measure(
    world: &World,
    ego: usize,
    ego_role: Role,
    params: &TruckParams,
    conditions: &EnvironmentConditions,
    rng: &mut impl Rng,
) -> Measurement {
    let n_range: f64 = rng.sample(StandardNormal);
    let n_rate: f64 = rng.sample(StandardNormal);
    let Some((idx, gap)) = world.nearest_ahead(ego) else {
        return Measurement::invalid();
    };
    if gap > params.sensor_range {
        return Measurement::invalid();
    }
    let me = &world.bodies[ego];
    let ahead = &world.bodies[idx];
    let f = noise_factor(conditions);
    let range = (gap + n_range * params.sensor_noise_sigma_range * f).clamp(0.0, params.sensor_range);
    let range_rate = (ahead.v - me.v) + n_rate * params.sensor_noise_sigma_speed * f;
    let expects_truck = matches!(ego_role, Role::Follower | Role::Trailing);
    Measurement {
        valid: true,
        range,
        range_rate,
        preceding_speed: (me.v + range_rate).max(0.0),
        preceding_accel: ahead.a,
        cut_in_detected: expects_truck && ahead.kind == BodyKind::Other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::TruckId;
    use crate::rng;
    use crate::world::Body;

    fn world(gap: f64) -> World {
        World {
            bodies: vec![
                Body { kind: BodyKind::Truck(TruckId(1)), x_front: gap + 16.5, v: 22.22, a: 0.0, length: 16.5, lane: 0 },
                Body { kind: BodyKind::Truck(TruckId(2)), x_front: 0.0, v: 22.22, a: 0.0, length: 16.5, lane: 0 },
            ],
        }
    }

    #[test]
    fn noiseless_range_is_exact() {
        let w = world(33.33);
        let m = sensor_measure(
            &w,
            1,
            Role::Trailing,
            &TruckParams::default(),
            &EnvironmentConditions::default(),
            &mut rng::stream(1, 0, 0),
        );
        assert!(m.valid);
        assert_eq!(m.range, 33.33);
        assert_eq!(m.range_rate, 0.0);
        assert!(!m.cut_in_detected);
    }

    #[test]
    fn nothing_in_range_is_invalid() {
        let w = world(400.0);
        let m = sensor_measure(
            &w,
            1,
            Role::Trailing,
            &TruckParams::default(),
            &EnvironmentConditions::default(),
            &mut rng::stream(1, 0, 0),
        );
        assert!(!m.valid);
        let m = sensor_measure(
            &w,
            0,
            Role::Leader,
            &TruckParams::default(),
            &EnvironmentConditions::default(),
            &mut rng::stream(1, 0, 0),
        );
        assert!(!m.valid);
    }

    #[test]
    fn seeded_noise_replays() {
        let w = world(30.0);
        let p = TruckParams { sensor_noise_sigma_range: 0.2, ..TruckParams::default() };
        let run = || {
            let mut s = rng::stream(7, rng::DOMAIN_SENSOR, 2);
            (0..50)
                .map(|_| sensor_measure(&w, 1, Role::Trailing, &p, &EnvironmentConditions::default(), &mut s).range)
                .collect::<Vec<_>>()
        };
        let a = run();
        assert_eq!(a, run());
        assert!(a.iter().any(|r| *r != 30.0));
    }
}
