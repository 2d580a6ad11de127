//! Positions and speeds of everything on the road during a run.

use crate::protocol::TruckId;

/// Lane the platoon drives in.
pub const PLATOON_LANE: u32 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BodyKind {
    /// Platoon member or candidate truck.
    Truck(TruckId),
    /// Scripted road user that is not part of the platoon.
    Other,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Body {
    pub kind: BodyKind,
    pub x_front: f64,
    pub v: f64,
    pub a: f64,
    pub length: f64,
    pub lane: u32,
}

impl Body {
    pub fn x_rear(&self) -> f64 {
        self.x_front - self.length
    }

    pub fn is_truck(&self) -> bool {
        matches!(self.kind, BodyKind::Truck(_))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct World {
    pub bodies: Vec<Body>,
}

impl World {
    /// Nearest body ahead of `ego` in the same lane, with the bumper-to-bumper
    /// gap (negative when overlapping).
    pub fn nearest_ahead(&self, ego: usize) -> Option<(usize, f64)> {
        let me = &self.bodies[ego];
        let mut best: Option<(usize, f64)> = None;
        for (i, b) in self.bodies.iter().enumerate() {
            if i == ego || b.lane != me.lane {
                continue;
            }
            // ahead means the other front is in front of ours; ties go to the lower index
            if b.x_front <= me.x_front && !(b.x_front == me.x_front && i < ego) {
                continue;
            }
            let gap = b.x_rear() - me.x_front;
            if best.is_none_or(|(_, g)| gap < g) {
                best = Some((i, gap));
            }
        }
        best
    }

    pub fn truck_index(&self, id: TruckId) -> Option<usize> {
        self.bodies.iter().position(|b| b.kind == BodyKind::Truck(id))
    }

    /// Trucks in physical order, front first.
    pub fn truck_chain(&self) -> Vec<TruckId> {
        let mut trucks: Vec<(f64, TruckId)> = self
            .bodies
            .iter()
            .filter_map(|b| match b.kind {
                BodyKind::Truck(id) => Some((b.x_front, id)),
                BodyKind::Other => None,
            })
            .collect();
        trucks.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        trucks.into_iter().map(|(_, id)| id).collect()
    }

    /// No foreign vehicle occupies the platoon lane between the rear of
    /// `rear_most` and the front of `front_most`.
    pub fn lane_clear_between(&self, front_most: usize, rear_most: usize) -> bool {
        let hi = self.bodies[front_most].x_front;
        let lo = self.bodies[rear_most].x_rear();
        let lane = self.bodies[rear_most].lane;
        !self
            .bodies
            .iter()
            .any(|b| b.kind == BodyKind::Other && b.lane == lane && b.x_front > lo && b.x_rear() < hi)
    }
}
