//! Steering behaviors and their weighted combination.

use alloc::vec::Vec;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::geometry::{prism_distance, Aabb2};
use crate::math::Vec3;
use crate::world::{BuildingId, World};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Behavior {
    Arrive,
    SeekLosPoint,
    PathFollowing,
    CollisionAvoidance,
    AltitudeHold,
    Hover,
    Separation,
    Cohesion,
}

impl Behavior {
    pub fn label(self) -> &'static str {
        match self {
            Behavior::Arrive => "arrive",
            Behavior::SeekLosPoint => "seek_los_point",
            Behavior::PathFollowing => "path_following",
            Behavior::CollisionAvoidance => "collision_avoidance",
            Behavior::AltitudeHold => "altitude_hold",
            Behavior::Hover => "hover",
            Behavior::Separation => "separation",
            Behavior::Cohesion => "cohesion",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteeringVector {
    pub accel: Vec3,
    pub weight: f64,
    pub source: Behavior,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SteeringWeights {
    pub collision_avoidance: f64,
    pub arrive: f64,
    pub path_following: f64,
    pub altitude_hold: f64,
    pub separation: f64,
    pub cohesion: f64,
}

impl Default for SteeringWeights {
    fn default() -> Self {
        SteeringWeights {
            collision_avoidance: 3.0,
            arrive: 1.0,
            path_following: 1.0,
            altitude_hold: 1.0,
            separation: 0.5,
            cohesion: 0.5,
        }
    }
}

impl SteeringWeights {
    pub fn of(&self, b: Behavior) -> f64 {
        match b {
            Behavior::CollisionAvoidance => self.collision_avoidance,
            Behavior::Arrive | Behavior::SeekLosPoint | Behavior::Hover => self.arrive,
            Behavior::PathFollowing => self.path_following,
            Behavior::AltitudeHold => self.altitude_hold,
            Behavior::Separation => self.separation,
            Behavior::Cohesion => self.cohesion,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SteeringParams {
    /// Norm limit of every steering vector, m/s².
    pub accel_cap: f64,
    /// Radius of the quadratic speed ramp, m.
    pub slow_radius: f64,
    /// Velocity tracking time constant, s.
    pub velocity_tau: f64,
    /// Distance at which a waypoint counts as reached, m.
    pub acceptance_radius: f64,
    /// Look-ahead horizon of the avoidance ray, s.
    pub lookahead: f64,
    /// Clearance kept from building surfaces, m.
    pub avoid_margin: f64,
    pub altitude_kp: f64,
    pub altitude_kd: f64,
}

impl Default for SteeringParams {
    fn default() -> Self {
        SteeringParams {
            accel_cap: 8.0,
            slow_radius: 10.0,
            velocity_tau: 1.0,
            acceptance_radius: 2.0,
            lookahead: 3.0,
            avoid_margin: 4.0,
            altitude_kp: 1.0,
            altitude_kd: 2.0,
        }
    }
}

/// Weighted mean of the vectors, norm-clamped to `cap`. Zero when the total
/// weight is zero.
pub fn combine_steerings(vectors: &[SteeringVector], cap: f64) -> Vec3 {
    let mut sum = Vec3::ZERO;
    let mut w = 0.0;
    for v in vectors {
        sum += v.accel * v.weight;
        w += v.weight;
    }
    if w > 0.0 {
        (sum / w).clamp_norm(cap)
    } else {
        Vec3::ZERO
    }
}

/// Velocity-matching arrival at `target`, which itself moves with
/// `target_velocity`. Desired relative speed ramps quadratically to zero
/// inside the slow-down radius.
pub fn arrive(p: Vec3, v: Vec3, target: Vec3, target_velocity: Vec3, max_speed: f64, sp: &SteeringParams) -> Vec3 {
    let e = target - p;
    let d = e.norm();
    let ramp = (d / sp.slow_radius).min(1.0);
    let rel_speed = max_speed * ramp * ramp;
    let desired = (target_velocity + e.normalized() * rel_speed).clamp_norm(max_speed);
    ((desired - v) / sp.velocity_tau).clamp_norm(sp.accel_cap)
}

/// Cruise towards an intermediate waypoint at `speed`.
pub fn seek(p: Vec3, v: Vec3, target: Vec3, speed: f64, sp: &SteeringParams) -> Vec3 {
    let desired = (target - p).normalized() * speed;
    ((desired - v) / sp.velocity_tau).clamp_norm(sp.accel_cap)
}

pub fn altitude_hold(p: Vec3, v: Vec3, height: f64, sp: &SteeringParams) -> Vec3 {
    let az = sp.altitude_kp * (height - p.z) - sp.altitude_kd * v.z;
    Vec3::new(0.0, 0.0, az.clamp(-sp.accel_cap, sp.accel_cap))
}

/// Multiplier on the deceleration needed to cancel the approach speed by the
/// time of impact; the weighted combination dilutes avoidance.
const AVOID_GAIN: f64 = 2.0;

/// Anticipatory repulsion from buildings. Sphere-traces the velocity ray over
/// the look-ahead horizon; every building whose margin shell the ray reaches
/// pushes along the shell normal with magnitude proportional to (approach
/// speed)/(time to impact). Inside a shell the push grows towards the cap
/// with depth and cancels the inward velocity.
pub fn collision_avoidance(world: &World, p: Vec3, v: Vec3, sp: &SteeringParams, scratch: &mut Vec<BuildingId>) -> Option<Vec3> {
    let end = p + v * sp.lookahead;
    if p.z.min(end.z) - sp.avoid_margin > world.max_building_height() {
        return None;
    }
    let area = Aabb2::of_points([p, end].iter()).inflate(sp.avoid_margin + 1.0);
    world.buildings_in_box(&area, scratch);
    if scratch.is_empty() {
        return None;
    }
    // Buildings whose shell already contains the UAV: cancel the inward
    // velocity and push out. Opposite walls of a narrow gap balance.
    let mut push = Vec3::ZERO;
    let mut inside = false;
    let mut d = f64::INFINITY;
    let mut i = 0;
    while i < scratch.len() {
        let b = world.building(scratch[i]);
        let (di, n) = prism_distance(p, &b.footprint, b.height);
        if di < sp.avoid_margin {
            let inward = (-v.dot(n)).max(0.0);
            push += n * (sp.accel_cap * (1.0 - di / sp.avoid_margin) + inward / 0.2);
            inside = true;
            scratch.swap_remove(i);
        } else {
            d = d.min(di);
            i += 1;
        }
    }
    let speed = v.norm();
    // The remaining buildings each contribute at the first point where the
    // ray reaches their margin shell and are then dropped from the trace.
    let mut t = 0.0;
    while speed > 1e-6 && t < sp.lookahead && !scratch.is_empty() {
        t += ((d - sp.avoid_margin) / speed).max(0.01);
        if t > sp.lookahead {
            break;
        }
        let q = p + v * t;
        let mut i = 0;
        d = f64::INFINITY;
        while i < scratch.len() {
            let b = world.building(scratch[i]);
            let (dq, nq) = prism_distance(q, &b.footprint, b.height);
            if dq <= sp.avoid_margin {
                let approach = -v.dot(nq);
                if approach > 0.0 {
                    push += nq * (AVOID_GAIN * approach / t);
                }
                scratch.swap_remove(i);
            } else {
                d = d.min(dq);
                i += 1;
            }
        }
    }
    (inside || push != Vec3::ZERO).then(|| push.clamp_norm(sp.accel_cap))
}

/// Push away from neighbours closer than `radius`.
pub fn separation(p: Vec3, others: &[Vec3], radius: f64, cap: f64) -> Option<Vec3> {
    let mut acc = Vec3::ZERO;
    let mut any = false;
    for &q in others {
        let e = p - q;
        let d = e.norm();
        if d > 0.0 && d < radius {
            acc += e.normalized() * (cap * (1.0 - d / radius));
            any = true;
        }
    }
    any.then(|| acc.clamp_norm(cap))
}

/// Pull towards the swarm centroid once farther than `max_separation`.
pub fn cohesion(p: Vec3, others: &[Vec3], max_separation: f64, cap: f64) -> Option<Vec3> {
    if others.is_empty() {
        return None;
    }
    let mut c = Vec3::ZERO;
    for &q in others {
        c += q;
    }
    let c = c / others.len() as f64;
    let e = (c - p).xy();
    let d = e.norm();
    (d > max_separation).then(|| (e.normalized() * (d - max_separation)).clamp_norm(cap))
}
