//! UAV agents: role-based action selection, steering behaviors and
//! quadrotor locomotion with propulsion-power accounting.

mod locomotion;
mod power;
mod steering;

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use locomotion::{
    invert_translational, locomotion_step, thrust_direction, AirframeParams, AirframeState, Attitude, LocomotionOutput,
};
pub use power::{propulsion_power, EnergyMeter, PowerParams};
pub use steering::{
    altitude_hold, arrive, cohesion, collision_avoidance, combine_steerings, seek, separation, Behavior, SteeringParams,
    SteeringVector, SteeringWeights,
};

use crate::channel::obstructed_distance;
use crate::geo::GeoPoint;
use crate::math::Vec3;
use crate::world::{BuildingId, World};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Role {
    /// Stay above the car with this index.
    AerialSensor { car: u32 },
    /// Hold a position with line of sight to a base station and its users.
    AerialRelay { base: u32, users: Vec<u32> },
    WaypointMission(Vec<GeoPoint>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SwarmParams {
    /// Neighbours closer than this are pushed away, m.
    pub separation_radius: f64,
    /// Beyond this distance from the swarm centroid a UAV is pulled back, m.
    pub max_separation: f64,
}

impl Default for SwarmParams {
    fn default() -> Self {
        SwarmParams {
            separation_radius: 10.0,
            max_separation: 200.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UavParams {
    pub airframe: AirframeParams,
    pub steering: SteeringParams,
    pub weights: SteeringWeights,
    pub power: PowerParams,
    /// m
    pub operating_height: f64,
    pub swarm: Option<SwarmParams>,
}

impl Default for UavParams {
    fn default() -> Self {
        UavParams {
            airframe: AirframeParams::default(),
            steering: SteeringParams::default(),
            weights: SteeringWeights::default(),
            power: PowerParams::default(),
            operating_height: 30.0,
            swarm: None,
        }
    }
}

/// What a UAV can see of the rest of the scenario during one step.
#[derive(Debug, Clone, Copy)]
pub struct Surroundings<'a> {
    pub world: &'a World,
    /// Position and velocity of the sensor target, when it exists.
    pub target: Option<(Vec3, Vec3)>,
    /// Relay base station antenna position, when it exists.
    pub base: Option<Vec3>,
    pub users: &'a [Vec3],
    /// Other UAV positions (swarm members).
    pub peers: &'a [Vec3],
}

impl<'a> Surroundings<'a> {
    pub fn alone(world: &'a World) -> Self {
        Surroundings {
            world,
            target: None,
            base: None,
            users: &[],
            peers: &[],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UavStepOutcome {
    /// The UAV just switched to hover because its reference disappeared.
    pub degraded: bool,
    pub tilt_clamped: bool,
}

/// Seconds between relay position searches.
const RELAY_REPLAN: f64 = 1.0;

#[derive(Debug, Clone)]
pub struct Uav {
    pub id: u32,
    pub state: AirframeState,
    pub role: Role,
    pub params: UavParams,
    pub waypoint_index: usize,
    /// Last combined steering command, m/s².
    pub steering: Vec3,
    /// Realised acceleration of the last step, m/s².
    pub accel: Vec3,
    pub thrust: f64,
    pub power: f64,
    pub energy: EnergyMeter,
    pub active: Vec<Behavior>,
    pub hover_anchor: Option<Vec3>,
    relay_point: Option<Vec3>,
    relay_timer: f64,
}

impl Uav {
    pub fn new(id: u32, position: GeoPoint, role: Role, params: UavParams) -> Self {
        let thrust = params.airframe.mass * crate::math::G;
        Uav {
            id,
            state: AirframeState {
                position,
                ..AirframeState::default()
            },
            role,
            params,
            waypoint_index: 0,
            steering: Vec3::ZERO,
            accel: Vec3::ZERO,
            thrust,
            power: propulsion_power(thrust, &params.power),
            energy: EnergyMeter::default(),
            active: Vec::new(),
            hover_anchor: None,
            relay_point: None,
            relay_timer: 0.0,
        }
    }

    pub fn position(&self) -> Vec3 {
        self.state.position
    }

    pub fn velocity(&self) -> Vec3 {
        self.state.velocity
    }

    /// Remaining waypoints of a mission, starting with the current one.
    pub fn remaining_waypoints(&self) -> &[GeoPoint] {
        match &self.role {
            Role::WaypointMission(w) => &w[self.waypoint_index.min(w.len())..],
            _ => &[],
        }
    }

    /// Hover power of this airframe, W.
    pub fn hover_power(&self) -> f64 {
        propulsion_power(self.params.airframe.mass * crate::math::G, &self.params.power)
    }

    pub fn select_behaviors(&self, s: &Surroundings) -> Vec<Behavior> {
        use Behavior::*;
        let mut out = match &self.role {
            Role::AerialSensor { .. } if s.target.is_some() => alloc::vec![Arrive, CollisionAvoidance, AltitudeHold],
            Role::AerialRelay { .. } if s.base.is_some() => alloc::vec![SeekLosPoint, CollisionAvoidance, AltitudeHold],
            Role::AerialSensor { .. } | Role::AerialRelay { .. } => alloc::vec![Hover, AltitudeHold],
            Role::WaypointMission(w) if !w.is_empty() => alloc::vec![PathFollowing, CollisionAvoidance],
            Role::WaypointMission(_) => alloc::vec![Hover],
        };
        if self.params.swarm.is_some() && !s.peers.is_empty() {
            out.push(Separation);
            out.push(Cohesion);
        }
        out
    }

    fn relay_target(&mut self, s: &Surroundings, dt: f64, scratch: &mut Vec<BuildingId>) -> Vec3 {
        self.relay_timer -= dt;
        if self.relay_point.is_none() || self.relay_timer <= 0.0 {
            let base = s.base.expect("relay steering requires a base");
            self.relay_point = Some(relay_point(s.world, base, s.users, self.params.operating_height, scratch));
            self.relay_timer = RELAY_REPLAN;
        }
        self.relay_point.expect("just set")
    }

    fn evaluate(&mut self, b: Behavior, s: &Surroundings, dt: f64, scratch: &mut Vec<BuildingId>) -> Option<Vec3> {
        let p = self.state.position;
        let v = self.state.velocity;
        let sp = self.params.steering;
        let vmax = self.params.airframe.max_speed;
        let h = self.params.operating_height;
        match b {
            Behavior::Arrive => {
                let (tp, tv) = s.target?;
                Some(arrive(p, v, tp.with_z(h), tv.with_z(0.0), vmax, &sp))
            }
            Behavior::SeekLosPoint => {
                let t = self.relay_target(s, dt, scratch);
                Some(arrive(p, v, t, Vec3::ZERO, vmax, &sp))
            }
            Behavior::PathFollowing => {
                let Role::WaypointMission(wps) = &self.role else {
                    return None;
                };
                while self.waypoint_index + 1 < wps.len() && p.distance(wps[self.waypoint_index]) < sp.acceptance_radius {
                    self.waypoint_index += 1;
                }
                let target = wps[self.waypoint_index];
                if self.waypoint_index + 1 == wps.len() {
                    Some(arrive(p, v, target, Vec3::ZERO, vmax, &sp))
                } else {
                    Some(seek(p, v, target, vmax, &sp))
                }
            }
            Behavior::CollisionAvoidance => collision_avoidance(s.world, p, v, &sp, scratch),
            Behavior::AltitudeHold => Some(altitude_hold(p, v, h, &sp)),
            Behavior::Hover => {
                let anchor = *self.hover_anchor.get_or_insert(p);
                Some(arrive(p, v, anchor, Vec3::ZERO, vmax, &sp))
            }
            Behavior::Separation => {
                let swarm = self.params.swarm?;
                separation(p, s.peers, swarm.separation_radius, sp.accel_cap)
            }
            Behavior::Cohesion => {
                let swarm = self.params.swarm?;
                cohesion(p, s.peers, swarm.max_separation, sp.accel_cap)
            }
        }
    }

    /// Full three-layer update over `dt`.
    pub fn step(&mut self, s: &Surroundings, dt: f64, scratch: &mut Vec<BuildingId>) -> UavStepOutcome {
        let behaviors = self.select_behaviors(s);
        let hovering = behaviors.contains(&Behavior::Hover);
        let degraded = hovering && self.hover_anchor.is_none() && !matches!(self.role, Role::WaypointMission(_));
        if !hovering {
            self.hover_anchor = None;
        }
        let mut vectors = Vec::with_capacity(behaviors.len());
        for &b in &behaviors {
            if let Some(a) = self.evaluate(b, s, dt, scratch) {
                vectors.push(SteeringVector {
                    accel: a.clamp_norm(self.params.steering.accel_cap),
                    weight: self.params.weights.of(b),
                    source: b,
                });
            }
        }
        self.active = vectors.iter().map(|v| v.source).collect();
        self.steering = combine_steerings(&vectors, self.params.steering.accel_cap);
        let out = locomotion_step(&mut self.state, self.steering, dt, &self.params.airframe);
        self.accel = out.accel;
        self.thrust = out.thrust;
        self.power = propulsion_power(out.thrust, &self.params.power);
        self.energy.integrate(self.power, dt);
        UavStepOutcome {
            degraded,
            tilt_clamped: out.tilt_clamped,
        }
    }
}

/// Position at `height` near the midpoint between `base` and the users'
/// centroid that minimises the total obstructed distance to all of them.
pub fn relay_point(world: &World, base: Vec3, users: &[Vec3], height: f64, scratch: &mut Vec<BuildingId>) -> Vec3 {
    let centroid = if users.is_empty() {
        base
    } else {
        let mut c = Vec3::ZERO;
        for &u in users {
            c += u;
        }
        c / users.len() as f64
    };
    let mid = ((base + centroid) * 0.5).with_z(height);
    let mut best = (f64::INFINITY, f64::INFINITY, mid);
    for i in -2i32..=2 {
        for j in -2i32..=2 {
            let cand = mid + Vec3::new(10.0 * i as f64, 10.0 * j as f64, 0.0);
            let mut obs = obstructed_distance(world, cand, base, scratch);
            for &u in users {
                obs += obstructed_distance(world, cand, u, scratch);
            }
            let dist = cand.distance(mid);
            if obs < best.0 || (obs == best.0 && dist < best.1) {
                best = (obs, dist, cand);
            }
        }
    }
    best.2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::WorldBuilder;

    fn empty_world() -> World {
        WorldBuilder::new().build()
    }

    #[test]
    fn sensor_with_target_arrives_above_it() {
        let w = empty_world();
        let uav = Uav::new(0, Vec3::new(0.0, 0.0, 30.0), Role::AerialSensor { car: 0 }, UavParams::default());
        let s = Surroundings {
            target: Some((Vec3::new(5.0, 0.0, 0.0), Vec3::ZERO)),
            ..Surroundings::alone(&w)
        };
        assert_eq!(
            uav.select_behaviors(&s),
            [Behavior::Arrive, Behavior::CollisionAvoidance, Behavior::AltitudeHold]
        );
    }

    #[test]
    fn missing_target_degrades_to_hover() {
        let w = empty_world();
        let mut uav = Uav::new(0, Vec3::new(0.0, 0.0, 30.0), Role::AerialSensor { car: 3 }, UavParams::default());
        let s = Surroundings::alone(&w);
        assert_eq!(uav.select_behaviors(&s), [Behavior::Hover, Behavior::AltitudeHold]);
        let mut scratch = Vec::new();
        assert!(uav.step(&s, 0.01, &mut scratch).degraded);
        assert!(!uav.step(&s, 0.01, &mut scratch).degraded);
    }

    #[test]
    fn empty_mission_hovers() {
        let w = empty_world();
        let uav = Uav::new(0, Vec3::new(0.0, 0.0, 30.0), Role::WaypointMission(Vec::new()), UavParams::default());
        assert_eq!(uav.select_behaviors(&Surroundings::alone(&w)), [Behavior::Hover]);
    }

    #[test]
    fn hover_is_a_fixed_point() {
        let w = empty_world();
        let start = Vec3::new(3.0, 4.0, 30.0);
        let mut uav = Uav::new(0, start, Role::WaypointMission(Vec::new()), UavParams::default());
        let mut scratch = Vec::new();
        for _ in 0..6000 {
            uav.step(&Surroundings::alone(&w), 0.01, &mut scratch);
        }
        assert!(uav.position().distance(start) < 1e-3);
        let hover = uav.hover_power();
        assert!((uav.energy.joules - 60.0 * hover).abs() < 1e-6 * hover);
    }

    #[test]
    fn mission_reaches_final_waypoint() {
        let w = empty_world();
        let wps = alloc::vec![Vec3::new(50.0, 0.0, 20.0), Vec3::new(50.0, 50.0, 20.0)];
        let mut uav = Uav::new(0, Vec3::new(0.0, 0.0, 20.0), Role::WaypointMission(wps), UavParams::default());
        let mut scratch = Vec::new();
        for _ in 0..4000 {
            uav.step(&Surroundings::alone(&w), 0.01, &mut scratch);
        }
        assert!(uav.position().distance(Vec3::new(50.0, 50.0, 20.0)) < 0.5);
        assert_eq!(uav.waypoint_index, 1);
    }
}
