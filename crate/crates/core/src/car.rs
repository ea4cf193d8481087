//! Ground vehicles: strategic routing plus the IDM follower model.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use num_traits::Float;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geo::GeoPoint;
use crate::math::Vec3;
use crate::rng::RandomStream;
use crate::world::{NodeId, RouteLeg, World};

/// Hard braking limit applied to every IDM output, m/s².
pub const EMERGENCY_DECEL: f64 = 9.0;
/// Bumper-to-bumper length used for gap computation, m.
pub const CAR_LENGTH: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdmParams {
    pub v0: f64,
    pub time_headway: f64,
    pub a_max: f64,
    pub b: f64,
    pub s0: f64,
    pub delta: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        IdmParams {
            v0: 13.9,
            time_headway: 1.5,
            a_max: 1.4,
            b: 2.0,
            s0: 2.0,
            delta: 4.0,
        }
    }
}

impl IdmParams {
    pub fn is_valid(&self) -> bool {
        self.v0 > 0.0 && self.time_headway > 0.0 && self.a_max > 0.0 && self.b > 0.0 && self.s0 > 0.0 && self.delta >= 1.0
    }

    /// Desired gap s* for speed `v` and approach rate `dv`.
    pub fn desired_gap(&self, v: f64, dv: f64) -> f64 {
        let dynamic = v * self.time_headway + v * dv / (2.0 * (self.a_max * self.b).sqrt());
        self.s0 + dynamic.max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdmOutput {
    pub accel: f64,
    /// Gap was zero or negative.
    pub collision: bool,
}

/// IDM acceleration. `gap = f64::INFINITY` means free road; `dv` is
/// `v - v_leader`.
pub fn idm_acceleration(v: f64, gap: f64, dv: f64, p: &IdmParams) -> IdmOutput {
    if gap <= 0.0 {
        return IdmOutput {
            accel: -EMERGENCY_DECEL,
            collision: true,
        };
    }
    let free = (v / p.v0).powf(p.delta);
    let interaction = if gap.is_finite() {
        let r = p.desired_gap(v, dv) / gap;
        r * r
    } else {
        0.0
    };
    let a = p.a_max * (1.0 - free - interaction);
    IdmOutput {
        accel: a.clamp(-EMERGENCY_DECEL, p.a_max),
        collision: false,
    }
}

/// Equilibrium gap at speed `v` (< v0) on a homogeneous platoon.
pub fn equilibrium_gap(v: f64, p: &IdmParams) -> f64 {
    let s_star = p.desired_gap(v, 0.0);
    s_star / (1.0 - (v / p.v0).powf(p.delta)).sqrt()
}

/// Ballistic update with the stopping correction: when the speed would cross
/// zero within the step, the car stops exactly. Returns (distance, new speed).
pub fn ballistic_advance(v: f64, a: f64, dt: f64) -> (f64, f64) {
    let v_next = v + a * dt;
    if v_next < 0.0 {
        let ds = if a < 0.0 { -v * v / (2.0 * a) } else { 0.0 };
        (ds, 0.0)
    } else {
        (v * dt + 0.5 * a * dt * dt, v_next)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Strategy {
    /// Uniformly random turn at each intersection.
    Random,
    /// Drive through these intersections in order, then start over.
    FixedRoute(Vec<NodeId>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Leader {
    /// Bumper-to-bumper gap, m.
    pub gap: f64,
    /// Own speed minus leader speed, m/s.
    pub dv: f64,
}

#[derive(Debug, Clone)]
pub struct Car {
    pub id: u32,
    pub leg: RouteLeg,
    /// Arc length along the current leg, m.
    pub offset: f64,
    pub speed: f64,
    pub accel: f64,
    /// Legs to drive after the current one.
    pub route: VecDeque<RouteLeg>,
    pub strategy: Strategy,
    pub idm: IdmParams,
    /// When set, overrides the segment speed limit as v0.
    pub desired_speed: Option<f64>,
    pub position: GeoPoint,
    pub heading: Vec3,
    pub collisions: u32,
    rng: RandomStream,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepOutcome {
    pub collision: bool,
    /// Intersections passed during the step (entering a new leg).
    pub crossed: Option<NodeId>,
}

/// Uniform choice among the legs leaving the end of `leg`, U-turn only at
/// dead ends.
pub fn choose_next_leg(world: &World, leg: RouteLeg, rng: &mut RandomStream) -> RouteLeg {
    let options = world.next_legs(leg);
    debug_assert!(!options.is_empty(), "every leg has at least its U-turn");
    options[rng.random_range(0..options.len())]
}

impl Car {
    pub fn new(world: &World, id: u32, leg: RouteLeg, offset: f64, strategy: Strategy, idm: IdmParams, rng: RandomStream) -> Self {
        let len = world.segment(leg.segment).length();
        let offset = offset.clamp(0.0, len);
        let (position, heading) = world.lane_position(leg, offset);
        let mut car = Car {
            id,
            leg,
            offset,
            speed: 0.0,
            accel: 0.0,
            route: VecDeque::new(),
            strategy,
            idm,
            desired_speed: None,
            position,
            heading,
            collisions: 0,
            rng,
        };
        car.extend_route(world);
        car
    }

    pub fn params_on(&self, world: &World, leg: RouteLeg) -> IdmParams {
        IdmParams {
            v0: self.desired_speed.unwrap_or(world.segment(leg.segment).speed_limit),
            ..self.idm
        }
    }

    pub fn velocity(&self) -> Vec3 {
        self.heading * self.speed
    }

    pub fn remaining_on_leg(&self, world: &World) -> f64 {
        world.segment(self.leg.segment).length() - self.offset
    }

    /// Makes sure at least one upcoming leg is known.
    fn extend_route(&mut self, world: &World) {
        if !self.route.is_empty() {
            return;
        }
        let end = world.segment(self.leg.segment).end_node(self.leg.forward);
        if let Strategy::FixedRoute(stops) = &self.strategy {
            let mut through = Vec::with_capacity(stops.len() + 1);
            through.push(end);
            through.extend(stops.iter().copied());
            if let Ok(Some(legs)) = world.route_through(&through) {
                self.route.extend(legs);
            }
        }
        if self.route.is_empty() {
            let next = choose_next_leg(world, self.leg, &mut self.rng);
            self.route.push_back(next);
        }
    }

    /// One follower step. `leader` is the closest obstacle ahead (car or
    /// blocked stop line), if any.
    pub fn step(&mut self, world: &World, leader: Option<Leader>, dt: f64) -> StepOutcome {
        let params = self.params_on(world, self.leg);
        let out = match leader {
            Some(l) => idm_acceleration(self.speed, l.gap, l.dv, &params),
            None => idm_acceleration(self.speed, f64::INFINITY, 0.0, &params),
        };
        self.accel = out.accel;
        if out.collision {
            self.collisions += 1;
        }
        let (ds, v) = ballistic_advance(self.speed, self.accel, dt);
        self.speed = v;
        self.offset += ds;
        let mut crossed = None;
        loop {
            let len = world.segment(self.leg.segment).length();
            if self.offset <= len {
                break;
            }
            self.offset -= len;
            crossed = Some(world.segment(self.leg.segment).end_node(self.leg.forward));
            self.extend_route(world);
            self.leg = self.route.pop_front().expect("route extended");
            self.extend_route(world);
        }
        let (p, h) = world.lane_position(self.leg, self.offset);
        self.position = p;
        self.heading = h;
        StepOutcome {
            collision: out.collision,
            crossed,
        }
    }
}

/// Nearest car ahead of `cars[me]` on its current leg or its next leg.
pub fn find_leader(world: &World, cars: &[Car], me: usize) -> Option<Leader> {
    let car = &cars[me];
    let remaining = car.remaining_on_leg(world);
    let next = car.route.front().copied();
    let mut best: Option<(f64, f64)> = None;
    for (i, other) in cars.iter().enumerate() {
        if i == me {
            continue;
        }
        let ahead = if other.leg == car.leg && other.offset > car.offset {
            other.offset - car.offset
        } else if Some(other.leg) == next && other.leg != car.leg {
            remaining + other.offset
        } else if other.leg == car.leg && other.offset == car.offset && i < me {
            // Exact tie: lower index counts as ahead so the pair is not
            // mutually blind.
            0.0
        } else {
            continue;
        };
        if best.is_none_or(|(d, _)| ahead < d) {
            best = Some((ahead, other.speed));
        }
    }
    best.map(|(d, v)| Leader {
        gap: d - CAR_LENGTH,
        dv: car.speed - v,
    })
}

/// Most recent entry into each intersection, for first-come serialisation.
#[derive(Debug, Clone, Default)]
pub struct IntersectionLedger {
    entries: alloc::collections::BTreeMap<NodeId, (f64, RouteLeg)>,
}

impl IntersectionLedger {
    /// Window during which a crossing blocks cars from other approaches, s.
    pub const HOLD: f64 = 1.0;

    pub fn record(&mut self, node: NodeId, t: f64, from: RouteLeg) {
        self.entries.insert(node, (t, from));
    }

    /// True when another approach entered `node` less than [`Self::HOLD`]
    /// seconds before `t`.
    pub fn blocked(&self, node: NodeId, t: f64, approach: RouteLeg) -> bool {
        match self.entries.get(&node) {
            Some(&(t0, from)) => from != approach && t - t0 < Self::HOLD,
            None => false,
        }
    }
}

/// Distance within which a blocked intersection acts as a stopped leader.
pub const STOP_LINE_LOOKAHEAD: f64 = 30.0;

/// Combine a car leader with the stop line of a blocked intersection.
pub fn with_stop_line(world: &World, car: &Car, ledger: &IntersectionLedger, t: f64, leader: Option<Leader>) -> Option<Leader> {
    let remaining = car.remaining_on_leg(world);
    // Too close to stop: the car is committed to the crossing.
    let committed = remaining < car.speed * car.speed / (2.0 * EMERGENCY_DECEL) + 0.5;
    if remaining > STOP_LINE_LOOKAHEAD || committed {
        return leader;
    }
    let node = world.segment(car.leg.segment).end_node(car.leg.forward);
    if !ledger.blocked(node, t, car.leg) {
        return leader;
    }
    // Treated as a standing car at the node; the IDM halts s0 short of it.
    let line = Leader {
        gap: remaining,
        dv: car.speed,
    };
    match leader {
        Some(l) if l.gap <= line.gap => Some(l),
        _ => Some(line),
    }
}
