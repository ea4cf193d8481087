//! Forecasts of future vehicle positions from route and steering knowledge.

use num_traits::Float;

use crate::car::Car;
use crate::geo::GeoPoint;
use crate::math::Vec3;
use crate::uav::Uav;
use crate::world::World;

/// Horizon beyond which forecasts are not considered meaningful, s.
pub const MAX_HORIZON: f64 = 60.0;

/// Advance `v·τ` along the car's remaining route at constant speed, stopping
/// at the end of the known route.
pub fn predict_car(world: &World, car: &Car, tau: f64) -> GeoPoint {
    let mut left = car.speed * tau.max(0.0);
    let mut leg = car.leg;
    let mut offset = car.offset;
    let mut upcoming = car.route.iter();
    loop {
        let len = world.segment(leg.segment).length();
        if offset + left <= len {
            return world.lane_position(leg, offset + left).0;
        }
        match upcoming.next() {
            Some(next) => {
                left -= len - offset;
                leg = *next;
                offset = 0.0;
            }
            None => return world.lane_position(leg, len).0,
        }
    }
}

/// Constant-speed traversal of `path` starting at `from`.
pub fn along_polyline(from: GeoPoint, path: &[GeoPoint], distance: f64) -> GeoPoint {
    let mut left = distance;
    let mut cur = from;
    for &p in path {
        let d = cur.distance(p);
        if left <= d {
            return if d > 0.0 { cur.lerp(p, left / d) } else { p };
        }
        left -= d;
        cur = p;
    }
    cur
}

/// Waypoint traversal at the current speed when a mission is known,
/// otherwise second-order extrapolation with the last steering command and
/// the displacement capped at `v_max·τ`.
pub fn predict_uav(uav: &Uav, tau: f64) -> GeoPoint {
    let tau = tau.max(0.0);
    let p = uav.position();
    let v = uav.velocity();
    let waypoints = uav.remaining_waypoints();
    if !waypoints.is_empty() {
        return along_polyline(p, waypoints, v.norm() * tau);
    }
    let offset = v * tau + uav.steering * (0.5 * tau * tau);
    p + offset.clamp_norm(uav.params.airframe.max_speed * tau)
}

/// Unclamped kinematic extrapolation `v·τ + ½·a·τ²`.
pub fn extrapolate(v: Vec3, a: Vec3, tau: f64) -> Vec3 {
    v * tau + a * (0.5 * tau * tau)
}
