//! Translational quadrotor model with a first-order attitude lag.

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::math::{Vec3, G};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Attitude {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AirframeParams {
    /// kg
    pub mass: f64,
    /// Linear drag coefficient, kg/s.
    pub drag: f64,
    /// Attitude time constant, s.
    pub attitude_tau: f64,
    /// Roll and pitch limit, degrees.
    pub max_tilt_deg: f64,
    /// m/s
    pub max_speed: f64,
}

impl Default for AirframeParams {
    fn default() -> Self {
        AirframeParams {
            mass: 2.0,
            drag: 0.2,
            attitude_tau: 0.2,
            max_tilt_deg: 35.0,
            max_speed: 15.0,
        }
    }
}

/// Kinematic state advanced by [`locomotion_step`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AirframeState {
    pub position: Vec3,
    pub velocity: Vec3,
    pub attitude: Attitude,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocomotionOutput {
    /// Total rotor thrust, N.
    pub thrust: f64,
    /// Realised acceleration over the step, m/s².
    pub accel: Vec3,
    /// The attitude setpoint exceeded the tilt limit.
    pub tilt_clamped: bool,
}

/// Attitude setpoint (roll, pitch) and specific thrust realising `f`, the
/// required specific force including gravity compensation, at heading `yaw`.
pub fn invert_translational(f: Vec3, yaw: f64) -> (f64, f64, f64) {
    let (s, c) = yaw.sin_cos();
    let forward = c * f.x + s * f.y;
    let lateral = s * f.x - c * f.y;
    let norm = f.norm();
    let roll = if norm > 0.0 { (lateral / norm).clamp(-1.0, 1.0).asin() } else { 0.0 };
    let pitch = forward.atan2(f.z);
    (roll, pitch, norm)
}

/// Specific force (thrust/mass direction times magnitude) for the given
/// attitude.
pub fn thrust_direction(att: &Attitude) -> Vec3 {
    let (sr, cr) = att.roll.sin_cos();
    let (sp, cp) = att.pitch.sin_cos();
    let (sy, cy) = att.yaw.sin_cos();
    Vec3::new(cy * sp * cr + sy * sr, sy * sp * cr - cy * sr, cp * cr)
}

/// One step: solve the attitude setpoint for `command`, lag the attitude
/// towards it, pick the thrust that realises the commanded vertical
/// acceleration at the actual attitude, then integrate semi-implicitly.
pub fn locomotion_step(s: &mut AirframeState, command: Vec3, dt: f64, p: &AirframeParams) -> LocomotionOutput {
    let drag = s.velocity * (p.drag / p.mass);
    let mut f = command + drag + Vec3::new(0.0, 0.0, G);
    // Rotors cannot pull downwards.
    let min_fz = 0.1 * G;
    if f.z < min_fz {
        f.z = min_fz;
    }
    let (mut roll_sp, mut pitch_sp, _) = invert_translational(f, s.attitude.yaw);
    let limit = p.max_tilt_deg.to_radians();
    let tilt_clamped = roll_sp.abs() > limit || pitch_sp.abs() > limit;
    roll_sp = roll_sp.clamp(-limit, limit);
    pitch_sp = pitch_sp.clamp(-limit, limit);

    let alpha = 1.0 - (-dt / p.attitude_tau).exp();
    s.attitude.roll += alpha * (roll_sp - s.attitude.roll);
    s.attitude.pitch += alpha * (pitch_sp - s.attitude.pitch);

    let dir = thrust_direction(&s.attitude);
    let thrust = (p.mass * f.z / dir.z).max(0.0);
    let accel = dir * (thrust / p.mass) - Vec3::new(0.0, 0.0, G) - drag;

    s.velocity += accel * dt;
    let horizontal = s.velocity.norm_xy();
    if horizontal > p.max_speed {
        let k = p.max_speed / horizontal;
        s.velocity.x *= k;
        s.velocity.y *= k;
    }
    s.position += s.velocity * dt;
    if s.position.z < 0.0 {
        s.position.z = 0.0;
        s.velocity.z = s.velocity.z.max(0.0);
    }
    LocomotionOutput {
        thrust,
        accel,
        tilt_clamped,
    }
}
