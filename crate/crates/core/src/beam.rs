//! Planar patch-array gain pattern and geometric beam alignment.
//!
//! Directions in an array's local frame are (azimuth, elevation) with
//! boresight at (0, 0): u = cos(el)·sin(az), v = sin(el), w = cos(el)·cos(az).
//! Array rows run along u, columns along v.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_traits::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArrayConfig {
    /// Elements along u.
    pub rows: u32,
    /// Elements along v.
    pub cols: u32,
    /// Element spacing in wavelengths.
    pub spacing: f64,
    pub frequency_hz: f64,
    /// Power pattern exponent q of the cos^q element model.
    pub element_exponent: f64,
    /// Element boresight gain, dBi.
    pub element_gain_dbi: f64,
    /// Floor of the element pattern behind the array, dB below boresight.
    pub front_to_back_db: f64,
    /// Electronic steering limit from boresight, degrees.
    pub max_steer_deg: f64,
}

impl Default for ArrayConfig {
    fn default() -> Self {
        ArrayConfig {
            rows: 8,
            cols: 8,
            spacing: 0.5,
            frequency_hz: 28e9,
            element_exponent: 2.0,
            element_gain_dbi: 6.0,
            front_to_back_db: 30.0,
            max_steer_deg: 60.0,
        }
    }
}

impl ArrayConfig {
    pub fn single_element() -> Self {
        ArrayConfig {
            rows: 1,
            cols: 1,
            ..ArrayConfig::default()
        }
    }

    pub fn element_count(&self) -> f64 {
        self.rows as f64 * self.cols as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pointing {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
}

impl Pointing {
    pub fn new(azimuth_deg: f64, elevation_deg: f64) -> Self {
        Pointing {
            azimuth_deg,
            elevation_deg,
        }
    }

    pub const BORESIGHT: Pointing = Pointing {
        azimuth_deg: 0.0,
        elevation_deg: 0.0,
    };

    /// Unit (u, v, w) direction cosines.
    pub fn direction(&self) -> Vec3 {
        let (sa, ca) = self.azimuth_deg.to_radians().sin_cos();
        let (se, ce) = self.elevation_deg.to_radians().sin_cos();
        Vec3::new(ce * sa, se, ce * ca)
    }

    pub fn from_direction(d: Vec3) -> Self {
        let d = d.normalized();
        Pointing {
            azimuth_deg: d.x.atan2(d.z).to_degrees(),
            elevation_deg: d.y.clamp(-1.0, 1.0).asin().to_degrees(),
        }
    }

    /// Angle from boresight, degrees.
    pub fn off_boresight_deg(&self) -> f64 {
        self.direction().z.clamp(-1.0, 1.0).acos().to_degrees()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum BeamError {
    #[error("steering direction {off_boresight_deg:.2} deg from boresight exceeds the {limit_deg} deg coverage cone")]
    OutsideCoverage { off_boresight_deg: f64, limit_deg: f64 },
}

/// Magnitude of the uniform linear array sum of `n` elements at phase step
/// `psi`.
fn linear_af(n: u32, psi: f64) -> f64 {
    let (mut re, mut im) = (0.0, 0.0);
    for k in 0..n {
        let (s, c) = (k as f64 * psi).sin_cos();
        re += c;
        im += s;
    }
    (re * re + im * im).sqrt()
}

/// |AF| for steering `steer` observed at `look` (uniform excitation).
pub fn array_factor(cfg: &ArrayConfig, steer: Pointing, look: Pointing) -> f64 {
    let kd = 2.0 * PI * cfg.spacing;
    let s = steer.direction();
    let l = look.direction();
    linear_af(cfg.rows, kd * (l.x - s.x)) * linear_af(cfg.cols, kd * (l.y - s.y))
}

/// Array factor in dB (20·log10|AF|), floored far below any sidelobe.
pub fn array_factor_db(cfg: &ArrayConfig, steer: Pointing, look: Pointing) -> f64 {
    let floor = cfg.element_count() * 1e-10;
    20.0 * array_factor(cfg, steer, look).max(floor).log10()
}

/// Element power pattern relative to its boresight, linear.
pub fn element_power(cfg: &ArrayConfig, look: Pointing) -> f64 {
    let w = look.direction().z;
    let floor = 10f64.powf(-cfg.front_to_back_db / 10.0);
    if w <= 0.0 {
        floor
    } else {
        w.powf(cfg.element_exponent).max(floor)
    }
}

pub fn check_steer(cfg: &ArrayConfig, steer: Pointing) -> Result<(), BeamError> {
    let off = steer.off_boresight_deg();
    if off > cfg.max_steer_deg + 1e-9 {
        Err(BeamError::OutsideCoverage {
            off_boresight_deg: off,
            limit_deg: cfg.max_steer_deg,
        })
    } else {
        Ok(())
    }
}

/// Gain relative to a single element's boresight, dB: array factor
/// normalised to its peak, plus 10·log10(N·M), times the element pattern.
pub fn relative_gain(cfg: &ArrayConfig, steer: Pointing, look: Pointing) -> Result<f64, BeamError> {
    check_steer(cfg, steer)?;
    let n = cfg.element_count();
    let af_db = array_factor_db(cfg, steer, look) - 20.0 * n.log10();
    Ok(af_db + 10.0 * n.log10() + 10.0 * element_power(cfg, look).log10())
}

/// Absolute gain, dBi.
pub fn array_gain(cfg: &ArrayConfig, steer: Pointing, look: Pointing) -> Result<f64, BeamError> {
    Ok(relative_gain(cfg, steer, look)? + cfg.element_gain_dbi)
}

/// Orientation of an array in the world frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayMount {
    /// Unit boresight (local w axis).
    pub boresight: Vec3,
    /// Unit local u axis, perpendicular to the boresight.
    pub u_axis: Vec3,
}

impl ArrayMount {
    /// Facing straight down, u towards east (UAV belly mount).
    pub const DOWN: ArrayMount = ArrayMount {
        boresight: Vec3::new(0.0, 0.0, -1.0),
        u_axis: Vec3::new(1.0, 0.0, 0.0),
    };
    /// Facing straight up, u towards east (vehicle roof mount).
    pub const UP: ArrayMount = ArrayMount {
        boresight: Vec3::new(0.0, 0.0, 1.0),
        u_axis: Vec3::new(1.0, 0.0, 0.0),
    };

    pub fn v_axis(&self) -> Vec3 {
        self.boresight.cross(self.u_axis)
    }

    pub fn to_local(&self, d: Vec3) -> Vec3 {
        Vec3::new(d.dot(self.u_axis), d.dot(self.v_axis()), d.dot(self.boresight))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SideAlignment {
    /// Pointing applied to the array, inside the coverage cone.
    pub pointing: Pointing,
    /// Actual direction of the peer in the local frame.
    pub peer: Pointing,
    /// The peer lay outside the cone and the pointing was clamped.
    pub misaligned: bool,
    /// Gain towards the peer, dBi.
    pub gain_dbi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamAlignment {
    pub tx: SideAlignment,
    pub rx: SideAlignment,
}

/// Steer towards `local` (unit, local frame), clamping along the great
/// circle to the cone edge.
pub fn clamp_to_cone(cfg: &ArrayConfig, local: Vec3) -> (Pointing, bool) {
    let local = local.normalized();
    let limit = cfg.max_steer_deg.to_radians();
    let off = local.z.clamp(-1.0, 1.0).acos();
    if off <= limit {
        return (Pointing::from_direction(local), false);
    }
    let mut perp = Vec3::new(local.x, local.y, 0.0);
    if perp.norm() < 1e-12 {
        perp = Vec3::new(1.0, 0.0, 0.0);
    }
    let perp = perp.normalized();
    let d = Vec3::new(0.0, 0.0, limit.cos()) + perp * limit.sin();
    (Pointing::from_direction(d), true)
}

fn align_side(cfg: &ArrayConfig, mount: &ArrayMount, from: Vec3, to: Vec3) -> SideAlignment {
    let local = mount.to_local((to - from).normalized());
    let (pointing, misaligned) = clamp_to_cone(cfg, local);
    let peer = Pointing::from_direction(local);
    let gain_dbi = array_gain(cfg, pointing, peer).expect("clamped pointing lies inside the cone");
    SideAlignment {
        pointing,
        peer,
        misaligned,
        gain_dbi,
    }
}

/// Ideal geometric line-of-sight beam alignment of both ends.
pub fn align_beams(
    tx: Vec3,
    rx: Vec3,
    tx_cfg: &ArrayConfig,
    tx_mount: &ArrayMount,
    rx_cfg: &ArrayConfig,
    rx_mount: &ArrayMount,
) -> BeamAlignment {
    BeamAlignment {
        tx: align_side(tx_cfg, tx_mount, tx, rx),
        rx: align_side(rx_cfg, rx_mount, rx, tx),
    }
}

/// One sample of an exported pattern.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternSample {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub gain_db: f64,
}

/// Relative gain over an inclusive (azimuth, elevation) grid with `step_deg`
/// spacing, row-major in elevation.
pub fn sample_pattern(
    cfg: &ArrayConfig,
    steer: Pointing,
    az_range: (f64, f64),
    el_range: (f64, f64),
    step_deg: f64,
) -> Result<Vec<PatternSample>, BeamError> {
    check_steer(cfg, steer)?;
    let n_az = ((az_range.1 - az_range.0) / step_deg).round() as i64;
    let n_el = ((el_range.1 - el_range.0) / step_deg).round() as i64;
    let mut out = Vec::with_capacity(((n_az + 1) * (n_el + 1)).max(0) as usize);
    for j in 0..=n_el {
        let el = el_range.0 + j as f64 * step_deg;
        for i in 0..=n_az {
            let az = az_range.0 + i as f64 * step_deg;
            let look = Pointing::new(az, el);
            out.push(PatternSample {
                azimuth_deg: az,
                elevation_deg: el,
                gain_db: relative_gain(cfg, steer, look)?,
            });
        }
    }
    Ok(out)
}
