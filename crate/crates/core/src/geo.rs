//! Local planar projection of WGS84 coordinates.

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::math::Vec3;

/// A position in the scenario's local frame: x east, y north, z up, meters.
pub type GeoPoint = Vec3;

const EARTH_RADIUS: f64 = 6_371_008.8;

/// Spherical transverse Mercator projection centred on a fixed origin.
///
/// The origin maps to (0, 0). Inside a few kilometres of the origin the scale
/// error is far below a centimetre per metre.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    lat0: f64,
    lon0: f64,
}

impl Projection {
    pub fn new(lat0_deg: f64, lon0_deg: f64) -> Self {
        Projection {
            lat0: lat0_deg.to_radians(),
            lon0: lon0_deg.to_radians(),
        }
    }

    pub fn origin_deg(&self) -> (f64, f64) {
        (self.lat0.to_degrees(), self.lon0.to_degrees())
    }

    pub fn forward(&self, lat_deg: f64, lon_deg: f64) -> (f64, f64) {
        let phi = lat_deg.to_radians();
        let dl = lon_deg.to_radians() - self.lon0;
        let b = phi.cos() * dl.sin();
        let x = EARTH_RADIUS * b.atanh();
        let y = EARTH_RADIUS * (phi.tan().atan2(dl.cos()) - self.lat0);
        (x, y)
    }

    pub fn inverse(&self, x: f64, y: f64) -> (f64, f64) {
        let d = y / EARTH_RADIUS + self.lat0;
        let xr = x / EARTH_RADIUS;
        let phi = (d.sin() / xr.cosh()).asin();
        let dl = xr.sinh().atan2(d.cos());
        (phi.to_degrees(), (self.lon0 + dl).to_degrees())
    }
}

/// Great-circle distance in meters (haversine), used as a projection check.
pub fn haversine(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS * a.sqrt().asin()
}
