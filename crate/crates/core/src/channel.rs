//! Obstacle-aware path loss between two 3D positions.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_traits::Float;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::geo::GeoPoint;
use crate::geometry::segment_prism_length;
use crate::math::{Vec3, SPEED_OF_LIGHT};
use crate::rng::{hash_words, RandomStream};
use crate::world::{BuildingId, World};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelParams {
    pub path_loss_exponent: f64,
    /// Attenuation per metre inside buildings, dB/m.
    pub obstruction_db_per_m: f64,
    pub shadowing_sigma_los_db: f64,
    pub shadowing_sigma_nlos_db: f64,
    /// Resource-element divisor of the RSRP normalisation.
    pub resource_elements: f64,
    pub cache_enabled: bool,
    /// Quantisation cell of the cache and of the shadowing field, m.
    pub cache_cell: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            path_loss_exponent: 2.4,
            obstruction_db_per_m: 0.4,
            shadowing_sigma_los_db: 3.0,
            shadowing_sigma_nlos_db: 6.0,
            resource_elements: 1200.0,
            cache_enabled: true,
            cache_cell: 1.0,
        }
    }
}

/// Distances below this are clamped, m.
pub const MIN_DISTANCE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelQuery {
    pub tx: GeoPoint,
    pub rx: GeoPoint,
    pub frequency_hz: f64,
    pub tx_power_dbm: f64,
    pub tx_gain_dbi: f64,
    pub rx_gain_dbi: f64,
}

impl ChannelQuery {
    pub fn new(tx: GeoPoint, rx: GeoPoint, frequency_hz: f64, tx_power_dbm: f64) -> Self {
        ChannelQuery {
            tx,
            rx,
            frequency_hz,
            tx_power_dbm,
            tx_gain_dbi: 0.0,
            rx_gain_dbi: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelResult {
    pub d3d: f64,
    pub d_obs: f64,
    pub los: bool,
    pub path_loss_db: f64,
    pub rsrp_dbm: f64,
    pub shadow_db: f64,
    /// Received power before the resource-element normalisation, dBm.
    pub rx_power_dbm: f64,
}

/// Free-space loss at 1 m, dB.
pub fn free_space_intercept(frequency_hz: f64) -> f64 {
    20.0 * (4.0 * PI * frequency_hz / SPEED_OF_LIGHT).log10()
}

pub fn free_space_loss(frequency_hz: f64, d: f64) -> f64 {
    free_space_intercept(frequency_hz) + 20.0 * d.max(MIN_DISTANCE).log10()
}

fn ordered(a: GeoPoint, b: GeoPoint) -> (GeoPoint, GeoPoint) {
    let ka = (a.x, a.y, a.z);
    let kb = (b.x, b.y, b.z);
    if ka.partial_cmp(&kb) == Some(core::cmp::Ordering::Greater) {
        (b, a)
    } else {
        (a, b)
    }
}

/// Total length of the segment `a -> b` inside building volumes.
pub fn obstructed_distance(world: &World, a: GeoPoint, b: GeoPoint, scratch: &mut Vec<BuildingId>) -> f64 {
    // A canonical direction makes the result exactly symmetric.
    let (a, b) = ordered(a, b);
    world.buildings_near_into(a, b, scratch);
    let mut intervals = Vec::new();
    let mut total = 0.0;
    for id in scratch.iter() {
        let bld = world.building(*id);
        total += segment_prism_length(a, b, &bld.footprint, bld.height, &mut intervals);
    }
    total.min(a.distance(b))
}

type Cell = (i64, i64, i64);

fn cell_of(p: GeoPoint, size: f64) -> Cell {
    (
        (p.x / size).floor() as i64,
        (p.y / size).floor() as i64,
        (p.z / size).floor() as i64,
    )
}

fn cell_center(c: Cell, size: f64) -> GeoPoint {
    Vec3::new((c.0 as f64 + 0.5) * size, (c.1 as f64 + 0.5) * size, (c.2 as f64 + 0.5) * size)
}

/// Frequency-independent part of a link.
#[derive(Debug, Clone, Copy, PartialEq)]
struct LinkGeometry {
    d3d: f64,
    d_obs: f64,
    shadow_unit: f64,
}

/// Channel model with deterministic shadowing and an optional result cache.
#[derive(Debug, Clone)]
pub struct Channel {
    params: ChannelParams,
    seed: u64,
    cache: BTreeMap<(Cell, Cell, u64), ChannelResult>,
    hits: u64,
    misses: u64,
    scratch: Vec<BuildingId>,
}

impl Channel {
    pub fn new(params: ChannelParams, seed: u64) -> Self {
        Channel {
            params,
            seed,
            cache: BTreeMap::new(),
            hits: 0,
            misses: 0,
            scratch: Vec::new(),
        }
    }

    pub fn params(&self) -> &ChannelParams {
        &self.params
    }

    pub fn hits(&self) -> u64 {
        self.hits
    }

    pub fn misses(&self) -> u64 {
        self.misses
    }

    pub fn hit_rate(&self) -> Option<f64> {
        let n = self.hits + self.misses;
        (n > 0).then(|| self.hits as f64 / n as f64)
    }

    /// Standard normal draw fixed per unordered cell pair and seed.
    fn shadow_unit(&self, a: GeoPoint, b: GeoPoint) -> f64 {
        let ca = cell_of(a, self.params.cache_cell);
        let cb = cell_of(b, self.params.cache_cell);
        let (lo, hi) = if ca <= cb { (ca, cb) } else { (cb, ca) };
        let key = hash_words(
            self.seed,
            &[lo.0 as u64, lo.1 as u64, lo.2 as u64, hi.0 as u64, hi.1 as u64, hi.2 as u64],
        );
        StandardNormal.sample(&mut RandomStream::from_key(key))
    }

    fn geometry(&mut self, world: &World, a: GeoPoint, b: GeoPoint) -> LinkGeometry {
        LinkGeometry {
            d3d: a.distance(b).max(MIN_DISTANCE),
            d_obs: obstructed_distance(world, a, b, &mut self.scratch),
            shadow_unit: self.shadow_unit(a, b),
        }
    }

    fn finish(&self, g: LinkGeometry, q: &ChannelQuery) -> ChannelResult {
        let p = &self.params;
        let los = g.d_obs == 0.0;
        let sigma = if los { p.shadowing_sigma_los_db } else { p.shadowing_sigma_nlos_db };
        let shadow = sigma * g.shadow_unit;
        let pl = free_space_intercept(q.frequency_hz)
            + 10.0 * p.path_loss_exponent * g.d3d.log10()
            + p.obstruction_db_per_m * g.d_obs
            + shadow;
        let pl = pl.max(free_space_loss(q.frequency_hz, g.d3d));
        let rx = q.tx_power_dbm + q.tx_gain_dbi + q.rx_gain_dbi - pl;
        ChannelResult {
            d3d: g.d3d,
            d_obs: g.d_obs,
            los,
            path_loss_db: pl,
            rsrp_dbm: rx - 10.0 * p.resource_elements.log10(),
            shadow_db: shadow,
            rx_power_dbm: rx,
        }
    }

    /// Uncached evaluation at the exact query positions.
    pub fn path_loss(&mut self, world: &World, q: &ChannelQuery) -> ChannelResult {
        let g = self.geometry(world, q.tx, q.rx);
        self.finish(g, q)
    }

    /// Cached evaluation: both endpoints snap to their cell centres, and the
    /// path-loss part of the result is stored per unordered cell pair and
    /// frequency. Falls back to [`Channel::path_loss`] when the cache is
    /// disabled.
    pub fn cached_path_loss(&mut self, world: &World, q: &ChannelQuery) -> ChannelResult {
        if !self.params.cache_enabled {
            return self.path_loss(world, q);
        }
        let size = self.params.cache_cell;
        let ct = cell_of(q.tx, size);
        let cr = cell_of(q.rx, size);
        let (lo, hi) = if ct <= cr { (ct, cr) } else { (cr, ct) };
        let key = (lo, hi, q.frequency_hz.to_bits());
        let base = match self.cache.get(&key) {
            Some(r) => {
                self.hits += 1;
                *r
            }
            None => {
                self.misses += 1;
                let g = self.geometry(world, cell_center(lo, size), cell_center(hi, size));
                let unit = ChannelQuery {
                    tx_power_dbm: 0.0,
                    tx_gain_dbi: 0.0,
                    rx_gain_dbi: 0.0,
                    ..*q
                };
                let r = self.finish(g, &unit);
                self.cache.insert(key, r);
                r
            }
        };
        let offset = q.tx_power_dbm + q.tx_gain_dbi + q.rx_gain_dbi;
        ChannelResult {
            rsrp_dbm: base.rsrp_dbm + offset,
            rx_power_dbm: base.rx_power_dbm + offset,
            ..base
        }
    }

    /// Dispatches on the cache setting.
    pub fn evaluate(&mut self, world: &World, q: &ChannelQuery) -> ChannelResult {
        self.cached_path_loss(world, q)
    }
}
