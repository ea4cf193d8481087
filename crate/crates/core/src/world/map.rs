//! Conversion of raw OpenStreetMap elements into a [`World`].
//!
//! The XML reader lives in the `hybridsim` crate; this module only interprets
//! nodes, ways and the handful of tags the simulator understands.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{NodeId, World, WorldBuilder, WorldError};
use crate::geo::{GeoPoint, Projection};
use crate::math::Vec3;

#[derive(Debug, Clone, PartialEq)]
pub struct RawNode {
    pub id: i64,
    pub lat: f64,
    pub lon: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawWay {
    pub id: i64,
    pub refs: Vec<i64>,
    pub tags: BTreeMap<String, String>,
}

impl RawWay {
    pub fn tag(&self, k: &str) -> Option<&str> {
        self.tags.get(k).map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MapData {
    pub nodes: Vec<RawNode>,
    pub ways: Vec<RawWay>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldOptions {
    pub default_building_height: f64,
    pub level_height: f64,
    /// Used when `maxspeed` is absent or unparseable, m/s.
    pub default_speed: f64,
    pub lane_width: f64,
    pub cell_size: f64,
}

impl Default for WorldOptions {
    fn default() -> Self {
        WorldOptions {
            default_building_height: 10.0,
            level_height: 3.0,
            default_speed: 13.9,
            lane_width: 3.5,
            cell_size: 50.0,
        }
    }
}

/// Splits "30 mph" into (30.0, "mph").
fn number_and_unit(s: &str) -> Option<(f64, &str)> {
    let s = s.trim();
    let end = s.find(|c: char| !(c.is_ascii_digit() || c == '.')).unwrap_or(s.len());
    if end == 0 {
        return None;
    }
    let n = s[..end].parse::<f64>().ok().filter(|v| v.is_finite())?;
    Some((n, s[end..].trim()))
}

fn leading_number(s: &str) -> Option<f64> {
    number_and_unit(s).map(|(n, _)| n)
}

/// Parses OSM `maxspeed` ("50", "30 mph", "50 km/h") into m/s.
pub fn parse_maxspeed(v: &str) -> Option<f64> {
    let (n, unit) = number_and_unit(v)?;
    if n <= 0.0 {
        return None;
    }
    let kmh = match unit {
        "" | "km/h" | "kmh" | "kph" => n,
        "mph" => n * 1.609_344,
        "knots" => n * 1.852,
        _ => return None,
    };
    Some(kmh / 3.6)
}

/// Building height from `height`, else `building:levels` x level height,
/// else the default.
pub fn building_height(way: &RawWay, opts: &WorldOptions) -> f64 {
    if let Some(h) = way.tag("height").and_then(leading_number).filter(|h| *h > 0.0) {
        return h;
    }
    if let Some(l) = way.tag("building:levels").and_then(leading_number).filter(|l| *l > 0.0) {
        return l * opts.level_height;
    }
    opts.default_building_height
}

fn is_building(way: &RawWay) -> bool {
    matches!(way.tag("building"), Some(v) if v != "no")
}

fn is_road(way: &RawWay) -> bool {
    way.tag("highway").is_some()
}

struct DisjointSet(Vec<usize>);

impl DisjointSet {
    fn find(&mut self, mut i: usize) -> usize {
        while self.0[i] != i {
            self.0[i] = self.0[self.0[i]];
            i = self.0[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

impl World {
    /// Build a world from OSM elements. Roads are split at intersections
    /// (nodes shared by several highway ways, or way endpoints); only the
    /// largest connected road component is kept.
    pub fn from_map(data: &MapData, opts: &WorldOptions) -> Result<World, WorldError> {
        let coords: BTreeMap<i64, (f64, f64)> = data.nodes.iter().map(|n| (n.id, (n.lat, n.lon))).collect();

        let mut road_ways = Vec::new();
        let mut building_ways = Vec::new();
        for w in &data.ways {
            let road = is_road(w);
            let building = is_building(w);
            if !(road || building) {
                continue;
            }
            for r in &w.refs {
                if !coords.contains_key(r) {
                    return Err(WorldError::MissingNode { way: w.id, node: *r });
                }
            }
            if road {
                road_ways.push(w);
            } else {
                building_ways.push(w);
            }
        }

        // Projection origin: centroid of every referenced node.
        let used: BTreeSet<i64> = road_ways
            .iter()
            .chain(building_ways.iter())
            .flat_map(|w| w.refs.iter().copied())
            .collect();
        if road_ways.iter().all(|w| w.refs.len() < 2) {
            return Err(WorldError::EmptyRoadNetwork);
        }
        let (mut lat_sum, mut lon_sum) = (0.0, 0.0);
        for id in &used {
            let (la, lo) = coords[id];
            lat_sum += la;
            lon_sum += lo;
        }
        let projection = Projection::new(lat_sum / used.len() as f64, lon_sum / used.len() as f64);
        let project = |id: i64| -> GeoPoint {
            let (la, lo) = coords[&id];
            let (x, y) = projection.forward(la, lo);
            Vec3::new(x, y, 0.0)
        };

        // Intersections: endpoints and nodes shared between highway ways.
        let mut usage: BTreeMap<i64, u32> = BTreeMap::new();
        for w in &road_ways {
            let mut refs = w.refs.clone();
            refs.dedup();
            for (i, r) in refs.iter().enumerate() {
                let endpoint = i == 0 || i == refs.len() - 1;
                *usage.entry(*r).or_default() += if endpoint { 2 } else { 1 };
            }
        }

        struct Piece {
            from: i64,
            to: i64,
            points: Vec<GeoPoint>,
            lanes: u32,
            speed: f64,
        }
        let mut pieces = Vec::new();
        for w in &road_ways {
            let mut refs = w.refs.clone();
            refs.dedup();
            if refs.len() < 2 {
                continue;
            }
            let speed = w.tag("maxspeed").and_then(parse_maxspeed).unwrap_or(opts.default_speed);
            let lanes = w
                .tag("lanes")
                .and_then(leading_number)
                .map(|l| l.max(1.0) as u32)
                .unwrap_or(1);
            let mut start = 0;
            for i in 1..refs.len() {
                let split = i == refs.len() - 1 || usage[&refs[i]] >= 2;
                if split {
                    let points: Vec<GeoPoint> = refs[start..=i].iter().map(|&r| project(r)).collect();
                    let len: f64 = points.windows(2).map(|p| p[0].distance(p[1])).sum();
                    if len > 0.0 {
                        pieces.push(Piece {
                            from: refs[start],
                            to: refs[i],
                            points,
                            lanes,
                            speed,
                        });
                    }
                    start = i;
                }
            }
        }
        if pieces.is_empty() {
            return Err(WorldError::EmptyRoadNetwork);
        }

        // Keep the largest connected component.
        let mut ids: Vec<i64> = pieces.iter().flat_map(|p| [p.from, p.to]).collect();
        ids.sort_unstable();
        ids.dedup();
        let slot = |id: i64| ids.binary_search(&id).expect("endpoint indexed");
        let mut dsu = DisjointSet((0..ids.len()).collect());
        for p in &pieces {
            dsu.union(slot(p.from), slot(p.to));
        }
        let mut size = vec![0usize; ids.len()];
        for p in &pieces {
            let root = dsu.find(slot(p.from));
            size[root] += 1;
        }
        let main_root = (0..ids.len()).max_by_key(|&i| (size[i], usize::MAX - i)).expect("non-empty");

        let mut builder = WorldBuilder::new()
            .projection(projection)
            .lane_width(opts.lane_width)
            .cell_size(opts.cell_size);
        let mut node_ids: BTreeMap<i64, NodeId> = BTreeMap::new();
        let mut dropped = 0usize;
        for p in pieces {
            if dsu.find(slot(p.from)) != main_root {
                dropped += 1;
                continue;
            }
            let mut node_for = |osm: i64, b: &mut WorldBuilder| -> NodeId {
                *node_ids.entry(osm).or_insert_with(|| b.add_node_with_osm_id(osm, project(osm)))
            };
            let from = node_for(p.from, &mut builder);
            let to = node_for(p.to, &mut builder);
            builder.add_road_polyline(from, to, p.points, p.lanes, p.speed);
        }
        if dropped > 0 {
            builder.warn(alloc::format!("{dropped} road segments outside the main connected component dropped"));
        }

        for w in building_ways {
            if w.refs.len() < 4 || w.refs.first() != w.refs.last() {
                builder.warn(alloc::format!("building {}: way is not a closed ring, skipped", w.id));
                continue;
            }
            let ring: Vec<GeoPoint> = w.refs.iter().map(|&r| project(r)).collect();
            builder.add_building(w.id, ring, building_height(w, opts));
        }
        Ok(builder.build())
    }
}
