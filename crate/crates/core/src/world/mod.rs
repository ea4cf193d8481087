//! Immutable scenario world: road graph and buildings.

mod graph;
mod index;
mod map;

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use index::GridIndex;
pub use map::{MapData, RawNode, RawWay, WorldOptions};

use crate::geo::{GeoPoint, Projection};
use crate::geometry::{self, Aabb2};
use crate::math::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SegmentId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BuildingId(pub u32);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WorldError {
    #[error("way {way} references node {node}, which is not in the document")]
    MissingNode { way: i64, node: i64 },
    #[error("empty road network")]
    EmptyRoadNetwork,
    #[error("unknown intersection {0:?}")]
    UnknownIntersection(NodeId),
    #[error("no intersection for OSM node {0}")]
    UnknownOsmNode(i64),
}

#[derive(Debug, Clone)]
pub struct Intersection {
    pub id: NodeId,
    /// OSM id when loaded from a map; synthetic worlds use the index.
    pub osm_id: i64,
    pub position: GeoPoint,
    pub segments: Vec<SegmentId>,
}

#[derive(Debug, Clone)]
pub struct RoadSegment {
    pub id: SegmentId,
    pub from: NodeId,
    pub to: NodeId,
    pub polyline: Vec<GeoPoint>,
    /// Cumulative arc length at each polyline vertex.
    pub cumulative: Vec<f64>,
    pub lane_count: u32,
    /// m/s
    pub speed_limit: f64,
}

impl RoadSegment {
    fn new(id: SegmentId, from: NodeId, to: NodeId, polyline: Vec<GeoPoint>, lane_count: u32, speed_limit: f64) -> Self {
        let mut cumulative = Vec::with_capacity(polyline.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for w in polyline.windows(2) {
            acc += w[0].distance(w[1]);
            cumulative.push(acc);
        }
        RoadSegment {
            id,
            from,
            to,
            polyline,
            cumulative,
            lane_count: lane_count.max(1),
            speed_limit,
        }
    }

    pub fn length(&self) -> f64 {
        *self.cumulative.last().unwrap_or(&0.0)
    }

    pub fn travel_time(&self) -> f64 {
        self.length() / self.speed_limit
    }

    /// Centerline point and unit heading at arc length `s` from the start of
    /// the traversal direction.
    pub fn point_at(&self, s: f64, forward: bool) -> (GeoPoint, Vec3) {
        let len = self.length();
        let s = s.clamp(0.0, len);
        let along = if forward { s } else { len - s };
        let idx = match self.cumulative.binary_search_by(|c| c.partial_cmp(&along).expect("finite")) {
            Ok(i) => i.min(self.polyline.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.polyline.len() - 2),
        };
        let (a, b) = (self.polyline[idx], self.polyline[idx + 1]);
        let seg_len = self.cumulative[idx + 1] - self.cumulative[idx];
        let t = if seg_len > 0.0 { (along - self.cumulative[idx]) / seg_len } else { 0.0 };
        let p = a.lerp(b, t);
        let dir = (b - a).normalized();
        (p, if forward { dir } else { -dir })
    }

    pub fn start_node(&self, forward: bool) -> NodeId {
        if forward {
            self.from
        } else {
            self.to
        }
    }

    pub fn end_node(&self, forward: bool) -> NodeId {
        if forward {
            self.to
        } else {
            self.from
        }
    }
}

/// A segment traversed in a given direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RouteLeg {
    pub segment: SegmentId,
    pub forward: bool,
}

#[derive(Debug, Clone)]
pub struct Building {
    pub id: BuildingId,
    pub osm_id: i64,
    /// Counter-clockwise simple ring at z = 0, not closed.
    pub footprint: Vec<GeoPoint>,
    pub height: f64,
    pub bbox: Aabb2,
}

#[derive(Debug, Clone)]
pub struct World {
    nodes: Vec<Intersection>,
    segments: Vec<RoadSegment>,
    buildings: Vec<Building>,
    index: GridIndex,
    bounds: Aabb2,
    max_building_height: f64,
    projection: Option<Projection>,
    lane_width: f64,
    warnings: Vec<String>,
}

/// Incremental construction of a world in local coordinates.
#[derive(Debug, Clone)]
pub struct WorldBuilder {
    nodes: Vec<Intersection>,
    segments: Vec<RoadSegment>,
    buildings: Vec<Building>,
    projection: Option<Projection>,
    lane_width: f64,
    cell_size: f64,
    warnings: Vec<String>,
}

impl Default for WorldBuilder {
    fn default() -> Self {
        Self::new()
    }
}

impl WorldBuilder {
    pub fn new() -> Self {
        WorldBuilder {
            nodes: Vec::new(),
            segments: Vec::new(),
            buildings: Vec::new(),
            projection: None,
            lane_width: 3.5,
            cell_size: 50.0,
            warnings: Vec::new(),
        }
    }

    pub fn lane_width(mut self, w: f64) -> Self {
        self.lane_width = w;
        self
    }

    pub fn cell_size(mut self, c: f64) -> Self {
        self.cell_size = c;
        self
    }

    pub fn projection(mut self, p: Projection) -> Self {
        self.projection = Some(p);
        self
    }

    pub fn warn(&mut self, w: String) {
        self.warnings.push(w);
    }

    pub fn add_node(&mut self, x: f64, y: f64) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(Intersection {
            id,
            osm_id: id.0 as i64,
            position: Vec3::new(x, y, 0.0),
            segments: Vec::new(),
        });
        id
    }

    pub fn add_node_with_osm_id(&mut self, osm_id: i64, p: GeoPoint) -> NodeId {
        let id = self.add_node(p.x, p.y);
        self.nodes[id.0 as usize].osm_id = osm_id;
        id
    }

    /// Straight road between two nodes.
    pub fn add_road(&mut self, from: NodeId, to: NodeId, speed_limit: f64) -> SegmentId {
        let a = self.nodes[from.0 as usize].position;
        let b = self.nodes[to.0 as usize].position;
        self.add_road_polyline(from, to, alloc::vec![a, b], 1, speed_limit)
    }

    /// Road following `polyline`, whose first and last points should be the
    /// node positions. The polyline must have positive length.
    pub fn add_road_polyline(
        &mut self,
        from: NodeId,
        to: NodeId,
        polyline: Vec<GeoPoint>,
        lane_count: u32,
        speed_limit: f64,
    ) -> SegmentId {
        let id = SegmentId(self.segments.len() as u32);
        let seg = RoadSegment::new(id, from, to, polyline, lane_count, speed_limit);
        self.nodes[from.0 as usize].segments.push(id);
        if to != from {
            self.nodes[to.0 as usize].segments.push(id);
        }
        self.segments.push(seg);
        id
    }

    /// Adds a building after normalising its ring. Returns `None` (and
    /// records a warning) for rings that are not simple polygons.
    pub fn add_building(&mut self, osm_id: i64, mut footprint: Vec<GeoPoint>, height: f64) -> Option<BuildingId> {
        if footprint.len() > 1 {
            let (f, l) = (footprint[0], footprint[footprint.len() - 1]);
            if f.x == l.x && f.y == l.y {
                footprint.pop();
            }
        }
        footprint.dedup_by(|a, b| a.x == b.x && a.y == b.y);
        for p in footprint.iter_mut() {
            p.z = 0.0;
        }
        if !geometry::is_simple(&footprint) {
            self.warnings
                .push(alloc::format!("building {osm_id}: footprint is not a simple polygon, skipped"));
            return None;
        }
        if !(height > 0.0) {
            self.warnings.push(alloc::format!("building {osm_id}: non-positive height, skipped"));
            return None;
        }
        if geometry::signed_area(&footprint) < 0.0 {
            footprint.reverse();
        }
        let id = BuildingId(self.buildings.len() as u32);
        let bbox = Aabb2::of_points(footprint.iter());
        self.buildings.push(Building {
            id,
            osm_id,
            footprint,
            height,
            bbox,
        });
        Some(id)
    }

    pub fn build(self) -> World {
        let mut bounds = Aabb2::empty();
        for n in &self.nodes {
            bounds.include(n.position.x, n.position.y);
        }
        for s in &self.segments {
            for p in &s.polyline {
                bounds.include(p.x, p.y);
            }
        }
        for b in &self.buildings {
            bounds.include(b.bbox.min_x, b.bbox.min_y);
            bounds.include(b.bbox.max_x, b.bbox.max_y);
        }
        if bounds.is_empty() {
            bounds = Aabb2 {
                min_x: 0.0,
                min_y: 0.0,
                max_x: 0.0,
                max_y: 0.0,
            };
        }
        let index = GridIndex::new(&self.buildings, self.cell_size);
        let max_building_height = self.buildings.iter().map(|b| b.height).fold(0.0, f64::max);
        World {
            nodes: self.nodes,
            segments: self.segments,
            buildings: self.buildings,
            index,
            bounds,
            max_building_height,
            projection: self.projection,
            lane_width: self.lane_width,
            warnings: self.warnings,
        }
    }
}

impl World {
    pub fn nodes(&self) -> &[Intersection] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Intersection {
        &self.nodes[id.0 as usize]
    }

    pub fn segments(&self) -> &[RoadSegment] {
        &self.segments
    }

    pub fn segment(&self, id: SegmentId) -> &RoadSegment {
        &self.segments[id.0 as usize]
    }

    pub fn buildings(&self) -> &[Building] {
        &self.buildings
    }

    pub fn building(&self, id: BuildingId) -> &Building {
        &self.buildings[id.0 as usize]
    }

    /// Plan-view bounding box of all roads and buildings.
    pub fn bounds(&self) -> Aabb2 {
        self.bounds
    }

    pub fn max_building_height(&self) -> f64 {
        self.max_building_height
    }

    pub fn projection(&self) -> Option<Projection> {
        self.projection
    }

    pub fn lane_width(&self) -> f64 {
        self.lane_width
    }

    /// Non-fatal issues found while loading (skipped buildings, etc.).
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn node_by_osm_id(&self, osm_id: i64) -> Option<NodeId> {
        self.nodes.iter().find(|n| n.osm_id == osm_id).map(|n| n.id)
    }

    pub fn check_node(&self, id: NodeId) -> Result<(), WorldError> {
        if (id.0 as usize) < self.nodes.len() {
            Ok(())
        } else {
            Err(WorldError::UnknownIntersection(id))
        }
    }

    /// Legs leaving the end node of `leg`. The U-turn back onto the same
    /// segment is excluded unless it is the only option (dead end).
    pub fn next_legs(&self, leg: RouteLeg) -> Vec<RouteLeg> {
        let end = self.segment(leg.segment).end_node(leg.forward);
        let mut out = Vec::new();
        let mut uturn = None;
        for &sid in &self.node(end).segments {
            let seg = self.segment(sid);
            // Loops (from == to) offer both directions.
            for forward in [true, false] {
                if seg.start_node(forward) != end {
                    continue;
                }
                let cand = RouteLeg { segment: sid, forward };
                if sid == leg.segment && forward != leg.forward {
                    uturn = Some(cand);
                    continue;
                }
                if sid == leg.segment && seg.from != seg.to {
                    continue;
                }
                if !out.contains(&cand) {
                    out.push(cand);
                }
            }
        }
        if out.is_empty() {
            out.extend(uturn);
        }
        out
    }

    /// Lane-centre position for a car at arc length `s` along `leg`, offset
    /// half a lane width to the right of the centerline.
    pub fn lane_position(&self, leg: RouteLeg, s: f64) -> (GeoPoint, Vec3) {
        let (p, dir) = self.segment(leg.segment).point_at(s, leg.forward);
        let right = Vec3::new(dir.y, -dir.x, 0.0);
        (p + right * (self.lane_width / 2.0), dir)
    }

    /// Superset of the buildings whose prism can intersect the 3D segment.
    pub fn buildings_near(&self, a: GeoPoint, b: GeoPoint) -> Vec<BuildingId> {
        let mut out = Vec::new();
        self.buildings_near_into(a, b, &mut out);
        out
    }

    pub fn buildings_near_into(&self, a: GeoPoint, b: GeoPoint, out: &mut Vec<BuildingId>) {
        out.clear();
        if a.z.min(b.z) > self.max_building_height {
            return;
        }
        self.index.query_segment(a, b, out);
        let seg_box = Aabb2::of_points([a, b].iter());
        out.retain(|id| {
            let bld = &self.buildings[id.0 as usize];
            bld.bbox.overlaps(&seg_box)
        });
    }

    /// Buildings whose bounding box overlaps `area`.
    pub fn buildings_in_box(&self, area: &Aabb2, out: &mut Vec<BuildingId>) {
        out.clear();
        self.index.query_box(area, out);
        out.retain(|id| self.buildings[id.0 as usize].bbox.overlaps(area));
    }

    /// True when `p` lies inside some building volume inflated by `margin`.
    pub fn inside_building(&self, p: GeoPoint, margin: f64) -> bool {
        let area = Aabb2::of_points([p].iter()).inflate(margin);
        let mut ids = Vec::new();
        self.buildings_in_box(&area, &mut ids);
        ids.iter().any(|id| {
            let b = self.building(*id);
            geometry::prism_distance(p, &b.footprint, b.height).0 <= margin
        })
    }

    pub fn shortest_path(&self, from: NodeId, to: NodeId) -> Result<Option<Vec<RouteLeg>>, WorldError> {
        graph::shortest_path(self, from, to)
    }

    /// Route through consecutive waypoints; `None` if any hop is unreachable.
    pub fn route_through(&self, stops: &[NodeId]) -> Result<Option<Vec<RouteLeg>>, WorldError> {
        let mut legs = Vec::new();
        for w in stops.windows(2) {
            match self.shortest_path(w[0], w[1])? {
                Some(mut l) => legs.append(&mut l),
                None => return Ok(None),
            }
        }
        Ok(Some(legs))
    }
}
