//! Planar polygon and extruded-prism geometry.
//!
//! Buildings are vertical prisms over a simple footprint polygon, spanning
//! `z` in `[0, height]`. The segment/prism clip works for any simple
//! footprint, convex or not: the plan-view segment is split at every edge
//! crossing and each piece is classified by its midpoint.

use num_traits::Float;
use alloc::vec::Vec;


use crate::math::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Aabb2 {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Aabb2 {
    pub fn empty() -> Self {
        Aabb2 {
            min_x: f64::INFINITY,
            min_y: f64::INFINITY,
            max_x: f64::NEG_INFINITY,
            max_y: f64::NEG_INFINITY,
        }
    }

    pub fn of_points<'a>(pts: impl IntoIterator<Item = &'a Vec3>) -> Self {
        let mut b = Aabb2::empty();
        for p in pts {
            b.include(p.x, p.y);
        }
        b
    }

    pub fn include(&mut self, x: f64, y: f64) {
        self.min_x = self.min_x.min(x);
        self.min_y = self.min_y.min(y);
        self.max_x = self.max_x.max(x);
        self.max_y = self.max_y.max(y);
    }

    pub fn is_empty(&self) -> bool {
        self.min_x > self.max_x || self.min_y > self.max_y
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.min_x && x <= self.max_x && y >= self.min_y && y <= self.max_y
    }

    pub fn inflate(&self, m: f64) -> Aabb2 {
        Aabb2 {
            min_x: self.min_x - m,
            min_y: self.min_y - m,
            max_x: self.max_x + m,
            max_y: self.max_y + m,
        }
    }

    pub fn overlaps(&self, o: &Aabb2) -> bool {
        self.min_x <= o.max_x && o.min_x <= self.max_x && self.min_y <= o.max_y && o.min_y <= self.max_y
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }
}

fn cross2(ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
    ax * by - ay * bx
}

/// Shoelace area; positive for counter-clockwise rings.
pub fn signed_area(ring: &[Vec3]) -> f64 {
    let n = ring.len();
    let mut acc = 0.0;
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        acc += a.x * b.y - b.x * a.y;
    }
    acc / 2.0
}

fn segments_intersect(a: Vec3, b: Vec3, c: Vec3, d: Vec3) -> bool {
    let d1 = cross2(d.x - c.x, d.y - c.y, a.x - c.x, a.y - c.y);
    let d2 = cross2(d.x - c.x, d.y - c.y, b.x - c.x, b.y - c.y);
    let d3 = cross2(b.x - a.x, b.y - a.y, c.x - a.x, c.y - a.y);
    let d4 = cross2(b.x - a.x, b.y - a.y, d.x - a.x, d.y - a.y);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    let on = |p: Vec3, q: Vec3, r: Vec3| {
        r.x >= p.x.min(q.x) && r.x <= p.x.max(q.x) && r.y >= p.y.min(q.y) && r.y <= p.y.max(q.y)
    };
    (d1 == 0.0 && on(c, d, a)) || (d2 == 0.0 && on(c, d, b)) || (d3 == 0.0 && on(a, b, c)) || (d4 == 0.0 && on(a, b, d))
}

/// True when no two non-adjacent edges of the ring touch.
pub fn is_simple(ring: &[Vec3]) -> bool {
    let n = ring.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        let (a, b) = (ring[i], ring[(i + 1) % n]);
        if a.x == b.x && a.y == b.y {
            return false;
        }
        for j in (i + 1)..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            let (c, d) = (ring[j], ring[(j + 1) % n]);
            if segments_intersect(a, b, c, d) {
                return false;
            }
        }
    }
    signed_area(ring).abs() > 1e-9
}

/// Even-odd point-in-polygon test in plan view.
pub fn point_in_polygon(x: f64, y: f64, ring: &[Vec3]) -> bool {
    let n = ring.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (pi, pj) = (ring[i], ring[j]);
        if (pi.y > y) != (pj.y > y) {
            let x_cross = pj.x + (y - pj.y) * (pi.x - pj.x) / (pi.y - pj.y);
            if x < x_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Closest point to `(x, y)` on the polygon boundary, and its distance.
pub fn closest_on_boundary(x: f64, y: f64, ring: &[Vec3]) -> (f64, f64, f64) {
    let n = ring.len();
    let mut best = (ring[0].x, ring[0].y, f64::INFINITY);
    for i in 0..n {
        let (a, b) = (ring[i], ring[(i + 1) % n]);
        let (ex, ey) = (b.x - a.x, b.y - a.y);
        let len2 = ex * ex + ey * ey;
        let t = if len2 > 0.0 {
            (((x - a.x) * ex + (y - a.y) * ey) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let (qx, qy) = (a.x + t * ex, a.y + t * ey);
        let d = ((x - qx).powi(2) + (y - qy).powi(2)).sqrt();
        if d < best.2 {
            best = (qx, qy, d);
        }
    }
    best
}

/// Parameter intervals `[t0, t1]` of the plan-view segment `a -> b` lying
/// inside the polygon.
pub fn plan_intervals_inside(a: Vec3, b: Vec3, ring: &[Vec3], out: &mut Vec<(f64, f64)>) {
    out.clear();
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let mut cuts: Vec<f64> = Vec::with_capacity(8);
    cuts.push(0.0);
    cuts.push(1.0);
    let n = ring.len();
    for i in 0..n {
        let (c, d) = (ring[i], ring[(i + 1) % n]);
        let (ex, ey) = (d.x - c.x, d.y - c.y);
        let denom = cross2(dx, dy, ex, ey);
        if denom == 0.0 {
            continue;
        }
        let (wx, wy) = (c.x - a.x, c.y - a.y);
        let t = cross2(wx, wy, ex, ey) / denom;
        let u = cross2(wx, wy, dx, dy) / denom;
        if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
            cuts.push(t);
        }
    }
    cuts.sort_by(|p, q| p.partial_cmp(q).expect("finite cut"));
    cuts.dedup();
    for w in cuts.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        if t1 - t0 <= 0.0 {
            continue;
        }
        let tm = 0.5 * (t0 + t1);
        if point_in_polygon(a.x + tm * dx, a.y + tm * dy, ring) {
            match out.last_mut() {
                Some(last) if last.1 == t0 => last.1 = t1,
                _ => out.push((t0, t1)),
            }
        }
    }
}

/// Length of the 3D segment `a -> b` inside the prism `footprint x [0, height]`.
pub fn segment_prism_length(a: Vec3, b: Vec3, footprint: &[Vec3], height: f64, scratch: &mut Vec<(f64, f64)>) -> f64 {
    // Canonical endpoint order makes the result exactly symmetric.
    let (a, b) = if (a.x, a.y, a.z) <= (b.x, b.y, b.z) { (a, b) } else { (b, a) };
    let len = a.distance(b);
    if len == 0.0 {
        return 0.0;
    }
    // z(t) = a.z + t * dz must lie in [0, height].
    let dz = b.z - a.z;
    let (tz0, tz1) = if dz == 0.0 {
        if a.z < 0.0 || a.z > height {
            return 0.0;
        }
        (0.0, 1.0)
    } else {
        let t_lo = (0.0 - a.z) / dz;
        let t_hi = (height - a.z) / dz;
        let (lo, hi) = if t_lo < t_hi { (t_lo, t_hi) } else { (t_hi, t_lo) };
        (lo.max(0.0), hi.min(1.0))
    };
    if tz1 <= tz0 {
        return 0.0;
    }
    if a.x == b.x && a.y == b.y {
        return if point_in_polygon(a.x, a.y, footprint) { (tz1 - tz0) * len } else { 0.0 };
    }
    plan_intervals_inside(a, b, footprint, scratch);
    let mut inside = 0.0;
    for &(t0, t1) in scratch.iter() {
        let lo = t0.max(tz0);
        let hi = t1.min(tz1);
        if hi > lo {
            inside += hi - lo;
        }
    }
    inside * len
}

/// Distance from `p` to the prism and the outward direction from the closest
/// prism point towards `p`. Points inside the prism report distance zero and
/// the direction of the nearest exit.
pub fn prism_distance(p: Vec3, footprint: &[Vec3], height: f64) -> (f64, Vec3) {
    let inside_plan = point_in_polygon(p.x, p.y, footprint);
    let (qx, qy, dh) = closest_on_boundary(p.x, p.y, footprint);
    if inside_plan && p.z >= 0.0 && p.z <= height {
        let to_roof = height - p.z;
        let dir = if to_roof < dh {
            Vec3::Z
        } else {
            Vec3::new(qx - p.x, qy - p.y, 0.0).normalized()
        };
        return (0.0, dir);
    }
    let dz = if p.z > height {
        p.z - height
    } else if p.z < 0.0 {
        p.z
    } else {
        0.0
    };
    let horizontal = if inside_plan {
        Vec3::ZERO
    } else {
        Vec3::new(p.x - qx, p.y - qy, 0.0)
    };
    let offset = Vec3::new(horizontal.x, horizontal.y, dz);
    let d = offset.norm();
    (d, offset.normalized())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Vec<Vec3> {
        vec![
            Vec3::new(x0, y0, 0.0),
            Vec3::new(x1, y0, 0.0),
            Vec3::new(x1, y1, 0.0),
            Vec3::new(x0, y1, 0.0),
        ]
    }

    #[test]
    fn horizontal_crossing_of_box() {
        let fp = rect(10.0, -5.0, 22.0, 5.0);
        let mut s = Vec::new();
        let l = segment_prism_length(Vec3::new(0.0, 0.0, 5.0), Vec3::new(40.0, 0.0, 5.0), &fp, 20.0, &mut s);
        assert!((l - 12.0).abs() < 1e-9);
    }

    #[test]
    fn above_roof_is_clear() {
        let fp = rect(10.0, -5.0, 22.0, 5.0);
        let mut s = Vec::new();
        let l = segment_prism_length(Vec3::new(0.0, 0.0, 50.0), Vec3::new(40.0, 0.0, 50.0), &fp, 20.0, &mut s);
        assert_eq!(l, 0.0);
    }

    #[test]
    fn concave_footprint_counts_both_arms() {
        // U shape opening to +y: arms at x in [0,5] and [15,20], base y in [0,5].
        let u = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(20.0, 0.0, 0.0),
            Vec3::new(20.0, 20.0, 0.0),
            Vec3::new(15.0, 20.0, 0.0),
            Vec3::new(15.0, 5.0, 0.0),
            Vec3::new(5.0, 5.0, 0.0),
            Vec3::new(5.0, 20.0, 0.0),
            Vec3::new(0.0, 20.0, 0.0),
        ];
        assert!(is_simple(&u));
        assert!(signed_area(&u) > 0.0);
        let mut s = Vec::new();
        let l = segment_prism_length(Vec3::new(-10.0, 10.0, 1.0), Vec3::new(30.0, 10.0, 1.0), &u, 10.0, &mut s);
        assert!((l - 10.0).abs() < 1e-9);
    }

    #[test]
    fn bow_tie_is_not_simple() {
        let bow = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(10.0, 10.0, 0.0),
            Vec3::new(10.0, 0.0, 0.0),
            Vec3::new(0.0, 10.0, 0.0),
        ];
        assert!(!is_simple(&bow));
        assert!(is_simple(&rect(0.0, 0.0, 1.0, 1.0)));
    }

    #[test]
    fn vertical_segment_through_roof() {
        let fp = rect(0.0, 0.0, 10.0, 10.0);
        let mut s = Vec::new();
        let l = segment_prism_length(Vec3::new(5.0, 5.0, 30.0), Vec3::new(5.0, 5.0, 0.0), &fp, 12.0, &mut s);
        assert!((l - 12.0).abs() < 1e-9);
    }

    #[test]
    fn distance_to_prism_sides_and_roof() {
        let fp = rect(0.0, 0.0, 10.0, 10.0);
        let (d, n) = prism_distance(Vec3::new(13.0, 5.0, 3.0), &fp, 10.0);
        assert!((d - 3.0).abs() < 1e-12);
        assert!((n.x - 1.0).abs() < 1e-12);
        let (d, n) = prism_distance(Vec3::new(5.0, 5.0, 14.0), &fp, 10.0);
        assert!((d - 4.0).abs() < 1e-12);
        assert!((n.z - 1.0).abs() < 1e-12);
        let (d, _) = prism_distance(Vec3::new(5.0, 5.0, 5.0), &fp, 10.0);
        assert_eq!(d, 0.0);
    }
}
