use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;


use super::{Building, BuildingId};
use crate::geometry::Aabb2;
use crate::math::Vec3;

/// Uniform grid over building bounding boxes.
///
/// Each cell lists every building whose bbox touches it and remembers the
/// tallest of them, so segments passing above a cell can skip it.
#[derive(Debug, Clone)]
pub struct GridIndex {
    origin_x: f64,
    origin_y: f64,
    cell: f64,
    cols: usize,
    rows: usize,
    cells: Vec<Vec<BuildingId>>,
    cell_max_height: Vec<f64>,
}

impl GridIndex {
    pub fn new(buildings: &[Building], cell: f64) -> Self {
        let mut bounds = Aabb2::empty();
        for b in buildings {
            bounds.include(b.bbox.min_x, b.bbox.min_y);
            bounds.include(b.bbox.max_x, b.bbox.max_y);
        }
        if bounds.is_empty() {
            return GridIndex {
                origin_x: 0.0,
                origin_y: 0.0,
                cell,
                cols: 0,
                rows: 0,
                cells: Vec::new(),
                cell_max_height: Vec::new(),
            };
        }
        let cols = ((bounds.width() / cell).floor() as usize) + 1;
        let rows = ((bounds.height() / cell).floor() as usize) + 1;
        let mut idx = GridIndex {
            origin_x: bounds.min_x,
            origin_y: bounds.min_y,
            cell,
            cols,
            rows,
            cells: vec![Vec::new(); cols * rows],
            cell_max_height: vec![0.0; cols * rows],
        };
        for b in buildings {
            let (c0, r0) = idx.cell_of(b.bbox.min_x, b.bbox.min_y);
            let (c1, r1) = idx.cell_of(b.bbox.max_x, b.bbox.max_y);
            for r in r0..=r1 {
                for c in c0..=c1 {
                    let k = r * cols + c;
                    idx.cells[k].push(b.id);
                    idx.cell_max_height[k] = idx.cell_max_height[k].max(b.height);
                }
            }
        }
        idx
    }

    fn cell_of(&self, x: f64, y: f64) -> (usize, usize) {
        let c = ((x - self.origin_x) / self.cell).floor();
        let r = ((y - self.origin_y) / self.cell).floor();
        (
            (c.max(0.0) as usize).min(self.cols - 1),
            (r.max(0.0) as usize).min(self.rows - 1),
        )
    }

    pub fn query_box(&self, area: &Aabb2, out: &mut Vec<BuildingId>) {
        if self.cols == 0 {
            return;
        }
        let (c0, r0) = self.cell_of(area.min_x, area.min_y);
        let (c1, r1) = self.cell_of(area.max_x, area.max_y);
        for r in r0..=r1 {
            for c in c0..=c1 {
                out.extend_from_slice(&self.cells[r * self.cols + c]);
            }
        }
        out.sort_unstable();
        out.dedup();
    }

    /// Candidates for the 3D segment `a -> b`: every cell the plan-view
    /// segment passes through (supercover), skipping cells whose tallest
    /// building is below the segment over that column strip.
    pub fn query_segment(&self, a: Vec3, b: Vec3, out: &mut Vec<BuildingId>) {
        if self.cols == 0 {
            return;
        }
        let x_lo = a.x.min(b.x);
        let x_hi = a.x.max(b.x);
        let (c_lo, _) = self.cell_of(x_lo, a.y);
        let (c_hi, _) = self.cell_of(x_hi, a.y);
        let dx = b.x - a.x;
        for c in c_lo..=c_hi {
            // Portion of the segment within this column strip.
            let strip_lo = self.origin_x + c as f64 * self.cell;
            let strip_hi = strip_lo + self.cell;
            let (t0, t1) = if dx == 0.0 {
                (0.0, 1.0)
            } else {
                let (ta, tb) = ((strip_lo - a.x) / dx, (strip_hi - a.x) / dx);
                let (lo, hi) = if ta < tb { (ta, tb) } else { (tb, ta) };
                // Edge columns are clamped, so they own everything beyond them.
                let lo = if c == c_lo { 0.0 } else { lo.max(0.0) };
                let hi = if c == c_hi { 1.0 } else { hi.min(1.0) };
                (lo, hi)
            };
            if t1 < t0 {
                continue;
            }
            let p0 = a.lerp(b, t0);
            let p1 = a.lerp(b, t1);
            let z_min = p0.z.min(p1.z);
            let (_, r0) = self.cell_of(strip_lo, p0.y.min(p1.y));
            let (_, r1) = self.cell_of(strip_lo, p0.y.max(p1.y));
            for r in r0..=r1 {
                let k = r * self.cols + c;
                if self.cell_max_height[k] < z_min {
                    continue;
                }
                out.extend_from_slice(&self.cells[k]);
            }
        }
        out.sort_unstable();
        out.dedup();
    }
}
