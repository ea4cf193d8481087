//! Writes the synthetic suburban OSM extract used by the shipped scenarios.
//!
//! `cargo run -p hybridsim --example synth_map -- maps/suburb.osm`

use std::fmt::Write as _;

use hybridsim::core::geo::Projection;
use hybridsim::core::RandomStream;

const ORIGIN: (f64, f64) = (51.4900, 7.4100);
const COLS: usize = 6;
const ROWS: usize = 5;
const BLOCK_X: f64 = 120.0;
const BLOCK_Y: f64 = 100.0;
/// Distance from the road centreline to the building front.
const SETBACK: f64 = 8.0;
const HOUSE_W: f64 = 14.0;
const HOUSE_D: f64 = 11.0;
const GAP: f64 = 5.0;
const MAX_HEIGHT: f64 = 20.0;

struct Doc {
    proj: Projection,
    nodes: String,
    ways: String,
    next_node: i64,
    next_way: i64,
}

impl Doc {
    fn node(&mut self, x: f64, y: f64) -> i64 {
        let (lat, lon) = self.proj.inverse(x, y);
        let id = self.next_node;
        self.next_node += 1;
        writeln!(self.nodes, r#"  <node id="{}" lat="{:.7}" lon="{:.7}"/>"#, id, lat, lon).unwrap();
        id
    }

    fn way(&mut self, refs: &[i64], tags: &[(&str, String)]) {
        let id = self.next_way;
        self.next_way += 1;
        writeln!(self.ways, r#"  <way id="{}">"#, id).unwrap();
        for r in refs {
            writeln!(self.ways, r#"    <nd ref="{}"/>"#, r).unwrap();
        }
        for (k, v) in tags {
            writeln!(self.ways, r#"    <tag k="{}" v="{}"/>"#, k, v).unwrap();
        }
        self.ways.push_str("  </way>\n");
    }

    fn building(&mut self, x0: f64, y0: f64, x1: f64, y1: f64, rng: &mut RandomStream) {
        let corners = [(x0, y0), (x1, y0), (x1, y1), (x0, y1)];
        let mut refs: Vec<i64> = corners.iter().map(|&(x, y)| self.node(x, y)).collect();
        refs.push(refs[0]);
        let u = rng.uniform();
        let tags = if u < 0.6 {
            let levels = 2 + (rng.uniform() * 3.0) as u32;
            vec![("building", "house".to_string()), ("building:levels", levels.to_string())]
        } else {
            let h = 12.0 + rng.uniform() * (MAX_HEIGHT - 12.0);
            vec![("building", "apartments".to_string()), ("height", format!("{:.1}", h))]
        };
        self.way(&refs, &tags);
    }
}

/// Houses along one side of a block, from `a` to `b` along the street with
/// the footprint extending towards `inward`.
fn row(doc: &mut Doc, rng: &mut RandomStream, along_x: bool, fixed: f64, a: f64, b: f64, inward: f64) {
    let mut s = a;
    while s + HOUSE_W <= b {
        if rng.uniform() < 0.85 {
            let front = fixed + inward * SETBACK;
            let back = front + inward * HOUSE_D;
            let (lo, hi) = (front.min(back), front.max(back));
            if along_x {
                doc.building(s, lo, s + HOUSE_W, hi, rng);
            } else {
                doc.building(lo, s, hi, s + HOUSE_W, rng);
            }
        }
        s += HOUSE_W + GAP;
    }
}

fn main() {
    let out = std::env::args().nth(1).unwrap_or_else(|| "maps/suburb.osm".to_string());
    let mut doc = Doc {
        proj: Projection::new(ORIGIN.0, ORIGIN.1),
        nodes: String::new(),
        ways: String::new(),
        next_node: 1,
        next_way: 1,
    };
    let mut rng = RandomStream::new(7, "suburb");

    let mut grid = vec![vec![0i64; COLS + 1]; ROWS + 1];
    for (j, line) in grid.iter_mut().enumerate() {
        for (i, id) in line.iter_mut().enumerate() {
            *id = doc.node(i as f64 * BLOCK_X, j as f64 * BLOCK_Y);
        }
    }
    let street = |n: usize, main: bool| -> Vec<(&str, String)> {
        let class = if main { "secondary" } else { "residential" };
        vec![
            ("highway", class.to_string()),
            ("name", format!("Street {}", n)),
            ("maxspeed", if main { "50" } else { "30" }.to_string()),
        ]
    };
    for (j, line) in grid.iter().enumerate() {
        let refs = line.clone();
        doc.way(&refs, &street(j, j == ROWS / 2));
    }
    for i in 0..=COLS {
        let refs: Vec<i64> = grid.iter().map(|l| l[i]).collect();
        doc.way(&refs, &street(ROWS + 1 + i, i == COLS / 2));
    }

    for j in 0..ROWS {
        for i in 0..COLS {
            let (x0, y0) = (i as f64 * BLOCK_X, j as f64 * BLOCK_Y);
            let (x1, y1) = (x0 + BLOCK_X, y0 + BLOCK_Y);
            let m = SETBACK + 2.0;
            row(&mut doc, &mut rng, true, y0, x0 + m, x1 - m, 1.0);
            row(&mut doc, &mut rng, true, y1, x0 + m, x1 - m, -1.0);
            let inner = SETBACK + HOUSE_D + 3.0;
            row(&mut doc, &mut rng, false, x0, y0 + inner, y1 - inner, 1.0);
            row(&mut doc, &mut rng, false, x1, y0 + inner, y1 - inner, -1.0);
        }
    }

    let mut xml = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<osm version=\"0.6\" generator=\"synth_map\">\n");
    xml.push_str(&doc.nodes);
    xml.push_str(&doc.ways);
    xml.push_str("</osm>\n");
    std::fs::write(&out, xml).expect("write map");
    eprintln!("wrote {} ({} nodes, {} ways)", out, doc.next_node - 1, doc.next_way - 1);
}
