//! Top-down SVG snapshots of the world and the vehicles.

use std::fmt::Write;

use hybridsim_core::engine::{NodeInfo, Snapshot};
use hybridsim_core::geometry::Aabb2;
use hybridsim_core::net::NodeKind;
use hybridsim_core::World;

const MARGIN: f64 = 20.0;
const LEGEND_W: f64 = 150.0;

/// Fixed-precision coordinate so output is identical across platforms.
fn c(v: f64) -> String {
    let s = format!("{:.2}", v);
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

struct Frame {
    bounds: Aabb2,
    scale: f64,
    height: f64,
}

impl Frame {
    fn x(&self, x: f64) -> f64 {
        MARGIN + (x - self.bounds.min_x) * self.scale
    }

    fn y(&self, y: f64) -> f64 {
        self.height - MARGIN - (y - self.bounds.min_y) * self.scale
    }

    fn pt(&self, x: f64, y: f64) -> String {
        format!("{},{}", c(self.x(x)), c(self.y(y)))
    }
}

/// Grey level from light (low buildings) to dark (the tallest one).
fn building_fill(h: f64, max_h: f64) -> String {
    let t = if max_h > 0.0 { (h / max_h).clamp(0.0, 1.0) } else { 0.0 };
    let v = (215.0 - 135.0 * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", v, v, v.saturating_add(8))
}

/// Renders `snap` over `world` at roughly `width_px` pixels wide. `nodes`
/// names the snapshot's node indices.
pub fn render_snapshot(world: &World, nodes: &[NodeInfo], snap: &Snapshot, width_px: f64) -> String {
    let mut bounds = world.bounds();
    for g in &snap.glyphs {
        bounds.include(g.position.x, g.position.y);
    }
    let empty = bounds.is_empty();
    if empty {
        bounds = Aabb2 {
            min_x: 0.0,
            min_y: 0.0,
            max_x: 100.0,
            max_y: 100.0,
        };
    }
    let bounds = bounds.inflate(5.0);
    let drawable = (width_px - 2.0 * MARGIN).max(50.0);
    let scale = drawable / bounds.width().max(1.0);
    let height = bounds.height() * scale + 2.0 * MARGIN;
    let f = Frame { bounds, scale, height };
    let has_content = !world.buildings().is_empty() || !world.segments().is_empty() || !snap.glyphs.is_empty();
    let total_w = if has_content { width_px + LEGEND_W } else { width_px };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#,
        w = c(total_w),
        h = c(height)
    );
    let _ = writeln!(
        s,
        r##"<rect id="frame" x="0.5" y="0.5" width="{}" height="{}" fill="#fbfbf8" stroke="#333333"/>"##,
        c(width_px - 1.0),
        c(height - 1.0)
    );

    let max_h = world.max_building_height();
    if !world.buildings().is_empty() {
        s.push_str("<g id=\"buildings\" stroke=\"#555555\" stroke-width=\"0.5\">\n");
        for b in world.buildings() {
            let pts: Vec<String> = b.footprint.iter().map(|p| f.pt(p.x, p.y)).collect();
            let _ = writeln!(
                s,
                r#"<polygon class="building" points="{}" fill="{}"><title>building {} ({} m)</title></polygon>"#,
                pts.join(" "),
                building_fill(b.height, max_h),
                b.osm_id,
                c(b.height)
            );
        }
        s.push_str("</g>\n");
    }
    if !world.segments().is_empty() {
        s.push_str("<g id=\"roads\" fill=\"none\" stroke=\"#9a9a9a\" stroke-linecap=\"round\" stroke-linejoin=\"round\">\n");
        for seg in world.segments() {
            let pts: Vec<String> = seg.polyline.iter().map(|p| f.pt(p.x, p.y)).collect();
            let width = (world.lane_width() * seg.lane_count.max(1) as f64 * scale).max(1.0);
            let _ = writeln!(s, r#"<polyline class="road" points="{}" stroke-width="{}"/>"#, pts.join(" "), c(width));
        }
        s.push_str("</g>\n");
    }

    if !snap.links.is_empty() {
        s.push_str("<g id=\"links\" stroke-width=\"1.5\">\n");
        let pos = |n: u32| snap.glyphs.iter().find(|g| g.node == n).map(|g| g.position);
        for l in &snap.links {
            let (Some(a), Some(b)) = (pos(l.a), pos(l.b)) else { continue };
            let style = if l.los {
                r##"class="link los" stroke="#2a9d3a""##
            } else {
                r##"class="link nlos" stroke="#d62828" stroke-dasharray="6 4""##
            };
            let _ = writeln!(
                s,
                r#"<line {} x1="{}" y1="{}" x2="{}" y2="{}"/>"#,
                style,
                c(f.x(a.x)),
                c(f.y(a.y)),
                c(f.x(b.x)),
                c(f.y(b.y))
            );
        }
        s.push_str("</g>\n");
    }

    if !snap.glyphs.is_empty() {
        s.push_str("<g id=\"vehicles\">\n");
        for g in &snap.glyphs {
            let info = &nodes[g.node as usize];
            let (x, y) = (f.x(g.position.x), f.y(g.position.y));
            // SVG y grows downwards.
            let (hx, hy) = (g.heading.x, -g.heading.y);
            match info.kind {
                NodeKind::Car => {
                    let (hx, hy) = if hx == 0.0 && hy == 0.0 { (1.0, 0.0) } else { (hx, hy) };
                    let (px, py) = (-hy, hx);
                    let tip = (x + 7.0 * hx, y + 7.0 * hy);
                    let l = (x - 4.0 * hx + 4.0 * px, y - 4.0 * hy + 4.0 * py);
                    let r = (x - 4.0 * hx - 4.0 * px, y - 4.0 * hy - 4.0 * py);
                    let _ = writeln!(
                        s,
                        r##"<polygon class="car" points="{},{} {},{} {},{}" fill="#1f5fbf" stroke="#0b2a5c"><title>{}</title></polygon>"##,
                        c(tip.0),
                        c(tip.1),
                        c(l.0),
                        c(l.1),
                        c(r.0),
                        c(r.1),
                        info.name
                    );
                }
                NodeKind::Uav => {
                    let _ = writeln!(
                        s,
                        r##"<g class="uav"><title>{} ({} m)</title><circle cx="{}" cy="{}" r="5" fill="#f4a300" stroke="#7a5200"/><line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#7a5200" stroke-width="1.5"/></g>"##,
                        info.name,
                        c(g.position.z),
                        c(x),
                        c(y),
                        c(x),
                        c(y),
                        c(x + 9.0 * hx),
                        c(y + 9.0 * hy)
                    );
                }
                NodeKind::BaseStation => {
                    let _ = writeln!(
                        s,
                        r##"<polygon class="base-station" points="{},{} {},{} {},{}" fill="#6a2c91" stroke="#32134a"><title>{}</title></polygon>"##,
                        c(x),
                        c(y - 8.0),
                        c(x - 6.0),
                        c(y + 5.0),
                        c(x + 6.0),
                        c(y + 5.0),
                        info.name
                    );
                }
            }
            let _ = writeln!(
                s,
                r##"<text class="label" x="{}" y="{}" fill="#222222">{}</text>"##,
                c(x + 7.0),
                c(y - 7.0),
                info.name
            );
        }
        s.push_str("</g>\n");
    }

    if has_content {
        let lx = width_px + 10.0;
        let _ = writeln!(s, r#"<g id="legend" transform="translate({},{})">"#, c(lx), c(MARGIN));
        let _ = writeln!(s, r#"<text x="0" y="0" font-weight="bold">t = {} s</text>"#, snap.time.as_secs_f64());
        let rows: [(&str, &str); 6] = [
            (r##"<polygon points="0,-4 12,-4 12,6 0,6" fill="#7e7e86"/>"##, "building (darker = taller)"),
            (r##"<line x1="0" y1="1" x2="12" y2="1" stroke="#9a9a9a" stroke-width="3"/>"##, "road"),
            (r##"<polygon points="12,1 2,-4 2,6" fill="#1f5fbf"/>"##, "car"),
            (r##"<circle cx="6" cy="1" r="5" fill="#f4a300"/>"##, "UAV"),
            (r##"<line x1="0" y1="1" x2="12" y2="1" stroke="#2a9d3a" stroke-width="1.5"/>"##, "LOS link"),
            (
                r##"<line x1="0" y1="1" x2="12" y2="1" stroke="#d62828" stroke-width="1.5" stroke-dasharray="6 4"/>"##,
                "NLOS link",
            ),
        ];
        for (i, (sym, label)) in rows.iter().enumerate() {
            let y = 20.0 + 18.0 * i as f64;
            let _ = writeln!(
                s,
                r#"<g transform="translate(0,{})">{}<text x="18" y="5">{}</text></g>"#,
                c(y),
                sym,
                label
            );
        }
        let _ = writeln!(
            s,
            r##"<g transform="translate(0,{})"><polygon points="6,-6 0,6 12,6" fill="#6a2c91"/><text x="18" y="5">base station</text></g>"##,
            c(20.0 + 18.0 * rows.len() as f64)
        );
        s.push_str("</g>\n");
    }
    s.push_str("</svg>\n");
    s
}
