//! OpenStreetMap XML reader.

use std::collections::BTreeMap;
use std::path::Path;

use hybridsim_core::world::{MapData, RawNode, RawWay};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OsmError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}, column {column}: {message}")]
    Syntax { line: u32, column: u32, message: String },
    #[error("line {line}: <{element}> {message}")]
    Element { line: u32, element: String, message: String },
}

fn attr<T: std::str::FromStr>(doc: &roxmltree::Document, n: roxmltree::Node, name: &str) -> Result<T, OsmError> {
    let line = doc.text_pos_at(n.range().start).row;
    let raw = n.attribute(name).ok_or_else(|| OsmError::Element {
        line,
        element: n.tag_name().name().to_string(),
        message: format!("missing attribute \"{}\"", name),
    })?;
    raw.trim().parse().map_err(|_| OsmError::Element {
        line,
        element: n.tag_name().name().to_string(),
        message: format!("attribute {}=\"{}\" is not a valid number", name, raw),
    })
}

/// Nodes and ways of an OSM XML document. Relations are ignored.
pub fn parse_osm(text: &str) -> Result<MapData, OsmError> {
    let doc = roxmltree::Document::parse(text).map_err(|e| {
        let pos = e.pos();
        OsmError::Syntax {
            line: pos.row,
            column: pos.col,
            message: e.to_string(),
        }
    })?;
    let mut data = MapData::default();
    for n in doc.root_element().children().filter(|n| n.is_element()) {
        match n.tag_name().name() {
            "node" => {
                let lat: f64 = attr(&doc, n, "lat")?;
                let lon: f64 = attr(&doc, n, "lon")?;
                if !(lat.is_finite() && lon.is_finite() && lat.abs() <= 90.0 && lon.abs() <= 180.0) {
                    return Err(OsmError::Element {
                        line: doc.text_pos_at(n.range().start).row,
                        element: "node".into(),
                        message: format!("coordinates ({}, {}) out of range", lat, lon),
                    });
                }
                data.nodes.push(RawNode {
                    id: attr(&doc, n, "id")?,
                    lat,
                    lon,
                });
            }
            "way" => {
                let mut refs = Vec::new();
                let mut tags = BTreeMap::new();
                for c in n.children().filter(|c| c.is_element()) {
                    match c.tag_name().name() {
                        "nd" => refs.push(attr(&doc, c, "ref")?),
                        "tag" => {
                            let k: String = attr(&doc, c, "k")?;
                            let v: String = attr(&doc, c, "v")?;
                            tags.insert(k, v);
                        }
                        _ => {}
                    }
                }
                data.ways.push(RawWay {
                    id: attr(&doc, n, "id")?,
                    refs,
                    tags,
                });
            }
            _ => {}
        }
    }
    Ok(data)
}

pub fn read_osm(path: &Path) -> Result<MapData, OsmError> {
    let text = std::fs::read_to_string(path).map_err(|source| OsmError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_osm(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_nodes_and_tags() {
        let xml = r#"<?xml version="1.0"?>
<osm version="0.6">
  <node id="1" lat="51.49" lon="7.41"/>
  <node id="2" lat="51.491" lon="7.41"/>
  <way id="10">
    <nd ref="1"/><nd ref="2"/>
    <tag k="highway" v="residential"/>
  </way>
</osm>"#;
        let m = parse_osm(xml).unwrap();
        assert_eq!(m.nodes.len(), 2);
        assert_eq!(m.ways[0].refs, vec![1, 2]);
        assert_eq!(m.ways[0].tag("highway"), Some("residential"));
    }

    #[test]
    fn bad_attribute_reports_line() {
        let xml = "<osm>\n<node id=\"1\" lat=\"x\" lon=\"7\"/>\n</osm>";
        let e = parse_osm(xml).unwrap_err().to_string();
        assert!(e.starts_with("line 2"), "{}", e);
        assert!(e.contains("lat"));
    }

    #[test]
    fn syntax_error_has_position() {
        let e = parse_osm("<osm>\n<node id=\"1\"\n</osm>").unwrap_err();
        assert!(matches!(e, OsmError::Syntax { line: 3, .. } | OsmError::Syntax { line: 2, .. }), "{}", e);
    }
}
