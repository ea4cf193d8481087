//! Scenario files: TOML parsing with line-numbered diagnostics, strict
//! unknown-key checking and serialization.

use std::fmt;
use std::ops::Range;
use std::path::Path;

use hybridsim_core::scenario::{Issue, PathSeg};
use hybridsim_core::Scenario;
use toml::de::{DeTable, DeValue};
use toml::Spanned;

/// A problem located in a scenario file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    /// 1-based line, when the location is known.
    pub line: Option<usize>,
    /// Dotted key path, e.g. `flow[2].dst`.
    pub path: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(l) = self.line { write!(f, "line {}: ", l)? }
        if !self.path.is_empty() {
            write!(f, "{}: ", self.path)?;
        }
        f.write_str(&self.message)
    }
}

/// All errors of a rejected scenario file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub diagnostics: Vec<Diagnostic>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.diagnostics.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{}", d)?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

/// A parsed and validated scenario plus non-fatal findings.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub scenario: Scenario,
    /// Unknown keys when not in strict mode.
    pub warnings: Vec<Diagnostic>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

fn dotted(path: &[PathSeg]) -> String {
    Issue {
        path: path.to_vec(),
        message: String::new(),
    }
    .dotted_path()
}

/// Span of the deepest element of `path` present in the document.
fn locate(root: &Spanned<DeTable>, path: &[PathSeg]) -> Range<usize> {
    let mut span = root.span();
    let mut table: Option<&DeTable> = Some(root.get_ref());
    let mut value: Option<&Spanned<DeValue>> = None;
    for seg in path {
        match seg {
            PathSeg::Key(k) => {
                let Some(t) = table.or_else(|| value.and_then(|v| v.get_ref().as_table())) else {
                    break;
                };
                let Some((key, v)) = t.iter().find(|(key, _)| key.get_ref() == k) else {
                    break;
                };
                span = key.span();
                value = Some(v);
                table = None;
            }
            PathSeg::Index(i) => {
                let Some(items) = value.and_then(|v| v.get_ref().as_array()) else {
                    break;
                };
                let Some(item) = items.get(*i) else {
                    break;
                };
                span = item.span();
                value = Some(item);
                table = None;
            }
        }
    }
    span
}

fn ignored_path(p: &serde_ignored::Path, out: &mut Vec<PathSeg>) {
    use serde_ignored::Path as P;
    match p {
        P::Root => {}
        P::Seq { parent, index } => {
            ignored_path(parent, out);
            out.push(PathSeg::Index(*index));
        }
        P::Map { parent, key } => {
            ignored_path(parent, out);
            out.push(PathSeg::Key(key.clone()));
        }
        P::Some { parent } | P::NewtypeStruct { parent } | P::NewtypeVariant { parent } => ignored_path(parent, out),
    }
}

/// Parses and validates a scenario document. With `strict`, unknown keys
/// are errors; otherwise they are returned as warnings.
pub fn parse_scenario(text: &str, strict: bool) -> Result<Loaded, ConfigError> {
    let syntax = |e: toml::de::Error| ConfigError {
        diagnostics: vec![Diagnostic {
            line: e.span().map(|s| line_of(text, s.start)),
            path: String::new(),
            message: e.message().trim().to_string(),
        }],
    };
    let root = DeTable::parse(text).map_err(syntax)?;
    let de = toml::de::Deserializer::parse(text).map_err(syntax)?;
    let mut unknown: Vec<Vec<PathSeg>> = Vec::new();
    let scenario: Scenario = serde_ignored::deserialize(de, |p| {
        let mut segs = Vec::new();
        ignored_path(&p, &mut segs);
        unknown.push(segs);
    })
    .map_err(syntax)?;

    let at = |path: &[PathSeg], message: String| Diagnostic {
        line: Some(line_of(text, locate(&root, path).start)),
        path: dotted(path),
        message,
    };
    let unknown: Vec<Diagnostic> = unknown.iter().map(|p| at(p, "unknown key".to_string())).collect();
    let mut errors: Vec<Diagnostic> = scenario.validate().iter().map(|i| at(&i.path, i.message.clone())).collect();
    let warnings = if strict {
        errors.splice(0..0, unknown);
        Vec::new()
    } else {
        unknown
    };
    if errors.is_empty() {
        Ok(Loaded { scenario, warnings })
    } else {
        Err(ConfigError { diagnostics: errors })
    }
}

pub fn read_scenario(path: &Path, strict: bool) -> anyhow::Result<Loaded> {
    let text = std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("{}: {}", path.display(), e))?;
    parse_scenario(&text, strict).map_err(|e| {
        let file = path.display().to_string();
        let lines: Vec<String> = e.diagnostics.iter().map(|d| format!("{}: {}", file, d)).collect();
        anyhow::anyhow!(lines.join("\n"))
    })
}

pub fn serialize_scenario(s: &Scenario) -> Result<String, toml::ser::Error> {
    toml::to_string(s)
}
