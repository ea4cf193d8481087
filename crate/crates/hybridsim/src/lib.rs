//! File formats, scenario loading, output writers, SVG snapshots and the
//! batch runner around [`hybridsim_core`].

pub mod batch;
pub mod config;
pub mod osm;
pub mod output;
pub mod svg;

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use hybridsim_core::{Scenario, World};

pub use hybridsim_core as core;

/// Map file of a scenario; relative paths resolve against the scenario
/// file's directory.
pub fn map_path(scenario_file: &Path, scenario: &Scenario) -> PathBuf {
    let map = Path::new(&scenario.map);
    if map.is_absolute() {
        map.to_path_buf()
    } else {
        scenario_file.parent().unwrap_or(Path::new(".")).join(map)
    }
}

/// Reads the map referenced by a scenario and builds the world.
pub fn load_world(scenario_file: &Path, scenario: &Scenario) -> Result<World> {
    let path = map_path(scenario_file, scenario);
    let data = osm::read_osm(&path)?;
    World::from_map(&data, &scenario.world).with_context(|| format!("building world from {}", path.display()))
}

/// Scenario plus world, ready to run.
pub struct Prepared {
    pub scenario: Scenario,
    pub world: World,
    pub warnings: Vec<config::Diagnostic>,
}

pub fn prepare(scenario_file: &Path, strict: bool) -> Result<Prepared> {
    let loaded = config::read_scenario(scenario_file, strict)?;
    let world = load_world(scenario_file, &loaded.scenario)?;
    Ok(Prepared {
        scenario: loaded.scenario,
        world,
        warnings: loaded.warnings,
    })
}
