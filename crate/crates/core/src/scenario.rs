//! Declarative scenario description and its validation.
//!
//! The types mirror the scenario file one to one; the `hybridsim` crate
//! parses and writes them. [`Scenario::validate`] reports every problem with
//! the path of the offending entry so callers can map it back to a line.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::car::IdmParams;
use crate::channel::ChannelParams;
use crate::net::cellular::CellularParams;
use crate::net::csma::CsmaParams;
use crate::net::mmwave::MmWaveParams;
use crate::net::sps::SpsParams;
use crate::net::RadioParams;
use crate::uav::{PowerParams, UavParams};
use crate::world::WorldOptions;

fn default_seed() -> u64 {
    1
}

fn default_drain() -> f64 {
    1.0
}

fn is_default<T: Default + PartialEq>(v: &T) -> bool {
    *v == T::default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// OSM XML file, relative to the scenario file.
    pub map: String,
    pub duration_s: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Extra time after the end of traffic for in-flight packets, s.
    #[serde(default = "default_drain")]
    pub drain_s: f64,
    #[serde(default, skip_serializing_if = "is_default")]
    pub world: WorldOptions,
    #[serde(default, skip_serializing_if = "is_default")]
    pub channel: ChannelParams,
    /// Car-following parameters of every car without its own table.
    #[serde(default, skip_serializing_if = "is_default")]
    pub idm: IdmParams,
    /// Parameters of every UAV; per-UAV fields override them.
    #[serde(default, skip_serializing_if = "is_default")]
    pub uav_defaults: UavParams,
    #[serde(default, rename = "car", skip_serializing_if = "Vec::is_empty")]
    pub cars: Vec<CarSpec>,
    #[serde(default, rename = "uav", skip_serializing_if = "Vec::is_empty")]
    pub uavs: Vec<UavSpec>,
    #[serde(default, rename = "base_station", skip_serializing_if = "Vec::is_empty")]
    pub base_stations: Vec<BaseStationSpec>,
    #[serde(default, rename = "technology", skip_serializing_if = "Vec::is_empty")]
    pub technologies: Vec<TechnologySpec>,
    #[serde(default, rename = "flow", skip_serializing_if = "Vec::is_empty")]
    pub flows: Vec<FlowDecl>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub trace: TraceOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    #[default]
    Random,
    FixedRoute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarSpec {
    pub id: String,
    /// Declares `id1..idN` instead of a single car.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<u32>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub strategy: StrategyKind,
    /// OSM node ids visited in order by a fixed route, repeated cyclically.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub route: Vec<i64>,
    /// OSM node the car starts from; random placement when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_node: Option<i64>,
    /// Overrides the speed limit as desired speed, m/s.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub desired_speed: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub idm: Option<IdmParams>,
}

impl CarSpec {
    /// Names of the cars this entry declares.
    pub fn names(&self) -> Vec<String> {
        match self.count {
            None => vec![self.id.clone()],
            Some(n) => (1..=n).map(|k| format!("{}{}", self.id, k)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub lat: f64,
    pub lon: f64,
    /// Above ground, m.
    #[serde(default)]
    pub height: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UavRole {
    /// Follow a car at the operating height.
    AerialSensor,
    /// Keep line of sight between a base station and its users.
    AerialRelay,
    WaypointMission,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UavSpec {
    pub id: String,
    pub role: UavRole,
    /// Followed car (aerial sensor).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    /// Served base station (aerial relay).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub users: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub waypoints: Vec<Position>,
    /// Start position; above the target or the map centre when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Position>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_speed: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power: Option<PowerParams>,
}

impl UavSpec {
    pub fn params(&self, defaults: &UavParams) -> UavParams {
        let mut p = *defaults;
        if let Some(h) = self.height {
            p.operating_height = h;
        }
        if let Some(m) = self.mass {
            p.airframe.mass = m;
        }
        if let Some(v) = self.max_speed {
            p.airframe.max_speed = v;
        }
        if let Some(pw) = self.power {
            p.power = pw;
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseStationSpec {
    pub id: String,
    /// Fixed antenna position.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<Position>,
    /// UAV carrying the base station.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mounted_on: Option<String>,
    pub technologies: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TechKind {
    #[serde(rename = "cellular")]
    Cellular,
    #[serde(rename = "csma")]
    Csma,
    #[serde(rename = "sps")]
    Sps,
    #[serde(rename = "mmwave")]
    MmWave,
}

impl TechKind {
    pub fn label(self) -> &'static str {
        match self {
            TechKind::Cellular => "cellular",
            TechKind::Csma => "csma",
            TechKind::Sps => "sps",
            TechKind::MmWave => "mmwave",
        }
    }

    /// Carrier, bandwidth and terminal power used when the file omits them.
    pub fn default_radio(self) -> RadioParams {
        let (carrier_hz, bandwidth_hz) = match self {
            TechKind::Cellular => (2.1e9, 20e6),
            TechKind::Csma => (5.9e9, 10e6),
            TechKind::Sps => (5.9e9, 20e6),
            TechKind::MmWave => (28e9, 400e6),
        };
        RadioParams {
            carrier_hz,
            bandwidth_hz,
            tx_power_dbm: 23.0,
            sinr_threshold_db: 5.0,
            noise_figure_db: 7.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TechnologySpec {
    pub id: String,
    pub kind: TechKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub carrier_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tx_power_dbm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sinr_threshold_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_figure_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cellular: Option<CellularParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csma: Option<CsmaParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sps: Option<SpsParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mmwave: Option<MmWaveParams>,
}

impl TechnologySpec {
    pub fn radio(&self) -> RadioParams {
        let d = self.kind.default_radio();
        RadioParams {
            carrier_hz: self.carrier_hz.unwrap_or(d.carrier_hz),
            bandwidth_hz: self.bandwidth_hz.unwrap_or(d.bandwidth_hz),
            tx_power_dbm: self.tx_power_dbm.unwrap_or(d.tx_power_dbm),
            sinr_threshold_db: self.sinr_threshold_db.unwrap_or(d.sinr_threshold_db),
            noise_figure_db: self.noise_figure_db.unwrap_or(d.noise_figure_db),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowKindSpec {
    Cam,
    Cbr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowDecl {
    pub id: String,
    pub kind: FlowKindSpec,
    pub src: String,
    pub dst: String,
    /// One flow is created per listed technology.
    pub technologies: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size_bytes: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_bps: Option<f64>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub start_s: f64,
    /// Start offset drawn uniformly from [0, jitter), s.
    #[serde(default, skip_serializing_if = "is_default")]
    pub jitter_s: f64,
}

impl FlowDecl {
    pub fn size(&self) -> u32 {
        self.size_bytes.unwrap_or(match self.kind {
            FlowKindSpec::Cam => 190,
            FlowKindSpec::Cbr => 1400,
        })
    }

    pub fn interval(&self) -> f64 {
        self.interval_s.unwrap_or(0.1)
    }

    /// Name of the expanded flow on technology `tech`.
    pub fn name_on(&self, tech: &str) -> String {
        if self.technologies.len() == 1 {
            self.id.clone()
        } else {
            format!("{}@{}", self.id, tech)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TraceOptions {
    /// Period of link samples (RSRP, obstruction), s.
    pub link_period_s: f64,
    /// Period of vehicle kinematics samples, s.
    pub kinematics_period_s: f64,
    /// Write one row per packet.
    pub packets: bool,
    pub rate_window_s: f64,
    /// Times of SVG snapshots, s.
    pub snapshots_s: Vec<f64>,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions {
            link_period_s: 0.2,
            kinematics_period_s: 0.1,
            packets: true,
            rate_window_s: 0.5,
            snapshots_s: Vec::new(),
        }
    }
}

/// Parameter sweep; each value yields one variant of the scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    /// Rates applied to every CBR flow, bit/s.
    pub cbr_rate_bps: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum PathSeg {
    Key(String),
    Index(usize),
}

/// A validation problem located by its path in the document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issue {
    pub path: Vec<PathSeg>,
    pub message: String,
}

impl Issue {
    pub fn dotted_path(&self) -> String {
        let mut s = String::new();
        for seg in &self.path {
            match seg {
                PathSeg::Key(k) => {
                    if !s.is_empty() {
                        s.push('.');
                    }
                    s.push_str(k);
                }
                PathSeg::Index(i) => s.push_str(&format!("[{}]", i)),
            }
        }
        s
    }
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.dotted_path(), self.message)
    }
}

struct Checker {
    issues: Vec<Issue>,
}

impl Checker {
    fn at(&mut self, path: &[PathSeg], message: String) {
        self.issues.push(Issue {
            path: path.to_vec(),
            message,
        });
    }
}

fn key(k: &str) -> PathSeg {
    PathSeg::Key(k.to_string())
}

fn entry(table: &str, i: usize, field: &str) -> Vec<PathSeg> {
    vec![key(table), PathSeg::Index(i), key(field)]
}

fn positive(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Declared {
    Car,
    Uav,
    BaseStation,
}

impl Scenario {
    /// Empty scenario on `map` lasting `duration_s`.
    pub fn new(map: &str, duration_s: f64) -> Self {
        Scenario {
            name: None,
            map: map.to_string(),
            duration_s,
            seed: default_seed(),
            drain_s: default_drain(),
            world: WorldOptions::default(),
            channel: ChannelParams::default(),
            idm: IdmParams::default(),
            uav_defaults: UavParams::default(),
            cars: Vec::new(),
            uavs: Vec::new(),
            base_stations: Vec::new(),
            technologies: Vec::new(),
            flows: Vec::new(),
            trace: TraceOptions::default(),
            sweep: None,
        }
    }

    /// Every structural and referential problem; empty when valid.
    pub fn validate(&self) -> Vec<Issue> {
        let mut c = Checker { issues: Vec::new() };
        if !positive(self.duration_s) {
            c.at(&[key("duration_s")], "must be a positive number of seconds".into());
        }
        if !(self.drain_s.is_finite() && self.drain_s >= 0.0) {
            c.at(&[key("drain_s")], "must be non-negative".into());
        }
        if self.map.trim().is_empty() {
            c.at(&[key("map")], "must name a map file".into());
        }
        if !self.idm.is_valid() {
            c.at(&[key("idm")], "parameters must be positive".into());
        }
        let ch = &self.channel;
        if !(positive(ch.path_loss_exponent)
            && ch.obstruction_db_per_m.is_finite()
            && ch.obstruction_db_per_m >= 0.0
            && ch.shadowing_sigma_los_db >= 0.0
            && ch.shadowing_sigma_nlos_db >= 0.0
            && positive(ch.resource_elements)
            && positive(ch.cache_cell))
        {
            c.at(&[key("channel")], "parameters out of range".into());
        }
        let w = &self.world;
        if !(positive(w.default_building_height) && positive(w.level_height) && positive(w.default_speed) && positive(w.cell_size) && w.lane_width >= 0.0) {
            c.at(&[key("world")], "parameters out of range".into());
        }

        let mut names: alloc::collections::BTreeMap<String, Declared> = alloc::collections::BTreeMap::new();
        let mut declare = |c: &mut Checker, name: &str, kind: Declared, path: Vec<PathSeg>| {
            if name.is_empty() {
                c.at(&path, "id must not be empty".into());
            } else if names.insert(name.to_string(), kind).is_some() {
                c.at(&path, format!("duplicate node id \"{}\"", name));
            }
        };
        for (i, car) in self.cars.iter().enumerate() {
            if car.count == Some(0) {
                c.at(&entry("car", i, "count"), "must be at least 1".into());
            }
            for n in car.names() {
                declare(&mut c, &n, Declared::Car, entry("car", i, "id"));
            }
            if car.strategy == StrategyKind::FixedRoute && car.route.len() < 2 {
                c.at(&entry("car", i, "route"), "a fixed route needs at least two nodes".into());
            }
            if car.strategy == StrategyKind::Random && !car.route.is_empty() {
                c.at(&entry("car", i, "route"), "only used with strategy = \"fixed_route\"".into());
            }
            if let Some(v) = car.desired_speed {
                if !positive(v) {
                    c.at(&entry("car", i, "desired_speed"), "must be positive".into());
                }
            }
            if let Some(p) = &car.idm {
                if !p.is_valid() {
                    c.at(&entry("car", i, "idm"), "parameters must be positive".into());
                }
            }
        }
        for (i, u) in self.uavs.iter().enumerate() {
            declare(&mut c, &u.id, Declared::Uav, entry("uav", i, "id"));
            for (field, v) in [("height", u.height), ("mass", u.mass), ("max_speed", u.max_speed)] {
                if let Some(v) = v {
                    if !positive(v) {
                        c.at(&entry("uav", i, field), "must be positive".into());
                    }
                }
            }
        }
        for (i, b) in self.base_stations.iter().enumerate() {
            declare(&mut c, &b.id, Declared::BaseStation, entry("base_station", i, "id"));
        }

        let uav_ok = |p: &UavParams| {
            positive(p.airframe.mass)
                && p.airframe.drag >= 0.0
                && positive(p.airframe.attitude_tau)
                && positive(p.airframe.max_tilt_deg)
                && p.airframe.max_tilt_deg < 90.0
                && positive(p.airframe.max_speed)
                && positive(p.steering.accel_cap)
                && positive(p.steering.velocity_tau)
                && positive(p.steering.slow_radius)
                && p.operating_height >= 0.0
                && positive(p.power.rotor_area)
                && positive(p.power.air_density)
                && p.power.rotors > 0
        };
        if !uav_ok(&self.uav_defaults) {
            c.at(&[key("uav_defaults")], "parameters out of range".into());
        }

        for (i, u) in self.uavs.iter().enumerate() {
            let refer = |c: &mut Checker, field: &str, name: &Option<String>, want: Declared| match name {
                None => c.at(&entry("uav", i, field), format!("required for role {:?}", u.role)),
                Some(n) => match names.get(n) {
                    None => c.at(&entry("uav", i, field), format!("unknown node \"{}\"", n)),
                    Some(k) if *k != want => c.at(&entry("uav", i, field), format!("\"{}\" is not a {:?}", n, want)),
                    _ => {}
                },
            };
            match u.role {
                UavRole::AerialSensor => refer(&mut c, "target", &u.target, Declared::Car),
                UavRole::AerialRelay => {
                    refer(&mut c, "base", &u.base, Declared::BaseStation);
                    for n in &u.users {
                        if !names.contains_key(n) {
                            c.at(&entry("uav", i, "users"), format!("unknown node \"{}\"", n));
                        }
                    }
                }
                UavRole::WaypointMission => {
                    if u.waypoints.is_empty() {
                        c.at(&entry("uav", i, "waypoints"), "a mission needs at least one waypoint".into());
                    }
                }
            }
            if !uav_ok(&u.params(&self.uav_defaults)) {
                c.at(&[key("uav"), PathSeg::Index(i)], "parameters out of range".into());
            }
        }

        let mut techs: alloc::collections::BTreeMap<&str, TechKind> = alloc::collections::BTreeMap::new();
        for (i, t) in self.technologies.iter().enumerate() {
            if t.id.is_empty() {
                c.at(&entry("technology", i, "id"), "id must not be empty".into());
            } else if techs.insert(t.id.as_str(), t.kind).is_some() {
                c.at(&entry("technology", i, "id"), format!("duplicate technology id \"{}\"", t.id));
            }
            let r = t.radio();
            if !(positive(r.carrier_hz) && positive(r.bandwidth_hz) && r.tx_power_dbm.is_finite() && r.sinr_threshold_db.is_finite() && r.noise_figure_db.is_finite() && r.noise_figure_db >= 0.0) {
                c.at(&[key("technology"), PathSeg::Index(i)], "radio parameters out of range".into());
            }
            let sub = [
                ("cellular", t.cellular.is_some(), TechKind::Cellular, t.cellular.as_ref().is_none_or(|p| p.is_valid())),
                ("csma", t.csma.is_some(), TechKind::Csma, t.csma.as_ref().is_none_or(|p| p.is_valid())),
                ("sps", t.sps.is_some(), TechKind::Sps, t.sps.as_ref().is_none_or(|p| p.is_valid())),
                ("mmwave", t.mmwave.is_some(), TechKind::MmWave, t.mmwave.as_ref().is_none_or(|p| p.is_valid())),
            ];
            for (field, present, kind, valid) in sub {
                if present && kind != t.kind {
                    c.at(&entry("technology", i, field), format!("does not apply to kind \"{}\"", t.kind.label()));
                } else if !valid {
                    c.at(&entry("technology", i, field), "parameters out of range".into());
                }
            }
        }

        let mut bs_techs: alloc::collections::BTreeMap<&str, Vec<&str>> = alloc::collections::BTreeMap::new();
        for (i, b) in self.base_stations.iter().enumerate() {
            match (&b.position, &b.mounted_on) {
                (Some(_), Some(_)) | (None, None) => {
                    c.at(&[key("base_station"), PathSeg::Index(i)], "needs exactly one of position and mounted_on".into())
                }
                (None, Some(u)) => match names.get(u) {
                    Some(Declared::Uav) => {}
                    Some(_) => c.at(&entry("base_station", i, "mounted_on"), format!("\"{}\" is not a UAV", u)),
                    None => c.at(&entry("base_station", i, "mounted_on"), format!("unknown node \"{}\"", u)),
                },
                (Some(p), None) => {
                    if !(p.lat.is_finite() && p.lon.is_finite() && p.height.is_finite()) {
                        c.at(&entry("base_station", i, "position"), "must be finite".into());
                    }
                }
            }
            if b.technologies.is_empty() {
                c.at(&entry("base_station", i, "technologies"), "must list at least one technology".into());
            }
            for t in &b.technologies {
                match techs.get(t.as_str()) {
                    None => c.at(&entry("base_station", i, "technologies"), format!("unknown technology \"{}\"", t)),
                    Some(TechKind::Cellular | TechKind::MmWave) => bs_techs.entry(t.as_str()).or_default().push(b.id.as_str()),
                    Some(k) => c.at(
                        &entry("base_station", i, "technologies"),
                        format!("\"{}\" is a {} technology without base stations", t, k.label()),
                    ),
                }
            }
        }

        let mut flow_ids = BTreeSet::new();
        for (i, f) in self.flows.iter().enumerate() {
            if f.id.is_empty() || !flow_ids.insert(f.id.as_str()) {
                c.at(&entry("flow", i, "id"), format!("flow id \"{}\" must be non-empty and unique", f.id));
            }
            for (field, n) in [("src", &f.src), ("dst", &f.dst)] {
                if !names.contains_key(n) {
                    c.at(&entry("flow", i, field), format!("unknown node \"{}\"", n));
                }
            }
            if f.src == f.dst {
                c.at(&entry("flow", i, "dst"), "source and destination must differ".into());
            }
            if f.technologies.is_empty() {
                c.at(&entry("flow", i, "technologies"), "must list at least one technology".into());
            }
            for t in &f.technologies {
                match techs.get(t.as_str()) {
                    None => c.at(&entry("flow", i, "technologies"), format!("unknown technology \"{}\"", t)),
                    Some(TechKind::Cellular) => {
                        let bss = bs_techs.get(t.as_str()).map(|v| v.as_slice()).unwrap_or(&[]);
                        if bss.is_empty() {
                            c.at(&entry("flow", i, "technologies"), format!("no base station serves \"{}\"", t));
                        } else if bss.contains(&f.src.as_str()) && bss.contains(&f.dst.as_str()) {
                            c.at(&entry("flow", i, "technologies"), format!("no route between two base stations of \"{}\"", t));
                        }
                    }
                    Some(_) => {}
                }
            }
            if f.size_bytes == Some(0) {
                c.at(&entry("flow", i, "size_bytes"), "must be positive".into());
            }
            match f.kind {
                FlowKindSpec::Cam => {
                    if !positive(f.interval()) {
                        c.at(&entry("flow", i, "interval_s"), "must be positive".into());
                    }
                    if f.rate_bps.is_some() {
                        c.at(&entry("flow", i, "rate_bps"), "only used by CBR flows".into());
                    }
                }
                FlowKindSpec::Cbr => {
                    match f.rate_bps {
                        None => c.at(&entry("flow", i, "rate_bps"), "required for CBR flows".into()),
                        Some(r) if !positive(r) => c.at(&entry("flow", i, "rate_bps"), "must be positive".into()),
                        _ => {}
                    }
                    if f.interval_s.is_some() {
                        c.at(&entry("flow", i, "interval_s"), "only used by CAM flows".into());
                    }
                }
            }
            if !(f.start_s.is_finite() && f.start_s >= 0.0) {
                c.at(&entry("flow", i, "start_s"), "must be non-negative".into());
            }
            if !(f.jitter_s.is_finite() && f.jitter_s >= 0.0) {
                c.at(&entry("flow", i, "jitter_s"), "must be non-negative".into());
            }
        }

        let t = &self.trace;
        for (field, v) in [
            ("link_period_s", t.link_period_s),
            ("kinematics_period_s", t.kinematics_period_s),
            ("rate_window_s", t.rate_window_s),
        ] {
            if !positive(v) {
                c.at(&[key("trace"), key(field)], "must be positive".into());
            }
        }
        if t.snapshots_s.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            c.at(&[key("trace"), key("snapshots_s")], "times must be non-negative".into());
        }
        if let Some(s) = &self.sweep {
            if s.cbr_rate_bps.is_empty() || s.cbr_rate_bps.iter().any(|r| !positive(*r)) {
                c.at(&[key("sweep"), key("cbr_rate_bps")], "needs positive rates".into());
            }
            if !self.flows.iter().any(|f| f.kind == FlowKindSpec::Cbr) {
                c.at(&[key("sweep")], "a rate sweep needs at least one CBR flow".into());
            }
        }
        c.issues
    }

    /// One scenario per sweep value, labelled; the scenario itself when it
    /// has no sweep.
    pub fn variants(&self) -> Vec<(String, Scenario)> {
        let Some(sweep) = &self.sweep else {
            return vec![(String::new(), self.clone())];
        };
        sweep
            .cbr_rate_bps
            .iter()
            .map(|&r| {
                let mut s = self.clone();
                s.sweep = None;
                for f in &mut s.flows {
                    if f.kind == FlowKindSpec::Cbr {
                        f.rate_bps = Some(r);
                    }
                }
                (format!("cbr_{}", rate_label(r)), s)
            })
            .collect()
    }
}

/// "65M", "1.5G", "300k" style label of a bit rate.
pub fn rate_label(r: f64) -> String {
    let (v, unit) = if r >= 1e9 {
        (r / 1e9, "G")
    } else if r >= 1e6 {
        (r / 1e6, "M")
    } else if r >= 1e3 {
        (r / 1e3, "k")
    } else {
        (r, "")
    };
    let mut s = format!("{:.3}", v);
    while s.ends_with('0') {
        s.pop();
    }
    if s.ends_with('.') {
        s.pop();
    }
    s.push_str(unit);
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair() -> Scenario {
        let mut s = Scenario::new("map.osm", 60.0);
        s.cars.push(CarSpec {
            id: "car".into(),
            count: Some(2),
            strategy: StrategyKind::Random,
            route: Vec::new(),
            start_node: None,
            desired_speed: None,
            idm: None,
        });
        s.uavs.push(UavSpec {
            id: "uav1".into(),
            role: UavRole::AerialSensor,
            target: Some("car1".into()),
            base: None,
            users: Vec::new(),
            waypoints: Vec::new(),
            start: None,
            height: Some(30.0),
            mass: None,
            max_speed: None,
            power: None,
        });
        s.technologies.push(TechnologySpec {
            id: "wave".into(),
            kind: TechKind::Csma,
            carrier_hz: None,
            bandwidth_hz: None,
            tx_power_dbm: None,
            sinr_threshold_db: None,
            noise_figure_db: None,
            cellular: None,
            csma: None,
            sps: None,
            mmwave: None,
        });
        s.flows.push(FlowDecl {
            id: "cam1".into(),
            kind: FlowKindSpec::Cam,
            src: "uav1".into(),
            dst: "car1".into(),
            technologies: vec!["wave".into()],
            size_bytes: None,
            interval_s: None,
            rate_bps: None,
            start_s: 0.0,
            jitter_s: 0.0,
        });
        s
    }

    #[test]
    fn valid_pair() {
        assert_eq!(pair().validate(), Vec::new());
    }

    #[test]
    fn dangling_flow_reference_is_named() {
        let mut s = pair();
        s.flows[0].dst = "uav7".into();
        let issues = s.validate();
        assert_eq!(issues.len(), 1);
        assert_eq!(issues[0].dotted_path(), "flow[0].dst");
        assert!(issues[0].message.contains("uav7"));
    }

    #[test]
    fn cellular_flow_needs_a_base_station() {
        let mut s = pair();
        s.technologies[0].kind = TechKind::Cellular;
        let issues = s.validate();
        assert!(issues.iter().any(|i| i.message.contains("no base station")));
    }

    #[test]
    fn rate_labels() {
        assert_eq!(rate_label(65e6), "65M");
        assert_eq!(rate_label(1.5e9), "1.5G");
        assert_eq!(rate_label(10e6), "10M");
    }
}
