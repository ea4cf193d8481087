//! Scenario engine: builds the world population from a [`Scenario`] and
//! drives mobility, traffic and the access models on one scheduler.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use thiserror::Error;

use crate::beam::ArrayMount;
use crate::car::{find_leader, with_stop_line, Car, IntersectionLedger, Strategy, CAR_LENGTH};
use crate::channel::{Channel, ChannelQuery};
use crate::math::Vec3;
use crate::net::cellular::{Cellular, CellularParams};
use crate::net::csma::{Csma, CsmaParams};
use crate::net::mmwave::{MmWave, MmWaveParams};
use crate::net::sps::{Sps, SpsParams};
use crate::net::{
    keyed_stream, FlowKind, FlowSpec, FlowSummary, Mac, Medium, NetEvent, NetNode, NetScheduler, NetState, NodeIx,
    NodeKind, Packet, PacketRecord, RateSample,
};
use crate::rng::{hash_words, RandomStream};
use crate::scenario::{FlowKindSpec, Issue, Position, Scenario, StrategyKind, TechKind, UavRole};
use crate::sched::Scheduler;
use crate::time::SimTime;
use crate::trace::{Metric, TraceRecord};
use crate::uav::{Role, Surroundings, Uav};
use crate::world::{BuildingId, NodeId, RouteLeg, World};

/// Mobility update period.
pub const MOBILITY_STEP: SimTime = SimTime::from_millis(10);

/// Antenna height above a car's road position, m.
pub const CAR_ANTENNA_HEIGHT: f64 = 1.5;

const TAG_FLOW_JITTER: u64 = 0x6a17;
const TAG_NET: u64 = 0x6e65;
const TAG_CHANNEL: u64 = 0xc4a2;

#[derive(Debug, Error)]
pub enum SetupError {
    #[error("invalid scenario:{}", issues_text(.0))]
    Invalid(Vec<Issue>),
    #[error("{car}: OSM node {osm_id} is not an intersection of the map")]
    UnknownNode { car: String, osm_id: i64 },
    #[error("{car}: no road route from OSM node {from} to {to}")]
    NoRoute { car: String, from: i64, to: i64 },
    #[error("{car}: OSM node {osm_id} has no outgoing road")]
    DeadStart { car: String, osm_id: i64 },
    #[error("the map has no roads to place cars on")]
    NoRoads,
    #[error("{0}: geographic positions need a map with a geographic reference")]
    NoProjection(String),
}

fn issues_text(issues: &[Issue]) -> String {
    let mut s = String::new();
    for i in issues {
        s.push_str("\n  ");
        s.push_str(&i.to_string());
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Event {
    Mobility,
    Generate { flow: u32, k: u64 },
    Net(NetEvent),
}

struct Adapter<'a>(&'a mut Scheduler<Event>);

impl NetScheduler for Adapter<'_> {
    fn now(&self) -> SimTime {
        self.0.now()
    }

    fn at(&mut self, t: SimTime, ev: NetEvent) {
        self.0.schedule_at(t, Event::Net(ev));
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Mount {
    Fixed(Vec3),
    OnUav(usize),
}

/// Expanded flow with resolved names.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowInfo {
    pub name: String,
    /// Declaration the flow was expanded from.
    pub decl: String,
    pub technology: String,
    pub kind: TechKind,
    pub src: String,
    pub dst: String,
    pub spec: FlowSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeInfo {
    pub name: String,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Glyph {
    pub node: NodeIx,
    pub position: Vec3,
    /// Unit heading in the horizontal plane; zero for base stations.
    pub heading: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotLink {
    pub a: NodeIx,
    pub b: NodeIx,
    pub los: bool,
}

/// Positions of every node and the state of flow links at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: SimTime,
    pub glyphs: Vec<Glyph>,
    pub links: Vec<SnapshotLink>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleSummary {
    pub name: String,
    pub kind: NodeKind,
    pub distance_m: f64,
    /// Propulsion energy of UAVs, J.
    pub energy_j: Option<f64>,
    pub collisions: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
}

impl CacheStats {
    pub fn hit_rate(&self) -> Option<f64> {
        let n = self.hits + self.misses;
        (n > 0).then(|| self.hits as f64 / n as f64)
    }
}

/// Everything a finished run produced.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub seed: u64,
    pub duration: SimTime,
    pub nodes: Vec<NodeInfo>,
    pub flows: Vec<FlowInfo>,
    /// Subject names referenced by trace records.
    pub subjects: Vec<String>,
    pub trace: Vec<TraceRecord>,
    pub packets: Vec<PacketRecord>,
    pub summaries: Vec<FlowSummary>,
    pub rates: Vec<RateSample>,
    pub snapshots: Vec<Snapshot>,
    pub vehicles: Vec<VehicleSummary>,
    pub cache: CacheStats,
    pub events: u64,
    pub warnings: Vec<String>,
}

impl RunOutput {
    pub fn subject_index(&self, name: &str) -> Option<u32> {
        self.subjects.iter().position(|s| s == name).map(|i| i as u32)
    }

    /// Samples of one metric of one subject, in time order.
    pub fn series(&self, subject: &str, metric: Metric) -> Vec<(SimTime, f64)> {
        let Some(s) = self.subject_index(subject) else {
            return Vec::new();
        };
        self.trace
            .iter()
            .filter(|r| r.subject == s && r.metric == metric)
            .map(|r| (r.time, r.value))
            .collect()
    }

    pub fn flow_index(&self, name: &str) -> Option<usize> {
        self.flows.iter().position(|f| f.name == name)
    }
}

#[derive(Debug, Clone)]
enum Probe {
    /// Strongest base station of a cellular technology at `ue`.
    Serving { ue: NodeIx, tech: usize, subject: u32 },
    /// Direct link of a flow.
    Direct { src: NodeIx, dst: NodeIx, tech: usize, tx_power_dbm: f64, subject: u32 },
}

#[derive(Debug, Clone)]
struct UavLinks {
    target: Option<usize>,
    base: Option<NodeIx>,
    users: Vec<NodeIx>,
}

pub struct Simulation<'w> {
    world: &'w World,
    seed: u64,
    net_seed: u64,
    duration: SimTime,
    horizon: SimTime,
    cars: Vec<Car>,
    uavs: Vec<Uav>,
    uav_links: Vec<UavLinks>,
    stations: Vec<Mount>,
    nodes: Vec<NetNode>,
    channel: Channel,
    net: NetState,
    flows: Vec<FlowInfo>,
    technologies: Vec<(String, TechKind, f64)>,
    ledger: IntersectionLedger,
    sched: Scheduler<Event>,
    tick: u64,
    subjects: Vec<String>,
    trace: Vec<TraceRecord>,
    probes: Vec<Probe>,
    link_period: SimTime,
    next_link_sample: SimTime,
    kin_period: SimTime,
    next_kin_sample: SimTime,
    snapshot_times: Vec<SimTime>,
    snapshots: Vec<Snapshot>,
    rate_window: SimTime,
    distance: Vec<f64>,
    degraded: Vec<bool>,
    warnings: Vec<String>,
    scratch: Vec<BuildingId>,
    started: bool,
}

fn project(world: &World, who: &str, p: &Position) -> Result<Vec3, SetupError> {
    let proj = world.projection().ok_or_else(|| SetupError::NoProjection(who.to_string()))?;
    let (x, y) = proj.forward(p.lat, p.lon);
    Ok(Vec3::new(x, y, p.height))
}

fn osm_node(world: &World, car: &str, osm_id: i64) -> Result<NodeId, SetupError> {
    world.node_by_osm_id(osm_id).ok_or(SetupError::UnknownNode {
        car: car.to_string(),
        osm_id,
    })
}

fn leg_is_clear(cars: &[Car], leg: RouteLeg, offset: f64) -> bool {
    cars.iter().all(|c| c.leg != leg || (c.offset - offset).abs() > 3.0 * CAR_LENGTH)
}

/// Length-weighted random lane position away from already placed cars.
fn random_placement(world: &World, cars: &[Car], rng: &mut RandomStream) -> Result<(RouteLeg, f64), SetupError> {
    let segs = world.segments();
    let total: f64 = segs.iter().map(|s| s.length()).sum();
    if segs.is_empty() || total <= 0.0 {
        return Err(SetupError::NoRoads);
    }
    let mut pick = (RouteLeg { segment: segs[0].id, forward: true }, 0.0);
    for _ in 0..100 {
        let mut u = rng.random_range(0.0..total);
        let mut chosen = segs.len() - 1;
        for (i, s) in segs.iter().enumerate() {
            if u < s.length() {
                chosen = i;
                break;
            }
            u -= s.length();
        }
        let leg = RouteLeg {
            segment: segs[chosen].id,
            forward: rng.random_bool(0.5),
        };
        pick = (leg, u.clamp(0.0, segs[chosen].length()));
        if leg_is_clear(cars, pick.0, pick.1) {
            break;
        }
    }
    Ok(pick)
}

fn outgoing_leg(world: &World, node: NodeId) -> Option<RouteLeg> {
    world.node(node).segments.iter().find_map(|&sid| {
        let seg = world.segment(sid);
        [true, false]
            .into_iter()
            .find(|&f| seg.start_node(f) == node)
            .map(|forward| RouteLeg { segment: sid, forward })
    })
}

impl<'w> Simulation<'w> {
    /// Builds every vehicle, base station, technology and flow of `scenario`
    /// on `world`. `seed` overrides the scenario's own seed.
    pub fn new(scenario: &Scenario, world: &'w World, seed: u64) -> Result<Self, SetupError> {
        let issues = scenario.validate();
        if !issues.is_empty() {
            return Err(SetupError::Invalid(issues));
        }
        let mut warnings: Vec<String> = world.warnings().to_vec();

        // Cars.
        let mut placement = RandomStream::new(seed, "placement");
        let mut cars: Vec<Car> = Vec::new();
        let mut names: Vec<(String, NodeKind)> = Vec::new();
        for spec in &scenario.cars {
            for (k, name) in spec.names().into_iter().enumerate() {
                let rng = RandomStream::new(seed, &format!("car/{}", name));
                let idm = spec.idm.unwrap_or(scenario.idm);
                let (leg, offset, strategy) = match spec.strategy {
                    StrategyKind::FixedRoute => {
                        let stops = spec
                            .route
                            .iter()
                            .map(|&o| osm_node(world, &name, o))
                            .collect::<Result<Vec<_>, _>>()?;
                        let path = world.shortest_path(stops[0], stops[1]).ok().flatten().unwrap_or_default();
                        let Some(&first) = path.first() else {
                            return Err(SetupError::NoRoute {
                                car: name,
                                from: spec.route[0],
                                to: spec.route[1],
                            });
                        };
                        let mut cycle: Vec<NodeId> = stops[1..].to_vec();
                        cycle.push(stops[0]);
                        cycle.push(stops[1]);
                        if world.route_through(&cycle).ok().flatten().is_none() {
                            return Err(SetupError::NoRoute {
                                car: name,
                                from: spec.route[spec.route.len() - 1],
                                to: spec.route[0],
                            });
                        }
                        let offset = (k as f64 * 3.0 * CAR_LENGTH).min(world.segment(first.segment).length());
                        (first, offset, Strategy::FixedRoute(cycle))
                    }
                    StrategyKind::Random => match spec.start_node {
                        Some(o) => {
                            let n = osm_node(world, &name, o)?;
                            let leg = outgoing_leg(world, n).ok_or(SetupError::DeadStart {
                                car: name.clone(),
                                osm_id: o,
                            })?;
                            let offset = k as f64 * 3.0 * CAR_LENGTH;
                            if offset <= world.segment(leg.segment).length() && leg_is_clear(&cars, leg, offset) {
                                (leg, offset, Strategy::Random)
                            } else {
                                warnings.push(format!("{}: no room at the start node, placed randomly", name));
                                let (leg, offset) = random_placement(world, &cars, &mut placement)?;
                                (leg, offset, Strategy::Random)
                            }
                        }
                        None => {
                            let (leg, offset) = random_placement(world, &cars, &mut placement)?;
                            (leg, offset, Strategy::Random)
                        }
                    },
                };
                let mut car = Car::new(world, cars.len() as u32, leg, offset, strategy, idm, rng);
                car.desired_speed = spec.desired_speed;
                cars.push(car);
                names.push((name, NodeKind::Car));
            }
        }
        let car_count = cars.len();
        let index_of = |names: &[(String, NodeKind)], n: &str| names.iter().position(|(m, _)| m == n);

        // UAVs, positioned once cars exist.
        let mut uavs = Vec::new();
        for (i, spec) in scenario.uavs.iter().enumerate() {
            let params = spec.params(&scenario.uav_defaults);
            let h = params.operating_height;
            let target = spec.target.as_deref().and_then(|t| index_of(&names[..car_count], t));
            let start = match (&spec.start, spec.role) {
                (Some(p), _) => project(world, &spec.id, p)?,
                (None, UavRole::AerialSensor) => cars[target.expect("validated target")].position.with_z(h),
                (None, UavRole::WaypointMission) => project(world, &spec.id, &spec.waypoints[0])?,
                (None, UavRole::AerialRelay) => {
                    let b = world.bounds();
                    Vec3::new((b.min_x + b.max_x) / 2.0, (b.min_y + b.max_y) / 2.0, h)
                }
            };
            let role = match spec.role {
                UavRole::AerialSensor => Role::AerialSensor {
                    car: target.expect("validated target") as u32,
                },
                UavRole::AerialRelay => {
                    // Base stations follow the UAVs in node order.
                    let first_bs = car_count + scenario.uavs.len();
                    let bs = scenario.base_stations.iter().position(|b| Some(&b.id) == spec.base.as_ref());
                    let node = |n: &str| {
                        index_of(&names, n)
                            .or_else(|| scenario.uavs.iter().position(|u| u.id == n).map(|j| car_count + j))
                            .or_else(|| scenario.base_stations.iter().position(|b| b.id == n).map(|j| first_bs + j))
                    };
                    Role::AerialRelay {
                        base: (first_bs + bs.expect("validated base")) as u32,
                        users: spec.users.iter().filter_map(|u| node(u)).map(|j| j as u32).collect(),
                    }
                }
                UavRole::WaypointMission => Role::WaypointMission(
                    spec.waypoints
                        .iter()
                        .map(|p| project(world, &spec.id, p))
                        .collect::<Result<Vec<_>, _>>()?,
                ),
            };
            uavs.push(Uav::new(i as u32, start, role, params));
            names.push((spec.id.clone(), NodeKind::Uav));
        }

        // Base stations.
        let mut stations = Vec::new();
        for spec in &scenario.base_stations {
            let m = match (&spec.position, &spec.mounted_on) {
                (Some(p), _) => Mount::Fixed(project(world, &spec.id, p)?),
                (None, Some(u)) => Mount::OnUav(index_of(&names, u).expect("validated mount") - car_count),
                (None, None) => unreachable!("validated placement"),
            };
            stations.push(m);
            names.push((spec.id.clone(), NodeKind::BaseStation));
        }

        let uav_links = scenario
            .uavs
            .iter()
            .map(|spec| UavLinks {
                target: spec.target.as_deref().and_then(|t| index_of(&names[..car_count], t)),
                base: spec.base.as_deref().and_then(|b| index_of(&names, b)).map(|i| i as NodeIx),
                users: spec
                    .users
                    .iter()
                    .filter_map(|u| index_of(&names, u))
                    .map(|i| i as NodeIx)
                    .collect(),
            })
            .collect();

        let nodes = names
            .iter()
            .map(|(name, kind)| NetNode {
                name: name.clone(),
                kind: *kind,
                position: Vec3::ZERO,
                mount: if *kind == NodeKind::Car { ArrayMount::UP } else { ArrayMount::DOWN },
            })
            .collect();

        // Technologies.
        let node_ix = |n: &str| index_of(&names, n).expect("validated node") as NodeIx;
        let mut net = NetState::default();
        let mut technologies = Vec::new();
        for (t, spec) in scenario.technologies.iter().enumerate() {
            let radio = spec.radio();
            let mut members: Vec<NodeIx> = Vec::new();
            for f in &scenario.flows {
                if f.technologies.iter().any(|x| x == &spec.id) {
                    members.push(node_ix(&f.src));
                    members.push(node_ix(&f.dst));
                }
            }
            members.sort_unstable();
            members.dedup();
            let tech = t as u16;
            let (mac, bs_power) = match spec.kind {
                TechKind::Cellular => {
                    let p: CellularParams = spec.cellular.clone().unwrap_or_default();
                    let bss = scenario
                        .base_stations
                        .iter()
                        .filter(|b| b.technologies.contains(&spec.id))
                        .map(|b| node_ix(&b.id))
                        .collect();
                    let power = p.bs_tx_power_dbm;
                    (Mac::Cellular(Cellular::new(tech, radio, p, bss)), power)
                }
                TechKind::Csma => {
                    let p: CsmaParams = spec.csma.clone().unwrap_or_default();
                    (Mac::Csma(Csma::new(tech, radio, p, &members)), radio.tx_power_dbm)
                }
                TechKind::Sps => {
                    let p: SpsParams = spec.sps.clone().unwrap_or_default();
                    (Mac::Sps(Sps::new(tech, radio, p, &members)), radio.tx_power_dbm)
                }
                TechKind::MmWave => {
                    let p: MmWaveParams = spec.mmwave.clone().unwrap_or_default();
                    let power = p.bs_tx_power_dbm;
                    (Mac::MmWave(MmWave::new(tech, radio, p)), power)
                }
            };
            net.macs.push(mac);
            technologies.push((spec.id.clone(), spec.kind, bs_power));
        }

        // Flows.
        let mut flows = Vec::new();
        for decl in &scenario.flows {
            for tech_name in &decl.technologies {
                let t = technologies.iter().position(|(n, _, _)| n == tech_name).expect("validated technology");
                let index = flows.len() as u64;
                let jitter = if decl.jitter_s > 0.0 {
                    keyed_stream(seed, &[TAG_FLOW_JITTER, index]).random_range(0.0..decl.jitter_s)
                } else {
                    0.0
                };
                let kind = match decl.kind {
                    FlowKindSpec::Cam => FlowKind::Cam {
                        interval_s: decl.interval(),
                    },
                    FlowKindSpec::Cbr => FlowKind::Cbr {
                        rate_bps: decl.rate_bps.expect("validated rate"),
                    },
                };
                flows.push(FlowInfo {
                    name: decl.name_on(tech_name),
                    decl: decl.id.clone(),
                    technology: tech_name.clone(),
                    kind: technologies[t].1,
                    src: decl.src.clone(),
                    dst: decl.dst.clone(),
                    spec: FlowSpec {
                        kind,
                        size: decl.size(),
                        src: node_ix(&decl.src),
                        dst: node_ix(&decl.dst),
                        tech: t as u32,
                        start: SimTime::from_secs_f64(decl.start_s + jitter),
                    },
                });
            }
        }

        let duration = SimTime::from_secs_f64(scenario.duration_s);
        let trace = &scenario.trace;
        let mut snapshot_times: Vec<SimTime> = trace
            .snapshots_s
            .iter()
            .map(|&s| SimTime::from_secs_f64(s))
            .filter(|&t| t <= duration)
            .collect();
        snapshot_times.sort();
        snapshot_times.dedup();
        snapshot_times.reverse();

        let n_uavs = uavs.len();
        let mut sim = Simulation {
            world,
            seed,
            net_seed: hash_words(seed, &[TAG_NET]),
            duration,
            horizon: duration + SimTime::from_secs_f64(scenario.drain_s),
            cars,
            uavs,
            uav_links,
            stations,
            nodes,
            channel: Channel::new(scenario.channel, hash_words(seed, &[TAG_CHANNEL])),
            net,
            flows,
            technologies,
            ledger: IntersectionLedger::default(),
            sched: Scheduler::new(),
            tick: 0,
            subjects: Vec::new(),
            trace: Vec::new(),
            probes: Vec::new(),
            link_period: SimTime::from_secs_f64(trace.link_period_s),
            next_link_sample: SimTime::ZERO,
            kin_period: SimTime::from_secs_f64(trace.kinematics_period_s),
            next_kin_sample: SimTime::ZERO,
            snapshot_times,
            snapshots: Vec::new(),
            rate_window: SimTime::from_secs_f64(trace.rate_window_s),
            distance: vec![0.0; car_count + n_uavs],
            degraded: vec![false; n_uavs],
            warnings,
            scratch: Vec::new(),
            started: false,
        };
        for i in 0..car_count + n_uavs {
            let name = sim.nodes[i].name.clone();
            sim.subject(&name);
        }
        sim.build_probes();
        sim.sync_nodes();
        Ok(sim)
    }

    fn subject(&mut self, name: &str) -> u32 {
        match self.subjects.iter().position(|s| s == name) {
            Some(i) => i as u32,
            None => {
                self.subjects.push(name.to_string());
                (self.subjects.len() - 1) as u32
            }
        }
    }

    fn build_probes(&mut self) {
        let mut seen: BTreeMap<(NodeIx, NodeIx, usize), ()> = BTreeMap::new();
        let flows = self.flows.clone();
        for f in &flows {
            let t = f.spec.tech as usize;
            let (tech_name, kind, bs_power) = self.technologies[t].clone();
            match kind {
                TechKind::Cellular => {
                    for ue in [f.spec.src, f.spec.dst] {
                        if self.nodes[ue as usize].kind == NodeKind::BaseStation || seen.insert((ue, ue, t), ()).is_some() {
                            continue;
                        }
                        let subject = self.subject(&format!("{}@{}", self.nodes[ue as usize].name, tech_name));
                        self.probes.push(Probe::Serving { ue, tech: t, subject });
                    }
                }
                _ => {
                    if seen.insert((f.spec.src, f.spec.dst, t), ()).is_some() {
                        continue;
                    }
                    let subject = self.subject(&format!(
                        "{}->{}@{}",
                        self.nodes[f.spec.src as usize].name,
                        self.nodes[f.spec.dst as usize].name,
                        tech_name
                    ));
                    let tx_power_dbm = if self.nodes[f.spec.src as usize].kind == NodeKind::BaseStation {
                        bs_power
                    } else {
                        self.net.macs[t].radio().tx_power_dbm
                    };
                    self.probes.push(Probe::Direct {
                        src: f.spec.src,
                        dst: f.spec.dst,
                        tech: t,
                        tx_power_dbm,
                        subject,
                    });
                }
            }
        }
    }

    pub fn now(&self) -> SimTime {
        self.sched.now()
    }

    pub fn duration(&self) -> SimTime {
        self.duration
    }

    /// End of the run including the drain period.
    pub fn horizon(&self) -> SimTime {
        self.horizon
    }

    pub fn world(&self) -> &World {
        self.world
    }

    pub fn cars(&self) -> &[Car] {
        &self.cars
    }

    pub fn uavs(&self) -> &[Uav] {
        &self.uavs
    }

    pub fn nodes(&self) -> &[NetNode] {
        &self.nodes
    }

    pub fn flows(&self) -> &[FlowInfo] {
        &self.flows
    }

    pub fn net(&self) -> &NetState {
        &self.net
    }

    /// Mutable access to the access models, e.g. to force SPS reservations
    /// before the run starts.
    pub fn net_mut(&mut self) -> &mut NetState {
        &mut self.net
    }

    fn start(&mut self) {
        if self.started {
            return;
        }
        self.started = true;
        self.sched.schedule_at(SimTime::ZERO, Event::Mobility);
        for (i, f) in self.flows.iter().enumerate() {
            self.sched.schedule_at(f.spec.packet_time(0), Event::Generate { flow: i as u32, k: 0 });
        }
    }

    /// Process every event up to and including `until` (capped at the
    /// horizon).
    pub fn run_until(&mut self, until: SimTime) {
        self.start();
        let until = until.min(self.horizon);
        while let Some((t, ev)) = self.sched.pop_until(until) {
            self.dispatch(t, ev);
        }
    }

    /// Runs to the horizon and collects the results.
    pub fn run(mut self) -> RunOutput {
        self.run_until(self.horizon);
        self.finish()
    }

    fn dispatch(&mut self, t: SimTime, ev: Event) {
        match ev {
            Event::Mobility => {
                if self.tick > 0 {
                    self.step_mobility(t);
                }
                self.sync_nodes();
                if t <= self.duration {
                    self.sample(t);
                }
                self.tick += 1;
                let next = SimTime::from_nanos(MOBILITY_STEP.as_nanos() * self.tick);
                if next <= self.horizon {
                    self.sched.schedule_at(next, Event::Mobility);
                }
            }
            Event::Generate { flow, k } => {
                if t > self.duration {
                    return;
                }
                let spec = &self.flows[flow as usize].spec;
                let pkt = Packet {
                    id: self.net.stats.next_id(),
                    flow,
                    size: spec.size,
                    created: t,
                    src: spec.src,
                    dst: spec.dst,
                };
                let tech = spec.tech as usize;
                let next = spec.packet_time(k + 1);
                if next <= self.duration {
                    self.sched.schedule_at(next, Event::Generate { flow, k: k + 1 });
                }
                let medium = Medium {
                    world: self.world,
                    channel: &mut self.channel,
                    nodes: &self.nodes,
                };
                self.net.send(tech, pkt, &mut Adapter(&mut self.sched), medium, self.net_seed);
            }
            Event::Net(ev) => {
                let medium = Medium {
                    world: self.world,
                    channel: &mut self.channel,
                    nodes: &self.nodes,
                };
                self.net.handle(ev, &mut Adapter(&mut self.sched), medium, self.net_seed);
            }
        }
    }

    fn step_mobility(&mut self, t: SimTime) {
        let dt = MOBILITY_STEP.as_secs_f64();
        let now_s = t.as_secs_f64();
        let world = self.world;

        // Leaders from the state at the start of the step.
        let leaders: Vec<_> = (0..self.cars.len())
            .map(|i| {
                let l = find_leader(world, &self.cars, i);
                with_stop_line(world, &self.cars[i], &self.ledger, now_s, l)
            })
            .collect();
        for (i, leader) in leaders.into_iter().enumerate() {
            let car = &mut self.cars[i];
            let before = car.position;
            let approach = car.leg;
            let out = car.step(world, leader, dt);
            if let Some(node) = out.crossed {
                self.ledger.record(node, now_s, approach);
            }
            self.distance[i] += before.distance(car.position);
        }

        let car_count = self.cars.len();
        let peers_all: Vec<Vec3> = self.uavs.iter().map(|u| u.position()).collect();
        let positions: Vec<Vec3> = self.nodes.iter().map(|n| n.position).collect();
        for i in 0..self.uavs.len() {
            let links = &self.uav_links[i];
            let target = links.target.map(|c| (self.cars[c].position, self.cars[c].velocity()));
            let base = links.base.map(|b| positions[b as usize]);
            let users: Vec<Vec3> = links.users.iter().map(|&u| positions[u as usize]).collect();
            let peers: Vec<Vec3> = peers_all
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &p)| p)
                .collect();
            let s = Surroundings {
                world,
                target,
                base,
                users: &users,
                peers: &peers,
            };
            let before = self.uavs[i].position();
            let out = self.uavs[i].step(&s, dt, &mut self.scratch);
            if out.degraded && !self.degraded[i] {
                self.degraded[i] = true;
                self.warnings
                    .push(format!("{}: lost its reference at {} and hovers", self.nodes[car_count + i].name, t));
            }
            self.distance[car_count + i] += before.distance(self.uavs[i].position());
        }
    }

    fn sync_nodes(&mut self) {
        let nc = self.cars.len();
        for (i, c) in self.cars.iter().enumerate() {
            self.nodes[i].position = c.position + Vec3::new(0.0, 0.0, CAR_ANTENNA_HEIGHT);
        }
        for (i, u) in self.uavs.iter().enumerate() {
            self.nodes[nc + i].position = u.position();
        }
        let nu = self.uavs.len();
        for (i, m) in self.stations.iter().enumerate() {
            self.nodes[nc + nu + i].position = match *m {
                Mount::Fixed(p) => p,
                Mount::OnUav(u) => self.uavs[u].position(),
            };
        }
    }

    fn record(&mut self, t: SimTime, subject: u32, metric: Metric, value: f64) {
        debug_assert!(value.is_finite(), "non-finite {} sample", metric.name());
        self.trace.push(TraceRecord {
            time: t,
            subject,
            metric,
            value,
        });
    }

    fn sample(&mut self, t: SimTime) {
        if t >= self.next_kin_sample {
            self.next_kin_sample += self.kin_period;
            self.sample_kinematics(t);
        }
        if t >= self.next_link_sample {
            self.next_link_sample += self.link_period;
            self.sample_links(t);
        }
        while self.snapshot_times.last().is_some_and(|&s| s <= t) {
            self.snapshot_times.pop();
            let snap = self.snapshot(t);
            self.snapshots.push(snap);
        }
    }

    fn sample_kinematics(&mut self, t: SimTime) {
        for i in 0..self.cars.len() {
            let (p, v, a) = {
                let c = &self.cars[i];
                (c.position, c.speed, c.accel)
            };
            let s = i as u32;
            self.record(t, s, Metric::XM, p.x);
            self.record(t, s, Metric::YM, p.y);
            self.record(t, s, Metric::SpeedMps, v);
            self.record(t, s, Metric::AccelMps2, a);
        }
        let nc = self.cars.len();
        for i in 0..self.uavs.len() {
            let u = &self.uavs[i];
            let (p, v, a, pw, hover) = (u.position(), u.velocity().norm(), u.accel, u.power, u.hover_power());
            let s = (nc + i) as u32;
            self.record(t, s, Metric::XM, p.x);
            self.record(t, s, Metric::YM, p.y);
            self.record(t, s, Metric::ZM, p.z);
            self.record(t, s, Metric::SpeedMps, v);
            self.record(t, s, Metric::AccelXMps2, a.x);
            self.record(t, s, Metric::AccelYMps2, a.y);
            self.record(t, s, Metric::AccelZMps2, a.z);
            self.record(t, s, Metric::PowerW, pw);
            self.record(t, s, Metric::HoverPowerW, hover);
        }
    }

    /// Uncached evaluation so traces do not depend on the cache setting.
    fn exact_link(&mut self, tx: NodeIx, rx: NodeIx, f: f64, p: f64) -> crate::channel::ChannelResult {
        let q = ChannelQuery::new(self.nodes[tx as usize].position, self.nodes[rx as usize].position, f, p);
        self.channel.path_loss(self.world, &q)
    }

    fn serving(&mut self, ue: NodeIx, tech: usize) -> Option<(NodeIx, crate::channel::ChannelResult)> {
        let (bss, f, p) = match &self.net.macs[tech] {
            Mac::Cellular(c) => (c.base_stations().to_vec(), c.radio.carrier_hz, c.params.bs_tx_power_dbm),
            _ => return None,
        };
        let mut best: Option<(NodeIx, crate::channel::ChannelResult)> = None;
        for bs in bss {
            let r = self.exact_link(bs, ue, f, p);
            if best.as_ref().is_none_or(|b| r.rx_power_dbm > b.1.rx_power_dbm) {
                best = Some((bs, r));
            }
        }
        best
    }

    fn sample_links(&mut self, t: SimTime) {
        let probes = core::mem::take(&mut self.probes);
        for probe in &probes {
            match *probe {
                Probe::Serving { ue, tech, subject } => {
                    if let Some((_, r)) = self.serving(ue, tech) {
                        self.record(t, subject, Metric::RsrpDbm, r.rsrp_dbm);
                        self.record(t, subject, Metric::DObsM, r.d_obs);
                        self.record(t, subject, Metric::PathLossDb, r.path_loss_db);
                    }
                }
                Probe::Direct {
                    src,
                    dst,
                    tech,
                    tx_power_dbm,
                    subject,
                } => {
                    let f = self.net.macs[tech].radio().carrier_hz;
                    let r = self.exact_link(src, dst, f, tx_power_dbm);
                    self.record(t, subject, Metric::RxPowerDbm, r.rx_power_dbm);
                    self.record(t, subject, Metric::DObsM, r.d_obs);
                    self.record(t, subject, Metric::PathLossDb, r.path_loss_db);
                }
            }
        }
        self.probes = probes;
    }

    /// Current positions and flow links.
    pub fn snapshot(&mut self, t: SimTime) -> Snapshot {
        let nc = self.cars.len();
        let glyphs = (0..self.nodes.len())
            .map(|i| {
                let heading = if i < nc {
                    self.cars[i].heading
                } else if i < nc + self.uavs.len() {
                    let v = self.uavs[i - nc].velocity().with_z(0.0);
                    if v.norm() > 1e-3 {
                        v.normalized()
                    } else {
                        Vec3::ZERO
                    }
                } else {
                    Vec3::ZERO
                };
                Glyph {
                    node: i as NodeIx,
                    position: self.nodes[i].position,
                    heading,
                }
            })
            .collect();
        let mut pairs: Vec<(NodeIx, NodeIx)> = Vec::new();
        let flows: Vec<(NodeIx, NodeIx, usize, TechKind)> = self
            .flows
            .iter()
            .map(|f| (f.spec.src, f.spec.dst, f.spec.tech as usize, f.kind))
            .collect();
        for (src, dst, tech, kind) in flows {
            if kind == TechKind::Cellular {
                for ue in [src, dst] {
                    if self.nodes[ue as usize].kind == NodeKind::BaseStation {
                        continue;
                    }
                    if let Some((bs, _)) = self.serving(ue, tech) {
                        pairs.push((bs, ue));
                    }
                }
            } else {
                pairs.push((src, dst));
            }
        }
        let mut links: Vec<SnapshotLink> = Vec::new();
        for (a, b) in pairs {
            let (a, b) = (a.min(b), a.max(b));
            if a == b || links.iter().any(|l| l.a == a && l.b == b) {
                continue;
            }
            let d_obs = crate::channel::obstructed_distance(
                self.world,
                self.nodes[a as usize].position,
                self.nodes[b as usize].position,
                &mut self.scratch,
            );
            links.push(SnapshotLink { a, b, los: d_obs == 0.0 });
        }
        Snapshot { time: t, glyphs, links }
    }

    /// Closes the packet records and gathers all outputs.
    pub fn finish(mut self) -> RunOutput {
        let end = self.sched.now().max(self.horizon);
        self.net.stats.close(end);
        let nflows = self.flows.len() as u32;
        let summaries = self.net.stats.summaries(nflows, self.duration);
        let rates = self.net.stats.rate_series(nflows, self.rate_window, self.duration);
        let nc = self.cars.len();
        let mut vehicles = Vec::new();
        for (i, c) in self.cars.iter().enumerate() {
            if c.collisions > 0 {
                self.warnings.push(format!(
                    "{}: {} steps with a gap below zero",
                    self.nodes[i].name, c.collisions
                ));
            }
            vehicles.push(VehicleSummary {
                name: self.nodes[i].name.clone(),
                kind: NodeKind::Car,
                distance_m: self.distance[i],
                energy_j: None,
                collisions: c.collisions,
            });
        }
        for (i, u) in self.uavs.iter().enumerate() {
            vehicles.push(VehicleSummary {
                name: self.nodes[nc + i].name.clone(),
                kind: NodeKind::Uav,
                distance_m: self.distance[nc + i],
                energy_j: Some(u.energy.joules),
                collisions: 0,
            });
        }
        RunOutput {
            seed: self.seed,
            duration: self.duration,
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeInfo {
                    name: n.name.clone(),
                    kind: n.kind,
                })
                .collect(),
            flows: self.flows,
            subjects: self.subjects,
            trace: self.trace,
            packets: self.net.stats.records,
            summaries,
            rates,
            snapshots: self.snapshots,
            vehicles,
            cache: CacheStats {
                hits: self.channel.hits(),
                misses: self.channel.misses(),
            },
            events: self.sched.fired(),
            warnings: self.warnings,
        }
    }
}
