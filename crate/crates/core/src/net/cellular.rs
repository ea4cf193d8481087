//! Centrally scheduled cellular access: scheduling-request/grant delay on the
//! uplink, rate-limited drop-tail buffers at the base stations.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::phy::{sinr_db, RadioParams, SpectralEfficiency};
use super::{keyed_stream, Ctx, LossReason, NetEvent, NodeIx, Packet};
use crate::math::db_to_linear;
use crate::time::SimTime;

const TAG_GRANT: u64 = 0x4752_414e_54;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CellularParams {
    pub bs_tx_power_dbm: f64,
    pub grant_delay_min_s: f64,
    pub grant_delay_max_s: f64,
    /// Per-buffer limit, bytes.
    pub buffer_bytes: u64,
    /// Processing latency added after each air-interface leg, s.
    pub leg_latency_s: f64,
    /// Fraction of capacity spent on control overhead.
    pub overhead: f64,
    /// Air time consumed by a failed transmission, s.
    pub tti_s: f64,
    pub spectral_efficiency: SpectralEfficiency,
}

impl Default for CellularParams {
    fn default() -> Self {
        CellularParams {
            bs_tx_power_dbm: 43.0,
            grant_delay_min_s: 0.004,
            grant_delay_max_s: 0.012,
            buffer_bytes: 256 * 1024,
            leg_latency_s: 0.001,
            overhead: 0.3,
            tti_s: 0.001,
            spectral_efficiency: SpectralEfficiency::default(),
        }
    }
}

impl CellularParams {
    pub fn is_valid(&self) -> bool {
        self.bs_tx_power_dbm.is_finite()
            && self.grant_delay_min_s >= 0.0
            && self.grant_delay_max_s >= self.grant_delay_min_s
            && self.buffer_bytes > 0
            && self.leg_latency_s >= 0.0
            && (0.0..1.0).contains(&self.overhead)
            && self.tti_s > 0.0
            && self.spectral_efficiency.is_valid()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ev {
    Grant(NodeIx),
    UplinkDone(NodeIx),
    /// Packet reached the core through base station `bs`.
    Arrive { bs: NodeIx, pkt: Packet },
    DownlinkDone(NodeIx),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum UlState {
    Idle,
    Requesting,
    Transmitting,
}

#[derive(Debug, Clone)]
struct Uplink {
    queue: VecDeque<Packet>,
    bytes: u64,
    state: UlState,
    current: Option<(Packet, NodeIx, bool)>,
    busy_until: SimTime,
}

#[derive(Debug, Clone, Default)]
struct Downlink {
    queue: VecDeque<Packet>,
    bytes: u64,
    current: Option<(Packet, bool)>,
    busy_until: SimTime,
}

#[derive(Debug, Clone)]
pub struct Cellular {
    pub radio: RadioParams,
    pub params: CellularParams,
    tech: u16,
    base_stations: Vec<NodeIx>,
    uplinks: BTreeMap<NodeIx, Uplink>,
    downlinks: BTreeMap<NodeIx, Downlink>,
}

impl Cellular {
    pub fn new(tech: u16, radio: RadioParams, params: CellularParams, base_stations: Vec<NodeIx>) -> Self {
        let downlinks = base_stations.iter().map(|&b| (b, Downlink::default())).collect();
        Cellular {
            radio,
            params,
            tech,
            base_stations,
            uplinks: BTreeMap::new(),
            downlinks,
        }
    }

    pub fn base_stations(&self) -> &[NodeIx] {
        &self.base_stations
    }

    pub fn is_base_station(&self, n: NodeIx) -> bool {
        self.base_stations.contains(&n)
    }

    fn ev(&self, ev: Ev) -> NetEvent {
        NetEvent::Cellular { tech: self.tech, ev }
    }

    /// Base station with the strongest downlink at `ue`, lowest index on ties.
    pub fn serving(&self, ue: NodeIx, ctx: &mut Ctx) -> (NodeIx, f64) {
        let mut best = (self.base_stations[0], f64::NEG_INFINITY);
        for &bs in &self.base_stations {
            let p = ctx.medium.rx_power(bs, ue, self.radio.carrier_hz, self.params.bs_tx_power_dbm);
            if p > best.1 {
                best = (bs, p);
            }
        }
        best
    }

    pub fn enqueue(&mut self, pkt: Packet, ctx: &mut Ctx) {
        if self.is_base_station(pkt.src) {
            self.push_downlink(pkt.src, pkt, ctx);
            return;
        }
        let now = ctx.now();
        let limit = self.params.buffer_bytes;
        let ul = self.uplinks.entry(pkt.src).or_insert_with(|| Uplink {
            queue: VecDeque::new(),
            bytes: 0,
            state: UlState::Idle,
            current: None,
            busy_until: SimTime::ZERO,
        });
        if ul.bytes + pkt.size as u64 > limit {
            ctx.stats.lose(&pkt, now, LossReason::BufferOverflow);
            return;
        }
        ul.bytes += pkt.size as u64;
        ul.queue.push_back(pkt);
        if ul.state == UlState::Idle {
            ul.state = UlState::Requesting;
            let mut rng = keyed_stream(ctx.seed, &[TAG_GRANT, pkt.id]);
            let d = rng.random_range(self.params.grant_delay_min_s..=self.params.grant_delay_max_s);
            let ev = self.ev(Ev::Grant(pkt.src));
            ctx.sched.at(now + SimTime::from_secs_f64(d), ev);
        }
    }

    pub fn handle(&mut self, ev: Ev, ctx: &mut Ctx) {
        match ev {
            Ev::Grant(ue) => self.start_uplink(ue, ctx),
            Ev::UplinkDone(ue) => {
                let now = ctx.now();
                let ul = self.uplinks.get_mut(&ue).expect("uplink state");
                let (pkt, bs, ok) = ul.current.take().expect("uplink in service");
                if ok {
                    let at = now + SimTime::from_secs_f64(self.params.leg_latency_s);
                    let ev = NetEvent::Cellular {
                        tech: self.tech,
                        ev: Ev::Arrive { bs, pkt },
                    };
                    ctx.sched.at(at, ev);
                } else {
                    ctx.stats.lose(&pkt, now, LossReason::Sinr);
                }
                if ul.queue.is_empty() {
                    ul.state = UlState::Idle;
                } else {
                    self.start_uplink(ue, ctx);
                }
            }
            Ev::Arrive { pkt, .. } => {
                if self.is_base_station(pkt.dst) {
                    ctx.stats.deliver(&pkt, ctx.now());
                } else {
                    let (serving, _) = self.serving(pkt.dst, ctx);
                    self.push_downlink(serving, pkt, ctx);
                }
            }
            Ev::DownlinkDone(bs) => {
                let now = ctx.now();
                let dl = self.downlinks.get_mut(&bs).expect("downlink state");
                let (pkt, ok) = dl.current.take().expect("downlink in service");
                if ok {
                    ctx.stats.deliver(&pkt, now + SimTime::from_secs_f64(self.params.leg_latency_s));
                } else {
                    ctx.stats.lose(&pkt, now, LossReason::Sinr);
                }
                self.start_downlink(bs, ctx);
            }
        }
    }

    /// Service time and success of one packet given the link SINR.
    fn service(&self, sinr: f64, size: u32) -> (SimTime, bool) {
        let cap = self
            .params
            .spectral_efficiency
            .capacity_bps(sinr, self.radio.bandwidth_hz, self.params.overhead);
        if sinr >= self.radio.sinr_threshold_db && cap > 0.0 {
            (SimTime::from_secs_f64(8.0 * size as f64 / cap), true)
        } else {
            (SimTime::from_secs_f64(self.params.tti_s), false)
        }
    }

    fn start_uplink(&mut self, ue: NodeIx, ctx: &mut Ctx) {
        let now = ctx.now();
        let Some(pkt) = self.uplinks.get_mut(&ue).and_then(|ul| ul.queue.pop_front()) else {
            return;
        };
        let (bs, _) = self.serving(ue, ctx);
        let f = self.radio.carrier_hz;
        let signal = ctx.medium.rx_power(ue, bs, f, self.radio.tx_power_dbm);
        let mut interference = 0.0;
        for (&other, o) in &self.uplinks {
            if other != ue && o.state == UlState::Transmitting && o.busy_until > now {
                interference += db_to_linear(ctx.medium.rx_power(other, bs, f, self.radio.tx_power_dbm));
            }
        }
        let sinr = sinr_db(signal, self.radio.noise_dbm(), interference);
        let (dur, ok) = self.service(sinr, pkt.size);
        let ul = self.uplinks.get_mut(&ue).expect("uplink state");
        ul.bytes -= pkt.size as u64;
        ul.state = UlState::Transmitting;
        ul.current = Some((pkt, bs, ok));
        ul.busy_until = now + dur;
        let ev = self.ev(Ev::UplinkDone(ue));
        ctx.sched.at(now + dur, ev);
    }

    fn push_downlink(&mut self, bs: NodeIx, pkt: Packet, ctx: &mut Ctx) {
        let limit = self.params.buffer_bytes;
        let dl = self.downlinks.get_mut(&bs).expect("downlink state");
        if dl.bytes + pkt.size as u64 > limit {
            ctx.stats.lose(&pkt, ctx.now(), LossReason::BufferOverflow);
            return;
        }
        dl.bytes += pkt.size as u64;
        dl.queue.push_back(pkt);
        if dl.current.is_none() {
            self.start_downlink(bs, ctx);
        }
    }

    fn start_downlink(&mut self, bs: NodeIx, ctx: &mut Ctx) {
        let now = ctx.now();
        let Some(pkt) = self.downlinks.get_mut(&bs).and_then(|dl| dl.queue.pop_front()) else {
            return;
        };
        let f = self.radio.carrier_hz;
        let p = self.params.bs_tx_power_dbm;
        let signal = ctx.medium.rx_power(bs, pkt.dst, f, p);
        let mut interference = 0.0;
        for (&other, o) in &self.downlinks {
            if other != bs && o.current.is_some() && o.busy_until > now {
                interference += db_to_linear(ctx.medium.rx_power(other, pkt.dst, f, p));
            }
        }
        let sinr = sinr_db(signal, self.radio.noise_dbm(), interference);
        let (dur, ok) = self.service(sinr, pkt.size);
        let dl = self.downlinks.get_mut(&bs).expect("downlink state");
        dl.bytes -= pkt.size as u64;
        dl.current = Some((pkt, ok));
        dl.busy_until = now + dur;
        let ev = self.ev(Ev::DownlinkDone(bs));
        ctx.sched.at(now + dur, ev);
    }
}
