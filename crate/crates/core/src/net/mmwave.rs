//! Directional millimetre-wave links with ideal geometric beam alignment.

use alloc::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::phy::{sinr_db, RadioParams, SpectralEfficiency};
use super::{Ctx, LossReason, NetEvent, NodeIx, NodeKind, Packet};
use crate::beam::{align_beams, array_gain, ArrayConfig, Pointing};
use crate::math::db_to_linear;
use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MmWaveParams {
    pub bs_tx_power_dbm: f64,
    pub array: ArrayConfig,
    pub buffer_bytes: u64,
    pub leg_latency_s: f64,
    pub overhead: f64,
    /// Air time consumed by a failed transmission, s.
    pub slot_s: f64,
    pub spectral_efficiency: SpectralEfficiency,
}

impl Default for MmWaveParams {
    fn default() -> Self {
        MmWaveParams {
            bs_tx_power_dbm: 30.0,
            array: ArrayConfig::default(),
            buffer_bytes: 1024 * 1024,
            leg_latency_s: 0.0005,
            overhead: 0.3,
            slot_s: 0.000125,
            spectral_efficiency: SpectralEfficiency::default(),
        }
    }
}

impl MmWaveParams {
    pub fn is_valid(&self) -> bool {
        self.bs_tx_power_dbm.is_finite()
            && self.array.rows > 0
            && self.array.cols > 0
            && self.array.spacing > 0.0
            && self.buffer_bytes > 0
            && self.leg_latency_s >= 0.0
            && (0.0..1.0).contains(&self.overhead)
            && self.slot_s > 0.0
            && self.spectral_efficiency.is_valid()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ev {
    Done(NodeIx),
}

#[derive(Debug, Clone, Default)]
struct Server {
    queue: VecDeque<Packet>,
    bytes: u64,
    current: Option<(Packet, bool)>,
    busy_until: SimTime,
    pointing: Option<Pointing>,
}

#[derive(Debug, Clone)]
pub struct MmWave {
    pub radio: RadioParams,
    pub params: MmWaveParams,
    tech: u16,
    servers: BTreeMap<NodeIx, Server>,
}

/// Outcome of evaluating one link at the current positions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub tx_gain_dbi: f64,
    pub rx_gain_dbi: f64,
    pub rx_power_dbm: f64,
    pub sinr_db: f64,
    pub capacity_bps: f64,
    pub misaligned: bool,
}

impl MmWave {
    pub fn new(tech: u16, radio: RadioParams, params: MmWaveParams) -> Self {
        MmWave {
            radio,
            params,
            tech,
            servers: BTreeMap::new(),
        }
    }

    fn tx_power(&self, ctx: &Ctx, n: NodeIx) -> f64 {
        if ctx.medium.nodes[n as usize].kind == NodeKind::BaseStation {
            self.params.bs_tx_power_dbm
        } else {
            self.radio.tx_power_dbm
        }
    }

    /// Beam-aligned budget of `src → dst`, counting every other busy
    /// transmitter as interference through its current beam.
    pub fn budget(&self, src: NodeIx, dst: NodeIx, ctx: &mut Ctx) -> LinkBudget {
        let now = ctx.now();
        let cfg = &self.params.array;
        let nodes = ctx.medium.nodes;
        let (a, b) = (&nodes[src as usize], &nodes[dst as usize]);
        let al = align_beams(a.position, b.position, cfg, &a.mount, cfg, &b.mount);
        let gains = al.tx.gain_dbi + al.rx.gain_dbi;
        let p = self.tx_power(ctx, src);
        let f = self.radio.carrier_hz;
        let signal = ctx.medium.link(src, dst, f, p, gains).rx_power_dbm;
        let mut interference = 0.0;
        for (&o, s) in &self.servers {
            let Some(steer) = s.pointing else { continue };
            if o == src || o == dst || s.current.is_none() || s.busy_until <= now {
                continue;
            }
            let on = &nodes[o as usize];
            let look_tx = Pointing::from_direction(on.mount.to_local((b.position - on.position).normalized()));
            let look_rx = Pointing::from_direction(b.mount.to_local((on.position - b.position).normalized()));
            let g = array_gain(cfg, steer, look_tx).unwrap_or(f64::NEG_INFINITY)
                + array_gain(cfg, al.rx.pointing, look_rx).unwrap_or(f64::NEG_INFINITY);
            let po = self.tx_power(ctx, o);
            interference += db_to_linear(ctx.medium.link(o, dst, f, po, g).rx_power_dbm);
        }
        let sinr = sinr_db(signal, self.radio.noise_dbm(), interference);
        LinkBudget {
            tx_gain_dbi: al.tx.gain_dbi,
            rx_gain_dbi: al.rx.gain_dbi,
            rx_power_dbm: signal,
            sinr_db: sinr,
            capacity_bps: self
                .params
                .spectral_efficiency
                .capacity_bps(sinr, self.radio.bandwidth_hz, self.params.overhead),
            misaligned: al.tx.misaligned || al.rx.misaligned,
        }
    }

    pub fn enqueue(&mut self, pkt: Packet, ctx: &mut Ctx) {
        let limit = self.params.buffer_bytes;
        let s = self.servers.entry(pkt.src).or_default();
        if s.bytes + pkt.size as u64 > limit {
            ctx.stats.lose(&pkt, ctx.now(), LossReason::BufferOverflow);
            return;
        }
        s.bytes += pkt.size as u64;
        s.queue.push_back(pkt);
        if s.current.is_none() {
            self.start(pkt.src, ctx);
        }
    }

    pub fn handle(&mut self, ev: Ev, ctx: &mut Ctx) {
        let Ev::Done(n) = ev;
        let now = ctx.now();
        let s = self.servers.get_mut(&n).expect("server state");
        let (pkt, ok) = s.current.take().expect("packet in service");
        if ok {
            ctx.stats.deliver(&pkt, now + SimTime::from_secs_f64(self.params.leg_latency_s));
        } else {
            ctx.stats.lose(&pkt, now, LossReason::Sinr);
        }
        self.start(n, ctx);
    }

    fn start(&mut self, n: NodeIx, ctx: &mut Ctx) {
        let now = ctx.now();
        let Some(pkt) = self.servers.get_mut(&n).and_then(|s| s.queue.pop_front()) else {
            return;
        };
        let lb = self.budget(n, pkt.dst, ctx);
        let ok = lb.sinr_db >= self.radio.sinr_threshold_db && lb.capacity_bps > 0.0;
        let dur = if ok {
            SimTime::from_secs_f64(8.0 * pkt.size as f64 / lb.capacity_bps)
        } else {
            SimTime::from_secs_f64(self.params.slot_s)
        };
        let nodes = ctx.medium.nodes;
        let (a, b) = (&nodes[n as usize], &nodes[pkt.dst as usize]);
        let cfg = &self.params.array;
        let steer = align_beams(a.position, b.position, cfg, &a.mount, cfg, &b.mount).tx.pointing;
        let s = self.servers.get_mut(&n).expect("server state");
        s.bytes -= pkt.size as u64;
        s.current = Some((pkt, ok));
        s.busy_until = now + dur;
        s.pointing = Some(steer);
        ctx.sched.at(
            now + dur,
            NetEvent::MmWave {
                tech: self.tech,
                ev: Ev::Done(n),
            },
        );
    }
}
