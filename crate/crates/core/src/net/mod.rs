//! Abstract radio access: shared PHY helpers, traffic, statistics and the
//! four medium-access models.

pub mod cellular;
pub mod csma;
pub mod fixed;
pub mod mmwave;
pub mod phy;
pub mod sps;
pub mod stats;
pub mod traffic;

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::beam::ArrayMount;
use crate::channel::{Channel, ChannelQuery, ChannelResult};
use crate::math::Vec3;
use crate::rng::{hash_words, RandomStream};
use crate::time::SimTime;
use crate::world::World;

pub use phy::{noise_floor_dbm, RadioParams, SpectralEfficiency};
pub use stats::{FlowSummary, LossReason, NetStats, Outcome, PacketRecord, RateSample};
pub use traffic::{FlowKind, FlowSpec};

/// Index of a communicating node (car, UAV or base station).
pub type NodeIx = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    Car,
    Uav,
    BaseStation,
}

#[derive(Debug, Clone)]
pub struct NetNode {
    pub name: String,
    pub kind: NodeKind,
    /// Antenna position.
    pub position: Vec3,
    pub mount: ArrayMount,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Packet {
    pub id: u64,
    pub flow: u32,
    pub size: u32,
    pub created: SimTime,
    pub src: NodeIx,
    pub dst: NodeIx,
}

/// Scheduling interface the MAC models need from the engine.
pub trait NetScheduler {
    fn now(&self) -> SimTime;
    fn at(&mut self, t: SimTime, ev: NetEvent);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetEvent {
    Cellular { tech: u16, ev: cellular::Ev },
    Csma { tech: u16, ev: csma::Ev },
    Sps { tech: u16, ev: sps::Ev },
    MmWave { tech: u16, ev: mmwave::Ev },
}

/// Radio environment: world geometry, channel model and node positions.
pub struct Medium<'a> {
    pub world: &'a World,
    pub channel: &'a mut Channel,
    pub nodes: &'a [NetNode],
}

impl Medium<'_> {
    pub fn link(&mut self, tx: NodeIx, rx: NodeIx, frequency_hz: f64, tx_power_dbm: f64, gains_dbi: f64) -> ChannelResult {
        let q = ChannelQuery {
            tx: self.nodes[tx as usize].position,
            rx: self.nodes[rx as usize].position,
            frequency_hz,
            tx_power_dbm,
            tx_gain_dbi: gains_dbi,
            rx_gain_dbi: 0.0,
        };
        self.channel.evaluate(self.world, &q)
    }

    /// Received power in dBm (before any RSRP normalisation).
    pub fn rx_power(&mut self, tx: NodeIx, rx: NodeIx, frequency_hz: f64, tx_power_dbm: f64) -> f64 {
        self.link(tx, rx, frequency_hz, tx_power_dbm, 0.0).rx_power_dbm
    }
}

/// Everything a MAC handler touches.
pub struct Ctx<'a> {
    pub sched: &'a mut dyn NetScheduler,
    pub medium: Medium<'a>,
    pub stats: &'a mut NetStats,
    pub seed: u64,
}

impl Ctx<'_> {
    pub fn now(&self) -> SimTime {
        self.sched.now()
    }
}

/// Stream for one random decision identified by `words`, independent of how
/// many other decisions were taken before it.
pub fn keyed_stream(seed: u64, words: &[u64]) -> RandomStream {
    RandomStream::from_key(hash_words(seed, words))
}

/// One access technology instance.
#[derive(Debug, Clone)]
pub enum Mac {
    Cellular(cellular::Cellular),
    Csma(csma::Csma),
    Sps(sps::Sps),
    MmWave(mmwave::MmWave),
}

impl Mac {
    pub fn radio(&self) -> &RadioParams {
        match self {
            Mac::Cellular(m) => &m.radio,
            Mac::Csma(m) => &m.radio,
            Mac::Sps(m) => &m.radio,
            Mac::MmWave(m) => &m.radio,
        }
    }

    pub fn enqueue(&mut self, pkt: Packet, ctx: &mut Ctx) {
        match self {
            Mac::Cellular(m) => m.enqueue(pkt, ctx),
            Mac::Csma(m) => m.enqueue(pkt, ctx),
            Mac::Sps(m) => m.enqueue(pkt, ctx),
            Mac::MmWave(m) => m.enqueue(pkt, ctx),
        }
    }
}

/// All technologies of a run plus shared packet bookkeeping.
#[derive(Debug, Clone, Default)]
pub struct NetState {
    pub macs: Vec<Mac>,
    pub stats: NetStats,
}

impl NetState {
    /// Hand a freshly created packet to technology `tech`.
    pub fn send(&mut self, tech: usize, pkt: Packet, sched: &mut dyn NetScheduler, medium: Medium, seed: u64) {
        self.stats.created(pkt);
        let mut ctx = Ctx {
            sched,
            medium,
            stats: &mut self.stats,
            seed,
        };
        self.macs[tech].enqueue(pkt, &mut ctx);
    }

    pub fn handle(&mut self, ev: NetEvent, sched: &mut dyn NetScheduler, medium: Medium, seed: u64) {
        let mut ctx = Ctx {
            sched,
            medium,
            stats: &mut self.stats,
            seed,
        };
        match ev {
            NetEvent::Cellular { tech, ev } => match &mut self.macs[tech as usize] {
                Mac::Cellular(m) => m.handle(ev, &mut ctx),
                _ => unreachable!("event routed to wrong technology"),
            },
            NetEvent::Csma { tech, ev } => match &mut self.macs[tech as usize] {
                Mac::Csma(m) => m.handle(ev, &mut ctx),
                _ => unreachable!("event routed to wrong technology"),
            },
            NetEvent::Sps { tech, ev } => match &mut self.macs[tech as usize] {
                Mac::Sps(m) => m.handle(ev, &mut ctx),
                _ => unreachable!("event routed to wrong technology"),
            },
            NetEvent::MmWave { tech, ev } => match &mut self.macs[tech as usize] {
                Mac::MmWave(m) => m.handle(ev, &mut ctx),
                _ => unreachable!("event routed to wrong technology"),
            },
        }
    }
}
