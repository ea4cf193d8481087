//! Listen-before-talk access with binary exponential backoff.
//!
//! A station with a packet waits for DIFS of idle medium and transmits. If
//! the medium turns busy first it freezes with a random backoff, which counts
//! down in slots after the next DIFS of idle medium. Every deferral doubles
//! the contention window; a transmission resets it. There are no
//! retransmissions.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::phy::{sinr_db, RadioParams};
use super::{keyed_stream, Ctx, LossReason, NetEvent, NodeIx, Packet};
use crate::math::db_to_linear;
use crate::time::SimTime;

const TAG_BACKOFF: u64 = 0x4241_434b;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsmaParams {
    pub slot_s: f64,
    pub sifs_s: f64,
    pub difs_s: f64,
    pub cw_min: u32,
    pub cw_max: u32,
    pub phy_rate_bps: f64,
    pub preamble_s: f64,
    /// MAC header and trailer, bytes.
    pub header_bytes: u32,
    /// Carrier-sense and no-capture threshold, dBm.
    pub cs_threshold_dbm: f64,
    /// Per-station queue limit, packets.
    pub queue_packets: usize,
}

impl Default for CsmaParams {
    fn default() -> Self {
        CsmaParams {
            slot_s: 13e-6,
            sifs_s: 32e-6,
            difs_s: 58e-6,
            cw_min: 15,
            cw_max: 1023,
            phy_rate_bps: 6e6,
            preamble_s: 40e-6,
            header_bytes: 36,
            cs_threshold_dbm: -85.0,
            queue_packets: 100,
        }
    }
}

impl CsmaParams {
    pub fn is_valid(&self) -> bool {
        self.slot_s > 0.0
            && self.sifs_s >= 0.0
            && self.difs_s >= self.sifs_s
            && self.cw_min > 0
            && self.cw_max >= self.cw_min
            && self.phy_rate_bps > 0.0
            && self.preamble_s >= 0.0
            && self.cs_threshold_dbm.is_finite()
            && self.queue_packets > 0
    }

    /// Air time of a frame carrying `size` payload bytes.
    pub fn frame_time(&self, size: u32) -> SimTime {
        SimTime::from_secs_f64(self.preamble_s + 8.0 * (size + self.header_bytes) as f64 / self.phy_rate_bps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ev {
    Attempt { node: NodeIx, gen: u64 },
    TxEnd(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Idle,
    /// Waiting DIFS plus `slots` backoff slots since `since`.
    Counting { since: SimTime, slots: u32, drawn: bool },
    Frozen { slots: u32 },
    Transmitting,
}

#[derive(Debug, Clone)]
struct Station {
    queue: VecDeque<Packet>,
    cw: u32,
    busy: u32,
    phase: Phase,
    gen: u64,
    draws: u64,
}

#[derive(Debug, Clone)]
struct Transmission {
    id: u64,
    pkt: Packet,
    interference_mw: f64,
    max_interferer_dbm: f64,
    receiver_busy: bool,
    sensed_by: Vec<NodeIx>,
}

#[derive(Debug, Clone)]
pub struct Csma {
    pub radio: RadioParams,
    pub params: CsmaParams,
    tech: u16,
    stations: BTreeMap<NodeIx, Station>,
    on_air: Vec<Transmission>,
    next_tx: u64,
}

impl Csma {
    /// `members` are all nodes sending or receiving on this technology.
    pub fn new(tech: u16, radio: RadioParams, params: CsmaParams, members: &[NodeIx]) -> Self {
        let stations = members
            .iter()
            .map(|&n| {
                (
                    n,
                    Station {
                        queue: VecDeque::new(),
                        cw: params.cw_min,
                        busy: 0,
                        phase: Phase::Idle,
                        gen: 0,
                        draws: 0,
                    },
                )
            })
            .collect();
        Csma {
            radio,
            params,
            tech,
            stations,
            on_air: Vec::new(),
            next_tx: 0,
        }
    }

    fn station(&mut self, n: NodeIx) -> &mut Station {
        self.stations.get_mut(&n).expect("node is not a member of this technology")
    }

    fn draw_backoff(&mut self, n: NodeIx, seed: u64) -> u32 {
        let st = self.station(n);
        st.draws += 1;
        let cw = st.cw;
        let mut rng = keyed_stream(seed, &[TAG_BACKOFF, n as u64, st.draws]);
        rng.random_range(0..=cw)
    }

    fn double_cw(&mut self, n: NodeIx) {
        let max = self.params.cw_max;
        let st = self.station(n);
        st.cw = (2 * st.cw + 1).min(max);
    }

    pub fn enqueue(&mut self, pkt: Packet, ctx: &mut Ctx) {
        let limit = self.params.queue_packets;
        let st = self.station(pkt.src);
        if st.queue.len() >= limit {
            ctx.stats.lose(&pkt, ctx.now(), LossReason::BufferOverflow);
            return;
        }
        st.queue.push_back(pkt);
        if st.phase == Phase::Idle {
            if st.busy > 0 {
                let slots = self.draw_backoff(pkt.src, ctx.seed);
                self.double_cw(pkt.src);
                self.station(pkt.src).phase = Phase::Frozen { slots };
            } else {
                self.start_count(pkt.src, 0, false, ctx);
            }
        }
    }

    fn start_count(&mut self, n: NodeIx, slots: u32, drawn: bool, ctx: &mut Ctx) {
        let now = ctx.now();
        let wait = SimTime::from_secs_f64(self.params.difs_s + slots as f64 * self.params.slot_s);
        let tech = self.tech;
        let st = self.station(n);
        st.gen += 1;
        st.phase = Phase::Counting { since: now, slots, drawn };
        let gen = st.gen;
        ctx.sched.at(
            now + wait,
            NetEvent::Csma {
                tech,
                ev: Ev::Attempt { node: n, gen },
            },
        );
    }

    fn on_busy(&mut self, n: NodeIx, ctx: &mut Ctx) {
        let now = ctx.now();
        let difs = SimTime::from_secs_f64(self.params.difs_s);
        let slot = SimTime::from_secs_f64(self.params.slot_s);
        let Phase::Counting { since, slots, drawn } = self.station(n).phase else {
            return;
        };
        let remaining = if drawn {
            let elapsed = now - since;
            let consumed = if elapsed <= difs {
                0
            } else {
                ((elapsed - difs).as_nanos() / slot.as_nanos().max(1)) as u32
            };
            slots - consumed.min(slots)
        } else {
            self.draw_backoff(n, ctx.seed)
        };
        self.double_cw(n);
        let st = self.station(n);
        st.gen += 1;
        st.phase = Phase::Frozen { slots: remaining };
    }

    fn on_idle(&mut self, n: NodeIx, ctx: &mut Ctx) {
        if let Phase::Frozen { slots } = self.station(n).phase {
            self.start_count(n, slots, true, ctx);
        }
    }

    pub fn handle(&mut self, ev: Ev, ctx: &mut Ctx) {
        match ev {
            Ev::Attempt { node, gen } => {
                if self.station(node).gen == gen {
                    self.transmit(node, ctx);
                }
            }
            Ev::TxEnd(id) => self.finish(id, ctx),
        }
    }

    fn transmit(&mut self, src: NodeIx, ctx: &mut Ctx) {
        let now = ctx.now();
        let f = self.radio.carrier_hz;
        let p = self.radio.tx_power_dbm;
        let st = self.station(src);
        let pkt = st.queue.pop_front().expect("attempt without a queued packet");
        st.phase = Phase::Transmitting;

        let mut tx = Transmission {
            id: self.next_tx,
            pkt,
            interference_mw: 0.0,
            max_interferer_dbm: f64::NEG_INFINITY,
            receiver_busy: false,
            sensed_by: Vec::new(),
        };
        self.next_tx += 1;
        for o in &mut self.on_air {
            let at_other = ctx.medium.rx_power(src, o.pkt.dst, f, p);
            o.interference_mw += db_to_linear(at_other);
            o.max_interferer_dbm = o.max_interferer_dbm.max(at_other);
            if o.pkt.dst == src {
                o.receiver_busy = true;
            }
            let at_mine = ctx.medium.rx_power(o.pkt.src, pkt.dst, f, p);
            tx.interference_mw += db_to_linear(at_mine);
            tx.max_interferer_dbm = tx.max_interferer_dbm.max(at_mine);
            if o.pkt.src == pkt.dst {
                tx.receiver_busy = true;
            }
        }
        let others: Vec<NodeIx> = self.stations.keys().copied().filter(|&n| n != src).collect();
        let mut newly_busy = Vec::new();
        for n in others {
            if ctx.medium.rx_power(src, n, f, p) >= self.params.cs_threshold_dbm {
                tx.sensed_by.push(n);
                let st = self.station(n);
                st.busy += 1;
                if st.busy == 1 {
                    newly_busy.push(n);
                }
            }
        }
        let end = now + self.params.frame_time(pkt.size);
        ctx.sched.at(
            end,
            NetEvent::Csma {
                tech: self.tech,
                ev: Ev::TxEnd(tx.id),
            },
        );
        self.on_air.push(tx);
        for n in newly_busy {
            self.on_busy(n, ctx);
        }
    }

    fn finish(&mut self, id: u64, ctx: &mut Ctx) {
        let now = ctx.now();
        let i = self.on_air.iter().position(|t| t.id == id).expect("transmission on air");
        let tx = self.on_air.remove(i);
        let pkt = tx.pkt;

        let signal = ctx.medium.rx_power(pkt.src, pkt.dst, self.radio.carrier_hz, self.radio.tx_power_dbm);
        let noise = self.radio.noise_dbm();
        let thr = self.radio.sinr_threshold_db;
        if tx.receiver_busy {
            ctx.stats.lose(&pkt, now, LossReason::HalfDuplex);
        } else if tx.max_interferer_dbm >= self.params.cs_threshold_dbm {
            ctx.stats.lose(&pkt, now, LossReason::Collision);
        } else if sinr_db(signal, noise, tx.interference_mw) < thr {
            let reason = if tx.interference_mw > 0.0 && sinr_db(signal, noise, 0.0) >= thr {
                LossReason::Collision
            } else {
                LossReason::Sinr
            };
            ctx.stats.lose(&pkt, now, reason);
        } else {
            ctx.stats.deliver(&pkt, now);
        }

        let mut newly_idle = Vec::new();
        for n in tx.sensed_by {
            let st = self.station(n);
            st.busy -= 1;
            if st.busy == 0 {
                newly_idle.push(n);
            }
        }

        let src = pkt.src;
        let cw_min = self.params.cw_min;
        let st = self.station(src);
        st.cw = cw_min;
        st.phase = Phase::Idle;
        if !st.queue.is_empty() {
            let busy = st.busy > 0;
            let slots = self.draw_backoff(src, ctx.seed);
            if busy {
                self.station(src).phase = Phase::Frozen { slots };
            } else {
                self.start_count(src, slots, true, ctx);
            }
        }
        for n in newly_idle {
            self.on_idle(n, ctx);
        }
    }
}
