//! Semi-persistent scheduling on a slotted sidelink.
//!
//! Time is divided into subframes, each split into subchannels. A sender
//! reserves one (subframe, subchannel) resource that repeats every period.
//! Selection picks uniformly among the resources of the window following
//! the triggering packet, optionally excluding resources sensed as reserved
//! by others. After a counter of transmissions expires the reservation is
//! kept or, with the reselection probability, released.

use alloc::collections::BTreeMap;
use alloc::collections::VecDeque;
use alloc::vec::Vec;

use num_traits::Float;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::phy::{sinr_db, RadioParams};
use super::{keyed_stream, Ctx, LossReason, NetEvent, NodeIx, Packet};
use crate::math::db_to_linear;
use crate::time::SimTime;

const TAG_SELECT: u64 = 0x5345_4c;
const TAG_COUNTER: u64 = 0x434e_54;
const TAG_KEEP: u64 = 0x4b45_4550;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpsParams {
    pub subframe_s: f64,
    pub subchannels: u32,
    /// Selection window length, subframes.
    pub window_subframes: u32,
    /// Reservation period, subframes.
    pub period_subframes: u32,
    pub counter_min: u32,
    pub counter_max: u32,
    pub reselect_probability: f64,
    /// Exclude resources reserved by senders heard above the threshold.
    pub sensing: bool,
    pub sensing_threshold_dbm: f64,
    /// Minimum share of the window left after exclusion; below it the
    /// exclusion is dropped.
    pub min_candidate_fraction: f64,
    pub queue_packets: usize,
}

impl Default for SpsParams {
    fn default() -> Self {
        SpsParams {
            subframe_s: 1e-3,
            subchannels: 5,
            window_subframes: 10,
            period_subframes: 100,
            counter_min: 5,
            counter_max: 15,
            reselect_probability: 0.2,
            sensing: false,
            sensing_threshold_dbm: -110.0,
            min_candidate_fraction: 0.2,
            queue_packets: 10,
        }
    }
}

impl SpsParams {
    pub fn is_valid(&self) -> bool {
        self.subframe_s > 0.0
            && self.subchannels > 0
            && self.window_subframes > 0
            && self.period_subframes >= self.window_subframes
            && self.counter_min > 0
            && self.counter_max >= self.counter_min
            && (0.0..=1.0).contains(&self.reselect_probability)
            && self.sensing_threshold_dbm.is_finite()
            && (0.0..=1.0).contains(&self.min_candidate_fraction)
            && self.queue_packets > 0
    }

    /// Resources per selection window.
    pub fn resources(&self) -> u32 {
        self.window_subframes * self.subchannels
    }

    fn subframe_ns(&self) -> u64 {
        (self.subframe_s * 1e9).round() as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ev {
    /// Reserved occurrence of `node` in subframe `subframe`.
    Occasion { node: NodeIx, subframe: u64 },
    /// End of subframe `subframe`: resolve all its transmissions.
    Resolve { subframe: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Reservation {
    /// Next absolute subframe index.
    pub next: u64,
    pub subchannel: u32,
    pub counter: u32,
}

#[derive(Debug, Clone, Default)]
struct Sender {
    queue: VecDeque<Packet>,
    reservation: Option<Reservation>,
    /// An occasion event is pending for the current reservation.
    armed: bool,
    selections: u64,
    expiries: u64,
}

#[derive(Debug, Clone, Copy)]
struct SlotTx {
    subchannel: u32,
    pkt: Packet,
}

#[derive(Debug, Clone)]
pub struct Sps {
    pub radio: RadioParams,
    pub params: SpsParams,
    tech: u16,
    senders: BTreeMap<NodeIx, Sender>,
    subframes: BTreeMap<u64, Vec<SlotTx>>,
}

impl Sps {
    pub fn new(tech: u16, radio: RadioParams, params: SpsParams, members: &[NodeIx]) -> Self {
        let senders = members.iter().map(|&n| (n, Sender::default())).collect();
        Sps {
            radio,
            params,
            tech,
            senders,
            subframes: BTreeMap::new(),
        }
    }

    /// Noise over one subchannel.
    pub fn noise_dbm(&self) -> f64 {
        super::noise_floor_dbm(self.radio.bandwidth_hz / self.params.subchannels as f64, self.radio.noise_figure_db)
    }

    pub fn reservation(&self, n: NodeIx) -> Option<Reservation> {
        self.senders.get(&n).and_then(|s| s.reservation)
    }

    /// Overrides the reservation of `n`, e.g. to force two senders onto the
    /// same resource.
    pub fn force_reservation(&mut self, n: NodeIx, r: Reservation) {
        let s = self.senders.get_mut(&n).expect("member");
        s.reservation = Some(r);
        s.armed = false;
    }

    fn subframe_start(&self, k: u64) -> SimTime {
        SimTime::from_nanos(k * self.params.subframe_ns())
    }

    fn draw_counter(&self, n: NodeIx, k: u64, seed: u64) -> u32 {
        let mut rng = keyed_stream(seed, &[TAG_COUNTER, n as u64, k]);
        rng.random_range(self.params.counter_min..=self.params.counter_max)
    }

    fn schedule_occasion(&self, n: NodeIx, subframe: u64, ctx: &mut Ctx) {
        let at = self.subframe_start(subframe);
        ctx.sched.at(
            at,
            NetEvent::Sps {
                tech: self.tech,
                ev: Ev::Occasion { node: n, subframe },
            },
        );
    }

    pub fn enqueue(&mut self, pkt: Packet, ctx: &mut Ctx) {
        let limit = self.params.queue_packets;
        let s = self.senders.get_mut(&pkt.src).expect("node is not a member of this technology");
        if s.queue.len() >= limit {
            ctx.stats.lose(&pkt, ctx.now(), LossReason::BufferOverflow);
            return;
        }
        s.queue.push_back(pkt);
        match s.reservation {
            None => self.select(pkt.src, ctx),
            Some(mut r) if !s.armed => {
                // Forced reservation: arm its first occurrence after now.
                let period = self.params.period_subframes as u64;
                let first = ctx.now().as_nanos() / self.params.subframe_ns() + 1;
                if r.next < first {
                    r.next += (first - r.next).div_ceil(period) * period;
                }
                s.reservation = Some(r);
                s.armed = true;
                self.schedule_occasion(pkt.src, r.next, ctx);
            }
            Some(_) => {}
        }
    }

    /// Make a reservation in the window after the current subframe.
    fn select(&mut self, n: NodeIx, ctx: &mut Ctx) {
        let sf = self.params.subframe_ns();
        let current = ctx.now().as_nanos() / sf;
        let first = current + 1;
        let w = self.params.window_subframes as u64;
        let sc = self.params.subchannels;
        let period = self.params.period_subframes as u64;

        let mut candidates: Vec<(u64, u32)> = Vec::with_capacity((w as usize) * sc as usize);
        for k in first..first + w {
            for c in 0..sc {
                candidates.push((k, c));
            }
        }
        if self.params.sensing {
            let mut taken: Vec<(u64, u32)> = Vec::new();
            for (&other, s) in &self.senders {
                if other == n {
                    continue;
                }
                if let Some(r) = s.reservation {
                    let p = ctx.medium.rx_power(other, n, self.radio.carrier_hz, self.radio.tx_power_dbm);
                    if p >= self.params.sensing_threshold_dbm {
                        taken.push((r.next % period, r.subchannel));
                    }
                }
            }
            let kept: Vec<(u64, u32)> = candidates
                .iter()
                .copied()
                .filter(|&(k, c)| !taken.contains(&(k % period, c)))
                .collect();
            if kept.len() as f64 >= self.params.min_candidate_fraction * candidates.len() as f64 && !kept.is_empty() {
                candidates = kept;
            }
        }

        let s = self.senders.get_mut(&n).expect("member");
        s.selections += 1;
        let mut rng = keyed_stream(ctx.seed, &[TAG_SELECT, n as u64, s.selections]);
        let (k, c) = candidates[rng.random_range(0..candidates.len())];
        let key = s.selections;
        let counter = self.draw_counter(n, key, ctx.seed);
        let s = self.senders.get_mut(&n).expect("member");
        s.reservation = Some(Reservation {
            next: k,
            subchannel: c,
            counter,
        });
        s.armed = true;
        self.schedule_occasion(n, k, ctx);
    }

    pub fn handle(&mut self, ev: Ev, ctx: &mut Ctx) {
        match ev {
            Ev::Occasion { node, subframe } => self.occasion(node, subframe, ctx),
            Ev::Resolve { subframe } => self.resolve(subframe, ctx),
        }
    }

    fn occasion(&mut self, n: NodeIx, subframe: u64, ctx: &mut Ctx) {
        let period = self.params.period_subframes as u64;
        let s = self.senders.get_mut(&n).expect("member");
        let Some(mut r) = s.reservation else {
            return;
        };
        if r.next != subframe {
            // Stale occasion of a replaced reservation.
            return;
        }
        let Some(pkt) = s.queue.pop_front() else {
            // Unused occurrence: keep the reservation without counting it.
            r.next += period;
            s.reservation = Some(r);
            self.schedule_occasion(n, r.next, ctx);
            return;
        };
        let end = self.subframe_start(subframe + 1);
        let list = self.subframes.entry(subframe).or_default();
        if list.is_empty() {
            ctx.sched.at(
                end,
                NetEvent::Sps {
                    tech: self.tech,
                    ev: Ev::Resolve { subframe },
                },
            );
        }
        list.push(SlotTx {
            subchannel: r.subchannel,
            pkt,
        });

        r.counter -= 1;
        let s = self.senders.get_mut(&n).expect("member");
        if r.counter == 0 {
            s.expiries += 1;
            let mut rng = keyed_stream(ctx.seed, &[TAG_KEEP, n as u64, s.expiries]);
            if rng.random::<f64>() < self.params.reselect_probability {
                s.reservation = None;
                s.armed = false;
                if !s.queue.is_empty() {
                    self.select(n, ctx);
                }
                return;
            }
            let key = s.expiries | (1 << 63);
            r.counter = self.draw_counter(n, key, ctx.seed);
        }
        r.next += period;
        self.senders.get_mut(&n).expect("member").reservation = Some(r);
        self.schedule_occasion(n, r.next, ctx);
    }

    fn resolve(&mut self, subframe: u64, ctx: &mut Ctx) {
        let now = ctx.now();
        let txs = self.subframes.remove(&subframe).unwrap_or_default();
        let f = self.radio.carrier_hz;
        let p = self.radio.tx_power_dbm;
        let noise = self.noise_dbm();
        let thr = self.radio.sinr_threshold_db;
        for (i, t) in txs.iter().enumerate() {
            let dst = t.pkt.dst;
            if txs.iter().any(|o| o.pkt.src == dst) {
                ctx.stats.lose(&t.pkt, now, LossReason::HalfDuplex);
                continue;
            }
            let signal = ctx.medium.rx_power(t.pkt.src, dst, f, p);
            let mut interference = 0.0;
            for (j, o) in txs.iter().enumerate() {
                if j != i && o.subchannel == t.subchannel {
                    interference += db_to_linear(ctx.medium.rx_power(o.pkt.src, dst, f, p));
                }
            }
            if sinr_db(signal, noise, interference) >= thr {
                ctx.stats.deliver(&t.pkt, now);
            } else if interference > 0.0 && sinr_db(signal, noise, 0.0) >= thr {
                ctx.stats.lose(&t.pkt, now, LossReason::Collision);
            } else {
                ctx.stats.lose(&t.pkt, now, LossReason::Sinr);
            }
        }
    }
}
