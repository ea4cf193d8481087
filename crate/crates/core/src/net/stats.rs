//! Per-packet bookkeeping and per-flow summaries.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::Packet;
use crate::math::percentile_sorted;
use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossReason {
    /// SINR below threshold without a concurrent transmission to blame.
    Sinr,
    /// Overlap with another transmission on the same resource.
    Collision,
    /// Receiver was itself transmitting.
    HalfDuplex,
    BufferOverflow,
    /// Still in flight when the run ended.
    Unresolved,
}

impl LossReason {
    pub fn label(self) -> &'static str {
        match self {
            LossReason::Sinr => "sinr",
            LossReason::Collision => "collision",
            LossReason::HalfDuplex => "half_duplex",
            LossReason::BufferOverflow => "buffer_overflow",
            LossReason::Unresolved => "unresolved",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pending,
    Delivered(SimTime),
    Lost(SimTime, LossReason),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketRecord {
    pub packet: Packet,
    pub outcome: Outcome,
}

impl PacketRecord {
    pub fn delay(&self) -> Option<SimTime> {
        match self.outcome {
            Outcome::Delivered(t) => Some(t - self.packet.created),
            _ => None,
        }
    }
}

/// Delivered data rate of one flow in one window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSample {
    pub flow: u32,
    pub window_start: SimTime,
    pub bits_per_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSummary {
    pub flow: u32,
    pub sent: u64,
    pub delivered: u64,
    pub lost: u64,
    /// Absent when nothing was sent.
    pub pdr: Option<f64>,
    pub delay_mean_s: Option<f64>,
    pub delay_median_s: Option<f64>,
    pub delay_p95_s: Option<f64>,
    /// Delivered bits over the measurement span, bit/s.
    pub mean_rate_bps: f64,
}

/// Packet records indexed by packet id.
#[derive(Debug, Clone, Default)]
pub struct NetStats {
    pub records: Vec<PacketRecord>,
}

impl NetStats {
    pub fn created(&mut self, p: Packet) {
        debug_assert_eq!(p.id as usize, self.records.len());
        self.records.push(PacketRecord {
            packet: p,
            outcome: Outcome::Pending,
        });
    }

    pub fn next_id(&self) -> u64 {
        self.records.len() as u64
    }

    fn resolve(&mut self, id: u64, outcome: Outcome) {
        let r = &mut self.records[id as usize];
        debug_assert_eq!(r.outcome, Outcome::Pending, "packet {} resolved twice", id);
        r.outcome = outcome;
    }

    pub fn deliver(&mut self, p: &Packet, at: SimTime) {
        self.resolve(p.id, Outcome::Delivered(at));
    }

    pub fn lose(&mut self, p: &Packet, at: SimTime, reason: LossReason) {
        self.resolve(p.id, Outcome::Lost(at, reason));
    }

    /// Marks every packet still in flight as lost at `at`.
    pub fn close(&mut self, at: SimTime) {
        for r in &mut self.records {
            if r.outcome == Outcome::Pending {
                r.outcome = Outcome::Lost(at, LossReason::Unresolved);
            }
        }
    }

    /// Summary of every flow in `0..flows`. `span` is the offered-traffic
    /// duration used for mean rates.
    pub fn summaries(&self, flows: u32, span: SimTime) -> Vec<FlowSummary> {
        let mut delays: Vec<Vec<f64>> = (0..flows).map(|_| Vec::new()).collect();
        let mut sent = alloc::vec![0u64; flows as usize];
        let mut lost = alloc::vec![0u64; flows as usize];
        let mut bytes = alloc::vec![0u64; flows as usize];
        for r in &self.records {
            let f = r.packet.flow as usize;
            sent[f] += 1;
            match r.outcome {
                Outcome::Delivered(t) => {
                    delays[f].push((t - r.packet.created).as_secs_f64());
                    bytes[f] += r.packet.size as u64;
                }
                _ => lost[f] += 1,
            }
        }
        let span_s = span.as_secs_f64();
        (0..flows as usize)
            .map(|f| {
                let d = &mut delays[f];
                d.sort_by(f64::total_cmp);
                let n = d.len();
                let (mean, median, p95) = if n == 0 {
                    (None, None, None)
                } else {
                    let mean = d.iter().sum::<f64>() / n as f64;
                    (Some(mean), Some(percentile_sorted(d, 0.5)), Some(percentile_sorted(d, 0.95)))
                };
                FlowSummary {
                    flow: f as u32,
                    sent: sent[f],
                    delivered: n as u64,
                    lost: lost[f],
                    pdr: (sent[f] > 0).then(|| n as f64 / sent[f] as f64),
                    delay_mean_s: mean,
                    delay_median_s: median,
                    delay_p95_s: p95,
                    mean_rate_bps: if span_s > 0.0 { bytes[f] as f64 * 8.0 / span_s } else { 0.0 },
                }
            })
            .collect()
    }

    /// Delivered rate per flow in consecutive windows covering `[0, end)`,
    /// attributed by delivery time.
    pub fn rate_series(&self, flows: u32, window: SimTime, end: SimTime) -> Vec<RateSample> {
        let w = window.as_nanos().max(1);
        let count = end.as_nanos().div_ceil(w) as usize;
        let mut bits = alloc::vec![0u64; flows as usize * count];
        for r in &self.records {
            if let Outcome::Delivered(t) = r.outcome {
                let k = (t.as_nanos() / w) as usize;
                if k < count {
                    bits[r.packet.flow as usize * count + k] += 8 * r.packet.size as u64;
                }
            }
        }
        let secs = window.as_secs_f64();
        let mut out = Vec::with_capacity(bits.len());
        for k in 0..count {
            for f in 0..flows as usize {
                out.push(RateSample {
                    flow: f as u32,
                    window_start: SimTime::from_nanos(k as u64 * w),
                    bits_per_s: bits[f * count + k] as f64 / secs,
                });
            }
        }
        out
    }
}
