//! Periodic traffic sources.

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowKind {
    /// One packet per interval, the first one interval after the start.
    Cam { interval_s: f64 },
    /// Constant bit rate, the first packet at the start.
    Cbr { rate_bps: f64 },
}

/// Resolved flow description.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSpec {
    pub kind: FlowKind,
    pub size: u32,
    pub src: u32,
    pub dst: u32,
    pub tech: u32,
    /// Start time including any random phase offset.
    pub start: SimTime,
}

impl FlowSpec {
    /// Nominal spacing between packets, s.
    pub fn gap_s(&self) -> f64 {
        match self.kind {
            FlowKind::Cam { interval_s } => interval_s,
            FlowKind::Cbr { rate_bps } => 8.0 * self.size as f64 / rate_bps,
        }
    }

    /// Creation time of the `k`-th packet (0-based). Computed from `k` rather
    /// than accumulated so the long-run rate carries no rounding drift.
    pub fn packet_time(&self, k: u64) -> SimTime {
        let first = match self.kind {
            FlowKind::Cam { .. } => 1.0,
            FlowKind::Cbr { .. } => 0.0,
        };
        let offset_ns = ((k as f64 + first) * self.gap_s() * 1e9).round() as u64;
        SimTime::from_nanos(self.start.as_nanos() + offset_ns)
    }

    /// Packets created in `[start, end]`.
    pub fn packets_until(&self, end: SimTime) -> u64 {
        if end < self.packet_time(0) {
            return 0;
        }
        let span = (end.as_nanos() - self.start.as_nanos()) as f64 * 1e-9;
        let mut n = (span / self.gap_s()).floor() as u64 + 1;
        if matches!(self.kind, FlowKind::Cam { .. }) {
            n -= 1;
        }
        // Correct for rounding at the boundary.
        while n > 0 && self.packet_time(n - 1) > end {
            n -= 1;
        }
        while self.packet_time(n) <= end {
            n += 1;
        }
        n
    }
}
