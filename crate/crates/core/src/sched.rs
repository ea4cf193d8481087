//! Deterministic discrete-event scheduler.
//!
//! Events are ordered by `(fire_time, sequence_id)`; the sequence id is the
//! insertion counter, so simultaneous events fire in the order they were
//! scheduled. Cancellation marks a tombstone that is discarded when the event
//! reaches the head of the queue.

use alloc::collections::{BTreeSet, BinaryHeap};
use core::cmp::Ordering;
use core::fmt;
use core::time::Duration;

use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventHandle {
    fire_time: SimTime,
    seq: u64,
}

impl EventHandle {
    pub fn fire_time(&self) -> SimTime {
        self.fire_time
    }

    pub fn sequence_id(&self) -> u64 {
        self.seq
    }
}

struct Entry<E> {
    fire_time: SimTime,
    seq: u64,
    payload: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        self.seq == other.seq
    }
}

impl<E> Eq for Entry<E> {}

impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Entry<E> {
    // BinaryHeap is a max-heap; invert so the earliest (time, seq) is on top.
    fn cmp(&self, other: &Self) -> Ordering {
        (other.fire_time, other.seq).cmp(&(self.fire_time, self.seq))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunReport {
    pub events: u64,
    pub end_time: SimTime,
    /// Filled in by callers that have a wall clock; the core has none.
    pub wall: Option<Duration>,
}

/// A handler failure, tagged with the simulation time it happened at.
#[derive(Debug, Clone, PartialEq)]
pub struct RunError<Err> {
    pub at: SimTime,
    pub error: Err,
}

impl<Err: fmt::Display> fmt::Display for RunError<Err> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "handler failed at t={}: {}", self.at, self.error)
    }
}

pub struct Scheduler<E> {
    now: SimTime,
    next_seq: u64,
    heap: BinaryHeap<Entry<E>>,
    cancelled: BTreeSet<u64>,
    fired: u64,
}

impl<E> Default for Scheduler<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> Scheduler<E> {
    pub fn new() -> Self {
        Scheduler {
            now: SimTime::ZERO,
            next_seq: 0,
            heap: BinaryHeap::new(),
            cancelled: BTreeSet::new(),
            fired: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Total events fired over the scheduler's lifetime.
    pub fn fired(&self) -> u64 {
        self.fired
    }

    /// Number of queued events, including cancelled ones not yet discarded.
    pub fn queued(&self) -> usize {
        self.heap.len()
    }

    pub fn schedule(&mut self, delay: SimTime, payload: E) -> EventHandle {
        let at = self.now + delay;
        self.push(at, payload)
    }

    /// Schedule at an absolute time; times in the past are clamped to now.
    pub fn schedule_at(&mut self, at: SimTime, payload: E) -> EventHandle {
        let at = at.max(self.now);
        self.push(at, payload)
    }

    fn push(&mut self, fire_time: SimTime, payload: E) -> EventHandle {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Entry {
            fire_time,
            seq,
            payload,
        });
        EventHandle { fire_time, seq }
    }

    /// Returns true iff the event was still pending. Cancelling an event that
    /// already fired, or cancelling twice, returns false.
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        if self.cancelled.contains(&handle.seq) {
            return false;
        }
        if handle.fire_time < self.now {
            return false;
        }
        let queued = self.heap.iter().any(|e| e.seq == handle.seq);
        if queued {
            self.cancelled.insert(handle.seq);
        }
        queued
    }

    /// Pop the next live event with `fire_time <= until`, advancing the clock.
    pub fn pop_until(&mut self, until: SimTime) -> Option<(SimTime, E)> {
        loop {
            let head = self.heap.peek()?;
            if head.fire_time > until {
                return None;
            }
            let entry = self.heap.pop().expect("peeked");
            if self.cancelled.remove(&entry.seq) {
                continue;
            }
            debug_assert!(entry.fire_time >= self.now);
            self.now = entry.fire_time;
            self.fired += 1;
            return Some((entry.fire_time, entry.payload));
        }
    }

    /// Process events in order until the queue is empty or the next event lies
    /// beyond `until`. The clock is left at `until` when the horizon is finite.
    pub fn run<Err, F>(&mut self, until: SimTime, mut handler: F) -> Result<RunReport, RunError<Err>>
    where
        F: FnMut(&mut Scheduler<E>, SimTime, E) -> Result<(), Err>,
    {
        let start = self.fired;
        while let Some((t, payload)) = self.pop_until(until) {
            handler(self, t, payload).map_err(|error| RunError { at: t, error })?;
        }
        if until != SimTime::MAX && self.now < until {
            self.now = until;
        }
        Ok(RunReport {
            events: self.fired - start,
            end_time: self.now,
            wall: None,
        })
    }
}
