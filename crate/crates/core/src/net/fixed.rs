//! Stand-alone driver for networks of stationary nodes.

use alloc::vec::Vec;

use super::{FlowSpec, Medium, NetEvent, NetNode, NetScheduler, NetState, Packet};
use crate::channel::Channel;
use crate::sched::Scheduler;
use crate::time::SimTime;
use crate::world::World;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ev {
    Generate { flow: u32, k: u64 },
    Net(NetEvent),
}

struct Adapter<'a>(&'a mut Scheduler<Ev>);

impl NetScheduler for Adapter<'_> {
    fn now(&self) -> SimTime {
        self.0.now()
    }

    fn at(&mut self, t: SimTime, ev: NetEvent) {
        self.0.schedule_at(t, Ev::Net(ev));
    }
}

/// Runs flows over fixed node positions without any mobility.
pub struct StaticNet<'w> {
    pub world: &'w World,
    pub channel: Channel,
    pub nodes: Vec<NetNode>,
    pub net: NetState,
    pub flows: Vec<FlowSpec>,
    pub seed: u64,
    sched: Scheduler<Ev>,
    started: bool,
}

impl<'w> StaticNet<'w> {
    pub fn new(world: &'w World, channel: Channel, nodes: Vec<NetNode>, seed: u64) -> Self {
        StaticNet {
            world,
            channel,
            nodes,
            net: NetState::default(),
            flows: Vec::new(),
            seed,
            sched: Scheduler::new(),
            started: false,
        }
    }

    pub fn now(&self) -> SimTime {
        self.sched.now()
    }

    /// Generate traffic until `until` (inclusive) and process all events up
    /// to `until + drain`.
    pub fn run(&mut self, until: SimTime, drain: SimTime) {
        if !self.started {
            self.started = true;
            for (i, f) in self.flows.iter().enumerate() {
                self.sched.schedule_at(f.packet_time(0), Ev::Generate { flow: i as u32, k: 0 });
            }
        }
        let horizon = until + drain;
        while let Some((t, ev)) = self.sched.pop_until(horizon) {
            match ev {
                Ev::Generate { flow, k } => {
                    if t > until {
                        continue;
                    }
                    let f = &self.flows[flow as usize];
                    let pkt = Packet {
                        id: self.net.stats.next_id(),
                        flow,
                        size: f.size,
                        created: t,
                        src: f.src,
                        dst: f.dst,
                    };
                    let tech = f.tech as usize;
                    let next = f.packet_time(k + 1);
                    self.sched.schedule_at(next, Ev::Generate { flow, k: k + 1 });
                    let medium = Medium {
                        world: self.world,
                        channel: &mut self.channel,
                        nodes: &self.nodes,
                    };
                    self.net.send(tech, pkt, &mut Adapter(&mut self.sched), medium, self.seed);
                }
                Ev::Net(ev) => {
                    let medium = Medium {
                        world: self.world,
                        channel: &mut self.channel,
                        nodes: &self.nodes,
                    };
                    self.net.handle(ev, &mut Adapter(&mut self.sched), medium, self.seed);
                }
            }
        }
    }
}
