//! Simulation core for hybrid networks of ground vehicles and UAVs.
//!
//! Everything in this crate is pure computation over in-memory state: the
//! event scheduler, the road/building world, car and UAV mobility, the
//! obstacle-aware channel, the planar-array beam model, the abstract radio
//! access models and the scenario engine that ties them together. File
//! formats, the CLI and the batch runner live in the `hybridsim` crate.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
// Whenever std ends up linked (tests, dev-dependency features), its inherent
// float methods make the `num_traits::Float` imports redundant.
#![allow(unused_imports)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod beam;
pub mod car;
pub mod channel;
pub mod engine;
pub mod geo;
pub mod geometry;
pub mod math;
pub mod net;
pub mod predict;
pub mod rng;
pub mod scenario;
pub mod sched;
pub mod time;
pub mod trace;
pub mod uav;
pub mod world;

pub use engine::{RunOutput, SetupError, Simulation};
pub use geo::GeoPoint;
pub use math::Vec3;
pub use rng::RandomStream;
pub use scenario::Scenario;
pub use sched::{EventHandle, Scheduler};
pub use time::SimTime;
pub use world::World;
