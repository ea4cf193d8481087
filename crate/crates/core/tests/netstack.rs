use hybridsim_core::beam::ArrayMount;
use hybridsim_core::channel::{Channel, ChannelParams};
use hybridsim_core::net::cellular::{Cellular, CellularParams};
use hybridsim_core::net::csma::{Csma, CsmaParams};
use hybridsim_core::net::fixed::StaticNet;
use hybridsim_core::net::mmwave::{MmWave, MmWaveParams};
use hybridsim_core::net::sps::{Reservation, Sps, SpsParams};
use hybridsim_core::net::{FlowKind, FlowSpec, LossReason, Mac, NetNode, NodeKind, Outcome, RadioParams};
use hybridsim_core::world::WorldBuilder;
use hybridsim_core::{SimTime, Vec3, World};
use proptest::prelude::*;

fn node(name: &str, kind: NodeKind, x: f64, y: f64, z: f64) -> NetNode {
    NetNode {
        name: name.into(),
        kind,
        position: Vec3::new(x, y, z),
        mount: if z > 10.0 { ArrayMount::DOWN } else { ArrayMount::UP },
    }
}

fn quiet_channel() -> ChannelParams {
    ChannelParams {
        shadowing_sigma_los_db: 0.0,
        shadowing_sigma_nlos_db: 0.0,
        ..ChannelParams::default()
    }
}

fn radio(carrier_hz: f64, bandwidth_hz: f64) -> RadioParams {
    RadioParams {
        carrier_hz,
        bandwidth_hz,
        tx_power_dbm: 23.0,
        sinr_threshold_db: 5.0,
        noise_figure_db: 7.0,
    }
}

fn cam(src: u32, dst: u32, tech: u32) -> FlowSpec {
    FlowSpec {
        kind: FlowKind::Cam { interval_s: 0.1 },
        size: 190,
        src,
        dst,
        tech,
        start: SimTime::ZERO,
    }
}

fn cbr(src: u32, dst: u32, tech: u32, rate: f64) -> FlowSpec {
    FlowSpec {
        kind: FlowKind::Cbr { rate_bps: rate },
        size: 1400,
        src,
        dst,
        tech,
        start: SimTime::ZERO,
    }
}

fn empty_world() -> World {
    WorldBuilder::new().build()
}

fn delays(net: &StaticNet, flow: u32) -> Vec<f64> {
    net.net
        .stats
        .records
        .iter()
        .filter(|r| r.packet.flow == flow)
        .filter_map(|r| r.delay().map(|d| d.as_secs_f64()))
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[test]
fn uncontended_csma_delay_is_difs_plus_frame() {
    let w = empty_world();
    let nodes = vec![node("a", NodeKind::Car, 0.0, 0.0, 1.5), node("b", NodeKind::Car, 50.0, 0.0, 1.5)];
    let mut net = StaticNet::new(&w, Channel::new(quiet_channel(), 1), nodes, 1);
    let params = CsmaParams::default();
    let expected = SimTime::from_secs_f64(params.difs_s) + params.frame_time(190);
    net.net.macs.push(Mac::Csma(Csma::new(0, radio(5.9e9, 10e6), params, &[0, 1])));
    net.flows.push(cam(0, 1, 0));
    net.run(SimTime::from_secs(10), SimTime::from_secs(1));
    let recs = &net.net.stats.records;
    assert_eq!(recs.len(), 100);
    for r in recs {
        assert_eq!(r.delay(), Some(expected));
    }
}

#[test]
fn forced_shared_sps_slot_loses_until_reselection() {
    let w = empty_world();
    let nodes = vec![
        node("s1", NodeKind::Car, 0.0, 0.0, 1.5),
        node("s2", NodeKind::Car, 0.0, 2.0, 1.5),
        node("r1", NodeKind::Car, 10.0, 0.0, 1.5),
        node("r2", NodeKind::Car, 10.0, 2.0, 1.5),
    ];
    let mut net = StaticNet::new(&w, Channel::new(quiet_channel(), 1), nodes, 3);
    let mut sps = Sps::new(0, radio(5.9e9, 20e6), SpsParams::default(), &[0, 1, 2, 3]);
    let shared = Reservation {
        next: 105,
        subchannel: 2,
        counter: 1000,
    };
    sps.force_reservation(0, shared);
    sps.force_reservation(1, shared);
    net.net.macs.push(Mac::Sps(sps));
    net.flows.push(cam(0, 2, 0));
    net.flows.push(cam(1, 3, 0));
    net.run(SimTime::from_secs(20), SimTime::from_secs(1));
    let recs = &net.net.stats.records;
    assert!(recs
        .iter()
        .all(|r| matches!(r.outcome, Outcome::Lost(_, LossReason::Collision))));

    // With short counters the senders reselect and the losses stop.
    let nodes = net.nodes.clone();
    let mut net = StaticNet::new(&w, Channel::new(quiet_channel(), 1), nodes, 3);
    let mut sps = Sps::new(0, radio(5.9e9, 20e6), SpsParams::default(), &[0, 1, 2, 3]);
    let shared = Reservation { counter: 5, ..shared };
    sps.force_reservation(0, shared);
    sps.force_reservation(1, shared);
    net.net.macs.push(Mac::Sps(sps));
    net.flows.push(cam(0, 2, 0));
    net.flows.push(cam(1, 3, 0));
    net.run(SimTime::from_secs(300), SimTime::from_secs(1));
    let by_period = |flow: u32| -> Vec<bool> {
        net.net
            .stats
            .records
            .iter()
            .filter(|r| r.packet.flow == flow)
            .map(|r| matches!(r.outcome, Outcome::Delivered(_)))
            .collect()
    };
    let (a, b) = (by_period(0), by_period(1));
    assert!(!a[0] && !b[0]);
    // Both flows see exactly the same collision periods.
    assert_eq!(a, b);
    assert!(a.iter().filter(|&&d| d).count() > a.len() / 2);
}

#[test]
fn csma_is_faster_than_cellular() {
    let w = empty_world();
    let nodes = vec![
        node("uav", NodeKind::Uav, 0.0, 0.0, 30.0),
        node("car", NodeKind::Car, 20.0, 0.0, 1.5),
        node("enb", NodeKind::BaseStation, 300.0, 0.0, 30.0),
    ];
    let mut net = StaticNet::new(&w, Channel::new(ChannelParams::default(), 1), nodes, 5);
    net.net
        .macs
        .push(Mac::Cellular(Cellular::new(0, radio(2.1e9, 20e6), CellularParams::default(), vec![2])));
    net.net
        .macs
        .push(Mac::Csma(Csma::new(1, radio(5.9e9, 10e6), CsmaParams::default(), &[0, 1])));
    net.flows.push(cam(0, 1, 0));
    net.flows.push(cam(0, 1, 1));
    net.run(SimTime::from_secs(60), SimTime::from_secs(1));
    let cell = delays(&net, 0);
    let csma = delays(&net, 1);
    assert_eq!(cell.len(), 600);
    assert_eq!(csma.len(), 600);
    assert!(mean(&csma) < mean(&cell));
    // Grant delay dominates the cellular path.
    assert!(cell.iter().all(|&d| d >= 0.004));
}

#[test]
fn cellular_buffer_saturates_above_capacity() {
    let w = empty_world();
    let nodes = vec![node("bs", NodeKind::BaseStation, 0.0, 0.0, 30.0), node("car", NodeKind::Car, 0.0, 5.0, 1.5)];
    let run = |rate: f64| {
        let mut net = StaticNet::new(&w, Channel::new(quiet_channel(), 1), nodes.clone(), 5);
        net.net
            .macs
            .push(Mac::Cellular(Cellular::new(0, radio(2.1e9, 20e6), CellularParams::default(), vec![0])));
        net.flows.push(cbr(0, 1, 0, rate));
        net.run(SimTime::from_secs(5), SimTime::from_secs(1));
        let s = net.net.stats.summaries(1, SimTime::from_secs(5)).remove(0);
        (s.pdr.unwrap(), s.mean_rate_bps, s.delay_mean_s.unwrap())
    };
    let (pdr_low, rate_low, delay_low) = run(20e6);
    assert!(pdr_low > 0.999);
    assert!((rate_low / 20e6 - 1.0).abs() < 0.01);
    let (pdr_hi, rate_hi, delay_hi) = run(150e6);
    let (_, rate_mid, _) = run(100e6);
    assert!(pdr_hi < 0.6);
    assert!((rate_hi / 77e6 - 1.0).abs() < 0.02, "{}", rate_hi);
    assert!(rate_hi <= rate_mid);
    assert!(delay_hi > 5.0 * delay_low);
}

#[test]
fn mmwave_tracks_offered_load() {
    let w = empty_world();
    let nodes = vec![node("bs", NodeKind::BaseStation, 0.0, 0.0, 30.0), node("car", NodeKind::Car, 5.0, 3.0, 1.5)];
    for rate in [10e6, 150e6] {
        let mut net = StaticNet::new(&w, Channel::new(quiet_channel(), 1), nodes.clone(), 5);
        net.net
            .macs
            .push(Mac::MmWave(MmWave::new(0, radio(28e9, 400e6), MmWaveParams::default())));
        net.flows.push(cbr(0, 1, 0, rate));
        net.run(SimTime::from_secs(2), SimTime::from_secs(1));
        let s = net.net.stats.summaries(1, SimTime::from_secs(2)).remove(0);
        assert_eq!(s.pdr, Some(1.0));
        assert!((s.mean_rate_bps / rate - 1.0).abs() < 0.01);
        assert!(s.delay_mean_s.unwrap() < 0.001);
    }
}

/// Stationary collision probability of the two-sender chain, by power
/// iteration over (counter 1, counter 2, same resource).
fn sps_chain_collision(p: &SpsParams) -> f64 {
    let cmax = p.counter_max as usize;
    let r = p.resources() as f64;
    let idx = |c1: usize, c2: usize, s: usize| ((c1 - 1) * cmax + (c2 - 1)) * 2 + s;
    let n = cmax * cmax * 2;
    let counters: Vec<usize> = (p.counter_min as usize..=cmax).collect();
    let pc = 1.0 / counters.len() as f64;
    // Per-sender transition of one period: (next counter, reselected, prob).
    let step = |c: usize| -> Vec<(usize, bool, f64)> {
        if c > 1 {
            return vec![(c - 1, false, 1.0)];
        }
        let mut out = Vec::new();
        for &k in &counters {
            out.push((k, true, p.reselect_probability * pc));
            out.push((k, false, (1.0 - p.reselect_probability) * pc));
        }
        out
    };
    let mut pi = vec![0.0; n];
    for &a in &counters {
        for &b in &counters {
            pi[idx(a, b, 1)] = pc * pc / r;
            pi[idx(a, b, 0)] = pc * pc * (1.0 - 1.0 / r);
        }
    }
    for _ in 0..20_000 {
        let mut next = vec![0.0; n];
        for c1 in 1..=cmax {
            for c2 in 1..=cmax {
                for s in 0..2 {
                    let m = pi[idx(c1, c2, s)];
                    if m == 0.0 {
                        continue;
                    }
                    for &(n1, r1, p1) in &step(c1) {
                        for &(n2, r2, p2) in &step(c2) {
                            let q = m * p1 * p2;
                            if r1 || r2 {
                                next[idx(n1, n2, 1)] += q / r;
                                next[idx(n1, n2, 0)] += q * (1.0 - 1.0 / r);
                            } else {
                                next[idx(n1, n2, s)] += q;
                            }
                        }
                    }
                }
            }
        }
        pi = next;
    }
    (1..=cmax)
        .flat_map(|a| (1..=cmax).map(move |b| (a, b)))
        .map(|(a, b)| pi[idx(a, b, 1)])
        .sum()
}

#[test]
fn sps_collision_fraction_matches_chain() {
    let params = SpsParams::default();
    let expected = sps_chain_collision(&params);
    assert!((expected - 0.02).abs() < 1e-9);

    let w = empty_world();
    let nodes = vec![
        node("s1", NodeKind::Car, 0.0, 0.0, 1.5),
        node("s2", NodeKind::Car, 0.0, 2.0, 1.5),
        node("r1", NodeKind::Car, 10.0, 0.0, 1.5),
        node("r2", NodeKind::Car, 10.0, 2.0, 1.5),
    ];
    let mut lost = 0u64;
    let mut sent = 0u64;
    for seed in 0..8 {
        let mut net = StaticNet::new(&w, Channel::new(quiet_channel(), 1), nodes.clone(), seed);
        net.net
            .macs
            .push(Mac::Sps(Sps::new(0, radio(5.9e9, 20e6), params.clone(), &[0, 1, 2, 3])));
        net.flows.push(cam(0, 2, 0));
        net.flows.push(cam(1, 3, 0));
        net.run(SimTime::from_secs(10_000), SimTime::from_secs(1));
        for r in &net.net.stats.records {
            sent += 1;
            if !matches!(r.outcome, Outcome::Delivered(_)) {
                lost += 1;
            }
        }
    }
    let frac = lost as f64 / sent as f64;
    assert!((frac / expected - 1.0).abs() < 0.2, "measured {frac}, chain {expected}");
}

#[test]
fn conservation_for_every_kind() {
    let w = empty_world();
    let nodes = vec![
        node("uav", NodeKind::Uav, 0.0, 0.0, 30.0),
        node("car", NodeKind::Car, 40.0, 0.0, 1.5),
        node("car2", NodeKind::Car, 45.0, 10.0, 1.5),
        node("enb", NodeKind::BaseStation, 500.0, 0.0, 30.0),
    ];
    let mut net = StaticNet::new(&w, Channel::new(ChannelParams::default(), 1), nodes, 9);
    net.net
        .macs
        .push(Mac::Cellular(Cellular::new(0, radio(2.1e9, 20e6), CellularParams::default(), vec![3])));
    net.net
        .macs
        .push(Mac::Csma(Csma::new(1, radio(5.9e9, 10e6), CsmaParams::default(), &[0, 1, 2])));
    net.net
        .macs
        .push(Mac::Sps(Sps::new(2, radio(5.9e9, 20e6), SpsParams::default(), &[0, 1, 2])));
    net.net
        .macs
        .push(Mac::MmWave(MmWave::new(3, radio(28e9, 400e6), MmWaveParams::default())));
    for tech in 0..4 {
        net.flows.push(cam(0, 1, tech));
        net.flows.push(cam(2, 1, tech));
    }
    net.flows.push(cbr(3, 1, 0, 200e6));
    net.run(SimTime::from_secs(5), SimTime::ZERO);
    net.net.stats.close(net.now());
    for s in net.net.stats.summaries(net.flows.len() as u32, SimTime::from_secs(5)) {
        assert_eq!(s.sent, s.delivered + s.lost);
        assert!(s.pdr.unwrap() <= 1.0);
    }
    for r in &net.net.stats.records {
        if let Some(d) = r.delay() {
            assert!(d > SimTime::ZERO);
        }
    }
}

fn delivered_set(beta: f64, nodes: &[NetNode], seed: u64) -> Vec<bool> {
    let mut b = WorldBuilder::new();
    b.add_building(
        1,
        vec![
            Vec3::new(20.0, -20.0, 0.0),
            Vec3::new(60.0, -20.0, 0.0),
            Vec3::new(60.0, 20.0, 0.0),
            Vec3::new(20.0, 20.0, 0.0),
        ],
        15.0,
    );
    let w = b.build();
    let ch = ChannelParams {
        obstruction_db_per_m: beta,
        ..ChannelParams::default()
    };
    let mut net = StaticNet::new(&w, Channel::new(ch, 4), nodes.to_vec(), seed);
    net.net
        .macs
        .push(Mac::Cellular(Cellular::new(0, radio(2.1e9, 20e6), CellularParams::default(), vec![0])));
    net.net
        .macs
        .push(Mac::Csma(Csma::new(1, radio(5.9e9, 10e6), CsmaParams::default(), &[1, 2])));
    net.net
        .macs
        .push(Mac::MmWave(MmWave::new(2, radio(28e9, 400e6), MmWaveParams::default())));
    net.flows.push(cam(1, 2, 0));
    net.flows.push(cam(1, 2, 1));
    net.flows.push(cam(0, 2, 2));
    net.run(SimTime::from_secs(3), SimTime::from_secs(1));
    net.net
        .stats
        .records
        .iter()
        .map(|r| matches!(r.outcome, Outcome::Delivered(_)))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn less_path_loss_never_loses_a_delivery(
        x in 0.0f64..300.0, y in -50.0f64..50.0, beta in 0.2f64..3.0, seed in 0u64..1000,
    ) {
        let nodes = vec![
            node("bs", NodeKind::BaseStation, 0.0, 0.0, 25.0),
            node("tx", NodeKind::Car, -10.0, 0.0, 1.5),
            node("rx", NodeKind::Car, x, y, 1.5),
        ];
        let worse = delivered_set(beta, &nodes, seed);
        let better = delivered_set(beta * 0.5, &nodes, seed);
        prop_assert_eq!(worse.len(), better.len());
        for (w, b) in worse.iter().zip(&better) {
            prop_assert!(!w || *b);
        }
    }
}
