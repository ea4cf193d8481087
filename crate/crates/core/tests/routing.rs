use hybridsim_core::car::choose_next_leg;
use hybridsim_core::world::{NodeId, RouteLeg, SegmentId, WorldBuilder};
use hybridsim_core::{RandomStream, World};
use proptest::prelude::*;

/// A plus-shaped junction: centre node 0 with four arms.
fn plus() -> World {
    let mut b = WorldBuilder::new();
    let c = b.add_node(0.0, 0.0);
    for (x, y) in [(100.0, 0.0), (0.0, 100.0), (-100.0, 0.0), (0.0, -100.0)] {
        let n = b.add_node(x, y);
        b.add_road(n, c, 13.9);
    }
    b.build()
}

#[test]
fn random_turns_are_uniform() {
    let world = plus();
    // Arriving at the centre along arm 0.
    let arriving = RouteLeg {
        segment: SegmentId(0),
        forward: true,
    };
    let options = world.next_legs(arriving);
    assert_eq!(options.len(), 3);
    let mut counts = [0u32; 3];
    let mut rng = RandomStream::new(5, "turns");
    let n = 30_000;
    for _ in 0..n {
        let next = choose_next_leg(&world, arriving, &mut rng);
        counts[options.iter().position(|&o| o == next).expect("legal choice")] += 1;
    }
    let expected = n as f64 / 3.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // 99.9% quantile of chi-square with 2 degrees of freedom.
    assert!(chi2 < 13.82, "chi2 = {chi2}, counts {counts:?}");
}

#[test]
fn dead_end_turns_back() {
    let world = plus();
    let outward = RouteLeg {
        segment: SegmentId(1),
        forward: false,
    };
    let mut rng = RandomStream::new(1, "x");
    let back = choose_next_leg(&world, outward, &mut rng);
    assert_eq!(back, RouteLeg { segment: SegmentId(1), forward: true });
}

fn random_graph(n: usize, edges: &[(usize, usize, f64)], pos: &[(f64, f64)]) -> World {
    let mut b = WorldBuilder::new();
    let ids: Vec<NodeId> = pos[..n].iter().map(|&(x, y)| b.add_node(x, y)).collect();
    for &(u, v, speed) in edges {
        let (u, v) = (u % n, v % n);
        if u != v && pos[u] != pos[v] {
            b.add_road(ids[u], ids[v], speed);
        }
    }
    b.build()
}

/// All-pairs travel times by Floyd-Warshall.
fn floyd(world: &World) -> Vec<Vec<f64>> {
    let n = world.nodes().len();
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    for s in world.segments() {
        let (u, v) = (s.from.0 as usize, s.to.0 as usize);
        let w = s.travel_time();
        d[u][v] = d[u][v].min(w);
        d[v][u] = d[v][u].min(w);
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dijkstra_matches_floyd_warshall(
        n in 2usize..12,
        pos in proptest::collection::vec((0.0f64..500.0, 0.0f64..500.0), 12),
        edges in proptest::collection::vec((0usize..12, 0usize..12, 5.0f64..30.0), 0..30),
    ) {
        let world = random_graph(n, &edges, &pos);
        let all = floyd(&world);
        for i in 0..n {
            for j in 0..n {
                let path = world.shortest_path(NodeId(i as u32), NodeId(j as u32)).unwrap();
                match path {
                    None => prop_assert!(all[i][j].is_infinite()),
                    Some(legs) => {
                        let cost: f64 = legs.iter().map(|l| world.segment(l.segment).travel_time()).sum();
                        prop_assert!((cost - all[i][j]).abs() <= 1e-9 * all[i][j].max(1.0));
                        // The legs chain from i to j.
                        let mut at = NodeId(i as u32);
                        for l in &legs {
                            let s = world.segment(l.segment);
                            prop_assert_eq!(s.start_node(l.forward), at);
                            at = s.end_node(l.forward);
                        }
                        prop_assert_eq!(at, NodeId(j as u32));
                    }
                }
            }
        }
    }
}
