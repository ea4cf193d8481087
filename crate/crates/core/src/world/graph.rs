use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use super::{NodeId, RouteLeg, World, WorldError};

#[derive(PartialEq)]
struct Frontier {
    cost: f64,
    node: NodeId,
}

impl Eq for Frontier {}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.node.cmp(&self.node))
    }
}

/// Minimum travel time route (edge weight = length / speed limit).
///
/// `Ok(Some(vec![]))` when `from == to`, `Ok(None)` when unreachable.
pub(super) fn shortest_path(world: &World, from: NodeId, to: NodeId) -> Result<Option<Vec<RouteLeg>>, WorldError> {
    world.check_node(from)?;
    world.check_node(to)?;
    if from == to {
        return Ok(Some(Vec::new()));
    }
    let n = world.nodes().len();
    let mut dist = vec![f64::INFINITY; n];
    let mut via: Vec<Option<(NodeId, RouteLeg)>> = vec![None; n];
    let mut heap = BinaryHeap::new();
    dist[from.0 as usize] = 0.0;
    heap.push(Frontier { cost: 0.0, node: from });
    while let Some(Frontier { cost, node }) = heap.pop() {
        if cost > dist[node.0 as usize] {
            continue;
        }
        if node == to {
            break;
        }
        for &sid in &world.node(node).segments {
            let seg = world.segment(sid);
            for forward in [true, false] {
                if seg.start_node(forward) != node {
                    continue;
                }
                let next = seg.end_node(forward);
                let c = cost + seg.travel_time();
                if c < dist[next.0 as usize] {
                    dist[next.0 as usize] = c;
                    via[next.0 as usize] = Some((node, RouteLeg { segment: sid, forward }));
                    heap.push(Frontier { cost: c, node: next });
                }
            }
        }
    }
    if !dist[to.0 as usize].is_finite() {
        return Ok(None);
    }
    let mut legs = Vec::new();
    let mut cur = to;
    while cur != from {
        let (prev, leg) = via[cur.0 as usize].expect("reached node has a predecessor");
        legs.push(leg);
        cur = prev;
    }
    legs.reverse();
    Ok(Some(legs))
}
