//! Mini-slot CSMA inside the contention slots.
//!
//! Unscheduled sources contend to deliver a transmission request to their
//! cell coordinator: uniform backoff in `[0, W-1]`, counters frozen while
//! any transmitter within carrier-sense range is active, a request of
//! duration `T_r` when the counter expires. A request is delivered when no
//! other transmission within `r_c` of the receiving coordinator overlaps it
//! in time. Each contender fires at most once per frame; a request
//! straddling the end of the contention period counts when its midpoint
//! still lies inside (the same straddle convention as the analytic oracle).

use rand::Rng;

use crate::channel::NodeId;
use crate::geometry::{CellId, Position};
use crate::pmac::{DemandEntry, FrameLayout};

/// One node contending to deliver a request to its cell coordinator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Contender {
    pub node: NodeId,
    pub cell: CellId,
    pub request: DemandEntry,
}

/// What happened during one frame's contention phase.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ContentionOutcome {
    /// Requests that reached their coordinators, in node order.
    pub delivered: Vec<Contender>,
    /// Per-node transmission intervals in µs from the start of the
    /// contention period: (node, start, end).
    pub transmissions: Vec<(NodeId, u64, u64)>,
    /// Requests transmitted but corrupted at the coordinator.
    pub collided: u32,
}

/// Simulates the mini-slot CSMA of one frame's contention phase.
///
/// `positions` covers all nodes including coordinators;
/// `coordinator_node` maps a cell to its coordinator's node id. Carrier
/// sensing is binary within `r_c` of the listening node.
#[allow(clippy::too_many_arguments)]
pub fn contention_access<R: Rng>(
    contenders: &[Contender],
    w: u32,
    layout: &FrameLayout,
    positions: &[Position],
    coordinator_node: &dyn Fn(CellId) -> NodeId,
    r_c: f64,
    t_s_us: u64,
    t_r_us: u64,
    rng: &mut R,
) -> ContentionOutcome {
    assert!(w >= 1);
    let period_us = layout.contention_slots().len() as u64 * layout.slot_us;
    let total_minislots = period_us / t_s_us;
    let t_r_slots = t_r_us.div_ceil(t_s_us);

    let mut backoff: Vec<u32> = contenders.iter().map(|_| rng.random_range(0..w)).collect();
    let mut fired: Vec<bool> = vec![false; contenders.len()];
    // (contender index, start minislot, end minislot)
    let mut txs: Vec<(usize, u64, u64)> = Vec::new();

    for ms in 0..total_minislots {
        // Carrier sensing reflects transmissions begun in earlier
        // mini-slots; two counters expiring together cannot hear each other
        // and collide.
        let idle: Vec<bool> = contenders
            .iter()
            .map(|c| {
                let me = positions[c.node.index()];
                !txs.iter().any(|&(j, s, e)| {
                    s < ms && ms < e && positions[contenders[j].node.index()].distance(&me) <= r_c
                })
            })
            .collect();
        let fires_at = txs.len();
        for i in 0..contenders.len() {
            if fired[i] || !idle[i] || backoff[i] != 0 {
                continue;
            }
            // Fires now if the request's midpoint fits the period.
            if ms + t_r_slots / 2 <= total_minislots {
                txs.push((i, ms, ms + t_r_slots));
            }
            fired[i] = true;
        }
        let new_txs = &txs[fires_at..].to_vec();
        for i in 0..contenders.len() {
            if fired[i] || !idle[i] || backoff[i] == 0 {
                continue;
            }
            // A fire starting this mini-slot consumes it for in-range peers.
            let me = positions[contenders[i].node.index()];
            let consumed = new_txs
                .iter()
                .any(|&(j, _, _)| positions[contenders[j].node.index()].distance(&me) <= r_c);
            if !consumed {
                backoff[i] -= 1;
            }
        }
    }

    let mut outcome = ContentionOutcome::default();
    for &(i, start, end) in &txs {
        let coord = coordinator_node(contenders[i].cell);
        let coord_pos = positions[coord.index()];
        let clean = txs.iter().all(|&(j, s2, e2)| {
            j == i
                || s2 >= end
                || e2 <= start
                || positions[contenders[j].node.index()].distance(&coord_pos) > r_c
        });
        if clean {
            outcome.delivered.push(contenders[i]);
        } else {
            outcome.collided += 1;
        }
        outcome
            .transmissions
            .push((contenders[i].node, start * t_s_us, end * t_s_us));
    }
    outcome.delivered.sort_by_key(|c| c.node);
    outcome
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contention::{expected_successes, ContentionParams};
    use crate::rng::SimRng;

    fn layout() -> FrameLayout {
        FrameLayout::standard() // 2 contention slots = 2 ms
    }

    fn single_cell_world(n: usize) -> (Vec<Position>, Vec<Contender>) {
        // Contenders clustered around a coordinator at the origin-offset
        // position; the coordinator is node id n.
        let mut positions = Vec::new();
        let mut contenders = Vec::new();
        for i in 0..n {
            let angle = i as f64 * 0.7;
            positions.push(Position::new(10.0 * angle.cos(), 10.0 * angle.sin()));
            contenders.push(Contender {
                node: NodeId(i as u32),
                cell: CellId(0),
                request: DemandEntry {
                    source: NodeId(i as u32),
                    destination: NodeId(((i + 1) % n) as u32),
                    pending_packets: 1,
                },
            });
        }
        positions.push(Position::new(0.0, 0.0)); // coordinator
        (positions, contenders)
    }

    #[test]
    fn lone_contender_always_succeeds() {
        let (positions, contenders) = single_cell_world(1);
        let coord = |_: CellId| NodeId(1);
        for seed in 0..50 {
            let mut rng = SimRng::new(seed).stream(0);
            let out = contention_access(
                &contenders,
                32,
                &layout(),
                &positions,
                &coord,
                40.0,
                20,
                240,
                &mut rng,
            );
            assert_eq!(out.delivered.len(), 1);
            assert_eq!(out.collided, 0);
        }
    }

    #[test]
    fn equal_backoffs_in_range_collide() {
        // W = 1 forces identical zero backoffs: both transmit at once and
        // both requests are lost.
        let (positions, contenders) = single_cell_world(2);
        let coord = |_: CellId| NodeId(2);
        let mut rng = SimRng::new(3).stream(0);
        let out = contention_access(
            &contenders,
            1,
            &layout(),
            &positions,
            &coord,
            40.0,
            20,
            240,
            &mut rng,
        );
        assert!(out.delivered.is_empty());
        assert_eq!(out.collided, 2);
    }

    #[test]
    fn empirical_successes_match_analytic_model() {
        // Ten contenders inside one carrier-sense range, 1 ms of contention:
        // the spatial simulation degenerates to the shared-channel process,
        // so the analytic expectation applies.
        let (positions, contenders) = single_cell_world(10);
        let coord = |_: CellId| NodeId(10);
        let one_ms = FrameLayout {
            num_contention: 1,
            ..FrameLayout::standard()
        };
        let mut rng = SimRng::new(2024).stream(7);
        let runs = 10_000;
        let mut total = 0u64;
        for _ in 0..runs {
            let out = contention_access(
                &contenders,
                32,
                &one_ms,
                &positions,
                &coord,
                40.0,
                20,
                240,
                &mut rng,
            );
            total += out.delivered.len() as u64;
        }
        let empirical = total as f64 / runs as f64;
        let analytic = expected_successes(&ContentionParams::new(10, 32, 1000.0)).unwrap();
        let rel = (empirical - analytic).abs() / analytic;
        assert!(
            rel < 0.05,
            "empirical {empirical} vs analytic {analytic} (rel {rel})"
        );
    }

    #[test]
    fn out_of_range_contenders_do_not_interfere() {
        // Two contenders 500 m apart with coordinators next to each of
        // them: both requests always get through, whatever the backoffs.
        let positions = vec![
            Position::new(0.0, 0.0),
            Position::new(500.0, 0.0),
            Position::new(1.0, 0.0),   // coordinator of cell 0
            Position::new(501.0, 0.0), // coordinator of cell 1
        ];
        let contenders = vec![
            Contender {
                node: NodeId(0),
                cell: CellId(0),
                request: DemandEntry {
                    source: NodeId(0),
                    destination: NodeId(1),
                    pending_packets: 2,
                },
            },
            Contender {
                node: NodeId(1),
                cell: CellId(1),
                request: DemandEntry {
                    source: NodeId(1),
                    destination: NodeId(0),
                    pending_packets: 2,
                },
            },
        ];
        let coord = |c: CellId| if c == CellId(0) { NodeId(2) } else { NodeId(3) };
        for seed in 0..20 {
            let mut rng = SimRng::new(seed).stream(1);
            let out = contention_access(
                &contenders,
                8,
                &layout(),
                &positions,
                &coord,
                40.0,
                20,
                240,
                &mut rng,
            );
            assert_eq!(out.delivered.len(), 2, "seed {seed}");
        }
    }
}
