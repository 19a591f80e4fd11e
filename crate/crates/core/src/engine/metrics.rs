//! Performance metrics over a completed event trace.

use crate::engine::scenario::Scenario;
use crate::engine::trace::{EventKind, Outcome, TraceEvent};

/// Distance-weighted throughput, energy per delivered packet, and data
/// collision rate, plus the raw counters behind them.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    /// Sum of delivered packets' link distances per second (packet-meters/s).
    pub throughput: f64,
    /// Total network energy over delivered packets; `None` when nothing was
    /// delivered.
    pub energy_per_packet: Option<f64>,
    /// Collided data packets over transmitted data packets.
    pub collision_rate: f64,
    pub sent: u64,
    pub delivered: u64,
    pub collided: u64,
    /// Total energy across all nodes, joules (coordinators included).
    pub total_energy: f64,
}

/// Folds the trace's data transmissions into the headline metrics.
pub fn compute_metrics(
    trace: &[TraceEvent],
    scenario: &Scenario,
    total_energy_j: f64,
    duration_us: u64,
) -> Metrics {
    let mut sent = 0u64;
    let mut delivered = 0u64;
    let mut collided = 0u64;
    let mut meters = 0.0f64;
    for e in trace {
        if e.kind != EventKind::DataTx {
            continue;
        }
        sent += 1;
        match e.outcome {
            Some(Outcome::Delivered) => {
                delivered += 1;
                let peer = e.peer.expect("data transmissions carry the receiver");
                meters +=
                    scenario.positions[e.node.index()].distance(&scenario.positions[peer.index()]);
            }
            Some(Outcome::Collided) => collided += 1,
            _ => {}
        }
    }
    let duration_s = duration_us as f64 * 1e-6;
    Metrics {
        throughput: meters / duration_s,
        energy_per_packet: (delivered > 0).then(|| total_energy_j / delivered as f64),
        collision_rate: if sent > 0 {
            collided as f64 / sent as f64
        } else {
            0.0
        },
        sent,
        delivered,
        collided,
        total_energy: total_energy_j,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::NodeId;
    use crate::geometry::Position;

    fn scenario() -> Scenario {
        use crate::engine::scenario::Link;
        Scenario {
            n: 4,
            arena_width: 120.0,
            arena_height: 120.0,
            d_m: 20.0,
            positions: vec![
                Position::new(0.0, 0.0),
                Position::new(10.0, 0.0),
                Position::new(50.0, 0.0),
                Position::new(70.0, 0.0),
            ],
            links: vec![
                Link {
                    source: NodeId(0),
                    destination: NodeId(1),
                    distance: 10.0,
                },
                Link {
                    source: NodeId(2),
                    destination: NodeId(3),
                    distance: 20.0,
                },
            ],
            seed: 0,
        }
    }

    fn data_tx(node: u32, peer: u32, outcome: Outcome) -> TraceEvent {
        TraceEvent {
            time_us: 0,
            node: NodeId(node),
            kind: EventKind::DataTx,
            slot: Some(7),
            peer: Some(NodeId(peer)),
            outcome: Some(outcome),
        }
    }

    #[test]
    fn weighted_throughput_matches_hand_sum() {
        // Two packets at 10 m and one at 20 m in one second -> 40 pm/s.
        let trace = vec![
            data_tx(0, 1, Outcome::Delivered),
            data_tx(0, 1, Outcome::Delivered),
            data_tx(2, 3, Outcome::Delivered),
        ];
        let m = compute_metrics(&trace, &scenario(), 1.0, 1_000_000);
        assert!((m.throughput - 40.0).abs() < 1e-9);
        assert_eq!(m.collision_rate, 0.0);
        assert_eq!(m.delivered, 3);
        assert_eq!(m.energy_per_packet, Some(1.0 / 3.0));
    }

    #[test]
    fn no_deliveries_flags_energy_undefined() {
        let trace = vec![data_tx(0, 1, Outcome::Collided)];
        let m = compute_metrics(&trace, &scenario(), 5.0, 1_000_000);
        assert_eq!(m.energy_per_packet, None);
        assert_eq!(m.collision_rate, 1.0);
        assert_eq!(m.throughput, 0.0);
    }

    #[test]
    fn hand_built_trace_matches_manual_oracle() {
        // Five events: 3 delivered (10 + 10 + 20 m), 1 collided, 1 lost to a
        // sleeping receiver, over 2 seconds.
        let trace = vec![
            data_tx(0, 1, Outcome::Delivered),
            data_tx(0, 1, Outcome::Collided),
            data_tx(0, 1, Outcome::Delivered),
            data_tx(2, 3, Outcome::Delivered),
            data_tx(2, 3, Outcome::NoReceiver),
        ];
        let m = compute_metrics(&trace, &scenario(), 8.0, 2_000_000);
        assert_eq!(m.sent, 5);
        assert_eq!(m.delivered, 3);
        assert_eq!(m.collided, 1);
        assert!((m.throughput - 40.0 / 2.0).abs() < 1e-9);
        assert!((m.collision_rate - 0.2).abs() < 1e-12);
        assert_eq!(m.energy_per_packet, Some(8.0 / 3.0));
    }
}
