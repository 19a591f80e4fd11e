//! Per-frame wake planning for non-coordinator nodes.

use std::collections::BTreeSet;

use crate::channel::NodeId;
use crate::pmac::SchedulingPacket;

/// The set of frame slots (0-based) a node stays awake in, given its cell
/// coordinator's scheduling packet:
///
/// - the own coordinator's scheduling slot, always (that is where this
///   packet was heard);
/// - the scheduling slots of adjacent coordinators within `r_a`, but only
///   when the node is scheduled to transmit this frame (to catch
///   cancellations);
/// - the node's assigned contention-free slots, as transmitter or receiver;
/// - the announced contention slots, when the node wants to initiate a new
///   transmission.
///
/// Every other slot is spent asleep.
pub fn node_wake_plan(
    node: NodeId,
    own_pkt: &SchedulingPacket,
    scheduled_tx: bool,
    wants_new_tx: bool,
    own_sched_slot: usize,
    adjacent_sched_slots: &[usize],
) -> BTreeSet<usize> {
    let mut awake = BTreeSet::new();
    awake.insert(own_sched_slot);
    if scheduled_tx {
        awake.extend(adjacent_sched_slots.iter().copied());
    }
    for r in &own_pkt.reservations {
        if r.frame == own_pkt.frame && (r.source == node || r.destination == node) {
            awake.insert(r.slot);
        }
    }
    if wants_new_tx {
        awake.extend(own_pkt.contention_slots.iter().copied());
    }
    awake
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{CellId, Position};
    use crate::pmac::{Disc, Reservation};

    fn empty_pkt(frame: u64) -> SchedulingPacket {
        SchedulingPacket {
            sender: CellId(0),
            frame,
            slot: 3,
            reservations: vec![],
            cancellations: vec![],
            contention_slots: vec![98, 99],
            contention_window: 32,
            piggyback_slots: vec![],
        }
    }

    fn reservation(frame: u64, slot: usize, source: NodeId, destination: NodeId) -> Reservation {
        Reservation {
            slot,
            frame,
            source,
            destination,
            source_pos: Position::new(0.0, 0.0),
            reserved_center: Position::new(1.0, 0.0),
            reserved_radius: 3.0,
            origin: CellId(0),
            announced_frame: frame,
            announced_slot: 3,
            coordinator_disc: Some(Disc {
                center: Position::new(5.0, 5.0),
                radius: 2.0,
            }),
        }
    }

    #[test]
    fn idle_node_wakes_only_for_its_coordinator() {
        let pkt = empty_pkt(0);
        let awake = node_wake_plan(NodeId(9), &pkt, false, false, 2, &[0, 4]);
        assert_eq!(awake.into_iter().collect::<Vec<_>>(), vec![2]);
    }

    #[test]
    fn transmitter_also_wakes_for_adjacent_coordinators() {
        let mut pkt = empty_pkt(5);
        pkt.reservations
            .push(reservation(5, 40, NodeId(9), NodeId(10)));
        let awake = node_wake_plan(NodeId(9), &pkt, true, false, 2, &[0, 4]);
        assert!(awake.contains(&2));
        assert!(awake.contains(&0) && awake.contains(&4));
        assert!(awake.contains(&40));
        assert_eq!(awake.len(), 4);
    }

    #[test]
    fn receiver_with_pending_request_wakes_for_rx_and_contention() {
        let mut pkt = empty_pkt(1);
        pkt.reservations
            .push(reservation(1, 40, NodeId(3), NodeId(9)));
        let awake = node_wake_plan(NodeId(9), &pkt, false, true, 6, &[1]);
        // Own scheduling slot, the rx slot, and both contention slots; the
        // adjacent coordinator slot is absent because the node has no tx.
        assert_eq!(awake.into_iter().collect::<Vec<_>>(), vec![6, 40, 98, 99]);
    }

    #[test]
    fn next_frame_commit_does_not_wake_this_frame() {
        let mut pkt = empty_pkt(2);
        pkt.reservations
            .push(reservation(3, 22, NodeId(9), NodeId(4)));
        let awake = node_wake_plan(NodeId(9), &pkt, false, false, 0, &[]);
        assert!(!awake.contains(&22));
    }
}
