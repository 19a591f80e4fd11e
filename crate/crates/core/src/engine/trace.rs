//! Line-delimited event records emitted by the simulation engines.

use std::io::{self, Write};

use crate::channel::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    /// A packet arrived at a source node's queue.
    Arrival,
    /// A data packet transmission (the receiving end decides the outcome).
    DataTx,
    /// A coordinator's scheduling packet broadcast.
    SchedTx,
    /// A transmission request sent in the contention phase.
    RequestTx,
    /// An ATIM announcement (power-saving baseline).
    AtimTx,
    /// A reservation canceled by a coordinator.
    Cancel,
}

impl EventKind {
    fn label(&self) -> &'static str {
        match self {
            EventKind::Arrival => "arrival",
            EventKind::DataTx => "data_tx",
            EventKind::SchedTx => "sched_tx",
            EventKind::RequestTx => "request_tx",
            EventKind::AtimTx => "atim_tx",
            EventKind::Cancel => "cancel",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Delivered,
    Collided,
    /// The intended receiver was not listening.
    NoReceiver,
}

impl Outcome {
    fn label(&self) -> &'static str {
        match self {
            Outcome::Delivered => "delivered",
            Outcome::Collided => "collided",
            Outcome::NoReceiver => "no_receiver",
        }
    }
}

/// One simulation event: time, acting node, kind, frame slot when the
/// protocol is slotted, peer node, and outcome where applicable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEvent {
    pub time_us: u64,
    pub node: NodeId,
    pub kind: EventKind,
    pub slot: Option<usize>,
    pub peer: Option<NodeId>,
    pub outcome: Option<Outcome>,
}

/// Writes events as whitespace-delimited lines:
/// `time_us node kind slot peer outcome` with `-` for absent fields.
pub fn write_trace<W: Write>(events: &[TraceEvent], mut out: W) -> io::Result<()> {
    for e in events {
        let slot = e.slot.map_or_else(|| "-".to_string(), |s| s.to_string());
        let peer = e.peer.map_or_else(|| "-".to_string(), |p| p.0.to_string());
        let outcome = e.outcome.map_or("-", |o| o.label());
        writeln!(
            out,
            "{} {} {} {} {} {}",
            e.time_us,
            e.node.0,
            e.kind.label(),
            slot,
            peer,
            outcome
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_lines_are_stable() {
        let events = vec![
            TraceEvent {
                time_us: 7000,
                node: NodeId(3),
                kind: EventKind::DataTx,
                slot: Some(7),
                peer: Some(NodeId(4)),
                outcome: Some(Outcome::Delivered),
            },
            TraceEvent {
                time_us: 8000,
                node: NodeId(5),
                kind: EventKind::Arrival,
                slot: None,
                peer: None,
                outcome: None,
            },
        ];
        let mut buf = Vec::new();
        write_trace(&events, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "7000 3 data_tx 7 4 delivered\n8000 5 arrival - - -\n"
        );
    }
}
