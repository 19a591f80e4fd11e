//! Coordinator-side scheduling: demand and scheduling tables, greedy
//! contention-free slot assignment with space reservation, neighbor-schedule
//! merging, and conflict cancelation.

use crate::channel::{reserved_radius, ChannelModel, NodeId, RadiusMode};
use crate::geometry::{CellId, HexCellMap, Position};
use crate::pmac::{scheduling_slot_for_frame, FrameLayout};

/// A circular exclusion region: no other transmitter may be scheduled inside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disc {
    pub center: Position,
    pub radius: f64,
}

impl Disc {
    pub fn contains(&self, p: Position) -> bool {
        p.distance_sq(&self.center) < self.radius * self.radius
    }
}

/// A source node's outstanding transmission request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DemandEntry {
    pub source: NodeId,
    pub destination: NodeId,
    pub pending_packets: u32,
}

/// Identity of a reservation, used by cancellations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct ReservationKey {
    pub origin: CellId,
    pub frame: u64,
    pub slot: usize,
    pub source: NodeId,
    pub destination: NodeId,
}

/// One committed contention-free transmission, with the spatial reservation
/// protecting its receiver and, when it carries the source's piggybacked
/// request header, a second disc protecting reception at the coordinator.
#[derive(Debug, Clone, PartialEq)]
pub struct Reservation {
    pub slot: usize,
    pub frame: u64,
    pub source: NodeId,
    pub destination: NodeId,
    pub source_pos: Position,
    pub reserved_center: Position,
    pub reserved_radius: f64,
    pub origin: CellId,
    /// Frame in which the reservation was announced (commits for the next
    /// frame are announced one frame ahead).
    pub announced_frame: u64,
    /// Scheduling slot (1-based) in which the origin announced it.
    pub announced_slot: usize,
    /// Protection around the origin coordinator for the piggybacked request.
    pub coordinator_disc: Option<Disc>,
}

impl Reservation {
    pub fn key(&self) -> ReservationKey {
        ReservationKey {
            origin: self.origin,
            frame: self.frame,
            slot: self.slot,
            source: self.source,
            destination: self.destination,
        }
    }

    pub fn receiver_disc(&self) -> Disc {
        Disc {
            center: self.reserved_center,
            radius: self.reserved_radius,
        }
    }

    fn discs(&self) -> impl Iterator<Item = Disc> + '_ {
        std::iter::once(self.receiver_disc()).chain(self.coordinator_disc)
    }

    /// Disc-based interference test: two same-slot reservations conflict
    /// when either transmitter sits inside any reserved disc of the other.
    pub fn interferes_with(&self, other: &Reservation) -> bool {
        if self.frame != other.frame || self.slot != other.slot {
            return false;
        }
        self.discs().any(|d| d.contains(other.source_pos))
            || other.discs().any(|d| d.contains(self.source_pos))
    }

    /// Endpoint overlap: a node cannot take part in two exchanges at once.
    fn shares_endpoint(&self, source: NodeId, destination: NodeId) -> bool {
        self.source == source
            || self.source == destination
            || self.destination == source
            || self.destination == destination
    }
}

/// Broadcast by a coordinator in its scheduling slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SchedulingPacket {
    pub sender: CellId,
    pub frame: u64,
    /// 1-based scheduling slot the packet goes out in.
    pub slot: usize,
    /// Own commitments plus relayed knowledge within `r_a`.
    pub reservations: Vec<Reservation>,
    pub cancellations: Vec<ReservationKey>,
    pub contention_slots: Vec<usize>,
    pub contention_window: u32,
    /// Which contention-free slot carries each scheduled source's request
    /// header (the source's first assigned slot of the frame).
    pub piggyback_slots: Vec<(NodeId, usize)>,
}

impl SchedulingPacket {
    /// Air time of the packet at the control rate: PHY preamble plus one
    /// 200-bit entry per reservation/cancelation, capped at the slot length.
    pub fn air_time_us(&self, layout: &FrameLayout) -> u64 {
        let entries = (self.reservations.len() + self.cancellations.len()).max(1) as u64;
        let bits = entries * 200;
        let us = 192 + bits.div_ceil(6);
        us.min(layout.slot_us)
    }
}

/// Read-only context a coordinator consults while scheduling.
pub struct ScheduleContext<'a> {
    pub map: &'a HexCellMap,
    pub positions: &'a [Position],
    /// Cell of every node (coordinators map to their own cell).
    pub cell_of: &'a [CellId],
    pub cm: &'a ChannelModel,
    pub layout: &'a FrameLayout,
}

/// Outcome of ingesting one neighbor packet.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct IngestReport {
    pub merged: usize,
    pub duplicates: usize,
    pub cancels_applied: usize,
    pub cancels_unknown: usize,
    /// Keys of reservations removed by the packet's cancellations.
    pub applied_keys: Vec<ReservationKey>,
    /// Cancellations this coordinator queued after detecting conflicts.
    pub cancels_queued: Vec<ReservationKey>,
}

#[derive(Debug, Clone)]
struct QueuedDemand {
    entry: DemandEntry,
    arrival: u64,
}

/// Per-coordinator protocol state: demand table, knowledge-region schedule,
/// and the cancellations to announce in the next own packet.
#[derive(Debug, Clone)]
pub struct CoordinatorState {
    pub cell: CellId,
    pub group: u8,
    pub center: Position,
    /// Knowledge radius: reservations within this range are relayed and
    /// policed.
    pub r_a: f64,
    demand: Vec<QueuedDemand>,
    schedule: Vec<Reservation>,
    pending_cancels: Vec<ReservationKey>,
    arrival_seq: u64,
    /// Cancellations referencing reservations this coordinator never heard.
    pub unknown_cancellations: u64,
}

impl CoordinatorState {
    pub fn new(cell: CellId, group: u8, center: Position, r_a: f64) -> Self {
        Self {
            cell,
            group,
            center,
            r_a,
            demand: Vec::new(),
            schedule: Vec::new(),
            pending_cancels: Vec::new(),
            arrival_seq: 0,
            unknown_cancellations: 0,
        }
    }

    pub fn schedule(&self) -> &[Reservation] {
        &self.schedule
    }

    pub fn demand_entries(&self) -> impl Iterator<Item = &DemandEntry> {
        self.demand.iter().map(|d| &d.entry)
    }

    pub fn pending_for(&self, source: NodeId, destination: NodeId) -> Option<u32> {
        self.demand
            .iter()
            .find(|d| d.entry.source == source && d.entry.destination == destination)
            .map(|d| d.entry.pending_packets)
    }

    /// Registers a transmission request that arrived through the contention
    /// phase. An existing entry for the pair is replaced (same FIFO rank).
    pub fn add_demand(&mut self, entry: DemandEntry) {
        if entry.pending_packets == 0 {
            return;
        }
        match self
            .demand
            .iter_mut()
            .find(|d| d.entry.source == entry.source && d.entry.destination == entry.destination)
        {
            Some(d) => d.entry.pending_packets = entry.pending_packets,
            None => {
                self.demand.push(QueuedDemand {
                    entry,
                    arrival: self.arrival_seq,
                });
                self.arrival_seq += 1;
            }
        }
    }

    /// Applies a piggybacked request header carried in a scheduled data
    /// packet: the pair's pending count is replaced; zero removes the entry.
    pub fn piggyback_request(&mut self, source: NodeId, destination: NodeId, pending: u32) {
        if pending == 0 {
            self.demand
                .retain(|d| !(d.entry.source == source && d.entry.destination == destination));
            return;
        }
        self.add_demand(DemandEntry {
            source,
            destination,
            pending_packets: pending,
        });
    }

    /// Returns a canceled reservation's demand to the table for rescheduling.
    pub fn restore_demand(&mut self, source: NodeId, destination: NodeId, packets: u32) {
        match self
            .demand
            .iter_mut()
            .find(|d| d.entry.source == source && d.entry.destination == destination)
        {
            Some(d) => d.entry.pending_packets += packets,
            None => {
                self.demand.push(QueuedDemand {
                    entry: DemandEntry {
                        source,
                        destination,
                        pending_packets: packets,
                    },
                    arrival: self.arrival_seq,
                });
                self.arrival_seq += 1;
            }
        }
    }

    /// Drops reservations from frames before `frame`.
    pub fn expire_before(&mut self, frame: u64) {
        self.schedule.retain(|r| r.frame >= frame);
        self.pending_cancels.retain(|c| c.frame >= frame);
    }

    /// Earlier announcement wins a conflict; ties go to the lower cell id.
    fn commit_order(r: &Reservation) -> (u64, usize, CellId) {
        (r.announced_frame, r.announced_slot, r.origin)
    }

    /// A reservation belongs to this coordinator's knowledge region when
    /// any part of its protected geometry comes within `r_a`: the
    /// transmitter itself, or the edge of a reserved disc.
    fn in_knowledge_region(&self, r: &Reservation) -> bool {
        if r.source_pos.distance(&self.center) <= self.r_a {
            return true;
        }
        r.discs()
            .any(|d| d.center.distance(&self.center) - d.radius <= self.r_a)
    }

    /// Merges a neighbor's scheduling packet into the knowledge region:
    /// keeps reservations within `r_a` of this coordinator, applies the
    /// packet's cancellations, and queues cancellations for any newly
    /// learned reservation that conflicts with an earlier-committed one
    /// (the later announcement loses).
    pub fn ingest_neighbor_packet(&mut self, pkt: &SchedulingPacket) -> IngestReport {
        let mut report = IngestReport::default();

        for cancel in &pkt.cancellations {
            let before = self.schedule.len();
            self.schedule.retain(|r| r.key() != *cancel);
            if self.schedule.len() < before {
                report.cancels_applied += 1;
                report.applied_keys.push(*cancel);
            } else {
                self.unknown_cancellations += 1;
                report.cancels_unknown += 1;
            }
            self.pending_cancels.retain(|c| c != cancel);
        }

        for res in &pkt.reservations {
            if !self.in_knowledge_region(res) {
                continue;
            }
            if self.schedule.iter().any(|r| r.key() == res.key()) {
                report.duplicates += 1;
                continue;
            }
            // Conflict scan against everything already known for that slot.
            // The incoming reservation loses if any existing one
            // outranks it; otherwise every conflicting entry it outranks is
            // dropped and queued for cancelation.
            let conflicts: Vec<ReservationKey> = self
                .schedule
                .iter()
                .filter(|existing| existing.interferes_with(res))
                .map(|existing| {
                    if Self::commit_order(existing) <= Self::commit_order(res) {
                        res.key()
                    } else {
                        existing.key()
                    }
                })
                .collect();
            if conflicts.iter().any(|&k| k == res.key()) {
                let key = res.key();
                if !self.pending_cancels.contains(&key) {
                    self.pending_cancels.push(key);
                    report.cancels_queued.push(key);
                }
                continue;
            }
            for key in conflicts {
                self.schedule.retain(|r| r.key() != key);
                if !self.pending_cancels.contains(&key) {
                    self.pending_cancels.push(key);
                    report.cancels_queued.push(key);
                }
            }
            self.schedule.push(res.clone());
            report.merged += 1;
        }
        report
    }

    /// Checks one candidate assignment against every known same-slot
    /// reservation: no endpoint reuse, the source outside every reserved
    /// disc, and no known transmitter inside the candidate's own discs.
    fn slot_feasible(
        &self,
        slot: usize,
        frame: u64,
        source: NodeId,
        destination: NodeId,
        source_pos: Position,
        candidate_discs: &[Disc],
    ) -> bool {
        for r in &self.schedule {
            if r.frame != frame || r.slot != slot {
                continue;
            }
            if r.shares_endpoint(source, destination) {
                return false;
            }
            if r.discs().any(|d| d.contains(source_pos)) {
                return false;
            }
            if candidate_discs.iter().any(|d| d.contains(r.source_pos)) {
                return false;
            }
        }
        true
    }

    /// Whether this coordinator already listens for a piggybacked header in
    /// the given slot (one radio: one header per slot).
    fn piggyback_busy(&self, slot: usize, frame: u64) -> bool {
        self.schedule.iter().any(|r| {
            r.frame == frame
                && r.slot == slot
                && r.origin == self.cell
                && r.coordinator_disc.is_some()
        })
    }

    /// Builds this frame's scheduling packet: serves the demand table in
    /// FIFO order (ties to the lower source id), assigning each request to
    /// the earliest feasible contention-free slots. Links whose destination
    /// cell transmits its scheduling packet earlier this frame are committed
    /// for the next frame and only advertised now. The source's first
    /// assigned slot additionally reserves the disc around this coordinator
    /// so the piggybacked request header stays receivable.
    pub fn build_schedule(
        &mut self,
        frame: u64,
        ctx: &ScheduleContext<'_>,
        contention_window: u32,
    ) -> SchedulingPacket {
        let my_slot = scheduling_slot_for_frame(self.group, frame, ctx.layout.k);

        // FIFO by arrival, then lowest source id.
        let mut order: Vec<usize> = (0..self.demand.len()).collect();
        order.sort_by_key(|&i| (self.demand[i].arrival, self.demand[i].entry.source));

        for idx in order {
            let entry = self.demand[idx].entry;
            let source_pos = ctx.positions[entry.source.index()];
            let dest_pos = ctx.positions[entry.destination.index()];
            let link_d = source_pos.distance(&dest_pos);
            let r_link = match reserved_radius(link_d, ctx.cm, RadiusMode::Approx) {
                Ok(r) => r,
                Err(_) => continue,
            };

            // Cross-cell rule: commit for the current frame only when the
            // destination's coordinator announces later than we do.
            let dest_cell = ctx.cell_of[entry.destination.index()];
            let commit_frame = if dest_cell == self.cell {
                frame
            } else {
                let dest_slot =
                    scheduling_slot_for_frame(ctx.map.group(dest_cell), frame, ctx.layout.k);
                if dest_slot > my_slot {
                    frame
                } else {
                    frame + 1
                }
            };

            let coord_d = source_pos.distance(&self.center);
            let coord_radius = match reserved_radius(coord_d, ctx.cm, RadiusMode::Approx) {
                Ok(r) => r,
                Err(_) => continue,
            };

            let mut assigned = 0u32;
            let mut first_assigned = self.schedule.iter().any(|r| {
                r.frame == commit_frame && r.source == entry.source && r.coordinator_disc.is_some()
            });
            for slot in ctx.layout.contention_free_slots() {
                if assigned >= self.demand[idx].entry.pending_packets {
                    break;
                }
                let receiver_disc = Disc {
                    center: dest_pos,
                    radius: r_link,
                };
                let coordinator_disc = if first_assigned {
                    None
                } else {
                    Some(Disc {
                        center: self.center,
                        radius: coord_radius,
                    })
                };
                let mut discs = vec![receiver_disc];
                if let Some(d) = coordinator_disc {
                    // The header slot must also keep this coordinator free.
                    if self.piggyback_busy(slot, commit_frame) {
                        continue;
                    }
                    discs.push(d);
                }
                if !self.slot_feasible(
                    slot,
                    commit_frame,
                    entry.source,
                    entry.destination,
                    source_pos,
                    &discs,
                ) {
                    continue;
                }
                self.schedule.push(Reservation {
                    slot,
                    frame: commit_frame,
                    source: entry.source,
                    destination: entry.destination,
                    source_pos,
                    reserved_center: dest_pos,
                    reserved_radius: r_link,
                    origin: self.cell,
                    announced_frame: frame,
                    announced_slot: my_slot,
                    coordinator_disc,
                });
                assigned += 1;
                first_assigned = true;
            }
            self.demand[idx].entry.pending_packets -= assigned;
        }
        self.demand.retain(|d| d.entry.pending_packets > 0);

        // Advertise own reservations unconditionally (the destination's cell
        // must learn of cross-cell commits) and relay neighbors' within the
        // knowledge region.
        let reservations: Vec<Reservation> = self
            .schedule
            .iter()
            .filter(|r| r.frame >= frame && (r.origin == self.cell || self.in_knowledge_region(r)))
            .cloned()
            .collect();

        let piggyback_slots: Vec<(NodeId, usize)> = reservations
            .iter()
            .filter(|r| r.origin == self.cell && r.coordinator_disc.is_some() && r.frame == frame)
            .map(|r| (r.source, r.slot))
            .collect();

        let cancellations = std::mem::take(&mut self.pending_cancels);

        SchedulingPacket {
            sender: self.cell,
            frame,
            slot: my_slot,
            reservations,
            cancellations,
            contention_slots: ctx.layout.contention_slots().collect(),
            contention_window,
            piggyback_slots,
        }
    }

    /// Post-hoc audit: no two same-slot reservations known to this
    /// coordinator may interfere once all of the frame's packets are in.
    pub fn knowledge_region_consistent(&self, frame: u64) -> bool {
        let current: Vec<&Reservation> =
            self.schedule.iter().filter(|r| r.frame == frame).collect();
        for (i, a) in current.iter().enumerate() {
            for b in &current[i + 1..] {
                if a.interferes_with(b) {
                    return false;
                }
            }
        }
        true
    }
}
