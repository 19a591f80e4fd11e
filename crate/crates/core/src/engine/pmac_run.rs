//! Frame-driven execution of the coordination-based MAC.
//!
//! Coordinators are dedicated extra nodes at the cell centers, appended
//! after the regular nodes. Every data reception is adjudicated by the SINR
//! test at the receiver; scheduling receptions use the control threshold.

use std::collections::BTreeSet;

use rand::Rng;

use crate::channel::{sinr, ChannelModel, NodeId, TransmissionVector};
use crate::engine::ledger::{EnergyModel, RadioLedger, RadioMode};
use crate::engine::scenario::Scenario;
use crate::engine::trace::{EventKind, Outcome, TraceEvent};
use crate::engine::traffic::generate_traffic;
use crate::engine::{AuditReport, EngineError, SimResult};
use crate::geometry::{build_hex_tiling, CellId, Position};
use crate::pmac::{
    contention_access, scheduling_slot_for_frame, Contender, CoordinatorState, DemandEntry,
    FrameLayout, ScheduleContext, SchedulingPacket,
};
use crate::rng::{streams, SimRng};

/// Data-slot micro-timeline in µs: data + SIFS + ACK + DIFS fill the slot.
const DATA_US: u64 = 729;
const SIFS_US: u64 = 10;
const ACK_US: u64 = 211;
const DIFS_US: u64 = 50;
/// Contention mini-slot and request durations, µs.
const MINI_SLOT_US: u64 = 20;
const REQUEST_US: u64 = 240;

/// Protocol parameters for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct PmacParams {
    /// Cell radius as a multiple of the maximum link distance: r_g = h*d_m.
    pub h: f64,
    /// Knowledge radius as a multiple of the cell radius: r_a = q*r_g.
    pub q: f64,
    /// Contention slots per frame (fixed unless dynamic sizing is on).
    pub contention_slots: usize,
    pub contention_window: u32,
    /// Let coordinators resize the contention phase and window from
    /// mini-slot observations.
    pub dynamic_contention: bool,
    /// Request-delay target for dynamic sizing, in frames.
    pub target_delay_frames: f64,
    /// Model the design postulate that cell size, control power, and
    /// control rate are chosen so scheduling packets always reach in-cell
    /// nodes and adjacent coordinators. When off, scheduling receptions are
    /// adjudicated at the control SINR threshold like everything else; with
    /// seven-group reuse and a 3.4 path-loss exponent, simultaneous
    /// same-group transmitters then make a few adjacent-coordinator links
    /// fail deterministically.
    pub reliable_scheduling: bool,
}

impl Default for PmacParams {
    fn default() -> Self {
        Self {
            h: 1.0,
            q: 2.0,
            contention_slots: 2,
            contention_window: 32,
            dynamic_contention: false,
            target_delay_frames: 3.0,
            reliable_scheduling: true,
        }
    }
}

#[derive(Debug, Default)]
struct Counters {
    sent: u64,
    delivered: u64,
    collided: u64,
    delivered_meters: f64,
}

#[derive(Debug, Clone, Default)]
struct NodeRun {
    queue: u64,
    /// Transmit slots assigned for the current frame (slot, canceled).
    tx_slots: Vec<(usize, bool)>,
    rx_slots: Vec<usize>,
    header_slot: Option<usize>,
    /// Commitments announced for the next frame.
    next_tx_slots: Vec<usize>,
    next_rx_slots: Vec<usize>,
    got_packet: bool,
    wants_new_tx: bool,
    contention_announced: Vec<usize>,
    /// Awake slots actually used this frame (for the minimality audit).
    awake_slots: BTreeSet<usize>,
    /// Sticky role records for the minimality audit: cancellations edit the
    /// live assignment lists mid-frame, so justification is kept separately.
    held_tx_role: bool,
    rx_heard: Vec<usize>,
}

struct World {
    positions: Vec<Position>,
    cell_of: Vec<CellId>,
    n: usize,
    num_cells: usize,
    coordinator_tx_rf: Vec<f64>,
}

impl World {
    fn coordinator_node(&self, cell: CellId) -> NodeId {
        NodeId((self.n + cell.index()) as u32)
    }
}

#[allow(clippy::too_many_arguments)]
pub fn run_pmac(
    scenario: &Scenario,
    cm: &ChannelModel,
    params: &PmacParams,
    load_pps: f64,
    duration_us: u64,
    sim: &SimRng,
    audit: bool,
    collect_trace: bool,
) -> Result<SimResult, EngineError> {
    let r_g = params.h * scenario.d_m;
    if r_g < scenario.max_link_distance() {
        return Err(EngineError::Config(format!(
            "cell radius r_g={r_g} below the maximum link distance {}",
            scenario.max_link_distance()
        )));
    }
    cm.validate()
        .map_err(|e| EngineError::Config(e.to_string()))?;
    scenario
        .validate()
        .map_err(|e| EngineError::Config(e.to_string()))?;
    let mut layout = FrameLayout::standard();
    layout.num_contention = params.contention_slots;
    if !layout.validate() {
        return Err(EngineError::Config("invalid frame layout".into()));
    }
    if !duration_us.is_multiple_of(layout.frame_us()) || duration_us == 0 {
        return Err(EngineError::Config(format!(
            "duration {duration_us} µs is not a whole number of {} µs frames",
            layout.frame_us()
        )));
    }

    let map = build_hex_tiling(scenario.arena_width, scenario.arena_height, r_g);
    let r_a = params.q * r_g;
    let r_c = 2.0 * r_g;

    // World: regular nodes then one coordinator per cell.
    let mut positions = scenario.positions.clone();
    let mut cell_of: Vec<CellId> = scenario
        .positions
        .iter()
        .map(|p| map.assign_cell(*p))
        .collect::<Result<_, _>>()
        .map_err(|e| EngineError::Config(e.to_string()))?;
    let mut coordinator_tx_rf = Vec::new();
    for cell in map.cells() {
        positions.push(cell.center);
        cell_of.push(cell.id);
        // Minimum control power in [100, 180] mW reaching all in-cell nodes
        // and adjacent coordinators at the control threshold under zero
        // cross-interference.
        let mut d_max: f64 = 0.0;
        for (i, p) in scenario.positions.iter().enumerate() {
            if cell_of[i] == cell.id {
                d_max = d_max.max(p.distance(&cell.center));
            }
        }
        for &nb in map.neighbors(cell.id) {
            d_max = d_max.max(map.center(nb).distance(&cell.center));
        }
        let needed = if d_max > 0.0 {
            cm.gamma_s * cm.n0 * d_max.powf(cm.alpha) / cm.c
        } else {
            0.0
        };
        coordinator_tx_rf.push(needed.clamp(0.1, 0.18));
    }
    let world = World {
        positions,
        cell_of,
        n: scenario.n,
        num_cells: map.num_cells(),
        coordinator_tx_rf,
    };
    let num_all = world.n + world.num_cells;

    let mut tx_rf: Vec<f64> = vec![cm.p_d; world.n];
    tx_rf.extend_from_slice(&world.coordinator_tx_rf);
    let energy_model = EnergyModel::standard(&tx_rf);

    let mut coordinators: Vec<CoordinatorState> = map
        .cells()
        .iter()
        .map(|c| CoordinatorState::new(c.id, c.group, c.center, r_a))
        .collect();
    // Per-coordinator control packet power for SINR adjudication.
    let coord_cm: Vec<ChannelModel> = world
        .coordinator_tx_rf
        .iter()
        .map(|&p| ChannelModel {
            p_s: p,
            ..cm.clone()
        })
        .collect();

    let arrivals = generate_traffic(&scenario.links, load_pps, duration_us, sim);
    let mut next_arrival = 0usize;

    let mut nodes: Vec<NodeRun> = vec![NodeRun::default(); world.n];
    let mut ledger = RadioLedger::new(num_all);
    let mut trace: Vec<TraceEvent> = Vec::new();
    let mut accounted: Vec<u64> = vec![0; num_all];
    let mut counters = Counters::default();

    let mut audit_report = AuditReport::new(audit);
    if audit {
        audit_report.check("coloring", map.coloring_is_valid());
    }

    // Adjacent coordinator cells within r_a of each node (for wake rules).
    let nearby_cells: Vec<Vec<CellId>> = (0..world.n)
        .map(|i| {
            map.cells()
                .iter()
                .filter(|c| {
                    c.id != world.cell_of[i] && c.center.distance(&world.positions[i]) <= r_a
                })
                .map(|c| c.id)
                .collect()
        })
        .collect();

    let frames = duration_us / layout.frame_us();
    let mut contention_window = params.contention_window;
    let mut contention_observations: Vec<crate::contention::SlotProbabilities> = Vec::new();
    let mut smoothers: Vec<crate::contention::SmoothedEstimate> =
        vec![crate::contention::SmoothedEstimate::default(); world.num_cells];
    let mut rng_access = sim.stream(streams::MAC_BASE);
    let mut rotation_seen: Vec<[bool; 7]> = vec![[false; 7]; 7];

    let push_event = |trace: &mut Vec<TraceEvent>, e: TraceEvent| {
        if collect_trace {
            trace.push(e);
        }
    };

    for frame in 0..frames {
        let frame_start = frame * layout.frame_us();

        // Roll next-frame commitments into the current frame.
        for node in nodes.iter_mut() {
            node.tx_slots = std::mem::take(&mut node.next_tx_slots)
                .into_iter()
                .map(|s| (s, false))
                .collect();
            node.rx_slots = std::mem::take(&mut node.next_rx_slots);
            node.header_slot = None;
            node.got_packet = false;
            node.wants_new_tx = false;
            node.contention_announced.clear();
            node.awake_slots.clear();
            node.held_tx_role = !node.tx_slots.is_empty() || !node.next_tx_slots.is_empty();
            node.rx_heard = node.rx_slots.clone();
        }

        // Rotation audit bookkeeping.
        if audit {
            for cell in map.cells() {
                let slot = scheduling_slot_for_frame(cell.group, frame, layout.k);
                rotation_seen[cell.group as usize][slot - 1] = true;
            }
        }

        let mut packets_this_frame: Vec<Option<SchedulingPacket>> = vec![None; world.num_cells];

        for slot in 0..layout.slots_per_frame {
            let slot_start = frame_start + slot as u64 * layout.slot_us;
            while next_arrival < arrivals.len() && arrivals[next_arrival].time_us < slot_start {
                let a = arrivals[next_arrival];
                nodes[a.source.index()].queue += 1;
                push_event(
                    &mut trace,
                    TraceEvent {
                        time_us: a.time_us,
                        node: a.source,
                        kind: EventKind::Arrival,
                        slot: None,
                        peer: None,
                        outcome: None,
                    },
                );
                next_arrival += 1;
            }

            if slot < layout.k {
                run_scheduling_slot(
                    slot,
                    slot_start,
                    frame,
                    &layout,
                    &map,
                    &world,
                    cm,
                    &coord_cm,
                    params.reliable_scheduling,
                    &mut coordinators,
                    &mut nodes,
                    &nearby_cells,
                    &mut packets_this_frame,
                    contention_window,
                    &mut ledger,
                    &mut accounted,
                    collect_trace,
                    &mut trace,
                    scenario,
                );
            } else if layout.contention_free_slots().contains(&slot) {
                run_data_slot(
                    slot,
                    slot_start,
                    &world,
                    cm,
                    &mut coordinators,
                    &mut nodes,
                    scenario,
                    &mut counters,
                    &mut ledger,
                    &mut accounted,
                    collect_trace,
                    &mut trace,
                );
            } else if slot == layout.contention_slots().start {
                contention_observations = run_contention_phase(
                    slot_start,
                    &layout,
                    &world,
                    &mut coordinators,
                    &mut nodes,
                    scenario,
                    r_c,
                    contention_window,
                    &mut rng_access,
                    &mut ledger,
                    &mut accounted,
                    collect_trace,
                    &mut trace,
                );
            }
        }

        // Frame-end audits, then expiry.
        if audit {
            let consistent = coordinators
                .iter()
                .all(|c| c.knowledge_region_consistent(frame));
            audit_report.check("knowledge_region", consistent);
            audit_report.check(
                "wake_minimality",
                wake_sets_minimal(&nodes, &world, &map, &layout, frame, &nearby_cells),
            );
        }
        for c in coordinators.iter_mut() {
            c.expire_before(frame + 1);
        }

        // Dynamic adjustment: each coordinator inverts its mini-slot
        // observations into a contender estimate, smoothed across frames;
        // adjacent coordinators must announce identical contention slots,
        // so the frame adopts the largest estimate.
        if params.dynamic_contention && !contention_observations.is_empty() {
            let consensus = contention_observations
                .iter()
                .zip(smoothers.iter_mut())
                .map(|(obs, smoother)| {
                    let raw = crate::contention::estimate_contenders(*obs, contention_window);
                    smoother.update(raw)
                })
                .max()
                .unwrap_or(0)
                .max(1);
            let sizing = crate::contention::size_contention_slots(
                consensus,
                params.target_delay_frames * layout.frame_us() as f64,
                layout.slot_us as f64,
                MINI_SLOT_US as f64,
                REQUEST_US as f64,
                layout.frame_us() as f64,
                (layout.slots_per_frame - layout.k - 1) as u32,
            );
            layout.num_contention = sizing.slots as usize;
            contention_window = crate::contention::optimize_window(
                consensus,
                layout.num_contention as f64 * layout.slot_us as f64,
                MINI_SLOT_US as f64,
                REQUEST_US as f64,
                1024,
            );
        }

        // Whatever a node did not spend awake, it slept.
        let frame_end = (frame + 1) * layout.frame_us();
        for (i, spent) in accounted.iter_mut().enumerate() {
            debug_assert!(*spent <= layout.frame_us());
            ledger.add(
                NodeId(i as u32),
                RadioMode::Sleep,
                layout.frame_us() - *spent,
            );
            *spent = 0;
        }
        let _ = frame_end;
    }

    ledger
        .validate(duration_us)
        .map_err(|e| EngineError::Ledger(e.to_string()))?;
    if audit {
        if frames >= 7 {
            let fair = rotation_seen.iter().all(|s| s.iter().all(|&x| x));
            audit_report.check("rotation_fairness", fair);
        }
        audit_report.check("ledger_exact", true);
    }

    let (energy_per_node, total_energy) =
        crate::engine::ledger::account_energy(&ledger, &energy_model);
    let duration_s = duration_us as f64 * 1e-6;
    let metrics = crate::engine::metrics::Metrics {
        throughput: counters.delivered_meters / duration_s,
        energy_per_packet: (counters.delivered > 0)
            .then(|| total_energy / counters.delivered as f64),
        collision_rate: if counters.sent > 0 {
            counters.collided as f64 / counters.sent as f64
        } else {
            0.0
        },
        sent: counters.sent,
        delivered: counters.delivered,
        collided: counters.collided,
        total_energy,
    };
    Ok(SimResult {
        trace,
        ledger,
        metrics,
        energy_per_node,
        audit: audit_report,
        aux: Default::default(),
    })
}

/// One of the k scheduling slots: the slot's group of coordinators build
/// and broadcast their packets; adjacent coordinators and in-cell nodes
/// receive them subject to the control SINR threshold.
#[allow(clippy::too_many_arguments)]
fn run_scheduling_slot(
    slot: usize,
    slot_start: u64,
    frame: u64,
    layout: &FrameLayout,
    map: &crate::geometry::HexCellMap,
    world: &World,
    cm: &ChannelModel,
    coord_cm: &[ChannelModel],
    reliable_scheduling: bool,
    coordinators: &mut [CoordinatorState],
    nodes: &mut [NodeRun],
    nearby_cells: &[Vec<CellId>],
    packets_this_frame: &mut [Option<SchedulingPacket>],
    contention_window: u32,
    ledger: &mut RadioLedger,
    accounted: &mut [u64],
    collect_trace: bool,
    trace: &mut Vec<TraceEvent>,
    scenario: &Scenario,
) {
    let slot_1based = slot + 1;
    let transmitting: Vec<usize> = (0..world.num_cells)
        .filter(|&ci| {
            scheduling_slot_for_frame(map.cells()[ci].group, frame, layout.k) == slot_1based
        })
        .collect();

    // Build packets in cell order.
    let ctx = ScheduleContext {
        map,
        positions: &world.positions,
        cell_of: &world.cell_of,
        cm,
        layout,
    };
    for &ci in &transmitting {
        let pkt = coordinators[ci].build_schedule(frame, &ctx, contention_window);
        if collect_trace {
            trace.push(TraceEvent {
                time_us: slot_start,
                node: world.coordinator_node(CellId(ci as u32)),
                kind: EventKind::SchedTx,
                slot: Some(slot),
                peer: None,
                outcome: None,
            });
            for key in &pkt.cancellations {
                trace.push(TraceEvent {
                    time_us: slot_start,
                    node: world.coordinator_node(CellId(ci as u32)),
                    kind: EventKind::Cancel,
                    slot: Some(key.slot),
                    peer: Some(key.source),
                    outcome: None,
                });
            }
        }
        packets_this_frame[ci] = Some(pkt);
    }

    // Active transmitters for SINR adjudication.
    let mut txs = TransmissionVector::new();
    let mut max_air = 0u64;
    for &ci in &transmitting {
        let node = world.coordinator_node(CellId(ci as u32));
        txs.activate(node, world.coordinator_tx_rf[ci]).unwrap();
        max_air = max_air.max(packets_this_frame[ci].as_ref().unwrap().air_time_us(layout));
    }

    // Coordinators are awake through every scheduling slot.
    for ci in 0..world.num_cells {
        let me = world.coordinator_node(CellId(ci as u32));
        if transmitting.contains(&ci) {
            let air = packets_this_frame[ci].as_ref().unwrap().air_time_us(layout);
            ledger.add(me, RadioMode::Transmit, air);
            ledger.add(me, RadioMode::Idle, layout.slot_us - air);
        } else {
            // Listen for the (at most one) adjacent transmitter this slot.
            let heard = map
                .neighbors(CellId(ci as u32))
                .iter()
                .find(|nb| transmitting.contains(&nb.index()));
            match heard {
                Some(&nb) => {
                    let tx_node = world.coordinator_node(nb);
                    let pkt = packets_this_frame[nb.index()].as_ref().unwrap();
                    let air = pkt.air_time_us(layout);
                    ledger.add(me, RadioMode::Receive, air);
                    ledger.add(me, RadioMode::Idle, layout.slot_us - air);
                    let gamma = sinr(
                        map.center(CellId(ci as u32)),
                        tx_node,
                        &txs,
                        &world.positions,
                        &coord_cm[nb.index()],
                    )
                    .unwrap();
                    if reliable_scheduling || gamma >= cm.gamma_s {
                        let pkt = pkt.clone();
                        let report = coordinators[ci].ingest_neighbor_packet(&pkt);
                        // Returned demand for this coordinator's canceled
                        // reservations.
                        for key in report
                            .cancels_queued
                            .iter()
                            .chain(report.applied_keys.iter())
                        {
                            if key.origin == CellId(ci as u32) {
                                coordinators[ci].restore_demand(key.source, key.destination, 1);
                            }
                        }
                    }
                }
                None => ledger.add(me, RadioMode::Idle, layout.slot_us),
            }
        }
        accounted[me.index()] += layout.slot_us;
    }

    // Node receptions.
    for i in 0..world.n {
        let my_cell = world.cell_of[i];
        let own_slot_here = transmitting.contains(&my_cell.index());
        let scheduled_tx = nodes[i].tx_slots.iter().any(|&(_, canceled)| !canceled)
            || !nodes[i].next_tx_slots.is_empty();
        let listens_adjacent = scheduled_tx
            && nearby_cells[i]
                .iter()
                .any(|c| transmitting.contains(&c.index()));

        if !(own_slot_here || listens_adjacent) {
            continue;
        }
        nodes[i].awake_slots.insert(slot);
        let me = NodeId(i as u32);
        ledger.add(me, RadioMode::Receive, max_air);
        ledger.add(me, RadioMode::Idle, layout.slot_us - max_air);
        accounted[i] += layout.slot_us;

        // Which packet is this node listening to?
        let source_cell = if own_slot_here {
            my_cell
        } else {
            *nearby_cells[i]
                .iter()
                .find(|c| transmitting.contains(&c.index()))
                .unwrap()
        };
        let tx_node = world.coordinator_node(source_cell);
        let gamma = sinr(
            world.positions[i],
            tx_node,
            &txs,
            &world.positions,
            &coord_cm[source_cell.index()],
        )
        .unwrap();
        if !reliable_scheduling && gamma < cm.gamma_s {
            continue;
        }
        let pkt = packets_this_frame[source_cell.index()].as_ref().unwrap();

        // Cancellations apply to this node's commitments in either frame.
        for key in &pkt.cancellations {
            if key.source == me {
                if key.frame == frame {
                    for t in nodes[i].tx_slots.iter_mut() {
                        if t.0 == key.slot {
                            t.1 = true;
                        }
                    }
                } else {
                    nodes[i].next_tx_slots.retain(|&s| s != key.slot);
                }
            }
            if key.destination == me {
                if key.frame == frame {
                    nodes[i].rx_slots.retain(|&s| s != key.slot);
                } else {
                    nodes[i].next_rx_slots.retain(|&s| s != key.slot);
                }
            }
        }

        if own_slot_here {
            nodes[i].got_packet = true;
            for r in &pkt.reservations {
                if r.source == me && r.frame == frame {
                    if !nodes[i].tx_slots.iter().any(|&(s, _)| s == r.slot) {
                        nodes[i].tx_slots.push((r.slot, false));
                    }
                } else if r.source == me && r.frame == frame + 1 {
                    if !nodes[i].next_tx_slots.contains(&r.slot) {
                        nodes[i].next_tx_slots.push(r.slot);
                    }
                } else if r.destination == me && r.frame == frame {
                    if !nodes[i].rx_slots.contains(&r.slot) {
                        nodes[i].rx_slots.push(r.slot);
                    }
                    if !nodes[i].rx_heard.contains(&r.slot) {
                        nodes[i].rx_heard.push(r.slot);
                    }
                } else if r.destination == me
                    && r.frame == frame + 1
                    && !nodes[i].next_rx_slots.contains(&r.slot)
                {
                    nodes[i].next_rx_slots.push(r.slot);
                }
            }
            nodes[i].tx_slots.sort();
            nodes[i].rx_slots.sort();
            nodes[i].next_tx_slots.sort();
            nodes[i].next_rx_slots.sort();
            if nodes[i].tx_slots.iter().any(|&(_, c)| !c) || !nodes[i].next_tx_slots.is_empty() {
                nodes[i].held_tx_role = true;
            }
            nodes[i].header_slot = pkt
                .piggyback_slots
                .iter()
                .find(|(n, _)| *n == me)
                .map(|&(_, s)| s);
            nodes[i].contention_announced = pkt.contention_slots.clone();
            let scheduled_any =
                nodes[i].tx_slots.iter().any(|&(_, c)| !c) || !nodes[i].next_tx_slots.is_empty();
            nodes[i].wants_new_tx = nodes[i].queue > 0 && !scheduled_any;
        }
    }
    let _ = scenario;
}

/// One contention-free data slot: scheduled sources transmit, receivers and
/// piggyback-listening coordinators adjudicate by SINR.
#[allow(clippy::too_many_arguments)]
fn run_data_slot(
    slot: usize,
    slot_start: u64,
    world: &World,
    cm: &ChannelModel,
    coordinators: &mut [CoordinatorState],
    nodes: &mut [NodeRun],
    scenario: &Scenario,
    counters: &mut Counters,
    ledger: &mut RadioLedger,
    accounted: &mut [u64],
    collect_trace: bool,
    trace: &mut Vec<TraceEvent>,
) {
    let slot_us = 1000u64;
    debug_assert_eq!(DATA_US + SIFS_US + ACK_US + DIFS_US, slot_us);

    // Nodes holding an uncanceled assignment for this slot.
    let assigned: Vec<usize> = (0..world.n)
        .filter(|&i| {
            nodes[i]
                .tx_slots
                .iter()
                .any(|&(s, canceled)| s == slot && !canceled)
        })
        .collect();
    let transmitters: Vec<usize> = assigned
        .iter()
        .copied()
        .filter(|&i| nodes[i].queue > 0)
        .collect();
    // Listening receivers (half-duplex: a transmitter cannot receive).
    let receivers: Vec<usize> = (0..world.n)
        .filter(|&i| nodes[i].rx_slots.contains(&slot) && !transmitters.contains(&i))
        .collect();
    // Coordinators listening for a piggybacked header.
    let header_sources: Vec<usize> = transmitters
        .iter()
        .copied()
        .filter(|&i| nodes[i].header_slot == Some(slot))
        .collect();

    if assigned.is_empty() && receivers.is_empty() {
        return;
    }

    // Awake with an empty queue: listen out the slot.
    for &i in &assigned {
        if !transmitters.contains(&i) {
            nodes[i].awake_slots.insert(slot);
            ledger.add(NodeId(i as u32), RadioMode::Idle, slot_us);
            accounted[i] += slot_us;
        }
    }

    let mut txs = TransmissionVector::new();
    for &i in &transmitters {
        txs.activate(NodeId(i as u32), cm.p_d).unwrap();
    }

    let mut delivered_to: Vec<usize> = Vec::new();
    let mut delivered_sources: Vec<usize> = Vec::new();
    for &i in &transmitters {
        let me = NodeId(i as u32);
        nodes[i].awake_slots.insert(slot);
        let dest = scenario.links[i].destination;
        let dest_listening = receivers.contains(&dest.index());
        let outcome = if !dest_listening {
            Outcome::NoReceiver
        } else {
            let gamma = sinr(
                world.positions[dest.index()],
                me,
                &txs,
                &world.positions,
                cm,
            )
            .unwrap();
            if gamma >= cm.gamma_d {
                Outcome::Delivered
            } else {
                Outcome::Collided
            }
        };
        counters.sent += 1;
        match outcome {
            Outcome::Delivered => {
                nodes[i].queue -= 1;
                delivered_to.push(dest.index());
                delivered_sources.push(i);
                counters.delivered += 1;
                counters.delivered_meters += scenario.links[i].distance;
            }
            Outcome::Collided => counters.collided += 1,
            Outcome::NoReceiver => {}
        }
        if outcome != Outcome::Delivered && std::env::var_os("PMACSIM_DEBUG_COLLISIONS").is_some() {
            let dest_pos = world.positions[dest.index()];
            let r_disc: Vec<(usize, f64, bool, bool)> = transmitters
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| {
                    let d = world.positions[j].distance(&dest_pos);
                    let my_coord = &coordinators[world.cell_of[i].index()];
                    let their_key_known = my_coord
                        .schedule()
                        .iter()
                        .any(|r| r.source == NodeId(j as u32) && r.slot == slot);
                    let dest_coord_knows_mine = coordinators[world.cell_of[dest.index()].index()]
                        .schedule()
                        .iter()
                        .any(|r| r.source == NodeId(i as u32) && r.slot == slot);
                    (j, d, their_key_known, dest_coord_knows_mine)
                })
                .collect();
            eprintln!(
                "{outcome:?} t={slot_start} slot={slot} src={i} cell={:?} dst={} dcell={:?} dst_got_pkt={} dst_rx={:?} dst_next_rx={:?} others(j,d,known_by_my_coord,dest_coord_knows_me)={r_disc:?}",
                world.cell_of[i], dest.index(), world.cell_of[dest.index()],
                nodes[dest.index()].got_packet,
                nodes[dest.index()].rx_slots,
                nodes[dest.index()].next_rx_slots,
            );
        }
        if collect_trace {
            trace.push(TraceEvent {
                time_us: slot_start,
                node: me,
                kind: EventKind::DataTx,
                slot: Some(slot),
                peer: Some(dest),
                outcome: Some(outcome),
            });
        }
        // Source: data out, SIFS, ACK window, DIFS.
        ledger.add(me, RadioMode::Transmit, DATA_US);
        ledger.add(me, RadioMode::Idle, SIFS_US);
        ledger.add(me, RadioMode::Receive, ACK_US);
        ledger.add(me, RadioMode::Idle, DIFS_US);
        accounted[i] += slot_us;
    }

    for &r in &receivers {
        let me = NodeId(r as u32);
        nodes[r].awake_slots.insert(slot);
        ledger.add(me, RadioMode::Receive, DATA_US + SIFS_US);
        if delivered_to.contains(&r) {
            ledger.add(me, RadioMode::Transmit, ACK_US);
        } else {
            ledger.add(me, RadioMode::Idle, ACK_US);
        }
        ledger.add(me, RadioMode::Idle, DIFS_US);
        accounted[r] += slot_us;
    }

    // Piggybacked request headers, adjudicated at the coordinator.
    for &i in &header_sources {
        let me = NodeId(i as u32);
        let cell = world.cell_of[i];
        let coord_node = world.coordinator_node(cell);
        let coord_pos = world.positions[coord_node.index()];
        ledger.add(coord_node, RadioMode::Receive, DATA_US);
        ledger.add(coord_node, RadioMode::Idle, slot_us - DATA_US);
        accounted[coord_node.index()] += slot_us;

        let gamma = sinr(coord_pos, me, &txs, &world.positions, cm).unwrap();
        if gamma >= cm.gamma_d {
            // Report what will remain after this frame's assignments: the
            // queue as seen at transmission time minus the slots still to
            // come (including this one).
            let remaining_tx = nodes[i]
                .tx_slots
                .iter()
                .filter(|&&(s, canceled)| s >= slot && !canceled)
                .count() as u64;
            let queue_at_tx = nodes[i].queue + u64::from(delivered_sources.contains(&i));
            let reported = queue_at_tx
                .saturating_sub(remaining_tx)
                .min(u32::MAX as u64) as u32;
            coordinators[cell.index()].piggyback_request(
                me,
                scenario.links[i].destination,
                reported,
            );
        }
    }
}

/// The trailing contention phase of the frame, run as one block.
#[allow(clippy::too_many_arguments)]
fn run_contention_phase(
    phase_start: u64,
    layout: &FrameLayout,
    world: &World,
    coordinators: &mut [CoordinatorState],
    nodes: &mut [NodeRun],
    scenario: &Scenario,
    r_c: f64,
    contention_window: u32,
    rng: &mut impl Rng,
    ledger: &mut RadioLedger,
    accounted: &mut [u64],
    collect_trace: bool,
    trace: &mut Vec<TraceEvent>,
) -> Vec<crate::contention::SlotProbabilities> {
    let period_us = layout.contention_slots().len() as u64 * layout.slot_us;

    let contenders: Vec<Contender> = (0..world.n)
        .filter(|&i| nodes[i].wants_new_tx && nodes[i].got_packet && nodes[i].queue > 0)
        .map(|i| Contender {
            node: NodeId(i as u32),
            cell: world.cell_of[i],
            request: DemandEntry {
                source: NodeId(i as u32),
                destination: scenario.links[i].destination,
                pending_packets: nodes[i].queue.min(u32::MAX as u64) as u32,
            },
        })
        .collect();

    let outcome = contention_access(
        &contenders,
        contention_window,
        layout,
        &world.positions,
        &|cell| world.coordinator_node(cell),
        r_c,
        MINI_SLOT_US,
        REQUEST_US,
        rng,
    );

    for c in &outcome.delivered {
        coordinators[c.cell.index()].add_demand(c.request);
    }
    if collect_trace {
        for &(node, start, end) in &outcome.transmissions {
            let delivered = outcome.delivered.iter().any(|c| c.node == node);
            trace.push(TraceEvent {
                time_us: phase_start + start,
                node,
                kind: EventKind::RequestTx,
                slot: Some(layout.contention_slots().start),
                peer: None,
                outcome: Some(if delivered {
                    Outcome::Delivered
                } else {
                    Outcome::Collided
                }),
            });
            let _ = end;
        }
    }

    // Energy: contenders are awake for the whole phase; their request air
    // time is transmit, the rest idle. Requests straddling the frame end
    // (midpoint rule) have their tails clipped to keep the ledger exact.
    for c in &contenders {
        let i = c.node.index();
        for s in layout.contention_slots() {
            nodes[i].awake_slots.insert(s);
        }
        let tx_us = outcome
            .transmissions
            .iter()
            .filter(|&&(n, _, _)| n == c.node)
            .map(|&(_, s, e)| e.min(period_us) - s.min(period_us))
            .sum::<u64>();
        ledger.add(c.node, RadioMode::Transmit, tx_us);
        ledger.add(c.node, RadioMode::Idle, period_us - tx_us);
        accounted[i] += period_us;
    }
    // Coordinators listen through the phase; delivered request air time is
    // counted as receive.
    for ci in 0..world.num_cells {
        let me = world.coordinator_node(CellId(ci as u32));
        let rx_us: u64 = outcome
            .delivered
            .iter()
            .filter(|c| c.cell.index() == ci)
            .map(|c| {
                outcome
                    .transmissions
                    .iter()
                    .filter(|&&(n, _, _)| n == c.node)
                    .map(|&(_, s, e)| e.min(period_us) - s.min(period_us))
                    .sum::<u64>()
            })
            .sum();
        ledger.add(me, RadioMode::Receive, rx_us);
        ledger.add(me, RadioMode::Idle, period_us - rx_us);
        accounted[me.index()] += period_us;
    }

    // What each coordinator observed, mini-slot by mini-slot: idle, one
    // in-range request start (decodable), or several (collision). Busy
    // continuation slots are not decision points.
    let minislots = period_us / MINI_SLOT_US;
    (0..world.num_cells)
        .map(|ci| {
            let center = world.positions[world.coordinator_node(CellId(ci as u32)).index()];
            let in_range: Vec<&(NodeId, u64, u64)> = outcome
                .transmissions
                .iter()
                .filter(|&&(n, _, _)| world.positions[n.index()].distance(&center) <= r_c)
                .collect();
            let mut idle = 0u32;
            let mut success = 0u32;
            let mut collision = 0u32;
            for ms in 0..minislots {
                let t = ms * MINI_SLOT_US;
                let starts = in_range.iter().filter(|&&&(_, s, _)| s == t).count();
                let busy = in_range.iter().any(|&&(_, s, e)| s < t && t < e);
                match (starts, busy) {
                    (0, false) => idle += 1,
                    (1, _) => success += 1,
                    (n, _) if n >= 2 => collision += 1,
                    _ => {}
                }
            }
            let total = (idle + success + collision).max(1) as f64;
            crate::contention::SlotProbabilities {
                delta_i: idle as f64 / total,
                delta_s: success as f64 / total,
                delta_c: collision as f64 / total,
            }
        })
        .collect()
}

/// Wake-minimality audit: every awake slot must have a role under the
/// protocol rules for this frame.
fn wake_sets_minimal(
    nodes: &[NodeRun],
    world: &World,
    map: &crate::geometry::HexCellMap,
    layout: &FrameLayout,
    frame: u64,
    nearby_cells: &[Vec<CellId>],
) -> bool {
    for (i, node) in nodes.iter().enumerate() {
        let my_cell = world.cell_of[i];
        let own_slot = scheduling_slot_for_frame(map.group(my_cell), frame, layout.k) - 1;
        let mut allowed = BTreeSet::new();
        allowed.insert(own_slot);
        if node.held_tx_role {
            for c in &nearby_cells[i] {
                allowed.insert(scheduling_slot_for_frame(map.group(*c), frame, layout.k) - 1);
            }
        }
        for &(s, _) in &node.tx_slots {
            allowed.insert(s);
        }
        for &s in &node.rx_heard {
            allowed.insert(s);
        }
        if node.wants_new_tx {
            for s in layout.contention_slots() {
                allowed.insert(s);
            }
        }
        if !node.awake_slots.is_subset(&allowed) {
            return false;
        }
    }
    true
}
