//! Mini-slot CSMA/CA engine shared by the DCF and PSM baselines.
//!
//! Time advances in 20 µs mini-slots. A node with traffic senses the
//! channel (binary busy within its carrier-sense range), waits DIFS,
//! counts down a uniform backoff drawn from [0, CW], and fires an exchange
//! when it expires; failures double CW up to CW_max. An exchange is a
//! sequence of transmission phases (optionally RTS/CTS, then DATA/ACK, or
//! ATIM/ATIM-ACK in power-saving announcements), each adjudicated by the
//! SINR test at its receiver over the exact set of overlapping
//! transmissions. Hidden terminals emerge from the geometry.

use rand::Rng;

use crate::channel::{sinr, ChannelModel, NodeId, TransmissionVector};
use crate::engine::ledger::{EnergyModel, RadioLedger, RadioMode};
use crate::engine::metrics::Metrics;
use crate::engine::scenario::Scenario;
use crate::engine::trace::{EventKind, Outcome, TraceEvent};
use crate::engine::traffic::generate_traffic;
use crate::engine::{AuditReport, EngineError, SimResult};
use crate::rng::{streams, SimRng};

/// Mini-slot quantum, µs.
const SLOT_US: u64 = 20;
/// Phase lengths in mini-slots. Data + ACK + DIFS fill the 1 ms exchange
/// budget; control frames carry the PHY preamble at the control rate.
const DATA_SLOTS: u64 = 36;
const ACK_SLOTS: u64 = 11;
const RTS_SLOTS: u64 = 11;
const CTS_SLOTS: u64 = 11;
const ATIM_SLOTS: u64 = 12;
const ATIM_ACK_SLOTS: u64 = 11;
const DIFS_SLOTS: u64 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct DcfConfig {
    /// Carrier-sense range, meters.
    pub r_c: f64,
    pub cw_min: u32,
    pub cw_max: u32,
    pub rts_cts: bool,
    pub retry_limit: u32,
    /// When set, failed data receptions that would have survived without
    /// interferers inside this radius of the receiver are counted in
    /// `aux["near_caused_failures"]`.
    pub classify_radius: Option<f64>,
}

impl DcfConfig {
    pub fn standard(r_c: f64) -> Self {
        Self {
            r_c,
            cw_min: 15,
            cw_max: 1023,
            rts_cts: true,
            retry_limit: 7,
            classify_radius: None,
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.r_c <= 0.0 {
            return Err(EngineError::Config(
                "carrier-sense range must be positive".into(),
            ));
        }
        if self.cw_min > self.cw_max {
            return Err(EngineError::Config("CW_min must not exceed CW_max".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsmConfig {
    pub beacon_us: u64,
    pub atim_us: u64,
    pub dcf: DcfConfig,
}

impl PsmConfig {
    pub fn standard(r_c: f64) -> Self {
        Self {
            beacon_us: 100_000,
            atim_us: 4_000,
            dcf: DcfConfig::standard(r_c),
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        self.dcf.validate()?;
        if self.atim_us == 0 || self.atim_us >= self.beacon_us {
            return Err(EngineError::Config(
                "ATIM window must be positive and shorter than the beacon interval".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PhaseKind {
    Rts,
    Cts,
    Data,
    Ack,
    Atim,
    AtimAck,
}

impl PhaseKind {
    fn slots(self) -> u64 {
        match self {
            PhaseKind::Rts => RTS_SLOTS,
            PhaseKind::Cts => CTS_SLOTS,
            PhaseKind::Data => DATA_SLOTS,
            PhaseKind::Ack => ACK_SLOTS,
            PhaseKind::Atim => ATIM_SLOTS,
            PhaseKind::AtimAck => ATIM_ACK_SLOTS,
        }
    }

    fn is_data(self) -> bool {
        matches!(self, PhaseKind::Data)
    }

    /// Whether the exchange's destination transmits this phase.
    fn dest_transmits(self) -> bool {
        matches!(self, PhaseKind::Cts | PhaseKind::Ack | PhaseKind::AtimAck)
    }
}

/// A realized transmission on the air.
#[derive(Debug, Clone, Copy)]
struct AirPhase {
    tx: u32,
    start: u64,
    end: u64,
    exchange: usize,
}

#[derive(Debug, Clone)]
struct Exchange {
    source: u32,
    dest: u32,
    plan: Vec<PhaseKind>,
    next_phase: usize,
    phase_end: u64,
    planned_end: u64,
    failed: bool,
}

#[derive(Debug, Clone, Default)]
struct Station {
    queue: u64,
    backoff: Option<u32>,
    cw: u32,
    retries: u32,
    idle_run: u64,
    nav_until: u64,
    /// Index of the exchange currently holding this radio.
    exchange: Option<usize>,
    announced_tx: bool,
    announced_rx: bool,
    tx_us: u64,
    rx_us: u64,
    sleep_us: u64,
    difs_violations: u64,
}

#[derive(Default)]
struct Counters {
    sent: u64,
    delivered: u64,
    collided: u64,
    delivered_meters: f64,
    near_caused: u64,
}

/// IEEE 802.11 DCF without power saving: every radio idles when not
/// transmitting or receiving.
#[allow(clippy::too_many_arguments)]
pub fn run_dcf(
    scenario: &Scenario,
    cm: &ChannelModel,
    cfg: &DcfConfig,
    load_pps: f64,
    duration_us: u64,
    sim: &SimRng,
    audit: bool,
    collect_trace: bool,
) -> Result<SimResult, EngineError> {
    cfg.validate()?;
    run_csma(
        scenario,
        cm,
        cfg,
        None,
        load_pps,
        duration_us,
        sim,
        audit,
        collect_trace,
    )
}

/// DCF in power-saving mode: ATIM announcements at each beacon, data
/// exchanges among announced pairs, everyone else asleep until the next
/// beacon.
#[allow(clippy::too_many_arguments)]
pub fn run_psm(
    scenario: &Scenario,
    cm: &ChannelModel,
    cfg: &PsmConfig,
    load_pps: f64,
    duration_us: u64,
    sim: &SimRng,
    audit: bool,
    collect_trace: bool,
) -> Result<SimResult, EngineError> {
    cfg.validate()?;
    run_csma(
        scenario,
        cm,
        &cfg.dcf,
        Some(cfg),
        load_pps,
        duration_us,
        sim,
        audit,
        collect_trace,
    )
}

#[allow(clippy::too_many_arguments)]
fn run_csma(
    scenario: &Scenario,
    cm: &ChannelModel,
    cfg: &DcfConfig,
    psm: Option<&PsmConfig>,
    load_pps: f64,
    duration_us: u64,
    sim: &SimRng,
    audit: bool,
    collect_trace: bool,
) -> Result<SimResult, EngineError> {
    cm.validate()
        .map_err(|e| EngineError::Config(e.to_string()))?;
    scenario
        .validate()
        .map_err(|e| EngineError::Config(e.to_string()))?;
    if !duration_us.is_multiple_of(SLOT_US) {
        return Err(EngineError::Config(
            "duration must be a whole number of mini-slots".into(),
        ));
    }
    if let Some(p) = psm {
        if !duration_us.is_multiple_of(p.beacon_us)
            || p.beacon_us % SLOT_US != 0
            || p.atim_us % SLOT_US != 0
        {
            return Err(EngineError::Config(
                "beacon interval and ATIM window must be mini-slot multiples dividing the run"
                    .into(),
            ));
        }
    }

    let n = scenario.n;
    let positions = &scenario.positions;
    let total_slots = duration_us / SLOT_US;
    let arrivals = generate_traffic(&scenario.links, load_pps, duration_us, sim);
    let mut next_arrival = 0usize;

    let mut stations: Vec<Station> = vec![Station::default(); n];
    for s in stations.iter_mut() {
        s.cw = cfg.cw_min;
    }
    let mut rng = sim.stream(streams::MAC_BASE);
    let mut air: Vec<AirPhase> = Vec::new();
    let mut exchanges: Vec<Exchange> = Vec::new();
    let mut active: Vec<usize> = Vec::new();
    let mut trace: Vec<TraceEvent> = Vec::new();
    let mut counters = Counters::default();

    let beacon_slots = psm.map(|p| p.beacon_us / SLOT_US);
    let atim_slots = psm.map(|p| p.atim_us / SLOT_US);

    let in_atim_window = |ms: u64| -> bool {
        match (beacon_slots, atim_slots) {
            (Some(b), Some(a)) => ms % b < a,
            _ => false,
        }
    };

    let mut ms = 0u64;
    while ms < total_slots {
        // Beacon boundary: everyone wakes, announcements and windows reset.
        if let Some(b) = beacon_slots {
            if ms.is_multiple_of(b) {
                for st in stations.iter_mut() {
                    st.announced_tx = false;
                    st.announced_rx = false;
                    st.cw = cfg.cw_min;
                    st.retries = 0;
                    st.backoff = None;
                    st.idle_run = 0;
                }
            }
            // ATIM window close: whoever stayed unannounced sleeps out the
            // beacon's communication period.
            if ms % b == atim_slots.unwrap() {
                for st in stations.iter_mut() {
                    if !st.announced_tx && !st.announced_rx {
                        st.sleep_us += (b - atim_slots.unwrap()) * SLOT_US;
                    }
                }
            }
        }

        let now_us = ms * SLOT_US;
        while next_arrival < arrivals.len() && arrivals[next_arrival].time_us <= now_us {
            let a = arrivals[next_arrival];
            stations[a.source.index()].queue += 1;
            if collect_trace {
                trace.push(TraceEvent {
                    time_us: a.time_us,
                    node: a.source,
                    kind: EventKind::Arrival,
                    slot: None,
                    peer: None,
                    outcome: None,
                });
            }
            next_arrival += 1;
        }

        // Nothing on the air and nothing queued: jump to the next arrival
        // or protocol boundary.
        if active.is_empty() && stations.iter().all(|s| s.queue == 0) {
            let mut jump_to = if next_arrival < arrivals.len() {
                arrivals[next_arrival].time_us / SLOT_US
            } else {
                total_slots
            };
            if let (Some(b), Some(a)) = (beacon_slots, atim_slots) {
                let beacon_start = (ms / b) * b;
                if ms < beacon_start + a {
                    jump_to = jump_to.min(beacon_start + a);
                }
                jump_to = jump_to.min((ms / b + 1) * b);
            }
            if jump_to > ms {
                ms = jump_to;
                continue;
            }
        }

        // Phase boundaries: adjudicate the ended phase, then either abort
        // the exchange, finish it, or put its next phase on the air.
        let ending: Vec<usize> = active
            .iter()
            .copied()
            .filter(|&ei| exchanges[ei].phase_end == ms)
            .collect();
        for ei in ending {
            let done = advance_exchange(
                ei,
                ms,
                cm,
                cfg,
                psm.is_some(),
                scenario,
                &mut exchanges,
                &mut stations,
                &mut air,
                &mut counters,
                collect_trace,
                &mut trace,
            );
            if done {
                let ex = exchanges[ei].clone();
                if stations[ex.source as usize].exchange == Some(ei) {
                    stations[ex.source as usize].exchange = None;
                }
                if stations[ex.dest as usize].exchange == Some(ei) {
                    stations[ex.dest as usize].exchange = None;
                }
                active.retain(|&x| x != ei);
                settle_exchange(&ex, cfg, &mut stations, &mut rng);
            }
        }

        // Contention: sensing, DIFS, backoff, fire.
        let atim_phase = in_atim_window(ms);
        let window_end: u64 = match (beacon_slots, atim_slots) {
            (Some(b), Some(a)) => {
                if atim_phase {
                    (ms / b) * b + a
                } else {
                    (ms / b + 1) * b
                }
            }
            _ => total_slots,
        };

        let mut fires: Vec<usize> = Vec::new();
        let mut counting: Vec<usize> = Vec::new();
        for i in 0..n {
            let awake =
                psm.is_none() || atim_phase || stations[i].announced_tx || stations[i].announced_rx;
            if stations[i].exchange.is_some() || !awake {
                continue;
            }
            let wants = if psm.is_some() {
                if atim_phase {
                    stations[i].queue > 0 && !stations[i].announced_tx
                } else {
                    stations[i].queue > 0 && stations[i].announced_tx
                }
            } else {
                stations[i].queue > 0
            };
            if !wants {
                continue;
            }
            let me = positions[i];
            let busy = stations[i].nav_until > ms
                || air.iter().any(|p| {
                    p.start < ms && ms < p.end && positions[p.tx as usize].distance(&me) <= cfg.r_c
                });
            if busy {
                stations[i].idle_run = 0;
                continue;
            }
            stations[i].idle_run += 1;
            if stations[i].idle_run <= DIFS_SLOTS {
                continue;
            }
            match stations[i].backoff {
                None => stations[i].backoff = Some(rng.random_range(0..=stations[i].cw)),
                Some(0) => fires.push(i),
                Some(_) => counting.push(i),
            }
        }

        let mut started: Vec<usize> = Vec::new();
        for &i in &fires {
            let dest = scenario.links[i].destination.0;
            let plan: Vec<PhaseKind> = if atim_phase && psm.is_some() {
                vec![PhaseKind::Atim, PhaseKind::AtimAck]
            } else if cfg.rts_cts {
                vec![
                    PhaseKind::Rts,
                    PhaseKind::Cts,
                    PhaseKind::Data,
                    PhaseKind::Ack,
                ]
            } else {
                vec![PhaseKind::Data, PhaseKind::Ack]
            };
            let planned_slots: u64 = plan.iter().map(|k| k.slots()).sum();
            // The whole exchange must fit before the window or run ends.
            if ms + planned_slots + DIFS_SLOTS > window_end.min(total_slots) {
                continue;
            }
            if stations[i].idle_run <= DIFS_SLOTS {
                stations[i].difs_violations += 1;
            }
            let ei = exchanges.len();
            let first = plan[0];
            exchanges.push(Exchange {
                source: i as u32,
                dest,
                plan,
                next_phase: 0,
                phase_end: ms + first.slots(),
                planned_end: ms + planned_slots,
                failed: false,
            });
            air.push(AirPhase {
                tx: i as u32,
                start: ms,
                end: ms + first.slots(),
                exchange: ei,
            });
            active.push(ei);
            stations[i].exchange = Some(ei);
            stations[i].backoff = None;
            started.push(i);
            // Virtual carrier sense: the RTS warns everyone in range of the
            // source for the whole exchange.
            if first == PhaseKind::Rts {
                let end = exchanges[ei].planned_end;
                for j in 0..n {
                    if j != i && j as u32 != dest && positions[j].distance(&positions[i]) <= cfg.r_c
                    {
                        stations[j].nav_until = stations[j].nav_until.max(end);
                    }
                }
            }
        }
        // Waiting counters tick down, except where a fire starting this
        // mini-slot consumed the slot for in-range peers.
        for &i in &counting {
            let consumed = started
                .iter()
                .any(|&j| positions[j].distance(&positions[i]) <= cfg.r_c);
            if consumed {
                stations[i].idle_run = 0;
            } else if let Some(b) = stations[i].backoff {
                stations[i].backoff = Some(b - 1);
            }
        }

        if ms.is_multiple_of(1024) && !air.is_empty() {
            air.retain(|p| p.end + 128 >= ms);
        }
        ms += 1;
    }

    // Energy: transmit/receive/sleep accumulated on the way; idle is the
    // remainder.
    let mut ledger = RadioLedger::new(n);
    for (i, st) in stations.iter().enumerate() {
        let me = NodeId(i as u32);
        ledger.add(me, RadioMode::Transmit, st.tx_us);
        ledger.add(me, RadioMode::Receive, st.rx_us);
        ledger.add(me, RadioMode::Sleep, st.sleep_us);
        let spent = st.tx_us + st.rx_us + st.sleep_us;
        debug_assert!(spent <= duration_us, "node {i} over-accounted");
        ledger.add(me, RadioMode::Idle, duration_us - spent);
    }

    ledger
        .validate(duration_us)
        .map_err(|e| EngineError::Ledger(e.to_string()))?;
    let mut report = AuditReport::new(audit);
    if audit {
        report.check(
            "backoff_legality",
            stations.iter().all(|s| s.difs_violations == 0),
        );
        report.check("ledger_exact", true);
    }

    let tx_rf = vec![cm.p_d; n];
    let model = EnergyModel::standard(&tx_rf);
    let (energy_per_node, total_energy) = crate::engine::ledger::account_energy(&ledger, &model);
    let duration_s = duration_us as f64 * 1e-6;
    let metrics = Metrics {
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
    let mut result = SimResult {
        trace,
        ledger,
        metrics,
        energy_per_node,
        audit: report,
        aux: Default::default(),
    };
    result
        .aux
        .insert("near_caused_failures".into(), counters.near_caused);
    Ok(result)
}

/// Adjudicates the phase that just ended; on success realizes the next
/// phase. Returns true when the exchange is finished (success or abort).
#[allow(clippy::too_many_arguments)]
fn advance_exchange(
    ei: usize,
    ms: u64,
    cm: &ChannelModel,
    cfg: &DcfConfig,
    is_psm: bool,
    scenario: &Scenario,
    exchanges: &mut [Exchange],
    stations: &mut [Station],
    air: &mut Vec<AirPhase>,
    counters: &mut Counters,
    collect_trace: bool,
    trace: &mut Vec<TraceEvent>,
) -> bool {
    let positions = &scenario.positions;
    let (source, dest, kind, phase_start) = {
        let ex = &exchanges[ei];
        let kind = ex.plan[ex.next_phase];
        (ex.source, ex.dest, kind, ms - kind.slots())
    };
    let tx_node = if kind.dest_transmits() { dest } else { source };
    let rx_node = if kind.dest_transmits() { source } else { dest };

    let us = kind.slots() * SLOT_US;
    stations[tx_node as usize].tx_us += us;

    // Receiver availability: asleep, or held by another exchange.
    let rx_busy = stations[rx_node as usize].exchange.is_some_and(|e| e != ei);
    let rx_asleep = is_psm
        && !stations[rx_node as usize].announced_rx
        && !stations[rx_node as usize].announced_tx
        && !matches!(kind, PhaseKind::Atim | PhaseKind::AtimAck);
    let mut ok = !(rx_busy || rx_asleep);
    let mut near_caused = false;

    if ok {
        stations[rx_node as usize].rx_us += us;
        let threshold = if kind.is_data() {
            cm.gamma_d
        } else {
            cm.gamma_s
        };
        ok = piecewise_sinr_pass(
            tx_node,
            rx_node,
            phase_start,
            ms,
            threshold,
            cm,
            None,
            positions,
            air,
            ei,
        );
        if !ok && kind.is_data() {
            if let Some(r) = cfg.classify_radius {
                near_caused = piecewise_sinr_pass(
                    tx_node,
                    rx_node,
                    phase_start,
                    ms,
                    threshold,
                    cm,
                    Some(r),
                    positions,
                    air,
                    ei,
                );
            }
        }
    }

    if kind == PhaseKind::Data {
        counters.sent += 1;
        if ok {
            counters.delivered += 1;
            counters.delivered_meters += scenario.links[source as usize].distance;
        } else if !(rx_busy || rx_asleep) {
            counters.collided += 1;
            if near_caused {
                counters.near_caused += 1;
            }
        }
        if collect_trace {
            let outcome = if ok {
                Outcome::Delivered
            } else if rx_busy || rx_asleep {
                Outcome::NoReceiver
            } else {
                Outcome::Collided
            };
            trace.push(TraceEvent {
                time_us: phase_start * SLOT_US,
                node: NodeId(source),
                kind: EventKind::DataTx,
                slot: None,
                peer: Some(NodeId(dest)),
                outcome: Some(outcome),
            });
        }
    } else if kind == PhaseKind::Atim && collect_trace {
        trace.push(TraceEvent {
            time_us: phase_start * SLOT_US,
            node: NodeId(source),
            kind: EventKind::AtimTx,
            slot: None,
            peer: Some(NodeId(dest)),
            outcome: Some(if ok {
                Outcome::Delivered
            } else {
                Outcome::Collided
            }),
        });
    }

    if !ok {
        exchanges[ei].failed = true;
        return true;
    }
    exchanges[ei].next_phase += 1;
    if exchanges[ei].next_phase == exchanges[ei].plan.len() {
        return true;
    }
    // The destination is engaged from its first decoded frame on.
    stations[dest as usize].exchange = Some(ei);
    let next = exchanges[ei].plan[exchanges[ei].next_phase];
    let tx = if next.dest_transmits() { dest } else { source };
    exchanges[ei].phase_end = ms + next.slots();
    air.push(AirPhase {
        tx,
        start: ms,
        end: ms + next.slots(),
        exchange: ei,
    });
    // The CTS extends virtual carrier sense around the receiver.
    if next == PhaseKind::Cts {
        let end = exchanges[ei].planned_end;
        for j in 0..positions.len() {
            if j as u32 != source
                && j as u32 != dest
                && positions[j].distance(&positions[dest as usize]) <= cfg.r_c
            {
                stations[j].nav_until = stations[j].nav_until.max(end);
            }
        }
    }
    false
}

/// SINR test across every sub-interval of transmissions overlapping the
/// phase window. With `exclude_within`, interferers closer than that radius
/// to the receiver are left out (used to classify hidden-node failures).
#[allow(clippy::too_many_arguments)]
fn piecewise_sinr_pass(
    tx: u32,
    rx: u32,
    start: u64,
    end: u64,
    threshold: f64,
    cm: &ChannelModel,
    exclude_within: Option<f64>,
    positions: &[crate::geometry::Position],
    air: &[AirPhase],
    ei: usize,
) -> bool {
    let rx_pos = positions[rx as usize];
    // Half-duplex: if the receiver itself was on the air during any part of
    // the window, the reception is lost outright.
    if air
        .iter()
        .any(|p| p.exchange != ei && p.tx == rx && p.start < end && p.end > start)
    {
        return false;
    }
    let overlapping: Vec<&AirPhase> = air
        .iter()
        .filter(|p| {
            p.exchange != ei
                && p.start < end
                && p.end > start
                && p.tx != tx
                && exclude_within.is_none_or(|r| positions[p.tx as usize].distance(&rx_pos) > r)
        })
        .collect();

    let mut points: Vec<u64> = vec![start];
    for p in &overlapping {
        if p.start > start && p.start < end {
            points.push(p.start);
        }
        if p.end > start && p.end < end {
            points.push(p.end);
        }
    }
    points.sort_unstable();
    points.dedup();

    for &t in &points {
        let mut txs = TransmissionVector::new();
        txs.activate(NodeId(tx), cm.p_d).unwrap();
        for p in &overlapping {
            if p.start <= t && t < p.end && !txs.is_active(NodeId(p.tx)) {
                txs.activate(NodeId(p.tx), cm.p_d).unwrap();
            }
        }
        let gamma = sinr(rx_pos, NodeId(tx), &txs, positions, cm).unwrap();
        if gamma < threshold {
            return false;
        }
    }
    true
}

/// Success and failure bookkeeping once an exchange leaves the air.
fn settle_exchange(ex: &Exchange, cfg: &DcfConfig, stations: &mut [Station], rng: &mut impl Rng) {
    let src = ex.source as usize;
    let is_atim = ex.plan[0] == PhaseKind::Atim;
    if !ex.failed {
        if is_atim {
            stations[src].announced_tx = true;
            stations[ex.dest as usize].announced_rx = true;
        } else {
            stations[src].queue = stations[src].queue.saturating_sub(1);
        }
        stations[src].cw = cfg.cw_min;
        stations[src].retries = 0;
        stations[src].backoff = None;
        stations[src].idle_run = 0;
        return;
    }
    stations[src].retries += 1;
    stations[src].cw = ((stations[src].cw + 1) * 2 - 1).min(cfg.cw_max);
    stations[src].idle_run = 0;
    stations[src].backoff = None;
    if stations[src].retries > cfg.retry_limit {
        // Drop the head packet.
        stations[src].queue = stations[src].queue.saturating_sub(1);
        stations[src].retries = 0;
        stations[src].cw = cfg.cw_min;
    }
    let _ = rng;
}
