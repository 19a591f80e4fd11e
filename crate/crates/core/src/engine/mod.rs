//! Deterministic discrete-event simulation: node placement, Poisson
//! traffic, protocol driving, SINR adjudication, energy accounting, and
//! metric computation.

pub mod ledger;
pub mod metrics;
mod pmac_run;
pub mod scenario;
pub mod trace;
pub mod traffic;

pub use ledger::{account_energy, EnergyModel, RadioLedger, RadioMode};
pub use metrics::{compute_metrics, Metrics};
pub use pmac_run::{run_pmac, PmacParams};
pub use scenario::{place_nodes, Link, Scenario};
pub use trace::{write_trace, EventKind, Outcome, TraceEvent};
pub use traffic::{generate_traffic, Arrival};

use crate::channel::ChannelModel;
use crate::rng::SimRng;

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("energy ledger integrity error: {0}")]
    Ledger(String),
}

/// Which MAC scheme a run simulates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    Pmac,
    Dcf,
    Psm,
}

impl std::str::FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pmac" => Ok(Protocol::Pmac),
            "dcf" => Ok(Protocol::Dcf),
            "psm" => Ok(Protocol::Psm),
            other => Err(format!(
                "unknown protocol {other:?} (expected pmac, dcf, or psm)"
            )),
        }
    }
}

impl std::fmt::Display for Protocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Protocol::Pmac => write!(f, "pmac"),
            Protocol::Dcf => write!(f, "dcf"),
            Protocol::Psm => write!(f, "psm"),
        }
    }
}

/// Per-check audit outcomes accumulated during a run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AuditReport {
    pub enabled: bool,
    checks: Vec<(String, bool)>,
}

impl AuditReport {
    pub fn new(enabled: bool) -> Self {
        Self {
            enabled,
            checks: Vec::new(),
        }
    }

    pub fn check(&mut self, name: &str, ok: bool) {
        // One row per check name; a single failure is sticky.
        match self.checks.iter_mut().find(|(n, _)| n == name) {
            Some((_, prev)) => *prev = *prev && ok,
            None => self.checks.push((name.to_string(), ok)),
        }
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|(_, ok)| *ok)
    }

    pub fn results(&self) -> &[(String, bool)] {
        &self.checks
    }
}

/// Everything a single simulation run produces.
#[derive(Debug, Clone)]
pub struct SimResult {
    pub trace: Vec<TraceEvent>,
    pub ledger: RadioLedger,
    pub metrics: Metrics,
    pub energy_per_node: Vec<f64>,
    pub audit: AuditReport,
    /// Engine-specific diagnostic counters.
    pub aux: std::collections::BTreeMap<String, u64>,
}

/// Per-protocol configuration for [`run_simulation`].
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub channel: ChannelModel,
    pub pmac: PmacParams,
    pub dcf: crate::baselines::DcfConfig,
    pub psm: crate::baselines::PsmConfig,
    pub load_pps: f64,
    pub duration_us: u64,
    pub audit: bool,
    pub collect_trace: bool,
}

impl SimConfig {
    pub fn new(channel: ChannelModel, d_m: f64) -> Self {
        Self {
            channel,
            pmac: PmacParams::default(),
            dcf: crate::baselines::DcfConfig::standard(2.0 * d_m),
            psm: crate::baselines::PsmConfig::standard(2.0 * d_m),
            load_pps: 1000.0,
            duration_us: 20_000_000,
            audit: false,
            collect_trace: true,
        }
    }
}

/// Runs one protocol over one scenario, fully reproducible from the seed.
pub fn run_simulation(
    scenario: &Scenario,
    protocol: Protocol,
    config: &SimConfig,
    sim: &SimRng,
) -> Result<SimResult, EngineError> {
    match protocol {
        Protocol::Pmac => run_pmac(
            scenario,
            &config.channel,
            &config.pmac,
            config.load_pps,
            config.duration_us,
            sim,
            config.audit,
            config.collect_trace,
        ),
        Protocol::Dcf => crate::baselines::run_dcf(
            scenario,
            &config.channel,
            &config.dcf,
            config.load_pps,
            config.duration_us,
            sim,
            config.audit,
            config.collect_trace,
        ),
        Protocol::Psm => crate::baselines::run_psm(
            scenario,
            &config.channel,
            &config.psm,
            config.load_pps,
            config.duration_us,
            sim,
            config.audit,
            config.collect_trace,
        ),
    }
}
