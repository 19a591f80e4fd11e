//! Per-node radio-mode time ledger and energy accounting.
//!
//! All times are integer microseconds so that per-node mode times sum to
//! the simulated duration exactly.

use crate::channel::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RadioMode {
    Transmit,
    Receive,
    Idle,
    Sleep,
}

impl RadioMode {
    pub const ALL: [RadioMode; 4] = [
        RadioMode::Transmit,
        RadioMode::Receive,
        RadioMode::Idle,
        RadioMode::Sleep,
    ];

    fn index(self) -> usize {
        match self {
            RadioMode::Transmit => 0,
            RadioMode::Receive => 1,
            RadioMode::Idle => 2,
            RadioMode::Sleep => 3,
        }
    }
}

/// Accumulated microseconds per node per radio mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RadioLedger {
    micros: Vec<[u64; 4]>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum LedgerError {
    #[error("node {node} mode times sum to {got} µs, expected {expected} µs")]
    Incomplete { node: u32, got: u64, expected: u64 },
}

impl RadioLedger {
    pub fn new(nodes: usize) -> Self {
        Self {
            micros: vec![[0; 4]; nodes],
        }
    }

    pub fn nodes(&self) -> usize {
        self.micros.len()
    }

    pub fn add(&mut self, node: NodeId, mode: RadioMode, us: u64) {
        self.micros[node.index()][mode.index()] += us;
    }

    pub fn get(&self, node: NodeId, mode: RadioMode) -> u64 {
        self.micros[node.index()][mode.index()]
    }

    pub fn total(&self, node: NodeId) -> u64 {
        self.micros[node.index()].iter().sum()
    }

    /// Awake time: everything but sleep.
    pub fn awake(&self, node: NodeId) -> u64 {
        self.total(node) - self.get(node, RadioMode::Sleep)
    }

    /// Every node's mode times must sum to the duration exactly.
    pub fn validate(&self, duration_us: u64) -> Result<(), LedgerError> {
        for (i, modes) in self.micros.iter().enumerate() {
            let got: u64 = modes.iter().sum();
            if got != duration_us {
                return Err(LedgerError::Incomplete {
                    node: i as u32,
                    got,
                    expected: duration_us,
                });
            }
        }
        Ok(())
    }
}

/// Radio power draw per mode, in watts. The transmit draw depends on the RF
/// power level, so it is tabulated per node.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyModel {
    pub sleep_w: f64,
    pub idle_w: f64,
    pub receive_w: f64,
    /// Per-node transmit-mode draw.
    pub transmit_w: Vec<f64>,
}

/// Transmit-mode draw for an RF output power: 2.25 W at 100 mW scaling
/// linearly to 3.15 W at 180 mW.
pub fn transmit_draw_w(rf_power_w: f64) -> f64 {
    let frac = ((rf_power_w - 0.1) / 0.08).clamp(0.0, 1.0);
    2.25 + 0.9 * frac
}

impl EnergyModel {
    /// Sleep 75 mW, receive/idle 1.15 W, transmit per node.
    pub fn standard(transmit_rf_w: &[f64]) -> Self {
        Self {
            sleep_w: 0.075,
            idle_w: 1.15,
            receive_w: 1.15,
            transmit_w: transmit_rf_w.iter().map(|&p| transmit_draw_w(p)).collect(),
        }
    }

    fn mode_power(&self, node: usize, mode: RadioMode) -> f64 {
        match mode {
            RadioMode::Transmit => self.transmit_w[node],
            RadioMode::Receive => self.receive_w,
            RadioMode::Idle => self.idle_w,
            RadioMode::Sleep => self.sleep_w,
        }
    }
}

/// Joules per node and in total: sum over modes of time x power.
pub fn account_energy(ledger: &RadioLedger, model: &EnergyModel) -> (Vec<f64>, f64) {
    let mut per_node = Vec::with_capacity(ledger.nodes());
    let mut total = 0.0;
    for i in 0..ledger.nodes() {
        let mut joules = 0.0;
        for mode in RadioMode::ALL {
            let us = ledger.get(NodeId(i as u32), mode);
            joules += us as f64 * 1e-6 * model.mode_power(i, mode);
        }
        per_node.push(joules);
        total += joules;
    }
    (per_node, total)
}
