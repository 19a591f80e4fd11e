//! Physical-layer model: power-law path gain, SINR at a receiver, and the
//! reserved-disc radius that guarantees the data SINR threshold under the
//! bounded-interference assumption.

use crate::geometry::Position;

/// Node identifier. Regular nodes come first, coordinators after them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "n{}", self.0)
    }
}

/// Channel and radio parameters. Thresholds are stored as linear ratios;
/// configuration layers convert from dB.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    /// Path-gain constant `c` in `h = c * d^-alpha`.
    pub c: f64,
    /// Path-loss exponent, must exceed 2.
    pub alpha: f64,
    /// Background noise power in watts.
    pub n0: f64,
    /// Data transmission power in watts.
    pub p_d: f64,
    /// Control/scheduling transmission power in watts.
    pub p_s: f64,
    /// Minimum SINR for data packets (linear).
    pub gamma_d: f64,
    /// Minimum SINR for control/scheduling packets (linear).
    pub gamma_s: f64,
    /// Reservation factor `c'` bounding out-of-disc interference.
    pub c_prime: f64,
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

impl ChannelModel {
    /// Evaluation defaults: c=1e-4, alpha=3.4, P_d=100 mW, Gamma_d=9 dB,
    /// Gamma_s=6 dB, c'=3. Noise power defaults to 1e-13 W, small enough
    /// that bounded interference dominates it across the usual geometry.
    pub fn default_params() -> Self {
        Self {
            c: 1e-4,
            alpha: 3.4,
            n0: 1e-13,
            p_d: 0.1,
            p_s: 0.1,
            gamma_d: db_to_linear(9.0),
            gamma_s: db_to_linear(6.0),
            c_prime: 3.0,
        }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if self.alpha.is_nan() || self.alpha <= 2.0 {
            return Err(ChannelError::InvalidParameter("alpha must be > 2"));
        }
        if self.c <= 0.0 || self.n0 <= 0.0 || self.p_d <= 0.0 || self.p_s <= 0.0 {
            return Err(ChannelError::InvalidParameter(
                "powers and constants must be > 0",
            ));
        }
        if self.gamma_d <= 0.0 || self.gamma_s <= 0.0 {
            return Err(ChannelError::InvalidParameter(
                "SINR thresholds must be > 0",
            ));
        }
        if self.c_prime < 1.0 {
            return Err(ChannelError::InvalidParameter("c_prime must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ChannelError {
    #[error("path gain undefined for non-positive distance")]
    NonPositiveDistance,
    #[error("transmitter {0} is not active in the transmission vector")]
    TransmitterNotActive(NodeId),
    #[error("node {0} appears more than once in the transmission vector")]
    DuplicateTransmitter(NodeId),
    #[error("link infeasible: SINR threshold unreachable even with zero interference")]
    LinkInfeasible,
    #[error("invalid channel parameter: {0}")]
    InvalidParameter(&'static str),
}

/// Power-law path gain `c * d^-alpha`. Co-located transceivers (d = 0) are
/// unsupported.
pub fn path_gain(d: f64, cm: &ChannelModel) -> Result<f64, ChannelError> {
    if d.is_nan() || d <= 0.0 {
        return Err(ChannelError::NonPositiveDistance);
    }
    Ok(cm.c * d.powf(-cm.alpha))
}

/// The set of simultaneously active transmitters in one time slot, with
/// their transmit powers in watts. Each node appears at most once.
#[derive(Debug, Clone, Default)]
pub struct TransmissionVector {
    active: Vec<(NodeId, f64)>,
}

impl TransmissionVector {
    pub fn new() -> Self {
        Self { active: Vec::new() }
    }

    pub fn activate(&mut self, node: NodeId, power: f64) -> Result<(), ChannelError> {
        if self.active.iter().any(|&(n, _)| n == node) {
            return Err(ChannelError::DuplicateTransmitter(node));
        }
        self.active.push((node, power));
        Ok(())
    }

    pub fn is_active(&self, node: NodeId) -> bool {
        self.active.iter().any(|&(n, _)| n == node)
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, f64)> + '_ {
        self.active.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }
}

/// SINR at position `rx` for the signal from `tx`, given all concurrent
/// transmitters and the node position table:
/// `p_i h_i / (N0 + sum_{k != i} p_k h_k)`.
pub fn sinr(
    rx: Position,
    tx: NodeId,
    txs: &TransmissionVector,
    positions: &[Position],
    cm: &ChannelModel,
) -> Result<f64, ChannelError> {
    let mut signal = None;
    let mut interference = 0.0;
    for (node, power) in txs.iter() {
        let d = positions[node.index()].distance(&rx);
        let gain = path_gain(d, cm)?;
        if node == tx {
            signal = Some(power * gain);
        } else {
            interference += power * gain;
        }
    }
    let signal = signal.ok_or(ChannelError::TransmitterNotActive(tx))?;
    Ok(signal / (cm.n0 + interference))
}

/// How to evaluate the reserved radius.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RadiusMode {
    /// Full expression including the noise term.
    Exact,
    /// High-interference approximation `(c' * Gamma_d)^(1/alpha) * d`.
    Approx,
}

/// Minimum radius of the circular area around a receiver at link distance
/// `d` that must be kept clear of other transmitters so the data SINR
/// threshold holds under the bounded-interference model.
pub fn reserved_radius(d: f64, cm: &ChannelModel, mode: RadiusMode) -> Result<f64, ChannelError> {
    if d.is_nan() || d <= 0.0 {
        return Err(ChannelError::NonPositiveDistance);
    }
    match mode {
        RadiusMode::Approx => Ok((cm.c_prime * cm.gamma_d).powf(1.0 / cm.alpha) * d),
        RadiusMode::Exact => {
            let denom = cm.c * cm.p_d / (d.powf(cm.alpha) * cm.gamma_d) - cm.n0;
            if denom <= 0.0 {
                return Err(ChannelError::LinkInfeasible);
            }
            Ok((cm.c_prime * cm.c * cm.p_d / denom).powf(1.0 / cm.alpha))
        }
    }
}

/// Interference bound at the receiver implied by the reservation factor:
/// everything outside the disc of radius `r` contributes at most
/// `c' * c * P_d / r^alpha`.
pub fn interference_bound(r: f64, cm: &ChannelModel) -> f64 {
    cm.c_prime * cm.c * cm.p_d / r.powf(cm.alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cm() -> ChannelModel {
        ChannelModel::default_params()
    }

    #[test]
    fn path_gain_at_unit_distance_equals_constant() {
        let g = path_gain(1.0, &cm()).unwrap();
        assert!((g - 1e-4).abs() < 1e-18);
    }

    #[test]
    fn path_gain_at_20m_matches_direct_evaluation() {
        // 1e-4 * 20^-3.4 = 3.77136e-9
        let g = path_gain(20.0, &cm()).unwrap();
        let expected = 1e-4 * 20f64.powf(-3.4);
        assert!((g - expected).abs() < 1e-20);
        assert!((g - 3.77136e-9).abs() / 3.77136e-9 < 1e-4);
    }

    #[test]
    fn path_gain_rejects_zero_distance() {
        assert_eq!(
            path_gain(0.0, &cm()),
            Err(ChannelError::NonPositiveDistance)
        );
    }

    #[test]
    fn path_gain_strictly_decreasing_in_distance() {
        let mut prev = f64::INFINITY;
        let mut d = 0.5;
        while d < 500.0 {
            let g = path_gain(d, &cm()).unwrap();
            assert!(g < prev, "gain not decreasing at d={d}");
            prev = g;
            d += 0.5;
        }
    }

    #[test]
    fn sinr_single_transmitter_matches_hand_value() {
        // 0.1 W * (1e-4 * 20^-3.4) / 1e-13 W = 3771.36 (35.8 dB).
        let positions = vec![Position::new(0.0, 0.0), Position::new(20.0, 0.0)];
        let mut txs = TransmissionVector::new();
        txs.activate(NodeId(0), 0.1).unwrap();
        let gamma = sinr(positions[1], NodeId(0), &txs, &positions, &cm()).unwrap();
        let expected = 0.1 * 1e-4 * 20f64.powf(-3.4) / 1e-13;
        assert!((gamma - expected).abs() / expected < 1e-12);
        assert!((gamma - 3771.36).abs() / 3771.36 < 1e-4);
    }

    #[test]
    fn symmetric_interferer_pushes_sinr_just_below_one() {
        // Interferer at the same distance and power as the intended
        // transmitter: noise makes the ratio strictly less than 1.
        let positions = vec![
            Position::new(0.0, 0.0),
            Position::new(40.0, 0.0),
            Position::new(20.0, 0.0),
        ];
        let mut txs = TransmissionVector::new();
        txs.activate(NodeId(0), 0.1).unwrap();
        txs.activate(NodeId(1), 0.1).unwrap();
        let gamma = sinr(positions[2], NodeId(0), &txs, &positions, &cm()).unwrap();
        assert!(gamma < 1.0);
        assert!(gamma > 0.999);
    }

    #[test]
    fn sinr_rejects_inactive_transmitter() {
        let positions = vec![Position::new(0.0, 0.0), Position::new(20.0, 0.0)];
        let txs = TransmissionVector::new();
        let err = sinr(positions[1], NodeId(0), &txs, &positions, &cm());
        assert_eq!(err, Err(ChannelError::TransmitterNotActive(NodeId(0))));
    }

    #[test]
    fn sinr_matches_independent_summation_oracle() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let m = cm();
        for _ in 0..50 {
            let mut positions = vec![Position::new(0.0, 0.0)];
            let rx = Position::new(15.0, 5.0);
            let mut txs = TransmissionVector::new();
            txs.activate(NodeId(0), 0.1).unwrap();
            for i in 1..=5 {
                positions.push(Position::new(
                    rng.random_range(-100.0..100.0),
                    rng.random_range(-100.0..100.0),
                ));
                txs.activate(NodeId(i), rng.random_range(0.05..0.2))
                    .unwrap();
            }
            let got = sinr(rx, NodeId(0), &txs, &positions, &m).unwrap();
            // Brute-force re-summation in a different order.
            let mut interf = 0.0;
            for (node, p) in txs.iter().collect::<Vec<_>>().into_iter().rev() {
                if node != NodeId(0) {
                    let d = positions[node.index()].distance(&rx);
                    interf += p * m.c * d.powf(-m.alpha);
                }
            }
            let sig = 0.1 * m.c * positions[0].distance(&rx).powf(-m.alpha);
            let expected = sig / (m.n0 + interf);
            assert!((got - expected).abs() / expected < 1e-12);
        }
    }

    #[test]
    fn removing_an_interferer_never_decreases_sinr() {
        let positions = vec![
            Position::new(0.0, 0.0),
            Position::new(30.0, 10.0),
            Position::new(-25.0, 40.0),
            Position::new(18.0, 0.0),
        ];
        let rx = positions[3];
        let mut full = TransmissionVector::new();
        full.activate(NodeId(0), 0.1).unwrap();
        full.activate(NodeId(1), 0.1).unwrap();
        full.activate(NodeId(2), 0.1).unwrap();
        let with_all = sinr(rx, NodeId(0), &full, &positions, &cm()).unwrap();
        let mut fewer = TransmissionVector::new();
        fewer.activate(NodeId(0), 0.1).unwrap();
        fewer.activate(NodeId(1), 0.1).unwrap();
        let with_fewer = sinr(rx, NodeId(0), &fewer, &positions, &cm()).unwrap();
        assert!(with_fewer >= with_all);
    }

    #[test]
    fn duplicate_transmitter_rejected() {
        let mut txs = TransmissionVector::new();
        txs.activate(NodeId(3), 0.1).unwrap();
        assert_eq!(
            txs.activate(NodeId(3), 0.2),
            Err(ChannelError::DuplicateTransmitter(NodeId(3)))
        );
    }

    #[test]
    fn approx_radius_with_unit_factors_equals_link_distance() {
        let mut m = cm();
        m.c_prime = 1.0;
        m.gamma_d = 1.0;
        let r = reserved_radius(17.0, &m, RadiusMode::Approx).unwrap();
        assert!((r - 17.0).abs() < 1e-12);
    }

    #[test]
    fn approx_radius_matches_table_parameters() {
        // (3 * 10^0.9)^(1/3.4) * 20 = 50.8236
        let r = reserved_radius(20.0, &cm(), RadiusMode::Approx).unwrap();
        let expected = (3.0 * 10f64.powf(0.9)).powf(1.0 / 3.4) * 20.0;
        assert!((r - expected).abs() < 1e-9);
        assert!((r - 50.8236).abs() < 1e-3);
    }

    #[test]
    fn exact_and_approx_agree_when_interference_dominates_noise() {
        let m = cm();
        let mut d = 1.0;
        while d < 60.0 {
            let r_approx = reserved_radius(d, &m, RadiusMode::Approx).unwrap();
            let i_hat = interference_bound(r_approx, &m);
            if i_hat >= 100.0 * m.n0 {
                let r_exact = reserved_radius(d, &m, RadiusMode::Exact).unwrap();
                let rel = (r_exact - r_approx).abs() / r_approx;
                assert!(rel < 0.01, "d={d}: exact {r_exact} vs approx {r_approx}");
            }
            d += 0.25;
        }
    }

    #[test]
    fn exact_radius_rejects_infeasible_link() {
        let mut m = cm();
        m.n0 = 1.0; // absurd noise floor makes every link infeasible
        assert_eq!(
            reserved_radius(20.0, &m, RadiusMode::Exact),
            Err(ChannelError::LinkInfeasible)
        );
    }

    #[test]
    fn interference_at_bound_still_meets_threshold() {
        // If total interference stays at or below the bound I_hat(d), the
        // SINR at the receiver stays at or above Gamma_d.
        let m = cm();
        for d in [5.0, 10.0, 20.0] {
            let r = reserved_radius(d, &m, RadiusMode::Exact).unwrap();
            let i_hat = interference_bound(r, &m);
            let gamma = m.c * m.p_d / d.powf(m.alpha) / (m.n0 + i_hat);
            assert!(
                gamma >= m.gamma_d * (1.0 - 1e-9),
                "d={d}: gamma {gamma} below threshold {}",
                m.gamma_d
            );
        }
    }

    proptest! {
        #[test]
        fn approx_radius_is_linear_in_distance(d in 0.1f64..500.0) {
            let m = cm();
            let slope = (m.c_prime * m.gamma_d).powf(1.0 / m.alpha);
            let r = reserved_radius(d, &m, RadiusMode::Approx).unwrap();
            prop_assert!((r / d - slope).abs() <= slope * 1e-12);
        }

        #[test]
        fn sinr_monotone_in_interferer_removal(
            xs in proptest::collection::vec((-80f64..80.0, -80f64..80.0), 2..6)
        ) {
            let m = cm();
            let mut positions = vec![Position::new(0.0, 0.0), Position::new(12.0, 3.0)];
            let mut txs = TransmissionVector::new();
            txs.activate(NodeId(0), 0.1).unwrap();
            for (i, (x, y)) in xs.iter().enumerate() {
                // Keep interferers away from the receiver to avoid d=0.
                let p = Position::new(x + 200.0, *y);
                positions.push(p);
                txs.activate(NodeId(2 + i as u32), 0.1).unwrap();
            }
            let rx = positions[1];
            let full = sinr(rx, NodeId(0), &txs, &positions, &m).unwrap();
            // Drop the last interferer.
            let mut reduced = TransmissionVector::new();
            for (n, p) in txs.iter().take(txs.len() - 1) {
                reduced.activate(n, p).unwrap();
            }
            let less = sinr(rx, NodeId(0), &reduced, &positions, &m).unwrap();
            prop_assert!(less >= full);
        }
    }
}
