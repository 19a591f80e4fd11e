//! Baseline tuning sweeps: the carrier-sense range (DCF) or ATIM window
//! size (PSM) that maximizes mean throughput defines best-DCF / best-PSM.

use crate::channel::ChannelModel;
use crate::engine::scenario::Scenario;
use crate::engine::{EngineError, Metrics};
use crate::rng::SimRng;

use super::{run_dcf, run_psm, DcfConfig, PsmConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TuneScheme {
    /// Sweep the carrier-sense range, meters.
    Dcf,
    /// Sweep the ATIM window, µs.
    Psm,
}

/// One grid point of a tuning sweep.
#[derive(Debug, Clone)]
pub struct TunePoint {
    /// The swept parameter (meters for DCF, µs for PSM).
    pub value: f64,
    pub mean_throughput: f64,
    pub runs: Vec<Metrics>,
}

/// Runs the scheme across the parameter grid and topologies, returning the
/// throughput-maximizing value with the full per-point table. Ties go to
/// the smaller parameter.
#[allow(clippy::too_many_arguments)]
pub fn tune_best(
    scheme: TuneScheme,
    grid: &[f64],
    scenarios: &[(Scenario, SimRng)],
    cm: &ChannelModel,
    base_dcf: &DcfConfig,
    base_psm: &PsmConfig,
    load_pps: f64,
    duration_us: u64,
) -> Result<(f64, Vec<TunePoint>), EngineError> {
    if grid.is_empty() {
        return Err(EngineError::Config("tuning grid must not be empty".into()));
    }
    let mut points = Vec::with_capacity(grid.len());
    for &value in grid {
        let mut runs = Vec::with_capacity(scenarios.len());
        for (scenario, sim) in scenarios {
            let result = match scheme {
                TuneScheme::Dcf => {
                    let cfg = DcfConfig {
                        r_c: value,
                        ..base_dcf.clone()
                    };
                    run_dcf(scenario, cm, &cfg, load_pps, duration_us, sim, false, false)?
                }
                TuneScheme::Psm => {
                    let cfg = PsmConfig {
                        atim_us: value as u64,
                        ..base_psm.clone()
                    };
                    run_psm(scenario, cm, &cfg, load_pps, duration_us, sim, false, false)?
                }
            };
            runs.push(result.metrics);
        }
        let mean_throughput = runs.iter().map(|m| m.throughput).sum::<f64>() / runs.len() as f64;
        points.push(TunePoint {
            value,
            mean_throughput,
            runs,
        });
    }
    let best = points
        .iter()
        .max_by(|a, b| {
            a.mean_throughput
                .partial_cmp(&b.mean_throughput)
                .unwrap()
                .then(b.value.partial_cmp(&a.value).unwrap())
        })
        .unwrap()
        .value;
    Ok((best, points))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::place_nodes;

    #[test]
    fn single_point_grid_returns_that_point() {
        let cm = ChannelModel::default_params();
        let sim = SimRng::new(3);
        let scenario = place_nodes(6, 60.0, 60.0, 20.0, &sim).unwrap();
        let (best, points) = tune_best(
            TuneScheme::Dcf,
            &[40.0],
            &[(scenario, sim)],
            &cm,
            &DcfConfig::standard(40.0),
            &PsmConfig::standard(40.0),
            200.0,
            1_000_000,
        )
        .unwrap();
        assert_eq!(best, 40.0);
        assert_eq!(points.len(), 1);
        assert_eq!(points[0].runs.len(), 1);
    }

    #[test]
    fn empty_grid_rejected() {
        let cm = ChannelModel::default_params();
        assert!(tune_best(
            TuneScheme::Dcf,
            &[],
            &[],
            &cm,
            &DcfConfig::standard(40.0),
            &PsmConfig::standard(40.0),
            100.0,
            1_000_000,
        )
        .is_err());
    }
}
