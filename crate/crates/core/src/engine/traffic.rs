//! Poisson packet generation.

use rand::Rng;

use crate::channel::NodeId;
use crate::engine::scenario::Link;
use crate::rng::{streams, SimRng};

/// A packet arrival at a source node's queue.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arrival {
    pub time_us: u64,
    pub source: NodeId,
}

/// Independent Poisson streams per source, each at `load / |sources|`
/// packets per second, merged in time order. The aggregate rate equals the
/// network load.
pub fn generate_traffic(
    links: &[Link],
    load_pps: f64,
    duration_us: u64,
    sim: &SimRng,
) -> Vec<Arrival> {
    let mut arrivals = Vec::new();
    if load_pps <= 0.0 || links.is_empty() {
        return arrivals;
    }
    let per_source = load_pps / links.len() as f64;
    let mean_gap_us = 1e6 / per_source;
    for link in links {
        let mut rng = sim.stream(streams::TRAFFIC_BASE + link.source.0 as u64);
        let mut t = 0.0f64;
        loop {
            // Exponential inter-arrival via inverse transform.
            let u: f64 = rng.random();
            t += -mean_gap_us * (1.0 - u).ln();
            if t >= duration_us as f64 {
                break;
            }
            arrivals.push(Arrival {
                time_us: t as u64,
                source: link.source,
            });
        }
    }
    arrivals.sort_by_key(|a| (a.time_us, a.source));
    arrivals
}
