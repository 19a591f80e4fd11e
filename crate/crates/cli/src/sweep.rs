//! Experiment sweeps over protocol grids, loads, and topologies, with raw
//! and aggregated CSV output.
//!
//! Cells run in parallel; CSV rows are assembled in deterministic grid
//! order regardless of completion order, so identical configurations and
//! seeds reproduce byte-identical files.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use pmacsim_core::contention::{
    expected_delay, expected_successes, monte_carlo_contention, ContentionParams,
};
use pmacsim_core::engine::{place_nodes, run_simulation, Metrics, Protocol};
use pmacsim_core::rng::{streams, SimRng};

use crate::config::ExperimentConfig;

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error("cell {protocol} param={param} load={load} n={n} rep={rep}: {source}")]
    Cell {
        protocol: Protocol,
        param: f64,
        load: f64,
        n: usize,
        rep: u32,
        source: pmacsim_core::engine::EngineError,
    },
    #[error("scenario generation failed: {0}")]
    Scenario(pmacsim_core::engine::scenario::ScenarioError),
    #[error("io error on {0}: {1}")]
    Io(String, std::io::Error),
}

/// What a sweep varies besides the load.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    /// Throughput/energy/collisions vs offered load (the comparison
    /// figures). DCF sweeps its carrier-sense grid and PSM its ATIM grid so
    /// the best baseline per load point can be read off the aggregate.
    Load,
    /// Performance vs node count at the saturation load.
    Density,
}

/// One `(grid point, replication)` cell result.
#[derive(Debug, Clone)]
pub struct ResultRow {
    pub protocol: Protocol,
    /// Name of the protocol-specific swept parameter.
    pub param_name: &'static str,
    pub param_value: f64,
    pub load_pps: f64,
    pub n: usize,
    pub replication: u32,
    pub seed: u64,
    pub metrics: Metrics,
}

const RAW_HEADER: &str = "protocol,param_name,param_value,load_pps,n,replication,seed,\
throughput_pm_s,energy_per_packet_j,collision_rate,sent,delivered,collided,total_energy_j";

const AGG_HEADER: &str = "protocol,param_name,param_value,load_pps,n,replications,\
throughput_mean,throughput_se,energy_mean,energy_se,collision_mean,collision_se";

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_string(), |x| x.to_string())
}

pub fn raw_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(RAW_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.protocol,
            r.param_name,
            r.param_value,
            r.load_pps,
            r.n,
            r.replication,
            r.seed,
            r.metrics.throughput,
            fmt_opt(r.metrics.energy_per_packet),
            r.metrics.collision_rate,
            r.metrics.sent,
            r.metrics.delivered,
            r.metrics.collided,
            r.metrics.total_energy,
        );
    }
    out
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Aggregates replications per grid point, in first-appearance order.
pub fn aggregate_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(AGG_HEADER);
    out.push('\n');
    let mut seen: Vec<(Protocol, &'static str, f64, f64, usize)> = Vec::new();
    for r in rows {
        let key = (r.protocol, r.param_name, r.param_value, r.load_pps, r.n);
        if seen.contains(&key) {
            continue;
        }
        seen.push(key);
        let group: Vec<&ResultRow> = rows
            .iter()
            .filter(|x| (x.protocol, x.param_name, x.param_value, x.load_pps, x.n) == key)
            .collect();
        let (tp_m, tp_se) = mean_se(
            &group
                .iter()
                .map(|x| x.metrics.throughput)
                .collect::<Vec<_>>(),
        );
        let energies: Vec<f64> = group
            .iter()
            .filter_map(|x| x.metrics.energy_per_packet)
            .collect();
        let (en_m, en_se) = if energies.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            mean_se(&energies)
        };
        let (cl_m, cl_se) = mean_se(
            &group
                .iter()
                .map(|x| x.metrics.collision_rate)
                .collect::<Vec<_>>(),
        );
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            key.0,
            key.1,
            key.2,
            key.3,
            key.4,
            group.len(),
            tp_m,
            tp_se,
            en_m,
            en_se,
            cl_m,
            cl_se,
        );
    }
    out
}

struct Cell {
    protocol: Protocol,
    param_name: &'static str,
    param_value: f64,
    load: f64,
    n: usize,
    rep: u32,
}

/// Runs the full grid x replication sweep. Replication `r` of any grid
/// point reuses topology seed `seed + r`, so every protocol and parameter
/// faces the same ten node placements.
pub fn run_sweep(
    cfg: &ExperimentConfig,
    kind: SweepKind,
    parallelism: usize,
) -> Result<Vec<ResultRow>, SweepError> {
    let mut cells: Vec<Cell> = Vec::new();
    let n_values: Vec<usize> = match kind {
        SweepKind::Load => vec![cfg.nodes],
        SweepKind::Density => cfg.n_grid.clone(),
    };
    let loads: Vec<f64> = match kind {
        SweepKind::Load => cfg.loads.clone(),
        SweepKind::Density => vec![*cfg.loads.last().unwrap()],
    };
    for &n in &n_values {
        for &load in &loads {
            for &protocol in &cfg.protocols {
                let params: Vec<(&'static str, f64)> = match protocol {
                    Protocol::Pmac => vec![("h_q", cfg.pmac.h * 10.0 + cfg.pmac.q)],
                    Protocol::Dcf => cfg.r_c_grid.iter().map(|&f| ("r_c_over_d_m", f)).collect(),
                    Protocol::Psm => cfg
                        .atim_grid_us
                        .iter()
                        .map(|&a| ("atim_us", a as f64))
                        .collect(),
                };
                for (param_name, param_value) in params {
                    for rep in 0..cfg.replications {
                        cells.push(Cell {
                            protocol,
                            param_name,
                            param_value,
                            load,
                            n,
                            rep,
                        });
                    }
                }
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .expect("thread pool");
    let results: Vec<Result<ResultRow, SweepError>> =
        pool.install(|| cells.par_iter().map(|cell| run_cell(cfg, cell)).collect());
    results.into_iter().collect()
}

fn run_cell(cfg: &ExperimentConfig, cell: &Cell) -> Result<ResultRow, SweepError> {
    let seed = cfg.seed + cell.rep as u64;
    let sim_rng = SimRng::new(seed);
    let scenario = place_nodes(
        cell.n,
        cfg.arena_side(),
        cfg.arena_side(),
        cfg.d_m,
        &sim_rng,
    )
    .map_err(SweepError::Scenario)?;
    let mut sim_cfg = cfg.sim_config(cell.load);
    match cell.protocol {
        Protocol::Pmac => {}
        Protocol::Dcf => sim_cfg.dcf.r_c = cell.param_value * cfg.d_m,
        Protocol::Psm => {
            sim_cfg.psm.atim_us = cell.param_value as u64;
            // best-DCF's carrier-sense range carries over to PSM's DCF core.
            sim_cfg.psm.dcf.r_c = sim_cfg.dcf.r_c;
        }
    }
    let result = run_simulation(&scenario, cell.protocol, &sim_cfg, &sim_rng).map_err(|e| {
        SweepError::Cell {
            protocol: cell.protocol,
            param: cell.param_value,
            load: cell.load,
            n: cell.n,
            rep: cell.rep,
            source: e,
        }
    })?;
    Ok(ResultRow {
        protocol: cell.protocol,
        param_name: cell.param_name,
        param_value: cell.param_value,
        load_pps: cell.load,
        n: cell.n,
        replication: cell.rep,
        seed,
        metrics: result.metrics,
    })
}

const CONTENTION_HEADER: &str =
    "n_prime,w,t_cp_us,q_analytic,delay_analytic_us,q_mc,q_mc_se,delay_mc_us,delay_mc_se";

/// Contention-model curves: analytic expected successes and request delay
/// over the (N', W, T_cp) grid, optionally with the Monte Carlo oracle.
pub fn contention_csv(
    n_primes: &[u32],
    windows: &[u32],
    t_cps_us: &[f64],
    replications: u32,
    seed: Option<u64>,
) -> String {
    let mut out = String::from(CONTENTION_HEADER);
    out.push('\n');
    for &n in n_primes {
        for &w in windows {
            for &t_cp in t_cps_us {
                let params = ContentionParams::new(n, w, t_cp);
                let q = expected_successes(&params).unwrap_or(0.0);
                let d = expected_delay(&params).map_or(f64::INFINITY, |d| d);
                let (q_mc, q_se, d_mc, d_se) = match seed {
                    Some(s) => {
                        let mut rng = SimRng::new(s)
                            .stream(streams::ORACLE_BASE + n as u64 * 7919 + w as u64);
                        let est = monte_carlo_contention(&params, replications, &mut rng);
                        (est.q_mean, est.q_stderr, est.d_mean, est.d_stderr)
                    }
                    None => (f64::NAN, f64::NAN, f64::NAN, f64::NAN),
                };
                let _ = writeln!(out, "{n},{w},{t_cp},{q},{d},{q_mc},{q_se},{d_mc},{d_se}");
            }
        }
    }
    out
}

/// The per-load best value of a swept baseline parameter, read off rows.
pub fn best_param_per_load(rows: &[ResultRow], protocol: Protocol) -> Vec<(f64, f64)> {
    let mut loads: Vec<f64> = rows
        .iter()
        .filter(|r| r.protocol == protocol)
        .map(|r| r.load_pps)
        .collect();
    loads.sort_by(|a, b| a.partial_cmp(b).unwrap());
    loads.dedup();
    loads
        .into_iter()
        .map(|load| {
            let mut by_param: Vec<(f64, f64)> = Vec::new();
            for r in rows
                .iter()
                .filter(|r| r.protocol == protocol && r.load_pps == load)
            {
                match by_param.iter_mut().find(|(p, _)| *p == r.param_value) {
                    Some((_, acc)) => *acc += r.metrics.throughput,
                    None => by_param.push((r.param_value, r.metrics.throughput)),
                }
            }
            let best = by_param
                .iter()
                .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .map(|&(p, _)| p)
                .unwrap_or(f64::NAN);
            (load, best)
        })
        .collect()
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), SweepError> {
    std::fs::write(path, contents).map_err(|e| SweepError::Io(path.display().to_string(), e))
}
