//! Hot-path benchmarks: geometry lookup, SINR evaluation, the contention
//! oracle, and short end-to-end protocol runs.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use pmacsim_core::channel::{sinr, ChannelModel, NodeId, TransmissionVector};
use pmacsim_core::contention::{monte_carlo_contention, ContentionParams};
use pmacsim_core::engine::{place_nodes, run_simulation, Protocol, SimConfig};
use pmacsim_core::geometry::{build_hex_tiling, Position};
use pmacsim_core::rng::SimRng;

fn geometry_benchmarks(c: &mut Criterion) {
    let map = build_hex_tiling(120.0, 120.0, 20.0);
    let points: Vec<Position> = (0..256)
        .map(|i| {
            let t = i as f64 / 256.0;
            Position::new(1.0 + 118.0 * t, 1.0 + 118.0 * (1.0 - t))
        })
        .collect();
    c.bench_function("hex_assign_cell_256_points", |b| {
        b.iter(|| {
            for p in &points {
                black_box(map.assign_cell(*p).unwrap());
            }
        })
    });
}

fn sinr_benchmarks(c: &mut Criterion) {
    let cm = ChannelModel::default_params();
    let positions: Vec<Position> = (0..32)
        .map(|i| Position::new((i % 8) as f64 * 15.0, (i / 8) as f64 * 15.0))
        .collect();
    let mut txs = TransmissionVector::new();
    for i in (0..32).step_by(3) {
        txs.activate(NodeId(i), 0.1).unwrap();
    }
    let rx = Position::new(37.0, 22.0);
    c.bench_function("sinr_11_transmitters", |b| {
        b.iter(|| black_box(sinr(rx, NodeId(0), &txs, &positions, &cm).unwrap()))
    });
}

fn contention_benchmarks(c: &mut Criterion) {
    let params = ContentionParams::new(20, 32, 2000.0);
    c.bench_function("contention_oracle_1000_reps", |b| {
        b.iter_batched(
            || SimRng::new(5).stream(0),
            |mut rng| black_box(monte_carlo_contention(&params, 1000, &mut rng)),
            BatchSize::SmallInput,
        )
    });
}

fn engine_benchmarks(c: &mut Criterion) {
    let sim = SimRng::new(11);
    let scenario = place_nodes(30, 120.0, 120.0, 20.0, &sim).unwrap();
    let mut cfg = SimConfig::new(ChannelModel::default_params(), 20.0);
    cfg.duration_us = 1_000_000;
    cfg.load_pps = 2000.0;
    cfg.collect_trace = false;

    let mut group = c.benchmark_group("one_second_run_30_nodes");
    group.sample_size(10);
    for protocol in [Protocol::Pmac, Protocol::Dcf, Protocol::Psm] {
        group.bench_function(protocol.to_string(), |b| {
            b.iter(|| black_box(run_simulation(&scenario, protocol, &cfg, &sim).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    geometry_benchmarks,
    sinr_benchmarks,
    contention_benchmarks,
    engine_benchmarks
);
criterion_main!(benches);
