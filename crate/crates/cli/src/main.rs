//! `pmacsim`: run MAC-layer simulations, sweeps, contention-model curves,
//! and plots. Exit code 2 flags configuration/validation problems, 1
//! runtime failures.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pmacsim_cli::{
    aggregate_csv, best_param_per_load, contention_csv, emit_plots, parse_config, raw_csv,
    run_sweep, ExperimentConfig, FigureKind, SweepKind,
};
use pmacsim_core::engine::{place_nodes, run_simulation, write_trace, Protocol, RadioMode};
use pmacsim_core::rng::SimRng;
use pmacsim_core::NodeId;

#[derive(Parser)]
#[command(
    name = "pmacsim",
    version,
    about = "Wireless MAC simulator: coordinated scheduling vs 802.11 DCF/PSM"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment configuration file (flat key = value).
    #[arg(long, env = "PMACSIM_CONFIG")]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long, env = "PMACSIM_SEED")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, env = "PMACSIM_OUT", default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write its metrics, radio ledger, and trace.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Which MAC to simulate.
        #[arg(long, env = "PMACSIM_PROTOCOL", default_value = "pmac")]
        protocol: Protocol,
        /// Offered aggregate load in packets per second.
        #[arg(long)]
        load: Option<f64>,
        /// Run the per-frame protocol audits.
        #[arg(long)]
        audit: bool,
    },
    /// Run the full grid x replication sweep and write raw/aggregated CSV.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Worker threads for sweep cells.
        #[arg(long, env = "PMACSIM_PARALLEL", default_value_t = 4)]
        parallel: usize,
        /// Sweep the load grid, or node density at the top load.
        #[arg(long, default_value = "load")]
        kind: String,
    },
    /// Contention-model curves over the (N', W, T_cp) grid.
    Contention {
        #[command(flatten)]
        common: CommonArgs,
        /// Also run the mini-slot Monte Carlo oracle per grid point.
        #[arg(long)]
        with_mc: bool,
        /// Oracle replications per grid point.
        #[arg(long, default_value_t = 10_000)]
        replications: u32,
    },
    /// Render figures from a sweep or contention CSV.
    Plot {
        /// Input CSV (aggregated sweep, or contention curves).
        #[arg(long)]
        csv: PathBuf,
        /// throughput | energy | collision | density | contention
        #[arg(long)]
        kind: FigureKind,
        #[arg(long, env = "PMACSIM_OUT", default_value = "out")]
        out: PathBuf,
    },
}

fn load_config(common: &CommonArgs) -> Result<ExperimentConfig, pmacsim_cli::ConfigError> {
    let mut cfg = match &common.config {
        Some(path) => parse_config(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn ensure_out(dir: &PathBuf) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(MainError::Validation(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(2)
        }
        Err(MainError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

enum MainError {
    Validation(String),
    Runtime(String),
}

impl From<pmacsim_cli::ConfigError> for MainError {
    fn from(e: pmacsim_cli::ConfigError) -> Self {
        MainError::Validation(e.to_string())
    }
}

impl From<std::io::Error> for MainError {
    fn from(e: std::io::Error) -> Self {
        MainError::Runtime(e.to_string())
    }
}

fn run(cli: Cli) -> Result<(), MainError> {
    match cli.command {
        Command::Simulate {
            common,
            protocol,
            load,
            audit,
        } => {
            let cfg = load_config(&common)?;
            ensure_out(&common.out)?;
            let sim_rng = SimRng::new(cfg.seed);
            let scenario = place_nodes(
                cfg.nodes,
                cfg.arena_side(),
                cfg.arena_side(),
                cfg.d_m,
                &sim_rng,
            )
            .map_err(|e| MainError::Validation(e.to_string()))?;
            let mut sim_cfg = cfg.sim_config(load.unwrap_or(*cfg.loads.last().unwrap()));
            sim_cfg.audit = audit;
            sim_cfg.collect_trace = true;
            let result = run_simulation(&scenario, protocol, &sim_cfg, &sim_rng)
                .map_err(|e| MainError::Validation(e.to_string()))?;

            std::fs::write(common.out.join("config.echo"), cfg.echo())?;
            let mut trace_file = std::fs::File::create(common.out.join("trace.txt"))?;
            write_trace(&result.trace, &mut trace_file)
                .map_err(|e| MainError::Runtime(e.to_string()))?;

            let mut ledger_csv =
                String::from("node,transmit_us,receive_us,idle_us,sleep_us,energy_j\n");
            for i in 0..result.ledger.nodes() {
                let n = NodeId(i as u32);
                ledger_csv.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    i,
                    result.ledger.get(n, RadioMode::Transmit),
                    result.ledger.get(n, RadioMode::Receive),
                    result.ledger.get(n, RadioMode::Idle),
                    result.ledger.get(n, RadioMode::Sleep),
                    result.energy_per_node[i],
                ));
            }
            std::fs::write(common.out.join("ledger.csv"), ledger_csv)?;

            let m = &result.metrics;
            println!("protocol: {protocol}");
            println!("throughput: {} packet·m/s", m.throughput);
            println!(
                "energy_per_packet: {}",
                m.energy_per_packet
                    .map_or("undefined (no deliveries)".into(), |e| format!("{e} J"))
            );
            println!("collision_rate: {}", m.collision_rate);
            println!(
                "sent/delivered/collided: {}/{}/{}",
                m.sent, m.delivered, m.collided
            );
            if audit {
                for (name, ok) in result.audit.results() {
                    println!("audit {name}: {}", if *ok { "pass" } else { "FAIL" });
                }
                if !result.audit.all_passed() {
                    return Err(MainError::Runtime("protocol audit failed".into()));
                }
            }
            Ok(())
        }
        Command::Sweep {
            common,
            parallel,
            kind,
        } => {
            let cfg = load_config(&common)?;
            ensure_out(&common.out)?;
            let kind = match kind.as_str() {
                "load" => SweepKind::Load,
                "density" => SweepKind::Density,
                other => {
                    return Err(MainError::Validation(format!(
                        "unknown sweep kind {other:?} (load or density)"
                    )))
                }
            };
            let rows =
                run_sweep(&cfg, kind, parallel).map_err(|e| MainError::Runtime(e.to_string()))?;
            std::fs::write(common.out.join("config.echo"), cfg.echo())?;
            std::fs::write(common.out.join("sweep_raw.csv"), raw_csv(&rows))?;
            std::fs::write(common.out.join("sweep_agg.csv"), aggregate_csv(&rows))?;
            for protocol in [Protocol::Dcf, Protocol::Psm] {
                if cfg.protocols.contains(&protocol) {
                    for (load, best) in best_param_per_load(&rows, protocol) {
                        println!("best-{protocol} at load {load}: {best}");
                    }
                }
            }
            println!("wrote {} raw rows to {}", rows.len(), common.out.display());
            Ok(())
        }
        Command::Contention {
            common,
            with_mc,
            replications,
        } => {
            let cfg = load_config(&common)?;
            ensure_out(&common.out)?;
            let csv = contention_csv(
                &[2, 5, 10, 20, 40],
                &[8, 16, 32, 64, 128],
                &[1000.0, 2000.0, 4000.0],
                replications,
                with_mc.then_some(cfg.seed),
            );
            let path = common.out.join("contention.csv");
            std::fs::write(&path, csv)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Plot { csv, kind, out } => {
            let files = emit_plots(&csv, kind, &out).map_err(|e| match e {
                pmacsim_cli::PlotError::MissingColumns(_) | pmacsim_cli::PlotError::Empty => {
                    MainError::Validation(e.to_string())
                }
                other => MainError::Runtime(other.to_string()),
            })?;
            for f in files {
                println!("wrote {}", f.display());
            }
            Ok(())
        }
    }
}
