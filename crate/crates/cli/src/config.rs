//! Flat `key = value` experiment configuration with dotted namespaces.
//!
//! Unknown keys are rejected; absent keys take the evaluation defaults.
//! Thresholds accept dB ("9 dB") or linear values, powers accept mW or W,
//! and durations accept ms or s. `echo()` serializes the effective
//! configuration in canonical form; parsing that string reproduces the
//! configuration exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use pmacsim_core::channel::{db_to_linear, ChannelModel};
use pmacsim_core::engine::{PmacParams, Protocol, SimConfig};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {0}: {1}")]
    Io(String, std::io::Error),
    #[error("line {0}: expected `key = value`")]
    Syntax(usize),
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("key {key}: {reason}")]
    BadValue { key: String, reason: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Everything a sweep or single run needs, with Table-style defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub nodes: usize,
    pub d_m: f64,
    /// Arena is a square of side `arena_factor * d_m`.
    pub arena_factor: f64,
    pub channel: ChannelModel,
    pub pmac: PmacParams,
    /// Carrier-sense range for the PMAC contention phase and the DCF
    /// baseline default, as a multiple of d_m.
    pub dcf_r_c_factor: f64,
    pub dcf_cw_min: u32,
    pub dcf_cw_max: u32,
    pub dcf_rts_cts: bool,
    pub psm_beacon_us: u64,
    pub psm_atim_us: u64,
    pub duration_us: u64,
    pub seed: u64,
    pub replications: u32,
    pub protocols: Vec<Protocol>,
    pub loads: Vec<f64>,
    /// DCF tuning grid, multiples of d_m.
    pub r_c_grid: Vec<f64>,
    /// PSM tuning grid, µs.
    pub atim_grid_us: Vec<u64>,
    /// Node counts for the density sweep.
    pub n_grid: Vec<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            nodes: 100,
            d_m: 20.0,
            arena_factor: 6.0,
            channel: ChannelModel::default_params(),
            pmac: PmacParams::default(),
            dcf_r_c_factor: 2.0,
            dcf_cw_min: 15,
            dcf_cw_max: 1023,
            dcf_rts_cts: true,
            psm_beacon_us: 100_000,
            psm_atim_us: 4_000,
            duration_us: 20_000_000,
            seed: 1,
            replications: 10,
            protocols: vec![Protocol::Pmac, Protocol::Dcf, Protocol::Psm],
            loads: vec![250.0, 500.0, 1000.0, 2000.0, 4000.0, 8000.0],
            r_c_grid: vec![1.8, 2.0, 2.2, 2.4, 2.6, 2.8, 3.0],
            atim_grid_us: vec![2_000, 4_000, 6_000, 8_000, 10_000],
            n_grid: vec![50, 75, 100, 125, 150],
        }
    }
}

fn parse_scalar(key: &str, value: &str) -> Result<f64, ConfigError> {
    value
        .trim()
        .parse::<f64>()
        .map_err(|e| ConfigError::BadValue {
            key: key.to_string(),
            reason: e.to_string(),
        })
}

/// Power in watts from "0.1", "100 mW", or "0.1 W".
fn parse_power(key: &str, value: &str) -> Result<f64, ConfigError> {
    let v = value.trim();
    if let Some(mw) = v.strip_suffix("mW") {
        return Ok(parse_scalar(key, mw)? * 1e-3);
    }
    if let Some(w) = v.strip_suffix('W') {
        return parse_scalar(key, w);
    }
    parse_scalar(key, v)
}

/// Linear ratio from "7.943" or "9 dB".
fn parse_ratio(key: &str, value: &str) -> Result<f64, ConfigError> {
    let v = value.trim();
    if let Some(db) = v.strip_suffix("dB") {
        return Ok(db_to_linear(parse_scalar(key, db)?));
    }
    parse_scalar(key, v)
}

/// Duration in µs from "20 s", "100 ms", "250 us", or a bare µs count.
fn parse_duration_us(key: &str, value: &str) -> Result<u64, ConfigError> {
    let v = value.trim();
    let us = if let Some(s) = v.strip_suffix("ms") {
        parse_scalar(key, s)? * 1e3
    } else if let Some(s) = v.strip_suffix("us") {
        parse_scalar(key, s)?
    } else if let Some(s) = v.strip_suffix('s') {
        parse_scalar(key, s)? * 1e6
    } else {
        parse_scalar(key, v)?
    };
    if us < 0.0 || us.fract() != 0.0 {
        return Err(ConfigError::BadValue {
            key: key.to_string(),
            reason: "expected a whole non-negative number of µs".into(),
        });
    }
    Ok(us as u64)
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value.trim() {
        "true" | "yes" | "on" => Ok(true),
        "false" | "no" | "off" => Ok(false),
        other => Err(ConfigError::BadValue {
            key: key.to_string(),
            reason: format!("expected true/false, got {other:?}"),
        }),
    }
}

fn parse_list<T, F: Fn(&str, &str) -> Result<T, ConfigError>>(
    key: &str,
    value: &str,
    f: F,
) -> Result<Vec<T>, ConfigError> {
    let items: Result<Vec<T>, _> = value.split(',').map(|item| f(key, item.trim())).collect();
    let items = items?;
    if items.is_empty() {
        return Err(ConfigError::BadValue {
            key: key.into(),
            reason: "empty list".into(),
        });
    }
    Ok(items)
}

/// Parses a config file. An empty file yields the defaults.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Io(path.display().to_string(), e))?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = ExperimentConfig::default();
    let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or(ConfigError::Syntax(lineno + 1))?;
        entries.insert(
            key.trim().to_string(),
            (lineno + 1, value.trim().to_string()),
        );
    }

    for (key, (_line, value)) in &entries {
        let v = value.as_str();
        match key.as_str() {
            "scenario.nodes" => cfg.nodes = parse_scalar(key, v)? as usize,
            "scenario.d_m" => cfg.d_m = parse_scalar(key, v)?,
            "scenario.arena_factor" => cfg.arena_factor = parse_scalar(key, v)?,
            "channel.c" => cfg.channel.c = parse_scalar(key, v)?,
            "channel.alpha" => cfg.channel.alpha = parse_scalar(key, v)?,
            "channel.n0" => cfg.channel.n0 = parse_power(key, v)?,
            "channel.p_d" => cfg.channel.p_d = parse_power(key, v)?,
            "channel.p_s" => cfg.channel.p_s = parse_power(key, v)?,
            "channel.gamma_d" => cfg.channel.gamma_d = parse_ratio(key, v)?,
            "channel.gamma_s" => cfg.channel.gamma_s = parse_ratio(key, v)?,
            "channel.c_prime" => cfg.channel.c_prime = parse_scalar(key, v)?,
            "pmac.h" => cfg.pmac.h = parse_scalar(key, v)?,
            "pmac.q" => cfg.pmac.q = parse_scalar(key, v)?,
            "pmac.contention_slots" => cfg.pmac.contention_slots = parse_scalar(key, v)? as usize,
            "pmac.contention_window" => cfg.pmac.contention_window = parse_scalar(key, v)? as u32,
            "pmac.dynamic_contention" => cfg.pmac.dynamic_contention = parse_bool(key, v)?,
            "pmac.target_delay_frames" => cfg.pmac.target_delay_frames = parse_scalar(key, v)?,
            "pmac.reliable_scheduling" => cfg.pmac.reliable_scheduling = parse_bool(key, v)?,
            "dcf.r_c_factor" => cfg.dcf_r_c_factor = parse_scalar(key, v)?,
            "dcf.cw_min" => cfg.dcf_cw_min = parse_scalar(key, v)? as u32,
            "dcf.cw_max" => cfg.dcf_cw_max = parse_scalar(key, v)? as u32,
            "dcf.rts_cts" => cfg.dcf_rts_cts = parse_bool(key, v)?,
            "psm.beacon" => cfg.psm_beacon_us = parse_duration_us(key, v)?,
            "psm.atim" => cfg.psm_atim_us = parse_duration_us(key, v)?,
            "run.duration" => cfg.duration_us = parse_duration_us(key, v)?,
            "run.seed" => cfg.seed = parse_scalar(key, v)? as u64,
            "sweep.replications" => cfg.replications = parse_scalar(key, v)? as u32,
            "sweep.protocols" => {
                cfg.protocols = parse_list(key, v, |k, item| {
                    item.parse::<Protocol>().map_err(|e| ConfigError::BadValue {
                        key: k.to_string(),
                        reason: e,
                    })
                })?
            }
            "sweep.loads" => cfg.loads = parse_list(key, v, parse_scalar)?,
            "sweep.r_c_grid" => cfg.r_c_grid = parse_list(key, v, parse_scalar)?,
            "sweep.atim_grid" => cfg.atim_grid_us = parse_list(key, v, parse_duration_us)?,
            "sweep.n_grid" => {
                cfg.n_grid = parse_list(key, v, |k, s| Ok(parse_scalar(k, s)? as usize))?
            }
            _ => return Err(ConfigError::UnknownKey(key.clone())),
        }
    }

    cfg.validate()?;
    Ok(cfg)
}

impl ExperimentConfig {
    pub fn arena_side(&self) -> f64 {
        self.arena_factor * self.d_m
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.nodes < 2 {
            return Err(ConfigError::Invalid(
                "scenario.nodes must be at least 2".into(),
            ));
        }
        if self.d_m <= 0.0 || self.arena_factor <= 0.0 {
            return Err(ConfigError::Invalid(
                "scenario dimensions must be positive".into(),
            ));
        }
        // r_g = h * d_m must cover the longest single-hop link.
        if self.pmac.h < 1.0 {
            return Err(ConfigError::Invalid(format!(
                "pmac.h = {} puts the cell radius r_g = {} below the maximum link distance {}",
                self.pmac.h,
                self.pmac.h * self.d_m,
                self.d_m
            )));
        }
        if !(1.0..=2.0).contains(&self.pmac.q) {
            return Err(ConfigError::Invalid(
                "pmac.q must lie in [1, 2] (knowledge radius between r_g and 2 r_g)".into(),
            ));
        }
        self.channel
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.replications == 0 {
            return Err(ConfigError::Invalid(
                "sweep.replications must be positive".into(),
            ));
        }
        if self.loads.is_empty() || self.r_c_grid.is_empty() || self.atim_grid_us.is_empty() {
            return Err(ConfigError::Invalid("sweep grids must not be empty".into()));
        }
        if self.psm_atim_us == 0 || self.psm_atim_us >= self.psm_beacon_us {
            return Err(ConfigError::Invalid(
                "psm.atim must be positive and shorter than psm.beacon".into(),
            ));
        }
        Ok(())
    }

    /// Canonical serialization of the effective configuration; parsing it
    /// back reproduces this configuration.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scenario.nodes = {}", self.nodes);
        let _ = writeln!(s, "scenario.d_m = {}", self.d_m);
        let _ = writeln!(s, "scenario.arena_factor = {}", self.arena_factor);
        let _ = writeln!(s, "channel.c = {}", self.channel.c);
        let _ = writeln!(s, "channel.alpha = {}", self.channel.alpha);
        let _ = writeln!(s, "channel.n0 = {}", self.channel.n0);
        let _ = writeln!(s, "channel.p_d = {}", self.channel.p_d);
        let _ = writeln!(s, "channel.p_s = {}", self.channel.p_s);
        let _ = writeln!(s, "channel.gamma_d = {}", self.channel.gamma_d);
        let _ = writeln!(s, "channel.gamma_s = {}", self.channel.gamma_s);
        let _ = writeln!(s, "channel.c_prime = {}", self.channel.c_prime);
        let _ = writeln!(s, "pmac.h = {}", self.pmac.h);
        let _ = writeln!(s, "pmac.q = {}", self.pmac.q);
        let _ = writeln!(s, "pmac.contention_slots = {}", self.pmac.contention_slots);
        let _ = writeln!(
            s,
            "pmac.contention_window = {}",
            self.pmac.contention_window
        );
        let _ = writeln!(
            s,
            "pmac.dynamic_contention = {}",
            self.pmac.dynamic_contention
        );
        let _ = writeln!(
            s,
            "pmac.target_delay_frames = {}",
            self.pmac.target_delay_frames
        );
        let _ = writeln!(
            s,
            "pmac.reliable_scheduling = {}",
            self.pmac.reliable_scheduling
        );
        let _ = writeln!(s, "dcf.r_c_factor = {}", self.dcf_r_c_factor);
        let _ = writeln!(s, "dcf.cw_min = {}", self.dcf_cw_min);
        let _ = writeln!(s, "dcf.cw_max = {}", self.dcf_cw_max);
        let _ = writeln!(s, "dcf.rts_cts = {}", self.dcf_rts_cts);
        let _ = writeln!(s, "psm.beacon = {}", self.psm_beacon_us);
        let _ = writeln!(s, "psm.atim = {}", self.psm_atim_us);
        let _ = writeln!(s, "run.duration = {}", self.duration_us);
        let _ = writeln!(s, "run.seed = {}", self.seed);
        let _ = writeln!(s, "sweep.replications = {}", self.replications);
        let _ = writeln!(
            s,
            "sweep.protocols = {}",
            self.protocols
                .iter()
                .map(|p| p.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        );
        let join = |xs: &[f64]| {
            xs.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        };
        let _ = writeln!(s, "sweep.loads = {}", join(&self.loads));
        let _ = writeln!(s, "sweep.r_c_grid = {}", join(&self.r_c_grid));
        let _ = writeln!(
            s,
            "sweep.atim_grid = {}",
            self.atim_grid_us
                .iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        );
        let _ = writeln!(
            s,
            "sweep.n_grid = {}",
            self.n_grid
                .iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        );
        s
    }

    /// The per-run engine configuration at a given load.
    pub fn sim_config(&self, load_pps: f64) -> SimConfig {
        let mut sim = SimConfig::new(self.channel.clone(), self.d_m);
        sim.pmac = self.pmac.clone();
        sim.dcf.r_c = self.dcf_r_c_factor * self.d_m;
        sim.dcf.cw_min = self.dcf_cw_min;
        sim.dcf.cw_max = self.dcf_cw_max;
        sim.dcf.rts_cts = self.dcf_rts_cts;
        sim.psm.beacon_us = self.psm_beacon_us;
        sim.psm.atim_us = self.psm_atim_us;
        sim.psm.dcf = sim.dcf.clone();
        sim.load_pps = load_pps;
        sim.duration_us = self.duration_us;
        sim.collect_trace = false;
        sim
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_yields_defaults() {
        let cfg = parse_config_str("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.nodes, 100);
        assert_eq!(cfg.d_m, 20.0);
        assert_eq!(cfg.duration_us, 20_000_000);
        assert!((cfg.channel.gamma_d - db_to_linear(9.0)).abs() < 1e-12);
    }

    #[test]
    fn db_values_convert_to_linear() {
        let cfg = parse_config_str("channel.gamma_d = 9 dB\n").unwrap();
        assert!((cfg.channel.gamma_d - 7.943282347242816).abs() < 1e-12);
        let cfg = parse_config_str("channel.gamma_d = 7.943282347242816\n").unwrap();
        assert!((cfg.channel.gamma_d - 7.943282347242816).abs() < 1e-12);
    }

    #[test]
    fn powers_accept_milliwatts() {
        let cfg = parse_config_str("channel.p_d = 100 mW\n").unwrap();
        assert!((cfg.channel.p_d - 0.1).abs() < 1e-15);
    }

    #[test]
    fn cell_radius_below_link_range_rejected() {
        // h = 0.5 would give r_g = 10 with d_m = 20.
        let err = parse_config_str("pmac.h = 0.5\n").unwrap_err();
        assert!(matches!(err, ConfigError::Invalid(_)), "{err}");
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = parse_config_str("scenario.nodez = 5\n").unwrap_err();
        assert!(matches!(err, ConfigError::UnknownKey(_)));
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let cfg = parse_config_str("# header\n\nscenario.nodes = 42 # trailing\n").unwrap();
        assert_eq!(cfg.nodes, 42);
    }

    #[test]
    fn echo_round_trips() {
        let text = "scenario.nodes = 50\nchannel.gamma_d = 17 dB\nsweep.loads = 100, 200\npmac.q = 1.2\nrun.duration = 10 s\n";
        let cfg = parse_config_str(text).unwrap();
        let echoed = cfg.echo();
        let reparsed = parse_config_str(&echoed).unwrap();
        assert_eq!(cfg, reparsed);
        // And echo is a fixed point.
        assert_eq!(echoed, reparsed.echo());
    }

    #[test]
    fn durations_accept_units() {
        assert_eq!(
            parse_config_str("run.duration = 20 s\n")
                .unwrap()
                .duration_us,
            20_000_000
        );
        assert_eq!(
            parse_config_str("psm.atim = 4 ms\n").unwrap().psm_atim_us,
            4_000
        );
        assert_eq!(
            parse_config_str("run.duration = 1000000\n")
                .unwrap()
                .duration_us,
            1_000_000
        );
    }
}
