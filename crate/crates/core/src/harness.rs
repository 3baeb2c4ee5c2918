//! Configuration-driven Monte Carlo experiment runner.
//!
//! A sweep varies one parameter (number of grid positions, antennas, or
//! paths per tap) over a list of values. Each trial index maps to a
//! deterministically derived seed shared by every scheme and every sweep
//! point of that trial: schemes are compared pairwise on identical channels,
//! and sweep curves ride on common random fields. Trials are
//! independent and run in parallel when the `parallel` feature is enabled;
//! records are sorted before emission so concurrency never changes output
//! bytes.
//!
//! Trial records serialize to CSV with a fixed column order
//! (`sweep_value,trial_index,seed,scheme,status,rate_bps_hz,nodes_expanded,
//! leaves_evaluated`). Wall-clock times stay in memory only: they would break
//! byte-reproducibility of the outputs.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use crate::channel::{ChannelModelParams, WidebandChannel};
use crate::error::Error;
use crate::grid::{PlacementGraph, SamplingGrid};
use crate::power::SystemParams;
use crate::solver::{
    bb_solve, brute_force_solve, fpa_baseline, low_snr_solve, narrowband_solve, BbConfig,
    SolveResult,
};
use crate::Result;

/// Placement schemes the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Bb,
    Brute,
    LowSnr,
    Narrowband,
    Fpa,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [
        Scheme::Bb,
        Scheme::Brute,
        Scheme::LowSnr,
        Scheme::Narrowband,
        Scheme::Fpa,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Bb => "bb",
            Scheme::Brute => "brute",
            Scheme::LowSnr => "low_snr",
            Scheme::Narrowband => "narrowband",
            Scheme::Fpa => "fpa",
        }
    }

    pub fn parse(s: &str) -> Result<Scheme> {
        Scheme::ALL
            .iter()
            .copied()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scheme {s:?}")))
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Which parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParameter {
    #[serde(rename = "none")]
    None,
    /// Number of candidate positions on the grid.
    #[serde(rename = "M")]
    NumPositions,
    /// Number of transmit antennas.
    #[serde(rename = "Nt")]
    NumAntennas,
    /// Paths per channel tap.
    #[serde(rename = "Lt")]
    PathsPerTap,
}

/// Preset sweep values for the three standard figures.
pub const SWEEP_VALUES_M: [u64; 9] = [12, 18, 24, 30, 36, 42, 48, 54, 60];
pub const SWEEP_VALUES_NT: [u64; 5] = [2, 3, 4, 5, 6];
pub const SWEEP_VALUES_LT: [u64; 6] = [1, 2, 3, 4, 5, 6];

/// Brute force is skipped (with a warning row) above this many placements.
pub const BRUTE_FORCE_MAX_PLACEMENTS: u128 = 1_000_000;

/// Flat key-value experiment configuration. Every key has a default; a JSON
/// config file may override any subset, and CLI flags may override the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub num_taps: usize,
    pub paths_per_tap: usize,
    pub num_subcarriers: usize,
    pub cp_length: usize,
    pub carrier_freq_hz: f64,
    pub tx_rx_distance_m: f64,
    pub pathloss_exponent: f64,
    pub tap_decay_factor: f64,
    pub max_power_dbm: f64,
    pub noise_power_dbm: f64,
    pub region_length_m: f64,
    pub num_positions: usize,
    pub min_sep_m: f64,
    pub num_antennas: usize,
    pub trials: usize,
    pub base_seed: u64,
    pub sweep: SweepParameter,
    pub sweep_values: Vec<u64>,
    pub schemes: Vec<Scheme>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            num_taps: 5,
            paths_per_tap: 10,
            num_subcarriers: 64,
            cp_length: 6,
            carrier_freq_hz: 2.4e9,
            tx_rx_distance_m: 10.0,
            pathloss_exponent: 2.2,
            tap_decay_factor: 2.0,
            max_power_dbm: 46.0,
            noise_power_dbm: -60.0,
            // 6 wavelengths at 2.4 GHz, minimum spacing half a wavelength.
            region_length_m: 0.75,
            num_positions: 36,
            min_sep_m: 0.0625,
            num_antennas: 4,
            trials: 120,
            base_seed: 1,
            sweep: SweepParameter::None,
            sweep_values: Vec::new(),
            schemes: vec![Scheme::Bb, Scheme::LowSnr, Scheme::Narrowband, Scheme::Fpa],
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::Config("at least one scheme required".into()));
        }
        let mut seen = self.schemes.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.schemes.len() {
            return Err(Error::Config("duplicate scheme in list".into()));
        }
        match self.sweep {
            SweepParameter::None => {
                if !self.sweep_values.is_empty() {
                    return Err(Error::Config(
                        "sweep_values given but sweep is \"none\"".into(),
                    ));
                }
            }
            _ => {
                if self.sweep_values.is_empty() {
                    return Err(Error::Config("sweep requested without sweep_values".into()));
                }
                let mut vals = self.sweep_values.clone();
                vals.sort_unstable();
                vals.dedup();
                if vals.len() != self.sweep_values.len() {
                    return Err(Error::Config("duplicate sweep value".into()));
                }
            }
        }
        Ok(())
    }

    /// Preset sweep for one of the standard figures.
    pub fn with_figure_sweep(mut self, param: SweepParameter) -> Self {
        self.sweep = param;
        self.sweep_values = match param {
            SweepParameter::None => Vec::new(),
            SweepParameter::NumPositions => SWEEP_VALUES_M.to_vec(),
            SweepParameter::NumAntennas => SWEEP_VALUES_NT.to_vec(),
            SweepParameter::PathsPerTap => SWEEP_VALUES_LT.to_vec(),
        };
        self
    }

    /// Sweep values in declaration order; `[0]` when not sweeping.
    pub fn sweep_value_list(&self) -> Vec<u64> {
        match self.sweep {
            SweepParameter::None => vec![0],
            _ => self.sweep_values.clone(),
        }
    }

    /// The configuration with one sweep value substituted in.
    fn resolved(&self, sweep_value: u64) -> ExperimentConfig {
        let mut cfg = self.clone();
        match self.sweep {
            SweepParameter::None => {}
            SweepParameter::NumPositions => cfg.num_positions = sweep_value as usize,
            SweepParameter::NumAntennas => cfg.num_antennas = sweep_value as usize,
            SweepParameter::PathsPerTap => cfg.paths_per_tap = sweep_value as usize,
        }
        cfg
    }

    pub fn grid(&self) -> Result<SamplingGrid> {
        SamplingGrid::new(self.region_length_m, self.num_positions, self.min_sep_m)
    }

    /// Channel parameters with the given realization seed.
    pub fn channel_params(&self, rng_seed: u64) -> ChannelModelParams {
        ChannelModelParams {
            num_taps: self.num_taps,
            paths_per_tap: self.paths_per_tap,
            num_subcarriers: self.num_subcarriers,
            cp_length: self.cp_length,
            carrier_freq_hz: self.carrier_freq_hz,
            tx_rx_distance_m: self.tx_rx_distance_m,
            pathloss_exponent: self.pathloss_exponent,
            tap_decay_factor: self.tap_decay_factor,
            rng_seed,
        }
    }

    pub fn system_params(&self) -> Result<SystemParams> {
        SystemParams::from_dbm(
            self.max_power_dbm,
            self.noise_power_dbm,
            self.num_subcarriers,
            self.cp_length,
        )
    }
}

/// One (sweep value, trial, scheme) outcome. `wall_time` is measurement
/// metadata and is not serialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub sweep_value: u64,
    pub trial_index: u64,
    pub seed: u64,
    /// Scheme name, or empty for a point-level error row.
    pub scheme: String,
    /// `ok`, `infeasible` (point skipped), or `skipped` (brute force guard).
    pub status: String,
    pub rate_bps_hz: Option<f64>,
    pub nodes_expanded: Option<u64>,
    pub leaves_evaluated: Option<u64>,
    #[serde(skip)]
    pub wall_time: Duration,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic per-trial seed: nested splitmix64 finalizers over
/// `(base_seed, trial_index)`. All schemes within one trial share this seed
/// (and therefore the channel realization); sweep points at the same trial
/// index also share it, so curves are compared on common random fields and
/// per-point differences carry no cross-panel channel noise.
pub fn derive_seed(base_seed: u64, trial_index: u64) -> u64 {
    splitmix64(base_seed ^ splitmix64(trial_index))
}

#[derive(Clone)]
struct TrialTask {
    sweep_value: u64,
    trial_index: u64,
    grid: SamplingGrid,
    chan_template: ChannelModelParams,
    sys: SystemParams,
    num_antennas: usize,
    schemes: Vec<Scheme>,
    base_seed: u64,
}

fn run_trial(task: &TrialTask) -> Result<Vec<TrialRecord>> {
    let seed = derive_seed(task.base_seed, task.trial_index);
    let params = ChannelModelParams {
        rng_seed: seed,
        ..task.chan_template.clone()
    };
    let channel = WidebandChannel::generate(&params, &task.grid)?;
    let mut out = Vec::with_capacity(task.schemes.len());
    for scheme in &task.schemes {
        let result: SolveResult = match scheme {
            Scheme::Bb => bb_solve(&channel, &task.sys, task.num_antennas, &BbConfig::default())?,
            Scheme::Brute => brute_force_solve(&channel, &task.sys, task.num_antennas)?,
            Scheme::LowSnr => low_snr_solve(&channel, &task.sys, task.num_antennas)?,
            Scheme::Narrowband => narrowband_solve(&channel, &task.sys, task.num_antennas)?,
            Scheme::Fpa => fpa_baseline(&channel, &task.sys, task.num_antennas)?,
        };
        out.push(TrialRecord {
            sweep_value: task.sweep_value,
            trial_index: task.trial_index,
            seed,
            scheme: scheme.name().to_string(),
            status: "ok".to_string(),
            rate_bps_hz: Some(result.rate_bps_hz),
            nodes_expanded: Some(result.stats.nodes_expanded),
            leaves_evaluated: Some(result.stats.leaves_evaluated),
            wall_time: result.stats.wall_time,
        });
    }
    Ok(out)
}

fn error_row(sweep_value: u64, scheme: &str, status: &str) -> TrialRecord {
    TrialRecord {
        sweep_value,
        trial_index: 0,
        seed: 0,
        scheme: scheme.to_string(),
        status: status.to_string(),
        rate_bps_hz: None,
        nodes_expanded: None,
        leaves_evaluated: None,
        wall_time: Duration::ZERO,
    }
}

fn plan_tasks(config: &ExperimentConfig) -> Result<(Vec<TrialTask>, Vec<TrialRecord>)> {
    config.validate()?;
    let mut tasks = Vec::new();
    let mut point_rows = Vec::new();
    for &sweep_value in config.sweep_value_list().iter() {
        let point = config.resolved(if config.sweep == SweepParameter::None {
            0
        } else {
            sweep_value
        });
        // A sweep point that cannot be instantiated becomes an error row and
        // the run continues.
        let feasible = (|| -> Result<(SamplingGrid, ChannelModelParams, SystemParams)> {
            let grid = point.grid()?;
            let chan = point.channel_params(0);
            chan.validate()?;
            let sys = point.system_params()?;
            let graph = PlacementGraph::new(grid.clone());
            if !graph.is_feasible(point.num_antennas) {
                return Err(Error::Infeasible(format!(
                    "sweep value {sweep_value}: {} antennas do not fit",
                    point.num_antennas
                )));
            }
            Ok((grid, chan, sys))
        })();
        let (grid, chan, sys) = match feasible {
            Ok(x) => x,
            Err(_) => {
                point_rows.push(error_row(sweep_value, "", "infeasible"));
                continue;
            }
        };
        let mut schemes = point.schemes.clone();
        if schemes.contains(&Scheme::Brute) {
            let count = PlacementGraph::new(grid.clone()).placement_count(point.num_antennas);
            if count > BRUTE_FORCE_MAX_PLACEMENTS {
                point_rows.push(error_row(sweep_value, Scheme::Brute.name(), "skipped"));
                schemes.retain(|s| *s != Scheme::Brute);
            }
        }
        if schemes.is_empty() {
            continue;
        }
        for trial_index in 0..point.trials as u64 {
            tasks.push(TrialTask {
                sweep_value,
                trial_index,
                grid: grid.clone(),
                chan_template: chan.clone(),
                sys: sys.clone(),
                num_antennas: point.num_antennas,
                schemes: schemes.clone(),
                base_seed: point.base_seed,
            });
        }
    }
    Ok((tasks, point_rows))
}

fn finish(mut records: Vec<TrialRecord>) -> Vec<TrialRecord> {
    records.sort_by(|a, b| {
        (a.sweep_value, a.trial_index, a.scheme.as_str()).cmp(&(
            b.sweep_value,
            b.trial_index,
            b.scheme.as_str(),
        ))
    });
    records
}

/// Runs the configured sweep; data-parallel over trials when the crate is
/// built with the `parallel` feature (the default), sequential otherwise.
/// Output records are identical either way.
pub fn run_sweep(config: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    let (tasks, mut records) = plan_tasks(config)?;
    #[cfg(feature = "parallel")]
    let results: Vec<Vec<TrialRecord>> = {
        use rayon::prelude::*;
        tasks
            .par_iter()
            .map(run_trial)
            .collect::<Result<Vec<_>>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Vec<TrialRecord>> = tasks.iter().map(run_trial).collect::<Result<Vec<_>>>()?;
    records.extend(results.into_iter().flatten());
    Ok(finish(records))
}

/// Sequential reference path; always available regardless of features.
pub fn run_sweep_sequential(config: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    let (tasks, mut records) = plan_tasks(config)?;
    let results: Vec<Vec<TrialRecord>> = tasks.iter().map(run_trial).collect::<Result<Vec<_>>>()?;
    records.extend(results.into_iter().flatten());
    Ok(finish(records))
}

/// Per-(sweep value, scheme) aggregate over `ok` rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub sweep_value: u64,
    pub scheme: String,
    pub trials: u64,
    pub mean_rate_bps_hz: f64,
    pub stderr_rate_bps_hz: f64,
    pub mean_nodes_expanded: f64,
    pub mean_leaves_evaluated: f64,
}

/// Mean, standard error and mean node counts per (sweep value, scheme).
pub fn aggregate(records: &[TrialRecord]) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<(u64, String), Vec<&TrialRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.status == "ok") {
        groups
            .entry((r.sweep_value, r.scheme.clone()))
            .or_default()
            .push(r);
    }
    groups
        .into_iter()
        .map(|((sweep_value, scheme), rows)| {
            let n = rows.len() as f64;
            let rates: Vec<f64> = rows.iter().filter_map(|r| r.rate_bps_hz).collect();
            let mean = rates.iter().sum::<f64>() / n;
            let stderr = if rates.len() < 2 {
                0.0
            } else {
                let var = rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
                (var / n).sqrt()
            };
            let mean_nodes = rows
                .iter()
                .filter_map(|r| r.nodes_expanded)
                .map(|x| x as f64)
                .sum::<f64>()
                / n;
            let mean_leaves = rows
                .iter()
                .filter_map(|r| r.leaves_evaluated)
                .map(|x| x as f64)
                .sum::<f64>()
                / n;
            AggregateRow {
                sweep_value,
                scheme,
                trials: rows.len() as u64,
                mean_rate_bps_hz: mean,
                stderr_rate_bps_hz: stderr,
                mean_nodes_expanded: mean_nodes,
                mean_leaves_evaluated: mean_leaves,
            }
        })
        .collect()
}

/// Writes trial records as CSV with the documented header.
pub fn write_trials_csv<W: Write>(records: &[TrialRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trials_csv<R: Read>(reader: R) -> Result<Vec<TrialRecord>> {
    let mut r = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for rec in r.deserialize::<TrialRecord>() {
        out.push(rec?);
    }
    Ok(out)
}

pub fn write_summary_csv<W: Write>(aggregates: &[AggregateRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for a in aggregates {
        w.serialize(a)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes one whitespace-separated table per scheme (`curve_<scheme>.dat`)
/// under `dir`, floats at 10 significant digits. Returns the written paths.
pub fn write_plotdata(aggregates: &[AggregateRow], dir: &Path) -> Result<Vec<PathBuf>> {
    let mut by_scheme: BTreeMap<&str, Vec<&AggregateRow>> = BTreeMap::new();
    for a in aggregates {
        by_scheme.entry(a.scheme.as_str()).or_default().push(a);
    }
    let mut paths = Vec::new();
    for (scheme, rows) in by_scheme {
        let path = dir.join(format!("curve_{scheme}.dat"));
        let mut f = std::fs::File::create(&path)?;
        writeln!(
            f,
            "# sweep_value mean_rate_bps_hz stderr_rate_bps_hz mean_nodes_expanded mean_leaves_evaluated"
        )?;
        for a in rows {
            writeln!(
                f,
                "{} {:.9e} {:.9e} {:.9e} {:.9e}",
                a.sweep_value,
                a.mean_rate_bps_hz,
                a.stderr_rate_bps_hz,
                a.mean_nodes_expanded,
                a.mean_leaves_evaluated
            )?;
        }
        paths.push(path);
    }
    Ok(paths)
}
