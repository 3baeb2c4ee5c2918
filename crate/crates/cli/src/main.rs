//! Command-line front end: single solves, Monte Carlo sweeps, figure
//! presets, channel dumps and a built-in oracle self-test.
//!
//! Exit codes: 0 success, 1 invalid configuration or usage, 2 infeasible
//! instance.

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use maofdm::harness::{
    aggregate, derive_seed, run_sweep, write_plotdata, write_summary_csv, write_trials_csv,
    ExperimentConfig, Scheme, SweepParameter,
};
use maofdm::power::{achievable_rate, waterfill, DEFAULT_WATERFILL_TOL};
use maofdm::solver::{
    bb_solve, brute_force_solve, fpa_baseline, low_snr_solve, narrowband_solve, BbConfig,
    SolveResult,
};
use maofdm::{Error, PlacementGraph, SamplingGrid, SystemParams, WidebandChannel};

#[derive(Parser)]
#[command(
    name = "maofdm",
    version,
    about = "Discrete movable-antenna placement and power allocation for MISO-OFDM links"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// JSON config file; keys not present keep their defaults.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override the base RNG seed.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Override the number of Monte Carlo trials.
    #[arg(long, value_name = "N")]
    trials: Option<usize>,
    /// Comma-separated schemes: bb,brute,low_snr,narrowband,fpa.
    #[arg(long, value_name = "LIST")]
    schemes: Option<String>,
    /// Output directory for CSV and plot data.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve one channel realization and print per-scheme results.
    Solve {
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Run the configured Monte Carlo sweep; writes trials.csv, summary.csv
    /// and one `curve_<scheme>.dat` per scheme.
    Sweep {
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Run a preset sweep for one of the standard figures.
    Figure {
        which: FigureKind,
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Write one channel realization in the text dump format
    /// (header `M L T seed`, then `m l re im` lines).
    DumpChannel {
        #[command(flatten)]
        opts: CommonOpts,
        /// Stream to stdout instead of `<out>/channel.txt`.
        #[arg(long)]
        stdout: bool,
    },
    /// Run the built-in oracle-equivalence checks.
    Selftest,
}

#[derive(Clone, Copy, ValueEnum)]
enum FigureKind {
    #[value(name = "rate-vs-M", alias = "rate-vs-m")]
    RateVsM,
    #[value(name = "rate-vs-Nt", alias = "rate-vs-nt")]
    RateVsNt,
    #[value(name = "rate-vs-Lt", alias = "rate-vs-lt")]
    RateVsLt,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match run(cli) {
        Ok(()) => {}
        Err(err) => {
            eprintln!("error: {err}");
            let code = match err {
                Error::Infeasible(_) => 2,
                _ => 1,
            };
            std::process::exit(code);
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.cmd {
        Cmd::Solve { opts } => solve_cmd(&opts),
        Cmd::Sweep { opts } => {
            let cfg = load_config(&opts)?;
            sweep_cmd(&cfg, &opts.out)
        }
        Cmd::Figure { which, opts } => {
            let base = load_config(&opts)?;
            let cfg = base.with_figure_sweep(match which {
                FigureKind::RateVsM => SweepParameter::NumPositions,
                FigureKind::RateVsNt => SweepParameter::NumAntennas,
                FigureKind::RateVsLt => SweepParameter::PathsPerTap,
            });
            sweep_cmd(&cfg, &opts.out)
        }
        Cmd::DumpChannel { opts, stdout } => dump_channel_cmd(&opts, stdout),
        Cmd::Selftest => selftest_cmd(),
    }
}

fn load_config(opts: &CommonOpts) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &opts.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            ExperimentConfig::from_json_str(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = opts.seed {
        cfg.base_seed = seed;
    }
    if let Some(trials) = opts.trials {
        cfg.trials = trials;
    }
    if let Some(list) = &opts.schemes {
        cfg.schemes = list
            .split(',')
            .map(|s| Scheme::parse(s.trim()))
            .collect::<Result<Vec<_>, _>>()?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn solve_cmd(opts: &CommonOpts) -> Result<(), Error> {
    let cfg = load_config(opts)?;
    let grid = cfg.grid()?;
    let params = cfg.channel_params(cfg.base_seed);
    let sys = cfg.system_params()?;
    let channel = WidebandChannel::generate(&params, &grid)?;
    println!(
        "instance: M={} delta={:.5} m s={} Nt={} L={} seed={}",
        grid.num_points(),
        grid.spacing_m(),
        grid.min_sep_idx(),
        cfg.num_antennas,
        cfg.num_subcarriers,
        cfg.base_seed
    );
    println!(
        "{:<11} {:>12} {:>9} {:>9} {:>9} {:>9}  placement",
        "scheme", "rate_bps_hz", "expanded", "pruned", "leaves", "time_ms"
    );
    for scheme in &cfg.schemes {
        let res = run_scheme(*scheme, &channel, &sys, cfg.num_antennas)?;
        println!(
            "{:<11} {:>12.6} {:>9} {:>9} {:>9} {:>9.2}  {}",
            scheme.name(),
            res.rate_bps_hz,
            res.stats.nodes_expanded,
            res.stats.nodes_pruned_by_bound,
            res.stats.leaves_evaluated,
            res.stats.wall_time.as_secs_f64() * 1e3,
            res.placement
        );
    }
    Ok(())
}

fn run_scheme(
    scheme: Scheme,
    channel: &WidebandChannel,
    sys: &SystemParams,
    num_antennas: usize,
) -> Result<SolveResult, Error> {
    match scheme {
        Scheme::Bb => bb_solve(channel, sys, num_antennas, &BbConfig::default()),
        Scheme::Brute => brute_force_solve(channel, sys, num_antennas),
        Scheme::LowSnr => low_snr_solve(channel, sys, num_antennas),
        Scheme::Narrowband => narrowband_solve(channel, sys, num_antennas),
        Scheme::Fpa => fpa_baseline(channel, sys, num_antennas),
    }
}

fn sweep_cmd(cfg: &ExperimentConfig, out: &PathBuf) -> Result<(), Error> {
    let started = Instant::now();
    let records = run_sweep(cfg)?;
    let elapsed = started.elapsed();
    let aggregates = aggregate(&records);

    fs::create_dir_all(out)?;
    let trials_path = out.join("trials.csv");
    let summary_path = out.join("summary.csv");
    write_trials_csv(&records, fs::File::create(&trials_path)?)?;
    write_summary_csv(&aggregates, fs::File::create(&summary_path)?)?;
    let curves = write_plotdata(&aggregates, out)?;

    println!(
        "{:>11} {:<11} {:>6} {:>12} {:>12}",
        "sweep_value", "scheme", "trials", "mean_rate", "stderr"
    );
    for a in &aggregates {
        println!(
            "{:>11} {:<11} {:>6} {:>12.6} {:>12.6}",
            a.sweep_value, a.scheme, a.trials, a.mean_rate_bps_hz, a.stderr_rate_bps_hz
        );
    }
    let skipped = records.iter().filter(|r| r.status != "ok").count();
    if skipped > 0 {
        eprintln!("note: {skipped} non-ok rows (infeasible points or guarded brute force)");
    }
    eprintln!(
        "wrote {} + {} + {} curve files in {:.1} s",
        trials_path.display(),
        summary_path.display(),
        curves.len(),
        elapsed.as_secs_f64()
    );
    Ok(())
}

fn dump_channel_cmd(opts: &CommonOpts, to_stdout: bool) -> Result<(), Error> {
    let cfg = load_config(opts)?;
    let grid = cfg.grid()?;
    let params = cfg.channel_params(cfg.base_seed);
    let channel = WidebandChannel::generate(&params, &grid)?;
    if to_stdout {
        let stdout = std::io::stdout();
        if let Err(e) = channel.write_dump(stdout.lock()) {
            // Quietly stop when the consumer closes the pipe (head, etc.).
            if e.kind() != std::io::ErrorKind::BrokenPipe {
                return Err(e.into());
            }
        }
    } else {
        fs::create_dir_all(&opts.out)?;
        let path = opts.out.join("channel.txt");
        channel.write_dump(fs::File::create(&path)?)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

/// Quick oracle-equivalence suite; prints one line per check and exits
/// nonzero if any fails.
fn selftest_cmd() -> Result<(), Error> {
    let mut failures = 0usize;
    let mut check = |name: &str, ok: bool, detail: String| {
        if ok {
            println!("selftest {name}: PASS ({detail})");
        } else {
            println!("selftest {name}: FAIL ({detail})");
            failures += 1;
        }
    };

    // Branch-and-bound against full enumeration on small random instances.
    {
        let mut worst: Option<String> = None;
        let mut checked = 0;
        for seed in 0..15u64 {
            let m = 8 + (seed as usize % 5);
            let grid = SamplingGrid::new((m - 1) as f64, m, 2.0).unwrap();
            let params = maofdm::ChannelModelParams {
                num_taps: 3,
                paths_per_tap: 4,
                num_subcarriers: 8,
                cp_length: 3,
                rng_seed: 0x5e1f + seed,
                ..Default::default()
            };
            let channel = WidebandChannel::generate(&params, &grid)?;
            let sys = SystemParams::from_dbm(46.0, -60.0, 8, 3)?;
            let bf = brute_force_solve(&channel, &sys, 3)?;
            let bb = bb_solve(&channel, &sys, 3, &BbConfig::default())?;
            checked += 1;
            if bb.rate_bps_hz != bf.rate_bps_hz {
                worst = Some(format!(
                    "seed {seed}: bb {} != brute {}",
                    bb.rate_bps_hz, bf.rate_bps_hz
                ));
                break;
            }
        }
        check(
            "bb-vs-brute",
            worst.is_none(),
            worst.unwrap_or_else(|| format!("{checked} instances, exact equality")),
        );
    }

    // Water-filling budget and slackness.
    {
        let mut rng = ChaCha8Rng::seed_from_u64(0xc4ec);
        let mut bad = 0;
        for _ in 0..200 {
            let l = rng.gen_range(2..=8);
            let gains: Vec<f64> = (0..l).map(|_| rng.gen::<f64>() * 10.0 + 1e-6).collect();
            let sys = SystemParams::new(1e-6, 1.0, l, 4).unwrap();
            let alloc = waterfill(&gains, &sys, DEFAULT_WATERFILL_TOL);
            let total = alloc.total_power();
            if (total - sys.max_power_w).abs() > 1e-9 * sys.max_power_w {
                bad += 1;
                continue;
            }
            let mu = alloc.water_level.unwrap();
            for (g, p) in gains.iter().zip(&alloc.powers) {
                let floor = sys.noise_power_w / g;
                let ok = if *p > 0.0 {
                    (p - (mu - floor)).abs() <= 1e-8 * mu.max(1.0)
                } else {
                    mu <= floor * (1.0 + 1e-8)
                };
                if !ok {
                    bad += 1;
                    break;
                }
            }
        }
        check(
            "waterfill-kkt",
            bad == 0,
            format!("200 gain vectors, {bad} violations"),
        );
    }

    // Fixed-hop DP against direct enumeration.
    {
        let mut rng = ChaCha8Rng::seed_from_u64(0xd9);
        let mut bad = 0;
        for _ in 0..20 {
            let m = rng.gen_range(5..=10);
            let s = rng.gen_range(1..=2);
            let grid = SamplingGrid::new((m - 1) as f64, m, s as f64).unwrap();
            let graph = PlacementGraph::new(grid);
            let weights: Vec<f64> = (0..m).map(|_| rng.gen::<f64>()).collect();
            let hops = rng.gen_range(1..=3);
            let dp = graph.best_k_hop_gain(&weights, hops, None);
            let oracle = graph
                .placements(hops)
                .map(|p| p.indices().iter().map(|&v| weights[v - 1]).sum::<f64>())
                .fold(None::<f64>, |acc, g| Some(acc.map_or(g, |a| a.max(g))));
            let ok = match (dp, oracle) {
                (None, None) => true,
                (Some(p), Some(want)) => (p.gain - want).abs() <= 1e-12,
                _ => false,
            };
            if !ok {
                bad += 1;
            }
        }
        check(
            "fixed-hop-dp",
            bad == 0,
            format!("20 instances vs enumeration, {bad} mismatches"),
        );
    }

    // Seed derivation stability (paired trials depend on it).
    check(
        "seed-derivation",
        derive_seed(1, 2) == derive_seed(1, 2) && derive_seed(1, 2) != derive_seed(1, 3),
        "deterministic and trial-sensitive".into(),
    );

    // Rate accounting identity on a paper-scale instance.
    {
        let grid = SamplingGrid::new(0.75, 36, 0.0625).unwrap();
        let params = maofdm::ChannelModelParams {
            rng_seed: 7,
            ..Default::default()
        };
        let channel = WidebandChannel::generate(&params, &grid)?;
        let sys = SystemParams::from_dbm(46.0, -60.0, 64, 6)?;
        let res = bb_solve(&channel, &sys, 4, &BbConfig::default())?;
        let gains = channel.placement_gains(&res.placement);
        let want = achievable_rate(&gains, &res.allocation, &sys);
        check(
            "rate-identity",
            (res.rate_bps_hz - want).abs() <= 1e-9 * want,
            format!("bb rate {:.6} recomputed {:.6}", res.rate_bps_hz, want),
        );
    }

    if failures > 0 {
        eprintln!("selftest: {failures} check(s) failed");
        std::process::exit(1);
    }
    println!("selftest: all checks passed");
    Ok(())
}
