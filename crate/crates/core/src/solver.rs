//! Placement solvers.
//!
//! All solvers return a [`SolveResult`] whose rate comes from the same
//! water-filling routine, so results are directly comparable:
//!
//! - [`brute_force_solve`]: exact optimum by full enumeration (the oracle).
//! - [`bb_solve`]: exact optimum by branch-and-bound; partial placements are
//!   discarded when a water-filled bound over per-subcarrier best completion
//!   gains cannot beat the incumbent.
//! - [`low_snr_solve`]: per-subcarrier fixed-hop optimization, keeping the
//!   subcarrier with the largest achievable gain (optimal as SNR -> 0).
//! - [`narrowband_solve`]: optimizes positions on the center subcarrier only.
//! - [`fpa_baseline`]: fixed antennas centered on the grid at minimum spacing.

use std::time::{Duration, Instant};

use crate::channel::WidebandChannel;
use crate::error::Error;
use crate::grid::{AntennaPlacement, BestGainTables, PlacementGraph};
use crate::power::{
    achievable_rate, waterfill, PowerAllocation, SystemParams, DEFAULT_WATERFILL_TOL,
};
use crate::Result;

/// Heuristic used to seed the branch-and-bound incumbent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialIncumbent {
    /// Seed from [`low_snr_solve`] (the default).
    LowSnr,
    /// Seed from [`narrowband_solve`].
    Narrowband,
    /// Start from an empty incumbent.
    None,
}

/// Branch-and-bound knobs. Child expansion order is fixed: ascending vertex
/// index, which makes the search deterministic.
#[derive(Debug, Clone)]
pub struct BbConfig {
    pub initial_incumbent: InitialIncumbent,
    /// Optimality slack: a subtree is discarded when its bound does not
    /// exceed `incumbent + bound_tolerance`. Zero keeps the search exact.
    pub bound_tolerance: f64,
    /// Safety cap on visited search nodes; exceeding it returns the best
    /// solution so far with `stats.certified == false`.
    pub node_budget: Option<u64>,
}

impl Default for BbConfig {
    fn default() -> Self {
        Self {
            initial_incumbent: InitialIncumbent::LowSnr,
            bound_tolerance: 0.0,
            node_budget: None,
        }
    }
}

/// Search counters of a solve call.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveStats {
    /// Interior nodes whose children were expanded.
    pub nodes_expanded: u64,
    /// Interior nodes discarded by the bound test.
    pub nodes_pruned_by_bound: u64,
    /// Complete placements whose rate was evaluated.
    pub leaves_evaluated: u64,
    pub wall_time: Duration,
    /// False only when a node budget stopped the search early.
    pub certified: bool,
    /// For [`low_snr_solve`]: the surrogate objective
    /// `P_max * gamma_max / sigma^2` of the selected subcarrier.
    pub low_snr_objective: Option<f64>,
}

impl SolveStats {
    fn new() -> Self {
        Self {
            nodes_expanded: 0,
            nodes_pruned_by_bound: 0,
            leaves_evaluated: 0,
            wall_time: Duration::ZERO,
            certified: true,
            low_snr_objective: None,
        }
    }
}

/// A placement, its power allocation, the achieved rate and search counters.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub placement: AntennaPlacement,
    pub allocation: PowerAllocation,
    pub rate_bps_hz: f64,
    pub stats: SolveStats,
}

fn validate_instance(
    channel: &WidebandChannel,
    sys: &SystemParams,
    num_antennas: usize,
) -> Result<PlacementGraph> {
    if sys.num_subcarriers != channel.params().num_subcarriers {
        return Err(Error::InvalidParameter(format!(
            "system has {} subcarriers but channel has {}",
            sys.num_subcarriers,
            channel.params().num_subcarriers
        )));
    }
    if num_antennas == 0 {
        return Err(Error::InvalidParameter("need at least one antenna".into()));
    }
    let graph = PlacementGraph::new(channel.grid().clone());
    if !graph.is_feasible(num_antennas) {
        return Err(Error::Infeasible(format!(
            "no placement of {num_antennas} antennas fits M={} with index gap {}",
            channel.grid().num_points(),
            channel.grid().min_sep_idx()
        )));
    }
    Ok(graph)
}

/// `weights[l-1][v-1] = |c_l(v)|^2`.
fn weight_matrix(channel: &WidebandChannel) -> Vec<Vec<f64>> {
    (1..=channel.params().num_subcarriers)
        .map(|sub| {
            channel
                .position_power_gains(sub)
                .expect("subcarrier index in range")
        })
        .collect()
}

fn evaluate_placement(
    channel: &WidebandChannel,
    sys: &SystemParams,
    placement: &AntennaPlacement,
) -> (PowerAllocation, f64) {
    let gains = channel.placement_gains(placement);
    let alloc = waterfill(&gains, sys, DEFAULT_WATERFILL_TOL);
    let rate = achievable_rate(&gains, &alloc, sys);
    (alloc, rate)
}

/// Exact optimum by full enumeration; ties break toward the
/// lexicographically smallest placement.
pub fn brute_force_solve(
    channel: &WidebandChannel,
    sys: &SystemParams,
    num_antennas: usize,
) -> Result<SolveResult> {
    let start = Instant::now();
    let graph = validate_instance(channel, sys, num_antennas)?;
    let mut stats = SolveStats::new();
    let mut best: Option<(f64, AntennaPlacement, PowerAllocation)> = None;
    for placement in graph.placements(num_antennas) {
        let (alloc, rate) = evaluate_placement(channel, sys, &placement);
        stats.leaves_evaluated += 1;
        // Strict improvement keeps the first (smallest) placement among ties.
        if best.as_ref().is_none_or(|(r, _, _)| rate > *r) {
            best = Some((rate, placement, alloc));
        }
    }
    let (rate, placement, allocation) = best.expect("feasible instance has placements");
    stats.wall_time = start.elapsed();
    Ok(SolveResult {
        placement,
        allocation,
        rate_bps_hz: rate,
        stats,
    })
}

/// Water-filled rate over the per-subcarrier best completion gains of a
/// partial placement; an upper bound on the rate of every completion.
///
/// `prefix` may be empty (the search root). Returns negative infinity when
/// the prefix has no feasible completion.
pub fn upper_bound(
    channel: &WidebandChannel,
    sys: &SystemParams,
    prefix: &[usize],
    num_antennas: usize,
) -> Result<f64> {
    let graph = validate_instance(channel, sys, num_antennas)?;
    if prefix.len() > num_antennas {
        return Err(Error::InvalidParameter(format!(
            "prefix of {} exceeds {num_antennas} antennas",
            prefix.len()
        )));
    }
    if !prefix.is_empty() {
        AntennaPlacement::new(prefix.to_vec(), channel.grid())?;
    }
    let weights = weight_matrix(channel);
    let prefix_done = prefix.len() == num_antennas;
    let hops = num_antennas - prefix.len();
    let last = prefix.last().copied();

    let mut bound_gains = Vec::with_capacity(weights.len());
    for w in &weights {
        let prefix_gain: f64 = prefix.iter().map(|&v| w[v - 1]).sum();
        if prefix_done {
            bound_gains.push(prefix_gain);
        } else {
            let tables = graph.best_gain_tables(w, hops);
            match tables.best_gain_from(hops, last) {
                Some(tail) => bound_gains.push(prefix_gain + tail),
                None => return Ok(f64::NEG_INFINITY),
            }
        }
    }
    let alloc = waterfill(&bound_gains, sys, DEFAULT_WATERFILL_TOL);
    Ok(achievable_rate(&bound_gains, &alloc, sys))
}

struct SearchCtx<'a> {
    graph: &'a PlacementGraph,
    channel: &'a WidebandChannel,
    sys: &'a SystemParams,
    weights: &'a [Vec<f64>],
    tables: &'a [BestGainTables],
    num_antennas: usize,
    bound_tolerance: f64,
    node_budget: Option<u64>,
    visited: u64,
    aborted: bool,
    prefix: Vec<usize>,
    /// `gain_stack[r][l]`: summed weights of the first `r` prefix vertices.
    gain_stack: Vec<Vec<f64>>,
    bound_buf: Vec<f64>,
    best_rate: f64,
    best_placement: Option<Vec<usize>>,
    best_alloc: Option<PowerAllocation>,
    stats: SolveStats,
}

fn bb_search<F: FnMut(&[usize], f64)>(ctx: &mut SearchCtx, last: Option<usize>, on_prune: &mut F) {
    if ctx.aborted {
        return;
    }
    if let Some(budget) = ctx.node_budget {
        if ctx.visited >= budget {
            ctx.aborted = true;
            return;
        }
    }
    ctx.visited += 1;

    let depth = ctx.prefix.len();
    if depth == ctx.num_antennas {
        ctx.stats.leaves_evaluated += 1;
        let placement = AntennaPlacement::from_indices_unchecked(ctx.prefix.clone());
        let (alloc, rate) = evaluate_placement(ctx.channel, ctx.sys, &placement);
        if rate > ctx.best_rate {
            ctx.best_rate = rate;
            ctx.best_placement = Some(ctx.prefix.clone());
            ctx.best_alloc = Some(alloc);
        }
        return;
    }

    let children = ctx.graph.neighbors(last);
    if children.is_empty() {
        return;
    }

    let hops = ctx.num_antennas - depth;
    let mut tail_feasible = true;
    for (l, table) in ctx.tables.iter().enumerate() {
        match table.best_gain_from(hops, last) {
            Some(tail) => ctx.bound_buf[l] = ctx.gain_stack[depth][l] + tail,
            None => {
                tail_feasible = false;
                break;
            }
        }
    }
    let bound = if tail_feasible {
        let alloc = waterfill(&ctx.bound_buf, ctx.sys, DEFAULT_WATERFILL_TOL);
        achievable_rate(&ctx.bound_buf, &alloc, ctx.sys)
    } else {
        f64::NEG_INFINITY
    };
    if bound <= ctx.best_rate + ctx.bound_tolerance {
        ctx.stats.nodes_pruned_by_bound += 1;
        on_prune(&ctx.prefix, ctx.best_rate);
        return;
    }

    ctx.stats.nodes_expanded += 1;
    for child in children {
        ctx.prefix.push(child);
        let r = ctx.prefix.len();
        for l in 0..ctx.weights.len() {
            ctx.gain_stack[r][l] = ctx.gain_stack[r - 1][l] + ctx.weights[l][child - 1];
        }
        bb_search(ctx, Some(child), on_prune);
        ctx.prefix.pop();
        if ctx.aborted {
            return;
        }
    }
}

/// Branch-and-bound solve; returns a certified global optimum unless a node
/// budget stops it early.
pub fn bb_solve(
    channel: &WidebandChannel,
    sys: &SystemParams,
    num_antennas: usize,
    config: &BbConfig,
) -> Result<SolveResult> {
    bb_solve_observed(channel, sys, num_antennas, config, &mut |_, _| {})
}

/// Same as [`bb_solve`] but surfaces every prune event (the pruned prefix and
/// the incumbent rate at that moment); used by the audit tests.
pub(crate) fn bb_solve_observed<F: FnMut(&[usize], f64)>(
    channel: &WidebandChannel,
    sys: &SystemParams,
    num_antennas: usize,
    config: &BbConfig,
    on_prune: &mut F,
) -> Result<SolveResult> {
    let start = Instant::now();
    let graph = validate_instance(channel, sys, num_antennas)?;
    let weights = weight_matrix(channel);

    // Seed the incumbent with both the heuristic's rate and its placement:
    // pruning is non-strict, so an instance whose optimum equals the seed
    // rate may never improve on it.
    let (best_rate, best_placement, best_alloc) = match config.initial_incumbent {
        InitialIncumbent::None => (f64::NEG_INFINITY, None, None),
        InitialIncumbent::LowSnr => {
            let seed = low_snr_solve(channel, sys, num_antennas)?;
            (
                seed.rate_bps_hz,
                Some(seed.placement.indices().to_vec()),
                Some(seed.allocation),
            )
        }
        InitialIncumbent::Narrowband => {
            let seed = narrowband_solve(channel, sys, num_antennas)?;
            (
                seed.rate_bps_hz,
                Some(seed.placement.indices().to_vec()),
                Some(seed.allocation),
            )
        }
    };

    let tables: Vec<BestGainTables> = weights
        .iter()
        .map(|w| graph.best_gain_tables(w, num_antennas))
        .collect();

    let num_sub = weights.len();
    let mut ctx = SearchCtx {
        graph: &graph,
        channel,
        sys,
        weights: &weights,
        tables: &tables,
        num_antennas,
        bound_tolerance: config.bound_tolerance,
        node_budget: config.node_budget,
        visited: 0,
        aborted: false,
        prefix: Vec::with_capacity(num_antennas),
        gain_stack: vec![vec![0.0; num_sub]; num_antennas + 1],
        bound_buf: vec![0.0; num_sub],
        best_rate,
        best_placement,
        best_alloc,
        stats: SolveStats::new(),
    };
    bb_search(&mut ctx, None, on_prune);

    let mut stats = ctx.stats;
    stats.certified = !ctx.aborted;
    stats.wall_time = start.elapsed();
    let placement_indices = ctx.best_placement.ok_or_else(|| {
        Error::InvalidParameter("node budget exhausted before any feasible placement".into())
    })?;
    let placement = AntennaPlacement::new(placement_indices, channel.grid())?;
    let allocation = ctx.best_alloc.expect("allocation recorded with placement");
    Ok(SolveResult {
        placement,
        allocation,
        rate_bps_hz: ctx.best_rate,
        stats,
    })
}

/// Optimal placement as SNR -> 0: maximize the single best subcarrier gain.
/// The returned allocation and rate still come from full water-filling so
/// the result is comparable with the other solvers; the surrogate objective
/// lands in `stats.low_snr_objective`.
pub fn low_snr_solve(
    channel: &WidebandChannel,
    sys: &SystemParams,
    num_antennas: usize,
) -> Result<SolveResult> {
    let start = Instant::now();
    let graph = validate_instance(channel, sys, num_antennas)?;
    let mut best: Option<(f64, Vec<usize>)> = None;
    for sub in 1..=sys.num_subcarriers {
        let w = channel.position_power_gains(sub)?;
        let path = graph
            .best_k_hop_gain(&w, num_antennas, None)
            .expect("instance verified feasible");
        // Strict improvement keeps the smallest subcarrier among ties.
        if best.as_ref().is_none_or(|(g, _)| path.gain > *g) {
            best = Some((path.gain, path.vertices));
        }
    }
    let (gamma_max, vertices) = best.expect("at least one subcarrier");
    let placement = AntennaPlacement::new(vertices, channel.grid())?;
    let (allocation, rate) = evaluate_placement(channel, sys, &placement);
    let mut stats = SolveStats::new();
    stats.low_snr_objective = Some(sys.max_power_w * gamma_max / sys.noise_power_w);
    stats.wall_time = start.elapsed();
    Ok(SolveResult {
        placement,
        allocation,
        rate_bps_hz: rate,
        stats,
    })
}

/// Optimizes positions against the center subcarrier only, then
/// water-fills across the whole band.
pub fn narrowband_solve(
    channel: &WidebandChannel,
    sys: &SystemParams,
    num_antennas: usize,
) -> Result<SolveResult> {
    let start = Instant::now();
    let graph = validate_instance(channel, sys, num_antennas)?;
    let center = sys.num_subcarriers / 2 + 1;
    let w = channel.position_power_gains(center)?;
    let path = graph
        .best_k_hop_gain(&w, num_antennas, None)
        .expect("instance verified feasible");
    let placement = AntennaPlacement::new(path.vertices, channel.grid())?;
    let (allocation, rate) = evaluate_placement(channel, sys, &placement);
    let mut stats = SolveStats::new();
    stats.wall_time = start.elapsed();
    Ok(SolveResult {
        placement,
        allocation,
        rate_bps_hz: rate,
        stats,
    })
}

/// Fixed-position benchmark: antennas centered on the grid at the minimum
/// index spacing, no position optimization.
pub fn fpa_baseline(
    channel: &WidebandChannel,
    sys: &SystemParams,
    num_antennas: usize,
) -> Result<SolveResult> {
    let start = Instant::now();
    validate_instance(channel, sys, num_antennas)?;
    let m = channel.grid().num_points();
    let s = channel.grid().min_sep_idx();
    let span = (num_antennas - 1) * s;
    // validate_instance guarantees span + 1 <= m.
    let first = ((m - 1 - span) as f64 / 2.0).round_ties_even() as usize + 1;
    let indices: Vec<usize> = (0..num_antennas).map(|k| first + k * s).collect();
    let placement = AntennaPlacement::new(indices, channel.grid())?;
    let (allocation, rate) = evaluate_placement(channel, sys, &placement);
    let mut stats = SolveStats::new();
    stats.wall_time = start.elapsed();
    Ok(SolveResult {
        placement,
        allocation,
        rate_bps_hz: rate,
        stats,
    })
}
