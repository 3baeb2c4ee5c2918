//! Shared helpers and independent oracles for the integration suites.

use maofdm::harness::TrialRecord;
use maofdm::{ChannelModelParams, SamplingGrid, SystemParams, WidebandChannel};

/// Exact water-filling optimum by exhaustive KKT-candidate enumeration:
/// for every active set S, the budget-exhausting closed form
/// `mu = (P + sum_{l in S} sigma^2/g_l) / |S|` gives a feasible candidate
/// whenever all its powers are nonnegative; the best candidate is the
/// optimum. Independent of the bisection path under test.
pub fn exhaustive_waterfill_rate(gains: &[f64], sys: &SystemParams) -> f64 {
    let l = gains.len();
    assert!(l <= 16, "exhaustive oracle limited to small L");
    let sigma2 = sys.noise_power_w;
    let mut best = 0.0f64;
    for mask in 1u32..(1u32 << l) {
        let set: Vec<usize> = (0..l).filter(|i| mask >> i & 1 == 1).collect();
        if set.iter().any(|&i| gains[i] <= 0.0) {
            continue;
        }
        let inv_sum: f64 = set.iter().map(|&i| sigma2 / gains[i]).sum();
        let mu = (sys.max_power_w + inv_sum) / set.len() as f64;
        let powers: Vec<f64> = set.iter().map(|&i| mu - sigma2 / gains[i]).collect();
        if powers.iter().any(|p| *p < 0.0) {
            continue;
        }
        let rate: f64 = set
            .iter()
            .zip(&powers)
            .map(|(&i, &p)| (1.0 + p * gains[i] / sigma2).log2())
            .sum::<f64>()
            * sys.rate_prefactor();
        best = best.max(rate);
    }
    best
}

/// Small randomized instance on an index-unit grid (spacing 1 m, so the
/// minimum index gap equals `min_sep` exactly).
pub fn small_instance(
    m: usize,
    min_sep: usize,
    num_subcarriers: usize,
    seed: u64,
) -> (WidebandChannel, SystemParams) {
    let grid = SamplingGrid::new((m - 1) as f64, m, min_sep as f64).unwrap();
    let params = ChannelModelParams {
        num_taps: 3.min(num_subcarriers),
        paths_per_tap: 4,
        num_subcarriers,
        cp_length: 3.min(num_subcarriers).max(1),
        rng_seed: seed,
        ..ChannelModelParams::default()
    };
    let channel = WidebandChannel::generate(&params, &grid).unwrap();
    let sys = SystemParams::from_dbm(46.0, -60.0, num_subcarriers, params.cp_length).unwrap();
    (channel, sys)
}

/// Mean and standard error of the per-trial paired rate gap
/// `scheme_a - scheme_b` at one sweep value.
pub fn paired_gap_stats(
    records: &[TrialRecord],
    sweep_value: u64,
    scheme_a: &str,
    scheme_b: &str,
) -> (f64, f64, usize) {
    let pick = |scheme: &str| -> Vec<(u64, f64)> {
        let mut v: Vec<(u64, f64)> = records
            .iter()
            .filter(|r| r.sweep_value == sweep_value && r.scheme == scheme && r.status == "ok")
            .map(|r| (r.trial_index, r.rate_bps_hz.unwrap()))
            .collect();
        v.sort_by_key(|(t, _)| *t);
        v
    };
    let a = pick(scheme_a);
    let b = pick(scheme_b);
    assert_eq!(a.len(), b.len(), "unpaired trials");
    assert!(!a.is_empty());
    let gaps: Vec<f64> = a
        .iter()
        .zip(&b)
        .map(|((ta, ra), (tb, rb))| {
            assert_eq!(ta, tb, "trial pairing broken");
            ra - rb
        })
        .collect();
    let n = gaps.len() as f64;
    let mean = gaps.iter().sum::<f64>() / n;
    let se = if gaps.len() < 2 {
        0.0
    } else {
        let var = gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    };
    (mean, se, gaps.len())
}

/// Mean rate and its standard error for one (sweep value, scheme).
pub fn mean_rate_stats(
    records: &[TrialRecord],
    sweep_value: u64,
    scheme: &str,
) -> (f64, f64, usize) {
    let rates: Vec<f64> = records
        .iter()
        .filter(|r| r.sweep_value == sweep_value && r.scheme == scheme && r.status == "ok")
        .map(|r| r.rate_bps_hz.unwrap())
        .collect();
    assert!(!rates.is_empty());
    let n = rates.len() as f64;
    let mean = rates.iter().sum::<f64>() / n;
    let se = if rates.len() < 2 {
        0.0
    } else {
        let var = rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    };
    (mean, se, rates.len())
}
