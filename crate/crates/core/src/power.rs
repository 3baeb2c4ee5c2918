//! Per-subcarrier power allocation and the achievable-rate objective.
//!
//! With MRT beamforming the link reduces to `L` parallel channels with power
//! gains `g_l`; the optimal allocation is water-filling,
//! `p_l = (mu - sigma^2 / g_l)^+`, with the water level `mu` found by
//! bisection on the power budget.

use num_complex::Complex64;

use crate::channel::WidebandChannel;
use crate::error::Error;
use crate::grid::AntennaPlacement;
use crate::Result;

/// Relative budget tolerance of the bisection; iteration stops once
/// `|sum p - P_max| <= tol * P_max`.
pub const DEFAULT_WATERFILL_TOL: f64 = 1e-10;

const WATERFILL_MAX_ITERS: usize = 200;

/// Link-level constants shared by every solver.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    /// Noise power per subcarrier, linear watts.
    pub noise_power_w: f64,
    /// Total transmit power budget, linear watts.
    pub max_power_w: f64,
    pub num_subcarriers: usize,
    pub cp_length: usize,
}

impl SystemParams {
    pub fn new(
        noise_power_w: f64,
        max_power_w: f64,
        num_subcarriers: usize,
        cp_length: usize,
    ) -> Result<Self> {
        if noise_power_w.is_nan()
            || noise_power_w <= 0.0
            || max_power_w.is_nan()
            || max_power_w <= 0.0
        {
            return Err(Error::InvalidParameter(
                "noise and transmit power must be positive".into(),
            ));
        }
        if num_subcarriers == 0 {
            return Err(Error::InvalidParameter(
                "need at least one subcarrier".into(),
            ));
        }
        Ok(Self {
            noise_power_w,
            max_power_w,
            num_subcarriers,
            cp_length,
        })
    }

    /// Convenience constructor from the dBm values used at the configuration
    /// boundary; everything is linear watts internally.
    pub fn from_dbm(
        max_power_dbm: f64,
        noise_power_dbm: f64,
        num_subcarriers: usize,
        cp_length: usize,
    ) -> Result<Self> {
        Self::new(
            dbm_to_watts(noise_power_dbm),
            dbm_to_watts(max_power_dbm),
            num_subcarriers,
            cp_length,
        )
    }

    /// The `1 / (L + M_CP)` prefactor of the rate objective.
    pub fn rate_prefactor(&self) -> f64 {
        1.0 / (self.num_subcarriers + self.cp_length) as f64
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Per-subcarrier powers plus the water level that produced them.
/// `water_level` is `None` for the degenerate all-zero-gain allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    pub powers: Vec<f64>,
    pub water_level: Option<f64>,
}

impl PowerAllocation {
    pub fn total_power(&self) -> f64 {
        self.powers.iter().sum()
    }
}

/// Water-filling over subcarrier power gains. Zero-gain subcarriers are
/// excluded from the bisection and receive zero power; if every gain is zero
/// the allocation is all zeros with an undefined water level.
pub fn waterfill(gains: &[f64], sys: &SystemParams, tol: f64) -> PowerAllocation {
    assert!(tol > 0.0, "tolerance must be positive");
    debug_assert!(gains.iter().all(|g| *g >= 0.0));
    let sigma2 = sys.noise_power_w;
    let p_max = sys.max_power_w;

    // sigma^2 / g_l for the active subcarriers; the floor each power sits on.
    let floors: Vec<f64> = gains
        .iter()
        .filter(|g| **g > 0.0)
        .map(|g| sigma2 / g)
        .collect();
    if floors.is_empty() {
        return PowerAllocation {
            powers: vec![0.0; gains.len()],
            water_level: None,
        };
    }
    let floor_min = floors.iter().cloned().fold(f64::INFINITY, f64::min);
    let floor_max = floors.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    let sum_at = |mu: f64| floors.iter().map(|&f| (mu - f).max(0.0)).sum::<f64>();

    // sum_at(lo) = 0 and sum_at(hi) >= p_max bracket the budget.
    let mut lo = floor_min;
    let mut hi = floor_max + p_max;
    for _ in 0..WATERFILL_MAX_ITERS {
        if p_max - sum_at(lo) <= tol * p_max {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if sum_at(mid) <= p_max {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Taking the under-filled endpoint keeps sum p <= P_max.
    let mu = lo;
    let powers: Vec<f64> = gains
        .iter()
        .map(|&g| {
            if g > 0.0 {
                (mu - sigma2 / g).max(0.0)
            } else {
                0.0
            }
        })
        .collect();
    PowerAllocation {
        powers,
        water_level: Some(mu),
    }
}

/// Achievable rate in bits/s/Hz:
/// `1/(L + M_CP) * sum_l log2(1 + p_l g_l / sigma^2)`.
pub fn achievable_rate(gains: &[f64], alloc: &PowerAllocation, sys: &SystemParams) -> f64 {
    assert_eq!(gains.len(), alloc.powers.len());
    let sigma2 = sys.noise_power_w;
    let sum: f64 = gains
        .iter()
        .zip(&alloc.powers)
        .map(|(&g, &p)| (1.0 + p * g / sigma2).log2())
        .sum();
    sys.rate_prefactor() * sum
}

/// Per-subcarrier MRT beamforming vectors, scaled to carry the allocated
/// powers: `w_l = sqrt(p_l) * c_l / ||c_l||`.
#[derive(Debug, Clone)]
pub struct Beamformer {
    /// `vectors[l-1]` is the length-`N_t` beamformer of subcarrier `l`.
    pub vectors: Vec<Vec<Complex64>>,
}

impl Beamformer {
    /// `|w_l^H c_l|^2` against an explicit channel vector.
    pub fn received_power(&self, subcarrier: usize, channel_vec: &[Complex64]) -> f64 {
        let w = &self.vectors[subcarrier - 1];
        assert_eq!(w.len(), channel_vec.len());
        let inner: Complex64 = w
            .iter()
            .zip(channel_vec)
            .map(|(wi, ci)| wi.conj() * ci)
            .sum();
        inner.norm_sqr()
    }
}

pub fn mrt_beamformer(
    channel: &WidebandChannel,
    placement: &AntennaPlacement,
    alloc: &PowerAllocation,
) -> Result<Beamformer> {
    let l_total = channel.params().num_subcarriers;
    assert_eq!(alloc.powers.len(), l_total);
    let mut vectors = Vec::with_capacity(l_total);
    for sub in 1..=l_total {
        let c_vec: Vec<Complex64> = placement
            .indices()
            .iter()
            .map(|&v| channel.cfr_at(v, sub))
            .collect::<Result<_>>()?;
        let p = alloc.powers[sub - 1];
        if p > 0.0 {
            let norm_sq: f64 = c_vec.iter().map(|c| c.norm_sqr()).sum();
            if norm_sq == 0.0 {
                return Err(Error::ZeroChannelVector { subcarrier: sub });
            }
            let scale = p.sqrt() / norm_sq.sqrt();
            vectors.push(c_vec.iter().map(|c| c * scale).collect());
        } else {
            vectors.push(vec![Complex64::new(0.0, 0.0); placement.len()]);
        }
    }
    Ok(Beamformer { vectors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelModelParams;
    use crate::grid::SamplingGrid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sys(sigma2: f64, p_max: f64, l: usize, cp: usize) -> SystemParams {
        SystemParams::new(sigma2, p_max, l, cp).unwrap()
    }

    #[test]
    fn dbm_conversion() {
        assert!((dbm_to_watts(46.0) - 39.810717055349734).abs() < 1e-12);
        assert!((dbm_to_watts(-60.0) - 1e-9).abs() < 1e-24);
        assert_eq!(dbm_to_watts(30.0), 1.0);
    }

    #[test]
    fn waterfill_symmetric() {
        let alloc = waterfill(&[1.0, 1.0], &sys(1.0, 2.0, 2, 0), DEFAULT_WATERFILL_TOL);
        assert!((alloc.powers[0] - 1.0).abs() < 1e-9);
        assert!((alloc.powers[1] - 1.0).abs() < 1e-9);
        assert!((alloc.water_level.unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn waterfill_two_active() {
        // KKT by hand: mu = 1.25, p = [0.75, 0.25].
        let alloc = waterfill(&[2.0, 1.0], &sys(1.0, 1.0, 2, 0), DEFAULT_WATERFILL_TOL);
        assert!((alloc.water_level.unwrap() - 1.25).abs() < 1e-9);
        assert!((alloc.powers[0] - 0.75).abs() < 1e-9);
        assert!((alloc.powers[1] - 0.25).abs() < 1e-9);
    }

    #[test]
    fn waterfill_shuts_off_weak_subcarrier() {
        // mu = 1.1 < sigma^2 / 0.1 = 10, so the weak subcarrier gets nothing.
        let alloc = waterfill(&[10.0, 0.1], &sys(1.0, 1.0, 2, 0), DEFAULT_WATERFILL_TOL);
        assert!((alloc.water_level.unwrap() - 1.1).abs() < 1e-9);
        assert!((alloc.powers[0] - 1.0).abs() < 1e-9);
        assert_eq!(alloc.powers[1], 0.0);
    }

    #[test]
    fn waterfill_all_zero_gains() {
        let s = sys(1.0, 1.0, 3, 0);
        let alloc = waterfill(&[0.0, 0.0, 0.0], &s, DEFAULT_WATERFILL_TOL);
        assert_eq!(alloc.powers, vec![0.0; 3]);
        assert_eq!(alloc.water_level, None);
        assert_eq!(achievable_rate(&[0.0, 0.0, 0.0], &alloc, &s), 0.0);
    }

    #[test]
    fn waterfill_zero_gains_are_skipped() {
        let s = sys(1.0, 1.0, 3, 0);
        let alloc = waterfill(&[2.0, 0.0, 1.0], &s, DEFAULT_WATERFILL_TOL);
        assert_eq!(alloc.powers[1], 0.0);
        assert!((alloc.total_power() - 1.0).abs() <= 1e-9);
        assert!((alloc.water_level.unwrap() - 1.25).abs() < 1e-9);
    }

    #[test]
    fn waterfill_kkt_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..300 {
            let l = rng.gen_range(1..=8);
            let gains: Vec<f64> = (0..l).map(|_| rng.gen::<f64>() * 10.0 + 1e-3).collect();
            let s = sys(
                10f64.powf(rng.gen_range(-9.0..0.0)),
                10f64.powf(rng.gen_range(-1.0..2.0)),
                l,
                0,
            );
            let alloc = waterfill(&gains, &s, DEFAULT_WATERFILL_TOL);
            let mu = alloc.water_level.unwrap();
            let total = alloc.total_power();
            assert!(total <= s.max_power_w * (1.0 + 1e-12));
            assert!((total - s.max_power_w).abs() <= 1e-9 * s.max_power_w);
            for (g, p) in gains.iter().zip(&alloc.powers) {
                let floor = s.noise_power_w / g;
                if *p > 0.0 {
                    assert!((p - (mu - floor)).abs() <= 1e-12 * mu.abs().max(1.0));
                } else {
                    assert!(mu <= floor + 1e-8 * floor.max(1.0));
                }
            }
        }
    }

    #[test]
    fn rate_hand_cases() {
        let s = sys(1.0, 2.0, 2, 0);
        let alloc = PowerAllocation {
            powers: vec![1.0, 1.0],
            water_level: Some(2.0),
        };
        assert_eq!(achievable_rate(&[1.0, 1.0], &alloc, &s), 1.0);

        let zero = PowerAllocation {
            powers: vec![0.0, 0.0],
            water_level: None,
        };
        assert_eq!(achievable_rate(&[1.0, 1.0], &zero, &s), 0.0);
    }

    #[test]
    fn rate_matches_water_level_form() {
        // The closed water-filled form sums log2(mu g / sigma^2) over active
        // subcarriers; both routes must agree.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let l = rng.gen_range(2..=64);
            let gains: Vec<f64> = (0..l).map(|_| rng.gen::<f64>() * 3e-6 + 1e-9).collect();
            let s = sys(1e-9, 39.810717055349734, l, 6);
            let alloc = waterfill(&gains, &s, DEFAULT_WATERFILL_TOL);
            let direct = achievable_rate(&gains, &alloc, &s);
            let mu = alloc.water_level.unwrap();
            let closed: f64 = gains
                .iter()
                .zip(&alloc.powers)
                .filter(|(_, p)| **p > 0.0)
                .map(|(g, _)| (mu * g / s.noise_power_w).log2())
                .sum::<f64>()
                * s.rate_prefactor();
            assert!(
                (direct - closed).abs() <= 1e-9 * direct.max(1.0),
                "direct {direct} vs closed {closed}"
            );
        }
    }

    #[test]
    fn rate_monotone_in_gains() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let s = sys(0.1, 5.0, 6, 2);
        for _ in 0..200 {
            let gains: Vec<f64> = (0..6).map(|_| rng.gen::<f64>() + 1e-6).collect();
            let bigger: Vec<f64> = gains.iter().map(|g| g * (1.0 + rng.gen::<f64>())).collect();
            let r0 = {
                let a = waterfill(&gains, &s, DEFAULT_WATERFILL_TOL);
                achievable_rate(&gains, &a, &s)
            };
            let r1 = {
                let a = waterfill(&bigger, &s, DEFAULT_WATERFILL_TOL);
                achievable_rate(&bigger, &a, &s)
            };
            assert!(r1 >= r0 - 1e-12);
        }
    }

    #[test]
    fn scale_covariance() {
        let s = sys(1.0, 10.0, 4, 0);
        let gains = [1.0, 2.0, 3.0, 4.0];
        let alpha = 3.5;
        let scaled: Vec<f64> = gains.iter().map(|g| g * alpha).collect();

        // With a fixed allocation the SNR terms scale by exactly alpha.
        let alloc = waterfill(&gains, &s, DEFAULT_WATERFILL_TOL);
        let manual: f64 = gains
            .iter()
            .zip(&alloc.powers)
            .map(|(&g, &p)| (1.0 + alpha * p * g / s.noise_power_w).log2())
            .sum::<f64>()
            * s.rate_prefactor();
        assert!((achievable_rate(&scaled, &alloc, &s) - manual).abs() < 1e-12);

        // With every subcarrier active the KKT solution is affine in the
        // inverse gains: p'_l = P/L + (p_l - P/L) / alpha.
        let alloc_scaled = waterfill(&scaled, &s, DEFAULT_WATERFILL_TOL);
        assert!(alloc.powers.iter().all(|p| *p > 0.0));
        assert!(alloc_scaled.powers.iter().all(|p| *p > 0.0));
        let uniform = s.max_power_w / gains.len() as f64;
        for (p, q) in alloc.powers.iter().zip(&alloc_scaled.powers) {
            let want = uniform + (p - uniform) / alpha;
            assert!((q - want).abs() <= 1e-8 * q.max(1e-12));
        }

        // Scaling gains and noise together leaves the allocation unchanged.
        let s_scaled = sys(alpha * 1.0, 10.0, 4, 0);
        let alloc_joint = waterfill(&scaled, &s_scaled, DEFAULT_WATERFILL_TOL);
        for (p, q) in alloc.powers.iter().zip(&alloc_joint.powers) {
            assert!((p - q).abs() <= 1e-9 * p.max(1e-12));
        }
    }

    #[test]
    fn mrt_hand_case() {
        // c = [3, 4j], p = 2: |w^H c|^2 = 2 * 25 = 50.
        let c = vec![Complex64::new(3.0, 0.0), Complex64::new(0.0, 4.0)];
        let norm_sq: f64 = c.iter().map(|x| x.norm_sqr()).sum();
        let scale = (2.0f64).sqrt() / norm_sq.sqrt();
        let w: Vec<Complex64> = c.iter().map(|x| x * scale).collect();
        let bf = Beamformer { vectors: vec![w] };
        let got = bf.received_power(1, &c);
        assert!((got - 50.0).abs() <= 1e-12 * 50.0);
    }

    #[test]
    fn mrt_identity_on_random_channel() {
        let grid = SamplingGrid::new(0.75, 8, 0.0625).unwrap();
        let params = ChannelModelParams {
            num_subcarriers: 8,
            rng_seed: 77,
            ..ChannelModelParams::default()
        };
        let ch = crate::channel::WidebandChannel::generate(&params, &grid).unwrap();
        let placement = AntennaPlacement::new(vec![1, 4, 7], &grid).unwrap();
        let gains = ch.placement_gains(&placement);
        let s = SystemParams::from_dbm(46.0, -60.0, 8, 6).unwrap();
        let alloc = waterfill(&gains, &s, DEFAULT_WATERFILL_TOL);
        let bf = mrt_beamformer(&ch, &placement, &alloc).unwrap();
        for sub in 1..=8usize {
            let c_vec: Vec<Complex64> = placement
                .indices()
                .iter()
                .map(|&v| ch.cfr_at(v, sub).unwrap())
                .collect();
            let got = bf.received_power(sub, &c_vec);
            let want = alloc.powers[sub - 1] * gains[sub - 1];
            let norm_w: f64 = bf.vectors[sub - 1].iter().map(|x| x.norm_sqr()).sum();
            assert!((norm_w - alloc.powers[sub - 1]).abs() <= 1e-12 * norm_w.max(1e-300));
            assert!(
                (got - want).abs() <= 1e-12 * want.max(1e-300),
                "sub {sub}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn mrt_zero_power_and_zero_channel() {
        let grid = SamplingGrid::new(0.75, 4, 0.0625).unwrap();
        let params = ChannelModelParams {
            num_taps: 2,
            num_subcarriers: 4,
            rng_seed: 3,
            ..ChannelModelParams::default()
        };
        let ch = crate::channel::WidebandChannel::generate(&params, &grid).unwrap();
        let placement = AntennaPlacement::new(vec![1, 4], &grid).unwrap();
        let alloc = PowerAllocation {
            powers: vec![0.0; 4],
            water_level: None,
        };
        let bf = mrt_beamformer(&ch, &placement, &alloc).unwrap();
        for v in &bf.vectors {
            assert!(v.iter().all(|c| c.norm() == 0.0));
        }
    }
}
