//! Sampling grid, placement DAG and the fixed-hop best-gain dynamic program.
//!
//! The movement region is a line of length `A` metres sampled into `M`
//! equally spaced candidate positions. Two antennas may only occupy positions
//! at least `a_min` metres apart, which in index units becomes `j - i >= s`
//! with `s = ceil(a_min / delta)`. Feasible placements of `n` antennas are
//! exactly the `n`-vertex paths of the DAG whose edge rule is that index gap.
//!
//! Vertex indices are 1-based everywhere on the public surface.

use crate::error::Error;
use crate::Result;

/// The discretized movement region.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingGrid {
    region_length_m: f64,
    num_points: usize,
    spacing_m: f64,
    min_sep_m: f64,
    min_sep_idx: usize,
}

impl SamplingGrid {
    /// Builds a grid of `num_points` positions over `region_length_m` metres
    /// with a minimum antenna separation of `min_sep_m` metres.
    pub fn new(region_length_m: f64, num_points: usize, min_sep_m: f64) -> Result<Self> {
        if !region_length_m.is_finite() || region_length_m <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "region length must be positive, got {region_length_m}"
            )));
        }
        if num_points < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 sampling points, got {num_points}"
            )));
        }
        if !min_sep_m.is_finite() || min_sep_m <= 0.0 || min_sep_m > region_length_m {
            return Err(Error::InvalidParameter(format!(
                "minimum separation must lie in (0, {region_length_m}], got {min_sep_m}"
            )));
        }
        let spacing_m = region_length_m / (num_points - 1) as f64;
        // Tightest integer gap implying the metric constraint:
        // s * spacing >= min_sep > (s - 1) * spacing. Start from ceil and fix
        // up against float rounding of the quotient.
        let mut s = (min_sep_m / spacing_m).ceil() as usize;
        s = s.max(1);
        while s > 1 && (s - 1) as f64 * spacing_m >= min_sep_m {
            s -= 1;
        }
        while (s as f64) * spacing_m < min_sep_m {
            s += 1;
        }
        Ok(Self {
            region_length_m,
            num_points,
            spacing_m,
            min_sep_m,
            min_sep_idx: s,
        })
    }

    pub fn region_length_m(&self) -> f64 {
        self.region_length_m
    }

    /// Number of candidate positions `M`.
    pub fn num_points(&self) -> usize {
        self.num_points
    }

    /// Grid step `delta = A / (M - 1)` in metres.
    pub fn spacing_m(&self) -> f64 {
        self.spacing_m
    }

    pub fn min_sep_m(&self) -> f64 {
        self.min_sep_m
    }

    /// Minimum index gap `s` between two occupied positions.
    pub fn min_sep_idx(&self) -> usize {
        self.min_sep_idx
    }

    /// Position of 1-based index `k`: `(k - 1) * delta`.
    pub fn position(&self, k: usize) -> f64 {
        assert!(
            k >= 1 && k <= self.num_points,
            "position index {k} outside 1..={}",
            self.num_points
        );
        (k - 1) as f64 * self.spacing_m
    }
}

/// An ordered feasible selection of grid indices (a path in the placement DAG).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AntennaPlacement {
    indices: Vec<usize>,
}

impl AntennaPlacement {
    /// Validates that `indices` is a feasible placement on `grid`: 1-based,
    /// strictly increasing, consecutive gaps at least `min_sep_idx`.
    pub fn new(indices: Vec<usize>, grid: &SamplingGrid) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidParameter("empty placement".into()));
        }
        let m = grid.num_points();
        let s = grid.min_sep_idx();
        for &v in &indices {
            if v < 1 || v > m {
                return Err(Error::IndexOutOfRange(format!(
                    "placement index {v} outside 1..={m}"
                )));
            }
        }
        for pair in indices.windows(2) {
            if pair[1] < pair[0] + s {
                return Err(Error::Infeasible(format!(
                    "indices {} and {} violate minimum gap {s}",
                    pair[0], pair[1]
                )));
            }
        }
        Ok(Self { indices })
    }

    pub(crate) fn from_indices_unchecked(indices: Vec<usize>) -> Self {
        Self { indices }
    }

    /// 1-based grid indices, strictly increasing.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Antenna positions in metres.
    pub fn positions_m(&self, grid: &SamplingGrid) -> Vec<f64> {
        self.indices.iter().map(|&k| grid.position(k)).collect()
    }
}

impl std::fmt::Display for AntennaPlacement {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{{")?;
        for (i, v) in self.indices.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "}}")
    }
}

/// The feasibility DAG over sampling positions. Edges are implicit:
/// `(i, j)` is an edge iff `j - i >= min_sep_idx`.
#[derive(Debug, Clone)]
pub struct PlacementGraph {
    grid: SamplingGrid,
}

impl PlacementGraph {
    pub fn new(grid: SamplingGrid) -> Self {
        Self { grid }
    }

    pub fn grid(&self) -> &SamplingGrid {
        &self.grid
    }

    pub fn vertex_count(&self) -> usize {
        self.grid.num_points()
    }

    /// Outgoing neighbors of `v`, ascending: `{v+s, ..., M}`. `None` stands
    /// for the empty prefix, whose neighbor set is the full vertex set.
    pub fn neighbors(&self, v: Option<usize>) -> std::ops::RangeInclusive<usize> {
        let m = self.grid.num_points();
        match v {
            None => 1..=m,
            Some(v) => {
                debug_assert!(v >= 1 && v <= m, "vertex {v} outside 1..={m}");
                // Clamping to m + 1 makes the range empty when v has no
                // outgoing edges.
                let lo = (v + self.grid.min_sep_idx()).min(m + 1);
                lo..=m
            }
        }
    }

    /// Whether at least one `num_antennas`-vertex path exists.
    pub fn is_feasible(&self, num_antennas: usize) -> bool {
        num_antennas != 0 && (num_antennas - 1) * self.grid.min_sep_idx() < self.grid.num_points()
    }

    /// Number of feasible placements: `C(M - (s-1)(N_t-1), N_t)`.
    pub fn placement_count(&self, num_antennas: usize) -> u128 {
        let m = self.grid.num_points() as u128;
        let s = self.grid.min_sep_idx() as u128;
        let n = num_antennas as u128;
        if n == 0 {
            return 0;
        }
        let shrink = (s - 1) * (n - 1);
        if m < shrink {
            return 0;
        }
        binomial(m - shrink, n)
    }

    /// Lazily yields every feasible placement exactly once, in lexicographic
    /// order of index vectors.
    pub fn placements(&self, num_antennas: usize) -> Placements {
        let m = self.grid.num_points();
        let s = self.grid.min_sep_idx();
        let first: Vec<usize> = (0..num_antennas).map(|k| 1 + k * s).collect();
        let next = if num_antennas >= 1 && first.last().copied().unwrap_or(0) <= m {
            Some(first)
        } else {
            None
        };
        Placements { m, s, next }
    }

    /// Dynamic-programming tables for `best_k_hop_gain` lookups with hop
    /// counts up to `max_hops`, over the given per-vertex weights.
    pub fn best_gain_tables(&self, weights: &[f64], max_hops: usize) -> BestGainTables {
        let m = self.grid.num_points();
        assert_eq!(weights.len(), m, "need one weight per vertex");
        debug_assert!(
            weights.iter().all(|w| *w >= 0.0),
            "weights must be nonnegative"
        );
        assert!(max_hops >= 1);
        let s = self.grid.min_sep_idx();

        // best[h-1][v-1]: max total weight of an h-vertex path starting at v.
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(max_hops);
        // suffix_val[h-1][v-1]: max over u >= v of best[h-1][u-1]; index m is
        // a -inf sentinel. suffix_arg holds the smallest maximizing u.
        let mut suffix_val: Vec<Vec<f64>> = Vec::with_capacity(max_hops);
        let mut suffix_arg: Vec<Vec<usize>> = Vec::with_capacity(max_hops);

        for h in 1..=max_hops {
            let row: Vec<f64> = if h == 1 {
                weights.to_vec()
            } else {
                let prev_suffix = &suffix_val[h - 2];
                (1..=m)
                    .map(|v| {
                        if v + s <= m {
                            let tail = prev_suffix[v + s - 1];
                            if tail.is_finite() {
                                weights[v - 1] + tail
                            } else {
                                f64::NEG_INFINITY
                            }
                        } else {
                            f64::NEG_INFINITY
                        }
                    })
                    .collect()
            };
            let mut val = vec![f64::NEG_INFINITY; m + 1];
            let mut arg = vec![0usize; m + 1];
            for v in (1..=m).rev() {
                // >= keeps the smallest index among ties.
                if row[v - 1] >= val[v] {
                    val[v - 1] = row[v - 1];
                    arg[v - 1] = v;
                } else {
                    val[v - 1] = val[v];
                    arg[v - 1] = arg[v];
                }
            }
            rows.push(row);
            suffix_val.push(val);
            suffix_arg.push(arg);
        }
        BestGainTables {
            m,
            s,
            suffix_val,
            suffix_arg,
        }
    }

    /// Maximum of the summed vertex weights over all `hops`-vertex paths whose
    /// first vertex is an outgoing neighbor of `start` (anywhere when `start`
    /// is `None`), together with one argmax path.
    ///
    /// Ties resolve to the lexicographically smallest optimal path. Returns
    /// `None` when no such path exists.
    pub fn best_k_hop_gain(
        &self,
        weights: &[f64],
        hops: usize,
        start: Option<usize>,
    ) -> Option<KHopPath> {
        let tables = self.best_gain_tables(weights, hops);
        tables.best_path_from(hops, start)
    }
}

/// A fixed-hop path and its total vertex weight.
#[derive(Debug, Clone, PartialEq)]
pub struct KHopPath {
    pub gain: f64,
    pub vertices: Vec<usize>,
}

/// Precomputed fixed-hop DP tables; bound evaluations reduce to lookups.
#[derive(Debug, Clone)]
pub struct BestGainTables {
    m: usize,
    s: usize,
    suffix_val: Vec<Vec<f64>>,
    suffix_arg: Vec<Vec<usize>>,
}

impl BestGainTables {
    pub fn max_hops(&self) -> usize {
        self.suffix_val.len()
    }

    /// First admissible vertex for a path continuing from `start`.
    fn first_vertex(&self, start: Option<usize>) -> Option<usize> {
        match start {
            None => Some(1),
            Some(v) => {
                let lo = v + self.s;
                (lo <= self.m).then_some(lo)
            }
        }
    }

    /// Best achievable gain of a `hops`-vertex path continuing from `start`,
    /// or `None` when no such path exists.
    pub fn best_gain_from(&self, hops: usize, start: Option<usize>) -> Option<f64> {
        assert!(hops >= 1 && hops <= self.max_hops());
        let lo = self.first_vertex(start)?;
        let v = self.suffix_val[hops - 1][lo - 1];
        v.is_finite().then_some(v)
    }

    /// Like [`best_gain_from`](Self::best_gain_from) but also reconstructs the
    /// lexicographically smallest argmax path.
    pub fn best_path_from(&self, hops: usize, start: Option<usize>) -> Option<KHopPath> {
        let gain = self.best_gain_from(hops, start)?;
        let mut vertices = Vec::with_capacity(hops);
        let mut lo = self.first_vertex(start).expect("checked by best_gain_from");
        for h in (1..=hops).rev() {
            let v = self.suffix_arg[h - 1][lo - 1];
            debug_assert!(v >= lo && v <= self.m);
            vertices.push(v);
            lo = v + self.s;
        }
        Some(KHopPath { gain, vertices })
    }
}

/// Lazy lexicographic stream of feasible placements.
pub struct Placements {
    m: usize,
    s: usize,
    next: Option<Vec<usize>>,
}

impl Iterator for Placements {
    type Item = AntennaPlacement;

    fn next(&mut self) -> Option<Self::Item> {
        let current = self.next.take()?;
        let n = current.len();
        // Advance the odometer: bump the rightmost index that still leaves
        // room for its successors, then repack them minimally.
        let mut succ = current.clone();
        let mut advanced = false;
        for k in (0..n).rev() {
            let cap = self.m - (n - 1 - k) * self.s;
            if succ[k] < cap {
                succ[k] += 1;
                for j in k + 1..n {
                    succ[j] = succ[j - 1] + self.s;
                }
                advanced = true;
                break;
            }
        }
        if advanced {
            self.next = Some(succ);
        }
        Some(AntennaPlacement::from_indices_unchecked(current))
    }
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}
