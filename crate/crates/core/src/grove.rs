//! Validity-constrained R*-style top-down partitioning.
//!
//! Boundary computation starts from a single node holding every weighted
//! sample point and recursively splits it while the node's total weight
//! exceeds the capacity `M`. Each split chooses the axis minimizing the total
//! margin over all candidate distributions, then the split index minimizing
//! the total volume of the two child boxes — subject to the constraint that
//! both child totals remain *valid*, i.e. decomposable into parts within
//! `[m, M]`. Validity is what guarantees every final partition lands in
//! `[m, M]`, so block utilization can be driven arbitrarily close to 1 by the
//! balance factor.
//!
//! With per-point byte weights the candidate totals are no longer a
//! continuum, so a split may find no valid candidate; a minimal two-point
//! weight correction then moves one prefix-sum position into each empty valid
//! range and the split is retried.

use crate::error::{Error, Result};
use crate::geometry::{mbr_of_points, Envelope};
use crate::ingest::WeightedSample;
use crate::scheme::{PartitionDef, PartitionScheme, Router, SplitTrace, SCHEME_FORMAT_VERSION};

/// Which splitting discipline to run.
///
/// `BlackBox` is the plain R*-tree split (lower bound `0.3·M`, no validity
/// constraint), `GrayBox` adds the validity constraint on record counts, and
/// `Grove` adds byte weights on top. `BlackBox` and `GrayBox` always operate
/// on counts; `Grove` consumes the sample's weights as given.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitStrategy {
    BlackBox,
    GrayBox,
    Grove,
}

/// Capacity bounds governing one partitioning run.
#[derive(Debug, Clone)]
pub struct CapacityConfig {
    /// Storage block size in bytes.
    pub block_size: u64,
    /// Balance factor `alpha = m/M`.
    pub alpha: f64,
    /// Minimum splitting ratio; each side of a split keeps at least
    /// `ceil(rho * n)` points.
    pub rho: f64,
    /// Desired number of partitions.
    pub desired_partitions: u64,
    /// Upper capacity `M` (record count or byte weight, per mode).
    pub max_capacity: f64,
    /// Lower capacity `m`.
    pub min_capacity: f64,
    /// True when capacities are byte weights rather than record counts.
    pub weighted: bool,
}

impl CapacityConfig {
    /// Build a config directly from explicit capacity bounds.
    pub fn explicit(min_capacity: f64, max_capacity: f64, rho: f64) -> Result<Self> {
        if !(min_capacity > 0.0 && min_capacity <= max_capacity) {
            return Err(Error::InvalidConfig(format!(
                "capacity bounds must satisfy 0 < m <= M, got m={min_capacity}, M={max_capacity}"
            )));
        }
        check_rho(rho)?;
        Ok(CapacityConfig {
            block_size: 0,
            alpha: min_capacity / max_capacity,
            rho,
            desired_partitions: 0,
            max_capacity,
            min_capacity,
            weighted: false,
        })
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if !(0.0..=0.5).contains(&rho) {
        return Err(Error::InvalidConfig(format!(
            "minimum splitting ratio must lie in [0, 0.5], got {rho}"
        )));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "balance factor must lie in (0, 1), got {alpha}"
        )));
    }
    Ok(())
}

/// Derive capacity bounds from a sample.
///
/// Record-count mode sets `M = ceil(|S|·B/D)` and `m = max(1, floor(alpha·M))`,
/// both integers. Weighted mode targets `N = ceil(D/B)` partitions and sets
/// `M = ceil(W/N)`, `m = alpha·M` as reals. Errors when the sample's total is
/// not a valid partition size for the derived `[m, M]`, citing the minimum
/// total that would make any sample valid.
pub fn compute_capacity(
    sample: &WeightedSample,
    block_size: u64,
    alpha: f64,
    rho: f64,
    weighted: bool,
) -> Result<CapacityConfig> {
    let cfg = compute_capacity_unchecked(sample, block_size, alpha, rho, weighted)?;
    let total = if weighted {
        sample.total_weight()
    } else {
        sample.len() as f64
    };
    if !is_valid(total, cfg.min_capacity, cfg.max_capacity) {
        let min_valid = min_valid_size(cfg.min_capacity, cfg.max_capacity).unwrap_or(f64::INFINITY);
        return Err(Error::InvalidTotal {
            total,
            min_capacity: cfg.min_capacity,
            max_capacity: cfg.max_capacity,
            min_valid,
        });
    }
    Ok(cfg)
}

/// As [`compute_capacity`] but without the validity gate on the sample
/// total, for partitioners that do not enforce `[m, M]` totals.
pub fn compute_capacity_unchecked(
    sample: &WeightedSample,
    block_size: u64,
    alpha: f64,
    rho: f64,
    weighted: bool,
) -> Result<CapacityConfig> {
    check_alpha(alpha)?;
    check_rho(rho)?;
    if block_size == 0 {
        return Err(Error::InvalidConfig("block size must be positive".into()));
    }
    if sample.total_input_bytes == 0 {
        return Err(Error::EmptyInput("sample reports zero input bytes".into()));
    }
    let count = sample.len() as u64;
    if count == 0 {
        return Err(Error::EmptyInput("sample has no points".into()));
    }

    let (max_capacity, min_capacity, desired_partitions) = if weighted {
        let desired = sample.total_input_bytes.div_ceil(block_size).max(1);
        let total = sample.total_weight();
        let max_capacity = (total / desired as f64).ceil();
        (max_capacity, alpha * max_capacity, desired)
    } else {
        let d = sample.total_input_bytes as u128;
        let numer = count as u128 * block_size as u128;
        let max_capacity = numer.div_ceil(d) as f64;
        let min_capacity = (alpha * max_capacity).floor().max(1.0);
        let desired = (count as f64 / max_capacity).ceil() as u64;
        (max_capacity, min_capacity, desired)
    };

    if min_capacity > max_capacity {
        return Err(Error::InvalidConfig(format!(
            "derived capacities are inverted: m={min_capacity} > M={max_capacity}"
        )));
    }
    Ok(CapacityConfig {
        block_size,
        alpha,
        rho,
        desired_partitions,
        max_capacity,
        min_capacity,
        weighted,
    })
}

/// Minimum sample storage size (bytes) that guarantees a valid partitioning
/// for balance factor `alpha`, sampling ratio `r`, and block size `B`:
/// `ceil(alpha/(1-alpha)) * alpha * ceil(r*B)`.
pub fn min_sample_bytes(alpha: f64, ratio: f64, block_size: u64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "sampling ratio must lie in (0, 1], got {ratio}"
        )));
    }
    Ok((alpha / (1.0 - alpha)).ceil() * alpha * (ratio * block_size as f64).ceil())
}

/// True iff a total of `size` can be decomposed into parts each within
/// `[min_capacity, max_capacity]`: `ceil(S/M) <= floor(S/m)`.
pub fn is_valid(size: f64, min_capacity: f64, max_capacity: f64) -> bool {
    if size <= 0.0 {
        return false;
    }
    (size / max_capacity).ceil() <= (size / min_capacity).floor()
}

/// Threshold `S* = ceil(m/(M-m)) * m` above which every total is valid.
/// Undefined when `m == M` (only exact multiples of `M` are valid then).
pub fn min_valid_size(min_capacity: f64, max_capacity: f64) -> Result<f64> {
    if !(min_capacity > 0.0 && min_capacity < max_capacity) {
        return Err(Error::InvalidConfig(format!(
            "minimum valid size needs 0 < m < M, got m={min_capacity}, M={max_capacity}"
        )));
    }
    Ok((min_capacity / (max_capacity - min_capacity)).ceil() * min_capacity)
}

/// All position ranges `[v_s, v_e]` such that splitting a total weight `W`
/// at any position inside leaves both sides valid w.r.t. `[m, M]`. Ranges are
/// merged and sorted ascending. Errors when `W` itself is invalid.
pub fn enumerate_valid_ranges(
    total: f64,
    min_capacity: f64,
    max_capacity: f64,
) -> Result<Vec<(f64, f64)>> {
    let (m, cap) = (min_capacity, max_capacity);
    if !is_valid(total, m, cap) {
        let min_valid = min_valid_size(m, cap).unwrap_or(f64::INFINITY);
        return Err(Error::InvalidTotal {
            total,
            min_capacity: m,
            max_capacity: cap,
            min_valid,
        });
    }

    // Left-valid positions are U_i [i*m, i*M]; consecutive ranges touch once
    // i >= ceil(m/(M-m)), so the enumeration is bounded by that index and the
    // tail collapses into a single range. Right-valid positions mirror them
    // from W downward. The valid ranges are the pairwise intersections.
    let left = valid_prefix_ranges(total, m, cap);
    let right: Vec<(f64, f64)> = valid_prefix_ranges(total, m, cap)
        .into_iter()
        .map(|(s, e)| (total - e, total - s))
        .collect();
    let mut out = Vec::new();
    for &(ls, le) in &left {
        for &(rs, re) in &right {
            let s = ls.max(rs);
            let e = le.min(re);
            if s <= e {
                out.push((s, e));
            }
        }
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(merge_ranges(out))
}

/// Merged ranges of prefix sums `v <= total` that are valid sizes.
fn valid_prefix_ranges(total: f64, m: f64, cap: f64) -> Vec<(f64, f64)> {
    let i_merge = if m < cap {
        (m / (cap - m)).ceil()
    } else {
        f64::INFINITY
    };
    let i_max = (total / m).floor();
    let mut out = Vec::new();
    let mut i = 1.0;
    while i <= i_max {
        if i >= i_merge {
            // From here on the ranges overlap into a continuum.
            out.push((i * m, total));
            break;
        }
        out.push((i * m, (i * cap).min(total)));
        i += 1.0;
    }
    merge_ranges(out)
}

fn merge_ranges(ranges: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(ranges.len());
    for (s, e) in ranges {
        match out.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => out.push((s, e)),
        }
    }
    out
}

/// Minimal two-point weight corrections making every given empty valid range
/// contain a prefix-sum position. Weights must be listed in the split sort
/// order; ranges must be ascending and disjoint. The total weight is
/// preserved by construction. Returns the number of corrections applied.
pub fn correct_weights(weights: &mut [f64], empty_ranges: &[(f64, f64)]) -> usize {
    let n = weights.len();
    if n < 2 {
        return 0;
    }
    let mut positions: Vec<f64> = Vec::with_capacity(n);
    let mut acc = 0.0;
    for w in weights.iter() {
        acc += w;
        positions.push(acc);
    }

    let mut applied = 0;
    let mut t = 0usize;
    for &(v_s, v_e) in empty_ranges {
        let mid = 0.5 * (v_s + v_e);
        while t < n && positions[t] <= v_e {
            t += 1;
        }
        if t >= n {
            // No position follows the range; nothing to move.
            continue;
        }
        if t + 1 < n {
            // Pull the first position past the range back to the middle and
            // push the difference onto the next point. Writing the new
            // weights as differences of positions makes the re-summed
            // prefix land on `mid` as exactly as the arithmetic allows.
            let delta = positions[t] - mid;
            let prev = if t == 0 { 0.0 } else { positions[t - 1] };
            weights[t] = mid - prev;
            weights[t + 1] += delta;
            positions[t] = mid;
            debug_assert!(weights[t] > 0.0 && weights[t + 1] > 0.0);
        } else {
            // Only the final position remains; advance its predecessor into
            // the range instead so the total stays put.
            let delta = mid - positions[t - 1];
            weights[t - 1] += delta;
            weights[t] -= delta;
            positions[t - 1] = mid;
            debug_assert!(weights[t - 1] > 0.0 && weights[t] > 0.0);
        }
        applied += 1;
    }
    applied
}

/// Candidate window for a node of `n` points: each side keeps at least
/// `base` points, raised to `ceil(rho*n)`, clamped so the window is
/// never empty.
fn candidate_window(n: usize, base: usize, rho: f64) -> (usize, usize) {
    let rho_lo = (rho * n as f64).ceil() as usize;
    let lo = base.max(rho_lo).max(1).min(n / 2);
    (lo, n - lo)
}

/// Margin-minimizing split axis over candidate distributions
/// `k in [m_eff, n - m_eff]`; ties resolve to the lower axis index.
pub fn choose_split_axis(points: &[impl AsRef<[f64]>], m_eff: usize) -> Result<usize> {
    let n = points.len();
    if n < 2 || n < 2 * m_eff {
        return Err(Error::InvalidConfig(format!(
            "no candidate splits for n={n}, m_eff={m_eff}"
        )));
    }
    let dim = points[0].as_ref().len();
    let mut order: Vec<u32> = (0..n as u32).collect();
    let coord = |i: u32, axis: usize| points[i as usize].as_ref()[axis];
    let mut best_axis = 0usize;
    let mut best_sum = f64::INFINITY;
    let mut scratch = MarginScan::new(n, dim);
    for axis in 0..dim {
        sort_by_axis(&mut order, axis, &coord);
        let sum = scratch.margin_sum(&order, m_eff, |i| points[i as usize].as_ref());
        if sum < best_sum {
            best_sum = sum;
            best_axis = axis;
        }
    }
    Ok(best_axis)
}

fn sort_by_axis(order: &mut [u32], axis: usize, coord: &impl Fn(u32, usize) -> f64) {
    order.sort_unstable_by(|&a, &b| {
        coord(a, axis)
            .partial_cmp(&coord(b, axis))
            .unwrap()
            .then(a.cmp(&b))
    });
}

/// Scratch buffers for margin scans: suffix margins plus a running prefix box.
struct MarginScan {
    suffix_margin: Vec<f64>,
    prefix: Box2,
}

impl MarginScan {
    fn new(n: usize, dim: usize) -> Self {
        MarginScan {
            suffix_margin: vec![0.0; n + 1],
            prefix: Box2::new(dim),
        }
    }

    fn margin_sum<'a>(&mut self, order: &[u32], m_eff: usize, point: impl Fn(u32) -> &'a [f64]) -> f64 {
        let n = order.len();
        self.suffix_margin.resize(n + 1, 0.0);
        let mut suffix = Box2::new(self.prefix.dim());
        for k in (1..n).rev() {
            suffix.include(point(order[k]));
            self.suffix_margin[k] = suffix.margin();
        }
        self.prefix.reset();
        let mut sum = 0.0;
        for k in 1..n {
            self.prefix.include(point(order[k - 1]));
            if k >= m_eff && k <= n - m_eff {
                sum += self.prefix.margin() + self.suffix_margin[k];
            }
        }
        sum
    }
}

/// Mutable bounding box used by the scans.
#[derive(Clone)]
struct Box2 {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Box2 {
    fn new(dim: usize) -> Self {
        Box2 {
            lo: vec![f64::INFINITY; dim],
            hi: vec![f64::NEG_INFINITY; dim],
        }
    }

    fn dim(&self) -> usize {
        self.lo.len()
    }

    fn reset(&mut self) {
        self.lo.fill(f64::INFINITY);
        self.hi.fill(f64::NEG_INFINITY);
    }

    fn include(&mut self, coords: &[f64]) {
        for (k, c) in coords.iter().enumerate() {
            self.lo[k] = self.lo[k].min(*c);
            self.hi[k] = self.hi[k].max(*c);
        }
    }

    fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).product()
    }

    fn margin(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).sum()
    }

    fn overlap_volume(&self, other: &Box2) -> f64 {
        let mut v = 1.0;
        for k in 0..self.dim() {
            let side = self.hi[k].min(other.hi[k]) - self.lo[k].max(other.lo[k]);
            if side < 0.0 {
                return 0.0;
            }
            v *= side;
        }
        v
    }
}

/// Split-point search shared by all three strategies: minimize the total
/// volume of the two child boxes over the candidate window, ties broken by
/// smaller overlap volume, then better balance `|2k - n|`, then smaller `k`.
/// `validity` filters candidates to those whose prefix and remainder weight
/// sums are both valid w.r.t. the given `total`. Returns the chosen index
/// together with its prefix weight, or `None` when no candidate qualifies.
///
/// The prefix weight is accumulated in scan order and handed back so callers
/// can pass the exact validated child totals down the recursion instead of
/// re-summing them in a different order.
fn best_split_index<'a>(
    order: &[u32],
    point: impl Fn(u32) -> &'a [f64],
    weight: impl Fn(u32) -> f64,
    dim: usize,
    total: f64,
    window: (usize, usize),
    validity: Option<(f64, f64)>,
) -> Option<(usize, f64)> {
    let n = order.len();
    let (k_lo, k_hi) = window;
    if n < 2 || k_lo > k_hi {
        return None;
    }

    // Suffix boxes for k in [k_lo, k_hi]; prefix box grows in the scan.
    let mut suffix = vec![Box2::new(dim); k_hi - k_lo + 1];
    let mut acc = Box2::new(dim);
    for k in (k_lo..n).rev() {
        acc.include(point(order[k]));
        if k <= k_hi {
            suffix[k - k_lo] = acc.clone();
        }
    }

    let mut prefix = Box2::new(dim);
    let mut prefix_weight = 0.0;
    let mut best: Option<(f64, f64, usize, usize)> = None;
    let mut best_weight = 0.0;
    for k in 1..=k_hi {
        prefix.include(point(order[k - 1]));
        prefix_weight += weight(order[k - 1]);
        if k < k_lo {
            continue;
        }
        if let Some((min_cap, max_cap)) = validity {
            let rest = total - prefix_weight;
            if !is_valid(prefix_weight, min_cap, max_cap) || !is_valid(rest, min_cap, max_cap) {
                continue;
            }
        }
        let sfx = &suffix[k - k_lo];
        let cost = prefix.volume() + sfx.volume();
        let overlap = prefix.overlap_volume(sfx);
        let balance = (2 * k).abs_diff(n);
        let candidate = (cost, overlap, balance, k);
        let better = match &best {
            None => true,
            Some(b) => candidate < *b,
        };
        if better {
            best = Some(candidate);
            best_weight = prefix_weight;
        }
    }
    best.map(|(_, _, _, k)| (k, best_weight))
}

/// Plain R*-tree split point: points pre-sorted along the chosen axis,
/// candidates `k in [m_eff, n - m_eff]`, cost = total child volume.
pub fn choose_split_point(points: &[impl AsRef<[f64]>], m_eff: usize) -> Option<usize> {
    let n = points.len();
    if n < 2 || m_eff < 1 || n < 2 * m_eff {
        return None;
    }
    let order: Vec<u32> = (0..n as u32).collect();
    best_split_index(
        &order,
        |i| points[i as usize].as_ref(),
        |_| 1.0,
        points[0].as_ref().len(),
        n as f64,
        (m_eff, n - m_eff),
        None,
    )
    .map(|(k, _)| k)
}

/// Validity-constrained split point on record counts.
pub fn choose_valid_split_point(
    points: &[impl AsRef<[f64]>],
    min_capacity: f64,
    max_capacity: f64,
    rho: f64,
) -> Option<usize> {
    let n = points.len();
    if n < 2 {
        return None;
    }
    let base = min_capacity.ceil().max(1.0) as usize;
    let window = candidate_window(n, base, rho);
    let order: Vec<u32> = (0..n as u32).collect();
    best_split_index(
        &order,
        |i| points[i as usize].as_ref(),
        |_| 1.0,
        points[0].as_ref().len(),
        n as f64,
        window,
        Some((min_capacity, max_capacity)),
    )
    .map(|(k, _)| k)
}

/// Validity-constrained split point on weight sums. `None` means no candidate
/// keeps both sides valid; callers apply [`correct_weights`] and retry.
pub fn choose_weighted_split_point(
    points: &[impl AsRef<[f64]>],
    weights: &[f64],
    min_capacity: f64,
    max_capacity: f64,
    rho: f64,
) -> Option<usize> {
    let n = points.len();
    debug_assert_eq!(n, weights.len());
    if n < 2 {
        return None;
    }
    let window = candidate_window(n, 1, rho);
    let order: Vec<u32> = (0..n as u32).collect();
    let total: f64 = weights.iter().sum();
    best_split_index(
        &order,
        |i| points[i as usize].as_ref(),
        |i| weights[i as usize],
        points[0].as_ref().len(),
        total,
        window,
        Some((min_capacity, max_capacity)),
    )
    .map(|(k, _)| k)
}

/// Outcome of a partitioning run plus diagnostics used by invariant checks.
#[derive(Debug)]
pub struct GroveReport {
    pub scheme: PartitionScheme,
    /// Number of splits on the deepest root-to-leaf path.
    pub max_depth: usize,
    /// Weight corrections applied across the whole recursion.
    pub weight_corrections: usize,
}

/// Partition a weighted sample into boundaries whose totals all land in
/// `[m, M]`, returning the scheme with its auxiliary split tree.
pub fn grove_partition(
    sample: &WeightedSample,
    cfg: &CapacityConfig,
    strategy: SplitStrategy,
    disjoint: bool,
) -> Result<PartitionScheme> {
    grove_partition_report(sample, cfg, strategy, disjoint).map(|r| r.scheme)
}

/// As [`grove_partition`], also reporting recursion depth and corrections.
pub fn grove_partition_report(
    sample: &WeightedSample,
    cfg: &CapacityConfig,
    strategy: SplitStrategy,
    disjoint: bool,
) -> Result<GroveReport> {
    let n = sample.len();
    if n == 0 {
        return Err(Error::EmptyInput("cannot partition an empty sample".into()));
    }
    let dim = sample.points[0].dim();
    let weights: Vec<f64> = if strategy == SplitStrategy::Grove {
        if let Some(w) = sample.weights.iter().find(|w| **w <= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "sample weights must be positive, found {w}"
            )));
        }
        sample.weights.clone()
    } else {
        vec![1.0; n]
    };

    if strategy != SplitStrategy::BlackBox {
        let total: f64 = weights.iter().sum();
        if !is_valid(total, cfg.min_capacity, cfg.max_capacity) {
            let min_valid =
                min_valid_size(cfg.min_capacity, cfg.max_capacity).unwrap_or(f64::INFINITY);
            return Err(Error::InvalidTotal {
                total,
                min_capacity: cfg.min_capacity,
                max_capacity: cfg.max_capacity,
                min_valid,
            });
        }
    }

    let mut splitter = Splitter {
        coords: sample.points.iter().map(|p| p.coords.as_slice()).collect(),
        weights,
        dim,
        cfg,
        strategy,
        parts: Vec::new(),
        max_depth: 0,
        weight_corrections: 0,
    };
    let mut order: Vec<u32> = (0..n as u32).collect();
    let total: f64 = splitter.weights.iter().sum();
    let root = splitter.split_node(&mut order, total, 0)?;

    let scheme = PartitionScheme {
        version: SCHEME_FORMAT_VERSION,
        dim,
        disjoint,
        partitions: splitter.parts,
        router: Router::Tree { root },
    };
    scheme.validate()?;
    Ok(GroveReport {
        scheme,
        max_depth: splitter.max_depth,
        weight_corrections: splitter.weight_corrections,
    })
}

struct Splitter<'a> {
    coords: Vec<&'a [f64]>,
    weights: Vec<f64>,
    dim: usize,
    cfg: &'a CapacityConfig,
    strategy: SplitStrategy,
    parts: Vec<PartitionDef>,
    max_depth: usize,
    weight_corrections: usize,
}

impl<'a> Splitter<'a> {
    /// `total` is the node's weight as validated by the parent's split test;
    /// threading it down keeps every validity decision consistent with the
    /// arithmetic that produced the node.
    fn split_node(&mut self, seg: &mut [u32], total: f64, depth: usize) -> Result<SplitTrace> {
        self.max_depth = self.max_depth.max(depth);
        let n = seg.len();
        if total <= self.cfg.max_capacity || n < 2 {
            return Ok(self.emit_leaf(seg, total));
        }

        let window = candidate_window(n, self.base_count(), self.cfg.rho);
        let axis = self.pick_axis(seg, window);
        {
            let coords = &self.coords;
            sort_by_axis(seg, axis, &|i: u32, a: usize| coords[i as usize][a]);
        }

        let mut k = self.pick_split(seg, window, total);
        if k.is_none() && self.strategy != SplitStrategy::BlackBox {
            self.apply_corrections(seg, total)?;
            // Retry over the full candidate range: the corrections guarantee
            // a position inside every valid range, but not inside the
            // rho-restricted window.
            k = self.pick_split(seg, (1, n - 1), total);
        }
        let (k, left_total) = k.ok_or_else(|| {
            Error::Internal(format!(
                "no valid split found for node of {n} points, total {total}, \
                 capacities [{}, {}]",
                self.cfg.min_capacity, self.cfg.max_capacity
            ))
        })?;

        let below = self.coords[seg[k - 1] as usize][axis];
        let above = self.coords[seg[k] as usize][axis];
        let mut split_at = 0.5 * (below + above);
        // Equal values route to the right child, so the plane must sit
        // strictly above the left boundary point whenever the coordinates
        // differ.
        if split_at <= below {
            split_at = above;
        }

        let (left_seg, right_seg) = seg.split_at_mut(k);
        let left = self.split_node(left_seg, left_total, depth + 1)?;
        let right = self.split_node(right_seg, total - left_total, depth + 1)?;
        Ok(SplitTrace::Split {
            axis,
            coord: split_at,
            left: Box::new(left),
            right: Box::new(right),
        })
    }

    fn base_count(&self) -> usize {
        match self.strategy {
            // Classic R*-tree lower bound.
            SplitStrategy::BlackBox => ((0.3 * self.cfg.max_capacity).floor() as usize).max(1),
            SplitStrategy::GrayBox => (self.cfg.min_capacity.ceil() as usize).max(1),
            SplitStrategy::Grove => {
                if self.cfg.weighted {
                    1
                } else {
                    (self.cfg.min_capacity.ceil() as usize).max(1)
                }
            }
        }
    }

    fn pick_axis(&self, seg: &mut [u32], window: (usize, usize)) -> usize {
        let coord = |i: u32, a: usize| self.coords[i as usize][a];
        let mut best_axis = 0usize;
        let mut best_sum = f64::INFINITY;
        let mut scan = MarginScan::new(seg.len(), self.dim);
        let mut scratch = seg.to_vec();
        for axis in 0..self.dim {
            sort_by_axis(&mut scratch, axis, &coord);
            let sum = scan.margin_sum(&scratch, window.0, |i| self.coords[i as usize]);
            if sum < best_sum {
                best_sum = sum;
                best_axis = axis;
            }
        }
        // Degenerate data: no extent along the margin-chosen axis. Fall back
        // to the axis with the widest spread so the split plane separates
        // points whenever any axis can.
        if self.axis_spread(seg, best_axis) == 0.0 {
            let widest = (0..self.dim)
                .max_by(|&a, &b| {
                    self.axis_spread(seg, a)
                        .partial_cmp(&self.axis_spread(seg, b))
                        .unwrap()
                })
                .unwrap_or(0);
            if self.axis_spread(seg, widest) > 0.0 {
                best_axis = widest;
            }
        }
        best_axis
    }

    fn axis_spread(&self, seg: &[u32], axis: usize) -> f64 {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &i in seg {
            let c = self.coords[i as usize][axis];
            lo = lo.min(c);
            hi = hi.max(c);
        }
        hi - lo
    }

    fn pick_split(&self, seg: &[u32], window: (usize, usize), total: f64) -> Option<(usize, f64)> {
        let validity = match self.strategy {
            SplitStrategy::BlackBox => None,
            _ => Some((self.cfg.min_capacity, self.cfg.max_capacity)),
        };
        best_split_index(
            seg,
            |i| self.coords[i as usize],
            |i| self.weights[i as usize],
            self.dim,
            total,
            window,
            validity,
        )
    }

    fn apply_corrections(&mut self, seg: &[u32], total: f64) -> Result<()> {
        let ranges = enumerate_valid_ranges(total, self.cfg.min_capacity, self.cfg.max_capacity)?;
        let mut node_weights: Vec<f64> = seg.iter().map(|&i| self.weights[i as usize]).collect();
        let mut positions = node_weights.clone();
        let mut acc = 0.0;
        for p in positions.iter_mut() {
            acc += *p;
            *p = acc;
        }
        let empty: Vec<(f64, f64)> = ranges
            .into_iter()
            .filter(|&(s, e)| {
                let idx = positions.partition_point(|&p| p < s);
                !(idx < positions.len() && positions[idx] <= e)
            })
            .collect();
        if empty.is_empty() {
            return Ok(());
        }
        self.weight_corrections += correct_weights(&mut node_weights, &empty);
        for (slot, &i) in seg.iter().enumerate() {
            self.weights[i as usize] = node_weights[slot];
        }
        Ok(())
    }

    fn emit_leaf(&mut self, seg: &[u32], total: f64) -> SplitTrace {
        let id = self.parts.len() as u32;
        let mbb = mbr_of_points(seg.iter().map(|&i| self.coords[i as usize]))
            .unwrap_or_else(|| Envelope {
                lo: vec![0.0; self.dim],
                hi: vec![0.0; self.dim],
            });
        self.parts.push(PartitionDef {
            id,
            lo: mbb.lo,
            hi: mbb.hi,
            expected_weight: total,
        });
        SplitTrace::Leaf { leaf_id: id }
    }
}
