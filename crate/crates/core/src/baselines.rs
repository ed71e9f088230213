//! Reference partitioners behind the same scheme interface: STR packing,
//! Kd-tree median splits, and space-filling-curve (Z-order / Hilbert) runs.
//! Baselines operate on unweighted record counts, matching their published
//! implementations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{mbr_of_points, Envelope};
use crate::grove::CapacityConfig;
use crate::ingest::WeightedSample;
use crate::scheme::{PartitionDef, PartitionScheme, Router, SplitTrace, SCHEME_FORMAT_VERSION};

/// Space-filling curve flavor used for key encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    ZOrder,
    Hilbert,
}

impl CurveKind {
    /// Key of a grid cell with `bits` bits per dimension.
    pub fn encode_cell(&self, cell: &[u64], bits: u32) -> u64 {
        match self {
            CurveKind::ZOrder => interleave_bits(cell, bits),
            CurveKind::Hilbert => {
                let transposed = hilbert_transpose(cell, bits);
                interleave_bits(&transposed, bits)
            }
        }
    }

    /// Key of a point: coordinates are normalized onto the `2^bits` grid
    /// (clamped when the point lies outside the domain), then encoded.
    pub fn encode_point(&self, coords: &[f64], domain: &Envelope, bits: u32) -> u64 {
        let cell = grid_cell(coords, domain, bits);
        self.encode_cell(&cell, bits)
    }
}

/// Widest per-dimension resolution keeping keys in 63 bits.
pub fn default_curve_bits(dim: usize) -> u32 {
    (63 / dim.max(1)) as u32
}

/// Normalize a point onto the `2^bits`-per-dimension grid over `domain`,
/// clamping coordinates that fall outside.
pub fn grid_cell(coords: &[f64], domain: &Envelope, bits: u32) -> Vec<u64> {
    let n = 1u64 << bits;
    coords
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            let extent = domain.hi[k] - domain.lo[k];
            if extent <= 0.0 {
                return 0;
            }
            let t = ((x - domain.lo[k]) / extent * n as f64).floor();
            if t < 0.0 {
                0
            } else {
                (t as u64).min(n - 1)
            }
        })
        .collect()
}

/// Interleave the top `bits` bits of each value, dimension 0 most
/// significant within each bit layer.
fn interleave_bits(cell: &[u64], bits: u32) -> u64 {
    let mut key = 0u64;
    for j in (0..bits).rev() {
        for &c in cell {
            key = (key << 1) | ((c >> j) & 1);
        }
    }
    key
}

/// Transposed Hilbert coordinates (Gray-code rotation form). Interleaving the
/// result yields the Hilbert index.
fn hilbert_transpose(cell: &[u64], bits: u32) -> Vec<u64> {
    let n = cell.len();
    let mut x = cell.to_vec();
    if bits == 0 || n == 0 {
        return x;
    }
    let m = 1u64 << (bits - 1);
    // Inverse undo
    let mut q = m;
    while q > 1 {
        let p = q - 1;
        for i in 0..n {
            if x[i] & q != 0 {
                x[0] ^= p;
            } else {
                let t = (x[0] ^ x[i]) & p;
                x[0] ^= t;
                x[i] ^= t;
            }
        }
        q >>= 1;
    }
    // Gray encode
    for i in 1..n {
        let prev = x[i - 1];
        x[i] ^= prev;
    }
    let mut t = 0u64;
    let mut q = m;
    while q > 1 {
        if x[n - 1] & q != 0 {
            t ^= q - 1;
        }
        q >>= 1;
    }
    for xi in x.iter_mut() {
        *xi ^= t;
    }
    x
}

/// Point key under the Z-order curve.
pub fn z_encode(coords: &[f64], domain: &Envelope, bits: u32) -> u64 {
    CurveKind::ZOrder.encode_point(coords, domain, bits)
}

/// Point key under the Hilbert curve.
pub fn hilbert_encode(coords: &[f64], domain: &Envelope, bits: u32) -> u64 {
    CurveKind::Hilbert.encode_point(coords, domain, bits)
}

/// Smallest integer degree with `n^d >= desired`.
pub fn str_degree(desired: u64, dim: u32) -> u64 {
    let mut n = (desired.max(1) as f64)
        .powf(1.0 / dim as f64)
        .floor()
        .max(1.0) as u64;
    while pow_lt(n, dim, desired) {
        n += 1;
    }
    while n > 1 && !pow_lt(n - 1, dim, desired) {
        n -= 1;
    }
    n
}

fn pow_lt(base: u64, exp: u32, limit: u64) -> bool {
    let mut acc: u128 = 1;
    for _ in 0..exp {
        acc *= base as u128;
        if acc >= limit as u128 {
            return false;
        }
    }
    acc < limit as u128
}

fn check_sample(sample: &WeightedSample) -> Result<usize> {
    if sample.is_empty() {
        return Err(Error::EmptyInput("cannot partition an empty sample".into()));
    }
    Ok(sample.dim())
}

/// Sort-tile-recursive packing: pick the degree `n` with `n^d >= P` desired
/// leaves, then recursively sort-and-slice dimension by dimension into `n`
/// equal-count runs (remainder spread over the first runs).
pub fn str_partition(
    sample: &WeightedSample,
    cfg: &CapacityConfig,
    disjoint: bool,
) -> Result<PartitionScheme> {
    let dim = check_sample(sample)?;
    let count = sample.len() as u64;
    let desired = (count as f64 / cfg.max_capacity).ceil().max(1.0) as u64;
    let degree = str_degree(desired, dim as u32);

    let coords: Vec<&[f64]> = sample.points.iter().map(|p| p.coords.as_slice()).collect();
    let mut order: Vec<u32> = (0..coords.len() as u32).collect();
    let mut parts = Vec::new();
    let root = str_slice(&coords, &mut order, 0, dim, degree as usize, &mut parts);
    finish_tree_scheme(dim, disjoint, parts, root)
}

fn str_slice(
    coords: &[&[f64]],
    seg: &mut [u32],
    level: usize,
    dim: usize,
    degree: usize,
    parts: &mut Vec<PartitionDef>,
) -> SplitTrace {
    if level == dim {
        return emit_count_leaf(coords, seg, parts);
    }
    seg.sort_unstable_by(|&a, &b| {
        coords[a as usize][level]
            .partial_cmp(&coords[b as usize][level])
            .unwrap()
            .then(a.cmp(&b))
    });
    let n = seg.len();
    let base = n / degree;
    let rem = n % degree;
    // Runs and the boundary coordinate between consecutive non-empty runs.
    let mut runs: Vec<(usize, usize)> = Vec::with_capacity(degree);
    let mut start = 0usize;
    for r in 0..degree {
        let size = base + usize::from(r < rem);
        if size > 0 {
            runs.push((start, start + size));
        }
        start += size;
    }
    // boundaries[i] separates run i from run i+1
    let mut boundaries: Vec<f64> = Vec::with_capacity(runs.len().saturating_sub(1));
    for w in runs.windows(2) {
        let below = coords[seg[w[0].1 - 1] as usize][level];
        let above = coords[seg[w[1].0] as usize][level];
        boundaries.push(split_plane(below, above));
    }
    let mut subtrees: Vec<SplitTrace> = Vec::with_capacity(runs.len());
    for &(lo, hi) in &runs {
        let run = &mut seg[lo..hi];
        subtrees.push(str_slice(coords, run, level + 1, dim, degree, parts));
    }
    fold_runs(subtrees, &boundaries, level)
}

/// Fold ordered run subtrees into a right-leaning split chain.
fn fold_runs(mut subtrees: Vec<SplitTrace>, boundaries: &[f64], axis: usize) -> SplitTrace {
    let mut tree = subtrees.pop().expect("at least one run");
    for (sub, &boundary) in subtrees.into_iter().rev().zip(boundaries.iter().rev()) {
        tree = SplitTrace::Split {
            axis,
            coord: boundary,
            left: Box::new(sub),
            right: Box::new(tree),
        };
    }
    tree
}

/// Split plane strictly above the left boundary point whenever possible, so
/// the "equal goes right" routing matches the slicing.
fn split_plane(below: f64, above: f64) -> f64 {
    let mid = 0.5 * (below + above);
    if mid <= below {
        above
    } else {
        mid
    }
}

fn emit_count_leaf(coords: &[&[f64]], seg: &[u32], parts: &mut Vec<PartitionDef>) -> SplitTrace {
    let id = parts.len() as u32;
    let mbb = mbr_of_points(seg.iter().map(|&i| coords[i as usize])).expect("non-empty run");
    parts.push(PartitionDef {
        id,
        lo: mbb.lo,
        hi: mbb.hi,
        expected_weight: seg.len() as f64,
    });
    SplitTrace::Leaf { leaf_id: id }
}

fn finish_tree_scheme(
    dim: usize,
    disjoint: bool,
    parts: Vec<PartitionDef>,
    root: SplitTrace,
) -> Result<PartitionScheme> {
    let scheme = PartitionScheme {
        version: SCHEME_FORMAT_VERSION,
        dim,
        disjoint,
        partitions: parts,
        router: Router::Tree { root },
    };
    scheme.validate()?;
    Ok(scheme)
}

/// Median splits cycling through the axes (`axis = depth mod d`), stopping
/// when a leaf holds at most `M` points. The left half takes `ceil(n/2)`.
pub fn kdtree_partition(
    sample: &WeightedSample,
    cfg: &CapacityConfig,
    disjoint: bool,
) -> Result<PartitionScheme> {
    let dim = check_sample(sample)?;
    let coords: Vec<&[f64]> = sample.points.iter().map(|p| p.coords.as_slice()).collect();
    let mut order: Vec<u32> = (0..coords.len() as u32).collect();
    let mut parts = Vec::new();
    let root = kd_split(&coords, &mut order, 0, dim, cfg.max_capacity, &mut parts);
    finish_tree_scheme(dim, disjoint, parts, root)
}

fn kd_split(
    coords: &[&[f64]],
    seg: &mut [u32],
    depth: usize,
    dim: usize,
    max_capacity: f64,
    parts: &mut Vec<PartitionDef>,
) -> SplitTrace {
    let n = seg.len();
    if n as f64 <= max_capacity || n < 2 {
        return emit_count_leaf(coords, seg, parts);
    }
    let axis = depth % dim;
    seg.sort_unstable_by(|&a, &b| {
        coords[a as usize][axis]
            .partial_cmp(&coords[b as usize][axis])
            .unwrap()
            .then(a.cmp(&b))
    });
    let k = n.div_ceil(2);
    let plane = split_plane(coords[seg[k - 1] as usize][axis], coords[seg[k] as usize][axis]);
    let (l, r) = seg.split_at_mut(k);
    let left = kd_split(coords, l, depth + 1, dim, max_capacity, parts);
    let right = kd_split(coords, r, depth + 1, dim, max_capacity, parts);
    SplitTrace::Split {
        axis,
        coord: plane,
        left: Box::new(left),
        right: Box::new(right),
    }
}

/// Sort the sample along a space-filling curve and cut it into
/// `ceil(|S|/M)` consecutive runs of near-equal count. Assignment uses the
/// key-range table rather than the run MBRs.
pub fn curve_partition(
    sample: &WeightedSample,
    cfg: &CapacityConfig,
    curve: CurveKind,
    disjoint: bool,
) -> Result<PartitionScheme> {
    let dim = check_sample(sample)?;
    let bits = default_curve_bits(dim);
    let domain = sample.mbr().expect("non-empty sample");

    let keys: Vec<u64> = sample
        .points
        .iter()
        .map(|p| curve.encode_point(&p.coords, &domain, bits))
        .collect();
    let mut order: Vec<u32> = (0..keys.len() as u32).collect();
    order.sort_unstable_by(|&a, &b| keys[a as usize].cmp(&keys[b as usize]).then(a.cmp(&b)));

    let count = sample.len();
    let runs = (count as f64 / cfg.max_capacity).ceil().max(1.0) as usize;
    let base = count / runs;
    let rem = count % runs;

    let mut parts = Vec::with_capacity(runs);
    let mut upper_keys = Vec::with_capacity(runs);
    let mut start = 0usize;
    for r in 0..runs {
        let size = base + usize::from(r < rem);
        if size == 0 {
            continue;
        }
        let run = &order[start..start + size];
        let mbb = mbr_of_points(run.iter().map(|&i| sample.points[i as usize].coords.as_slice()))
            .expect("non-empty run");
        parts.push(PartitionDef {
            id: parts.len() as u32,
            lo: mbb.lo,
            hi: mbb.hi,
            expected_weight: size as f64,
        });
        upper_keys.push(keys[run[size - 1] as usize]);
        start += size;
    }
    // The final run owns every key up to the curve's end.
    if let Some(last) = upper_keys.last_mut() {
        *last = u64::MAX;
    }

    let scheme = PartitionScheme {
        version: SCHEME_FORMAT_VERSION,
        dim,
        disjoint,
        partitions: parts,
        router: Router::CurveRanges {
            curve,
            bits,
            domain,
            upper_keys,
        },
    };
    scheme.validate()?;
    Ok(scheme)
}
