//! Partition boundaries plus the routing structure that assigns records.
//!
//! A [`PartitionScheme`] is the contract between boundary computation and the
//! assignment stage. It serializes to JSON and carries one of two routers: a
//! k-d-style binary [`SplitTrace`] whose cells tile all of space (the grove,
//! STR, and Kd-tree partitioners), or a key-range table over a space-filling
//! curve (the Z-curve and Hilbert partitioners).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::CurveKind;
use crate::error::{Error, Result};
use crate::geometry::Envelope;

pub const SCHEME_FORMAT_VERSION: u32 = 1;

/// One output partition: dense id, tight bounding box of its sample members,
/// and the sample weight it was planned to hold.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartitionDef {
    pub id: u32,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub expected_weight: f64,
}

impl PartitionDef {
    pub fn envelope(&self) -> Envelope {
        Envelope {
            lo: self.lo.clone(),
            hi: self.hi.clone(),
        }
    }
}

/// Binary tree of split hyperplanes recorded during boundary computation.
///
/// Leaves carry partition ids. The implied cells tile the infinite space:
/// the outermost bounds are unbounded, and a coordinate exactly equal to a
/// split goes to the right (higher) child.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SplitTrace {
    Split {
        axis: usize,
        coord: f64,
        left: Box<SplitTrace>,
        right: Box<SplitTrace>,
    },
    Leaf {
        leaf_id: u32,
    },
}

impl SplitTrace {
    /// Descend the splits to the unique leaf whose cell contains the point.
    pub fn lookup(&self, coords: &[f64]) -> u32 {
        let mut node = self;
        loop {
            match node {
                SplitTrace::Leaf { leaf_id } => return *leaf_id,
                SplitTrace::Split {
                    axis,
                    coord,
                    left,
                    right,
                } => {
                    node = if coords[*axis] < *coord { left } else { right };
                }
            }
        }
    }

    /// Ids of every cell intersecting `e` (boundary touch counts), by k-d
    /// range search. Points can never straddle, so they yield a single id.
    pub fn overlapping(&self, e: &Envelope) -> Vec<u32> {
        let mut out = Vec::new();
        self.collect_overlapping(e, &mut out);
        out
    }

    fn collect_overlapping(&self, e: &Envelope, out: &mut Vec<u32>) {
        match self {
            SplitTrace::Leaf { leaf_id } => out.push(*leaf_id),
            SplitTrace::Split {
                axis,
                coord,
                left,
                right,
            } => {
                // The left cell is open at `coord`, the right cell closed.
                if e.lo[*axis] < *coord {
                    left.collect_overlapping(e, out);
                }
                if e.hi[*axis] >= *coord {
                    right.collect_overlapping(e, out);
                }
            }
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            SplitTrace::Leaf { .. } => 1,
            SplitTrace::Split { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }

    /// Cell boxes of every leaf, in `(id, lo, hi)` form. Bounds are
    /// +-infinity at the outside; each cell is closed at `lo` and open at
    /// `hi` along every split, matching the lookup tie rule.
    pub fn cells(&self, dim: usize) -> Vec<(u32, Vec<f64>, Vec<f64>)> {
        let mut out = Vec::new();
        let lo = vec![f64::NEG_INFINITY; dim];
        let hi = vec![f64::INFINITY; dim];
        self.collect_cells(lo, hi, &mut out);
        out
    }

    fn collect_cells(
        &self,
        lo: Vec<f64>,
        hi: Vec<f64>,
        out: &mut Vec<(u32, Vec<f64>, Vec<f64>)>,
    ) {
        match self {
            SplitTrace::Leaf { leaf_id } => out.push((*leaf_id, lo, hi)),
            SplitTrace::Split {
                axis,
                coord,
                left,
                right,
            } => {
                let mut left_hi = hi.clone();
                left_hi[*axis] = *coord;
                left.collect_cells(lo.clone(), left_hi, out);
                let mut right_lo = lo;
                right_lo[*axis] = *coord;
                right.collect_cells(right_lo, hi, out);
            }
        }
    }
}

/// How records are routed to partitions.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Router {
    /// K-d-style split tree; cells tile all of space.
    Tree { root: SplitTrace },
    /// Space-filling-curve key ranges. Partition `i` owns the keys in
    /// `(upper_keys[i-1], upper_keys[i]]`; keys past the last bound fall in
    /// the final partition. Records are routed by the key of their center.
    CurveRanges {
        curve: CurveKind,
        bits: u32,
        domain: Envelope,
        upper_keys: Vec<u64>,
    },
}

/// Partition boundaries plus the auxiliary routing structure.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartitionScheme {
    pub version: u32,
    pub dim: usize,
    pub disjoint: bool,
    pub partitions: Vec<PartitionDef>,
    pub router: Router,
}

impl PartitionScheme {
    /// Partition ids must be dense `0..n`, and the router's leaves must
    /// biject with them.
    pub fn validate(&self) -> Result<()> {
        let n = self.partitions.len();
        if n == 0 {
            return Err(Error::EmptyInput("scheme has no partitions".into()));
        }
        for (i, p) in self.partitions.iter().enumerate() {
            if p.id as usize != i {
                return Err(Error::MalformedData(format!(
                    "partition ids not dense: index {i} holds id {}",
                    p.id
                )));
            }
            if p.lo.len() != self.dim || p.hi.len() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    got: p.lo.len(),
                });
            }
        }
        match &self.router {
            Router::Tree { root } => {
                let mut ids: Vec<u32> = root.cells(self.dim).iter().map(|c| c.0).collect();
                ids.sort_unstable();
                if ids.len() != n || ids.iter().enumerate().any(|(i, id)| *id as usize != i) {
                    return Err(Error::MalformedData(
                        "router leaves do not biject with partition ids".into(),
                    ));
                }
            }
            Router::CurveRanges {
                upper_keys, domain, ..
            } => {
                if upper_keys.len() != n {
                    return Err(Error::MalformedData(format!(
                        "key-range table has {} entries for {n} partitions",
                        upper_keys.len()
                    )));
                }
                if upper_keys.windows(2).any(|w| w[0] > w[1]) {
                    return Err(Error::MalformedData(
                        "key-range bounds are not non-decreasing".into(),
                    ));
                }
                if domain.dim() != self.dim {
                    return Err(Error::DimensionMismatch {
                        expected: self.dim,
                        got: domain.dim(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Route a point to its unique partition id.
    pub fn lookup_point(&self, coords: &[f64]) -> u32 {
        match &self.router {
            Router::Tree { root } => root.lookup(coords),
            Router::CurveRanges {
                curve,
                bits,
                domain,
                upper_keys,
            } => {
                let key = curve.encode_point(coords, domain, *bits);
                route_key(key, upper_keys)
            }
        }
    }

    /// Partition ids an envelope is replicated to in disjoint mode. Curve
    /// routers map an envelope to the single partition owning its center key.
    pub fn replicate(&self, e: &Envelope) -> Vec<u32> {
        match &self.router {
            Router::Tree { root } => root.overlapping(e),
            Router::CurveRanges { .. } => vec![self.lookup_point(&e.center().coords)],
        }
    }

    /// Union of all partition bounding boxes.
    pub fn domain_union(&self) -> Option<Envelope> {
        let mut it = self.partitions.iter();
        let first = it.next()?;
        let mut env = first.envelope();
        for p in it {
            env.include_envelope(&p.envelope());
        }
        Some(env)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let scheme: PartitionScheme = serde_json::from_str(text)?;
        scheme.validate()?;
        Ok(scheme)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// First partition whose upper key bound covers `key`; keys past the last
/// bound belong to the final partition.
pub(crate) fn route_key(key: u64, upper_keys: &[u64]) -> u32 {
    debug_assert!(!upper_keys.is_empty());
    match upper_keys.binary_search(&key) {
        Ok(mut i) => {
            // Equal bounds collapse to the first run carrying the key.
            while i > 0 && upper_keys[i - 1] == key {
                i -= 1;
            }
            i as u32
        }
        Err(i) => i.min(upper_keys.len() - 1) as u32,
    }
}
