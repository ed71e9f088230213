//! Spatial partitioning for large datasets.
//!
//! The library implements the full sampling-based partitioning workflow:
//!
//! 1. **Ingest** — parse delimited text records, draw a random sample as
//!    points, and optionally build a uniform-grid storage-size histogram that
//!    assigns a byte weight to every sample point ([`ingest`]).
//! 2. **Boundary computation** — split the weighted sample top-down with a
//!    validity-constrained R*-style node split that guarantees every final
//!    partition holds a total weight within `[m, M]` ([`grove`]), or with one
//!    of the baseline partitioners: STR, Kd-tree, Z-curve, Hilbert curve
//!    ([`baselines`]).
//! 3. **Assignment** — route every input record to its partition file(s)
//!    through the k-d-style auxiliary search structure recorded during the
//!    split, in either spatially disjoint (replicating) or overlapping mode
//!    ([`assign`]).
//!
//! Partition quality is scored with five block-weighted metrics ([`metrics`])
//! and exercised by a desk-scale query benchmark: synthetic generators, batch
//! range queries with block-cost accounting, and a partition-based spatial
//! join ([`bench`]).

pub mod assign;
pub mod baselines;
pub mod bench;
pub mod error;
pub mod geometry;
pub mod grove;
pub mod ingest;
pub mod metrics;
pub mod scheme;

pub use error::{Error, Result};
pub use geometry::{Envelope, Point};
