//! Block-weighted partition quality metrics over realized partition
//! statistics: total volume, pairwise overlap (including the self-overlap of
//! multi-block partitions), total margin, block utilization, and the
//! population standard deviation of partition sizes.

use serde::{Deserialize, Serialize};

use crate::assign::PartitionStats;
use crate::error::{Error, Result};

/// Blocks occupied by a partition of `size_bytes`: `ceil(size/B)`, zero for
/// an empty partition.
pub fn block_count(size_bytes: u64, block_size: u64) -> Result<u64> {
    if block_size == 0 {
        return Err(Error::InvalidConfig("block size must be positive".into()));
    }
    Ok(size_bytes.div_ceil(block_size))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QualityReport {
    pub q1_total_volume: f64,
    pub q2_total_overlap: f64,
    pub q3_total_margin: f64,
    pub q4_block_utilization: f64,
    pub q5_size_stddev: f64,
    pub partition_count: usize,
    pub total_blocks: u64,
    pub total_bytes: u64,
    /// Partitions with zero records, excluded from the metrics.
    pub dropped_empty: usize,
    /// Q1..Q3 scaled by the volume (margin for Q3) of the union of all
    /// partition boxes, for cross-dataset comparison.
    pub q1_normalized: f64,
    pub q2_normalized: f64,
    pub q3_normalized: f64,
}

/// Compute Q1..Q5 for the given realized partitions. Empty partitions are
/// dropped (and counted in the report); an all-empty input is an error since
/// utilization is undefined.
pub fn quality_report(stats: &[PartitionStats], block_size: u64) -> Result<QualityReport> {
    if block_size == 0 {
        return Err(Error::InvalidConfig("block size must be positive".into()));
    }
    let live: Vec<&PartitionStats> = stats.iter().filter(|s| s.record_count > 0).collect();
    let dropped_empty = stats.len() - live.len();
    if live.is_empty() {
        return Err(Error::EmptyInput(
            "all partitions are empty; block utilization is undefined".into(),
        ));
    }

    let blocks: Vec<u64> = live
        .iter()
        .map(|s| block_count(s.size_bytes, block_size))
        .collect::<Result<_>>()?;

    let mut q1 = 0.0;
    let mut q3 = 0.0;
    let mut q2 = 0.0;
    for (s, &b) in live.iter().zip(&blocks) {
        let volume = s.mbb.volume();
        q1 += b as f64 * volume;
        q3 += b as f64 * s.mbb.margin();
        // self-overlap of a partition spanning several blocks
        q2 += (b * (b - 1)) as f64 / 2.0 * volume;
    }
    for i in 0..live.len() {
        for j in (i + 1)..live.len() {
            if let Some(overlap) = live[i].mbb.intersection(&live[j].mbb)? {
                q2 += (blocks[i] * blocks[j]) as f64 * overlap.volume();
            }
        }
    }

    let total_bytes: u64 = live.iter().map(|s| s.size_bytes).sum();
    let total_blocks: u64 = blocks.iter().sum();
    let q4 = total_bytes as f64 / (block_size as f64 * total_blocks as f64);

    let l = live.len() as f64;
    let mean = total_bytes as f64 / l;
    let var = live
        .iter()
        .map(|s| {
            let d = s.size_bytes as f64 - mean;
            d * d
        })
        .sum::<f64>()
        / l;
    let q5 = var.sqrt();

    let mut union = live[0].mbb.clone();
    for s in &live[1..] {
        union.include_envelope(&s.mbb);
    }
    let domain_volume = union.volume();
    let domain_margin = union.margin();
    let norm = |v: f64, by: f64| if by > 0.0 { v / by } else { 0.0 };

    Ok(QualityReport {
        q1_total_volume: q1,
        q2_total_overlap: q2,
        q3_total_margin: q3,
        q4_block_utilization: q4,
        q5_size_stddev: q5,
        partition_count: live.len(),
        total_blocks,
        total_bytes,
        dropped_empty,
        q1_normalized: norm(q1, domain_volume),
        q2_normalized: norm(q2, domain_volume),
        q3_normalized: norm(q3, domain_margin),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Envelope;

    const MIB: u64 = 1 << 20;

    fn stat(id: u32, lo: &[f64], hi: &[f64], size: u64, count: u64) -> PartitionStats {
        PartitionStats {
            id,
            mbb: Envelope::new(lo.to_vec(), hi.to_vec()).unwrap(),
            size_bytes: size,
            record_count: count,
        }
    }

    #[test]
    fn block_count_values() {
        assert_eq!(block_count(100 * MIB, 128 * MIB).unwrap(), 1);
        assert_eq!(block_count(200 * MIB, 128 * MIB).unwrap(), 2);
        assert_eq!(block_count(0, 128 * MIB).unwrap(), 0);
        assert!(block_count(1, 0).is_err());
    }

    #[test]
    fn report_hand_example() {
        // pi1 = [0,2]^2 at 100 MiB (1 block), pi2 = [1,3]^2 at 200 MiB (2 blocks)
        let stats = vec![
            stat(0, &[0.0, 0.0], &[2.0, 2.0], 100 * MIB, 10),
            stat(1, &[1.0, 1.0], &[3.0, 3.0], 200 * MIB, 10),
        ];
        let r = quality_report(&stats, 128 * MIB).unwrap();
        assert_eq!(r.q1_total_volume, 12.0);
        // cross pair 1*2*vol([1,2]^2) = 2, self term (2*1/2)*4 = 4
        assert_eq!(r.q2_total_overlap, 6.0);
        assert_eq!(r.q3_total_margin, 12.0);
        assert_eq!(r.q4_block_utilization, 300.0 / 384.0);
        assert_eq!(r.q5_size_stddev, 50.0 * MIB as f64);
        assert_eq!(r.total_blocks, 3);
    }

    #[test]
    fn single_one_block_partition_has_no_overlap() {
        let stats = vec![stat(0, &[0.0, 0.0], &[1.0, 1.0], 10, 1)];
        let r = quality_report(&stats, 128).unwrap();
        assert_eq!(r.q2_total_overlap, 0.0);
    }

    #[test]
    fn equal_sizes_have_zero_stddev() {
        let stats = vec![
            stat(0, &[0.0, 0.0], &[1.0, 1.0], 64, 4),
            stat(1, &[2.0, 2.0], &[3.0, 3.0], 64, 4),
        ];
        let r = quality_report(&stats, 128).unwrap();
        assert_eq!(r.q5_size_stddev, 0.0);
    }

    #[test]
    fn self_term_matches_unit_copy_expansion() {
        // A single partition with b blocks behaves like b unit copies of the
        // same box: C(b,2) pairwise overlaps of its own volume.
        let b = 5u64;
        let stats = vec![stat(0, &[0.0, 0.0], &[3.0, 2.0], b * 128, 1)];
        let r = quality_report(&stats, 128).unwrap();
        let volume = 6.0;
        let expected = (b * (b - 1)) as f64 / 2.0 * volume;
        assert_eq!(r.q2_total_overlap, expected);
    }

    #[test]
    fn report_invariant_under_permutation() {
        let stats = vec![
            stat(0, &[0.0, 0.0], &[2.0, 2.0], 300, 3),
            stat(1, &[1.0, 1.0], &[3.0, 3.0], 500, 5),
            stat(2, &[2.5, 0.0], &[4.0, 1.0], 150, 2),
        ];
        let mut reversed = stats.clone();
        reversed.reverse();
        let a = quality_report(&stats, 128).unwrap();
        let b = quality_report(&reversed, 128).unwrap();
        assert_eq!(a.q1_total_volume, b.q1_total_volume);
        assert_eq!(a.q2_total_overlap, b.q2_total_overlap);
        assert_eq!(a.q3_total_margin, b.q3_total_margin);
        assert_eq!(a.q4_block_utilization, b.q4_block_utilization);
        assert_eq!(a.q5_size_stddev, b.q5_size_stddev);
    }

    #[test]
    fn empty_partitions_are_dropped() {
        let stats = vec![
            stat(0, &[0.0, 0.0], &[1.0, 1.0], 100, 2),
            stat(1, &[0.0, 0.0], &[0.0, 0.0], 0, 0),
        ];
        let r = quality_report(&stats, 128).unwrap();
        assert_eq!(r.partition_count, 1);
        assert_eq!(r.dropped_empty, 1);

        let all_empty = vec![stat(0, &[0.0, 0.0], &[0.0, 0.0], 0, 0)];
        assert!(quality_report(&all_empty, 128).is_err());
    }

    #[test]
    fn q4_is_one_iff_exact_multiples() {
        let stats = vec![
            stat(0, &[0.0, 0.0], &[1.0, 1.0], 256, 2),
            stat(1, &[2.0, 2.0], &[3.0, 3.0], 128, 1),
        ];
        let r = quality_report(&stats, 128).unwrap();
        assert_eq!(r.q4_block_utilization, 1.0);

        let stats = vec![stat(0, &[0.0, 0.0], &[1.0, 1.0], 129, 1)];
        let r = quality_report(&stats, 128).unwrap();
        assert!(r.q4_block_utilization < 1.0);
    }
}
