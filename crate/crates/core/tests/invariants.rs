//! Property and invariant tests: geometry algebra, split validity
//! preservation, weight conservation, routing consistency, and metric
//! equivalence against naive expansions.

mod common;

use common::{sample_from_coords, temp_dir, ValidityOracle};
use proptest::prelude::*;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rsgrove::assign::{run_assignment, PartitionStats};
use rsgrove::baselines::{curve_partition, CurveKind};
use rsgrove::bench::gen_uniform;
use rsgrove::geometry::Envelope;
use rsgrove::grove::{
    compute_capacity, correct_weights, enumerate_valid_ranges, grove_partition_report, is_valid,
    CapacityConfig, SplitStrategy,
};
use rsgrove::ingest::{assign_weights, build_histogram, draw_sample, Record, RecordSchema};
use rsgrove::metrics::{block_count, quality_report};
use rsgrove::scheme::Router;

fn envelope_strategy(dim: usize) -> impl Strategy<Value = Envelope> {
    (
        prop::collection::vec(-100.0f64..100.0, dim),
        prop::collection::vec(-100.0f64..100.0, dim),
    )
        .prop_map(|(a, b)| {
            let lo: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x.min(*y)).collect();
            let hi: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x.max(*y)).collect();
            Envelope::new(lo, hi).unwrap()
        })
}

proptest! {
    #[test]
    fn union_contains_inputs_and_is_monotone(
        a in envelope_strategy(3),
        b in envelope_strategy(3),
    ) {
        let u = a.union(&b).unwrap();
        prop_assert!(u.contains_envelope(&a));
        prop_assert!(u.contains_envelope(&b));
        prop_assert!(u.volume() >= a.volume().max(b.volume()));
        prop_assert!(u.margin() >= a.margin().max(b.margin()));
        // commutative, exact
        prop_assert_eq!(a.union(&b).unwrap(), b.union(&a).unwrap());
    }

    #[test]
    fn union_associative_exact(
        a in envelope_strategy(2),
        b in envelope_strategy(2),
        c in envelope_strategy(2),
    ) {
        let left = a.union(&b).unwrap().union(&c).unwrap();
        let right = a.union(&b.union(&c).unwrap()).unwrap();
        prop_assert_eq!(left, right);
    }

    #[test]
    fn intersection_is_contained(a in envelope_strategy(3), b in envelope_strategy(3)) {
        if let Some(i) = a.intersection(&b).unwrap() {
            prop_assert!(a.contains_envelope(&i));
            prop_assert!(b.contains_envelope(&i));
        } else {
            prop_assert!(!a.intersects(&b));
        }
    }

    #[test]
    fn volume_and_margin_translation_invariant(
        e in envelope_strategy(3),
        shift in prop::collection::vec(-50.0f64..50.0, 3),
    ) {
        let moved = Envelope::new(
            e.lo.iter().zip(&shift).map(|(a, s)| a + s).collect(),
            e.hi.iter().zip(&shift).map(|(a, s)| a + s).collect(),
        ).unwrap();
        prop_assert!((moved.volume() - e.volume()).abs() <= 1e-9 * e.volume().max(1.0));
        prop_assert!((moved.margin() - e.margin()).abs() <= 1e-9 * e.margin().max(1.0));
    }

    #[test]
    fn enlargement_deltas_nonnegative(a in envelope_strategy(3), b in envelope_strategy(3)) {
        let (dv, dm) = a.enlargement(&b).unwrap();
        prop_assert!(dv >= 0.0);
        prop_assert!(dm >= 0.0);
    }
}

#[test]
fn validity_matches_oracle_spot_grid() {
    for m in 1..=12usize {
        for cap in m..=12 {
            let oracle = ValidityOracle::build(m, cap, 150);
            for s in 1..=150usize {
                assert_eq!(
                    is_valid(s as f64, m as f64, cap as f64),
                    oracle.is_valid(s),
                    "m={m} M={cap} S={s}"
                );
            }
        }
    }
}

#[test]
fn enumerated_ranges_agree_with_oracle_positions() {
    for (total, m, cap) in [(28.0, 9.0, 10.0), (100.0, 7.0, 9.0), (55.0, 5.0, 7.0)] {
        let oracle = ValidityOracle::build(m as usize, cap as usize, total as usize);
        let ranges = enumerate_valid_ranges(total, m, cap).unwrap();
        for v in 1..(total as usize) {
            let in_range = ranges.iter().any(|&(s, e)| s <= v as f64 && v as f64 <= e);
            let both_valid = oracle.is_valid(v) && oracle.is_valid(total as usize - v);
            assert_eq!(in_range, both_valid, "W={total} m={m} M={cap} v={v}");
        }
    }
}

fn random_points(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (0..dim).map(|_| rng.random::<f64>()).collect())
        .collect()
}

#[test]
fn grove_leaf_totals_always_valid_counts() {
    for seed in 0..8u64 {
        let n = 500 + (seed as usize) * 173;
        let sample = sample_from_coords(random_points(n, 2, seed), None);
        let cap = 20.0 + (seed % 4) as f64;
        let min = (0.9 * cap).floor();
        if !is_valid(n as f64, min, cap) {
            continue;
        }
        let cfg = CapacityConfig::explicit(min, cap, 0.3).unwrap();
        let report = grove_partition_report(&sample, &cfg, SplitStrategy::Grove, true).unwrap();
        let total: f64 = report.scheme.partitions.iter().map(|p| p.expected_weight).sum();
        assert_eq!(total, n as f64);
        for p in &report.scheme.partitions {
            assert!(
                p.expected_weight >= min && p.expected_weight <= cap,
                "seed {seed}: leaf {} outside [{min}, {cap}]",
                p.expected_weight
            );
        }
    }
}

#[test]
fn grove_weighted_leaves_valid_and_weight_conserved() {
    for seed in 0..6u64 {
        let n = 400;
        let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0xabcd);
        let weights: Vec<f64> = (0..n).map(|_| 0.5 + rng.random::<f64>()).collect();
        let total: f64 = weights.iter().sum();
        let sample = sample_from_coords(random_points(n, 2, seed), Some(weights));
        // capacity from the ceil rule, as the pipeline derives it
        let cap = (total / 12.0).ceil();
        let min = 0.93 * cap;
        if !is_valid(total, min, cap) {
            continue;
        }
        let cfg = CapacityConfig::explicit(min, cap, 0.25).unwrap();
        let report = grove_partition_report(&sample, &cfg, SplitStrategy::Grove, true).unwrap();
        let leaf_total: f64 = report.scheme.partitions.iter().map(|p| p.expected_weight).sum();
        assert!((leaf_total - total).abs() <= 1e-9 * total);
        for p in &report.scheme.partitions {
            assert!(
                p.expected_weight >= min - 1e-9 * total && p.expected_weight <= cap + 1e-9 * total,
                "leaf {} outside [{min}, {cap}]",
                p.expected_weight
            );
        }
    }
}

#[test]
fn correction_preserves_total_weight() {
    let mut rng = ChaCha12Rng::seed_from_u64(42);
    for _ in 0..50 {
        let n = 5 + (rng.random::<f64>() * 40.0) as usize;
        let mut weights: Vec<f64> = (0..n).map(|_| 50.0 + rng.random::<f64>() * 300.0).collect();
        let total: f64 = weights.iter().sum();
        let cap = total / 3.0;
        let min = 0.9 * cap;
        if !is_valid(total, min, cap) {
            continue;
        }
        let ranges = enumerate_valid_ranges(total, min, cap).unwrap();
        let mut pos = 0.0;
        let positions: Vec<f64> = weights
            .iter()
            .map(|w| {
                pos += w;
                pos
            })
            .collect();
        let empty: Vec<(f64, f64)> = ranges
            .into_iter()
            .filter(|&(s, e)| !positions.iter().any(|&p| s <= p && p <= e))
            .collect();
        correct_weights(&mut weights, &empty);
        let after: f64 = weights.iter().sum();
        assert!((after - total).abs() <= 1e-9 * total);
        assert!(weights.iter().all(|&w| w > 0.0));
        // every previously empty range now holds a position
        let mut pos = 0.0;
        let positions: Vec<f64> = weights
            .iter()
            .map(|w| {
                pos += w;
                pos
            })
            .collect();
        for (s, e) in empty {
            assert!(
                positions.iter().any(|&p| s - 1e-9 <= p && p <= e + 1e-9),
                "range [{s}, {e}] still empty"
            );
        }
    }
}

#[test]
fn recursion_depth_bounded_by_rho() {
    let n = 5000usize;
    let sample = sample_from_coords(random_points(n, 2, 7), None);
    for rho in [0.3, 0.4] {
        let cap = 40.0f64;
        let min = (0.9 * cap).floor();
        let cfg = CapacityConfig::explicit(min, cap, rho).unwrap();
        let report = grove_partition_report(&sample, &cfg, SplitStrategy::Grove, true).unwrap();
        let bound = ((n as f64).ln() / (1.0 / (1.0 - rho)).ln()).ceil() as usize;
        assert!(
            report.max_depth <= bound,
            "rho={rho}: depth {} exceeds bound {bound}",
            report.max_depth
        );
    }
}

#[test]
fn aux_tree_routes_sample_points_to_their_partitions() {
    let n = 2000usize;
    let sample = sample_from_coords(random_points(n, 3, 11), None);
    let cfg = CapacityConfig::explicit(45.0, 50.0, 0.2).unwrap();
    let scheme = rsgrove::grove::grove_partition(&sample, &cfg, SplitStrategy::Grove, true).unwrap();
    // Group points by routed leaf; each group must reproduce the partition's
    // count and tight box exactly.
    let mut counts = vec![0u64; scheme.partitions.len()];
    let mut boxes: Vec<Option<Envelope>> = vec![None; scheme.partitions.len()];
    for p in &sample.points {
        let id = scheme.lookup_point(&p.coords) as usize;
        counts[id] += 1;
        match &mut boxes[id] {
            Some(b) => b.include_point(&p.coords),
            slot => *slot = Some(Envelope::from_point(p)),
        }
    }
    for part in &scheme.partitions {
        assert_eq!(counts[part.id as usize] as f64, part.expected_weight);
        let routed = boxes[part.id as usize].as_ref().unwrap();
        assert_eq!(routed, &part.envelope());
    }
}

#[test]
fn grove_is_deterministic() {
    let sample = sample_from_coords(random_points(3000, 2, 5), None);
    let cfg = CapacityConfig::explicit(28.0, 30.0, 0.4).unwrap();
    let a = rsgrove::grove::grove_partition(&sample, &cfg, SplitStrategy::Grove, true).unwrap();
    let b = rsgrove::grove::grove_partition(&sample, &cfg, SplitStrategy::Grove, true).unwrap();
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
}

#[test]
fn sampling_is_unbiased_over_seeds() {
    let n = 10_000u64;
    let ratio = 0.2;
    let mut mean = 0.0;
    let seeds = 100u64;
    for seed in 0..seeds {
        let records = (0..n).map(|i| {
            Ok(Record {
                envelope: Envelope::new(vec![i as f64, 0.0], vec![i as f64, 0.0]).unwrap(),
                payload_size: 4,
                raw: String::new(),
            })
        });
        let s = draw_sample(records, ratio, seed).unwrap();
        mean += s.len() as f64 / seeds as f64;
    }
    let expectation = n as f64 * ratio;
    let sigma_mean = (n as f64 * ratio * (1.0 - ratio)).sqrt() / (seeds as f64).sqrt();
    assert!(
        (mean - expectation).abs() <= 3.0 * sigma_mean,
        "mean {mean} vs {expectation} (sigma of mean {sigma_mean})"
    );
}

#[test]
fn histogram_weighting_conserves_input_bytes() {
    let n = 20_000u64;
    let lines: Vec<String> = gen_uniform(n, 2, 31).collect();
    let schema = RecordSchema::point(2);
    let parse_all = || {
        lines
            .iter()
            .map(|l| rsgrove::ingest::parse_record(l, &schema))
    };
    let sample = draw_sample(parse_all(), 0.05, 3).unwrap();
    let domain = Envelope::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
    let hist = build_histogram(parse_all(), domain, vec![16, 16]).unwrap();
    assert_eq!(hist.total_bytes(), sample.total_input_bytes);
    let weighted = assign_weights(&sample, &hist).unwrap();
    let d = sample.total_input_bytes as f64;
    assert!((weighted.total_weight() - d).abs() <= 1e-9 * d);
    assert!(weighted.weights.iter().all(|&w| w > 0.0));
}

#[test]
fn quality_metrics_match_unit_copy_expansion() {
    // Integer boxes keep the arithmetic exact, so grouped block weighting
    // must equal the naive per-copy expansion bit for bit.
    let stats: Vec<PartitionStats> = vec![
        ((0.0, 0.0), (4.0, 3.0), 300u64),
        ((2.0, 1.0), (6.0, 5.0), 900),
        ((5.0, 0.0), (9.0, 2.0), 128),
        ((1.0, 2.0), (3.0, 8.0), 511),
        ((7.0, 4.0), (8.0, 9.0), 257),
    ]
    .into_iter()
    .enumerate()
    .map(|(i, (lo, hi, size))| PartitionStats {
        id: i as u32,
        mbb: Envelope::new(vec![lo.0, lo.1], vec![hi.0, hi.1]).unwrap(),
        size_bytes: size,
        record_count: 1,
    })
    .collect();
    let block = 128u64;
    let report = quality_report(&stats, block).unwrap();

    // naive expansion: every block is its own unit partition
    let mut copies: Vec<&PartitionStats> = Vec::new();
    for s in &stats {
        for _ in 0..block_count(s.size_bytes, block).unwrap() {
            copies.push(s);
        }
    }
    let naive_q1: f64 = copies.iter().map(|c| c.mbb.volume()).sum();
    let naive_q3: f64 = copies.iter().map(|c| c.mbb.margin()).sum();
    let mut naive_q2 = 0.0;
    for i in 0..copies.len() {
        for j in (i + 1)..copies.len() {
            if let Some(x) = copies[i].mbb.intersection(&copies[j].mbb).unwrap() {
                naive_q2 += x.volume();
            }
        }
    }
    assert_eq!(report.q1_total_volume, naive_q1);
    assert_eq!(report.q3_total_margin, naive_q3);
    assert_eq!(report.q2_total_overlap, naive_q2);
}

#[test]
fn replication_covers_exactly_the_overlapping_cells() {
    let sample = sample_from_coords(random_points(1500, 2, 23), None);
    let cfg = CapacityConfig::explicit(70.0, 75.0, 0.3).unwrap();
    let scheme = rsgrove::grove::grove_partition(&sample, &cfg, SplitStrategy::Grove, true).unwrap();
    let cells = match &scheme.router {
        Router::Tree { root } => root.cells(2),
        _ => unreachable!(),
    };
    let mut rng = ChaCha12Rng::seed_from_u64(99);
    for _ in 0..2000 {
        let x: f64 = rng.random();
        let y: f64 = rng.random();
        let w: f64 = rng.random::<f64>() * 0.2;
        let h: f64 = rng.random::<f64>() * 0.2;
        let e = Envelope::new(vec![x, y], vec![x + w, y + h]).unwrap();
        let mut got = scheme.replicate(&e);
        got.sort_unstable();
        // closed at lo, open at hi per the routing tie rule
        let mut want: Vec<u32> = cells
            .iter()
            .filter(|(_, lo, hi)| (0..2).all(|k| e.lo[k] < hi[k] && e.hi[k] >= lo[k]))
            .map(|(id, _, _)| *id)
            .collect();
        want.sort_unstable();
        assert_eq!(got, want);
        assert!(!got.is_empty());

        let p = vec![x, y];
        let point_ids = scheme.replicate(&Envelope::new(p.clone(), p).unwrap());
        assert_eq!(point_ids.len(), 1);
    }
}

#[test]
fn kdtree_leaf_boxes_never_overlap() {
    let sample = sample_from_coords(random_points(3000, 2, 41), None);
    let cfg = CapacityConfig::explicit(1.0, 64.0, 0.0).unwrap();
    let scheme = rsgrove::baselines::kdtree_partition(&sample, &cfg, false).unwrap();
    let total: f64 = scheme.partitions.iter().map(|p| p.expected_weight).sum();
    assert_eq!(total, 3000.0);
    for p in &scheme.partitions {
        assert!(p.expected_weight <= 64.0);
    }
    for i in 0..scheme.partitions.len() {
        for j in (i + 1)..scheme.partitions.len() {
            let a = scheme.partitions[i].envelope();
            let b = scheme.partitions[j].envelope();
            if let Some(x) = a.intersection(&b).unwrap() {
                assert_eq!(x.volume(), 0.0, "leaves {i} and {j} overlap");
            }
        }
    }
}

#[test]
fn curve_lookup_matches_table_scan() {
    let sample = sample_from_coords(random_points(2000, 2, 77), None);
    let cfg = CapacityConfig::explicit(1.0, 100.0, 0.0).unwrap();
    for curve in [CurveKind::ZOrder, CurveKind::Hilbert] {
        let scheme = curve_partition(&sample, &cfg, curve, false).unwrap();
        let Router::CurveRanges {
            curve: k,
            bits,
            domain,
            upper_keys,
        } = &scheme.router
        else {
            unreachable!()
        };
        let mut rng = ChaCha12Rng::seed_from_u64(1234);
        for _ in 0..3000 {
            let coords = vec![rng.random::<f64>() * 1.2 - 0.1, rng.random::<f64>() * 1.2 - 0.1];
            let key = k.encode_point(&coords, domain, *bits);
            let scan = upper_keys
                .iter()
                .position(|&u| key <= u)
                .unwrap_or(upper_keys.len() - 1) as u32;
            assert_eq!(scheme.lookup_point(&coords), scan);
        }
    }
}

#[test]
fn compute_capacity_rejects_unreachable_samples() {
    // 30 sample points cannot be split into parts of [95, 100]
    let mut sample = sample_from_coords(random_points(30, 2, 1), None);
    sample.total_input_bytes = 100_000;
    // B chosen so M = ceil(30 * B / D) = 100 and m = 95
    let err = compute_capacity(&sample, 333_334, 0.95, 0.0, false);
    assert!(matches!(err, Err(rsgrove::Error::InvalidTotal { .. })), "{err:?}");
}

#[test]
fn assignment_copies_respect_scheme_mode() {
    let lines = common::box_dataset_lines(3000, 0.05, 13);
    let schema = RecordSchema::envelope(2);
    let parse_all = || lines.iter().map(|l| rsgrove::ingest::parse_record(l, &schema));

    let centers: Vec<Vec<f64>> = parse_all()
        .map(|r| r.unwrap().envelope.center().coords)
        .collect();
    let sample = sample_from_coords(centers, None);
    let cfg = CapacityConfig::explicit(140.0, 150.0, 0.3).unwrap();

    for disjoint in [true, false] {
        let scheme =
            rsgrove::grove::grove_partition(&sample, &cfg, SplitStrategy::Grove, disjoint).unwrap();
        let dir = temp_dir(&format!("mode-{disjoint}"));
        let stats = run_assignment(parse_all(), &scheme, &dir).unwrap();
        let copies: u64 = stats.iter().map(|s| s.record_count).sum();
        if disjoint {
            assert!(copies >= 3000);
        } else {
            assert_eq!(copies, 3000);
        }
    }
}
