//! Shared helpers for integration tests: the brute-force validity oracle and
//! small dataset builders.

use rsgrove::geometry::Point;
use rsgrove::ingest::{parse_record, Record, RecordSchema, WeightedSample};
use std::path::PathBuf;

/// Dynamic-programming oracle for partition-size validity: true iff `total`
/// decomposes into integer parts each within `[m, cap]`. Independent of the
/// closed-form test it checks.
pub struct ValidityOracle {
    reachable: Vec<bool>,
}

impl ValidityOracle {
    pub fn build(m: usize, cap: usize, max_total: usize) -> Self {
        let mut reachable = vec![false; max_total + 1];
        reachable[0] = true;
        for s in 1..=max_total {
            for part in m..=cap.min(s) {
                if reachable[s - part] {
                    reachable[s] = true;
                    break;
                }
            }
        }
        Self { reachable }
    }

    pub fn is_valid(&self, total: usize) -> bool {
        total > 0 && self.reachable[total]
    }
}

pub fn sample_from_coords(coords: Vec<Vec<f64>>, weights: Option<Vec<f64>>) -> WeightedSample {
    let n = coords.len();
    WeightedSample {
        points: coords.into_iter().map(|c| Point::new(c).unwrap()).collect(),
        weights: weights.unwrap_or_else(|| vec![1.0; n]),
        total_input_bytes: n as u64,
        record_count: n as u64,
    }
}

#[allow(dead_code)]
/// Parse generated lines into records under a point schema of `dim`.
pub fn records_from_lines<I>(lines: I, dim: usize) -> impl Iterator<Item = rsgrove::Result<Record>>
where
    I: IntoIterator<Item = String>,
{
    let schema = RecordSchema::point(dim);
    lines.into_iter().map(move |l| parse_record(&l, &schema))
}

/// Fresh temp directory under the target dir, wiped if present.
pub fn temp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("rsgrove-tests").join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[allow(dead_code)]
pub fn box_dataset_lines(n: u64, max_side: f64, seed: u64) -> Vec<String> {
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let x: f64 = rng.random();
            let y: f64 = rng.random();
            let w: f64 = rng.random::<f64>() * max_side;
            let h: f64 = rng.random::<f64>() * max_side;
            format!(
                "{x},{y},{},{},{i}",
                (x + w).min(1.0),
                (y + h).min(1.0)
            )
        })
        .collect()
}
