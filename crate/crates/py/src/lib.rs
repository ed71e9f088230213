//! Python bindings: the partitioners, the validity primitives, curve keys,
//! and quality metrics, operating on plain lists of coordinates.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use rsgrove::assign::PartitionStats;
use rsgrove::baselines::{curve_partition, kdtree_partition, str_partition, CurveKind};
use rsgrove::geometry::{Envelope, Point};
use rsgrove::grove::{self, CapacityConfig, SplitStrategy};
use rsgrove::ingest::WeightedSample;
use rsgrove::metrics::quality_report;
use rsgrove::scheme::PartitionScheme;

fn to_py_err(e: rsgrove::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn sample_from(points: Vec<Vec<f64>>, weights: Option<Vec<f64>>) -> PyResult<WeightedSample> {
    if points.is_empty() {
        return Err(PyValueError::new_err("points must be non-empty"));
    }
    let n = points.len();
    if let Some(w) = &weights {
        if w.len() != n {
            return Err(PyValueError::new_err(format!(
                "{} weights for {} points",
                w.len(),
                n
            )));
        }
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(PyValueError::new_err("points have mixed dimensionality"));
    }
    let points = points
        .into_iter()
        .map(Point::new)
        .collect::<rsgrove::Result<Vec<_>>>()
        .map_err(to_py_err)?;
    Ok(WeightedSample {
        weights: weights.unwrap_or_else(|| vec![1.0; n]),
        total_input_bytes: n as u64,
        record_count: n as u64,
        points,
    })
}

fn envelope_from(lo: Vec<f64>, hi: Vec<f64>) -> PyResult<Envelope> {
    Envelope::new(lo, hi).map_err(to_py_err)
}

/// Partition boundaries plus the routing structure, shared by all
/// partitioners.
#[pyclass(name = "Scheme", frozen)]
struct PyScheme {
    inner: PartitionScheme,
}

#[pymethods]
impl PyScheme {
    #[getter]
    fn partition_count(&self) -> usize {
        self.inner.partitions.len()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim
    }

    #[getter]
    fn disjoint(&self) -> bool {
        self.inner.disjoint
    }

    /// Partitions as `(id, lo, hi, expected_weight)` tuples.
    fn partitions(&self) -> Vec<(u32, Vec<f64>, Vec<f64>, f64)> {
        self.inner
            .partitions
            .iter()
            .map(|p| (p.id, p.lo.clone(), p.hi.clone(), p.expected_weight))
            .collect()
    }

    /// Partition id owning a point.
    fn lookup(&self, point: Vec<f64>) -> PyResult<u32> {
        if point.len() != self.inner.dim {
            return Err(PyValueError::new_err(format!(
                "point has dimension {}, scheme has {}",
                point.len(),
                self.inner.dim
            )));
        }
        Ok(self.inner.lookup_point(&point))
    }

    /// Partition ids a box is replicated to in disjoint mode.
    fn replicate(&self, lo: Vec<f64>, hi: Vec<f64>) -> PyResult<Vec<u32>> {
        let e = envelope_from(lo, hi)?;
        Ok(self.inner.replicate(&e))
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(to_py_err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyScheme {
            inner: PartitionScheme::from_json(text).map_err(to_py_err)?,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Scheme(partitions={}, dim={}, disjoint={})",
            self.inner.partitions.len(),
            self.inner.dim,
            self.inner.disjoint
        )
    }
}

/// Validity-constrained R*-style partitioning. Every partition's total
/// (record count, or weight when `weights` is given) lands in
/// `[min_capacity, max_capacity]`.
#[pyfunction]
#[pyo3(signature = (points, min_capacity, max_capacity, weights=None, rho=0.4, strategy="grove", disjoint=true))]
#[allow(clippy::too_many_arguments)]
fn grove_partition(
    points: Vec<Vec<f64>>,
    min_capacity: f64,
    max_capacity: f64,
    weights: Option<Vec<f64>>,
    rho: f64,
    strategy: &str,
    disjoint: bool,
) -> PyResult<PyScheme> {
    let strategy = match strategy {
        "blackbox" => SplitStrategy::BlackBox,
        "graybox" => SplitStrategy::GrayBox,
        "grove" => SplitStrategy::Grove,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown strategy {other:?}; use blackbox, graybox, or grove"
            )))
        }
    };
    let sample = sample_from(points, weights)?;
    let cfg = CapacityConfig::explicit(min_capacity, max_capacity, rho).map_err(to_py_err)?;
    Ok(PyScheme {
        inner: grove::grove_partition(&sample, &cfg, strategy, disjoint).map_err(to_py_err)?,
    })
}

fn count_config(max_capacity: f64) -> PyResult<CapacityConfig> {
    CapacityConfig::explicit(1.0, max_capacity, 0.0).map_err(to_py_err)
}

/// Sort-tile-recursive packing into `n^d` tiles.
#[pyfunction]
#[pyo3(signature = (points, max_capacity, disjoint=false))]
fn str_tile_partition(
    points: Vec<Vec<f64>>,
    max_capacity: f64,
    disjoint: bool,
) -> PyResult<PyScheme> {
    let sample = sample_from(points, None)?;
    Ok(PyScheme {
        inner: str_partition(&sample, &count_config(max_capacity)?, disjoint)
            .map_err(to_py_err)?,
    })
}

/// Median splits cycling the axes until leaves hold at most `max_capacity`.
#[pyfunction]
#[pyo3(signature = (points, max_capacity, disjoint=false))]
fn kdtree_median_partition(
    points: Vec<Vec<f64>>,
    max_capacity: f64,
    disjoint: bool,
) -> PyResult<PyScheme> {
    let sample = sample_from(points, None)?;
    Ok(PyScheme {
        inner: kdtree_partition(&sample, &count_config(max_capacity)?, disjoint)
            .map_err(to_py_err)?,
    })
}

fn curve_kind(curve: &str) -> PyResult<CurveKind> {
    match curve {
        "zorder" | "z" => Ok(CurveKind::ZOrder),
        "hilbert" | "h" => Ok(CurveKind::Hilbert),
        other => Err(PyValueError::new_err(format!(
            "unknown curve {other:?}; use zorder or hilbert"
        ))),
    }
}

/// Equal-count runs along a space-filling curve (`zorder` or `hilbert`).
#[pyfunction]
#[pyo3(signature = (points, max_capacity, curve="zorder"))]
fn curve_run_partition(
    points: Vec<Vec<f64>>,
    max_capacity: f64,
    curve: &str,
) -> PyResult<PyScheme> {
    let sample = sample_from(points, None)?;
    Ok(PyScheme {
        inner: curve_partition(&sample, &count_config(max_capacity)?, curve_kind(curve)?, false)
            .map_err(to_py_err)?,
    })
}

/// True iff `total` decomposes into parts within `[min_capacity, max_capacity]`.
#[pyfunction]
fn is_valid_size(total: f64, min_capacity: f64, max_capacity: f64) -> bool {
    grove::is_valid(total, min_capacity, max_capacity)
}

/// Threshold above which every total is valid.
#[pyfunction]
fn min_valid_size(min_capacity: f64, max_capacity: f64) -> PyResult<f64> {
    grove::min_valid_size(min_capacity, max_capacity).map_err(to_py_err)
}

/// Minimum sample storage bytes guaranteeing a valid partitioning.
#[pyfunction]
fn min_sample_bytes(alpha: f64, ratio: f64, block_size: u64) -> PyResult<f64> {
    grove::min_sample_bytes(alpha, ratio, block_size).map_err(to_py_err)
}

/// Space-filling-curve key of a point within a domain box.
#[pyfunction]
#[pyo3(signature = (point, lo, hi, bits, curve="zorder"))]
fn curve_key(point: Vec<f64>, lo: Vec<f64>, hi: Vec<f64>, bits: u32, curve: &str) -> PyResult<u64> {
    let domain = envelope_from(lo, hi)?;
    if bits as usize * point.len() > 63 {
        return Err(PyValueError::new_err("bits * dimensions must stay below 64"));
    }
    Ok(curve_kind(curve)?.encode_point(&point, &domain, bits))
}

/// Q1..Q5 quality metrics over realized partitions given as
/// `(lo, hi, size_bytes, record_count)` tuples.
#[pyfunction]
fn quality_metrics<'py>(
    py: Python<'py>,
    partitions: Vec<(Vec<f64>, Vec<f64>, u64, u64)>,
    block_size: u64,
) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let stats = partitions
        .into_iter()
        .enumerate()
        .map(|(i, (lo, hi, size_bytes, record_count))| {
            Ok(PartitionStats {
                id: i as u32,
                mbb: envelope_from(lo, hi)?,
                size_bytes,
                record_count,
            })
        })
        .collect::<PyResult<Vec<_>>>()?;
    let report = quality_report(&stats, block_size).map_err(to_py_err)?;
    let dict = pyo3::types::PyDict::new(py);
    dict.set_item("q1_total_volume", report.q1_total_volume)?;
    dict.set_item("q2_total_overlap", report.q2_total_overlap)?;
    dict.set_item("q3_total_margin", report.q3_total_margin)?;
    dict.set_item("q4_block_utilization", report.q4_block_utilization)?;
    dict.set_item("q5_size_stddev", report.q5_size_stddev)?;
    dict.set_item("partition_count", report.partition_count)?;
    dict.set_item("total_blocks", report.total_blocks)?;
    Ok(dict)
}

#[pymodule]
fn rsgrove_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScheme>()?;
    m.add_function(wrap_pyfunction!(grove_partition, m)?)?;
    m.add_function(wrap_pyfunction!(str_tile_partition, m)?)?;
    m.add_function(wrap_pyfunction!(kdtree_median_partition, m)?)?;
    m.add_function(wrap_pyfunction!(curve_run_partition, m)?)?;
    m.add_function(wrap_pyfunction!(is_valid_size, m)?)?;
    m.add_function(wrap_pyfunction!(min_valid_size, m)?)?;
    m.add_function(wrap_pyfunction!(min_sample_bytes, m)?)?;
    m.add_function(wrap_pyfunction!(curve_key, m)?)?;
    m.add_function(wrap_pyfunction!(quality_metrics, m)?)?;
    Ok(())
}
