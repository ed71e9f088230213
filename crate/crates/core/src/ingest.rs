//! Record parsing, sampling, and the storage-size histogram.
//!
//! The sampling pass converts each sampled record to a point (the center of
//! its envelope) and accumulates the total input size `D` over the *full*
//! stream. The histogram overlays a uniform grid on the input space and sums
//! record bytes per cell; dividing each cell's bytes among the sample points
//! inside it turns the sample into a weighted sample whose total weight
//! equals `D`.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Envelope, Point};

/// One parsed input record.
#[derive(Debug, Clone)]
pub struct Record {
    pub envelope: Envelope,
    /// Serialized line length in bytes, terminator included.
    pub payload_size: u64,
    /// The original line, without the terminator.
    pub raw: String,
}

impl Record {
    pub fn center(&self) -> Point {
        self.envelope.center()
    }
}

/// Which columns carry geometry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SchemaKind {
    /// `d` coordinate columns; records are points.
    Point { coord_cols: Vec<usize> },
    /// `d` low columns then `d` high columns; records are boxes.
    Envelope {
        lo_cols: Vec<usize>,
        hi_cols: Vec<usize>,
    },
}

/// Text-format description: delimiter plus geometry columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordSchema {
    pub delimiter: char,
    pub kind: SchemaKind,
}

impl RecordSchema {
    /// Point records in the first `dim` columns, comma-delimited.
    pub fn point(dim: usize) -> Self {
        RecordSchema {
            delimiter: ',',
            kind: SchemaKind::Point {
                coord_cols: (0..dim).collect(),
            },
        }
    }

    /// Box records: `dim` low columns then `dim` high columns.
    pub fn envelope(dim: usize) -> Self {
        RecordSchema {
            delimiter: ',',
            kind: SchemaKind::Envelope {
                lo_cols: (0..dim).collect(),
                hi_cols: (dim..2 * dim).collect(),
            },
        }
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            SchemaKind::Point { coord_cols } => coord_cols.len(),
            SchemaKind::Envelope { lo_cols, .. } => lo_cols.len(),
        }
    }
}

/// Parse one line into a record. The payload size counts the line terminator.
pub fn parse_record(line: &str, schema: &RecordSchema) -> Result<Record> {
    let fields: Vec<&str> = line.split(schema.delimiter).collect();
    let grab = |col: usize| -> Result<f64> {
        let field = fields.get(col).ok_or_else(|| {
            Error::MalformedData(format!("missing column {col} in line {line:?}"))
        })?;
        field.trim().parse::<f64>().map_err(|_| {
            Error::MalformedData(format!("column {col} is not numeric in line {line:?}"))
        })
    };
    let envelope = match &schema.kind {
        SchemaKind::Point { coord_cols } => {
            let coords = coord_cols.iter().map(|&c| grab(c)).collect::<Result<Vec<_>>>()?;
            Envelope::from_point(&Point::new(coords)?)
        }
        SchemaKind::Envelope { lo_cols, hi_cols } => {
            let lo = lo_cols.iter().map(|&c| grab(c)).collect::<Result<Vec<_>>>()?;
            let hi = hi_cols.iter().map(|&c| grab(c)).collect::<Result<Vec<_>>>()?;
            Envelope::new(lo, hi)?
        }
    };
    Ok(Record {
        envelope,
        payload_size: line.len() as u64 + 1,
        raw: line.to_string(),
    })
}

/// Iterator over parsed records from a gzip-transparent line source.
/// Malformed lines are skipped and counted rather than aborting the stream.
pub struct RecordStream<R: BufRead> {
    lines: std::io::Lines<R>,
    schema: RecordSchema,
    pub skipped: u64,
}

impl<R: BufRead> Iterator for RecordStream<R> {
    type Item = Result<Record>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            match self.lines.next()? {
                Err(e) => {
                    return Some(Err(Error::MalformedData(format!("read failure: {e}"))))
                }
                Ok(line) => {
                    if line.is_empty() {
                        continue;
                    }
                    match parse_record(&line, &self.schema) {
                        Ok(rec) => return Some(Ok(rec)),
                        Err(_) => {
                            self.skipped += 1;
                            continue;
                        }
                    }
                }
            }
        }
    }
}

/// Open a text file, decompressing transparently when it starts with the
/// gzip magic bytes.
pub fn open_lines(path: &Path) -> Result<Box<dyn BufRead>> {
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut magic = [0u8; 2];
    let n = file.read(&mut magic).map_err(|e| Error::io(path, e))?;
    file.seek(SeekFrom::Start(0)).map_err(|e| Error::io(path, e))?;
    if n == 2 && magic == [0x1f, 0x8b] {
        Ok(Box::new(BufReader::new(flate2::read::GzDecoder::new(file))))
    } else {
        Ok(Box::new(BufReader::new(file)))
    }
}

/// Stream records from a file under the given schema.
pub fn read_records(path: &Path, schema: &RecordSchema) -> Result<RecordStream<Box<dyn BufRead>>> {
    Ok(RecordStream {
        lines: open_lines(path)?.lines(),
        schema: schema.clone(),
        skipped: 0,
    })
}

/// Sample points with parallel byte weights plus the full-stream totals.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightedSample {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    /// Total input size `D` in bytes, accumulated over the full stream.
    pub total_input_bytes: u64,
    /// Records seen in the full stream.
    pub record_count: u64,
}

impl WeightedSample {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, |p| p.dim())
    }

    /// Total weight `W`; equals the sample size in record-count mode and `D`
    /// (to rounding) after histogram weighting.
    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Tight bounding box of the sample points.
    pub fn mbr(&self) -> Option<Envelope> {
        crate::geometry::mbr_of_points(self.points.iter().map(|p| p.coords.as_slice()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Draw a Bernoulli sample of the stream: every record is kept independently
/// with probability `ratio`, converted to its envelope center. `D` and the
/// record count accumulate over the whole stream; weights start at 1.
pub fn draw_sample<I>(records: I, ratio: f64, seed: u64) -> Result<WeightedSample>
where
    I: IntoIterator<Item = Result<Record>>,
{
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "sampling ratio must lie in (0, 1], got {ratio}"
        )));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut points = Vec::new();
    let mut total_bytes = 0u64;
    let mut count = 0u64;
    for rec in records {
        let rec = rec?;
        count += 1;
        total_bytes += rec.payload_size;
        if rng.random::<f64>() < ratio {
            points.push(rec.center());
        }
    }
    if count == 0 {
        return Err(Error::EmptyInput("record stream is empty".into()));
    }
    if points.is_empty() {
        return Err(Error::EmptyInput(format!(
            "sample came up empty for ratio {ratio} over {count} records; use a larger ratio"
        )));
    }
    let weights = vec![1.0; points.len()];
    Ok(WeightedSample {
        points,
        weights,
        total_input_bytes: total_bytes,
        record_count: count,
    })
}

/// Uniform-grid storage-size histogram: byte totals of the records whose
/// centers fall in each cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridHistogram {
    pub domain: Envelope,
    pub cells_per_dim: Vec<usize>,
    /// Dense row-major cell totals, last dimension fastest.
    pub cell_bytes: Vec<u64>,
    /// Records whose centers fell outside the domain and were clamped to the
    /// nearest boundary cell.
    pub clamped: u64,
}

impl GridHistogram {
    pub fn cell_count(&self) -> usize {
        self.cells_per_dim.iter().product()
    }

    pub fn total_bytes(&self) -> u64 {
        self.cell_bytes.iter().sum()
    }

    /// Grid resolution targeting about four cells per desired partition:
    /// `ceil((4N)^(1/d))` cells per dimension.
    pub fn default_cells_per_dim(desired_partitions: u64, dim: usize) -> Vec<usize> {
        let per_dim = (4.0 * desired_partitions.max(1) as f64)
            .powf(1.0 / dim as f64)
            .ceil()
            .max(1.0) as usize;
        vec![per_dim; dim]
    }

    /// Dense cell index of a point, with a flag for out-of-domain clamping.
    /// A coordinate exactly on an interior cell boundary belongs to the
    /// higher-index cell; the domain's upper face belongs to the last cell.
    pub fn cell_index(&self, coords: &[f64]) -> (usize, bool) {
        let mut idx = 0usize;
        let mut clamped = false;
        for (k, &x) in coords.iter().enumerate() {
            let n = self.cells_per_dim[k];
            let lo = self.domain.lo[k];
            let hi = self.domain.hi[k];
            let c = if x < lo {
                clamped = true;
                0
            } else if x > hi {
                clamped = true;
                n - 1
            } else {
                let extent = hi - lo;
                if extent == 0.0 {
                    0
                } else {
                    let t = ((x - lo) / extent * n as f64).floor() as usize;
                    t.min(n - 1)
                }
            };
            idx = idx * n + c;
        }
        (idx, clamped)
    }

    /// Center coordinates of a dense cell index.
    pub fn cell_center(&self, mut idx: usize) -> Vec<f64> {
        let d = self.cells_per_dim.len();
        let mut cells = vec![0usize; d];
        for k in (0..d).rev() {
            cells[k] = idx % self.cells_per_dim[k];
            idx /= self.cells_per_dim[k];
        }
        (0..d)
            .map(|k| {
                let n = self.cells_per_dim[k] as f64;
                let width = (self.domain.hi[k] - self.domain.lo[k]) / n;
                self.domain.lo[k] + (cells[k] as f64 + 0.5) * width
            })
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Sum record bytes into the grid cell containing each record's center.
pub fn build_histogram<I>(
    records: I,
    domain: Envelope,
    cells_per_dim: Vec<usize>,
) -> Result<GridHistogram>
where
    I: IntoIterator<Item = Result<Record>>,
{
    if cells_per_dim.len() != domain.dim() {
        return Err(Error::DimensionMismatch {
            expected: domain.dim(),
            got: cells_per_dim.len(),
        });
    }
    if cells_per_dim.contains(&0) {
        return Err(Error::InvalidConfig("grid cells per dimension must be >= 1".into()));
    }
    let mut hist = GridHistogram {
        cell_bytes: vec![0u64; cells_per_dim.iter().product()],
        domain,
        cells_per_dim,
        clamped: 0,
    };
    for rec in records {
        let rec = rec?;
        let (idx, clamped) = hist.cell_index(&rec.center().coords);
        hist.cell_bytes[idx] += rec.payload_size;
        if clamped {
            hist.clamped += 1;
        }
    }
    Ok(hist)
}

/// Redistribute the histogram's cell totals onto the sample points: each
/// point carries its cell's bytes divided by the number of sample points in
/// the cell, and the bytes of cells containing no sample point go to the
/// nearest sample point by cell-center distance (ties to the lower index).
/// The resulting total weight equals the histogram total.
pub fn assign_weights(sample: &WeightedSample, hist: &GridHistogram) -> Result<WeightedSample> {
    let n = sample.len();
    if n == 0 {
        return Err(Error::EmptyInput("cannot weight an empty sample".into()));
    }
    let cells = hist.cell_count();
    let mut counts = vec![0u32; cells];
    let mut point_cell = vec![0usize; n];
    for (i, p) in sample.points.iter().enumerate() {
        let (idx, _) = hist.cell_index(&p.coords);
        counts[idx] += 1;
        point_cell[i] = idx;
    }

    let mut weights = vec![0.0f64; n];
    for i in 0..n {
        let c = point_cell[i];
        if hist.cell_bytes[c] == 0 {
            return Err(Error::InvalidConfig(format!(
                "sample point {i} sits in a cell with zero recorded bytes; \
                 histogram does not match the sampled input"
            )));
        }
        weights[i] = hist.cell_bytes[c] as f64 / counts[c] as f64;
    }

    // Orphan cells: bytes but no sample points.
    for (c, &cell_bytes) in hist.cell_bytes.iter().enumerate() {
        if cell_bytes == 0 || counts[c] > 0 {
            continue;
        }
        let center = hist.cell_center(c);
        let mut best = 0usize;
        let mut best_d2 = f64::INFINITY;
        for (i, p) in sample.points.iter().enumerate() {
            let d2: f64 = p
                .coords
                .iter()
                .zip(&center)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if d2 < best_d2 {
                best_d2 = d2;
                best = i;
            }
        }
        weights[best] += cell_bytes as f64;
    }

    let total: f64 = weights.iter().sum();
    let expected = hist.total_bytes() as f64;
    debug_assert!(
        (total - expected).abs() <= 1e-9 * expected.max(1.0),
        "weight conservation violated: {total} vs {expected}"
    );

    Ok(WeightedSample {
        points: sample.points.clone(),
        weights,
        total_input_bytes: sample.total_input_bytes,
        record_count: sample.record_count,
    })
}
