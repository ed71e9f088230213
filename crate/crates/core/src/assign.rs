//! Phase 3: route every input record to partition file(s) and collect
//! realized per-partition statistics.
//!
//! With a disjoint scheme a record is replicated to every routing cell its
//! envelope overlaps and the stored bounding boxes are clipped to the cells,
//! keeping partitions spatially disjoint on disk. Otherwise every record
//! lands in the single partition whose box grows the least.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geometry::Envelope;
use crate::ingest::Record;
use crate::scheme::{PartitionScheme, Router};

pub const MANIFEST_FILE: &str = "_master";
pub const SCHEME_FILE: &str = "scheme.json";

pub fn part_file_name(id: u32) -> String {
    format!("part-{id:05}")
}

/// Realized size, count, and bounding box of one partition after assignment.
#[derive(Debug, Clone)]
pub struct PartitionStats {
    pub id: u32,
    pub mbb: Envelope,
    pub size_bytes: u64,
    pub record_count: u64,
}

/// Partition minimizing the volume enlargement of its box by `e`; ties fall
/// to the smaller margin enlargement, then the lower id.
pub fn choose_leaf(scheme: &PartitionScheme, e: &Envelope) -> u32 {
    let mut best_id = 0u32;
    let mut best = (f64::INFINITY, f64::INFINITY);
    for p in &scheme.partitions {
        let (dv, dm) = p
            .envelope()
            .enlargement(e)
            .expect("scheme and record dimensions agree");
        if (dv, dm) < best {
            best = (dv, dm);
            best_id = p.id;
        }
    }
    best_id
}

/// True when assignment replicates straddling records: a disjoint scheme with
/// a split-tree router. Curve routers always place a record by its center
/// key, so they never produce copies.
pub fn replicates(scheme: &PartitionScheme) -> bool {
    scheme.disjoint && matches!(scheme.router, Router::Tree { .. })
}

struct PartSink {
    path: PathBuf,
    buf: Vec<u8>,
    stats: Option<PartitionStats>,
}

impl PartSink {
    const FLUSH_BYTES: usize = 1 << 20;

    fn push(&mut self, line: &str) -> Result<()> {
        self.buf.extend_from_slice(line.as_bytes());
        self.buf.push(b'\n');
        if self.buf.len() >= Self::FLUSH_BYTES {
            self.flush()?;
        }
        Ok(())
    }

    fn flush(&mut self) -> Result<()> {
        if self.buf.is_empty() {
            return Ok(());
        }
        let mut file = OpenOptions::new()
            .append(true)
            .open(&self.path)
            .map_err(|e| Error::io(&self.path, e))?;
        file.write_all(&self.buf).map_err(|e| Error::io(&self.path, e))?;
        self.buf.clear();
        Ok(())
    }

    fn record(&mut self, id: u32, mbb: Envelope, payload: u64) {
        match &mut self.stats {
            Some(s) => {
                s.mbb.include_envelope(&mbb);
                s.size_bytes += payload;
                s.record_count += 1;
            }
            None => {
                self.stats = Some(PartitionStats {
                    id,
                    mbb,
                    size_bytes: payload,
                    record_count: 1,
                })
            }
        }
    }
}

/// Route a record stream into `out_dir`: one `part-<id>` text file per
/// partition, a `_master` manifest, and a copy of the scheme. Returns the
/// realized statistics in partition-id order. Any I/O failure removes the
/// files created so far.
pub fn run_assignment<I>(
    records: I,
    scheme: &PartitionScheme,
    out_dir: &Path,
) -> Result<Vec<PartitionStats>>
where
    I: IntoIterator<Item = Result<Record>>,
{
    scheme.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let result = assign_inner(records, scheme, out_dir);
    if result.is_err() {
        for p in &scheme.partitions {
            let _ = std::fs::remove_file(out_dir.join(part_file_name(p.id)));
        }
        let _ = std::fs::remove_file(out_dir.join(MANIFEST_FILE));
        let _ = std::fs::remove_file(out_dir.join(SCHEME_FILE));
    }
    result
}

fn assign_inner<I>(
    records: I,
    scheme: &PartitionScheme,
    out_dir: &Path,
) -> Result<Vec<PartitionStats>>
where
    I: IntoIterator<Item = Result<Record>>,
{
    let n = scheme.partitions.len();
    let mut sinks: Vec<PartSink> = scheme
        .partitions
        .iter()
        .map(|p| {
            let path = out_dir.join(part_file_name(p.id));
            File::create(&path).map_err(|e| Error::io(&path, e))?;
            Ok(PartSink {
                path,
                buf: Vec::new(),
                stats: None,
            })
        })
        .collect::<Result<_>>()?;

    // Cells indexed by partition id, used for clipping in disjoint mode.
    let cells: Option<Vec<Envelope>> = match (&scheme.router, replicates(scheme)) {
        (Router::Tree { root }, true) => {
            let mut by_id = vec![None; n];
            for (id, lo, hi) in root.cells(scheme.dim) {
                by_id[id as usize] = Some(Envelope { lo, hi });
            }
            Some(by_id.into_iter().map(|c| c.expect("validated scheme")).collect())
        }
        _ => None,
    };

    let mut replicate_buf: Vec<u32> = Vec::new();
    for rec in records {
        let rec = rec?;
        if rec.envelope.dim() != scheme.dim {
            return Err(Error::DimensionMismatch {
                expected: scheme.dim,
                got: rec.envelope.dim(),
            });
        }
        if replicates(scheme) {
            replicate_buf.clear();
            replicate_buf.extend(scheme.replicate(&rec.envelope));
            debug_assert!(!replicate_buf.is_empty(), "cells tile all of space");
            for &id in &replicate_buf {
                let clipped = match &cells {
                    Some(cells) => clip_to_cell(&rec.envelope, &cells[id as usize]),
                    None => rec.envelope.clone(),
                };
                let sink = &mut sinks[id as usize];
                sink.record(id, clipped, rec.payload_size);
                sink.push(&rec.raw)?;
            }
        } else {
            let id = match &scheme.router {
                Router::CurveRanges { .. } => scheme.lookup_point(&rec.envelope.center().coords),
                Router::Tree { .. } if scheme.disjoint => {
                    // Disjoint plus curve routing never reaches here; the
                    // replicating branch above owns tree-routed disjoint mode.
                    unreachable!()
                }
                Router::Tree { .. } => choose_leaf(scheme, &rec.envelope),
            };
            let sink = &mut sinks[id as usize];
            sink.record(id, rec.envelope.clone(), rec.payload_size);
            sink.push(&rec.raw)?;
        }
    }

    let mut stats = Vec::with_capacity(n);
    for (i, sink) in sinks.iter_mut().enumerate() {
        sink.flush()?;
        stats.push(sink.stats.clone().unwrap_or_else(|| PartitionStats {
            id: i as u32,
            mbb: Envelope {
                lo: vec![0.0; scheme.dim],
                hi: vec![0.0; scheme.dim],
            },
            size_bytes: 0,
            record_count: 0,
        }));
    }

    write_manifest(&out_dir.join(MANIFEST_FILE), &stats)?;
    scheme.save(&out_dir.join(SCHEME_FILE))?;
    Ok(stats)
}

/// Intersect a record envelope with a (possibly unbounded) routing cell.
fn clip_to_cell(e: &Envelope, cell: &Envelope) -> Envelope {
    let lo: Vec<f64> = e.lo.iter().zip(&cell.lo).map(|(a, b)| a.max(*b)).collect();
    let hi: Vec<f64> = e.hi.iter().zip(&cell.hi).map(|(a, b)| a.min(*b)).collect();
    debug_assert!(lo.iter().zip(&hi).all(|(l, h)| l <= h), "record outside its cell");
    Envelope { lo, hi }
}

/// One line per partition: `id,lo...,hi...,record_count,size_bytes`.
pub fn write_manifest(path: &Path, stats: &[PartitionStats]) -> Result<()> {
    let mut out = String::new();
    let dim = stats.first().map_or(0, |s| s.mbb.dim());
    out.push_str(&format!("# rsgrove manifest version=1 dim={dim}\n"));
    for s in stats {
        out.push_str(&s.id.to_string());
        for v in s.mbb.lo.iter().chain(&s.mbb.hi) {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push_str(&format!(",{},{}\n", s.record_count, s.size_bytes));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Vec<PartitionStats>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut stats = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 5 || !(fields.len() - 3).is_multiple_of(2) {
            return Err(Error::MalformedData(format!(
                "{}: manifest line {} has {} fields",
                path.display(),
                line_no + 1,
                fields.len()
            )));
        }
        let dim = (fields.len() - 3) / 2;
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::MalformedData(format!("bad number {s:?} in manifest")))
        };
        let id: u32 = fields[0]
            .parse()
            .map_err(|_| Error::MalformedData(format!("bad id {:?} in manifest", fields[0])))?;
        let lo = fields[1..1 + dim].iter().map(|s| parse(s)).collect::<Result<Vec<_>>>()?;
        let hi = fields[1 + dim..1 + 2 * dim]
            .iter()
            .map(|s| parse(s))
            .collect::<Result<Vec<_>>>()?;
        let record_count: u64 = fields[1 + 2 * dim].parse().map_err(|_| {
            Error::MalformedData(format!("bad count {:?} in manifest", fields[1 + 2 * dim]))
        })?;
        let size_bytes: u64 = fields[2 + 2 * dim].parse().map_err(|_| {
            Error::MalformedData(format!("bad size {:?} in manifest", fields[2 + 2 * dim]))
        })?;
        stats.push(PartitionStats {
            id,
            mbb: Envelope::new(lo, hi)?,
            size_bytes,
            record_count,
        });
    }
    if stats.is_empty() {
        return Err(Error::EmptyInput(format!(
            "manifest {} lists no partitions",
            path.display()
        )));
    }
    Ok(stats)
}

/// All records of every partition file, parsed under `schema`, indexed by
/// partition id.
pub fn load_partition_records(
    dir: &Path,
    stats: &[PartitionStats],
    schema: &crate::ingest::RecordSchema,
) -> Result<HashMap<u32, Vec<Record>>> {
    let mut map = HashMap::new();
    for s in stats {
        let path = dir.join(part_file_name(s.id));
        let mut stream = crate::ingest::read_records(&path, schema)?;
        let records: Vec<Record> = stream.by_ref().collect::<Result<_>>()?;
        if stream.skipped > 0 {
            return Err(Error::MalformedData(format!(
                "{}: {} unparsable lines in a partition file",
                path.display(),
                stream.skipped
            )));
        }
        map.insert(s.id, records);
    }
    Ok(map)
}
