//! Subcommand implementations. Each stage reads the previous stage's files,
//! so the pipeline composes with nothing but paths.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rsgrove::assign::{read_manifest, run_assignment, MANIFEST_FILE};
use rsgrove::baselines::{curve_partition, kdtree_partition, str_partition, CurveKind};
use rsgrove::bench::{
    gen_diagonal, gen_queries, gen_uniform, gen_varsize, plan_join, run_range_queries,
    spatial_join, write_dataset,
};
use rsgrove::error::{Error, Result};
use rsgrove::geometry::Envelope;
use rsgrove::grove::{
    compute_capacity, compute_capacity_unchecked, grove_partition, CapacityConfig, SplitStrategy,
};
use rsgrove::ingest::{
    assign_weights, build_histogram, draw_sample, read_records, GridHistogram, RecordSchema,
    SchemaKind, WeightedSample,
};
use rsgrove::metrics::{quality_report, QualityReport};
use rsgrove::scheme::PartitionScheme;

use crate::args::*;

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Generate(a) => generate(a),
        Command::Sample(a) => sample(a),
        Command::Partition(a) => partition(a),
        Command::Assign(a) => assign(a),
        Command::Metrics(a) => metrics(a),
        Command::Rangequery(a) => rangequery(a),
        Command::Sjoin(a) => sjoin(a),
        Command::Sweep(a) => sweep(a),
    }
}

/// Parse a byte size with optional decimal or binary suffix.
pub fn parse_size(text: &str) -> Result<u64> {
    let t = text.trim();
    let split = t
        .find(|c: char| c.is_ascii_alphabetic())
        .unwrap_or(t.len());
    let (num, suffix) = t.split_at(split);
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("bad size {text:?}")))?;
    let factor: f64 = match suffix.trim().to_ascii_lowercase().as_str() {
        "" | "b" => 1.0,
        "kb" => 1e3,
        "mb" => 1e6,
        "gb" => 1e9,
        "kib" | "k" => 1024.0,
        "mib" | "m" => 1024.0 * 1024.0,
        "gib" | "g" => 1024.0 * 1024.0 * 1024.0,
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown size suffix {other:?} in {text:?}"
            )))
        }
    };
    let bytes = value * factor;
    if bytes.is_nan() || bytes < 1.0 {
        return Err(Error::InvalidConfig(format!("size {text:?} is below one byte")));
    }
    Ok(bytes as u64)
}

fn build_schema(args: &SchemaArgs) -> Result<RecordSchema> {
    let d = args.dims;
    if d == 0 {
        return Err(Error::InvalidConfig("dims must be at least 1".into()));
    }
    let kind = match (args.schema, &args.cols) {
        (SchemaKindArg::Point, None) => SchemaKind::Point {
            coord_cols: (0..d).collect(),
        },
        (SchemaKindArg::Point, Some(cols)) => {
            if cols.len() != d {
                return Err(Error::InvalidConfig(format!(
                    "point schema needs {d} coordinate columns, got {}",
                    cols.len()
                )));
            }
            SchemaKind::Point {
                coord_cols: cols.clone(),
            }
        }
        (SchemaKindArg::Envelope, None) => SchemaKind::Envelope {
            lo_cols: (0..d).collect(),
            hi_cols: (d..2 * d).collect(),
        },
        (SchemaKindArg::Envelope, Some(cols)) => {
            if cols.len() != 2 * d {
                return Err(Error::InvalidConfig(format!(
                    "envelope schema needs {} columns (lows then highs), got {}",
                    2 * d,
                    cols.len()
                )));
            }
            SchemaKind::Envelope {
                lo_cols: cols[..d].to_vec(),
                hi_cols: cols[d..].to_vec(),
            }
        }
    };
    Ok(RecordSchema {
        delimiter: args.delimiter,
        kind,
    })
}

fn generate(a: GenerateArgs) -> Result<()> {
    match a.kind {
        DataKind::Uniform => write_dataset(&a.out, gen_uniform(a.count, a.dims, a.seed))?,
        DataKind::Diagonal => {
            if a.dims < 2 {
                return Err(Error::InvalidConfig("diagonal data needs dims >= 2".into()));
            }
            if !(0.0..=1.0).contains(&a.perc) || a.buf < 0.0 {
                return Err(Error::InvalidConfig(
                    "diagonal needs perc in [0,1] and buf >= 0".into(),
                ));
            }
            write_dataset(&a.out, gen_diagonal(a.count, a.dims, a.perc, a.buf, a.seed))?
        }
        DataKind::Varsize => {
            if a.min_bytes < 1 || a.max_bytes < a.min_bytes {
                return Err(Error::InvalidConfig(
                    "varsize needs 1 <= min-bytes <= max-bytes".into(),
                ));
            }
            write_dataset(
                &a.out,
                gen_varsize(a.count, a.dims, a.seed, a.min_bytes, a.max_bytes),
            )?
        }
    }
    eprintln!("wrote {} records to {}", a.count, a.out.display());
    Ok(())
}

/// Attach a format version stamp to a JSON sidecar.
fn write_versioned_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut v = serde_json::to_value(value)?;
    if let Some(obj) = v.as_object_mut() {
        let mut stamped = serde_json::Map::new();
        stamped.insert("version".to_string(), serde_json::json!(1));
        stamped.append(obj);
        v = serde_json::Value::Object(stamped);
    }
    std::fs::write(path, serde_json::to_string(&v)?)
        .map_err(|e| Error::io(path.to_path_buf(), e))
}

fn sample(a: SampleArgs) -> Result<()> {
    let schema = build_schema(&a.schema)?;
    let block = parse_size(&a.block_size)?;

    let mut stream = read_records(&a.input, &schema)?;
    let sample = draw_sample(&mut stream, a.ratio, a.seed)?;
    let skipped = stream.skipped;

    let domain = match &a.domain {
        Some(values) => {
            let d = a.schema.dims;
            if values.len() != 2 * d {
                return Err(Error::InvalidConfig(format!(
                    "--domain needs {} values (lows then highs)",
                    2 * d
                )));
            }
            Envelope::new(values[..d].to_vec(), values[d..].to_vec())?
        }
        None => sample.mbr().expect("non-empty sample"),
    };
    let desired = sample.total_input_bytes.div_ceil(block).max(1);
    let grid = match &a.grid {
        Some(g) => {
            if g.len() != a.schema.dims {
                return Err(Error::InvalidConfig(format!(
                    "--grid needs {} entries",
                    a.schema.dims
                )));
            }
            g.clone()
        }
        None => GridHistogram::default_cells_per_dim(desired, a.schema.dims),
    };
    let mut hist_stream = read_records(&a.input, &schema)?;
    let hist = build_histogram(&mut hist_stream, domain, grid)?;

    write_versioned_json(&a.out_sample, &sample)?;
    write_versioned_json(&a.out_histogram, &hist)?;
    eprintln!(
        "sampled {} of {} records ({} bytes total, {} malformed lines skipped, {} clamped)",
        sample.len(),
        sample.record_count,
        sample.total_input_bytes,
        skipped,
        hist.clamped
    );
    Ok(())
}

fn load_sample(path: &Path) -> Result<WeightedSample> {
    WeightedSample::load(path)
}

fn partition(a: PartitionArgs) -> Result<()> {
    let block = parse_size(&a.block_size)?;
    let sample = load_sample(&a.sample)?;

    let scheme = build_scheme(
        &sample,
        a.histogram.as_deref(),
        a.partitioner,
        a.strategy,
        block,
        a.alpha,
        a.rho,
        a.disjoint,
    )?;
    scheme.save(&a.out)?;
    eprintln!(
        "{} partitions written to {}",
        scheme.partitions.len(),
        a.out.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn build_scheme(
    sample: &WeightedSample,
    histogram: Option<&Path>,
    partitioner: Partitioner,
    strategy: Strategy,
    block: u64,
    alpha: f64,
    rho: f64,
    disjoint: bool,
) -> Result<PartitionScheme> {
    match partitioner {
        Partitioner::Grove => {
            let strategy = match strategy {
                Strategy::Blackbox => SplitStrategy::BlackBox,
                Strategy::Graybox => SplitStrategy::GrayBox,
                Strategy::Grove => SplitStrategy::Grove,
            };
            let (weighted_sample, cfg) = match (histogram, strategy) {
                (Some(hist_path), SplitStrategy::Grove) => {
                    let hist = GridHistogram::load(hist_path)?;
                    let weighted = assign_weights(sample, &hist)?;
                    let cfg = compute_capacity(&weighted, block, alpha, rho, true)?;
                    (weighted, cfg)
                }
                _ => {
                    let cfg = compute_capacity(sample, block, alpha, rho, false)?;
                    (sample.clone(), cfg)
                }
            };
            grove_partition(&weighted_sample, &cfg, strategy, disjoint)
        }
        other => {
            // Baselines balance unweighted record counts and do not need a
            // valid total, only the capacity M.
            let cfg = compute_capacity_unchecked(sample, block, alpha, rho, false)?;
            baseline_scheme(sample, &cfg, other, disjoint)
        }
    }
}

fn baseline_scheme(
    sample: &WeightedSample,
    cfg: &CapacityConfig,
    partitioner: Partitioner,
    disjoint: bool,
) -> Result<PartitionScheme> {
    match partitioner {
        Partitioner::Str => str_partition(sample, cfg, disjoint),
        Partitioner::Kdtree => kdtree_partition(sample, cfg, disjoint),
        Partitioner::Zcurve => curve_partition(sample, cfg, CurveKind::ZOrder, disjoint),
        Partitioner::Hilbert => curve_partition(sample, cfg, CurveKind::Hilbert, disjoint),
        Partitioner::Grove => unreachable!("grove handled by the caller"),
    }
}

fn assign(a: AssignArgs) -> Result<()> {
    let schema = build_schema(&a.schema)?;
    let scheme = PartitionScheme::load(&a.scheme)?;
    let mut stream = read_records(&a.input, &schema)?;
    let stats = run_assignment(&mut stream, &scheme, &a.out_dir)?;
    let records: u64 = stats.iter().map(|s| s.record_count).sum();
    let bytes: u64 = stats.iter().map(|s| s.size_bytes).sum();
    eprintln!(
        "assigned {} record copies ({} bytes) into {} partitions under {} ({} malformed lines skipped)",
        records,
        bytes,
        stats.len(),
        a.out_dir.display(),
        stream.skipped
    );
    Ok(())
}

fn report_table(report: &QualityReport) -> String {
    format!(
        "partitions          {}\n\
         dropped empty       {}\n\
         total blocks        {}\n\
         total bytes         {}\n\
         Q1 total volume     {}\n\
         Q2 total overlap    {}\n\
         Q3 total margin     {}\n\
         Q4 block util       {:.6}\n\
         Q5 size stddev      {}\n\
         Q1 normalized       {}\n\
         Q2 normalized       {}\n\
         Q3 normalized       {}\n",
        report.partition_count,
        report.dropped_empty,
        report.total_blocks,
        report.total_bytes,
        report.q1_total_volume,
        report.q2_total_overlap,
        report.q3_total_margin,
        report.q4_block_utilization,
        report.q5_size_stddev,
        report.q1_normalized,
        report.q2_normalized,
        report.q3_normalized,
    )
}

const METRICS_CSV_HEADER: &str =
    "partitions,dropped_empty,total_blocks,total_bytes,q1,q2,q3,q4,q5";

fn report_csv_row(report: &QualityReport) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{}",
        report.partition_count,
        report.dropped_empty,
        report.total_blocks,
        report.total_bytes,
        report.q1_total_volume,
        report.q2_total_overlap,
        report.q3_total_margin,
        report.q4_block_utilization,
        report.q5_size_stddev,
    )
}

fn metrics(a: MetricsArgs) -> Result<()> {
    let block = parse_size(&a.block_size)?;
    let stats = read_manifest(&a.manifest)?;
    let report = quality_report(&stats, block)?;
    if report.dropped_empty > 0 {
        eprintln!("warning: {} empty partitions excluded", report.dropped_empty);
    }
    if a.csv {
        println!("{METRICS_CSV_HEADER}");
        println!("{}", report_csv_row(&report));
    } else {
        print!("{}", report_table(&report));
    }
    if let Some(path) = &a.json {
        let stamped = serde_json::json!({
            "version": 1,
            "tool_version": env!("CARGO_PKG_VERSION"),
            "block_size": block,
            "report": report,
        });
        std::fs::write(path, serde_json::to_string(&stamped)?)
            .map_err(|e| Error::io(path.clone(), e))?;
    }
    Ok(())
}

fn write_or_print(out: Option<&Path>, content: &str) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, content).map_err(|e| Error::io(path.to_path_buf(), e))
        }
        None => {
            print!("{content}");
            std::io::stdout().flush().ok();
            Ok(())
        }
    }
}

fn rangequery(a: RangeQueryArgs) -> Result<()> {
    let schema = build_schema(&a.schema)?;
    let block = parse_size(&a.block_size)?;
    let stats = read_manifest(&a.parts.join(MANIFEST_FILE))?;
    let mut domain = stats[0].mbb.clone();
    for s in &stats[1..] {
        domain.include_envelope(&s.mbb);
    }
    let queries = gen_queries(&domain, a.count, a.area_fraction, a.seed)?;
    let threads = a.threads.unwrap_or_else(|| {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    });
    let outcomes = run_range_queries(&a.parts, &schema, &queries, block, threads, false)?;

    let mut csv = String::from("query_id,blocks,matches,micros\n");
    for (i, o) in outcomes.iter().enumerate() {
        csv.push_str(&format!("{i},{},{},{}\n", o.blocks, o.matches, o.micros));
    }
    write_or_print(a.out.as_deref(), &csv)?;
    let total_blocks: u64 = outcomes.iter().map(|o| o.blocks).sum();
    let total_matches: u64 = outcomes.iter().map(|o| o.matches).sum();
    eprintln!(
        "{} queries: {} blocks processed, {} matches",
        outcomes.len(),
        total_blocks,
        total_matches
    );
    Ok(())
}

fn sjoin(a: SjoinArgs) -> Result<()> {
    let schema = build_schema(&a.schema)?;
    let block = parse_size(&a.block_size)?;
    let stats_left = read_manifest(&a.left.join(MANIFEST_FILE))?;
    let stats_right = read_manifest(&a.right.join(MANIFEST_FILE))?;
    let plan = plan_join(&stats_left, &stats_right, block)?;
    let started = Instant::now();
    let pairs = spatial_join(&a.left, &a.right, &schema, &schema, &plan)?;
    let millis = started.elapsed().as_millis();
    let csv = format!(
        "pairs,planned_pairs,block_cost,millis\n{},{},{},{}\n",
        pairs,
        plan.pairs.len(),
        plan.block_cost,
        millis
    );
    write_or_print(a.out.as_deref(), &csv)?;
    eprintln!(
        "join found {pairs} pairs over {} planned partition pairs",
        plan.pairs.len()
    );
    Ok(())
}

fn partitioner_name(p: Partitioner) -> &'static str {
    match p {
        Partitioner::Grove => "grove",
        Partitioner::Str => "str",
        Partitioner::Kdtree => "kdtree",
        Partitioner::Zcurve => "zcurve",
        Partitioner::Hilbert => "hilbert",
    }
}

fn sweep(a: SweepArgs) -> Result<()> {
    let schema = build_schema(&a.schema)?;
    let block = parse_size(&a.block_size)?;
    let work_dir = a
        .work_dir
        .clone()
        .unwrap_or_else(|| std::env::temp_dir().join(format!("rsgrove-sweep-{}", std::process::id())));
    std::fs::create_dir_all(&work_dir).map_err(|e| Error::io(work_dir.clone(), e))?;

    let mut csv = format!("partitioner,ratio,{METRICS_CSV_HEADER}\n");
    for &partitioner in &a.partitioners {
        for &ratio in &a.ratios {
            let mut stream = read_records(&a.input, &schema)?;
            let sample = draw_sample(&mut stream, ratio, a.seed)?;

            let scheme = if partitioner == Partitioner::Grove {
                let domain = sample.mbr().expect("non-empty sample");
                let desired = sample.total_input_bytes.div_ceil(block).max(1);
                let grid = GridHistogram::default_cells_per_dim(desired, a.schema.dims);
                let mut hist_stream = read_records(&a.input, &schema)?;
                let hist = build_histogram(&mut hist_stream, domain, grid)?;
                let weighted = assign_weights(&sample, &hist)?;
                let cfg = compute_capacity(&weighted, block, a.alpha, a.rho, true)?;
                grove_partition(&weighted, &cfg, SplitStrategy::Grove, a.disjoint)?
            } else {
                let cfg = compute_capacity_unchecked(&sample, block, a.alpha, a.rho, false)?;
                baseline_scheme(&sample, &cfg, partitioner, a.disjoint)?
            };

            let name = partitioner_name(partitioner);
            let dir = work_dir.join(format!("{name}-{ratio}"));
            let mut assign_stream = read_records(&a.input, &schema)?;
            let stats = run_assignment(&mut assign_stream, &scheme, &dir)?;
            let report = quality_report(&stats, block)?;
            csv.push_str(&format!("{name},{ratio},{}\n", report_csv_row(&report)));
            eprintln!(
                "swept {name} at ratio {ratio}: {} partitions, Q4 {:.4}",
                report.partition_count, report.q4_block_utilization
            );
        }
    }
    std::fs::write(&a.out, csv).map_err(|e| Error::io(a.out.clone(), e))?;
    eprintln!("sweep results written to {}", a.out.display());
    Ok(())
}
