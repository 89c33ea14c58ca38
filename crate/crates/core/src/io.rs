//! Parameter files, CSV schemas, and fixed output formatting.
//!
//! Every file may open with a `# schema=1` comment; a missing line means
//! version 1.
//!
//! Parameter file:
//!
//! ```text
//! # schema=1
//! t_k = 1e-5      # kernel time
//! t_i = 2e-6
//! t_a = 1e-5
//! t_l = 5e-5
//! k_c = 4.18e-6
//! b_c = 1.59e-4
//! ```
//!
//! `t_b` defaults to `t_a`. `m_base` and `m_node` are optional; giving either
//! one enables the memory model with the other defaulting to 0.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fitting::{FitResult, MeasurementSeries};
use crate::model::{measured_speedup, MemoryModel, SpeedupEstimate, TimingParameters};
use crate::optimizer::Recommendation;
use crate::sim::{summarize_events, EventKind, EventTrace, ExecutionMode, TraceEvent, TraceSummary};

pub const SCHEMA_VERSION: u32 = 1;
pub const MEASUREMENT_HEADER: &str = "batch_size,run_index,seconds";
pub const TRACE_HEADER: &str = "timestamp,kind,batch_index,kernel_index";

const TIMING_KEYS: [&str; 7] = ["t_k", "t_i", "t_a", "t_l", "t_b", "k_c", "b_c"];
const MEMORY_KEYS: [&str; 2] = ["m_base", "m_node"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamsFile {
    pub timing: TimingParameters,
    pub memory: Option<MemoryModel>,
}

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Checks an optional leading `# schema=N` line.
fn check_schema(first_line: &str, path: &Path) -> Result<()> {
    let Some(rest) = first_line.trim().strip_prefix('#') else {
        return Ok(());
    };
    if let Some(version) = rest.trim().strip_prefix("schema=") {
        match version.trim().parse::<u32>() {
            Ok(SCHEMA_VERSION) => {}
            _ => {
                return Err(Error::parse(
                    path,
                    1,
                    format!("unsupported schema `{}`", version.trim()),
                ))
            }
        }
    }
    Ok(())
}

pub fn parse_params(path: &Path) -> Result<ParamsFile> {
    parse_params_str(&read_to_string(path)?, path)
}

/// Parses parameter-file text; `path` is only used in diagnostics.
pub fn parse_params_str(text: &str, path: &Path) -> Result<ParamsFile> {
    if let Some(first) = text.lines().next() {
        check_schema(first, path)?;
    }
    let mut values: HashMap<&str, f64> = HashMap::new();
    let mut line_count = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        line_count = line_no;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| Error::parse(path, line_no, format!("expected key=value, got `{content}`")))?;
        let key = key.trim();
        let value = value.trim();
        let known = TIMING_KEYS
            .iter()
            .chain(MEMORY_KEYS.iter())
            .find(|k| **k == key)
            .ok_or_else(|| Error::parse(path, line_no, format!("unknown key `{key}`")))?;
        let number: f64 = value
            .parse()
            .map_err(|_| Error::parse(path, line_no, format!("malformed number `{value}` for `{key}`")))?;
        if !number.is_finite() || number < 0.0 {
            return Err(Error::parse(
                path,
                line_no,
                format!("`{key}` must be finite and >= 0, got {value}"),
            ));
        }
        if values.insert(known, number).is_some() {
            return Err(Error::parse(path, line_no, format!("duplicate key `{key}`")));
        }
    }

    let eof = line_count.max(1);
    let required = |key: &str| {
        values
            .get(key)
            .copied()
            .ok_or_else(|| Error::parse(path, eof, format!("missing required key `{key}`")))
    };
    let inter_graph_gap = required("t_a")?;
    let timing = TimingParameters {
        kernel_time: required("t_k")?,
        intra_graph_gap: required("t_i")?,
        inter_graph_gap,
        launch_latency: required("t_l")?,
        baseline_gap: values.get("t_b").copied().unwrap_or(inter_graph_gap),
        creation_per_node: required("k_c")?,
        creation_base: required("b_c")?,
    };
    let memory = if MEMORY_KEYS.iter().any(|k| values.contains_key(k)) {
        Some(MemoryModel {
            base_bytes: values.get("m_base").copied().unwrap_or(0.0),
            bytes_per_node: values.get("m_node").copied().unwrap_or(0.0),
        })
    } else {
        None
    };
    Ok(ParamsFile { timing, memory })
}

/// Renders a parameter file that [`parse_params_str`] reads back exactly.
pub fn format_params(params: &ParamsFile) -> String {
    let mut out = format!("# schema={SCHEMA_VERSION}\n");
    for (key, value) in params.timing.named_fields() {
        let _ = writeln!(out, "{key} = {value:e}");
    }
    if let Some(m) = params.memory {
        let _ = writeln!(out, "m_base = {:e}", m.base_bytes);
        let _ = writeln!(out, "m_node = {:e}", m.bytes_per_node);
    }
    out
}

pub fn parse_measurements(path: &Path) -> Result<MeasurementSeries> {
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut series = parse_measurements_str(&read_to_string(path)?, path)?;
    series.label = label;
    Ok(series)
}

/// Parses `batch_size,run_index,seconds` rows. Run indices must count up
/// from 0 within each batch size.
pub fn parse_measurements_str(text: &str, path: &Path) -> Result<MeasurementSeries> {
    let mut lines = text.lines().enumerate().peekable();
    if let Some((_, first)) = lines.peek() {
        check_schema(first, path)?;
    }
    let mut header_seen = false;
    let mut next_run: BTreeMap<u64, u64> = BTreeMap::new();
    let mut series = MeasurementSeries::new("");
    for (idx, raw) in lines {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !header_seen {
            if line != MEASUREMENT_HEADER {
                return Err(Error::parse(
                    path,
                    line_no,
                    format!("expected header `{MEASUREMENT_HEADER}`, got `{line}`"),
                ));
            }
            header_seen = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let [batch, run, seconds] = fields[..] else {
            return Err(Error::parse(path, line_no, format!("expected 3 fields, got {}", fields.len())));
        };
        let batch: u64 = batch
            .parse()
            .ok()
            .filter(|b| *b > 0)
            .ok_or_else(|| Error::parse(path, line_no, format!("batch_size `{batch}` is not a positive integer")))?;
        let run: u64 = run
            .parse()
            .map_err(|_| Error::parse(path, line_no, format!("run_index `{run}` is not a non-negative integer")))?;
        let secs: f64 = seconds
            .parse()
            .map_err(|_| Error::parse(path, line_no, format!("malformed seconds `{seconds}`")))?;
        if !(secs > 0.0 && secs.is_finite()) {
            return Err(Error::parse(path, line_no, format!("seconds must be > 0, got `{seconds}`")));
        }
        let expected = next_run.entry(batch).or_insert(0);
        if run != *expected {
            return Err(Error::parse(
                path,
                line_no,
                format!("run_index {run} for batch_size {batch}; expected {expected}"),
            ));
        }
        *expected += 1;
        series.push_sample(batch, secs);
    }
    if !header_seen {
        return Err(Error::parse(path, 1, format!("missing header `{MEASUREMENT_HEADER}`")));
    }
    Ok(series)
}

pub fn write_measurements<W: Write>(series: &MeasurementSeries, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{MEASUREMENT_HEADER}")?;
    for point in &series.points {
        for (run, secs) in point.samples.iter().enumerate() {
            writeln!(out, "{},{},{}", point.batch_size, run, sci(*secs))?;
        }
    }
    Ok(())
}

fn opt_index(v: Option<u64>) -> String {
    v.map(|i| i.to_string()).unwrap_or_default()
}

pub fn write_trace<W: Write>(trace: &EventTrace, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for e in &trace.events {
        writeln!(
            out,
            "{:.9},{},{},{}",
            e.timestamp,
            e.kind,
            opt_index(e.batch_index),
            opt_index(e.kernel_index)
        )?;
    }
    Ok(())
}

/// Reads a trace CSV back into events. The mode is inferred from the event
/// kinds present.
pub fn parse_trace_str(text: &str, path: &Path) -> Result<(Vec<TraceEvent>, ExecutionMode)> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::parse(path, 1, e.to_string()))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if headers != TRACE_HEADER {
        return Err(Error::parse(path, 1, format!("expected header `{TRACE_HEADER}`")));
    }
    let mut events = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::parse(path, 0, e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let bad = |what: &str| Error::parse(path, line, format!("malformed {what}"));
        let index = |field: &str| -> Result<Option<u64>> {
            if field.is_empty() {
                Ok(None)
            } else {
                field.parse().map(Some).map_err(|_| bad("index"))
            }
        };
        events.push(TraceEvent {
            timestamp: record[0].parse().map_err(|_| bad("timestamp"))?,
            kind: record[1].parse::<EventKind>().map_err(|m| Error::parse(path, line, m))?,
            batch_index: index(&record[2])?,
            kernel_index: index(&record[3])?,
        });
    }
    let mode = if events.iter().any(|e| e.kind == EventKind::BaselineKernelLaunched) {
        ExecutionMode::Baseline
    } else {
        ExecutionMode::Graph
    };
    Ok((events, mode))
}

/// Spans of a trace read back from its CSV form.
pub fn summarize_trace_csv(text: &str, path: &Path) -> Result<TraceSummary> {
    let (events, mode) = parse_trace_str(text, path)?;
    summarize_events(&events, mode)
}

/// Six significant digits in scientific notation.
pub fn sci(v: f64) -> String {
    format!("{v:.5e}")
}

/// `creation_span,execution_span,total` with nine decimals.
pub fn format_summary(s: &TraceSummary) -> String {
    format!("{:.9},{:.9},{:.9}", s.creation_span, s.execution_span, s.total)
}

/// `kind,slope,intercept,mae,points_used`
pub fn format_fit(f: &FitResult) -> String {
    format!(
        "{},{},{},{},{}",
        f.kind,
        sci(f.slope),
        sci(f.intercept),
        sci(f.mae),
        f.points_used
    )
}

/// `batch_size,num_batches,predicted_total,predicted_speedup,continuous_optimum`;
/// unknown values are left empty.
pub fn format_recommendation(r: &Recommendation) -> String {
    format!(
        "{},{},{},{},{}",
        r.batch_size,
        r.num_batches,
        sci(r.predicted_total),
        r.predicted_speedup.map(sci).unwrap_or_default(),
        r.continuous_optimum.map(sci).unwrap_or_default()
    )
}

/// `ratio,error`
pub fn format_speedup(s: &SpeedupEstimate) -> String {
    format!("{},{}", sci(s.ratio), sci(s.error))
}

/// Speedups for batch sizes present in both series, ascending, plus the
/// batch sizes found in only one of them.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedupPairing {
    pub matched: Vec<(u64, SpeedupEstimate)>,
    pub unmatched: Vec<u64>,
}

pub fn pair_speedups(baseline: &MeasurementSeries, graph: &MeasurementSeries) -> Result<SpeedupPairing> {
    let base: BTreeMap<u64, _> = baseline.points.iter().map(|p| (p.batch_size, p)).collect();
    let graph: BTreeMap<u64, _> = graph.points.iter().map(|p| (p.batch_size, p)).collect();
    let mut matched = Vec::new();
    let mut unmatched = Vec::new();
    for (&size, b) in &base {
        match graph.get(&size) {
            Some(g) => matched.push((size, measured_speedup(&b.stats()?, &g.stats()?)?)),
            None => unmatched.push(size),
        }
    }
    unmatched.extend(graph.keys().filter(|s| !base.contains_key(s)));
    unmatched.sort_unstable();
    Ok(SpeedupPairing { matched, unmatched })
}
