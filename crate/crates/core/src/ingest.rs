//! File formats and dataset splitting.
//!
//! * Feature CSV: header `id,label,f0,…,f{d-1}`, one row per point, labels `0`/`1`.
//! * Valuation JSON and removal-curve JSON, each tagged with `schema_version`.
//! * Feature-map stacks as CSV (`k,h,w` header line, a dimension line, then `k·h` rows
//!   of `w` values) or as a binary tensor container.
//! * Contingency tables and mislabel flags as CSV.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{Direction, EvalSet, Ranking, RankingSource, RemovalCurve};
use crate::heatmap::{ClassWeights, FeatureMapStack};
use crate::rng::{Domain, Stream};
use crate::shapley::{Method, PointValue, ValuationResult};
use crate::stats::ContingencyTable;
use crate::types::{validate_dataset, Dataset, Metric, RawDataset, Split};

pub const SCHEMA_VERSION: u32 = 1;

/// Magic bytes opening a binary tensor container.
pub const TENSOR_MAGIC: &[u8; 4] = b"DWT1";

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    let bytes = read_file(path)?;
    String::from_utf8(bytes).map_err(|e| Error::parse(0, format!("{}: not UTF-8: {e}", path.display())))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn csv_line(err: &csv::Error) -> u64 {
    err.position().map_or(0, csv::Position::line)
}

// ---------------------------------------------------------------------------
// Feature CSV

/// Parses a feature CSV and validates the resulting dataset.
pub fn parse_dataset<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let header = rdr
        .headers()
        .map_err(|e| Error::parse(csv_line(&e), e.to_string()))?
        .clone();
    if header.len() < 3 || &header[0] != "id" || &header[1] != "label" {
        return Err(Error::parse(1, "header must be `id,label,f0,...`"));
    }
    for (k, name) in header.iter().skip(2).enumerate() {
        if name != format!("f{k}") {
            return Err(Error::parse(1, format!("expected column `f{k}`, found `{name}`")));
        }
    }
    let dim = header.len() - 2;

    let mut raw = RawDataset {
        dim: Some(dim),
        ..Default::default()
    };
    for record in rdr.records() {
        let record = record.map_err(|e| Error::parse(csv_line(&e), e.to_string()))?;
        let line = record.position().map_or(0, csv::Position::line);
        if record.len() < 2 {
            return Err(Error::parse(line, "row needs at least an id and a label"));
        }
        let label: i64 = record[1]
            .parse()
            .map_err(|_| Error::parse(line, format!("label `{}` is not 0 or 1", &record[1])))?;
        let row = record
            .iter()
            .skip(2)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| Error::parse(line, format!("feature `{v}` is not a number")))
            })
            .collect::<Result<Vec<f64>>>()?;
        raw.ids.push(record[0].to_owned());
        raw.labels.push(label);
        raw.rows.push(row);
    }
    validate_dataset(raw)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    parse_dataset(read_file(path)?.as_slice())
}

pub fn dataset_to_csv(data: &Dataset) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["id".to_owned(), "label".to_owned()];
    header.extend((0..data.dim()).map(|k| format!("f{k}")));
    w.write_record(&header).expect("in-memory write");
    for (i, row) in data.rows().enumerate() {
        let mut rec = vec![data.ids()[i].clone(), data.labels()[i].to_string()];
        rec.extend(row.iter().map(|v| format!("{v:?}")));
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV output is UTF-8")
}

pub fn save_dataset(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), dataset_to_csv(data))
}

// ---------------------------------------------------------------------------
// Stratified splitting

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSize {
    pub size: usize,
    pub positives: usize,
}

impl SplitSize {
    pub fn negatives(&self) -> usize {
        self.size - self.positives
    }
}

/// Exact per-split sizes and positive counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: SplitSize,
    pub validation: SplitSize,
    pub test: SplitSize,
    pub seed: u64,
}

/// Samples the three splits without replacement with exact class counts.
///
/// Split `s` (train = 0, validation = 1, test = 2) draws from random stream `s`:
/// first its positives, then its negatives, each by a partial Fisher–Yates pass over
/// the not-yet-used pool rows of that class. Rows keep their pool order in the output.
pub fn stratified_split(pool: &Dataset, spec: &SplitSpec) -> Result<Split> {
    let parts = [
        ("train", spec.train),
        ("validation", spec.validation),
        ("test", spec.test),
    ];
    for (name, part) in parts {
        if part.size == 0 {
            return Err(Error::InvalidConfig(format!("{name} split must be non-empty")));
        }
        if part.positives > part.size {
            return Err(Error::InvalidConfig(format!(
                "{name} split asks for {} positives out of {}",
                part.positives, part.size
            )));
        }
    }

    let (mut positives, mut negatives): (Vec<usize>, Vec<usize>) =
        (0..pool.len()).partition(|&i| pool.labels()[i] == 1);
    let mut out = Vec::with_capacity(3);
    for (index, (name, part)) in parts.into_iter().enumerate() {
        let mut rng = Stream::new(spec.seed, Domain::Split, index as u64);
        let mut take = |class: &mut Vec<usize>, count: usize, label: &'static str| -> Result<Vec<usize>> {
            if count > class.len() {
                return Err(Error::InsufficientClass {
                    split: name.to_owned(),
                    class: label,
                    requested: count,
                    available: class.len(),
                });
            }
            rng.partial_shuffle(class, count);
            Ok(class.drain(..count).collect())
        };
        let mut chosen = take(&mut positives, part.positives, "positive")?;
        chosen.extend(take(&mut negatives, part.negatives(), "negative")?);
        chosen.sort_unstable();
        out.push(pool.select(&chosen));
    }
    let test = out.pop().expect("three splits");
    let validation = out.pop().expect("three splits");
    let train = out.pop().expect("three splits");
    Split::new(train, validation, test)
}

// ---------------------------------------------------------------------------
// JSON helpers

fn json_error(e: serde_json::Error) -> Error {
    match e.classify() {
        serde_json::error::Category::Data => Error::Schema(e.to_string()),
        _ => Error::parse(e.line() as u64, e.to_string()),
    }
}

fn check_version(text: &str) -> Result<()> {
    #[derive(Deserialize)]
    struct Versioned {
        schema_version: Option<serde_json::Value>,
    }
    let v: Versioned = serde_json::from_str(text).map_err(json_error)?;
    match v.schema_version {
        Some(serde_json::Value::Number(n)) if n.as_u64() == Some(u64::from(SCHEMA_VERSION)) => Ok(()),
        Some(other) => Err(Error::Schema(format!(
            "unsupported schema_version {other}, expected {SCHEMA_VERSION}"
        ))),
        None => Err(Error::Schema("missing schema_version".into())),
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

// ---------------------------------------------------------------------------
// Valuation JSON

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ValuationFile {
    schema_version: u32,
    method: Method,
    seed: u64,
    metric: Metric,
    full_score: f64,
    empty_score: f64,
    permutations_used: usize,
    converged: bool,
    values: Vec<PointValue>,
}

pub fn valuation_to_json(result: &ValuationResult) -> String {
    to_json(&ValuationFile {
        schema_version: SCHEMA_VERSION,
        method: result.method,
        seed: result.seed,
        metric: result.metric,
        full_score: result.full_score,
        empty_score: result.empty_score,
        permutations_used: result.permutations_used,
        converged: result.converged,
        values: result.values.clone(),
    })
}

pub fn valuation_from_json(text: &str) -> Result<ValuationResult> {
    check_version(text)?;
    let f: ValuationFile = serde_json::from_str(text).map_err(json_error)?;
    let mut seen = std::collections::HashSet::new();
    if let Some(dup) = f.values.iter().find(|v| !seen.insert(v.id.as_str())) {
        return Err(Error::DuplicateId(dup.id.clone()));
    }
    Ok(ValuationResult {
        method: f.method,
        metric: f.metric,
        values: f.values,
        permutations_used: f.permutations_used,
        converged: f.converged,
        full_score: f.full_score,
        empty_score: f.empty_score,
        seed: f.seed,
    })
}

pub fn save_valuation(result: &ValuationResult, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), valuation_to_json(result))
}

pub fn load_valuation(path: impl AsRef<Path>) -> Result<ValuationResult> {
    valuation_from_json(&read_text(path.as_ref())?)
}

// ---------------------------------------------------------------------------
// Removal-curve JSON

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CurvePoint {
    fraction: f64,
    accuracy: Option<f64>,
    precision: Option<f64>,
    recall: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CurveFile {
    schema_version: u32,
    ranking_source: RankingSource,
    direction: Direction,
    eval_set: EvalSet,
    step_fraction: f64,
    points: Vec<CurvePoint>,
    /// Ranked ids in removal order.
    order: Vec<String>,
}

pub fn curve_to_json(curve: &RemovalCurve) -> String {
    let at = |m: Metric, i: usize| curve.scores.get(&m).map(|s| s[i]);
    let points = curve
        .fractions
        .iter()
        .enumerate()
        .map(|(i, &fraction)| CurvePoint {
            fraction,
            accuracy: at(Metric::Accuracy, i),
            precision: at(Metric::Precision, i),
            recall: at(Metric::Recall, i),
        })
        .collect();
    to_json(&CurveFile {
        schema_version: SCHEMA_VERSION,
        ranking_source: curve.ranking.source,
        direction: curve.ranking.direction,
        eval_set: curve.eval_set,
        step_fraction: curve.step_fraction,
        points,
        order: curve.ranking.order.clone(),
    })
}

pub fn curve_from_json(text: &str) -> Result<RemovalCurve> {
    check_version(text)?;
    let f: CurveFile = serde_json::from_str(text).map_err(json_error)?;
    let mut scores = BTreeMap::new();
    for metric in Metric::ALL {
        let column: Vec<Option<f64>> = f
            .points
            .iter()
            .map(|p| match metric {
                Metric::Accuracy => p.accuracy,
                Metric::Precision => p.precision,
                Metric::Recall => p.recall,
            })
            .collect();
        if column.iter().all(Option::is_some) && !column.is_empty() {
            scores.insert(metric, column.into_iter().flatten().collect());
        } else if column.iter().any(Option::is_some) {
            return Err(Error::Schema(format!("{metric} is missing from some curve points")));
        }
    }
    Ok(RemovalCurve {
        fractions: f.points.iter().map(|p| p.fraction).collect(),
        scores,
        ranking: Ranking {
            order: f.order,
            direction: f.direction,
            source: f.ranking_source,
        },
        eval_set: f.eval_set,
        step_fraction: f.step_fraction,
    })
}

pub fn save_curve(curve: &RemovalCurve, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), curve_to_json(curve))
}

pub fn load_curve(path: impl AsRef<Path>) -> Result<RemovalCurve> {
    curve_from_json(&read_text(path.as_ref())?)
}

/// Fixed-width text table of a curve, one row per removal step.
pub fn curve_table(curve: &RemovalCurve) -> String {
    let mut out = format!("{:>10}", "removed");
    for m in curve.scores.keys() {
        out.push_str(&format!(" {:>10}", m.name()));
    }
    out.push('\n');
    for (i, f) in curve.fractions.iter().enumerate() {
        out.push_str(&format!("{:>9.2}%", f * 100.0));
        for s in curve.scores.values() {
            out.push_str(&format!(" {:>10.4}", s[i]));
        }
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------------
// Binary tensor container
//
// Layout: magic `DWT1`, u32 rank, `rank` u64 dimensions, then the product of the
// dimensions as f64 values, row-major. All integers and floats little-endian.

pub fn encode_tensor(dims: &[usize], data: &[f64]) -> Vec<u8> {
    assert_eq!(dims.iter().product::<usize>(), data.len());
    let mut out = Vec::with_capacity(8 + 8 * dims.len() + 8 * data.len());
    out.extend_from_slice(TENSOR_MAGIC);
    out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
    for &d in dims {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_tensor(bytes: &[u8]) -> Result<(Vec<usize>, Vec<f64>)> {
    let bad = |msg: &str| Error::Schema(format!("tensor container: {msg}"));
    let rest = bytes.strip_prefix(TENSOR_MAGIC).ok_or_else(|| bad("bad magic bytes"))?;
    let (rank, mut rest) = rest.split_first_chunk::<4>().ok_or_else(|| bad("truncated header"))?;
    let rank = u32::from_le_bytes(*rank) as usize;
    if rank == 0 || rank > 8 {
        return Err(bad("rank must be between 1 and 8"));
    }
    let mut dims = Vec::with_capacity(rank);
    for _ in 0..rank {
        let (d, tail) = rest.split_first_chunk::<8>().ok_or_else(|| bad("truncated dimensions"))?;
        dims.push(usize::try_from(u64::from_le_bytes(*d)).map_err(|_| bad("dimension too large"))?);
        rest = tail;
    }
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| bad("element count overflows"))?;
    if count.checked_mul(8) != Some(rest.len()) {
        return Err(bad(&format!(
            "expected {count} values, found {} payload bytes",
            rest.len()
        )));
    }
    let data = rest
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok((dims, data))
}

// ---------------------------------------------------------------------------
// Feature-map stacks and class weights

fn parse_number_line(line: &str, lineno: u64) -> Result<Vec<f64>> {
    line.split(',')
        .map(|v| {
            let v = v.trim();
            v.parse::<f64>()
                .map_err(|_| Error::parse(lineno, format!("`{v}` is not a number")))
        })
        .collect()
}

fn content_lines(text: &str) -> impl Iterator<Item = (u64, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i as u64 + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

/// Parses the CSV stack format: `k,h,w` header, dimension line, then `k·h` rows.
pub fn parse_stack_csv(text: &str) -> Result<FeatureMapStack> {
    let mut lines = content_lines(text);
    match lines.next() {
        Some((_, h)) if h.replace(' ', "").eq_ignore_ascii_case("k,h,w") => {}
        Some((n, _)) => return Err(Error::parse(n, "first line must be `k,h,w`")),
        None => return Err(Error::parse(1, "empty stack file")),
    }
    let (n, dims) = lines.next().ok_or_else(|| Error::parse(2, "missing dimension line"))?;
    let dims: Vec<usize> = dims
        .split(',')
        .map(|v| v.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::parse(n, "dimension line must hold three non-negative integers"))?;
    let [k, h, w] = dims[..] else {
        return Err(Error::parse(n, "dimension line must hold exactly k,h,w"));
    };
    let rows = k
        .checked_mul(h)
        .ok_or_else(|| Error::parse(n, "stack dimensions overflow"))?;

    let mut data = Vec::new();
    let mut seen = 0usize;
    for (lineno, line) in lines {
        if seen == rows {
            return Err(Error::parse(lineno, format!("more than {rows} map rows")));
        }
        let values = parse_number_line(line, lineno)?;
        if values.len() != w {
            return Err(Error::parse(lineno, format!("expected {w} values, found {}", values.len())));
        }
        data.extend(values);
        seen += 1;
    }
    if seen != rows {
        return Err(Error::parse(0, format!("expected {rows} map rows, found {seen}")));
    }
    FeatureMapStack::new(k, h, w, data)
}

pub fn stack_to_csv(stack: &FeatureMapStack) -> String {
    let mut out = format!("k,h,w\n{},{},{}\n", stack.maps(), stack.height(), stack.width());
    for row in stack.data().chunks_exact(stack.width()) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_stack_binary(bytes: &[u8]) -> Result<FeatureMapStack> {
    let (dims, data) = decode_tensor(bytes)?;
    let [k, h, w] = dims[..] else {
        return Err(Error::Schema(format!("feature-map stack needs rank 3, got {}", dims.len())));
    };
    FeatureMapStack::new(k, h, w, data)
}

pub fn stack_to_binary(stack: &FeatureMapStack) -> Vec<u8> {
    encode_tensor(&[stack.maps(), stack.height(), stack.width()], stack.data())
}

/// Reads a stack from either format, chosen by the leading magic bytes.
pub fn parse_stack(bytes: &[u8]) -> Result<FeatureMapStack> {
    if bytes.starts_with(TENSOR_MAGIC) {
        parse_stack_binary(bytes)
    } else {
        let text = std::str::from_utf8(bytes).map_err(|e| Error::parse(0, format!("not UTF-8: {e}")))?;
        parse_stack_csv(text)
    }
}

pub fn load_stack(path: impl AsRef<Path>) -> Result<FeatureMapStack> {
    let path = path.as_ref();
    let mut stack = parse_stack(&read_file(path)?)?;
    stack.label = path.display().to_string();
    Ok(stack)
}

/// Class weights as comma- or newline-separated reals, or a rank-1 tensor container.
pub fn parse_weights(bytes: &[u8]) -> Result<ClassWeights> {
    if bytes.starts_with(TENSOR_MAGIC) {
        let (dims, data) = decode_tensor(bytes)?;
        if dims.len() != 1 {
            return Err(Error::Schema(format!("weights need rank 1, got {}", dims.len())));
        }
        return ClassWeights::new(data);
    }
    let text = std::str::from_utf8(bytes).map_err(|e| Error::parse(0, format!("not UTF-8: {e}")))?;
    let mut weights = Vec::new();
    for (lineno, line) in content_lines(text) {
        weights.extend(parse_number_line(line.trim_end_matches(','), lineno)?);
    }
    ClassWeights::new(weights)
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<ClassWeights> {
    parse_weights(&read_file(path.as_ref())?)
}

// ---------------------------------------------------------------------------
// Contingency tables

/// Integer grid with an optional header row and an optional label column.
pub fn parse_contingency_csv(text: &str) -> Result<ContingencyTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut records: Vec<(u64, Vec<String>)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::parse(csv_line(&e), e.to_string()))?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let line = rec.position().map_or(0, csv::Position::line);
        records.push((line, rec.iter().map(str::to_owned).collect()));
    }
    if records.is_empty() {
        return Err(Error::parse(1, "empty table"));
    }
    let is_count = |s: &str| s.parse::<u64>().is_ok();
    let has_row_labels = records
        .iter()
        .skip(1)
        .any(|(_, r)| r.first().is_some_and(|c| !is_count(c)));
    let label_offset = usize::from(has_row_labels);
    // An empty top-left cell above a label column also marks a header row.
    let has_header = records[0].1.iter().skip(label_offset).any(|c| !is_count(c))
        || (has_row_labels && records[0].1.first().is_some_and(String::is_empty));

    let (header, body) = if has_header {
        (Some(&records[0]), &records[1..])
    } else {
        (None, &records[..])
    };
    let width = body.first().map_or(0, |(_, r)| r.len());
    let mut counts = Vec::with_capacity(body.len());
    let mut row_labels = Vec::with_capacity(body.len());
    for (i, (line, rec)) in body.iter().enumerate() {
        if rec.len() != width {
            return Err(Error::DimensionMismatch(format!(
                "line {line} has {} cells, expected {width}",
                rec.len()
            )));
        }
        row_labels.push(if has_row_labels {
            rec[0].clone()
        } else {
            format!("row{i}")
        });
        let row = rec[label_offset..]
            .iter()
            .map(|c| {
                c.parse::<u64>()
                    .map_err(|_| Error::parse(*line, format!("`{c}` is not a non-negative integer count")))
            })
            .collect::<Result<Vec<u64>>>()?;
        counts.push(row);
    }
    let cols = width.saturating_sub(label_offset);
    let col_labels = match header {
        Some((line, h)) => {
            let labels: Vec<String> = h.iter().skip(label_offset).cloned().collect();
            if labels.len() != cols {
                return Err(Error::DimensionMismatch(format!(
                    "header on line {line} names {} columns, table has {cols}",
                    labels.len()
                )));
            }
            labels
        }
        None => (0..cols).map(|j| format!("col{j}")).collect(),
    };
    ContingencyTable::with_labels(counts, row_labels, col_labels)
}

pub fn load_contingency(path: impl AsRef<Path>) -> Result<ContingencyTable> {
    parse_contingency_csv(&read_text(path.as_ref())?)
}

// ---------------------------------------------------------------------------
// Mislabel flags

fn parse_flag(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" => Some(true),
        "0" | "false" | "no" => Some(false),
        _ => None,
    }
}

/// Two-column `id,flag` CSV with an optional header; flags are 0/1, true/false or yes/no.
pub fn parse_flags(text: &str) -> Result<HashMap<String, bool>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut flags = HashMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::parse(csv_line(&e), e.to_string()))?;
        let line = rec.position().map_or(0, csv::Position::line);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if rec.len() != 2 {
            return Err(Error::parse(line, "expected `id,flag`"));
        }
        let Some(flag) = parse_flag(&rec[1]) else {
            if i == 0 {
                continue; // header
            }
            return Err(Error::parse(line, format!("`{}` is not a boolean flag", &rec[1])));
        };
        if flags.insert(rec[0].to_owned(), flag).is_some() {
            return Err(Error::DuplicateId(rec[0].to_owned()));
        }
    }
    Ok(flags)
}

pub fn load_flags(path: impl AsRef<Path>) -> Result<HashMap<String, bool>> {
    parse_flags(&read_text(path.as_ref())?)
}
