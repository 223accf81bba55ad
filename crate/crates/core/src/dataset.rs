//! Labeled point sets and their on-disk formats.
//!
//! Two input formats are supported:
//!
//! * delimited text: comma separated, optional header row, one class label
//!   column selected by header name or 0-based index;
//! * raw binary: little-endian row-major `f32`/`f64` payload described by a
//!   plain-text sidecar (`n=`, `d=`, `dtype=`, optional `labels=`) plus a
//!   labels file holding one label per line.
//!
//! Labels are re-encoded to dense indices in order of first appearance.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// `N × D` points with one class label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset<T> {
    points: Matrix<T>,
    labels: Vec<usize>,
    class_names: Vec<String>,
}

impl<T: Scalar> LabeledDataset<T> {
    /// Validates and wraps the parts of a dataset.
    pub fn new(points: Matrix<T>, labels: Vec<usize>, class_names: Vec<String>) -> Result<Self> {
        let (n, d, m) = (points.rows(), points.cols(), class_names.len());
        if labels.len() != n {
            return Err(Error::Data(format!(
                "{} labels for {n} points",
                labels.len()
            )));
        }
        if m < 2 {
            return Err(Error::Data(format!("need at least 2 classes, found {m}")));
        }
        if n < m {
            return Err(Error::Data(format!("{n} points cannot cover {m} classes")));
        }
        if d < 2 {
            return Err(Error::Data(format!("need at least 2 features, found {d}")));
        }
        let mut seen = vec![0usize; m];
        for (row, &l) in labels.iter().enumerate() {
            if l >= m {
                return Err(Error::Data(format!(
                    "row {row}: label {l} out of range for {m} classes"
                )));
            }
            seen[l] += 1;
        }
        if let Some(empty) = seen.iter().position(|&c| c == 0) {
            return Err(Error::Data(format!(
                "class {empty} ({}) has no points",
                class_names[empty]
            )));
        }
        for (row, r) in points.iter_rows().enumerate() {
            if let Some(col) = r.iter().position(|v| !v.is_finite()) {
                return Err(Error::Data(format!(
                    "non-finite value at row {row}, column {col}"
                )));
            }
        }
        Ok(Self {
            points,
            labels,
            class_names,
        })
    }

    pub fn points(&self) -> &Matrix<T> {
        &self.points
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    /// Number of points `N`.
    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.rows() == 0
    }

    /// Feature count `D`.
    pub fn dim(&self) -> usize {
        self.points.cols()
    }

    /// Class count `M`.
    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Row indices of each class, in row order.
    pub fn class_members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_classes()];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }

    pub fn class_sizes(&self) -> Vec<usize> {
        let mut out = vec![0; self.num_classes()];
        for &l in &self.labels {
            out[l] += 1;
        }
        out
    }
}

/// Which column holds the class label in a delimited text file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Name(String),
    Index(usize),
}

impl LabelColumn {
    /// All-digit strings select by index, anything else by header name.
    pub fn parse(s: &str) -> Self {
        match s.parse::<usize>() {
            Ok(i) => LabelColumn::Index(i),
            Err(_) => LabelColumn::Name(s.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StandardizeMode {
    #[default]
    None,
    ZScore,
}

#[derive(Debug, Clone, PartialEq)]
pub enum IngestFormat {
    DelimitedText { label_column: LabelColumn },
    RawBinary { sidecar_path: PathBuf },
}

/// Where and how to read a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestSpec {
    pub path: PathBuf,
    pub format: IngestFormat,
    pub standardize: StandardizeMode,
}

impl IngestSpec {
    pub fn text(path: impl Into<PathBuf>, label_column: LabelColumn) -> Self {
        Self {
            path: path.into(),
            format: IngestFormat::DelimitedText { label_column },
            standardize: StandardizeMode::None,
        }
    }

    pub fn binary(path: impl Into<PathBuf>, sidecar_path: impl Into<PathBuf>) -> Self {
        Self {
            path: path.into(),
            format: IngestFormat::RawBinary {
                sidecar_path: sidecar_path.into(),
            },
            standardize: StandardizeMode::None,
        }
    }
}

/// Reads a dataset per `spec` and applies its standardization mode.
pub fn load<T: Scalar>(spec: &IngestSpec) -> Result<LabeledDataset<T>> {
    let ds = match &spec.format {
        IngestFormat::DelimitedText { .. } => load_text(spec)?,
        IngestFormat::RawBinary { .. } => load_binary(spec)?,
    };
    Ok(standardize(ds, spec.standardize))
}

/// First-appearance label encoding.
fn encode_labels<'a>(raw: impl IntoIterator<Item = &'a str>) -> (Vec<usize>, Vec<String>) {
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut names = Vec::new();
    let labels = raw
        .into_iter()
        .map(|s| {
            *index.entry(s).or_insert_with(|| {
                names.push(s.to_string());
                names.len() - 1
            })
        })
        .collect();
    (labels, names)
}

/// Parses a comma-separated file. Error positions use 1-based line numbers
/// and 0-based column indices.
pub fn load_text<T: Scalar>(spec: &IngestSpec) -> Result<LabeledDataset<T>> {
    let IngestFormat::DelimitedText { label_column } = &spec.format else {
        return Err(Error::Param("load_text needs a delimited-text spec".into()));
    };
    let path_str = spec.path.display().to_string();
    let parse_err = |line: usize, column: usize, msg: String| Error::Parse {
        path: path_str.clone(),
        line,
        column,
        msg,
    };

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(&spec.path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(&spec.path, io),
            other => Error::Data(format!("{path_str}: {other:?}")),
        })?;

    let mut records = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, 0, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        // Blank lines arrive as a single empty field.
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        records.push((line, rec));
    }
    if records.is_empty() {
        return Err(parse_err(1, 0, "empty file".into()));
    }

    let width = records[0].1.len();
    let (label_idx, has_header) = match label_column {
        LabelColumn::Name(name) => {
            let idx = records[0]
                .1
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| {
                    parse_err(records[0].0, 0, format!("no header column named {name:?}"))
                })?;
            (idx, true)
        }
        LabelColumn::Index(idx) => {
            if *idx >= width {
                return Err(parse_err(
                    records[0].0,
                    *idx,
                    format!("label column {idx} missing; rows have {width} columns"),
                ));
            }
            let header = records[0]
                .1
                .iter()
                .enumerate()
                .filter(|(c, _)| c != idx)
                .all(|(_, cell)| cell.parse::<f64>().is_err());
            (*idx, header)
        }
    };
    let body = if has_header {
        &records[1..]
    } else {
        &records[..]
    };
    if body.is_empty() {
        return Err(parse_err(records[0].0, 0, "no data rows".into()));
    }

    let d = width - 1;
    let mut values = Vec::with_capacity(body.len() * d);
    let mut raw_labels = Vec::with_capacity(body.len());
    for (line, rec) in body {
        if rec.len() != width {
            return Err(parse_err(
                *line,
                rec.len().min(width),
                format!("row has {} columns, expected {width}", rec.len()),
            ));
        }
        for (c, cell) in rec.iter().enumerate() {
            if c == label_idx {
                continue;
            }
            let v: T = cell
                .parse()
                .map_err(|_| parse_err(*line, c, format!("cannot parse {cell:?} as a number")))?;
            if !v.is_finite() {
                return Err(parse_err(*line, c, format!("non-finite value {cell:?}")));
            }
            values.push(v);
        }
        raw_labels.push(rec[label_idx].to_string());
    }
    let (labels, names) = encode_labels(raw_labels.iter().map(String::as_str));
    let points = Matrix::from_vec(body.len(), d, values)?;
    LabeledDataset::new(points, labels, names)
}

/// Writes `f0..f{D-1},label` rows with a header; floats use the shortest
/// representation that parses back to the same value.
pub fn write_text<T: Scalar>(ds: &LabeledDataset<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Data(e.to_string()))?;
    let mut header: Vec<String> = (0..ds.dim()).map(|j| format!("f{j}")).collect();
    header.push("label".into());
    let to_err = |e: csv::Error| Error::Data(format!("{}: {e}", path.display()));
    w.write_record(&header).map_err(to_err)?;
    for (row, &l) in ds.points().iter_rows().zip(ds.labels()) {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        rec.push(ds.class_names()[l].clone());
        w.write_record(&rec).map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Element type of a binary payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryDtype {
    F32,
    F64,
}

impl BinaryDtype {
    pub fn width(self) -> usize {
        match self {
            BinaryDtype::F32 => 4,
            BinaryDtype::F64 => 8,
        }
    }
}

/// Parsed sidecar of a binary payload.
#[derive(Debug, Clone, PartialEq)]
pub struct Sidecar {
    pub n: usize,
    pub d: usize,
    pub dtype: BinaryDtype,
    pub labels_path: Option<PathBuf>,
}

impl Sidecar {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let err = |line: usize, msg: String| Error::Parse {
            path: path.display().to_string(),
            line,
            column: 0,
            msg,
        };
        let (mut n, mut d, mut dtype, mut labels_path) = (None, None, None, None);
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(i + 1, format!("expected key=value, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "n" => n = Some(value.parse().map_err(|_| err(i + 1, format!("bad n {value:?}")))?),
                "d" => d = Some(value.parse().map_err(|_| err(i + 1, format!("bad d {value:?}")))?),
                "dtype" => {
                    dtype = Some(match value {
                        "f32" => BinaryDtype::F32,
                        "f64" => BinaryDtype::F64,
                        other => return Err(err(i + 1, format!("unknown dtype {other:?}"))),
                    })
                }
                "labels" => labels_path = Some(PathBuf::from(value)),
                other => return Err(err(i + 1, format!("unknown sidecar key {other:?}"))),
            }
        }
        Ok(Self {
            n: n.ok_or_else(|| err(0, "missing n=".into()))?,
            d: d.ok_or_else(|| err(0, "missing d=".into()))?,
            dtype: dtype.ok_or_else(|| err(0, "missing dtype=".into()))?,
            labels_path,
        })
    }
}

/// Reads a little-endian row-major payload. The labels file is the sidecar's
/// `labels=` entry (relative to the sidecar's directory) or, when absent, the
/// payload path with a `.labels` extension.
pub fn load_binary<T: Scalar>(spec: &IngestSpec) -> Result<LabeledDataset<T>> {
    let IngestFormat::RawBinary { sidecar_path } = &spec.format else {
        return Err(Error::Param("load_binary needs a raw-binary spec".into()));
    };
    let side_text = fs::read_to_string(sidecar_path).map_err(|e| Error::io(sidecar_path, e))?;
    let sidecar = Sidecar::parse(&side_text, sidecar_path)?;
    let payload = fs::read(&spec.path).map_err(|e| Error::io(&spec.path, e))?;
    let labels_path = match &sidecar.labels_path {
        Some(p) if p.is_relative() => sidecar_path
            .parent()
            .map_or_else(|| p.clone(), |dir| dir.join(p)),
        Some(p) => p.clone(),
        None => spec.path.with_extension("labels"),
    };
    let labels_text = fs::read_to_string(&labels_path).map_err(|e| Error::io(&labels_path, e))?;
    decode_binary(&sidecar, &payload, &labels_text)
}

/// Reinterprets `payload` according to `sidecar` and pairs it with labels.
pub fn decode_binary<T: Scalar>(
    sidecar: &Sidecar,
    payload: &[u8],
    labels_text: &str,
) -> Result<LabeledDataset<T>> {
    let width = sidecar.dtype.width();
    let expected = sidecar.n * sidecar.d * width;
    if payload.len() != expected {
        return Err(Error::Data(format!(
            "payload is {} bytes, sidecar n={} d={} {:?} needs {expected}",
            payload.len(),
            sidecar.n,
            sidecar.d,
            sidecar.dtype
        )));
    }
    let values: Vec<T> = match sidecar.dtype {
        BinaryDtype::F32 => payload
            .chunks_exact(4)
            .map(|c| T::from_f32(f32::from_le_bytes(c.try_into().unwrap())).unwrap_or(T::nan()))
            .collect(),
        BinaryDtype::F64 => payload
            .chunks_exact(8)
            .map(|c| T::from_f64(f64::from_le_bytes(c.try_into().unwrap())).unwrap_or(T::nan()))
            .collect(),
    };
    let raw: Vec<&str> = labels_text
        .lines()
        .map(str::trim)
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .skip_while(|s| s.is_empty())
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .collect();
    if raw.len() != sidecar.n {
        return Err(Error::Data(format!(
            "labels file has {} entries, payload has {} points",
            raw.len(),
            sidecar.n
        )));
    }
    let (labels, names) = encode_labels(raw);
    let points = Matrix::from_vec(sidecar.n, sidecar.d, values)?;
    LabeledDataset::new(points, labels, names)
}

/// Column-wise z-scoring with the sample standard deviation. Columns whose
/// standard deviation is zero pass through untouched.
pub fn standardize<T: Scalar>(ds: LabeledDataset<T>, mode: StandardizeMode) -> LabeledDataset<T> {
    if mode == StandardizeMode::None {
        return ds;
    }
    let LabeledDataset {
        mut points,
        labels,
        class_names,
    } = ds;
    let (n, d) = (points.rows(), points.cols());
    let nf = T::of_usize(n);
    for j in 0..d {
        let mean = (0..n).map(|i| points.get(i, j)).sum::<T>() / nf;
        let ss = (0..n)
            .map(|i| {
                let c = points.get(i, j) - mean;
                c * c
            })
            .sum::<T>();
        let sd = (ss / T::of_usize(n - 1)).sqrt();
        if sd <= T::epsilon() * mean.abs() || sd == T::zero() {
            continue;
        }
        for i in 0..n {
            points.set(i, j, (points.get(i, j) - mean) / sd);
        }
    }
    LabeledDataset {
        points,
        labels,
        class_names,
    }
}
