//! Labeled feature matrices, their CSV form, and the synthetic corpus generator.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng as _;

use crate::disasm::FeatureVector;
use crate::error::{Error, Result};
use crate::seed;

/// Class label. Malware is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Benign = 0,
    Malware = 1,
}

impl Label {
    pub fn from_u8(v: u8) -> Option<Label> {
        match v {
            0 => Some(Label::Benign),
            1 => Some(Label::Malware),
            _ => None,
        }
    }

    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn as_f64(self) -> f64 {
        self as u8 as f64
    }

    pub fn other(self) -> Label {
        match self {
            Label::Benign => Label::Malware,
            Label::Malware => Label::Benign,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub matrix: Array2<f64>,
    pub labels: Vec<Label>,
    pub column_names: Vec<String>,
    pub row_ids: Vec<String>,
}

impl LabeledDataset {
    pub fn new(
        matrix: Array2<f64>,
        labels: Vec<Label>,
        column_names: Vec<String>,
        row_ids: Vec<String>,
    ) -> Result<Self> {
        if matrix.nrows() != labels.len() {
            return Err(Error::LengthMismatch {
                left: matrix.nrows(),
                right: labels.len(),
            });
        }
        if matrix.nrows() != row_ids.len() {
            return Err(Error::LengthMismatch {
                left: matrix.nrows(),
                right: row_ids.len(),
            });
        }
        if matrix.ncols() != column_names.len() {
            return Err(Error::DimensionMismatch {
                expected: column_names.len(),
                found: matrix.ncols(),
            });
        }
        Ok(LabeledDataset {
            matrix,
            labels,
            column_names,
            row_ids,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.matrix.ncols()
    }

    /// (benign, malware) row counts.
    pub fn class_counts(&self) -> (usize, usize) {
        let malware = self.labels.iter().filter(|l| **l == Label::Malware).count();
        (self.labels.len() - malware, malware)
    }

    pub fn require_both_classes(&self) -> Result<()> {
        let (benign, malware) = self.class_counts();
        if benign == 0 || malware == 0 {
            return Err(Error::SingleClass);
        }
        Ok(())
    }

    pub fn select_rows(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            matrix: self.matrix.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            column_names: self.column_names.clone(),
            row_ids: indices.iter().map(|&i| self.row_ids[i].clone()).collect(),
        }
    }

    /// Same rows and labels over a new feature space.
    pub fn with_features(&self, matrix: Array2<f64>, column_names: Vec<String>) -> Result<Self> {
        LabeledDataset::new(
            matrix,
            self.labels.clone(),
            column_names,
            self.row_ids.clone(),
        )
    }

    pub fn label_vector(&self) -> Vec<f64> {
        self.labels.iter().map(|l| l.as_f64()).collect()
    }
}

pub fn assemble(
    vectors: &[FeatureVector],
    labels: &HashMap<String, Label>,
    column_names: &[String],
) -> Result<LabeledDataset> {
    let width = column_names.len();
    let mut matrix = Array2::zeros((vectors.len(), width));
    let mut row_labels = Vec::with_capacity(vectors.len());
    for (i, v) in vectors.iter().enumerate() {
        let label = labels
            .get(&v.file_id)
            .ok_or_else(|| Error::MissingLabel(v.file_id.clone()))?;
        if v.counts.len() != width {
            return Err(Error::DimensionMismatch {
                expected: width,
                found: v.counts.len(),
            });
        }
        for (j, &c) in v.counts.iter().enumerate() {
            matrix[[i, j]] = c as f64;
        }
        row_labels.push(*label);
    }
    LabeledDataset::new(
        matrix,
        row_labels,
        column_names.to_vec(),
        vectors.iter().map(|v| v.file_id.clone()).collect(),
    )
}

/// Writes the dataset as CSV: `row_id,label,<opcode_1>,...`.
/// `comment`, when given, is written first as `# ` lines.
pub fn write_csv<W: Write>(dataset: &LabeledDataset, out: W, comment: Option<&str>) -> Result<()> {
    let mut out = std::io::BufWriter::new(out);
    if let Some(comment) = comment {
        for line in comment.lines() {
            writeln!(out, "# {line}")?;
        }
    }
    let mut writer = csv::Writer::from_writer(out);
    let mut header = vec!["row_id".to_string(), "label".to_string()];
    header.extend(dataset.column_names.iter().cloned());
    writer.write_record(&header)?;
    let mut record = Vec::with_capacity(header.len());
    for (i, row) in dataset.matrix.outer_iter().enumerate() {
        record.clear();
        record.push(dataset.row_ids[i].clone());
        record.push(dataset.labels[i].as_u8().to_string());
        record.extend(row.iter().map(|v| v.to_string()));
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn persist(dataset: &LabeledDataset, path: &Path) -> Result<()> {
    persist_with_comment(dataset, path, None)
}

pub fn persist_with_comment(dataset: &LabeledDataset, path: &Path, comment: Option<&str>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(dataset, file, comment)
}

pub fn load(path: &Path) -> Result<LabeledDataset> {
    read_csv(std::fs::File::open(path)?)
}

pub fn read_csv<R: Read>(input: R) -> Result<LabeledDataset> {
    // Comment lines are stripped here so reported line numbers match the file.
    let mut text = String::new();
    let mut line_map = Vec::new();
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        if line.starts_with('#') {
            continue;
        }
        text.push_str(&line);
        text.push('\n');
        line_map.push(i as u64 + 1);
    }
    let violation = |csv_line: u64, message: String| Error::FormatViolation {
        line: line_map
            .get(csv_line.saturating_sub(1) as usize)
            .copied()
            .unwrap_or(csv_line),
        message,
    };

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut records = reader.records();

    let header = match records.next() {
        Some(rec) => rec.map_err(|e| violation(1, e.to_string()))?,
        None => return Err(violation(1, "missing header".into())),
    };
    if header.len() < 2 || &header[0] != "row_id" || &header[1] != "label" {
        return Err(violation(1, "header must start with `row_id,label`".into()));
    }
    let column_names: Vec<String> = header.iter().skip(2).map(str::to_string).collect();
    let width = column_names.len();

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut row_ids = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            violation(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != width + 2 {
            return Err(violation(
                line,
                format!("expected {} fields, found {}", width + 2, rec.len()),
            ));
        }
        row_ids.push(rec[0].to_string());
        let label = rec[1]
            .parse::<u8>()
            .ok()
            .and_then(Label::from_u8)
            .ok_or_else(|| violation(line, format!("label must be 0 or 1, found `{}`", &rec[1])))?;
        labels.push(label);
        for field in rec.iter().skip(2) {
            let v: f64 = field
                .parse()
                .map_err(|_| violation(line, format!("`{field}` is not a number")))?;
            values.push(v);
        }
    }
    let matrix = Array2::from_shape_vec((row_ids.len(), width), values)
        .expect("row widths were checked");
    LabeledDataset::new(matrix, labels, column_names, row_ids)
}

/// Tokens per synthetic file.
pub const SYNTH_TOKENS_PER_FILE: usize = 500;

/// Parameters of [`synth_corpus`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthParams {
    pub n_minority: usize,
    pub n_majority: usize,
    pub n_opcodes: usize,
    pub separation: f64,
    pub seed: u64,
}

fn synth_column_names(n: usize) -> Vec<String> {
    let digits = (n.saturating_sub(1)).to_string().len().max(3);
    (0..n).map(|j| format!("op{j:0digits$}")).collect()
}

/// Class probability profiles `(minority, majority)` for the synthetic corpus.
///
/// The majority profile is `(1 - s) * p + s * q`, so its total-variation
/// distance to `p` is `s * TV(p, q)`. The last tenth of the columns carry
/// almost no mass in either profile, standing in for rarely used opcodes.
pub fn synth_profiles(n_opcodes: usize, separation: f64, rng: &mut seed::Rng) -> (Vec<f64>, Vec<f64>) {
    let rare = n_opcodes / 10;
    let active = n_opcodes - rare;
    let half = active / 2;
    let mut p = vec![0.0; n_opcodes];
    let mut q = vec![0.0; n_opcodes];
    for j in 0..n_opcodes {
        let u: f64 = rng.gen_range(0.2..1.0);
        if j < active {
            p[j] = u * if j < half { 4.0 } else { 1.0 };
            q[j] = u * if j < half { 1.0 } else { 4.0 };
        } else {
            p[j] = 1e-4 * u;
            q[j] = 1e-4 * u;
        }
    }
    let normalize = |v: &mut Vec<f64>| {
        let total: f64 = v.iter().sum();
        v.iter_mut().for_each(|x| *x /= total);
    };
    normalize(&mut p);
    normalize(&mut q);
    let majority = p
        .iter()
        .zip(&q)
        .map(|(a, b)| (1.0 - separation) * a + separation * b)
        .collect();
    (p, majority)
}

pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Generates a two-class opcode-count corpus. Minority rows are benign and
/// come first; each row is a multinomial draw of [`SYNTH_TOKENS_PER_FILE`] tokens.
pub fn synth_corpus(params: &SynthParams) -> Result<LabeledDataset> {
    let SynthParams {
        n_minority,
        n_majority,
        n_opcodes,
        separation,
        seed,
    } = *params;
    if n_minority == 0 || n_majority == 0 {
        return Err(Error::InvalidArgument("class sizes must be at least 1".into()));
    }
    if n_opcodes < 2 {
        return Err(Error::InvalidArgument("at least 2 opcodes are required".into()));
    }
    if !(0.0..=1.0).contains(&separation) {
        return Err(Error::InvalidArgument(format!(
            "separation {separation} outside [0, 1]"
        )));
    }

    let mut rng = seed::rng(seed);
    let (minority_profile, majority_profile) = synth_profiles(n_opcodes, separation, &mut rng);
    let draw = [
        WeightedIndex::new(&minority_profile).expect("profile weights are positive"),
        WeightedIndex::new(&majority_profile).expect("profile weights are positive"),
    ];

    let n_rows = n_minority + n_majority;
    let mut matrix = Array2::zeros((n_rows, n_opcodes));
    let mut labels = Vec::with_capacity(n_rows);
    let mut row_ids = Vec::with_capacity(n_rows);
    for i in 0..n_rows {
        let (class, label, k) = if i < n_minority {
            (0, Label::Benign, i)
        } else {
            (1, Label::Malware, i - n_minority)
        };
        for _ in 0..SYNTH_TOKENS_PER_FILE {
            matrix[[i, draw[class].sample(&mut rng)]] += 1.0;
        }
        labels.push(label);
        let mut id = String::new();
        let _ = write!(id, "{}-{k:05}", if class == 0 { "benign" } else { "malware" });
        row_ids.push(id);
    }
    LabeledDataset::new(matrix, labels, synth_column_names(n_opcodes), row_ids)
}
