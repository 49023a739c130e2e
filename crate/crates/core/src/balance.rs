//! ADASYN oversampling of the minority class.
//!
//! Each minority row `x_i` receives a share of the `G = (m_l - m_s) * beta`
//! synthetic rows proportional to the fraction of majority rows among its
//! `k` nearest neighbours in the whole dataset. A synthetic row is
//! `x_i + lambda * (x_z - x_i)` where `x_z` is a minority neighbour of `x_i`
//! and `lambda ~ U[0, 1]`.

use std::collections::HashSet;
use std::io::Write;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dataset::{Label, LabeledDataset};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdasynConfig {
    pub k: usize,
    pub beta: f64,
    pub seed: u64,
}

impl Default for AdasynConfig {
    fn default() -> Self {
        AdasynConfig {
            k: 5,
            beta: 1.0,
            seed: 0,
        }
    }
}

impl AdasynConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidArgument("ADASYN k must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::InvalidArgument(format!(
                "ADASYN beta {} outside [0, 1]",
                self.beta
            )));
        }
        Ok(())
    }
}

fn squared_distance(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Indices of the `k` rows closest to `query` in Euclidean distance, nearest
/// first, ties going to the lower row index. `exclude` removes the query's
/// own row when it is a member of `rows`.
pub fn knn(
    query: ArrayView1<f64>,
    rows: ArrayView2<f64>,
    k: usize,
    exclude: Option<usize>,
) -> Result<Vec<usize>> {
    let available = rows.nrows() - usize::from(exclude.is_some_and(|e| e < rows.nrows()));
    if k > available {
        return Err(Error::InsufficientRows {
            needed: k,
            available,
        });
    }
    if query.len() != rows.ncols() {
        return Err(Error::shape(rows.ncols(), query.len()));
    }
    let mut candidates: Vec<(f64, usize)> = rows
        .outer_iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != exclude)
        .map(|(i, row)| (squared_distance(query, row), i))
        .collect();
    let by_distance_then_index = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < candidates.len() {
        candidates.select_nth_unstable_by(k, by_distance_then_index);
        candidates.truncate(k);
    }
    candidates.sort_by(by_distance_then_index);
    Ok(candidates.into_iter().map(|(_, i)| i).collect())
}

/// Provenance of one synthetic row. Parents are indices into the input dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticParent {
    pub row_id: String,
    pub parent_a: usize,
    pub parent_b: usize,
    pub lambda: f64,
}

#[derive(Debug, Clone)]
pub struct AdasynOutcome {
    pub dataset: LabeledDataset,
    pub parents: Vec<SyntheticParent>,
    /// Per-minority-row normalized density ratios, in minority row order.
    pub density: Vec<f64>,
    /// Requested synthetic count before rounding.
    pub target: f64,
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

fn fresh_prefix(existing: &[String]) -> String {
    let mut prefix = "syn".to_string();
    while existing.iter().any(|id| id.starts_with(&prefix)) {
        prefix.insert(0, '_');
    }
    prefix
}

pub fn adasyn(dataset: &LabeledDataset, cfg: &AdasynConfig) -> Result<AdasynOutcome> {
    cfg.validate()?;
    let (benign, malware) = dataset.class_counts();
    if benign == 0 || malware == 0 {
        return Err(Error::SingleClass);
    }
    if benign == malware {
        return Ok(AdasynOutcome {
            dataset: dataset.clone(),
            parents: Vec::new(),
            density: Vec::new(),
            target: 0.0,
        });
    }
    let (minority_label, n_small, n_large) = if benign < malware {
        (Label::Benign, benign, malware)
    } else {
        (Label::Malware, malware, benign)
    };
    let target = (n_large - n_small) as f64 * cfg.beta;
    let minority: Vec<usize> = (0..dataset.n_rows())
        .filter(|&i| dataset.labels[i] == minority_label)
        .collect();

    let rows = dataset.matrix.view();
    let mut ratios = Vec::with_capacity(n_small);
    let mut minority_neighbors = Vec::with_capacity(n_small);
    for &i in &minority {
        let neighbors = knn(rows.row(i), rows, cfg.k, Some(i))?;
        let (same, other): (Vec<usize>, Vec<usize>) = neighbors
            .into_iter()
            .partition(|&j| dataset.labels[j] == minority_label);
        ratios.push(other.len() as f64 / cfg.k as f64);
        minority_neighbors.push(same);
    }
    let total: f64 = ratios.iter().sum();
    let density: Vec<f64> = if total > 0.0 {
        ratios.iter().map(|r| r / total).collect()
    } else {
        vec![1.0 / n_small as f64; n_small]
    };

    let mut rng = seed::rng(cfg.seed);
    let prefix = fresh_prefix(&dataset.row_ids);
    let mut parents = Vec::new();
    let mut synthetic_rows: Vec<f64> = Vec::new();
    for (m, &i) in minority.iter().enumerate() {
        let count = round_half_up(density[m] * target);
        let candidates = &minority_neighbors[m];
        for _ in 0..count {
            let partner = if candidates.is_empty() {
                i
            } else {
                candidates[rng.gen_range(0..candidates.len())]
            };
            let lambda: f64 = rng.gen();
            let base = rows.row(i);
            let other = rows.row(partner);
            synthetic_rows.extend(base.iter().zip(other.iter()).map(|(a, b)| a + lambda * (b - a)));
            parents.push(SyntheticParent {
                row_id: format!("{prefix}{:06}", parents.len()),
                parent_a: i,
                parent_b: partner,
                lambda,
            });
        }
    }

    let n_new = parents.len();
    let synthetic = Array2::from_shape_vec((n_new, dataset.n_cols()), synthetic_rows)
        .expect("synthetic rows have dataset width");
    let matrix = ndarray::concatenate(Axis(0), &[rows, synthetic.view()])
        .expect("widths agree");
    let mut labels = dataset.labels.clone();
    labels.extend(std::iter::repeat_n(minority_label, n_new));
    let mut row_ids = dataset.row_ids.clone();
    row_ids.extend(parents.iter().map(|p| p.row_id.clone()));

    Ok(AdasynOutcome {
        dataset: LabeledDataset::new(matrix, labels, dataset.column_names.clone(), row_ids)?,
        parents,
        density,
        target,
    })
}

/// Audit CSV: `synthetic_row_id,parent_a,parent_b,lambda` with parents as row ids.
pub fn write_audit<W: Write>(
    outcome: &AdasynOutcome,
    source: &LabeledDataset,
    out: W,
) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["synthetic_row_id", "parent_a", "parent_b", "lambda"])?;
    for p in &outcome.parents {
        writer.write_record([
            p.row_id.as_str(),
            source.row_ids[p.parent_a].as_str(),
            source.row_ids[p.parent_b].as_str(),
            &p.lambda.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Row ids of the synthetic rows only.
pub fn synthetic_ids(outcome: &AdasynOutcome) -> HashSet<&str> {
    outcome.parents.iter().map(|p| p.row_id.as_str()).collect()
}
