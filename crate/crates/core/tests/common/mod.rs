//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use std::cmp::Ordering;

/// Exhaustive k-NN: sort every other row by (squared distance, index).
pub fn knn_oracle(rows: &[Vec<f64>], query: &[f64], k: usize, exclude: Option<usize>) -> Vec<usize> {
    let mut all: Vec<(f64, usize)> = rows
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != exclude)
        .map(|(i, r)| {
            let d: f64 = r.iter().zip(query).map(|(a, b)| (a - b).powi(2)).sum();
            (d, i)
        })
        .collect();
    all.sort_by(|a, b| match a.0.partial_cmp(&b.0).unwrap() {
        Ordering::Equal => a.1.cmp(&b.1),
        o => o,
    });
    all.into_iter().take(k).map(|(_, i)| i).collect()
}

/// Welford running variance, divided by N.
pub fn population_variance(values: &[f64]) -> f64 {
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (n, &x) in values.iter().enumerate() {
        let delta = x - mean;
        mean += delta / (n + 1) as f64;
        m2 += delta * (x - mean);
    }
    m2 / values.len() as f64
}

/// Columns whose population variance is at least `threshold`.
pub fn variance_filter(columns: &[Vec<f64>], threshold: f64) -> Vec<usize> {
    columns
        .iter()
        .enumerate()
        .filter(|(_, c)| population_variance(c) >= threshold)
        .map(|(j, _)| j)
        .collect()
}

/// Straight-line dense forward pass. Weights are `[in][out]`.
pub fn forward_oracle(
    input: &[f64],
    layers: &[(Vec<Vec<f64>>, Vec<f64>)],
    hidden: fn(f64) -> f64,
    output: fn(f64) -> f64,
) -> Vec<f64> {
    let mut x = input.to_vec();
    for (l, (w, b)) in layers.iter().enumerate() {
        let act = if l + 1 == layers.len() { output } else { hidden };
        x = (0..b.len())
            .map(|o| act(b[o] + (0..x.len()).map(|i| x[i] * w[i][o]).sum::<f64>()))
            .collect();
    }
    x
}

pub fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp() - 1.0
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn identity(x: f64) -> f64 {
    x
}

/// Closed-form metrics: (accuracy, tpr, tnr, ppv), `None` when the denominator is zero.
pub fn metric_oracle(tp: u64, fn_: u64, tn: u64, fp: u64) -> [Option<f64>; 4] {
    let div = |a: u64, b: u64| if b == 0 { None } else { Some(a as f64 / b as f64) };
    [
        div(tp + tn, tp + tn + fp + fn_),
        div(tp, tp + fn_),
        div(tn, tn + fp),
        div(tp, tp + fp),
    ]
}

/// Nearest-centroid classifier: predicts the class whose training mean is closest.
/// Returns the number of correct test predictions.
pub fn nearest_centroid_correct(
    train: &[(Vec<f64>, u8)],
    test: &[(Vec<f64>, u8)],
) -> usize {
    let width = train[0].0.len();
    let mut sums = [vec![0.0; width], vec![0.0; width]];
    let mut counts = [0usize; 2];
    for (x, y) in train {
        counts[*y as usize] += 1;
        for (s, v) in sums[*y as usize].iter_mut().zip(x) {
            *s += v;
        }
    }
    let centroids: Vec<Vec<f64>> = (0..2)
        .map(|c| sums[c].iter().map(|s| s / counts[c] as f64).collect())
        .collect();
    let dist = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum() };
    test.iter()
        .filter(|(x, y)| {
            let predicted = if dist(x, &centroids[1]) < dist(x, &centroids[0]) { 1 } else { 0 };
            predicted == *y
        })
        .count()
}

/// Minimal CSV reader for report files: skips `#` lines, returns header and rows.
pub fn read_report_csv(path: &std::path::Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}
