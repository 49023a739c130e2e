//! CART-style binary decision tree with Gini impurity.

use std::io::{Read, Write};

use ndarray::{ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::codec;
use crate::dataset::Label;
use crate::error::{Error, Result};
use crate::seed::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    /// `None` grows until leaves are pure.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    /// Candidate columns per split; `None` means `ceil(sqrt(p))`.
    pub features_per_split: Option<usize>,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            max_depth: None,
            min_samples_split: 2,
            features_per_split: None,
        }
    }
}

impl TreeConfig {
    pub fn features_for(&self, n_features: usize) -> usize {
        self.features_per_split
            .unwrap_or_else(|| (n_features as f64).sqrt().ceil() as usize)
            .clamp(1, n_features.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    /// Fraction of malware among the training samples that reached the leaf.
    Leaf { proba: f64 },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    pub n_features: usize,
    /// Node 0 is the root.
    pub nodes: Vec<Node>,
}

struct Builder<'a> {
    rows: ArrayView2<'a, f64>,
    labels: &'a [Label],
    cfg: TreeConfig,
    n_candidates: usize,
    nodes: Vec<Node>,
}

#[derive(Clone, Copy)]
struct Candidate {
    score: f64,
    feature: usize,
    threshold: f64,
}

impl Candidate {
    fn beats(&self, other: &Candidate) -> bool {
        use std::cmp::Ordering;
        match self.score.total_cmp(&other.score) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => {
                self.feature < other.feature
                    || (self.feature == other.feature && self.threshold < other.threshold)
            }
        }
    }
}

/// Sum over children of `(c0^2 + c1^2) / n_child`. Maximizing it maximizes
/// the Gini decrease, since the parent impurity is fixed.
fn purity_score(l0: usize, l1: usize, r0: usize, r1: usize) -> f64 {
    let side = |a: usize, b: usize| ((a * a + b * b) as f64) / ((a + b) as f64);
    side(l0, l1) + side(r0, r1)
}

impl Builder<'_> {
    fn best_split_on(&self, feature: usize, samples: &[usize], n1_total: usize) -> Option<Candidate> {
        let mut pairs: Vec<(f64, bool)> = samples
            .iter()
            .map(|&i| (self.rows[[i, feature]], self.labels[i] == Label::Malware))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        if pairs.first()?.0 == pairs.last()?.0 {
            return None;
        }
        let n = pairs.len();
        let n0_total = n - n1_total;
        let mut left1 = 0;
        let mut best: Option<Candidate> = None;
        for i in 0..n - 1 {
            left1 += usize::from(pairs[i].1);
            let (lo, hi) = (pairs[i].0, pairs[i + 1].0);
            if lo == hi {
                continue;
            }
            let left = i + 1;
            let left0 = left - left1;
            let score = purity_score(left0, left1, n0_total - left0, n1_total - left1);
            let mut threshold = lo + (hi - lo) / 2.0;
            if threshold >= hi {
                threshold = lo;
            }
            let cand = Candidate {
                score,
                feature,
                threshold,
            };
            if best.as_ref().is_none_or(|b| cand.beats(b)) {
                best = Some(cand);
            }
        }
        best
    }

    fn grow(&mut self, samples: Vec<usize>, depth: usize, rng: &mut Rng) -> usize {
        let n = samples.len();
        let n1 = samples.iter().filter(|&&i| self.labels[i] == Label::Malware).count();
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            proba: n1 as f64 / n as f64,
        });
        let pure = n1 == 0 || n1 == n;
        let depth_reached = self.cfg.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_reached || n < self.cfg.min_samples_split.max(2) {
            return id;
        }

        let mut features: Vec<usize> = (0..self.rows.ncols()).collect();
        features.shuffle(rng);
        let mut best: Option<Candidate> = None;
        let mut evaluated = 0;
        for &f in &features {
            if evaluated == self.n_candidates {
                break;
            }
            if let Some(cand) = self.best_split_on(f, &samples, n1) {
                evaluated += 1;
                if best.as_ref().is_none_or(|b| cand.beats(b)) {
                    best = Some(cand);
                }
            }
        }
        let Some(split) = best else {
            return id;
        };

        let (left, right): (Vec<usize>, Vec<usize>) = samples
            .into_iter()
            .partition(|&i| self.rows[[i, split.feature]] <= split.threshold);
        let left_id = self.grow(left, depth + 1, rng);
        let right_id = self.grow(right, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: left_id,
            right: right_id,
        };
        id
    }
}

/// Grows a tree on the rows named by `samples` (repeats allowed, as in a bootstrap draw).
pub fn train_tree(
    rows: ArrayView2<f64>,
    labels: &[Label],
    samples: &[usize],
    cfg: &TreeConfig,
    rng: &mut Rng,
) -> Result<DecisionTree> {
    if samples.is_empty() {
        return Err(Error::InsufficientRows {
            needed: 1,
            available: 0,
        });
    }
    if rows.nrows() != labels.len() {
        return Err(Error::LengthMismatch {
            left: rows.nrows(),
            right: labels.len(),
        });
    }
    let mut builder = Builder {
        rows,
        labels,
        cfg: *cfg,
        n_candidates: cfg.features_for(rows.ncols()),
        nodes: Vec::new(),
    };
    builder.grow(samples.to_vec(), 0, rng);
    Ok(DecisionTree {
        n_features: rows.ncols(),
        nodes: builder.nodes,
    })
}

impl DecisionTree {
    pub fn predict_row(&self, row: ArrayView1<f64>) -> f64 {
        let mut id = 0;
        loop {
            match self.nodes[id] {
                Node::Leaf { proba } => return proba,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => id = if row[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], id: usize) -> usize {
            match nodes[id] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn write<W: Write>(&self, out: &mut W) -> Result<()> {
        codec::write_u64(out, self.n_features as u64)?;
        codec::write_u64(out, self.nodes.len() as u64)?;
        for node in &self.nodes {
            match *node {
                Node::Leaf { proba } => {
                    codec::write_u64(out, 0)?;
                    codec::write_f64s(out, &[proba])?;
                }
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    codec::write_u64(out, 1)?;
                    codec::write_f64s(out, &[threshold])?;
                    codec::write_usizes(out, &[feature, left, right])?;
                }
            }
        }
        Ok(())
    }

    pub fn read<R: Read>(input: &mut R) -> Result<Self> {
        let n_features = codec::read_len(input)?;
        let n_nodes = codec::read_len(input)?;
        let mut nodes = Vec::with_capacity(n_nodes.min(1 << 20));
        let bad = |m: &str| Error::ModelFile(format!("tree: {m}"));
        for _ in 0..n_nodes {
            let tag = codec::read_u64(input)?;
            let value = *codec::read_f64s(input)?.first().ok_or_else(|| bad("missing value"))?;
            match tag {
                0 => nodes.push(Node::Leaf { proba: value }),
                1 => {
                    let idx = codec::read_usizes(input)?;
                    let [feature, left, right] = idx[..] else {
                        return Err(bad("split record"));
                    };
                    if feature >= n_features || left >= n_nodes || right >= n_nodes {
                        return Err(bad("index out of range"));
                    }
                    nodes.push(Node::Split {
                        feature,
                        threshold: value,
                        left,
                        right,
                    });
                }
                _ => return Err(bad("unknown node tag")),
            }
        }
        if nodes.is_empty() {
            return Err(bad("no nodes"));
        }
        Ok(DecisionTree { n_features, nodes })
    }
}
