use std::ops::Add;

use crate::dataset::Label;
use crate::error::{Error, Result};

/// Binary confusion counts with malware as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fn_: u64,
    pub tn: u64,
    pub fp: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fn_ + self.tn + self.fp
    }

    pub fn metrics(&self) -> Metrics {
        Metrics::from_confusion(self)
    }
}

impl Add for ConfusionMatrix {
    type Output = ConfusionMatrix;

    fn add(self, rhs: ConfusionMatrix) -> ConfusionMatrix {
        ConfusionMatrix {
            tp: self.tp + rhs.tp,
            fn_: self.fn_ + rhs.fn_,
            tn: self.tn + rhs.tn,
            fp: self.fp + rhs.fp,
        }
    }
}

pub fn confusion(truth: &[Label], predicted: &[Label]) -> Result<ConfusionMatrix> {
    if truth.len() != predicted.len() {
        return Err(Error::LengthMismatch {
            left: truth.len(),
            right: predicted.len(),
        });
    }
    let mut cm = ConfusionMatrix::default();
    for (t, p) in truth.iter().zip(predicted) {
        match (t, p) {
            (Label::Malware, Label::Malware) => cm.tp += 1,
            (Label::Malware, Label::Benign) => cm.fn_ += 1,
            (Label::Benign, Label::Benign) => cm.tn += 1,
            (Label::Benign, Label::Malware) => cm.fp += 1,
        }
    }
    Ok(cm)
}

/// Which metrics had a zero denominator (and were reported as 0).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Undefined {
    pub accuracy: bool,
    pub tpr: bool,
    pub tnr: bool,
    pub ppv: bool,
}

impl Undefined {
    pub fn any(&self) -> bool {
        self.accuracy || self.tpr || self.tnr || self.ppv
    }

    /// `;`-joined names of the undefined metrics, empty when all are defined.
    pub fn describe(&self) -> String {
        [
            (self.accuracy, "accuracy"),
            (self.tpr, "tpr"),
            (self.tnr, "tnr"),
            (self.ppv, "ppv"),
        ]
        .iter()
        .filter(|(flag, _)| *flag)
        .map(|(_, name)| *name)
        .collect::<Vec<_>>()
        .join(";")
    }
}

/// Accuracy, recall (TPR), selectivity (TNR) and precision (PPV) as fractions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    pub tpr: f64,
    pub tnr: f64,
    pub ppv: f64,
    pub undefined: Undefined,
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

impl Metrics {
    pub fn from_confusion(cm: &ConfusionMatrix) -> Metrics {
        let (accuracy, ua) = ratio(cm.tp + cm.tn, cm.total());
        let (tpr, ut) = ratio(cm.tp, cm.tp + cm.fn_);
        let (tnr, un) = ratio(cm.tn, cm.tn + cm.fp);
        let (ppv, up) = ratio(cm.tp, cm.tp + cm.fp);
        Metrics {
            accuracy,
            tpr,
            tnr,
            ppv,
            undefined: Undefined {
                accuracy: ua,
                tpr: ut,
                tnr: un,
                ppv: up,
            },
        }
    }
}
