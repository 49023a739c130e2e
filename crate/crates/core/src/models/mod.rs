//! Classifiers: random forest and DNN-2L/4L/7L behind one probability-scoring surface.

pub mod dnn;
pub mod forest;
pub mod tree;

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

pub use dnn::{train_dnn, DnnClassifier, DnnDepth, DnnSpec};
pub use forest::{train_random_forest, RandomForest, RandomForestConfig};
pub use tree::{train_tree, DecisionTree, Node, TreeConfig};

use crate::codec;
use crate::dataset::{Label, LabeledDataset};
use crate::error::{Error, Result};
use crate::neural::{TrainConfig, TrainingTrace};

pub const CLASSIFIER_MAGIC: &str = "OPCLASS-CL1";
pub const DECISION_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Rf,
    Dnn2,
    Dnn4,
    Dnn7,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 4] = [
        ClassifierKind::Rf,
        ClassifierKind::Dnn2,
        ClassifierKind::Dnn4,
        ClassifierKind::Dnn7,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ClassifierKind::Rf => "RF",
            ClassifierKind::Dnn2 => "DNN-2L",
            ClassifierKind::Dnn4 => "DNN-4L",
            ClassifierKind::Dnn7 => "DNN-7L",
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            ClassifierKind::Rf => "rf",
            ClassifierKind::Dnn2 => "dnn2",
            ClassifierKind::Dnn4 => "dnn4",
            ClassifierKind::Dnn7 => "dnn7",
        }
    }

    pub fn dnn_depth(self) -> Option<DnnDepth> {
        match self {
            ClassifierKind::Rf => None,
            ClassifierKind::Dnn2 => Some(DnnDepth::Dnn2l),
            ClassifierKind::Dnn4 => Some(DnnDepth::Dnn4l),
            ClassifierKind::Dnn7 => Some(DnnDepth::Dnn7l),
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rf" => Ok(ClassifierKind::Rf),
            "dnn2" | "dnn-2l" | "dnn_2l" => Ok(ClassifierKind::Dnn2),
            "dnn4" | "dnn-4l" | "dnn_4l" => Ok(ClassifierKind::Dnn4),
            "dnn7" | "dnn-7l" | "dnn_7l" => Ok(ClassifierKind::Dnn7),
            other => Err(Error::InvalidArgument(format!("unknown classifier `{other}`"))),
        }
    }
}

/// How a classifier was trained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    /// JSON of the configuration used.
    pub config: String,
    /// Reducer the inputs went through, e.g. `vt` or `none`.
    pub reducer: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Forest(RandomForest),
    Dnn(DnnClassifier),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    pub kind: ClassifierKind,
    pub model: Model,
    pub meta: TrainingMeta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub proba: Vec<f64>,
    pub labels: Vec<Label>,
}

/// Hyperparameters for every classifier kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub forest: RandomForestConfig,
    pub dnn: TrainConfig,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            forest: RandomForestConfig::default(),
            dnn: TrainConfig::default(),
        }
    }
}

/// Trains `kind` with `seed` overriding the seeds in `cfg`.
pub fn train_classifier(
    kind: ClassifierKind,
    dataset: &LabeledDataset,
    cfg: &ClassifierConfig,
    seed: u64,
    reducer: &str,
) -> Result<(Classifier, Option<TrainingTrace>)> {
    let (model, trace, config) = match kind.dnn_depth() {
        None => {
            let forest_cfg = RandomForestConfig { seed, ..cfg.forest };
            let forest = train_random_forest(dataset, &forest_cfg)?;
            (Model::Forest(forest), None, serde_json::to_string(&forest_cfg))
        }
        Some(depth) => {
            let train_cfg = TrainConfig { seed, ..cfg.dnn };
            let (dnn, trace) = train_dnn(dataset, &DnnSpec::new(depth), &train_cfg)?;
            (Model::Dnn(dnn), Some(trace), serde_json::to_string(&train_cfg))
        }
    };
    let meta = TrainingMeta {
        seed,
        config: config.map_err(|e| Error::InvalidArgument(e.to_string()))?,
        reducer: reducer.to_string(),
    };
    Ok((Classifier { kind, model, meta }, trace))
}

impl Classifier {
    pub fn input_width(&self) -> usize {
        match &self.model {
            Model::Forest(f) => f.n_features,
            Model::Dnn(d) => d.input_width(),
        }
    }

    pub fn predict(&self, matrix: ArrayView2<f64>) -> Result<Prediction> {
        if matrix.ncols() != self.input_width() {
            return Err(Error::shape(
                format!("{} columns", self.input_width()),
                format!("{} columns", matrix.ncols()),
            ));
        }
        let proba = match &self.model {
            Model::Forest(f) => f.predict_proba(matrix),
            Model::Dnn(d) => d.predict_proba(matrix)?,
        };
        Ok(Prediction {
            labels: labels_from_proba(&proba),
            proba,
        })
    }

    pub fn write<W: Write>(&self, out: &mut W) -> Result<()> {
        codec::write_magic(out, CLASSIFIER_MAGIC)?;
        codec::write_str(out, self.kind.tag())?;
        codec::write_json(out, &self.meta)?;
        match &self.model {
            Model::Forest(f) => f.write(out),
            Model::Dnn(d) => d.write(out),
        }
    }

    pub fn read<R: Read>(input: &mut R) -> Result<Self> {
        codec::read_magic(input, CLASSIFIER_MAGIC)?;
        let kind: ClassifierKind = codec::read_str(input)?
            .parse()
            .map_err(|e: Error| Error::ModelFile(e.to_string()))?;
        let meta: TrainingMeta = codec::read_json(input)?;
        let model = match kind.dnn_depth() {
            None => Model::Forest(RandomForest::read(input)?),
            Some(depth) => Model::Dnn(DnnClassifier::read(input, depth)?),
        };
        Ok(Classifier { kind, model, meta })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write(&mut file)?;
        file.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(&mut std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

pub fn labels_from_proba(proba: &[f64]) -> Vec<Label> {
    proba
        .iter()
        .map(|&p| if p >= DECISION_THRESHOLD { Label::Malware } else { Label::Benign })
        .collect()
}
