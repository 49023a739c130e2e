use std::io::{Read, Write};

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::Result;
use crate::neural::{self, Activation, FeatureScaler, Loss, Network, NetworkSpec, TrainConfig, TrainingTrace};

pub const DNN_DROPOUT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DnnDepth {
    Dnn2l,
    Dnn4l,
    Dnn7l,
}

impl DnnDepth {
    pub fn hidden_widths(self) -> &'static [usize] {
        match self {
            DnnDepth::Dnn2l => &[1024, 32],
            DnnDepth::Dnn4l => &[1024, 256, 64, 16],
            DnnDepth::Dnn7l => &[1024, 512, 256, 128, 64, 32, 16],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DnnSpec {
    pub depth: DnnDepth,
    pub hidden_widths: Vec<usize>,
    pub dropout_rate: f64,
}

impl DnnSpec {
    pub fn new(depth: DnnDepth) -> Self {
        DnnSpec {
            depth,
            hidden_widths: depth.hidden_widths().to_vec(),
            dropout_rate: DNN_DROPOUT,
        }
    }

    /// ELU hidden layers, one sigmoid output unit, binary cross-entropy.
    pub fn network_spec(&self, input_width: usize) -> NetworkSpec {
        let mut widths = vec![input_width];
        widths.extend_from_slice(&self.hidden_widths);
        widths.push(1);
        NetworkSpec::feed_forward(&widths, Activation::Sigmoid, self.dropout_rate, Loss::BinaryCrossEntropy)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DnnClassifier {
    pub depth: DnnDepth,
    pub scaler: FeatureScaler,
    pub network: Network,
}

pub fn train_dnn(
    dataset: &LabeledDataset,
    spec: &DnnSpec,
    cfg: &TrainConfig,
) -> Result<(DnnClassifier, TrainingTrace)> {
    dataset.require_both_classes()?;
    let scaler = FeatureScaler::fit(dataset.matrix.view())?;
    let x = scaler.transform(dataset.matrix.view())?;
    let y = Array2::from_shape_vec((dataset.n_rows(), 1), dataset.label_vector())
        .expect("one label per row");
    let (network, trace) = neural::train(spec.network_spec(dataset.n_cols()), x.view(), y.view(), cfg)?;
    Ok((
        DnnClassifier {
            depth: spec.depth,
            scaler,
            network,
        },
        trace,
    ))
}

impl DnnClassifier {
    pub fn input_width(&self) -> usize {
        self.scaler.width()
    }

    pub fn predict_proba(&self, matrix: ArrayView2<f64>) -> Result<Vec<f64>> {
        let x = self.scaler.transform(matrix)?;
        let out = self.network.predict(x.view())?;
        Ok(out.column(0).iter().map(|p| p.clamp(0.0, 1.0)).collect())
    }

    pub fn write<W: Write>(&self, out: &mut W) -> Result<()> {
        self.scaler.write(out)?;
        self.network.write(out)
    }

    pub fn read<R: Read>(input: &mut R, depth: DnnDepth) -> Result<Self> {
        let scaler = FeatureScaler::read(input)?;
        let network = Network::read(input)?;
        Ok(DnnClassifier {
            depth,
            scaler,
            network,
        })
    }
}
