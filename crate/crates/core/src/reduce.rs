//! Feature reduction: identity, variance threshold, and the bottleneck of a
//! one- or three-encoder-layer autoencoder.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::codec;
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::neural::{self, Activation, FeatureScaler, Loss, Network, NetworkSpec, TrainConfig, TrainingTrace};

pub const REDUCER_MAGIC: &str = "OPCLASS-RD1";
pub const BOTTLENECK_WIDTH: usize = 32;
pub const DEFAULT_VARIANCE_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReducerKind {
    None,
    #[serde(alias = "vt")]
    VarianceThreshold,
    #[serde(alias = "ae1")]
    Ae1l,
    #[serde(alias = "ae3")]
    Ae3l,
}

impl ReducerKind {
    pub const ALL: [ReducerKind; 4] = [
        ReducerKind::None,
        ReducerKind::VarianceThreshold,
        ReducerKind::Ae1l,
        ReducerKind::Ae3l,
    ];

    /// Short name used in reports and file names.
    pub fn label(self) -> &'static str {
        match self {
            ReducerKind::None => "None",
            ReducerKind::VarianceThreshold => "VT",
            ReducerKind::Ae1l => "AE-1L",
            ReducerKind::Ae3l => "AE-3L",
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            ReducerKind::None => "none",
            ReducerKind::VarianceThreshold => "vt",
            ReducerKind::Ae1l => "ae1",
            ReducerKind::Ae3l => "ae3",
        }
    }

    /// Hidden widths between input and output, encoder and decoder.
    pub fn autoencoder_hidden(self) -> Option<&'static [usize]> {
        match self {
            ReducerKind::Ae1l => Some(&[BOTTLENECK_WIDTH]),
            ReducerKind::Ae3l => Some(&[128, 64, BOTTLENECK_WIDTH, 64, 128]),
            _ => None,
        }
    }
}

impl fmt::Display for ReducerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for ReducerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(ReducerKind::None),
            "vt" | "variance_threshold" => Ok(ReducerKind::VarianceThreshold),
            "ae1" | "ae-1l" | "ae_1l" => Ok(ReducerKind::Ae1l),
            "ae3" | "ae-3l" | "ae_3l" => Ok(ReducerKind::Ae3l),
            other => Err(Error::InvalidArgument(format!("unknown reducer `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducerSpec {
    pub kind: ReducerKind,
    pub threshold: f64,
    /// Autoencoder training regimen; ignored by the other kinds.
    pub train: TrainConfig,
}

impl ReducerSpec {
    pub fn new(kind: ReducerKind) -> Self {
        ReducerSpec {
            kind,
            threshold: DEFAULT_VARIANCE_THRESHOLD,
            train: TrainConfig::default(),
        }
    }
}

/// Autoencoder architecture for `input_width` features: ELU everywhere, linear output.
pub fn autoencoder_spec(kind: ReducerKind, input_width: usize) -> Result<NetworkSpec> {
    let hidden = kind
        .autoencoder_hidden()
        .ok_or_else(|| Error::InvalidArgument(format!("{kind} is not an autoencoder")))?;
    let mut widths = vec![input_width];
    widths.extend_from_slice(hidden);
    widths.push(input_width);
    Ok(NetworkSpec::feed_forward(&widths, Activation::Linear, 0.0, Loss::Mse))
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReducerModel {
    None {
        width: usize,
    },
    VarianceThreshold {
        input_width: usize,
        threshold: f64,
        retained: Vec<usize>,
    },
    Autoencoder {
        kind: ReducerKind,
        scaler: FeatureScaler,
        /// Input-to-bottleneck half of the trained autoencoder.
        encoder: Network,
    },
}

#[derive(Debug, Clone)]
pub struct ReducerFit {
    pub model: ReducerModel,
    pub trace: Option<TrainingTrace>,
}

/// Population variance (divide by N) of each column.
pub fn column_variances(matrix: ArrayView2<f64>) -> Vec<f64> {
    let n = matrix.nrows() as f64;
    matrix
        .axis_iter(Axis(1))
        .map(|col| {
            let mean = col.sum() / n;
            col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
        })
        .collect()
}

pub fn fit(spec: &ReducerSpec, train: ArrayView2<f64>) -> Result<ReducerFit> {
    if train.nrows() == 0 || train.ncols() == 0 {
        return Err(Error::InsufficientRows {
            needed: 1,
            available: 0,
        });
    }
    let width = train.ncols();
    match spec.kind {
        ReducerKind::None => Ok(ReducerFit {
            model: ReducerModel::None { width },
            trace: None,
        }),
        ReducerKind::VarianceThreshold => {
            if !(spec.threshold >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "variance threshold {} must be non-negative",
                    spec.threshold
                )));
            }
            let retained: Vec<usize> = column_variances(train)
                .iter()
                .enumerate()
                .filter(|(_, &v)| v >= spec.threshold)
                .map(|(j, _)| j)
                .collect();
            if retained.is_empty() {
                return Err(Error::EmptyFeatureSet {
                    threshold: spec.threshold,
                });
            }
            Ok(ReducerFit {
                model: ReducerModel::VarianceThreshold {
                    input_width: width,
                    threshold: spec.threshold,
                    retained,
                },
                trace: None,
            })
        }
        kind @ (ReducerKind::Ae1l | ReducerKind::Ae3l) => {
            let scaler = FeatureScaler::fit(train)?;
            let x = scaler.transform(train)?;
            let net_spec = autoencoder_spec(kind, width)?;
            let (network, trace) = neural::train(net_spec, x.view(), x.view(), &spec.train)?;
            let encoder = encoder_half(&network, kind)?;
            Ok(ReducerFit {
                model: ReducerModel::Autoencoder {
                    kind,
                    scaler,
                    encoder,
                },
                trace: Some(trace),
            })
        }
    }
}

fn encoder_half(network: &Network, kind: ReducerKind) -> Result<Network> {
    let depth = match kind {
        ReducerKind::Ae1l => 1,
        _ => 3,
    };
    let spec = NetworkSpec {
        layer_widths: network.spec.layer_widths[..=depth].to_vec(),
        activations: vec![Activation::Elu; depth],
        dropout_rate: 0.0,
        loss: Loss::Mse,
    };
    Network::from_layers(spec, network.layers[..depth].to_vec())
}

impl ReducerModel {
    pub fn kind(&self) -> ReducerKind {
        match self {
            ReducerModel::None { .. } => ReducerKind::None,
            ReducerModel::VarianceThreshold { .. } => ReducerKind::VarianceThreshold,
            ReducerModel::Autoencoder { kind, .. } => *kind,
        }
    }

    pub fn input_width(&self) -> usize {
        match self {
            ReducerModel::None { width } => *width,
            ReducerModel::VarianceThreshold { input_width, .. } => *input_width,
            ReducerModel::Autoencoder { encoder, .. } => encoder.spec.input_width(),
        }
    }

    pub fn output_width(&self) -> usize {
        match self {
            ReducerModel::None { width } => *width,
            ReducerModel::VarianceThreshold { retained, .. } => retained.len(),
            ReducerModel::Autoencoder { encoder, .. } => encoder.spec.output_width(),
        }
    }

    pub fn apply(&self, matrix: ArrayView2<f64>) -> Result<Array2<f64>> {
        if matrix.ncols() != self.input_width() {
            return Err(Error::shape(
                format!("{} columns", self.input_width()),
                format!("{} columns", matrix.ncols()),
            ));
        }
        match self {
            ReducerModel::None { .. } => Ok(matrix.to_owned()),
            ReducerModel::VarianceThreshold { retained, .. } => Ok(matrix.select(Axis(1), retained)),
            ReducerModel::Autoencoder { scaler, encoder, .. } => {
                let x = scaler.transform(matrix)?;
                encoder.predict(x.view())
            }
        }
    }

    pub fn output_names(&self, input_names: &[String]) -> Vec<String> {
        match self {
            ReducerModel::None { .. } => input_names.to_vec(),
            ReducerModel::VarianceThreshold { retained, .. } => {
                retained.iter().map(|&j| input_names[j].clone()).collect()
            }
            ReducerModel::Autoencoder { .. } => (0..self.output_width()).map(|j| format!("ae{j:02}")).collect(),
        }
    }

    pub fn apply_dataset(&self, dataset: &LabeledDataset) -> Result<LabeledDataset> {
        let matrix = self.apply(dataset.matrix.view())?;
        dataset.with_features(matrix, self.output_names(&dataset.column_names))
    }

    pub fn write<W: Write>(&self, out: &mut W) -> Result<()> {
        codec::write_magic(out, REDUCER_MAGIC)?;
        codec::write_str(out, self.kind().tag())?;
        match self {
            ReducerModel::None { width } => codec::write_u64(out, *width as u64),
            ReducerModel::VarianceThreshold {
                input_width,
                threshold,
                retained,
            } => {
                codec::write_u64(out, *input_width as u64)?;
                codec::write_f64s(out, &[*threshold])?;
                codec::write_usizes(out, retained)
            }
            ReducerModel::Autoencoder { scaler, encoder, .. } => {
                scaler.write(out)?;
                encoder.write(out)
            }
        }
    }

    pub fn read<R: Read>(input: &mut R) -> Result<Self> {
        codec::read_magic(input, REDUCER_MAGIC)?;
        let kind: ReducerKind = codec::read_str(input)?
            .parse()
            .map_err(|e: Error| Error::ModelFile(e.to_string()))?;
        let model = match kind {
            ReducerKind::None => ReducerModel::None {
                width: codec::read_len(input)?,
            },
            ReducerKind::VarianceThreshold => {
                let input_width = codec::read_len(input)?;
                let threshold = codec::read_f64s(input)?
                    .first()
                    .copied()
                    .ok_or_else(|| Error::ModelFile("missing threshold".into()))?;
                let retained = codec::read_usizes(input)?;
                if retained.iter().any(|&j| j >= input_width) {
                    return Err(Error::ModelFile("retained column out of range".into()));
                }
                ReducerModel::VarianceThreshold {
                    input_width,
                    threshold,
                    retained,
                }
            }
            ReducerKind::Ae1l | ReducerKind::Ae3l => {
                let scaler = FeatureScaler::read(input)?;
                let encoder = Network::read(input)?;
                if scaler.width() != encoder.spec.input_width() {
                    return Err(Error::ModelFile("scaler and encoder widths differ".into()));
                }
                ReducerModel::Autoencoder {
                    kind,
                    scaler,
                    encoder,
                }
            }
        };
        Ok(model)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write(&mut file)?;
        file.flush()?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::read(&mut std::io::BufReader::new(std::fs::File::open(path)?))
    }
}
