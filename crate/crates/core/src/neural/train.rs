use std::io::Write;

use ndarray::{ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{AdamConfig, AdamState, Mode, Network, NetworkSpec};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Validation {
    /// Hold out the last fraction of the shuffled rows. When that rounds to
    /// zero rows the training split doubles as the validation split.
    Fraction(f64),
}

impl Default for Validation {
    fn default() -> Self {
        Validation::Fraction(0.1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub adam: AdamConfig,
    pub validation: Validation,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 64,
            epochs: 120,
            adam: AdamConfig::default(),
            validation: Validation::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be at least 1".into()));
        }
        let Validation::Fraction(f) = self.validation;
        if !(0.0..1.0).contains(&f) {
            return Err(Error::InvalidArgument(format!(
                "validation fraction {f} outside [0, 1)"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

/// Per-epoch training and validation loss, both measured with dropout off.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingTrace {
    pub epochs: Vec<EpochLoss>,
}

impl TrainingTrace {
    pub fn first(&self) -> Option<&EpochLoss> {
        self.epochs.first()
    }

    pub fn last(&self) -> Option<&EpochLoss> {
        self.epochs.last()
    }

    /// CSV `epoch,train_loss,val_loss`, optionally preceded by `# ` comment lines.
    pub fn write_csv<W: Write>(&self, out: &mut W, comment: Option<&str>) -> Result<()> {
        if let Some(comment) = comment {
            for line in comment.lines() {
                writeln!(out, "# {line}")?;
            }
        }
        writeln!(out, "epoch,train_loss,val_loss")?;
        for e in &self.epochs {
            writeln!(out, "{},{},{}", e.epoch, e.train_loss, e.val_loss)?;
        }
        Ok(())
    }
}

/// Initializes a network from `cfg.seed`, splits off validation rows and trains.
pub fn train(
    spec: NetworkSpec,
    inputs: ArrayView2<f64>,
    targets: ArrayView2<f64>,
    cfg: &TrainConfig,
) -> Result<(Network, TrainingTrace)> {
    cfg.validate()?;
    if inputs.nrows() != targets.nrows() {
        return Err(Error::LengthMismatch {
            left: inputs.nrows(),
            right: targets.nrows(),
        });
    }
    if inputs.nrows() == 0 {
        return Err(Error::InsufficientRows {
            needed: 1,
            available: 0,
        });
    }
    let mut rng = seed::rng(cfg.seed);
    let network = Network::init(spec, &mut rng)?;

    let n = inputs.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let Validation::Fraction(fraction) = cfg.validation;
    let n_val = ((n as f64 * fraction).floor() as usize).min(n - 1);
    let (train_idx, val_idx) = order.split_at(n - n_val);
    let train_x = inputs.select(Axis(0), train_idx);
    let train_y = targets.select(Axis(0), train_idx);
    if val_idx.is_empty() {
        train_loop(network, train_x.view(), train_y.view(), None, cfg, &mut rng)
    } else {
        let val_x = inputs.select(Axis(0), val_idx);
        let val_y = targets.select(Axis(0), val_idx);
        train_loop(
            network,
            train_x.view(),
            train_y.view(),
            Some((val_x.view(), val_y.view())),
            cfg,
            &mut rng,
        )
    }
}

/// Trains an existing network on explicit train and validation splits.
pub fn train_network(
    network: Network,
    train_x: ArrayView2<f64>,
    train_y: ArrayView2<f64>,
    validation: Option<(ArrayView2<f64>, ArrayView2<f64>)>,
    cfg: &TrainConfig,
) -> Result<(Network, TrainingTrace)> {
    cfg.validate()?;
    let mut rng = seed::rng(cfg.seed);
    train_loop(network, train_x, train_y, validation, cfg, &mut rng)
}

fn train_loop(
    mut network: Network,
    train_x: ArrayView2<f64>,
    train_y: ArrayView2<f64>,
    validation: Option<(ArrayView2<f64>, ArrayView2<f64>)>,
    cfg: &TrainConfig,
    rng: &mut seed::Rng,
) -> Result<(Network, TrainingTrace)> {
    if train_x.nrows() != train_y.nrows() {
        return Err(Error::LengthMismatch {
            left: train_x.nrows(),
            right: train_y.nrows(),
        });
    }
    let (val_x, val_y) = validation.unwrap_or((train_x, train_y));
    let mut states: Vec<(AdamState, AdamState)> = network
        .layers
        .iter()
        .map(|l| (AdamState::new(l.weights.len()), AdamState::new(l.bias.len())))
        .collect();
    let mut order: Vec<usize> = (0..train_x.nrows()).collect();
    let mut step = 0u64;
    let mut trace = TrainingTrace::default();

    for epoch in 1..=cfg.epochs {
        order.shuffle(rng);
        for batch in order.chunks(cfg.batch_size) {
            let x = train_x.select(Axis(0), batch);
            let y = train_y.select(Axis(0), batch);
            let cache = network.forward(x.view(), Mode::Train, rng)?;
            let (_, grads) = network.backward(&cache, y.view())?;
            step += 1;
            for ((layer, grad), (w_state, b_state)) in
                network.layers.iter_mut().zip(&grads.layers).zip(&mut states)
            {
                super::adam_step(
                    layer.weights.as_slice_mut().expect("standard layout"),
                    grad.weights.as_slice().expect("standard layout"),
                    w_state,
                    step,
                    &cfg.adam,
                )?;
                super::adam_step(
                    layer.bias.as_slice_mut().expect("contiguous"),
                    grad.bias.as_slice().expect("contiguous"),
                    b_state,
                    step,
                    &cfg.adam,
                )?;
            }
        }
        let train_loss = network.loss(train_x, train_y)?;
        let val_loss = network.loss(val_x, val_y)?;
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        trace.epochs.push(EpochLoss {
            epoch,
            train_loss,
            val_loss,
        });
    }
    Ok((network, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{Activation, Loss};
    use ndarray::Array2;

    fn blobs(n: usize) -> (Array2<f64>, Array2<f64>) {
        let x = Array2::from_shape_fn((n, 6), |(i, j)| {
            let class = (i % 2) as f64;
            let wobble = ((i * 7 + j * 3) % 11) as f64 / 11.0;
            0.3 * wobble + 0.5 * class * ((j % 2) as f64) + 0.2 * (1.0 - class) * ((j + 1) % 2) as f64
        });
        let y = Array2::from_shape_fn((n, 1), |(i, _)| (i % 2) as f64);
        (x, y)
    }

    #[test]
    fn zero_learning_rate_keeps_initial_weights() {
        let (x, y) = blobs(40);
        let spec = NetworkSpec::feed_forward(&[6, 8, 1], Activation::Sigmoid, 0.1, Loss::BinaryCrossEntropy);
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 8,
            adam: AdamConfig { learning_rate: 0.0, ..AdamConfig::default() },
            seed: 4,
            ..TrainConfig::default()
        };
        let initial = Network::init(spec.clone(), &mut seed::rng(4)).unwrap();
        let (trained, trace) = train(spec, x.view(), y.view(), &cfg).unwrap();
        assert_eq!(trained, initial);
        assert_eq!(trace.epochs.len(), 3);
    }

    #[test]
    fn same_seed_reproduces_trace_bit_for_bit() {
        let (x, y) = blobs(50);
        let spec = NetworkSpec::feed_forward(&[6, 16, 4, 1], Activation::Sigmoid, 0.1, Loss::BinaryCrossEntropy);
        let cfg = TrainConfig { epochs: 5, batch_size: 16, seed: 21, ..TrainConfig::default() };
        let (a, ta) = train(spec.clone(), x.view(), y.view(), &cfg).unwrap();
        let (b, tb) = train(spec, x.view(), y.view(), &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
    }

    #[test]
    fn equal_splits_without_dropout_give_equal_curves() {
        let (x, y) = blobs(30);
        let spec = NetworkSpec::feed_forward(&[6, 8, 1], Activation::Sigmoid, 0.0, Loss::BinaryCrossEntropy);
        let net = Network::init(spec, &mut seed::rng(1)).unwrap();
        let cfg = TrainConfig { epochs: 6, batch_size: 8, seed: 2, ..TrainConfig::default() };
        let (_, trace) = train_network(net, x.view(), y.view(), Some((x.view(), y.view())), &cfg).unwrap();
        for e in &trace.epochs {
            assert_eq!(e.train_loss, e.val_loss);
        }
    }

    #[test]
    fn autoencoder_loss_halves() {
        let x = Array2::from_shape_fn((200, 10), |(i, j)| {
            let a = (i % 7) as f64 / 7.0;
            let b = (i % 5) as f64 / 5.0;
            if j % 2 == 0 { a * (j as f64 / 10.0) } else { b }
        });
        let spec = NetworkSpec::feed_forward(&[10, 4, 10], Activation::Linear, 0.0, Loss::Mse);
        let cfg = TrainConfig { epochs: 60, seed: 3, ..TrainConfig::default() };
        let (_, trace) = train(spec, x.view(), x.view(), &cfg).unwrap();
        let first = trace.first().unwrap().train_loss;
        let last = trace.last().unwrap().train_loss;
        assert!(last < 0.5 * first, "first {first} last {last}");
    }

    #[test]
    fn exploding_training_reports_epoch() {
        let (x, y) = blobs(20);
        let spec = NetworkSpec::feed_forward(&[6, 1], Activation::Linear, 0.0, Loss::Mse);
        let cfg = TrainConfig {
            epochs: 5,
            batch_size: 4,
            adam: AdamConfig { learning_rate: 1e300, ..AdamConfig::default() },
            ..TrainConfig::default()
        };
        assert!(matches!(
            train(spec, x.view(), y.view(), &cfg),
            Err(Error::NonFiniteLoss { epoch: 1 })
        ));
    }

    #[test]
    fn trace_csv_layout() {
        let trace = TrainingTrace {
            epochs: vec![EpochLoss { epoch: 1, train_loss: 0.5, val_loss: 0.25 }],
        };
        let mut buf = Vec::new();
        trace.write_csv(&mut buf, Some("seed=1")).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "# seed=1\nepoch,train_loss,val_loss\n1,0.5,0.25\n");
    }
}
