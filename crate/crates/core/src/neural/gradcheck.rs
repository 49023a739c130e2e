use ndarray::{Array2, ArrayView2};

use super::{Activation, ForwardCache, Network};
use crate::error::Result;

/// Step of the five-point stencil. Its truncation error is O(h^4), so the
/// step can be wide enough to keep cancellation error small.
pub const FD_STEP: f64 = 1e-3;

/// Two-point step used when the wide stencil crosses an ELU kink.
pub const FD_STEP_NEAR_KINK: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// (layer, is_bias, flat index) of the worst parameter.
    pub worst: (usize, bool, usize),
    pub n_parameters: usize,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_relative_error < self.tolerance
    }
}

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Compares backpropagated gradients with central finite differences over
/// every weight and bias. Parameters whose wide stencil moves an ELU
/// pre-activation across zero fall back to a narrow two-point difference. `masks` freezes dropout multipliers into the graph;
/// `None` evaluates with dropout off.
pub fn grad_check(
    network: &Network,
    inputs: ArrayView2<f64>,
    targets: ArrayView2<f64>,
    masks: Option<Vec<Option<Array2<f64>>>>,
    tolerance: f64,
) -> Result<GradCheckReport> {
    let masks = masks.unwrap_or_else(|| vec![None; network.layers.len()]);
    let cache = network.forward_with_masks(inputs, masks.clone())?;
    let (_, grads) = network.backward(&cache, targets)?;

    let loss_at = |net: &Network| -> Result<(f64, ForwardCache)> {
        let cache = net.forward_with_masks(inputs, masks.clone())?;
        Ok((net.spec.loss.value(cache.output.view(), targets), cache))
    };
    let elu_layers: Vec<usize> = (0..network.layers.len())
        .filter(|&l| network.spec.activations[l] == Activation::Elu)
        .collect();
    // True when some ELU pre-activation has a different sign than in `cache`.
    let crosses_kink = |other: &ForwardCache| {
        elu_layers.iter().any(|&l| {
            cache.pre_activations[l]
                .iter()
                .zip(other.pre_activations[l].iter())
                .any(|(a, b)| (*a > 0.0) != (*b > 0.0))
        })
    };

    let mut probe = network.clone();
    let mut worst = (0, false, 0);
    let mut max_err = 0.0f64;
    for l in 0..network.layers.len() {
        for is_bias in [false, true] {
            let n = if is_bias {
                network.layers[l].bias.len()
            } else {
                network.layers[l].weights.len()
            };
            for i in 0..n {
                let original = param(&probe, l, is_bias, i);
                let mut at = |offset: f64| -> Result<(f64, ForwardCache)> {
                    *param_mut(&mut probe, l, is_bias, i) = original + offset;
                    loss_at(&probe)
                };
                let stencil = [at(FD_STEP)?, at(-FD_STEP)?, at(2.0 * FD_STEP)?, at(-2.0 * FD_STEP)?];
                let numeric = if stencil.iter().any(|(_, c)| crosses_kink(c)) {
                    let (p, m) = (at(FD_STEP_NEAR_KINK)?.0, at(-FD_STEP_NEAR_KINK)?.0);
                    (p - m) / (2.0 * FD_STEP_NEAR_KINK)
                } else {
                    let [p1, m1, p2, m2] = stencil.map(|(loss, _)| loss);
                    (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * FD_STEP)
                };
                *param_mut(&mut probe, l, is_bias, i) = original;

                let analytic = if is_bias {
                    grads.layers[l].bias[i]
                } else {
                    grads.layers[l].weights.as_slice().expect("standard layout")[i]
                };
                let err = relative_error(analytic, numeric);
                if err > max_err {
                    max_err = err;
                    worst = (l, is_bias, i);
                }
            }
        }
    }
    Ok(GradCheckReport {
        max_relative_error: max_err,
        worst,
        n_parameters: network.n_parameters(),
        tolerance,
    })
}

fn param(net: &Network, layer: usize, is_bias: bool, i: usize) -> f64 {
    if is_bias {
        net.layers[layer].bias[i]
    } else {
        net.layers[layer].weights.as_slice().expect("standard layout")[i]
    }
}

fn param_mut(net: &mut Network, layer: usize, is_bias: bool, i: usize) -> &mut f64 {
    if is_bias {
        &mut net.layers[layer].bias[i]
    } else {
        &mut net.layers[layer].weights.as_slice_mut().expect("standard layout")[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{Activation, Dense, Loss, Mode, NetworkSpec};
    use crate::seed;
    use ndarray::{array, Array1};
    use rand::Rng;

    #[test]
    fn single_linear_unit_closed_form() {
        // L = (w x - t)^2 with w = 2, x = 1, t = 0, so dL/dw = 2 (w x - t) x = 4
        let spec = NetworkSpec::feed_forward(&[1, 1], Activation::Linear, 0.0, Loss::Mse);
        let net = Network::from_layers(
            spec,
            vec![Dense { weights: array![[2.0]], bias: Array1::zeros(1) }],
        )
        .unwrap();
        let x = array![[1.0]];
        let t = array![[0.0]];
        let cache = net.forward_with_masks(x.view(), vec![None]).unwrap();
        let (loss, grads) = net.backward(&cache, t.view()).unwrap();
        assert_eq!(loss, 4.0);
        assert_eq!(grads.layers[0].weights[[0, 0]], 4.0);
        let report = grad_check(&net, x.view(), t.view(), None, 1e-6).unwrap();
        assert!(report.passed(), "{report:?}");
    }

    fn random_bce_net(seed: u64) -> (Network, Array2<f64>, Array2<f64>) {
        let spec = NetworkSpec {
            layer_widths: vec![4, 8, 3, 1],
            activations: vec![Activation::Elu, Activation::Elu, Activation::Sigmoid],
            dropout_rate: 0.3,
            loss: Loss::BinaryCrossEntropy,
        };
        let mut rng = seed::rng(seed);
        let net = Network::init(spec, &mut rng).unwrap();
        let x = Array2::from_shape_simple_fn((5, 4), || rng.gen_range(-1.0..1.0));
        let t = Array2::from_shape_simple_fn((5, 1), || f64::from(rng.gen_bool(0.5)));
        (net, x, t)
    }

    #[test]
    fn deep_elu_sigmoid_bce_net() {
        for s in 0..3 {
            let (net, x, t) = random_bce_net(s);
            let report = grad_check(&net, x.view(), t.view(), None, 1e-4).unwrap();
            assert!(report.passed(), "{report:?}");
        }
    }

    #[test]
    fn frozen_dropout_mask() {
        let (net, x, t) = random_bce_net(7);
        let cache = net.forward(x.view(), Mode::Train, &mut seed::rng(8)).unwrap();
        assert!(cache.masks[0].as_ref().unwrap().iter().any(|&m| m == 0.0));
        let report = grad_check(&net, x.view(), t.view(), Some(cache.masks), 1e-4).unwrap();
        assert!(report.passed(), "{report:?}");
    }
}
