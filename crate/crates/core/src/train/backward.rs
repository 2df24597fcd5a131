//! Exact derivatives of spike times within a causal piece.
//!
//! For a spiking neuron with causal set `C`, `D = sum_C W - theta` and output
//! time `t*`:
//!
//! ```text
//! dt*/dt_k = W_k exp((t_k - t*)/tau_s) / D
//! dt*/dW_k = tau_s (exp((t_k - t*)/tau_s) - 1) / D
//! ```
//!
//! for `k` in `C`, and zero otherwise. Silent neurons have no derivative.

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Result};
use crate::model::{Matrix, NetworkParams, WeightStack};
use crate::nlif::{NetworkTrace, NeuronTrace};

/// `dL/dW` per layer and `dL/dt` for every layer's spike times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientBuffers {
    pub weights: Vec<Matrix>,
    /// `dL/dt` of the network input.
    pub input: Vec<f64>,
    /// `dL/dt` of each computed layer's spike times.
    pub layers: Vec<Vec<f64>>,
}

fn check(trace: &NetworkTrace, weights: &WeightStack, output_grad: &[f64]) -> Result<()> {
    let shape = trace.shape();
    if shape != weights.topology().sizes() {
        return dim_err(format!(
            "trace shape {shape:?} does not match weights {}",
            weights.topology()
        ));
    }
    if output_grad.len() != *shape.last().unwrap() {
        return dim_err(format!(
            "output gradient has {} entries for {} outputs",
            output_grad.len(),
            shape.last().unwrap()
        ));
    }
    Ok(())
}

fn input_time(trace: &NetworkTrace, layer: usize, k: usize) -> f64 {
    if layer == 0 {
        trace.input[k]
    } else {
        trace.layers[layer - 1][k].spike_time
    }
}

/// Reverse sweep for one sample. Adds `dL/dW` into `weight_grads` and returns
/// `dL/dt` of the input.
pub fn backward_into(
    params: &NetworkParams,
    weights: &WeightStack,
    trace: &NetworkTrace,
    output_grad: &[f64],
    weight_grads: &mut [Matrix],
    mut layer_grads: Option<&mut Vec<Vec<f64>>>,
) -> Result<Vec<f64>> {
    check(trace, weights, output_grad)?;
    let tau = params.tau_s;
    let mut g_out = output_grad.to_vec();
    for l in (0..trace.num_layers()).rev() {
        if let Some(lg) = layer_grads.as_deref_mut() {
            lg[l].clone_from(&g_out);
        }
        let w = weights.layer(l);
        let gw = &mut weight_grads[l];
        let mut g_in = vec![0.0; w.cols()];
        for (i, neuron) in trace.layers[l].iter().enumerate() {
            let g = g_out[i];
            if g == 0.0 || !neuron.spiked() {
                continue;
            }
            let d = (neuron.weight_sum - params.theta).max(params.delta_min);
            let row = w.row(i);
            let grow = gw.row_mut(i);
            for &k in neuron.causal_set.indices() {
                let e = ((input_time(trace, l, k) - neuron.spike_time) / tau).exp();
                grow[k] += g * tau * (e - 1.0) / d;
                g_in[k] += g * row[k] * e / d;
            }
        }
        g_out = g_in;
    }
    Ok(g_out)
}

/// Gradients of a loss with respect to weights and all spike times, given
/// `dL/dt` of the output layer.
pub fn backward_network(
    params: &NetworkParams,
    weights: &WeightStack,
    trace: &NetworkTrace,
    output_grad: &[f64],
) -> Result<GradientBuffers> {
    check(trace, weights, output_grad)?;
    let mut wg: Vec<Matrix> = weights
        .layers()
        .iter()
        .map(|m| Matrix::zeros(m.rows(), m.cols()))
        .collect();
    let mut layers: Vec<Vec<f64>> = trace.layers.iter().map(|l| vec![0.0; l.len()]).collect();
    let input = backward_into(params, weights, trace, output_grad, &mut wg, Some(&mut layers))?;
    Ok(GradientBuffers {
        weights: wg,
        input,
        layers,
    })
}

/// Local Lipschitz constant `2 |C| max(W_bar, tau_s) / delta` of one neuron's
/// spike time within its causal piece, with `W_bar` the largest causal
/// weight magnitude and `delta = sum_C W - theta`. Infinite for silent neurons.
pub fn lipschitz_constant(params: &NetworkParams, row: &[f64], neuron: &NeuronTrace) -> f64 {
    if !neuron.spiked() {
        return f64::INFINITY;
    }
    let w_bar = neuron
        .causal_set
        .indices()
        .iter()
        .map(|&k| row[k].abs())
        .fold(0.0, f64::max);
    let delta = neuron.weight_sum - params.theta;
    2.0 * neuron.causal_set.len() as f64 * w_bar.max(params.tau_s) / delta
}

/// Effective weights `max(0, w)`.
pub fn clamp_positive(weights: &WeightStack) -> WeightStack {
    weights.map(|w| w.max(0.0))
}

/// Zeroes gradient entries whose stored weight is not positive.
pub fn gate_positive(weights: &WeightStack, grads: &mut [Matrix]) {
    for (w, g) in weights.layers().iter().zip(grads) {
        for (gv, &wv) in g.as_mut_slice().iter_mut().zip(w.as_slice()) {
            if wv <= 0.0 {
                *gv = 0.0;
            }
        }
    }
}
