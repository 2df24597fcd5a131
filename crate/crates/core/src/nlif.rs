//! Closed-form spike times for non-leaky integrate-and-fire neurons with
//! exponential synapses.
//!
//! A neuron receiving spikes `t_j` with weights `W_j` has membrane potential
//! `u(t) = sum_{t_j <= t} W_j (1 - exp(-(t - t_j) / tau_s))`. Once the set of
//! inputs that arrive before the output spike (the causal set `C`) is known,
//! the spike time is
//!
//! ```text
//! t* = tau_s * ln( sum_C W_j exp(t_j / tau_s) / (sum_C W_j - theta) )
//! ```
//!
//! The causal set is the shortest time-ordered prefix of the inputs whose
//! weights exceed the threshold and whose spike time precedes the next input.

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::model::{NetworkParams, WeightStack};

/// Spike times of a layer, one entry per neuron; `t_inf` marks silence.
pub type SpikeVector = Vec<f64>;

/// Presynaptic indices that caused a spike, strictly increasing.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CausalSet(Vec<usize>);

impl CausalSet {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    /// Builds a set from arbitrary indices, sorting and deduplicating them.
    pub fn from_indices(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        Self(indices)
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.0.binary_search(&j).is_ok()
    }
}

/// Result of solving one neuron.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronTrace {
    pub spike_time: f64,
    pub causal_set: CausalSet,
    /// `sum_{j in C} W_j`.
    pub weight_sum: f64,
    /// `sum_{j in C} W_j exp(t_j / tau_s)`.
    pub exp_sum: f64,
}

impl NeuronTrace {
    pub fn silent(params: &NetworkParams) -> Self {
        Self {
            spike_time: params.t_inf,
            causal_set: CausalSet::empty(),
            weight_sum: 0.0,
            exp_sum: 0.0,
        }
    }

    pub fn spiked(&self) -> bool {
        !self.causal_set.is_empty()
    }
}

/// Full forward pass of one input through a network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkTrace {
    pub input: SpikeVector,
    /// `layers[l][i]` is neuron `i` of computed layer `l` (0-based).
    pub layers: Vec<Vec<NeuronTrace>>,
}

impl NetworkTrace {
    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// Spike times of computed layer `l`.
    pub fn layer_times(&self, l: usize) -> SpikeVector {
        self.layers[l].iter().map(|n| n.spike_time).collect()
    }

    /// Spike times feeding computed layer `l` (the network input for `l == 0`).
    pub fn layer_input_times(&self, l: usize) -> SpikeVector {
        if l == 0 {
            self.input.clone()
        } else {
            self.layer_times(l - 1)
        }
    }

    pub fn output_times(&self) -> SpikeVector {
        self.layer_times(self.layers.len() - 1)
    }

    /// Layer sizes including the input, `[N0, ..., NL]`.
    pub fn shape(&self) -> Vec<usize> {
        let mut s = vec![self.input.len()];
        s.extend(self.layers.iter().map(Vec::len));
        s
    }
}

/// Membrane potential at time `t`.
pub fn membrane_potential(
    params: &NetworkParams,
    input_times: &[f64],
    weights: &[f64],
    t: f64,
) -> Result<f64> {
    if input_times.len() != weights.len() {
        return dim_err(format!(
            "{} input times but {} weights",
            input_times.len(),
            weights.len()
        ));
    }
    if !t.is_finite() {
        return Err(Error::Input(format!("evaluation time {t} is not finite")));
    }
    Ok(input_times
        .iter()
        .zip(weights)
        .filter(|(&tj, _)| !params.is_silent(tj) && tj <= t)
        .map(|(&tj, &w)| w * -(-(t - tj) / params.tau_s).exp_m1())
        .sum())
}

/// Inputs of one layer, pre-sorted once and shared by all neurons of the layer.
#[derive(Debug, Clone)]
pub struct LayerInputs<'a> {
    times: &'a [f64],
    /// Indices of non-silent inputs, ascending in time, ties by index.
    order: Vec<usize>,
    /// `exp((t_j - t_ref) / tau_s)` indexed like `order`.
    scaled_exp: Vec<f64>,
    t_ref: f64,
}

impl<'a> LayerInputs<'a> {
    pub fn new(params: &NetworkParams, times: &'a [f64]) -> Result<Self> {
        if let Some(&bad) = times.iter().find(|t| t.is_nan() || **t < 0.0) {
            return Err(Error::Input(format!(
                "input spike times must be non-negative, got {bad}"
            )));
        }
        let mut order: Vec<usize> = (0..times.len())
            .filter(|&j| !params.is_silent(times[j]))
            .collect();
        // stable: equal times keep index order
        order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
        let t_ref = order.first().map_or(0.0, |&j| times[j]);
        let scaled_exp = order
            .iter()
            .map(|&j| ((times[j] - t_ref) / params.tau_s).exp())
            .collect();
        Ok(Self {
            times,
            order,
            scaled_exp,
            t_ref,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Time-sorted indices of the non-silent inputs.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Solves a neuron with the given incoming weight row.
    pub fn solve(&self, params: &NetworkParams, row: &[f64]) -> NeuronTrace {
        debug_assert_eq!(row.len(), self.times.len());
        let tau = params.tau_s;
        let mut weight_sum = 0.0;
        let mut exp_sum = 0.0;
        for (m, &j) in self.order.iter().enumerate() {
            let w = row[j];
            weight_sum += w;
            exp_sum += w * self.scaled_exp[m];
            if weight_sum < params.theta + params.delta_min {
                continue;
            }
            let t_last = self.times[j];
            let t_next = self
                .order
                .get(m + 1)
                .map_or(f64::INFINITY, |&k| self.times[k]);
            // The potential at t_last is at most theta once every shorter
            // prefix has been rejected, so the root cannot precede t_last;
            // clamping only absorbs rounding.
            let t_star = if exp_sum > 0.0 {
                let t = self.t_ref + tau * (exp_sum.ln() - (weight_sum - params.theta).ln());
                t.max(t_last)
            } else {
                t_last
            };
            if t_star < t_next && t_star < params.t_inf {
                let mut causal = self.order[..=m].to_vec();
                causal.sort_unstable();
                return NeuronTrace {
                    spike_time: t_star,
                    causal_set: CausalSet(causal),
                    weight_sum,
                    exp_sum: exp_sum * (self.t_ref / tau).exp(),
                };
            }
        }
        NeuronTrace::silent(params)
    }
}

fn check_row(row: &[f64]) -> Result<()> {
    if row.iter().any(|w| !w.is_finite()) {
        return Err(Error::Input("weights must be finite".into()));
    }
    Ok(())
}

/// Solves a single neuron: finds its causal set and spike time.
pub fn solve_neuron(
    params: &NetworkParams,
    input_times: &[f64],
    weight_row: &[f64],
) -> Result<NeuronTrace> {
    if input_times.len() != weight_row.len() {
        return dim_err(format!(
            "{} input times but {} weights",
            input_times.len(),
            weight_row.len()
        ));
    }
    check_row(weight_row)?;
    let inputs = LayerInputs::new(params, input_times)?;
    Ok(inputs.solve(params, weight_row))
}

/// Runs the network layer by layer.
pub fn forward_network(
    params: &NetworkParams,
    weights: &WeightStack,
    input_times: &[f64],
) -> Result<NetworkTrace> {
    let n_in = weights.layer(0).cols();
    if input_times.len() != n_in {
        return dim_err(format!(
            "network expects {n_in} inputs, got {}",
            input_times.len()
        ));
    }
    let mut layers: Vec<Vec<NeuronTrace>> = Vec::with_capacity(weights.num_layers());
    let mut current: SpikeVector = input_times.to_vec();
    for matrix in weights.layers() {
        if matrix.cols() != current.len() {
            return dim_err("weight matrix does not match previous layer size");
        }
        let inputs = LayerInputs::new(params, &current)?;
        let traces: Vec<NeuronTrace> = (0..matrix.rows())
            .map(|i| inputs.solve(params, matrix.row(i)))
            .collect();
        current = traces.iter().map(|n| n.spike_time).collect();
        layers.push(traces);
    }
    Ok(NetworkTrace {
        input: input_times.to_vec(),
        layers,
    })
}

/// Spike times only, without keeping the per-neuron traces of inner layers.
pub fn forward_times(
    params: &NetworkParams,
    weights: &WeightStack,
    input_times: &[f64],
) -> Result<SpikeVector> {
    Ok(forward_network(params, weights, input_times)?.output_times())
}

/// Shifts every non-negative input so the earliest one spikes at zero.
pub fn normalize_inputs(params: &NetworkParams, times: &mut [f64]) {
    let min = times
        .iter()
        .copied()
        .filter(|&t| !params.is_silent(t))
        .fold(f64::INFINITY, f64::min);
    if min.is_finite() {
        for t in times.iter_mut().filter(|t| !params.is_silent(**t)) {
            *t -= min;
        }
    }
}
