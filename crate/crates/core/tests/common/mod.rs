#![allow(dead_code)]

use causal_pieces::{Matrix, Topology, WeightStack};
use proptest::prelude::*;

/// Input times in `[0, 2]`, sometimes snapped to a coarse grid so that ties
/// occur.
pub fn time() -> impl Strategy<Value = f64> {
    prop_oneof![
        3 => 0.0..2.0f64,
        1 => (0u32..8).prop_map(|k| f64::from(k) * 0.25),
    ]
}

pub fn weight() -> impl Strategy<Value = f64> {
    -1.0..2.0f64
}

/// `(times, weights)` of one neuron with `1..=max_n` inputs.
pub fn neuron(max_n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1..=max_n).prop_flat_map(|n| {
        (
            prop::collection::vec(time(), n),
            prop::collection::vec(weight(), n),
        )
    })
}

/// A small network with its topology given by `sizes`.
pub fn network(sizes: Vec<usize>, lo: f64, hi: f64) -> impl Strategy<Value = WeightStack> {
    let shapes: Vec<(usize, usize)> = sizes.windows(2).map(|w| (w[1], w[0])).collect();
    shapes
        .into_iter()
        .map(|(r, c)| prop::collection::vec(lo..hi, r * c).prop_map(move |v| Matrix::from_vec(r, c, v).unwrap()))
        .collect::<Vec<_>>()
        .prop_map(|m| WeightStack::new(m).unwrap())
}

pub fn topology(sizes: &[usize]) -> Topology {
    Topology::new(sizes.to_vec()).unwrap()
}

/// `tau ln(sum W e^{t/tau} / (sum W - theta))` over the listed inputs.
pub fn closed_form(tau: f64, theta: f64, times: &[f64], weights: &[f64], set: &[usize]) -> f64 {
    let w: f64 = set.iter().map(|&j| weights[j]).sum();
    let e: f64 = set.iter().map(|&j| weights[j] * (times[j] / tau).exp()).sum();
    tau * (e / (w - theta)).ln()
}
