mod common;

use std::collections::HashSet;

use causal_pieces::{
    assign_layer_piece_ids, assign_neuron_piece_ids, causal_path, count_network_pieces,
    count_pieces, forward_network, CausalPath, NetworkParams, NetworkTrace, PieceCounter,
    WeightStack,
};
use proptest::prelude::*;

fn traces(weights: &WeightStack, inputs: &[Vec<f64>]) -> Vec<NetworkTrace> {
    let p = NetworkParams::default();
    inputs
        .iter()
        .map(|x| forward_network(&p, weights, x).unwrap())
        .collect()
}

fn full_path(trace: &NetworkTrace, layer: usize) -> CausalPath {
    let all: Vec<usize> = (0..trace.layers[layer].len()).collect();
    causal_path(trace, layer, &all).unwrap()
}

/// Sizes `[3, a, (b, (c))]` with every layer at most 4 wide.
fn shape() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..=4, 1..=3).prop_map(|mut v| {
        v.insert(0, 3);
        v
    })
}

fn net_and_inputs() -> impl Strategy<Value = (WeightStack, Vec<Vec<f64>>)> {
    shape().prop_flat_map(|sizes| {
        let n_in = sizes[0];
        (
            common::network(sizes, -0.6, 1.6),
            prop::collection::vec(prop::collection::vec(0.0..1.0f64, n_in), 1..=100),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn counts_equal_distinct_causal_paths((weights, inputs) in net_and_inputs()) {
        let tr = traces(&weights, &inputs);
        let (ids, _) = assign_neuron_piece_ids(&tr).unwrap();
        let ids = assign_layer_piece_ids(ids);
        let layers = weights.num_layers();
        for l in 0..layers {
            let nonsilent: HashSet<CausalPath> = tr
                .iter()
                .map(|t| full_path(t, l))
                .filter(|p| !p.is_silent())
                .collect();
            let all: HashSet<CausalPath> = tr.iter().map(|t| full_path(t, l)).collect();
            prop_assert_eq!(count_pieces(&ids, l, false).unwrap(), nonsilent.len());
            prop_assert_eq!(count_pieces(&ids, l, true).unwrap(), all.len());
        }
        let per_sample: Vec<Vec<CausalPath>> = tr
            .iter()
            .map(|t| (0..layers).map(|l| full_path(t, l)).collect())
            .collect();
        let network: HashSet<&Vec<CausalPath>> = per_sample
            .iter()
            .filter(|ps| !ps.iter().all(CausalPath::is_silent))
            .collect();
        prop_assert_eq!(count_network_pieces(&ids, false).unwrap(), network.len());
    }

    #[test]
    fn sample_order_does_not_change_counts(
        (weights, inputs) in net_and_inputs(),
        seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let tr = traces(&weights, &inputs);
        let mut shuffled = tr.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let count = |t: &[NetworkTrace], empty: bool| {
            let mut c = PieceCounter::new(&t[0].shape(), false).unwrap();
            for x in t {
                c.push(x).unwrap();
            }
            c.counts(empty)
        };
        for empty in [false, true] {
            let a = count(&tr, empty);
            let b = count(&shuffled, empty);
            prop_assert_eq!(a.per_layer, b.per_layer);
            prop_assert_eq!(a.network, b.network);
        }
    }

    #[test]
    fn layer_ids_refine_single_neuron_ids((weights, inputs) in net_and_inputs()) {
        let tr = traces(&weights, &inputs);
        let (ids, _) = assign_neuron_piece_ids(&tr).unwrap();
        let ids = assign_layer_piece_ids(ids);
        for l in 0..weights.num_layers() {
            let layer_count = count_pieces(&ids, l, true).unwrap();
            for i in 0..ids.layer_sizes()[l] {
                let single: HashSet<i32> = (0..ids.num_samples()).map(|s| ids.neuron_id(s, l, i)).collect();
                prop_assert!(layer_count >= single.len());
            }
            prop_assert!(layer_count <= ids.num_samples());
        }
    }

    #[test]
    fn counts_grow_with_samples((weights, inputs) in net_and_inputs()) {
        let tr = traces(&weights, &inputs);
        let mut c = PieceCounter::new(&tr[0].shape(), false).unwrap();
        let mut prev = c.counts(false);
        for t in &tr {
            c.push(t).unwrap();
            let now = c.counts(false);
            prop_assert!(now.network >= prev.network && now.network <= prev.network + 1);
            for (a, b) in now.per_layer.iter().zip(&prev.per_layer) {
                prop_assert!(a >= b && *a <= b + 1);
            }
            prev = now;
        }
    }
}
