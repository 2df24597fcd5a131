//! Exact event-driven simulation and causal-piece analysis of single-spike
//! non-leaky integrate-and-fire networks.

pub mod dataset;
pub mod distribution;
pub mod error;
pub mod estimate;
pub mod evolve;
pub mod model;
pub mod nlif;
pub mod oracle;
pub mod pieces;
pub mod rng;
pub mod stats;
pub mod train;

pub use dataset::Sample;
pub use distribution::{DistributionSpec, Family, Params};
pub use error::{Error, Result};
pub use model::{Matrix, NetworkParams, Topology, WeightStack};
pub use nlif::{
    forward_network, forward_times, membrane_potential, normalize_inputs, solve_neuron,
    CausalSet, LayerInputs, NetworkTrace, NeuronTrace, SpikeVector,
};
pub use pieces::{
    assign_layer_piece_ids, assign_neuron_piece_ids, causal_path, count_network_pieces,
    count_on_inputs, count_pieces, set_size_stats, CausalPath, PieceCounter, PieceCounts,
    PieceId, PieceIds, PieceKey, PieceTable, EMPTY_ID,
};
pub use estimate::{
    deep_upper_bound, eta_from_pqk, grid_sweep, monte_carlo_pqk, monte_carlo_pqk_with,
    pqk_exhaustive, pqk_from_weight_vector, sparre_andersen_bound, EstimateResult, LinearRange,
    McMode, PqkProfile,
};
pub use train::{
    backward_network, clamp_positive, train, ttfs_loss, AdamState, Checkpoint, GradientBuffers,
    LinearHead, Metrics, Model, Readout, TrainConfig, TrainResult, Trainer,
};
pub use evolve::{evolve, evolve_with, fitness, Candidate, EvoConfig, EvoResult, HistoryRow};
