use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use causal_pieces::rng::derived_rng;
use causal_pieces::stats::Quartiles;
use causal_pieces::{
    count_on_inputs, Checkpoint, DistributionSpec, Model, NetworkParams, Readout, Topology,
    WeightStack,
};
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::data::DataArgs;
use crate::{out_dir, parse_flag, Global};

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CountArgs {
    /// Training checkpoint whose spiking weights are analysed
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Use the checkpoint's best model instead of its latest one
    #[arg(long)]
    pub best: bool,
    /// Topology of a freshly initialized network (ignored with --checkpoint)
    #[arg(long, default_value = "4,30,3")]
    pub topology: String,
    /// Weight distribution of a fresh network, e.g. `normal:optimized`,
    /// `normal:0.1,0.5`, `lognormal:scaled:1.29,0.57,0.85,0.76`
    #[arg(long, default_value = "normal:optimized")]
    pub init: String,
    /// Write every sample's piece IDs to `piece_ids.csv`
    #[arg(long)]
    pub ids: bool,
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerCount {
    pub layer: usize,
    pub pieces: usize,
    pub pieces_with_empty: usize,
    /// Sizes of non-empty causal sets.
    pub set_size: Quartiles,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountReport {
    pub samples: usize,
    pub layers: Vec<LayerCount>,
    pub network: usize,
    pub network_with_empty: usize,
}

impl CountReport {
    pub fn output_pieces(&self) -> usize {
        self.layers.last().map_or(0, |l| l.pieces)
    }

    pub fn summary(&self) -> &Self {
        self
    }
}

/// Spiking weights of a fresh network, identical to the ones training starts
/// from with the same seed.
pub fn fresh_weights(topology: &Topology, init: &DistributionSpec, seed: u64) -> Result<WeightStack> {
    Ok(Model::init(topology, init, Readout::SpikeTimes, &mut derived_rng(seed, &[0]))?.weights)
}

/// Counts pieces of `weights` on `inputs`, optionally recording IDs.
pub fn count_report(
    params: &NetworkParams,
    weights: &WeightStack,
    inputs: &[Vec<f64>],
    record: bool,
) -> Result<(CountReport, Option<causal_pieces::PieceIds>)> {
    let counter = count_on_inputs(params, weights, inputs, record)?;
    let without = counter.counts(false);
    let with = counter.counts(true);
    let layers = (0..without.per_layer.len())
        .map(|l| LayerCount {
            layer: l + 1,
            pieces: without.per_layer[l],
            pieces_with_empty: with.per_layer[l],
            set_size: counter.set_size_quartiles(l, true),
        })
        .collect();
    let report = CountReport {
        samples: without.samples,
        layers,
        network: without.network,
        network_with_empty: with.network,
    };
    Ok((report, counter.into_ids()))
}

pub fn run(args: &CountArgs, global: &Global) -> Result<CountReport> {
    let (params, weights) = match &args.checkpoint {
        Some(path) => {
            let ck = Checkpoint::load(path)
                .with_context(|| format!("cannot load checkpoint {}", path.display()))?;
            let model = if args.best { &ck.best_model } else { &ck.model };
            (ck.config.params, model.effective_weights(ck.config.positive_weights))
        }
        None => {
            let topology: Topology = parse_flag("topology", &args.topology)?;
            let init: DistributionSpec = parse_flag("init", &args.init)?;
            (NetworkParams::default(), fresh_weights(&topology, &init, global.seed)?)
        }
    };
    let (train, _) = args.data.load(global.seed)?;
    let inputs: Vec<Vec<f64>> = train.into_iter().map(|s| s.features).collect();
    let n_in = weights.topology().inputs();
    if let Some(x) = inputs.iter().find(|x| x.len() != n_in) {
        bail!("network expects {n_in} inputs but the dataset has {}", x.len());
    }
    let (report, ids) = count_report(&params, &weights, &inputs, args.ids)?;

    let dir = out_dir("count", args, global)?;
    let mut w = csv::Writer::from_writer(dir.csv_file("counts.csv")?);
    w.write_record([
        "layer",
        "pieces",
        "pieces_with_empty",
        "set_size_q1",
        "set_size_median",
        "set_size_q3",
    ])?;
    for l in &report.layers {
        w.write_record([
            l.layer.to_string(),
            l.pieces.to_string(),
            l.pieces_with_empty.to_string(),
            l.set_size.q1.to_string(),
            l.set_size.median.to_string(),
            l.set_size.q3.to_string(),
        ])?;
    }
    w.write_record([
        "network".to_string(),
        report.network.to_string(),
        report.network_with_empty.to_string(),
        String::new(),
        String::new(),
        String::new(),
    ])?;
    w.flush()?;
    if let Some(ids) = ids {
        let mut w = csv::Writer::from_writer(dir.csv_file("piece_ids.csv")?);
        w.write_record(["sample_index", "layer", "neuron", "piece_id"])?;
        for s in 0..ids.num_samples() {
            for l in 0..ids.num_layers() {
                for (i, id) in ids.neuron_ids(s, l).iter().enumerate() {
                    w.write_record([
                        s.to_string(),
                        (l + 1).to_string(),
                        i.to_string(),
                        id.to_string(),
                    ])?;
                }
            }
        }
        w.flush()?;
    }
    dir.json("counts.json", &report)?;
    Ok(report)
}
