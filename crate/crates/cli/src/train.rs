use std::path::PathBuf;

use anyhow::{Context, Result};
use causal_pieces::{
    Checkpoint, DistributionSpec, Readout, Topology, TrainConfig, TrainResult, Trainer,
};
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::data::{DataArgs, DatasetKind};
use crate::{out_dir, parse_flag, usage, Global};

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    /// Layer sizes; defaults to 4,30,3 (Yin Yang) or 784,200,100,10 (MNIST).
    /// With a linear head the last entry is the number of classes.
    #[arg(long)]
    pub topology: Option<String>,
    #[arg(long, default_value = "normal:optimized")]
    pub init: String,
    #[arg(long, default_value_t = 1000)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 100)]
    pub batch_size: usize,
    /// `spike_times` or `linear_head`
    #[arg(long, default_value = "spike_times")]
    pub readout: String,
    /// Clamp spiking weights to be non-negative in the forward pass
    #[arg(long)]
    pub positive: bool,
    /// Loss sharpness (defaults to 0.2 tau_s)
    #[arg(long)]
    pub xi: Option<f64>,
    /// Count output-layer pieces every this many epochs (0 never)
    #[arg(long, default_value_t = 0)]
    pub eval_every: usize,
    #[arg(long, default_value_t = 5e-3)]
    pub weight_bump: f64,
    /// Continue from a checkpoint; `--epochs` is the new total
    #[arg(long)]
    pub resume: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
}

impl Default for TrainArgs {
    fn default() -> Self {
        Self {
            topology: None,
            init: "normal:optimized".into(),
            epochs: 1000,
            learning_rate: 1e-4,
            batch_size: 100,
            readout: "spike_times".into(),
            positive: false,
            xi: None,
            eval_every: 0,
            weight_bump: 5e-3,
            resume: None,
            data: DataArgs::default(),
        }
    }
}

impl TrainArgs {
    pub fn topology(&self) -> Result<Topology> {
        let default = match self.data.dataset {
            DatasetKind::Mnist => "784,200,100,10",
            _ => "4,30,3",
        };
        parse_flag("topology", self.topology.as_deref().unwrap_or(default))
    }

    pub fn config(&self, seed: u64) -> Result<TrainConfig> {
        let config = TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            epochs: self.epochs,
            xi: self.xi,
            seed,
            positive_weights: self.positive,
            readout: parse_flag::<Readout>("readout", &self.readout)?,
            eval_every: self.eval_every,
            weight_bump: self.weight_bump,
            ..Default::default()
        };
        config.validate().map_err(|e| usage(e.to_string()))?;
        Ok(config)
    }
}

pub fn run(args: &TrainArgs, global: &Global) -> Result<TrainResult> {
    if args.data.dataset == DatasetKind::Grid {
        return Err(usage("training needs --dataset yinyang or mnist"));
    }
    let (train, test) = args.data.load(global.seed)?;
    let mut trainer = match &args.resume {
        Some(path) => {
            let mut ck = Checkpoint::load(path)
                .with_context(|| format!("cannot load checkpoint {}", path.display()))?;
            ck.config.epochs = args.epochs;
            Trainer::resume(&train, &test, ck)?
        }
        None => {
            let init: DistributionSpec = parse_flag("init", &args.init)?;
            Trainer::new(&train, &test, &args.topology()?, &init, args.config(global.seed)?)?
        }
    };
    while !trainer.is_done() {
        trainer.run_epoch()?;
    }
    let dir = out_dir("train", args, global)?;
    trainer.checkpoint().save(&dir.path("checkpoint.json"))?;
    let result = trainer.finish();
    result.metrics.write_csv(dir.csv_file("metrics.csv")?)?;
    Ok(result)
}
