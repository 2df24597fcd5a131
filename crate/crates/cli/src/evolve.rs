use anyhow::Result;
use causal_pieces::{evolve as search, EvoConfig, EvoResult, Family, Topology};
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::{out_dir, parse_flag, usage, Global};

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EvolveArgs {
    /// `normal`, `lognormal`, `uniform` or `uniform_positive`
    #[arg(long, default_value = "normal")]
    pub family: String,
    #[arg(long, default_value = "4,100,3")]
    pub topology: String,
    /// Grid points per axis of the Yin Yang probe
    #[arg(long, default_value_t = 100)]
    pub grid: usize,
    /// Loops without improvement before stopping
    #[arg(long, default_value_t = 10)]
    pub patience: usize,
    #[arg(long, default_value_t = 200)]
    pub max_loops: usize,
    /// Networks sampled per candidate
    #[arg(long, default_value_t = 1)]
    pub nets: usize,
    #[arg(long, default_value_t = 0.1)]
    pub perturb_std: f64,
}

impl Default for EvolveArgs {
    fn default() -> Self {
        Self {
            family: "normal".into(),
            topology: "4,100,3".into(),
            grid: 100,
            patience: 10,
            max_loops: 200,
            nets: 1,
            perturb_std: 0.1,
        }
    }
}

impl EvolveArgs {
    pub fn config(&self, seed: u64) -> Result<EvoConfig> {
        let config = EvoConfig {
            family: parse_flag::<Family>("family", &self.family)?,
            topology: parse_flag::<Topology>("topology", &self.topology)?,
            probe_resolution: self.grid,
            patience: self.patience,
            max_loops: self.max_loops,
            nets_per_candidate: self.nets,
            perturb_std: self.perturb_std,
            seed,
            ..Default::default()
        };
        config.validate().map_err(|e| usage(e.to_string()))?;
        if self.grid < 2 {
            return Err(usage("--grid must be at least 2"));
        }
        Ok(config)
    }
}

pub fn run(args: &EvolveArgs, global: &Global) -> Result<EvoResult> {
    let result = search(&args.config(global.seed)?)?;
    let dir = out_dir("evolve", args, global)?;
    result.write_history_csv(dir.csv_file("evolve_history.csv")?)?;
    dir.json(
        "best_spec.json",
        &serde_json::json!({
            "spec": result.best.spec,
            "spec_string": result.best.spec.to_string(),
            "fitness": result.best.fitness,
            "initial_best_fitness": result.initial_best_fitness,
            "loops": result.loops,
        }),
    )?;
    Ok(result)
}
