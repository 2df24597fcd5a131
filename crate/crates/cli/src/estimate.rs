use std::path::PathBuf;

use anyhow::{Context, Result};
use causal_pieces::estimate::{
    deep_upper_bound, eta_from_pqk, monte_carlo_pqk_with, pqk_exhaustive, sparre_andersen_bound,
    sparre_andersen_bound_log2, McMode,
};
use causal_pieces::rng::derive_seed;
use causal_pieces::{DistributionSpec, Topology};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::{out_dir, parse_flag, usage, Global};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Bound {
    /// Lower bound on the causal-set fraction of a symmetric neuron
    Sparre,
    /// Monte Carlo estimate for weights drawn from `--init`
    Mc,
    /// Exact count for the weight vector in `--weights`
    Exhaustive,
    /// Upper bound for the network `--topology` with weights from `--init`
    Deep,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EstimateArgs {
    #[arg(long, value_enum, default_value = "sparre")]
    pub bound: Bound,
    /// Number of inputs
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value = "normal:0,0.1")]
    pub init: String,
    /// Monte Carlo samples per k
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 1.0)]
    pub theta: f64,
    /// `independent` or `trajectory`
    #[arg(long, default_value = "independent")]
    pub mode: String,
    /// File with whitespace or comma separated weights
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long, default_value = "4,30,3")]
    pub topology: String,
}

impl Default for EstimateArgs {
    fn default() -> Self {
        Self {
            bound: Bound::Sparre,
            n: 100,
            init: "normal:0,0.1".into(),
            samples: 10_000,
            theta: 1.0,
            mode: "independent".into(),
            weights: None,
            topology: "4,30,3".into(),
        }
    }
}

fn read_weights(path: &PathBuf) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read weights {}", path.display()))?;
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .with_context(|| format!("bad weight {s:?} in {}", path.display()))
        })
        .collect()
}

/// Evaluates the selected estimate without writing files.
pub fn estimate(args: &EstimateArgs, seed: u64) -> Result<Value> {
    let mode: McMode = parse_flag("mode", &args.mode)?;
    if args.samples == 0 || !args.theta.is_finite() {
        return Err(usage("--samples must be positive and --theta finite"));
    }
    Ok(match args.bound {
        Bound::Sparre => {
            if args.n == 0 {
                return Err(usage("--n must be positive"));
            }
            json!({
                "n": args.n,
                "fraction": sparre_andersen_bound(args.n),
                "eta_log2": sparre_andersen_bound_log2(args.n),
            })
        }
        Bound::Mc => {
            if args.n == 0 {
                return Err(usage("--n must be positive"));
            }
            let spec: DistributionSpec = parse_flag("init", &args.init)?;
            let profile = monte_carlo_pqk_with(&spec, args.n, args.samples, args.theta, seed, mode)?;
            json!({
                "n": args.n,
                "estimate": eta_from_pqk(&profile),
                "p_k": profile.p,
            })
        }
        Bound::Exhaustive => {
            let path = args
                .weights
                .as_ref()
                .ok_or_else(|| usage("--bound exhaustive needs --weights"))?;
            let weights = read_weights(path)?;
            let profile = pqk_exhaustive(&weights, args.theta)?;
            json!({
                "n": weights.len(),
                "estimate": eta_from_pqk(&profile),
                "p_k": profile.p,
            })
        }
        Bound::Deep => {
            let spec: DistributionSpec = parse_flag("init", &args.init)?;
            let topology: Topology = parse_flag("topology", &args.topology)?;
            let profiles = (0..topology.num_layers())
                .map(|l| {
                    monte_carlo_pqk_with(
                        &spec,
                        topology.fan_in(l),
                        args.samples,
                        args.theta,
                        derive_seed(seed, &[l as u64]),
                        mode,
                    )
                })
                .collect::<causal_pieces::Result<Vec<_>>>()?;
            json!({ "topology": topology, "bound": deep_upper_bound(&profiles, &topology)? })
        }
    })
}

pub fn run(args: &EstimateArgs, global: &Global) -> Result<Value> {
    let result = estimate(args, global.seed)?;
    let dir = out_dir("estimate", args, global)?;
    dir.json("estimate.json", &result)?;
    Ok(result)
}
