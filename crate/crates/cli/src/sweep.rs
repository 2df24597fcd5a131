use anyhow::Result;
use causal_pieces::estimate::{grid_sweep, LinearRange, McMode, SweepPoint};
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::{out_dir, parse_flag, usage, Global};

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    /// Number of inputs of the neuron
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// Monte Carlo samples per k
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    /// Weight means as `start:stop:step` or a single value
    #[arg(long, default_value = "0:0.1:0.001")]
    pub mu: String,
    /// Weight standard deviations as `start:stop:step` or a single value
    #[arg(long, default_value = "0:0.1:0.001")]
    pub sigma: String,
    #[arg(long, default_value_t = 1.0)]
    pub theta: f64,
    /// `trajectory` (one walk per sample) or `independent` (fresh draws per k)
    #[arg(long, default_value = "trajectory")]
    pub mode: String,
    /// Also write every p_k to `pqk.csv`
    #[arg(long)]
    pub pqk: bool,
}

fn range(name: &str, text: &str) -> Result<Vec<f64>> {
    let r: LinearRange = parse_flag(name, text)?;
    if text.contains(':') && r.stop == r.start {
        return Err(usage(format!("--{name} {text:?} spans no interval")));
    }
    Ok(r.values())
}

pub fn run(args: &SweepArgs, global: &Global) -> Result<Vec<SweepPoint>> {
    let mus = range("mu", &args.mu)?;
    let sigmas = range("sigma", &args.sigma)?;
    let mode: McMode = parse_flag("mode", &args.mode)?;
    if args.n == 0 || args.samples == 0 {
        return Err(usage("--n and --samples must be positive"));
    }
    if let Some(bad) = sigmas.iter().find(|s| **s < 0.0) {
        return Err(usage(format!("negative standard deviation {bad}")));
    }
    let points = grid_sweep(&mus, &sigmas, args.n, args.samples, args.theta, global.seed, mode)?;

    let dir = out_dir("sweep", args, global)?;
    let mut w = csv::Writer::from_writer(dir.csv_file("sweep.csv")?);
    w.write_record(["mu", "sigma", "N", "eta_log2", "fraction", "fraction_stderr"])?;
    for p in &points {
        w.write_record([
            p.mu.to_string(),
            p.sigma.to_string(),
            args.n.to_string(),
            p.estimate.eta_log2.to_string(),
            p.estimate.fraction.to_string(),
            p.estimate.fraction_stderr.to_string(),
        ])?;
    }
    w.flush()?;
    if args.pqk {
        let mut w = csv::Writer::from_writer(dir.csv_file("pqk.csv")?);
        w.write_record(["mu", "sigma", "N", "k", "p_k", "stderr"])?;
        for p in &points {
            for k in 1..=args.n {
                w.write_record([
                    p.mu.to_string(),
                    p.sigma.to_string(),
                    args.n.to_string(),
                    k.to_string(),
                    p.profile.p_k(k).to_string(),
                    p.profile.stderr(k).to_string(),
                ])?;
            }
        }
        w.flush()?;
    }
    #[derive(Serialize)]
    struct Summary {
        n: usize,
        samples: usize,
        points: usize,
        mu_values: usize,
        sigma_values: usize,
    }
    dir.json(
        "sweep.json",
        &Summary {
            n: args.n,
            samples: args.samples,
            points: points.len(),
            mu_values: mus.len(),
            sigma_values: sigmas.len(),
        },
    )?;
    Ok(points)
}
