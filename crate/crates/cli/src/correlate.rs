use anyhow::Result;
use causal_pieces::dataset::yinyang_split;
use causal_pieces::rng::{derive_seed, derived_rng};
use causal_pieces::stats::{median, pearson};
use causal_pieces::{count_on_inputs, DistributionSpec, Topology, TrainConfig, Trainer};
use clap::Args;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{out_dir, parse_flag, usage, Global};

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CorrelateArgs {
    #[arg(long, default_value_t = 30)]
    pub runs: usize,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 100)]
    pub batch_size: usize,
    #[arg(long, default_value = "4,30,3")]
    pub topology: String,
    #[arg(long, default_value_t = -0.2, allow_negative_numbers = true)]
    pub mu_min: f64,
    #[arg(long, default_value_t = 0.8, allow_negative_numbers = true)]
    pub mu_max: f64,
    #[arg(long, default_value_t = 0.0)]
    pub sigma_min: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma_max: f64,
    #[arg(long, default_value_t = 5000)]
    pub train_count: usize,
    #[arg(long, default_value_t = 1000)]
    pub test_count: usize,
    /// Training weight bump; 0 keeps plain Adam
    #[arg(long, default_value_t = 0.0)]
    pub weight_bump: f64,
}

impl Default for CorrelateArgs {
    fn default() -> Self {
        Self {
            runs: 30,
            epochs: 200,
            learning_rate: 1e-4,
            batch_size: 100,
            topology: "4,30,3".into(),
            mu_min: -0.2,
            mu_max: 0.8,
            sigma_min: 0.0,
            sigma_max: 1.0,
            train_count: 5000,
            test_count: 1000,
            weight_bump: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: usize,
    pub mu: f64,
    pub sigma: f64,
    /// Output-layer pieces on the training set at initialization.
    pub pieces_before: usize,
    /// Output-layer pieces of the final model.
    pub pieces_after: usize,
    pub best_accuracy: f64,
    pub best_epoch: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub runs: Vec<RunRecord>,
    /// Pearson r of `ln(1 + pieces_before)` against best accuracy.
    pub r_log_pieces: Option<f64>,
    /// Pearson r of `pieces_before` against best accuracy.
    pub r_pieces: Option<f64>,
    /// Median of `pieces_after - pieces_before` over the quarter of runs with
    /// the most initial pieces.
    pub top_quartile_median_change: Option<f64>,
    /// Fewer than three runs, zero variance, or a perfect fit.
    pub degenerate: bool,
}

impl CorrelationReport {
    pub fn from_runs(runs: Vec<RunRecord>) -> Self {
        let acc: Vec<f64> = runs.iter().map(|r| r.best_accuracy).collect();
        let pieces: Vec<f64> = runs.iter().map(|r| r.pieces_before as f64).collect();
        let log_pieces: Vec<f64> = pieces.iter().map(|p| p.ln_1p()).collect();
        let r_log_pieces = pearson(&log_pieces, &acc);
        let r_pieces = pearson(&pieces, &acc);
        let degenerate =
            runs.len() < 3 || r_log_pieces.map_or(true, |r| (r.abs() - 1.0).abs() < 1e-12);
        let mut by_pieces: Vec<&RunRecord> = runs.iter().collect();
        by_pieces.sort_by_key(|r| std::cmp::Reverse(r.pieces_before));
        let top: Vec<f64> = by_pieces[..runs.len().div_ceil(4)]
            .iter()
            .map(|r| r.pieces_after as f64 - r.pieces_before as f64)
            .collect();
        Self {
            top_quartile_median_change: (!top.is_empty()).then(|| median(&top)),
            runs,
            r_log_pieces,
            r_pieces,
            degenerate,
        }
    }

    pub fn summary(&self) -> serde_json::Value {
        serde_json::json!({
            "runs": self.runs.len(),
            "r_log_pieces": self.r_log_pieces,
            "r_pieces": self.r_pieces,
            "top_quartile_median_change": self.top_quartile_median_change,
            "degenerate": self.degenerate,
        })
    }
}

/// One correlation run: samples a normal init, counts pieces, trains.
pub fn correlation_run(
    args: &CorrelateArgs,
    topology: &Topology,
    data: &(Vec<causal_pieces::Sample>, Vec<causal_pieces::Sample>),
    seed: u64,
    run: usize,
) -> Result<RunRecord> {
    let mut rng = derived_rng(seed, &[2, run as u64]);
    let mu = rng.random_range(args.mu_min..args.mu_max);
    let sigma = rng.random_range(args.sigma_min..args.sigma_max);
    let init = DistributionSpec::normal(mu, sigma)?;
    let config = TrainConfig {
        learning_rate: args.learning_rate,
        batch_size: args.batch_size,
        epochs: args.epochs,
        seed: derive_seed(seed, &[3, run as u64]),
        weight_bump: args.weight_bump,
        ..Default::default()
    };
    let params = config.params;
    let (train, test) = data;
    let inputs: Vec<Vec<f64>> = train.iter().map(|s| s.features.clone()).collect();
    let mut trainer = Trainer::new(train, test, topology, &init, config)?;
    let before = count_on_inputs(&params, &trainer.model().weights, &inputs, false)?;
    while !trainer.is_done() {
        trainer.run_epoch()?;
    }
    let result = trainer.finish();
    let after = count_on_inputs(&params, &result.final_model.weights, &inputs, false)?;
    Ok(RunRecord {
        run,
        mu,
        sigma,
        pieces_before: before.counts(false).output(),
        pieces_after: after.counts(false).output(),
        best_accuracy: result.metrics.best_test_accuracy.unwrap_or(f64::NAN),
        best_epoch: result.metrics.best_epoch,
    })
}

/// Runs every correlation run without writing files.
pub fn correlate(args: &CorrelateArgs, seed: u64) -> Result<CorrelationReport> {
    if args.runs < 2 {
        return Err(usage("--runs must be at least 2"));
    }
    if !(args.mu_min < args.mu_max && 0.0 <= args.sigma_min && args.sigma_min < args.sigma_max) {
        return Err(usage("need mu_min < mu_max and 0 <= sigma_min < sigma_max"));
    }
    let topology: Topology = parse_flag("topology", &args.topology)?;
    let data = yinyang_split(seed, args.train_count, args.test_count, true)?;
    let runs = (0..args.runs)
        .into_par_iter()
        .map(|r| correlation_run(args, &topology, &data, seed, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(CorrelationReport::from_runs(runs))
}

pub fn run(args: &CorrelateArgs, global: &Global) -> Result<CorrelationReport> {
    let report = correlate(args, global.seed)?;
    let dir = out_dir("correlate", args, global)?;
    let mut w = csv::Writer::from_writer(dir.csv_file("correlate.csv")?);
    w.write_record([
        "run",
        "mu",
        "sigma",
        "pieces_before",
        "pieces_after",
        "best_accuracy",
        "best_epoch",
    ])?;
    for r in &report.runs {
        w.write_record([
            r.run.to_string(),
            r.mu.to_string(),
            r.sigma.to_string(),
            r.pieces_before.to_string(),
            r.pieces_after.to_string(),
            r.best_accuracy.to_string(),
            r.best_epoch.map_or(String::new(), |e| e.to_string()),
        ])?;
    }
    w.flush()?;
    dir.json("correlate.json", &report)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(pieces: usize, acc: f64) -> RunRecord {
        RunRecord {
            run: 0,
            mu: 0.0,
            sigma: 0.0,
            pieces_before: pieces,
            pieces_after: pieces,
            best_accuracy: acc,
            best_epoch: None,
        }
    }

    #[test]
    fn two_runs_are_degenerate() {
        let r = CorrelationReport::from_runs(vec![record(10, 0.5), record(100, 0.9)]);
        assert!(r.degenerate);
        assert!((r.r_log_pieces.unwrap().abs() - 1.0).abs() < 1e-12);
        let same = CorrelationReport::from_runs(vec![record(10, 0.5), record(10, 0.5)]);
        assert!(same.degenerate && same.r_log_pieces.is_none());
    }

    #[test]
    fn correlation_in_range() {
        let r = CorrelationReport::from_runs(vec![
            record(1, 0.4),
            record(50, 0.7),
            record(3000, 0.9),
            record(200, 0.6),
        ]);
        let v = r.r_log_pieces.unwrap();
        assert!((-1.0..=1.0).contains(&v) && v > 0.5 && !r.degenerate);
        assert_eq!(r.top_quartile_median_change, Some(0.0));
    }
}
