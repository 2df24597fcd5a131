//! Dataset selection shared by the subcommands.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use causal_pieces::dataset::{load_idx, yinyang_grid, yinyang_split, GridConfig, PixelEncoding};
use causal_pieces::Sample;
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::{parse_flag, usage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    /// Random Yin Yang points, split into train and test sets
    Yinyang,
    /// Regular lattice over the Yin Yang disk (no labels used)
    Grid,
    /// MNIST IDX files
    Mnist,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DataArgs {
    #[arg(long, value_enum, default_value = "yinyang")]
    pub dataset: DatasetKind,
    #[arg(long, default_value_t = 5000)]
    pub train_count: usize,
    #[arg(long, default_value_t = 1000)]
    pub test_count: usize,
    /// Lattice points per axis for `--dataset grid`
    #[arg(long, default_value_t = 400)]
    pub grid: usize,
    /// Directory holding the four MNIST IDX files
    #[arg(long, default_value = "data/mnist")]
    pub mnist_dir: PathBuf,
    /// Pixel to spike-time map: `direct` (t = v/255) or `inverted`
    #[arg(long, default_value = "direct")]
    pub encoding: String,
}

impl Default for DataArgs {
    fn default() -> Self {
        Self {
            dataset: DatasetKind::Yinyang,
            train_count: 5000,
            test_count: 1000,
            grid: 400,
            mnist_dir: PathBuf::from("data/mnist"),
            encoding: "direct".into(),
        }
    }
}

fn find(dir: &Path, names: &[&str]) -> Result<PathBuf> {
    names
        .iter()
        .map(|n| dir.join(n))
        .find(|p| p.exists())
        .with_context(|| format!("none of {names:?} found in {}", dir.display()))
}

/// Loads the MNIST training and test sets, keeping the first `train` and
/// `test` samples of each.
pub fn load_mnist(
    dir: &Path,
    encoding: PixelEncoding,
    train: usize,
    test: usize,
) -> Result<(Vec<Sample>, Vec<Sample>)> {
    let mut tr = load_idx(
        &find(dir, &["train-images-idx3-ubyte", "train-images.idx3-ubyte"])?,
        &find(dir, &["train-labels-idx1-ubyte", "train-labels.idx1-ubyte"])?,
        encoding,
    )?;
    let mut te = load_idx(
        &find(dir, &["t10k-images-idx3-ubyte", "t10k-images.idx3-ubyte"])?,
        &find(dir, &["t10k-labels-idx1-ubyte", "t10k-labels.idx1-ubyte"])?,
        encoding,
    )?;
    tr.truncate(train);
    te.truncate(test);
    Ok((tr, te))
}

impl DataArgs {
    /// Training and test samples. The grid has no test part.
    pub fn load(&self, seed: u64) -> Result<(Vec<Sample>, Vec<Sample>)> {
        match self.dataset {
            DatasetKind::Yinyang => Ok(yinyang_split(seed, self.train_count, self.test_count, true)?),
            DatasetKind::Grid => {
                let grid = yinyang_grid(&GridConfig {
                    resolution: self.grid,
                })
                .map_err(|e| usage(e.to_string()))?;
                Ok((grid, Vec::new()))
            }
            DatasetKind::Mnist => {
                let enc: PixelEncoding = parse_flag("encoding", &self.encoding)?;
                load_mnist(&self.mnist_dir, enc, self.train_count, self.test_count)
            }
        }
    }
}
