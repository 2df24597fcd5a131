//! Labelled input spike patterns.

pub mod idx;
pub mod yinyang;

use serde::{Deserialize, Serialize};

pub use idx::{load_idx, PixelEncoding};
pub use yinyang::{generate_yinyang, yinyang_grid, yinyang_split, GridConfig, YinYangConfig};

/// Input spike times with a class label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: usize,
}

/// Feature vectors of a sample list.
pub fn features(samples: &[Sample]) -> Vec<Vec<f64>> {
    samples.iter().map(|s| s.features.clone()).collect()
}
