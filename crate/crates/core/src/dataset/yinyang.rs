//! The Yin Yang classification task: a disk split into two interlocking
//! halves with a small dot of the opposite class in each.

use std::io::{Read, Write};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::Sample;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};

pub const NUM_CLASSES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum YinYangClass {
    Yin = 0,
    Yang = 1,
    Dot = 2,
}

impl YinYangClass {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(Self::Yin),
            1 => Some(Self::Yang),
            2 => Some(Self::Dot),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YinYangConfig {
    pub r_big: f64,
    pub r_small: f64,
    pub count: usize,
    pub seed: u64,
    pub balanced: bool,
}

impl Default for YinYangConfig {
    fn default() -> Self {
        Self {
            r_big: 0.5,
            r_small: 0.1,
            count: 5000,
            seed: 0,
            balanced: true,
        }
    }
}

impl YinYangConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_small > 0.0 && self.r_small < self.r_big && self.r_big <= 0.5) {
            return Err(Error::Config(format!(
                "need 0 < r_small < r_big <= 0.5, got {} and {}",
                self.r_small, self.r_big
            )));
        }
        Ok(())
    }

    /// Class of the point `(x, y)`, assumed to lie inside the disk.
    pub fn classify(&self, x: f64, y: f64) -> YinYangClass {
        let half = self.r_big / 2.0;
        let d_left = (x - (0.5 - half)).hypot(y - 0.5);
        let d_right = (x - (0.5 + half)).hypot(y - 0.5);
        if d_left.min(d_right) <= self.r_small {
            YinYangClass::Dot
        } else if (y >= 0.5 && d_right > half) || (y < 0.5 && d_left <= half) {
            YinYangClass::Yin
        } else {
            YinYangClass::Yang
        }
    }

    pub fn in_disk(&self, x: f64, y: f64) -> bool {
        (x - 0.5).hypot(y - 0.5) <= self.r_big
    }
}

/// Classifies with the default geometry.
pub fn classify(x: f64, y: f64) -> YinYangClass {
    YinYangConfig::default().classify(x, y)
}

/// Mirrored encoding `(x, y, 1 - x, 1 - y)` used directly as spike times.
pub fn encode(x: f64, y: f64) -> Vec<f64> {
    vec![x, y, 1.0 - x, 1.0 - y]
}

/// Draws points uniformly in the disk. In balanced mode sample `i` is
/// rejection-sampled until it falls in class `i mod 3`.
pub fn generate_yinyang(config: &YinYangConfig) -> Result<Vec<Sample>> {
    config.validate()?;
    let mut rng = rng_from_seed(config.seed);
    let mut out = Vec::with_capacity(config.count);
    for i in 0..config.count {
        let target = config.balanced.then_some(i % NUM_CLASSES);
        loop {
            let x: f64 = rng.random();
            let y: f64 = rng.random();
            if !config.in_disk(x, y) {
                continue;
            }
            let class = config.classify(x, y).index();
            if target.is_some_and(|t| t != class) {
                continue;
            }
            out.push(Sample {
                features: encode(x, y),
                label: class,
            });
            break;
        }
    }
    Ok(out)
}

/// Training and test sets drawn from independent streams of one seed.
pub fn yinyang_split(
    seed: u64,
    train_count: usize,
    test_count: usize,
    balanced: bool,
) -> Result<(Vec<Sample>, Vec<Sample>)> {
    let base = YinYangConfig {
        balanced,
        ..Default::default()
    };
    let train = generate_yinyang(&YinYangConfig {
        count: train_count,
        seed: derive_seed(seed, &[0]),
        ..base.clone()
    })?;
    let test = generate_yinyang(&YinYangConfig {
        count: test_count,
        seed: derive_seed(seed, &[1]),
        ..base
    })?;
    Ok((train, test))
}

/// Lattice over `[0, 1]^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridConfig {
    pub resolution: usize,
}

/// Every lattice point with spacing `1 / (resolution - 1)` strictly inside
/// the disk, `x` outer and `y` inner.
pub fn yinyang_grid(grid: &GridConfig) -> Result<Vec<Sample>> {
    if grid.resolution < 2 {
        return Err(Error::Config(format!(
            "grid resolution must be at least 2, got {}",
            grid.resolution
        )));
    }
    let cfg = YinYangConfig::default();
    let step = 1.0 / (grid.resolution - 1) as f64;
    let mut out = Vec::new();
    for i in 0..grid.resolution {
        let x = i as f64 * step;
        for j in 0..grid.resolution {
            let y = j as f64 * step;
            if (x - 0.5).powi(2) + (y - 0.5).powi(2) < cfg.r_big * cfg.r_big {
                out.push(Sample {
                    features: encode(x, y),
                    label: cfg.classify(x, y).index(),
                });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    x: f64,
    y: f64,
    label: usize,
}

/// Writes samples as `x,y,label`.
pub fn write_yinyang_csv<W: Write>(samples: &[Sample], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for s in samples {
        if s.features.len() != 4 {
            return Err(Error::Dimension("yin yang samples have 4 features".into()));
        }
        w.serialize(CsvRow {
            x: s.features[0],
            y: s.features[1],
            label: s.label,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_yinyang_csv<R: Read>(reader: R) -> Result<Vec<Sample>> {
    let mut r = csv::Reader::from_reader(reader);
    r.deserialize::<CsvRow>()
        .map(|row| {
            let row = row?;
            if row.label >= NUM_CLASSES {
                return Err(Error::Input(format!("label {} out of range", row.label)));
            }
            Ok(Sample {
                features: encode(row.x, row.y),
                label: row.label,
            })
        })
        .collect()
}
