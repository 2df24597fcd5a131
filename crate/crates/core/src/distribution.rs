//! Weight-initialization distributions, optionally scaled with fan-in.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, LogNormal, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Matrix, Topology, WeightStack};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Normal,
    LogNormal,
    Uniform,
    UniformPositive,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Normal => "normal",
            Family::LogNormal => "lognormal",
            Family::Uniform => "uniform",
            Family::UniformPositive => "uniform_positive",
        }
    }

    /// Which of the four scaling coefficients must stay positive.
    pub fn positive_coefficients(self) -> [bool; 4] {
        match self {
            // mean may be negative; std must not
            Family::Normal => [false, false, true, false],
            Family::LogNormal => [true, false, true, false],
            Family::Uniform => [true, false, false, false],
            Family::UniformPositive => [true, false, true, false],
        }
    }

    /// Coefficients reported for the optimized initializations.
    pub fn optimized_coefficients(self) -> [f64; 4] {
        match self {
            Family::Normal => [1.69, 0.79, 1.13, 0.49],
            Family::Uniform => [1.85, 0.39, 1.02, 0.54],
            Family::LogNormal => [1.29, 0.57, 0.85, 0.76],
            Family::UniformPositive => [0.70, 0.25, 0.80, 0.47],
        }
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "normal" | "gaussian" => Ok(Family::Normal),
            "lognormal" | "log_normal" => Ok(Family::LogNormal),
            "uniform" => Ok(Family::Uniform),
            "uniform_positive" | "uniform-positive" | "uniformpositive" => {
                Ok(Family::UniformPositive)
            }
            other => Err(Error::Config(format!("unknown distribution family {other:?}"))),
        }
    }
}

/// How a family's parameters are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Params {
    /// Fixed parameters: `(mean, std)` for normal/lognormal, `(low, high)` for the
    /// uniform families.
    Raw { a: f64, b: f64 },
    /// Fan-in scaled coefficients `c0..c3`:
    /// - normal: mean `c0 n^-c1`, std `c2 n^-c3`
    /// - lognormal: same, as mean/std of the lognormal variable itself
    /// - uniform: half-width `v0 = c0 n^-c1`, center `v1 = c2 n^-c3`, `U(v1 - v0, v1 + v0)`
    /// - uniform_positive: `U(v0, v0 + v1)`
    Scaled { coeffs: [f64; 4] },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    pub family: Family,
    pub params: Params,
}

/// A concrete distribution for a given fan-in.
#[derive(Debug, Clone, Copy)]
pub enum Sampler {
    Constant(f64),
    Normal(Normal<f64>),
    LogNormal(LogNormal<f64>),
    Uniform(Uniform<f64>),
}

impl Sampler {
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Sampler::Constant(v) => *v,
            Sampler::Normal(d) => d.sample(rng),
            Sampler::LogNormal(d) => d.sample(rng),
            Sampler::Uniform(d) => d.sample(rng),
        }
    }
}

impl DistributionSpec {
    pub fn raw(family: Family, a: f64, b: f64) -> Result<Self> {
        let spec = Self {
            family,
            params: Params::Raw { a, b },
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn normal(mean: f64, std: f64) -> Result<Self> {
        Self::raw(Family::Normal, mean, std)
    }

    pub fn scaled(family: Family, coeffs: [f64; 4]) -> Result<Self> {
        let spec = Self {
            family,
            params: Params::Scaled { coeffs },
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn optimized(family: Family) -> Self {
        Self::scaled(family, family.optimized_coefficients()).expect("reported optima are valid")
    }

    pub fn validate(&self) -> Result<()> {
        // any fan-in must give a valid sampler
        self.sampler(1).map(|_| ())
    }

    /// The `(p0, p1)` pair at a given fan-in: `(mean, std)` or `(v0, v1)` or `(low, high)`.
    fn resolved(&self, fan_in: usize) -> (f64, f64) {
        match self.params {
            Params::Raw { a, b } => (a, b),
            Params::Scaled { coeffs: c } => {
                let n = fan_in.max(1) as f64;
                (c[0] * n.powf(-c[1]), c[2] * n.powf(-c[3]))
            }
        }
    }

    pub fn sampler(&self, fan_in: usize) -> Result<Sampler> {
        let (p0, p1) = self.resolved(fan_in);
        let bad = |what: &str| {
            Err(Error::Config(format!(
                "{} distribution has invalid {what} at fan-in {fan_in}: ({p0}, {p1})",
                self.family.name()
            )))
        };
        if !p0.is_finite() || !p1.is_finite() {
            return bad("parameters");
        }
        let scaled = matches!(self.params, Params::Scaled { .. });
        match self.family {
            Family::Normal => {
                if p1 < 0.0 {
                    return bad("std");
                }
                if p1 == 0.0 {
                    return Ok(Sampler::Constant(p0));
                }
                Ok(Sampler::Normal(Normal::new(p0, p1).unwrap()))
            }
            Family::LogNormal => {
                if p0 <= 0.0 {
                    return bad("mean");
                }
                if p1 < 0.0 {
                    return bad("std");
                }
                if p1 == 0.0 {
                    return Ok(Sampler::Constant(p0));
                }
                let s2 = (1.0 + (p1 / p0).powi(2)).ln();
                let mu = p0.ln() - 0.5 * s2;
                Ok(Sampler::LogNormal(LogNormal::new(mu, s2.sqrt()).unwrap()))
            }
            Family::Uniform | Family::UniformPositive => {
                let (low, high) = match (self.family, scaled) {
                    (Family::Uniform, true) => (p1 - p0, p1 + p0),
                    (Family::UniformPositive, true) => (p0, p0 + p1),
                    _ => (p0, p1),
                };
                if self.family == Family::UniformPositive && low < 0.0 {
                    return bad("lower bound");
                }
                if high < low {
                    return bad("bounds");
                }
                if high == low {
                    return Ok(Sampler::Constant(low));
                }
                Ok(Sampler::Uniform(Uniform::new(low, high).unwrap()))
            }
        }
    }

    /// Coefficient vector (scaled) or `[a, b]` (raw).
    pub fn parameter_vector(&self) -> Vec<f64> {
        match self.params {
            Params::Raw { a, b } => vec![a, b],
            Params::Scaled { coeffs } => coeffs.to_vec(),
        }
    }

    /// Rebuilds a spec of the same family and kind from a parameter vector.
    pub fn with_parameter_vector(&self, v: &[f64]) -> Result<Self> {
        let params = match (self.params, v) {
            (Params::Raw { .. }, [a, b]) => Params::Raw { a: *a, b: *b },
            (Params::Scaled { .. }, [a, b, c, d]) => Params::Scaled {
                coeffs: [*a, *b, *c, *d],
            },
            _ => {
                return Err(Error::Config(format!(
                    "parameter vector of length {} does not fit {self}",
                    v.len()
                )))
            }
        };
        let spec = Self {
            family: self.family,
            params,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Which entries of [`Self::parameter_vector`] must stay positive.
    pub fn positive_mask(&self) -> Vec<bool> {
        match self.params {
            Params::Raw { .. } => match self.family {
                Family::Normal => vec![false, true],
                Family::LogNormal => vec![true, true],
                Family::Uniform => vec![false, false],
                Family::UniformPositive => vec![true, true],
            },
            Params::Scaled { .. } => self.family.positive_coefficients().to_vec(),
        }
    }

    /// Samples a full weight stack, each layer with its own fan-in.
    pub fn init_weights<R: Rng + ?Sized>(
        &self,
        topology: &Topology,
        rng: &mut R,
    ) -> Result<WeightStack> {
        let sizes = topology.sizes();
        let mut matrices = Vec::with_capacity(sizes.len() - 1);
        for pair in sizes.windows(2) {
            let (fan_in, n_out) = (pair[0], pair[1]);
            let sampler = self.sampler(fan_in)?;
            let data = (0..fan_in * n_out).map(|_| sampler.sample(rng)).collect();
            matrices.push(Matrix::from_vec(n_out, fan_in, data)?);
        }
        WeightStack::new(matrices)
    }
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.params {
            Params::Raw { a, b } => write!(f, "{}:{a},{b}", self.family.name()),
            Params::Scaled { coeffs: c } => write!(
                f,
                "{}:scaled:{},{},{},{}",
                self.family.name(),
                c[0],
                c[1],
                c[2],
                c[3]
            ),
        }
    }
}

impl FromStr for DistributionSpec {
    type Err = Error;

    /// Accepts `family:optimized`, `family:a,b` and `family:scaled:c0,c1,c2,c3`.
    fn from_str(s: &str) -> Result<Self> {
        let (family, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("expected family:params, got {s:?}")))?;
        let family: Family = family.parse()?;
        let numbers = |p: &str| -> Result<Vec<f64>> {
            p.split(',')
                .map(|x| {
                    x.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Config(format!("bad number {x:?} in {s:?}: {e}")))
                })
                .collect()
        };
        if rest.trim() == "optimized" {
            return Ok(Self::optimized(family));
        }
        if let Some(c) = rest.strip_prefix("scaled:") {
            let v = numbers(c)?;
            let coeffs: [f64; 4] = v.try_into().map_err(|_| {
                Error::Config(format!("scaled spec needs four coefficients: {s:?}"))
            })?;
            return Self::scaled(family, coeffs);
        }
        match numbers(rest)?.as_slice() {
            [a, b] => Self::raw(family, *a, *b),
            _ => Err(Error::Config(format!("raw spec needs two numbers: {s:?}"))),
        }
    }
}
