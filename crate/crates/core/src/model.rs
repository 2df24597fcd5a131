//! Network parameters, topology and weight storage.

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};

/// Neuron constants shared by every layer of a network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    /// Synaptic time constant.
    pub tau_s: f64,
    /// Firing threshold.
    pub theta: f64,
    /// Finite stand-in for "never spikes".
    pub t_inf: f64,
    /// Minimum margin `sum(W) - theta` for a prefix to count as crossing.
    pub delta_min: f64,
}

impl NetworkParams {
    pub const DEFAULT_TAU_S: f64 = 0.5;
    pub const DEFAULT_THETA: f64 = 1.0;
    pub const DEFAULT_DELTA_MIN: f64 = 1e-9;

    /// Builds parameters with the sentinel at `1000 * tau_s`.
    pub fn new(tau_s: f64, theta: f64) -> Result<Self> {
        let params = Self {
            tau_s,
            theta,
            t_inf: 1000.0 * tau_s,
            delta_min: Self::DEFAULT_DELTA_MIN,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.tau_s.is_finite()
            && self.tau_s > 0.0
            && self.theta.is_finite()
            && self.theta > 0.0
            && self.delta_min.is_finite()
            && self.delta_min > 0.0
            && self.t_inf.is_finite()
            && self.t_inf > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid network parameters: {self:?}")))
        }
    }

    /// True if `t` denotes a missing spike.
    #[inline]
    pub fn is_silent(&self, t: f64) -> bool {
        !(t < self.t_inf)
    }
}

impl Default for NetworkParams {
    fn default() -> Self {
        Self::new(Self::DEFAULT_TAU_S, Self::DEFAULT_THETA).expect("default parameters are valid")
    }
}

/// Layer sizes `[N0, N1, ..., NL]`; `N0` is the number of inputs.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Topology(Vec<usize>);

impl Topology {
    pub fn new(layer_sizes: Vec<usize>) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::Config(format!(
                "topology needs at least an input and one layer, got {layer_sizes:?}"
            )));
        }
        if layer_sizes.iter().any(|&n| n == 0) {
            return Err(Error::Config(format!(
                "topology entries must be positive, got {layer_sizes:?}"
            )));
        }
        Ok(Self(layer_sizes))
    }

    pub fn sizes(&self) -> &[usize] {
        &self.0
    }

    pub fn inputs(&self) -> usize {
        self.0[0]
    }

    pub fn outputs(&self) -> usize {
        *self.0.last().unwrap()
    }

    /// Number of computed (non-input) layers.
    pub fn num_layers(&self) -> usize {
        self.0.len() - 1
    }

    /// Sizes of the computed layers, `[N1, ..., NL]`.
    pub fn layer_sizes(&self) -> &[usize] {
        &self.0[1..]
    }

    /// Fan-in of computed layer `layer` (0-based).
    pub fn fan_in(&self, layer: usize) -> usize {
        self.0[layer]
    }

    /// Topology without its last layer, used when that layer is a linear readout.
    pub fn without_last(&self) -> Result<Self> {
        Self::new(self.0[..self.0.len() - 1].to_vec())
    }
}

impl TryFrom<Vec<usize>> for Topology {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Topology> for Vec<usize> {
    fn from(t: Topology) -> Self {
        t.0
    }
}

impl std::str::FromStr for Topology {
    type Err = Error;

    /// Parses `"4,30,3"`.
    fn from_str(s: &str) -> Result<Self> {
        let sizes = s
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<usize>()
                    .map_err(|e| Error::Config(format!("bad topology entry {p:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(sizes)
    }
}

impl std::fmt::Display for Topology {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|n| n.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return dim_err("ragged matrix rows");
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return dim_err(format!(
                "matrix data has {} entries, expected {rows}x{cols}",
                data.len()
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }
}

/// Per-layer weight matrices; matrix `l` has shape `N_{l+1} x N_l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightStack {
    matrices: Vec<Matrix>,
}

impl WeightStack {
    pub fn new(matrices: Vec<Matrix>) -> Result<Self> {
        if matrices.is_empty() {
            return dim_err("weight stack is empty");
        }
        for (l, pair) in matrices.windows(2).enumerate() {
            if pair[1].cols() != pair[0].rows() {
                return dim_err(format!(
                    "layer {} expects {} inputs but layer {} has {} neurons",
                    l + 1,
                    pair[1].cols(),
                    l,
                    pair[0].rows()
                ));
            }
        }
        if matrices
            .iter()
            .any(|m| m.as_slice().iter().any(|w| !w.is_finite()))
        {
            return Err(Error::Input("weights must be finite".into()));
        }
        Ok(Self { matrices })
    }

    pub fn zeros(topology: &Topology) -> Self {
        let s = topology.sizes();
        Self {
            matrices: s.windows(2).map(|w| Matrix::zeros(w[1], w[0])).collect(),
        }
    }

    pub fn topology(&self) -> Topology {
        let mut sizes = vec![self.matrices[0].cols()];
        sizes.extend(self.matrices.iter().map(Matrix::rows));
        Topology::new(sizes).expect("weight stack shapes are validated")
    }

    pub fn check_topology(&self, topology: &Topology) -> Result<()> {
        if &self.topology() != topology {
            return dim_err(format!(
                "weights have topology {} but {} was expected",
                self.topology(),
                topology
            ));
        }
        Ok(())
    }

    pub fn num_layers(&self) -> usize {
        self.matrices.len()
    }

    pub fn layer(&self, l: usize) -> &Matrix {
        &self.matrices[l]
    }

    pub fn layer_mut(&mut self, l: usize) -> &mut Matrix {
        &mut self.matrices[l]
    }

    pub fn layers(&self) -> &[Matrix] {
        &self.matrices
    }

    pub fn layers_mut(&mut self) -> &mut [Matrix] {
        &mut self.matrices
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Copy) -> Self {
        Self {
            matrices: self.matrices.iter().map(|m| m.map(f)).collect(),
        }
    }

    pub fn num_weights(&self) -> usize {
        self.matrices.iter().map(|m| m.as_slice().len()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn topology_parsing() {
        let t: Topology = "4, 30,3".parse().unwrap();
        assert_eq!(t.sizes(), &[4, 30, 3]);
        assert_eq!(t.num_layers(), 2);
        assert_eq!(t.fan_in(1), 30);
        assert_eq!(t.to_string(), "4,30,3");
        assert!("4".parse::<Topology>().is_err());
        assert!("4,0,3".parse::<Topology>().is_err());
    }

    #[test]
    fn weight_stack_shape_checks() {
        let t = Topology::new(vec![2, 3, 1]).unwrap();
        let w = WeightStack::zeros(&t);
        assert_eq!(w.topology(), t);
        let bad = WeightStack::new(vec![Matrix::zeros(3, 2), Matrix::zeros(1, 2)]);
        assert!(matches!(bad, Err(Error::Dimension(_))));
        let nan = WeightStack::new(vec![Matrix::from_vec(1, 1, vec![f64::NAN]).unwrap()]);
        assert!(matches!(nan, Err(Error::Input(_))));
    }

    #[test]
    fn sentinel_default() {
        let p = NetworkParams::default();
        assert_eq!(p.t_inf, 500.0);
        assert!(p.is_silent(500.0));
        assert!(!p.is_silent(499.9));
        assert!(NetworkParams::new(0.0, 1.0).is_err());
    }
}
