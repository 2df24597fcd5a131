//! Piece-count estimates for single neurons and their deep-network recursion.
//!
//! A size-`k` input subset can be a causal set iff its weights sum to at least
//! the threshold, so the expected number of pieces of an `N`-input neuron is
//! `eta = sum_k C(N, k) p_k` with `p_k = P(W_1 + .. + W_k >= theta)`. The
//! partial sums form a random walk, which gives a distribution-free lower
//! bound for symmetric weights.

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;
use statrs::function::gamma::ln_gamma;

use crate::distribution::DistributionSpec;
use crate::error::{Error, Result};
use crate::model::{NetworkParams, Topology};
use crate::rng::derived_rng;

/// Largest `N` for which binomial coefficients are evaluated exactly.
pub const EXACT_BINOMIAL_MAX: usize = 60;

/// Threshold-crossing probabilities `p_1..p_N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PqkProfile {
    /// `p[k - 1]` is `p_k`.
    pub p: Vec<f64>,
    /// Number of crossing draws per `k`.
    pub hits: Vec<u64>,
    /// Number of draws per `k`; zero when `p` was given exactly.
    pub trials: Vec<u64>,
}

impl PqkProfile {
    pub fn from_counts(hits: Vec<u64>, trials: Vec<u64>) -> Result<Self> {
        if hits.len() != trials.len() || hits.is_empty() {
            return Err(Error::Input("hits and trials must be non-empty and equal length".into()));
        }
        if hits.iter().zip(&trials).any(|(h, t)| h > t || *t == 0) {
            return Err(Error::Input("hits must not exceed positive trial counts".into()));
        }
        let p = hits
            .iter()
            .zip(&trials)
            .map(|(&h, &t)| h as f64 / t as f64)
            .collect();
        Ok(Self { p, hits, trials })
    }

    /// Profile with known probabilities and no sampling error.
    pub fn from_probabilities(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() || p.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::Input(format!("probabilities must lie in [0, 1]: {p:?}")));
        }
        let n = p.len();
        Ok(Self {
            p,
            hits: vec![0; n],
            trials: vec![0; n],
        })
    }

    pub fn n(&self) -> usize {
        self.p.len()
    }

    /// `p_k` for `k` in `1..=N`.
    pub fn p_k(&self, k: usize) -> f64 {
        self.p[k - 1]
    }

    /// Monte Carlo standard error `sqrt(p (1 - p) / trials)` of `p_k`.
    pub fn stderr(&self, k: usize) -> f64 {
        let t = self.trials[k - 1];
        if t == 0 {
            return 0.0;
        }
        let p = self.p[k - 1];
        (p * (1.0 - p) / t as f64).sqrt()
    }
}

/// How Monte Carlo weight vectors are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McMode {
    /// Fresh weight vectors of length `k` for every `k`.
    #[default]
    Independent,
    /// One walk of length `N` per sample, read off at every step. Same
    /// marginal estimator per `k`, `N` times cheaper, correlated across `k`.
    Trajectory,
}

impl std::str::FromStr for McMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "independent" => Ok(Self::Independent),
            "trajectory" => Ok(Self::Trajectory),
            _ => Err(Error::Config(format!("unknown sampling mode {s:?}"))),
        }
    }
}

const TRAJECTORY_CHUNK: usize = 1024;
const TRAJECTORY_TAG: u64 = 0x7472_616a;

/// Monte Carlo estimate of `p_1..p_N` for weights drawn from `spec` with
/// fan-in `n`, using fresh draws for every `k`.
pub fn monte_carlo_pqk(
    spec: &DistributionSpec,
    n: usize,
    num_samples: usize,
    theta: f64,
    seed: u64,
) -> Result<PqkProfile> {
    monte_carlo_pqk_with(spec, n, num_samples, theta, seed, McMode::Independent)
}

pub fn monte_carlo_pqk_with(
    spec: &DistributionSpec,
    n: usize,
    num_samples: usize,
    theta: f64,
    seed: u64,
    mode: McMode,
) -> Result<PqkProfile> {
    if n == 0 || num_samples == 0 {
        return Err(Error::Config(format!(
            "need N >= 1 and at least one sample, got N={n}, samples={num_samples}"
        )));
    }
    if !theta.is_finite() {
        return Err(Error::Config(format!("threshold must be finite, got {theta}")));
    }
    let sampler = spec.sampler(n)?;
    let hits: Vec<u64> = match mode {
        McMode::Independent => (1..=n)
            .into_par_iter()
            .map(|k| {
                let mut rng = derived_rng(seed, &[k as u64]);
                let mut hits = 0;
                for _ in 0..num_samples {
                    let s: f64 = (0..k).map(|_| sampler.sample(&mut rng)).sum();
                    hits += u64::from(s >= theta);
                }
                hits
            })
            .collect(),
        McMode::Trajectory => {
            let chunks = num_samples.div_ceil(TRAJECTORY_CHUNK);
            let partial: Vec<Vec<u64>> = (0..chunks)
                .into_par_iter()
                .map(|c| {
                    let mut rng = derived_rng(seed, &[TRAJECTORY_TAG, c as u64]);
                    let len = TRAJECTORY_CHUNK.min(num_samples - c * TRAJECTORY_CHUNK);
                    let mut hits = vec![0u64; n];
                    for _ in 0..len {
                        let mut s = 0.0;
                        for h in hits.iter_mut() {
                            s += sampler.sample(&mut rng);
                            *h += u64::from(s >= theta);
                        }
                    }
                    hits
                })
                .collect();
            let mut hits = vec![0u64; n];
            for p in partial {
                for (a, b) in hits.iter_mut().zip(p) {
                    *a += b;
                }
            }
            hits
        }
    };
    PqkProfile::from_counts(hits, vec![num_samples as u64; n])
}

/// Estimates `p_k` for a fixed weight vector by sampling size-`k` subsets
/// uniformly without replacement.
pub fn pqk_from_weight_vector(
    weights: &[f64],
    num_samples: usize,
    theta: f64,
    seed: u64,
) -> Result<PqkProfile> {
    let n = weights.len();
    if n == 0 || num_samples == 0 {
        return Err(Error::Input("need a non-empty weight vector and samples".into()));
    }
    let hits: Vec<u64> = (1..=n)
        .into_par_iter()
        .map(|k| {
            let mut rng = derived_rng(seed, &[k as u64]);
            let mut hits = 0;
            for _ in 0..num_samples {
                let mut idx: Vec<usize> = index::sample(&mut rng, n, k).into_vec();
                idx.sort_unstable();
                let s: f64 = idx.iter().map(|&j| weights[j]).sum();
                hits += u64::from(s >= theta);
            }
            hits
        })
        .collect();
    PqkProfile::from_counts(hits, vec![num_samples as u64; n])
}

/// Largest vector length accepted by [`pqk_exhaustive`].
pub const EXHAUSTIVE_MAX: usize = 24;

/// Exact `p_k` for a fixed weight vector by enumerating every subset.
/// Subset sums are accumulated in ascending index order.
pub fn pqk_exhaustive(weights: &[f64], theta: f64) -> Result<PqkProfile> {
    let n = weights.len();
    if n == 0 || n > EXHAUSTIVE_MAX {
        return Err(Error::Input(format!(
            "exhaustive enumeration needs 1..={EXHAUSTIVE_MAX} weights, got {n}"
        )));
    }
    let mut sums = vec![0.0f64; 1 << n];
    let mut hits = vec![0u64; n];
    for mask in 1usize..(1 << n) {
        let top = usize::BITS as usize - 1 - mask.leading_zeros() as usize;
        let s = sums[mask & !(1 << top)] + weights[top];
        sums[mask] = s;
        if s >= theta {
            hits[mask.count_ones() as usize - 1] += 1;
        }
    }
    let trials = (1..=n).map(|k| binomial_u128(n, k) as u64).collect();
    PqkProfile::from_counts(hits, trials)
}

/// `C(n, k)` in exact integer arithmetic (valid for `n <= 120`).
pub fn binomial_u128(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
    }
    c
}

/// `ln C(n, k)`: exact below the cutoff, log-gamma above.
pub fn ln_binomial_coeff(n: usize, k: usize) -> f64 {
    if n <= EXACT_BINOMIAL_MAX {
        (binomial_u128(n, k) as f64).ln()
    } else {
        ln_binomial(n as u64, k as u64)
    }
}

/// `ln(2^n - 1)`.
pub fn ln_subsets(n: usize) -> f64 {
    n as f64 * std::f64::consts::LN_2 + (-(0.5f64).powi(n as i32)).ln_1p()
}

fn log_sum_exp(terms: impl IntoIterator<Item = f64>) -> f64 {
    let terms: Vec<f64> = terms.into_iter().collect();
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// Estimated piece count of one neuron.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    /// `sum_k C(N, k) p_k`; infinite if it overflows `f64`.
    pub eta: f64,
    pub eta_log2: f64,
    /// `eta / (2^N - 1)`.
    pub fraction: f64,
    /// Standard error of `fraction`, propagated linearly from the `p_k`.
    pub fraction_stderr: f64,
}

/// Evaluates `eta = sum_k C(N, k) p_k`.
pub fn eta_from_pqk(profile: &PqkProfile) -> EstimateResult {
    let n = profile.n();
    let ln_total = ln_subsets(n);
    if n <= EXACT_BINOMIAL_MAX {
        let total = ((1u128 << n) - 1) as f64;
        let mut eta = 0.0;
        let mut se = 0.0;
        for k in 1..=n {
            let c = binomial_u128(n, k) as f64;
            let (h, t) = (profile.hits[k - 1], profile.trials[k - 1]);
            eta += if t > 0 {
                // multiply first so that exhaustive profiles give integers back
                c * h as f64 / t as f64
            } else {
                c * profile.p[k - 1]
            };
            se += c * profile.stderr(k);
        }
        return EstimateResult {
            eta,
            eta_log2: eta.log2(),
            fraction: (eta / total).min(1.0),
            fraction_stderr: se / total,
        };
    }
    let ln_eta = log_sum_exp(
        (1..=n)
            .filter(|&k| profile.p_k(k) > 0.0)
            .map(|k| ln_binomial_coeff(n, k) + profile.p_k(k).ln()),
    );
    let ln_se = log_sum_exp(
        (1..=n)
            .filter(|&k| profile.stderr(k) > 0.0)
            .map(|k| ln_binomial_coeff(n, k) + profile.stderr(k).ln()),
    );
    EstimateResult {
        eta: ln_eta.exp(),
        eta_log2: ln_eta / std::f64::consts::LN_2,
        fraction: (ln_eta - ln_total).exp().min(1.0),
        fraction_stderr: (ln_se - ln_total).exp(),
    }
}

/// Lower bound on the fraction of subsets that are causal sets for symmetric
/// weights in the small-threshold limit: `1 / (2 N sqrt(pi (N - 2/3)))`.
pub fn sparre_andersen_bound(n: usize) -> f64 {
    assert!(n >= 1, "N must be at least 1");
    let n = n as f64;
    1.0 / (2.0 * n * (std::f64::consts::PI * (n - 2.0 / 3.0)).sqrt())
}

/// `log2` of the bound on the piece count itself.
pub fn sparre_andersen_bound_log2(n: usize) -> f64 {
    (ln_subsets(n) + sparre_andersen_bound(n).ln()) / std::f64::consts::LN_2
}

/// First-passage probability at step `step >= 1` of a symmetric walk:
/// `C_n / 2^(2n+1)` with `n = step - 1` and `C_n` the Catalan number.
pub fn p_fpt(step: usize) -> f64 {
    assert!(step >= 1, "steps start at 1");
    let n = (step - 1) as f64;
    let ln_catalan = ln_gamma(2.0 * n + 1.0) - ln_gamma(n + 2.0) - ln_gamma(n + 1.0);
    (ln_catalan - (2.0 * n + 1.0) * std::f64::consts::LN_2).exp()
}

/// Piece-count upper bound of a deep network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeepBound {
    pub eta_log2: f64,
    /// `None` if the value overflows `f64`.
    pub eta: Option<f64>,
}

/// Evaluates `eta_n = sum_r C(N_n, r) p_r eta_{n-1}^r` with `eta_0 = 1`,
/// where `N_n` is the fan-in of layer `n` and `profiles[n]` its `p_r`.
pub fn deep_upper_bound(profiles: &[PqkProfile], topology: &Topology) -> Result<DeepBound> {
    if profiles.len() != topology.num_layers() {
        return Err(Error::Dimension(format!(
            "{} profiles for {} layers",
            profiles.len(),
            topology.num_layers()
        )));
    }
    let mut ln_eta = 0.0f64;
    for (l, prof) in profiles.iter().enumerate() {
        let fan_in = topology.fan_in(l);
        if prof.n() != fan_in {
            return Err(Error::Dimension(format!(
                "layer {l} has fan-in {fan_in} but its profile covers {}",
                prof.n()
            )));
        }
        ln_eta = log_sum_exp(
            (1..=fan_in)
                .filter(|&r| prof.p_k(r) > 0.0)
                .map(|r| ln_binomial_coeff(fan_in, r) + prof.p_k(r).ln() + r as f64 * ln_eta),
        );
    }
    let eta = ln_eta.exp();
    Ok(DeepBound {
        eta_log2: ln_eta / std::f64::consts::LN_2,
        eta: eta.is_finite().then_some(eta),
    })
}

/// Inclusive arithmetic range `start, start + step, ..., stop`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl LinearRange {
    pub fn new(start: f64, stop: f64, step: f64) -> Result<Self> {
        let r = Self { start, stop, step };
        if !(start.is_finite() && stop.is_finite() && step.is_finite()) || stop < start {
            return Err(Error::Config(format!("invalid range {r:?}")));
        }
        if stop > start && step <= 0.0 {
            return Err(Error::Config(format!("range step must be positive: {r:?}")));
        }
        Ok(r)
    }

    pub fn len(&self) -> usize {
        if self.stop == self.start {
            return 1;
        }
        ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.start + i as f64 * self.step)
            .collect()
    }
}

impl std::str::FromStr for LinearRange {
    type Err = Error;

    /// Parses `start:stop:step` or a single value.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(':')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Config(format!("bad range {s:?}: {e}")))
            })
            .collect::<Result<_>>()?;
        match parts[..] {
            [v] => Self::new(v, v, 1.0),
            [a, b, c] => Self::new(a, b, c),
            _ => Err(Error::Config(format!("range must be start:stop:step, got {s:?}"))),
        }
    }
}

/// One grid point of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub mu: f64,
    pub sigma: f64,
    pub profile: PqkProfile,
    pub estimate: EstimateResult,
}

/// Estimates over a `(mu, sigma)` grid of normal weight distributions, in
/// row-major order (`mu` outer). Each point draws from its own derived seed.
pub fn grid_sweep(
    mus: &[f64],
    sigmas: &[f64],
    n: usize,
    num_samples: usize,
    theta: f64,
    seed: u64,
    mode: McMode,
) -> Result<Vec<SweepPoint>> {
    if mus.is_empty() || sigmas.is_empty() {
        return Err(Error::Config("sweep ranges must be non-empty".into()));
    }
    let grid: Vec<(usize, usize)> = (0..mus.len())
        .flat_map(|i| (0..sigmas.len()).map(move |j| (i, j)))
        .collect();
    grid.par_iter()
        .map(|&(i, j)| {
            let spec = DistributionSpec::normal(mus[i], sigmas[j])?;
            let point_seed = crate::rng::derive_seed(seed, &[i as u64, j as u64]);
            let profile = monte_carlo_pqk_with(&spec, n, num_samples, theta, point_seed, mode)?;
            let estimate = eta_from_pqk(&profile);
            Ok(SweepPoint {
                mu: mus[i],
                sigma: sigmas[j],
                profile,
                estimate,
            })
        })
        .collect()
}

/// Input times that make `subset` the causal set of a neuron with weights
/// `weights`: the subset fires together at 0, every other input arrives one
/// time constant after the resulting output spike. `None` if the subset's
/// weights do not clear the threshold.
pub fn causal_set_witness(
    params: &NetworkParams,
    weights: &[f64],
    subset: &[usize],
) -> Option<Vec<f64>> {
    let w: f64 = subset.iter().map(|&j| weights[j]).sum();
    if subset.is_empty() || w < params.theta + params.delta_min {
        return None;
    }
    let t_out = params.tau_s * (w / (w - params.theta)).ln();
    let late = t_out + params.tau_s;
    if late >= params.t_inf {
        return None;
    }
    let mut times = vec![late; weights.len()];
    for &j in subset {
        times[j] = 0.0;
    }
    Some(times)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::Family;

    #[test]
    fn degenerate_spec_always_crosses() {
        let spec = DistributionSpec::normal(2.0, 0.0).unwrap();
        let p = monte_carlo_pqk(&spec, 5, 100, 1.0, 1).unwrap();
        assert!(p.p.iter().all(|&x| x == 1.0));
    }

    #[test]
    fn gaussian_tail() {
        let spec = DistributionSpec::normal(0.0, 1.0).unwrap();
        let p = monte_carlo_pqk(&spec, 1, 200_000, 1.0, 7).unwrap();
        let exact = 0.158_655_253_931_457_05;
        assert!((p.p_k(1) - exact).abs() < 3.0 * p.stderr(1), "{}", p.p_k(1));
    }

    #[test]
    fn modes_agree_statistically() {
        let spec = DistributionSpec::raw(Family::Uniform, -0.3, 0.5).unwrap();
        let a = monte_carlo_pqk_with(&spec, 12, 40_000, 1.0, 3, McMode::Independent).unwrap();
        let b = monte_carlo_pqk_with(&spec, 12, 40_000, 1.0, 3, McMode::Trajectory).unwrap();
        for k in 1..=12 {
            let se = (a.stderr(k).powi(2) + b.stderr(k).powi(2)).sqrt();
            assert!((a.p_k(k) - b.p_k(k)).abs() <= 4.0 * se + 1e-12, "k={k}");
        }
    }

    #[test]
    fn small_eta_values() {
        let p = PqkProfile::from_probabilities(vec![1.0; 3]).unwrap();
        assert_eq!(eta_from_pqk(&p).eta, 7.0);
        let p = PqkProfile::from_probabilities(vec![0.5, 0.0]).unwrap();
        let e = eta_from_pqk(&p);
        assert_eq!(e.eta, 1.0);
        assert!((e.fraction - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn log_space_matches_exact_near_cutoff() {
        let probs: Vec<f64> = (1..=60).map(|k| 1.0 / k as f64).collect();
        let exact = eta_from_pqk(&PqkProfile::from_probabilities(probs.clone()).unwrap());
        let ln_eta = log_sum_exp((1..=60).map(|k| ln_binomial(60, k) + probs[k as usize - 1].ln()));
        assert!((exact.eta.ln() - ln_eta).abs() < 1e-10);
    }

    #[test]
    fn large_n_fraction() {
        let p = PqkProfile::from_probabilities(vec![1.0; 100]).unwrap();
        let e = eta_from_pqk(&p);
        assert!((e.fraction - 1.0).abs() < 1e-12);
        assert!((e.eta_log2 - 100.0).abs() < 1e-9);
        let p = PqkProfile::from_probabilities(vec![0.0; 100]).unwrap();
        assert_eq!(eta_from_pqk(&p).fraction, 0.0);
    }

    #[test]
    fn weight_vector_examples() {
        let p = pqk_from_weight_vector(&[2.0; 4], 50, 1.0, 0).unwrap();
        assert!(p.p.iter().all(|&x| x == 1.0));
        let p = pqk_exhaustive(&[2.0, -2.0], 1.0).unwrap();
        assert_eq!(p.p, vec![0.5, 0.0]);
        assert_eq!(eta_from_pqk(&p).eta, 1.0);
    }

    #[test]
    fn sparre_andersen_values() {
        assert!((sparre_andersen_bound(1) - 0.488_602_511_902_919_9).abs() < 1e-12);
        assert_eq!(p_fpt(1), 0.5);
        assert!((p_fpt(2) - 0.125).abs() < 1e-15);
        assert!((p_fpt(3) - 2.0 / 32.0).abs() < 1e-15);
        for n in 1..200 {
            assert!(sparre_andersen_bound(n + 1) < sparre_andersen_bound(n));
        }
    }

    #[test]
    fn deep_recursion_examples() {
        let t = Topology::new(vec![3, 1]).unwrap();
        let ones = |n| PqkProfile::from_probabilities(vec![1.0; n]).unwrap();
        let b = deep_upper_bound(&[ones(3)], &t).unwrap();
        assert!((b.eta.unwrap() - 7.0).abs() < 1e-12);
        let t = Topology::new(vec![2, 2, 1]).unwrap();
        let b = deep_upper_bound(&[ones(2), ones(2)], &t).unwrap();
        assert!((b.eta.unwrap() - 15.0).abs() < 1e-12);
        assert!(deep_upper_bound(&[ones(3), ones(2)], &t).is_err());
    }

    #[test]
    fn ranges() {
        let r: LinearRange = "0:0.1:0.001".parse().unwrap();
        assert_eq!(r.len(), 101);
        assert!((r.values()[100] - 0.1).abs() < 1e-12);
        let r: LinearRange = "0.05".parse().unwrap();
        assert_eq!(r.values(), vec![0.05]);
        assert!("0:1:0".parse::<LinearRange>().is_err());
        assert!("1:0:0.1".parse::<LinearRange>().is_err());
    }

    #[test]
    fn zero_sweep_point() {
        let pts = grid_sweep(&[0.0], &[0.0], 10, 100, 1.0, 0, McMode::Trajectory).unwrap();
        assert_eq!(pts[0].estimate.fraction, 0.0);
    }

    #[test]
    fn witness_produces_causal_set() {
        let params = NetworkParams::default();
        let w = [0.7, -0.2, 0.9, 0.4];
        let times = causal_set_witness(&params, &w, &[0, 2]).unwrap();
        let trace = crate::nlif::solve_neuron(&params, &times, &w).unwrap();
        assert_eq!(trace.causal_set.indices(), &[0, 2]);
        assert!(causal_set_witness(&params, &w, &[1, 3]).is_none());
    }
}
