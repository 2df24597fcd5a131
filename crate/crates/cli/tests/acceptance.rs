//! Acceptance criteria, one `[AC n] PASS|FAIL` line each.
//!
//! Run a subset with `cargo test --test acceptance -- AC5 AC8`.

use std::collections::HashSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::Instant;

use causal_pieces::dataset::idx::{encode_idx_images, encode_idx_labels, IdxImages, PixelEncoding};
use causal_pieces::dataset::yinyang::{classify, YinYangClass};
use causal_pieces::dataset::{load_idx, yinyang_grid, yinyang_split, GridConfig, YinYangConfig};
use causal_pieces::estimate::{
    eta_from_pqk, grid_sweep, monte_carlo_pqk, pqk_exhaustive, sparre_andersen_bound, McMode,
};
use causal_pieces::nlif::membrane_potential;
use causal_pieces::oracle::integrate_oracle;
use causal_pieces::rng::{derived_rng, rng_from_seed};
use causal_pieces::train::backward::lipschitz_constant;
use causal_pieces::{
    backward_network, causal_path, count_on_inputs, forward_network, solve_neuron, train,
    ttfs_loss, CausalPath, CausalSet, DistributionSpec, Family, Matrix, NetworkParams, Readout,
    Topology, TrainConfig, WeightStack,
};
use causal_pieces_cli::correlate::{correlate, CorrelateArgs};
use causal_pieces_cli::data::load_mnist;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::Rng;

// AC1
const ORACLE_INSTANCES: usize = 1000;
const ORACLE_MAX_N: usize = 50;
const ORACLE_DT: f64 = 1e-4;
const ORACLE_TOL_TAU: f64 = 1e-6;
// AC2
const FD_H: f64 = 1e-6;
const FD_MIN_PROBES: usize = 100;
const FD_TOL: f64 = 1e-3;
const TTFS_TOL: f64 = 1e-6;
// AC5
const SPARRE_SAMPLES: usize = 100_000;
const SPARRE_THETA: f64 = 1e-9;
const SPARRE_SIGMAS: f64 = 3.0;
// AC6
const SWEEP_SAMPLES: usize = 10_000;
const SWEEP_NOISE_SIGMAS: f64 = 3.0;
// AC7
const CORRELATION_MIN: f64 = 0.6;
// AC8, AC9
const LINEAR_BASELINE: f64 = 0.638;
const BASELINE_MARGIN: f64 = 0.25;
const YINYANG_MIN: f64 = 0.95;
const POSITIVE_MIN: f64 = 0.90;
const POSITIVE_EPOCHS: usize = 4000;
// MNIST smoke
const MNIST_MIN: f64 = 0.85;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rel_err(a: f64, b: f64) -> Option<f64> {
    let scale = a.abs().max(b.abs());
    (scale > 1e-8).then(|| (a - b).abs() / scale)
}

fn ac1_oracle() -> Outcome {
    let p = NetworkParams::default();
    let mut rng = rng_from_seed(101);
    let (mut mismatches, mut spiking, mut worst) = (0, 0, 0.0f64);
    for _ in 0..ORACLE_INSTANCES {
        let n = rng.random_range(1..=ORACLE_MAX_N);
        let times: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0)).collect();
        let scale = 2.0 / n as f64;
        let weights: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..2.0) * scale).collect();
        let cf = solve_neuron(&p, &times, &weights).unwrap();
        let t = integrate_oracle(&p, &times, &weights, ORACLE_DT).unwrap();
        let oracle_spiked = !p.is_silent(t);
        if cf.spiked() != oracle_spiked {
            mismatches += 1;
        } else if oracle_spiked {
            spiking += 1;
            worst = worst.max((cf.spike_time - t).abs());
        }
    }
    outcome(
        mismatches == 0 && worst <= ORACLE_TOL_TAU * p.tau_s,
        format!(
            "{ORACLE_INSTANCES} neurons, {spiking} spiking, {mismatches} spike/no-spike mismatches, max |dt| {worst:.2e} (tol {:.1e})",
            ORACLE_TOL_TAU * p.tau_s
        ),
    )
}

fn causal_sets(p: &NetworkParams, w: &WeightStack, x: &[f64]) -> Vec<Vec<CausalSet>> {
    forward_network(p, w, x)
        .unwrap()
        .layers
        .iter()
        .map(|l| l.iter().map(|n| n.causal_set.clone()).collect())
        .collect()
}

fn ac2_gradients() -> Outcome {
    let p = NetworkParams::default();
    let xi = 0.2 * p.tau_s;
    let loss = |w: &WeightStack, x: &[f64], label: usize| {
        ttfs_loss(&forward_network(&p, w, x).unwrap().output_times(), label, xi).0
    };
    let (samples, _) = yinyang_split(21, 60, 1, true).unwrap();
    let topo = Topology::new(vec![4, 30, 3]).unwrap();
    let spec = DistributionSpec::optimized(Family::Normal);
    let mut rng = rng_from_seed(22);
    let (mut nw, mut nx, mut worst_w, mut worst_x) = (0, 0, 0.0f64, 0.0f64);
    for s in &samples {
        let w = spec.init_weights(&topo, &mut rng).unwrap();
        let x = &s.features;
        let trace = forward_network(&p, &w, x).unwrap();
        let (_, g) = ttfs_loss(&trace.output_times(), s.label, xi);
        let grads = backward_network(&p, &w, &trace, &g).unwrap();
        let base = causal_sets(&p, &w, x);
        for _ in 0..4 {
            let l = rng.random_range(0..w.num_layers());
            let (i, j) = (
                rng.random_range(0..w.layer(l).rows()),
                rng.random_range(0..w.layer(l).cols()),
            );
            let shifted = |d: f64| {
                let mut a = w.clone();
                a.layer_mut(l).set(i, j, w.layer(l).get(i, j) + d);
                a
            };
            let (a, b) = (shifted(FD_H), shifted(-FD_H));
            if causal_sets(&p, &a, x) != base || causal_sets(&p, &b, x) != base {
                continue;
            }
            let fd = (loss(&a, x, s.label) - loss(&b, x, s.label)) / (2.0 * FD_H);
            if let Some(e) = rel_err(fd, grads.weights[l].get(i, j)) {
                worst_w = worst_w.max(e);
                nw += 1;
            }
        }
        for k in 0..x.len() {
            let (mut xa, mut xb) = (x.clone(), x.clone());
            xa[k] += FD_H;
            xb[k] -= FD_H;
            if x[k] < FD_H
                || causal_sets(&p, &w, &xa) != base
                || causal_sets(&p, &w, &xb) != base
            {
                continue;
            }
            let fd = (loss(&w, &xa, s.label) - loss(&w, &xb, s.label)) / (2.0 * FD_H);
            if let Some(e) = rel_err(fd, grads.input[k]) {
                worst_x = worst_x.max(e);
                nx += 1;
            }
        }
    }

    let mut worst_t = 0.0f64;
    let h = 1e-4;
    for _ in 0..200 {
        let t: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..0.6)).collect();
        let label = rng.random_range(0..3);
        let (_, g) = ttfs_loss(&t, label, xi);
        for n in 0..3 {
            let at = |d: f64| {
                let mut a = t.clone();
                a[n] += d;
                ttfs_loss(&a, label, xi).0
            };
            let fd = (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h);
            worst_t = worst_t.max(rel_err(fd, g[n]).unwrap_or(0.0));
        }
    }
    outcome(
        nw >= FD_MIN_PROBES
            && nx >= FD_MIN_PROBES
            && worst_w < FD_TOL
            && worst_x < FD_TOL
            && worst_t < TTFS_TOL,
        format!(
            "weights {nw} probes max rel err {worst_w:.2e}; inputs {nx} probes max rel err {worst_x:.2e}; TTFS loss max rel err {worst_t:.2e}"
        ),
    )
}

fn random_stack(sizes: &[usize], rng: &mut impl Rng) -> WeightStack {
    let layers = sizes
        .windows(2)
        .map(|s| {
            let v = (0..s[0] * s[1]).map(|_| rng.random_range(-0.6..1.6)).collect();
            Matrix::from_vec(s[1], s[0], v).unwrap()
        })
        .collect();
    WeightStack::new(layers).unwrap()
}

fn ac3_counting() -> Outcome {
    let p = NetworkParams::default();
    let mut rng = rng_from_seed(303);
    let mut bad = 0;
    let cases = 300;
    for _ in 0..cases {
        let depth = rng.random_range(1..=3);
        let mut sizes = vec![3];
        sizes.extend((0..depth).map(|_| rng.random_range(1..=4)));
        let w = random_stack(&sizes, &mut rng);
        let samples = rng.random_range(1..=100);
        let inputs: Vec<Vec<f64>> = (0..samples)
            .map(|_| (0..3).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect();
        let counter = count_on_inputs(&p, &w, &inputs, false).unwrap();
        let paths: Vec<Vec<CausalPath>> = inputs
            .iter()
            .map(|x| {
                let tr = forward_network(&p, &w, x).unwrap();
                (0..depth)
                    .map(|l| {
                        let all: Vec<usize> = (0..sizes[l + 1]).collect();
                        causal_path(&tr, l, &all).unwrap()
                    })
                    .collect()
            })
            .collect();
        for empty in [false, true] {
            let c = counter.counts(empty);
            for l in 0..depth {
                let distinct: HashSet<&CausalPath> = paths
                    .iter()
                    .map(|ps| &ps[l])
                    .filter(|q| empty || !q.is_silent())
                    .collect();
                bad += usize::from(c.per_layer[l] != distinct.len());
            }
            let network: HashSet<&Vec<CausalPath>> = paths
                .iter()
                .filter(|ps| empty || !ps.iter().all(CausalPath::is_silent))
                .collect();
            bad += usize::from(c.network != network.len());
        }
    }
    outcome(bad == 0, format!("{cases} networks, {bad} count mismatches against distinct causal paths"))
}

fn ac4_exact_eta() -> Outcome {
    let mut rng = rng_from_seed(404);
    let mut bad = 0;
    for _ in 0..50 {
        let n = rng.random_range(1..=12);
        let w: Vec<f64> = (0..n)
            .map(|_| {
                if rng.random_bool(0.3) {
                    f64::from(rng.random_range(-4i32..6)) * 0.25
                } else {
                    rng.random_range(-1.0..1.5)
                }
            })
            .collect();
        let mut direct = 0u64;
        for mask in 1u32..(1 << n) {
            let s: f64 = (0..n).filter(|j| mask & (1 << j) != 0).map(|j| w[j]).sum();
            direct += u64::from(s >= 1.0);
        }
        let eta = eta_from_pqk(&pqk_exhaustive(&w, 1.0).unwrap()).eta;
        bad += usize::from(eta != direct as f64);
    }
    outcome(bad == 0, format!("50 weight vectors, {bad} mismatches"))
}

fn ac5_sparre() -> Outcome {
    let spec = DistributionSpec::normal(0.0, 1.0).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, n) in [5usize, 20, 100].into_iter().enumerate() {
        let prof = monte_carlo_pqk(&spec, n, SPARRE_SAMPLES, SPARRE_THETA, 500 + i as u64).unwrap();
        let est = eta_from_pqk(&prof);
        let bound = sparre_andersen_bound(n);
        let ok = est.fraction >= bound - SPARRE_SIGMAS * est.fraction_stderr;
        pass &= ok;
        parts.push(format!("N={n}: {:.4e} vs bound {bound:.4e}", est.fraction));
    }
    outcome(pass, parts.join("; "))
}

fn ac6_sweep() -> Outcome {
    let axis: Vec<f64> = (0..=100).map(|i| f64::from(i) * 0.001).collect();
    let pts = grid_sweep(&axis, &axis, 100, SWEEP_SAMPLES, 1.0, 6, McMode::Trajectory).unwrap();
    let at = |i: usize, j: usize| &pts[i * axis.len() + j].estimate;
    let (s05, m02) = (50, 20);
    let best_mu = (0..axis.len())
        .max_by(|&a, &b| at(a, s05).fraction.total_cmp(&at(b, s05).fraction))
        .unwrap();
    let argmax_ok = axis[best_mu] > 0.0;
    let violation = (1..axis.len()).find(|&j| {
        let (a, b) = (at(m02, j - 1), at(m02, j));
        let noise = SWEEP_NOISE_SIGMAS * a.fraction_stderr.hypot(b.fraction_stderr);
        b.fraction < a.fraction - noise
    });
    let mono = match violation {
        None => "fraction at mu=0.02 non-decreasing in sigma".to_string(),
        Some(j) => format!(
            "fraction at mu=0.02 drops from {:.4} (sigma={}) to {:.4} (sigma={})",
            at(m02, j - 1).fraction,
            axis[j - 1],
            at(m02, j).fraction,
            axis[j]
        ),
    };
    outcome(
        argmax_ok && violation.is_none(),
        format!("argmax mu at sigma=0.05 is {}; {mono}", axis[best_mu]),
    )
}

fn ac7_correlation() -> Outcome {
    let r = correlate(&CorrelateArgs::default(), 0).unwrap();
    let v = r.r_log_pieces.unwrap_or(f64::NAN);
    outcome(
        v >= CORRELATION_MIN && !r.degenerate,
        format!(
            "r(log pieces, accuracy) = {v:.3} over {} runs; r(pieces, accuracy) = {:.3}; top-quartile median pieces change {:?}",
            r.runs.len(),
            r.r_pieces.unwrap_or(f64::NAN),
            r.top_quartile_median_change
        ),
    )
}

fn yinyang_run(spec: &DistributionSpec, config: TrainConfig) -> (f64, Option<usize>) {
    let (tr, te) = yinyang_split(config.seed, 5000, 1000, true).unwrap();
    let topo = Topology::new(vec![4, 30, 3]).unwrap();
    let r = train(&tr, &te, &topo, spec, &config).unwrap();
    (r.metrics.best_test_accuracy.unwrap_or(0.0), r.metrics.best_epoch)
}

fn ac8_yinyang() -> Outcome {
    let config = TrainConfig {
        learning_rate: 1e-4,
        epochs: 1000,
        ..Default::default()
    };
    let (best, epoch) = yinyang_run(&DistributionSpec::optimized(Family::Normal), config);
    outcome(
        best >= YINYANG_MIN && best - LINEAR_BASELINE >= BASELINE_MARGIN,
        format!("best test accuracy {best:.3} at epoch {epoch:?}"),
    )
}

fn ac9_positive() -> Outcome {
    let spec = DistributionSpec::scaled(Family::LogNormal, [1.29, 0.57, 0.85, 0.76]).unwrap();
    let config = TrainConfig {
        learning_rate: 1e-3,
        epochs: POSITIVE_EPOCHS,
        positive_weights: true,
        readout: Readout::LinearHead,
        ..Default::default()
    };
    let (best, epoch) = yinyang_run(&spec, config);
    outcome(
        best >= POSITIVE_MIN && best - LINEAR_BASELINE >= BASELINE_MARGIN,
        format!("best test accuracy {best:.3} at epoch {epoch:?}"),
    )
}

fn ac10_depth() -> Outcome {
    let p = NetworkParams::default();
    let grid: Vec<Vec<f64>> = yinyang_grid(&GridConfig { resolution: 400 })
        .unwrap()
        .into_iter()
        .map(|s| s.features)
        .collect();
    let spec = DistributionSpec::optimized(Family::Normal);
    let medians: Vec<usize> = [vec![4, 40, 3], vec![4, 40, 40, 3], vec![4, 40, 40, 40, 3]]
        .into_iter()
        .map(|sizes| {
            let topo = Topology::new(sizes).unwrap();
            let mut counts: Vec<usize> = (0..5u64)
                .map(|seed| {
                    let w = spec.init_weights(&topo, &mut derived_rng(seed, &[0])).unwrap();
                    count_on_inputs(&p, &w, &grid, false).unwrap().counts(false).output()
                })
                .collect();
            counts.sort_unstable();
            counts[2]
        })
        .collect();
    outcome(
        medians[0] < medians[1] && medians[1] < medians[2],
        format!("median output pieces on {} grid points: {medians:?}", grid.len()),
    )
}

fn neuron_strategy(max_n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1..=max_n).prop_flat_map(|n| {
        (
            prop::collection::vec(0.0..2.0f64, n),
            prop::collection::vec(-1.0..2.0f64, n),
        )
    })
}

fn check<S: Strategy>(
    name: &str,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let mut runner = TestRunner::new_with_rng(
        Config {
            cases: 256,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    );
    runner.run(&strategy, test).map_err(|e| format!("{name}: {e}"))
}

fn ac11_invariants() -> Outcome {
    let p = NetworkParams::default();
    let sizes = [5usize, 6, 4, 3];
    let net = sizes
        .windows(2)
        .map(|s| prop::collection::vec(-0.5..1.5f64, s[0] * s[1]))
        .collect::<Vec<_>>();
    let results = [
        check(
            "translation equivariance",
            (net, prop::collection::vec(0.0..1.0f64, 5), 0.0..2.0f64),
            |(mats, x, shift)| {
                let layers = mats
                    .into_iter()
                    .zip(sizes.windows(2))
                    .map(|(v, s)| Matrix::from_vec(s[1], s[0], v).unwrap())
                    .collect();
                let w = WeightStack::new(layers).unwrap();
                let a = forward_network(&p, &w, &x).unwrap().output_times();
                let xs: Vec<f64> = x.iter().map(|t| t + shift).collect();
                let b = forward_network(&p, &w, &xs).unwrap().output_times();
                for (ta, tb) in a.iter().zip(&b) {
                    if p.is_silent(*ta) {
                        prop_assert!(p.is_silent(*tb));
                    } else {
                        prop_assert!((ta + shift - tb).abs() < 1e-9);
                    }
                }
                Ok(())
            },
        ),
        check("causality", neuron_strategy(12), |(t, w)| {
            let n = solve_neuron(&p, &t, &w).unwrap();
            for j in 0..t.len() {
                prop_assert_eq!(n.causal_set.contains(j), n.spiked() && t[j] <= n.spike_time);
            }
            if n.spiked() {
                let u = membrane_potential(&p, &t, &w, n.spike_time).unwrap();
                prop_assert!((u - p.theta).abs() < 1e-9);
            }
            Ok(())
        }),
        check("minimality", neuron_strategy(12), |(t, w)| {
            let n = solve_neuron(&p, &t, &w).unwrap();
            let mut order: Vec<usize> = (0..t.len()).collect();
            order.sort_by(|&a, &b| t[a].total_cmp(&t[b]).then(a.cmp(&b)));
            // a silent neuron admits no prefix at all, a spiking one no shorter prefix
            let last = if n.spiked() { n.causal_set.len() - 1 } else { t.len() };
            for k in 1..=last {
                let set = &order[..k];
                let ws: f64 = set.iter().map(|&j| w[j]).sum();
                if ws < p.theta + p.delta_min {
                    continue;
                }
                let e: f64 = set.iter().map(|&j| w[j] * (t[j] / p.tau_s).exp()).sum();
                let ts = p.tau_s * (e / (ws - p.theta)).ln();
                let next = order.get(k).map_or(f64::INFINITY, |&j| t[j]);
                prop_assert!(!(ts >= t[order[k - 1]] + 1e-12 && ts < next - 1e-12));
            }
            Ok(())
        }),
        check(
            "Lipschitz bound",
            (neuron_strategy(10), prop::collection::vec(-1e-3..1e-3f64, 20)),
            |((t, w), d)| {
                let a = solve_neuron(&p, &t, &w).unwrap();
                let t2: Vec<f64> = t.iter().zip(&d).map(|(x, e)| (x + e).max(0.0)).collect();
                let w2: Vec<f64> = w.iter().zip(&d[10..]).map(|(x, e)| x + e).collect();
                let b = solve_neuron(&p, &t2, &w2).unwrap();
                if !a.spiked() || !b.spiked() || a.causal_set != b.causal_set {
                    return Ok(());
                }
                let dist = t
                    .iter()
                    .zip(&t2)
                    .chain(w.iter().zip(&w2))
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0, f64::max);
                let l = lipschitz_constant(&p, &w, &a).max(lipschitz_constant(&p, &w2, &b));
                prop_assert!((a.spike_time - b.spike_time).abs() <= l * dist + 1e-12);
                Ok(())
            },
        ),
        check("Yin Yang half-turn symmetry", (0.0..1.0f64, 0.0..1.0f64), |(x, y)| {
            let cfg = YinYangConfig::default();
            let half = cfg.r_big / 2.0;
            let dl = (x - (0.5 - half)).hypot(y - 0.5);
            let dr = (x - (0.5 + half)).hypot(y - 0.5);
            let dc = (x - 0.5).hypot(y - 0.5);
            let edges = [dl - cfg.r_small, dr - cfg.r_small, dl - half, dr - half, y - 0.5];
            if !cfg.in_disk(x, y) || (dc - cfg.r_big).abs() < 1e-9 || edges.iter().any(|e| e.abs() < 1e-9) {
                return Ok(());
            }
            let swapped = match classify(x, y) {
                YinYangClass::Yin => YinYangClass::Yang,
                YinYangClass::Yang => YinYangClass::Yin,
                YinYangClass::Dot => YinYangClass::Dot,
            };
            prop_assert_eq!(classify(1.0 - x, 1.0 - y), swapped);
            Ok(())
        }),
        check(
            "IDX round trip",
            (0usize..5, 1usize..6, 1usize..6).prop_flat_map(|(n, r, c)| {
                (prop::collection::vec(any::<u8>(), n * r * c), Just((r, c)), prop::collection::vec(0u8..10, n))
            }),
            |(pixels, (rows, cols), labels)| {
                let img = IdxImages { rows, cols, pixels };
                let dir = tempfile::tempdir().unwrap();
                let (ip, lp) = (dir.path().join("i"), dir.path().join("l"));
                std::fs::write(&ip, encode_idx_images(&img)).unwrap();
                std::fs::write(&lp, encode_idx_labels(&labels)).unwrap();
                let s = load_idx(&ip, &lp, PixelEncoding::Direct).unwrap();
                prop_assert_eq!(s.len(), labels.len());
                for (i, x) in s.iter().enumerate() {
                    prop_assert_eq!(x.label, usize::from(labels[i]));
                    let expect: Vec<f64> = img.image(i).iter().map(|&v| f64::from(v) / 255.0).collect();
                    prop_assert_eq!(&x.features, &expect);
                }
                Ok(())
            },
        ),
    ];
    let failures: Vec<String> = results.into_iter().filter_map(Result::err).collect();
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            "translation equivariance, causality, minimality, Lipschitz bound, half-turn symmetry, IDX round trip: 256 cases each".into()
        } else {
            failures.join("; ")
        },
    )
}

fn mnist_dir() -> PathBuf {
    std::env::var_os("MNIST_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/mnist")))
}

fn mnist_smoke() -> Outcome {
    // hand-assembled files: 2 images of 2x3 pixels, labels 7 and 0
    let images: Vec<u8> = [
        &[0, 0, 8, 3][..],
        &[0, 0, 0, 2],
        &[0, 0, 0, 2],
        &[0, 0, 0, 3],
        &[0, 51, 102, 153, 204, 255],
        &[255, 0, 255, 0, 255, 0],
    ]
    .concat();
    let labels: Vec<u8> = [&[0, 0, 8, 1][..], &[0, 0, 0, 2], &[7, 0]].concat();
    let dir = tempfile::tempdir().unwrap();
    let (ip, lp) = (dir.path().join("images"), dir.path().join("labels"));
    std::fs::write(&ip, &images).unwrap();
    std::fs::write(&lp, &labels).unwrap();
    let s = load_idx(&ip, &lp, PixelEncoding::Direct).unwrap();
    let fixture_ok = s.len() == 2
        && s[0].label == 7
        && s[1].label == 0
        && s[0].features == [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]
        && s[1].features == [1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
    if !fixture_ok {
        return outcome(false, "IDX fixture decoded incorrectly");
    }

    let root = mnist_dir();
    let (train_set, test_set) = match load_mnist(&root, PixelEncoding::Direct, 10_000, 10_000) {
        Ok(d) => d,
        Err(e) => {
            return outcome(
                false,
                format!("IDX fixture decoded bit-exactly; MNIST unavailable ({e:#}), set MNIST_DIR"),
            )
        }
    };
    let topo = Topology::new(vec![784, 200, 100, 10]).unwrap();
    let config = TrainConfig {
        learning_rate: 1e-3,
        epochs: 5,
        positive_weights: true,
        readout: Readout::LinearHead,
        ..Default::default()
    };
    let spec = DistributionSpec::optimized(Family::LogNormal);
    let r = train(&train_set, &test_set, &topo, &spec, &config).unwrap();
    let best = r.metrics.best_test_accuracy.unwrap_or(0.0);
    outcome(
        best >= MNIST_MIN,
        format!("IDX fixture decoded bit-exactly; 5 epochs on 10k MNIST samples: test accuracy {best:.3}"),
    )
}

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("AC1", ac1_oracle),
        ("AC2", ac2_gradients),
        ("AC3", ac3_counting),
        ("AC4", ac4_exact_eta),
        ("AC5", ac5_sparre),
        ("AC6", ac6_sweep),
        ("AC7", ac7_correlation),
        ("AC8", ac8_yinyang),
        ("AC9", ac9_positive),
        ("AC10", ac10_depth),
        ("AC11", ac11_invariants),
        ("MNIST", mnist_smoke),
    ];
    let mut failed = Vec::new();
    for (name, f) in criteria {
        if !filters.is_empty() && !filters.iter().any(|x| x == name) {
            continue;
        }
        let start = Instant::now();
        let o = catch_unwind(AssertUnwindSafe(f))
            .unwrap_or_else(|_| outcome(false, "panicked"));
        println!(
            "[{name}] {} {} ({:.1}s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
        if !o.pass {
            failed.push(name);
        }
    }
    if !failed.is_empty() {
        println!("failed: {}", failed.join(", "));
        std::process::exit(1);
    }
}
