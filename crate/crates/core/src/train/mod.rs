//! Gradient training of spiking networks with exact spike-time derivatives.

pub mod adam;
pub mod backward;
pub mod loss;

use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use adam::AdamState;
pub use backward::{
    backward_into, backward_network, clamp_positive, gate_positive, lipschitz_constant,
    GradientBuffers,
};
pub use loss::{argmax, clamp_hidden, earliest, ttfs_loss, HeadGradient, LinearHead};

use crate::dataset::Sample;
use crate::distribution::DistributionSpec;
use crate::error::{dim_err, Error, Result};
use crate::model::{Matrix, NetworkParams, Topology, WeightStack};
use crate::nlif::forward_network;
use crate::pieces::count_on_inputs;
use crate::rng::{derive_seed, derived_rng, rng_from_seed, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Readout {
    /// The class is the earliest output spike.
    #[default]
    SpikeTimes,
    /// The last layer is an affine map of the hidden spike times.
    LinearHead,
}

impl std::str::FromStr for Readout {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spike_times" | "spike-times" => Ok(Self::SpikeTimes),
            "linear_head" | "linear-head" => Ok(Self::LinearHead),
            _ => Err(Error::Config(format!("unknown readout {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Loss sharpness; `0.2 * tau_s` when unset.
    pub xi: Option<f64>,
    pub seed: u64,
    pub positive_weights: bool,
    pub readout: Readout,
    /// Count output-layer pieces on the training set every this many epochs
    /// (0 disables).
    pub eval_every: usize,
    pub params: NetworkParams,
    /// Head input for silent hidden neurons; `5 * tau_s` when unset.
    pub t_clamp: Option<f64>,
    /// Added to every input weight of a neuron that stayed silent for a whole
    /// batch, or of an output neuron that missed its own label (0 disables).
    pub weight_bump: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            batch_size: 100,
            epochs: 1000,
            xi: None,
            seed: 0,
            positive_weights: false,
            readout: Readout::SpikeTimes,
            eval_every: 0,
            params: NetworkParams::default(),
            t_clamp: None,
            weight_bump: 5e-3,
        }
    }
}

impl TrainConfig {
    pub fn xi(&self) -> f64 {
        self.xi.unwrap_or(0.2 * self.params.tau_s)
    }

    pub fn t_clamp(&self) -> f64 {
        self.t_clamp.unwrap_or(5.0 * self.params.tau_s)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.xi() > 0.0)
            || self.batch_size == 0
            || !(self.learning_rate > 0.0)
            || !(self.weight_bump >= 0.0)
        {
            return Err(Error::Config(format!(
                "need xi > 0, batch_size >= 1, a positive learning rate and weight_bump >= 0: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Spiking weights (as stored, before any clamping) and the optional head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub weights: WeightStack,
    pub head: Option<LinearHead>,
}

impl Model {
    /// Samples an initial model. With a linear head, the last entry of
    /// `topology` is the number of classes and is not a spiking layer.
    pub fn init(
        topology: &Topology,
        init: &DistributionSpec,
        readout: Readout,
        rng: &mut Rng,
    ) -> Result<Self> {
        match readout {
            Readout::SpikeTimes => Ok(Self {
                weights: init.init_weights(topology, rng)?,
                head: None,
            }),
            Readout::LinearHead => {
                let spiking = topology.without_last()?;
                let weights = init.init_weights(&spiking, rng)?;
                let head = LinearHead::init(topology.outputs(), spiking.outputs(), rng);
                Ok(Self {
                    weights,
                    head: Some(head),
                })
            }
        }
    }

    /// Full topology including the head.
    pub fn topology(&self) -> Topology {
        let mut sizes = self.weights.topology().sizes().to_vec();
        if let Some(h) = &self.head {
            sizes.push(h.classes());
        }
        Topology::new(sizes).expect("model shapes are valid")
    }

    /// Weights used in the forward pass.
    pub fn effective_weights(&self, positive: bool) -> WeightStack {
        if positive {
            clamp_positive(&self.weights)
        } else {
            self.weights.clone()
        }
    }

    fn tensor_sizes(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.weights.layers().iter().map(|m| m.as_slice().len()).collect();
        if let Some(h) = &self.head {
            s.push(h.weights.as_slice().len());
            s.push(h.bias.len());
        }
        s
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t: Vec<&mut [f64]> = self
            .weights
            .layers_mut()
            .iter_mut()
            .map(Matrix::as_mut_slice)
            .collect();
        if let Some(h) = &mut self.head {
            t.push(h.weights.as_mut_slice());
            t.push(&mut h.bias);
        }
        t
    }
}

/// Forward model with precomputed effective weights.
#[derive(Debug, Clone)]
pub struct Evaluator<'a> {
    pub params: NetworkParams,
    pub weights: WeightStack,
    pub head: Option<&'a LinearHead>,
    pub xi: f64,
    pub t_clamp: f64,
}

/// Per-sample gradient accumulator.
#[derive(Debug, Clone)]
struct Grads {
    weights: Vec<Matrix>,
    head_weights: Option<Matrix>,
    head_bias: Option<Vec<f64>>,
    loss: f64,
    /// Per layer: neuron spiked for at least one sample.
    fired: Vec<Vec<bool>>,
    /// Output neurons that stayed silent on a sample of their own class.
    missed_label: Vec<bool>,
}

impl Grads {
    fn zeros(weights: &WeightStack, head: Option<&LinearHead>) -> Self {
        Self {
            weights: weights
                .layers()
                .iter()
                .map(|m| Matrix::zeros(m.rows(), m.cols()))
                .collect(),
            head_weights: head.map(|h| Matrix::zeros(h.weights.rows(), h.weights.cols())),
            head_bias: head.map(|h| vec![0.0; h.bias.len()]),
            loss: 0.0,
            fired: weights.layers().iter().map(|m| vec![false; m.rows()]).collect(),
            missed_label: vec![false; weights.topology().outputs()],
        }
    }

    fn add(&mut self, other: &Grads) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            for (x, y) in a.as_mut_slice().iter_mut().zip(b.as_slice()) {
                *x += y;
            }
        }
        if let (Some(a), Some(b)) = (&mut self.head_weights, &other.head_weights) {
            for (x, y) in a.as_mut_slice().iter_mut().zip(b.as_slice()) {
                *x += y;
            }
        }
        if let (Some(a), Some(b)) = (&mut self.head_bias, &other.head_bias) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        self.loss += other.loss;
        for (a, b) in self.fired.iter_mut().zip(&other.fired) {
            for (x, y) in a.iter_mut().zip(b) {
                *x |= y;
            }
        }
        for (x, y) in self.missed_label.iter_mut().zip(&other.missed_label) {
            *x |= y;
        }
    }

    fn scale(&mut self, s: f64) {
        for m in &mut self.weights {
            m.as_mut_slice().iter_mut().for_each(|x| *x *= s);
        }
        if let Some(m) = &mut self.head_weights {
            m.as_mut_slice().iter_mut().for_each(|x| *x *= s);
        }
        if let Some(b) = &mut self.head_bias {
            b.iter_mut().for_each(|x| *x *= s);
        }
        self.loss *= s;
    }

    fn all_finite(&self) -> bool {
        self.loss.is_finite()
            && self
                .weights
                .iter()
                .chain(self.head_weights.iter())
                .all(|m| m.as_slice().iter().all(|x| x.is_finite()))
            && self
                .head_bias
                .iter()
                .all(|b| b.iter().all(|x| x.is_finite()))
    }

    fn tensors(&self) -> Vec<&[f64]> {
        let mut t: Vec<&[f64]> = self.weights.iter().map(Matrix::as_slice).collect();
        if let (Some(w), Some(b)) = (&self.head_weights, &self.head_bias) {
            t.push(w.as_slice());
            t.push(b);
        }
        t
    }
}

impl<'a> Evaluator<'a> {
    pub fn new(model: &'a Model, config: &TrainConfig) -> Self {
        Self {
            params: config.params,
            weights: model.effective_weights(config.positive_weights),
            head: model.head.as_ref(),
            xi: config.xi(),
            t_clamp: config.t_clamp(),
        }
    }

    /// Loss of one sample.
    pub fn loss(&self, sample: &Sample) -> Result<f64> {
        let trace = forward_network(&self.params, &self.weights, &sample.features)?;
        let out = trace.output_times();
        match self.head {
            None => Ok(ttfs_loss(&out, sample.label, self.xi).0),
            Some(h) => {
                let hidden = clamp_hidden(&out, self.params.t_inf, self.t_clamp);
                Ok(h.loss_and_grad(&hidden, sample.label)?.loss)
            }
        }
    }

    pub fn predict(&self, features: &[f64]) -> Result<usize> {
        let out = crate::nlif::forward_times(&self.params, &self.weights, features)?;
        match self.head {
            None => Ok(earliest(&out)),
            Some(h) => {
                let hidden = clamp_hidden(&out, self.params.t_inf, self.t_clamp);
                Ok(argmax(&h.logits(&hidden)?))
            }
        }
    }

    pub fn accuracy(&self, samples: &[Sample]) -> Result<f64> {
        if samples.is_empty() {
            return Ok(f64::NAN);
        }
        let correct = samples
            .par_iter()
            .map(|s| Ok(usize::from(self.predict(&s.features)? == s.label)))
            .collect::<Result<Vec<usize>>>()?
            .into_iter()
            .sum::<usize>();
        Ok(correct as f64 / samples.len() as f64)
    }

    fn accumulate(&self, sample: &Sample, acc: &mut Grads) -> Result<()> {
        let trace = forward_network(&self.params, &self.weights, &sample.features)?;
        let out = trace.output_times();
        for (f, layer) in acc.fired.iter_mut().zip(&trace.layers) {
            for (x, n) in f.iter_mut().zip(layer) {
                *x |= n.spiked();
            }
        }
        let (loss, g_out) = match self.head {
            None => {
                if out[sample.label] >= self.params.t_inf {
                    acc.missed_label[sample.label] = true;
                }
                ttfs_loss(&out, sample.label, self.xi)
            }
            Some(h) => {
                let hidden = clamp_hidden(&out, self.params.t_inf, self.t_clamp);
                let g = h.loss_and_grad(&hidden, sample.label)?;
                for (a, b) in acc
                    .head_weights
                    .as_mut()
                    .unwrap()
                    .as_mut_slice()
                    .iter_mut()
                    .zip(g.weights.as_slice())
                {
                    *a += b;
                }
                for (a, b) in acc.head_bias.as_mut().unwrap().iter_mut().zip(&g.bias) {
                    *a += b;
                }
                // silent hidden neurons read a constant
                let g_hidden: Vec<f64> = g
                    .hidden
                    .iter()
                    .zip(&out)
                    .map(|(&gh, &t)| if t < self.params.t_inf { gh } else { 0.0 })
                    .collect();
                (g.loss, g_hidden)
            }
        };
        acc.loss += loss;
        backward_into(&self.params, &self.weights, &trace, &g_out, &mut acc.weights, None)?;
        Ok(())
    }
}

const GRAD_CHUNK: usize = 8;

/// Metrics of one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_accuracy: f64,
    pub pieces_output_layer: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub epochs: Vec<EpochMetrics>,
    pub best_test_accuracy: Option<f64>,
    pub best_epoch: Option<usize>,
}

impl Metrics {
    /// Writes `epoch,train_loss,test_accuracy,pieces_output_layer`.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["epoch", "train_loss", "test_accuracy", "pieces_output_layer"])?;
        for e in &self.epochs {
            w.write_record([
                e.epoch.to_string(),
                e.train_loss.to_string(),
                e.test_accuracy.to_string(),
                e.pieces_output_layer.map_or(String::new(), |p| p.to_string()),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainResult {
    pub final_model: Model,
    /// Model at the epoch with the best test accuracy (the initialization if
    /// no epoch ran).
    pub best_model: Model,
    pub metrics: Metrics,
}

pub const CHECKPOINT_VERSION: u32 = 1;

/// Everything needed to resume training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub topology: Topology,
    pub config: TrainConfig,
    pub model: Model,
    pub best_model: Model,
    pub adam: AdamState,
    pub epoch: usize,
    pub shuffle_seed: u64,
    /// Position of the shuffle stream, in 32-bit words.
    pub rng_word_pos: u128,
    pub metrics: Metrics,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let c: Self = serde_json::from_slice(&std::fs::read(path)?)?;
        if c.version != CHECKPOINT_VERSION {
            return Err(Error::Config(format!(
                "unsupported checkpoint version {}",
                c.version
            )));
        }
        Ok(c)
    }
}

/// Epoch-by-epoch training state.
#[derive(Debug, Clone)]
pub struct Trainer<'d> {
    config: TrainConfig,
    train: &'d [Sample],
    test: &'d [Sample],
    model: Model,
    best_model: Model,
    adam: AdamState,
    shuffle_seed: u64,
    rng: Rng,
    epoch: usize,
    metrics: Metrics,
}

fn check_samples(samples: &[Sample], inputs: usize, classes: usize) -> Result<()> {
    for s in samples {
        if s.features.len() != inputs {
            return dim_err(format!(
                "sample has {} features, network expects {inputs}",
                s.features.len()
            ));
        }
        if s.label >= classes {
            return dim_err(format!("label {} but only {classes} classes", s.label));
        }
    }
    Ok(())
}

impl<'d> Trainer<'d> {
    pub fn new(
        train: &'d [Sample],
        test: &'d [Sample],
        topology: &Topology,
        init: &DistributionSpec,
        config: TrainConfig,
    ) -> Result<Self> {
        let mut init_rng = derived_rng(config.seed, &[0]);
        let model = Model::init(topology, init, config.readout, &mut init_rng)?;
        Self::from_model(train, test, model, config)
    }

    /// Starts training from given weights.
    pub fn from_model(
        train: &'d [Sample],
        test: &'d [Sample],
        model: Model,
        config: TrainConfig,
    ) -> Result<Self> {
        config.validate()?;
        if train.is_empty() {
            return Err(Error::Input("training set is empty".into()));
        }
        let topology = model.topology();
        check_samples(train, topology.inputs(), topology.outputs())?;
        check_samples(test, topology.inputs(), topology.outputs())?;
        let shuffle_seed = derive_seed(config.seed, &[1]);
        Ok(Self {
            adam: AdamState::new(&model.tensor_sizes()),
            best_model: model.clone(),
            model,
            shuffle_seed,
            rng: rng_from_seed(shuffle_seed),
            epoch: 0,
            metrics: Metrics::default(),
            config,
            train,
            test,
        })
    }

    pub fn resume(train: &'d [Sample], test: &'d [Sample], checkpoint: Checkpoint) -> Result<Self> {
        let mut t = Self::from_model(train, test, checkpoint.model, checkpoint.config)?;
        if checkpoint.adam.m.len() != t.adam.m.len() {
            return dim_err("optimizer state does not match the model");
        }
        t.best_model = checkpoint.best_model;
        t.adam = checkpoint.adam;
        t.epoch = checkpoint.epoch;
        t.metrics = checkpoint.metrics;
        t.shuffle_seed = checkpoint.shuffle_seed;
        t.rng = rng_from_seed(checkpoint.shuffle_seed);
        t.rng.set_word_pos(checkpoint.rng_word_pos);
        Ok(t)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            topology: self.model.topology(),
            config: self.config.clone(),
            model: self.model.clone(),
            best_model: self.best_model.clone(),
            adam: self.adam.clone(),
            epoch: self.epoch,
            shuffle_seed: self.shuffle_seed,
            rng_word_pos: self.rng.get_word_pos(),
            metrics: self.metrics.clone(),
        }
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn metrics(&self) -> &Metrics {
        &self.metrics
    }

    pub fn is_done(&self) -> bool {
        self.epoch >= self.config.epochs
    }

    fn batch_gradient(&self, batch: &[usize]) -> Result<Grads> {
        let eval = Evaluator::new(&self.model, &self.config);
        let partial = batch
            .par_chunks(GRAD_CHUNK)
            .map(|chunk| {
                let mut acc = Grads::zeros(&eval.weights, eval.head);
                for &i in chunk {
                    eval.accumulate(&self.train[i], &mut acc)?;
                }
                Ok(acc)
            })
            .collect::<Result<Vec<Grads>>>()?;
        let mut total = Grads::zeros(&eval.weights, eval.head);
        for p in &partial {
            total.add(p);
        }
        total.scale(1.0 / batch.len() as f64);
        Ok(total)
    }

    fn bump_silent(&mut self, g: &Grads) {
        let last = g.fired.len() - 1;
        let bump = self.config.weight_bump;
        for (l, fired) in g.fired.iter().enumerate() {
            let w = self.model.weights.layer_mut(l);
            for (i, &f) in fired.iter().enumerate() {
                if !f || (l == last && g.missed_label[i]) {
                    w.row_mut(i).iter_mut().for_each(|x| *x += bump);
                }
            }
        }
    }

    /// Trains one epoch and records its metrics.
    pub fn run_epoch(&mut self) -> Result<EpochMetrics> {
        let epoch = self.epoch + 1;
        let mut order: Vec<usize> = (0..self.train.len()).collect();
        order.shuffle(&mut self.rng);
        let mut loss_sum = 0.0;
        for (b, batch) in order.chunks(self.config.batch_size).enumerate() {
            let mut g = self.batch_gradient(batch)?;
            if !g.all_finite() {
                return Err(Error::Divergence {
                    epoch,
                    batch: b,
                    message: format!("non-finite loss or gradient (loss {})", g.loss),
                });
            }
            loss_sum += g.loss * batch.len() as f64;
            if self.config.positive_weights {
                gate_positive(&self.model.weights, &mut g.weights);
            }
            let grads = g.tensors();
            let mut params = self.model.tensors_mut();
            self.adam
                .update(self.config.learning_rate, &mut params, &grads)?;
            if self.config.weight_bump > 0.0 {
                self.bump_silent(&g);
            }
        }
        self.epoch = epoch;

        let eval = Evaluator::new(&self.model, &self.config);
        let test_accuracy = eval.accuracy(self.test)?;
        let pieces = if self.config.eval_every > 0 && epoch % self.config.eval_every == 0 {
            let inputs: Vec<Vec<f64>> = self.train.iter().map(|s| s.features.clone()).collect();
            let counter = count_on_inputs(&self.config.params, &eval.weights, &inputs, false)?;
            Some(counter.counts(false).output())
        } else {
            None
        };
        let m = EpochMetrics {
            epoch,
            train_loss: loss_sum / self.train.len() as f64,
            test_accuracy,
            pieces_output_layer: pieces,
        };
        if self.metrics.best_test_accuracy.map_or(true, |b| test_accuracy > b) {
            self.metrics.best_test_accuracy = Some(test_accuracy);
            self.metrics.best_epoch = Some(epoch);
            self.best_model = self.model.clone();
        }
        self.metrics.epochs.push(m.clone());
        Ok(m)
    }

    pub fn finish(self) -> TrainResult {
        TrainResult {
            final_model: self.model,
            best_model: self.best_model,
            metrics: self.metrics,
        }
    }
}

/// Trains for `config.epochs` epochs with Adam on mean minibatch gradients.
pub fn train(
    train_set: &[Sample],
    test_set: &[Sample],
    topology: &Topology,
    init: &DistributionSpec,
    config: &TrainConfig,
) -> Result<TrainResult> {
    let mut t = Trainer::new(train_set, test_set, topology, init, config.clone())?;
    while !t.is_done() {
        t.run_epoch()?;
    }
    Ok(t.finish())
}
