//! Evolutionary search for initialization parameters that maximize the
//! number of output-layer pieces on a probe set.

use std::io::Write;

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{yinyang_grid, GridConfig};
use crate::distribution::{DistributionSpec, Family};
use crate::error::{Error, Result};
use crate::model::{NetworkParams, Topology};
use crate::pieces::count_on_inputs;
use crate::rng::{derive_seed, derived_rng, rng_from_seed, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvoConfig {
    pub family: Family,
    pub population_keep: usize,
    pub perturb_std: f64,
    pub patience: usize,
    pub max_loops: usize,
    /// Grid points per axis of the Yin Yang probe.
    pub probe_resolution: usize,
    pub topology: Topology,
    pub nets_per_candidate: usize,
    pub seed: u64,
    pub params: NetworkParams,
    /// Starting parameter sets; unit parameters jittered once when empty.
    pub initial: Vec<[f64; 4]>,
}

impl Default for EvoConfig {
    fn default() -> Self {
        Self {
            family: Family::Normal,
            population_keep: 4,
            perturb_std: 0.1,
            patience: 10,
            max_loops: 200,
            probe_resolution: 100,
            topology: Topology::new(vec![4, 100, 3]).unwrap(),
            nets_per_candidate: 1,
            seed: 0,
            params: NetworkParams::default(),
            initial: Vec::new(),
        }
    }
}

impl EvoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_keep == 0 || !(self.perturb_std > 0.0) || self.nets_per_candidate == 0 {
            return Err(Error::Config(format!(
                "need population_keep >= 1, perturb_std > 0, nets_per_candidate >= 1: {self:?}"
            )));
        }
        if !self.initial.is_empty() && self.initial.len() != self.population_keep {
            return Err(Error::Config(format!(
                "{} initial sets for a population of {}",
                self.initial.len(),
                self.population_keep
            )));
        }
        self.params.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub spec: DistributionSpec,
    /// Mean output-layer piece count over the candidate's networks.
    pub fitness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    /// 0 for the initial population.
    pub loop_index: usize,
    pub candidate_index: usize,
    pub parameters: Vec<f64>,
    pub fitness: f64,
    pub kept: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvoResult {
    pub best: Candidate,
    pub initial_best_fitness: f64,
    pub loops: usize,
    pub history: Vec<HistoryRow>,
}

impl EvoResult {
    /// Writes `loop,candidate_index,p0..p3,fitness,kept`.
    pub fn write_history_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["loop", "candidate_index", "p0", "p1", "p2", "p3", "fitness", "kept"])?;
        for r in &self.history {
            let mut rec = vec![r.loop_index.to_string(), r.candidate_index.to_string()];
            rec.extend(r.parameters.iter().map(f64::to_string));
            rec.push(r.fitness.to_string());
            rec.push(u8::from(r.kept).to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Best fitness after each loop.
    pub fn best_by_loop(&self) -> Vec<f64> {
        let mut out = vec![f64::NEG_INFINITY; self.loops + 1];
        for r in &self.history {
            out[r.loop_index] = out[r.loop_index].max(r.fitness);
        }
        let mut best = f64::NEG_INFINITY;
        out.iter_mut()
            .map(|x| {
                best = best.max(*x);
                best
            })
            .collect()
    }
}

/// Number of distinct output-layer pieces of one network sampled from `spec`
/// over the probe inputs.
pub fn fitness(
    spec: &DistributionSpec,
    topology: &Topology,
    probe: &[Vec<f64>],
    params: &NetworkParams,
    seed: u64,
) -> Result<usize> {
    if probe.is_empty() {
        return Err(Error::Input("probe set is empty".into()));
    }
    let weights = spec.init_weights(topology, &mut rng_from_seed(seed))?;
    let counter = count_on_inputs(params, &weights, probe, false)?;
    Ok(counter.counts(false).output())
}

/// Seed derived from a candidate's parameters, so re-evaluating a candidate
/// samples the same networks.
fn candidate_seed(base: u64, spec: &DistributionSpec, net: usize) -> u64 {
    let mut path: Vec<u64> = spec.parameter_vector().iter().map(|x| x.to_bits()).collect();
    path.push(net as u64);
    derive_seed(base, &path)
}

/// Adds `N(0, std^2)` noise, multiplicatively for parameters that must stay
/// positive.
fn perturb(spec: &DistributionSpec, std: f64, rng: &mut Rng) -> Result<DistributionSpec> {
    let noise = Normal::new(0.0, std).map_err(|e| Error::Config(e.to_string()))?;
    let mask = spec.positive_mask();
    let v: Vec<f64> = spec
        .parameter_vector()
        .iter()
        .zip(&mask)
        .map(|(&x, &pos)| {
            let z = noise.sample(rng);
            if pos {
                x * z.exp()
            } else {
                x + z
            }
        })
        .collect();
    spec.with_parameter_vector(&v)
}

/// Runs the search with an arbitrary fitness function `f(spec, seed)`.
pub fn evolve_with<F>(config: &EvoConfig, f: F) -> Result<EvoResult>
where
    F: Fn(&DistributionSpec, u64) -> Result<f64> + Sync,
{
    config.validate()?;
    let keep = config.population_keep;
    let mut rng = derived_rng(config.seed, &[0]);
    let unit = DistributionSpec::scaled(config.family, [1.0; 4])?;
    let initial: Vec<DistributionSpec> = if config.initial.is_empty() {
        (0..keep)
            .map(|_| perturb(&unit, config.perturb_std, &mut rng))
            .collect::<Result<_>>()?
    } else {
        config
            .initial
            .iter()
            .map(|c| DistributionSpec::scaled(config.family, *c))
            .collect::<Result<_>>()?
    };

    let evaluate = |specs: &[DistributionSpec]| -> Result<Vec<f64>> {
        specs
            .par_iter()
            .map(|s| {
                let mut total = 0.0;
                for net in 0..config.nets_per_candidate {
                    total += f(s, candidate_seed(config.seed, s, net))?;
                }
                Ok(total / config.nets_per_candidate as f64)
            })
            .collect()
    };

    let mut history = Vec::new();
    let fit = evaluate(&initial)?;
    let mut population: Vec<Candidate> = initial
        .into_iter()
        .zip(fit)
        .map(|(spec, fitness)| Candidate { spec, fitness })
        .collect();
    for (i, c) in population.iter().enumerate() {
        history.push(HistoryRow {
            loop_index: 0,
            candidate_index: i,
            parameters: c.spec.parameter_vector(),
            fitness: c.fitness,
            kept: true,
        });
    }
    let best_of = |p: &[Candidate]| p.iter().map(|c| c.fitness).fold(f64::NEG_INFINITY, f64::max);
    let initial_best = best_of(&population);
    let mut best = initial_best;
    let mut stale = 0;
    let mut loops = 0;

    while loops < config.max_loops && stale < config.patience {
        loops += 1;
        let children: Vec<DistributionSpec> = population
            .iter()
            .map(|c| perturb(&c.spec, config.perturb_std, &mut rng))
            .collect::<Result<_>>()?;
        let child_fit = evaluate(&children)?;
        let mut all: Vec<Candidate> = population.clone();
        all.extend(
            children
                .into_iter()
                .zip(child_fit)
                .map(|(spec, fitness)| Candidate { spec, fitness }),
        );
        let mut order: Vec<usize> = (0..all.len()).collect();
        // stable: equal fitness keeps the lower index first
        order.sort_by(|&a, &b| all[b].fitness.total_cmp(&all[a].fitness));
        let kept: Vec<usize> = order[..keep].to_vec();
        for (i, c) in all.iter().enumerate() {
            history.push(HistoryRow {
                loop_index: loops,
                candidate_index: i,
                parameters: c.spec.parameter_vector(),
                fitness: c.fitness,
                kept: kept.contains(&i),
            });
        }
        population = kept.iter().map(|&i| all[i].clone()).collect();
        let b = best_of(&population);
        if b > best {
            best = b;
            stale = 0;
        } else {
            stale += 1;
        }
    }

    Ok(EvoResult {
        best: population[0].clone(),
        initial_best_fitness: initial_best,
        loops,
        history,
    })
}

/// Runs the search with piece counts on the Yin Yang grid as fitness.
pub fn evolve(config: &EvoConfig) -> Result<EvoResult> {
    let probe: Vec<Vec<f64>> = yinyang_grid(&GridConfig {
        resolution: config.probe_resolution,
    })?
    .into_iter()
    .map(|s| s.features)
    .collect();
    evolve_with(config, |spec, seed| {
        Ok(fitness(spec, &config.topology, &probe, &config.params, seed)? as f64)
    })
}
