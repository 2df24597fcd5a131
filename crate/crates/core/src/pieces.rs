//! Causal paths and piece identifiers.
//!
//! Every spiking neuron gets an integer ID that identifies its causal path:
//! in the first computed layer the ID names the causal set itself, deeper
//! layers key on the causal set together with the IDs of the presynaptic
//! neurons it selects. A layer's ID is the tuple of its neuron IDs, and the
//! network's ID is the tuple of its layer IDs. Two inputs lie in the same
//! piece of a layer iff their IDs agree there.

use std::hash::BuildHasher;

use hashbrown::{DefaultHashBuilder, HashTable};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Result};
use crate::model::{NetworkParams, WeightStack};
use crate::nlif::{forward_network, CausalSet, NetworkTrace};
use crate::stats::{IntHistogram, Quartiles};

/// Neuron-level piece ID; `EMPTY_ID` marks a neuron that did not spike.
pub type PieceId = i32;
pub const EMPTY_ID: PieceId = -1;

/// Append-only set of `u32` strings numbered in insertion order.
#[derive(Clone, Default)]
struct Interner {
    words: Vec<u32>,
    spans: Vec<(usize, usize)>,
    table: HashTable<u32>,
    hasher: DefaultHashBuilder,
}

impl Interner {
    fn len(&self) -> usize {
        self.spans.len()
    }

    fn key(&self, i: u32) -> &[u32] {
        let (s, e) = self.spans[i as usize];
        &self.words[s..e]
    }

    fn find(&self, key: &[u32]) -> Option<u32> {
        let h = self.hasher.hash_one(key);
        self.table.find(h, |&i| self.key(i) == key).copied()
    }

    /// Returns the index of `key` and whether it was new.
    fn intern(&mut self, key: &[u32]) -> (u32, bool) {
        let h = self.hasher.hash_one(key);
        if let Some(i) = self.table.find(h, |&i| self.key(i) == key) {
            return (*i, false);
        }
        let id = u32::try_from(self.spans.len()).expect("more than 2^32 distinct keys");
        let start = self.words.len();
        self.words.extend_from_slice(key);
        self.spans.push((start, self.words.len()));
        let (words, spans, hasher) = (&self.words, &self.spans, &self.hasher);
        self.table.insert_unique(h, id, |&i| {
            let (s, e) = spans[i as usize];
            hasher.hash_one(&words[s..e])
        });
        (id, true)
    }
}

impl std::fmt::Debug for Interner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Interner")
            .field("keys", &self.spans.len())
            .field("words", &self.words.len())
            .finish()
    }
}

/// Canonical key of one neuron's causal path.
///
/// Encoded as `[m, prev_id(c_1), .., prev_id(c_m), c_1, .., c_m]`, or
/// `[m, c_1, .., c_m]` in the first computed layer. The empty set is `[0]`
/// in both cases.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PieceKey(Vec<u32>);

impl PieceKey {
    pub fn empty() -> Self {
        Self(vec![0])
    }

    /// Key for the first computed layer.
    pub fn first_layer(set: &CausalSet) -> Self {
        let mut words = Vec::with_capacity(set.len() + 1);
        encode_first(set, &mut words);
        Self(words)
    }

    /// Key for a deeper layer, given the IDs of every neuron one layer down.
    pub fn deeper(set: &CausalSet, prev_ids: &[PieceId]) -> Self {
        let mut words = Vec::with_capacity(2 * set.len() + 1);
        encode_deeper(set, prev_ids, &mut words);
        Self(words)
    }

    pub fn is_empty_set(&self) -> bool {
        self.0 == [0]
    }

    pub fn words(&self) -> &[u32] {
        &self.0
    }
}

fn encode_first(set: &CausalSet, out: &mut Vec<u32>) {
    out.clear();
    out.push(set.len() as u32);
    out.extend(set.indices().iter().map(|&j| j as u32));
}

fn encode_deeper(set: &CausalSet, prev_ids: &[PieceId], out: &mut Vec<u32>) {
    out.clear();
    out.push(set.len() as u32);
    out.extend(set.indices().iter().map(|&j| prev_ids[j] as u32));
    out.extend(set.indices().iter().map(|&j| j as u32));
}

/// Per-layer map from piece keys to neuron IDs.
///
/// The empty key is pre-bound to `-1`; every fresh key receives the current
/// table size (counting the empty entry), so IDs start at 1.
#[derive(Debug, Clone, Default)]
pub struct PieceTable {
    keys: Interner,
}

impl PieceTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of entries including the reserved empty key.
    pub fn len(&self) -> usize {
        self.keys.len() + 1
    }

    /// Never true: the empty key is always present.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of distinct non-empty keys.
    pub fn num_nonempty(&self) -> usize {
        self.keys.len()
    }

    pub fn get(&self, key: &PieceKey) -> Option<PieceId> {
        if key.is_empty_set() {
            return Some(EMPTY_ID);
        }
        self.keys.find(&key.0).map(|i| i as PieceId + 1)
    }

    pub fn assign(&mut self, key: &PieceKey) -> PieceId {
        self.assign_words(&key.0)
    }

    fn assign_words(&mut self, words: &[u32]) -> PieceId {
        if words == [0] {
            return EMPTY_ID;
        }
        let (i, _) = self.keys.intern(words);
        PieceId::try_from(i + 1).expect("piece IDs exceed i32 range")
    }
}

/// Piece IDs for a list of samples: per sample, per layer, per neuron, plus
/// (once assigned) per sample and layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PieceIds {
    layer_sizes: Vec<usize>,
    offsets: Vec<usize>,
    stride: usize,
    num_samples: usize,
    neuron: Vec<PieceId>,
    layer: Vec<u32>,
    /// Layer ID of the all-silent tuple, per layer, if it occurred.
    empty_layer_ids: Vec<Option<u32>>,
}

impl PieceIds {
    fn new(layer_sizes: Vec<usize>) -> Self {
        let mut offsets = Vec::with_capacity(layer_sizes.len());
        let mut acc = 0;
        for &n in &layer_sizes {
            offsets.push(acc);
            acc += n;
        }
        Self {
            empty_layer_ids: vec![None; layer_sizes.len()],
            layer_sizes,
            offsets,
            stride: acc,
            num_samples: 0,
            neuron: Vec::new(),
            layer: Vec::new(),
        }
    }

    pub fn num_samples(&self) -> usize {
        self.num_samples
    }

    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len()
    }

    /// Sizes of the computed layers.
    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    /// Neuron IDs of one sample and layer.
    pub fn neuron_ids(&self, sample: usize, layer: usize) -> &[PieceId] {
        let base = sample * self.stride + self.offsets[layer];
        &self.neuron[base..base + self.layer_sizes[layer]]
    }

    pub fn neuron_id(&self, sample: usize, layer: usize, neuron: usize) -> PieceId {
        self.neuron_ids(sample, layer)[neuron]
    }

    pub fn has_layer_ids(&self) -> bool {
        self.layer.len() == self.num_samples * self.num_layers() && self.num_samples > 0
    }

    /// Layer ID of one sample; panics if layer IDs were not assigned.
    pub fn layer_id(&self, sample: usize, layer: usize) -> u32 {
        assert!(self.has_layer_ids(), "layer IDs not assigned");
        self.layer[sample * self.num_layers() + layer]
    }

    /// Layer ID of the tuple where no neuron spiked, if any sample had one.
    pub fn empty_layer_id(&self, layer: usize) -> Option<u32> {
        self.empty_layer_ids[layer]
    }
}

/// Neuron-ID assignment state shared by the batch and streaming paths.
#[derive(Debug, Clone)]
struct NeuronAssigner {
    input_size: usize,
    layer_sizes: Vec<usize>,
    tables: Vec<PieceTable>,
    scratch: Vec<u32>,
}

impl NeuronAssigner {
    fn new(shape: &[usize]) -> Self {
        Self {
            input_size: shape[0],
            layer_sizes: shape[1..].to_vec(),
            tables: vec![PieceTable::new(); shape.len() - 1],
            scratch: Vec::new(),
        }
    }

    fn check(&self, trace: &NetworkTrace) -> Result<()> {
        let shape = trace.shape();
        if shape[0] != self.input_size || shape[1..] != self.layer_sizes[..] {
            let mut expected = vec![self.input_size];
            expected.extend(&self.layer_sizes);
            return dim_err(format!(
                "trace has shape {shape:?}, expected {expected:?}"
            ));
        }
        Ok(())
    }

    /// Writes the neuron IDs of `trace` into `out` (flat, layer after layer).
    fn assign(&mut self, trace: &NetworkTrace, out: &mut Vec<PieceId>) {
        out.clear();
        let mut prev_start = 0;
        for (l, layer) in trace.layers.iter().enumerate() {
            let start = out.len();
            for neuron in layer {
                if l == 0 {
                    encode_first(&neuron.causal_set, &mut self.scratch);
                } else {
                    let prev = &out[prev_start..start];
                    encode_deeper(&neuron.causal_set, prev, &mut self.scratch);
                }
                let id = self.tables[l].assign_words(&self.scratch);
                out.push(id);
            }
            prev_start = start;
        }
    }
}

/// Layer-ID assignment state.
#[derive(Debug, Clone)]
struct LayerAssigner {
    tables: Vec<Interner>,
    empty_ids: Vec<Option<u32>>,
    scratch: Vec<u32>,
}

impl LayerAssigner {
    fn new(num_layers: usize) -> Self {
        Self {
            tables: vec![Interner::default(); num_layers],
            empty_ids: vec![None; num_layers],
            scratch: Vec::new(),
        }
    }

    fn assign(&mut self, layer: usize, ids: &[PieceId]) -> u32 {
        self.scratch.clear();
        self.scratch.extend(ids.iter().map(|&i| i as u32));
        let (id, fresh) = self.tables[layer].intern(&self.scratch);
        if fresh && ids.iter().all(|&i| i == EMPTY_ID) {
            self.empty_ids[layer] = Some(id);
        }
        id
    }
}

/// Assigns neuron IDs over samples in order, layers inner, neurons innermost.
pub fn assign_neuron_piece_ids(traces: &[NetworkTrace]) -> Result<(PieceIds, Vec<PieceTable>)> {
    let Some(first) = traces.first() else {
        return dim_err("no traces given");
    };
    let shape = first.shape();
    let mut assigner = NeuronAssigner::new(&shape);
    let mut ids = PieceIds::new(shape[1..].to_vec());
    ids.neuron.reserve(traces.len() * ids.stride);
    let mut buf = Vec::with_capacity(ids.stride);
    for trace in traces {
        assigner.check(trace)?;
        assigner.assign(trace, &mut buf);
        ids.neuron.extend_from_slice(&buf);
        ids.num_samples += 1;
    }
    Ok((ids, assigner.tables))
}

/// Assigns one ID per distinct tuple of neuron IDs, per layer, in encounter
/// order starting at 0.
pub fn assign_layer_piece_ids(mut ids: PieceIds) -> PieceIds {
    let num_layers = ids.num_layers();
    let mut assigner = LayerAssigner::new(num_layers);
    let mut layer = Vec::with_capacity(ids.num_samples * num_layers);
    for s in 0..ids.num_samples {
        for l in 0..num_layers {
            layer.push(assigner.assign(l, ids.neuron_ids(s, l)));
        }
    }
    ids.layer = layer;
    ids.empty_layer_ids = assigner.empty_ids;
    ids
}

fn check_layer(ids: &PieceIds, layer: usize) -> Result<()> {
    if layer >= ids.num_layers() {
        return dim_err(format!(
            "layer {layer} out of range for {} computed layers",
            ids.num_layers()
        ));
    }
    if !ids.has_layer_ids() && ids.num_samples > 0 {
        return dim_err("layer IDs have not been assigned");
    }
    Ok(())
}

/// Number of distinct layer IDs at `layer`. Unless `include_empty` is set, the
/// tuple in which no neuron of the layer spiked is not counted.
pub fn count_pieces(ids: &PieceIds, layer: usize, include_empty: bool) -> Result<usize> {
    check_layer(ids, layer)?;
    let mut seen = vec![false; ids.num_samples];
    let mut count = 0;
    for s in 0..ids.num_samples {
        let id = ids.layer_id(s, layer);
        if !include_empty && ids.empty_layer_ids[layer] == Some(id) {
            continue;
        }
        if !seen[id as usize] {
            seen[id as usize] = true;
            count += 1;
        }
    }
    Ok(count)
}

/// Number of distinct tuples of layer IDs over all layers. Unless
/// `include_empty` is set, a sample where no neuron of any layer spiked is
/// not counted.
pub fn count_network_pieces(ids: &PieceIds, include_empty: bool) -> Result<usize> {
    check_layer(ids, 0)?;
    let num_layers = ids.num_layers();
    let mut table = Interner::default();
    let mut count = 0;
    for s in 0..ids.num_samples {
        let tuple = &ids.layer[s * num_layers..(s + 1) * num_layers];
        let silent = tuple
            .iter()
            .zip(&ids.empty_layer_ids)
            .all(|(&id, e)| *e == Some(id));
        if !include_empty && silent {
            continue;
        }
        if table.intern(tuple).1 {
            count += 1;
        }
    }
    Ok(count)
}

/// Distinct-piece counts per computed layer and for the whole network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PieceCounts {
    pub samples: usize,
    pub per_layer: Vec<usize>,
    pub network: usize,
}

impl PieceCounts {
    pub fn output(&self) -> usize {
        *self.per_layer.last().unwrap()
    }
}

/// Streaming version of the ID assignment: consumes traces one by one in
/// sample order and keeps only the tables, not the traces.
#[derive(Debug, Clone)]
pub struct PieceCounter {
    neurons: NeuronAssigner,
    layers: LayerAssigner,
    network: Interner,
    silent_network_id: Option<u32>,
    set_sizes: Vec<IntHistogram>,
    record: Option<PieceIds>,
    samples: usize,
    buf: Vec<PieceId>,
    layer_buf: Vec<u32>,
}

impl PieceCounter {
    /// `shape` is `[N0, N1, ..., NL]`. With `record` set, every assigned ID is
    /// kept and can be retrieved through [`PieceCounter::into_ids`].
    pub fn new(shape: &[usize], record: bool) -> Result<Self> {
        if shape.len() < 2 || shape.contains(&0) {
            return dim_err(format!("invalid network shape {shape:?}"));
        }
        let num_layers = shape.len() - 1;
        Ok(Self {
            neurons: NeuronAssigner::new(shape),
            layers: LayerAssigner::new(num_layers),
            network: Interner::default(),
            silent_network_id: None,
            set_sizes: vec![IntHistogram::default(); num_layers],
            record: record.then(|| PieceIds::new(shape[1..].to_vec())),
            samples: 0,
            buf: Vec::new(),
            layer_buf: Vec::with_capacity(num_layers),
        })
    }

    pub fn num_samples(&self) -> usize {
        self.samples
    }

    pub fn push(&mut self, trace: &NetworkTrace) -> Result<()> {
        self.neurons.check(trace)?;
        self.neurons.assign(trace, &mut self.buf);
        self.layer_buf.clear();
        let mut offset = 0;
        let mut all_silent = true;
        for (l, layer) in trace.layers.iter().enumerate() {
            for neuron in layer {
                self.set_sizes[l].add(neuron.causal_set.len());
            }
            let ids = &self.buf[offset..offset + layer.len()];
            all_silent &= ids.iter().all(|&i| i == EMPTY_ID);
            self.layer_buf.push(self.layers.assign(l, ids));
            offset += layer.len();
        }
        let (net_id, fresh) = self.network.intern(&self.layer_buf);
        if fresh && all_silent {
            self.silent_network_id = Some(net_id);
        }
        if let Some(rec) = &mut self.record {
            rec.neuron.extend_from_slice(&self.buf);
            rec.layer.extend_from_slice(&self.layer_buf);
            rec.num_samples += 1;
        }
        self.samples += 1;
        Ok(())
    }

    pub fn counts(&self, include_empty: bool) -> PieceCounts {
        let per_layer = self
            .layers
            .tables
            .iter()
            .zip(&self.layers.empty_ids)
            .map(|(t, e)| t.len() - usize::from(!include_empty && e.is_some()))
            .collect();
        let network = self.network.len()
            - usize::from(!include_empty && self.silent_network_id.is_some());
        PieceCounts {
            samples: self.samples,
            per_layer,
            network,
        }
    }

    /// Quartiles of causal-set sizes over all neurons of `layer`.
    pub fn set_size_quartiles(&self, layer: usize, exclude_empty: bool) -> Quartiles {
        let h = &self.set_sizes[layer];
        if exclude_empty {
            h.without_zero().quartiles()
        } else {
            h.quartiles()
        }
    }

    pub fn set_size_histogram(&self, layer: usize) -> &IntHistogram {
        &self.set_sizes[layer]
    }

    pub fn neuron_tables(&self) -> &[PieceTable] {
        &self.neurons.tables
    }

    /// Recorded IDs, with layer IDs filled in, if recording was requested.
    pub fn into_ids(self) -> Option<PieceIds> {
        let mut ids = self.record?;
        ids.empty_layer_ids = self.layers.empty_ids;
        Some(ids)
    }
}

const FORWARD_CHUNK: usize = 512;

/// Runs the network on every input and counts pieces. Forward passes run in
/// parallel over fixed chunks; IDs are assigned in input order.
pub fn count_on_inputs(
    params: &NetworkParams,
    weights: &WeightStack,
    inputs: &[Vec<f64>],
    record: bool,
) -> Result<PieceCounter> {
    let mut counter = PieceCounter::new(weights.topology().sizes(), record)?;
    for chunk in inputs.chunks(FORWARD_CHUNK) {
        let traces = chunk
            .par_iter()
            .map(|x| forward_network(params, weights, x))
            .collect::<Result<Vec<_>>>()?;
        for t in &traces {
            counter.push(t)?;
        }
    }
    Ok(counter)
}

/// Causal sets reached from a subset of one layer, per layer down to the
/// first computed layer.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CausalPath {
    /// `levels[n]` lists `(neuron, causal set)` for computed layer `n`,
    /// sorted by neuron index.
    pub levels: Vec<Vec<(usize, CausalSet)>>,
}

impl CausalPath {
    pub fn top(&self) -> &[(usize, CausalSet)] {
        self.levels.last().map_or(&[], Vec::as_slice)
    }

    /// True if no neuron of the starting subset spiked.
    pub fn is_silent(&self) -> bool {
        self.top().iter().all(|(_, c)| c.is_empty())
    }
}

/// Unrolls the causal path of the neurons `subset` of computed layer `layer`.
pub fn causal_path(trace: &NetworkTrace, layer: usize, subset: &[usize]) -> Result<CausalPath> {
    if layer >= trace.num_layers() {
        return dim_err(format!(
            "layer {layer} out of range for {} computed layers",
            trace.num_layers()
        ));
    }
    if let Some(&bad) = subset.iter().find(|&&i| i >= trace.layers[layer].len()) {
        return dim_err(format!("neuron {bad} out of range in layer {layer}"));
    }
    let mut levels = vec![Vec::new(); layer + 1];
    let mut reached = CausalSet::from_indices(subset.to_vec());
    for n in (0..=layer).rev() {
        let entries: Vec<(usize, CausalSet)> = reached
            .indices()
            .iter()
            .map(|&i| (i, trace.layers[n][i].causal_set.clone()))
            .collect();
        let below: Vec<usize> = entries
            .iter()
            .flat_map(|(_, c)| c.indices().iter().copied())
            .collect();
        levels[n] = entries;
        reached = CausalSet::from_indices(below);
    }
    Ok(CausalPath { levels })
}

/// Quartiles of causal-set sizes of every neuron of `layer` across traces.
pub fn set_size_stats(traces: &[NetworkTrace], layer: usize, exclude_empty: bool) -> Result<Quartiles> {
    let mut h = IntHistogram::default();
    for t in traces {
        if layer >= t.num_layers() {
            return dim_err(format!("layer {layer} out of range"));
        }
        for n in &t.layers[layer] {
            if !(exclude_empty && n.causal_set.is_empty()) {
                h.add(n.causal_set.len());
            }
        }
    }
    Ok(h.quartiles())
}
