//! Dense tanh feed-forward networks and their parameter stores.
//!
//! A network with widths `[d_0, d_1, ..., d_D]` applies `D` affine layers;
//! tanh follows every layer except the last. Parameters live in one flat
//! `f64` array, layer-major (`W_1` row-major, then `b_1`, then `W_2`, ...),
//! with a freeze flag per layer. The flat layout is what the optimizer,
//! the tape, and the checkpoint format all share.

use serde::{Deserialize, Serialize};

use crate::sampling::SplitMix64;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Tanh,
}

/// Layer widths of a dense network: input, hidden layers, output.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub layer_widths: Vec<usize>,
    pub activation: Activation,
}

impl NetworkSpec {
    /// A tanh network. Requires at least one hidden layer and positive widths.
    pub fn new(layer_widths: Vec<usize>) -> Result<Self> {
        if layer_widths.len() < 3 {
            return Err(Error::config(format!(
                "network needs input, at least one hidden layer, and output; got widths {layer_widths:?}"
            )));
        }
        if layer_widths.iter().any(|&w| w == 0) {
            return Err(Error::config(format!("zero width in {layer_widths:?}")));
        }
        Ok(Self { layer_widths, activation: Activation::Tanh })
    }

    /// Number of affine layers (weight matrices).
    pub fn depth(&self) -> usize {
        self.layer_widths.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.layer_widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_widths.last().unwrap()
    }

    /// Fan-in/fan-out of affine layer `l` (0-based).
    pub fn layer_shape(&self, l: usize) -> (usize, usize) {
        (self.layer_widths[l + 1], self.layer_widths[l])
    }

    /// Parameters in layer `l`: weights plus biases.
    pub fn layer_len(&self, l: usize) -> usize {
        let (rows, cols) = self.layer_shape(l);
        rows * cols + rows
    }

    /// Total parameter count: sum of `d_i * d_{i-1} + d_i`.
    pub fn param_count(&self) -> usize {
        (0..self.depth()).map(|l| self.layer_len(l)).sum()
    }
}

/// Flat parameter storage with per-layer freeze flags.
///
/// The slot order never changes for a given spec; freezing only hides a
/// layer from the trainable view. `version` increments on every freeze
/// change so cached evaluations that depend on frozen layers can detect
/// staleness.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamStore {
    params: Vec<f64>,
    frozen: Vec<bool>,
    offsets: Vec<usize>,
    version: u64,
}

impl ParamStore {
    pub fn zeros(spec: &NetworkSpec) -> Self {
        let depth = spec.depth();
        let mut offsets = Vec::with_capacity(depth + 1);
        let mut acc = 0;
        for l in 0..depth {
            offsets.push(acc);
            acc += spec.layer_len(l);
        }
        offsets.push(acc);
        Self {
            params: vec![0.0; acc],
            frozen: vec![false; depth],
            offsets,
            version: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn depth(&self) -> usize {
        self.frozen.len()
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.params
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn layer_offset(&self, l: usize) -> usize {
        self.offsets[l]
    }

    /// Weights then biases of layer `l`, for a network shaped by `spec`.
    pub fn layer(&self, spec: &NetworkSpec, l: usize) -> (&[f64], &[f64]) {
        let (rows, cols) = spec.layer_shape(l);
        let o = self.offsets[l];
        (&self.params[o..o + rows * cols], &self.params[o + rows * cols..o + rows * cols + rows])
    }

    pub fn layer_mut(&mut self, spec: &NetworkSpec, l: usize) -> (&mut [f64], &mut [f64]) {
        let (rows, cols) = spec.layer_shape(l);
        let o = self.offsets[l];
        let (w, rest) = self.params[o..o + rows * cols + rows].split_at_mut(rows * cols);
        (w, rest)
    }

    pub fn is_frozen(&self, l: usize) -> bool {
        self.frozen[l]
    }

    pub fn frozen_flags(&self) -> &[bool] {
        &self.frozen
    }

    /// Freeze or unfreeze one layer; bumps the version on any change.
    pub fn set_frozen(&mut self, l: usize, frozen: bool) {
        if self.frozen[l] != frozen {
            self.frozen[l] = frozen;
            self.version += 1;
        }
    }

    pub fn freeze_all(&mut self) {
        for l in 0..self.frozen.len() {
            self.set_frozen(l, true);
        }
    }

    /// Number of affine layers at the front that are frozen, before the
    /// first trainable layer.
    pub fn frozen_prefix_len(&self) -> usize {
        self.frozen.iter().take_while(|&&f| f).count()
    }

    /// Slot count of the trainable view.
    pub fn trainable_len(&self) -> usize {
        self.frozen
            .iter()
            .enumerate()
            .filter(|(_, f)| !**f)
            .map(|(l, _)| self.offsets[l + 1] - self.offsets[l])
            .sum()
    }

    /// Copy the trainable slots into `out` in layer order.
    pub fn copy_trainable(&self, out: &mut Vec<f64>) {
        out.clear();
        for l in 0..self.depth() {
            if !self.frozen[l] {
                out.extend_from_slice(&self.params[self.offsets[l]..self.offsets[l + 1]]);
            }
        }
    }

    /// Write a trainable-view vector back into the store.
    pub fn load_trainable(&mut self, v: &[f64]) {
        let mut i = 0;
        for l in 0..self.depth() {
            if !self.frozen[l] {
                let n = self.offsets[l + 1] - self.offsets[l];
                self.params[self.offsets[l]..self.offsets[l + 1]].copy_from_slice(&v[i..i + n]);
                i += n;
            }
        }
        assert_eq!(i, v.len(), "trainable view length mismatch");
    }

    /// Apply `f(slot_view, update_view)` pairwise over trainable slots.
    pub fn update_trainable(&mut self, update: &[f64], mut f: impl FnMut(&mut f64, f64)) {
        let mut i = 0;
        for l in 0..self.depth() {
            if !self.frozen[l] {
                for p in &mut self.params[self.offsets[l]..self.offsets[l + 1]] {
                    f(p, update[i]);
                    i += 1;
                }
            }
        }
        assert_eq!(i, update.len(), "gradient length mismatch");
    }
}

/// Glorot-uniform initialization for hidden layers, biases zero.
///
/// With `output_layer_zero` the last layer's weights and bias are zero, so
/// the freshly built network is the zero function; otherwise the output
/// weights are Glorot-initialized like the rest.
pub fn init_params(spec: &NetworkSpec, seed: u64, output_layer_zero: bool) -> ParamStore {
    let mut store = ParamStore::zeros(spec);
    let mut rng = SplitMix64::new(seed);
    let depth = spec.depth();
    for l in 0..depth {
        if l == depth - 1 && output_layer_zero {
            break;
        }
        let (rows, cols) = spec.layer_shape(l);
        let bound = (6.0 / (rows + cols) as f64).sqrt();
        let (w, _b) = store.layer_mut(spec, l);
        for v in w.iter_mut() {
            *v = (rng.next_f64() * 2.0 - 1.0) * bound;
        }
        debug_assert_eq!(w.len(), rows * cols);
    }
    store
}

/// Evaluate the network at `x`. The output width must be 1.
pub fn forward(spec: &NetworkSpec, store: &ParamStore, x: &[f64]) -> Result<f64> {
    if x.len() != spec.input_dim() {
        return Err(Error::config(format!(
            "input dimension {} does not match network input width {}",
            x.len(),
            spec.input_dim()
        )));
    }
    if spec.output_dim() != 1 {
        return Err(Error::config("forward expects a scalar output network"));
    }
    let depth = spec.depth();
    let mut h = x.to_vec();
    let mut next = Vec::new();
    for l in 0..depth {
        let (rows, cols) = spec.layer_shape(l);
        let (w, b) = store.layer(spec, l);
        next.clear();
        next.resize(rows, 0.0);
        for j in 0..rows {
            let mut acc = b[j];
            let row = &w[j * cols..(j + 1) * cols];
            for (wk, hk) in row.iter().zip(&h) {
                acc = wk.mul_add(*hk, acc);
            }
            next[j] = if l + 1 < depth { acc.tanh() } else { acc };
        }
        std::mem::swap(&mut h, &mut next);
    }
    Ok(h[0])
}

const NET_MAGIC: &[u8; 8] = b"MGPNET01";

/// Serialize spec + store to the documented flat little-endian layout.
pub fn checkpoint_bytes(spec: &NetworkSpec, store: &ParamStore) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + 8 * spec.layer_widths.len() + 8 * store.len());
    out.extend_from_slice(NET_MAGIC);
    out.extend_from_slice(&store.version().to_le_bytes());
    out.extend_from_slice(&(spec.layer_widths.len() as u64).to_le_bytes());
    for &w in &spec.layer_widths {
        out.extend_from_slice(&(w as u64).to_le_bytes());
    }
    for &f in store.frozen_flags() {
        out.push(u8::from(f));
    }
    for &p in store.as_slice() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

/// Parse a checkpoint produced by [`checkpoint_bytes`]. Returns the spec,
/// the store, and the number of bytes consumed.
pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<(NetworkSpec, ParamStore, usize)> {
    let need = |n: usize, at: usize| -> Result<()> {
        if bytes.len() < at + n {
            Err(Error::Format("truncated network checkpoint".into()))
        } else {
            Ok(())
        }
    };
    need(24, 0)?;
    if &bytes[..8] != NET_MAGIC {
        return Err(Error::Format("bad network checkpoint magic".into()));
    }
    let version = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let n_widths = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
    need(8 * n_widths, 24)?;
    let mut widths = Vec::with_capacity(n_widths);
    for i in 0..n_widths {
        widths.push(u64::from_le_bytes(bytes[24 + 8 * i..32 + 8 * i].try_into().unwrap()) as usize);
    }
    let spec = NetworkSpec::new(widths)?;
    let depth = spec.depth();
    let mut at = 24 + 8 * n_widths;
    need(depth, at)?;
    let frozen: Vec<bool> = bytes[at..at + depth].iter().map(|&b| b != 0).collect();
    at += depth;
    let count = spec.param_count();
    need(8 * count, at)?;
    let mut store = ParamStore::zeros(&spec);
    for (i, p) in store.as_mut_slice().iter_mut().enumerate() {
        *p = f64::from_le_bytes(bytes[at + 8 * i..at + 8 * i + 8].try_into().unwrap());
    }
    at += 8 * count;
    for (l, f) in frozen.into_iter().enumerate() {
        store.set_frozen(l, f);
    }
    store.version = version;
    Ok((spec, store, at))
}
