//! Exact derivatives of network outputs: forward second-order jets along
//! tracked input coordinates, with reverse accumulation over the recorded
//! jet computation for parameter gradients.
//!
//! No finite differencing anywhere in here; finite differences appear only
//! as independent oracles in the self-check suites and tests.

pub mod jet;
pub mod tape;

pub use jet::Jet2;
pub use tape::{backward_block, forward_block, BlockBatch, Tape, TrainableLayout};

use crate::network::{NetworkSpec, ParamStore};
use crate::{Error, Result};

/// Value of a scalar quantity with first and diagonal second derivatives
/// along the tracked input coordinates. Cross second derivatives are not
/// carried; the shipped residuals only need the Laplacian diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiJet {
    pub value: f64,
    /// First derivative per tracked coordinate.
    pub grad_in: Vec<f64>,
    /// Second derivative per tracked coordinate.
    pub hess_diag: Vec<f64>,
}

impl MultiJet {
    pub fn zero(dims: usize) -> Self {
        Self { value: 0.0, grad_in: vec![0.0; dims], hess_diag: vec![0.0; dims] }
    }

    pub fn dims(&self) -> usize {
        self.grad_in.len()
    }

    pub fn set_zero(&mut self) {
        self.value = 0.0;
        self.grad_in.fill(0.0);
        self.hess_diag.fill(0.0);
    }

    pub fn add_assign(&mut self, other: &MultiJet) {
        self.value += other.value;
        for (a, b) in self.grad_in.iter_mut().zip(&other.grad_in) {
            *a += b;
        }
        for (a, b) in self.hess_diag.iter_mut().zip(&other.hess_diag) {
            *a += b;
        }
    }
}

impl BlockBatch {
    /// Write the jet of neuron `j` at in-block point `p` into `out`.
    /// Second-derivative lanes that are not carried read as zero.
    pub fn jet_into(&self, j: usize, p: usize, out: &mut MultiJet) {
        debug_assert_eq!(out.dims(), self.d1);
        let skip = self.d1 - self.d2;
        out.value = self.lane(j, 0)[p];
        for c in 0..self.d1 {
            out.grad_in[c] = self.lane(j, 1 + c)[p];
            out.hess_diag[c] = if c < skip {
                0.0
            } else {
                self.lane(j, 1 + self.d1 + c - skip)[p]
            };
        }
    }
}

/// Evaluate the network at `x`, returning `u`, `du/dx_c`, and `d2u/dx_c^2`
/// for every tracked coordinate. Exact up to floating-point rounding.
pub fn forward_jets(
    spec: &NetworkSpec,
    store: &ParamStore,
    x: &[f64],
    tracked: &[usize],
) -> Result<MultiJet> {
    if x.len() != spec.input_dim() {
        return Err(Error::config(format!(
            "input dimension {} does not match network input width {}",
            x.len(),
            spec.input_dim()
        )));
    }
    if let Some(&bad) = tracked.iter().find(|&&c| c >= x.len()) {
        return Err(Error::config(format!(
            "tracked coordinate {bad} outside input of dimension {}",
            x.len()
        )));
    }
    if spec.output_dim() != 1 {
        return Err(Error::config("forward_jets expects a scalar output network"));
    }
    let mut input = BlockBatch::default();
    input.seed(x, x.len(), tracked, 0);
    let mut tape = Tape::new();
    forward_block(spec, store, 0, &input, &mut tape);
    Ok(tape.output().jet(0, 0))
}
