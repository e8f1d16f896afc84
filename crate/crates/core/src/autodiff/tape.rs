//! Batched jet propagation through network layers with reverse accumulation.
//!
//! Points are processed in small blocks. Each neuron owns a contiguous
//! panel of `nc * b` floats (`nc` jet components, `b` points in the block),
//! so the affine kernels are straight fused multiply-add sweeps over
//! panels and vectorize well. The tape records the pre- and post-activation
//! panels of every layer it applies; the backward sweep walks them in
//! reverse, accumulating parameter adjoints for unfrozen layers only.

use super::jet::{tanh_backward_dir, tanh_derivs, tanh_value};
use crate::network::{NetworkSpec, ParamStore};

/// One block of per-neuron jet panels.
///
/// Component order per neuron: value, first derivatives (one per tracked
/// direction), then second derivatives. Second derivatives may be carried
/// for a tail subset of the tracked directions (`hess_from` skips the
/// leading ones): residuals never use the second time derivative, so the
/// training path drops that lane. Lane `(j, c)` holds the values of
/// component `c` of neuron `j` for every point in the block.
#[derive(Clone, Debug, Default)]
pub struct BlockBatch {
    pub neurons: usize,
    /// First-derivative lanes per neuron.
    pub d1: usize,
    /// Second-derivative lanes per neuron; lane `i` pairs with first
    /// derivative lane `i + (d1 - d2)`.
    pub d2: usize,
    /// Points in the block.
    pub b: usize,
    pub data: Vec<f64>,
}

impl BlockBatch {
    pub fn reset(&mut self, neurons: usize, d1: usize, d2: usize, b: usize) {
        debug_assert!(d2 <= d1);
        self.neurons = neurons;
        self.d1 = d1;
        self.d2 = d2;
        self.b = b;
        self.data.clear();
        self.data.resize(neurons * self.nc() * b, 0.0);
    }

    /// Shape the buffer without clearing it; only for sweeps that
    /// overwrite every element.
    fn shape_for_overwrite(&mut self, neurons: usize, d1: usize, d2: usize, b: usize) {
        self.neurons = neurons;
        self.d1 = d1;
        self.d2 = d2;
        self.b = b;
        self.data.resize(neurons * self.nc() * b, 0.0);
    }

    /// Shape after another block (same lane layout, possibly different
    /// neuron count).
    fn shape_like(&mut self, other: &BlockBatch, neurons: usize) {
        self.shape_for_overwrite(neurons, other.d1, other.d2, other.b);
    }

    /// Components per neuron.
    #[inline]
    pub fn nc(&self) -> usize {
        1 + self.d1 + self.d2
    }

    #[inline]
    pub fn panel(&self, j: usize) -> &[f64] {
        let nc = self.nc();
        &self.data[j * nc * self.b..(j + 1) * nc * self.b]
    }

    #[inline]
    pub fn panel_mut(&mut self, j: usize) -> &mut [f64] {
        let nc = self.nc();
        &mut self.data[j * nc * self.b..(j + 1) * nc * self.b]
    }

    #[inline]
    pub fn lane(&self, j: usize, c: usize) -> &[f64] {
        let nc = self.nc();
        &self.data[(j * nc + c) * self.b..(j * nc + c + 1) * self.b]
    }

    #[inline]
    pub fn lane_mut(&mut self, j: usize, c: usize) -> &mut [f64] {
        let nc = self.nc();
        &mut self.data[(j * nc + c) * self.b..(j * nc + c + 1) * self.b]
    }

    /// Jet of neuron `j` at in-block point `p`. Dropped second-derivative
    /// lanes read as zero.
    pub fn jet(&self, j: usize, p: usize) -> super::MultiJet {
        let mut jet = super::MultiJet::zero(self.d1);
        self.jet_into(j, p, &mut jet);
        jet
    }

    /// Seed input panels for a block of points (flat coords, `dim` each).
    /// Tracked directions get a unit first derivative on their own
    /// coordinate; everything else is zero. Second derivatives are carried
    /// for `tracked[hess_from..]`.
    pub fn seed(&mut self, coords: &[f64], dim: usize, tracked: &[usize], hess_from: usize) {
        let b = coords.len() / dim;
        self.reset(dim, tracked.len(), tracked.len() - hess_from, b);
        let nc = self.nc();
        for a in 0..dim {
            for p in 0..b {
                self.data[(a * nc) * b + p] = coords[p * dim + a];
            }
            for (c, &tc) in tracked.iter().enumerate() {
                if tc == a {
                    let lane = self.lane_mut(a, 1 + c);
                    lane.fill(1.0);
                }
            }
        }
    }
}

/// Gradient slot layout of a store's trainable view: per-layer offsets into
/// the flat gradient vector, `None` for frozen layers.
#[derive(Clone, Debug)]
pub struct TrainableLayout {
    pub offsets: Vec<Option<usize>>,
    pub len: usize,
}

impl TrainableLayout {
    pub fn new(spec: &NetworkSpec, store: &ParamStore) -> Self {
        let mut offsets = Vec::with_capacity(spec.depth());
        let mut acc = 0;
        for l in 0..spec.depth() {
            if store.is_frozen(l) {
                offsets.push(None);
            } else {
                offsets.push(Some(acc));
                acc += spec.layer_len(l);
            }
        }
        Self { offsets, len: acc }
    }
}

/// Recorded forward pass over one block of points. The input block is
/// owned by the caller (it is usually a cached prefix) and passed to both
/// sweeps.
///
/// Reusable: buffers grow on first use and are recycled between blocks and
/// epochs. The backward sweep never mutates the recorded panels, so
/// replaying it produces bit-identical gradients.
#[derive(Debug, Default)]
pub struct Tape {
    preact: Vec<BlockBatch>,
    postact: Vec<BlockBatch>,
    cot: BlockBatch,
    cot_next: BlockBatch,
    start_layer: usize,
    applied: usize,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Pre-activation panels of the last applied (output) layer.
    pub fn output(&self) -> &BlockBatch {
        &self.preact[self.applied - 1]
    }

    /// Cotangent block to fill before calling [`backward_block`]; shaped
    /// like the output block and zeroed.
    pub fn cotangent_mut(&mut self) -> &mut BlockBatch {
        let out = &self.preact[self.applied - 1];
        let (n, d1, d2, b) = (out.neurons, out.d1, out.d2, out.b);
        self.cot.reset(n, d1, d2, b);
        &mut self.cot
    }
}

/// 8-wide lane helpers. Every lane operation is exactly one
/// `f64::mul_add`, so the intrinsic and scalar paths produce identical
/// bits in identical order.
#[cfg(all(target_arch = "x86_64", target_feature = "avx512f"))]
mod wide {
    use core::arch::x86_64::*;

    pub type W = __m512d;

    #[inline(always)]
    pub unsafe fn zero() -> W {
        _mm512_setzero_pd()
    }

    #[inline(always)]
    pub unsafe fn splat(x: f64) -> W {
        _mm512_set1_pd(x)
    }

    #[inline(always)]
    pub unsafe fn load(p: &[f64], at: usize) -> W {
        debug_assert!(at + 8 <= p.len());
        _mm512_loadu_pd(p.as_ptr().add(at))
    }

    #[inline(always)]
    pub unsafe fn store(p: &mut [f64], at: usize, v: W) {
        debug_assert!(at + 8 <= p.len());
        _mm512_storeu_pd(p.as_mut_ptr().add(at), v)
    }

    #[inline(always)]
    pub unsafe fn fmadd(a: W, b: W, c: W) -> W {
        _mm512_fmadd_pd(a, b, c)
    }

    #[inline(always)]
    pub unsafe fn to_array(v: W) -> [f64; 8] {
        core::mem::transmute(v)
    }
}

/// Register-resident affine sweep for a full block: `NC` chunks of 8
/// points per neuron panel. Accumulation order matches the generic path
/// bit for bit.
#[cfg(all(target_arch = "x86_64", target_feature = "avx512f"))]
#[inline(always)]
fn affine_rows_fixed<const NC: usize>(
    w: &[f64],
    bias: &[f64],
    input: &[f64],
    out: &mut [f64],
    rows: usize,
    cols: usize,
) {
    // rows in pairs: twice the independent accumulator chains hides the
    // fused-multiply-add latency; per-row accumulation order is unchanged
    unsafe {
        let mut j = 0;
        while j + 2 <= rows {
            let mut acc0 = [wide::zero(); NC];
            let mut acc1 = [wide::zero(); NC];
            acc0[0] = wide::splat(bias[j]);
            acc1[0] = wide::splat(bias[j + 1]);
            let row0 = &w[j * cols..(j + 1) * cols];
            let row1 = &w[(j + 1) * cols..(j + 2) * cols];
            for k in 0..cols {
                let w0 = wide::splat(row0[k]);
                let w1 = wide::splat(row1[k]);
                for c in 0..NC {
                    let x = wide::load(input, (k * NC + c) * 8);
                    acc0[c] = wide::fmadd(w0, x, acc0[c]);
                    acc1[c] = wide::fmadd(w1, x, acc1[c]);
                }
            }
            for c in 0..NC {
                wide::store(out, (j * NC + c) * 8, acc0[c]);
                wide::store(out, ((j + 1) * NC + c) * 8, acc1[c]);
            }
            j += 2;
        }
        if j < rows {
            let mut acc = [wide::zero(); NC];
            acc[0] = wide::splat(bias[j]);
            let row = &w[j * cols..(j + 1) * cols];
            for (k, &wjk) in row.iter().enumerate() {
                let wv = wide::splat(wjk);
                for c in 0..NC {
                    acc[c] = wide::fmadd(wv, wide::load(input, (k * NC + c) * 8), acc[c]);
                }
            }
            for c in 0..NC {
                wide::store(out, (j * NC + c) * 8, acc[c]);
            }
        }
    }
}

#[cfg(not(all(target_arch = "x86_64", target_feature = "avx512f")))]
#[allow(clippy::needless_range_loop)]
#[inline(always)]
fn affine_rows_fixed<const NC: usize>(
    w: &[f64],
    bias: &[f64],
    input: &[f64],
    out: &mut [f64],
    rows: usize,
    cols: usize,
) {
    for j in 0..rows {
        let mut acc = [[0.0f64; 8]; NC];
        acc[0] = [bias[j]; 8];
        let row = &w[j * cols..(j + 1) * cols];
        for (k, &wjk) in row.iter().enumerate() {
            for c in 0..NC {
                let x: &[f64; 8] = input[(k * NC + c) * 8..][..8].try_into().unwrap();
                for l in 0..8 {
                    acc[c][l] = wjk.mul_add(x[l], acc[c][l]);
                }
            }
        }
        for c in 0..NC {
            out[(j * NC + c) * 8..][..8].copy_from_slice(&acc[c]);
        }
    }
}

/// Points per full evaluation block; must match
/// [`crate::gradestack::BLOCK`].
pub(crate) const BLOCK_WIDTH: usize = 8;

/// Affine panel kernel: `out[j] = b[j] (value lane) + sum_k W[j,k] * in[k]`.
/// Accumulation runs in ascending `k`, matching the scalar forward pass
/// bit for bit.
pub(crate) fn affine_forward(
    w: &[f64],
    bias: &[f64],
    input: &BlockBatch,
    out: &mut BlockBatch,
    rows: usize,
    cols: usize,
) {
    let (nc, b) = (input.nc(), input.b);
    // fixed-size micro-kernels for the full-block panel shapes that occur
    // in practice; they overwrite every element, so the buffer is not
    // pre-zeroed on that path
    out.shape_like(input, rows);
    if b == BLOCK_WIDTH {
        match nc {
            1 => return affine_rows_fixed::<1>(w, bias, &input.data, &mut out.data, rows, cols),
            4 => return affine_rows_fixed::<4>(w, bias, &input.data, &mut out.data, rows, cols),
            5 => return affine_rows_fixed::<5>(w, bias, &input.data, &mut out.data, rows, cols),
            6 => return affine_rows_fixed::<6>(w, bias, &input.data, &mut out.data, rows, cols),
            7 => return affine_rows_fixed::<7>(w, bias, &input.data, &mut out.data, rows, cols),
            8 => return affine_rows_fixed::<8>(w, bias, &input.data, &mut out.data, rows, cols),
            9 => return affine_rows_fixed::<9>(w, bias, &input.data, &mut out.data, rows, cols),
            _ => {}
        }
    }
    out.data.fill(0.0);
    for j in 0..rows {
        let row = &w[j * cols..(j + 1) * cols];
        let panel = out.panel_mut(j);
        panel[..b].fill(bias[j]);
        for (k, &wjk) in row.iter().enumerate() {
            let inp = input.panel(k);
            for (o, i) in panel.iter_mut().zip(inp) {
                *o = wjk.mul_add(*i, *o);
            }
        }
    }
}

/// tanh panel kernel: value lane through tanh, derivative lanes through the
/// shared jet rules. Lane sweeps are written slice-wise over the points of
/// the block so they vectorize.
pub(crate) fn tanh_forward(pre: &BlockBatch, post: &mut BlockBatch) {
    let (n, d1, d2, b) = (pre.neurons, pre.d1, pre.d2, pre.b);
    let skip = d1 - d2;
    post.shape_for_overwrite(n, d1, d2, b);
    let mut t = [0.0f64; BLOCK_WIDTH];
    let mut s = [0.0f64; BLOCK_WIDTH];
    for j in 0..n {
        let a = pre.panel(j);
        let o = post.panel_mut(j);
        for p in 0..b {
            let (tp, sp) = tanh_value(a[p]);
            t[p] = tp;
            s[p] = sp;
            o[p] = tp;
        }
        // first-derivative lanes without a matching second derivative
        for c in 0..skip {
            let a1 = &a[(1 + c) * b..(2 + c) * b];
            let o1 = &mut o[(1 + c) * b..(2 + c) * b];
            for p in 0..b {
                o1[p] = s[p] * a1[p];
            }
        }
        // paired first/second derivative lanes
        for c2 in 0..d2 {
            let c = skip + c2;
            let a1 = &a[(1 + c) * b..(2 + c) * b];
            let a2 = &a[(1 + d1 + c2) * b..(2 + d1 + c2) * b];
            let (head, tail) = o[(1 + c) * b..].split_at_mut((d1 - c + c2) * b);
            let o1 = &mut head[..b];
            let o2 = &mut tail[..b];
            for p in 0..b {
                let (v1, v2) = tanh_derivs(t[p], s[p], a1[p], a2[p]);
                o1[p] = v1;
                o2[p] = v2;
            }
        }
    }
}

/// Run layers `start_layer..depth` on `input`, recording panels.
pub fn forward_block(
    spec: &NetworkSpec,
    store: &ParamStore,
    start_layer: usize,
    input: &BlockBatch,
    tape: &mut Tape,
) {
    let depth = spec.depth();
    assert!(start_layer < depth);
    debug_assert_eq!(input.neurons, spec.layer_widths[start_layer]);
    tape.start_layer = start_layer;
    tape.applied = depth - start_layer;
    while tape.preact.len() < tape.applied {
        tape.preact.push(BlockBatch::default());
        tape.postact.push(BlockBatch::default());
    }
    for (i, l) in (start_layer..depth).enumerate() {
        let (rows, cols) = spec.layer_shape(l);
        let (w, bias) = store.layer(spec, l);
        // borrow juggling: the input of step i is the caller's block or postact[i-1]
        let mut pre = std::mem::take(&mut tape.preact[i]);
        {
            let inp = if i == 0 { input } else { &tape.postact[i - 1] };
            affine_forward(w, bias, inp, &mut pre, rows, cols);
        }
        if l + 1 < depth {
            let mut post = std::mem::take(&mut tape.postact[i]);
            tanh_forward(&pre, &mut post);
            tape.postact[i] = post;
        }
        tape.preact[i] = pre;
    }
}

/// In-place tanh cotangent transform: `cot` arrives holding adjoints of the
/// post-activation panels and leaves holding adjoints of the pre-activation
/// panels.
fn tanh_backward(pre: &BlockBatch, post: &BlockBatch, cot: &mut BlockBatch) {
    let (n, d1, d2, b) = (pre.neurons, pre.d1, pre.d2, pre.b);
    let skip = d1 - d2;
    let mut dv = [0.0f64; BLOCK_WIDTH];
    let mut t = [0.0f64; BLOCK_WIDTH];
    let mut s = [0.0f64; BLOCK_WIDTH];
    for j in 0..n {
        let a = pre.panel(j);
        let t_lane = post.lane(j, 0);
        let oc = cot.panel_mut(j);
        for p in 0..b {
            t[p] = t_lane[p];
            s[p] = 1.0 - t[p] * t[p];
            dv[p] = oc[p] * s[p];
        }
        for c in 0..skip {
            let a1 = &a[(1 + c) * b..(2 + c) * b];
            let o1 = &mut oc[(1 + c) * b..(2 + c) * b];
            for p in 0..b {
                dv[p] += -2.0 * t[p] * s[p] * a1[p] * o1[p];
                o1[p] *= s[p];
            }
        }
        for c2 in 0..d2 {
            let c = skip + c2;
            let a1 = &a[(1 + c) * b..(2 + c) * b];
            let a2 = &a[(1 + d1 + c2) * b..(2 + d1 + c2) * b];
            let (head, tail) = oc[(1 + c) * b..].split_at_mut((d1 - c + c2) * b);
            let o1 = &mut head[..b];
            let o2 = &mut tail[..b];
            for p in 0..b {
                let (dvc, dd1, dd2) = tanh_backward_dir(t[p], s[p], a1[p], a2[p], o1[p], o2[p]);
                dv[p] += dvc;
                o1[p] = dd1;
                o2[p] = dd2;
            }
        }
        oc[..b].copy_from_slice(&dv[..b]);
    }
}

/// Reverse sweep over the recorded block. The cotangent of the output
/// panels must already be in the tape's cotangent block. Parameter adjoints
/// of unfrozen layers are added into `grad` following `layout`; frozen
/// layers propagate adjoints but never materialize gradient entries.
pub fn backward_block(
    spec: &NetworkSpec,
    store: &ParamStore,
    input: &BlockBatch,
    tape: &mut Tape,
    layout: &TrainableLayout,
    grad: &mut [f64],
) {
    debug_assert_eq!(grad.len(), layout.len);
    let depth = spec.depth();
    let start = tape.start_layer;
    let mut cot = std::mem::take(&mut tape.cot);
    let mut cot_next = std::mem::take(&mut tape.cot_next);
    for l in (start..depth).rev() {
        let i = l - start;
        let (rows, cols) = spec.layer_shape(l);
        let (w, _) = store.layer(spec, l);
        if l + 1 < depth {
            // cot currently holds adjoints of postact[i]
            tanh_backward(&tape.preact[i], &tape.postact[i], &mut cot);
        }
        let input = if i == 0 { input } else { &tape.postact[i - 1] };
        let (nc, b) = (input.nc(), input.b);
        if let Some(goff) = layout.offsets[l] {
            let gw = &mut grad[goff..goff + rows * cols + rows];
            match (b == BLOCK_WIDTH, nc) {
                (true, 1) => weight_grad_fixed::<1>(&cot.data, &input.data, gw, rows, cols, b),
                (true, 4) => weight_grad_fixed::<4>(&cot.data, &input.data, gw, rows, cols, b),
                (true, 5) => weight_grad_fixed::<5>(&cot.data, &input.data, gw, rows, cols, b),
                (true, 6) => weight_grad_fixed::<6>(&cot.data, &input.data, gw, rows, cols, b),
                (true, 7) => weight_grad_fixed::<7>(&cot.data, &input.data, gw, rows, cols, b),
                (true, 8) => weight_grad_fixed::<8>(&cot.data, &input.data, gw, rows, cols, b),
                (true, 9) => weight_grad_fixed::<9>(&cot.data, &input.data, gw, rows, cols, b),
                _ => weight_grad_generic(&cot, input, gw, rows, cols, b),
            }
        }
        if l > start {
            // h_bar[k] = sum_j W[j,k] * a_bar[j]
            cot_next.shape_like(input, cols);
            match (b == BLOCK_WIDTH, nc) {
                (true, 1) => cot_prev_fixed::<1>(w, &cot.data, &mut cot_next.data, rows, cols),
                (true, 4) => cot_prev_fixed::<4>(w, &cot.data, &mut cot_next.data, rows, cols),
                (true, 5) => cot_prev_fixed::<5>(w, &cot.data, &mut cot_next.data, rows, cols),
                (true, 6) => cot_prev_fixed::<6>(w, &cot.data, &mut cot_next.data, rows, cols),
                (true, 7) => cot_prev_fixed::<7>(w, &cot.data, &mut cot_next.data, rows, cols),
                (true, 8) => cot_prev_fixed::<8>(w, &cot.data, &mut cot_next.data, rows, cols),
                (true, 9) => cot_prev_fixed::<9>(w, &cot.data, &mut cot_next.data, rows, cols),
                _ => {
                    cot_next.data.fill(0.0);
                    for j in 0..rows {
                        let aj = cot.panel(j);
                        let row = &w[j * cols..(j + 1) * cols];
                        for (k, &wjk) in row.iter().enumerate() {
                            let hk = cot_next.panel_mut(k);
                            for (h, a) in hk.iter_mut().zip(aj) {
                                *h = wjk.mul_add(*a, *h);
                            }
                        }
                    }
                }
            }
            std::mem::swap(&mut cot, &mut cot_next);
        }
    }
    tape.cot = cot;
    tape.cot_next = cot_next;
}

/// Weight/bias adjoints for one layer at a fixed panel shape: the dot
/// products keep 8 partial lanes and reduce them in a fixed tree order.
#[cfg(all(target_arch = "x86_64", target_feature = "avx512f"))]
#[inline(always)]
fn weight_grad_fixed<const NC: usize>(
    cot: &[f64],
    input: &[f64],
    gw: &mut [f64],
    rows: usize,
    cols: usize,
    b: usize,
) {
    unsafe {
        let mut j = 0;
        while j + 2 <= rows {
            let mut a0 = [wide::zero(); NC];
            let mut a1 = [wide::zero(); NC];
            for c in 0..NC {
                a0[c] = wide::load(cot, (j * NC + c) * 8);
                a1[c] = wide::load(cot, ((j + 1) * NC + c) * 8);
            }
            for k in 0..cols {
                let mut s0 = wide::zero();
                let mut s1 = wide::zero();
                for c in 0..NC {
                    let h = wide::load(input, (k * NC + c) * 8);
                    s0 = wide::fmadd(a0[c], h, s0);
                    s1 = wide::fmadd(a1[c], h, s1);
                }
                gw[j * cols + k] += hsum8(&wide::to_array(s0));
                gw[(j + 1) * cols + k] += hsum8(&wide::to_array(s1));
            }
            j += 2;
        }
        if j < rows {
            let mut aj = [wide::zero(); NC];
            for c in 0..NC {
                aj[c] = wide::load(cot, (j * NC + c) * 8);
            }
            for k in 0..cols {
                let mut acc = wide::zero();
                for c in 0..NC {
                    acc = wide::fmadd(aj[c], wide::load(input, (k * NC + c) * 8), acc);
                }
                gw[j * cols + k] += hsum8(&wide::to_array(acc));
            }
        }
        for j in 0..rows {
            let mut bacc = 0.0;
            for &ap in &cot[j * NC * 8..j * NC * 8 + b] {
                bacc += ap;
            }
            gw[rows * cols + j] += bacc;
        }
    }
}

#[cfg(not(all(target_arch = "x86_64", target_feature = "avx512f")))]
#[allow(clippy::needless_range_loop)]
#[inline(always)]
fn weight_grad_fixed<const NC: usize>(
    cot: &[f64],
    input: &[f64],
    gw: &mut [f64],
    rows: usize,
    cols: usize,
    b: usize,
) {
    for j in 0..rows {
        for k in 0..cols {
            let mut lanes = [0.0f64; 8];
            for c in 0..NC {
                let a: &[f64; 8] = cot[(j * NC + c) * 8..][..8].try_into().unwrap();
                let h: &[f64; 8] = input[(k * NC + c) * 8..][..8].try_into().unwrap();
                for l in 0..8 {
                    lanes[l] = a[l].mul_add(h[l], lanes[l]);
                }
            }
            gw[j * cols + k] += hsum8(&lanes);
        }
        let mut bacc = 0.0;
        for &ap in &cot[j * NC * 8..j * NC * 8 + b] {
            bacc += ap;
        }
        gw[rows * cols + j] += bacc;
    }
}

/// Fixed pairwise reduction order for the 8 partial lanes.
#[inline(always)]
fn hsum8(l: &[f64; 8]) -> f64 {
    ((l[0] + l[4]) + (l[1] + l[5])) + ((l[2] + l[6]) + (l[3] + l[7]))
}

fn weight_grad_generic(
    cot: &BlockBatch,
    input: &BlockBatch,
    gw: &mut [f64],
    rows: usize,
    cols: usize,
    b: usize,
) {
    for j in 0..rows {
        let aj = cot.panel(j);
        for k in 0..cols {
            let hk = input.panel(k);
            let mut acc = 0.0;
            for (ap, hp) in aj.iter().zip(hk) {
                acc = ap.mul_add(*hp, acc);
            }
            gw[j * cols + k] += acc;
        }
        let mut bacc = 0.0;
        for &ap in &aj[..b] {
            bacc += ap;
        }
        gw[rows * cols + j] += bacc;
    }
}

/// Input-adjoint sweep `h_bar[k] = sum_j W[j,k] a_bar[j]` with a register
/// accumulator per destination panel; ascending-`j` accumulation matches
/// the generic path bit for bit.
#[cfg(all(target_arch = "x86_64", target_feature = "avx512f"))]
#[inline(always)]
fn cot_prev_fixed<const NC: usize>(
    w: &[f64],
    cot: &[f64],
    out: &mut [f64],
    rows: usize,
    cols: usize,
) {
    unsafe {
        let mut k = 0;
        while k + 2 <= cols {
            let mut acc0 = [wide::zero(); NC];
            let mut acc1 = [wide::zero(); NC];
            for j in 0..rows {
                let w0 = wide::splat(w[j * cols + k]);
                let w1 = wide::splat(w[j * cols + k + 1]);
                for c in 0..NC {
                    let a = wide::load(cot, (j * NC + c) * 8);
                    acc0[c] = wide::fmadd(w0, a, acc0[c]);
                    acc1[c] = wide::fmadd(w1, a, acc1[c]);
                }
            }
            for c in 0..NC {
                wide::store(out, (k * NC + c) * 8, acc0[c]);
                wide::store(out, ((k + 1) * NC + c) * 8, acc1[c]);
            }
            k += 2;
        }
        if k < cols {
            let mut acc = [wide::zero(); NC];
            for j in 0..rows {
                let wv = wide::splat(w[j * cols + k]);
                for c in 0..NC {
                    acc[c] = wide::fmadd(wv, wide::load(cot, (j * NC + c) * 8), acc[c]);
                }
            }
            for c in 0..NC {
                wide::store(out, (k * NC + c) * 8, acc[c]);
            }
        }
    }
}

#[cfg(not(all(target_arch = "x86_64", target_feature = "avx512f")))]
#[allow(clippy::needless_range_loop)]
#[inline(always)]
fn cot_prev_fixed<const NC: usize>(
    w: &[f64],
    cot: &[f64],
    out: &mut [f64],
    rows: usize,
    cols: usize,
) {
    for k in 0..cols {
        let mut acc = [[0.0f64; 8]; NC];
        for j in 0..rows {
            let wjk = w[j * cols + k];
            for c in 0..NC {
                let a: &[f64; 8] = cot[(j * NC + c) * 8..][..8].try_into().unwrap();
                for l in 0..8 {
                    acc[c][l] = wjk.mul_add(a[l], acc[c][l]);
                }
            }
        }
        for c in 0..NC {
            out[(k * NC + c) * 8..][..8].copy_from_slice(&acc[c]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{init_params, NetworkSpec};

    #[test]
    fn backward_replay_is_bit_identical() {
        let spec = NetworkSpec::new(vec![2, 6, 5, 1]).unwrap();
        let store = init_params(&spec, 3, false);
        let mut input = BlockBatch::default();
        input.seed(&[0.3, -0.8], 2, &[0, 1], 0);
        let mut tape = Tape::new();
        forward_block(&spec, &store, 0, &input, &mut tape);
        let layout = TrainableLayout::new(&spec, &store);
        let mut g1 = vec![0.0; layout.len];
        let mut g2 = vec![0.0; layout.len];
        {
            let cot = tape.cotangent_mut();
            cot.lane_mut(0, 0).fill(1.0);
            cot.lane_mut(0, 2).fill(0.25);
        }
        backward_block(&spec, &store, &input, &mut tape, &layout, &mut g1);
        {
            let cot = tape.cotangent_mut();
            cot.lane_mut(0, 0).fill(1.0);
            cot.lane_mut(0, 2).fill(0.25);
        }
        backward_block(&spec, &store, &input, &mut tape, &layout, &mut g2);
        assert_eq!(g1, g2);
        assert!(g1.iter().any(|&g| g != 0.0));
    }

    #[test]
    fn frozen_layers_get_no_gradient_slots() {
        let spec = NetworkSpec::new(vec![2, 6, 5, 1]).unwrap();
        let mut store = init_params(&spec, 3, false);
        store.set_frozen(0, true);
        let layout = TrainableLayout::new(&spec, &store);
        assert_eq!(layout.len, spec.layer_len(1) + spec.layer_len(2));
        assert_eq!(layout.offsets[0], None);
        assert_eq!(layout.offsets[1], Some(0));
    }
}
