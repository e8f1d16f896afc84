//! Grade composition: fresh networks stacked on the frozen last hidden
//! layer of the previous grade, summed into a cumulative predictor.
//!
//! Grade 1 is an ordinary network. Grade `l+1` removes the output layer of
//! grade `l` and stacks a new network on the exposed hidden layer, so the
//! composed hidden chain keeps growing while each grade taps it with its
//! own linear output layer. The cumulative predictor is the sum of all
//! taps. Stage 2 clones the full grade-`L` composition into one network,
//! freezes everything except the `k` hidden layers nearest the output (and
//! the output layer), and retrains that clone; the original grade stores
//! are never mutated, which is what lets the earlier-grade sum keep its
//! stage-1 meaning everywhere in the domain.

use serde::{Deserialize, Serialize};

use crate::autodiff::tape::{affine_forward, tanh_forward};
use crate::autodiff::{BlockBatch, MultiJet};
use crate::network::{checkpoint_bytes, checkpoint_from_bytes, init_params, NetworkSpec, ParamStore};
use crate::sampling::PointSet;
use crate::{Error, Result};

use rayon::prelude::*;

/// Points per evaluation block. Fixed so that block-ordered reductions are
/// identical no matter how many threads run them.
pub const BLOCK: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    One,
    Two,
}

/// One grade: the network stacked on top of the frozen prefix.
#[derive(Clone, Debug)]
pub struct GradeNet {
    /// The grade's own network: input width equals the previous grade's
    /// last hidden width (or the problem input for grade 1), output width 1.
    pub spec: NetworkSpec,
    pub store: ParamStore,
    /// 1-based grade index.
    pub grade: usize,
}

impl GradeNet {
    /// Hidden layers this grade contributes to the composed chain.
    pub fn own_hidden(&self) -> usize {
        self.spec.depth() - 1
    }
}

/// The stage-2 retraining clone: the full grade-`L` composition with the
/// tail unfrozen.
#[derive(Clone, Debug)]
pub struct Stage2Net {
    pub spec: NetworkSpec,
    pub store: ParamStore,
    pub k: usize,
}

/// Description of what a tail unfreeze made trainable.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct UnfreezeSet {
    pub k: usize,
    /// Unfrozen hidden layers in chain order (nearest the input first).
    pub layers: Vec<UnfrozenLayer>,
    /// The grade whose output layer is retrained (always the last grade).
    pub output_grade: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct UnfrozenLayer {
    /// Index into the composed hidden chain.
    pub chain_index: usize,
    pub width: usize,
    /// Grade that originally trained this layer.
    pub grade: usize,
}

/// Which training phase the caches and trainable views refer to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    /// Stage-1 training of grade `i` (1-based); grades below `i` are frozen
    /// prefix and constant base.
    Grade(usize),
    Stage2,
}

/// Ordered list of trained grades plus the optional stage-2 clone.
#[derive(Clone, Debug)]
pub struct GradeStack {
    input_dim: usize,
    grades: Vec<GradeNet>,
    stage2: Option<Stage2Net>,
}

impl GradeStack {
    pub fn new(input_dim: usize) -> Self {
        Self { input_dim, grades: Vec::new(), stage2: None }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn grades(&self) -> &[GradeNet] {
        &self.grades
    }

    pub fn stage(&self) -> Stage {
        if self.stage2.is_some() {
            Stage::Two
        } else {
            Stage::One
        }
    }

    pub fn stage2(&self) -> Option<&Stage2Net> {
        self.stage2.as_ref()
    }

    pub fn stage2_mut(&mut self) -> Option<&mut Stage2Net> {
        self.stage2.as_mut()
    }

    pub fn grade_mut(&mut self, i: usize) -> &mut GradeNet {
        &mut self.grades[i]
    }

    /// Width of the exposed hidden layer a new grade would stack onto.
    pub fn boundary_width(&self) -> usize {
        match self.grades.last() {
            None => self.input_dim,
            Some(g) => g.spec.layer_widths[g.spec.depth() - 1],
        }
    }

    /// Spec for a new grade with the given hidden widths.
    pub fn grade_spec(&self, hidden: &[usize]) -> Result<NetworkSpec> {
        let mut widths = Vec::with_capacity(hidden.len() + 2);
        widths.push(self.boundary_width());
        widths.extend_from_slice(hidden);
        widths.push(1);
        NetworkSpec::new(widths)
    }

    /// Widths of the composed hidden chain, in order.
    pub fn chain_widths(&self) -> Vec<usize> {
        let mut widths = Vec::new();
        for g in &self.grades {
            widths.extend_from_slice(&g.spec.layer_widths[1..g.spec.depth()]);
        }
        widths
    }

    pub fn total_hidden_layers(&self) -> usize {
        self.grades.iter().map(|g| g.own_hidden()).sum()
    }

    /// Stack a new grade. Its output layer starts at zero, so the
    /// cumulative predictor (and therefore the loss) is unchanged until
    /// training moves the new parameters.
    pub fn push_grade(&mut self, top_spec: NetworkSpec, seed: u64) -> Result<&GradeNet> {
        if self.stage2.is_some() {
            return Err(Error::config("cannot push a grade after the stage-2 unfreeze"));
        }
        if top_spec.input_dim() != self.boundary_width() {
            return Err(Error::config(format!(
                "grade input width {} does not match the exposed hidden width {}",
                top_spec.input_dim(),
                self.boundary_width()
            )));
        }
        if top_spec.output_dim() != 1 {
            return Err(Error::config("grade output width must be 1"));
        }
        let store = init_params(&top_spec, seed, true);
        self.grades.push(GradeNet { spec: top_spec, store, grade: self.grades.len() + 1 });
        Ok(self.grades.last().unwrap())
    }

    /// Unfreeze the `k` hidden layers of the composed grade-`L` network
    /// nearest the output, plus the grade-`L` output layer.
    ///
    /// Requires `k` to exceed the hidden-layer count of the final grade
    /// alone (the tail must reach past it) and to fit inside the chain.
    /// Builds the stage-2 clone; the original grades stay untouched so the
    /// earlier-grade cumulative keeps evaluating with its trained weights.
    pub fn unfreeze_tail(&mut self, k: usize) -> Result<UnfreezeSet> {
        let last = self
            .grades
            .last()
            .ok_or_else(|| Error::config("unfreeze_tail needs at least one trained grade"))?;
        let k_last = last.own_hidden();
        let total = self.total_hidden_layers();
        if k <= k_last {
            return Err(Error::config(format!(
                "stage-2 k = {k} must exceed the final grade's hidden-layer count {k_last}: \
                 the unfrozen tail has to reach past the layers grade {} already trained",
                last.grade
            )));
        }
        if k > total {
            return Err(Error::config(format!(
                "stage-2 k = {k} exceeds the {total} hidden layers of the composition"
            )));
        }
        // composed spec: [input, chain widths..., 1]
        let chain = self.chain_widths();
        let mut widths = Vec::with_capacity(chain.len() + 2);
        widths.push(self.input_dim);
        widths.extend_from_slice(&chain);
        widths.push(1);
        let spec = NetworkSpec::new(widths)?;
        let mut store = ParamStore::zeros(&spec);
        // copy hidden layers grade by grade, then the last grade's output
        let mut l = 0;
        for g in &self.grades {
            for gl in 0..g.own_hidden() {
                let (w, b) = g.store.layer(&g.spec, gl);
                let (dw, db) = store.layer_mut(&spec, l);
                dw.copy_from_slice(w);
                db.copy_from_slice(b);
                l += 1;
            }
        }
        {
            let g = self.grades.last().unwrap();
            let (w, b) = g.store.layer(&g.spec, g.spec.depth() - 1);
            let (dw, db) = store.layer_mut(&spec, l);
            dw.copy_from_slice(w);
            db.copy_from_slice(b);
        }
        let frozen_hidden = total - k;
        for layer in 0..frozen_hidden {
            store.set_frozen(layer, true);
        }
        // describe the unfrozen tail
        let mut owners = Vec::with_capacity(total);
        for g in &self.grades {
            owners.extend(std::iter::repeat_n(g.grade, g.own_hidden()));
        }
        let layers = (frozen_hidden..total)
            .map(|ci| UnfrozenLayer { chain_index: ci, width: chain[ci], grade: owners[ci] })
            .collect();
        self.stage2 = Some(Stage2Net { spec, store, k });
        Ok(UnfreezeSet { k, layers, output_grade: self.grades.last().unwrap().grade })
    }

    /// Jets of the cumulative predictor over the first `n_grades` grades.
    pub fn partial_cumulative_jet(&self, n_grades: usize, x: &[f64], tracked: &[usize]) -> Result<MultiJet> {
        if x.len() != self.input_dim {
            return Err(Error::config(format!(
                "point dimension {} does not match stack input {}",
                x.len(),
                self.input_dim
            )));
        }
        let mut acc = MultiJet::zero(tracked.len());
        let mut cur = BlockBatch::default();
        cur.seed(x, x.len(), tracked, 0);
        let mut scratch = BlockBatch::default();
        let mut tap = BlockBatch::default();
        for g in &self.grades[..n_grades] {
            propagate_hidden(&g.spec, &g.store, &mut cur, &mut scratch);
            apply_output_tap(&g.spec, &g.store, &cur, &mut tap);
            acc.add_assign(&tap.jet(0, 0));
        }
        Ok(acc)
    }

    /// Jets of the cumulative predictor `sum_i u_i` at `x` (all grades).
    pub fn cumulative_jet(&self, x: &[f64], tracked: &[usize]) -> Result<MultiJet> {
        if self.grades.is_empty() {
            return Err(Error::config("empty grade stack"));
        }
        self.partial_cumulative_jet(self.grades.len(), x, tracked)
    }

    /// Stage-aware predictor: the stage-1 cumulative, or after the
    /// unfreeze the earlier-grade cumulative plus the retrained clone.
    pub fn predictor_jet(&self, x: &[f64], tracked: &[usize]) -> Result<MultiJet> {
        match &self.stage2 {
            None => self.cumulative_jet(x, tracked),
            Some(s2) => {
                let mut acc = self.partial_cumulative_jet(self.grades.len() - 1, x, tracked)?;
                let tail = crate::autodiff::forward_jets(&s2.spec, &s2.store, x, tracked)?;
                acc.add_assign(&tail);
                Ok(acc)
            }
        }
    }

    pub fn predictor_value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.predictor_jet(x, &[])?.value)
    }

    /// Predictor values over a point set, evaluated in fixed-size blocks in
    /// parallel; the result order is the point order regardless of threads.
    pub fn predictor_values(&self, points: &PointSet) -> Result<Vec<f64>> {
        let dim = points.dim;
        if dim != self.input_dim {
            return Err(Error::config("grid dimension does not match stack input"));
        }
        let chunks: Vec<&[f64]> = points.coords.chunks(BLOCK * dim).collect();
        let values: Vec<Vec<f64>> = chunks
            .par_iter()
            .map(|chunk| {
                let b = chunk.len() / dim;
                let mut cur = BlockBatch::default();
                cur.seed(chunk, dim, &[], 0);
                let mut scratch = BlockBatch::default();
                let mut tap = BlockBatch::default();
                let mut acc = vec![0.0; b];
                let upto = match &self.stage2 {
                    None => self.grades.len(),
                    Some(_) => self.grades.len() - 1,
                };
                for g in &self.grades[..upto] {
                    propagate_hidden(&g.spec, &g.store, &mut cur, &mut scratch);
                    apply_output_tap(&g.spec, &g.store, &cur, &mut tap);
                    for (a, v) in acc.iter_mut().zip(tap.lane(0, 0)) {
                        *a += v;
                    }
                }
                if let Some(s2) = &self.stage2 {
                    cur.seed(chunk, dim, &[], 0);
                    propagate_hidden(&s2.spec, &s2.store, &mut cur, &mut scratch);
                    apply_output_tap(&s2.spec, &s2.store, &cur, &mut tap);
                    for (a, v) in acc.iter_mut().zip(tap.lane(0, 0)) {
                        *a += v;
                    }
                }
                acc
            })
            .collect();
        Ok(values.concat())
    }

    /// The network a phase trains: spec, store, and the cache boundary
    /// (first layer the tape walks).
    pub fn phase_net(&self, phase: Phase) -> Result<(&NetworkSpec, &ParamStore, usize)> {
        match phase {
            Phase::Grade(i) => {
                let g = self.grades.get(i - 1).ok_or_else(|| {
                    Error::config(format!("grade {i} not pushed yet"))
                })?;
                Ok((&g.spec, &g.store, 0))
            }
            Phase::Stage2 => {
                let s2 = self
                    .stage2
                    .as_ref()
                    .ok_or_else(|| Error::config("stage 2 not started"))?;
                Ok((&s2.spec, &s2.store, s2.store.frozen_prefix_len()))
            }
        }
    }

    pub fn phase_store_mut(&mut self, phase: Phase) -> Result<&mut ParamStore> {
        match phase {
            Phase::Grade(i) => Ok(&mut self.grades[i - 1].store),
            Phase::Stage2 => Ok(&mut self
                .stage2
                .as_mut()
                .ok_or_else(|| Error::config("stage 2 not started"))?
                .store),
        }
    }

    /// Jets at the frozen boundary of a phase for one point: what the
    /// trainable part of the network sees as its input.
    pub fn prefix_jets(
        &self,
        phase: Phase,
        x: &[f64],
        tracked: &[usize],
        hess_from: usize,
    ) -> Result<Vec<MultiJet>> {
        let mut cur = BlockBatch::default();
        cur.seed(x, x.len(), tracked, hess_from);
        let mut scratch = BlockBatch::default();
        match phase {
            Phase::Grade(i) => {
                for g in &self.grades[..i - 1] {
                    propagate_hidden(&g.spec, &g.store, &mut cur, &mut scratch);
                }
            }
            Phase::Stage2 => {
                let s2 = self
                    .stage2
                    .as_ref()
                    .ok_or_else(|| Error::config("stage 2 not started"))?;
                let boundary = s2.store.frozen_prefix_len();
                propagate_prefix(&s2.spec, &s2.store, boundary, &mut cur, &mut scratch);
            }
        }
        Ok((0..cur.neurons).map(|j| cur.jet(j, 0)).collect())
    }

    /// Build the per-block frozen-prefix cache for a phase over a point
    /// set: boundary jets (the trainable net's inputs) plus the constant
    /// base contribution of earlier grades.
    pub fn build_cache(
        &self,
        phase: Phase,
        points: &PointSet,
        tracked: &[usize],
        hess_from: usize,
    ) -> Result<PrefixCache> {
        let dim = points.dim;
        if dim != self.input_dim {
            return Err(Error::config("sample dimension does not match stack input"));
        }
        let base_grades = match phase {
            Phase::Grade(i) => {
                if i == 0 || i > self.grades.len() {
                    return Err(Error::config(format!("grade {i} not pushed yet")));
                }
                i - 1
            }
            Phase::Stage2 => {
                if self.stage2.is_none() {
                    return Err(Error::config("stage 2 not started"));
                }
                self.grades.len() - 1
            }
        };
        let chunks: Vec<(usize, &[f64])> = points
            .coords
            .chunks(BLOCK * dim)
            .enumerate()
            .map(|(ci, c)| (ci * BLOCK, c))
            .collect();
        let blocks: Vec<CacheBlock> = chunks
            .par_iter()
            .map(|&(offset, chunk)| {
                let b = chunk.len() / dim;
                let mut cur = BlockBatch::default();
                cur.seed(chunk, dim, tracked, hess_from);
                let mut scratch = BlockBatch::default();
                let mut tap = BlockBatch::default();
                let mut base = BlockBatch::default();
                base.reset(1, tracked.len(), tracked.len() - hess_from, b);
                for (gi, g) in self.grades[..base_grades].iter().enumerate() {
                    propagate_hidden(&g.spec, &g.store, &mut cur, &mut scratch);
                    apply_output_tap(&g.spec, &g.store, &cur, &mut tap);
                    let _ = gi;
                    for (a, v) in base.data.iter_mut().zip(&tap.data) {
                        *a += v;
                    }
                }
                if let (Phase::Stage2, Some(s2)) = (phase, &self.stage2) {
                    // walk the clone's frozen prefix from the raw seeds
                    cur.seed(chunk, dim, tracked, hess_from);
                    let boundary = s2.store.frozen_prefix_len();
                    propagate_prefix(&s2.spec, &s2.store, boundary, &mut cur, &mut scratch);
                }
                CacheBlock { input: cur, base, n: b, point_offset: offset }
            })
            .collect();
        let versions = self.version_stamp();
        Ok(PrefixCache { blocks, versions, tracked: tracked.to_vec(), hess_from })
    }

    /// Version counters of every store, for cache staleness checks.
    pub fn version_stamp(&self) -> Vec<u64> {
        let mut v: Vec<u64> = self.grades.iter().map(|g| g.store.version()).collect();
        if let Some(s2) = &self.stage2 {
            v.push(s2.store.version());
        }
        v
    }

    /// Serialize the whole stack (grades, stage tag, stage-2 clone).
    pub fn checkpoint_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(STACK_MAGIC);
        out.extend_from_slice(&(self.input_dim as u64).to_le_bytes());
        out.extend_from_slice(&(self.grades.len() as u64).to_le_bytes());
        out.push(match self.stage() {
            Stage::One => 1,
            Stage::Two => 2,
        });
        for g in &self.grades {
            out.extend_from_slice(&checkpoint_bytes(&g.spec, &g.store));
        }
        if let Some(s2) = &self.stage2 {
            out.extend_from_slice(&(s2.k as u64).to_le_bytes());
            out.extend_from_slice(&checkpoint_bytes(&s2.spec, &s2.store));
        }
        out
    }

    pub fn from_checkpoint(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 25 || &bytes[..8] != STACK_MAGIC {
            return Err(Error::Format("bad stack checkpoint header".into()));
        }
        let input_dim = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let n_grades = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
        let stage = bytes[24];
        let mut at = 25;
        let mut stack = GradeStack::new(input_dim);
        for gi in 0..n_grades {
            let (spec, store, used) = checkpoint_from_bytes(&bytes[at..])?;
            at += used;
            let expected = if gi == 0 { input_dim } else { stack.boundary_width() };
            if spec.input_dim() != expected {
                return Err(Error::Format(format!(
                    "grade {} input width {} does not chain onto width {expected}",
                    gi + 1,
                    spec.input_dim()
                )));
            }
            stack.grades.push(GradeNet { spec, store, grade: gi + 1 });
        }
        if stage == 2 {
            if bytes.len() < at + 8 {
                return Err(Error::Format("truncated stage-2 checkpoint".into()));
            }
            let k = u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap()) as usize;
            at += 8;
            let (spec, store, used) = checkpoint_from_bytes(&bytes[at..])?;
            at += used;
            stack.stage2 = Some(Stage2Net { spec, store, k });
        }
        let _ = at;
        Ok(stack)
    }
}

const STACK_MAGIC: &[u8; 8] = b"MGPSTK01";

/// Per-block cached inputs for one training phase.
#[derive(Debug)]
pub struct PrefixCache {
    pub blocks: Vec<CacheBlock>,
    /// Store versions when the cache was built; a freeze change anywhere
    /// invalidates it.
    pub versions: Vec<u64>,
    pub tracked: Vec<usize>,
    /// Second derivatives are carried for `tracked[hess_from..]`.
    pub hess_from: usize,
}

#[derive(Debug)]
pub struct CacheBlock {
    /// Boundary jets: input panels of the trainable part.
    pub input: BlockBatch,
    /// Constant cumulative contribution of earlier grades (one neuron).
    pub base: BlockBatch,
    pub n: usize,
    pub point_offset: usize,
}

/// Run all hidden layers of a network over `cur` in place (ping-ponging
/// through `scratch`), leaving the last hidden activation in `cur`.
fn propagate_hidden(spec: &NetworkSpec, store: &ParamStore, cur: &mut BlockBatch, scratch: &mut BlockBatch) {
    propagate_prefix(spec, store, spec.depth() - 1, cur, scratch);
}

/// Run the first `n_layers` affine+tanh layers of a network.
fn propagate_prefix(
    spec: &NetworkSpec,
    store: &ParamStore,
    n_layers: usize,
    cur: &mut BlockBatch,
    scratch: &mut BlockBatch,
) {
    for l in 0..n_layers {
        let (rows, cols) = spec.layer_shape(l);
        let (w, b) = store.layer(spec, l);
        affine_forward(w, b, cur, scratch, rows, cols);
        tanh_forward(scratch, cur);
    }
}

/// Apply a grade's linear output layer to the boundary block.
fn apply_output_tap(spec: &NetworkSpec, store: &ParamStore, boundary: &BlockBatch, tap: &mut BlockBatch) {
    let l = spec.depth() - 1;
    let (rows, cols) = spec.layer_shape(l);
    let (w, b) = store.layer(spec, l);
    affine_forward(w, b, boundary, tap, rows, cols);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::forward_jets;
    use crate::network::forward;
    use crate::sampling::SplitMix64;

    fn spec(widths: &[usize]) -> NetworkSpec {
        NetworkSpec::new(widths.to_vec()).unwrap()
    }

    /// Grade stores initialized away from zero output so taps are nonzero.
    fn randomize_output(stack: &mut GradeStack, i: usize, seed: u64) {
        let g = &mut stack.grades[i];
        let l = g.spec.depth() - 1;
        let mut rng = SplitMix64::new(seed);
        let (w, b) = g.store.layer_mut(&g.spec, l);
        for v in w.iter_mut() {
            *v = rng.next_f64() * 2.0 - 1.0;
        }
        for v in b.iter_mut() {
            *v = rng.next_f64() * 2.0 - 1.0;
        }
    }

    #[test]
    fn grade1_reproduces_configured_structure() {
        let mut stack = GradeStack::new(2);
        let s = stack.grade_spec(&[128, 128, 128, 128, 128, 128]).unwrap();
        assert_eq!(s.layer_widths, vec![2, 128, 128, 128, 128, 128, 128, 1]);
        stack.push_grade(s, 1).unwrap();
        assert_eq!(stack.boundary_width(), 128);
        assert_eq!(stack.total_hidden_layers(), 6);
    }

    #[test]
    fn grade2_trainable_parameter_count() {
        let mut stack = GradeStack::new(2);
        stack.push_grade(spec(&[2, 128, 128, 128, 128, 128, 128, 1]), 1).unwrap();
        let g2 = stack.grade_spec(&[256, 256]).unwrap();
        assert_eq!(g2.layer_widths, vec![128, 256, 256, 1]);
        let expected = (128 * 256 + 256) + (256 * 256 + 256) + (256 + 1);
        assert_eq!(g2.param_count(), expected);
    }

    #[test]
    fn push_rejects_width_mismatch() {
        let mut stack = GradeStack::new(2);
        stack.push_grade(spec(&[2, 8, 8, 1]), 1).unwrap();
        let bad = spec(&[16, 8, 1]); // boundary is 8
        assert!(stack.push_grade(bad, 2).is_err());
    }

    #[test]
    fn fresh_grade_leaves_the_predictor_unchanged() {
        let mut stack = GradeStack::new(2);
        stack.push_grade(spec(&[2, 8, 8, 1]), 5).unwrap();
        randomize_output(&mut stack, 0, 50);
        let mut rng = SplitMix64::new(6);
        let probes: Vec<[f64; 2]> = (0..20)
            .map(|_| [rng.next_f64(), rng.next_f64() * 2.0 - 1.0])
            .collect();
        let before: Vec<MultiJet> = probes
            .iter()
            .map(|p| stack.cumulative_jet(p, &[0, 1]).unwrap())
            .collect();
        stack.push_grade(stack.grade_spec(&[6, 6]).unwrap(), 9).unwrap();
        for (p, old) in probes.iter().zip(&before) {
            let new = stack.cumulative_jet(p, &[0, 1]).unwrap();
            assert_eq!(&new, old, "zero-init grade changed the predictor at {p:?}");
        }
    }

    #[test]
    fn single_grade_equals_plain_network() {
        let mut stack = GradeStack::new(2);
        stack.push_grade(spec(&[2, 10, 6, 1]), 3).unwrap();
        randomize_output(&mut stack, 0, 30);
        let g = &stack.grades()[0];
        let mut rng = SplitMix64::new(4);
        for _ in 0..20 {
            let x = [rng.next_f64(), rng.next_f64()];
            let a = stack.cumulative_jet(&x, &[0, 1]).unwrap();
            let b = forward_jets(&g.spec, &g.store, &x, &[0, 1]).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn two_grades_sum_matches_independent_evaluation() {
        let mut stack = GradeStack::new(2);
        stack.push_grade(spec(&[2, 7, 5, 1]), 11).unwrap();
        randomize_output(&mut stack, 0, 110);
        stack.push_grade(stack.grade_spec(&[6, 4]).unwrap(), 12).unwrap();
        randomize_output(&mut stack, 1, 120);

        // independent route: grade 1 as a plain net; grade 2 as a manually
        // composed net [2, 7, 5, 6, 4, 1]
        let g1 = stack.grades()[0].clone();
        let g2 = stack.grades()[1].clone();
        let comp_spec = spec(&[2, 7, 5, 6, 4, 1]);
        let mut comp = ParamStore::zeros(&comp_spec);
        for (dst, (src_spec, src_store, src_l)) in [
            (0usize, (&g1.spec, &g1.store, 0usize)),
            (1, (&g1.spec, &g1.store, 1)),
            (2, (&g2.spec, &g2.store, 0)),
            (3, (&g2.spec, &g2.store, 1)),
            (4, (&g2.spec, &g2.store, 2)),
        ] {
            let (w, b) = src_store.layer(src_spec, src_l);
            let (dw, db) = comp.layer_mut(&comp_spec, dst);
            dw.copy_from_slice(w);
            db.copy_from_slice(b);
        }
        let mut rng = SplitMix64::new(13);
        for _ in 0..20 {
            let x = [rng.next_f64(), rng.next_f64()];
            let stacked = stack.cumulative_jet(&x, &[0, 1]).unwrap();
            let u1 = forward(&g1.spec, &g1.store, &x).unwrap();
            let u2 = forward(&comp_spec, &comp, &x).unwrap();
            assert!((stacked.value - (u1 + u2)).abs() <= 1e-14);
            // derivative linearity against the independently composed jets
            let j1 = forward_jets(&g1.spec, &g1.store, &x, &[0, 1]).unwrap();
            let j2 = forward_jets(&comp_spec, &comp, &x, &[0, 1]).unwrap();
            for c in 0..2 {
                assert!((stacked.grad_in[c] - (j1.grad_in[c] + j2.grad_in[c])).abs() <= 1e-14);
                assert!(
                    (stacked.hess_diag[c] - (j1.hess_diag[c] + j2.hess_diag[c])).abs() <= 1e-14
                );
            }
        }
    }

    /// The 1D three-grade architecture from the shipped config.
    fn table2_stack() -> GradeStack {
        let mut stack = GradeStack::new(2);
        stack.push_grade(spec(&[2, 128, 128, 128, 128, 128, 128, 1]), 1).unwrap();
        stack.push_grade(stack.grade_spec(&[256, 256]).unwrap(), 2).unwrap();
        stack
            .push_grade(stack.grade_spec(&[256, 256, 256, 128]).unwrap(), 3)
            .unwrap();
        stack
    }

    #[test]
    fn unfreeze_tail_k8_on_the_1d_architecture() {
        let mut stack = table2_stack();
        assert_eq!(stack.total_hidden_layers(), 12);
        let set = stack.unfreeze_tail(8).unwrap();
        assert_eq!(set.k, 8);
        assert_eq!(set.output_grade, 3);
        let widths: Vec<usize> = set.layers.iter().map(|l| l.width).collect();
        let grades: Vec<usize> = set.layers.iter().map(|l| l.grade).collect();
        // chain order: two grade-1 layers, both grade-2 layers, all of grade 3
        assert_eq!(widths, vec![128, 128, 256, 256, 256, 256, 256, 128]);
        assert_eq!(grades, vec![1, 1, 2, 2, 3, 3, 3, 3]);
        let s2 = stack.stage2().unwrap();
        assert_eq!(s2.store.frozen_prefix_len(), 4);
        assert_eq!(
            s2.spec.layer_widths,
            vec![2, 128, 128, 128, 128, 128, 128, 256, 256, 256, 256, 256, 128, 1]
        );
    }

    #[test]
    fn unfreeze_everything_is_the_degenerate_full_finetune() {
        let mut stack = table2_stack();
        let set = stack.unfreeze_tail(12).unwrap();
        assert_eq!(set.layers.len(), 12);
        assert_eq!(stack.stage2().unwrap().store.frozen_prefix_len(), 0);
    }

    #[test]
    fn unfreeze_k_out_of_range_is_rejected() {
        let mut stack = table2_stack();
        // grade 3 contributes 4 hidden layers; k must exceed that
        assert!(stack.unfreeze_tail(4).is_err());
        assert!(stack.unfreeze_tail(13).is_err());
        assert!(stack.unfreeze_tail(5).is_ok());
    }

    #[test]
    fn stage2_clone_preserves_the_predictor_and_grades() {
        let mut stack = GradeStack::new(2);
        stack.push_grade(spec(&[2, 6, 5, 1]), 21).unwrap();
        randomize_output(&mut stack, 0, 210);
        stack.push_grade(stack.grade_spec(&[4, 4]).unwrap(), 22).unwrap();
        randomize_output(&mut stack, 1, 220);
        let mut rng = SplitMix64::new(23);
        let probes: Vec<[f64; 2]> = (0..15)
            .map(|_| [rng.next_f64(), rng.next_f64() * 2.0 - 1.0])
            .collect();
        let before: Vec<MultiJet> = probes
            .iter()
            .map(|p| stack.cumulative_jet(p, &[0, 1]).unwrap())
            .collect();
        let grade_params: Vec<Vec<f64>> =
            stack.grades().iter().map(|g| g.store.as_slice().to_vec()).collect();
        stack.unfreeze_tail(3).unwrap();
        for (p, old) in probes.iter().zip(&before) {
            let new = stack.predictor_jet(p, &[0, 1]).unwrap();
            assert_eq!(&new, old, "stage-2 clone changed the predictor at {p:?}");
        }
        for (g, saved) in stack.grades().iter().zip(&grade_params) {
            assert_eq!(g.store.as_slice(), &saved[..]);
        }
    }

    #[test]
    fn prefix_jets_empty_prefix_returns_seeds() {
        let mut stack = GradeStack::new(2);
        stack.push_grade(spec(&[2, 5, 1]), 2).unwrap();
        let jets = stack.prefix_jets(Phase::Grade(1), &[0.7, -0.3], &[0, 1], 0).unwrap();
        assert_eq!(jets.len(), 2);
        assert_eq!(jets[0].value, 0.7);
        assert_eq!(jets[0].grad_in, vec![1.0, 0.0]);
        assert_eq!(jets[0].hess_diag, vec![0.0, 0.0]);
        assert_eq!(jets[1].value, -0.3);
        assert_eq!(jets[1].grad_in, vec![0.0, 1.0]);
    }

    #[test]
    fn cache_matches_pointwise_recompute_bitwise() {
        let mut stack = GradeStack::new(2);
        stack.push_grade(spec(&[2, 6, 5, 1]), 31).unwrap();
        randomize_output(&mut stack, 0, 310);
        stack.push_grade(stack.grade_spec(&[4, 3]).unwrap(), 32).unwrap();

        let mut points = PointSet::with_capacity(2, 20);
        let mut rng = SplitMix64::new(33);
        for _ in 0..20 {
            points.push(&[rng.next_f64(), rng.next_f64() * 2.0 - 1.0]);
        }
        let cache = stack.build_cache(Phase::Grade(2), &points, &[0, 1], 0).unwrap();
        assert_eq!(cache.versions, stack.version_stamp());
        for block in &cache.blocks {
            for p in 0..block.n {
                let x = points.point(block.point_offset + p);
                let jets = stack.prefix_jets(Phase::Grade(2), x, &[0, 1], 0).unwrap();
                for (j, jet) in jets.iter().enumerate() {
                    assert_eq!(&block.input.jet(j, p), jet, "boundary jet mismatch");
                }
                let base = stack.partial_cumulative_jet(1, x, &[0, 1]).unwrap();
                assert_eq!(block.base.jet(0, p), base, "base mismatch");
            }
        }
    }

    #[test]
    fn stage2_cache_boundary_moves_and_recompute_passes() {
        let mut stack = GradeStack::new(2);
        stack.push_grade(spec(&[2, 6, 6, 1]), 41).unwrap();
        randomize_output(&mut stack, 0, 410);
        stack.push_grade(stack.grade_spec(&[6, 6]).unwrap(), 42).unwrap();
        randomize_output(&mut stack, 1, 420);
        stack.unfreeze_tail(3).unwrap();

        let mut points = PointSet::with_capacity(2, 10);
        let mut rng = SplitMix64::new(43);
        for _ in 0..10 {
            points.push(&[rng.next_f64(), rng.next_f64() * 2.0 - 1.0]);
        }
        let cache = stack.build_cache(Phase::Stage2, &points, &[0, 1], 0).unwrap();
        for block in &cache.blocks {
            for p in 0..block.n {
                let x = points.point(block.point_offset + p);
                let jets = stack.prefix_jets(Phase::Stage2, x, &[0, 1], 0).unwrap();
                for (j, jet) in jets.iter().enumerate() {
                    assert_eq!(&block.input.jet(j, p), jet);
                }
            }
        }
    }

    #[test]
    fn checkpoint_roundtrip_preserves_predictions() {
        let mut stack = GradeStack::new(2);
        stack.push_grade(spec(&[2, 6, 5, 1]), 51).unwrap();
        randomize_output(&mut stack, 0, 510);
        stack.push_grade(stack.grade_spec(&[4, 4]).unwrap(), 52).unwrap();
        randomize_output(&mut stack, 1, 520);
        stack.unfreeze_tail(3).unwrap();
        let bytes = stack.checkpoint_bytes();
        let restored = GradeStack::from_checkpoint(&bytes).unwrap();
        assert_eq!(restored.stage(), Stage::Two);
        assert_eq!(restored.stage2().unwrap().k, 3);
        let mut rng = SplitMix64::new(53);
        for _ in 0..10 {
            let x = [rng.next_f64(), rng.next_f64()];
            assert_eq!(
                stack.predictor_jet(&x, &[0, 1]).unwrap(),
                restored.predictor_jet(&x, &[0, 1]).unwrap()
            );
        }
    }
}
