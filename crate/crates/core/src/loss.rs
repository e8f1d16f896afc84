//! The collocation loss: mean squared PDE residual plus mean squared
//! initial and boundary mismatch, with unit weights on the three parts.
//!
//! Two evaluation routes share the same per-point arithmetic:
//! a generic route over any [`Predictor`] (tests, checkpoint verification)
//! and a fused loss-plus-gradient route over a phase's trainable network
//! with cached frozen-prefix inputs (the training hot path). In
//! deterministic mode each component is the sorted sum of its per-point
//! terms, so permuting sample points cannot change a single bit.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{backward_block, forward_block, MultiJet, Tape, TrainableLayout};
use crate::gradestack::{CacheBlock, GradeStack, PrefixCache};
use crate::network::{NetworkSpec, ParamStore};
use crate::problems::ProblemDef;
use crate::sampling::{PointSet, SampleSet};
use crate::{Error, Result};

/// The three loss components and their sum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
pub struct LossBreakdown {
    pub pde: f64,
    pub initial: f64,
    pub boundary: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(pde: f64, initial: f64, boundary: f64) -> Self {
        Self { pde, initial, boundary, total: pde + initial + boundary }
    }

    pub fn is_finite(&self) -> bool {
        self.total.is_finite()
    }
}

/// Anything that can produce jets of a scalar field at a point.
pub trait Predictor: Sync {
    /// Jet at `point`, tracking the given input coordinates.
    fn jet(&self, point: &[f64], tracked: &[usize]) -> Result<MultiJet>;

    fn value(&self, point: &[f64]) -> Result<f64> {
        Ok(self.jet(point, &[])?.value)
    }
}

impl Predictor for GradeStack {
    fn jet(&self, point: &[f64], tracked: &[usize]) -> Result<MultiJet> {
        self.predictor_jet(point, tracked)
    }
}

/// Adapter for closure predictors (exact solutions, zero predictor, ...).
pub struct JetFn<F: Fn(&[f64], &[usize]) -> Result<MultiJet> + Sync>(pub F);

impl<F: Fn(&[f64], &[usize]) -> Result<MultiJet> + Sync> Predictor for JetFn<F> {
    fn jet(&self, point: &[f64], tracked: &[usize]) -> Result<MultiJet> {
        (self.0)(point, tracked)
    }
}

/// Sum in ascending value order: independent of input order bit for bit.
fn sorted_mean_of_squares(mut terms: Vec<f64>) -> f64 {
    let n = terms.len();
    terms.sort_by(f64::total_cmp);
    terms.iter().sum::<f64>() / n as f64
}

fn non_finite(kind: &str, value: f64, point: &[f64]) -> Error {
    Error::Numerical(format!(
        "training fault: non-finite {kind} ({value}) at point {point:?}"
    ))
}

/// Mean squared PDE residual over the collocation points.
pub fn loss_pde(predictor: &impl Predictor, problem: &ProblemDef, points: &PointSet) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::config("loss_pde needs at least one collocation point"));
    }
    let tracked: Vec<usize> = (0..problem.input_dim()).collect();
    let mut terms = Vec::with_capacity(points.len());
    for p in points.iter() {
        let jet = predictor.jet(p, &tracked)?;
        let r = problem.residual(&jet, p);
        if !r.is_finite() {
            return Err(non_finite("residual", r, p));
        }
        terms.push(r * r);
    }
    Ok(sorted_mean_of_squares(terms))
}

/// Mean squared initial mismatch `u(0,x) - h(x)`.
pub fn loss_initial(predictor: &impl Predictor, problem: &ProblemDef, points: &PointSet) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::config("loss_initial needs at least one point"));
    }
    let mut terms = Vec::with_capacity(points.len());
    for p in points.iter() {
        let u = predictor.value(p)?;
        let d = u - problem.initial_value(&p[1..]);
        if !d.is_finite() {
            return Err(non_finite("initial mismatch", d, p));
        }
        terms.push(d * d);
    }
    Ok(sorted_mean_of_squares(terms))
}

/// Mean squared boundary mismatch `u - g` on `Gamma`.
pub fn loss_boundary(predictor: &impl Predictor, problem: &ProblemDef, points: &PointSet) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::config("loss_boundary needs at least one point"));
    }
    let mut terms = Vec::with_capacity(points.len());
    for p in points.iter() {
        let u = predictor.value(p)?;
        let d = u - problem.boundary_value(p);
        if !d.is_finite() {
            return Err(non_finite("boundary mismatch", d, p));
        }
        terms.push(d * d);
    }
    Ok(sorted_mean_of_squares(terms))
}

/// All three components with unit weights.
pub fn total_loss(
    predictor: &impl Predictor,
    problem: &ProblemDef,
    samples: &SampleSet,
) -> Result<LossBreakdown> {
    Ok(LossBreakdown::new(
        loss_pde(predictor, problem, &samples.collocation)?,
        loss_initial(predictor, problem, &samples.initial)?,
        loss_boundary(predictor, problem, &samples.boundary)?,
    ))
}

/// Frozen-prefix caches for the three sample categories of one phase.
pub struct SampleCaches {
    pub collocation: PrefixCache,
    pub initial: PrefixCache,
    pub boundary: PrefixCache,
}

/// One phase's loss evaluation context: the trainable network, its cache
/// boundary, and the samples.
pub struct PhaseEval<'a> {
    pub spec: &'a NetworkSpec,
    pub store: &'a ParamStore,
    pub start_layer: usize,
    pub layout: &'a TrainableLayout,
    pub problem: &'a ProblemDef,
    pub samples: &'a SampleSet,
    pub caches: &'a SampleCaches,
    pub deterministic: bool,
}

#[derive(Clone, Copy)]
enum Cat {
    Pde,
    Initial,
    Boundary,
}

struct StripeOut {
    grad: Vec<f64>,
    pde: Vec<f64>,
    initial: Vec<f64>,
    boundary: Vec<f64>,
}

/// Fixed stripe count for the deterministic parallel reduction; results
/// are identical for any thread count because stripes are merged in order.
const STRIPES: usize = 8;

/// Total loss and its gradient over the trainable slots, in one fused
/// forward/backward pass over all sample points.
pub fn loss_and_gradient(eval: &PhaseEval) -> Result<(LossBreakdown, Vec<f64>)> {
    let work: Vec<(Cat, &CacheBlock)> = eval
        .caches
        .collocation
        .blocks
        .iter()
        .map(|b| (Cat::Pde, b))
        .chain(eval.caches.initial.blocks.iter().map(|b| (Cat::Initial, b)))
        .chain(eval.caches.boundary.blocks.iter().map(|b| (Cat::Boundary, b)))
        .collect();

    let run_stripe = |stripe: &[(Cat, &CacheBlock)]| -> Result<StripeOut> {
        let mut out = StripeOut {
            grad: vec![0.0; eval.layout.len],
            pde: Vec::new(),
            initial: Vec::new(),
            boundary: Vec::new(),
        };
        let mut tape = Tape::new();
        let dims = eval.problem.input_dim();
        let mut jet = MultiJet::zero(dims);
        let mut cot = MultiJet::zero(dims);
        let mut seeds = Vec::new();
        for &(cat, block) in stripe {
            forward_block(eval.spec, eval.store, eval.start_layer, &block.input, &mut tape);
            let (d1, d2) = (block.base.d1, block.base.d2);
            let skip = d1 - d2;
            let nc = block.base.nc();
            let b = block.n;
            // per-point terms and cotangent seeds
            seeds.clear();
            seeds.resize(nc * b, 0.0);
            {
                let output = tape.output();
                for p in 0..b {
                    match cat {
                        Cat::Pde => {
                            let pt = eval.samples.collocation.point(block.point_offset + p);
                            jet.value = output.lane(0, 0)[p] + block.base.lane(0, 0)[p];
                            for c in 0..d1 {
                                jet.grad_in[c] =
                                    output.lane(0, 1 + c)[p] + block.base.lane(0, 1 + c)[p];
                                jet.hess_diag[c] = if c < skip {
                                    0.0
                                } else {
                                    let lane = 1 + d1 + c - skip;
                                    output.lane(0, lane)[p] + block.base.lane(0, lane)[p]
                                };
                            }
                            let r = eval.problem.residual(&jet, pt);
                            if !r.is_finite() {
                                return Err(non_finite("residual", r, pt));
                            }
                            out.pde.push(r * r);
                            eval.problem.residual_cotangent(&jet, pt, &mut cot);
                            let scale = 2.0 * r / eval.samples.collocation.len() as f64;
                            seeds[p] = scale * cot.value;
                            for c in 0..d1 {
                                seeds[(1 + c) * b + p] = scale * cot.grad_in[c];
                                if c >= skip {
                                    seeds[(1 + d1 + c - skip) * b + p] = scale * cot.hess_diag[c];
                                }
                            }
                        }
                        Cat::Initial => {
                            let pt = eval.samples.initial.point(block.point_offset + p);
                            let u = output.lane(0, 0)[p] + block.base.lane(0, 0)[p];
                            let d = u - eval.problem.initial_value(&pt[1..]);
                            if !d.is_finite() {
                                return Err(non_finite("initial mismatch", d, pt));
                            }
                            out.initial.push(d * d);
                            seeds[p] = 2.0 * d / eval.samples.initial.len() as f64;
                        }
                        Cat::Boundary => {
                            let pt = eval.samples.boundary.point(block.point_offset + p);
                            let u = output.lane(0, 0)[p] + block.base.lane(0, 0)[p];
                            let d = u - eval.problem.boundary_value(pt);
                            if !d.is_finite() {
                                return Err(non_finite("boundary mismatch", d, pt));
                            }
                            out.boundary.push(d * d);
                            seeds[p] = 2.0 * d / eval.samples.boundary.len() as f64;
                        }
                    }
                }
            }
            let cot_block = tape.cotangent_mut();
            cot_block.data.copy_from_slice(&seeds);
            backward_block(eval.spec, eval.store, &block.input, &mut tape, eval.layout, &mut out.grad);
        }
        Ok(out)
    };

    let stripe_len = work.len().div_ceil(STRIPES).max(1);
    let stripes: Vec<&[(Cat, &CacheBlock)]> = work.chunks(stripe_len).collect();
    let results: Result<Vec<StripeOut>> = stripes.par_iter().map(|s| run_stripe(s)).collect();
    let results = results?;

    let mut grad = vec![0.0; eval.layout.len];
    let n_pde = eval.samples.collocation.len();
    let n_init = eval.samples.initial.len();
    let n_bnd = eval.samples.boundary.len();
    let mut pde_terms = Vec::with_capacity(n_pde);
    let mut init_terms = Vec::with_capacity(n_init);
    let mut bnd_terms = Vec::with_capacity(n_bnd);
    for s in results {
        for (g, sg) in grad.iter_mut().zip(&s.grad) {
            *g += sg;
        }
        pde_terms.extend_from_slice(&s.pde);
        init_terms.extend_from_slice(&s.initial);
        bnd_terms.extend_from_slice(&s.boundary);
    }
    let breakdown = if eval.deterministic {
        LossBreakdown::new(
            sorted_mean_of_squares(pde_terms),
            sorted_mean_of_squares(init_terms),
            sorted_mean_of_squares(bnd_terms),
        )
    } else {
        LossBreakdown::new(
            pde_terms.iter().sum::<f64>() / n_pde as f64,
            init_terms.iter().sum::<f64>() / n_init as f64,
            bnd_terms.iter().sum::<f64>() / n_bnd as f64,
        )
    };
    Ok((breakdown, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradestack::{GradeStack, Phase};
    use crate::network::NetworkSpec;
    use crate::sampling::{build_samples, SampleCounts, SplitMix64};

    fn small_samples(problem: &ProblemDef, seed: u64) -> SampleSet {
        build_samples(
            &problem.geometry(),
            &SampleCounts { collocation: 40, initial: 10, boundary: 8 },
            seed,
        )
    }

    fn zero_predictor() -> impl Predictor {
        JetFn(|_: &[f64], tracked: &[usize]| Ok(MultiJet::zero(tracked.len())))
    }

    #[test]
    fn exact_solution_predictor_has_negligible_loss() {
        for problem in [ProblemDef::burgers1d(), ProblemDef::burgers2d(), ProblemDef::burgers3d()] {
            let samples = small_samples(&problem, 1);
            let exact = JetFn(|p: &[f64], _: &[usize]| problem.exact_jet(p));
            let loss = total_loss(&exact, &problem, &samples).unwrap();
            assert!(loss.total <= 1e-14, "{}: {loss:?}", problem.name);
        }
    }

    #[test]
    fn zero_predictor_on_1d_matches_direct_summation() {
        // interior residual and boundary data vanish for u == 0; only the
        // initial profile contributes, as the mean of sin^2(pi x)
        let problem = ProblemDef::burgers1d();
        let samples = small_samples(&problem, 7);
        let loss = total_loss(&zero_predictor(), &problem, &samples).unwrap();
        assert_eq!(loss.pde, 0.0);
        assert_eq!(loss.boundary, 0.0);
        let oracle: f64 = samples
            .initial
            .iter()
            .map(|p| (std::f64::consts::PI * p[1]).sin().powi(2))
            .sum::<f64>()
            / samples.initial.len() as f64;
        assert!((loss.initial - oracle).abs() <= 1e-15 * oracle.max(1.0));
        assert_eq!(loss.total, loss.pde + loss.initial + loss.boundary);
    }

    #[test]
    fn zero_predictor_2d_boundary_hand_value() {
        // at (t=1, x=0, y=1) the boundary data is 1/(1+e^0) = 1/2, so a
        // zero predictor contributes 1/4 at that point
        let problem = ProblemDef::burgers2d();
        let mut points = PointSet::with_capacity(3, 1);
        points.push(&[1.0, 0.0, 1.0]);
        let l = loss_boundary(&zero_predictor(), &problem, &points).unwrap();
        assert_eq!(l, 0.25);
    }

    #[test]
    fn component_means_match_definitions() {
        // two initial points with deviations a and b give (a^2+b^2)/2
        let problem = ProblemDef::burgers1d();
        let mut points = PointSet::with_capacity(2, 2);
        points.push(&[0.0, 0.25]);
        points.push(&[0.0, -0.5]);
        let l = loss_initial(&zero_predictor(), &problem, &points).unwrap();
        let a = (std::f64::consts::PI * 0.25).sin();
        let b = (std::f64::consts::PI * -0.5).sin();
        assert!((l - (a * a + b * b) / 2.0).abs() < 1e-16);
    }

    #[test]
    fn permuting_points_cannot_change_components() {
        let problem = ProblemDef::burgers1d();
        let mut samples = small_samples(&problem, 3);
        let mut stack = GradeStack::new(2);
        stack
            .push_grade(NetworkSpec::new(vec![2, 8, 8, 1]).unwrap(), 5)
            .unwrap();
        // make the net nonzero
        let g = stack.grade_mut(0);
        let l = g.spec.depth() - 1;
        let mut rng = SplitMix64::new(50);
        let (w, _) = g.store.layer_mut(&g.spec.clone(), l);
        for v in w.iter_mut() {
            *v = rng.next_f64() - 0.5;
        }
        let before = total_loss(&stack, &problem, &samples).unwrap();
        // reverse the collocation points
        let dim = samples.collocation.dim;
        let mut coords = Vec::with_capacity(samples.collocation.coords.len());
        for p in samples.collocation.iter().rev() {
            coords.extend_from_slice(p);
        }
        samples.collocation = PointSet { dim, coords };
        let after = total_loss(&stack, &problem, &samples).unwrap();
        assert_eq!(before, after);
    }

    #[test]
    fn duplicating_every_point_leaves_means_unchanged() {
        let problem = ProblemDef::burgers1d();
        let samples = small_samples(&problem, 11);
        let pred = zero_predictor();
        let single = loss_initial(&pred, &problem, &samples.initial).unwrap();
        let mut doubled = samples.initial.clone();
        doubled.coords.extend_from_slice(&samples.initial.coords);
        let double = loss_initial(&pred, &problem, &doubled).unwrap();
        assert!((single - double).abs() <= 1e-15 * single.max(1e-300));
    }

    /// Set up a single-grade phase over the given problem for the fused path.
    fn phase_fixture(
        problem: &ProblemDef,
        widths: &[usize],
        seed: u64,
    ) -> (GradeStack, SampleSet) {
        let mut stack = GradeStack::new(problem.input_dim());
        stack.push_grade(NetworkSpec::new(widths.to_vec()).unwrap(), seed).unwrap();
        // non-zero output layer so gradients flow everywhere
        let g = stack.grade_mut(0);
        let spec = g.spec.clone();
        let l = spec.depth() - 1;
        let mut rng = SplitMix64::new(seed ^ 0xabc);
        let (w, b) = g.store.layer_mut(&spec, l);
        for v in w.iter_mut().chain(b.iter_mut()) {
            *v = rng.next_f64() - 0.5;
        }
        let samples = small_samples(problem, seed);
        (stack, samples)
    }

    fn fused_loss(
        stack: &GradeStack,
        problem: &ProblemDef,
        samples: &SampleSet,
    ) -> (LossBreakdown, Vec<f64>) {
        let tracked: Vec<usize> = (0..problem.input_dim()).collect();
        let caches = SampleCaches {
            collocation: stack
                .build_cache(Phase::Grade(1), &samples.collocation, &tracked, 1)
                .unwrap(),
            initial: stack.build_cache(Phase::Grade(1), &samples.initial, &[], 0).unwrap(),
            boundary: stack.build_cache(Phase::Grade(1), &samples.boundary, &[], 0).unwrap(),
        };
        let (spec, store, start) = stack.phase_net(Phase::Grade(1)).unwrap();
        let layout = TrainableLayout::new(spec, store);
        let eval = PhaseEval {
            spec,
            store,
            start_layer: start,
            layout: &layout,
            problem,
            samples,
            caches: &caches,
            deterministic: true,
        };
        loss_and_gradient(&eval).unwrap()
    }

    #[test]
    fn fused_path_agrees_with_generic_path_bitwise() {
        for problem in [ProblemDef::burgers1d(), ProblemDef::burgers2d()] {
            let widths: Vec<usize> = [problem.input_dim(), 8, 6, 1].to_vec();
            let (stack, samples) = phase_fixture(&problem, &widths, 17);
            let (fused, _) = fused_loss(&stack, &problem, &samples);
            let generic = total_loss(&stack, &problem, &samples).unwrap();
            assert_eq!(fused, generic, "{}", problem.name);
        }
    }

    #[test]
    fn fused_gradient_matches_finite_differences_all_problems() {
        for problem in [ProblemDef::burgers1d(), ProblemDef::burgers2d(), ProblemDef::burgers3d()] {
            let widths: Vec<usize> = [problem.input_dim(), 6, 5, 1].to_vec();
            let (mut stack, samples) = phase_fixture(&problem, &widths, 23);
            let (_, grad) = fused_loss(&stack, &problem, &samples);
            let h = 1e-6;
            let n = grad.len();
            for i in (0..n).step_by(n / 17 + 1) {
                let orig = stack.grades()[0].store.as_slice()[i];
                stack.grade_mut(0).store.as_mut_slice()[i] = orig + h;
                let (lp, _) = fused_loss(&stack, &problem, &samples);
                stack.grade_mut(0).store.as_mut_slice()[i] = orig - h;
                let (lm, _) = fused_loss(&stack, &problem, &samples);
                stack.grade_mut(0).store.as_mut_slice()[i] = orig;
                let fd = (lp.total - lm.total) / (2.0 * h);
                let rel = (grad[i] - fd).abs() / fd.abs().max(1e-7);
                assert!(rel <= 1e-6, "{}: slot {i} ad={} fd={fd} rel={rel}", problem.name, grad[i]);
            }
        }
    }

    #[test]
    fn non_finite_prediction_is_a_training_fault() {
        let problem = ProblemDef::burgers1d();
        let samples = small_samples(&problem, 2);
        let bad = JetFn(|_: &[f64], tracked: &[usize]| {
            let mut j = MultiJet::zero(tracked.len());
            j.value = f64::NAN;
            Ok(j)
        });
        let err = total_loss(&bad, &problem, &samples).unwrap_err();
        assert!(err.to_string().contains("training fault"), "{err}");
    }
}
