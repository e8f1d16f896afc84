//! Training phases: grade-by-grade stage-1 minimization, the stage-2 tail
//! retraining, and the single-grade baseline, all with best-loss parameter
//! tracking.
//!
//! One epoch is one full-batch Adam step; the recorded loss of an epoch is
//! the pre-step loss. The parameters achieving the minimal recorded loss
//! are restored at the end of every phase, which together with
//! zero-initialized grade output layers makes the loss chain across grades
//! and stages non-increasing on every run.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::autodiff::TrainableLayout;
use crate::gradestack::{GradeStack, Phase, UnfreezeSet};
use crate::loss::{loss_and_gradient, LossBreakdown, PhaseEval, SampleCaches};
use crate::metrics::relative_l2;
use crate::network::{init_params, NetworkSpec};
use crate::optimizer::AdamState;
use crate::problems::ProblemDef;
use crate::sampling::{PointSet, SampleSet};
use crate::{Error, Result};

/// Architecture and optimizer settings for one grade.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct GradeConfig {
    /// Hidden widths of the grade's own network.
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub decay_rate: f64,
    pub epochs: usize,
}

/// Stage-2 settings: how far the unfrozen tail reaches and how it retrains.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Stage2Config {
    pub k: usize,
    pub learning_rate: f64,
    pub decay_rate: f64,
    pub epochs: usize,
}

/// One recorded epoch: pre-step loss and the learning rate of the step.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: LossBreakdown,
    pub lr: f64,
}

/// Outcome of one training phase.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainReport {
    pub label: String,
    /// Pre-step loss per epoch; length equals the epoch count.
    pub history: Vec<EpochRecord>,
    /// Minimal recorded loss (initial loss when no epochs ran).
    pub best_loss: f64,
    pub best_epoch: usize,
    /// Relative L2 against the exact solution on the test grid, evaluated
    /// with the restored best parameters.
    pub relative_l2: f64,
    pub duration_secs: f64,
    /// Set when the phase aborted on a non-finite loss or gradient; the
    /// history up to the fault is retained.
    pub fault: Option<String>,
}

impl TrainReport {
    pub fn initial_loss(&self) -> Option<f64> {
        self.history.first().map(|r| r.loss.total)
    }
}

/// Shared evaluation context for a training run.
pub struct EvalContext<'a> {
    pub problem: &'a ProblemDef,
    pub samples: &'a SampleSet,
    /// Test grid and exact values on it, for the per-phase relative L2.
    pub grid: &'a PointSet,
    pub exact: &'a [f64],
    pub deterministic: bool,
    /// Print a heartbeat to stderr every few thousand epochs.
    pub progress: bool,
}

/// Train the most recently pushed grade (its whole network is trainable;
/// everything below is frozen prefix and constant base).
pub fn train_grade(stack: &mut GradeStack, cfg: &GradeConfig, ctx: &EvalContext) -> Result<TrainReport> {
    let idx = stack.grades().len();
    if idx == 0 {
        return Err(Error::config("no grade pushed"));
    }
    run_phase(
        stack,
        Phase::Grade(idx),
        cfg.learning_rate,
        cfg.decay_rate,
        cfg.epochs,
        format!("grade{idx}"),
        ctx,
    )
}

/// Unfreeze the tail and retrain it from the stage-1 minimizer. Returns
/// the unfreeze description alongside the report.
pub fn train_stage2(
    stack: &mut GradeStack,
    cfg: &Stage2Config,
    ctx: &EvalContext,
) -> Result<(UnfreezeSet, TrainReport)> {
    let set = stack.unfreeze_tail(cfg.k)?;
    let report = run_phase(
        stack,
        Phase::Stage2,
        cfg.learning_rate,
        cfg.decay_rate,
        cfg.epochs,
        "stage2".to_string(),
        ctx,
    )?;
    Ok((set, report))
}

/// Train one conventional fully connected network (all layers trainable)
/// with the same loss and optimizer machinery.
pub fn train_single_grade_baseline(
    spec: NetworkSpec,
    seed: u64,
    learning_rate: f64,
    decay_rate: f64,
    epochs: usize,
    ctx: &EvalContext,
) -> Result<(GradeStack, TrainReport)> {
    let mut stack = GradeStack::new(spec.input_dim());
    stack.push_grade(spec.clone(), seed)?;
    // a baseline initializes its output layer like any other layer
    stack.grade_mut(0).store = init_params(&spec, seed, false);
    let report = run_phase(
        &mut stack,
        Phase::Grade(1),
        learning_rate,
        decay_rate,
        epochs,
        "sgl".to_string(),
        ctx,
    )?;
    Ok((stack, report))
}

/// The every-run invariant: best losses must not increase along the
/// grade/stage chain.
pub fn assert_monotone_chain(reports: &[TrainReport]) -> Result<()> {
    for pair in reports.windows(2) {
        if pair[1].best_loss > pair[0].best_loss {
            return Err(Error::Numerical(format!(
                "loss chain violation: {} best {} exceeds {} best {}",
                pair[1].label, pair[1].best_loss, pair[0].label, pair[0].best_loss
            )));
        }
    }
    Ok(())
}

fn run_phase(
    stack: &mut GradeStack,
    phase: Phase,
    lr: f64,
    decay: f64,
    epochs: usize,
    label: String,
    ctx: &EvalContext,
) -> Result<TrainReport> {
    let start_time = Instant::now();
    let tracked: Vec<usize> = (0..stack.input_dim()).collect();
    // second derivatives are only needed along spatial directions; the
    // time lane carries first derivatives only
    let caches = SampleCaches {
        collocation: stack.build_cache(phase, &ctx.samples.collocation, &tracked, 1)?,
        initial: stack.build_cache(phase, &ctx.samples.initial, &[], 0)?,
        boundary: stack.build_cache(phase, &ctx.samples.boundary, &[], 0)?,
    };
    let (spec, layout, start_layer, frozen_before) = {
        let (spec, store, start_layer) = stack.phase_net(phase)?;
        let frozen: Vec<f64> = (0..spec.depth())
            .filter(|&l| store.is_frozen(l))
            .flat_map(|l| {
                let (w, b) = store.layer(spec, l);
                w.iter().chain(b).copied().collect::<Vec<_>>()
            })
            .collect();
        (spec.clone(), TrainableLayout::new(spec, store), start_layer, frozen)
    };
    let mut adam = AdamState::new(layout.len, lr, decay);
    let mut theta = Vec::with_capacity(layout.len);
    let mut best_params = Vec::new();
    let mut best_loss = f64::INFINITY;
    let mut best_epoch = 0;
    let mut history = Vec::with_capacity(epochs);
    let mut fault = None;

    if epochs == 0 {
        // degenerate phase: evaluate once so the best loss is defined
        let (breakdown, _) = evaluate(stack, phase, &spec, &layout, start_layer, &caches, ctx)?;
        best_loss = breakdown.total;
        stack.phase_net(phase)?.1.copy_trainable(&mut best_params);
    }

    for epoch in 0..epochs {
        let evaluated = evaluate(stack, phase, &spec, &layout, start_layer, &caches, ctx);
        let (breakdown, grad) = match evaluated {
            Ok(v) => v,
            Err(e) => {
                fault = Some(format!("epoch {epoch}: {e}"));
                break;
            }
        };
        if !breakdown.is_finite() {
            fault = Some(
                Error::TrainingFault {
                    epoch,
                    message: "non-finite loss".into(),
                    breakdown,
                }
                .to_string(),
            );
            break;
        }
        if breakdown.total < best_loss {
            best_loss = breakdown.total;
            best_epoch = epoch;
            stack.phase_net(phase)?.1.copy_trainable(&mut best_params);
        }
        let store = stack.phase_store_mut(phase)?;
        store.copy_trainable(&mut theta);
        let used_lr = match adam.step(&mut theta, &grad) {
            Ok(lr) => lr,
            Err(e) => {
                fault = Some(format!("epoch {epoch}: {e}"));
                history.push(EpochRecord { epoch, loss: breakdown, lr: f64::NAN });
                break;
            }
        };
        store.load_trainable(&theta);
        history.push(EpochRecord { epoch, loss: breakdown, lr: used_lr });
        if ctx.progress && (epoch + 1) % 2000 == 0 {
            eprintln!(
                "  {label}: epoch {}/{epochs} loss {:.6e} (best {:.6e})",
                epoch + 1,
                breakdown.total,
                best_loss
            );
        }
    }

    // restore the minimizing iterate
    if !best_params.is_empty() || layout.len == 0 {
        stack.phase_store_mut(phase)?.load_trainable(&best_params);
    }

    // frozen slots must be bit-identical after any number of steps
    {
        let (spec_ref, store, _) = stack.phase_net(phase)?;
        let frozen_after: Vec<f64> = (0..spec_ref.depth())
            .filter(|&l| store.is_frozen(l))
            .flat_map(|l| {
                let (w, b) = store.layer(spec_ref, l);
                w.iter().chain(b).copied().collect::<Vec<_>>()
            })
            .collect();
        if frozen_after != frozen_before {
            return Err(Error::Numerical(format!(
                "frozen parameters changed during phase {label}"
            )));
        }
    }

    let predictions = stack.predictor_values(ctx.grid)?;
    let rel = relative_l2(ctx.exact, &predictions)?;
    Ok(TrainReport {
        label,
        history,
        best_loss,
        best_epoch,
        relative_l2: rel,
        duration_secs: start_time.elapsed().as_secs_f64(),
        fault,
    })
}

fn evaluate(
    stack: &GradeStack,
    phase: Phase,
    spec: &NetworkSpec,
    layout: &TrainableLayout,
    start_layer: usize,
    caches: &SampleCaches,
    ctx: &EvalContext,
) -> Result<(LossBreakdown, Vec<f64>)> {
    let (_, store, _) = stack.phase_net(phase)?;
    loss_and_gradient(&PhaseEval {
        spec,
        store,
        start_layer,
        layout,
        problem: ctx.problem,
        samples: ctx.samples,
        caches,
        deterministic: ctx.deterministic,
    })
}
