//! Experiment execution: drive a [`RunConfig`] end to end and emit the
//! documented artifacts (per-phase loss CSVs, JSON summary, checkpoint,
//! prediction CSV).

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Method, RunConfig};
use crate::gradestack::{GradeStack, UnfreezeSet};
use crate::loss::total_loss;
use crate::metrics::{error_summary, ErrorSummary};
use crate::network::NetworkSpec;
use crate::problems::ProblemDef;
use crate::sampling::{build_samples, derive_seed, linspace, test_grid, PointSet, SampleSet};
use crate::trainer::{
    assert_monotone_chain, train_grade, train_single_grade_baseline, train_stage2, EvalContext,
    TrainReport,
};
use crate::{Error, Result};

/// Everything a run produced, before anything touches the filesystem.
pub struct RunArtifacts {
    pub problem: ProblemDef,
    pub samples: SampleSet,
    pub grid: PointSet,
    pub exact: Vec<f64>,
    pub predictions: Vec<f64>,
    pub stack: GradeStack,
    pub reports: Vec<TrainReport>,
    pub unfreeze: Option<UnfreezeSet>,
    pub summary: RunSummary,
}

impl RunArtifacts {
    pub fn faulted(&self) -> bool {
        self.reports.iter().any(|r| r.fault.is_some())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PhaseSummary {
    pub label: String,
    pub epochs_run: usize,
    pub best_loss: f64,
    pub best_epoch: usize,
    pub relative_l2: f64,
    pub duration_secs: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fault: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub problem: String,
    pub method: Method,
    pub seed: u64,
    pub config_hash: String,
    pub deterministic: bool,
    pub sampler: String,
    pub phases: Vec<PhaseSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unfreeze: Option<UnfreezeSet>,
    /// Best losses never increase along the grade/stage chain.
    pub monotone_chain_ok: bool,
    pub final_relative_l2: f64,
    /// Relative difference between the reported best loss and a fresh
    /// evaluation of the final predictor (consistency of checkpoint and
    /// report; expected at rounding level).
    pub best_loss_reproduced_rel: f64,
}

/// Evaluate the exact solution over a grid in parallel.
pub fn exact_on_grid(problem: &ProblemDef, grid: &PointSet) -> Result<Vec<f64>> {
    let pts: Vec<&[f64]> = grid.iter().collect();
    pts.par_iter().map(|p| problem.exact(p)).collect()
}

/// Run a configuration in memory.
pub fn execute(config: &RunConfig, config_hash: &str, progress: bool) -> Result<RunArtifacts> {
    config.validate()?;
    let problem = config.build_problem()?;
    let geom = problem.geometry();
    let samples = build_samples(&geom, &config.samples, config.seed);
    let grid = test_grid(&geom, &config.test_grid);
    let exact = exact_on_grid(&problem, &grid)?;
    let ctx = EvalContext {
        problem: &problem,
        samples: &samples,
        grid: &grid,
        exact: &exact,
        deterministic: config.deterministic,
        progress,
    };

    let mut reports: Vec<TrainReport> = Vec::new();
    let mut unfreeze = None;
    let mut stack = GradeStack::new(problem.input_dim());
    match config.method {
        Method::TsMgdl => {
            for (i, gcfg) in config.grades.iter().enumerate() {
                let spec = stack.grade_spec(&gcfg.hidden)?;
                stack.push_grade(spec, derive_seed(config.seed, 1 + i as u64))?;
                if progress {
                    eprintln!("training grade {} ({:?} hidden, {} epochs)", i + 1, gcfg.hidden, gcfg.epochs);
                }
                let report = train_grade(&mut stack, gcfg, &ctx)?;
                let faulted = report.fault.is_some();
                reports.push(report);
                if faulted {
                    break;
                }
            }
            let clean = reports.last().map(|r| r.fault.is_none()).unwrap_or(false);
            if let (Some(s2cfg), true) = (&config.stage2, clean) {
                if progress {
                    eprintln!("stage 2: unfreezing last {} hidden layers ({} epochs)", s2cfg.k, s2cfg.epochs);
                }
                let (set, report) = train_stage2(&mut stack, s2cfg, &ctx)?;
                unfreeze = Some(set);
                reports.push(report);
            }
        }
        Method::Sgl => {
            let gcfg = &config.grades[0];
            let mut widths = Vec::with_capacity(gcfg.hidden.len() + 2);
            widths.push(problem.input_dim());
            widths.extend_from_slice(&gcfg.hidden);
            widths.push(1);
            let spec = NetworkSpec::new(widths)?;
            if progress {
                eprintln!("training single-grade baseline ({:?} hidden, {} epochs)", gcfg.hidden, gcfg.epochs);
            }
            let (trained, report) = train_single_grade_baseline(
                spec,
                derive_seed(config.seed, 1),
                gcfg.learning_rate,
                gcfg.decay_rate,
                gcfg.epochs,
                &ctx,
            )?;
            stack = trained;
            reports.push(report);
        }
    }

    let faulted = reports.iter().any(|r| r.fault.is_some());
    let monotone_chain_ok = !faulted && assert_monotone_chain(&reports).is_ok();
    let predictions = stack.predictor_values(&grid)?;
    let final_relative_l2 = reports.last().map(|r| r.relative_l2).unwrap_or(f64::NAN);
    let best_loss_reproduced_rel = if faulted {
        f64::NAN
    } else {
        let re = total_loss(&stack, &problem, &samples)?;
        let best = reports.last().map(|r| r.best_loss).unwrap_or(f64::NAN);
        (re.total - best).abs() / best.abs().max(f64::MIN_POSITIVE)
    };
    let summary = RunSummary {
        problem: config.problem.clone(),
        method: config.method,
        seed: config.seed,
        config_hash: config_hash.to_string(),
        deterministic: config.deterministic,
        sampler: samples.sampler.clone(),
        phases: reports
            .iter()
            .map(|r| PhaseSummary {
                label: r.label.clone(),
                epochs_run: r.history.len(),
                best_loss: r.best_loss,
                best_epoch: r.best_epoch,
                relative_l2: r.relative_l2,
                duration_secs: r.duration_secs,
                fault: r.fault.clone(),
            })
            .collect(),
        unfreeze: unfreeze.clone(),
        monotone_chain_ok,
        final_relative_l2,
        best_loss_reproduced_rel,
    };
    Ok(RunArtifacts {
        problem,
        samples,
        grid,
        exact,
        predictions,
        stack,
        reports,
        unfreeze,
        summary,
    })
}

/// Run and write every artifact under `out`. Returns the artifacts; a
/// training fault is reported as an error after the partial artifacts are
/// on disk.
pub fn run_to_dir(config: &RunConfig, config_hash: &str, out: &Path, progress: bool) -> Result<RunArtifacts> {
    let artifacts = execute(config, config_hash, progress)?;
    write_artifacts(&artifacts, out)?;
    if artifacts.faulted() {
        let what: Vec<String> = artifacts
            .reports
            .iter()
            .filter_map(|r| r.fault.as_ref().map(|f| format!("{}: {f}", r.label)))
            .collect();
        return Err(Error::Numerical(format!(
            "training aborted ({}); partial artifacts written to {}",
            what.join("; "),
            out.display()
        )));
    }
    if !artifacts.summary.monotone_chain_ok {
        return Err(Error::Numerical(
            "loss chain violation: best losses increased across phases".into(),
        ));
    }
    Ok(artifacts)
}

pub fn write_artifacts(artifacts: &RunArtifacts, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    for report in &artifacts.reports {
        write_loss_csv(&out.join(format!("loss_{}.csv", report.label)), report)?;
    }
    let summary = serde_json::to_string_pretty(&artifacts.summary)?;
    std::fs::write(out.join("summary.json"), summary)?;
    std::fs::write(out.join("checkpoint.mgs"), artifacts.stack.checkpoint_bytes())?;
    write_predictions_csv(
        &out.join("predictions.csv"),
        &artifacts.grid,
        &artifacts.exact,
        &artifacts.predictions,
    )?;
    Ok(())
}

/// 17 significant digits: round-trips any f64 exactly.
fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_loss_csv(path: &Path, report: &TrainReport) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(b"epoch,pde,initial,boundary,total,lr\n")?;
    for r in &report.history {
        writeln!(
            f,
            "{},{},{},{},{},{}",
            r.epoch,
            fmt(r.loss.pde),
            fmt(r.loss.initial),
            fmt(r.loss.boundary),
            fmt(r.loss.total),
            fmt(r.lr)
        )?;
    }
    Ok(())
}

const AXES: [&str; 4] = ["t", "x", "y", "z"];

pub fn write_predictions_csv(
    path: &Path,
    grid: &PointSet,
    exact: &[f64],
    predicted: &[f64],
) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    let header: Vec<&str> = AXES[..grid.dim].to_vec();
    writeln!(f, "{},exact,predicted,abs_error", header.join(","))?;
    for (i, p) in grid.iter().enumerate() {
        let coords: Vec<String> = p.iter().map(|&c| fmt(c)).collect();
        writeln!(
            f,
            "{},{},{},{}",
            coords.join(","),
            fmt(exact[i]),
            fmt(predicted[i]),
            fmt((exact[i] - predicted[i]).abs())
        )?;
    }
    Ok(())
}

pub fn write_samples_csv(path: &Path, samples: &SampleSet) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    let dim = samples.collocation.dim;
    writeln!(f, "category,{}", AXES[..dim].join(","))?;
    for (name, set) in [
        ("collocation", &samples.collocation),
        ("initial", &samples.initial),
        ("boundary", &samples.boundary),
    ] {
        for p in set.iter() {
            let coords: Vec<String> = p.iter().map(|&c| fmt(c)).collect();
            writeln!(f, "{name},{}", coords.join(","))?;
        }
    }
    Ok(())
}

/// Evaluate a checkpointed stack over a config's test grid.
pub fn eval_checkpoint(
    stack: &GradeStack,
    config: &RunConfig,
) -> Result<(PointSet, Vec<f64>, Vec<f64>, ErrorSummary)> {
    let problem = config.build_problem()?;
    if stack.input_dim() != problem.input_dim() {
        return Err(Error::config(format!(
            "checkpoint input dimension {} does not match problem {}",
            stack.input_dim(),
            config.problem
        )));
    }
    let grid = test_grid(&problem.geometry(), &config.test_grid);
    let exact = exact_on_grid(&problem, &grid)?;
    let predictions = stack.predictor_values(&grid)?;
    let t_values = linspace(0.0, problem.t_final, config.test_grid[0]);
    let summary = error_summary(&exact, &predictions, &config.test_grid, Some(&t_values))?;
    Ok((grid, exact, predictions, summary))
}
