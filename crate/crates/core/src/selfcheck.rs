//! On-demand oracle suites: finite-difference checks of the jet engine and
//! loss gradients, the low-discrepancy sampler fixtures, manufactured
//! solution closures, and the quadrature evaluator guards.
//!
//! Everything here checks an implementation path against an independent
//! route (finite differences, hand-computed digits, closed forms), so the
//! suites stay meaningful no matter how the engine evolves.

use crate::autodiff::{forward_jets, TrainableLayout};
use crate::gradestack::{GradeStack, Phase};
use crate::loss::{loss_and_gradient, PhaseEval, SampleCaches};
use crate::network::{forward, init_params, NetworkSpec};
use crate::problems::ProblemDef;
use crate::sampling::{build_samples, hammersley, radical_inverse, SampleCounts, SplitMix64};
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }
}

pub const SUITES: [&str; 5] = ["gradients", "jets", "hammersley", "exact-residual", "quadrature"];

/// Run one named suite (or `all`).
pub fn run_suite(name: &str) -> Result<Vec<CheckResult>> {
    match name {
        "gradients" => Ok(check_gradients()),
        "jets" => Ok(check_jets()),
        "hammersley" => Ok(check_hammersley()),
        "exact-residual" => Ok(check_exact_residual()),
        "quadrature" => Ok(check_quadrature()),
        "all" => {
            let mut all = Vec::new();
            for s in SUITES {
                all.extend(run_suite(s)?);
            }
            Ok(all)
        }
        other => Err(Error::config(format!(
            "unknown check suite {other:?}; expected one of {SUITES:?} or \"all\""
        ))),
    }
}

/// Total-loss value and gradient for one random small net on a problem.
fn pinn_loss_fixture(
    problem: &ProblemDef,
    seed: u64,
) -> (GradeStack, crate::sampling::SampleSet) {
    let mut stack = GradeStack::new(problem.input_dim());
    let spec = NetworkSpec::new(vec![problem.input_dim(), 8, 8, 1]).unwrap();
    stack.push_grade(spec.clone(), seed).unwrap();
    stack.grade_mut(0).store = init_params(&spec, seed, false);
    let samples = build_samples(
        &problem.geometry(),
        &SampleCounts { collocation: 32, initial: 8, boundary: 6 },
        seed,
    );
    (stack, samples)
}

fn pinn_loss_and_grad(
    stack: &GradeStack,
    problem: &ProblemDef,
    samples: &crate::sampling::SampleSet,
) -> (f64, Vec<f64>) {
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
    let (loss, grad) = loss_and_gradient(&PhaseEval {
        spec,
        store,
        start_layer: start,
        layout: &layout,
        problem,
        samples,
        caches: &caches,
        deterministic: true,
    })
    .unwrap();
    (loss.total, grad)
}

/// Loss gradients vs central finite differences over every parameter,
/// 5 random nets per problem, relative error <= 1e-6.
pub fn check_gradients() -> Vec<CheckResult> {
    let mut results = Vec::new();
    for problem in [ProblemDef::burgers1d(), ProblemDef::burgers2d(), ProblemDef::burgers3d()] {
        let mut worst = 0.0f64;
        for seed in 0..5u64 {
            let (mut stack, samples) = pinn_loss_fixture(&problem, 100 + seed);
            let (_, grad) = pinn_loss_and_grad(&stack, &problem, &samples);
            let h = 1e-6;
            for i in 0..grad.len() {
                let orig = stack.grades()[0].store.as_slice()[i];
                stack.grade_mut(0).store.as_mut_slice()[i] = orig + h;
                let (lp, _) = pinn_loss_and_grad(&stack, &problem, &samples);
                stack.grade_mut(0).store.as_mut_slice()[i] = orig - h;
                let (lm, _) = pinn_loss_and_grad(&stack, &problem, &samples);
                stack.grade_mut(0).store.as_mut_slice()[i] = orig;
                let fd = (lp - lm) / (2.0 * h);
                let rel = (grad[i] - fd).abs() / fd.abs().max(1e-7);
                worst = worst.max(rel);
            }
        }
        results.push(CheckResult::new(
            format!("gradients/{}", problem.name),
            worst <= 1e-6,
            format!("worst relative error {worst:.3e} (tol 1e-6)"),
        ));
    }
    results
}

/// forward_jets vs central finite differences of the plain forward pass,
/// step 1e-4, relative error <= 1e-5, for 1-3 spatial dimensions.
pub fn check_jets() -> Vec<CheckResult> {
    let mut results = Vec::new();
    for dim in 2..=4usize {
        let spec = NetworkSpec::new(vec![dim, 10, 8, 1]).unwrap();
        let store = init_params(&spec, dim as u64 * 7 + 1, false);
        let mut rng = SplitMix64::new(dim as u64);
        let mut worst = 0.0f64;
        let h = 1e-4;
        let tracked: Vec<usize> = (0..dim).collect();
        for _ in 0..20 {
            let x: Vec<f64> = (0..dim).map(|_| rng.next_f64() * 2.0 - 1.0).collect();
            let jet = forward_jets(&spec, &store, &x, &tracked).unwrap();
            for c in 0..dim {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[c] += h;
                xm[c] -= h;
                let up = forward(&spec, &store, &xp).unwrap();
                let um = forward(&spec, &store, &xm).unwrap();
                let u0 = forward(&spec, &store, &x).unwrap();
                let fd1 = (up - um) / (2.0 * h);
                let fd2 = (up - 2.0 * u0 + um) / (h * h);
                // the 0.1 floor keeps the finite-difference rounding noise
                // (about 4e-8 absolute on second differences at this step)
                // out of the relative measure
                worst = worst.max((jet.grad_in[c] - fd1).abs() / fd1.abs().max(0.1));
                worst = worst.max((jet.hess_diag[c] - fd2).abs() / fd2.abs().max(0.1));
            }
        }
        results.push(CheckResult::new(
            format!("jets/{}-input", dim),
            worst <= 1e-5,
            format!("worst relative error {worst:.3e} (tol 1e-5)"),
        ));
    }
    results
}

/// First 8 Hammersley points against hand-computed radical inverses.
pub fn check_hammersley() -> Vec<CheckResult> {
    let expect2: [[f64; 2]; 8] = [
        [0.0, 0.0],
        [1.0 / 8.0, 1.0 / 2.0],
        [2.0 / 8.0, 1.0 / 4.0],
        [3.0 / 8.0, 3.0 / 4.0],
        [4.0 / 8.0, 1.0 / 8.0],
        [5.0 / 8.0, 5.0 / 8.0],
        [6.0 / 8.0, 3.0 / 8.0],
        [7.0 / 8.0, 7.0 / 8.0],
    ];
    let thirds: [f64; 8] = [
        0.0,
        1.0 / 3.0,
        2.0 / 3.0,
        1.0 / 9.0,
        4.0 / 9.0,
        7.0 / 9.0,
        2.0 / 9.0,
        5.0 / 9.0,
    ];
    let pts2 = hammersley(8, 2);
    let ok2 = expect2
        .iter()
        .enumerate()
        .all(|(i, e)| pts2[2 * i] == e[0] && pts2[2 * i + 1] == e[1]);
    let pts3 = hammersley(8, 3);
    let ok3 = (0..8).all(|i| {
        pts3[3 * i] == i as f64 / 8.0
            && pts3[3 * i + 1] == expect2[i][1]
            && (pts3[3 * i + 2] - thirds[i]).abs() < 1e-15
    });
    let okp = [2u64, 3, 5].iter().all(|&b| {
        (0..5u32).all(|m| {
            (radical_inverse(b, b.pow(m)) - (b as f64).powi(-(m as i32 + 1))).abs() < 1e-15
        })
    });
    vec![
        CheckResult::new("hammersley/first8-d2", ok2, "exact match of hand-computed digits"),
        CheckResult::new("hammersley/first8-d3", ok3, "exact match incl. base-3 inverse"),
        CheckResult::new("hammersley/prime-powers", okp, "phi_b(b^m) = b^-(m+1)"),
    ]
}

/// Residual operators on analytic jets of the exact solutions.
pub fn check_exact_residual() -> Vec<CheckResult> {
    let mut results = Vec::new();
    for (problem, tol) in [
        (ProblemDef::burgers2d(), 1e-9),
        (ProblemDef::burgers3d(), 1e-9),
    ] {
        let mut rng = SplitMix64::new(77);
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let mut pt = vec![rng.next_f64()];
            for _ in 0..problem.spatial_dim {
                pt.push(rng.next_f64());
            }
            let jet = problem.exact_jet(&pt).unwrap();
            worst = worst.max(problem.residual(&jet, &pt).abs());
        }
        results.push(CheckResult::new(
            format!("exact-residual/{}", problem.name),
            worst <= tol,
            format!("max |F| = {worst:.3e} (tol {tol:.0e})"),
        ));
    }
    // quadrature-differentiated jets of the 1D solution
    let p1 = ProblemDef::burgers1d();
    let mut rng = SplitMix64::new(78);
    let mut worst = 0.0f64;
    for _ in 0..25 {
        let pt = [0.05 + 0.95 * rng.next_f64(), 1.8 * rng.next_f64() - 0.9];
        let jet = p1.exact_jet(&pt).unwrap();
        worst = worst.max(p1.residual(&jet, &pt).abs());
    }
    results.push(CheckResult::new(
        "exact-residual/burgers1d-quadrature",
        worst <= 1e-6,
        format!("max |F| = {worst:.3e} (tol 1e-6)"),
    ));
    results
}

/// The 1D quadrature evaluator: self-convergence, boundary zeros, and the
/// small-time limit.
pub fn check_quadrature() -> Vec<CheckResult> {
    let p = ProblemDef::burgers1d();
    let mut results = Vec::new();

    let mut converged = true;
    let mut detail = String::from("200 vs 400 nodes within 1e-8 on an 11x33 subgrid");
    'outer: for ti in 0..11 {
        for xi in 0..33 {
            let t = ti as f64 / 10.0;
            let x = -1.0 + 2.0 * xi as f64 / 32.0;
            if let Err(e) = p.exact(&[t, x]) {
                converged = false;
                detail = e.to_string();
                break 'outer;
            }
        }
    }
    results.push(CheckResult::new("quadrature/self-convergence", converged, detail));

    let mut worst = 0.0f64;
    for i in 0..20 {
        let t = (i + 1) as f64 / 20.0;
        worst = worst.max(p.exact(&[t, -1.0]).unwrap_or(f64::NAN).abs());
        worst = worst.max(p.exact(&[t, 1.0]).unwrap_or(f64::NAN).abs());
    }
    results.push(CheckResult::new(
        "quadrature/boundary-zeros",
        worst <= 1e-9,
        format!("max |u(t,+-1)| = {worst:.3e} (tol 1e-9)"),
    ));

    let mut worst = 0.0f64;
    for xi in 0..41 {
        let x = -1.0 + 2.0 * xi as f64 / 40.0;
        let u = p.exact(&[1e-6, x]).unwrap_or(f64::NAN);
        worst = worst.max((u + (std::f64::consts::PI * x).sin()).abs());
    }
    results.push(CheckResult::new(
        "quadrature/small-time-limit",
        worst <= 1e-5,
        format!("max |u(1e-6,x) + sin(pi x)| = {worst:.3e} (tol 1e-5)"),
    ));
    results
}
