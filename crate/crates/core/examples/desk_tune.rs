use mgpinn::gradestack::GradeStack;
use mgpinn::loss::total_loss;
use mgpinn::metrics::relative_l2;
use mgpinn::problems::ProblemDef;
use mgpinn::sampling::{build_samples, test_grid, SampleCounts};
use mgpinn::trainer::{train_grade, train_stage2, EvalContext, GradeConfig, Stage2Config};

fn main() {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let (lr1, lr2, lr3, lrs2) = (args[0], args[1], args[2], args[3]);
    let problem = ProblemDef::burgers1d();
    let samples = build_samples(
        &problem.geometry(),
        &SampleCounts { collocation: 2000, initial: 400, boundary: 200 },
        0,
    );
    let grid = test_grid(&problem.geometry(), &[100, 256]);
    let exact: Vec<f64> = grid.iter().map(|p| problem.exact(p).unwrap()).collect();
    let ctx = EvalContext {
        problem: &problem, samples: &samples, grid: &grid, exact: &exact,
        deterministic: true, progress: false,
    };
    let mut stack = GradeStack::new(2);
    let mut reports = Vec::new();
    for (i, (lr, ep)) in [(lr1, 3000usize), (lr2, 5000), (lr3, 5000)].iter().enumerate() {
        stack.push_grade(stack.grade_spec(&[64, 64]).unwrap(), 1 + i as u64).unwrap();
        let cfg = GradeConfig { hidden: vec![64, 64], learning_rate: *lr, decay_rate: 1e-4, epochs: *ep };
        let r = train_grade(&mut stack, &cfg, &ctx).unwrap();
        println!("grade{}: lr {lr:.0e} best_loss {:.4e} rel_l2 {:.4e} ({:.0}s)",
            i + 1, r.best_loss, r.relative_l2, r.duration_secs);
        reports.push(r);
    }
    let s2cfg = Stage2Config { k: 5, learning_rate: lrs2, decay_rate: 1e-4, epochs: 10000 };
    let (_, r) = train_stage2(&mut stack, &s2cfg, &ctx).unwrap();
    println!("stage2: lr {lrs2:.0e} best_loss {:.4e} rel_l2 {:.4e} ({:.0}s)", r.best_loss, r.relative_l2, r.duration_secs);

    let lb = total_loss(&stack, &problem, &samples).unwrap();
    println!("final loss breakdown: pde {:.3e} init {:.3e} bnd {:.3e}", lb.pde, lb.initial, lb.boundary);
    let fresh = build_samples(&problem.geometry(), &SampleCounts { collocation: 2000, initial: 120, boundary: 80 }, 999);
    let lf = total_loss(&stack, &problem, &fresh).unwrap();
    println!("fresh-sample loss:    pde {:.3e} init {:.3e} bnd {:.3e}", lf.pde, lf.initial, lf.boundary);
    let pred = stack.predictor_values(&grid).unwrap();
    for ti in [0usize, 25, 50, 75, 99] {
        let sl = &exact[ti * 256..(ti + 1) * 256];
        let pl = &pred[ti * 256..(ti + 1) * 256];
        println!("t={:.2}: slice rel {:.3e} max {:.3e}",
            ti as f64 / 99.0,
            relative_l2(sl, pl).unwrap(),
            sl.iter().zip(pl).map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max));
    }
}
