use std::time::Instant;
use mgpinn::config::RunConfig;
use mgpinn::runner::execute;

fn main() {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let sgl = std::env::args().any(|a| a == "--sgl");
    let cfg = if sgl { RunConfig::desk_1d_sgl(seed) } else { RunConfig::desk_1d(seed) };
    let t0 = Instant::now();
    let artifacts = execute(&cfg, "bench", true).unwrap();
    let dt = t0.elapsed().as_secs_f64();
    println!("== seed {seed} method {:?} total {:.1} min", cfg.method, dt / 60.0);
    for r in &artifacts.reports {
        println!(
            "  {}: best_loss {:.4e} @ {} | rel_l2 {:.4e} | {:.1}s",
            r.label, r.best_loss, r.best_epoch, r.relative_l2, r.duration_secs
        );
    }
    println!("monotone={} verified_rel={:.2e}", artifacts.summary.monotone_chain_ok, artifacts.summary.best_loss_reproduced_rel);
}
