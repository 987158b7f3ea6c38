//! Small h-by-p sweep at cap 50, written to `out/sweep_holding`.
//!
//!     cargo run --release --example sweep_holding -- [iterations]

use std::path::Path;

use blocklab::experiments::{format_convergence, run_sweep, SweepConfig};
use blocklab::training::TrainConfig;
use blocklab::RuleSet;

fn main() -> blocklab::Result<()> {
    let iterations = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let training = TrainConfig { iterations, games_per_iteration: 16, ..TrainConfig::default() };
    let mut cfg = SweepConfig::new(RuleSet::classic().with_cap(50), training, 1);
    cfg.holding = vec![1, 2, 3];
    cfg.preview = vec![0, 1];
    cfg.window = iterations.min(10);
    let out = Path::new("out/sweep_holding");
    for r in run_sweep(&cfg, out)? {
        println!(
            "{:<8} reward {:>6.2}  convergence {}",
            r.variant_id,
            r.training_reward.unwrap_or(f64::NAN),
            format_convergence(r.convergence_iteration)
        );
    }
    println!("results in {}", out.join("sweep_results.csv").display());
    Ok(())
}
