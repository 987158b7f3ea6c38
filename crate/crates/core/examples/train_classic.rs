//! Desk-scale training on classic rules with a small reward cap.
//!
//!     cargo run --release --example train_classic -- [iterations] [seed] [h] [p]

use blocklab::experiments::training_reward;
use blocklab::oracle::random_baseline;
use blocklab::training::{train, TrainConfig};
use blocklab::{Engine, RuleSet};

fn main() -> blocklab::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, d: u64| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(d);
    let iterations = arg(0, 10) as usize;
    let seed = arg(1, 1);
    let rules = RuleSet::classic().with_cap(50).with_holding(arg(2, 3) as usize, arg(3, 0) as usize);
    let engine = Engine::standard(rules)?;

    let (base, _) = random_baseline(&engine, 200, seed)?;
    println!("variant {}  random baseline {base:.2}", engine.rules().variant_id());

    let cfg = TrainConfig { iterations, ..TrainConfig::default() };
    let out = train(&engine, &cfg, seed, None)?;
    for s in &out.stats {
        println!(
            "iter {:3}  reward {:6.2}  len {:6.1}  policy {:.3}  value {:.4}  {:.1}s",
            s.iteration,
            s.mean_reward.unwrap_or(f64::NAN),
            s.mean_length.unwrap_or(f64::NAN),
            s.policy_loss.unwrap_or(f64::NAN),
            s.value_loss.unwrap_or(f64::NAN),
            s.seconds
        );
    }
    let r: Vec<f64> = out.stats.iter().filter_map(|s| s.mean_reward).collect();
    if let (Some(first), Ok(tail)) = (r.first(), training_reward(&r, 10)) {
        println!("first iteration {first:.2}, last-10 mean {tail:.2}");
    }
    Ok(())
}
