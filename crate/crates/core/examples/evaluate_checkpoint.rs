//! Trains briefly, saves a checkpoint, reloads it and compares it with the
//! untrained network over paired evaluation episodes.

use blocklab::stats::{mean, paired_t_greater};
use blocklab::training::{evaluate_episodes, train, TrainConfig};
use blocklab::{Engine, Mlp, RuleSet, SearchConfig};

fn main() -> blocklab::Result<()> {
    let engine = Engine::standard(RuleSet::classic().with_cap(50))?;
    let cfg = TrainConfig { iterations: 3, games_per_iteration: 16, ..TrainConfig::default() };
    let dir = std::env::temp_dir().join("blocklab-evaluate-checkpoint");
    let run = train(&engine, &cfg, 2, Some(&dir))?;
    let trained = Mlp::load(&dir.join("final.sgbz"), Some(run.network.arch()))?;
    let fresh = Mlp::for_engine(cfg.arch(&engine), engine.feature_len(), engine.action_count(), 0)?;

    let search = SearchConfig::new(16, 4);
    let a = evaluate_episodes(&engine, &trained, &search, 100, 9, true)?;
    let b = evaluate_episodes(&engine, &fresh, &search, 100, 9, true)?;
    println!("trained {:.2}, untrained {:.2}, paired p(trained > untrained) = {:.3}", mean(&a), mean(&b), paired_t_greater(&a, &b));
    Ok(())
}
