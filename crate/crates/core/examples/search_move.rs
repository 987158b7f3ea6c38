//! A single Gumbel search from a fresh position, with its trace.
//!
//!     cargo run --release --example search_move -- [simulations] [candidates]

use blocklab::{search, seeds, Engine, RuleSet, SearchConfig, UniformEvaluator};

fn main() -> blocklab::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|s| s.parse().ok()).collect();
    let n = args.first().copied().unwrap_or(64);
    let m = args.get(1).copied().unwrap_or(8);
    let engine = Engine::standard(RuleSet::classic().with_cap(50))?;
    let evaluator = UniformEvaluator::new(engine.action_count());
    // advance until some candidate can complete a line within the tree
    let mut rng = seeds::rng(11);
    let mut state = engine.new_game(3);
    let plain = SearchConfig::new(n, m);
    loop {
        let r = search(&engine, &evaluator, &state, &plain, &mut rng)?;
        let qs: Vec<f64> = r.actions.iter().filter_map(|a| a.q).collect();
        if qs.iter().any(|q| *q != qs[0]) || state.terminal {
            break;
        }
        state = engine.step(&state, r.chosen_action, &mut rng)?.0;
    }
    let cfg = SearchConfig { trace: true, ..SearchConfig::new(n, m) };

    let res = search(&engine, &evaluator, &state, &cfg, &mut rng)?;
    println!("{}", engine.render(&state));
    print!("{}", res.trace.as_deref().unwrap_or(""));
    println!("schedule {:?}", res.schedule.iter().map(|p| (p.survivors, p.visits_per_candidate)).collect::<Vec<_>>());
    println!("{} simulations, {} evaluations", res.simulations, res.evaluations);
    // with a uniform prior the target only moves where visited Q differs
    for (a, p) in res.actions.iter().zip(&res.policy_target).filter(|(a, _)| a.visits > 0) {
        println!(
            "  slot {} at ({}, {})  visits {:>2}  q {:.3}  target {:.4}",
            a.action.slot, a.action.row, a.action.col, a.visits, a.q.unwrap_or(f64::NAN), p
        );
    }
    println!("chosen {:?}", res.chosen_action);
    Ok(())
}
