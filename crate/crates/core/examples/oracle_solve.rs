//! Exact expectimax on the 4x4 oracle world, and how often a plain search
//! finds its optimal move.
//!
//!     cargo run --release --example oracle_solve

use blocklab::oracle::{Expectimax, OracleWorld};
use blocklab::{search, seeds, SearchConfig, UniformEvaluator};

fn main() -> blocklab::Result<()> {
    let world = OracleWorld::Mixed4x4;
    let engine = world.engine();
    let mut solver = Expectimax::new(&engine);
    let mut start = engine.new_game(0);
    for id in 0..engine.catalog().len() {
        start.holding[0] = id as u8;
        let e = solver.solve(&start)?;
        println!("{}: opening with {:<9} V = {:.4}", world.name(), engine.catalog().shape(id).name, e.value);
    }
    println!("{} states memoized", solver.memo_len());

    let uniform = UniformEvaluator::new(engine.action_count());
    let cfg = SearchConfig::all_candidates(128);
    let mut rng = seeds::rng(5);
    let (mut hits, mut total) = (0, 0);
    for g in 0..20 {
        let mut s = engine.new_game(g);
        while !s.terminal {
            let e = solver.solve(&s)?;
            let r = search(&engine, &uniform, &s, &cfg, &mut rng)?;
            let q = e.action_values.iter().find(|(a, _)| *a == r.chosen_action).map(|x| x.1).unwrap_or(f64::NAN);
            hits += (q >= e.value - 1e-9) as usize;
            total += 1;
            s = engine.step(&s, r.chosen_action, &mut rng)?.0;
        }
    }
    println!("search (n=128) chose an optimal move in {hits}/{total} positions");
    Ok(())
}
