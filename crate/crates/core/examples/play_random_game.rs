//! One uniformly random game on classic rules, logged and replayed.
//!
//!     cargo run --release --example play_random_game -- [seed]

use blocklab::engine::{EpisodeLog, MoveRecord};
use blocklab::{Engine, RuleSet};
use rand::Rng;

fn main() -> blocklab::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let engine = Engine::standard(RuleSet::classic().with_cap(50))?;
    let mut state = engine.new_game(seed);
    let mut log = EpisodeLog::new(&engine, seed);
    let mut rng = blocklab::seeds::rng(seed ^ 1);

    while !state.terminal {
        let legal = engine.legal_actions(&state);
        let action = legal[rng.gen_range(0..legal.len())];
        let (after, reward) = engine.apply_action(&state, action)?;
        let drawn = engine.catalog().sample(&mut rng);
        log.moves.push(MoveRecord { action, drawn_shape: drawn, reward });
        state = engine.apply_chance(&after, drawn);
    }
    println!("{}", engine.render(&state));
    println!("{} moves, final score {}", log.moves.len(), state.score);

    // the text log reproduces every state exactly
    let text = log.to_text();
    let replayed = EpisodeLog::parse(&text)?.replay(&engine)?;
    assert_eq!(replayed.last(), Some(&state));
    println!("log ({} bytes) replays to the same final state", text.len());
    Ok(())
}
