//! Finite-difference check of the network's analytic gradients, with and
//! without an injected fault.

use blocklab::evaluator::{gradient_check, Arch, GradFault, TrainSample};
use blocklab::{Engine, Mlp, RuleSet};

fn main() -> blocklab::Result<()> {
    let engine = Engine::standard(RuleSet::classic())?;
    let state = engine.new_game(1);
    let legal: Vec<usize> = engine.legal_actions(&state).iter().map(|a| engine.action_index(*a)).collect();
    let k = legal.len() as f64;
    let sample = TrainSample {
        features: engine.encode_features(&state),
        policy: vec![1.0 / k; legal.len()],
        legal,
        value: 0.3,
    };
    for hidden in [vec![], vec![32], vec![64, 32]] {
        let net = Mlp::new(Arch::new(engine.feature_len(), &hidden, engine.action_count()), 9)?;
        let ok = gradient_check(&net, &sample, 1e-5, 0, GradFault::None)?;
        let bad = gradient_check(&net, &sample, 1e-5, 0, GradFault::BiasOffset(1e-3))?;
        println!("hidden {hidden:?}: max rel error {ok:.2e}, with corrupted bias gradient {bad:.2e}");
    }
    Ok(())
}
