//! Ground truth for tiny worlds: exact expectimax and random-play baselines.
//!
//! `V(s) = max_a [ r(s, a) + Σ_o σ(o) · V(g(φ(s, a), o)) ]`, with `V = 0` on
//! terminal states. The memo is keyed by [`Engine::hash_state`], which folds
//! in the score, so the value correctly depends on the headroom under the
//! reward cap.

use std::collections::HashMap;
use std::io::Write as _;
use std::path::Path;

use rand::Rng;

use crate::engine::{Action, Engine, GameState};
use crate::error::{Error, Result};
use crate::rules::{Catalog, RuleSet};
use crate::seeds;
use crate::stats;

/// Default ceiling on memoized states.
pub const DEFAULT_MEMO_BUDGET: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleEntry {
    pub hash: u64,
    /// Exact expected remaining return, in points.
    pub value: f64,
    pub best_action: Option<Action>,
    pub action_values: Vec<(Action, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Memo {
    value: f64,
    best: Option<Action>,
}

/// Memoized expectimax solver bound to one engine.
pub struct Expectimax<'a> {
    engine: &'a Engine,
    memo: HashMap<u64, Memo>,
    budget: usize,
}

impl<'a> Expectimax<'a> {
    pub fn new(engine: &'a Engine) -> Self {
        Self::with_budget(engine, DEFAULT_MEMO_BUDGET)
    }

    pub fn with_budget(engine: &'a Engine, budget: usize) -> Self {
        Expectimax {
            engine,
            memo: HashMap::new(),
            budget,
        }
    }

    pub fn memo_len(&self) -> usize {
        self.memo.len()
    }

    /// Exact value of `state`.
    pub fn value(&mut self, state: &GameState) -> Result<f64> {
        Ok(self.solve_memo(state)?.value)
    }

    /// Value plus the expected return of every legal action.
    pub fn solve(&mut self, state: &GameState) -> Result<OracleEntry> {
        let hash = self.engine.hash_state(state);
        if state.terminal {
            return Ok(OracleEntry {
                hash,
                value: 0.0,
                best_action: None,
                action_values: Vec::new(),
            });
        }
        let mut action_values = Vec::new();
        for a in self.engine.legal_actions(state) {
            action_values.push((a, self.action_value(state, a)?));
        }
        let m = self.solve_memo(state)?;
        Ok(OracleEntry {
            hash,
            value: m.value,
            best_action: m.best,
            action_values,
        })
    }

    /// Expected return of playing `a` in `state`.
    pub fn action_value(&mut self, state: &GameState, a: Action) -> Result<f64> {
        let engine = self.engine;
        let (after, reward) = engine.apply_action(state, a)?;
        let mut expected = reward as f64;
        for o in engine.chance_outcomes(&after) {
            let next = engine.apply_chance(&after, o.shape_id);
            expected += o.probability * self.solve_memo(&next)?.value;
        }
        Ok(expected)
    }

    fn solve_memo(&mut self, state: &GameState) -> Result<Memo> {
        if state.terminal {
            return Ok(Memo { value: 0.0, best: None });
        }
        let key = self.engine.hash_state(state);
        if let Some(m) = self.memo.get(&key) {
            return Ok(*m);
        }
        if self.memo.len() >= self.budget {
            return Err(Error::MemoBudget { entries: self.memo.len() });
        }
        let actions = self.engine.legal_actions(state);
        if actions.is_empty() {
            return Err(Error::Contract("non-terminal state has no legal action".into()));
        }
        let mut best = Memo {
            value: f64::NEG_INFINITY,
            best: None,
        };
        for a in actions {
            let v = self.action_value(state, a)?;
            if v > best.value {
                best = Memo { value: v, best: Some(a) };
            }
        }
        self.memo.insert(key, best);
        Ok(best)
    }

    /// Writes `state_hash,value,best_slot,best_row,best_col` for every
    /// memoized state, sorted by hash.
    pub fn export_csv(&self, path: &Path) -> Result<()> {
        let mut rows: Vec<(&u64, &Memo)> = self.memo.iter().collect();
        rows.sort_by_key(|(k, _)| **k);
        let mut out = Vec::new();
        let _ = writeln!(out, "state_hash,value,best_slot,best_row,best_col");
        for (k, m) in rows {
            let (s, r, c) = m
                .best
                .map(|a| (a.slot.to_string(), a.row.to_string(), a.col.to_string()))
                .unwrap_or_default();
            let _ = writeln!(out, "{k:016x},{},{s},{r},{c}", m.value);
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Named tiny worlds with exactly solvable state spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleWorld {
    /// 2×2 board, a single monomino, h=1, p=0, cap 1.
    Mono2x2,
    /// 4×4 board, dominoes in both orientations plus the 2×2 square,
    /// h=1, p=0, cap 3.
    Mixed4x4,
}

impl OracleWorld {
    pub const ALL: [OracleWorld; 2] = [OracleWorld::Mono2x2, OracleWorld::Mixed4x4];

    pub fn name(self) -> &'static str {
        match self {
            OracleWorld::Mono2x2 => "oracle-2x2-mono",
            OracleWorld::Mixed4x4 => "oracle-4x4-mixed",
        }
    }

    pub fn by_name(name: &str) -> Result<OracleWorld> {
        Self::ALL
            .into_iter()
            .find(|w| w.name() == name)
            .ok_or_else(|| Error::Config(format!("unknown oracle preset {name:?} (known: oracle-2x2-mono, oracle-4x4-mixed)")))
    }

    pub fn rules(self) -> RuleSet {
        let (side, cap) = match self {
            OracleWorld::Mono2x2 => (2, 1),
            OracleWorld::Mixed4x4 => (4, 3),
        };
        RuleSet {
            board_rows: side,
            board_cols: side,
            h: 1,
            p: 0,
            extra_blocks: Vec::new(),
            reward_cap: cap,
            ..RuleSet::classic()
        }
    }

    pub fn catalog(self) -> Catalog {
        let cat = match self {
            OracleWorld::Mono2x2 => Catalog::custom(&[("mono", &[(0, 0)])]),
            OracleWorld::Mixed4x4 => Catalog::custom(&[
                ("domino-h", &[(0, 0), (0, 1)]),
                ("domino-v", &[(0, 0), (1, 0)]),
                ("square", &[(0, 0), (0, 1), (1, 0), (1, 1)]),
            ]),
        };
        cat.expect("preset catalogs are valid")
    }

    pub fn engine(self) -> Engine {
        Engine::new(self.rules(), self.catalog()).expect("preset worlds are valid")
    }
}

/// Mean and population std of final scores under uniformly random legal play.
pub fn random_baseline(engine: &Engine, episodes: usize, seed: u64) -> Result<(f64, f64)> {
    if episodes == 0 {
        return Err(Error::Config("random baseline needs at least one episode".into()));
    }
    let scores = random_scores(engine, episodes, seed)?;
    Ok((stats::mean(&scores), stats::std_dev(&scores)))
}

/// Final score of each random-play episode; episode `i` uses a seed derived
/// from `(seed, i)`.
pub fn random_scores(engine: &Engine, episodes: usize, seed: u64) -> Result<Vec<f64>> {
    let mut actions = Vec::new();
    (0..episodes)
        .map(|i| {
            let mut rng = seeds::rng(seeds::derive(seed, seeds::GAME, i as u64));
            let mut state = engine.new_game_with(&mut rng);
            while !state.terminal {
                engine.legal_actions_into(&state, &mut actions);
                let a = actions[rng.gen_range(0..actions.len())];
                state = engine.step(&state, a, &mut rng)?.0;
            }
            Ok(state.score as f64)
        })
        .collect()
}
