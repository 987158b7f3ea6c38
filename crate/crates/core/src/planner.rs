//! Stochastic Gumbel AlphaZero search over the exact engine.
//!
//! The tree alternates decision nodes (game states) and chance nodes
//! (afterstates). At the root, Gumbel-Top-m picks candidate actions without
//! replacement and sequential halving spreads the simulation budget over
//! them, dropping the weaker half after each phase. Below the root, actions
//! follow the deterministic visit-matching rule against the improved policy
//! `softmax(logits + σ(completed Q))`, and chance nodes sample the next block
//! from the catalog's exact draw distribution.
//!
//! Values are remaining return divided by the reward cap, rewards are added
//! along the path with no discount, terminal states are worth exactly 0 and
//! evaluator values are clamped to the score headroom left under the cap.
//! Q-values are min-max normalized over everything backed up in the current
//! tree (plus the root estimate) before σ is applied:
//! `σ(q) = (c_visit + max_b N(b)) · c_scale · q`.

use std::fmt::Write as _;

use rand::distributions::Open01;
use rand::Rng;

use crate::engine::{Action, Afterstate, Engine, GameState};
use crate::error::{Error, Result};
use crate::evaluator::Evaluator;

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    /// Total simulations per move (n).
    pub simulations: usize,
    /// Maximum root candidates sampled by Gumbel-Top-m (m).
    pub max_candidates: usize,
    pub c_visit: f64,
    pub c_scale: f64,
    /// Decision depth at which nodes are treated as leaves; `None` means
    /// ten times the board area.
    pub max_tree_depth: Option<usize>,
    /// Replace Gumbel noise by zeros (test hook).
    pub zero_gumbel: bool,
    /// Collect a human-readable trace in [`SearchResult::trace`].
    pub trace: bool,
    /// Log every backup into [`SearchResult::backups`].
    pub record_backups: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            simulations: 16,
            max_candidates: 4,
            c_visit: 50.0,
            c_scale: 1.0,
            max_tree_depth: None,
            zero_gumbel: false,
            trace: false,
            record_backups: false,
        }
    }
}

impl SearchConfig {
    pub fn new(simulations: usize, max_candidates: usize) -> Self {
        SearchConfig {
            simulations,
            max_candidates,
            ..Default::default()
        }
    }

    /// Every legal action is a root candidate (as long as it fits the budget).
    pub fn all_candidates(simulations: usize) -> Self {
        Self::new(simulations, simulations)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_candidates == 0 {
            return Err(Error::InvalidSearch("m must be ≥ 1".into()));
        }
        if self.simulations < self.max_candidates {
            return Err(Error::InvalidSearch(format!(
                "n = {} must be ≥ m = {}",
                self.simulations, self.max_candidates
            )));
        }
        if !(self.c_visit > 0.0) || !(self.c_scale > 0.0) {
            return Err(Error::InvalidSearch("c_visit and c_scale must be > 0".into()));
        }
        Ok(())
    }
}

/// One sequential-halving phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Phase {
    pub survivors: usize,
    pub visits_per_candidate: usize,
}

impl Phase {
    pub fn total(&self) -> usize {
        self.survivors * self.visits_per_candidate
    }
}

/// Budget plan for `n` simulations over `m` root candidates.
///
/// `⌈log2 m⌉` phases (one when `m = 1`); phase `k` gives each of its
/// survivors `max(1, ⌊n / (phases · survivors)⌋)` visits and the survivor
/// count halves (rounding up) between phases. When the minimum of one visit
/// would overrun `n`, later phases are cut back to what the budget still
/// affords, possibly zero. Whatever remains is spread evenly (floor) over the
/// final phase's survivors, so the total never exceeds `n`.
pub fn sequential_halving_schedule(n: usize, m: usize) -> Vec<Phase> {
    let m = m.max(1);
    let phases = if m == 1 { 1 } else { usize::BITS as usize - (m - 1).leading_zeros() as usize };
    let mut out = Vec::with_capacity(phases);
    let mut count = m;
    let mut used = 0;
    for _ in 0..phases {
        let want = (n / (phases * count)).max(1);
        let afford = (n - used) / count;
        let visits = want.min(afford);
        used += visits * count;
        out.push(Phase {
            survivors: count,
            visits_per_candidate: visits,
        });
        count = count.div_ceil(2);
    }
    let last = out.last_mut().expect("at least one phase");
    last.visits_per_candidate += (n - used) / last.survivors;
    out
}

pub fn schedule_total(schedule: &[Phase]) -> usize {
    schedule.iter().map(Phase::total).sum()
}

/// Result of Gumbel-Top-m at the root.
#[derive(Debug, Clone, PartialEq)]
pub struct GumbelSelection {
    /// Selected action indices, best perturbed logit first.
    pub candidates: Vec<usize>,
    /// The Gumbel variate of every index (0 for masked entries).
    pub gumbel: Vec<f64>,
}

/// Samples one standard Gumbel per finite logit and keeps the
/// `min(m, #finite)` indices with the largest `g + logit`.
pub fn gumbel_top_m<R: Rng + ?Sized>(masked_logits: &[f64], m: usize, rng: &mut R) -> Result<GumbelSelection> {
    let gumbel: Vec<f64> = masked_logits
        .iter()
        .map(|l| {
            if l.is_finite() {
                let u: f64 = rng.sample(Open01);
                -(-u.ln()).ln()
            } else {
                0.0
            }
        })
        .collect();
    top_m_with_noise(masked_logits, &gumbel, m)
}

/// Top-m by `gumbel + logit` for given noise; ties go to the lower index.
pub fn top_m_with_noise(masked_logits: &[f64], gumbel: &[f64], m: usize) -> Result<GumbelSelection> {
    let mut idx: Vec<usize> = (0..masked_logits.len()).filter(|&i| masked_logits[i].is_finite()).collect();
    if idx.is_empty() {
        return Err(Error::InvalidSearch("all logits are masked".into()));
    }
    idx.sort_by(|&a, &b| {
        let sa = gumbel[a] + masked_logits[a];
        let sb = gumbel[b] + masked_logits[b];
        sb.total_cmp(&sa).then(a.cmp(&b))
    });
    idx.truncate(m.min(idx.len()));
    Ok(GumbelSelection {
        candidates: idx,
        gumbel: gumbel.to_vec(),
    })
}

/// `(c_visit + max_child_visits) · c_scale · q_norm`.
pub fn sigma_transform(q_norm: f64, max_child_visits: u32, cfg: &SearchConfig) -> f64 {
    (cfg.c_visit + max_child_visits as f64) * cfg.c_scale * q_norm
}

/// Running range of values seen in one tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinMax {
    pub lo: f64,
    pub hi: f64,
}

impl MinMax {
    pub fn new(seed_value: f64) -> Self {
        MinMax {
            lo: seed_value,
            hi: seed_value,
        }
    }

    pub fn update(&mut self, v: f64) {
        self.lo = self.lo.min(v);
        self.hi = self.hi.max(v);
    }

    /// Maps into `[0, 1]`; a degenerate range maps everything to 0.5.
    pub fn normalize(&self, v: f64) -> f64 {
        if self.hi - self.lo > 1e-12 {
            ((v - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0)
        } else {
            0.5
        }
    }
}

/// Completed Q in normalized units: backed-up mean for visited actions,
/// the node's value estimate for the rest.
pub fn completed_q(q: &[Option<f64>], value_estimate: f64, range: &MinMax) -> Vec<f64> {
    q.iter().map(|v| range.normalize(v.unwrap_or(value_estimate))).collect()
}

/// `softmax(logits + σ(q_norm))` with σ scaled by the largest visit count.
pub fn improved_policy(logits: &[f64], q_norm: &[f64], visits: &[u32], cfg: &SearchConfig) -> Vec<f64> {
    let max_n = visits.iter().copied().max().unwrap_or(0);
    let scores: Vec<f64> = logits
        .iter()
        .zip(q_norm)
        .map(|(l, q)| l + sigma_transform(*q, max_n, cfg))
        .collect();
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= z);
    p
}

/// `argmax_a π′(a) − N(a) / (1 + Σ_b N(b))`, lowest index on ties.
pub fn visit_matching_select(policy: &[f64], visits: &[u32]) -> usize {
    let total: u32 = visits.iter().sum();
    let denom = 1.0 + total as f64;
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, (p, n)) in policy.iter().zip(visits).enumerate() {
        let s = p - *n as f64 / denom;
        if s > best_score {
            best_score = s;
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionStats {
    pub action: Action,
    pub logit: f64,
    pub gumbel: f64,
    pub visits: u32,
    /// Backed-up mean in cap-normalized return units, if visited.
    pub q: Option<f64>,
    pub completed_q: f64,
    /// `g + logit + σ(completed_q)`.
    pub score: f64,
}

/// One backup into a decision-node edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackupEvent {
    pub node: usize,
    pub edge: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub chosen_action: Action,
    /// Position of the chosen action in `legal`.
    pub chosen: usize,
    pub legal: Vec<Action>,
    /// Improved policy over `legal`.
    pub policy_target: Vec<f64>,
    /// Policy-weighted completed Q, cap-normalized.
    pub root_value: f64,
    /// Evaluator value of the root.
    pub root_estimate: f64,
    pub actions: Vec<ActionStats>,
    pub candidates: Vec<usize>,
    pub schedule: Vec<Phase>,
    pub simulations: usize,
    pub evaluations: usize,
    pub q_range: MinMax,
    /// Outcome visit counts of each root chance node, per legal action.
    pub root_chance_counts: Vec<Vec<u32>>,
    pub backups: Vec<BackupEvent>,
    pub trace: Option<String>,
}

impl SearchResult {
    /// Policy target as a dense vector over the flat action space.
    pub fn dense_policy(&self, engine: &Engine) -> Vec<f64> {
        let mut out = vec![0.0; engine.action_count()];
        for (a, p) in self.legal.iter().zip(&self.policy_target) {
            out[engine.action_index(*a)] = *p;
        }
        out
    }
}

struct DecisionNode {
    state: GameState,
    depth: usize,
    value: f64,
    actions: Vec<Action>,
    logits: Vec<f64>,
    visits: Vec<u32>,
    value_sum: Vec<f64>,
    children: Vec<u32>,
}

impl DecisionNode {
    fn q(&self, i: usize) -> Option<f64> {
        (self.visits[i] > 0).then(|| self.value_sum[i] / self.visits[i] as f64)
    }

    fn qs(&self) -> Vec<Option<f64>> {
        (0..self.actions.len()).map(|i| self.q(i)).collect()
    }
}

struct ChanceNode {
    after: Afterstate,
    reward: f64,
    outcome_visits: Vec<u32>,
    children: Vec<u32>,
}

struct Tree<'a, E: Evaluator + ?Sized> {
    engine: &'a Engine,
    evaluator: &'a E,
    cfg: &'a SearchConfig,
    max_depth: usize,
    cap: f64,
    decisions: Vec<DecisionNode>,
    chances: Vec<ChanceNode>,
    range: MinMax,
    features: Vec<f64>,
    evaluations: usize,
    simulations: usize,
    backups: Vec<BackupEvent>,
}

impl<'a, E: Evaluator + ?Sized> Tree<'a, E> {
    fn expand(&mut self, state: GameState, depth: usize) -> Result<u32> {
        let id = self.decisions.len() as u32;
        if state.terminal {
            self.decisions.push(DecisionNode {
                state,
                depth,
                value: 0.0,
                actions: Vec::new(),
                logits: Vec::new(),
                visits: Vec::new(),
                value_sum: Vec::new(),
                children: Vec::new(),
            });
            return Ok(id);
        }
        let actions = self.engine.legal_actions(&state);
        if actions.is_empty() {
            return Err(Error::Contract("non-terminal state has no legal action".into()));
        }
        self.engine.encode_features_into(&state, &mut self.features);
        let eval = self.evaluator.evaluate(&self.features)?;
        self.evaluations += 1;
        let headroom = (self.engine.rules().reward_cap - state.score) as f64 / self.cap;
        let value = eval.value.clamp(0.0, headroom);
        let logits = actions.iter().map(|a| eval.policy_logits[self.engine.action_index(*a)]).collect();
        let k = actions.len();
        self.decisions.push(DecisionNode {
            state,
            depth,
            value,
            actions,
            logits,
            visits: vec![0; k],
            value_sum: vec![0.0; k],
            children: vec![NONE; k],
        });
        Ok(id)
    }

    fn chance_child(&mut self, node: u32, edge: usize) -> Result<u32> {
        let existing = self.decisions[node as usize].children[edge];
        if existing != NONE {
            return Ok(existing);
        }
        let n = &self.decisions[node as usize];
        let (after, reward) = self.engine.apply_action(&n.state, n.actions[edge])?;
        let id = self.chances.len() as u32;
        let k = self.engine.catalog().len();
        self.chances.push(ChanceNode {
            after,
            reward: reward as f64 / self.cap,
            outcome_visits: vec![0; k],
            children: vec![NONE; k],
        });
        self.decisions[node as usize].children[edge] = id;
        Ok(id)
    }

    fn select_nonroot(&self, node: u32) -> usize {
        let n = &self.decisions[node as usize];
        let q = completed_q(&n.qs(), n.value, &self.range);
        let pi = improved_policy(&n.logits, &q, &n.visits, self.cfg);
        visit_matching_select(&pi, &n.visits)
    }

    fn simulate<R: Rng + ?Sized>(&mut self, root_edge: usize, rng: &mut R) -> Result<()> {
        let mut path: Vec<(u32, usize)> = Vec::new();
        let mut node = 0u32;
        let mut edge = root_edge;
        let leaf = loop {
            path.push((node, edge));
            let c = self.chance_child(node, edge)?;
            let outcome = self.engine.catalog().sample(rng);
            self.chances[c as usize].outcome_visits[outcome] += 1;
            let child = self.chances[c as usize].children[outcome];
            if child == NONE {
                let depth = self.decisions[node as usize].depth + 1;
                let state = self.engine.apply_chance(&self.chances[c as usize].after, outcome);
                let id = self.expand(state, depth)?;
                self.chances[c as usize].children[outcome] = id;
                break self.decisions[id as usize].value;
            }
            let d = &self.decisions[child as usize];
            if d.state.terminal || d.depth >= self.max_depth {
                break d.value;
            }
            node = child;
            edge = self.select_nonroot(node);
        };
        self.simulations += 1;

        let mut g = leaf;
        for &(node, edge) in path.iter().rev() {
            let n = &mut self.decisions[node as usize];
            let c = n.children[edge];
            g += self.chances[c as usize].reward;
            n.visits[edge] += 1;
            n.value_sum[edge] += g;
            let q = n.value_sum[edge] / n.visits[edge] as f64;
            self.range.update(q);
            if self.cfg.record_backups {
                self.backups.push(BackupEvent {
                    node: node as usize,
                    edge,
                    value: g,
                });
            }
        }
        Ok(())
    }

    fn root_scores(&self, gumbel: &[f64]) -> Vec<f64> {
        let root = &self.decisions[0];
        let q = completed_q(&root.qs(), root.value, &self.range);
        let max_n = root.visits.iter().copied().max().unwrap_or(0);
        (0..root.actions.len())
            .map(|i| gumbel[i] + root.logits[i] + sigma_transform(q[i], max_n, self.cfg))
            .collect()
    }
}

/// Runs one search from `state` and returns the deterministic action choice
/// plus the improved-policy training target.
pub fn search<E, R>(engine: &Engine, evaluator: &E, state: &GameState, cfg: &SearchConfig, rng: &mut R) -> Result<SearchResult>
where
    E: Evaluator + ?Sized,
    R: Rng + ?Sized,
{
    cfg.validate()?;
    if state.terminal {
        return Err(Error::Contract("search called on a terminal state".into()));
    }
    let cap = engine.rules().reward_cap as f64;
    let mut tree = Tree {
        engine,
        evaluator,
        cfg,
        max_depth: cfg.max_tree_depth.unwrap_or(10 * engine.rules().area()),
        cap,
        decisions: Vec::new(),
        chances: Vec::new(),
        range: MinMax::new(0.0),
        features: Vec::with_capacity(engine.feature_len()),
        evaluations: 0,
        simulations: 0,
        backups: Vec::new(),
    };
    tree.expand(state.clone(), 0)?;
    tree.range = MinMax::new(tree.decisions[0].value);

    let legal_count = tree.decisions[0].actions.len();
    let m = cfg.max_candidates.min(legal_count);
    let logits = tree.decisions[0].logits.clone();
    let selection = if cfg.zero_gumbel {
        top_m_with_noise(&logits, &vec![0.0; legal_count], m)?
    } else {
        gumbel_top_m(&logits, m, rng)?
    };
    let gumbel = selection.gumbel.clone();
    let schedule = sequential_halving_schedule(cfg.simulations, m);

    let mut trace = String::new();
    let fmt_action = |a: &Action| format!("s{}@{},{}", a.slot, a.row, a.col);
    if cfg.trace {
        let _ = writeln!(trace, "root value {:.4}, {} legal, m={m}", tree.decisions[0].value, legal_count);
        for &c in &selection.candidates {
            let a = &tree.decisions[0].actions[c];
            let _ = writeln!(trace, "candidate {} logit={:.4} gumbel={:.4}", fmt_action(a), logits[c], gumbel[c]);
        }
    }

    let mut survivors = selection.candidates.clone();
    for (k, phase) in schedule.iter().enumerate() {
        for _ in 0..phase.visits_per_candidate {
            for &c in &survivors {
                tree.simulate(c, rng)?;
            }
        }
        let scores = tree.root_scores(&gumbel);
        survivors.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        if let Some(next) = schedule.get(k + 1) {
            survivors.truncate(next.survivors);
        }
        if cfg.trace {
            let _ = writeln!(
                trace,
                "phase {k}: {} x {} visits -> {}",
                phase.survivors,
                phase.visits_per_candidate,
                survivors.iter().map(|&c| format!("{}={:.4}", fmt_action(&tree.decisions[0].actions[c]), scores[c])).collect::<Vec<_>>().join(" ")
            );
        }
    }
    let chosen = survivors[0];

    let root = &tree.decisions[0];
    let qs = root.qs();
    let q_norm = completed_q(&qs, root.value, &tree.range);
    let policy_target = improved_policy(&root.logits, &q_norm, &root.visits, cfg);
    let root_value = policy_target
        .iter()
        .zip(&qs)
        .map(|(p, q)| p * q.unwrap_or(root.value))
        .sum();
    let scores = tree.root_scores(&gumbel);
    let actions = (0..legal_count)
        .map(|i| ActionStats {
            action: root.actions[i],
            logit: root.logits[i],
            gumbel: gumbel[i],
            visits: root.visits[i],
            q: qs[i],
            completed_q: q_norm[i],
            score: scores[i],
        })
        .collect();
    let root_chance_counts = root
        .children
        .iter()
        .map(|&c| if c == NONE { Vec::new() } else { tree.chances[c as usize].outcome_visits.clone() })
        .collect();
    if cfg.trace {
        let _ = writeln!(trace, "chosen {} after {} simulations", fmt_action(&root.actions[chosen]), tree.simulations);
    }

    Ok(SearchResult {
        chosen_action: root.actions[chosen],
        chosen,
        legal: root.actions.clone(),
        policy_target,
        root_value,
        root_estimate: root.value,
        actions,
        candidates: selection.candidates,
        schedule,
        simulations: tree.simulations,
        evaluations: tree.evaluations,
        q_range: tree.range,
        root_chance_counts,
        backups: tree.backups,
        trace: cfg.trace.then_some(trace),
    })
}
