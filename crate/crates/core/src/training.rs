//! Self-play, replay buffer and the optimization loop.
//!
//! One iteration plays `G` games with a frozen snapshot of the network
//! (in parallel unless deterministic mode is on), appends them to a bounded
//! FIFO buffer, then takes `S` SGD steps on batches of `B` positions drawn
//! uniformly from everything buffered. Policy targets are the search's
//! improved policies; value targets are the Monte Carlo return still to come,
//! divided by the reward cap.
//!
//! Per-game results depend only on the game seed, so parallel and serial
//! self-play produce identical records.

use std::collections::VecDeque;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{Engine, GameState};
use crate::error::{Error, Result};
use crate::evaluator::{Arch, Evaluator, LossStats, Mlp, Sgd, TrainSample};
use crate::planner::{search, SearchConfig};
use crate::seeds;
use crate::stats;

#[derive(Debug, Clone, PartialEq)]
pub struct MoveEntry {
    pub state: GameState,
    /// Flat indices of the legal actions at `state`.
    pub legal: Vec<u16>,
    /// Improved policy over `legal`.
    pub policy: Vec<f64>,
    pub action: u16,
    pub reward: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameRecord {
    pub variant: String,
    pub seed: u64,
    pub moves: Vec<MoveEntry>,
    pub final_score: u32,
}

impl GameRecord {
    pub fn len(&self) -> usize {
        self.moves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moves.is_empty()
    }

    /// Compact little-endian encoding, used to compare records byte for byte.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&(self.variant.len() as u32).to_le_bytes());
        out.extend_from_slice(self.variant.as_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&self.final_score.to_le_bytes());
        out.extend_from_slice(&(self.moves.len() as u32).to_le_bytes());
        for m in &self.moves {
            out.extend_from_slice(&m.state.board.0.to_le_bytes());
            out.push(m.state.holding.len() as u8);
            out.extend_from_slice(&m.state.holding);
            out.push(m.state.preview.len() as u8);
            out.extend_from_slice(&m.state.preview);
            out.extend_from_slice(&m.state.score.to_le_bytes());
            out.extend_from_slice(&(m.legal.len() as u16).to_le_bytes());
            for (a, p) in m.legal.iter().zip(&m.policy) {
                out.extend_from_slice(&a.to_le_bytes());
                out.extend_from_slice(&p.to_bits().to_le_bytes());
            }
            out.extend_from_slice(&m.action.to_le_bytes());
            out.extend_from_slice(&m.reward.to_le_bytes());
        }
        out
    }
}

/// Plays one episode to the end with the search's deterministic choices.
pub fn self_play_game<E: Evaluator + ?Sized>(engine: &Engine, evaluator: &E, cfg: &SearchConfig, seed: u64) -> Result<GameRecord> {
    let mut env_rng = seeds::rng(seeds::derive(seed, seeds::ENV, 0));
    let mut search_rng = seeds::rng(seeds::derive(seed, seeds::SEARCH, 0));
    let mut state = engine.new_game_with(&mut env_rng);
    let mut moves = Vec::new();
    while !state.terminal {
        let res = search(engine, evaluator, &state, cfg, &mut search_rng)?;
        let (next, reward, _) = engine.step(&state, res.chosen_action, &mut env_rng)?;
        moves.push(MoveEntry {
            legal: res.legal.iter().map(|a| engine.action_index(*a) as u16).collect(),
            policy: res.policy_target,
            action: engine.action_index(res.chosen_action) as u16,
            reward,
            state,
        });
        state = next;
    }
    Ok(GameRecord {
        variant: engine.rules().variant_id(),
        seed,
        moves,
        final_score: state.score,
    })
}

/// Remaining return after each move, divided by the cap and clipped to [0, 1].
pub fn value_targets(rewards: &[u32], reward_cap: u32) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0u64;
    for (i, r) in rewards.iter().enumerate().rev() {
        acc += *r as u64;
        out[i] = (acc as f64 / reward_cap as f64).clamp(0.0, 1.0);
    }
    out
}

/// Training samples for every move of a finished game.
pub fn make_targets(engine: &Engine, rec: &GameRecord) -> Vec<TrainSample> {
    let rewards: Vec<u32> = rec.moves.iter().map(|m| m.reward).collect();
    let values = value_targets(&rewards, engine.rules().reward_cap);
    rec.moves
        .iter()
        .zip(values)
        .map(|(m, value)| sample_for(engine, m, value))
        .collect()
}

fn sample_for(engine: &Engine, m: &MoveEntry, value: f64) -> TrainSample {
    TrainSample {
        features: engine.encode_features(&m.state),
        legal: m.legal.iter().map(|&a| a as usize).collect(),
        policy: m.policy.clone(),
        value,
    }
}

/// Bounded FIFO of finished games; the oldest game is evicted first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    games: VecDeque<(GameRecord, Vec<f64>)>,
    capacity: usize,
    total_added: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        ReplayBuffer {
            games: VecDeque::with_capacity(capacity.min(4096)),
            capacity: capacity.max(1),
            total_added: 0,
        }
    }

    pub fn push(&mut self, rec: GameRecord, reward_cap: u32) {
        let rewards: Vec<u32> = rec.moves.iter().map(|m| m.reward).collect();
        let values = value_targets(&rewards, reward_cap);
        if self.games.len() == self.capacity {
            self.games.pop_front();
        }
        self.games.push_back((rec, values));
        self.total_added += 1;
    }

    pub fn len(&self) -> usize {
        self.games.len()
    }

    pub fn is_empty(&self) -> bool {
        self.games.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn total_added(&self) -> usize {
        self.total_added
    }

    pub fn positions(&self) -> usize {
        self.games.iter().map(|(g, _)| g.len()).sum()
    }

    pub fn games(&self) -> impl Iterator<Item = &GameRecord> {
        self.games.iter().map(|(g, _)| g)
    }

    /// `(game, move)` pairs drawn uniformly over all buffered positions.
    pub fn sample_positions<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Vec<(usize, usize)> {
        let mut prefix = Vec::with_capacity(self.games.len());
        let mut total = 0usize;
        for (g, _) in &self.games {
            total += g.len();
            prefix.push(total);
        }
        if total == 0 {
            return Vec::new();
        }
        (0..count)
            .map(|_| {
                let u = rng.gen_range(0..total);
                let game = prefix.partition_point(|&end| end <= u);
                let start = if game == 0 { 0 } else { prefix[game - 1] };
                (game, u - start)
            })
            .collect()
    }

    pub fn sample_batch<R: Rng + ?Sized>(&self, engine: &Engine, rng: &mut R, count: usize) -> Vec<TrainSample> {
        self.sample_positions(rng, count)
            .into_iter()
            .map(|(g, m)| {
                let (rec, values) = &self.games[g];
                sample_for(engine, &rec.moves[m], values[m])
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationStats {
    pub iteration: usize,
    pub games: usize,
    pub mean_reward: Option<f64>,
    pub std_reward: Option<f64>,
    pub mean_length: Option<f64>,
    pub policy_loss: Option<f64>,
    pub value_loss: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub iterations: usize,
    pub games_per_iteration: usize,
    pub train_steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    /// Weight of the value term relative to the policy cross-entropy.
    pub value_weight: f64,
    pub buffer_capacity: usize,
    /// Hidden widths; `None` picks [`Arch::default_for`].
    pub hidden: Option<Vec<usize>>,
    pub search: SearchConfig,
    /// Write a checkpoint every K iterations (0 = only the final one).
    pub checkpoint_every: usize,
    /// Self-play worker threads (0 = all cores).
    pub threads: usize,
    /// Serial self-play and zeroed wall-clock column, for byte-identical
    /// stats files.
    pub deterministic: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 30,
            games_per_iteration: 40,
            train_steps: 100,
            batch_size: 64,
            learning_rate: 0.02,
            momentum: 0.9,
            value_weight: 1.0,
            buffer_capacity: 500,
            hidden: None,
            search: SearchConfig::new(16, 4),
            checkpoint_every: 0,
            threads: 0,
            deterministic: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.search.validate()?;
        if self.train_steps > 0 && self.batch_size == 0 {
            return Err(Error::InvalidTraining("batch_size must be ≥ 1".into()));
        }
        if !(self.learning_rate >= 0.0) || !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidTraining("need lr ≥ 0 and momentum in [0, 1)".into()));
        }
        Ok(())
    }

    pub fn arch(&self, engine: &Engine) -> Arch {
        match &self.hidden {
            Some(h) => Arch::new(engine.feature_len(), h, engine.action_count()),
            None => Arch::default_for(engine.feature_len(), engine.action_count()),
        }
    }
}

/// Owns the network, optimizer and buffer across iterations.
pub struct Trainer<'a> {
    engine: &'a Engine,
    cfg: TrainConfig,
    master_seed: u64,
    net: Mlp,
    opt: Sgd,
    buffer: ReplayBuffer,
    iteration: usize,
}

impl<'a> Trainer<'a> {
    pub fn new(engine: &'a Engine, cfg: TrainConfig, master_seed: u64) -> Result<Self> {
        cfg.validate()?;
        let arch = cfg.arch(engine);
        let net = Mlp::for_engine(arch, engine.feature_len(), engine.action_count(), seeds::derive(master_seed, seeds::INIT, 0))?;
        Ok(Trainer {
            engine,
            opt: Sgd::new(cfg.momentum).with_value_weight(cfg.value_weight),
            buffer: ReplayBuffer::new(cfg.buffer_capacity),
            cfg,
            master_seed,
            net,
            iteration: 0,
        })
    }

    /// Continue from existing parameters.
    pub fn with_network(mut self, net: Mlp) -> Result<Self> {
        if net.arch().input != self.engine.feature_len() || net.arch().actions != self.engine.action_count() {
            return Err(Error::ShapeMismatch("network does not match the rule set".into()));
        }
        self.net = net;
        Ok(self)
    }

    pub fn network(&self) -> &Mlp {
        &self.net
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn buffer_mut(&mut self) -> &mut ReplayBuffer {
        &mut self.buffer
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn into_network(self) -> Mlp {
        self.net
    }

    fn play_games(&self, iter_seed: u64) -> Result<Vec<GameRecord>> {
        let n = self.cfg.games_per_iteration;
        let seed_of = |g: usize| seeds::derive(iter_seed, seeds::GAME, g as u64);
        let net = &self.net;
        if self.cfg.deterministic || self.cfg.threads == 1 {
            return (0..n).map(|g| self_play_game(self.engine, net, &self.cfg.search, seed_of(g))).collect();
        }
        let run = || -> Result<Vec<GameRecord>> {
            (0..n)
                .into_par_iter()
                .map(|g| self_play_game(self.engine, net, &self.cfg.search, seed_of(g)))
                .collect()
        };
        if self.cfg.threads == 0 {
            run()
        } else {
            rayon::ThreadPoolBuilder::new()
                .num_threads(self.cfg.threads)
                .build()
                .map_err(|e| Error::InvalidTraining(format!("thread pool: {e}")))?
                .install(run)
        }
    }

    /// Self-play with the current snapshot, then optimization.
    pub fn run_iteration(&mut self) -> Result<IterationStats> {
        self.iteration += 1;
        let started = Instant::now();
        let iter_seed = seeds::derive(self.master_seed, seeds::ITERATION, self.iteration as u64);

        let records = self.play_games(iter_seed)?;
        let scores: Vec<f64> = records.iter().map(|r| r.final_score as f64).collect();
        let lengths: Vec<f64> = records.iter().map(|r| r.len() as f64).collect();
        let cap = self.engine.rules().reward_cap;
        for r in records {
            self.buffer.push(r, cap);
        }

        let mut losses: Vec<LossStats> = Vec::new();
        if self.cfg.train_steps > 0 {
            if self.buffer.positions() == 0 {
                return Err(Error::InvalidTraining("optimization requested on an empty replay buffer".into()));
            }
            let mut rng = seeds::rng(seeds::derive(iter_seed, seeds::OPTIMIZE, 0));
            for step in 0..self.cfg.train_steps {
                let batch = self.buffer.sample_batch(self.engine, &mut rng, self.cfg.batch_size);
                let s = self
                    .opt
                    .train_batch(&mut self.net, &batch, self.cfg.learning_rate)
                    .map_err(|e| match e {
                        Error::NonFiniteLoss { policy, value, .. } => Error::NonFiniteLoss { policy, value, step },
                        other => other,
                    })?;
                losses.push(s);
            }
        }

        let some = |xs: &[f64], f: fn(&[f64]) -> f64| (!xs.is_empty()).then(|| f(xs));
        let pl: Vec<f64> = losses.iter().map(|l| l.policy_loss).collect();
        let vl: Vec<f64> = losses.iter().map(|l| l.value_loss).collect();
        Ok(IterationStats {
            iteration: self.iteration,
            games: scores.len(),
            mean_reward: some(&scores, stats::mean),
            std_reward: some(&scores, stats::std_dev),
            mean_length: some(&lengths, stats::mean),
            policy_loss: some(&pl, stats::mean),
            value_loss: some(&vl, stats::mean),
            seconds: if self.cfg.deterministic { 0.0 } else { started.elapsed().as_secs_f64() },
        })
    }
}

/// Outcome of a full training run.
pub struct TrainOutcome {
    pub stats: Vec<IterationStats>,
    pub network: Mlp,
    pub stats_path: Option<PathBuf>,
}

pub const STATS_FILE: &str = "iteration_stats.csv";
pub const FINAL_CHECKPOINT: &str = "final.sgbz";

/// Trains for `cfg.iterations` iterations. With an output directory, the
/// stats CSV is rewritten after every iteration and checkpoints are saved
/// every `checkpoint_every` iterations plus once at the end.
pub fn train(engine: &Engine, cfg: &TrainConfig, master_seed: u64, out_dir: Option<&Path>) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(engine, cfg.clone(), master_seed)?;
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut all = Vec::with_capacity(cfg.iterations);
    for i in 1..=cfg.iterations {
        let s = trainer.run_iteration()?;
        all.push(s);
        if let Some(dir) = out_dir {
            write_stats_csv(&dir.join(STATS_FILE), &all)?;
            if cfg.checkpoint_every > 0 && i % cfg.checkpoint_every == 0 {
                trainer.network().save(&dir.join(format!("iter{i:04}.sgbz")))?;
            }
        }
    }
    let stats_path = match out_dir {
        Some(dir) => {
            trainer.network().save(&dir.join(FINAL_CHECKPOINT))?;
            let p = dir.join(STATS_FILE);
            write_stats_csv(&p, &all)?;
            Some(p)
        }
        None => None,
    };
    Ok(TrainOutcome {
        stats: all,
        network: trainer.into_network(),
        stats_path,
    })
}

/// Final scores of `episodes` searched games with a frozen evaluator;
/// episode `i` uses seed `derive(seed, EVAL, i)` so different networks or
/// rule sets can be compared episode by episode.
pub fn evaluate_episodes<E: Evaluator + ?Sized>(
    engine: &Engine,
    evaluator: &E,
    cfg: &SearchConfig,
    episodes: usize,
    seed: u64,
    parallel: bool,
) -> Result<Vec<f64>> {
    let one = |i: usize| -> Result<f64> {
        let rec = self_play_game(engine, evaluator, cfg, seeds::derive(seed, seeds::EVAL, i as u64))?;
        Ok(rec.final_score as f64)
    };
    if parallel {
        (0..episodes).into_par_iter().map(one).collect()
    } else {
        (0..episodes).map(one).collect()
    }
}

pub fn write_stats_csv(path: &Path, rows: &[IterationStats]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| csv_err(path, 0, "-", e.to_string()))?;
    }
    if rows.is_empty() {
        w.write_record(STATS_COLUMNS).map_err(|e| csv_err(path, 0, "-", e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| csv_err(path, 0, "-", e.to_string()))?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub const STATS_COLUMNS: [&str; 8] = [
    "iteration",
    "games",
    "mean_reward",
    "std_reward",
    "mean_length",
    "policy_loss",
    "value_loss",
    "seconds",
];

fn csv_err(path: &Path, row: usize, column: &str, reason: String) -> Error {
    Error::Csv {
        path: path.display().to_string(),
        row,
        column: column.to_string(),
        reason,
    }
}

/// Reads an `iteration_stats.csv`, reporting the first malformed cell.
pub fn read_stats_csv(path: &Path) -> Result<Vec<IterationStats>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_stats_csv(&text, path)
}

pub fn parse_stats_csv(text: &str, path: &Path) -> Result<Vec<IterationStats>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers = r.headers().map_err(|e| csv_err(path, 1, "-", e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != STATS_COLUMNS {
        return Err(csv_err(path, 1, "-", format!("expected header {}", STATS_COLUMNS.join(","))));
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| csv_err(path, row, "-", e.to_string()))?;
        let field = |k: usize| rec.get(k).unwrap_or("");
        let int = |k: usize| -> Result<usize> {
            field(k).parse().map_err(|_| csv_err(path, row, STATS_COLUMNS[k], format!("expected integer, got {:?}", field(k))))
        };
        let opt = |k: usize| -> Result<Option<f64>> {
            let f = field(k);
            if f.is_empty() {
                return Ok(None);
            }
            f.parse().map(Some).map_err(|_| csv_err(path, row, STATS_COLUMNS[k], format!("expected number, got {f:?}")))
        };
        out.push(IterationStats {
            iteration: int(0)?,
            games: int(1)?,
            mean_reward: opt(2)?,
            std_reward: opt(3)?,
            mean_length: opt(4)?,
            policy_loss: opt(5)?,
            value_loss: opt(6)?,
            seconds: opt(7)?.ok_or_else(|| csv_err(path, row, "seconds", "missing".into()))?,
        });
    }
    Ok(out)
}
