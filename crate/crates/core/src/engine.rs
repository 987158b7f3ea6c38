//! Exact game dynamics.
//!
//! A move is split in two: [`Engine::apply_action`] places a holding block,
//! clears every full row and column at once and shifts the queues, giving a
//! deterministic [`Afterstate`]; [`Engine::apply_chance`] then appends one
//! freshly drawn block. [`Engine::chance_outcomes`] lists the draw
//! distribution exactly, so planners and the oracle never need a learned model.
//!
//! Boards are `u128` bitsets with cell `(r, c)` at bit `r * cols + c`.

use std::fmt::Write as _;

use rand::Rng;
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::rules::{format_blocks, parse_blocks, Catalog, ClearAxes, RuleSet};
use crate::seeds::{self, splitmix64};

pub type Queue = SmallVec<[u8; 8]>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Board(pub u128);

impl Board {
    pub fn is_set(self, cols: usize, row: usize, col: usize) -> bool {
        self.0 >> (row * cols + col) & 1 == 1
    }

    pub fn count(self) -> u32 {
        self.0.count_ones()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GameState {
    pub board: Board,
    /// Shape ids the player may place now, in slot order.
    pub holding: Queue,
    /// FIFO of upcoming shape ids; index 0 enters holding next.
    pub preview: Queue,
    pub score: u32,
    pub terminal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Action {
    pub slot: usize,
    pub row: usize,
    pub col: usize,
}

impl Action {
    pub fn new(slot: usize, row: usize, col: usize) -> Self {
        Action { slot, row, col }
    }
}

/// Post-placement, post-clear position still owing one random draw.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Afterstate {
    pub board: Board,
    pub holding: Queue,
    pub preview: Queue,
    pub score: u32,
    pub pending_draws: u8,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChanceOutcome {
    pub shape_id: usize,
    pub probability: f64,
}

#[derive(Debug, Clone, Copy)]
struct Placement {
    row: u8,
    col: u8,
    mask: u128,
}

/// Rules plus precomputed placement masks, line masks and Zobrist keys.
/// Immutable after construction; share freely across threads.
#[derive(Debug, Clone)]
pub struct Engine {
    rules: RuleSet,
    catalog: Catalog,
    placements: Vec<Vec<Placement>>,
    lines: Vec<u128>,
    zobrist_cells: Vec<u64>,
    zobrist_slots: Vec<u64>,
}

const ZOBRIST_SEED: u64 = 0x5a0b_5157_7a0b_0001;

impl Engine {
    pub fn new(rules: RuleSet, catalog: Catalog) -> Result<Engine> {
        rules.validate_with(&catalog)?;
        let (rows, cols) = (rules.board_rows, rules.board_cols);
        let placements = catalog
            .shapes()
            .iter()
            .map(|shape| {
                let (h, w) = shape.bounding_box();
                let mut out = Vec::new();
                for r in 0..=rows - h {
                    for c in 0..=cols - w {
                        let mut mask = 0u128;
                        for &(dr, dc) in &shape.cells {
                            mask |= 1u128 << ((r + dr as usize) * cols + c + dc as usize);
                        }
                        out.push(Placement {
                            row: r as u8,
                            col: c as u8,
                            mask,
                        });
                    }
                }
                out
            })
            .collect();

        let mut lines = Vec::new();
        if rules.clear_axes != ClearAxes::Cols {
            for r in 0..rows {
                lines.push((0..cols).fold(0u128, |m, c| m | 1u128 << (r * cols + c)));
            }
        }
        if rules.clear_axes != ClearAxes::Rows {
            for c in 0..cols {
                lines.push((0..rows).fold(0u128, |m, r| m | 1u128 << (r * cols + c)));
            }
        }

        let mut z = ZOBRIST_SEED;
        let mut next = || {
            z = splitmix64(z);
            z
        };
        let zobrist_cells = (0..rules.area()).map(|_| next()).collect();
        let zobrist_slots = (0..(rules.h + rules.p) * catalog.len()).map(|_| next()).collect();

        Ok(Engine {
            rules,
            catalog,
            placements,
            lines,
            zobrist_cells,
            zobrist_slots,
        })
    }

    /// Engine for `rules` with the standard catalog of its extra blocks.
    pub fn standard(rules: RuleSet) -> Result<Engine> {
        let rules = rules.validate()?;
        let catalog = Catalog::build(&rules.extra_blocks);
        Engine::new(rules, catalog)
    }

    pub fn rules(&self) -> &RuleSet {
        &self.rules
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn action_count(&self) -> usize {
        self.rules.action_count()
    }

    pub fn feature_len(&self) -> usize {
        self.rules.area() + (self.rules.h + self.rules.p) * self.catalog.len()
    }

    pub fn action_index(&self, a: Action) -> usize {
        (a.slot * self.rules.board_rows + a.row) * self.rules.board_cols + a.col
    }

    pub fn action_from_index(&self, idx: usize) -> Action {
        let area = self.rules.area();
        let cols = self.rules.board_cols;
        Action::new(idx / area, idx % area / cols, idx % cols)
    }

    /// Fresh game: empty board, `h + p` seeded draws (holding first).
    pub fn new_game(&self, seed: u64) -> GameState {
        let mut rng = seeds::rng(seed);
        self.new_game_with(&mut rng)
    }

    pub fn new_game_with<R: Rng + ?Sized>(&self, rng: &mut R) -> GameState {
        let holding = (0..self.rules.h).map(|_| self.catalog.sample(rng) as u8).collect();
        let preview = (0..self.rules.p).map(|_| self.catalog.sample(rng) as u8).collect();
        GameState {
            board: Board(0),
            holding,
            preview,
            score: 0,
            terminal: false,
        }
    }

    fn fits(&self, board: Board, shape: u8) -> bool {
        self.placements[shape as usize].iter().any(|p| p.mask & board.0 == 0)
    }

    /// True iff some holding block fits somewhere.
    pub fn has_legal_action(&self, board: Board, holding: &[u8]) -> bool {
        holding
            .iter()
            .enumerate()
            .any(|(i, &s)| !holding[..i].contains(&s) && self.fits(board, s))
    }

    /// Every `(slot, anchor)` whose cells are in bounds and empty, ordered by
    /// slot, then row, then column.
    pub fn legal_actions(&self, state: &GameState) -> Vec<Action> {
        let mut out = Vec::new();
        self.legal_actions_into(state, &mut out);
        out
    }

    pub fn legal_actions_into(&self, state: &GameState, out: &mut Vec<Action>) {
        out.clear();
        if state.terminal {
            return;
        }
        for (slot, &shape) in state.holding.iter().enumerate() {
            for p in &self.placements[shape as usize] {
                if p.mask & state.board.0 == 0 {
                    out.push(Action::new(slot, p.row as usize, p.col as usize));
                }
            }
        }
    }

    fn placement_mask(&self, state: &GameState, a: Action) -> Result<u128> {
        let illegal = |reason| Error::IllegalAction {
            slot: a.slot,
            row: a.row,
            col: a.col,
            reason,
        };
        if state.terminal {
            return Err(illegal("state is terminal"));
        }
        let shape = *state.holding.get(a.slot).ok_or_else(|| illegal("no such holding slot"))?;
        let (h, w) = self.catalog.shape(shape as usize).bounding_box();
        if a.row + h > self.rules.board_rows || a.col + w > self.rules.board_cols {
            return Err(illegal("shape leaves the board"));
        }
        let cols = self.rules.board_cols;
        let mask = self.catalog.shape(shape as usize).cells.iter().fold(0u128, |m, &(dr, dc)| {
            m | 1u128 << ((a.row + dr as usize) * cols + a.col + dc as usize)
        });
        if mask & state.board.0 != 0 {
            return Err(illegal("overlaps an occupied cell"));
        }
        Ok(mask)
    }

    /// Places the block, clears all full lines together and shifts the
    /// queues. Returns the afterstate and the points earned, truncated so the
    /// score never passes the cap.
    pub fn apply_action(&self, state: &GameState, a: Action) -> Result<(Afterstate, u32)> {
        let mask = self.placement_mask(state, a)?;
        let placed = state.board.0 | mask;
        let mut cleared = 0u128;
        let mut lines = 0u32;
        for &line in &self.lines {
            if placed & line == line {
                cleared |= line;
                lines += 1;
            }
        }
        let headroom = self.rules.reward_cap.saturating_sub(state.score);
        let reward = lines.min(headroom);

        let mut holding = state.holding.clone();
        holding.remove(a.slot);
        let mut preview = state.preview.clone();
        if !preview.is_empty() {
            holding.push(preview.remove(0));
        }
        Ok((
            Afterstate {
                board: Board(placed & !cleared),
                holding,
                preview,
                score: state.score + reward,
                pending_draws: 1,
            },
            reward,
        ))
    }

    /// Exact draw distribution of the pending block.
    pub fn chance_outcomes(&self, _after: &Afterstate) -> Vec<ChanceOutcome> {
        self.catalog
            .weights()
            .iter()
            .enumerate()
            .map(|(shape_id, &probability)| ChanceOutcome { shape_id, probability })
            .collect()
    }

    /// Resolves the pending draw: the block goes to the end of the preview
    /// queue, or straight into holding when there is no preview.
    pub fn apply_chance(&self, after: &Afterstate, shape_id: usize) -> GameState {
        debug_assert!(shape_id < self.catalog.len());
        let mut holding = after.holding.clone();
        let mut preview = after.preview.clone();
        if self.rules.p == 0 {
            holding.push(shape_id as u8);
        } else {
            preview.push(shape_id as u8);
        }
        let terminal = after.score >= self.rules.reward_cap || !self.has_legal_action(after.board, &holding);
        GameState {
            board: after.board,
            holding,
            preview,
            score: after.score,
            terminal,
        }
    }

    /// One full environment step with a random draw.
    pub fn step<R: Rng + ?Sized>(&self, state: &GameState, a: Action, rng: &mut R) -> Result<(GameState, u32, usize)> {
        let (after, reward) = self.apply_action(state, a)?;
        let drawn = self.catalog.sample(rng);
        Ok((self.apply_chance(&after, drawn), reward, drawn))
    }

    /// Board bits, then a one-hot block per holding slot, then per preview slot.
    pub fn encode_features(&self, state: &GameState) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.feature_len());
        self.encode_features_into(state, &mut out);
        out
    }

    pub fn encode_features_into(&self, state: &GameState, out: &mut Vec<f64>) {
        let area = self.rules.area();
        let k = self.catalog.len();
        out.clear();
        out.resize(self.feature_len(), 0.0);
        let mut bits = state.board.0;
        while bits != 0 {
            let i = bits.trailing_zeros() as usize;
            out[i] = 1.0;
            bits &= bits - 1;
        }
        for (slot, &s) in state.holding.iter().chain(state.preview.iter()).enumerate() {
            out[area + slot * k + s as usize] = 1.0;
        }
    }

    /// Zobrist key over cells, slot contents (slot order matters) and score.
    pub fn hash_state(&self, state: &GameState) -> u64 {
        let mut key = 0u64;
        let mut bits = state.board.0;
        while bits != 0 {
            key ^= self.zobrist_cells[bits.trailing_zeros() as usize];
            bits &= bits - 1;
        }
        let k = self.catalog.len();
        for (slot, &s) in state.holding.iter().chain(state.preview.iter()).enumerate() {
            key ^= self.zobrist_slots[slot * k + s as usize];
        }
        // queue lengths differ between decision points and partial states
        key ^= splitmix64(((state.holding.len() as u64) << 40) ^ ((state.preview.len() as u64) << 48) ^ state.score as u64);
        key
    }

    /// Renders the board as `#`/`.` rows followed by the queues.
    pub fn render(&self, state: &GameState) -> String {
        let mut s = String::new();
        for r in 0..self.rules.board_rows {
            for c in 0..self.rules.board_cols {
                s.push(if state.board.is_set(self.rules.board_cols, r, c) { '#' } else { '.' });
            }
            s.push('\n');
        }
        let names = |q: &[u8]| {
            q.iter()
                .map(|&i| self.catalog.shape(i as usize).name.clone())
                .collect::<Vec<_>>()
                .join(" ")
        };
        let _ = writeln!(s, "holding: {}", names(&state.holding));
        if self.rules.p > 0 {
            let _ = writeln!(s, "preview: {}", names(&state.preview));
        }
        let _ = writeln!(s, "score: {}{}", state.score, if state.terminal { " (terminal)" } else { "" });
        s
    }
}

/// One move of an episode log.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MoveRecord {
    pub action: Action,
    pub drawn_shape: usize,
    pub reward: u32,
}

/// Replayable episode: rule set, seed and catalog fingerprint, then moves.
///
/// Text format, one item per line:
///
/// ```text
/// episode v1
/// rules board_rows=8 board_cols=8 h=3 p=0 extra_blocks=- reward_cap=50 clear_axes=both
/// seed 42
/// catalog 5d0c7a1e9b3f2a64
/// slot,row,col,drawn_shape_id,reward
/// 0,3,4,11,0
/// ```
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpisodeLog {
    pub rules: RuleSet,
    pub seed: u64,
    pub catalog_hash: u64,
    pub moves: Vec<MoveRecord>,
}

const LOG_MAGIC: &str = "episode v1";
const LOG_COLUMNS: &str = "slot,row,col,drawn_shape_id,reward";

impl EpisodeLog {
    pub fn new(engine: &Engine, seed: u64) -> Self {
        EpisodeLog {
            rules: engine.rules().clone(),
            seed,
            catalog_hash: engine.catalog().fingerprint(),
            moves: Vec::new(),
        }
    }

    pub fn to_text(&self) -> String {
        let r = &self.rules;
        let blocks = if r.extra_blocks.is_empty() {
            "-".to_string()
        } else {
            format_blocks(&r.extra_blocks)
        };
        let mut s = format!(
            "{LOG_MAGIC}\nrules board_rows={} board_cols={} h={} p={} extra_blocks={} reward_cap={} clear_axes={}\nseed {}\ncatalog {:016x}\n{LOG_COLUMNS}\n",
            r.board_rows, r.board_cols, r.h, r.p, blocks, r.reward_cap, r.clear_axes, self.seed, self.catalog_hash
        );
        for m in &self.moves {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                m.action.slot, m.action.row, m.action.col, m.drawn_shape, m.reward
            );
        }
        s
    }

    pub fn parse(text: &str) -> Result<EpisodeLog> {
        let err = |line: usize, reason: &str| Error::EpisodeLog {
            line,
            reason: reason.to_string(),
        };
        let lines: Vec<&str> = text.lines().collect();
        if lines.first() != Some(&LOG_MAGIC) {
            return Err(err(1, "missing `episode v1` header"));
        }
        let rules_line = lines.get(1).and_then(|l| l.strip_prefix("rules ")).ok_or_else(|| err(2, "expected rules line"))?;
        let mut rules = RuleSet::classic();
        for kv in rules_line.split(' ') {
            let (k, v) = kv.split_once('=').ok_or_else(|| err(2, "expected key=value"))?;
            let num = |v: &str| v.parse::<usize>().map_err(|_| err(2, "bad integer"));
            match k {
                "board_rows" => rules.board_rows = num(v)?,
                "board_cols" => rules.board_cols = num(v)?,
                "h" => rules.h = num(v)?,
                "p" => rules.p = num(v)?,
                "reward_cap" => rules.reward_cap = num(v)? as u32,
                "extra_blocks" => rules.extra_blocks = parse_blocks(v).map_err(|e| err(2, &e.to_string()))?,
                "clear_axes" => rules.clear_axes = v.parse().map_err(|e: Error| err(2, &e.to_string()))?,
                _ => return Err(err(2, "unknown rules key")),
            }
        }
        let seed = lines
            .get(2)
            .and_then(|l| l.strip_prefix("seed "))
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| err(3, "expected `seed <u64>`"))?;
        let catalog_hash = lines
            .get(3)
            .and_then(|l| l.strip_prefix("catalog "))
            .and_then(|v| u64::from_str_radix(v, 16).ok())
            .ok_or_else(|| err(4, "expected `catalog <hex>`"))?;
        if lines.get(4) != Some(&LOG_COLUMNS) {
            return Err(err(5, "expected column header"));
        }
        let mut moves = Vec::new();
        for (i, l) in lines.iter().enumerate().skip(5) {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 5 {
                return Err(err(i + 1, "expected 5 fields"));
            }
            let n = |s: &str| s.parse::<usize>().map_err(|_| err(i + 1, "bad integer"));
            moves.push(MoveRecord {
                action: Action::new(n(f[0])?, n(f[1])?, n(f[2])?),
                drawn_shape: n(f[3])?,
                reward: n(f[4])? as u32,
            });
        }
        Ok(EpisodeLog {
            rules,
            seed,
            catalog_hash,
            moves,
        })
    }

    /// Re-plays the log, returning every decision state including the last.
    pub fn replay(&self, engine: &Engine) -> Result<Vec<GameState>> {
        if engine.catalog().fingerprint() != self.catalog_hash {
            return Err(Error::Contract("episode log catalog does not match engine".into()));
        }
        let mut states = vec![engine.new_game(self.seed)];
        for m in &self.moves {
            let cur = states.last().expect("non-empty");
            let (after, reward) = engine.apply_action(cur, m.action)?;
            if reward != m.reward {
                return Err(Error::Contract(format!(
                    "logged reward {} differs from replayed {reward}",
                    m.reward
                )));
            }
            states.push(engine.apply_chance(&after, m.drawn_shape));
        }
        Ok(states)
    }
}
