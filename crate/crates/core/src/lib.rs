//! Difficulty-assessment lab for Tetris Block Puzzle rule variants.
//!
//! The crate is organized bottom-up:
//!
//! - [`rules`]: block shapes, oriented catalogs and validated rule sets.
//! - [`engine`]: exact game dynamics over a bitboard, split into a
//!   deterministic placement step (afterstate) and a random block draw.
//! - [`evaluator`]: a small policy/value network with hand-written
//!   backpropagation, plus a uniform baseline.
//! - [`planner`]: stochastic Gumbel AlphaZero search over the exact engine.
//! - [`training`]: self-play, replay buffer and the optimization loop.
//! - [`oracle`]: exact expectimax for tiny worlds and random-play baselines.
//! - [`experiments`]: difficulty metrics, rule sweeps, CSV tables and SVG plots.
//!
//! Runnable walkthroughs live in the crate's `examples/` directory; the
//! `blocklab` binary exposes the same capabilities on the command line.

pub mod config;
pub mod engine;
pub mod error;
pub mod evaluator;
pub mod experiments;
pub mod oracle;
pub mod planner;
pub mod rules;
pub mod seeds;
pub mod stats;
pub mod training;

pub use engine::{Action, Afterstate, ChanceOutcome, Engine, GameState};
pub use error::{Error, Result};
pub use evaluator::{Arch, Evaluation, Evaluator, Mlp, UniformEvaluator};
pub use planner::{search, SearchConfig, SearchResult};
pub use rules::{Catalog, ClearAxes, Family, RuleSet, Shape};
