//! TOML run configuration.
//!
//! Top-level keys describe the rule set; optional tables tune training,
//! search, sweeps and evaluation. Unknown keys are rejected so typos fail
//! loudly. Every field is optional and falls back to the library default.
//!
//! ```toml
//! board_rows = 8
//! board_cols = 8
//! h = 3
//! p = 0
//! extra_blocks = ["T5"]
//! reward_cap = 50
//! seed = 7
//! clear_axes = "both"
//!
//! [training]
//! iterations = 30
//! games_per_iteration = 40
//!
//! [search]
//! simulations = 16
//! max_candidates = 4
//!
//! [sweep]
//! holding = [1, 2, 3]
//! preview = [0]
//! block_additions = ["U5", "V5", "X5", "T5"]
//! ```

use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::experiments::{block_addition_sets, SweepConfig, DEFAULT_WINDOW};
use crate::planner::SearchConfig;
use crate::rules::{parse_blocks, ClearAxes, Family, RuleSet};
use crate::training::TrainConfig;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub board_rows: Option<usize>,
    pub board_cols: Option<usize>,
    pub h: Option<usize>,
    pub p: Option<usize>,
    pub extra_blocks: Option<Vec<String>>,
    pub reward_cap: Option<u32>,
    pub seed: Option<u64>,
    pub clear_axes: Option<String>,
    pub training: Option<TrainingSection>,
    pub search: Option<SearchSection>,
    pub sweep: Option<SweepSection>,
    pub eval: Option<EvalSection>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSection {
    pub iterations: Option<usize>,
    pub games_per_iteration: Option<usize>,
    pub train_steps: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub momentum: Option<f64>,
    pub value_weight: Option<f64>,
    pub buffer_capacity: Option<usize>,
    pub hidden: Option<Vec<usize>>,
    pub checkpoint_every: Option<usize>,
    pub threads: Option<usize>,
    pub deterministic: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSection {
    pub simulations: Option<usize>,
    pub max_candidates: Option<usize>,
    pub c_visit: Option<f64>,
    pub c_scale: Option<f64>,
    pub max_tree_depth: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub holding: Option<Vec<usize>>,
    pub preview: Option<Vec<usize>>,
    /// Explicit block sets, each like `"U5+T5"` or `"-"` for none.
    pub extra_blocks: Option<Vec<String>>,
    /// Families for a diagonal-plus-pairs block-addition grid.
    pub block_additions: Option<Vec<String>>,
    pub window: Option<usize>,
    pub epsilon: Option<f64>,
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub episodes: Option<usize>,
}

fn families(names: &[String]) -> Result<Vec<Family>> {
    names
        .iter()
        .map(|n| Family::from_str(n).map_err(|e| Error::Config(e.to_string())))
        .collect()
}

impl Config {
    pub fn parse(text: &str) -> Result<Config> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Config::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Rule set on top of `base`, validated.
    pub fn rules_over(&self, base: RuleSet) -> Result<RuleSet> {
        let mut r = base;
        if let Some(v) = self.board_rows {
            r.board_rows = v;
        }
        if let Some(v) = self.board_cols {
            r.board_cols = v;
        }
        if let Some(v) = self.h {
            r.h = v;
        }
        if let Some(v) = self.p {
            r.p = v;
        }
        if let Some(v) = &self.extra_blocks {
            r.extra_blocks = families(v)?;
        }
        if let Some(v) = self.reward_cap {
            r.reward_cap = v;
        }
        if let Some(v) = &self.clear_axes {
            r.clear_axes = ClearAxes::from_str(v).map_err(|e| Error::Config(e.to_string()))?;
        }
        r.validate()
    }

    pub fn rules(&self) -> Result<RuleSet> {
        self.rules_over(RuleSet::classic())
    }

    pub fn search(&self) -> SearchConfig {
        let mut c = SearchConfig::default();
        if let Some(s) = &self.search {
            if let Some(v) = s.simulations {
                c.simulations = v;
            }
            if let Some(v) = s.max_candidates {
                c.max_candidates = v;
            }
            if let Some(v) = s.c_visit {
                c.c_visit = v;
            }
            if let Some(v) = s.c_scale {
                c.c_scale = v;
            }
            if s.max_tree_depth.is_some() {
                c.max_tree_depth = s.max_tree_depth;
            }
        }
        c
    }

    pub fn training(&self) -> TrainConfig {
        let mut c = TrainConfig {
            search: self.search(),
            ..TrainConfig::default()
        };
        if let Some(t) = &self.training {
            macro_rules! set {
                ($($f:ident),*) => { $( if let Some(v) = t.$f.clone() { c.$f = v; } )* };
            }
            set!(
                iterations,
                games_per_iteration,
                train_steps,
                batch_size,
                learning_rate,
                momentum,
                value_weight,
                buffer_capacity,
                checkpoint_every,
                threads,
                deterministic
            );
            if t.hidden.is_some() {
                c.hidden = t.hidden.clone();
            }
        }
        c
    }

    pub fn sweep(&self, base: RuleSet, master_seed: u64) -> Result<SweepConfig> {
        let mut s = SweepConfig::new(base, self.training(), master_seed);
        s.window = DEFAULT_WINDOW;
        if let Some(sw) = &self.sweep {
            if let Some(v) = &sw.holding {
                s.holding = v.clone();
            }
            if let Some(v) = &sw.preview {
                s.preview = v.clone();
            }
            if let Some(v) = &sw.extra_blocks {
                s.extra_sets = v.iter().map(|b| parse_blocks(b)).collect::<Result<_>>()?;
            }
            if let Some(v) = &sw.block_additions {
                s.extra_sets = block_addition_sets(&families(v)?);
            }
            if let Some(v) = sw.window {
                s.window = v;
            }
            if let Some(v) = sw.epsilon {
                s.epsilon = v;
            }
            if let Some(v) = sw.workers {
                s.workers = v;
            }
        }
        if s.holding.is_empty() || s.preview.is_empty() || s.extra_sets.is_empty() {
            return Err(Error::Config("sweep grid has an empty axis".into()));
        }
        Ok(s)
    }

    pub fn eval_episodes(&self) -> Option<usize> {
        self.eval.as_ref().and_then(|e| e.episodes)
    }
}
