//! Independent reference implementations used as test oracles.
//!
//! Everything here works on plain `Vec<Vec<bool>>` grids and explicit cell
//! lists, sharing nothing with the bitboard engine except the shape data.
#![allow(dead_code)]

use blocklab::{Action, Engine, GameState};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Naive {
    pub grid: Vec<Vec<bool>>,
    pub holding: Vec<usize>,
    pub preview: Vec<usize>,
    pub score: u32,
    pub terminal: bool,
}

pub struct NaiveRules {
    pub rows: usize,
    pub cols: usize,
    pub p: usize,
    pub cap: u32,
    pub clear_rows: bool,
    pub clear_cols: bool,
    pub shapes: Vec<Vec<(usize, usize)>>,
}

impl NaiveRules {
    pub fn from_engine(engine: &Engine) -> Self {
        let r = engine.rules();
        let axes = r.clear_axes.to_string();
        NaiveRules {
            rows: r.board_rows,
            cols: r.board_cols,
            p: r.p,
            cap: r.reward_cap,
            clear_rows: axes != "cols",
            clear_cols: axes != "rows",
            shapes: engine
                .catalog()
                .shapes()
                .iter()
                .map(|s| s.cells.iter().map(|&(a, b)| (a as usize, b as usize)).collect())
                .collect(),
        }
    }

    pub fn fits_at(&self, grid: &[Vec<bool>], shape: usize, row: usize, col: usize) -> bool {
        self.shapes[shape].iter().all(|&(dr, dc)| {
            let (r, c) = (row + dr, col + dc);
            r < self.rows && c < self.cols && !grid[r][c]
        })
    }

    pub fn legal(&self, s: &Naive) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        if s.terminal {
            return out;
        }
        for (slot, &shape) in s.holding.iter().enumerate() {
            for r in 0..self.rows {
                for c in 0..self.cols {
                    if self.fits_at(&s.grid, shape, r, c) {
                        out.push((slot, r, c));
                    }
                }
            }
        }
        out
    }

    pub fn any_fit(&self, grid: &[Vec<bool>], holding: &[usize]) -> bool {
        holding
            .iter()
            .any(|&sh| (0..self.rows).any(|r| (0..self.cols).any(|c| self.fits_at(grid, sh, r, c))))
    }

    /// Place, clear, score, shift queues, then add `drawn`.
    pub fn step(&self, s: &Naive, a: (usize, usize, usize), drawn: usize) -> (Naive, u32) {
        let (slot, row, col) = a;
        let shape = s.holding[slot];
        assert!(self.fits_at(&s.grid, shape, row, col), "naive: illegal move");
        let mut g = s.grid.clone();
        for &(dr, dc) in &self.shapes[shape] {
            g[row + dr][col + dc] = true;
        }
        let full_rows: Vec<usize> = if self.clear_rows {
            (0..self.rows).filter(|&r| g[r].iter().all(|&x| x)).collect()
        } else {
            Vec::new()
        };
        let full_cols: Vec<usize> = if self.clear_cols {
            (0..self.cols).filter(|&c| (0..self.rows).all(|r| g[r][c])).collect()
        } else {
            Vec::new()
        };
        for &r in &full_rows {
            for c in 0..self.cols {
                g[r][c] = false;
            }
        }
        for &c in &full_cols {
            for r in 0..self.rows {
                g[r][c] = false;
            }
        }
        let lines = (full_rows.len() + full_cols.len()) as u32;
        let reward = lines.min(self.cap - s.score);
        let mut holding = s.holding.clone();
        holding.remove(slot);
        let mut preview = s.preview.clone();
        if !preview.is_empty() {
            holding.push(preview.remove(0));
        }
        if self.p == 0 {
            holding.push(drawn);
        } else {
            preview.push(drawn);
        }
        let score = s.score + reward;
        let terminal = score >= self.cap || !self.any_fit(&g, &holding);
        (
            Naive {
                grid: g,
                holding,
                preview,
                score,
                terminal,
            },
            reward,
        )
    }

    pub fn from_state(&self, st: &GameState) -> Naive {
        let grid = (0..self.rows)
            .map(|r| (0..self.cols).map(|c| st.board.is_set(self.cols, r, c)).collect())
            .collect();
        Naive {
            grid,
            holding: st.holding.iter().map(|&x| x as usize).collect(),
            preview: st.preview.iter().map(|&x| x as usize).collect(),
            score: st.score,
            terminal: st.terminal,
        }
    }

    pub fn filled(&self, s: &Naive) -> usize {
        s.grid.iter().flatten().filter(|&&x| x).count()
    }
}

pub fn action_tuple(a: Action) -> (usize, usize, usize) {
    (a.slot, a.row, a.col)
}

/// Distinct orientations of a cell set under quarter turns, each normalized
/// to touch row 0 and column 0.
pub fn naive_orientations(base: &[(u8, u8)]) -> Vec<Vec<(u8, u8)>> {
    let mut out: Vec<Vec<(u8, u8)>> = Vec::new();
    let mut cur: Vec<(i32, i32)> = base.iter().map(|&(r, c)| (r as i32, c as i32)).collect();
    for _ in 0..4 {
        let mr = cur.iter().map(|p| p.0).min().unwrap();
        let mc = cur.iter().map(|p| p.1).min().unwrap();
        let mut norm: Vec<(u8, u8)> = cur.iter().map(|&(r, c)| ((r - mr) as u8, (c - mc) as u8)).collect();
        norm.sort();
        if !out.contains(&norm) {
            out.push(norm);
        }
        cur = cur.iter().map(|&(r, c)| (c, -r)).collect();
    }
    out
}

/// Plain recursive expectimax without any memo, over the naive model.
/// `V = max_a [r + Σ_o w_o V(next)]`, zero at terminal states.
pub fn naive_expectimax(rules: &NaiveRules, weights: &[f64], s: &Naive) -> f64 {
    if s.terminal {
        return 0.0;
    }
    let mut best = f64::NEG_INFINITY;
    for a in rules.legal(s) {
        best = best.max(naive_action_value(rules, weights, s, a));
    }
    best
}

pub fn naive_action_value(rules: &NaiveRules, weights: &[f64], s: &Naive, a: (usize, usize, usize)) -> f64 {
    let mut v = 0.0;
    let mut reward = 0;
    for (o, &w) in weights.iter().enumerate() {
        let (next, r) = rules.step(s, a, o);
        reward = r;
        v += w * naive_expectimax(rules, weights, &next);
    }
    reward as f64 + v
}

/// Same recursion keyed by the exact naive state (no hashing of features),
/// for instances too large for the memo-free version.
pub fn naive_expectimax_exact(
    rules: &NaiveRules,
    weights: &[f64],
    s: &Naive,
    memo: &mut std::collections::HashMap<Naive, f64>,
) -> f64 {
    if s.terminal {
        return 0.0;
    }
    if let Some(&v) = memo.get(s) {
        return v;
    }
    let mut best = f64::NEG_INFINITY;
    for a in rules.legal(s) {
        let mut v = 0.0;
        let mut reward = 0;
        for (o, &w) in weights.iter().enumerate() {
            let (next, r) = rules.step(s, a, o);
            reward = r;
            v += w * naive_expectimax_exact(rules, weights, &next, memo);
        }
        best = best.max(reward as f64 + v);
    }
    memo.insert(s.clone(), best);
    best
}

/// Memo-free tree size of `s`, giving up once it passes `limit`.
pub fn naive_tree_size(rules: &NaiveRules, weights: &[f64], s: &Naive, limit: usize) -> usize {
    fn go(rules: &NaiveRules, k: usize, s: &Naive, count: &mut usize, limit: usize) {
        *count += 1;
        if s.terminal || *count > limit {
            return;
        }
        for a in rules.legal(s) {
            for o in 0..k {
                go(rules, k, &rules.step(s, a, o).0, count, limit);
                if *count > limit {
                    return;
                }
            }
        }
    }
    let mut n = 0;
    go(rules, weights.len(), s, &mut n, limit);
    n
}
