//! Difficulty metrics, rule-variant sweeps, CSV tables and SVG plots.
//!
//! Two metrics summarize a training run:
//!
//! - *training reward*: the mean of the per-iteration average scores over
//!   the last `window` iterations;
//! - *convergence iteration*: the first iteration that starts a run of three
//!   consecutive iterations whose average score is within `epsilon` of the
//!   reward cap. Runs that never get there are reported as `-`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::engine::Engine;
use crate::error::{Error, Result};
use crate::rules::{format_blocks, parse_blocks, Family, RuleSet};
use crate::seeds;
use crate::training::{read_stats_csv, train, IterationStats, TrainConfig};

pub const DEFAULT_WINDOW: usize = 50;
pub const SWEEP_FILE: &str = "sweep_results.csv";
pub const SWEEP_COLUMNS: [&str; 8] = [
    "variant_id",
    "h",
    "p",
    "extra_blocks",
    "training_reward",
    "convergence_iteration",
    "seed",
    "stats_path",
];
/// Written in place of a metric when a sweep cell failed.
pub const ERROR_MARKER: &str = "ERROR";
/// Written in place of an absent convergence iteration.
pub const ABSENT: &str = "-";

/// Mean of the last `min(window, len)` values.
pub fn training_reward(rewards: &[f64], window: usize) -> Result<f64> {
    if rewards.is_empty() {
        return Err(Error::Metric("training reward of an empty series".into()));
    }
    if window == 0 {
        return Err(Error::Metric("window must be ≥ 1".into()));
    }
    let tail = &rewards[rewards.len() - window.min(rewards.len())..];
    Ok(tail.iter().sum::<f64>() / tail.len() as f64)
}

/// 1-based index of the first of three consecutive values ≥ `max_reward − eps`.
pub fn convergence_iteration(rewards: &[f64], max_reward: f64, eps: f64) -> Option<usize> {
    let hit = |x: f64| x >= max_reward - eps;
    rewards
        .windows(3)
        .position(|w| w.iter().all(|&x| hit(x)))
        .map(|i| i + 1)
}

/// Per-iteration mean rewards, skipping pure-optimization iterations.
pub fn reward_series(stats: &[IterationStats]) -> Vec<f64> {
    stats.iter().filter_map(|s| s.mean_reward).collect()
}

/// Convergence on a stats series, reported with the series' own iteration
/// numbers. Iterations without self-play break a run.
pub fn stats_convergence(stats: &[IterationStats], max_reward: f64, eps: f64) -> Option<usize> {
    let r: Vec<f64> = stats.iter().map(|s| s.mean_reward.unwrap_or(f64::NEG_INFINITY)).collect();
    convergence_iteration(&r, max_reward, eps).map(|i| stats[i - 1].iteration)
}

pub fn format_convergence(c: Option<usize>) -> String {
    c.map_or_else(|| ABSENT.to_string(), |i| i.to_string())
}

/// One grid cell of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub variant_id: String,
    pub h: usize,
    pub p: usize,
    pub extra_blocks: Vec<Family>,
    /// `None` only for failed cells.
    pub training_reward: Option<f64>,
    pub convergence_iteration: Option<usize>,
    pub seed: u64,
    pub stats_path: String,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    /// Board, cap and axes shared by every cell; its h/p/extras are ignored.
    pub base: RuleSet,
    pub holding: Vec<usize>,
    pub preview: Vec<usize>,
    pub extra_sets: Vec<Vec<Family>>,
    pub training: TrainConfig,
    pub master_seed: u64,
    pub window: usize,
    pub epsilon: f64,
    /// Cells trained concurrently (1 = one after another).
    pub workers: usize,
}

impl SweepConfig {
    pub fn new(base: RuleSet, training: TrainConfig, master_seed: u64) -> Self {
        SweepConfig {
            holding: vec![base.h],
            preview: vec![base.p],
            extra_sets: vec![base.extra_blocks.clone()],
            base,
            training,
            master_seed,
            window: DEFAULT_WINDOW,
            epsilon: 0.0,
            workers: 1,
        }
    }

    /// Rule sets in grid order: h outermost, then p, then block set.
    pub fn cells(&self) -> Vec<RuleSet> {
        let mut out = Vec::new();
        for &h in &self.holding {
            for &p in &self.preview {
                for extra in &self.extra_sets {
                    out.push(self.base.clone().with_holding(h, p).with_extra(extra));
                }
            }
        }
        out
    }
}

/// Block-addition grid: each single family (the diagonal) and each
/// unordered pair (off the diagonal).
pub fn block_addition_sets(families: &[Family]) -> Vec<Vec<Family>> {
    let mut out = Vec::new();
    for (i, &a) in families.iter().enumerate() {
        out.push(vec![a]);
        for &b in &families[i + 1..] {
            out.push(vec![a, b]);
        }
    }
    out
}

/// Seed of a cell, derived from its coordinates only.
pub fn cell_seed(master_seed: u64, rules: &RuleSet) -> u64 {
    seeds::derive(master_seed, seeds::CELL, seeds::fnv1a(rules.variant_id().as_bytes()))
}

/// Trains one cell into `dir` and computes both metrics.
pub fn run_cell(rules: &RuleSet, cfg: &SweepConfig, dir: &Path) -> SweepResult {
    let seed = cell_seed(cfg.master_seed, rules);
    let stats_path = dir.join(crate::training::STATS_FILE);
    let mut result = SweepResult {
        variant_id: rules.variant_id(),
        h: rules.h,
        p: rules.p,
        extra_blocks: rules.extra_blocks.clone(),
        training_reward: None,
        convergence_iteration: None,
        seed,
        stats_path: stats_path.display().to_string(),
        error: None,
    };
    let outcome = (|| -> Result<(f64, Option<usize>)> {
        let rules = rules.clone().validate()?;
        let engine = Engine::standard(rules)?;
        let run = train(&engine, &cfg.training, seed, Some(dir))?;
        let reward = training_reward(&reward_series(&run.stats), cfg.window)?;
        Ok((reward, stats_convergence(&run.stats, engine.rules().reward_cap as f64, cfg.epsilon)))
    })();
    match outcome {
        Ok((r, c)) => {
            result.training_reward = Some(r);
            result.convergence_iteration = c;
        }
        Err(e) => {
            let _ = fs::create_dir_all(dir);
            let _ = fs::write(dir.join("error.txt"), e.to_string());
            result.error = Some(e.to_string());
        }
    }
    result
}

/// Trains every cell and writes `sweep_results.csv` under `out_dir`. Failed
/// cells are recorded with [`ERROR_MARKER`] and the sweep carries on.
pub fn run_sweep(cfg: &SweepConfig, out_dir: &Path) -> Result<Vec<SweepResult>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let cells = cfg.cells();
    let dir_of = |r: &RuleSet| out_dir.join("cells").join(r.variant_id());
    let results: Vec<SweepResult> = if cfg.workers <= 1 {
        cells.iter().map(|r| run_cell(r, cfg, &dir_of(r))).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| cells.par_iter().map(|r| run_cell(r, cfg, &dir_of(r))).collect())
    };
    write_sweep_csv(&out_dir.join(SWEEP_FILE), &results)?;
    Ok(results)
}

/// Recomputes a cell's metrics from its stats file.
pub fn metrics_from_stats(path: &Path, reward_cap: u32, window: usize, eps: f64) -> Result<(f64, Option<usize>)> {
    let stats = read_stats_csv(path)?;
    let reward = training_reward(&reward_series(&stats), window)?;
    Ok((reward, stats_convergence(&stats, reward_cap as f64, eps)))
}

fn csv_err(path: &Path, row: usize, column: &str, reason: impl Into<String>) -> Error {
    Error::Csv {
        path: path.display().to_string(),
        row,
        column: column.to_string(),
        reason: reason.into(),
    }
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| csv_err(path, 0, "-", e.to_string());
    w.write_record(SWEEP_COLUMNS).map_err(io)?;
    for r in rows {
        let (reward, conv) = match &r.error {
            Some(_) => (ERROR_MARKER.to_string(), ERROR_MARKER.to_string()),
            None => (
                r.training_reward.map_or_else(|| ERROR_MARKER.to_string(), |x| x.to_string()),
                format_convergence(r.convergence_iteration),
            ),
        };
        let extras = if r.extra_blocks.is_empty() { ABSENT.to_string() } else { format_blocks(&r.extra_blocks) };
        w.write_record([
            r.variant_id.clone(),
            r.h.to_string(),
            r.p.to_string(),
            extras,
            reward,
            conv,
            r.seed.to_string(),
            r.stats_path.clone(),
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| csv_err(path, 0, "-", e.to_string()))?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepResult>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_sweep_csv(&text, path)
}

pub fn parse_sweep_csv(text: &str, path: &Path) -> Result<Vec<SweepResult>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers = r.headers().map_err(|e| csv_err(path, 1, "-", e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != SWEEP_COLUMNS {
        return Err(csv_err(path, 1, "-", format!("expected header {}", SWEEP_COLUMNS.join(","))));
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| csv_err(path, row, "-", e.to_string()))?;
        let f = |k: usize| rec.get(k).unwrap_or("");
        let num = |k: usize| -> Result<u64> {
            f(k).parse().map_err(|_| csv_err(path, row, SWEEP_COLUMNS[k], format!("expected integer, got {:?}", f(k))))
        };
        let failed = f(4) == ERROR_MARKER;
        let training_reward = if failed {
            None
        } else {
            Some(f(4).parse::<f64>().map_err(|_| csv_err(path, row, "training_reward", format!("expected number, got {:?}", f(4))))?)
        };
        let convergence_iteration = match f(5) {
            ABSENT | ERROR_MARKER => None,
            s => Some(s.parse().map_err(|_| {
                csv_err(path, row, "convergence_iteration", format!("expected integer or \"-\", got {s:?}"))
            })?),
        };
        let extra_blocks = parse_blocks(f(3)).map_err(|e| csv_err(path, row, "extra_blocks", e.to_string()))?;
        out.push(SweepResult {
            variant_id: f(0).to_string(),
            h: num(1)? as usize,
            p: num(2)? as usize,
            extra_blocks,
            training_reward,
            convergence_iteration,
            seed: num(6)?,
            stats_path: f(7).to_string(),
            error: failed.then(|| ERROR_MARKER.to_string()),
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------- plots

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Data block embedded in SVG comments; `--` is not allowed inside them.
fn data_comment(header: &str, rows: &[String]) -> String {
    let mut s = format!("<!-- data\n{header}\n");
    for r in rows {
        s.push_str(&r.replace("--", "- -"));
        s.push('\n');
    }
    s.push_str("-->\n");
    s
}

/// Reward-vs-iteration curve with one polyline vertex per iteration that
/// played games.
pub fn curve_svg(title: &str, stats: &[IterationStats], reward_cap: Option<f64>) -> String {
    let (w, h, ml, mr, mt, mb) = (640.0, 400.0, 60.0, 20.0, 40.0, 50.0);
    let pts: Vec<(usize, f64)> = stats.iter().filter_map(|s| s.mean_reward.map(|r| (s.iteration, r))).collect();
    let max_it = stats.iter().map(|s| s.iteration).max().unwrap_or(1).max(1) as f64;
    let min_it = stats.iter().map(|s| s.iteration).min().unwrap_or(1) as f64;
    let top = pts
        .iter()
        .map(|p| p.1)
        .chain(reward_cap)
        .fold(1.0f64, f64::max);
    let x = |it: f64| {
        if max_it > min_it {
            ml + (it - min_it) / (max_it - min_it) * (w - ml - mr)
        } else {
            ml + (w - ml - mr) / 2.0
        }
    };
    let y = |r: f64| h - mb - r / top * (h - mt - mb);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let rows: Vec<String> = stats
        .iter()
        .map(|s| format!("{},{}", s.iteration, s.mean_reward.map_or(String::new(), |r| r.to_string())))
        .collect();
    s.push_str(&data_comment("iteration,mean_reward", &rows));
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#, w / 2.0, esc(title));
    let _ = writeln!(
        s,
        r#"<line x1="{ml}" y1="{}" x2="{}" y2="{}" stroke="black"/><line x1="{ml}" y1="{mt}" x2="{ml}" y2="{}" stroke="black"/>"#,
        h - mb,
        w - mr,
        h - mb,
        h - mb
    );
    for k in 0..=4 {
        let r = top * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"#,
            ml - 6.0,
            y(r) + 4.0,
            fmt_num(r)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">iteration ({}–{})</text>"#,
        w / 2.0,
        h - 14.0,
        min_it,
        max_it
    );
    if let Some(cap) = reward_cap {
        let _ = writeln!(
            s,
            r##"<line x1="{ml}" y1="{:.2}" x2="{}" y2="{:.2}" stroke="#999" stroke-dasharray="4 4"/>"##,
            y(cap),
            w - mr,
            y(cap)
        );
    }
    let poly: Vec<String> = pts.iter().map(|&(it, r)| format!("{:.2},{:.2}", x(it as f64), y(r))).collect();
    let _ = writeln!(s, r##"<polyline fill="none" stroke="#1f77b4" stroke-width="2" points="{}"/>"##, poly.join(" "));
    s.push_str("</svg>\n");
    s
}

fn fmt_num(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{v:.0}")
    } else if v.abs() >= 100.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.1}")
    }
}

/// A labelled grid of optional values; `None` renders as "X".
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub title: String,
    pub row_label: String,
    pub col_label: String,
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub cells: Vec<Vec<Option<f64>>>,
}

impl Heatmap {
    pub fn to_svg(&self) -> String {
        let cell = 64.0;
        let (ml, mt) = (90.0, 70.0);
        let w = ml + cell * self.cols.len() as f64 + 20.0;
        let h = mt + cell * self.rows.len() as f64 + 40.0;
        let vals: Vec<f64> = self.cells.iter().flatten().flatten().copied().collect();
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);

        let mut s = String::new();
        let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
        let mut rows = Vec::new();
        for (r, label) in self.rows.iter().enumerate() {
            for (c, col) in self.cols.iter().enumerate() {
                let v = self.cells[r][c].map_or_else(|| "X".to_string(), |v| v.to_string());
                rows.push(format!("{label},{col},{v}"));
            }
        }
        s.push_str(&data_comment(&format!("{},{},value", self.row_label, self.col_label), &rows));
        let _ = writeln!(s, r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="22" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>"#, w / 2.0, esc(&self.title));
        let _ = writeln!(s, r#"<text x="{}" y="46" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"#, ml + cell * self.cols.len() as f64 / 2.0, esc(&self.col_label));
        let _ = writeln!(s, r#"<text x="14" y="{}" font-family="sans-serif" font-size="12">{}</text>"#, mt - 6.0, esc(&self.row_label));
        for (c, col) in self.cols.iter().enumerate() {
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"#,
                ml + cell * (c as f64 + 0.5),
                mt - 6.0,
                esc(col)
            );
        }
        for (r, label) in self.rows.iter().enumerate() {
            let y0 = mt + cell * r as f64;
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="end">{}</text>"#,
                ml - 8.0,
                y0 + cell / 2.0 + 4.0,
                esc(label)
            );
            for c in 0..self.cols.len() {
                let x0 = ml + cell * c as f64;
                let (fill, text) = match self.cells[r][c] {
                    Some(v) => {
                        let t = if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
                        (shade(t), fmt_num(v))
                    }
                    None => ("#dddddd".to_string(), "X".to_string()),
                };
                let _ = writeln!(s, r#"<rect x="{x0}" y="{y0}" width="{cell}" height="{cell}" fill="{fill}" stroke="white"/>"#);
                let _ = writeln!(
                    s,
                    r#"<text x="{}" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle">{text}</text>"#,
                    x0 + cell / 2.0,
                    y0 + cell / 2.0 + 5.0
                );
            }
        }
        s.push_str("</svg>\n");
        s
    }
}

/// Light yellow → blue ramp.
fn shade(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", lerp(255.0, 49.0), lerp(247.0, 130.0), lerp(188.0, 189.0))
}

/// Which metric a sweep heatmap shows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeatMetric {
    TrainingReward,
    Convergence,
}

impl HeatMetric {
    fn pick(self, r: &SweepResult) -> Option<f64> {
        match self {
            HeatMetric::TrainingReward => r.training_reward,
            HeatMetric::Convergence => r.convergence_iteration.map(|c| c as f64),
        }
    }

    fn name(self) -> &'static str {
        match self {
            HeatMetric::TrainingReward => "training reward",
            HeatMetric::Convergence => "convergence iteration",
        }
    }
}

/// h × p grid over cells that share `extra` blocks.
pub fn hp_heatmap(results: &[SweepResult], extra: &[Family], metric: HeatMetric) -> Heatmap {
    let cells: Vec<&SweepResult> = results.iter().filter(|r| r.extra_blocks == extra).collect();
    let mut hs: Vec<usize> = cells.iter().map(|r| r.h).collect();
    let mut ps: Vec<usize> = cells.iter().map(|r| r.p).collect();
    hs.sort_unstable();
    hs.dedup();
    ps.sort_unstable();
    ps.dedup();
    let grid = hs
        .iter()
        .map(|&h| {
            ps.iter()
                .map(|&p| cells.iter().find(|r| r.h == h && r.p == p).and_then(|r| metric.pick(r)))
                .collect()
        })
        .collect();
    let suffix = if extra.is_empty() { String::new() } else { format!(" (+{})", format_blocks(extra)) };
    Heatmap {
        title: format!("{}{suffix}", metric.name()),
        row_label: "h".into(),
        col_label: "p".into(),
        rows: hs.iter().map(|h| h.to_string()).collect(),
        cols: ps.iter().map(|p| p.to_string()).collect(),
        cells: grid,
    }
}

/// Family × family grid at one (h, p): singles on the diagonal, pairs off it
/// (mirrored).
pub fn block_heatmap(results: &[SweepResult], h: usize, p: usize, metric: HeatMetric) -> Heatmap {
    let cells: Vec<&SweepResult> = results.iter().filter(|r| r.h == h && r.p == p && !r.extra_blocks.is_empty()).collect();
    let mut fams: Vec<Family> = cells.iter().flat_map(|r| r.extra_blocks.iter().copied()).collect();
    fams.sort();
    fams.dedup();
    let find = |a: Family, b: Family| {
        let mut want = vec![a, b];
        want.sort();
        want.dedup();
        cells.iter().find(|r| {
            let mut got = r.extra_blocks.clone();
            got.sort();
            got == want
        })
    };
    let grid = fams
        .iter()
        .map(|&a| fams.iter().map(|&b| find(a, b).and_then(|r| metric.pick(r))).collect())
        .collect();
    let names: Vec<String> = fams.iter().map(|f| f.short_name().to_string()).collect();
    Heatmap {
        title: format!("{} h{h}p{p} with added blocks", metric.name()),
        row_label: "block".into(),
        col_label: "block".into(),
        rows: names.clone(),
        cols: names,
        cells: grid,
    }
}

/// Writes one curve per stats file and, for a sweep, both metric heatmaps
/// (h × p for the base block set, family × family for block additions).
/// Returns the written paths.
pub fn emit_plots(stats_files: &[PathBuf], sweep_file: Option<&Path>, out_dir: &Path, reward_cap: Option<f64>) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    let mut put = |name: String, body: String| -> Result<()> {
        let p = out_dir.join(name);
        fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        written.push(p);
        Ok(())
    };
    for (i, f) in stats_files.iter().enumerate() {
        let stats = read_stats_csv(f)?;
        let stem = f
            .parent()
            .and_then(|d| d.file_name())
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| format!("run{i}"));
        put(format!("curve_{stem}.svg"), curve_svg(&stem, &stats, reward_cap))?;
    }
    if let Some(sweep) = sweep_file {
        let results = read_sweep_csv(sweep)?;
        for (metric, tag) in [(HeatMetric::TrainingReward, "reward"), (HeatMetric::Convergence, "convergence")] {
            if results.iter().any(|r| r.extra_blocks.is_empty()) {
                put(format!("heatmap_hp_{tag}.svg"), hp_heatmap(&results, &[], metric).to_svg())?;
            }
            let mut hp: Vec<(usize, usize)> = results.iter().filter(|r| !r.extra_blocks.is_empty()).map(|r| (r.h, r.p)).collect();
            hp.sort_unstable();
            hp.dedup();
            for (h, p) in hp {
                put(format!("heatmap_blocks_h{h}p{p}_{tag}.svg"), block_heatmap(&results, h, p, metric).to_svg())?;
            }
        }
    }
    Ok(written)
}
