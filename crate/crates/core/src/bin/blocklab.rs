//! Command-line front end: `train`, `sweep`, `eval`, `oracle`, `plot`, `baseline`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use blocklab::config::Config;
use blocklab::experiments::{emit_plots, format_convergence, reward_series, run_sweep, stats_convergence, training_reward};
use blocklab::oracle::{random_scores, Expectimax, OracleWorld};
use blocklab::training::{evaluate_episodes, train};
use blocklab::{stats, Engine, Error, Mlp, Result};

#[derive(Parser)]
#[command(name = "blocklab", version, about = "Difficulty lab for block-puzzle rule variants")]
struct Cli {
    #[command(flatten)]
    shared: Shared,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Shared {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Single-threaded, bit-reproducible run.
    #[arg(long, global = true)]
    deterministic: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train one rule set.
    Train {
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Train every cell of the configured grid.
    Sweep,
    /// Evaluate a frozen checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Solve a named oracle world exactly.
    Oracle {
        #[arg(long, default_value = "oracle-4x4-mixed")]
        preset: String,
    },
    /// Render stats and sweep CSVs as SVG.
    Plot {
        /// `iteration_stats.csv` files.
        #[arg(long, num_args = 1..)]
        stats: Vec<PathBuf>,
        #[arg(long)]
        sweep: Option<PathBuf>,
    },
    /// Random-play baseline for the configured rules.
    Baseline {
        #[arg(long, default_value_t = 1000)]
        episodes: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn mkdir(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))
}

fn run(cli: Cli) -> Result<()> {
    let sh = cli.shared;
    let cfg = match &sh.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let seed = sh.seed.or(cfg.seed).unwrap_or(0);
    let rules = cfg.rules()?;
    let mut tcfg = cfg.training();
    if let Some(t) = sh.threads {
        tcfg.threads = t;
        if t > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
        }
    }
    if sh.deterministic {
        tcfg.deterministic = true;
        tcfg.threads = 1;
    }

    match cli.cmd {
        Cmd::Train { iterations } => {
            if let Some(n) = iterations {
                tcfg.iterations = n;
            }
            let engine = Engine::standard(rules)?;
            let out = train(&engine, &tcfg, seed, Some(&sh.out_dir))?;
            let cap = engine.rules().reward_cap as f64;
            let series = reward_series(&out.stats);
            if !series.is_empty() {
                println!(
                    "{}: training_reward(50) {:.3}, convergence {}",
                    engine.rules().variant_id(),
                    training_reward(&series, 50)?,
                    format_convergence(stats_convergence(&out.stats, cap, 0.0))
                );
            }
            println!("wrote {}", sh.out_dir.display());
        }
        Cmd::Sweep => {
            let mut sw = cfg.sweep(rules, seed)?;
            sw.training = tcfg;
            if sh.deterministic {
                sw.workers = 1;
            }
            let results = run_sweep(&sw, &sh.out_dir)?;
            for r in &results {
                match &r.error {
                    Some(e) => println!("{:<16} ERROR {e}", r.variant_id),
                    None => println!(
                        "{:<16} reward {:>8.3}  convergence {}",
                        r.variant_id,
                        r.training_reward.unwrap_or(f64::NAN),
                        format_convergence(r.convergence_iteration)
                    ),
                }
            }
        }
        Cmd::Eval { checkpoint, episodes } => {
            let engine = Engine::standard(rules)?;
            let net = Mlp::load(&checkpoint, None)?;
            let n = episodes.or(cfg.eval_episodes()).unwrap_or(200);
            let scores = evaluate_episodes(&engine, &net, &tcfg.search, n, seed, !sh.deterministic)?;
            mkdir(&sh.out_dir)?;
            let mut text = String::from("episode,score\n");
            for (i, s) in scores.iter().enumerate() {
                text.push_str(&format!("{i},{s}\n"));
            }
            let path = sh.out_dir.join("eval.csv");
            std::fs::write(&path, text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            println!("mean {:.3} std {:.3} over {n} episodes", stats::mean(&scores), stats::std_dev(&scores));
        }
        Cmd::Oracle { preset } => {
            let world = OracleWorld::by_name(&preset)?;
            let engine = world.engine();
            let mut solver = Expectimax::new(&engine);
            // Opening positions differ only in the first drawn block.
            let mut start = engine.new_game(seed);
            let mut v0 = 0.0;
            for (id, w) in engine.catalog().weights().iter().enumerate() {
                start.holding[0] = id as u8;
                let e = solver.solve(&start)?;
                println!("holding {:<10} V = {:.6}", engine.catalog().shape(id).name, e.value);
                v0 += w * e.value;
            }
            mkdir(&sh.out_dir)?;
            let path = sh.out_dir.join(format!("{preset}.csv"));
            solver.export_csv(&path)?;
            println!("{preset}: V(empty board) = {v0:.6}, {} states -> {}", solver.memo_len(), path.display());
        }
        Cmd::Plot { stats, sweep } => {
            let written = emit_plots(&stats, sweep.as_deref(), &sh.out_dir, Some(rules.reward_cap as f64))?;
            for p in written {
                println!("wrote {}", p.display());
            }
        }
        Cmd::Baseline { episodes } => {
            let engine = Engine::standard(rules)?;
            if episodes == 0 {
                return Err(Error::Config("need at least one episode".into()));
            }
            let s = random_scores(&engine, episodes, seed)?;
            println!(
                "{} random baseline: mean {:.4} std {:.4} over {episodes} episodes",
                engine.rules().variant_id(),
                stats::mean(&s),
                stats::std_dev(&s)
            );
        }
    }
    Ok(())
}
