//! Renders SVG plots for a sweep directory (default `out/sweep_holding`,
//! as written by the `sweep_holding` example).

use std::path::PathBuf;

use blocklab::experiments::{emit_plots, SWEEP_FILE};

fn main() -> blocklab::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "out/sweep_holding".into()));
    let mut stats: Vec<PathBuf> = std::fs::read_dir(dir.join("cells"))
        .map_err(|e| blocklab::Error::io(&dir, e))?
        .filter_map(|e| e.ok())
        .map(|e| e.path().join("iteration_stats.csv"))
        .filter(|p| p.exists())
        .collect();
    stats.sort();
    for p in emit_plots(&stats, Some(&dir.join(SWEEP_FILE)), &dir.join("plots"), Some(50.0))? {
        println!("wrote {}", p.display());
    }
    Ok(())
}
