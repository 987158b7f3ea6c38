//! Non-default variants: a 6x10 board with pentominoes and a preview queue,
//! rows-only clearing, and a hand-made catalog.

use blocklab::oracle::random_baseline;
use blocklab::{Catalog, ClearAxes, Engine, Family, RuleSet};

fn main() -> blocklab::Result<()> {
    let wide = RuleSet {
        board_rows: 6,
        board_cols: 10,
        ..RuleSet::classic().with_holding(2, 2).with_extra(&[Family::U5, Family::T5]).with_cap(30)
    }
    .validate()?;
    let rows_only = RuleSet { clear_axes: ClearAxes::Rows, ..RuleSet::classic().with_cap(30) };
    for rules in [RuleSet::classic().with_cap(30), wide, rows_only] {
        let engine = Engine::standard(rules)?;
        let (mean, std) = random_baseline(&engine, 300, 1)?;
        println!(
            "{:<16} {} shapes, {} features, random play {mean:.2} ± {std:.2}",
            engine.rules().variant_id(),
            engine.catalog().len(),
            engine.feature_len()
        );
    }

    let catalog = Catalog::custom(&[("bar3", &[(0, 0), (0, 1), (0, 2)][..]), ("corner", &[(0, 0), (1, 0), (1, 1)][..])])?;
    let engine = Engine::new(RuleSet::classic().with_cap(30), catalog)?;
    let (mean, _) = random_baseline(&engine, 300, 1)?;
    println!("custom trominoes: {} shapes, random play {mean:.2}", engine.catalog().len());
    Ok(())
}
