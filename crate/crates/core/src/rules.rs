//! Block shapes, oriented catalogs and rule-set configuration.
//!
//! A block is drawn already oriented and is placed without rotation, so the
//! catalog lists every distinct orientation of every enabled family as its
//! own entry.
//!
//! Canonical order: families `I, O, T, S, Z, J, L, U5, V5, X5, T5`; inside a
//! family, rotations by 0°, 90°, 180° and 270° clockwise with duplicates
//! (identical cell sets) dropped. Shape ids are indices into this order.
//!
//! Base cells, as `(row, col)` offsets:
//!
//! ```text
//! I4  ####        O4  ##      T4  ###     S4  .##     Z4  ##.
//!                     ##          .#.         ##.         .##
//! J4  #..         L4  ..#
//!     ###             ###
//! U5  #.#         V5  #..     X5  .#.     T5  ###
//!     ###             #..         ###         .#.
//!                     ###         .#.         .#.
//! ```

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeds::fnv1a;

/// Largest board area representable by the engine's bitboard.
pub const MAX_BOARD_CELLS: usize = 128;

/// Default score limit; ends otherwise endless games.
pub const DEFAULT_REWARD_CAP: u32 = 6750;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Family {
    I4,
    O4,
    T4,
    S4,
    Z4,
    J4,
    L4,
    U5,
    V5,
    X5,
    T5,
}

impl Family {
    pub const TETROMINOES: [Family; 7] = [
        Family::I4,
        Family::O4,
        Family::T4,
        Family::S4,
        Family::Z4,
        Family::J4,
        Family::L4,
    ];
    pub const PENTOMINOES: [Family; 4] = [Family::U5, Family::V5, Family::X5, Family::T5];

    pub fn is_pentomino(self) -> bool {
        Self::PENTOMINOES.contains(&self)
    }

    pub fn base_cells(self) -> &'static [(u8, u8)] {
        match self {
            Family::I4 => &[(0, 0), (0, 1), (0, 2), (0, 3)],
            Family::O4 => &[(0, 0), (0, 1), (1, 0), (1, 1)],
            Family::T4 => &[(0, 0), (0, 1), (0, 2), (1, 1)],
            Family::S4 => &[(0, 1), (0, 2), (1, 0), (1, 1)],
            Family::Z4 => &[(0, 0), (0, 1), (1, 1), (1, 2)],
            Family::J4 => &[(0, 0), (1, 0), (1, 1), (1, 2)],
            Family::L4 => &[(0, 2), (1, 0), (1, 1), (1, 2)],
            Family::U5 => &[(0, 0), (0, 2), (1, 0), (1, 1), (1, 2)],
            Family::V5 => &[(0, 0), (1, 0), (2, 0), (2, 1), (2, 2)],
            Family::X5 => &[(0, 1), (1, 0), (1, 1), (1, 2), (2, 1)],
            Family::T5 => &[(0, 0), (0, 1), (0, 2), (1, 1), (2, 1)],
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            Family::I4 => "I4",
            Family::O4 => "O4",
            Family::T4 => "T4",
            Family::S4 => "S4",
            Family::Z4 => "Z4",
            Family::J4 => "J4",
            Family::L4 => "L4",
            Family::U5 => "U5",
            Family::V5 => "V5",
            Family::X5 => "X5",
            Family::T5 => "T5",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let all = Family::TETROMINOES.iter().chain(Family::PENTOMINOES.iter());
        for fam in all {
            let name = fam.short_name();
            // pentominoes may be written with or without the size suffix
            if s.eq_ignore_ascii_case(name) || (fam.is_pentomino() && s.eq_ignore_ascii_case(&name[..1])) {
                return Ok(*fam);
            }
        }
        Err(Error::InvalidRules(format!("unknown block family {s:?}")))
    }
}

/// One oriented block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shape {
    pub id: usize,
    pub name: String,
    /// Normalized offsets, sorted, min row = min col = 0.
    pub cells: Vec<(u8, u8)>,
}

impl Shape {
    pub fn size(&self) -> usize {
        self.cells.len()
    }

    /// `(rows, cols)` of the bounding box.
    pub fn bounding_box(&self) -> (usize, usize) {
        let rows = self.cells.iter().map(|c| c.0).max().unwrap_or(0) as usize + 1;
        let cols = self.cells.iter().map(|c| c.1).max().unwrap_or(0) as usize + 1;
        (rows, cols)
    }
}

fn normalize(cells: &[(i32, i32)]) -> Vec<(u8, u8)> {
    let min_r = cells.iter().map(|c| c.0).min().unwrap_or(0);
    let min_c = cells.iter().map(|c| c.1).min().unwrap_or(0);
    let mut out: Vec<(u8, u8)> = cells
        .iter()
        .map(|&(r, c)| ((r - min_r) as u8, (c - min_c) as u8))
        .collect();
    out.sort_unstable();
    out
}

/// Clockwise quarter turn: `(r, c) -> (c, -r)`.
fn rotate(cells: &[(u8, u8)]) -> Vec<(u8, u8)> {
    let turned: Vec<(i32, i32)> = cells.iter().map(|&(r, c)| (c as i32, -(r as i32))).collect();
    normalize(&turned)
}

fn is_connected(cells: &[(u8, u8)]) -> bool {
    if cells.is_empty() {
        return false;
    }
    let set: BTreeSet<(u8, u8)> = cells.iter().copied().collect();
    let mut seen = BTreeSet::new();
    let mut stack = vec![cells[0]];
    while let Some((r, c)) = stack.pop() {
        if !seen.insert((r, c)) {
            continue;
        }
        let (r, c) = (r as i32, c as i32);
        for (dr, dc) in [(-1, 0), (1, 0), (0, -1), (0, 1)] {
            let (nr, nc) = (r + dr, c + dc);
            if nr >= 0 && nc >= 0 && set.contains(&(nr as u8, nc as u8)) {
                stack.push((nr as u8, nc as u8));
            }
        }
    }
    seen.len() == set.len()
}

/// How draw weights are assigned to catalog entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DrawScheme {
    /// Every oriented shape equally likely.
    #[default]
    UniformOrientations,
    /// Every family equally likely, then a uniform orientation within it.
    UniformFamilies,
    /// Weights supplied explicitly (custom catalogs).
    Custom,
}

/// Ordered set of oriented shapes with their draw distribution.
#[derive(Debug, Clone)]
pub struct Catalog {
    shapes: Vec<Shape>,
    weights: Vec<f64>,
    scheme: DrawScheme,
    sampler: WeightedIndex<f64>,
}

impl PartialEq for Catalog {
    fn eq(&self, other: &Self) -> bool {
        self.shapes == other.shapes && self.weights == other.weights && self.scheme == other.scheme
    }
}

impl Catalog {
    /// The 19 tetromino orientations plus every orientation of the requested
    /// pentomino families, drawn uniformly over orientations.
    pub fn build(extra_blocks: &[Family]) -> Catalog {
        Self::build_with_scheme(extra_blocks, DrawScheme::UniformOrientations)
    }

    pub fn build_with_scheme(extra_blocks: &[Family], scheme: DrawScheme) -> Catalog {
        let extras: BTreeSet<Family> = extra_blocks.iter().copied().filter(|f| f.is_pentomino()).collect();
        let families: Vec<Family> = Family::TETROMINOES
            .iter()
            .copied()
            .chain(Family::PENTOMINOES.iter().copied().filter(|f| extras.contains(f)))
            .collect();

        let mut shapes = Vec::new();
        let mut family_of = Vec::new();
        for fam in &families {
            let mut orientations: Vec<Vec<(u8, u8)>> = Vec::new();
            let mut cells = normalize(
                &fam.base_cells()
                    .iter()
                    .map(|&(r, c)| (r as i32, c as i32))
                    .collect::<Vec<_>>(),
            );
            for _ in 0..4 {
                if !orientations.contains(&cells) {
                    orientations.push(cells.clone());
                }
                cells = rotate(&cells);
            }
            let single = orientations.len() == 1;
            for (k, cells) in orientations.into_iter().enumerate() {
                let name = if single {
                    fam.short_name().to_string()
                } else {
                    format!("{}-rot{}", fam.short_name(), k * 90)
                };
                // a later rotation can coincide with an earlier one only as a
                // whole cycle, so each surviving k maps to rotation k*90
                shapes.push(Shape {
                    id: shapes.len(),
                    name,
                    cells,
                });
                family_of.push(*fam);
            }
        }

        let weights = match scheme {
            DrawScheme::UniformFamilies => {
                let per_family = 1.0 / families.len() as f64;
                family_of
                    .iter()
                    .map(|f| {
                        let n = family_of.iter().filter(|g| *g == f).count();
                        per_family / n as f64
                    })
                    .collect()
            }
            _ => vec![1.0 / shapes.len() as f64; shapes.len()],
        };
        let scheme = if scheme == DrawScheme::Custom {
            DrawScheme::UniformOrientations
        } else {
            scheme
        };
        Self::assemble(shapes, weights, scheme).expect("built-in catalog is valid")
    }

    /// Custom catalog from named cell lists, drawn uniformly.
    pub fn custom(shapes: &[(&str, &[(u8, u8)])]) -> Result<Catalog> {
        let weights = vec![1.0 / shapes.len().max(1) as f64; shapes.len()];
        Self::custom_weighted(shapes, &weights)
    }

    pub fn custom_weighted(shapes: &[(&str, &[(u8, u8)])], weights: &[f64]) -> Result<Catalog> {
        if shapes.is_empty() {
            return Err(Error::InvalidCatalog("catalog has no shapes".into()));
        }
        if shapes.len() != weights.len() {
            return Err(Error::InvalidCatalog("one weight per shape required".into()));
        }
        if shapes.len() > u8::MAX as usize {
            return Err(Error::InvalidCatalog("at most 255 shapes".into()));
        }
        let list = shapes
            .iter()
            .enumerate()
            .map(|(id, (name, cells))| {
                let cells = normalize(
                    &cells
                        .iter()
                        .map(|&(r, c)| (r as i32, c as i32))
                        .collect::<Vec<_>>(),
                );
                Shape {
                    id,
                    name: name.to_string(),
                    cells,
                }
            })
            .collect();
        Self::assemble(list, weights.to_vec(), DrawScheme::Custom)
    }

    fn assemble(shapes: Vec<Shape>, weights: Vec<f64>, scheme: DrawScheme) -> Result<Catalog> {
        for (i, s) in shapes.iter().enumerate() {
            let mut dedup = s.cells.clone();
            dedup.dedup();
            if dedup.len() != s.cells.len() {
                return Err(Error::InvalidCatalog(format!("shape {} has duplicate cells", s.name)));
            }
            if !is_connected(&s.cells) {
                return Err(Error::InvalidCatalog(format!("shape {} is not 4-connected", s.name)));
            }
            if shapes[..i].iter().any(|o| o.cells == s.cells) {
                return Err(Error::InvalidCatalog(format!("shape {} duplicates an earlier shape", s.name)));
            }
        }
        if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidCatalog("draw weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidCatalog(format!("draw weights sum to {total}, not 1")));
        }
        let sampler = WeightedIndex::new(&weights)
            .map_err(|e| Error::InvalidCatalog(format!("draw weights: {e}")))?;
        Ok(Catalog {
            shapes,
            weights,
            scheme,
            sampler,
        })
    }

    pub fn shapes(&self) -> &[Shape] {
        &self.shapes
    }

    pub fn shape(&self, id: usize) -> &Shape {
        &self.shapes[id]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn scheme(&self) -> DrawScheme {
        self.scheme
    }

    pub fn len(&self) -> usize {
        self.shapes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shapes.is_empty()
    }

    pub fn find(&self, name: &str) -> Option<&Shape> {
        self.shapes.iter().find(|s| s.name == name)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.sampler.sample(rng)
    }

    /// Stable fingerprint over names, cells and weights.
    pub fn fingerprint(&self) -> u64 {
        let mut bytes = Vec::new();
        for (s, w) in self.shapes.iter().zip(&self.weights) {
            bytes.extend_from_slice(s.name.as_bytes());
            bytes.push(0);
            for &(r, c) in &s.cells {
                bytes.push(r);
                bytes.push(c);
            }
            bytes.extend_from_slice(&w.to_bits().to_le_bytes());
        }
        fnv1a(&bytes)
    }
}

/// Which full lines are cleared after a placement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClearAxes {
    #[default]
    Both,
    Rows,
    Cols,
}

impl fmt::Display for ClearAxes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClearAxes::Both => "both",
            ClearAxes::Rows => "rows",
            ClearAxes::Cols => "cols",
        })
    }
}

impl FromStr for ClearAxes {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "both" => Ok(ClearAxes::Both),
            "rows" => Ok(ClearAxes::Rows),
            "cols" => Ok(ClearAxes::Cols),
            other => Err(Error::InvalidRules(format!("clear_axes must be both|rows|cols, got {other:?}"))),
        }
    }
}

/// Seed-derivation policy. Only one exists today; the field keeps episode
/// logs self-describing if another is added.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RngScheme {
    #[default]
    SplitmixChacha8,
}

/// A full rule variant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleSet {
    pub board_rows: usize,
    pub board_cols: usize,
    /// Holding blocks offered each turn.
    pub h: usize,
    /// Preview blocks queued behind the holding set.
    pub p: usize,
    pub extra_blocks: Vec<Family>,
    pub reward_cap: u32,
    pub clear_axes: ClearAxes,
    pub rng_scheme: RngScheme,
}

impl Default for RuleSet {
    fn default() -> Self {
        Self::classic()
    }
}

impl RuleSet {
    /// 8×8, three holding blocks, no preview, tetrominoes only.
    pub fn classic() -> RuleSet {
        RuleSet {
            board_rows: 8,
            board_cols: 8,
            h: 3,
            p: 0,
            extra_blocks: Vec::new(),
            reward_cap: DEFAULT_REWARD_CAP,
            clear_axes: ClearAxes::Both,
            rng_scheme: RngScheme::default(),
        }
    }

    pub fn with_cap(mut self, cap: u32) -> Self {
        self.reward_cap = cap;
        self
    }

    pub fn with_holding(mut self, h: usize, p: usize) -> Self {
        self.h = h;
        self.p = p;
        self
    }

    pub fn with_extra(mut self, extra: &[Family]) -> Self {
        self.extra_blocks = extra.to_vec();
        self
    }

    /// Checks the rule invariants against the catalog built from
    /// `extra_blocks`, normalizing the block list order.
    pub fn validate(mut self) -> Result<RuleSet> {
        let mut extras: Vec<Family> = self.extra_blocks.clone();
        extras.sort();
        extras.dedup();
        if let Some(f) = extras.iter().find(|f| !f.is_pentomino()) {
            return Err(Error::InvalidRules(format!(
                "extra_blocks must be a subset of {{U5, V5, X5, T5}}, got {f}"
            )));
        }
        self.extra_blocks = extras;
        let catalog = Catalog::build(&self.extra_blocks);
        self.validate_with(&catalog)?;
        Ok(self)
    }

    /// Checks the rule invariants against an explicit catalog.
    pub fn validate_with(&self, catalog: &Catalog) -> Result<()> {
        if self.h == 0 {
            return Err(Error::InvalidRules("h must be ≥ 1".into()));
        }
        if self.reward_cap == 0 {
            return Err(Error::InvalidRules("reward_cap must be ≥ 1".into()));
        }
        if self.board_rows == 0 || self.board_cols == 0 {
            return Err(Error::InvalidRules("board dimensions must be positive".into()));
        }
        if self.board_rows * self.board_cols > MAX_BOARD_CELLS {
            return Err(Error::InvalidRules(format!(
                "board {}x{} exceeds {MAX_BOARD_CELLS} cells",
                self.board_rows, self.board_cols
            )));
        }
        if self.h + self.p > 32 {
            return Err(Error::InvalidRules("h + p must be ≤ 32".into()));
        }
        for s in catalog.shapes() {
            let (r, c) = s.bounding_box();
            if r > self.board_rows || c > self.board_cols {
                return Err(Error::InvalidRules(format!(
                    "shape {} needs a {r}x{c} bounding box, board is {}x{}",
                    s.name, self.board_rows, self.board_cols
                )));
            }
        }
        Ok(())
    }

    /// Compact id used in file names and sweep tables, e.g. `h3p0`,
    /// `h2p0+T5`, `r4c4-h1p0`.
    pub fn variant_id(&self) -> String {
        let mut id = String::new();
        if self.board_rows != 8 || self.board_cols != 8 {
            id.push_str(&format!("r{}c{}-", self.board_rows, self.board_cols));
        }
        id.push_str(&format!("h{}p{}", self.h, self.p));
        for f in &self.extra_blocks {
            id.push('+');
            id.push_str(f.short_name());
        }
        id
    }

    pub fn area(&self) -> usize {
        self.board_rows * self.board_cols
    }

    /// Size of the flat action space, `h · rows · cols`.
    pub fn action_count(&self) -> usize {
        self.h * self.area()
    }
}

pub fn format_blocks(blocks: &[Family]) -> String {
    blocks.iter().map(|f| f.short_name()).collect::<Vec<_>>().join("+")
}

pub fn parse_blocks(s: &str) -> Result<Vec<Family>> {
    let s = s.trim();
    if s.is_empty() || s == "-" || s == "none" {
        return Ok(Vec::new());
    }
    s.split(['+', ',', ' '])
        .filter(|t| !t.is_empty())
        .map(Family::from_str)
        .collect()
}
