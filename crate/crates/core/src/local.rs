//! Complete descriptions of balls, pattern sentences, basic local sentences,
//! and the decomposition of a local formula into the descriptions that imply
//! it.
//!
//! A [`Description`] of radius `r` fixes the colour of every pixel of a ball
//! `B(x, r)`; it is stored as a `(2r+1) x (2r+1)` template in the row-major
//! offset order of [`grid::ball_offsets`](crate::grid::ball_offsets).
//!
//! Matching on the torus requires `n >= 2r + 2`. For `n = 2r + 1` the ball
//! wraps onto itself and opposite edges become adjacent, so a formula
//! evaluated on the isolated ball (see [`descriptions_implying`]) could
//! disagree with the same formula on the torus.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Range;

use thiserror::Error;

use crate::folang::{Compiled, EvalError, Formula, PlainGrid, Relation, WellFormednessError};
use crate::grid::{ball_offsets, Pixel, TorusGeometry};
use crate::image::Image;
use crate::numerics;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum LocalError {
    #[error("image side {n} is too small: at least {needed} is required")]
    ImageTooSmall { n: usize, needed: usize },
    #[error("radius {r} exceeds the enumeration cap of {max}")]
    RadiusTooLarge { r: usize, max: usize },
    #[error("enumeration would visit more than {max} colourings of the ball")]
    TooManyColorings { max: u64 },
    #[error("more than {max} descriptions would be kept in memory")]
    TooManyDescriptions { max: usize },
    #[error("description has radius {found}, expected {expected}")]
    RadiusMismatch { expected: usize, found: usize },
    #[error("template has {got} cells, a radius-{r} ball has {expected}")]
    TemplateSize { r: usize, expected: usize, got: usize },
    #[error("slot {slot} lists the same description twice")]
    DuplicateDescription { slot: usize },
    #[error("a sentence needs at least one slot")]
    NoSlots,
    #[error(transparent)]
    WellFormedness(#[from] WellFormednessError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Limits for enumerating colourings of a ball.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LocalConfig {
    /// Largest radius accepted by the enumerating operations.
    pub max_radius: usize,
    /// Largest number of ball colourings a single call may evaluate.
    pub max_colorings: u64,
    /// Largest number of descriptions a single slot may hold.
    pub max_descriptions: usize,
    /// Work budget for evaluating the local formula on one colouring.
    pub budget: u64,
}

impl Default for LocalConfig {
    fn default() -> Self {
        LocalConfig { max_radius: 2, max_colorings: 1 << 25, max_descriptions: 1 << 22, budget: 1_000_000 }
    }
}

/// Side of the square ball of radius `r`.
#[inline]
pub const fn ball_side(r: usize) -> usize {
    2 * r + 1
}

#[inline]
const fn ball_cells(r: usize) -> usize {
    ball_side(r) * ball_side(r)
}

/// Complete description of a radius-`r` ball.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Description {
    r: usize,
    bits: Vec<u64>,
}

impl Description {
    pub fn new(r: usize, cells: &[bool]) -> Result<Description, LocalError> {
        let expected = ball_cells(r);
        if cells.len() != expected {
            return Err(LocalError::TemplateSize { r, expected, got: cells.len() });
        }
        let mut bits = vec![0u64; expected.div_ceil(64)];
        for (i, &b) in cells.iter().enumerate() {
            if b {
                bits[i / 64] |= 1 << (i % 64);
            }
        }
        Ok(Description { r, bits })
    }

    /// Description whose cell `i` is bit `i` of `code`. Needs `(2r+1)^2 <= 64`.
    pub fn from_code(r: usize, code: u64) -> Description {
        let cells = ball_cells(r);
        assert!(cells <= 64, "radius {r} does not fit a 64-bit code");
        let mask = if cells == 64 { u64::MAX } else { (1u64 << cells) - 1 };
        Description { r, bits: vec![code & mask] }
    }

    pub fn white(r: usize) -> Description {
        Description { r, bits: vec![0; ball_cells(r).div_ceil(64)] }
    }

    pub fn black(r: usize) -> Description {
        Description::white(r).complement()
    }

    /// All white except a black center.
    pub fn center_black(r: usize) -> Description {
        let mut d = Description::white(r);
        let c = ball_cells(r) / 2;
        d.bits[c / 64] |= 1 << (c % 64);
        d
    }

    pub fn radius(&self) -> usize {
        self.r
    }

    pub fn side(&self) -> usize {
        ball_side(self.r)
    }

    pub fn len(&self) -> usize {
        ball_cells(self.r)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn cell(&self, i: usize) -> bool {
        self.bits[i / 64] >> (i % 64) & 1 == 1
    }

    /// Colour at template row `i`, column `j`, both in `0..2r+1`.
    pub fn cell_at(&self, i: usize, j: usize) -> bool {
        self.cell(i * self.side() + j)
    }

    pub fn cells(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len()).map(|i| self.cell(i))
    }

    /// Number of black pixels.
    pub fn k(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Number of white pixels.
    pub fn h(&self) -> usize {
        self.len() - self.k()
    }

    pub fn code(&self) -> Option<u64> {
        (self.len() <= 64).then(|| self.bits[0])
    }

    pub fn complement(&self) -> Description {
        let cells = self.len();
        let mut bits: Vec<u64> = self.bits.iter().map(|w| !w).collect();
        if cells % 64 != 0 {
            *bits.last_mut().unwrap() &= (1u64 << (cells % 64)) - 1;
        }
        Description { r: self.r, bits }
    }

    /// Probability `p^k (1-p)^h` that a fixed ball carries this pattern.
    pub fn probability(&self, p: f64) -> f64 {
        numerics::pattern_probability(p, self.k(), self.h())
    }

    /// Whether the ball around `x` carries this pattern. Needs `n >= 2r + 2`.
    pub fn matches(&self, img: &Image, x: Pixel) -> Result<bool, LocalError> {
        check_side(img, self.r)?;
        Ok(self.matches_at(img, img.geometry().index(x)))
    }

    fn matches_at(&self, img: &Image, center: usize) -> bool {
        let g = img.geometry();
        let x = g.pixel(center);
        ball_offsets(self.r)
            .enumerate()
            .all(|(i, o)| img.get(g.wrap_add(x, o)) == self.cell(i))
    }

    /// The description as a formula in one free variable `var`.
    ///
    /// Each cell is reached from `var` by a chain of position relations, so
    /// the formula uses only the image vocabulary.
    pub fn to_formula(&self, var: &str) -> Formula {
        let offsets: Vec<_> = ball_offsets(self.r).collect();
        Formula::conjunction(offsets.iter().enumerate().map(|(i, &(dr, dc))| {
            let steps = path_steps(dr, dc);
            let name = |d: usize| if d == 0 { String::from(var) } else { format!("{var}_s{d}") };
            let last = name(steps.len());
            let mut f = if self.cell(i) { Formula::color(&last) } else { Formula::not(Formula::color(&last)) };
            for (d, &(rel, forward)) in steps.iter().enumerate().rev() {
                let (from, to) = (name(d), name(d + 1));
                let step = if forward { Formula::rel(rel, &from, &to) } else { Formula::rel(rel, &to, &from) };
                f = Formula::exists(&to, Formula::and(step, f));
            }
            f
        }))
    }
}

/// Relation steps leading from a pixel to the pixel at `(dr, dc)`.
fn path_steps(mut dr: isize, mut dc: isize) -> Vec<(Relation, bool)> {
    let mut steps = Vec::new();
    while dr != 0 && dc != 0 {
        steps.push(match (dr.signum(), dc.signum()) {
            (-1, 1) => (Relation::Diag1, true),
            (1, -1) => (Relation::Diag1, false),
            (1, 1) => (Relation::Diag2, true),
            _ => (Relation::Diag2, false),
        });
        dr -= dr.signum();
        dc -= dc.signum();
    }
    while dc != 0 {
        steps.push((Relation::Right, dc > 0));
        dc -= dc.signum();
    }
    while dr != 0 {
        steps.push((Relation::Up, dr < 0));
        dr -= dr.signum();
    }
    steps
}

impl fmt::Debug for Description {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Description(r={}, ", self.r)?;
        for i in 0..self.side() {
            if i > 0 {
                f.write_str("/")?;
            }
            for j in 0..self.side() {
                f.write_str(if self.cell_at(i, j) { "1" } else { "0" })?;
            }
        }
        f.write_str(")")
    }
}

fn check_side(img: &Image, r: usize) -> Result<(), LocalError> {
    let needed = 2 * r + 2;
    if img.n() < needed {
        return Err(LocalError::ImageTooSmall { n: img.n(), needed });
    }
    Ok(())
}

/// `exists x_1..x_m` at pairwise distance `> 2r`, each ball matching one
/// fixed description.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatternSentence {
    r: usize,
    slots: Vec<Description>,
}

impl PatternSentence {
    pub fn new(r: usize, slots: Vec<Description>) -> Result<PatternSentence, LocalError> {
        if slots.is_empty() {
            return Err(LocalError::NoSlots);
        }
        check_radii(r, slots.iter())?;
        Ok(PatternSentence { r, slots })
    }

    pub fn radius(&self) -> usize {
        self.r
    }

    pub fn slots(&self) -> &[Description] {
        &self.slots
    }

    pub fn to_factored(&self) -> FactoredPattern {
        FactoredPattern { r: self.r, slots: self.slots.iter().map(|d| vec![d.clone()]).collect() }
    }
}

fn check_radii<'a>(r: usize, descs: impl Iterator<Item = &'a Description>) -> Result<(), LocalError> {
    for d in descs {
        if d.r != r {
            return Err(LocalError::RadiusMismatch { expected: r, found: d.r });
        }
    }
    Ok(())
}

/// A basic local sentence in factored form: slot `i` holds every
/// description implying the `i`-th local condition. It denotes the
/// disjunction over all choices of one description per slot without
/// materialising it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FactoredPattern {
    r: usize,
    slots: Vec<Vec<Description>>,
}

impl FactoredPattern {
    /// Slots are stored sorted. Empty slots are allowed; they make the
    /// sentence unsatisfiable.
    pub fn new(r: usize, mut slots: Vec<Vec<Description>>) -> Result<FactoredPattern, LocalError> {
        if slots.is_empty() {
            return Err(LocalError::NoSlots);
        }
        for (i, slot) in slots.iter_mut().enumerate() {
            check_radii(r, slot.iter())?;
            slot.sort();
            if slot.windows(2).any(|w| w[0] == w[1]) {
                return Err(LocalError::DuplicateDescription { slot: i });
            }
        }
        Ok(FactoredPattern { r, slots })
    }

    pub fn radius(&self) -> usize {
        self.r
    }

    pub fn slots(&self) -> &[Vec<Description>] {
        &self.slots
    }

    pub fn m(&self) -> usize {
        self.slots.len()
    }

    /// `max_i min_j k_ij`, infinite when a slot is empty.
    pub fn index(&self) -> Index {
        self.slots
            .iter()
            .map(|slot| slot.iter().map(Description::k).min().map_or(Index::Infinite, Index::Finite))
            .max()
            .unwrap_or(Index::Infinite)
    }

    /// `max_i min_j h_ij`: the index after exchanging black and white.
    pub fn white_index(&self) -> Index {
        self.color_swapped().index()
    }

    pub fn color_swapped(&self) -> FactoredPattern {
        let slots = self
            .slots
            .iter()
            .map(|slot| {
                let mut s: Vec<_> = slot.iter().map(Description::complement).collect();
                s.sort();
                s
            })
            .collect();
        FactoredPattern { r: self.r, slots }
    }

    /// For each slot, a description with the fewest black pixels (the
    /// smallest in template order among ties).
    pub fn minimal_descriptions(&self) -> Option<Vec<&Description>> {
        self.slots.iter().map(|slot| slot.iter().min_by_key(|d| d.k())).collect()
    }

    /// The equivalent first-order sentence, built from position relations
    /// and `dist>` guards.
    pub fn to_formula(&self) -> Formula {
        let centers: Vec<String> = (1..=self.m()).map(|i| format!("c{i}")).collect();
        let mut parts = Vec::new();
        for i in 0..centers.len() {
            for j in i + 1..centers.len() {
                parts.push(Formula::dist_gt(&centers[i], &centers[j], 2 * self.r as u32));
            }
        }
        for (slot, c) in self.slots.iter().zip(&centers) {
            parts.push(Formula::disjunction(slot.iter().map(|d| d.to_formula(c))));
        }
        centers
            .iter()
            .rev()
            .fold(Formula::conjunction(parts), |body, c| Formula::exists(c, body))
    }
}

/// Index `k(L)` of a basic local sentence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Index {
    Finite(usize),
    Infinite,
}

impl fmt::Display for Index {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Index::Finite(k) => write!(f, "{k}"),
            Index::Infinite => f.write_str("inf"),
        }
    }
}

/// `exists x_1..x_m` at pairwise distance `> 2r` with `psi_i(x_i)`, each
/// `psi_i` confined to the ball `B(x_i, r)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BasicLocalSentence {
    r: usize,
    psis: Vec<Formula>,
    vars: Vec<String>,
}

impl BasicLocalSentence {
    pub fn new(r: usize, psis: Vec<Formula>) -> Result<BasicLocalSentence, LocalError> {
        if psis.is_empty() {
            return Err(LocalError::NoSlots);
        }
        let vars = psis.iter().map(local_var).collect::<Result<_, _>>()?;
        Ok(BasicLocalSentence { r, psis, vars })
    }

    pub fn radius(&self) -> usize {
        self.r
    }

    pub fn psis(&self) -> &[Formula] {
        &self.psis
    }

    /// The free variable of each local formula.
    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn color_swapped(&self) -> BasicLocalSentence {
        BasicLocalSentence {
            r: self.r,
            psis: self.psis.iter().map(Formula::color_swapped).collect(),
            vars: self.vars.clone(),
        }
    }

    /// The sentence as one first-order formula, quantifiers of each `psi_i`
    /// relativised to its ball with `dist>` guards.
    pub fn to_formula(&self) -> Formula {
        let used: BTreeSet<String> = self.psis.iter().flat_map(Formula::all_vars).collect();
        let centers: Vec<String> = (1..=self.psis.len())
            .map(|i| {
                let mut name = format!("x{i}");
                while used.contains(&name) {
                    name.push('_');
                }
                name
            })
            .collect();
        let mut parts = Vec::new();
        for i in 0..centers.len() {
            for j in i + 1..centers.len() {
                parts.push(Formula::dist_gt(&centers[i], &centers[j], 2 * self.r as u32));
            }
        }
        for ((psi, var), c) in self.psis.iter().zip(&self.vars).zip(&centers) {
            parts.push(psi.relativize(var, self.r as u32).rename_free(var, c));
        }
        centers
            .iter()
            .rev()
            .fold(Formula::conjunction(parts), |body, c| Formula::exists(c, body))
    }
}

/// The center variable of a local formula: its free variable, or a fresh
/// name when it has none.
pub fn local_var(psi: &Formula) -> Result<String, WellFormednessError> {
    psi.check_no_shadowing()?;
    let mut free = psi.free_vars();
    match free.len() {
        0 => {
            let used = psi.all_vars();
            let mut name = String::from("x");
            while used.contains(&name) {
                name.push('_');
            }
            Ok(name)
        }
        1 => Ok(free.pop().unwrap()),
        _ => Err(WellFormednessError::FreeVariableCount(free)),
    }
}

/// A local formula compiled for evaluation on isolated balls.
struct BallFormula {
    compiled: Compiled,
    side: usize,
    budget: u64,
}

impl BallFormula {
    fn new(psi: &Formula, r: usize, cfg: &LocalConfig) -> Result<BallFormula, LocalError> {
        if r > cfg.max_radius {
            return Err(LocalError::RadiusTooLarge { r, max: cfg.max_radius });
        }
        if ball_cells(r) > 64 {
            return Err(LocalError::RadiusTooLarge { r, max: 3 });
        }
        let var = local_var(psi)?;
        let compiled = Compiled::new(psi, &[var.as_str()])?;
        Ok(BallFormula { compiled, side: ball_side(r), budget: cfg.budget })
    }

    fn holds(&self, code: u64) -> Result<bool, LocalError> {
        let grid = PlainGrid::new(self.side, code);
        Ok(self.compiled.eval(&grid, &[grid.center()], None, self.budget)?)
    }
}

/// Every description of `B(x, r)` whose isolated ball satisfies `psi` at the
/// center, in increasing template order. Empty exactly when `psi` is
/// unsatisfiable within radius `r`.
pub fn descriptions_implying(psi: &Formula, r: usize, cfg: &LocalConfig) -> Result<Vec<Description>, LocalError> {
    let total = coloring_count(r, cfg)?;
    descriptions_implying_in(psi, r, cfg, 0..total)
}

/// Number of colourings of a radius-`r` ball, checked against the caps.
pub fn coloring_count(r: usize, cfg: &LocalConfig) -> Result<u64, LocalError> {
    if r > cfg.max_radius {
        return Err(LocalError::RadiusTooLarge { r, max: cfg.max_radius });
    }
    let cells = ball_cells(r);
    if cells >= 64 || (1u64 << cells) > cfg.max_colorings {
        return Err(LocalError::TooManyColorings { max: cfg.max_colorings });
    }
    Ok(1u64 << cells)
}

/// [`descriptions_implying`] restricted to colourings whose codes lie in
/// `codes`. Concatenating the results over a partition of `0..2^((2r+1)^2)`
/// in order gives the full result.
pub fn descriptions_implying_in(
    psi: &Formula,
    r: usize,
    cfg: &LocalConfig,
    codes: Range<u64>,
) -> Result<Vec<Description>, LocalError> {
    let ball = BallFormula::new(psi, r, cfg)?;
    let mut out = Vec::new();
    for code in codes {
        if ball.holds(code)? {
            if out.len() == cfg.max_descriptions {
                return Err(LocalError::TooManyDescriptions { max: cfg.max_descriptions });
            }
            out.push(Description::from_code(r, code));
        }
    }
    Ok(out)
}

/// Smallest black count among descriptions implying `psi`, or `None` when
/// `psi` is unsatisfiable within radius `r`. Colourings are visited by
/// increasing black count, so this stops at the first satisfying weight.
pub fn min_black_count(psi: &Formula, r: usize, cfg: &LocalConfig) -> Result<Option<usize>, LocalError> {
    min_count(psi, r, cfg, false)
}

/// Smallest white count among descriptions implying `psi`.
pub fn min_white_count(psi: &Formula, r: usize, cfg: &LocalConfig) -> Result<Option<usize>, LocalError> {
    min_count(psi, r, cfg, true)
}

fn min_count(psi: &Formula, r: usize, cfg: &LocalConfig, white: bool) -> Result<Option<usize>, LocalError> {
    let ball = BallFormula::new(psi, r, cfg)?;
    let cells = ball_cells(r);
    let full = if cells == 64 { u64::MAX } else { (1u64 << cells) - 1 };
    let mut visited = 0u64;
    for weight in 0..=cells {
        for mask in SameWeight::new(cells, weight) {
            visited += 1;
            if visited > cfg.max_colorings {
                return Err(LocalError::TooManyColorings { max: cfg.max_colorings });
            }
            let code = if white { !mask & full } else { mask };
            if ball.holds(code)? {
                return Ok(Some(weight));
            }
        }
    }
    Ok(None)
}

/// All `cells`-bit masks with `weight` bits set, increasing (Gosper's hack).
struct SameWeight {
    next: Option<u64>,
    limit: u64,
}

impl SameWeight {
    fn new(cells: usize, weight: usize) -> SameWeight {
        let first = if weight == 0 { 0 } else if weight == 64 { u64::MAX } else { (1u64 << weight) - 1 };
        let limit = if cells == 64 { u64::MAX } else { (1u64 << cells) - 1 };
        SameWeight { next: (weight <= cells).then_some(first), limit }
    }
}

impl Iterator for SameWeight {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        let cur = self.next?;
        self.next = if cur == 0 {
            None
        } else {
            let c = cur & cur.wrapping_neg();
            let r = cur.checked_add(c);
            match r {
                Some(r) if r != 0 => {
                    let next = (((r ^ cur) >> 2) / c) | r;
                    (next <= self.limit && next > cur).then_some(next)
                }
                _ => None,
            }
        };
        Some(cur)
    }
}

/// Replaces each local formula by the set of descriptions implying it.
pub fn factor(l: &BasicLocalSentence, cfg: &LocalConfig) -> Result<FactoredPattern, LocalError> {
    let slots = l
        .psis
        .iter()
        .map(|psi| descriptions_implying(psi, l.r, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FactoredPattern { r: l.r, slots })
}

/// `k(L) = max_i min_j k_ij`, infinite when some local formula is
/// unsatisfiable. Agrees with `factor(l)?.index()` without enumerating every
/// colouring.
pub fn index(l: &BasicLocalSentence, cfg: &LocalConfig) -> Result<Index, LocalError> {
    let mut worst = Index::Finite(0);
    for psi in &l.psis {
        let k = min_black_count(psi, l.r, cfg)?.map_or(Index::Infinite, Index::Finite);
        worst = worst.max(k);
    }
    Ok(worst)
}

/// Minimum black count per slot.
pub fn slot_minima(l: &BasicLocalSentence, cfg: &LocalConfig) -> Result<Vec<Option<usize>>, LocalError> {
    l.psis.iter().map(|psi| min_black_count(psi, l.r, cfg)).collect()
}

/// Whether the ball around `x` carries pattern `d`.
pub fn match_description(img: &Image, d: &Description, x: Pixel) -> Result<bool, LocalError> {
    d.matches(img, x)
}

struct SlotMatcher<'a> {
    descs: &'a [Description],
    codes: Option<Vec<u64>>,
    has_white: bool,
    r: usize,
}

impl<'a> SlotMatcher<'a> {
    fn new(r: usize, descs: &'a [Description]) -> SlotMatcher<'a> {
        let codes = descs.iter().map(Description::code).collect::<Option<Vec<_>>>().map(|mut c| {
            c.sort_unstable();
            c
        });
        SlotMatcher { descs, codes, has_white: descs.iter().any(|d| d.k() == 0), r }
    }

    fn matches(&self, img: &Image, center: usize) -> bool {
        match &self.codes {
            Some(codes) => codes.binary_search(&ball_code(img, self.r, center)).is_ok(),
            None => self.descs.iter().any(|d| d.matches_at(img, center)),
        }
    }

    /// Centers whose ball matches one of the descriptions, increasing.
    fn candidates(&self, img: &Image) -> Vec<usize> {
        let g = img.geometry();
        if self.has_white {
            return (0..g.cells()).filter(|&c| self.matches(img, c)).collect();
        }
        // a ball with a black pixel has its center within r of that pixel
        let mut seen = vec![false; g.cells()];
        let mut out = Vec::new();
        for b in img.black_indices() {
            let bp = g.pixel(b);
            for o in ball_offsets(self.r) {
                let c = g.index(g.wrap_add(bp, o));
                if !seen[c] {
                    seen[c] = true;
                    if self.matches(img, c) {
                        out.push(c);
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }
}

/// Code of the ball around `center`: bit `i` is the colour at offset `i`.
fn ball_code(img: &Image, r: usize, center: usize) -> u64 {
    let n = img.n();
    let (row, col) = (center / n, center % n);
    let mut code = 0u64;
    let mut bit = 0;
    for dr in 0..ball_side(r) {
        let rr = (row + n - r + dr) % n;
        for dc in 0..ball_side(r) {
            let cc = (col + n - r + dc) % n;
            if img.get_index(rr * n + cc) {
                code |= 1 << bit;
            }
            bit += 1;
        }
    }
    code
}

/// Whether there are centers `x_1..x_m` at pairwise distance `> 2r` with
/// the ball around each `x_i` matching some description of slot `i`.
///
/// Exact: candidate centers are collected per slot and combined by
/// backtracking, smallest candidate list first.
pub fn match_factored(img: &Image, fp: &FactoredPattern) -> Result<bool, LocalError> {
    check_side(img, fp.r)?;
    if fp.slots.iter().any(Vec::is_empty) {
        return Ok(false);
    }
    let mut cands = Vec::with_capacity(fp.m());
    for slot in &fp.slots {
        let c = SlotMatcher::new(fp.r, slot).candidates(img);
        if c.is_empty() {
            return Ok(false);
        }
        cands.push(c);
    }
    if cands.len() == 1 {
        return Ok(true);
    }
    let mut order: Vec<usize> = (0..cands.len()).collect();
    order.sort_by_key(|&i| cands[i].len());
    let mut chosen = Vec::with_capacity(order.len());
    Ok(place(&img.geometry(), 2 * fp.r, &order, &cands, &mut chosen))
}

fn place(g: &TorusGeometry, min_gap: usize, order: &[usize], cands: &[Vec<usize>], chosen: &mut Vec<usize>) -> bool {
    let Some(&slot) = order.get(chosen.len()) else {
        return true;
    };
    for &c in &cands[slot] {
        let pc = g.pixel(c);
        if chosen.iter().all(|&o| g.distance(pc, g.pixel(o)) > min_gap) {
            chosen.push(c);
            if place(g, min_gap, order, cands, chosen) {
                return true;
            }
            chosen.pop();
        }
    }
    false
}

/// Whether a pattern sentence holds.
pub fn match_pattern(img: &Image, ps: &PatternSentence) -> Result<bool, LocalError> {
    match_factored(img, &ps.to_factored())
}

/// Descriptions laid side by side: a `(2r+1) x m(2r+1)` rectangle whose
/// appearance anywhere implies the pattern sentence with those slots.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InlineTemplate {
    r: usize,
    slots: Vec<Description>,
}

/// Concatenates descriptions horizontally, left to right.
pub fn concat_horizontal(descs: &[Description]) -> Result<InlineTemplate, LocalError> {
    let first = descs.first().ok_or(LocalError::NoSlots)?;
    check_radii(first.r, descs.iter())?;
    Ok(InlineTemplate { r: first.r, slots: descs.to_vec() })
}

impl InlineTemplate {
    pub fn height(&self) -> usize {
        ball_side(self.r)
    }

    pub fn width(&self) -> usize {
        self.slots.len() * ball_side(self.r)
    }

    /// Colour at row `i`, column `j` of the rectangle.
    pub fn cell(&self, i: usize, j: usize) -> bool {
        let side = ball_side(self.r);
        self.slots[j / side].cell_at(i, j % side)
    }

    pub fn k(&self) -> usize {
        self.slots.iter().map(Description::k).sum()
    }

    pub fn h(&self) -> usize {
        self.slots.iter().map(Description::h).sum()
    }

    /// `p^K (1-p)^H`: probability of the rectangle at one fixed anchor.
    pub fn anchor_probability(&self, p: f64) -> f64 {
        numerics::pattern_probability(p, self.k(), self.h())
    }

    /// The pattern sentence implied by an occurrence.
    pub fn pattern(&self) -> PatternSentence {
        PatternSentence { r: self.r, slots: self.slots.clone() }
    }

    fn check(&self, img: &Image) -> Result<(), LocalError> {
        if img.n() < self.width() {
            return Err(LocalError::ImageTooSmall { n: img.n(), needed: self.width() });
        }
        Ok(())
    }

    /// Whether the rectangle sits with the center of its first ball at
    /// `anchor`.
    pub fn matches_at(&self, img: &Image, anchor: Pixel) -> Result<bool, LocalError> {
        self.check(img)?;
        let g = img.geometry();
        let r = self.r as isize;
        for i in 0..self.height() {
            for j in 0..self.width() {
                let p = g.wrap_add(anchor, (i as isize - r, j as isize - r));
                if img.get(p) != self.cell(i, j) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// Whether the rectangle appears anywhere on the torus.
    pub fn occurs(&self, img: &Image) -> Result<bool, LocalError> {
        self.check(img)?;
        for x in img.geometry().pixels() {
            if self.matches_at(img, x)? {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::folang::{parse, Evaluator};
    use crate::image::{derive_seed, sample, SampleSpec};
    use proptest::prelude::*;

    fn cfg() -> LocalConfig {
        LocalConfig::default()
    }

    fn bls(r: usize, psis: &[&str]) -> BasicLocalSentence {
        BasicLocalSentence::new(r, psis.iter().map(|s| parse(s).unwrap()).collect()).unwrap()
    }

    fn random(n: usize, p: f64, seed: u64) -> Image {
        sample(&SampleSpec::new(n, p, seed).unwrap())
    }

    #[test]
    fn description_counts() {
        let d = Description::center_black(1);
        assert_eq!((d.k(), d.h()), (1, 8));
        assert_eq!(d.code(), Some(1 << 4));
        assert_eq!(Description::black(2).k(), 25);
        assert_eq!(Description::white(2).complement(), Description::black(2));
        assert!(Description::new(1, &[true; 8]).is_err());
    }

    #[test]
    fn match_description_examples() {
        let white = Image::white(5).unwrap();
        for x in white.geometry().pixels() {
            assert!(match_description(&white, &Description::white(1), x).unwrap());
            assert!(!match_description(&white, &Description::center_black(1), x).unwrap());
        }
        let small = Image::white(3).unwrap();
        assert_eq!(
            match_description(&small, &Description::white(1), Pixel::new(1, 1)),
            Err(LocalError::ImageTooSmall { n: 3, needed: 4 })
        );
    }

    #[test]
    fn match_factored_examples() {
        let white = Image::white(5).unwrap();
        let fp = FactoredPattern::new(1, vec![vec![Description::white(1)]]).unwrap();
        assert!(match_factored(&white, &fp).unwrap());

        let mut one = Image::white(8).unwrap();
        one.set(Pixel::new(3, 3), true);
        let cb = || vec![Description::center_black(1)];
        let two = FactoredPattern::new(1, vec![cb(), cb()]).unwrap();
        assert!(!match_factored(&one, &two).unwrap());
        one.set(Pixel::new(6, 6), true);
        assert!(match_factored(&one, &two).unwrap());

        let empty = FactoredPattern::new(1, vec![cb(), vec![]]).unwrap();
        assert!(!match_factored(&Image::black(6).unwrap(), &empty).unwrap());
    }

    #[test]
    fn factored_matches_its_formula_on_random_images() {
        let mut dot_right = Description::center_black(1);
        dot_right = {
            let mut cells: Vec<bool> = dot_right.cells().collect();
            cells[5] = true;
            Description::new(1, &cells).unwrap()
        };
        let fp = FactoredPattern::new(
            1,
            vec![
                vec![Description::center_black(1), dot_right],
                vec![Description::white(1), Description::center_black(1)],
            ],
        )
        .unwrap();
        let oracle = fp.to_formula();
        oracle.check_sentence().unwrap();
        let ev = Evaluator::default();
        let mut hits = 0;
        for i in 0..500 {
            let img = random(6, 0.4, derive_seed(5, i));
            let m = match_factored(&img, &fp).unwrap();
            assert_eq!(m, ev.holds(&img, &oracle).unwrap(), "image {i}");
            hits += m as usize;
        }
        assert!(hits > 0 && hits < 500, "{hits}");
    }

    #[test]
    fn descriptions_implying_examples() {
        let black = descriptions_implying(&parse("C(x)").unwrap(), 0, &cfg()).unwrap();
        assert_eq!(black, vec![Description::from_code(0, 1)]);
        assert_eq!(black[0].k(), 1);
        let none = descriptions_implying(&parse("C(x) & !C(x)").unwrap(), 0, &cfg()).unwrap();
        assert!(none.is_empty());
        // 2^8 free cells around a black center
        let around = descriptions_implying(&parse("C(x)").unwrap(), 1, &cfg()).unwrap();
        assert_eq!(around.len(), 256);
        assert!(around.iter().all(|d| d.cell(4)));
        assert!(matches!(
            descriptions_implying(&parse("C(x)").unwrap(), 3, &cfg()),
            Err(LocalError::RadiusTooLarge { r: 3, max: 2 })
        ));
        assert!(descriptions_implying(&parse("C(x) & C(y)").unwrap(), 0, &cfg()).is_err());
    }

    #[test]
    fn isolated_ball_has_no_wraparound() {
        // on the isolated 3x3 ball the right neighbour of the right edge does not exist
        let psi = parse("exists y. (R(x,y) & exists z. (R(y,z) & C(z)))").unwrap();
        assert!(descriptions_implying(&psi, 1, &cfg()).unwrap().is_empty());
    }

    #[test]
    fn partitioned_enumeration_is_identical() {
        let psi = parse("C(x) | exists y. (D2(x,y) & !C(y))").unwrap();
        let whole = descriptions_implying(&psi, 1, &cfg()).unwrap();
        let mut parts = Vec::new();
        for chunk in [0..100, 100..101, 101..400, 400..512] {
            parts.extend(descriptions_implying_in(&psi, 1, &cfg(), chunk).unwrap());
        }
        assert_eq!(whole, parts);
    }

    #[test]
    fn factor_examples() {
        let fp = factor(&bls(0, &["C(x)"]), &cfg()).unwrap();
        assert_eq!(fp.slots()[0].len(), 1);
        let fp = factor(&bls(0, &["true"]), &cfg()).unwrap();
        assert_eq!(fp.slots()[0].len(), 2);
        let err = BasicLocalSentence::new(0, vec![parse("C(x) & C(y)").unwrap()]).unwrap_err();
        assert!(matches!(err, LocalError::WellFormedness(_)));
    }

    #[test]
    fn factor_agrees_with_formula_on_random_images() {
        let l = bls(1, &["C(x) & exists y. (R(x,y) & C(y))", "!C(x) & forall y. (U(x,y) -> C(y))"]);
        let fp = factor(&l, &cfg()).unwrap();
        let oracle = l.to_formula();
        oracle.check_sentence().unwrap();
        let ev = Evaluator::default();
        for i in 0..150 {
            let n = 4 + (i % 5) as usize;
            let img = random(n, 0.35, derive_seed(17, i));
            assert_eq!(match_factored(&img, &fp).unwrap(), ev.holds(&img, &oracle).unwrap(), "image {i}");
        }
    }

    #[test]
    fn index_examples() {
        assert_eq!(index(&bls(0, &["C(x)"]), &cfg()).unwrap(), Index::Finite(1));
        let white_ball = "!C(x) & forall y. !C(y)";
        assert_eq!(index(&bls(1, &[white_ball, "C(x)"]), &cfg()).unwrap(), Index::Finite(1));
        assert_eq!(index(&bls(1, &["C(x) & !C(x)"]), &cfg()).unwrap(), Index::Infinite);
        let lonely = "C(x) & forall y. (y = x | !C(y))";
        assert_eq!(index(&bls(2, &[lonely, lonely, lonely]), &cfg()).unwrap(), Index::Finite(1));
    }

    #[test]
    fn index_agrees_with_factored_index() {
        for (r, psis) in [
            (1, vec!["C(x) & exists y. (R(x,y) & C(y))"]),
            (1, vec!["forall y. (U(x,y) -> C(y))", "exists y. (D1(x,y) & C(y)) & C(x)"]),
            (1, vec!["!C(x)", "C(x) & !C(x)"]),
            (0, vec!["true | C(x)", "C(x)"]),
        ] {
            let l = bls(r, &psis);
            assert_eq!(index(&l, &cfg()).unwrap(), factor(&l, &cfg()).unwrap().index(), "{psis:?}");
        }
    }

    #[test]
    fn index_ignores_slot_order_and_swaps_with_colors() {
        let a = "C(x) & exists y. (R(x,y) & C(y))";
        let b = "!C(x) & exists y. (U(x,y) & C(y))";
        let c = "!C(x) & forall y. !C(y)";
        let l1 = bls(1, &[a, b, c]);
        let l2 = bls(1, &[c, a, b]);
        assert_eq!(index(&l1, &cfg()).unwrap(), index(&l2, &cfg()).unwrap());
        let fp = factor(&l1, &cfg()).unwrap();
        assert_eq!(index(&l1.color_swapped(), &cfg()).unwrap(), fp.white_index());
        let whites = l1.psis().iter().map(|p| min_white_count(p, 1, &cfg()).unwrap().unwrap()).max();
        assert_eq!(fp.white_index(), Index::Finite(whites.unwrap()));
    }

    #[test]
    fn same_weight_enumeration() {
        let masks: Vec<u64> = SameWeight::new(4, 2).collect();
        assert_eq!(masks, vec![0b0011, 0b0101, 0b0110, 0b1001, 0b1010, 0b1100]);
        assert_eq!(SameWeight::new(9, 0).collect::<Vec<_>>(), vec![0]);
        assert_eq!(SameWeight::new(9, 9).collect::<Vec<_>>(), vec![511]);
        for w in 0..=9 {
            let expected = (0..512u64).filter(|m| m.count_ones() as usize == w).count();
            assert_eq!(SameWeight::new(9, w).count(), expected);
        }
    }

    #[test]
    fn concat_examples() {
        let one = concat_horizontal(&[Description::center_black(1)]).unwrap();
        assert_eq!((one.height(), one.width(), one.k(), one.h()), (3, 3, 1, 8));
        let two = concat_horizontal(&[Description::white(1), Description::white(1)]).unwrap();
        assert_eq!((two.height(), two.width(), two.k(), two.h()), (3, 6, 0, 18));
        assert!(matches!(two.occurs(&Image::white(5).unwrap()), Err(LocalError::ImageTooSmall { .. })));
        assert!(two.occurs(&Image::white(6).unwrap()).unwrap());
        assert!((one.anchor_probability(0.1) - 0.1 * libm::pow(0.9, 8.0)).abs() < 1e-15);
    }

    #[test]
    fn inline_occurrence_implies_pattern() {
        let mut d2: Vec<bool> = Description::white(1).cells().collect();
        d2[0] = true;
        d2[8] = true;
        let descs = [Description::center_black(1), Description::new(1, &d2).unwrap()];
        let tpl = concat_horizontal(&descs).unwrap();
        let fp = tpl.pattern().to_factored();
        for i in 0..500 {
            let img = random(12, 0.5, derive_seed(23, i));
            if tpl.occurs(&img).unwrap() {
                assert!(match_factored(&img, &fp).unwrap());
            }
        }
        // plant one occurrence to exercise the implication at least once
        let mut img = Image::white(12).unwrap();
        img.set(Pixel::new(5, 5), true);
        img.set(Pixel::new(4, 7), true);
        img.set(Pixel::new(6, 9), true);
        assert!(tpl.matches_at(&img, Pixel::new(5, 5)).unwrap());
        assert!(match_factored(&img, &fp).unwrap());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn exactly_one_description_matches(seed in 0u64..10_000, n in 4usize..9, x in 0usize..64) {
            let img = random(n, 0.5, seed);
            let center = img.geometry().pixel(x % (n * n));
            let matching: Vec<u64> = (0..512u64)
                .filter(|&c| Description::from_code(1, c).matches(&img, center).unwrap())
                .collect();
            prop_assert_eq!(matching.len(), 1);
            prop_assert_eq!(matching[0], ball_code(&img, 1, img.geometry().index(center)));
        }

        #[test]
        fn candidate_search_matches_full_scan(seed in 0u64..10_000, p in 0.0f64..0.3) {
            let img = random(9, p, seed);
            let slot = [Description::center_black(1), Description::from_code(1, 0b000_011_000)];
            let m = SlotMatcher::new(1, &slot);
            let full: Vec<usize> = (0..81).filter(|&c| m.matches(&img, c)).collect();
            prop_assert_eq!(m.candidates(&img), full);
        }
    }
}
