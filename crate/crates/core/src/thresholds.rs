//! Probability bounds for factored patterns, threshold exponents and limit
//! classification under power-law rates, the exact enumeration oracle, and
//! seeded Monte Carlo estimation.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Range;

use thiserror::Error;

use crate::folang::{Compiled, EvalError, Formula, WellFormednessError};
use crate::grid::tiling_size;
use crate::image::{derive_seed, sample, Color, Image, ImageError, SampleSpec};
use crate::local::{self, BasicLocalSentence, Description, FactoredPattern, Index, LocalConfig, LocalError};
use crate::numerics::{self, NeumaierSum};
use crate::percolation::{self, CrossingSpec};

/// Largest side whose images are enumerated, whatever the configuration.
pub const HARD_MAX_ENUM_N: usize = percolation::HARD_MAX_ENUM_N;

/// Default cap on enumerated image side.
pub const DEFAULT_MAX_ENUM_N: usize = 4;

/// Default Monte Carlo sample count.
pub const DEFAULT_SAMPLES: u64 = 10_000;

/// Relative tolerance under which `alpha` counts as equal to `2/k`.
pub const EXPONENT_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ThresholdError {
    #[error("enumerating side {n} exceeds the cap of {max}")]
    TooLargeToEnumerate { n: usize, max: usize },
    #[error("unsupported rate c={c}, alpha={alpha}: need c > 0 and alpha >= 0, both finite")]
    UnsupportedRate { c: f64, alpha: f64 },
    #[error("at least one sample is required")]
    NoSamples,
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Local(#[from] LocalError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    WellFormedness(#[from] WellFormednessError),
}

/// `p(n) = min(c * n^-alpha, 1/2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerLawRate {
    c: f64,
    alpha: f64,
}

impl PowerLawRate {
    pub fn new(c: f64, alpha: f64) -> Result<PowerLawRate, ThresholdError> {
        if !(c.is_finite() && c > 0.0 && alpha.is_finite() && alpha >= 0.0) {
            return Err(ThresholdError::UnsupportedRate { c, alpha });
        }
        Ok(PowerLawRate { c, alpha })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn p(&self, n: usize) -> f64 {
        (self.c * libm::pow(n as f64, -self.alpha)).min(0.5)
    }
}

/// Limit of the probability of a sentence as `n` grows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Limit {
    Zero,
    One,
    /// `alpha` sits exactly on the threshold exponent.
    Indeterminate,
}

impl Limit {
    pub fn as_str(self) -> &'static str {
        match self {
            Limit::Zero => "ZERO",
            Limit::One => "ONE",
            Limit::Indeterminate => "INDETERMINATE",
        }
    }
}

impl fmt::Display for Limit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Exponent `a` of the threshold function `n^-a`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ThresholdExponent {
    /// `num / den` in lowest terms.
    Rational { num: u64, den: u64 },
    /// Index zero: the probability tends to one for every rate.
    AlwaysOne,
    /// Some local formula is unsatisfiable.
    Unsat,
}

impl ThresholdExponent {
    pub fn from_index(k: Index) -> ThresholdExponent {
        match k {
            Index::Infinite => ThresholdExponent::Unsat,
            Index::Finite(0) => ThresholdExponent::AlwaysOne,
            Index::Finite(k) => {
                let k = k as u64;
                if k % 2 == 0 {
                    ThresholdExponent::Rational { num: 1, den: k / 2 }
                } else {
                    ThresholdExponent::Rational { num: 2, den: k }
                }
            }
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            ThresholdExponent::Rational { num, den } => Some(num as f64 / den as f64),
            _ => None,
        }
    }
}

impl fmt::Display for ThresholdExponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThresholdExponent::Rational { num, den: 1 } => write!(f, "{num}"),
            ThresholdExponent::Rational { num, den } => write!(f, "{num}/{den}"),
            ThresholdExponent::AlwaysOne => f.write_str("ALWAYS_ONE"),
            ThresholdExponent::Unsat => f.write_str("UNSAT"),
        }
    }
}

pub fn threshold_exponent(l: &BasicLocalSentence, cfg: &LocalConfig) -> Result<ThresholdExponent, ThresholdError> {
    Ok(ThresholdExponent::from_index(local::index(l, cfg)?))
}

/// Limit of a sentence with index `k` under `rate`.
pub fn classify_index(k: Index, rate: &PowerLawRate) -> Limit {
    match ThresholdExponent::from_index(k) {
        ThresholdExponent::Unsat => Limit::Zero,
        ThresholdExponent::AlwaysOne => Limit::One,
        ThresholdExponent::Rational { num, den } => {
            let a = num as f64 / den as f64;
            if libm::fabs(rate.alpha - a) <= EXPONENT_TOLERANCE * a {
                Limit::Indeterminate
            } else if rate.alpha > a {
                Limit::Zero
            } else {
                Limit::One
            }
        }
    }
}

pub fn classify(l: &BasicLocalSentence, rate: &PowerLawRate, cfg: &LocalConfig) -> Result<Limit, ThresholdError> {
    Ok(classify_index(local::index(l, cfg)?, rate))
}

/// Which argument produced [`Bounds::upper`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UpperBoundKind {
    /// One slot: expected number of matching centers.
    FirstMoment,
    /// Several slots: the first-moment bound of the rarest slot alone.
    SlotUnion,
}

/// Certified bounds on the probability of a factored pattern.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
    /// `1 - exp(-tau * pi)`, reported for one slot.
    pub lower_exp: Option<f64>,
    pub upper_kind: UpperBoundKind,
    /// Number of disjoint balls in the tiling.
    pub tau: usize,
}

/// Probability that the ball around a fixed center matches one of `slot`.
fn slot_probability(slot: &[Description], p: f64) -> f64 {
    let mut by_k: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for d in slot {
        *by_k.entry((d.k(), d.h())).or_default() += 1;
    }
    let mut sum = NeumaierSum::default();
    for ((k, h), count) in by_k {
        sum.add(count as f64 * numerics::pattern_probability(p, k, h));
    }
    sum.total().clamp(0.0, 1.0)
}

/// Lower and upper bounds on the probability that `fp` holds on a random
/// image of side `n`.
///
/// The lower bound looks only at the disjoint balls of the tiling, which are
/// independent. With one slot it is `1 - (1 - pi)^tau`, `pi` the probability
/// that a fixed ball matches the slot. With `m` slots, each slot is assigned
/// a description of minimal black count; the bound requires each distinct
/// chosen description to appear at least `m` times among the tiles. The
/// upper bound is `n^2` times the smallest per-center slot probability.
pub fn pattern_bounds(n: usize, p: f64, fp: &FactoredPattern) -> Result<Bounds, ThresholdError> {
    let r = fp.radius();
    if n < 2 * r + 2 {
        return Err(LocalError::ImageTooSmall { n, needed: 2 * r + 2 }.into());
    }
    let tau = tiling_size(n, r);
    let cells = (n * n) as f64;
    let m = fp.m();
    let upper_kind = if m == 1 { UpperBoundKind::FirstMoment } else { UpperBoundKind::SlotUnion };
    let Some(minimal) = fp.minimal_descriptions() else {
        return Ok(Bounds { lower: 0.0, upper: 0.0, lower_exp: (m == 1).then_some(0.0), upper_kind, tau });
    };
    let upper = fp
        .slots()
        .iter()
        .map(|slot| cells * slot_probability(slot, p))
        .fold(f64::INFINITY, f64::min)
        .min(1.0);
    if m == 1 {
        let pi = slot_probability(&fp.slots()[0], p);
        let lower = numerics::at_least_one(pi, tau);
        let lower_exp = -libm::expm1(-(tau as f64) * pi);
        return Ok(Bounds { lower: lower.min(upper), upper, lower_exp: Some(lower_exp.min(lower)), upper_kind, tau });
    }
    let mut distinct: Vec<&Description> = minimal;
    distinct.sort();
    distinct.dedup();
    let mut miss = NeumaierSum::default();
    for d in distinct {
        miss.add(numerics::binomial_cdf(tau, d.probability(p), m - 1));
    }
    let lower = (1.0 - miss.total()).clamp(0.0, 1.0);
    Ok(Bounds { lower: lower.min(upper), upper, lower_exp: None, upper_kind, tau })
}

/// Something whose probability is measured.
#[derive(Clone, Debug, PartialEq)]
pub enum Target {
    /// A first-order sentence.
    Formula(Formula),
    Pattern(FactoredPattern),
    Crossing(CrossingSpec),
    /// An even number of pixels of the given colour.
    EvenCount(Color),
}

impl Target {
    /// The target obtained by exchanging black and white.
    pub fn color_swapped(&self) -> Target {
        match self {
            Target::Formula(f) => Target::Formula(f.color_swapped()),
            Target::Pattern(fp) => Target::Pattern(fp.color_swapped()),
            Target::Crossing(c) => Target::Crossing(c.color_swapped()),
            Target::EvenCount(c) => Target::EvenCount(c.swap()),
        }
    }

    /// Checks the target and compiles formulas once for repeated use.
    pub fn prepare(&self, budget: u64) -> Result<PreparedTarget<'_>, ThresholdError> {
        let kind = match self {
            Target::Formula(f) => {
                f.check_sentence()?;
                Prepared::Formula(Compiled::new(f, &[])?)
            }
            Target::Pattern(fp) => Prepared::Pattern(fp),
            Target::Crossing(c) => Prepared::Crossing(*c),
            Target::EvenCount(c) => Prepared::EvenCount(*c),
        };
        Ok(PreparedTarget { kind, budget })
    }
}

enum Prepared<'a> {
    Formula(Compiled),
    Pattern(&'a FactoredPattern),
    Crossing(CrossingSpec),
    EvenCount(Color),
}

/// A [`Target`] ready to be decided on many images.
pub struct PreparedTarget<'a> {
    kind: Prepared<'a>,
    budget: u64,
}

impl PreparedTarget<'_> {
    pub fn holds(&self, img: &Image) -> Result<bool, ThresholdError> {
        Ok(match &self.kind {
            Prepared::Formula(c) => c.eval(img, &[], None, self.budget)?,
            Prepared::Pattern(fp) => local::match_factored(img, fp)?,
            Prepared::Crossing(c) => percolation::crosses(img, *c),
            Prepared::EvenCount(c) => {
                let black = img.black_count();
                let count = if c.is_black() { black } else { img.n() * img.n() - black };
                count % 2 == 0
            }
        })
    }
}

/// Satisfying images counted by black-pixel count.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountProfile {
    pub n: usize,
    /// `counts[j]` is the number of satisfying images with `j` black pixels.
    pub counts: Vec<u64>,
}

impl CountProfile {
    pub fn empty(n: usize) -> CountProfile {
        CountProfile { n, counts: vec![0; n * n + 1] }
    }

    pub fn merge(mut self, other: &CountProfile) -> CountProfile {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self
    }

    pub fn satisfying(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// `sum_j counts[j] p^j (1-p)^(n^2-j)`.
    pub fn probability(&self, p: f64) -> f64 {
        let cells = self.n * self.n;
        let mut sum = NeumaierSum::default();
        for (j, &c) in self.counts.iter().enumerate() {
            if c > 0 {
                sum.add(c as f64 * numerics::pattern_probability(p, j, cells - j));
            }
        }
        sum.total().clamp(0.0, 1.0)
    }
}

/// Number of images of side `n`, or an error past the cap.
pub fn enumeration_size(n: usize, max_n: usize) -> Result<u64, ThresholdError> {
    let max = max_n.min(HARD_MAX_ENUM_N);
    if n == 0 || n > max {
        return Err(ThresholdError::TooLargeToEnumerate { n, max });
    }
    Ok(1u64 << (n * n))
}

/// Counts satisfying images among those with index in `indices`.
pub fn count_profile_range(
    target: &PreparedTarget<'_>,
    n: usize,
    indices: Range<u64>,
) -> Result<CountProfile, ThresholdError> {
    let mut profile = CountProfile::empty(n);
    for i in indices {
        let img = Image::from_index(n, i)?;
        if target.holds(&img)? {
            profile.counts[i.count_ones() as usize] += 1;
        }
    }
    Ok(profile)
}

pub fn count_profile(target: &Target, n: usize, max_n: usize, budget: u64) -> Result<CountProfile, ThresholdError> {
    let total = enumeration_size(n, max_n)?;
    count_profile_range(&target.prepare(budget)?, n, 0..total)
}

/// `mu_{n,p}(target)` by summing over all `2^(n^2)` images.
pub fn exact_probability(target: &Target, n: usize, p: f64, max_n: usize, budget: u64) -> Result<f64, ThresholdError> {
    SampleSpec::new(n, p, 0)?;
    Ok(count_profile(target, n, max_n, budget)?.probability(p))
}

/// Outcome of a Monte Carlo run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimateResult {
    pub n: usize,
    pub p: f64,
    pub samples: u64,
    pub hits: u64,
    pub phat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
}

impl EstimateResult {
    pub fn from_hits(n: usize, p: f64, samples: u64, hits: u64, seed: u64) -> EstimateResult {
        let (ci_low, ci_high) = numerics::wilson_interval(hits, samples);
        EstimateResult { n, p, samples, hits, phat: hits as f64 / samples as f64, ci_low, ci_high, seed }
    }

    pub fn half_width(&self) -> f64 {
        (self.ci_high - self.ci_low) / 2.0
    }

    pub fn covers(&self, value: f64) -> bool {
        self.ci_low <= value && value <= self.ci_high
    }
}

/// Hits among replicates `replicates`; replicate `i` samples with seed
/// `derive_seed(seed, i)`.
pub fn count_hits(
    target: &PreparedTarget<'_>,
    n: usize,
    p: f64,
    seed: u64,
    replicates: Range<u64>,
) -> Result<u64, ThresholdError> {
    let mut hits = 0;
    for i in replicates {
        let img = sample(&SampleSpec::new(n, p, derive_seed(seed, i))?);
        hits += target.holds(&img)? as u64;
    }
    Ok(hits)
}

pub fn estimate(
    target: &Target,
    n: usize,
    p: f64,
    samples: u64,
    seed: u64,
    budget: u64,
) -> Result<EstimateResult, ThresholdError> {
    if samples == 0 {
        return Err(ThresholdError::NoSamples);
    }
    SampleSpec::new(n, p, seed)?;
    let hits = count_hits(&target.prepare(budget)?, n, p, seed, 0..samples)?;
    Ok(EstimateResult::from_hits(n, p, samples, hits, seed))
}

/// Seed of the sweep row for side `n`.
pub fn row_seed(master: u64, n: usize) -> u64 {
    derive_seed(master, n as u64)
}

/// One row of a threshold sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow {
    pub estimate: EstimateResult,
    pub bounds: Option<Bounds>,
    pub classification: Option<Limit>,
}

/// Estimates `target` at `p = rate.p(n)` for each `n`. Bounds are attached
/// when the target is a pattern and `n` is large enough for them.
pub fn sweep(
    target: &Target,
    rate: &PowerLawRate,
    n_list: &[usize],
    samples: u64,
    seed: u64,
    classification: Option<Limit>,
    budget: u64,
) -> Result<Vec<SweepRow>, ThresholdError> {
    n_list
        .iter()
        .map(|&n| {
            let p = rate.p(n);
            let estimate = estimate(target, n, p, samples, row_seed(seed, n), budget)?;
            Ok(SweepRow { estimate, bounds: sweep_bounds(target, n, p), classification })
        })
        .collect()
}

/// Bounds shown in a sweep row, when they apply.
pub fn sweep_bounds(target: &Target, n: usize, p: f64) -> Option<Bounds> {
    match target {
        Target::Pattern(fp) => pattern_bounds(n, p, fp).ok(),
        _ => None,
    }
}
