//! Rayon-backed versions of the enumeration and sampling loops.
//!
//! Work is cut into chunks whose boundaries depend only on the problem size,
//! partial results are integers, and they are combined in chunk order, so
//! every function returns exactly what its serial counterpart in
//! `zolab_core` returns, whatever the number of worker threads.

use std::ops::Range;

use rayon::prelude::*;
use zolab_core::folang::Formula;
use zolab_core::local::{
    coloring_count, descriptions_implying_in, BasicLocalSentence, Description, FactoredPattern, LocalConfig,
    LocalError,
};
use zolab_core::percolation::{duality_check_range, image_count, DualityReport, PercolationError};
use zolab_core::thresholds::{
    count_hits, count_profile_range, enumeration_size, row_seed, sweep_bounds, CountProfile, EstimateResult, Limit,
    PowerLawRate, SweepRow, Target, ThresholdError,
};

/// Splits `0..total` into consecutive ranges of at most `size` elements.
pub fn chunks(total: u64, size: u64) -> Vec<Range<u64>> {
    let size = size.max(1);
    (0..total.div_ceil(size)).map(|i| i * size..((i + 1) * size).min(total)).collect()
}

/// First error in chunk order, or all values.
fn in_order<T, E>(results: Vec<Result<T, E>>) -> Result<Vec<T>, E> {
    results.into_iter().collect()
}

const SAMPLE_CHUNK: u64 = 256;
const IMAGE_CHUNK: u64 = 4096;
const COLORING_CHUNK: u64 = 8192;

pub fn par_estimate(
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
    zolab_core::image::SampleSpec::new(n, p, seed)?;
    let prepared = target.prepare(budget)?;
    let parts = chunks(samples, SAMPLE_CHUNK)
        .into_par_iter()
        .map(|range| count_hits(&prepared, n, p, seed, range))
        .collect();
    let hits = in_order(parts)?.into_iter().sum();
    Ok(EstimateResult::from_hits(n, p, samples, hits, seed))
}

pub fn par_count_profile(target: &Target, n: usize, max_n: usize, budget: u64) -> Result<CountProfile, ThresholdError> {
    let total = enumeration_size(n, max_n)?;
    let prepared = target.prepare(budget)?;
    let parts = chunks(total, IMAGE_CHUNK)
        .into_par_iter()
        .map(|range| count_profile_range(&prepared, n, range))
        .collect();
    Ok(in_order(parts)?.iter().fold(CountProfile::empty(n), CountProfile::merge))
}

pub fn par_exact_probability(
    target: &Target,
    n: usize,
    p: f64,
    max_n: usize,
    budget: u64,
) -> Result<f64, ThresholdError> {
    zolab_core::image::SampleSpec::new(n, p, 0)?;
    Ok(par_count_profile(target, n, max_n, budget)?.probability(p))
}

pub fn par_duality_check(n: usize, max_n: usize) -> Result<DualityReport, PercolationError> {
    let total = image_count(n, max_n)?;
    let parts: Vec<DualityReport> =
        chunks(total, IMAGE_CHUNK).into_par_iter().map(|range| duality_check_range(n, range)).collect();
    Ok(parts.into_iter().fold(DualityReport { n, ..DualityReport::default() }, DualityReport::merge))
}

pub fn par_descriptions_implying(psi: &Formula, r: usize, cfg: &LocalConfig) -> Result<Vec<Description>, LocalError> {
    let total = coloring_count(r, cfg)?;
    let parts = chunks(total, COLORING_CHUNK)
        .into_par_iter()
        .map(|range| descriptions_implying_in(psi, r, cfg, range))
        .collect();
    let parts = in_order(parts)?;
    if parts.iter().map(Vec::len).sum::<usize>() > cfg.max_descriptions {
        return Err(LocalError::TooManyDescriptions { max: cfg.max_descriptions });
    }
    Ok(parts.concat())
}

pub fn par_factor(l: &BasicLocalSentence, cfg: &LocalConfig) -> Result<FactoredPattern, LocalError> {
    let slots = l
        .psis()
        .iter()
        .map(|psi| par_descriptions_implying(psi, l.radius(), cfg))
        .collect::<Result<Vec<_>, _>>()?;
    FactoredPattern::new(l.radius(), slots)
}

pub fn par_sweep(
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
            let estimate = par_estimate(target, n, p, samples, row_seed(seed, n), budget)?;
            Ok(SweepRow { estimate, bounds: sweep_bounds(target, n, p), classification })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use zolab_core::folang::{parse, DEFAULT_WORK_BUDGET};
    use zolab_core::local::{descriptions_implying, factor};
    use zolab_core::percolation::{duality_check, CrossingSpec};
    use zolab_core::thresholds::{count_profile, estimate, sweep};

    fn pool(threads: usize) -> rayon::ThreadPool {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap()
    }

    #[test]
    fn chunking_covers_the_range() {
        assert_eq!(chunks(10, 4), vec![0..4, 4..8, 8..10]);
        assert_eq!(chunks(0, 4), Vec::<Range<u64>>::new());
        assert_eq!(chunks(3, 0), vec![0..1, 1..2, 2..3]);
    }

    #[test]
    fn estimates_match_serial_for_any_thread_count() {
        let target = Target::Formula(parse("exists x. (C(x) & exists y. (R(x,y) & C(y)))").unwrap());
        let serial = estimate(&target, 6, 0.2, 1000, 77, DEFAULT_WORK_BUDGET).unwrap();
        for threads in [1, 3, 8] {
            let par = pool(threads).install(|| par_estimate(&target, 6, 0.2, 1000, 77, DEFAULT_WORK_BUDGET).unwrap());
            assert_eq!(par, serial);
        }
    }

    #[test]
    fn enumerations_match_serial() {
        let target = Target::Crossing(CrossingSpec::BLR);
        let serial = count_profile(&target, 4, 4, DEFAULT_WORK_BUDGET).unwrap();
        for threads in [1, 5] {
            let par = pool(threads).install(|| par_count_profile(&target, 4, 4, DEFAULT_WORK_BUDGET).unwrap());
            assert_eq!(par, serial);
            assert_eq!(pool(threads).install(|| par_duality_check(4, 4).unwrap()), duality_check(4, 4).unwrap());
        }
    }

    #[test]
    fn factoring_matches_serial() {
        let cfg = LocalConfig::default();
        let psi = parse("C(x) | exists y. (D1(x,y) & C(y))").unwrap();
        assert_eq!(par_descriptions_implying(&psi, 1, &cfg).unwrap(), descriptions_implying(&psi, 1, &cfg).unwrap());
        let l = BasicLocalSentence::new(1, vec![psi, parse("!C(x)").unwrap()]).unwrap();
        assert_eq!(par_factor(&l, &cfg).unwrap(), factor(&l, &cfg).unwrap());
        let tight = LocalConfig { max_descriptions: 10, ..cfg };
        assert_eq!(
            par_descriptions_implying(&parse("C(x)").unwrap(), 1, &tight),
            Err(LocalError::TooManyDescriptions { max: 10 })
        );
    }

    #[test]
    fn sweeps_match_serial() {
        let target = Target::Formula(parse("exists x. C(x)").unwrap());
        let rate = PowerLawRate::new(1.0, 2.0).unwrap();
        let serial = sweep(&target, &rate, &[4, 8], 300, 3, None, DEFAULT_WORK_BUDGET).unwrap();
        assert_eq!(par_sweep(&target, &rate, &[4, 8], 300, 3, None, DEFAULT_WORK_BUDGET).unwrap(), serial);
    }
}
