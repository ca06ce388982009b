//! The ten acceptance criteria, run in order. Each prints one `[PASS]` or
//! `[FAIL]` line; the test fails if any criterion fails.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use zolab::formats::parse_local;
use zolab::parallel::{par_count_profile, par_duality_check, par_estimate, par_exact_probability, par_sweep};
use zolab_core::folang::{parse, Compiled, Evaluator, DEFAULT_WORK_BUDGET};
use zolab_core::image::{derive_seed, parity_probability, sample, Color, Image, SampleSpec};
use zolab_core::local::{
    factor, index, match_factored, BasicLocalSentence, Description, FactoredPattern, Index, LocalConfig,
};
use zolab_core::thresholds::{
    classify, pattern_bounds, threshold_exponent, Limit, PowerLawRate, Target, ThresholdExponent,
};

const B: u64 = DEFAULT_WORK_BUDGET;

fn sentence(name: &str) -> BasicLocalSentence {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../sentences").join(name);
    parse_local(&std::fs::read_to_string(&path).unwrap()).unwrap()
}

fn exists_black() -> Target {
    Target::Formula(parse("exists x. C(x)").unwrap())
}

fn exact(t: &Target, n: usize, p: f64) -> f64 {
    par_exact_probability(t, n, p, 4, B).unwrap()
}

struct Report {
    failures: Vec<String>,
}

impl Report {
    fn check(&mut self, id: u32, name: &str, limit: Duration, run: impl FnOnce() -> Result<String, String>) {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > limit => Err(format!("{detail}; took {elapsed:.2?}, limit {limit:?}")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("[PASS] {id:>2} {name}: {detail} ({elapsed:.2?})"),
            Err(detail) => {
                println!("[FAIL] {id:>2} {name}: {detail} ({elapsed:.2?})");
                self.failures.push(format!("{id} {name}"));
            }
        }
    }
}

fn ensure(ok: bool, detail: String) -> Result<String, String> {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c1() -> Result<String, String> {
    let n = 64usize;
    let p = 1.0 / (n * n) as f64;
    let closed = 1.0 - (1.0 - p).powi((n * n) as i32);
    let limit = 1.0 - (-1.0f64).exp();
    if (closed - limit).abs() > 1e-3 {
        return Err(format!("closed form {closed} vs {limit}"));
    }
    let e = par_estimate(&exists_black(), n, p, 100_000, 20_240_101, B).unwrap();
    ensure((e.phat - closed).abs() <= 0.005, format!("closed form {closed:.6}, estimate {:.6}", e.phat))
}

fn c2() -> Result<String, String> {
    let t = Target::EvenCount(Color::Black);
    let mut worst = 0.0f64;
    for n in 1..=3 {
        for p in [0.1f64, 0.3, 0.5, 0.7] {
            let closed = 0.5 * (1.0 + (1.0 - 2.0 * p).powi((n * n) as i32));
            worst = worst.max((exact(&t, n, p) - closed).abs());
            worst = worst.max((parity_probability(n, p) - closed).abs());
        }
    }
    ensure(worst <= 1e-12, format!("max deviation {worst:e}"))
}

fn c3() -> Result<String, String> {
    let d = Description::center_black(1);
    assert_eq!((d.k(), d.h()), (1, 8));
    let fp = FactoredPattern::new(1, vec![vec![d]]).unwrap();
    let target = Target::Pattern(fp.clone());
    let n = 4;
    let mut lines = Vec::new();
    for p in [0.05, 0.1, 0.3] {
        let b = pattern_bounds(n, p, &fp).unwrap();
        let e = exact(&target, n, p);
        let first_moment = (n * n) as f64 * p * (1.0 - p).powi(8);
        let tiling = 1.0 - (1.0 - p * (1.0 - p).powi(8)).powi(b.tau as i32);
        let exp_form = 1.0 - (-(b.tau as f64) * p * (1.0 - p).powi(8)).exp();
        if !(b.lower <= e && e <= b.upper) || (b.upper - first_moment.min(1.0)).abs() > 1e-12 {
            return Err(format!("p={p}: {b:?} vs exact {e}"));
        }
        if (b.lower - tiling).abs() > 1e-12 || exp_form > e {
            return Err(format!("p={p}: tiling bound {} vs {tiling}, exp form {exp_form}", b.lower));
        }
        lines.push(format!("p={p}: {:.4} <= {e:.4} <= {:.4}", b.lower, b.upper));
    }
    Ok(lines.join(", "))
}

fn c4() -> Result<String, String> {
    for n in 1..=4usize {
        let r = par_duality_check(n, 4).unwrap();
        let half = 1u64 << (n * n - 1);
        if r.violations != 0 || r.blr_count != half || r.total != 2 * half {
            return Err(format!("n={n}: {r:?}"));
        }
    }
    Ok("no violations, BLR count 2^(n^2-1) for n=1..4".into())
}

fn c5() -> Result<String, String> {
    let taus = [
        parse("forall x. forall y. forall z. (R(x,y) & U(y,z)) -> D1(x,z)").unwrap(),
        parse("forall x. forall z. (exists y. (R(x,y) & U(y,z))) <-> D1(x,z)").unwrap(),
    ];
    let file = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../sentences/tautologies.fo");
    let both = parse(&std::fs::read_to_string(file).unwrap()).unwrap();
    let ev = Evaluator::default();
    let mut passed = 0;
    for i in 0..200u64 {
        let n = 3 + (i % 6) as usize;
        let img = sample(&SampleSpec::new(n, 0.5, derive_seed(5, i)).unwrap());
        if taus.iter().chain([&both]).all(|f| ev.holds(&img, f).unwrap()) {
            passed += 1;
        }
    }
    ensure(passed == 200, format!("{passed}/200 images"))
}

fn c6() -> Result<String, String> {
    let cfg = LocalConfig::default();
    let black = sentence("black_pixel.json");
    let unsat = sentence("unsatisfiable.json");
    let mixed = sentence("white_ball_and_black_pixel.json");
    let got = (
        index(&black, &cfg).unwrap(),
        index(&unsat, &cfg).unwrap(),
        index(&mixed, &cfg).unwrap(),
        threshold_exponent(&black, &cfg).unwrap(),
    );
    let want = (Index::Finite(1), Index::Infinite, Index::Finite(1), ThresholdExponent::Rational { num: 2, den: 1 });
    ensure(got == want, format!("indices {}, {}, {}; exponent {}", got.0, got.1, got.2, got.3))
}

fn c7() -> Result<String, String> {
    let l = sentence("domino.json");
    let fp = factor(&l, &LocalConfig::default()).unwrap();
    let relativized = Compiled::new(&l.to_formula(), &[]).unwrap();
    let plain = Compiled::new(&parse("exists x. (C(x) & exists y. (R(x,y) & C(y)))").unwrap(), &[]).unwrap();
    let mut mismatches = 0;
    for i in 0..1u64 << 16 {
        let img = Image::from_index(4, i).unwrap();
        let m = match_factored(&img, &fp).unwrap();
        let a = relativized.eval(&img, &[], None, B).unwrap();
        let b = plain.eval(&img, &[], None, B).unwrap();
        mismatches += u32::from(m != a) + u32::from(m != b);
    }
    ensure(mismatches == 0, format!("{mismatches} mismatches over 65536 images"))
}

fn c8() -> Result<String, String> {
    let cfg = LocalConfig::default();
    let rate = PowerLawRate::new(1.0, 0.9).unwrap();
    let ns = [64, 128, 256];
    let domino = sentence("domino.json");
    let triple = sentence("three_in_row.json");
    let (cd, ct) = (classify(&domino, &rate, &cfg).unwrap(), classify(&triple, &rate, &cfg).unwrap());
    if (cd, ct) != (Limit::One, Limit::Zero) {
        return Err(format!("classified {} and {}", cd.as_str(), ct.as_str()));
    }
    let d_rows = par_sweep(&Target::Pattern(factor(&domino, &cfg).unwrap()), &rate, &ns, 10_000, 8, Some(cd), B)
        .unwrap();
    let t_rows = par_sweep(&Target::Pattern(factor(&triple, &cfg).unwrap()), &rate, &ns, 10_000, 8, Some(ct), B)
        .unwrap();
    let d_phat: Vec<f64> = d_rows.iter().map(|r| r.estimate.phat).collect();
    if !d_phat.windows(2).all(|w| w[0] < w[1]) {
        return Err(format!("domino phat {d_phat:?} not increasing"));
    }
    for row in &t_rows {
        let upper = row.bounds.unwrap().upper;
        if row.estimate.phat > upper + 3.0 * row.estimate.half_width() {
            return Err(format!("n={}: three-in-row phat {} above {upper}", row.estimate.n, row.estimate.phat));
        }
    }
    let t_phat: Vec<f64> = t_rows.iter().map(|r| r.estimate.phat).collect();
    Ok(format!("domino {d_phat:?}, three-in-row {t_phat:?}"))
}

fn c9() -> Result<String, String> {
    let mut worst = 0.0f64;
    for t in [exists_black(), Target::EvenCount(Color::Black)] {
        let swapped = t.color_swapped();
        for n in 1..=3 {
            let (a, b) = (par_count_profile(&t, n, 4, B).unwrap(), par_count_profile(&swapped, n, 4, B).unwrap());
            for p in [0.2, 0.7] {
                worst = worst.max((a.probability(p) - b.probability(1.0 - p)).abs());
            }
        }
    }
    ensure(worst <= 1e-12, format!("max deviation {worst:e}"))
}

fn c10() -> Result<String, String> {
    let (n, p) = (3, 0.3);
    let truth = 1.0 - 0.7f64.powi(9);
    let target = exists_black();
    let covered = (0..200u64)
        .filter(|&i| par_estimate(&target, n, p, 500, derive_seed(10, i), B).unwrap().covers(truth))
        .count();
    ensure(covered >= 180, format!("{covered}/200 intervals cover {truth:.6}"))
}

#[test]
fn acceptance() {
    let mut report = Report { failures: Vec::new() };
    let s = Duration::from_secs;
    report.check(1, "single black pixel at the threshold", s(10), c1);
    report.check(2, "parity closed form", s(5), c2);
    report.check(3, "tiling and first-moment sandwich", s(5), c3);
    report.check(4, "crossing duality", s(10), c4);
    report.check(5, "tautologies on random images", s(60), c5);
    report.check(6, "index battery", s(60), c6);
    report.check(7, "factored domino equals its sentence", s(60), c7);
    report.check(8, "zero-one trend along n^-0.9", s(300), c8);
    report.check(9, "colour-swap symmetry", s(60), c9);
    report.check(10, "Wilson interval calibration", s(60), c10);
    assert!(report.failures.is_empty(), "failed: {:?}", report.failures);
}
