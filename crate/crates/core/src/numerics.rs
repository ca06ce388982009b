//! Small numerical helpers: log-space pattern probabilities, compensated
//! summation, binomial tails and the Wilson interval.

/// `ln(p^k (1-p)^h)`, with `0^0 = 1`.
pub fn ln_pattern_probability(p: f64, k: usize, h: usize) -> f64 {
    let black = if k == 0 { 0.0 } else { k as f64 * libm::log(p) };
    let white = if h == 0 { 0.0 } else { h as f64 * libm::log1p(-p) };
    black + white
}

/// `p^k (1-p)^h`. The white factor goes through `log1p` when `1 - p` is
/// not exactly representable, so tiny `p` keeps its precision.
pub fn pattern_probability(p: f64, k: usize, h: usize) -> f64 {
    let black = if k == 0 { 1.0 } else { libm::pow(p, k as f64) };
    let q = 1.0 - p;
    let white = if h == 0 {
        1.0
    } else if 1.0 - q == p {
        libm::pow(q, h as f64)
    } else {
        libm::exp(h as f64 * libm::log1p(-p))
    };
    black * white
}

/// `1 - (1 - pi)^trials`, accurate for tiny `pi`.
pub fn at_least_one(pi: f64, trials: usize) -> f64 {
    if pi >= 1.0 {
        return if trials == 0 { 0.0 } else { 1.0 };
    }
    -libm::expm1(trials as f64 * libm::log1p(-pi))
}

/// `P[Binomial(trials, pi) <= upto]`.
pub fn binomial_cdf(trials: usize, pi: f64, upto: usize) -> f64 {
    if upto >= trials {
        return 1.0;
    }
    if pi <= 0.0 {
        return 1.0;
    }
    if pi >= 1.0 {
        return 0.0;
    }
    let ln_pi = libm::log(pi);
    let ln_q = libm::log1p(-pi);
    let mut ln_choose = 0.0;
    let mut sum = NeumaierSum::default();
    for l in 0..=upto {
        if l > 0 {
            ln_choose += libm::log((trials - l + 1) as f64) - libm::log(l as f64);
        }
        sum.add(libm::exp(ln_choose + l as f64 * ln_pi + (trials - l) as f64 * ln_q));
    }
    sum.total().min(1.0)
}

/// Neumaier's compensated sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if libm::fabs(self.sum) >= libm::fabs(x) {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Two-sided 97.5% standard normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Wilson score interval at the 95% level.
pub fn wilson_interval(hits: u64, samples: u64) -> (f64, f64) {
    if samples == 0 {
        return (0.0, 1.0);
    }
    let n = samples as f64;
    let phat = hits as f64 / n;
    let z2 = Z_95 * Z_95;
    let denom = 1.0 + z2 / n;
    let center = (phat + z2 / (2.0 * n)) / denom;
    let half = Z_95 * libm::sqrt(phat * (1.0 - phat) / n + z2 / (4.0 * n * n)) / denom;
    let lo = (center - half).max(0.0);
    let hi = (center + half).min(1.0);
    // keep phat inside the interval against rounding at the extremes
    (lo.min(phat), hi.max(phat))
}
