//! Binary images on the torus and the product-Bernoulli sampler.

use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use thiserror::Error;

use crate::grid::{GridError, Pixel, TorusGeometry};

/// Pixel colour. Black is the value `1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Color {
    White,
    Black,
}

impl Color {
    pub fn swap(self) -> Color {
        match self {
            Color::White => Color::Black,
            Color::Black => Color::White,
        }
    }

    pub fn is_black(self) -> bool {
        self == Color::Black
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ImageError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("probability {0} is outside [0, 1]")]
    InvalidProbability(f64),
    #[error("expected {expected} pixel values, got {got}")]
    WrongPixelCount { expected: usize, got: usize },
    #[error("a {n}x{n} image does not fit in a 64-bit index")]
    TooLargeForIndex { n: usize },
}

/// An `n x n` binary image, bit-packed in row-major order.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Image {
    geom: TorusGeometry,
    words: Vec<u64>,
}

impl core::fmt::Debug for Image {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        writeln!(f, "Image {}x{}", self.n(), self.n())?;
        for row in 0..self.n() {
            for col in 0..self.n() {
                f.write_str(if self.get(Pixel::new(row, col)) { "#" } else { "." })?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

impl Image {
    pub fn white(n: usize) -> Result<Image, ImageError> {
        let geom = TorusGeometry::new(n)?;
        Ok(Image { geom, words: vec![0; geom.cells().div_ceil(64)] })
    }

    pub fn black(n: usize) -> Result<Image, ImageError> {
        Ok(Image::white(n)?.complement())
    }

    /// Builds an image from `n*n` row-major values.
    pub fn from_bits(n: usize, bits: &[bool]) -> Result<Image, ImageError> {
        let mut img = Image::white(n)?;
        if bits.len() != img.geom.cells() {
            return Err(ImageError::WrongPixelCount { expected: img.geom.cells(), got: bits.len() });
        }
        for (i, &b) in bits.iter().enumerate() {
            if b {
                img.set_index(i, true);
            }
        }
        Ok(img)
    }

    /// The image whose row-major pixel `i` is bit `i` of `index`.
    ///
    /// Iterating `index` over `0..2^(n*n)` visits every image exactly once.
    pub fn from_index(n: usize, index: u64) -> Result<Image, ImageError> {
        let geom = TorusGeometry::new(n)?;
        if geom.cells() > 64 {
            return Err(ImageError::TooLargeForIndex { n });
        }
        let mask = if geom.cells() == 64 { u64::MAX } else { (1u64 << geom.cells()) - 1 };
        Ok(Image { geom, words: vec![index & mask] })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.geom.n()
    }

    #[inline]
    pub fn geometry(&self) -> TorusGeometry {
        self.geom
    }

    #[inline]
    pub fn get_index(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    #[inline]
    pub fn get(&self, x: Pixel) -> bool {
        self.get_index(self.geom.index(x))
    }

    #[inline]
    pub fn color(&self, x: Pixel) -> Color {
        if self.get(x) {
            Color::Black
        } else {
            Color::White
        }
    }

    #[inline]
    pub fn set_index(&mut self, i: usize, black: bool) {
        let bit = 1u64 << (i % 64);
        if black {
            self.words[i / 64] |= bit;
        } else {
            self.words[i / 64] &= !bit;
        }
    }

    pub fn set(&mut self, x: Pixel, black: bool) {
        let i = self.geom.index(x);
        self.set_index(i, black);
    }

    pub fn black_count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Flips every pixel.
    pub fn complement(&self) -> Image {
        let cells = self.geom.cells();
        let mut words: Vec<u64> = self.words.iter().map(|w| !w).collect();
        let tail = cells % 64;
        if tail != 0 {
            *words.last_mut().unwrap() &= (1u64 << tail) - 1;
        }
        Image { geom: self.geom, words }
    }

    /// Row-major indices of the black pixels, in increasing order.
    pub fn black_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(w, &word)| {
            let mut rest = word;
            core::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let bit = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(w * 64 + bit)
            })
        })
    }

    /// Row-major indices of pixels of the given colour.
    pub fn indices_of(&self, color: Color) -> Vec<usize> {
        match color {
            Color::Black => self.black_indices().collect(),
            Color::White => (0..self.geom.cells()).filter(|&i| !self.get_index(i)).collect(),
        }
    }
}

/// Parameters of one draw from the product-Bernoulli measure.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleSpec {
    pub n: usize,
    pub p: f64,
    pub seed: u64,
}

impl SampleSpec {
    pub fn new(n: usize, p: f64, seed: u64) -> Result<SampleSpec, ImageError> {
        TorusGeometry::new(n)?;
        check_probability(p)?;
        Ok(SampleSpec { n, p, seed })
    }
}

pub(crate) fn check_probability(p: f64) -> Result<(), ImageError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(ImageError::InvalidProbability(p))
    }
}

/// How [`sample_with`] draws pixels. Both methods produce the same
/// distribution; they consume the random stream differently.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SamplingMethod {
    /// Dense below [`SPARSE_BELOW`], sparse otherwise.
    Auto,
    /// One uniform draw per pixel.
    Dense,
    /// Geometric gaps between consecutive black pixels; cost is
    /// proportional to the number of black pixels.
    Sparse,
}

/// Levels below which [`SamplingMethod::Auto`] uses the sparse path.
pub const SPARSE_BELOW: f64 = 0.05;

/// Draws an image; a pure function of `(n, p, seed)`.
pub fn sample(spec: &SampleSpec) -> Image {
    sample_with(spec, SamplingMethod::Auto)
}

pub fn sample_with(spec: &SampleSpec, method: SamplingMethod) -> Image {
    let mut img = Image::white(spec.n).expect("SampleSpec has n >= 1");
    let p = spec.p;
    if p <= 0.0 {
        return img;
    }
    if p >= 1.0 {
        return img.complement();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let cells = img.geom.cells();
    let sparse = match method {
        SamplingMethod::Auto => p < SPARSE_BELOW,
        SamplingMethod::Dense => false,
        SamplingMethod::Sparse => true,
    };
    if sparse {
        // P(gap >= g) = (1-p)^g, so successive gaps reproduce independent
        // Bernoulli(p) pixels.
        let log_q = libm::log1p(-p);
        let mut pos = 0usize;
        loop {
            let u = 1.0 - unit_f64(rng.next_u64());
            let gap = libm::floor(libm::log(u) / log_q);
            if gap >= (cells - pos) as f64 {
                break;
            }
            pos += gap as usize;
            img.set_index(pos, true);
            pos += 1;
            if pos >= cells {
                break;
            }
        }
    } else {
        for i in 0..cells {
            if unit_f64(rng.next_u64()) < p {
                img.set_index(i, true);
            }
        }
    }
    img
}

/// Uniform in `[0, 1)` with 53 random bits.
#[inline]
fn unit_f64(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Seed of replicate `index` under `master`. Any partition of the replicate
/// range over workers draws the same images as a serial run.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index.wrapping_add(0x632B_E59B_D9B4_E019)))
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Probability that an image of side `n` and level `p` has an even number of
/// black pixels: `(1 + (1-2p)^(n^2)) / 2`.
pub fn parity_probability(n: usize, p: f64) -> f64 {
    let cells = (n * n) as f64;
    0.5 * (1.0 + libm::pow(1.0 - 2.0 * p, cells))
}
