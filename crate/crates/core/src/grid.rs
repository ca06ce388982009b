//! Torus geometry of the pixel set.
//!
//! Pixels are 0-based `(row, col)` pairs; row 0 is the top row of the image.
//! Published treatments of this model usually number pixels `1..=n`; every
//! coordinate here is that number minus one. All arithmetic wraps modulo `n`,
//! and distances are graph distances for 8-connectivity, which on the torus is
//! the Chebyshev distance of the circular coordinate differences.

use alloc::vec::Vec;

use thiserror::Error;

/// A pixel of an `n x n` image.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pixel {
    pub row: usize,
    pub col: usize,
}

impl Pixel {
    pub const fn new(row: usize, col: usize) -> Self {
        Pixel { row, col }
    }
}

impl core::fmt::Display for Pixel {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

/// A displacement `(drow, dcol)`.
pub type Offset = (isize, isize);

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum GridError {
    #[error("side length must be at least 1")]
    EmptyGrid,
    #[error("ball of radius {r} does not fit in a torus of side {n}")]
    BallTooLarge { n: usize, r: usize },
}

/// Side length of the torus, always at least 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TorusGeometry {
    n: usize,
}

impl TorusGeometry {
    pub fn new(n: usize) -> Result<Self, GridError> {
        if n == 0 {
            return Err(GridError::EmptyGrid);
        }
        Ok(TorusGeometry { n })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn cells(&self) -> usize {
        self.n * self.n
    }

    /// Row-major index of a pixel.
    #[inline]
    pub fn index(&self, x: Pixel) -> usize {
        x.row * self.n + x.col
    }

    #[inline]
    pub fn pixel(&self, index: usize) -> Pixel {
        Pixel::new(index / self.n, index % self.n)
    }

    pub fn pixels(&self) -> impl Iterator<Item = Pixel> + '_ {
        (0..self.cells()).map(move |i| self.pixel(i))
    }

    #[inline]
    fn wrap(&self, v: usize, d: isize) -> usize {
        let n = self.n as isize;
        (v as isize + d.rem_euclid(n)).rem_euclid(n) as usize
    }

    /// Componentwise addition modulo `n`.
    #[inline]
    pub fn wrap_add(&self, x: Pixel, offset: Offset) -> Pixel {
        Pixel::new(self.wrap(x.row, offset.0), self.wrap(x.col, offset.1))
    }

    /// Distance between two coordinates on a cycle of length `n`.
    #[inline]
    pub fn circular(&self, a: usize, b: usize) -> usize {
        let d = a.abs_diff(b);
        d.min(self.n - d)
    }

    /// Graph distance in the 8-connected torus.
    #[inline]
    pub fn distance(&self, x: Pixel, y: Pixel) -> usize {
        self.circular(x.row, y.row).max(self.circular(x.col, y.col))
    }

    /// Pixels at distance at most `r` from `x`, in the row-major order of
    /// [`ball_offsets`].
    pub fn ball(&self, x: Pixel, r: usize) -> Result<Vec<Pixel>, GridError> {
        if 2 * r + 1 > self.n {
            return Err(GridError::BallTooLarge { n: self.n, r });
        }
        Ok(ball_offsets(r).map(|o| self.wrap_add(x, o)).collect())
    }

    /// Centers of the non-overlapping tiling by radius-`r` balls:
    /// `(r + a(2r+1), r + b(2r+1))` for `a, b < floor(n / (2r+1))`.
    pub fn tiling(&self, r: usize) -> Vec<Pixel> {
        let side = 2 * r + 1;
        let per_axis = self.n / side;
        let mut centers = Vec::with_capacity(per_axis * per_axis);
        for a in 0..per_axis {
            for b in 0..per_axis {
                centers.push(Pixel::new(r + a * side, r + b * side));
            }
        }
        centers
    }
}

/// `floor(n / (2r+1))^2`, the number of tiling centers.
pub fn tiling_size(n: usize, r: usize) -> usize {
    let per_axis = n / (2 * r + 1);
    per_axis * per_axis
}

/// Offsets of a radius-`r` ball, `drow` outer and `dcol` inner, both from
/// `-r` to `r`.
pub fn ball_offsets(r: usize) -> impl Iterator<Item = Offset> + Clone {
    let r = r as isize;
    (-r..=r).flat_map(move |dr| (-r..=r).map(move |dc| (dr, dc)))
}
