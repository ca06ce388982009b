//! Monochromatic 6-connected crossings.
//!
//! Paths live on the planar grid: unlike everything else in the crate they do
//! not wrap around the torus. A step moves to one of the six neighbours
//! `(0,±1)`, `(±1,0)`, `(-1,1)` and `(1,-1)` in `(row, col)` offsets, which
//! is the "right, up, up-right" triangle lattice and its reverses. With this
//! neighbourhood exactly one of the black left-right and white top-bottom
//! crossings exists on every image.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use thiserror::Error;

use crate::image::{Color, Image};

const STEPS: [(isize, isize); 6] = [(0, 1), (0, -1), (1, 0), (-1, 0), (-1, 1), (1, -1)];

/// Largest side whose images are enumerated.
pub const HARD_MAX_ENUM_N: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    /// From column 0 to column `n-1`.
    LeftRight,
    /// From row 0 to row `n-1`.
    TopBottom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CrossingSpec {
    pub color: Color,
    pub direction: Direction,
}

impl CrossingSpec {
    /// Black path from left to right.
    pub const BLR: CrossingSpec = CrossingSpec { color: Color::Black, direction: Direction::LeftRight };
    /// White path from top to bottom.
    pub const WTB: CrossingSpec = CrossingSpec { color: Color::White, direction: Direction::TopBottom };

    pub fn color_swapped(self) -> CrossingSpec {
        CrossingSpec { color: self.color.swap(), ..self }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum PercolationError {
    #[error("enumerating side {n} exceeds the cap of {max}")]
    TooLargeToEnumerate { n: usize, max: usize },
}

/// Whether a path of `spec.color` joins the two borders of `spec.direction`.
pub fn crosses(img: &Image, spec: CrossingSpec) -> bool {
    let n = img.n();
    let want = spec.color.is_black();
    let at = |row: usize, col: usize| match spec.direction {
        Direction::LeftRight => row * n + col,
        Direction::TopBottom => col * n + row,
    };
    // walk in coordinates where the crossing always runs along columns;
    // transposing maps the step set onto itself
    let mut seen = vec![false; n * n];
    let mut stack: Vec<(usize, usize)> = Vec::new();
    for row in 0..n {
        if img.get_index(at(row, 0)) == want {
            seen[row * n] = true;
            stack.push((row, 0));
        }
    }
    while let Some((row, col)) = stack.pop() {
        if col == n - 1 {
            return true;
        }
        for (dr, dc) in STEPS {
            let (Some(r2), Some(c2)) = (row.checked_add_signed(dr), col.checked_add_signed(dc)) else {
                continue;
            };
            if r2 >= n || c2 >= n || seen[r2 * n + c2] || img.get_index(at(r2, c2)) != want {
                continue;
            }
            seen[r2 * n + c2] = true;
            stack.push((r2, c2));
        }
    }
    false
}

/// Result of checking that exactly one of the black left-right and white
/// top-bottom crossings holds on every image.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DualityReport {
    pub n: usize,
    pub total: u64,
    pub violations: u64,
    pub blr_count: u64,
}

impl DualityReport {
    pub fn merge(self, other: DualityReport) -> DualityReport {
        DualityReport {
            n: self.n,
            total: self.total + other.total,
            violations: self.violations + other.violations,
            blr_count: self.blr_count + other.blr_count,
        }
    }
}

/// Number of images of side `n`, or an error past `max_n`.
pub fn image_count(n: usize, max_n: usize) -> Result<u64, PercolationError> {
    let max = max_n.min(HARD_MAX_ENUM_N);
    if n == 0 || n > max {
        return Err(PercolationError::TooLargeToEnumerate { n, max });
    }
    Ok(1u64 << (n * n))
}

/// Exhaustive duality check over all images of side `n`.
pub fn duality_check(n: usize, max_n: usize) -> Result<DualityReport, PercolationError> {
    let total = image_count(n, max_n)?;
    Ok(duality_check_range(n, 0..total))
}

/// The duality check restricted to image indices in `indices`; reports over
/// a partition merge to the full report.
pub fn duality_check_range(n: usize, indices: Range<u64>) -> DualityReport {
    let mut report = DualityReport { n, ..DualityReport::default() };
    for i in indices {
        let img = Image::from_index(n, i).expect("side checked by caller");
        let blr = crosses(&img, CrossingSpec::BLR);
        let wtb = crosses(&img, CrossingSpec::WTB);
        report.total += 1;
        report.blr_count += blr as u64;
        report.violations += (blr == wtb) as u64;
    }
    report
}
