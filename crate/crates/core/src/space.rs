//! Mixed-radix enumeration of product alphabets Y^n.
//!
//! Index encoding is little-endian: `idx = Σ_j y_j · r^j`, so coordinate 0
//! varies fastest.

use crate::error::{FbError, Result};

/// Default enumeration guard (states).
pub const DEFAULT_GUARD: u64 = 1 << 24;
/// Smallest guard a configuration may set.
pub const MIN_GUARD: u64 = 1 << 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Space {
    pub radix: usize,
    pub n: usize,
    pub size: usize,
}

/// r^n as u128, saturating.
pub fn count_states(radix: usize, n: usize) -> u128 {
    let mut s: u128 = 1;
    for _ in 0..n {
        s = s.saturating_mul(radix as u128);
        if s > u64::MAX as u128 {
            return s;
        }
    }
    s
}

impl Space {
    pub fn new(radix: usize, n: usize, guard: u64) -> Result<Self> {
        let needed = count_states(radix, n);
        if needed > guard as u128 {
            return Err(FbError::Guard { needed, guard });
        }
        Ok(Space {
            radix,
            n,
            size: needed as usize,
        })
    }

    /// Write the coordinates of `idx` into `out` (length n).
    pub fn decode(&self, mut idx: usize, out: &mut [usize]) {
        for o in out.iter_mut().take(self.n) {
            *o = idx % self.radix;
            idx /= self.radix;
        }
    }

    pub fn encode(&self, ys: &[usize]) -> usize {
        ys.iter().rev().fold(0, |acc, &y| acc * self.radix + y)
    }

    /// Coordinate j of `idx`.
    pub fn coord(&self, idx: usize, j: usize) -> usize {
        (idx / self.radix.pow(j as u32)) % self.radix
    }

    /// Number of coordinates equal to `symbol`.
    pub fn count_symbol(&self, mut idx: usize, symbol: usize) -> usize {
        let mut c = 0;
        for _ in 0..self.n {
            if idx % self.radix == symbol {
                c += 1;
            }
            idx /= self.radix;
        }
        c
    }
}
