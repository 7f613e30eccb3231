//! Frequency bands where emission is minimized.

use serde::{Deserialize, Serialize};

use crate::config::{wrap_frequency, OfdmConfig};
use crate::error::{Error, Result};

const MERGE_TOL: f64 = 1e-12;

/// Union of normalized-frequency intervals inside [-1/2, 1/2].
///
/// Intervals are sorted, non-overlapping and never straddle ±1/2; a band that
/// wraps around is stored as two pieces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSet {
    intervals: Vec<(f64, f64)>,
}

/// Inclusive carrier-index range, read circularly: `lo > hi` wraps past N-1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CarrierRange {
    pub lo: usize,
    pub hi: usize,
}

impl CarrierRange {
    pub fn new(lo: usize, hi: usize) -> Self {
        Self { lo, hi }
    }

    /// Number of carriers covered.
    pub fn width(&self, n: usize) -> usize {
        (self.hi + n - self.lo) % n + 1
    }

    pub fn contains(&self, k: usize, n: usize) -> bool {
        (k + n - self.lo) % n < self.width(n)
    }

    pub fn iter(&self, n: usize) -> impl Iterator<Item = usize> {
        let lo = self.lo;
        (0..self.width(n)).map(move |i| (lo + i) % n)
    }
}

impl BandSet {
    /// Builds a band from arbitrary intervals `(lo, hi)` with `lo < hi`.
    /// Endpoints are taken modulo 1; an interval may span at most one period.
    pub fn new(intervals: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut pieces = Vec::new();
        for (lo, hi) in intervals {
            if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
                return Err(Error::Band(format!("degenerate interval ({lo}, {hi})")));
            }
            if hi - lo >= 1.0 - MERGE_TOL {
                pieces.push((-0.5, 0.5));
                continue;
            }
            let start = wrap_frequency(lo);
            let end = start + (hi - lo);
            if end > 0.5 {
                pieces.push((start, 0.5));
                pieces.push((-0.5, end - 1.0));
            } else {
                pieces.push((start, end));
            }
        }
        if pieces.is_empty() {
            return Err(Error::Band("empty band".into()));
        }
        Ok(Self {
            intervals: merge(pieces),
        })
    }

    /// Maps carrier-index ranges onto frequency, extending each range by
    /// `guard_fraction` carrier spacings beyond its edge indices.
    pub fn from_carriers(config: &OfdmConfig, ranges: &[CarrierRange], guard_fraction: f64) -> Result<Self> {
        if ranges.is_empty() {
            return Err(Error::Band("no carrier ranges given".into()));
        }
        let n = config.n_carriers;
        let nf = n as f64;
        let mut spans = Vec::with_capacity(ranges.len());
        for r in ranges {
            config.check_carrier(r.lo)?;
            config.check_carrier(r.hi)?;
            let lo = (r.lo as f64 - guard_fraction) / nf;
            let hi = lo + (r.width(n) as f64 - 1.0 + 2.0 * guard_fraction) / nf;
            spans.push((lo, hi));
        }
        Self::new(spans)
    }

    /// The whole discrete-time frequency axis.
    pub fn full() -> Self {
        Self {
            intervals: vec![(-0.5, 0.5)],
        }
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(|(a, b)| b - a).sum()
    }

    /// Membership of a normalized frequency (taken modulo 1).
    pub fn contains(&self, f: f64) -> bool {
        let w = wrap_frequency(f);
        // +1/2 and -1/2 are the same frequency
        self.intervals.iter().any(|&(a, b)| {
            (w >= a - MERGE_TOL && w <= b + MERGE_TOL) || (w >= 0.5 - MERGE_TOL && a <= -0.5 + MERGE_TOL)
        })
    }

    /// Re-runs normalization; a no-op on any constructed band.
    pub fn normalized(&self) -> Result<Self> {
        Self::new(self.intervals.iter().copied())
    }

    /// Union with another band.
    pub fn union(&self, other: &BandSet) -> Self {
        let mut all = self.intervals.clone();
        all.extend_from_slice(&other.intervals);
        Self { intervals: merge(all) }
    }
}

fn merge(mut pieces: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    pieces.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(pieces.len());
    for (lo, hi) in pieces {
        match out.last_mut() {
            Some(last) if lo <= last.1 + MERGE_TOL => last.1 = last.1.max(hi),
            _ => out.push((lo, hi)),
        }
    }
    out
}
