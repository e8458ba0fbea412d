//! Amplitude grids, the subsequence index codec and frequency/count vectors.
//!
//! A subsequence of length `L` over `A` levels is identified by a scalar index
//! `k` in `0..A^L`. Digit `j` of the tuple (position 0 is the oldest sample,
//! position `L - 1` the newest) is the base-`A` digit of weight `A^j`, so the
//! oldest sample is the least significant digit:
//!
//! ```text
//! k = d_0 + d_1 * A + ... + d_{L-1} * A^(L-1)
//! ```
//!
//! Indices and digits are zero-based throughout the API. Reports add one to
//! `k` so that printed indices run from `1` to `A^L`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest subsequence space the library will enumerate.
pub const MAX_SPACE_SIZE: usize = 100_000_000;

/// Absolute tolerance used when matching samples to grid levels.
pub const GRID_TOLERANCE: f64 = 1e-9;

/// The ordered finite set of admissible input levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeGrid {
    values: Vec<f64>,
}

impl AmplitudeGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::domain(format!(
                "an amplitude grid needs at least 2 levels, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("amplitude levels must be finite"));
        }
        if let Some(w) = values.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::domain(format!(
                "amplitude levels must be strictly increasing (levels {} and {})",
                w,
                w + 1
            )));
        }
        Ok(Self { values })
    }

    /// `levels` equally spaced values from `lo` to `hi` inclusive.
    pub fn uniform(levels: usize, lo: f64, hi: f64) -> Result<Self> {
        if levels < 2 {
            return Err(Error::domain(format!(
                "an amplitude grid needs at least 2 levels, got {levels}"
            )));
        }
        if !(lo < hi) {
            return Err(Error::domain(format!("grid bounds must satisfy lo < hi ({lo} >= {hi})")));
        }
        let step = (hi - lo) / (levels - 1) as f64;
        let mut values: Vec<f64> = (0..levels).map(|i| lo + step * i as f64).collect();
        values[levels - 1] = hi;
        Self::new(values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn level(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// Zero-based level index of `x`, if `x` lies on the grid.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let pos = self.values.partition_point(|&v| v < x);
        [pos.checked_sub(1), Some(pos)]
            .into_iter()
            .flatten()
            .filter(|&i| i < self.values.len())
            .find(|&i| (self.values[i] - x).abs() <= GRID_TOLERANCE)
    }
}

/// The `A^L` subsequences of length `L` over `A` levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubseqSpace {
    levels: usize,
    length: usize,
    size: usize,
}

impl SubseqSpace {
    pub fn new(levels: usize, length: usize) -> Result<Self> {
        if levels < 1 {
            return Err(Error::domain("level count must be at least 1"));
        }
        if length < 1 {
            return Err(Error::domain("subsequence length must be at least 1"));
        }
        let size = checked_pow(levels, length).filter(|&s| s <= MAX_SPACE_SIZE).ok_or_else(|| {
            Error::Size(format!(
                "{levels}^{length} subsequences exceeds the limit of {MAX_SPACE_SIZE}"
            ))
        })?;
        Ok(Self {
            levels,
            length,
            size,
        })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn encode(&self, digits: &[usize]) -> Result<usize> {
        if digits.len() != self.length {
            return Err(Error::domain(format!(
                "expected {} digits, got {}",
                self.length,
                digits.len()
            )));
        }
        let mut k = 0;
        for (pos, &d) in digits.iter().enumerate().rev() {
            if d >= self.levels {
                return Err(Error::domain(format!(
                    "digit {d} at position {pos} is out of range 0..{}",
                    self.levels
                )));
            }
            k = k * self.levels + d;
        }
        Ok(k)
    }

    pub fn decode(&self, k: usize) -> Result<Vec<usize>> {
        self.check_index(k)?;
        let mut rest = k;
        Ok((0..self.length)
            .map(|_| {
                let d = rest % self.levels;
                rest /= self.levels;
                d
            })
            .collect())
    }

    pub fn check_index(&self, k: usize) -> Result<()> {
        if k >= self.size {
            return Err(Error::domain(format!(
                "subsequence index {k} is out of range 0..{}",
                self.size
            )));
        }
        Ok(())
    }

    /// Amplitude tuple of subsequence `k`, oldest sample first.
    pub fn values(&self, k: usize, grid: &AmplitudeGrid) -> Result<Vec<f64>> {
        self.check_grid(grid)?;
        Ok(self.decode(k)?.into_iter().map(|d| grid.level(d)).collect())
    }

    fn check_grid(&self, grid: &AmplitudeGrid) -> Result<()> {
        if grid.len() != self.levels {
            return Err(Error::domain(format!(
                "grid has {} levels but the space uses {}",
                grid.len(),
                self.levels
            )));
        }
        Ok(())
    }
}

pub(crate) fn checked_pow(base: usize, exp: usize) -> Option<usize> {
    u32::try_from(exp).ok().and_then(|e| base.checked_pow(e))
}

/// Scalar index of a digit tuple over `levels` symbols.
pub fn encode_index(digits: &[usize], levels: usize) -> Result<usize> {
    SubseqSpace::new(levels, digits.len())?.encode(digits)
}

/// Digit tuple of index `k` in the space of length-`length` subsequences.
pub fn decode_index(k: usize, levels: usize, length: usize) -> Result<Vec<usize>> {
    SubseqSpace::new(levels, length)?.decode(k)
}

pub fn subsequence_values(k: usize, grid: &AmplitudeGrid, length: usize) -> Result<Vec<f64>> {
    SubseqSpace::new(grid.len(), length)?.values(k, grid)
}

/// Relative frequencies of the subsequences: a point on the probability simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyVector {
    weights: Vec<f64>,
}

impl FrequencyVector {
    pub const SUM_TOLERANCE: f64 = 1e-9;

    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::domain("a frequency vector cannot be empty"));
        }
        if let Some(i) = weights.iter().position(|w| !(0.0..=1.0).contains(w)) {
            return Err(Error::domain(format!(
                "frequency {} at index {i} is outside [0, 1]",
                weights[i]
            )));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::domain(format!("frequencies sum to {sum}, expected 1")));
        }
        Ok(Self { weights })
    }

    /// Rescales nonnegative weights onto the simplex.
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::domain(format!(
                "weight {} at index {i} is not a nonnegative number",
                weights[i]
            )));
        }
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Err(Error::domain("weights sum to zero"));
        }
        Ok(Self {
            weights: weights.into_iter().map(|w| w / sum).collect(),
        })
    }

    pub fn uniform(len: usize) -> Self {
        assert!(len > 0, "uniform design over an empty space");
        Self {
            weights: vec![1.0 / len as f64; len],
        }
    }

    pub fn unit(len: usize, k: usize) -> Self {
        let mut weights = vec![0.0; len];
        weights[k] = 1.0;
        Self { weights }
    }

    pub fn from_counts(counts: &CountVector) -> Result<Self> {
        let total = counts.total();
        if total == 0 {
            return Err(Error::domain("count vector has zero total"));
        }
        Ok(Self {
            weights: counts.counts().iter().map(|&c| c as f64 / total as f64).collect(),
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Indices whose weight exceeds `threshold`.
    pub fn support(&self, threshold: f64) -> Vec<usize> {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > threshold)
            .map(|(k, _)| k)
            .collect()
    }

    pub(crate) fn from_raw(weights: Vec<f64>) -> Self {
        Self { weights }
    }
}

/// Integer occurrence counts of the subsequences.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountVector {
    counts: Vec<u64>,
    total: u64,
}

impl CountVector {
    pub fn new(counts: Vec<u64>) -> Self {
        let total = counts.iter().sum();
        Self { counts, total }
    }

    pub fn zeros(len: usize) -> Self {
        Self::new(vec![0; len])
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn get(&self, k: usize) -> u64 {
        self.counts[k]
    }

    pub fn add(&mut self, k: usize, amount: u64) {
        self.counts[k] += amount;
        self.total += amount;
    }
}

/// Counts every length-`length` window of a periodic signal.
///
/// The window ending at sample `t` wraps around to the end of the signal, so a
/// signal of `N` samples contributes exactly `N` windows.
pub fn count_subsequences(
    sequence: &[f64],
    grid: &AmplitudeGrid,
    length: usize,
) -> Result<CountVector> {
    if sequence.is_empty() {
        return Err(Error::domain("cannot count subsequences of an empty signal"));
    }
    let space = SubseqSpace::new(grid.len(), length)?;
    let digits = sequence
        .iter()
        .enumerate()
        .map(|(t, &x)| {
            grid.index_of(x).ok_or_else(|| {
                Error::domain(format!("sample {t} (value {x}) is not a grid level"))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let n = digits.len();
    let a = space.levels();
    let mut counts = vec![0u64; space.size()];
    for t in 0..n {
        // window (u(t-L+1), ..., u(t)); oldest sample is least significant
        let mut k = 0;
        for back in 0..length {
            let idx = (t + n * length - back) % n;
            k = k * a + digits[idx];
        }
        counts[k] += 1;
    }
    Ok(CountVector::new(counts))
}

/// Largest-remainder apportionment of `total` samples to the design.
///
/// Every entry receives `floor(total * w)`; the remaining units go to the
/// largest fractional parts, lowest index first among equal remainders.
pub fn denormalize_round(design: &FrequencyVector, total: u64) -> CountVector {
    let scaled: Vec<f64> = design.weights().iter().map(|w| w * total as f64).collect();
    let mut counts: Vec<u64> = scaled.iter().map(|s| s.floor() as u64).collect();
    let assigned: u64 = counts.iter().sum();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    let remainder = |k: usize| scaled[k] - scaled[k].floor();
    // remainders that differ only by rounding noise count as ties
    order.sort_by(|&i, &j| {
        let (ri, rj) = (remainder(i), remainder(j));
        if (ri - rj).abs() <= 1e-9 {
            i.cmp(&j)
        } else {
            rj.total_cmp(&ri)
        }
    });
    let missing = total.saturating_sub(assigned) as usize;
    for &k in order.iter().take(missing) {
        counts[k] += 1;
    }
    CountVector::new(counts)
}

/// Rounds each scaled entry to the nearest integer; the total may drift from
/// `total`.
pub fn round_nearest(design: &FrequencyVector, total: u64) -> CountVector {
    CountVector::new(
        design
            .weights()
            .iter()
            .map(|w| (w * total as f64).round() as u64)
            .collect(),
    )
}
