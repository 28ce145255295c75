//! Ergodic time-average histogram estimator of the empirical stationary
//! density: the fraction of post-burn-in time a chain spends in each interval,
//! divided by the interval width.

use crate::error::{Error, Result};
use crate::samplers::StateSink;

/// Uniform half-open binning `[lo + i w, lo + (i+1) w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinGrid {
    pub lo: f64,
    pub width: f64,
    pub n_bins: usize,
}

impl BinGrid {
    pub fn new(lo: f64, hi: f64, width: f64) -> Result<Self> {
        if !(width > 0.0) || !lo.is_finite() || !hi.is_finite() || !(hi > lo) {
            return Err(Error::InvalidConfig(format!(
                "bad histogram range [{lo}, {hi}] with bin width {width}"
            )));
        }
        let n = (hi - lo) / width;
        let n_bins = n.round() as usize;
        if n_bins == 0 || (n - n_bins as f64).abs() > 1e-9 * n {
            return Err(Error::InvalidConfig(format!(
                "bin width {width} does not evenly divide [{lo}, {hi}]"
            )));
        }
        Ok(Self { lo, width, n_bins })
    }

    pub fn hi(&self) -> f64 {
        self.lo + self.n_bins as f64 * self.width
    }

    pub fn left_edge(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.width
    }

    pub fn center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.width
    }
}

/// Streaming occupancy counts with exact integer mass accounting.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramDensity {
    grid: BinGrid,
    counts: Vec<u64>,
    underflow: u64,
    overflow: u64,
    n: u64,
}

/// Per-bin density table derived from a histogram.
#[derive(Debug, Clone)]
pub struct BinnedDensity {
    pub centers: Vec<f64>,
    pub densities: Vec<f64>,
    pub in_range_mass: f64,
}

impl HistogramDensity {
    pub fn new(grid: BinGrid) -> Self {
        let counts = vec![0; grid.n_bins];
        Self {
            grid,
            counts,
            underflow: 0,
            overflow: 0,
            n: 0,
        }
    }

    pub fn grid(&self) -> &BinGrid {
        &self.grid
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn underflow(&self) -> u64 {
        self.underflow
    }

    pub fn overflow(&self) -> u64 {
        self.overflow
    }

    /// Record one sample. Interior edges belong to the right bin; `hi` itself
    /// overflows (half-open convention).
    pub fn accumulate(&mut self, x: f64) -> Result<()> {
        if !x.is_finite() {
            return Err(Error::NonFinite("histogram sample"));
        }
        self.n += 1;
        if x < self.grid.lo {
            self.underflow += 1;
        } else {
            let idx = ((x - self.grid.lo) / self.grid.width).floor() as usize;
            if idx >= self.grid.n_bins {
                self.overflow += 1;
            } else {
                self.counts[idx] += 1;
            }
        }
        Ok(())
    }

    /// Elementwise count sum; requires identical binning.
    pub fn merge(&self, other: &HistogramDensity) -> Result<HistogramDensity> {
        if self.grid != other.grid {
            return Err(Error::ShapeMismatch(format!(
                "histogram grids differ: {:?} vs {:?}",
                self.grid, other.grid
            )));
        }
        let counts = self
            .counts
            .iter()
            .zip(&other.counts)
            .map(|(a, b)| a + b)
            .collect();
        Ok(HistogramDensity {
            grid: self.grid.clone(),
            counts,
            underflow: self.underflow + other.underflow,
            overflow: self.overflow + other.overflow,
            n: self.n + other.n,
        })
    }

    /// Per-bin densities `count / (n w)` at bin centers.
    pub fn to_density(&self) -> Result<BinnedDensity> {
        if self.n == 0 {
            return Err(Error::EmptyHistogram);
        }
        let n = self.n as f64;
        let w = self.grid.width;
        let centers = (0..self.grid.n_bins).map(|i| self.grid.center(i)).collect();
        let densities = self.counts.iter().map(|c| *c as f64 / (n * w)).collect();
        let in_range = (self.n - self.underflow - self.overflow) as f64 / n;
        Ok(BinnedDensity {
            centers,
            densities,
            in_range_mass: in_range,
        })
    }

    /// Per-bin probability masses plus the out-of-range mass.
    pub fn masses(&self) -> Result<(Vec<f64>, f64)> {
        if self.n == 0 {
            return Err(Error::EmptyHistogram);
        }
        let n = self.n as f64;
        let masses = self.counts.iter().map(|c| *c as f64 / n).collect();
        Ok((masses, (self.underflow + self.overflow) as f64 / n))
    }
}

impl StateSink for HistogramDensity {
    fn accept(&mut self, _step: u64, theta: &[f64]) {
        // The chain runner already rejects non-finite states.
        let _ = self.accumulate(theta[0]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid() -> BinGrid {
        BinGrid::new(0.0, 1.0, 0.1).unwrap()
    }

    #[test]
    fn counting_example() {
        let mut h = HistogramDensity::new(grid());
        for _ in 0..100 {
            h.accumulate(0.05).unwrap();
        }
        let d = h.to_density().unwrap();
        assert!((d.densities[0] - 10.0).abs() < 1e-12);
        assert!(d.densities[1..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn edge_goes_right_and_hi_overflows() {
        let mut h = HistogramDensity::new(BinGrid::new(0.0, 1.0, 0.25).unwrap());
        h.accumulate(0.25).unwrap();
        assert_eq!(h.counts(), &[0, 1, 0, 0]);
        h.accumulate(1.0).unwrap();
        assert_eq!(h.overflow(), 1);
        h.accumulate(-0.001).unwrap();
        assert_eq!(h.underflow(), 1);
        assert_eq!(h.n(), 3);
    }

    #[test]
    fn non_finite_rejected() {
        let mut h = HistogramDensity::new(grid());
        assert!(h.accumulate(f64::NAN).is_err());
        assert!(h.accumulate(f64::INFINITY).is_err());
    }

    #[test]
    fn merge_is_identity_on_empty() {
        let mut h = HistogramDensity::new(grid());
        for x in [0.11, 0.5, 0.99, 2.0] {
            h.accumulate(x).unwrap();
        }
        let empty = HistogramDensity::new(grid());
        assert_eq!(h.merge(&empty).unwrap(), h);
    }

    #[test]
    fn merge_shape_mismatch() {
        let a = HistogramDensity::new(grid());
        let b = HistogramDensity::new(BinGrid::new(0.0, 2.0, 0.1).unwrap());
        assert!(a.merge(&b).is_err());
    }

    #[test]
    fn merge_equals_concatenated_stream() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.7919).sin() * 2.0).collect();
        let (left, right) = xs.split_at(400);
        let mut h1 = HistogramDensity::new(BinGrid::new(-2.0, 2.0, 0.1).unwrap());
        let mut h2 = HistogramDensity::new(BinGrid::new(-2.0, 2.0, 0.1).unwrap());
        let mut all = HistogramDensity::new(BinGrid::new(-2.0, 2.0, 0.1).unwrap());
        for &x in left {
            h1.accumulate(x).unwrap();
        }
        for &x in right {
            h2.accumulate(x).unwrap();
        }
        for &x in &xs {
            all.accumulate(x).unwrap();
        }
        assert_eq!(h1.merge(&h2).unwrap(), all);
    }

    #[test]
    fn uniform_counts_give_unit_density() {
        let mut h = HistogramDensity::new(BinGrid::new(0.0, 1.0, 0.25).unwrap());
        for i in 0..4 {
            h.accumulate(i as f64 * 0.25 + 0.1).unwrap();
        }
        let d = h.to_density().unwrap();
        for v in d.densities {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn mass_conservation(xs in prop::collection::vec(-6.0f64..6.0, 1..300)) {
            let mut h = HistogramDensity::new(BinGrid::new(-4.0, 4.0, 0.1).unwrap());
            for x in &xs {
                h.accumulate(*x).unwrap();
            }
            let total: u64 = h.counts().iter().sum::<u64>() + h.underflow() + h.overflow();
            prop_assert_eq!(total, h.n());
            let (masses, out) = h.masses().unwrap();
            let sum: f64 = masses.iter().sum::<f64>() + out;
            prop_assert!((sum - 1.0).abs() < 1e-12);
        }

        #[test]
        fn merge_commutes_and_associates(
            xs in prop::collection::vec(-5.0f64..5.0, 0..100),
            ys in prop::collection::vec(-5.0f64..5.0, 0..100),
            zs in prop::collection::vec(-5.0f64..5.0, 0..100),
        ) {
            let fill = |data: &[f64]| {
                let mut h = HistogramDensity::new(BinGrid::new(-4.0, 4.0, 0.5).unwrap());
                for x in data {
                    h.accumulate(*x).unwrap();
                }
                h
            };
            let (a, b, c) = (fill(&xs), fill(&ys), fill(&zs));
            prop_assert_eq!(a.merge(&b).unwrap(), b.merge(&a).unwrap());
            prop_assert_eq!(
                a.merge(&b).unwrap().merge(&c).unwrap(),
                a.merge(&b.merge(&c).unwrap()).unwrap()
            );
        }
    }
}
