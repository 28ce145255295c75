//! Agreement metrics between empirical histograms, closed-form stationary
//! densities, and the target posterior. All comparisons run over per-bin
//! probability masses so total variation is bounded by construction.

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::estimation::{BinGrid, HistogramDensity};
use crate::stationary::GridDensity;

/// Per-bin probability masses over a [`BinGrid`], plus the mass falling
/// outside the binned range.
#[derive(Debug, Clone)]
pub struct BinnedMasses {
    pub masses: Vec<f64>,
    pub out_of_range: f64,
}

impl BinnedMasses {
    pub fn from_histogram(hist: &HistogramDensity) -> Result<Self> {
        let (masses, out_of_range) = hist.masses()?;
        Ok(Self {
            masses,
            out_of_range,
        })
    }
}

/// Integrate a fine-grid density over each histogram bin (composite trapezoid
/// refined below the density's own grid spacing) so comparisons are
/// bin-to-bin, not point-to-bin.
pub fn bin_average(density: &GridDensity, bins: &BinGrid) -> Result<BinnedMasses> {
    if bins.lo < density.lo || bins.hi() > density.hi {
        return Err(Error::ShapeMismatch(format!(
            "density grid [{}, {}] does not cover bin range [{}, {}]",
            density.lo,
            density.hi,
            bins.lo,
            bins.hi()
        )));
    }
    let sub = (bins.width / density.spacing()).ceil().max(4.0) as usize;
    let h = bins.width / sub as f64;
    let mut masses = Vec::with_capacity(bins.n_bins);
    for i in 0..bins.n_bins {
        let left = bins.left_edge(i);
        let mut acc = 0.0;
        let mut prev = density.value_at(left)?;
        for k in 1..=sub {
            // Evaluate the right edge exactly so adjacent bins share abscissae.
            let x = if k == sub {
                left + bins.width
            } else {
                left + k as f64 * h
            };
            let cur = density.value_at(x.min(density.hi))?;
            acc += 0.5 * h * (prev + cur);
            prev = cur;
        }
        masses.push(acc);
    }
    let total: f64 = masses.iter().sum();
    let out_of_range = (1.0 - total).max(0.0);
    Ok(BinnedMasses {
        masses,
        out_of_range,
    })
}

fn check_pair(p: &BinnedMasses, q: &BinnedMasses) -> Result<()> {
    if p.masses.len() != q.masses.len() {
        return Err(Error::ShapeMismatch(format!(
            "bin counts differ: {} vs {}",
            p.masses.len(),
            q.masses.len()
        )));
    }
    let neg = p
        .masses
        .iter()
        .chain(&q.masses)
        .chain([&p.out_of_range, &q.out_of_range])
        .any(|&m| m < 0.0 || !m.is_finite());
    if neg {
        return Err(Error::InvalidConfig(
            "bin masses must be finite and nonnegative".into(),
        ));
    }
    Ok(())
}

/// Total variation distance over bin masses:
/// `(1/2) sum |p_i - q_i| + (1/2) |out-of-range difference|`.
pub fn total_variation(p: &BinnedMasses, q: &BinnedMasses) -> Result<f64> {
    check_pair(p, q)?;
    let in_range: f64 = p
        .masses
        .iter()
        .zip(&q.masses)
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok(0.5 * in_range + 0.5 * (p.out_of_range - q.out_of_range).abs())
}

/// KL divergence `sum p_i log(p_i/q_i)` in nats, with `0 log 0 = 0`.
/// Returns `f64::INFINITY` when p puts mass on a bin where q has none.
pub fn kl_divergence(p: &BinnedMasses, q: &BinnedMasses) -> Result<f64> {
    check_pair(p, q)?;
    let mut acc = 0.0;
    for (&pi, &qi) in p.masses.iter().zip(&q.masses) {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Ok(f64::INFINITY);
        }
        acc += pi * (pi / qi).ln();
    }
    Ok(acc)
}

/// Largest absolute per-bin density discrepancy (masses divided by bin width).
pub fn max_bin_error(p: &BinnedMasses, q: &BinnedMasses, bin_width: f64) -> Result<f64> {
    check_pair(p, q)?;
    Ok(p.masses
        .iter()
        .zip(&q.masses)
        .map(|(a, b)| (a - b).abs() / bin_width)
        .fold(0.0, f64::max))
}

fn serialize_kl<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str("inf")
    }
}

/// Flat experiment report; serializes to the JSON schema consumed by external
/// tooling. A non-finite KL is emitted as the string `"inf"`.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub algorithm: String,
    pub seed: u64,
    pub steps: u64,
    pub tv_emp_vs_closed: f64,
    pub tv_emp_vs_target: f64,
    #[serde(serialize_with = "serialize_kl")]
    pub kl_emp_vs_closed: f64,
    pub max_bin_error: f64,
    pub z_constant: f64,
    pub wall_seconds: f64,
}
