//! Independent verification oracles for the test suite: Romberg quadrature
//! and analytic special-function constants. Deliberately shares no quadrature
//! code with the stationary module (different method family), so agreement
//! between the two is evidence rather than tautology.

use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMethod {
    Romberg,
    Analytic,
}

/// A verified reference value with an honest, refinement-based error bound.
#[derive(Debug, Clone, Copy)]
pub struct OracleResult {
    pub value: f64,
    pub error_bound: f64,
    pub method: OracleMethod,
}

const MAX_LEVELS: usize = 22;

/// Richardson-extrapolated trapezoid integration of `f` over `[lo, hi]`.
///
/// The reported error bound is the change in the diagonal estimate across the
/// last refinement, floored at machine scale.
pub fn romberg_integrate<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<OracleResult> {
    if !(tol > 0.0) || !lo.is_finite() || !hi.is_finite() || !(hi > lo) {
        return Err(Error::InvalidConfig(format!(
            "romberg_integrate: bad interval [{lo}, {hi}] or tolerance {tol}"
        )));
    }
    let eval = |x: f64| -> Result<f64> {
        let y = f(x);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(Error::NonFinite("romberg integrand"))
        }
    };

    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(MAX_LEVELS);
    let mut h = hi - lo;
    rows.push(vec![0.5 * h * (eval(lo)? + eval(hi)?)]);

    for k in 1..MAX_LEVELS {
        h *= 0.5;
        // Trapezoid refinement: reuse previous sum, add the new midpoints.
        let n_new = 1usize << (k - 1);
        let mut mid_sum = 0.0;
        for i in 0..n_new {
            mid_sum += eval(lo + (2 * i + 1) as f64 * h)?;
        }
        let mut row = vec![0.5 * rows[k - 1][0] + h * mid_sum];
        for j in 1..=k {
            let factor = 4f64.powi(j as i32);
            let extrap = (factor * row[j - 1] - rows[k - 1][j - 1]) / (factor - 1.0);
            row.push(extrap);
        }
        let err = (row[k] - rows[k - 1][k - 1]).abs();
        let value = row[k];
        rows.push(row);
        if k >= 4 && err <= tol {
            let bound = err.max(f64::EPSILON * value.abs()).max(f64::MIN_POSITIVE);
            return Ok(OracleResult {
                value,
                error_bound: bound,
                method: OracleMethod::Romberg,
            });
        }
    }
    Err(Error::Numerical(format!(
        "romberg_integrate failed to reach tolerance {tol} within {MAX_LEVELS} refinements"
    )))
}

/// Standard normal CDF via the Abramowitz & Stegun 26.2.17 rational
/// approximation; absolute error below 7.5e-8.
pub fn normal_cdf(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.231_641_9 * z);
    let poly = t
        * (0.319_381_530
            + t * (-0.356_563_782
                + t * (1.781_477_937 + t * (-1.821_255_978 + t * 1.330_274_429))));
    let pdf = (-0.5 * z * z).exp() / (2.0 * PI).sqrt();
    let upper = pdf * poly;
    if x >= 0.0 {
        1.0 - upper
    } else {
        upper
    }
}

/// Gamma function via the Lanczos approximation (g = 7, n = 9), accurate to
/// well beyond the 4 digits the reference constants need.
pub fn gamma_fn(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Reflection formula keeps the series argument in its accurate range.
        PI / ((PI * x).sin() * gamma_fn(1.0 - x))
    } else {
        let x = x - 1.0;
        let mut acc = COEF[0];
        for (i, c) in COEF.iter().enumerate().skip(1) {
            acc += c / (x + i as f64);
        }
        let t = x + G + 0.5;
        (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * acc
    }
}

/// Reference normalization constants for the four §-style closed forms,
/// each from an analytic identity independent of the grid quadrature engine.
#[derive(Debug, Clone, Copy)]
pub struct ReferenceConstants {
    pub psgld: f64,
    pub shampoo: f64,
    pub monge: f64,
    pub adam: f64,
}

pub fn analytic_constants() -> ReferenceConstants {
    let sqrt_2pi = (2.0 * PI).sqrt();
    // E[(lambda + |x|)^0.9] at lambda = 1e-8 equals E|x|^0.9 to ~1e-8:
    // E|x|^s = (2^{s/2}/sqrt(pi)) Gamma((s+1)/2), so the reciprocal below.
    let psgld = 1.0 / ((2.0 / sqrt_2pi) * 2f64.powf(-0.05) * gamma_fn(0.95));
    // E|x| = sqrt(2/pi) gives Z = sqrt(2 pi)/2.
    let shampoo = sqrt_2pi / 2.0;
    // E[1 + x^2] = 2 exactly.
    let monge = 0.5;
    // integral of e^{-|x|} p(x) = 2 e^{1/2} (1 - Phi(1)).
    let adam = 1.0 / (2.0 * 0.5f64.exp() * (1.0 - normal_cdf(1.0)));
    ReferenceConstants {
        psgld,
        shampoo,
        monge,
        adam,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn std_normal_pdf(x: f64) -> f64 {
        (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
    }

    #[test]
    fn romberg_polynomial() {
        let r = romberg_integrate(|x| x * x, 0.0, 1.0, 1e-10).unwrap();
        assert!((r.value - 1.0 / 3.0).abs() < 1e-10);
        assert!(r.error_bound > 0.0);
        assert_eq!(r.method, OracleMethod::Romberg);
    }

    #[test]
    fn romberg_gaussian_mass() {
        let r = romberg_integrate(std_normal_pdf, -8.0, 8.0, 1e-10).unwrap();
        assert!((r.value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn romberg_shampoo_moment() {
        let r = romberg_integrate(|x| std_normal_pdf(x) * x.abs(), -8.0, 8.0, 1e-8).unwrap();
        // E|x| = sqrt(2/pi) = 0.7978845...
        assert!((r.value - 0.797_884_56).abs() < 1e-7);
        assert!((1.0 / r.value - 1.2533).abs() < 1e-4);
    }

    #[test]
    fn romberg_bad_inputs() {
        assert!(romberg_integrate(|x| x, 1.0, 0.0, 1e-8).is_err());
        assert!(romberg_integrate(|x| x, 0.0, 1.0, 0.0).is_err());
        assert!(romberg_integrate(|_| f64::NAN, 0.0, 1.0, 1e-8).is_err());
    }

    #[test]
    fn romberg_error_bound_is_honest() {
        let cases: [(fn(f64) -> f64, f64); 2] = [
            (|x| x.sin(), 1.0 - 1f64.cos()),
            (|x| (2.0 * x).exp(), (2f64.exp() - 1.0) / 2.0),
        ];
        for (f, exact) in cases {
            let r = romberg_integrate(f, 0.0, 1.0, 1e-11).unwrap();
            assert!((r.value - exact).abs() <= 10.0 * r.error_bound);
        }
    }

    #[test]
    fn normal_cdf_reference_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-7);
        assert!((normal_cdf(1.0) - 0.841_344_75).abs() < 1e-7);
        assert!((normal_cdf(-1.0) - 0.158_655_25).abs() < 1e-7);
        assert!((normal_cdf(1.96) - 0.975_002_1).abs() < 1e-7);
        assert!(normal_cdf(8.0) > 1.0 - 1e-7);
    }

    #[test]
    fn gamma_fn_reference_values() {
        assert!((gamma_fn(1.0) - 1.0).abs() < 1e-10);
        assert!((gamma_fn(5.0) - 24.0).abs() < 1e-8);
        assert!((gamma_fn(0.5) - PI.sqrt()).abs() < 1e-10);
        // Gamma(0.95) = 1.0314533...
        assert!((gamma_fn(0.95) - 1.031_453_3).abs() < 1e-6);
    }

    #[test]
    fn constants_reference_digits() {
        let c = analytic_constants();
        assert!((c.psgld - 1.2576).abs() < 5e-4, "psgld {}", c.psgld);
        assert!((c.shampoo - 1.2533).abs() < 1e-4, "shampoo {}", c.shampoo);
        assert_eq!(c.monge, 0.5);
        assert!((c.adam - 1.9111).abs() < 5e-4, "adam {}", c.adam);
    }

    #[test]
    fn constants_agree_with_romberg_of_raw_densities() {
        let c = analytic_constants();
        let checks: [(f64, Box<dyn Fn(f64) -> f64>); 4] = [
            (
                c.psgld,
                Box::new(|x| std_normal_pdf(x) * (1e-8 + x.abs()).powf(0.9)),
            ),
            (c.shampoo, Box::new(|x| std_normal_pdf(x) * x.abs())),
            (c.monge, Box::new(|x| std_normal_pdf(x) * (1.0 + x * x))),
            (c.adam, Box::new(|x| std_normal_pdf(x) * (-x.abs()).exp())),
        ];
        for (z, raw) in checks {
            // The |x| cusps slow Romberg down; 1e-6 is ample for 4-digit checks.
            let r = romberg_integrate(raw.as_ref(), -8.0, 8.0, 1e-6).unwrap();
            assert!(
                (z - 1.0 / r.value).abs() < 1e-3,
                "analytic {z} vs romberg {}",
                1.0 / r.value
            );
        }
    }
}
