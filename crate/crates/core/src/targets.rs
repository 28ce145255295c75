//! Target posterior densities with analytic log-density and gradient oracles.
//!
//! A [`TargetModel`] carries `u(theta) = log p(theta | data)` up to an additive
//! constant. The built-in standard-normal benchmark target additionally knows
//! its exact normalizer so that closed-form stationary densities can be
//! normalized consistently.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

type DensityFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type GradFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;
type SecondDerivFn = dyn Fn(f64) -> f64 + Send + Sync;

/// Immutable log-posterior model; safe to share across concurrently running chains.
#[derive(Clone)]
pub struct TargetModel {
    name: String,
    dim: usize,
    has_analytic_constant: bool,
    log_density: Arc<DensityFn>,
    grad_log_density: Arc<GradFn>,
    // Second derivative of the log-density, 1-D targets only. Used by the
    // correction-term machinery; absent targets fall back to finite differences.
    second_deriv_1d: Option<Arc<SecondDerivFn>>,
}

impl fmt::Debug for TargetModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TargetModel")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("has_analytic_constant", &self.has_analytic_constant)
            .finish()
    }
}

impl TargetModel {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        has_analytic_constant: bool,
        log_density: Arc<DensityFn>,
        grad_log_density: Arc<GradFn>,
        second_deriv_1d: Option<Arc<SecondDerivFn>>,
    ) -> Self {
        Self {
            name: name.into(),
            dim,
            has_analytic_constant,
            log_density,
            grad_log_density,
            second_deriv_1d,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn has_analytic_constant(&self) -> bool {
        self.has_analytic_constant
    }

    pub fn log_density(&self, theta: &[f64]) -> f64 {
        (self.log_density)(theta)
    }

    pub fn grad_log_density(&self, theta: &[f64], out: &mut [f64]) {
        (self.grad_log_density)(theta, out)
    }

    /// Scalar gradient for 1-D targets.
    pub fn grad_1d(&self, theta: f64) -> f64 {
        let mut g = [0.0];
        self.grad_log_density(&[theta], &mut g);
        g[0]
    }

    pub fn log_density_1d(&self, theta: f64) -> f64 {
        self.log_density(&[theta])
    }

    /// Second derivative of the log-density at a 1-D point. Analytic when the
    /// target provides it, otherwise a central finite difference of the gradient.
    pub fn second_deriv_1d(&self, theta: f64) -> f64 {
        match &self.second_deriv_1d {
            Some(f) => f(theta),
            None => {
                let h = 1e-5;
                (self.grad_1d(theta + h) - self.grad_1d(theta - h)) / (2.0 * h)
            }
        }
    }

    /// Normalized density value `exp(log_density(theta))`.
    ///
    /// Requires the target to know its normalizer; rejects non-finite inputs.
    pub fn eval_density(&self, theta: &[f64]) -> Result<f64> {
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite("eval_density input"));
        }
        if !self.has_analytic_constant {
            return Err(Error::InvalidConfig(format!(
                "target '{}' has no analytic normalization constant",
                self.name
            )));
        }
        Ok(self.log_density(theta).exp())
    }

    pub fn eval_density_1d(&self, theta: f64) -> Result<f64> {
        self.eval_density(&[theta])
    }
}

/// The 1-D standard-normal benchmark target, including its `-log sqrt(2 pi)` constant.
pub fn make_standard_normal() -> TargetModel {
    const HALF_LOG_TWO_PI: f64 = 0.918_938_533_204_672_8;
    TargetModel::new(
        "std_normal",
        1,
        true,
        Arc::new(|theta: &[f64]| -0.5 * theta[0] * theta[0] - HALF_LOG_TWO_PI),
        Arc::new(|theta: &[f64], out: &mut [f64]| out[0] = -theta[0]),
        Some(Arc::new(|_| -1.0)),
    )
}

/// Look up a registered target by its config name.
pub fn by_name(name: &str) -> Result<TargetModel> {
    match name {
        "std_normal" => Ok(make_standard_normal()),
        other => Err(Error::InvalidConfig(format!("unknown target '{other}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn standard_normal_constants() {
        let t = make_standard_normal();
        assert!((t.log_density_1d(0.0) - (-0.918_938_5)).abs() < 1e-6);
        assert_eq!(t.grad_1d(0.0), 0.0);
        assert_eq!(t.grad_1d(1.5), -1.5);
    }

    #[test]
    fn eval_density_values() {
        let t = make_standard_normal();
        assert!((t.eval_density_1d(0.0).unwrap() - 0.398_942_3).abs() < 1e-6);
        assert!((t.eval_density_1d(1.0).unwrap() - 0.241_970_7).abs() < 1e-6);
        assert_eq!(
            t.eval_density_1d(1.0).unwrap(),
            t.eval_density_1d(-1.0).unwrap()
        );
    }

    #[test]
    fn eval_density_rejects_non_finite() {
        let t = make_standard_normal();
        assert!(t.eval_density(&[f64::NAN]).is_err());
        assert!(t.eval_density(&[f64::INFINITY]).is_err());
    }

    #[test]
    fn log_density_quadratic_exactly() {
        let t = make_standard_normal();
        for theta in [-3.0f64, -0.5, 0.1, 2.0] {
            let expected = -theta * theta / 2.0;
            let diff = t.log_density_1d(theta) - t.log_density_1d(0.0);
            // Subtracting the shared -log sqrt(2 pi) constant rounds once, so
            // the identity holds to the last bit but not bitwise.
            let tol = f64::EPSILON * (1.0 + expected.abs());
            assert!((diff - expected).abs() <= tol, "{diff} vs {expected}");
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let t = make_standard_normal();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = 1e-6;
        for _ in 0..100 {
            let x: f64 = rng.gen_range(-4.0..4.0);
            let fd = (t.log_density_1d(x + h) - t.log_density_1d(x - h)) / (2.0 * h);
            let g = t.grad_1d(x);
            assert!(
                (fd - g).abs() <= 1e-5 * (1.0 + g.abs()),
                "fd {fd} vs grad {g} at {x}"
            );
        }
    }

    #[test]
    fn unknown_target_name_is_an_error() {
        assert!(by_name("two_moons").is_err());
        assert!(by_name("std_normal").is_ok());
    }
}
