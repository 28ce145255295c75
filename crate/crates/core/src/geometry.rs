//! Metrics, their exponential-moving-average smoothing, and the correction
//! drift required by metric-preconditioned Langevin diffusions.
//!
//! The correction term is `Gamma_i = sum_j dG_ij / dtheta_j`. Three readings of
//! it are exposed for 1-D targets:
//!
//! * [`gamma_exact_1d`] — the full term with the metric evaluated at its
//!   small-step fixed point `V = h(theta)`;
//! * [`gamma_ema_1d`] — its small-step limit under EMA smoothing, which is the
//!   exact term scaled by `(1 - alpha)`;
//! * [`gamma_ema_state_1d`] — the derivative taken literally through the EMA
//!   accumulator state, as update rules that smooth `h` compute it.

use crate::error::{Error, Result};
use crate::targets::TargetModel;

/// Derivative of |x| with the subgradient midpoint at the kink.
#[inline]
pub fn signum0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Which metric G is built from the smoothed statistic V.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MetricKind {
    /// `G = diag(1 / (lambda + sqrt(V)))`, V a squared-gradient statistic.
    RmsProp {
        lambda: f64,
    },
    /// `G = I - beta_sq / (1 + beta_sq ||V||^2) V V^T`, V a raw-gradient statistic.
    Monge {
        beta_sq: f64,
    },
    /// The 1-D Shampoo metric; identical to `RmsProp` with `lambda = 0`.
    Shampoo1d,
    Identity,
}

impl MetricKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            MetricKind::RmsProp { lambda } => {
                if !(lambda > 0.0) {
                    return Err(Error::InvalidConfig(
                        "RMSprop metric requires lambda > 0 (use Shampoo1d for lambda = 0)".into(),
                    ));
                }
            }
            MetricKind::Monge { beta_sq } => {
                if !(beta_sq > 0.0) {
                    return Err(Error::InvalidConfig(
                        "Monge metric requires beta_sq > 0".into(),
                    ));
                }
            }
            MetricKind::Shampoo1d | MetricKind::Identity => {}
        }
        Ok(())
    }

    /// Stability constant of the diagonal kinds (0 for Shampoo and identity).
    pub fn lambda(&self) -> f64 {
        match *self {
            MetricKind::RmsProp { lambda } => lambda,
            _ => 0.0,
        }
    }

    /// The statistic h(theta) whose EMA feeds the metric, at a 1-D point.
    pub fn h_fixed_point_1d(&self, target: &TargetModel, theta: f64) -> f64 {
        let g = target.grad_1d(theta);
        match self {
            MetricKind::RmsProp { .. } | MetricKind::Shampoo1d => g * g,
            MetricKind::Monge { .. } => g,
            MetricKind::Identity => 0.0,
        }
    }

    /// d h / d theta at a 1-D point.
    fn h_deriv_1d(&self, target: &TargetModel, theta: f64) -> f64 {
        let g = target.grad_1d(theta);
        let g2 = target.second_deriv_1d(theta);
        match self {
            MetricKind::RmsProp { .. } | MetricKind::Shampoo1d => 2.0 * g * g2,
            MetricKind::Monge { .. } => g2,
            MetricKind::Identity => 0.0,
        }
    }
}

/// EMA accumulators owned by one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct PreconditionerState {
    /// Smoothed metric statistic (squared gradients or raw gradients).
    pub v: Vec<f64>,
    /// Momentum accumulator; only driven by the Adam-style kernel.
    pub m: Vec<f64>,
    pub initialized: bool,
}

impl PreconditionerState {
    pub fn zeros(dim: usize) -> Self {
        Self {
            v: vec![0.0; dim],
            m: vec![0.0; dim],
            initialized: false,
        }
    }
}

/// `v <- alpha * v + (1 - alpha) * h`, elementwise.
pub fn ema_update(v: &mut [f64], h: &[f64], alpha: f64) -> Result<()> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::InvalidConfig(format!(
            "EMA rate alpha = {alpha} outside [0, 1)"
        )));
    }
    if v.len() != h.len() {
        return Err(Error::ShapeMismatch(format!(
            "ema_update: v has {} entries, h has {}",
            v.len(),
            h.len()
        )));
    }
    if h.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("ema_update input"));
    }
    for (vi, hi) in v.iter_mut().zip(h) {
        *vi = alpha * *vi + (1.0 - alpha) * hi;
    }
    Ok(())
}

/// A metric operator: supports `G x`, `G^{1/2} z`, and scalar evaluation in 1-D.
#[derive(Debug, Clone)]
pub enum Metric {
    Diag(Vec<f64>),
    /// `G = I - coeff v v^T` with `coeff = beta_sq / (1 + beta_sq ||v||^2)`.
    RankOne {
        v: Vec<f64>,
        beta_sq: f64,
        norm_sq: f64,
    },
    Identity(usize),
}

impl Metric {
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Metric::Diag(d) => {
                for ((o, di), xi) in out.iter_mut().zip(d).zip(x) {
                    *o = di * xi;
                }
            }
            Metric::RankOne {
                v,
                beta_sq,
                norm_sq,
            } => {
                let coeff = beta_sq / (1.0 + beta_sq * norm_sq);
                let dot: f64 = v.iter().zip(x).map(|(a, b)| a * b).sum();
                for ((o, vi), xi) in out.iter_mut().zip(v).zip(x) {
                    *o = xi - coeff * dot * vi;
                }
            }
            Metric::Identity(_) => out.copy_from_slice(x),
        }
    }

    /// `G^{1/2} z`. For the rank-one kind, `G^{1/2} = I + c v v^T / ||v||^2`
    /// with `c = 1 / sqrt(1 + beta_sq ||v||^2) - 1`.
    pub fn sqrt_apply(&self, z: &[f64], out: &mut [f64]) {
        match self {
            Metric::Diag(d) => {
                for ((o, di), zi) in out.iter_mut().zip(d).zip(z) {
                    *o = di.sqrt() * zi;
                }
            }
            Metric::RankOne {
                v,
                beta_sq,
                norm_sq,
            } => {
                if *norm_sq == 0.0 {
                    out.copy_from_slice(z);
                    return;
                }
                let c = 1.0 / (1.0 + beta_sq * norm_sq).sqrt() - 1.0;
                let dot: f64 = v.iter().zip(z).map(|(a, b)| a * b).sum();
                for ((o, vi), zi) in out.iter_mut().zip(v).zip(z) {
                    *o = zi + c * dot / norm_sq * vi;
                }
            }
            Metric::Identity(_) => out.copy_from_slice(z),
        }
    }

    /// Scalar value of G for 1-D metrics.
    pub fn scalar_1d(&self) -> f64 {
        match self {
            Metric::Diag(d) => d[0],
            Metric::RankOne {
                v,
                beta_sq,
                norm_sq,
            } => {
                let _ = v;
                1.0 - beta_sq * norm_sq / (1.0 + beta_sq * norm_sq)
            }
            Metric::Identity(_) => 1.0,
        }
    }
}

/// Build the metric operator from the (smoothed) statistic V.
pub fn metric_apply(kind: &MetricKind, v: &[f64]) -> Result<Metric> {
    match *kind {
        MetricKind::RmsProp { lambda } => {
            kind.validate()?;
            diag_from_sqrt_stat(v, lambda)
        }
        MetricKind::Shampoo1d => diag_from_sqrt_stat(v, 0.0),
        MetricKind::Monge { beta_sq } => {
            kind.validate()?;
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("Monge metric statistic"));
            }
            let norm_sq = v.iter().map(|x| x * x).sum();
            Ok(Metric::RankOne {
                v: v.to_vec(),
                beta_sq,
                norm_sq,
            })
        }
        MetricKind::Identity => Ok(Metric::Identity(v.len())),
    }
}

fn diag_from_sqrt_stat(v: &[f64], lambda: f64) -> Result<Metric> {
    let mut d = Vec::with_capacity(v.len());
    for &vi in v {
        if !(vi >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "diagonal metric statistic must be >= 0, got {vi}"
            )));
        }
        let denom = lambda + vi.sqrt();
        if denom == 0.0 {
            return Err(Error::DegenerateMetric(
                "1/(lambda + sqrt(V)) with lambda = 0 and V = 0".into(),
            ));
        }
        d.push(1.0 / denom);
    }
    Ok(Metric::Diag(d))
}

/// `G^{1/2} z` straight from the statistic.
pub fn metric_sqrt_apply(kind: &MetricKind, v: &[f64], z: &[f64]) -> Result<Vec<f64>> {
    let metric = metric_apply(kind, v)?;
    let mut out = vec![0.0; z.len()];
    metric.sqrt_apply(z, &mut out);
    Ok(out)
}

/// Scalar G(theta) for a 1-D target with V at its fixed point h(theta).
pub fn metric_scalar_fixed_1d(kind: &MetricKind, target: &TargetModel, theta: f64) -> Result<f64> {
    let g = target.grad_1d(theta);
    Ok(match *kind {
        MetricKind::RmsProp { lambda } => {
            kind.validate()?;
            1.0 / (lambda + g.abs())
        }
        MetricKind::Shampoo1d => {
            if g == 0.0 {
                return Err(Error::DegenerateMetric(format!(
                    "Shampoo metric undefined where the gradient vanishes (theta = {theta})"
                )));
            }
            1.0 / g.abs()
        }
        MetricKind::Monge { beta_sq } => {
            kind.validate()?;
            1.0 / (1.0 + beta_sq * g * g)
        }
        MetricKind::Identity => 1.0,
    })
}

/// `G(theta)^{-alpha}` at the fixed point, in a form that stays finite for the
/// Shampoo metric at gradient zeros.
pub fn metric_inv_pow_fixed_1d(
    kind: &MetricKind,
    target: &TargetModel,
    theta: f64,
    alpha: f64,
) -> Result<f64> {
    let g = target.grad_1d(theta);
    Ok(match *kind {
        MetricKind::RmsProp { lambda } => {
            kind.validate()?;
            (lambda + g.abs()).powf(alpha)
        }
        MetricKind::Shampoo1d => g.abs().powf(alpha),
        MetricKind::Monge { beta_sq } => {
            kind.validate()?;
            (1.0 + beta_sq * g * g).powf(alpha)
        }
        MetricKind::Identity => 1.0,
    })
}

/// `Gamma(theta) = dG/dtheta` for a 1-D target, metric at its fixed point.
///
/// Analytic when the target supplies a second derivative, otherwise a central
/// finite difference (step `1e-5`) through the composed map `theta -> G(h(theta))`.
pub fn gamma_exact_1d(kind: &MetricKind, target: &TargetModel, theta: f64) -> Result<f64> {
    if target.dim() != 1 {
        return Err(Error::InvalidConfig(
            "gamma_exact_1d requires a 1-D target".into(),
        ));
    }
    let g = target.grad_1d(theta);
    let g2 = target.second_deriv_1d(theta);
    match *kind {
        MetricKind::RmsProp { lambda } => {
            kind.validate()?;
            Ok(-signum0(g) * g2 / (lambda + g.abs()).powi(2))
        }
        MetricKind::Shampoo1d => {
            if g == 0.0 {
                // sign(0) = 0 keeps the term finite and odd at the kink.
                return Ok(0.0);
            }
            Ok(-signum0(g) * g2 / (g * g))
        }
        MetricKind::Monge { beta_sq } => {
            kind.validate()?;
            Ok(-2.0 * beta_sq * g * g2 / (1.0 + beta_sq * g * g).powi(2))
        }
        MetricKind::Identity => Ok(0.0),
    }
}

/// Central finite-difference Gamma through the composed map; the independent
/// path used when no second derivative is available.
pub fn gamma_fd_1d(kind: &MetricKind, target: &TargetModel, theta: f64) -> Result<f64> {
    let h = 1e-5;
    let lo = metric_scalar_fixed_1d(kind, target, theta - h)?;
    let hi = metric_scalar_fixed_1d(kind, target, theta + h)?;
    Ok((hi - lo) / (2.0 * h))
}

/// Small-step limit of the EMA-based correction term: `(1 - alpha) * Gamma(theta)`.
pub fn gamma_ema_1d(
    kind: &MetricKind,
    target: &TargetModel,
    theta: f64,
    alpha: f64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidConfig(format!(
            "alpha = {alpha} outside [0, 1]"
        )));
    }
    Ok((1.0 - alpha) * gamma_exact_1d(kind, target, theta)?)
}

/// Correction term differentiated literally through the EMA accumulator:
/// `dG(alpha v_prev + (1 - alpha) h(theta)) / dtheta = (1 - alpha) h'(theta) dG/dV`,
/// evaluated at the post-update statistic `v`.
///
/// This is what update rules that smooth h actually contribute; it converges to
/// [`gamma_ema_1d`] as the statistic reaches its fixed point.
pub fn gamma_ema_state_1d(
    kind: &MetricKind,
    target: &TargetModel,
    theta: f64,
    v: f64,
    alpha: f64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidConfig(format!(
            "alpha = {alpha} outside [0, 1]"
        )));
    }
    let dh = kind.h_deriv_1d(target, theta);
    if dh == 0.0 {
        return Ok(0.0);
    }
    let dg_dv = match *kind {
        MetricKind::RmsProp { lambda } => {
            kind.validate()?;
            let sv = v.sqrt();
            if sv == 0.0 {
                return Err(Error::DegenerateMetric(
                    "dG/dV singular at V = 0 with a nonzero statistic derivative".into(),
                ));
            }
            -1.0 / (2.0 * sv * (lambda + sv).powi(2))
        }
        MetricKind::Shampoo1d => {
            let sv = v.sqrt();
            if sv == 0.0 {
                return Err(Error::DegenerateMetric("dG/dV singular at V = 0".into()));
            }
            -1.0 / (2.0 * sv * sv * sv)
        }
        MetricKind::Monge { beta_sq } => {
            kind.validate()?;
            -2.0 * beta_sq * v / (1.0 + beta_sq * v * v).powi(2)
        }
        MetricKind::Identity => 0.0,
    };
    Ok((1.0 - alpha) * dh * dg_dv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::make_standard_normal;
    use proptest::prelude::*;
    use rand::prelude::*;
    use rand::Rng as _;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ema_update_examples() {
        let mut v = [0.0];
        ema_update(&mut v, &[4.0], 0.9).unwrap();
        assert!((v[0] - 0.4).abs() < 1e-15);

        let mut v = [1.0];
        ema_update(&mut v, &[1.0], 0.9).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-15);

        let mut v = [2.0];
        ema_update(&mut v, &[0.0], 0.5).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ema_update_rejects_bad_input() {
        let mut v = [0.0];
        assert!(ema_update(&mut v, &[f64::NAN], 0.9).is_err());
        assert!(ema_update(&mut v, &[1.0], 1.0).is_err());
        assert!(ema_update(&mut v, &[1.0, 2.0], 0.5).is_err());
    }

    #[test]
    fn ema_geometric_series_identity() {
        // After k updates with constant h: V = (1 - alpha^k) h + alpha^k V0.
        let alpha: f64 = 0.93;
        let h = 2.5;
        let v0 = -1.0;
        let mut v = [v0];
        for k in 1..=100u32 {
            ema_update(&mut v, &[h], alpha).unwrap();
            let expected = (1.0 - alpha.powi(k as i32)) * h + alpha.powi(k as i32) * v0;
            assert!((v[0] - expected).abs() < 1e-12, "k = {k}");
        }
    }

    #[test]
    fn metric_examples() {
        let m = metric_apply(&MetricKind::RmsProp { lambda: 1e-8 }, &[4.0]).unwrap();
        assert!((m.scalar_1d() - 1.0 / (1e-8 + 2.0)).abs() < 1e-15);

        let m = metric_apply(&MetricKind::Monge { beta_sq: 1.0 }, &[1.0]).unwrap();
        assert!((m.scalar_1d() - 0.5).abs() < 1e-15);

        let m = metric_apply(&MetricKind::Identity, &[123.0]).unwrap();
        assert_eq!(m.scalar_1d(), 1.0);
    }

    #[test]
    fn shampoo_degenerate_at_zero() {
        assert!(matches!(
            metric_apply(&MetricKind::Shampoo1d, &[0.0]),
            Err(crate::error::Error::DegenerateMetric(_))
        ));
    }

    #[test]
    fn shampoo_is_rmsprop_without_lambda_bitwise() {
        // Identical formula with lambda literally zero.
        for v in [0.04, 1.0, 9.0, 123.456] {
            let a = diag_from_sqrt_stat(&[v], 0.0).unwrap().scalar_1d();
            let b = metric_apply(&MetricKind::Shampoo1d, &[v])
                .unwrap()
                .scalar_1d();
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn sqrt_apply_examples() {
        let out = metric_sqrt_apply(&MetricKind::RmsProp { lambda: 2.0 }, &[4.0], &[2.0]).unwrap();
        // G = 1/(2+2) = 0.25, sqrt(G) * 2 = 1.
        assert!((out[0] - 1.0).abs() < 1e-15);

        let out = metric_sqrt_apply(&MetricKind::Monge { beta_sq: 1.0 }, &[1.0], &[1.0]).unwrap();
        assert!((out[0] - 0.5f64.sqrt()).abs() < 1e-12);

        let out = metric_sqrt_apply(&MetricKind::Identity, &[0.0], &[3.0]).unwrap();
        assert_eq!(out[0], 3.0);
    }

    #[test]
    fn monge_eigenvalue_along_v() {
        let beta_sq = 0.7;
        let v = [0.3, -1.2, 0.4];
        let metric = metric_apply(&MetricKind::Monge { beta_sq }, &v).unwrap();
        let norm_sq: f64 = v.iter().map(|x| x * x).sum();
        let mut gv = [0.0; 3];
        metric.apply(&v, &mut gv);
        let expected = 1.0 / (1.0 + beta_sq * norm_sq);
        for (gvi, vi) in gv.iter().zip(&v) {
            assert!((gvi - expected * vi).abs() < 1e-12);
        }
        // Orthogonal directions are untouched.
        let z = [1.2, 0.5, -1.35]; // z . v = 0.36 - 0.6 - 0.54 != 0; build orthogonal explicitly
        let dot: f64 = z.iter().zip(&v).map(|(a, b)| a * b).sum();
        let z_perp: Vec<f64> = z
            .iter()
            .zip(&v)
            .map(|(zi, vi)| zi - dot / norm_sq * vi)
            .collect();
        let mut gz = [0.0; 3];
        metric.apply(&z_perp, &mut gz);
        for (a, b) in gz.iter().zip(&z_perp) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn sqrt_consistency_diag((v, z) in (1usize..6).prop_flat_map(|n| (
                prop::collection::vec(1e-6f64..100.0, n),
                prop::collection::vec(-10.0f64..10.0, n),
        ))) {
            let kind = MetricKind::RmsProp { lambda: 0.37 };
            let metric = metric_apply(&kind, &v).unwrap();
            let mut half = vec![0.0; z.len()];
            metric.sqrt_apply(&z, &mut half);
            let mut twice = vec![0.0; z.len()];
            metric.sqrt_apply(&half, &mut twice);
            let mut direct = vec![0.0; z.len()];
            metric.apply(&z, &mut direct);
            let err: f64 = twice.iter().zip(&direct).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let scale: f64 = z.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1e-300);
            prop_assert!(err < 1e-10 * scale);
        }

        #[test]
        fn sqrt_consistency_monge((v, z) in (1usize..6).prop_flat_map(|n| (
                prop::collection::vec(-5.0f64..5.0, n),
                prop::collection::vec(-10.0f64..10.0, n),
            )),
            beta_sq in 0.01f64..4.0) {
            let kind = MetricKind::Monge { beta_sq };
            let metric = metric_apply(&kind, &v).unwrap();
            let mut half = vec![0.0; z.len()];
            metric.sqrt_apply(&z, &mut half);
            let mut twice = vec![0.0; z.len()];
            metric.sqrt_apply(&half, &mut twice);
            let mut direct = vec![0.0; z.len()];
            metric.apply(&z, &mut direct);
            let err: f64 = twice.iter().zip(&direct).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let scale: f64 = z.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1e-300);
            prop_assert!(err < 1e-10 * scale);
        }
    }

    #[test]
    fn gamma_exact_examples() {
        let t = make_standard_normal();
        let rms = MetricKind::RmsProp { lambda: 1e-8 };
        assert_eq!(gamma_exact_1d(&rms, &t, 0.0).unwrap(), 0.0);
        let g = gamma_exact_1d(&rms, &t, 1.0).unwrap();
        assert!((g + 1.0 / (1.0f64 + 1e-8).powi(2)).abs() < 1e-6);

        let monge = MetricKind::Monge { beta_sq: 1.0 };
        let g = gamma_exact_1d(&monge, &t, 1.0).unwrap();
        assert!((g + 0.5).abs() < 1e-12);
    }

    #[test]
    fn gamma_exact_matches_finite_differences() {
        let t = make_standard_normal();
        let kinds = [
            MetricKind::RmsProp { lambda: 0.5 },
            MetricKind::Monge { beta_sq: 1.0 },
            MetricKind::Shampoo1d,
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for kind in &kinds {
            for _ in 0..50 {
                let mut theta: f64 = rng.gen_range(-3.0..3.0);
                if theta.abs() < 0.05 {
                    theta += 0.1; // keep clear of the |theta| kink for the FD oracle
                }
                let exact = gamma_exact_1d(kind, &t, theta).unwrap();
                let fd = gamma_fd_1d(kind, &t, theta).unwrap();
                assert!(
                    (exact - fd).abs() < 1e-5 * (1.0 + exact.abs()),
                    "{kind:?} at {theta}: {exact} vs {fd}"
                );
            }
        }
    }

    #[test]
    fn gamma_ema_trivial_cases() {
        let t = make_standard_normal();
        let rms = MetricKind::RmsProp { lambda: 1e-8 };
        assert_eq!(gamma_ema_1d(&rms, &t, 1.3, 1.0).unwrap(), 0.0);
        assert_eq!(
            gamma_ema_1d(&rms, &t, 1.3, 0.0).unwrap(),
            gamma_exact_1d(&rms, &t, 1.3).unwrap()
        );
        let g = gamma_ema_1d(&rms, &t, 1.0, 0.9).unwrap();
        assert!((g + 0.1).abs() < 1e-6);
    }

    /// The scaling law: differentiating G through the EMA at its fixed point
    /// yields (1 - alpha) times the full correction term.
    #[test]
    fn ema_gamma_scaling_law() {
        let t = make_standard_normal();
        let kinds = [
            MetricKind::RmsProp { lambda: 1e-8 },
            MetricKind::RmsProp { lambda: 0.5 },
            MetricKind::Monge { beta_sq: 1.0 },
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for kind in &kinds {
            for &alpha in &[0.0, 0.5, 0.9, 0.99] {
                for _ in 0..50 {
                    let mut theta: f64 = rng.gen_range(-3.0..3.0);
                    if theta == 0.0 {
                        theta = 0.5;
                    }
                    // Independent oracle: finite differences of
                    // f(t) = G(alpha h(theta) + (1 - alpha) h(t)) at t = theta.
                    let h0 = kind.h_fixed_point_1d(&t, theta);
                    let dt = 1e-6 * (1.0 + theta.abs());
                    let eval = |tt: f64| {
                        let v = alpha * h0 + (1.0 - alpha) * kind.h_fixed_point_1d(&t, tt);
                        metric_apply(kind, &[v]).unwrap().scalar_1d()
                    };
                    let fd = (eval(theta + dt) - eval(theta - dt)) / (2.0 * dt);
                    let exact = gamma_exact_1d(kind, &t, theta).unwrap();
                    let ema = gamma_ema_1d(kind, &t, theta, alpha).unwrap();
                    assert!(
                        (ema - (1.0 - alpha) * exact).abs() <= 1e-6 * (1.0 + exact.abs()),
                        "{kind:?} alpha {alpha}"
                    );
                    assert!(
                        (fd - ema).abs() <= 2e-4 * (1.0 + exact.abs()),
                        "{kind:?} alpha {alpha} theta {theta}: fd {fd} vs ema {ema}"
                    );
                    // The state-derivative form agrees at the fixed point.
                    let state = gamma_ema_state_1d(kind, &t, theta, h0, alpha).unwrap();
                    assert!(
                        (state - ema).abs() <= 1e-9 * (1.0 + exact.abs()),
                        "{kind:?} alpha {alpha} theta {theta}: state {state} vs ema {ema}"
                    );
                }
            }
        }
    }
}
