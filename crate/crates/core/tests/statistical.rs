//! Statistical consistency checks that need long runs: estimator noise floor,
//! multi-chain equivalence, and discrete-chain vs limiting-SDE agreement.

use adaptive_langevin::analysis::{self, BinnedMasses};
use adaptive_langevin::config;
use adaptive_langevin::estimation::{BinGrid, HistogramDensity};
use adaptive_langevin::samplers::{self, Algorithm, SamplerConfig, StateSink};
use adaptive_langevin::stationary;
use adaptive_langevin::targets::make_standard_normal;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

fn bins() -> BinGrid {
    BinGrid::new(-4.0, 4.0, 0.1).unwrap()
}

fn target_masses() -> BinnedMasses {
    let t = make_standard_normal();
    let d = stationary::target_grid_density(&t, -8.0, 8.0, 16_001).unwrap();
    analysis::bin_average(&d, &bins()).unwrap()
}

fn run_chains(cfg: &SamplerConfig, chains: u64) -> HistogramDensity {
    let t = make_standard_normal();
    let hists: Vec<HistogramDensity> = (0..chains)
        .into_par_iter()
        .map(|i| {
            let mut hist = HistogramDensity::new(bins());
            let mut sinks: Vec<&mut dyn StateSink> = vec![&mut hist];
            samplers::run_chain_indexed(cfg, &t, i, &mut sinks).unwrap();
            hist
        })
        .collect();
    let mut merged = HistogramDensity::new(bins());
    for h in hists {
        merged = merged.merge(&h).unwrap();
    }
    merged
}

fn tv_vs_target(hist: &HistogramDensity) -> f64 {
    let emp = BinnedMasses::from_histogram(hist).unwrap();
    analysis::total_variation(&emp, &target_masses()).unwrap()
}

/// Calibrates the estimator noise floor: 10^7 independent N(0,1) draws
/// (no chain autocorrelation) must land within TV 0.005 of the truth.
#[test]
fn iid_normal_noise_floor() {
    let mut hist = HistogramDensity::new(bins());
    let mut rng = ChaCha8Rng::seed_from_u64(1234);
    for _ in 0..10_000_000u64 {
        let x: f64 = rng.sample(StandardNormal);
        hist.accumulate(x).unwrap();
    }
    let tv = tv_vs_target(&hist);
    assert!(tv < 0.005, "iid TV {tv}");
}

/// k chains of N/k steps merged and one N-step chain must pass the same
/// thresholds (statistical, not bitwise, equality).
#[test]
fn multi_chain_matches_single_chain() {
    let single = SamplerConfig {
        algorithm: Algorithm::Sgld,
        steps: 8_000_000,
        burn_in: 100_000,
        ..SamplerConfig::default()
    };
    let split = SamplerConfig {
        steps: 2_000_000,
        ..single.clone()
    };

    let tv_single = tv_vs_target(&run_chains(&single, 1));
    let tv_multi = tv_vs_target(&run_chains(&split, 4));
    assert!(tv_single < 0.05, "single-chain TV {tv_single}");
    assert!(tv_multi < 0.05, "multi-chain TV {tv_multi}");
    assert!(
        (tv_single - tv_multi).abs() < 0.04,
        "single {tv_single} vs multi {tv_multi}"
    );
}

/// The discrete PSGLD chain with the correction dropped and the Euler
/// simulation of its limiting SDE (downscale coefficient 0) sample the same
/// stationary density.
#[test]
fn psgld_chain_matches_limit_sde() {
    let base = SamplerConfig {
        algorithm: Algorithm::Psgld,
        steps: 10_000_000,
        burn_in: 100_000,
        theta0: vec![1.0],
        ..SamplerConfig::default()
    };
    let limit = SamplerConfig {
        algorithm: Algorithm::LimitDownscaledGamma,
        alpha: 1.0 - 1e-12, // coefficient (1 - alpha) -> 0 drops the correction
        ..base.clone()
    };
    let tv_at = |eps: f64| {
        let chain_cfg = SamplerConfig {
            step_size: eps,
            ..base.clone()
        };
        let sde_cfg = SamplerConfig {
            step_size: eps,
            ..limit.clone()
        };
        let h_chain = run_chains(&chain_cfg, 4);
        let h_sde = run_chains(&sde_cfg, 4);
        analysis::total_variation(
            &BinnedMasses::from_histogram(&h_chain).unwrap(),
            &BinnedMasses::from_histogram(&h_sde).unwrap(),
        )
        .unwrap()
    };
    // The EMA-tracked metric deviates from its fixed point by O(sqrt(eps)),
    // so the gap shrinks with the step size.
    let tv_coarse = tv_at(1e-3);
    let tv_fine = tv_at(1e-4);
    assert!(tv_fine < 0.05, "eps 1e-4: chain-vs-limit TV {tv_fine}");
    assert!(tv_coarse < 0.12, "eps 1e-3: chain-vs-limit TV {tv_coarse}");
    assert!(
        tv_fine < tv_coarse + 0.02,
        "no convergence: fine {tv_fine} vs coarse {tv_coarse}"
    );
}

/// Spot-check that a resolved preset round-trips through the sampler config
/// unchanged (guards the preset <-> sampler plumbing used everywhere above).
#[test]
fn preset_sampler_config_roundtrip() {
    let cfg = config::resolve(&config::preset("figure1-corrected-psgld").unwrap()).unwrap();
    let scfg = cfg.sampler_config();
    assert_eq!(scfg.algorithm, Algorithm::Psgld);
    assert_eq!(scfg.lambda, 1.0);
    assert_eq!(scfg.gamma_mode, samplers::GammaMode::ExactRescaled);
    assert_eq!(scfg.steps, 10_000_000);
}
