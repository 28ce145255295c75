//! End-to-end experiment execution: run chains (in parallel), derive the
//! matching closed-form stationary density, and emit the CSV / JSON / SVG
//! artifact set. All file writes happen after the chains join.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::analysis::{self, BinnedMasses, ComparisonReport};
use crate::config::{ExperimentConfig, OutputFormat};
use crate::error::{Error, Result};
use crate::estimation::HistogramDensity;
use crate::plot;
use crate::samplers::{self, Algorithm, GammaMode, StateSink};
use crate::stationary::{self, GridDensity, DEFAULT_HI, DEFAULT_LO, DEFAULT_N_POINTS};
use crate::targets::{self, TargetModel};

/// Logs a progress line every 10^6 post-burn-in steps.
struct ProgressSink {
    label: &'static str,
    seen: u64,
}

impl StateSink for ProgressSink {
    fn accept(&mut self, step: u64, _theta: &[f64]) {
        self.seen += 1;
        if self.seen % 1_000_000 == 0 {
            log::info!(
                "{}: {} steps accumulated (at step {step})",
                self.label,
                self.seen
            );
        }
    }
}

/// The closed-form stationary density predicted for this configuration,
/// with its normalization constant. Unbiased algorithms predict the target
/// itself (Z = 1).
pub fn closed_form_density(
    cfg: &ExperimentConfig,
    target: &TargetModel,
) -> Result<(f64, GridDensity)> {
    let kind = cfg.sampler_config().metric_kind();
    match cfg.algorithm {
        Algorithm::Sgld | Algorithm::SgrldExact => {
            let d =
                stationary::target_grid_density(target, DEFAULT_LO, DEFAULT_HI, DEFAULT_N_POINTS)?;
            Ok((1.0, d))
        }
        Algorithm::Psgld | Algorithm::Shampoo1d | Algorithm::Monge => {
            // The retained fraction of the correction drift determines the
            // exponent: dropping it leaves the full G^{-1} bias, the EMA
            // correction cancels a (1 - alpha) share, and the rescaled exact
            // term removes the bias entirely.
            let alpha_eff = match cfg.gamma_mode {
                GammaMode::Drop => 1.0,
                GammaMode::Ema => cfg.alpha,
                GammaMode::ExactRescaled => 0.0,
            };
            stationary::stationary_downscaled_gamma(
                target,
                &kind,
                alpha_eff,
                DEFAULT_LO,
                DEFAULT_HI,
                DEFAULT_N_POINTS,
            )
        }
        Algorithm::LimitDownscaledGamma => stationary::stationary_downscaled_gamma(
            target,
            &kind,
            cfg.alpha,
            DEFAULT_LO,
            DEFAULT_HI,
            DEFAULT_N_POINTS,
        ),
        Algorithm::AdamSgld | Algorithm::LimitAdam => stationary::stationary_adam(
            target,
            &kind,
            cfg.a,
            DEFAULT_LO,
            DEFAULT_HI,
            DEFAULT_N_POINTS,
        ),
    }
}

/// Paths produced by [`run_experiment`].
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
    pub svg: Option<PathBuf>,
    pub report: ComparisonReport,
}

fn sig9(x: f64) -> String {
    format!("{x:.8e}")
}

/// Render the density CSV (bit-exact contract: 9 significant digits, `\n`
/// line endings, fixed header).
pub fn render_csv(
    bins: &crate::estimation::BinGrid,
    target_density: &GridDensity,
    closed: &GridDensity,
    empirical: Option<&[f64]>,
) -> Result<String> {
    let mut out = String::new();
    out.push_str("bin_left,bin_right,target_density,closed_form_density,empirical_density\n");
    for i in 0..bins.n_bins {
        let left = bins.left_edge(i);
        let right = left + bins.width;
        let center = bins.center(i);
        let emp = empirical.map_or(0.0, |e| e[i]);
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            sig9(left),
            sig9(right),
            sig9(target_density.value_at(center)?),
            sig9(closed.value_at(center)?),
            sig9(emp),
        ));
    }
    Ok(out)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(contents.as_bytes())?;
    Ok(())
}

/// Run the configured experiment end to end and write the selected artifact
/// formats into `cfg.out_dir` under `<stem>.{csv,json,svg}`.
///
/// On chain divergence the partial histogram is still written alongside a
/// `<stem>.diverged` marker file, and the divergence error is returned.
pub fn run_experiment(cfg: &ExperimentConfig, stem: &str) -> Result<RunArtifacts> {
    let start = Instant::now();
    let target = targets::by_name(&cfg.target)?;
    let scfg = cfg.sampler_config();
    scfg.validate()?;
    let bins = cfg.bin_grid()?;

    let results: Vec<(HistogramDensity, Result<samplers::ChainReport>)> = (0..cfg.chains)
        .into_par_iter()
        .map(|chain_index| {
            let mut hist = HistogramDensity::new(bins.clone());
            let mut progress = ProgressSink {
                label: cfg.algorithm.name(),
                seen: 0,
            };
            let res = {
                let mut sinks: Vec<&mut dyn StateSink> = vec![&mut hist];
                if !cfg.quiet && chain_index == 0 {
                    sinks.push(&mut progress);
                }
                samplers::run_chain_indexed(&scfg, &target, chain_index, &mut sinks)
            };
            (hist, res)
        })
        .collect();

    let mut merged = HistogramDensity::new(bins.clone());
    let mut divergence: Option<Error> = None;
    for (hist, res) in results {
        merged = merged.merge(&hist)?;
        if let Err(e) = res {
            log::warn!("chain failed: {e}");
            divergence.get_or_insert(e);
        }
    }

    let (z, closed) = closed_form_density(cfg, &target)?;
    let target_density =
        stationary::target_grid_density(&target, DEFAULT_LO, DEFAULT_HI, DEFAULT_N_POINTS)?;

    let emp_density = merged.to_density().ok();
    let emp_masses = BinnedMasses::from_histogram(&merged).unwrap_or_else(|_| BinnedMasses {
        masses: vec![0.0; bins.n_bins],
        out_of_range: 1.0,
    });
    let closed_masses = analysis::bin_average(&closed, &bins)?;
    let target_masses = analysis::bin_average(&target_density, &bins)?;

    let report = ComparisonReport {
        algorithm: cfg.algorithm.name().to_string(),
        seed: cfg.seed,
        steps: cfg.steps,
        tv_emp_vs_closed: analysis::total_variation(&emp_masses, &closed_masses)?,
        tv_emp_vs_target: analysis::total_variation(&emp_masses, &target_masses)?,
        kl_emp_vs_closed: analysis::kl_divergence(&emp_masses, &closed_masses)?,
        max_bin_error: analysis::max_bin_error(&emp_masses, &closed_masses, bins.width)?,
        z_constant: z,
        wall_seconds: start.elapsed().as_secs_f64(),
    };

    fs::create_dir_all(&cfg.out_dir)?;
    let path_for = |ext: &str| cfg.out_dir.join(format!("{stem}.{ext}"));
    let mut artifacts = RunArtifacts {
        csv: None,
        json: None,
        svg: None,
        report: report.clone(),
    };

    let csv_text = render_csv(
        &bins,
        &target_density,
        &closed,
        emp_density.as_ref().map(|d| d.densities.as_slice()),
    )?;
    if cfg.formats.contains(&OutputFormat::Csv) {
        let p = path_for("csv");
        write_file(&p, &csv_text)?;
        artifacts.csv = Some(p);
    }
    if cfg.formats.contains(&OutputFormat::Json) {
        let p = path_for("json");
        let json =
            serde_json::to_string_pretty(&report).map_err(|e| Error::Numerical(e.to_string()))?;
        write_file(&p, &format!("{json}\n"))?;
        artifacts.json = Some(p);
    }
    if cfg.formats.contains(&OutputFormat::Svg) {
        let p = path_for("svg");
        let svg = plot::render_svg(&plot::parse_csv(&csv_text)?)?;
        write_file(&p, &svg)?;
        artifacts.svg = Some(p);
    }

    if let Some(e) = divergence {
        let step = match &e {
            Error::Diverged { step } => *step,
            _ => 0,
        };
        write_file(&path_for("diverged"), &format!("diverged at step {step}\n"))?;
        return Err(e);
    }
    Ok(artifacts)
}

/// Rebuild a [`ComparisonReport`] from a previously written CSV. Empirical
/// masses come from the empirical column; Z and wall time are not recoverable
/// from the CSV and are reported as NaN-free placeholders (0).
pub fn compare_from_csv(
    csv_text: &str,
    algorithm: &str,
    seed: u64,
    steps: u64,
) -> Result<ComparisonReport> {
    let table = plot::parse_csv(csv_text)?;
    let width = table.width()?;
    let to_masses = |col: &[f64]| BinnedMasses {
        masses: col.iter().map(|d| d * width).collect(),
        out_of_range: (1.0 - col.iter().map(|d| d * width).sum::<f64>()).max(0.0),
    };
    let emp = to_masses(
        table
            .empirical
            .as_deref()
            .ok_or_else(|| Error::Malformed("CSV has no empirical column".into()))?,
    );
    let closed = to_masses(&table.closed);
    let target = to_masses(&table.target);
    Ok(ComparisonReport {
        algorithm: algorithm.to_string(),
        seed,
        steps,
        tv_emp_vs_closed: analysis::total_variation(&emp, &closed)?,
        tv_emp_vs_target: analysis::total_variation(&emp, &target)?,
        kl_emp_vs_closed: analysis::kl_divergence(&emp, &closed)?,
        max_bin_error: analysis::max_bin_error(&emp, &closed, width)?,
        z_constant: 0.0,
        wall_seconds: 0.0,
    })
}
