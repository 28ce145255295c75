//! Experiment-runner CLI. Exit codes: 0 success, 1 validation error,
//! 2 chain divergence, 3 I/O error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use adaptive_langevin::config::{self, ConfigOverlay, OUT_DIR_ENV, PRESET_NAMES};
use adaptive_langevin::error::{Error, Result};
use adaptive_langevin::{oracles, plot, runner, stationary, targets};

#[derive(Parser)]
#[command(
    name = "langevin",
    about = "Adaptive-step-size Langevin samplers and their stationary densities",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run chains, compare against the closed-form density, emit artifacts.
    Simulate(ExperimentArgs),
    /// Compute closed-form stationary densities only.
    ClosedForm(ClosedFormArgs),
    /// Recompute a comparison report from an existing CSV.
    Compare(CompareArgs),
    /// Render an SVG overlay from a density CSV.
    Plot(PlotArgs),
    /// List the named experiment presets.
    Presets,
}

#[derive(Args, Default)]
struct ExperimentArgs {
    /// Named preset providing baseline settings.
    #[arg(long)]
    preset: Option<String>,
    /// Key = value configuration file (overrides the preset).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    algorithm: Option<String>,
    #[arg(long)]
    target: Option<String>,
    /// Steps per chain (scientific notation accepted, e.g. 1e7).
    #[arg(long)]
    steps: Option<String>,
    #[arg(long)]
    step_size: Option<String>,
    #[arg(long)]
    burn_in: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    chains: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    /// Monge curvature hyperparameter (beta squared).
    #[arg(long)]
    beta2: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    /// Adam SGLD drift coefficient.
    #[arg(long)]
    a: Option<String>,
    /// Correction-term handling: drop, ema, or exact-rescaled.
    #[arg(long)]
    gamma_mode: Option<String>,
    /// Histogram bin width.
    #[arg(long)]
    bins: Option<String>,
    /// Histogram range as lo,hi.
    #[arg(long)]
    range: Option<String>,
    /// Initial parameter value.
    #[arg(long)]
    theta0: Option<String>,
    /// Output directory (defaults to $LANGEVIN_OUT_DIR, then `.`).
    #[arg(long)]
    out: Option<String>,
    /// Comma-separated subset of csv,json,svg.
    #[arg(long)]
    format: Option<String>,
    /// Suppress progress reporting.
    #[arg(long)]
    quiet: bool,
}

impl ExperimentArgs {
    fn overlay(&self) -> Result<ConfigOverlay> {
        let mut merged = match &self.preset {
            Some(name) => config::preset(name)?,
            None => ConfigOverlay::default(),
        };
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)?;
            merged = merged.merged_with(&config::parse_config_text(&text)?);
        }
        let mut flags = ConfigOverlay::default();
        let pairs: [(&str, &Option<String>); 17] = [
            ("algorithm", &self.algorithm),
            ("target", &self.target),
            ("steps", &self.steps),
            ("step_size", &self.step_size),
            ("burn_in", &self.burn_in),
            ("seed", &self.seed),
            ("chains", &self.chains),
            ("alpha", &self.alpha),
            ("beta", &self.beta),
            ("beta2", &self.beta2),
            ("lambda", &self.lambda),
            ("a", &self.a),
            ("gamma_mode", &self.gamma_mode),
            ("bins", &self.bins),
            ("range", &self.range),
            ("theta0", &self.theta0),
            ("out", &self.out),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                config::apply_key(&mut flags, key, v)?;
            }
        }
        if let Some(v) = &self.format {
            config::apply_key(&mut flags, "format", v)?;
        }
        if self.quiet {
            config::apply_key(&mut flags, "quiet", "true")?;
        }
        Ok(merged.merged_with(&flags))
    }

    fn stem(&self) -> Option<String> {
        self.preset.clone()
    }
}

#[derive(Args)]
struct ClosedFormArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// Check the four reference normalization constants against the
    /// independent oracles and exit nonzero on disagreement.
    #[arg(long)]
    verify: bool,
}

#[derive(Args)]
struct CompareArgs {
    /// Density CSV produced by `simulate`.
    #[arg(long)]
    csv: PathBuf,
    /// Algorithm label for the report metadata.
    #[arg(long, default_value = "unknown")]
    algorithm: String,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    steps: u64,
}

#[derive(Args)]
struct PlotArgs {
    /// Density CSV produced by `simulate`.
    #[arg(long)]
    csv: PathBuf,
    /// Output SVG path (defaults to the CSV path with an .svg extension).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_simulate(args: &ExperimentArgs) -> Result<()> {
    let cfg = config::resolve(&args.overlay()?)?;
    let stem = args
        .stem()
        .unwrap_or_else(|| cfg.algorithm.name().to_string());
    let artifacts = runner::run_experiment(&cfg, &stem)?;
    if !cfg.quiet {
        println!(
            "{}: tv_emp_vs_closed = {:.4}, tv_emp_vs_target = {:.4}, z = {:.4}",
            artifacts.report.algorithm,
            artifacts.report.tv_emp_vs_closed,
            artifacts.report.tv_emp_vs_target,
            artifacts.report.z_constant
        );
        for p in [&artifacts.csv, &artifacts.json, &artifacts.svg]
            .into_iter()
            .flatten()
        {
            println!("wrote {}", p.display());
        }
    }
    Ok(())
}

fn verify_constants() -> Result<()> {
    let reference = oracles::analytic_constants();
    let checks: [(&str, f64); 4] = [
        ("figure1-psgld", reference.psgld),
        ("figure1-shampoo", reference.shampoo),
        ("figure1-monge", reference.monge),
        ("figure1-adamsgld", reference.adam),
    ];
    let mut ok = true;
    for (preset_name, oracle_z) in checks {
        let cfg = config::resolve(&config::preset(preset_name)?)?;
        let target = targets::by_name(&cfg.target)?;
        let (z, _) = runner::closed_form_density(&cfg, &target)?;
        let pass = (z - oracle_z).abs() < 5e-3;
        ok &= pass;
        println!(
            "{preset_name}: quadrature Z = {z:.5}, oracle Z = {oracle_z:.5} [{}]",
            if pass { "ok" } else { "MISMATCH" }
        );
    }
    if ok {
        Ok(())
    } else {
        Err(Error::Numerical(
            "normalization constants disagree with oracles".into(),
        ))
    }
}

fn cmd_closed_form(args: &ClosedFormArgs) -> Result<()> {
    if args.verify {
        return verify_constants();
    }
    let cfg = config::resolve(&args.experiment.overlay()?)?;
    let target = targets::by_name(&cfg.target)?;
    let (z, closed) = runner::closed_form_density(&cfg, &target)?;
    let bins = cfg.bin_grid()?;
    let target_density = stationary::target_grid_density(
        &target,
        stationary::DEFAULT_LO,
        stationary::DEFAULT_HI,
        stationary::DEFAULT_N_POINTS,
    )?;
    let mut csv = String::from("bin_left,bin_right,target_density,closed_form_density\n");
    for i in 0..bins.n_bins {
        let left = bins.left_edge(i);
        let center = bins.center(i);
        csv.push_str(&format!(
            "{:.8e},{:.8e},{:.8e},{:.8e}\n",
            left,
            left + bins.width,
            target_density.value_at(center)?,
            closed.value_at(center)?,
        ));
    }
    std::fs::create_dir_all(&cfg.out_dir)?;
    let stem = args
        .experiment
        .stem()
        .unwrap_or_else(|| cfg.algorithm.name().to_string());
    let path = cfg.out_dir.join(format!("{stem}-closed.csv"));
    std::fs::write(&path, csv)?;
    println!("{}: Z = {z:.6}", cfg.algorithm.name());
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_compare(args: &CompareArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.csv)?;
    let report = runner::compare_from_csv(&text, &args.algorithm, args.seed, args.steps)?;
    let json =
        serde_json::to_string_pretty(&report).map_err(|e| Error::Numerical(e.to_string()))?;
    println!("{json}");
    Ok(())
}

fn cmd_plot(args: &PlotArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.csv)?;
    let svg = plot::render_svg(&plot::parse_csv(&text)?)?;
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| args.csv.with_extension("svg"));
    std::fs::write(&out, svg)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::ClosedForm(args) => cmd_closed_form(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Plot(args) => cmd_plot(args),
        Command::Presets => {
            for name in PRESET_NAMES {
                println!("{name}");
            }
            println!("(default output directory: ${OUT_DIR_ENV} or the working directory)");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap's own exit code for usage errors is 2, which this tool
            // reserves for chain divergence; report usage problems as 1.
            if e.use_stderr() {
                eprintln!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
