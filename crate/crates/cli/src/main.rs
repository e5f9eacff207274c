//! Command-line harness for the bandit simulation library.
//!
//! Four subcommands cover the experiment workflow end to end:
//! `derive-params` computes the policy inputs (M, B*) for a structural
//! family, `gen-env` draws a random environment from one, `validate-env`
//! checks the drift and significance assumptions mechanically, and
//! `run` plays a seeded policy batch from a JSON config and emits
//! CSV / JSON / SVG reports.
//!
//! Exit code 0 means success; 2 means bad input or a failed validation.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use banditsim_core::harness::write_atomic;
use banditsim_core::{
    minimal_significant_partition, params_case_a, params_case_b, params_case_c, params_case_d,
    run_experiment, validate_assumptions, ChannelConfig, EnvSource, EnvironmentSpec,
    GeneratorRecipe, HolderConfig, InflexionConfig, LocalPolyConfig, NoiseModel, ObservationMode,
    PartitionReport, Result, RunConfig, RunReport, SwitchingConfig,
};

#[derive(Parser)]
#[command(
    name = "banditsim",
    version,
    about = "Non-stationary bandit experiment harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Play a seeded experiment batch described by a JSON config file.
    Run(RunArgs),
    /// Derive the policy inputs (segment budget M, drift tolerance B*)
    /// for a structural family.
    DeriveParams(DeriveArgs),
    /// Draw a random environment from a structural family.
    GenEnv(GenArgs),
    /// Check the drift and significance assumptions of an environment.
    ValidateEnv(ValidateArgs),
}

/// Structural families, by case label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Case {
    /// Piecewise-constant means with abrupt switches.
    A,
    /// Piecewise-polynomial means of bounded degree and coefficient norm.
    B,
    /// Holder-smooth means with an exponent in (0, 1].
    C,
    /// Piecewise-monotone means with a drift bound.
    D,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Write per-seed regret trajectories as CSV (overrides the config).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write the full report as JSON (overrides the config).
    #[arg(long)]
    json: Option<PathBuf>,
    /// Write a regret plot as SVG (overrides the config).
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(clap::Args)]
struct DeriveArgs {
    /// Structural family.
    #[arg(long, value_enum)]
    case: Case,
    /// Number of arms (cases b, c, d).
    #[arg(long)]
    arms: Option<usize>,
    /// Horizon in time steps (cases b, c, d).
    #[arg(long)]
    horizon: Option<u64>,
    /// Total number of mean switches (case a).
    #[arg(long)]
    segments: Option<u64>,
    /// Pieces per arm (cases b, c).
    #[arg(long)]
    pieces: Option<u64>,
    /// Maximum polynomial degree (case b).
    #[arg(long)]
    degree: Option<u32>,
    /// Coefficient norm bound (case b).
    #[arg(long)]
    coeff_norm: Option<f64>,
    /// Smoothness exponent in (0, 1] (case c).
    #[arg(long)]
    alpha: Option<f64>,
    /// Monotone direction changes per arm (case d).
    #[arg(long)]
    inflexions: Option<u64>,
    /// Known drift tolerance B* (case d).
    #[arg(long)]
    drift: Option<f64>,
}

#[derive(clap::Args)]
struct GenArgs {
    /// Structural family.
    #[arg(long, value_enum)]
    case: Case,
    /// Number of arms.
    #[arg(long)]
    arms: usize,
    /// Horizon in time steps.
    #[arg(long)]
    horizon: u64,
    /// Generator seed; equal seeds reproduce equal environments.
    #[arg(long)]
    seed: u64,
    /// Number of switching segments (case a).
    #[arg(long)]
    segments: Option<u64>,
    /// Smallest suboptimality gap a segment may use (case a).
    #[arg(long, default_value_t = 0.1)]
    gap_lo: f64,
    /// Largest suboptimality gap a segment may use (case a).
    #[arg(long, default_value_t = 0.6)]
    gap_hi: f64,
    /// Pieces per arm (cases b, c).
    #[arg(long)]
    pieces: Option<u64>,
    /// Maximum polynomial degree (case b).
    #[arg(long)]
    degree: Option<u32>,
    /// Coefficient norm bound (case b).
    #[arg(long)]
    coeff_norm: Option<f64>,
    /// Smoothness exponent in (0, 1] (case c).
    #[arg(long)]
    alpha: Option<f64>,
    /// Monotone direction changes per arm (case d).
    #[arg(long)]
    inflexions: Option<u64>,
    /// Drift tolerance the means must respect (case d).
    #[arg(long)]
    drift: Option<f64>,
    /// Observation noise: none, bernoulli, or gaussian:SIGMA.
    #[arg(long, default_value = "bernoulli", value_parser = parse_noise)]
    noise: NoiseModel,
    /// What a pull reveals: the arm's reward or its negated gap.
    #[arg(long, value_enum, default_value_t = ModeArg::Mean)]
    mode: ModeArg,
    /// Output file; prints to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Mean,
    Gap,
}

impl From<ModeArg> for ObservationMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Mean => ObservationMode::Mean,
            ModeArg::Gap => ObservationMode::Gap,
        }
    }
}

fn parse_noise(s: &str) -> std::result::Result<NoiseModel, String> {
    match s {
        "none" => Ok(NoiseModel::None),
        "bernoulli" => Ok(NoiseModel::Bernoulli),
        _ => match s.strip_prefix("gaussian:") {
            Some(sig) => {
                let sigma: f64 = sig.parse().map_err(|_| format!("bad sigma in {s:?}"))?;
                Ok(NoiseModel::TruncatedGaussian { sigma })
            }
            None => Err(format!(
                "unknown noise {s:?}; expected none, bernoulli, or gaussian:SIGMA"
            )),
        },
    }
}

#[derive(clap::Args)]
struct ValidateArgs {
    /// Environment spec (JSON file).
    #[arg(long)]
    spec: PathBuf,
    /// Drift tolerance B* to check the assumptions against.
    #[arg(long)]
    bstar: f64,
    /// Check this explicit partition (comma-separated interval start
    /// steps) instead of searching for a minimal one.
    #[arg(long, value_delimiter = ',')]
    starts: Option<Vec<u64>>,
    /// Print the full evidence report as JSON.
    #[arg(long)]
    partition: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::DeriveParams(args) => cmd_derive(args),
        Command::GenEnv(args) => cmd_gen(args),
        Command::ValidateEnv(args) => cmd_validate(args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| banditsim_core::Error::File {
        path: path.to_path_buf(),
        source,
    })
}

fn cmd_run(args: RunArgs) -> Result<ExitCode> {
    let mut config: RunConfig = serde_json::from_str(&read_file(&args.config)?)?;
    if args.csv.is_some() {
        config.output.csv = args.csv;
    }
    if args.json.is_some() {
        config.output.json = args.json;
    }
    if args.plot.is_some() {
        config.output.plot = args.plot;
    }
    let report = run_experiment(&config)?;
    print_run_summary(&report);
    for path in [&config.output.csv, &config.output.json, &config.output.plot]
        .into_iter()
        .flatten()
    {
        println!("wrote {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn print_run_summary(report: &RunReport) {
    println!(
        "{} on K={}, T={} ({} seeds, env {:016x})",
        report.policy,
        report.arms,
        report.horizon,
        report.series.len(),
        report.env_hash
    );
    let a = &report.aggregates;
    println!(
        "final regret: mean {:.4}, median {:.4}, IQR [{:.4}, {:.4}], range [{:.4}, {:.4}]",
        a.mean_final, a.median_final, a.q1_final, a.q3_final, a.min_final, a.max_final
    );
    match a.mean_detection_delay {
        Some(delay) => println!(
            "detections: {} matched (mean delay {:.1}), {} false alarms",
            a.matched_detections, delay, a.false_alarms
        ),
        None => println!(
            "detections: {} matched, {} false alarms",
            a.matched_detections, a.false_alarms
        ),
    }
}

/// Rejects a flag that the selected family does not read, so a typo
/// cannot silently change nothing.
fn forbid<T>(case: Case, value: &Option<T>, flag: &str) -> Result<()> {
    if value.is_some() {
        return Err(banditsim_core::Error::InvalidInput(format!(
            "{flag} does not apply to case {}",
            case_name(case)
        )));
    }
    Ok(())
}

fn require<T: Copy>(case: Case, value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| {
        banditsim_core::Error::InvalidInput(format!("case {} needs {flag}", case_name(case)))
    })
}

fn case_name(case: Case) -> &'static str {
    match case {
        Case::A => "a",
        Case::B => "b",
        Case::C => "c",
        Case::D => "d",
    }
}

fn cmd_derive(args: DeriveArgs) -> Result<ExitCode> {
    let case = args.case;
    let params = match case {
        Case::A => {
            for (v, f) in [
                (&args.pieces, "--pieces"),
                (&args.inflexions, "--inflexions"),
            ] {
                forbid(case, v, f)?;
            }
            forbid(case, &args.degree, "--degree")?;
            forbid(case, &args.coeff_norm, "--coeff-norm")?;
            forbid(case, &args.alpha, "--alpha")?;
            forbid(case, &args.drift, "--drift")?;
            params_case_a(require(case, args.segments, "--segments")?)?
        }
        Case::B => {
            forbid(case, &args.segments, "--segments")?;
            forbid(case, &args.alpha, "--alpha")?;
            forbid(case, &args.inflexions, "--inflexions")?;
            forbid(case, &args.drift, "--drift")?;
            params_case_b(
                require(case, args.pieces, "--pieces")?,
                require(case, args.degree, "--degree")?,
                require(case, args.coeff_norm, "--coeff-norm")?,
                require(case, args.arms, "--arms")?,
                require(case, args.horizon, "--horizon")?,
            )?
        }
        Case::C => {
            forbid(case, &args.segments, "--segments")?;
            forbid(case, &args.degree, "--degree")?;
            forbid(case, &args.coeff_norm, "--coeff-norm")?;
            forbid(case, &args.inflexions, "--inflexions")?;
            forbid(case, &args.drift, "--drift")?;
            params_case_c(
                require(case, args.pieces, "--pieces")?,
                require(case, args.alpha, "--alpha")?,
                require(case, args.arms, "--arms")?,
                require(case, args.horizon, "--horizon")?,
            )?
        }
        Case::D => {
            forbid(case, &args.segments, "--segments")?;
            forbid(case, &args.pieces, "--pieces")?;
            forbid(case, &args.degree, "--degree")?;
            forbid(case, &args.coeff_norm, "--coeff-norm")?;
            forbid(case, &args.alpha, "--alpha")?;
            params_case_d(
                require(case, args.inflexions, "--inflexions")?,
                require(case, args.drift, "--drift")?,
                require(case, args.arms, "--arms")?,
                require(case, args.horizon, "--horizon")?,
            )?
        }
    };
    println!("{}", serde_json::to_string_pretty(&params)?);
    Ok(ExitCode::SUCCESS)
}

fn cmd_gen(args: GenArgs) -> Result<ExitCode> {
    let case = args.case;
    let channel = ChannelConfig {
        noise: args.noise,
        mode: args.mode.into(),
    };
    let recipe = match case {
        Case::A => {
            forbid(case, &args.pieces, "--pieces")?;
            forbid(case, &args.degree, "--degree")?;
            forbid(case, &args.coeff_norm, "--coeff-norm")?;
            forbid(case, &args.alpha, "--alpha")?;
            forbid(case, &args.inflexions, "--inflexions")?;
            forbid(case, &args.drift, "--drift")?;
            GeneratorRecipe::Switching(SwitchingConfig {
                arms: args.arms,
                horizon: args.horizon,
                segments: require(case, args.segments, "--segments")?,
                gap_lo: args.gap_lo,
                gap_hi: args.gap_hi,
                channel,
            })
        }
        Case::B => {
            forbid(case, &args.segments, "--segments")?;
            forbid(case, &args.alpha, "--alpha")?;
            forbid(case, &args.inflexions, "--inflexions")?;
            forbid(case, &args.drift, "--drift")?;
            GeneratorRecipe::LocalPoly(LocalPolyConfig {
                arms: args.arms,
                horizon: args.horizon,
                segments_per_arm: require(case, args.pieces, "--pieces")?,
                max_degree: require(case, args.degree, "--degree")?,
                coeff_norm: require(case, args.coeff_norm, "--coeff-norm")?,
                channel,
            })
        }
        Case::C => {
            forbid(case, &args.segments, "--segments")?;
            forbid(case, &args.degree, "--degree")?;
            forbid(case, &args.coeff_norm, "--coeff-norm")?;
            forbid(case, &args.inflexions, "--inflexions")?;
            forbid(case, &args.drift, "--drift")?;
            GeneratorRecipe::Holder(HolderConfig {
                arms: args.arms,
                horizon: args.horizon,
                segments_per_arm: require(case, args.pieces, "--pieces")?,
                alpha: require(case, args.alpha, "--alpha")?,
                channel,
            })
        }
        Case::D => {
            forbid(case, &args.segments, "--segments")?;
            forbid(case, &args.pieces, "--pieces")?;
            forbid(case, &args.degree, "--degree")?;
            forbid(case, &args.coeff_norm, "--coeff-norm")?;
            forbid(case, &args.alpha, "--alpha")?;
            GeneratorRecipe::Inflexion(InflexionConfig {
                arms: args.arms,
                horizon: args.horizon,
                direction_changes: require(case, args.inflexions, "--inflexions")?,
                drift_tolerance: require(case, args.drift, "--drift")?,
                channel,
            })
        }
    };
    let env = EnvSource::Generator {
        seed: args.seed,
        recipe,
    }
    .materialize()?;
    let json = env.to_json()?;
    match args.out {
        Some(path) => {
            write_atomic(&path, &format!("{json}\n"))?;
            println!("wrote {}", path.display());
        }
        None => println!("{json}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(args: ValidateArgs) -> Result<ExitCode> {
    let env = EnvironmentSpec::from_json(&read_file(&args.spec)?)?;
    let report = match &args.starts {
        Some(starts) => validate_assumptions(&env, starts, args.bstar)?,
        None => minimal_significant_partition(&env, args.bstar)?,
    };
    if args.partition {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        print_validate_summary(&report);
    }
    if report.ok {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("validation failed");
        Ok(ExitCode::from(2))
    }
}

fn print_validate_summary(report: &PartitionReport) {
    println!(
        "{} intervals at B* = {}, significance threshold {}",
        report.interval_count(),
        report.b_star,
        report.threshold
    );
    let violations: Vec<_> = report
        .intervals
        .iter()
        .filter(|iv| !iv.ok)
        .map(|iv| iv.start)
        .collect();
    if violations.is_empty() {
        println!("all intervals conform");
    } else {
        println!(
            "{} intervals violate the structural assumptions (starting at steps {:?})",
            violations.len(),
            violations
        );
    }
}
