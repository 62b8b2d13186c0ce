//! `windecc`: post-process ensemble wind forecasts into calibrated scenario
//! sets and verify them.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{Context, Result};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

use windecc_cli::config::{self, ConfigOverrides};
use windecc_cli::io;
use windecc_cli::pipeline::{run_spectrum, run_stages, run_verify, RunScope};
use windecc_cli::report::{write_outputs, OutputBundle};
use windecc_core::synthetic::{generate, GeneratorConfig};
use windecc_core::Provenance;

#[derive(Parser)]
#[command(
    name = "windecc",
    about = "Ensemble copula coupling toolkit for wind forecast scenarios",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic forecast/observation dataset.
    Synth(SynthArgs),
    /// Fit EMOS coefficients and emit calibrated quantiles.
    Calibrate(StageArgs),
    /// Calibrate and reorder quantiles into scenarios.
    Couple(CoupleArgs),
    /// Score persisted scenario files against observations.
    Verify(VerifyArgs),
    /// Mean amplitude spectra of persisted scenario files.
    Spectrum(SpectrumArgs),
    /// Full pipeline: calibrate, couple, verify, report.
    Run(RunArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value = ".")]
    output_dir: PathBuf,
    #[arg(long, default_value_t = 165)]
    days: usize,
    #[arg(long, default_value_t = 3)]
    stations: usize,
    #[arg(long, default_value_t = 21)]
    lead_times: usize,
    #[arg(long, default_value_t = 20)]
    members: usize,
    #[arg(long, default_value_t = 2.0)]
    diurnal_amplitude: f64,
    #[arg(long, default_value_t = 0.85)]
    truth_ar: f64,
    #[arg(long, default_value_t = 0.7)]
    error_ar: f64,
    #[arg(long, default_value_t = 0.4)]
    spread_factor: f64,
    #[arg(long, default_value_t = 0.5)]
    bias: f64,
    #[arg(long, default_value_t = 4)]
    clusters: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value = "2013-03-01")]
    start_date: NaiveDate,
}

#[derive(Args)]
struct StageArgs {
    #[arg(long)]
    forecasts: PathBuf,
    #[arg(long)]
    observations: PathBuf,
    #[arg(long, default_value = ".")]
    output_dir: PathBuf,
    /// Rolling training window length in days.
    #[arg(long, default_value_t = 45)]
    window_days: usize,
    /// Minimum usable pairs per lead time before the identity fallback.
    #[arg(long, default_value_t = 15)]
    min_samples: usize,
    /// Minimum overlapping pairs per error-correlation entry.
    #[arg(long, default_value_t = 15)]
    min_pairs: usize,
    /// First target date (YYYY-MM-DD).
    #[arg(long)]
    start: NaiveDate,
    /// Last target date (YYYY-MM-DD).
    #[arg(long)]
    end: NaiveDate,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct CoupleArgs {
    #[command(flatten)]
    stage: StageArgs,
    /// Coupling method: ecc, decc or climatological-template.
    #[arg(long, default_value = "decc")]
    method: Provenance,
}

#[derive(Args)]
struct VerifyArgs {
    /// Scenario CSV files (repeatable); sources come from their provenance
    /// column.
    #[arg(long, required = true)]
    scenarios: Vec<PathBuf>,
    #[arg(long)]
    observations: PathBuf,
    #[arg(long, default_value = ".")]
    output_dir: PathBuf,
    #[arg(long, default_value_t = 500)]
    replicates: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SpectrumArgs {
    /// Scenario CSV files (repeatable).
    #[arg(long, required = true)]
    scenarios: Vec<PathBuf>,
    /// Optional observations for the reference spectrum.
    #[arg(long)]
    observations: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    output_dir: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// TOML config file; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    forecasts: Option<PathBuf>,
    #[arg(long)]
    observations: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    window_days: Option<usize>,
    #[arg(long)]
    min_samples: Option<usize>,
    #[arg(long)]
    min_pairs: Option<usize>,
    #[arg(long)]
    method: Option<Provenance>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    start: Option<NaiveDate>,
    #[arg(long)]
    end: Option<NaiveDate>,
}

fn stage_config(args: &StageArgs, method: Provenance) -> config::PipelineConfig {
    config::PipelineConfig {
        forecasts: args.forecasts.clone(),
        observations: args.observations.clone(),
        output_dir: args.output_dir.clone(),
        window_length_days: args.window_days,
        min_samples: args.min_samples,
        min_pairs: args.min_pairs,
        method,
        bootstrap_replicates: windecc_core::verification::DEFAULT_REPLICATES,
        seed: args.seed,
        verification_start: args.start,
        verification_end: args.end,
    }
}

fn read_scenario_files(paths: &[PathBuf]) -> Result<Vec<io::ScenarioRecord>> {
    let mut records = Vec::new();
    for path in paths {
        records.extend(io::read_scenarios(path)?);
    }
    Ok(records)
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Synth(args) => synth(args),
        Command::Calibrate(args) => calibrate(args),
        Command::Couple(args) => couple(args),
        Command::Verify(args) => verify(args),
        Command::Spectrum(args) => spectrum(args),
        Command::Run(args) => run(args),
    }
}

fn synth(args: SynthArgs) -> Result<()> {
    let config = GeneratorConfig {
        days: args.days,
        stations: args.stations,
        lead_times: args.lead_times,
        members: args.members,
        diurnal_amplitude: args.diurnal_amplitude,
        truth_ar: args.truth_ar,
        error_ar: args.error_ar,
        spread_factor: args.spread_factor,
        bias: args.bias,
        clusters: args.clusters,
        seed: args.seed,
        start_date: args.start_date,
    };
    let data = generate(&config)?;
    std::fs::create_dir_all(&args.output_dir)?;
    let forecasts_path = args.output_dir.join("forecasts.csv");
    let observations_path = args.output_dir.join("observations.csv");
    io::write_forecasts(&forecasts_path, &data.forecasts)?;
    io::write_observations(&observations_path, &data.observations)?;
    println!(
        "wrote {} forecasts to {} and {} observation series to {}",
        data.forecasts.len(),
        forecasts_path.display(),
        data.observations.len(),
        observations_path.display()
    );
    Ok(())
}

fn calibrate(args: StageArgs) -> Result<()> {
    let config = stage_config(&args, Provenance::Decc);
    let bundle = run_stages(&config, RunScope::Calibrate)?;
    let written = write_outputs(&config.output_dir, &bundle)?;
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn couple(args: CoupleArgs) -> Result<()> {
    let config = stage_config(&args.stage, args.method);
    let bundle = run_stages(&config, RunScope::Couple)?;
    // The couple command persists scenarios; quantiles come from `calibrate`.
    let bundle = OutputBundle {
        scenarios: bundle.scenarios,
        ..Default::default()
    };
    let written = write_outputs(&config.output_dir, &bundle)?;
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn verify(args: VerifyArgs) -> Result<()> {
    let records = read_scenario_files(&args.scenarios)?;
    let lead_times = records
        .first()
        .context("no scenario records")?
        .lead_times
        .clone();
    let observations = io::read_observations(&args.observations, &lead_times)?;
    let (summary, rows, histogram_rows) =
        run_verify(&records, &observations, args.replicates, args.seed)?;
    std::fs::create_dir_all(&args.output_dir)?;
    let scores_path = args.output_dir.join("scores.csv");
    io::write_scores(&scores_path, &rows)?;
    let histograms_path = args.output_dir.join("histograms.csv");
    io::write_histograms(&histograms_path, &histogram_rows)?;
    let json_path = args.output_dir.join("bootstrap.json");
    std::fs::write(&json_path, serde_json::to_string_pretty(&summary)? + "\n")?;
    for path in [scores_path, histograms_path, json_path] {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn spectrum(args: SpectrumArgs) -> Result<()> {
    let records = read_scenario_files(&args.scenarios)?;
    let observations = match &args.observations {
        Some(path) => {
            let lead_times = records
                .first()
                .context("no scenario records")?
                .lead_times
                .clone();
            Some(io::read_observations(path, &lead_times)?)
        }
        None => None,
    };
    let block = run_spectrum(&records, observations.as_deref())?;
    std::fs::create_dir_all(&args.output_dir)?;
    let path = args.output_dir.join("spectra.csv");
    io::write_spectra(&path, &block.frequencies, &block.mean_amplitude)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn run(args: RunArgs) -> Result<()> {
    let overrides = ConfigOverrides {
        forecasts: args.forecasts,
        observations: args.observations,
        output_dir: args.output_dir,
        window_length_days: args.window_days,
        min_samples: args.min_samples,
        min_pairs: args.min_pairs,
        method: args.method,
        bootstrap_replicates: args.replicates,
        seed: args.seed,
        verification_start: args.start,
        verification_end: args.end,
    };
    let config = config::load(args.config.as_deref(), &overrides)?;
    let bundle = windecc_cli::pipeline::run_pipeline(&config)?;
    let written = write_outputs(&config.output_dir, &bundle)?;
    if let Some(report) = &bundle.report {
        let mut means: BTreeMap<&str, String> = BTreeMap::new();
        for (kind, per_source) in &report.scores {
            let line = per_source
                .iter()
                .map(|(source, block)| format!("{source}={}", block.mean))
                .collect::<Vec<_>>()
                .join(" ");
            means.insert(kind, line);
        }
        println!(
            "scored {} cases over {} days ({} skipped)",
            report.n_cases_scored, report.n_verification_days, report.n_cases_skipped
        );
        for (kind, line) in means {
            println!("  {kind}: {line}");
        }
    }
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}
