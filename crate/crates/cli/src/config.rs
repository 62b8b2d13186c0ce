//! Pipeline configuration: TOML file with `[data]`, `[pipeline]` and
//! `[verification]` sections, overridable per field from the command line
//! and, for the output directory only, from `WINDECC_OUTPUT_DIR`.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use serde::Deserialize;

use windecc_core::calibration::{DEFAULT_MIN_SAMPLES, DEFAULT_WINDOW_DAYS};
use windecc_core::copula::DEFAULT_MIN_PAIRS;
use windecc_core::verification::DEFAULT_REPLICATES;
use windecc_core::Provenance;

/// Env var overriding the output directory.
pub const OUTPUT_DIR_ENV: &str = "WINDECC_OUTPUT_DIR";

/// Fully resolved pipeline configuration.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub forecasts: PathBuf,
    pub observations: PathBuf,
    pub output_dir: PathBuf,
    pub window_length_days: usize,
    pub min_samples: usize,
    pub min_pairs: usize,
    pub method: Provenance,
    pub bootstrap_replicates: usize,
    pub seed: u64,
    pub verification_start: NaiveDate,
    pub verification_end: NaiveDate,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.verification_start > self.verification_end {
            bail!(
                "verification start {} is after end {}",
                self.verification_start,
                self.verification_end
            );
        }
        if self.method == Provenance::Raw {
            bail!("coupling method must be ecc, decc or climatological-template");
        }
        if self.window_length_days == 0 {
            bail!("window length must be at least 1 day");
        }
        if self.bootstrap_replicates == 0 {
            bail!("bootstrap replicates must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    data: RawData,
    #[serde(default)]
    pipeline: RawPipeline,
    #[serde(default)]
    verification: RawVerification,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawData {
    forecasts: Option<PathBuf>,
    observations: Option<PathBuf>,
    output_dir: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPipeline {
    window_length_days: Option<usize>,
    min_samples: Option<usize>,
    min_pairs: Option<usize>,
    method: Option<String>,
    bootstrap_replicates: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVerification {
    start: Option<NaiveDate>,
    end: Option<NaiveDate>,
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Default, Clone)]
pub struct ConfigOverrides {
    pub forecasts: Option<PathBuf>,
    pub observations: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub window_length_days: Option<usize>,
    pub min_samples: Option<usize>,
    pub min_pairs: Option<usize>,
    pub method: Option<Provenance>,
    pub bootstrap_replicates: Option<usize>,
    pub seed: Option<u64>,
    pub verification_start: Option<NaiveDate>,
    pub verification_end: Option<NaiveDate>,
}

/// Load `path` (optional), apply `overrides`, then the environment, and
/// validate.
pub fn load(path: Option<&Path>, overrides: &ConfigOverrides) -> Result<PipelineConfig> {
    let raw: RawConfig = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing config {}", p.display()))?
        }
        None => RawConfig::default(),
    };

    let method = match (&overrides.method, raw.pipeline.method.as_deref()) {
        (Some(m), _) => *m,
        (None, Some(s)) => s.parse().map_err(|e| anyhow::anyhow!("{e}"))?,
        (None, None) => Provenance::Decc,
    };
    let resolve_path = |o: &Option<PathBuf>, r: Option<PathBuf>, what: &str| -> Result<PathBuf> {
        o.clone()
            .or(r)
            .with_context(|| format!("missing {what} (config file or flag)"))
    };

    let mut output_dir = overrides
        .output_dir
        .clone()
        .or(raw.data.output_dir)
        .unwrap_or_else(|| PathBuf::from("."));
    if let Ok(env_dir) = std::env::var(OUTPUT_DIR_ENV) {
        output_dir = PathBuf::from(env_dir);
    }

    let config = PipelineConfig {
        forecasts: resolve_path(&overrides.forecasts, raw.data.forecasts, "forecast CSV path")?,
        observations: resolve_path(
            &overrides.observations,
            raw.data.observations,
            "observation CSV path",
        )?,
        output_dir,
        window_length_days: overrides
            .window_length_days
            .or(raw.pipeline.window_length_days)
            .unwrap_or(DEFAULT_WINDOW_DAYS),
        min_samples: overrides
            .min_samples
            .or(raw.pipeline.min_samples)
            .unwrap_or(DEFAULT_MIN_SAMPLES),
        min_pairs: overrides
            .min_pairs
            .or(raw.pipeline.min_pairs)
            .unwrap_or(DEFAULT_MIN_PAIRS),
        method,
        bootstrap_replicates: overrides
            .bootstrap_replicates
            .or(raw.pipeline.bootstrap_replicates)
            .unwrap_or(DEFAULT_REPLICATES),
        seed: overrides.seed.or(raw.pipeline.seed).unwrap_or(0),
        verification_start: overrides
            .verification_start
            .or(raw.verification.start)
            .context("missing verification start date")?,
        verification_end: overrides
            .verification_end
            .or(raw.verification.end)
            .context("missing verification end date")?,
    };
    config.validate()?;
    Ok(config)
}
