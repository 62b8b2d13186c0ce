//! The machine-readable verification report and the file bundle a pipeline
//! run leaves behind.
//!
//! Reports are deterministic for fixed inputs and seed: maps are ordered,
//! and every derived numeric value is rounded to 10 significant digits
//! before serialization.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chrono::NaiveDate;
use serde::Serialize;

use windecc_core::verification::BootstrapSummary;

use crate::io::{self, sig10, ScenarioRecord};

/// Mean, bootstrap summary, and per-replicate means for one score kind and
/// scenario source.
#[derive(Debug, Clone, Serialize)]
pub struct ScoreBlock {
    pub mean: f64,
    pub bootstrap: BootstrapSummary,
    pub replicate_means: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct HistogramBlock {
    pub counts: Vec<usize>,
    pub flatness_index: f64,
}

/// Product-oriented CRPS with its reliability/resolution/uncertainty split.
#[derive(Debug, Clone, Serialize)]
pub struct ProductBlock {
    pub mean_crps: f64,
    pub reliability: f64,
    pub resolution: f64,
    pub uncertainty: f64,
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct SpectraBlock {
    pub frequencies: Vec<f64>,
    pub mean_amplitude: BTreeMap<String, Vec<f64>>,
}

/// Everything a pipeline run reports: scores with bootstrap distributions,
/// rank histograms, product verification, spectra and diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub method: String,
    pub seed: u64,
    pub n_members: usize,
    pub n_lead_times: usize,
    pub verification_start: String,
    pub verification_end: String,
    pub n_verification_days: usize,
    pub n_cases_scored: usize,
    pub n_cases_skipped: usize,
    pub n_emos_fallbacks: usize,
    pub stations: Vec<String>,
    /// Mean error correlation per time lag (index 0 is lag 1), averaged over
    /// all per-case estimates.
    pub error_correlation_mean_by_lag: Vec<f64>,
    /// score kind -> source -> block.
    pub scores: BTreeMap<String, BTreeMap<String, ScoreBlock>>,
    /// histogram kind -> source -> block.
    pub rank_histograms: BTreeMap<String, BTreeMap<String, HistogramBlock>>,
    /// product -> source -> block.
    pub products: BTreeMap<String, BTreeMap<String, ProductBlock>>,
    pub spectra: SpectraBlock,
}

impl VerificationReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).context("serializing report")
    }

    /// Round every derived value to 10 significant digits.
    pub fn rounded(mut self) -> Self {
        for per_source in self.scores.values_mut() {
            for block in per_source.values_mut() {
                block.mean = sig10(block.mean);
                for q in &mut block.bootstrap.quantiles {
                    *q = sig10(*q);
                }
                for m in &mut block.replicate_means {
                    *m = sig10(*m);
                }
            }
        }
        for per_source in self.rank_histograms.values_mut() {
            for block in per_source.values_mut() {
                block.flatness_index = sig10(block.flatness_index);
            }
        }
        for per_source in self.products.values_mut() {
            for block in per_source.values_mut() {
                block.mean_crps = sig10(block.mean_crps);
                block.reliability = sig10(block.reliability);
                block.resolution = sig10(block.resolution);
                block.uncertainty = sig10(block.uncertainty);
            }
        }
        for v in &mut self.error_correlation_mean_by_lag {
            *v = sig10(*v);
        }
        for amplitudes in self.spectra.mean_amplitude.values_mut() {
            for a in amplitudes {
                *a = sig10(*a);
            }
        }
        for f in &mut self.spectra.frequencies {
            *f = sig10(*f);
        }
        self
    }
}

/// Files produced by a full pipeline run, kept in memory until
/// [`write_outputs`] persists them in one step.
#[derive(Debug, Default)]
pub struct OutputBundle {
    pub report: Option<VerificationReport>,
    pub coefficients: Vec<(NaiveDate, String, u32, windecc_core::EmosCoefficients)>,
    pub quantiles: Vec<(NaiveDate, String, Vec<u32>, windecc_core::QuantileSet)>,
    pub scenarios: Vec<ScenarioRecord>,
    pub scores: Vec<(NaiveDate, String, String, String, f64)>,
    pub histograms: Vec<(String, String, Vec<usize>)>,
    pub spectra: SpectraBlock,
}

/// Persist the bundle into `dir`. On any failure the files already written
/// by this call are removed so a broken run leaves nothing behind.
pub fn write_outputs(dir: &Path, bundle: &OutputBundle) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating output directory {}", dir.display()))?;
    let mut written: Vec<PathBuf> = Vec::new();
    let result = (|| -> Result<()> {
        if let Some(report) = &bundle.report {
            let path = dir.join("report.json");
            std::fs::write(&path, report.to_json()? + "\n")
                .with_context(|| format!("writing {}", path.display()))?;
            written.push(path);
        }
        if !bundle.coefficients.is_empty() {
            let path = dir.join("coefficients.csv");
            io::write_coefficients(&path, &bundle.coefficients)?;
            written.push(path);
        }
        if !bundle.quantiles.is_empty() {
            let path = dir.join("quantiles.csv");
            io::write_quantiles(&path, &bundle.quantiles)?;
            written.push(path);
        }
        if !bundle.scenarios.is_empty() {
            let path = dir.join("scenarios.csv");
            io::write_scenarios(&path, &bundle.scenarios)?;
            written.push(path);
        }
        if !bundle.scores.is_empty() {
            let path = dir.join("scores.csv");
            io::write_scores(&path, &bundle.scores)?;
            written.push(path);
        }
        if !bundle.histograms.is_empty() {
            let path = dir.join("histograms.csv");
            io::write_histograms(&path, &bundle.histograms)?;
            written.push(path);
        }
        if !bundle.spectra.mean_amplitude.is_empty() {
            let path = dir.join("spectra.csv");
            io::write_spectra(&path, &bundle.spectra.frequencies, &bundle.spectra.mean_amplitude)?;
            written.push(path);
        }
        Ok(())
    })();
    if let Err(e) = result {
        for path in &written {
            let _ = std::fs::remove_file(path);
        }
        return Err(e);
    }
    Ok(written)
}
