//! Pipeline stages: ingest, daily rolling calibration, error-correlation
//! estimation, scenario coupling, multivariate and product verification,
//! bootstrap, spectra, report assembly.
//!
//! The `calibrate` and `couple` subcommands run the same per-case loop cut
//! short; `verify` and `spectrum` run the scoring tail on persisted
//! scenario files.

use std::collections::BTreeMap;

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use windecc_core::calibration::{emit_quantiles, fit_emos, TrainingCase, TrainingWindow};
use windecc_core::copula::{climatological_template, decc, ecc, estimate_error_correlation};
use windecc_core::seed::substream_seed;
use windecc_core::spectral::mean_spectrum;
use windecc_core::verification::{
    block_bootstrap, bootstrap_day_draws, crps_decomposition, crps_ensemble, energy_score,
    multivariate_rank, replicate_means, variogram_score, DayScores, PreRank,
    DEFAULT_DECOMPOSITION_BINS,
};
use windecc_core::{EnsembleForecast, ObservationSeries, Provenance, ScenarioSet, TiePolicy};

use crate::config::PipelineConfig;
use crate::io::{self, ScenarioRecord};
use crate::report::{
    HistogramBlock, OutputBundle, ProductBlock, ScoreBlock, SpectraBlock, VerificationReport,
};

/// RNG substream index for per-case coupling randomness.
const STREAM_COUPLING: u64 = 1;
/// RNG substream index for the bootstrap day draws.
const STREAM_BOOTSTRAP: u64 = 2;

/// How far through the pipeline a run goes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RunScope {
    /// Fit coefficients and emit quantiles only.
    Calibrate,
    /// Calibrate and build scenarios.
    Couple,
    /// Everything, including verification and the report.
    Full,
}

/// Per-member products derived from one scenario set.
#[derive(Debug, Clone)]
pub struct Products {
    pub daily_mean: Vec<f64>,
    pub max_upward_ramp: Vec<f64>,
}

/// Mean over the horizon of one trajectory.
pub fn series_daily_mean(series: &[f64]) -> f64 {
    series.iter().sum::<f64>() / series.len() as f64
}

/// Largest difference between consecutive values; negative for strictly
/// decreasing trajectories.
pub fn series_max_upward_ramp(series: &[f64]) -> f64 {
    series
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Daily mean and maximal upward ramp for every member of a scenario set.
pub fn derive_products(s: &ScenarioSet) -> Products {
    let members: Vec<Vec<f64>> = (0..s.n_members()).map(|i| s.member(i)).collect();
    Products {
        daily_mean: members.iter().map(|m| series_daily_mean(m)).collect(),
        max_upward_ramp: members.iter().map(|m| series_max_upward_ramp(m)).collect(),
    }
}

struct StationData {
    station_id: String,
    forecasts: BTreeMap<NaiveDate, EnsembleForecast>,
    observations: ObservationSeries,
}

fn group_by_station(
    forecasts: Vec<EnsembleForecast>,
    observations: Vec<ObservationSeries>,
) -> Result<Vec<StationData>> {
    let mut per_station: BTreeMap<String, BTreeMap<NaiveDate, EnsembleForecast>> = BTreeMap::new();
    for f in forecasts {
        per_station
            .entry(f.station_id().to_string())
            .or_default()
            .insert(f.run_date(), f);
    }
    let mut obs_by_station: BTreeMap<String, ObservationSeries> = observations
        .into_iter()
        .map(|o| (o.station_id().to_string(), o))
        .collect();
    let mut out = Vec::with_capacity(per_station.len());
    for (station_id, forecasts) in per_station {
        let observations = obs_by_station
            .remove(&station_id)
            .with_context(|| format!("no observations for station {station_id}"))?;
        out.push(StationData {
            station_id,
            forecasts,
            observations,
        });
    }
    Ok(out)
}

fn training_window(
    station: &StationData,
    target: NaiveDate,
    window_length_days: usize,
    n_lead_times: usize,
) -> Result<TrainingWindow> {
    let earliest = target - chrono::Duration::days(window_length_days as i64);
    let cases: Vec<TrainingCase> = station
        .forecasts
        .range(earliest..target)
        .filter_map(|(_, f)| TrainingCase::from_forecast(f, &station.observations))
        .collect();
    Ok(TrainingWindow::new(
        target,
        window_length_days,
        n_lead_times,
        cases,
    )?)
}

/// Historical observation trajectories available to a climatological
/// template: the training-window span of the station's observations.
fn window_history(
    station: &StationData,
    target: NaiveDate,
    window_length_days: usize,
) -> Result<ObservationSeries> {
    let earliest = target - chrono::Duration::days(window_length_days as i64);
    let mut history = ObservationSeries::new(
        station.station_id.clone(),
        station.observations.lead_times().to_vec(),
    );
    for date in station.observations.dates().collect::<Vec<_>>() {
        if date >= earliest && date < target {
            if let Some(values) = station.observations.get(date) {
                history.insert(date, values.to_vec())?;
            }
        }
    }
    Ok(history)
}

type ScoreRow = (NaiveDate, String, String, String, f64);

/// Accumulates per-case verification results across the run.
#[derive(Default)]
struct VerificationAccumulator {
    /// kind -> source -> date -> values across stations.
    table: BTreeMap<String, BTreeMap<String, BTreeMap<NaiveDate, Vec<f64>>>>,
    rows: Vec<ScoreRow>,
    histograms: BTreeMap<(String, String), Vec<usize>>,
    product_cases: BTreeMap<(String, String), Vec<(Vec<f64>, f64)>>,
    spectra_series: BTreeMap<String, Vec<Vec<f64>>>,
}

impl VerificationAccumulator {
    fn push_score(&mut self, kind: &str, source: &str, date: NaiveDate, station: &str, value: f64) {
        self.table
            .entry(kind.to_string())
            .or_default()
            .entry(source.to_string())
            .or_default()
            .entry(date)
            .or_default()
            .push(value);
        self.rows.push((
            date,
            station.to_string(),
            kind.to_string(),
            source.to_string(),
            value,
        ));
    }

    /// Score one (case, source) pair: multivariate scores, rank histograms,
    /// product CRPS, spectra input.
    fn score_case(
        &mut self,
        date: NaiveDate,
        station: &str,
        source: &str,
        scenarios: &ScenarioSet,
        obs_today: &[f64],
        rng: &mut impl Rng,
    ) -> Result<()> {
        let values = scenarios.values();
        let es = energy_score(values, obs_today)?;
        let pvs_half = variogram_score(values, obs_today, 0.5)?;
        let pvs_one = variogram_score(values, obs_today, 1.0)?;
        for (kind, value) in [("es", es), ("pvs_0.5", pvs_half), ("pvs_1", pvs_one)] {
            self.push_score(kind, source, date, station, value);
        }

        let bins = scenarios.n_members() + 1;
        let arh = multivariate_rank(values, obs_today, PreRank::AverageRank, TiePolicy::Random, rng)?;
        let bdrh = multivariate_rank(values, obs_today, PreRank::BandDepth, TiePolicy::Random, rng)?;
        for (kind, rank) in [("average_rank", arh), ("band_depth", bdrh)] {
            self.histograms
                .entry((kind.to_string(), source.to_string()))
                .or_insert_with(|| vec![0; bins])[rank - 1] += 1;
            self.rows.push((
                date,
                station.to_string(),
                format!("{kind}_rank"),
                source.to_string(),
                rank as f64,
            ));
        }

        let products = derive_products(scenarios);
        let obs_mean = series_daily_mean(obs_today);
        let obs_ramp = series_max_upward_ramp(obs_today);
        for (kind, product, members, observed) in [
            ("crps_daily_mean", "daily_mean", &products.daily_mean, obs_mean),
            (
                "crps_max_upward_ramp",
                "max_upward_ramp",
                &products.max_upward_ramp,
                obs_ramp,
            ),
        ] {
            let crps = crps_ensemble(members, observed)?;
            self.push_score(kind, source, date, station, crps);
            self.product_cases
                .entry((product.to_string(), source.to_string()))
                .or_default()
                .push((members.clone(), observed));
        }

        let store = self.spectra_series.entry(source.to_string()).or_default();
        for i in 0..scenarios.n_members() {
            store.push(scenarios.member(i));
        }
        Ok(())
    }

    fn record_observation_spectrum(&mut self, obs_today: Vec<f64>) {
        self.spectra_series.entry("obs".into()).or_default().push(obs_today);
    }

    fn day_scores(&self, kind: &str, source: &str) -> Vec<DayScores> {
        self.table[kind][source]
            .iter()
            .map(|(day, values)| DayScores {
                day: *day,
                values: values.clone(),
            })
            .collect()
    }

    /// Bootstrap every (kind, source) with shared day draws, decompose the
    /// product CRPS, and assemble the report maps.
    fn aggregate(
        &self,
        replicates: usize,
        bootstrap_seed: u64,
    ) -> Result<(
        BTreeMap<String, BTreeMap<String, ScoreBlock>>,
        BTreeMap<String, BTreeMap<String, HistogramBlock>>,
        BTreeMap<String, BTreeMap<String, ProductBlock>>,
        SpectraBlock,
    )> {
        let mut score_blocks: BTreeMap<String, BTreeMap<String, ScoreBlock>> = BTreeMap::new();
        for (kind, per_source) in &self.table {
            for source in per_source.keys() {
                let days = self.day_scores(kind, source);
                let total: f64 = days.iter().flat_map(|d| d.values.iter()).sum();
                let count: usize = days.iter().map(|d| d.values.len()).sum();
                let summary = block_bootstrap(&days, replicates, bootstrap_seed)
                    .context("stage bootstrap")?;
                let draws = bootstrap_day_draws(days.len(), replicates, bootstrap_seed);
                score_blocks.entry(kind.clone()).or_default().insert(
                    source.clone(),
                    ScoreBlock {
                        mean: total / count as f64,
                        bootstrap: summary,
                        replicate_means: replicate_means(&days, &draws),
                    },
                );
            }
        }

        let mut histogram_blocks: BTreeMap<String, BTreeMap<String, HistogramBlock>> =
            BTreeMap::new();
        for ((kind, source), counts) in &self.histograms {
            let total: usize = counts.iter().sum();
            let k = counts.len() as f64;
            let flatness = counts
                .iter()
                .map(|&c| (c as f64 / total as f64 - 1.0 / k).abs())
                .sum();
            histogram_blocks.entry(kind.clone()).or_default().insert(
                source.clone(),
                HistogramBlock {
                    counts: counts.clone(),
                    flatness_index: flatness,
                },
            );
        }

        let mut product_blocks: BTreeMap<String, BTreeMap<String, ProductBlock>> = BTreeMap::new();
        for ((product, source), cases) in &self.product_cases {
            let decomposition = crps_decomposition(cases, DEFAULT_DECOMPOSITION_BINS)
                .context("stage product-verification")?;
            let kind = format!("crps_{product}");
            let mean_crps = score_blocks[&kind][source].mean;
            product_blocks.entry(product.clone()).or_default().insert(
                source.clone(),
                ProductBlock {
                    mean_crps,
                    reliability: decomposition.reliability,
                    resolution: decomposition.resolution,
                    uncertainty: decomposition.uncertainty,
                },
            );
        }

        let mut spectra = SpectraBlock::default();
        for (source, series) in &self.spectra_series {
            let ms = mean_spectrum(series.iter().map(|s| s.as_slice()))
                .context("stage spectral")?;
            if spectra.frequencies.is_empty() {
                spectra.frequencies = ms.frequencies.clone();
            }
            spectra.mean_amplitude.insert(source.clone(), ms.amplitudes);
        }

        Ok((score_blocks, histogram_blocks, product_blocks, spectra))
    }

    fn histogram_rows(&self) -> Vec<(String, String, Vec<usize>)> {
        self.histograms
            .iter()
            .map(|((kind, source), counts)| (kind.clone(), source.clone(), counts.clone()))
            .collect()
    }
}

/// Execute the pipeline described by `config` up to `scope` and return the
/// output tables (plus the report for [`RunScope::Full`]) without touching
/// the filesystem.
pub fn run_stages(config: &PipelineConfig, scope: RunScope) -> Result<OutputBundle> {
    config.validate()?;
    let method = config.method;
    let method_label = method.to_string();

    let forecasts =
        io::read_forecasts(&config.forecasts).context("stage ingest: reading forecasts")?;
    let lead_times = forecasts[0].lead_times().to_vec();
    let n_lead_times = lead_times.len();
    let n_members = forecasts[0].n_members();
    for f in &forecasts {
        if f.lead_times() != lead_times || f.n_members() != n_members {
            bail!(
                "stage ingest: forecast ({}, {}) is on a different grid",
                f.run_date(),
                f.station_id()
            );
        }
    }
    let observations = io::read_observations(&config.observations, &lead_times)
        .context("stage ingest: reading observations")?;
    let stations = group_by_station(forecasts, observations).context("stage ingest")?;

    let mut dates: Vec<NaiveDate> = Vec::new();
    {
        let mut seen = std::collections::BTreeSet::new();
        for s in &stations {
            for d in s
                .forecasts
                .range(config.verification_start..=config.verification_end)
                .map(|(d, _)| *d)
            {
                seen.insert(d);
            }
        }
        dates.extend(seen);
    }
    if dates.is_empty() {
        bail!(
            "stage verification-set: empty verification set in {}..={}",
            config.verification_start,
            config.verification_end
        );
    }

    let coupling_seed = substream_seed(config.seed, STREAM_COUPLING);
    let bootstrap_seed = substream_seed(config.seed, STREAM_BOOTSTRAP);

    let mut bundle = OutputBundle::default();
    let mut acc = VerificationAccumulator::default();
    let mut lag_sums = vec![0.0; n_lead_times.saturating_sub(1)];
    let mut lag_count = 0usize;
    let mut n_cases_scored = 0usize;
    let mut n_cases_skipped = 0usize;
    let mut n_emos_fallbacks = 0usize;
    let mut case_index = 0u64;

    for station in &stations {
        for &date in &dates {
            let Some(forecast) = station.forecasts.get(&date) else {
                continue;
            };
            let mut rng = ChaCha8Rng::seed_from_u64(substream_seed(coupling_seed, case_index));
            case_index += 1;

            // Calibration on the rolling window.
            let window = training_window(station, date, config.window_length_days, n_lead_times)
                .context("stage calibration")?;
            let coefficients: Vec<_> = (0..n_lead_times)
                .map(|t| {
                    if window.samples_at(t).len() < config.min_samples {
                        n_emos_fallbacks += 1;
                    }
                    fit_emos(&window, t, config.min_samples)
                })
                .collect();
            let quantiles =
                emit_quantiles(&coefficients, forecast).context("stage calibration")?;

            for (t, &lead) in lead_times.iter().enumerate() {
                bundle
                    .coefficients
                    .push((date, station.station_id.clone(), lead, coefficients[t]));
            }
            bundle.quantiles.push((
                date,
                station.station_id.clone(),
                lead_times.clone(),
                quantiles.clone(),
            ));
            if scope == RunScope::Calibrate {
                continue;
            }

            // Error correlation, refreshed daily from the same window.
            let error_correlation = estimate_error_correlation(&window, config.min_pairs)
                .context("stage error-correlation")?;
            for (k, sum) in lag_sums.iter_mut().enumerate() {
                *sum += error_correlation.lagged_mean(k + 1).unwrap_or(0.0);
            }
            lag_count += 1;

            // Coupling.
            let raw_scenarios = ScenarioSet::new(forecast.members().clone(), Provenance::Raw)
                .context("stage coupling")?;
            let coupled = match method {
                Provenance::Ecc => ecc(&quantiles, forecast, TiePolicy::Random, &mut rng)
                    .context("stage coupling: ecc")?,
                Provenance::Decc => decc(
                    &quantiles,
                    forecast,
                    &error_correlation,
                    TiePolicy::Random,
                    &mut rng,
                )
                .context("stage coupling: decc")?,
                Provenance::ClimatologicalTemplate => {
                    let history = window_history(station, date, config.window_length_days)
                        .context("stage coupling")?;
                    climatological_template(&quantiles, &history, TiePolicy::Random, &mut rng)
                        .context("stage coupling: climatological template")?
                }
                Provenance::Raw => unreachable!("rejected by PipelineConfig::validate"),
            };
            bundle.scenarios.push(ScenarioRecord {
                date,
                station: station.station_id.clone(),
                lead_times: lead_times.clone(),
                scenarios: coupled.clone(),
            });
            if scope == RunScope::Couple {
                continue;
            }

            // Verification needs the full observed trajectory.
            let Some(obs_today) = station.observations.complete(date) else {
                log::warn!(
                    "skipping ({date}, {}): incomplete observations",
                    station.station_id
                );
                n_cases_skipped += 1;
                continue;
            };
            n_cases_scored += 1;
            for (source, scen) in [("raw", &raw_scenarios), (method_label.as_str(), &coupled)] {
                acc.score_case(date, &station.station_id, source, scen, &obs_today, &mut rng)
                    .context("stage verification")?;
            }
            acc.record_observation_spectrum(obs_today);
        }
    }

    if scope != RunScope::Full {
        return Ok(bundle);
    }
    if n_cases_scored == 0 {
        bail!(
            "stage verification-set: empty verification set (no case with complete observations)"
        );
    }

    let (scores, rank_histograms, products, spectra) =
        acc.aggregate(config.bootstrap_replicates, bootstrap_seed)?;
    let report = VerificationReport {
        method: method_label,
        seed: config.seed,
        n_members,
        n_lead_times,
        verification_start: config.verification_start.to_string(),
        verification_end: config.verification_end.to_string(),
        n_verification_days: dates.len(),
        n_cases_scored,
        n_cases_skipped,
        n_emos_fallbacks,
        stations: stations.iter().map(|s| s.station_id.clone()).collect(),
        error_correlation_mean_by_lag: lag_sums
            .iter()
            .map(|s| s / lag_count.max(1) as f64)
            .collect(),
        scores,
        rank_histograms,
        products,
        spectra: spectra.clone(),
    }
    .rounded();

    bundle.scores = acc.rows.clone();
    bundle.histograms = acc.histogram_rows();
    bundle.spectra = spectra;
    bundle.report = Some(report);
    Ok(bundle)
}

/// Execute the full pipeline.
pub fn run_pipeline(config: &PipelineConfig) -> Result<OutputBundle> {
    run_stages(config, RunScope::Full)
}

/// Verification summary for standalone scoring of persisted scenario files.
#[derive(Debug, Serialize)]
pub struct VerifySummary {
    pub n_cases_scored: usize,
    pub n_cases_skipped: usize,
    pub scores: BTreeMap<String, BTreeMap<String, ScoreBlock>>,
    pub rank_histograms: BTreeMap<String, BTreeMap<String, HistogramBlock>>,
    pub products: BTreeMap<String, BTreeMap<String, ProductBlock>>,
}

/// Score previously persisted scenario sets against observations. Sources
/// are the provenance labels found in the files.
pub fn run_verify(
    records: &[ScenarioRecord],
    observations: &[ObservationSeries],
    replicates: usize,
    seed: u64,
) -> Result<(VerifySummary, Vec<ScoreRow>, Vec<(String, String, Vec<usize>)>)> {
    if records.is_empty() {
        bail!("no scenario records to verify");
    }
    let obs_by_station: BTreeMap<&str, &ObservationSeries> = observations
        .iter()
        .map(|o| (o.station_id(), o))
        .collect();

    let mut acc = VerificationAccumulator::default();
    let mut n_cases_scored = 0usize;
    let mut n_cases_skipped = 0usize;
    let mut case_index = 0u64;
    let coupling_seed = substream_seed(seed, STREAM_COUPLING);
    for record in records {
        let mut rng = ChaCha8Rng::seed_from_u64(substream_seed(coupling_seed, case_index));
        case_index += 1;
        let source = record.scenarios.provenance().to_string();
        let Some(series) = obs_by_station.get(record.station.as_str()) else {
            bail!("no observations for station {}", record.station);
        };
        let Some(obs_today) = series.complete(record.date) else {
            log::warn!(
                "skipping ({}, {}): incomplete observations",
                record.date,
                record.station
            );
            n_cases_skipped += 1;
            continue;
        };
        acc.score_case(
            record.date,
            &record.station,
            &source,
            &record.scenarios,
            &obs_today,
            &mut rng,
        )?;
        n_cases_scored += 1;
    }
    if n_cases_scored == 0 {
        bail!("empty verification set (no case with complete observations)");
    }
    let bootstrap_seed = substream_seed(seed, STREAM_BOOTSTRAP);
    let (scores, rank_histograms, products, _) = acc.aggregate(replicates, bootstrap_seed)?;
    let histogram_rows = acc.histogram_rows();
    Ok((
        VerifySummary {
            n_cases_scored,
            n_cases_skipped,
            scores,
            rank_histograms,
            products,
        },
        acc.rows,
        histogram_rows,
    ))
}

/// Mean amplitude spectra of persisted scenario sets, grouped by provenance,
/// plus the observed series when given.
pub fn run_spectrum(
    records: &[ScenarioRecord],
    observations: Option<&[ObservationSeries]>,
) -> Result<SpectraBlock> {
    if records.is_empty() {
        bail!("no scenario records");
    }
    let mut series: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
    for record in records {
        let store = series
            .entry(record.scenarios.provenance().to_string())
            .or_default();
        for i in 0..record.scenarios.n_members() {
            store.push(record.scenarios.member(i));
        }
    }
    if let Some(observations) = observations {
        let store = series.entry("obs".into()).or_default();
        for o in observations {
            for date in o.dates().collect::<Vec<_>>() {
                if let Some(complete) = o.complete(date) {
                    store.push(complete);
                }
            }
        }
    }
    let mut block = SpectraBlock::default();
    for (source, list) in &series {
        let ms = mean_spectrum(list.iter().map(|s| s.as_slice()))?;
        if block.frequencies.is_empty() {
            block.frequencies = ms.frequencies.clone();
        }
        block.mean_amplitude.insert(source.clone(), ms.amplitudes);
    }
    Ok(block)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn product_examples() {
        assert_eq!(series_daily_mean(&[5.0, 5.0, 5.0]), 5.0);
        assert_eq!(series_max_upward_ramp(&[5.0, 5.0, 5.0]), 0.0);
        assert_eq!(series_daily_mean(&[1.0, 2.0, 4.0, 3.0]), 2.5);
        assert_eq!(series_max_upward_ramp(&[1.0, 2.0, 4.0, 3.0]), 2.0);
        // Strictly decreasing: the largest (least negative) step.
        assert_eq!(series_max_upward_ramp(&[9.0, 7.0, 6.5]), -0.5);
    }

    #[test]
    fn derive_products_per_member() {
        let s = ScenarioSet::new(array![[1.0, 9.0], [2.0, 7.0], [4.0, 6.5]], Provenance::Raw)
            .unwrap();
        let p = derive_products(&s);
        assert_eq!(p.daily_mean, vec![7.0 / 3.0, 22.5 / 3.0]);
        assert_eq!(p.max_upward_ramp, vec![2.0, -0.5]);
    }
}
