//! CSV ingestion and persistence.
//!
//! Data files (forecasts, observations, quantiles, scenarios) round-trip
//! bit-exactly: values are written with Rust's shortest round-trip float
//! formatting. Derived tables (scores, spectra, coefficients, histograms)
//! are rendered with 10 significant digits.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use chrono::NaiveDate;
use ndarray::Array2;

use windecc_core::{EnsembleForecast, ObservationSeries, Provenance, ScenarioSet};

/// Format a derived numeric value with 10 significant digits.
pub fn sig10_str(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let s = format!("{v:.9e}");
    // Strip the exponent form back to a plain decimal when it is short.
    let parsed: f64 = s.parse().expect("formatted float parses");
    format!("{parsed}")
}

/// Round a derived numeric value to 10 significant digits.
pub fn sig10(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{v:.9e}").parse().expect("formatted float parses")
}

fn member_column(i: usize) -> String {
    format!("m{:02}", i + 1)
}

fn parse_date(s: &str, line: usize) -> Result<NaiveDate> {
    s.parse()
        .map_err(|_| anyhow!("line {line}: invalid date '{s}' (expected YYYY-MM-DD)"))
}

fn parse_lead(s: &str, line: usize) -> Result<u32> {
    s.parse()
        .map_err(|_| anyhow!("line {line}: invalid lead time '{s}'"))
}

fn parse_wind(s: &str, line: usize, column: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| anyhow!("line {line}, column {column}: invalid value '{s}'"))?;
    if !v.is_finite() {
        bail!("line {line}, column {column}: non-finite value '{s}'");
    }
    if v < 0.0 {
        bail!("line {line}, column {column}: negative wind speed {v}");
    }
    Ok(v)
}

/// Read a forecast table (`date,station,lead_time,m01,...`), one row per
/// (date, station, lead time).
///
/// Groups missing part of the lead-time grid are dropped with a warning;
/// duplicate rows are an error.
pub fn read_forecasts(path: &Path) -> Result<Vec<EnsembleForecast>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader.headers()?.clone();
    let fields: Vec<&str> = headers.iter().collect();
    if fields.len() < 5 || fields[..3] != ["date", "station", "lead_time"] {
        bail!(
            "forecast header must be date,station,lead_time,m01,... got '{}'",
            fields.join(",")
        );
    }
    let n_members = fields.len() - 3;
    for (i, name) in fields[3..].iter().enumerate() {
        if *name != member_column(i) {
            bail!("forecast header: expected column '{}', got '{name}'", member_column(i));
        }
    }

    type Key = (NaiveDate, String);
    let mut groups: BTreeMap<Key, BTreeMap<u32, Vec<f64>>> = BTreeMap::new();
    let mut grid: BTreeSet<u32> = BTreeSet::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2;
        let record = record.with_context(|| format!("line {line}"))?;
        if record.len() != fields.len() {
            bail!("line {line}: expected {} fields, got {}", fields.len(), record.len());
        }
        let date = parse_date(&record[0], line)?;
        let station = record[1].to_string();
        let lead = parse_lead(&record[2], line)?;
        let mut members = Vec::with_capacity(n_members);
        for i in 0..n_members {
            members.push(parse_wind(&record[3 + i], line, &member_column(i))?);
        }
        grid.insert(lead);
        if groups
            .entry((date, station.clone()))
            .or_default()
            .insert(lead, members)
            .is_some()
        {
            bail!("line {line}: duplicate entry for ({date}, {station}, lead {lead})");
        }
    }
    if groups.is_empty() {
        bail!("no forecast rows in {}", path.display());
    }

    let grid: Vec<u32> = grid.into_iter().collect();
    let mut forecasts = Vec::with_capacity(groups.len());
    for ((date, station), rows) in groups {
        if rows.len() != grid.len() {
            let missing: Vec<u32> = grid
                .iter()
                .filter(|t| !rows.contains_key(t))
                .copied()
                .collect();
            log::warn!("dropping ({date}, {station}): missing lead times {missing:?}");
            continue;
        }
        let mut members = Array2::<f64>::zeros((grid.len(), n_members));
        for (t, lead) in grid.iter().enumerate() {
            for (i, v) in rows[lead].iter().enumerate() {
                members[(t, i)] = *v;
            }
        }
        forecasts.push(EnsembleForecast::new(date, station, grid.clone(), members)?);
    }
    Ok(forecasts)
}

/// Read an observation table (`date,station,lead_time,obs`; empty obs field
/// means missing) onto the given lead-time grid.
pub fn read_observations(path: &Path, lead_times: &[u32]) -> Result<Vec<ObservationSeries>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader.headers()?.clone();
    let fields: Vec<&str> = headers.iter().collect();
    if fields != ["date", "station", "lead_time", "obs"] {
        bail!(
            "observation header must be date,station,lead_time,obs, got '{}'",
            fields.join(",")
        );
    }
    let index_of: BTreeMap<u32, usize> = lead_times
        .iter()
        .enumerate()
        .map(|(i, &t)| (t, i))
        .collect();

    let mut per_station: BTreeMap<String, BTreeMap<NaiveDate, Vec<Option<f64>>>> = BTreeMap::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2;
        let record = record.with_context(|| format!("line {line}"))?;
        if record.len() != 4 {
            bail!("line {line}: expected 4 fields, got {}", record.len());
        }
        let date = parse_date(&record[0], line)?;
        let station = record[1].to_string();
        let lead = parse_lead(&record[2], line)?;
        let Some(&slot) = index_of.get(&lead) else {
            bail!("line {line}: lead time {lead} not on the forecast grid {lead_times:?}");
        };
        let value = if record[3].trim().is_empty() {
            None
        } else {
            Some(parse_wind(&record[3], line, "obs")?)
        };
        let day = per_station
            .entry(station)
            .or_default()
            .entry(date)
            .or_insert_with(|| vec![None; lead_times.len()]);
        if day[slot].is_some() {
            bail!("line {line}: duplicate observation for lead {lead}");
        }
        day[slot] = value;
    }

    let mut out = Vec::with_capacity(per_station.len());
    for (station, days) in per_station {
        let mut series = ObservationSeries::new(station, lead_times.to_vec());
        for (date, values) in days {
            series.insert(date, values)?;
        }
        out.push(series);
    }
    Ok(out)
}

pub fn write_forecasts(path: &Path, forecasts: &[EnsembleForecast]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    let n = forecasts.first().map_or(0, |f| f.n_members());
    let mut header = vec!["date".to_string(), "station".into(), "lead_time".into()];
    header.extend((0..n).map(member_column));
    w.write_record(&header)?;
    for f in forecasts {
        for (t, lead) in f.lead_times().iter().enumerate() {
            let mut row = vec![f.run_date().to_string(), f.station_id().into(), lead.to_string()];
            row.extend(f.members().row(t).iter().map(|v| format!("{v}")));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_observations(path: &Path, observations: &[ObservationSeries]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["date", "station", "lead_time", "obs"])?;
    for series in observations {
        for date in series.dates().collect::<Vec<_>>() {
            let values = series.get(date).expect("listed date is present");
            for (t, lead) in series.lead_times().iter().enumerate() {
                let text = values[t].map_or(String::new(), |v| format!("{v}"));
                w.write_record([
                    date.to_string(),
                    series.station_id().to_string(),
                    lead.to_string(),
                    text,
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// One persisted scenario set with its case identity.
#[derive(Debug, Clone)]
pub struct ScenarioRecord {
    pub date: NaiveDate,
    pub station: String,
    pub lead_times: Vec<u32>,
    pub scenarios: ScenarioSet,
}

pub fn write_scenarios(path: &Path, records: &[ScenarioRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    let n = records.first().map_or(0, |r| r.scenarios.n_members());
    let mut header = vec!["date".to_string(), "station".into(), "lead_time".into()];
    header.extend((0..n).map(|i| format!("member_{}", i + 1)));
    header.push("provenance".into());
    w.write_record(&header)?;
    for r in records {
        for (t, lead) in r.lead_times.iter().enumerate() {
            let mut row = vec![r.date.to_string(), r.station.clone(), lead.to_string()];
            row.extend(r.scenarios.values().row(t).iter().map(|v| format!("{v}")));
            row.push(r.scenarios.provenance().to_string());
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_scenarios(path: &Path) -> Result<Vec<ScenarioRecord>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader.headers()?.clone();
    let fields: Vec<&str> = headers.iter().collect();
    if fields.len() < 5
        || fields[..3] != ["date", "station", "lead_time"]
        || fields[fields.len() - 1] != "provenance"
    {
        bail!(
            "scenario header must be date,station,lead_time,member_1,...,provenance, got '{}'",
            fields.join(",")
        );
    }
    let n = fields.len() - 4;

    type Key = (NaiveDate, String, Provenance);
    let mut groups: BTreeMap<Key, BTreeMap<u32, Vec<f64>>> = BTreeMap::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2;
        let record = record.with_context(|| format!("line {line}"))?;
        let date = parse_date(&record[0], line)?;
        let station = record[1].to_string();
        let lead = parse_lead(&record[2], line)?;
        let provenance: Provenance = record[record.len() - 1]
            .parse()
            .map_err(|e| anyhow!("line {line}: {e}"))?;
        let mut members = Vec::with_capacity(n);
        for i in 0..n {
            members.push(parse_wind(&record[3 + i], line, &format!("member_{}", i + 1))?);
        }
        if groups
            .entry((date, station, provenance))
            .or_default()
            .insert(lead, members)
            .is_some()
        {
            bail!("line {line}: duplicate scenario row");
        }
    }

    let mut out = Vec::with_capacity(groups.len());
    for ((date, station, provenance), rows) in groups {
        let lead_times: Vec<u32> = rows.keys().copied().collect();
        let mut values = Array2::<f64>::zeros((lead_times.len(), n));
        for (t, (_, members)) in rows.iter().enumerate() {
            for (i, v) in members.iter().enumerate() {
                values[(t, i)] = *v;
            }
        }
        out.push(ScenarioRecord {
            date,
            station,
            lead_times,
            scenarios: ScenarioSet::new(values, provenance)?,
        });
    }
    Ok(out)
}

/// Write per-(date, station, lead time) EMOS coefficients for audit.
pub fn write_coefficients(
    path: &Path,
    rows: &[(NaiveDate, String, u32, windecc_core::EmosCoefficients)],
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["date", "station", "lead_time", "a", "b", "c", "d"])?;
    for (date, station, lead, c) in rows {
        w.write_record([
            date.to_string(),
            station.clone(),
            lead.to_string(),
            sig10_str(c.a),
            sig10_str(c.b),
            sig10_str(c.c),
            sig10_str(c.d),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Write calibrated quantiles in the same wide layout as forecasts.
pub fn write_quantiles(
    path: &Path,
    rows: &[(NaiveDate, String, Vec<u32>, windecc_core::QuantileSet)],
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    let n = rows.first().map_or(0, |(_, _, _, q)| q.n_quantiles());
    let mut header = vec!["date".to_string(), "station".into(), "lead_time".into()];
    header.extend((0..n).map(|i| format!("q{:02}", i + 1)));
    w.write_record(&header)?;
    for (date, station, lead_times, q) in rows {
        for (t, lead) in lead_times.iter().enumerate() {
            let mut row = vec![date.to_string(), station.clone(), lead.to_string()];
            row.extend(q.values().row(t).iter().map(|v| format!("{v}")));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Long-format score table: one row per (date, station, score kind, source).
pub fn write_scores(path: &Path, rows: &[(NaiveDate, String, String, String, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["date", "station", "score_kind", "source", "value"])?;
    for (date, station, kind, source, value) in rows {
        w.write_record([
            date.to_string(),
            station.clone(),
            kind.clone(),
            source.clone(),
            sig10_str(*value),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Rank histogram counts: one row per (kind, source, bin).
pub fn write_histograms(
    path: &Path,
    rows: &[(String, String, Vec<usize>)],
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["histogram", "source", "bin", "count"])?;
    for (kind, source, counts) in rows {
        for (bin, count) in counts.iter().enumerate() {
            w.write_record([
                kind.clone(),
                source.clone(),
                (bin + 1).to_string(),
                count.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Mean amplitude spectra: one row per (frequency, source).
pub fn write_spectra(
    path: &Path,
    frequencies: &[f64],
    sources: &BTreeMap<String, Vec<f64>>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["frequency", "source", "mean_amplitude"])?;
    for (source, amplitudes) in sources {
        for (f, a) in frequencies.iter().zip(amplitudes) {
            w.write_record([sig10_str(*f), source.clone(), sig10_str(*a)])?;
        }
    }
    w.flush()?;
    Ok(())
}
