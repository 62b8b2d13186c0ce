//! Domain types: raw ensembles, observations, calibrated quantiles, scenarios.
//!
//! All types are immutable after construction and validate their invariants
//! on the way in, so downstream code can index freely. Matrices are stored
//! lead time by member (`T x N`), member identity preserved across rows.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use ndarray::Array2;

use crate::error::{Error, Result};

/// Where a scenario set came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Provenance {
    Raw,
    Ecc,
    Decc,
    ClimatologicalTemplate,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Raw => "raw",
            Provenance::Ecc => "ecc",
            Provenance::Decc => "decc",
            Provenance::ClimatologicalTemplate => "climatological-template",
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(Provenance::Raw),
            "ecc" => Ok(Provenance::Ecc),
            "decc" => Ok(Provenance::Decc),
            "climatological-template" => Ok(Provenance::ClimatologicalTemplate),
            other => Err(Error::InvalidArgument(format!(
                "unknown provenance '{other}'"
            ))),
        }
    }
}

fn check_wind_matrix(what: &'static str, m: &Array2<f64>) -> Result<()> {
    for ((r, c), &v) in m.indexed_iter() {
        if !v.is_finite() {
            return Err(Error::NonFinite { what, row: r, col: c });
        }
        if v < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "negative wind speed {v} in {what} at row {r}, column {c}"
            )));
        }
    }
    Ok(())
}

/// One raw ensemble forecast: `T` lead times by `N_e` members for a single
/// run date and station. Column `i` is the same physical member at every
/// lead time.
#[derive(Debug, Clone)]
pub struct EnsembleForecast {
    run_date: NaiveDate,
    station_id: String,
    lead_times: Vec<u32>,
    members: Array2<f64>,
}

impl EnsembleForecast {
    pub fn new(
        run_date: NaiveDate,
        station_id: impl Into<String>,
        lead_times: Vec<u32>,
        members: Array2<f64>,
    ) -> Result<Self> {
        let (t, n) = members.dim();
        if t < 2 || n < 2 {
            return Err(Error::InvalidArgument(format!(
                "ensemble must have at least 2 lead times and 2 members, got {t}x{n}"
            )));
        }
        if lead_times.len() != t {
            return Err(Error::DimensionMismatch(format!(
                "{} lead times for a {t}-row member matrix",
                lead_times.len()
            )));
        }
        if !lead_times.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidArgument(
                "lead times must be strictly increasing".into(),
            ));
        }
        check_wind_matrix("ensemble members", &members)?;
        Ok(Self {
            run_date,
            station_id: station_id.into(),
            lead_times,
            members,
        })
    }

    pub fn run_date(&self) -> NaiveDate {
        self.run_date
    }

    pub fn station_id(&self) -> &str {
        &self.station_id
    }

    pub fn lead_times(&self) -> &[u32] {
        &self.lead_times
    }

    /// Member matrix, lead time by member.
    pub fn members(&self) -> &Array2<f64> {
        &self.members
    }

    pub fn n_lead_times(&self) -> usize {
        self.members.nrows()
    }

    pub fn n_members(&self) -> usize {
        self.members.ncols()
    }

    /// Arithmetic mean across members, one value per lead time.
    pub fn ensemble_mean(&self) -> Vec<f64> {
        row_means(&self.members)
    }

    /// Sample variance across members (denominator `N - 1`), per lead time.
    pub fn ensemble_variance(&self) -> Vec<f64> {
        row_variances(&self.members)
    }
}

pub(crate) fn row_means(m: &Array2<f64>) -> Vec<f64> {
    m.rows()
        .into_iter()
        .map(|row| row.sum() / row.len() as f64)
        .collect()
}

pub(crate) fn row_variances(m: &Array2<f64>) -> Vec<f64> {
    m.rows()
        .into_iter()
        .map(|row| {
            let n = row.len();
            if n < 2 {
                return 0.0;
            }
            let mean = row.sum() / n as f64;
            row.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64
        })
        .collect()
}

/// Observed wind speeds for one station on the same lead-time grid as the
/// forecasts, keyed by run date. Individual lead times may be missing.
#[derive(Debug, Clone)]
pub struct ObservationSeries {
    station_id: String,
    lead_times: Vec<u32>,
    values: BTreeMap<NaiveDate, Vec<Option<f64>>>,
}

impl ObservationSeries {
    pub fn new(station_id: impl Into<String>, lead_times: Vec<u32>) -> Self {
        Self {
            station_id: station_id.into(),
            lead_times,
            values: BTreeMap::new(),
        }
    }

    pub fn station_id(&self) -> &str {
        &self.station_id
    }

    pub fn lead_times(&self) -> &[u32] {
        &self.lead_times
    }

    pub fn insert(&mut self, date: NaiveDate, values: Vec<Option<f64>>) -> Result<()> {
        if values.len() != self.lead_times.len() {
            return Err(Error::DimensionMismatch(format!(
                "observation vector for {date} has {} entries, expected {}",
                values.len(),
                self.lead_times.len()
            )));
        }
        for (i, v) in values.iter().enumerate() {
            if let Some(v) = v {
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        what: "observations",
                        row: 0,
                        col: i,
                    });
                }
                if *v < 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "negative observed wind speed {v} for {date} at lead index {i}"
                    )));
                }
            }
        }
        self.values.insert(date, values);
        Ok(())
    }

    pub fn get(&self, date: NaiveDate) -> Option<&[Option<f64>]> {
        self.values.get(&date).map(|v| v.as_slice())
    }

    /// Fully observed vector for `date`, if no lead time is missing.
    pub fn complete(&self, date: NaiveDate) -> Option<Vec<f64>> {
        let v = self.values.get(&date)?;
        v.iter().copied().collect::<Option<Vec<f64>>>()
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.values.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Calibrated marginals: for each lead time, `N` quantiles at the equidistant
/// levels `n / (N + 1)`. Rows are sorted non-decreasing by construction.
#[derive(Debug, Clone)]
pub struct QuantileSet {
    levels: Vec<f64>,
    values: Array2<f64>,
}

impl QuantileSet {
    /// Equidistant probability levels for an `n`-member ensemble.
    pub fn equidistant_levels(n: usize) -> Vec<f64> {
        (1..=n).map(|k| k as f64 / (n + 1) as f64).collect()
    }

    pub fn new(values: Array2<f64>) -> Result<Self> {
        check_wind_matrix("quantile values", &values)?;
        for (t, row) in values.rows().into_iter().enumerate() {
            for n in 1..row.len() {
                if row[n] < row[n - 1] {
                    return Err(Error::InvalidArgument(format!(
                        "quantile row {t} is not sorted at column {n}"
                    )));
                }
            }
        }
        let levels = Self::equidistant_levels(values.ncols());
        Ok(Self { levels, values })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// Quantile matrix, lead time by level.
    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn n_lead_times(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_quantiles(&self) -> usize {
        self.values.ncols()
    }
}

/// A set of post-processed (or raw) member trajectories.
///
/// For `ecc` and `decc` provenance the values at every lead time are exactly
/// the calibrated quantiles, only reordered; the coupling routines never do
/// arithmetic on them.
#[derive(Debug, Clone)]
pub struct ScenarioSet {
    values: Array2<f64>,
    provenance: Provenance,
}

impl ScenarioSet {
    pub fn new(values: Array2<f64>, provenance: Provenance) -> Result<Self> {
        check_wind_matrix("scenario values", &values)?;
        Ok(Self { values, provenance })
    }

    /// Scenario matrix, lead time by member.
    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn n_lead_times(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_members(&self) -> usize {
        self.values.ncols()
    }

    /// One member's full trajectory.
    pub fn member(&self, i: usize) -> Vec<f64> {
        self.values.column(i).to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn date(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    #[test]
    fn ensemble_mean_examples() {
        let f = EnsembleForecast::new(
            date("2013-03-02"),
            "S01",
            vec![1, 2, 3],
            array![[2.0, 4.0], [1.0, 1.0], [0.0, 6.0]],
        )
        .unwrap();
        assert_eq!(f.ensemble_mean(), vec![3.0, 1.0, 3.0]);
    }

    #[test]
    fn ensemble_mean_constant_and_hand_sum() {
        let f = EnsembleForecast::new(
            date("2013-03-02"),
            "S01",
            vec![1, 2],
            array![[1.0, 1.0, 1.0, 1.0], [0.0, 3.0, 6.0, 3.0]],
        )
        .unwrap();
        assert_eq!(f.ensemble_mean(), vec![1.0, 3.0]);
    }

    #[test]
    fn ensemble_mean_is_linear() {
        let members = array![[2.0, 4.0, 9.0], [1.0, 1.0, 7.0]];
        let f = EnsembleForecast::new(date("2013-03-02"), "S01", vec![1, 2], members.clone())
            .unwrap();
        let scaled = EnsembleForecast::new(
            date("2013-03-02"),
            "S01",
            vec![1, 2],
            members.mapv(|v| 3.0 * v + 2.0),
        )
        .unwrap();
        for (a, b) in scaled.ensemble_mean().iter().zip(f.ensemble_mean()) {
            assert!((a - (3.0 * b + 2.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_negative_and_non_finite_members() {
        let bad = EnsembleForecast::new(
            date("2013-03-02"),
            "S01",
            vec![1, 2],
            array![[2.0, 4.0], [-1.0, 1.0]],
        );
        assert!(matches!(bad, Err(Error::InvalidArgument(_))));

        let nan = EnsembleForecast::new(
            date("2013-03-02"),
            "S01",
            vec![1, 2],
            array![[2.0, f64::NAN], [1.0, 1.0]],
        );
        assert!(matches!(
            nan,
            Err(Error::NonFinite { row: 0, col: 1, .. })
        ));
    }

    #[test]
    fn rejects_too_small_ensemble() {
        let r = EnsembleForecast::new(date("2013-03-02"), "S01", vec![1], array![[2.0, 4.0]]);
        assert!(r.is_err());
    }

    #[test]
    fn quantile_levels_are_equidistant() {
        let q = QuantileSet::new(array![[1.0, 2.0, 3.0], [0.0, 0.0, 5.0]]).unwrap();
        assert_eq!(q.levels(), &[0.25, 0.5, 0.75]);
    }

    #[test]
    fn quantile_rows_must_be_sorted() {
        assert!(QuantileSet::new(array![[2.0, 1.0]]).is_err());
    }

    #[test]
    fn observation_series_tracks_missing_entries() {
        let mut obs = ObservationSeries::new("S01", vec![1, 2, 3]);
        obs.insert(date("2013-03-02"), vec![Some(1.0), None, Some(2.0)])
            .unwrap();
        assert_eq!(obs.complete(date("2013-03-02")), None);
        obs.insert(date("2013-03-03"), vec![Some(1.0), Some(4.0), Some(2.0)])
            .unwrap();
        assert_eq!(
            obs.complete(date("2013-03-03")),
            Some(vec![1.0, 4.0, 2.0])
        );
        assert!(obs
            .insert(date("2013-03-04"), vec![Some(1.0), Some(-4.0), Some(2.0)])
            .is_err());
    }

    #[test]
    fn provenance_round_trips_through_strings() {
        for p in [
            Provenance::Raw,
            Provenance::Ecc,
            Provenance::Decc,
            Provenance::ClimatologicalTemplate,
        ] {
            assert_eq!(p.as_str().parse::<Provenance>().unwrap(), p);
        }
        assert!("bogus".parse::<Provenance>().is_err());
    }
}
