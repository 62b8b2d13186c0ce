//! Empirical copula coupling: scenario reconstruction from calibrated
//! quantiles via a rank template.
//!
//! Three templates are supported: the raw ensemble itself (ECC), the raw
//! ensemble plus error-autocorrelation-adjusted corrections (d-ECC), and
//! randomly drawn historical observation trajectories (a Schaake-shuffle
//! style climatological baseline). Reordering never does arithmetic on the
//! quantiles, so per-lead-time marginals are preserved bit-exactly.

use ndarray::Array2;
use rand::Rng;

use crate::calibration::TrainingWindow;
use crate::ensemble::{EnsembleForecast, ObservationSeries, Provenance, QuantileSet, ScenarioSet};
use crate::error::{Error, Result};
use crate::linalg::{pearson, repair_correlation, sqrt_psd, SymmetricMatrix};
use crate::ranks::{compute_ranks, RankMatrix, TiePolicy};

/// Minimum overlapping error pairs per matrix entry before shrinkage kicks in.
pub const DEFAULT_MIN_PAIRS: usize = 15;

/// What a dependence template was built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemplateProvenance {
    RawEnsemble,
    AdjustedEnsemble,
    Climatology,
}

/// A `T x N` dependence template together with its rank matrix.
#[derive(Debug, Clone)]
pub struct Template {
    values: Array2<f64>,
    ranks: RankMatrix,
    provenance: TemplateProvenance,
}

impl Template {
    pub fn new(
        values: Array2<f64>,
        provenance: TemplateProvenance,
        tie_policy: TiePolicy,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let ranks = compute_ranks(&values, tie_policy, rng)?;
        Ok(Self {
            values,
            ranks,
            provenance,
        })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn ranks(&self) -> &RankMatrix {
        &self.ranks
    }

    pub fn provenance(&self) -> TemplateProvenance {
        self.provenance
    }
}

/// Per-member corrections imposed by calibration: `c_t^i = x~_t^i - x_t^i`.
#[derive(Debug, Clone)]
pub struct CorrectionSet {
    values: Array2<f64>,
}

impl CorrectionSet {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        for ((r, c), &v) in values.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    what: "correction set",
                    row: r,
                    col: c,
                });
            }
        }
        Ok(Self { values })
    }

    /// Corrections from an ECC scenario set and the raw ensemble it was
    /// built on.
    pub fn from_scenarios(scenarios: &ScenarioSet, raw: &EnsembleForecast) -> Result<Self> {
        if scenarios.values().dim() != raw.members().dim() {
            return Err(Error::DimensionMismatch(
                "scenario and ensemble shapes differ".into(),
            ));
        }
        Ok(Self {
            values: scenarios.values() - raw.members(),
        })
    }

    /// Correction matrix, lead time by member.
    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }
}

/// Estimated temporal correlation of the ensemble-mean forecast error,
/// symmetric with unit diagonal and entries in `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct ErrorCorrelationMatrix {
    matrix: SymmetricMatrix,
}

impl ErrorCorrelationMatrix {
    pub fn new(matrix: SymmetricMatrix) -> Result<Self> {
        let a = matrix.as_array();
        for i in 0..matrix.dim() {
            if a[(i, i)] != 1.0 {
                return Err(Error::InvalidArgument(format!(
                    "correlation matrix diagonal entry {i} is {}, expected 1",
                    a[(i, i)]
                )));
            }
            for j in 0..matrix.dim() {
                if a[(i, j)].abs() > 1.0 {
                    return Err(Error::InvalidArgument(format!(
                        "correlation entry ({i}, {j}) = {} outside [-1, 1]",
                        a[(i, j)]
                    )));
                }
            }
        }
        Ok(Self { matrix })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: SymmetricMatrix::identity(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn as_symmetric(&self) -> &SymmetricMatrix {
        &self.matrix
    }

    pub fn is_identity(&self) -> bool {
        self.matrix.is_identity()
    }

    /// Mean correlation over all entry pairs at lag `|t1 - t2| = lag`.
    pub fn lagged_mean(&self, lag: usize) -> Option<f64> {
        let n = self.dim();
        if lag >= n {
            return None;
        }
        let a = self.matrix.as_array();
        let mut sum = 0.0;
        let mut count = 0usize;
        for t in 0..(n - lag) {
            sum += a[(t, t + lag)];
            count += 1;
        }
        Some(sum / count as f64)
    }
}

fn reorder_quantiles(q: &QuantileSet, ranks: &RankMatrix) -> Array2<f64> {
    let (t_len, n) = q.values().dim();
    let mut out = Array2::<f64>::zeros((t_len, n));
    for t in 0..t_len {
        for i in 0..n {
            out[(t, i)] = q.values()[(t, ranks.rank(t, i) - 1)];
        }
    }
    out
}

fn check_coupling_dims(q: &QuantileSet, raw: &EnsembleForecast) -> Result<()> {
    if q.values().dim() != raw.members().dim() {
        return Err(Error::DimensionMismatch(format!(
            "quantile set is {:?} but ensemble is {:?}",
            q.values().dim(),
            raw.members().dim()
        )));
    }
    Ok(())
}

/// Standard ensemble copula coupling: reorder the calibrated quantiles with
/// the rank structure of the raw ensemble.
pub fn ecc(
    q: &QuantileSet,
    raw: &EnsembleForecast,
    tie_policy: TiePolicy,
    rng: &mut impl Rng,
) -> Result<ScenarioSet> {
    check_coupling_dims(q, raw)?;
    let template = Template::new(
        raw.members().clone(),
        TemplateProvenance::RawEnsemble,
        tie_policy,
        rng,
    )?;
    ScenarioSet::new(reorder_quantiles(q, template.ranks()), Provenance::Ecc)
}

/// Dual ensemble copula coupling.
///
/// The template is the raw ensemble plus corrections recolored by the
/// principal square root of the error correlation matrix:
/// scenarios from ECC give corrections `c^i`, the transformation step maps
/// them to `c'^i = R_e^(1/2) c^i`, the adjusted ensemble `x^i + c'^i` is
/// re-ranked and the quantiles reordered by those ranks.
pub fn decc(
    q: &QuantileSet,
    raw: &EnsembleForecast,
    error_correlation: &ErrorCorrelationMatrix,
    tie_policy: TiePolicy,
    rng: &mut impl Rng,
) -> Result<ScenarioSet> {
    check_coupling_dims(q, raw)?;
    let dim = error_correlation.dim();
    if dim != raw.n_lead_times() {
        return Err(Error::DimensionMismatch(format!(
            "error correlation is {dim}x{dim} but ensemble has {} lead times",
            raw.n_lead_times()
        )));
    }

    let ecc_scenarios = ecc(q, raw, tie_policy, rng)?;
    if error_correlation.is_identity() {
        // R_e = I leaves the corrections untouched, so the adjusted ensemble
        // is exactly the ECC scenario set and so are its ranks.
        return ScenarioSet::new(ecc_scenarios.values().clone(), Provenance::Decc);
    }

    let corrections = CorrectionSet::from_scenarios(&ecc_scenarios, raw)?;
    let transform = sqrt_psd(error_correlation.as_symmetric())?;
    let adjusted_corrections = transform.as_array().dot(corrections.values());
    let adjusted_ensemble = raw.members() + &adjusted_corrections;
    let template = Template::new(
        adjusted_ensemble,
        TemplateProvenance::AdjustedEnsemble,
        tie_policy,
        rng,
    )?;
    ScenarioSet::new(reorder_quantiles(q, template.ranks()), Provenance::Decc)
}

/// Estimate the temporal error correlation matrix from a training window.
///
/// Entries are Pearson correlations of `e_t = y_t - m(x_t)` with pairwise
/// deletion of missing observations. Entries backed by fewer than
/// `min_pairs` days are shrunk toward zero by `n / min_pairs`; undefined
/// entries (degenerate variance or fewer than two pairs) become zero. The
/// result is repaired to positive definiteness.
pub fn estimate_error_correlation(
    window: &TrainingWindow,
    min_pairs: usize,
) -> Result<ErrorCorrelationMatrix> {
    let t_len = window.n_lead_times();
    if t_len == 0 {
        return Err(Error::InsufficientData(
            "training window has no lead times".into(),
        ));
    }
    let errors = window.error_series();
    let mut m = Array2::<f64>::eye(t_len);
    let mut pairs = Vec::with_capacity(errors.len());
    for t1 in 0..t_len {
        for t2 in (t1 + 1)..t_len {
            pairs.clear();
            for day in &errors {
                if let (Some(a), Some(b)) = (day[t1], day[t2]) {
                    pairs.push((a, b));
                }
            }
            let value = match pearson(&pairs) {
                Some(r) if pairs.len() >= min_pairs => r,
                Some(r) => {
                    log::warn!(
                        "error correlation ({t1}, {t2}) for {}: only {} pairs, shrinking",
                        window.target_date(),
                        pairs.len()
                    );
                    r * pairs.len() as f64 / min_pairs as f64
                }
                None => {
                    log::warn!(
                        "error correlation ({t1}, {t2}) for {}: undefined, set to 0",
                        window.target_date()
                    );
                    0.0
                }
            };
            m[(t1, t2)] = value;
            m[(t2, t1)] = value;
        }
    }
    let repaired = repair_correlation(&SymmetricMatrix::from_symmetric_unchecked(m))?;
    ErrorCorrelationMatrix::new(repaired)
}

/// Schaake-shuffle style baseline: the template is `N` complete historical
/// observation trajectories drawn uniformly (seeded) from `history`.
pub fn climatological_template(
    q: &QuantileSet,
    history: &ObservationSeries,
    tie_policy: TiePolicy,
    rng: &mut impl Rng,
) -> Result<ScenarioSet> {
    let (t_len, n) = q.values().dim();
    if history.lead_times().len() != t_len {
        return Err(Error::DimensionMismatch(format!(
            "history has {} lead times, quantiles have {t_len}",
            history.lead_times().len()
        )));
    }
    let complete: Vec<Vec<f64>> = history
        .dates()
        .filter_map(|d| history.complete(d))
        .collect();
    if complete.len() < n {
        return Err(Error::InsufficientData(format!(
            "climatological template needs {n} complete trajectories, found {}",
            complete.len()
        )));
    }

    // Draw n distinct trajectory indices, then order them so the selection
    // (not the draw order) determines member labels.
    let mut indices: Vec<usize> = (0..complete.len()).collect();
    for i in 0..n {
        let j = rng.random_range(i..indices.len());
        indices.swap(i, j);
    }
    let mut chosen: Vec<usize> = indices[..n].to_vec();
    chosen.sort_unstable();

    let mut values = Array2::<f64>::zeros((t_len, n));
    for (member, &idx) in chosen.iter().enumerate() {
        for t in 0..t_len {
            values[(t, member)] = complete[idx][t];
        }
    }
    let template = Template::new(values, TemplateProvenance::Climatology, tie_policy, rng)?;
    ScenarioSet::new(
        reorder_quantiles(q, template.ranks()),
        Provenance::ClimatologicalTemplate,
    )
}

/// Terms of the scenario covariance split at a pair of lead times: the raw
/// ensemble part, the correction part, and the remainder holding the two
/// cross-covariances. Diagnostic only.
#[derive(Debug, Clone, Copy)]
pub struct CovarianceDecomposition {
    /// Covariance of the post-processed scenarios `x + c`.
    pub total: f64,
    /// Covariance contributed by the raw ensemble.
    pub raw_term: f64,
    /// Covariance contributed by the corrections.
    pub correction_term: f64,
    /// `total - raw_term - correction_term`, the sum of both cross terms.
    pub epsilon: f64,
    /// Raw ensemble had zero spread at one of the lead times.
    pub raw_degenerate: bool,
    /// Corrections had zero spread at one of the lead times.
    pub correction_degenerate: bool,
}

fn member_covariance(a: &Array2<f64>, b: &Array2<f64>, t1: usize, t2: usize) -> f64 {
    let n = a.ncols();
    let mean1 = a.row(t1).sum() / n as f64;
    let mean2 = b.row(t2).sum() / n as f64;
    let mut s = 0.0;
    for i in 0..n {
        s += (a[(t1, i)] - mean1) * (b[(t2, i)] - mean2);
    }
    s / (n - 1) as f64
}

/// Split the covariance of the post-processed ensemble at lead times
/// `(t1, t2)` into raw, correction and cross contributions.
pub fn covariance_decomposition(
    raw: &EnsembleForecast,
    corrections: &CorrectionSet,
    t1: usize,
    t2: usize,
) -> Result<CovarianceDecomposition> {
    if t1 == t2 {
        return Err(Error::InvalidArgument(
            "covariance decomposition needs two distinct lead times".into(),
        ));
    }
    let t_len = raw.n_lead_times();
    if t1 >= t_len || t2 >= t_len {
        return Err(Error::InvalidArgument(format!(
            "lead indices ({t1}, {t2}) out of range for {t_len} lead times"
        )));
    }
    if corrections.values().dim() != raw.members().dim() {
        return Err(Error::DimensionMismatch(
            "correction and ensemble shapes differ".into(),
        ));
    }

    let x = raw.members();
    let c = corrections.values();
    let coupled = x + c;

    let var = |m: &Array2<f64>, t: usize| member_covariance(m, m, t, t);
    let raw_degenerate = var(x, t1) == 0.0 || var(x, t2) == 0.0;
    let correction_degenerate = var(c, t1) == 0.0 || var(c, t2) == 0.0;

    let total = member_covariance(&coupled, &coupled, t1, t2);
    let raw_term = if raw_degenerate {
        0.0
    } else {
        member_covariance(x, x, t1, t2)
    };
    let correction_term = if correction_degenerate {
        0.0
    } else {
        member_covariance(c, c, t1, t2)
    };
    Ok(CovarianceDecomposition {
        total,
        raw_term,
        correction_term,
        epsilon: total - raw_term - correction_term,
        raw_degenerate,
        correction_degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(99)
    }

    fn date(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn forecast(members: Array2<f64>) -> EnsembleForecast {
        let t = members.nrows();
        EnsembleForecast::new(
            date("2013-03-02"),
            "S01",
            (1..=t as u32).collect(),
            members,
        )
        .unwrap()
    }

    #[test]
    fn ecc_reorders_by_raw_ranks() {
        // Raw row (5, 2, 3) has ranks (3, 1, 2); quantiles (10, 20, 30)
        // land as (30, 10, 20).
        let raw = forecast(array![[5.0, 2.0, 3.0], [5.0, 2.0, 3.0]]);
        let q = QuantileSet::new(array![[10.0, 20.0, 30.0], [10.0, 20.0, 30.0]]).unwrap();
        let s = ecc(&q, &raw, TiePolicy::FirstOccurrence, &mut rng()).unwrap();
        assert_eq!(s.values().row(0).to_vec(), vec![30.0, 10.0, 20.0]);
        assert_eq!(s.provenance(), Provenance::Ecc);
    }

    #[test]
    fn ecc_is_identity_when_quantiles_equal_sorted_raw() {
        let raw = forecast(array![[5.0, 2.0, 3.0], [1.0, 9.0, 4.0]]);
        let q = QuantileSet::new(array![[2.0, 3.0, 5.0], [1.0, 4.0, 9.0]]).unwrap();
        let s = ecc(&q, &raw, TiePolicy::FirstOccurrence, &mut rng()).unwrap();
        assert_eq!(s.values(), raw.members());
    }

    #[test]
    fn ecc_hand_case_with_ties() {
        // Members are columns: member1 = (5, 1, 3), member2 = (2, 4, 3).
        // Row ranks: t1 -> (2, 1), t2 -> (1, 2), t3 tie -> (1, 2) under
        // first-occurrence.
        let raw = forecast(array![[5.0, 2.0], [1.0, 4.0], [3.0, 3.0]]);
        let q = QuantileSet::new(array![[10.0, 20.0], [10.0, 20.0], [10.0, 20.0]]).unwrap();
        let s = ecc(&q, &raw, TiePolicy::FirstOccurrence, &mut rng()).unwrap();
        assert_eq!(s.values().column(0).to_vec(), vec![20.0, 10.0, 10.0]);
        assert_eq!(s.values().column(1).to_vec(), vec![10.0, 20.0, 20.0]);
    }

    #[test]
    fn ecc_three_members_two_lead_times() {
        // Member trajectories (5,2), (1,4), (3,3): lead-time rows are
        // (5,1,3) and (2,4,3) with ranks (3,1,2) and (1,3,2).
        let raw = forecast(array![[5.0, 1.0, 3.0], [2.0, 4.0, 3.0]]);
        let q = QuantileSet::new(array![[10.0, 20.0, 30.0], [10.0, 20.0, 30.0]]).unwrap();
        let s = ecc(&q, &raw, TiePolicy::FirstOccurrence, &mut rng()).unwrap();
        assert_eq!(s.values().column(0).to_vec(), vec![30.0, 10.0]);
        assert_eq!(s.values().column(1).to_vec(), vec![10.0, 30.0]);
        assert_eq!(s.values().column(2).to_vec(), vec![20.0, 20.0]);
    }

    #[test]
    fn ecc_rejects_dimension_mismatch() {
        let raw = forecast(array![[5.0, 2.0], [1.0, 4.0]]);
        let q = QuantileSet::new(array![[10.0, 20.0, 30.0], [10.0, 20.0, 30.0]]).unwrap();
        assert!(ecc(&q, &raw, TiePolicy::Random, &mut rng()).is_err());
    }

    #[test]
    fn decc_with_identity_correlation_equals_ecc() {
        let raw = forecast(array![[5.0, 2.0, 3.0], [1.0, 9.0, 4.0], [2.0, 2.5, 7.0]]);
        let q =
            QuantileSet::new(array![[1.0, 4.0, 9.0], [0.0, 2.0, 11.0], [3.0, 5.0, 6.0]]).unwrap();
        let e = ecc(&q, &raw, TiePolicy::Random, &mut rng()).unwrap();
        let d = decc(
            &q,
            &raw,
            &ErrorCorrelationMatrix::identity(3),
            TiePolicy::Random,
            &mut rng(),
        )
        .unwrap();
        assert_eq!(e.values(), d.values());
        assert_eq!(d.provenance(), Provenance::Decc);
    }

    #[test]
    fn decc_with_zero_corrections_returns_raw() {
        let raw = forecast(array![[5.0, 2.0, 3.0], [1.0, 9.0, 4.0]]);
        // Quantiles equal the sorted raw rows, so corrections vanish.
        let q = QuantileSet::new(array![[2.0, 3.0, 5.0], [1.0, 4.0, 9.0]]).unwrap();
        let re = ErrorCorrelationMatrix::new(
            SymmetricMatrix::new(array![[1.0, 0.6], [0.6, 1.0]]).unwrap(),
        )
        .unwrap();
        let d = decc(&q, &raw, &re, TiePolicy::Random, &mut rng()).unwrap();
        assert_eq!(d.values(), raw.members());
    }

    #[test]
    fn decc_with_constant_corrections_equals_ecc() {
        // Quantiles equal to sorted raw plus a constant h: corrections are
        // h for every member and lead time, and the coloring transform maps
        // a constant vector to another member-independent vector, leaving
        // ranks untouched.
        let h = 1.5;
        let raw = forecast(array![[5.0, 2.0, 3.0], [1.0, 9.0, 4.0]]);
        let q = QuantileSet::new(array![
            [2.0 + h, 3.0 + h, 5.0 + h],
            [1.0 + h, 4.0 + h, 9.0 + h]
        ])
        .unwrap();
        let re = ErrorCorrelationMatrix::new(
            SymmetricMatrix::new(array![[1.0, 0.7], [0.7, 1.0]]).unwrap(),
        )
        .unwrap();
        let e = ecc(&q, &raw, TiePolicy::Random, &mut rng()).unwrap();
        let d = decc(&q, &raw, &re, TiePolicy::Random, &mut rng()).unwrap();
        assert_eq!(e.values(), d.values());
    }

    #[test]
    fn decc_preserves_marginals_bitwise() {
        let raw = forecast(array![[5.0, 2.0, 3.0], [1.0, 9.0, 4.0], [2.0, 2.5, 7.0]]);
        let q =
            QuantileSet::new(array![[1.0, 4.0, 9.0], [0.0, 2.0, 11.0], [3.0, 5.0, 6.0]]).unwrap();
        let re = ErrorCorrelationMatrix::new(
            SymmetricMatrix::new(array![
                [1.0, 0.7, 0.4],
                [0.7, 1.0, 0.7],
                [0.4, 0.7, 1.0]
            ])
            .unwrap(),
        )
        .unwrap();
        let d = decc(&q, &raw, &re, TiePolicy::Random, &mut rng()).unwrap();
        for t in 0..3 {
            let mut got = d.values().row(t).to_vec();
            got.sort_by(|a, b| a.partial_cmp(b).unwrap());
            assert_eq!(got, q.values().row(t).to_vec());
        }
    }

    #[test]
    fn decc_rejects_indefinite_correlation() {
        let raw = forecast(array![[5.0, 2.0, 3.0], [1.0, 9.0, 4.0], [2.0, 2.5, 7.0]]);
        let q =
            QuantileSet::new(array![[1.0, 4.0, 9.0], [0.0, 2.0, 11.0], [3.0, 5.0, 6.0]]).unwrap();
        // Inconsistent correlation pattern with a negative eigenvalue;
        // it passes the entry-level checks but is not PSD.
        let bad = ErrorCorrelationMatrix::new(
            SymmetricMatrix::new(array![
                [1.0, 0.9, -0.9],
                [0.9, 1.0, 0.9],
                [-0.9, 0.9, 1.0]
            ])
            .unwrap(),
        )
        .unwrap();
        assert!(matches!(
            decc(&q, &raw, &bad, TiePolicy::Random, &mut rng()),
            Err(Error::NotPositiveSemidefinite(_))
        ));
    }

    fn window_from_errors(errors: &[Vec<Option<f64>>]) -> TrainingWindow {
        use crate::calibration::TrainingCase;
        let start = date("2013-01-01");
        let t_len = errors[0].len();
        let cases: Vec<TrainingCase> = errors
            .iter()
            .enumerate()
            .map(|(i, day)| TrainingCase {
                date: start + chrono::Duration::days(i as i64),
                ensemble_mean: vec![0.0; t_len],
                ensemble_variance: vec![1.0; t_len],
                // e = y - m with m = 0, so the observation IS the error.
                observations: day.clone(),
            })
            .collect();
        TrainingWindow::new(
            start + chrono::Duration::days(errors.len() as i64),
            errors.len() + 1,
            t_len,
            cases,
        )
        .unwrap()
    }

    #[test]
    fn error_correlation_of_identical_series_is_one() {
        let errors: Vec<Vec<Option<f64>>> = (0..30)
            .map(|i| vec![Some(i as f64), Some(i as f64)])
            .collect();
        // The PSD repair floors the zero eigenvalue of a perfectly
        // correlated pair, nudging the entry just below 1.
        let re = estimate_error_correlation(&window_from_errors(&errors), 15).unwrap();
        assert!((re.as_symmetric().as_array()[(0, 1)] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn degenerate_error_series_shrinks_to_zero() {
        let errors: Vec<Vec<Option<f64>>> = (0..30)
            .map(|i| vec![Some(2.0), Some(i as f64)])
            .collect();
        let re = estimate_error_correlation(&window_from_errors(&errors), 15).unwrap();
        assert!(re.as_symmetric().as_array()[(0, 1)].abs() < 1e-9);
    }

    #[test]
    fn sparse_pairs_are_shrunk() {
        // 10 overlapping pairs with perfect correlation, min_pairs 20:
        // the entry shrinks by 10/20.
        let mut errors: Vec<Vec<Option<f64>>> = Vec::new();
        for i in 0..10 {
            errors.push(vec![Some(i as f64), Some(i as f64)]);
        }
        for i in 0..20 {
            errors.push(vec![Some(i as f64), None]);
        }
        let re = estimate_error_correlation(&window_from_errors(&errors), 20).unwrap();
        let got = re.as_symmetric().as_array()[(0, 1)];
        assert!((got - 0.5).abs() < 0.05, "got {got}");
    }

    #[test]
    fn climatological_template_hand_case() {
        // Two historical trajectories (1, 5) and (4, 2): member ranks are
        // (1, 2) at t1 and (2, 1) at t2, so quantiles (10, 20) per row give
        // scenarios (10, 20) and (20, 10).
        let mut history = ObservationSeries::new("S01", vec![1, 2]);
        history
            .insert(date("2013-01-01"), vec![Some(1.0), Some(5.0)])
            .unwrap();
        history
            .insert(date("2013-01-02"), vec![Some(4.0), Some(2.0)])
            .unwrap();
        let q = QuantileSet::new(array![[10.0, 20.0], [10.0, 20.0]]).unwrap();
        let s = climatological_template(&q, &history, TiePolicy::Random, &mut rng()).unwrap();
        assert_eq!(s.values().column(0).to_vec(), vec![10.0, 20.0]);
        assert_eq!(s.values().column(1).to_vec(), vec![20.0, 10.0]);
        assert_eq!(s.provenance(), Provenance::ClimatologicalTemplate);
    }

    #[test]
    fn climatological_template_with_exact_history_ignores_the_seed() {
        let mut history = ObservationSeries::new("S01", vec![1, 2, 3]);
        history
            .insert(date("2013-01-01"), vec![Some(1.0), Some(5.0), Some(2.0)])
            .unwrap();
        history
            .insert(date("2013-01-02"), vec![Some(4.0), Some(2.0), Some(6.0)])
            .unwrap();
        let q = QuantileSet::new(array![[10.0, 20.0], [10.0, 20.0], [10.0, 20.0]]).unwrap();
        let mut outputs = Vec::new();
        for seed in [1u64, 99, 12345] {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            let s = climatological_template(&q, &history, TiePolicy::Random, &mut r).unwrap();
            outputs.push(s.values().clone());
        }
        assert_eq!(outputs[0], outputs[1]);
        assert_eq!(outputs[0], outputs[2]);
    }

    #[test]
    fn climatological_template_requires_complete_history() {
        let mut history = ObservationSeries::new("S01", vec![1, 2]);
        history
            .insert(date("2013-01-01"), vec![Some(1.0), Some(5.0)])
            .unwrap();
        history
            .insert(date("2013-01-02"), vec![Some(4.0), None])
            .unwrap();
        let q = QuantileSet::new(array![[10.0, 20.0], [10.0, 20.0]]).unwrap();
        assert!(matches!(
            climatological_template(&q, &history, TiePolicy::Random, &mut rng()),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn climatological_monotone_history_gives_monotone_scenarios() {
        let mut history = ObservationSeries::new("S01", vec![1, 2, 3]);
        for (i, base) in [1.0, 2.0, 3.0, 4.0].iter().enumerate() {
            history
                .insert(
                    date("2013-01-01") + chrono::Duration::days(i as i64),
                    vec![Some(*base), Some(base + 1.0), Some(base + 2.5)],
                )
                .unwrap();
        }
        let q = QuantileSet::new(array![
            [1.0, 2.0, 3.0],
            [10.0, 20.0, 30.0],
            [100.0, 200.0, 300.0]
        ])
        .unwrap();
        let s = climatological_template(&q, &history, TiePolicy::Random, &mut rng()).unwrap();
        for i in 0..3 {
            let m = s.values().column(i).to_vec();
            assert!(m[0] < m[1] && m[1] < m[2], "member {i} not increasing: {m:?}");
        }
    }

    #[test]
    fn covariance_decomposition_zero_corrections() {
        let raw = forecast(array![[5.0, 2.0, 3.0], [1.0, 9.0, 4.0]]);
        let c = CorrectionSet::new(Array2::zeros((2, 3))).unwrap();
        let d = covariance_decomposition(&raw, &c, 0, 1).unwrap();
        assert_eq!(d.correction_term, 0.0);
        assert_eq!(d.epsilon, 0.0);
        assert_eq!(d.raw_term, d.total);
        assert!(d.correction_degenerate);
    }

    #[test]
    fn covariance_decomposition_constant_raw() {
        let raw = forecast(array![[5.0, 5.0, 5.0], [1.0, 9.0, 4.0]]);
        let c = CorrectionSet::new(array![[0.1, -0.2, 0.4], [1.0, 0.0, -1.0]]).unwrap();
        let d = covariance_decomposition(&raw, &c, 0, 1).unwrap();
        assert_eq!(d.raw_term, 0.0);
        assert!(d.raw_degenerate);
    }

    #[test]
    fn covariance_decomposition_rejects_equal_lead_times() {
        let raw = forecast(array![[5.0, 2.0, 3.0], [1.0, 9.0, 4.0]]);
        let c = CorrectionSet::new(Array2::zeros((2, 3))).unwrap();
        assert!(covariance_decomposition(&raw, &c, 1, 1).is_err());
    }
}
