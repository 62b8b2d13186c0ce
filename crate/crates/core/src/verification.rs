//! Multivariate and product-oriented verification: energy score, p-variogram
//! score, average-rank and band-depth rank histograms, ensemble CRPS with a
//! quantile-score based reliability/resolution decomposition, and a day-block
//! bootstrap for sampling variability.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::ranks::{compute_ranks, TiePolicy};
use crate::seed::substream_seed;

/// Default number of bootstrap replicates.
pub const DEFAULT_REPLICATES: usize = 500;
/// Default number of forecast bins in the quantile-score decomposition.
pub const DEFAULT_DECOMPOSITION_BINS: usize = 10;
/// Probability levels reported by the bootstrap.
pub const BOOTSTRAP_LEVELS: [f64; 5] = [0.05, 0.25, 0.50, 0.75, 0.95];

fn check_case(scenarios: &Array2<f64>, obs: &[f64]) -> Result<()> {
    let (t, n) = scenarios.dim();
    if t == 0 || n == 0 {
        return Err(Error::InvalidArgument("empty scenario matrix".into()));
    }
    if obs.len() != t {
        return Err(Error::DimensionMismatch(format!(
            "observation has {} entries for {t} lead times",
            obs.len()
        )));
    }
    for (i, v) in obs.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite {
                what: "observations",
                row: 0,
                col: i,
            });
        }
    }
    Ok(())
}

/// Energy score of an `T x N` scenario set against one observed trajectory,
/// Euclidean norm over the lead-time dimension.
pub fn energy_score(scenarios: &Array2<f64>, obs: &[f64]) -> Result<f64> {
    check_case(scenarios, obs)?;
    let (t_len, n) = scenarios.dim();
    let nf = n as f64;

    let norm_to_obs = |i: usize| -> f64 {
        (0..t_len)
            .map(|t| {
                let d = obs[t] - scenarios[(t, i)];
                d * d
            })
            .sum::<f64>()
            .sqrt()
    };
    let norm_between = |i: usize, j: usize| -> f64 {
        (0..t_len)
            .map(|t| {
                let d = scenarios[(t, i)] - scenarios[(t, j)];
                d * d
            })
            .sum::<f64>()
            .sqrt()
    };

    let first = (0..n).map(norm_to_obs).sum::<f64>() / nf;
    let mut second = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            second += 2.0 * norm_between(i, j);
        }
    }
    Ok(first - second / (2.0 * nf * nf))
}

/// p-variogram score with inverse-square time-lag weights, summed over all
/// ordered pairs of distinct lead times.
pub fn variogram_score(scenarios: &Array2<f64>, obs: &[f64], p: f64) -> Result<f64> {
    check_case(scenarios, obs)?;
    if !(p > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "variogram order must be positive, got {p}"
        )));
    }
    let (t_len, n) = scenarios.dim();
    let nf = n as f64;
    let mut score = 0.0;
    for i in 0..t_len {
        for j in (i + 1)..t_len {
            let weight = 1.0 / ((i as f64 - j as f64) * (i as f64 - j as f64));
            let obs_term = (obs[i] - obs[j]).abs().powf(p);
            let mut mean_term = 0.0;
            for m in 0..n {
                mean_term += (scenarios[(i, m)] - scenarios[(j, m)]).abs().powf(p);
            }
            mean_term /= nf;
            let d = obs_term - mean_term;
            // Unordered pair counted once here; the ordered-pair sum in the
            // definition counts it twice.
            score += 2.0 * weight * d * d;
        }
    }
    Ok(score)
}

/// Pre-rank flavor of the multivariate rank histogram.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PreRank {
    /// Mean over lead times of the univariate rank.
    AverageRank,
    /// Functional band depth `(1/T) sum (K - R)(R - 1)`, low for series that
    /// are extreme somewhere.
    BandDepth,
}

/// Rank of the observation among the `N` scenarios, in `1..=N+1`, after
/// reducing each of the `K = N + 1` pooled series to a scalar pre-rank.
pub fn multivariate_rank(
    scenarios: &Array2<f64>,
    obs: &[f64],
    kind: PreRank,
    tie_policy: TiePolicy,
    rng: &mut impl Rng,
) -> Result<usize> {
    check_case(scenarios, obs)?;
    let (t_len, n) = scenarios.dim();
    let k = n + 1;

    // Pool the observation as column n.
    let mut pooled = Array2::<f64>::zeros((t_len, k));
    for t in 0..t_len {
        for i in 0..n {
            pooled[(t, i)] = scenarios[(t, i)];
        }
        pooled[(t, n)] = obs[t];
    }
    let univariate = compute_ranks(&pooled, tie_policy, rng)?;

    let kf = k as f64;
    let prerank = |col: usize| -> f64 {
        let mut acc = 0.0;
        for t in 0..t_len {
            let r = univariate.rank(t, col) as f64;
            acc += match kind {
                PreRank::AverageRank => r,
                PreRank::BandDepth => (kf - r) * (r - 1.0),
            };
        }
        acc / t_len as f64
    };
    let preranks: Vec<f64> = (0..k).map(prerank).collect();

    let prerank_row =
        Array2::from_shape_vec((1, k), preranks).expect("shape is consistent by construction");
    let final_ranks = compute_ranks(&prerank_row, tie_policy, rng)?;
    Ok(final_ranks.rank(0, n))
}

/// Ensemble CRPS in the standard pairwise form:
/// `mean |x - y| - (1/(2 N^2)) sum |x_m - x_p|`.
pub fn crps_ensemble(members: &[f64], y: f64) -> Result<f64> {
    if members.is_empty() {
        return Err(Error::InvalidArgument(
            "ensemble CRPS needs at least one member".into(),
        ));
    }
    if !y.is_finite() || members.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "ensemble CRPS inputs must be finite".into(),
        ));
    }
    let n = members.len() as f64;
    let first = members.iter().map(|&x| (x - y).abs()).sum::<f64>() / n;
    let mut spread = 0.0;
    for (i, &a) in members.iter().enumerate() {
        for &b in &members[(i + 1)..] {
            spread += 2.0 * (a - b).abs();
        }
    }
    Ok(first - spread / (2.0 * n * n))
}

/// Reliability/resolution/uncertainty split of the ensemble CRPS, aggregated
/// from per-level quantile-score decompositions with weight `2 / N`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CrpsDecomposition {
    pub reliability: f64,
    pub resolution: f64,
    pub uncertainty: f64,
}

impl CrpsDecomposition {
    /// `reliability - resolution + uncertainty`; approximates the mean
    /// ensemble CRPS of the input cases.
    pub fn total(&self) -> f64 {
        self.reliability - self.resolution + self.uncertainty
    }
}

fn pinball(tau: f64, y: f64, q: f64) -> f64 {
    let u = y - q;
    if u < 0.0 {
        (tau - 1.0) * u
    } else {
        tau * u
    }
}

/// Lowest empirical tau-quantile of `sorted` (ascending).
fn empirical_quantile(sorted: &[f64], tau: f64) -> f64 {
    let n = sorted.len();
    let k = ((tau * n as f64).ceil() as usize).clamp(1, n);
    sorted[k - 1]
}

/// Decompose the mean CRPS of `(members, observation)` cases following the
/// binned quantile-score approach: per level, the n-th sorted member is the
/// quantile forecast, forecasts are grouped into equally populated bins, and
/// conditional observed quantiles give the reliability and resolution parts.
pub fn crps_decomposition(
    cases: &[(Vec<f64>, f64)],
    bins: usize,
) -> Result<CrpsDecomposition> {
    let n_cases = cases.len();
    if n_cases < 2 {
        return Err(Error::InsufficientData(format!(
            "CRPS decomposition needs at least 2 cases, got {n_cases}"
        )));
    }
    if bins == 0 {
        return Err(Error::InvalidArgument("bin count must be positive".into()));
    }
    let n_members = cases[0].0.len();
    if n_members == 0 || cases.iter().any(|(m, _)| m.len() != n_members) {
        return Err(Error::DimensionMismatch(
            "all cases must have the same positive member count".into(),
        ));
    }
    if n_cases < 100 {
        log::warn!("CRPS decomposition over only {n_cases} cases; treat as noisy");
    }
    let bins = if bins > n_cases {
        log::warn!("reducing decomposition bins from {bins} to {n_cases} cases");
        n_cases
    } else {
        bins
    };

    let mut sorted_members: Vec<Vec<f64>> = cases
        .iter()
        .map(|(m, _)| {
            let mut v = m.clone();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            v
        })
        .collect();
    let observations: Vec<f64> = cases.iter().map(|(_, y)| y).copied().collect();
    let mut sorted_obs = observations.clone();
    sorted_obs.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let nf = n_cases as f64;
    let mut reliability = 0.0;
    let mut resolution = 0.0;
    let mut uncertainty = 0.0;

    for level in 0..n_members {
        let tau = (level + 1) as f64 / (n_members + 1) as f64;
        let clim = empirical_quantile(&sorted_obs, tau);

        // Forecast order defines the equally populated bins.
        let mut order: Vec<usize> = (0..n_cases).collect();
        order.sort_by(|&a, &b| {
            sorted_members[a][level]
                .partial_cmp(&sorted_members[b][level])
                .unwrap()
        });

        let base = n_cases / bins;
        let extra = n_cases % bins;
        let mut start = 0;
        let mut rel_level = 0.0;
        let mut res_level = 0.0;
        for b in 0..bins {
            let size = base + usize::from(b < extra);
            if size == 0 {
                continue;
            }
            let members_in_bin = &order[start..start + size];
            start += size;
            let mut ys: Vec<f64> = members_in_bin.iter().map(|&i| observations[i]).collect();
            ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let conditional = empirical_quantile(&ys, tau);
            for &i in members_in_bin {
                let y = observations[i];
                let q = sorted_members[i][level];
                rel_level += pinball(tau, y, q) - pinball(tau, y, conditional);
                res_level += pinball(tau, y, clim) - pinball(tau, y, conditional);
            }
        }
        let unc_level: f64 = observations.iter().map(|&y| pinball(tau, y, clim)).sum();

        let weight = 2.0 / n_members as f64;
        reliability += weight * rel_level / nf;
        resolution += weight * res_level / nf;
        uncertainty += weight * unc_level / nf;
    }
    sorted_members.clear();

    Ok(CrpsDecomposition {
        reliability,
        resolution,
        uncertainty,
    })
}

/// One verification day's score values (one per station).
#[derive(Debug, Clone)]
pub struct DayScores {
    pub day: NaiveDate,
    pub values: Vec<f64>,
}

/// Bootstrap quantile summary over replicate means.
#[derive(Debug, Clone, Serialize)]
pub struct BootstrapSummary {
    pub replicates: usize,
    pub levels: [f64; 5],
    pub quantiles: [f64; 5],
}

/// Day draws for each replicate, derived from per-replicate substreams of
/// `seed` so replicates are independent of evaluation order and shared
/// across score kinds.
pub fn bootstrap_day_draws(n_days: usize, replicates: usize, seed: u64) -> Vec<Vec<usize>> {
    (0..replicates)
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(substream_seed(seed, r as u64));
            (0..n_days).map(|_| rng.random_range(0..n_days)).collect()
        })
        .collect()
}

/// Mean score per replicate: drawn days contribute all their station values.
pub fn replicate_means(days: &[DayScores], draws: &[Vec<usize>]) -> Vec<f64> {
    draws
        .iter()
        .map(|draw| {
            let mut sum = 0.0;
            let mut count = 0usize;
            for &d in draw {
                for v in &days[d].values {
                    sum += v;
                    count += 1;
                }
            }
            sum / count as f64
        })
        .collect()
}

/// Type-7 (linear interpolation) quantile of already sorted data.
fn sorted_quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = p * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Day-block bootstrap of a per-day score table: resample days with
/// replacement, recompute the mean, report quantiles of the replicate means.
/// Deterministic for a fixed seed.
pub fn block_bootstrap(
    days: &[DayScores],
    replicates: usize,
    seed: u64,
) -> Result<BootstrapSummary> {
    let distinct: std::collections::BTreeSet<NaiveDate> = days.iter().map(|d| d.day).collect();
    if distinct.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "block bootstrap needs at least 2 distinct days, got {}",
            distinct.len()
        )));
    }
    if replicates == 0 {
        return Err(Error::InvalidArgument("need at least one replicate".into()));
    }
    let draws = bootstrap_day_draws(days.len(), replicates, seed);
    let mut means = replicate_means(days, &draws);
    means.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let quantiles = BOOTSTRAP_LEVELS.map(|p| sorted_quantile(&means, p));
    Ok(BootstrapSummary {
        replicates,
        levels: BOOTSTRAP_LEVELS,
        quantiles,
    })
}

/// Which rank histogram a count vector belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum HistogramKind {
    Univariate,
    AverageRank,
    BandDepth,
}

/// Counts of observation ranks, one bin per possible rank `1..=N+1`.
#[derive(Debug, Clone, Serialize)]
pub struct RankHistogram {
    pub kind: HistogramKind,
    pub counts: Vec<usize>,
}

impl RankHistogram {
    pub fn new(kind: HistogramKind, n_bins: usize) -> Self {
        Self {
            kind,
            counts: vec![0; n_bins],
        }
    }

    pub fn record(&mut self, rank: usize) {
        self.counts[rank - 1] += 1;
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Deviation from uniformity: `sum_k |f_k - 1/K|` over relative
    /// frequencies.
    pub fn flatness_index(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        let k = self.counts.len() as f64;
        self.counts
            .iter()
            .map(|&c| (c as f64 / total as f64 - 1.0 / k).abs())
            .sum()
    }

    /// p-value of the chi-square test against the uniform distribution.
    pub fn chi_square_uniform_pvalue(&self) -> f64 {
        chi_square_uniform_pvalue(&self.counts)
    }
}

/// Chi-square goodness-of-fit p-value against equal cell probabilities.
pub fn chi_square_uniform_pvalue(counts: &[usize]) -> f64 {
    let k = counts.len();
    let total: usize = counts.iter().sum();
    if k < 2 || total == 0 {
        return 1.0;
    }
    let expected = total as f64 / k as f64;
    let stat: f64 = counts
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum();
    let dist = ChiSquared::new((k - 1) as f64).expect("positive degrees of freedom");
    1.0 - dist.cdf(stat)
}

/// Per-day score tables keyed by score kind, convenience alias used by the
/// pipeline layer.
pub type ScoreTable = BTreeMap<String, Vec<DayScores>>;
