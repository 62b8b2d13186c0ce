//! Independent re-evaluations of the scoring rules against the library
//! implementations: naive double-loop energy and variogram scores, uniformity
//! of multivariate rank histograms under exchangeability, and bootstrap
//! sampling behavior.

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use windecc_core::verification::{
    block_bootstrap, bootstrap_day_draws, chi_square_uniform_pvalue, crps_ensemble, energy_score,
    multivariate_rank, replicate_means, variogram_score, DayScores, HistogramKind, PreRank,
    RankHistogram,
};
use windecc_core::TiePolicy;

/// Literal transcription of the energy score definition: full double sums
/// over all ordered member pairs.
fn energy_score_direct(scenarios: &Array2<f64>, obs: &[f64]) -> f64 {
    let (t_len, n) = scenarios.dim();
    let norm = |a: &dyn Fn(usize) -> f64, b: &dyn Fn(usize) -> f64| -> f64 {
        (0..t_len).map(|t| (a(t) - b(t)).powi(2)).sum::<f64>().sqrt()
    };
    let nf = n as f64;
    let mut first = 0.0;
    for i in 0..n {
        first += norm(&|t| obs[t], &|t| scenarios[(t, i)]);
    }
    first /= nf;
    let mut second = 0.0;
    for m in 0..n {
        for p in 0..n {
            second += norm(&|t| scenarios[(t, m)], &|t| scenarios[(t, p)]);
        }
    }
    first - second / (2.0 * nf * nf)
}

/// Literal transcription of the p-variogram score: all ordered pairs of
/// distinct lead times with inverse square lag weights.
fn variogram_score_direct(scenarios: &Array2<f64>, obs: &[f64], p: f64) -> f64 {
    let (t_len, n) = scenarios.dim();
    let mut total = 0.0;
    for i in 0..t_len {
        for j in 0..t_len {
            if i == j {
                continue;
            }
            let w = 1.0 / ((i as f64 - j as f64).powi(2));
            let mut mean = 0.0;
            for m in 0..n {
                mean += (scenarios[(i, m)] - scenarios[(j, m)]).abs().powf(p);
            }
            mean /= n as f64;
            let d = (obs[i] - obs[j]).abs().powf(p) - mean;
            total += w * d * d;
        }
    }
    total
}

fn random_case(rng: &mut ChaCha8Rng, t_len: usize, n: usize) -> (Array2<f64>, Vec<f64>) {
    let mut scenarios = Array2::<f64>::zeros((t_len, n));
    for v in scenarios.iter_mut() {
        *v = rng.random_range(0.0..15.0);
    }
    let obs: Vec<f64> = (0..t_len).map(|_| rng.random_range(0.0..15.0)).collect();
    (scenarios, obs)
}

#[test]
fn energy_score_matches_direct_evaluation() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..100 {
        let t_len = rng.random_range(2..8);
        let n = rng.random_range(1..12);
        let (scenarios, obs) = random_case(&mut rng, t_len, n);
        let fast = energy_score(&scenarios, &obs).unwrap();
        let direct = energy_score_direct(&scenarios, &obs);
        assert!(
            (fast - direct).abs() < 1e-12,
            "ES mismatch: {fast} vs {direct}"
        );
    }
}

#[test]
fn variogram_score_matches_direct_evaluation() {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    for &p in &[0.5, 1.0] {
        for _ in 0..50 {
            let t_len = rng.random_range(2..8);
            let n = rng.random_range(1..12);
            let (scenarios, obs) = random_case(&mut rng, t_len, n);
            let fast = variogram_score(&scenarios, &obs, p).unwrap();
            let direct = variogram_score_direct(&scenarios, &obs, p);
            assert!(
                (fast - direct).abs() < 1e-12,
                "pVS mismatch at p={p}: {fast} vs {direct}"
            );
        }
    }
}

#[test]
fn energy_score_at_single_lead_time_equals_ensemble_crps_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    for _ in 0..100 {
        let n = rng.random_range(1..25);
        let members: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..15.0)).collect();
        let y: f64 = rng.random_range(0.0..15.0);
        let scenarios = Array2::from_shape_vec((1, n), members.clone()).unwrap();
        let es = energy_score(&scenarios, &[y]).unwrap();
        let crps = crps_ensemble(&members, y).unwrap();
        assert_eq!(es, crps, "not bit-identical for members {members:?}");
    }
}

#[test]
fn scores_are_non_negative_and_zero_for_perfect_scenarios() {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    for _ in 0..50 {
        let (scenarios, obs) = random_case(&mut rng, 5, 8);
        assert!(energy_score(&scenarios, &obs).unwrap() >= 0.0);
        assert!(variogram_score(&scenarios, &obs, 0.5).unwrap() >= 0.0);
    }
    // All scenarios equal to the observation.
    let obs = vec![3.0, 4.0, 5.0];
    let mut perfect = Array2::<f64>::zeros((3, 6));
    for t in 0..3 {
        for i in 0..6 {
            perfect[(t, i)] = obs[t];
        }
    }
    assert_eq!(energy_score(&perfect, &obs).unwrap(), 0.0);
    assert_eq!(variogram_score(&perfect, &obs, 1.0).unwrap(), 0.0);
}

#[test]
fn variogram_score_is_shift_invariant_energy_score_is_not() {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let (scenarios, obs) = random_case(&mut rng, 6, 10);
    let shifted_scen = scenarios.mapv(|v| v + 7.0);
    let shifted_obs: Vec<f64> = obs.iter().map(|v| v + 7.0).collect();
    let a = variogram_score(&scenarios, &obs, 1.0).unwrap();
    let b = variogram_score(&shifted_scen, &shifted_obs, 1.0).unwrap();
    assert!((a - b).abs() < 1e-9, "pVS changed under constant shift");
    // Shifting only the scenarios away from the obs does move the ES.
    let es_a = energy_score(&scenarios, &obs).unwrap();
    let es_b = energy_score(&shifted_scen, &obs).unwrap();
    assert!(es_b > es_a);
}

#[test]
fn rank_histograms_of_exchangeable_data_are_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let t_len = 5;
    let n = 7;
    let mut arh = RankHistogram::new(HistogramKind::AverageRank, n + 1);
    let mut bdrh = RankHistogram::new(HistogramKind::BandDepth, n + 1);
    for _ in 0..10_000 {
        // Ensemble members and obs drawn from the same distribution,
        // independent across lead times: fully exchangeable.
        let mut scenarios = Array2::<f64>::zeros((t_len, n));
        for v in scenarios.iter_mut() {
            *v = normal.sample(&mut rng);
        }
        let obs: Vec<f64> = (0..t_len).map(|_| normal.sample(&mut rng)).collect();
        let ar = multivariate_rank(&scenarios, &obs, PreRank::AverageRank, TiePolicy::Random, &mut rng)
            .unwrap();
        let bd = multivariate_rank(&scenarios, &obs, PreRank::BandDepth, TiePolicy::Random, &mut rng)
            .unwrap();
        arh.record(ar);
        bdrh.record(bd);
    }
    let p_arh = arh.chi_square_uniform_pvalue();
    let p_bdrh = bdrh.chi_square_uniform_pvalue();
    assert!(p_arh > 0.01, "ARH not uniform: p = {p_arh}, {:?}", arh.counts);
    assert!(p_bdrh > 0.01, "BDRH not uniform: p = {p_bdrh}, {:?}", bdrh.counts);
}

#[test]
fn bdrh_is_center_heavy_when_ensemble_correlation_is_too_high() {
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let t_len = 8;
    let n = 9;
    let ar1 = |phi: f64, rng: &mut ChaCha8Rng| -> Vec<f64> {
        let innov = (1.0 - phi * phi).sqrt();
        let mut x = normal.sample(rng);
        let mut v = Vec::with_capacity(t_len);
        for _ in 0..t_len {
            v.push(x);
            x = phi * x + innov * normal.sample(rng);
        }
        v
    };
    let mut bdrh = RankHistogram::new(HistogramKind::BandDepth, n + 1);
    for _ in 0..4000 {
        // Members far more persistent than the observation, same marginals.
        let mut scenarios = Array2::<f64>::zeros((t_len, n));
        for i in 0..n {
            let path = ar1(0.95, &mut rng);
            for t in 0..t_len {
                scenarios[(t, i)] = path[t];
            }
        }
        let obs = ar1(0.2, &mut rng);
        let r = multivariate_rank(&scenarios, &obs, PreRank::BandDepth, TiePolicy::Random, &mut rng)
            .unwrap();
        bdrh.record(r);
    }
    let k = bdrh.counts.len();
    let edge: usize = bdrh.counts[..k / 3].iter().sum::<usize>()
        + bdrh.counts[k - k / 3..].iter().sum::<usize>();
    let center: usize = bdrh.counts[k / 3..k - k / 3].iter().sum();
    let edge_rate = edge as f64 / (2 * (k / 3)) as f64;
    let center_rate = center as f64 / (k - 2 * (k / 3)) as f64;
    assert!(
        center_rate > 1.2 * edge_rate,
        "expected cap shape, got counts {:?}",
        bdrh.counts
    );
}

#[test]
fn reliability_vanishes_for_perfectly_calibrated_forecasts() {
    use windecc_core::verification::crps_decomposition;
    let mut rng = ChaCha8Rng::seed_from_u64(110);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let n = 19;
    // Per case, the members are the equidistant quantiles of the law the
    // observation is drawn from, and the law moves from case to case.
    let z: Vec<f64> = (1..=n)
        .map(|k| {
            let tau = k as f64 / (n + 1) as f64;
            statrs::function::erf::erf_inv(2.0 * tau - 1.0) * std::f64::consts::SQRT_2
        })
        .collect();
    let cases: Vec<(Vec<f64>, f64)> = (0..5000)
        .map(|_| {
            let mu: f64 = rng.random_range(2.0..14.0);
            let members: Vec<f64> = z.iter().map(|zk| mu + 1.2 * zk).collect();
            (members, mu + 1.2 * normal.sample(&mut rng))
        })
        .collect();
    let d = crps_decomposition(&cases, 10).unwrap();
    let mean_crps = cases
        .iter()
        .map(|(m, y)| crps_ensemble(m, *y).unwrap())
        .sum::<f64>()
        / cases.len() as f64;
    assert!(
        d.reliability.abs() < 0.05 * mean_crps,
        "reliability {} vs mean CRPS {mean_crps}",
        d.reliability
    );
    // The forecast discriminates strongly between cases here.
    assert!(d.resolution > 0.5 * d.uncertainty);
}

#[test]
fn bootstrap_replicate_variance_shrinks_with_day_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let make_days = |count: usize, rng: &mut ChaCha8Rng| -> Vec<DayScores> {
        (0..count)
            .map(|i| DayScores {
                day: chrono::NaiveDate::from_ymd_opt(2013, 3, 1).unwrap()
                    + chrono::Duration::days(i as i64),
                values: vec![normal.sample(rng)],
            })
            .collect()
    };
    let variance = |days: &[DayScores]| -> f64 {
        let draws = bootstrap_day_draws(days.len(), 800, 99);
        let means = replicate_means(days, &draws);
        let m = means.iter().sum::<f64>() / means.len() as f64;
        means.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (means.len() - 1) as f64
    };
    let v_small = variance(&make_days(100, &mut rng));
    let v_large = variance(&make_days(400, &mut rng));
    let ratio = v_small / v_large;
    assert!(
        ratio > 2.0 && ratio < 8.0,
        "variance ratio {ratio}, expected about 4"
    );
}

#[test]
fn bootstrap_quantiles_are_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(109);
    let days: Vec<DayScores> = (0..40)
        .map(|i| DayScores {
            day: chrono::NaiveDate::from_ymd_opt(2013, 3, 1).unwrap()
                + chrono::Duration::days(i as i64),
            values: vec![rng.random_range(0.0..2.0), rng.random_range(0.0..2.0)],
        })
        .collect();
    let s = block_bootstrap(&days, 500, 5).unwrap();
    for w in s.quantiles.windows(2) {
        assert!(w[0] <= w[1]);
    }
}

#[test]
fn chi_square_helper_flags_obvious_non_uniformity() {
    assert!(chi_square_uniform_pvalue(&[100, 100, 100, 100]) > 0.99);
    assert!(chi_square_uniform_pvalue(&[400, 10, 10, 10]) < 1e-10);
}
