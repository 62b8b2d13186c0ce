//! Shared fixtures for the criterion benchmarks: representative forecast
//! cases, quantile sets, correlation matrices and training windows at the
//! operational problem size (21 lead times, 20 members, 45 training days).

use chrono::NaiveDate;
use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use windecc_core::calibration::{TrainingCase, TrainingWindow};
use windecc_core::copula::ErrorCorrelationMatrix;
use windecc_core::linalg::SymmetricMatrix;
use windecc_core::{EnsembleForecast, QuantileSet};

pub const LEAD_TIMES: usize = 21;
pub const MEMBERS: usize = 20;
pub const WINDOW_DAYS: usize = 45;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn forecast(rng: &mut ChaCha8Rng) -> EnsembleForecast {
    let mut members = Array2::<f64>::zeros((LEAD_TIMES, MEMBERS));
    for v in members.iter_mut() {
        *v = rng.random_range(0.0..20.0);
    }
    EnsembleForecast::new(
        NaiveDate::from_ymd_opt(2013, 3, 2).unwrap(),
        "S01",
        (1..=LEAD_TIMES as u32).collect(),
        members,
    )
    .unwrap()
}

pub fn quantiles(rng: &mut ChaCha8Rng) -> QuantileSet {
    let mut values = Array2::<f64>::zeros((LEAD_TIMES, MEMBERS));
    for t in 0..LEAD_TIMES {
        let mut level: f64 = rng.random_range(0.0..5.0);
        for i in 0..MEMBERS {
            values[(t, i)] = level;
            level += rng.random_range(0.05..0.8);
        }
    }
    QuantileSet::new(values).unwrap()
}

/// Exponentially decaying correlation matrix (positive definite).
pub fn correlation(dim: usize, rho: f64) -> ErrorCorrelationMatrix {
    let mut m = Array2::<f64>::eye(dim);
    for i in 0..dim {
        for j in 0..dim {
            m[(i, j)] = rho.powi((i as i32 - j as i32).abs());
        }
    }
    ErrorCorrelationMatrix::new(SymmetricMatrix::new(m).unwrap()).unwrap()
}

pub fn random_symmetric(rng: &mut ChaCha8Rng, dim: usize) -> SymmetricMatrix {
    let mut m = Array2::<f64>::zeros((dim, dim));
    for i in 0..dim {
        for j in i..dim {
            let v = rng.random_range(-1.0..1.0);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    SymmetricMatrix::new(m).unwrap()
}

/// Training window with one synthetic regression sample per day.
pub fn training_window(rng: &mut ChaCha8Rng) -> TrainingWindow {
    let start = NaiveDate::from_ymd_opt(2013, 1, 1).unwrap();
    let cases: Vec<TrainingCase> = (0..WINDOW_DAYS)
        .map(|i| {
            let means: Vec<f64> = (0..LEAD_TIMES).map(|_| rng.random_range(4.0..12.0)).collect();
            let variances: Vec<f64> = (0..LEAD_TIMES).map(|_| rng.random_range(0.1..0.8)).collect();
            let observations = means
                .iter()
                .map(|m| Some(m + rng.random_range(-2.0..2.0)))
                .collect();
            TrainingCase {
                date: start + chrono::Duration::days(i as i64),
                ensemble_mean: means,
                ensemble_variance: variances,
                observations,
            }
        })
        .collect();
    TrainingWindow::new(
        start + chrono::Duration::days(WINDOW_DAYS as i64),
        WINDOW_DAYS,
        LEAD_TIMES,
        cases,
    )
    .unwrap()
}
