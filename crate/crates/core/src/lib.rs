//! Post-processing of ensemble wind forecasts into calibrated, temporally
//! coherent scenario sets, plus the verification machinery to judge them.
//!
//! The pipeline is: per-lead-time EMOS calibration ([`calibration`]) turns a
//! raw ensemble into equidistant quantile forecasts, an empirical copula
//! ([`copula`]) reorders those quantiles into scenarios (ECC, d-ECC or a
//! climatological template), and [`verification`] / [`spectral`] measure
//! whether the reconstructed scenarios are any good. [`synthetic`] generates
//! controllable datasets so every claim can be checked at desk scale.

pub mod calibration;
pub mod copula;
pub mod ensemble;
pub mod error;
pub mod linalg;
mod optim;
pub mod ranks;
pub mod seed;
pub mod spectral;
pub mod synthetic;
pub mod verification;

pub use crate::{
    calibration::{crps_normal, emit_quantiles, fit_emos, EmosCoefficients, TrainingWindow},
    copula::{
        climatological_template, covariance_decomposition, decc, ecc, estimate_error_correlation,
        CorrectionSet, ErrorCorrelationMatrix, Template,
    },
    ensemble::{EnsembleForecast, ObservationSeries, Provenance, QuantileSet, ScenarioSet},
    error::{Error, Result},
    linalg::{eigh, pearson, sqrt_psd, SymmetricMatrix},
    ranks::{compute_ranks, RankMatrix, TiePolicy},
    spectral::{amplitude_spectrum, mean_spectrum, AmplitudeSpectrum, MeanSpectrum},
    synthetic::{generate, GeneratorConfig, SyntheticDataset},
    verification::{
        block_bootstrap, crps_decomposition, crps_ensemble, energy_score, multivariate_rank,
        variogram_score, BootstrapSummary, CrpsDecomposition, PreRank, RankHistogram,
    },
};
