//! Discrete Fourier amplitude spectra of scenario and observation series.
//!
//! Series have their mean removed (no tapering; horizons are short) and the
//! amplitude at wavenumber `k` is `2 |X_k| / T` for `k = 1..=T/2`, so a pure
//! tone of amplitude `A` shows up as `A` in its bin.

use std::collections::BTreeMap;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Amplitudes of one mean-removed series at wavenumbers `1..=T/2`.
pub fn amplitude_spectrum(series: &[f64]) -> Result<Vec<f64>> {
    let t = series.len();
    if t < 2 {
        return Err(Error::InvalidArgument(
            "amplitude spectrum needs at least 2 samples".into(),
        ));
    }
    for (i, v) in series.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite {
                what: "spectrum series",
                row: 0,
                col: i,
            });
        }
    }
    let mean = series.iter().sum::<f64>() / t as f64;
    let mut buffer: Vec<Complex<f64>> = series
        .iter()
        .map(|&v| Complex::new(v - mean, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(t).process(&mut buffer);
    let scale = 2.0 / t as f64;
    Ok((1..=t / 2).map(|k| scale * buffer[k].norm()).collect())
}

/// Frequency grid in cycles per time step for a length-`t` series:
/// `k / t` for `k = 1..=t/2`.
pub fn frequency_grid(t: usize) -> Vec<f64> {
    (1..=t / 2).map(|k| k as f64 / t as f64).collect()
}

/// Frequency-wise mean amplitude over a collection of equal-length series.
#[derive(Debug, Clone)]
pub struct MeanSpectrum {
    pub series_len: usize,
    pub series_count: usize,
    pub frequencies: Vec<f64>,
    pub amplitudes: Vec<f64>,
}

impl MeanSpectrum {
    /// Mean amplitude over the high-frequency band, defined as periods of at
    /// most `max_period` time steps. `None` when the band is empty.
    pub fn high_frequency_mean(&self, max_period: f64) -> Option<f64> {
        let t = self.series_len as f64;
        let band: Vec<f64> = self
            .amplitudes
            .iter()
            .enumerate()
            .filter(|(idx, _)| t / (idx + 1) as f64 <= max_period)
            .map(|(_, a)| *a)
            .collect();
        if band.is_empty() {
            None
        } else {
            Some(band.iter().sum::<f64>() / band.len() as f64)
        }
    }
}

/// Average the per-series amplitude spectra of `series`, which must all have
/// the same length.
pub fn mean_spectrum<'a, I>(series: I) -> Result<MeanSpectrum>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut acc: Option<Vec<f64>> = None;
    let mut len = 0usize;
    let mut count = 0usize;
    for s in series {
        let amp = amplitude_spectrum(s)?;
        match &mut acc {
            None => {
                len = s.len();
                acc = Some(amp);
            }
            Some(acc) => {
                if s.len() != len {
                    return Err(Error::DimensionMismatch(format!(
                        "series of length {} mixed with length {len}",
                        s.len()
                    )));
                }
                for (a, b) in acc.iter_mut().zip(&amp) {
                    *a += b;
                }
            }
        }
        count += 1;
    }
    let Some(mut amplitudes) = acc else {
        return Err(Error::InsufficientData(
            "mean spectrum needs at least one series".into(),
        ));
    };
    for a in &mut amplitudes {
        *a /= count as f64;
    }
    Ok(MeanSpectrum {
        series_len: len,
        series_count: count,
        frequencies: frequency_grid(len),
        amplitudes,
    })
}

/// Mean amplitude spectra of several scenario sources on one frequency grid.
#[derive(Debug, Clone, Default)]
pub struct AmplitudeSpectrum {
    pub frequencies: Vec<f64>,
    pub series_len: usize,
    pub sources: BTreeMap<String, Vec<f64>>,
}

impl AmplitudeSpectrum {
    pub fn add_source(&mut self, label: impl Into<String>, spectrum: MeanSpectrum) -> Result<()> {
        if self.sources.is_empty() {
            self.frequencies = spectrum.frequencies;
            self.series_len = spectrum.series_len;
        } else if spectrum.frequencies != self.frequencies {
            return Err(Error::DimensionMismatch(
                "spectrum frequency grids differ between sources".into(),
            ));
        }
        self.sources.insert(label.into(), spectrum.amplitudes);
        Ok(())
    }

    pub fn source(&self, label: &str) -> Option<MeanSpectrum> {
        self.sources.get(label).map(|amplitudes| MeanSpectrum {
            series_len: self.series_len,
            series_count: 0,
            frequencies: self.frequencies.clone(),
            amplitudes: amplitudes.clone(),
        })
    }
}
