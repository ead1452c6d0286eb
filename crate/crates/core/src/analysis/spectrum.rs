//! Discrete spectra of uniformly sampled scans.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Zero-padding factor of the evaluated frequency grid.
pub const OVERSAMPLING: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub frequencies_hz: Vec<f64>,
    pub power: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralPeak {
    pub frequency_hz: f64,
    pub power: f64,
    /// `1/T` for a record of length `T = n·Δt`.
    pub resolution_hz: f64,
}

fn sample_step(times: &[f64]) -> Result<f64> {
    if times.len() < 4 {
        return Err(Error::FitInput(format!("{} samples; at least 4 needed", times.len())));
    }
    let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::FitInput("sample times must increase".into()));
    }
    let uniform = times
        .windows(2)
        .all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-6 * dt);
    if !uniform {
        return Err(Error::FitInput("sample times must be uniform".into()));
    }
    Ok(dt)
}

/// Power `|Σ (y_k − ȳ)·e^{−2πi f t_k}|²/n` from 0 to Nyquist on a grid
/// oversampled by [`OVERSAMPLING`].
pub fn periodogram(times: &[f64], values: &[f64]) -> Result<Spectrum> {
    if values.len() != times.len() {
        return Err(Error::FitInput("time and value grids differ in length".into()));
    }
    let dt = sample_step(times)?;
    let n = times.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let padded = n * OVERSAMPLING;
    let df = 1.0 / (padded as f64 * dt);
    let bins = padded / 2 + 1;
    let mut frequencies_hz = Vec::with_capacity(bins);
    let mut power = Vec::with_capacity(bins);
    for b in 0..bins {
        let f = b as f64 * df;
        let (mut re, mut im) = (0.0, 0.0);
        for (k, y) in values.iter().enumerate() {
            let (s, c) = (2.0 * PI * f * (times[k] - times[0])).sin_cos();
            re += (y - mean) * c;
            im -= (y - mean) * s;
        }
        frequencies_hz.push(f);
        power.push((re * re + im * im) / n as f64);
    }
    Ok(Spectrum {
        frequencies_hz,
        power,
    })
}

/// Strongest non-DC component, refined by a parabola through the three bins
/// around the maximum.
pub fn dominant_frequency(times: &[f64], values: &[f64]) -> Result<SpectralPeak> {
    let spec = periodogram(times, values)?;
    let n = times.len();
    let dt = (times[n - 1] - times[0]) / (n - 1) as f64;
    let resolution_hz = 1.0 / (n as f64 * dt);
    // Skip the DC lobe, which the mean removal leaves only partly suppressed.
    let start = OVERSAMPLING / 2;
    let (i, &pmax) = spec.power[start..]
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, p)| (i + start, p))
        .ok_or_else(|| Error::FitInput("empty spectrum".into()))?;
    if pmax <= 0.0 {
        return Err(Error::FitInput("flat signal has no spectral peak".into()));
    }
    let df = spec.frequencies_hz[1] - spec.frequencies_hz[0];
    let mut f = spec.frequencies_hz[i];
    if i > 0 && i + 1 < spec.power.len() {
        let (a, b, c) = (spec.power[i - 1], spec.power[i], spec.power[i + 1]);
        let den = a - 2.0 * b + c;
        if den < 0.0 {
            f += 0.5 * (a - c) / den * df;
        }
    }
    Ok(SpectralPeak {
        frequency_hz: f,
        power: pmax,
        resolution_hz,
    })
}
