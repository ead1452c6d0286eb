//! Photon-counting readout of the NV and optimal combination of repetitive
//! readouts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReadoutModel {
    /// Mean detected photons per shot for the bright state.
    pub photons_bright: f64,
    /// Fractional count reduction of the dark state.
    pub contrast: f64,
    /// Shots averaged per point.
    pub shots: u64,
}

impl Default for ReadoutModel {
    fn default() -> Self {
        ReadoutModel {
            photons_bright: 0.03,
            contrast: 0.3,
            shots: 1_000_000,
        }
    }
}

impl ReadoutModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.photons_bright > 0.0 && self.photons_bright.is_finite()) {
            return Err(Error::OutOfRange {
                name: "photons_bright",
                value: self.photons_bright,
            });
        }
        if !(self.contrast > 0.0 && self.contrast < 1.0) {
            return Err(Error::OutOfRange {
                name: "contrast",
                value: self.contrast,
            });
        }
        if self.shots == 0 {
            return Err(Error::OutOfRange {
                name: "shots",
                value: 0.0,
            });
        }
        Ok(())
    }

    /// Mean counts per shot, `n₀(1 − C(1 − p))`.
    pub fn mean_counts(&self, p_bright: f64) -> f64 {
        self.photons_bright * (1.0 - self.contrast * (1.0 - p_bright))
    }

    /// Shot-noise standard deviation of the polarization estimate `2p − 1`
    /// averaged over `shots`, evaluated at `p = 1/2`.
    pub fn signal_sigma(&self) -> f64 {
        let mean = self.mean_counts(0.5) * self.shots as f64;
        let slope = self.photons_bright * self.contrast / 2.0 * self.shots as f64;
        mean.sqrt() / slope
    }

    /// Inverts total counts over `shots` into a polarization estimate.
    pub fn estimate_signal(&self, counts: u64) -> f64 {
        let per_shot = counts as f64 / (self.shots as f64 * self.photons_bright);
        let p = 1.0 - (1.0 - per_shot) / self.contrast;
        2.0 * p - 1.0
    }
}

/// Total counts over `model.shots` shots, drawn from `rng`.
pub fn sample_counts<R: Rng + ?Sized>(p_bright: f64, model: &ReadoutModel, rng: &mut R) -> Result<u64> {
    if !(0.0..=1.0).contains(&p_bright) {
        return Err(Error::OutOfRange {
            name: "p_bright",
            value: p_bright,
        });
    }
    model.validate()?;
    let lambda = model.mean_counts(p_bright) * model.shots as f64;
    if lambda <= 0.0 {
        return Ok(0);
    }
    let dist = Poisson::new(lambda).map_err(|_| Error::OutOfRange {
        name: "poisson mean",
        value: lambda,
    })?;
    Ok(dist.sample(rng) as u64)
}

/// Deterministic per seed.
pub fn simulate_counts(p_bright: f64, model: &ReadoutModel, seed: u64) -> Result<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_counts(p_bright, model, &mut rng)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedReadout {
    pub amplitudes: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub weights: Vec<f64>,
}

impl WeightedReadout {
    pub fn new(amplitudes: Vec<f64>, sigmas: Vec<f64>) -> Result<Self> {
        let weights = optimal_weights(&amplitudes, &sigmas)?;
        Ok(WeightedReadout {
            amplitudes,
            sigmas,
            weights,
        })
    }

    /// Optimally weighted signal gain `Σa_k / a₀` of the first `m + 1` readouts.
    pub fn cumulative_amplitude(&self, m: usize) -> f64 {
        self.amplitudes[..=m].iter().sum::<f64>() / self.amplitudes[0]
    }

    pub fn snr_gain(&self) -> Result<Vec<f64>> {
        cumulative_snr(&self.amplitudes, &self.sigmas)
    }
}

fn check_ladder(a: &[f64], sigma: &[f64]) -> Result<()> {
    if a.is_empty() || a.len() != sigma.len() {
        return Err(Error::FitInput(format!(
            "{} amplitudes for {} noise levels",
            a.len(),
            sigma.len()
        )));
    }
    if let Some(&s) = sigma.iter().find(|&&s| !(s > 0.0 && s.is_finite())) {
        return Err(Error::OutOfRange {
            name: "sigma",
            value: s,
        });
    }
    if let Some(&x) = a.iter().find(|x| !x.is_finite()) {
        return Err(Error::OutOfRange {
            name: "amplitude",
            value: x,
        });
    }
    Ok(())
}

/// Weights `w_k ∝ a_k/σ_k²` scaled so that `Σ w_k·a_k = 1`, which makes the
/// combination `Σ w_k·s_k` unbiased for a signal `s_k = a_k·x`.
pub fn optimal_weights(a: &[f64], sigma: &[f64]) -> Result<Vec<f64>> {
    check_ladder(a, sigma)?;
    let raw: Vec<f64> = a.iter().zip(sigma).map(|(a, s)| a / (s * s)).collect();
    let norm: f64 = raw.iter().zip(a).map(|(w, a)| w * a).sum();
    if norm == 0.0 {
        return Err(Error::ZeroAmplitudes);
    }
    Ok(raw.into_iter().map(|w| w / norm).collect())
}

/// Variance `Σ w_k²σ_k²` of a weighted combination.
pub fn combined_variance(weights: &[f64], sigma: &[f64]) -> f64 {
    weights.iter().zip(sigma).map(|(w, s)| w * w * s * s).sum()
}

/// `SNR(m) = sqrt(Σ_{k≤m} (a_k/σ_k)²)` without normalization.
pub fn snr(a: &[f64], sigma: &[f64]) -> Result<Vec<f64>> {
    check_ladder(a, sigma)?;
    let mut acc = 0.0;
    Ok(a
        .iter()
        .zip(sigma)
        .map(|(a, s)| {
            acc += (a / s).powi(2);
            acc.sqrt()
        })
        .collect())
}

/// SNR gains `SNR(m)/SNR(0)`.
pub fn cumulative_snr(a: &[f64], sigma: &[f64]) -> Result<Vec<f64>> {
    let s = snr(a, sigma)?;
    if s[0] == 0.0 {
        return Err(Error::ZeroAmplitudes);
    }
    Ok(s.iter().map(|v| v / s[0]).collect())
}
