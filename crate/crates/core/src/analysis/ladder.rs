//! Geometric model of the repetitive-readout amplitude ladder and its
//! calibration.
//!
//! Readout 0 is the direct NV read with `a₀ = σ₀ = 1`. Readouts `k ≥ 1` map the
//! Xe population back onto the NV with amplitude `a_k = c·ρ^{k−1}` and noise
//! `σ_k = s`. The scale `c` is tied to the cumulative amplitude target.

use serde::{Deserialize, Serialize};

use crate::analysis::lm::{levenberg_marquardt, LmOptions, NumericProblem};
use crate::analysis::sensitivity::{gain_sensitivity, ReadoutLadder, SensitivityInputs};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometricLadder {
    pub scale: f64,
    pub ratio: f64,
    pub sigma: f64,
}

impl GeometricLadder {
    /// Ladder whose first `index + 1` amplitudes sum to `total` (in units of a₀).
    pub fn with_total(total: f64, index: usize, ratio: f64, sigma: f64) -> Result<Self> {
        if index == 0 {
            return Err(Error::OutOfRange {
                name: "ladder index",
                value: 0.0,
            });
        }
        let geometric: f64 = (0..index).map(|j| ratio.powi(j as i32)).sum();
        let ladder = GeometricLadder {
            scale: (total - 1.0) / geometric,
            ratio,
            sigma,
        };
        ladder.validate()?;
        Ok(ladder)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("ladder.scale", self.scale),
            ("ladder.ratio", self.ratio),
            ("ladder.sigma", self.sigma),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::OutOfRange { name, value: v });
            }
        }
        Ok(())
    }

    pub fn amplitude(&self, k: usize) -> f64 {
        if k == 0 {
            1.0
        } else {
            self.scale * self.ratio.powi(k as i32 - 1)
        }
    }

    /// Readouts `0..=max_m`.
    pub fn readouts(&self, max_m: usize) -> ReadoutLadder {
        ReadoutLadder {
            amplitudes: (0..=max_m).map(|k| self.amplitude(k)).collect(),
            sigmas: (0..=max_m).map(|k| if k == 0 { 1.0 } else { self.sigma }).collect(),
        }
    }
}

/// Measured targets that pin the ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LadderTargets {
    /// `Σ_{k≤index} a_k/a₀`, held exactly.
    pub total_amplitude: f64,
    pub index: usize,
    /// `SNR(index)/SNR(0)` with its uncertainty.
    pub snr_gain: f64,
    pub snr_gain_sigma: f64,
    /// Sensing time and readout count where `g̃` peaks, with the peak value.
    pub peak_tau_s: f64,
    pub peak_m: usize,
    pub peak_gain: f64,
    pub peak_gain_sigma: f64,
    /// Tolerance of `g̃(m−1) = g̃(m+1)` that centres the peak.
    pub symmetry_sigma: f64,
    pub max_m: usize,
}

impl Default for LadderTargets {
    fn default() -> Self {
        LadderTargets {
            total_amplitude: 4.2,
            index: 9,
            snr_gain: 1.91,
            snr_gain_sigma: 0.08,
            peak_tau_s: 19e-6,
            peak_m: 7,
            peak_gain: 0.55,
            peak_gain_sigma: 0.02,
            symmetry_sigma: 1e-3,
            max_m: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderCalibration {
    pub ladder: GeometricLadder,
    pub chi2: f64,
    pub converged: bool,
    pub snr_gain_at_index: f64,
    pub gain_at_peak: f64,
}

/// Fits `(ρ, s)` by weighted least squares against the SNR gain, the peak
/// value of `g̃` and the symmetry of the peak; `inputs` describes the sensing
/// conditions of the peak (its ladder is replaced).
pub fn calibrate_ladder(targets: &LadderTargets, inputs: &SensitivityInputs) -> Result<LadderCalibration> {
    if targets.peak_m == 0 || targets.peak_m >= targets.max_m || targets.index > targets.max_m {
        return Err(Error::FitInput("ladder targets outside 1..max_m".into()));
    }
    let evaluate = |p: &[f64]| -> Result<(GeometricLadder, f64, [f64; 3])> {
        let ladder = GeometricLadder::with_total(targets.total_amplitude, targets.index, p[0], p[1])?;
        let mut local = inputs.clone();
        local.ladder = ladder.readouts(targets.max_m);
        let gains = local.ladder.snr_gains()?;
        let at = |m: usize| gain_sensitivity(&local, targets.peak_tau_s, m).map(|r| r.g_tilde);
        let g = [at(targets.peak_m - 1)?, at(targets.peak_m)?, at(targets.peak_m + 1)?];
        Ok((ladder, gains[targets.index], g))
    };
    let residuals = |p: &[f64]| -> Vec<f64> {
        match evaluate(p) {
            Ok((_, snr, g)) => vec![
                (snr - targets.snr_gain) / targets.snr_gain_sigma,
                (g[1] - targets.peak_gain) / targets.peak_gain_sigma,
                (g[0] - g[2]) / targets.symmetry_sigma,
            ],
            Err(_) => vec![f64::NAN; 3],
        }
    };
    let problem = NumericProblem {
        n_params: 2,
        residuals,
        lower: vec![0.05, 0.05],
        upper: vec![0.9999, 5.0],
    };
    let report = levenberg_marquardt(&problem, &[0.95, 0.7], &LmOptions::default())?;
    let (ladder, snr, g) = evaluate(&report.params)?;
    Ok(LadderCalibration {
        ladder,
        chi2: report.chi2,
        converged: report.converged,
        snr_gain_at_index: snr,
        gain_at_peak: g[1],
    })
}
