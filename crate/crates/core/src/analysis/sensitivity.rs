//! Minimum detectable field, gain in performance and gain in sensitivity.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dynamics::DecoherenceEnvelope;
use crate::protocols::library::NuclearFactor;
use crate::readout::cumulative_snr;
use crate::spinsys::PhysicalConstants;
use crate::{Error, Result};

/// Overlap of an echo with a phase-matched sinusoid.
pub const ECHO_OVERLAP: f64 = 2.0 / PI;

/// `δb = σ_S/|α·ν|`.
pub fn min_field(alpha: f64, nu_slope: f64, sigma_s: f64) -> Result<f64> {
    let slope = alpha * nu_slope;
    if slope == 0.0 || !slope.is_finite() {
        return Err(Error::ZeroSlope);
    }
    Ok(sigma_s / slope.abs())
}

/// Precession rate `ν_n = n·γ_e·f̂·τ` in rad/G.
pub fn precession_rate(spins: usize, gamma_e: f64, overlap: f64, tau: f64) -> f64 {
    spins as f64 * gamma_e * overlap * tau
}

/// `g = 2·(α_Φ(τ)/α_NV(τ))·nuclear factor`.
pub fn gain_performance(
    tau: f64,
    nv: &DecoherenceEnvelope,
    phi: &DecoherenceEnvelope,
    nuclear: &NuclearFactor,
) -> f64 {
    2.0 * phi.amplitude(tau) / nv.amplitude(tau) * nuclear.factor()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingBudget {
    pub tau_s: f64,
    /// Single-spin preparation and readout.
    pub tau_nv_s: f64,
    /// Extra two-spin preparation and mapping.
    pub tau_phi_s: f64,
    /// Cost of each additional repetitive readout.
    pub tau_rr_s: f64,
    /// Total readouts per measurement, at least 1.
    pub repetitions: usize,
}

impl Default for TimingBudget {
    fn default() -> Self {
        TimingBudget {
            tau_s: 19e-6,
            tau_nv_s: 5.7e-6,
            tau_phi_s: 21e-6,
            tau_rr_s: 6.1e-6,
            repetitions: 1,
        }
    }
}

impl TimingBudget {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("budget.tau_s", self.tau_s),
            ("budget.tau_nv_s", self.tau_nv_s),
            ("budget.tau_phi_s", self.tau_phi_s),
            ("budget.tau_rr_s", self.tau_rr_s),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::OutOfRange { name, value: v });
            }
        }
        if self.repetitions == 0 {
            return Err(Error::OutOfRange {
                name: "budget.repetitions",
                value: 0.0,
            });
        }
        Ok(())
    }

    pub fn at(&self, tau_s: f64, repetitions: usize) -> Self {
        TimingBudget {
            tau_s,
            repetitions,
            ..*self
        }
    }

    /// Effective two-spin overhead `τ_Φ + (repetitions − 1)·τ_rr`.
    pub fn effective_tau_phi(&self) -> f64 {
        self.tau_phi_s + self.repetitions.saturating_sub(1) as f64 * self.tau_rr_s
    }

    /// Duration of one two-spin measurement cycle.
    pub fn cycle_time(&self) -> f64 {
        self.tau_s + self.tau_nv_s + self.effective_tau_phi()
    }
}

/// `h = sqrt((τ + τ_NV)/(τ + τ_NV + τ_Φ'))`.
pub fn overhead_factor(budget: &TimingBudget) -> Result<f64> {
    budget.validate()?;
    let num = budget.tau_s + budget.tau_nv_s;
    let den = budget.cycle_time();
    if !(den > 0.0) {
        return Err(Error::OutOfRange {
            name: "budget cycle time",
            value: den,
        });
    }
    Ok((num / den).sqrt())
}

/// Amplitudes and noise levels of successive readouts; entry 0 is the direct
/// NV readout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadoutLadder {
    pub amplitudes: Vec<f64>,
    pub sigmas: Vec<f64>,
}

impl ReadoutLadder {
    /// A single readout with unit amplitude.
    pub fn single() -> Self {
        ReadoutLadder {
            amplitudes: vec![1.0],
            sigmas: vec![1.0],
        }
    }

    pub fn max_repetitions(&self) -> usize {
        self.amplitudes.len().saturating_sub(1)
    }

    /// `SNR(m)/SNR(0)` for every available `m`.
    pub fn snr_gains(&self) -> Result<Vec<f64>> {
        cumulative_snr(&self.amplitudes, &self.sigmas)
    }
}

/// Everything that fixes `g̃` at a given `(τ, m)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityInputs {
    pub nv: DecoherenceEnvelope,
    pub phi: DecoherenceEnvelope,
    pub nuclear: NuclearFactor,
    pub budget: TimingBudget,
    pub ladder: ReadoutLadder,
    /// Signal uncertainty of one readout, equal for all sensor states.
    pub sigma_s: f64,
    pub overlap: f64,
    pub constants: PhysicalConstants,
}

impl SensitivityInputs {
    /// Measured envelopes (0.96, 22 kHz) and (0.78, 36 kHz) with p = 1.6, a
    /// polarized nucleus and a single readout.
    pub fn measured() -> Self {
        SensitivityInputs {
            nv: DecoherenceEnvelope {
                alpha0: 0.96,
                gamma2_hz: 22e3,
                p: 1.6,
            },
            phi: DecoherenceEnvelope {
                alpha0: 0.78,
                gamma2_hz: 36e3,
                p: 1.6,
            },
            nuclear: NuclearFactor {
                polarization: 1.0,
                transitions: 1,
            },
            budget: TimingBudget::default(),
            ladder: ReadoutLadder::single(),
            sigma_s: 1.0,
            overlap: ECHO_OVERLAP,
            constants: PhysicalConstants::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub tau_s: f64,
    pub spins: usize,
    /// Additional readouts `m`.
    pub m: usize,
    pub delta_b_single_gauss: f64,
    pub delta_b_gauss: f64,
    /// `δb·sqrt(cycle time)`.
    pub eta_gauss_sqrt_s: f64,
    pub g: f64,
    /// `g·SNR(m)/SNR(0)`.
    pub g_rr: f64,
    pub h: f64,
    pub g_tilde: f64,
    pub snr_gain: f64,
    pub nuclear: NuclearFactor,
}

pub fn gain_sensitivity(inputs: &SensitivityInputs, tau: f64, m: usize) -> Result<SensitivityReport> {
    if !(tau > 0.0) {
        return Err(Error::OutOfRange {
            name: "tau_s",
            value: tau,
        });
    }
    inputs.nuclear.validate()?;
    let gains = inputs.ladder.snr_gains()?;
    let snr_gain = *gains.get(m).ok_or(Error::OutOfRange {
        name: "m",
        value: m as f64,
    })?;
    let gamma = inputs.constants.gamma_e;
    let alpha_single = inputs.nv.amplitude(tau);
    let alpha_pair = inputs.phi.amplitude(tau) * inputs.nuclear.factor();
    let delta_b_single_gauss = min_field(
        alpha_single,
        precession_rate(1, gamma, inputs.overlap, tau),
        inputs.sigma_s,
    )?;
    let delta_b_gauss = min_field(
        alpha_pair,
        precession_rate(2, gamma, inputs.overlap, tau),
        inputs.sigma_s / snr_gain,
    )?;
    let budget = inputs.budget.at(tau, m + 1);
    let h = overhead_factor(&budget)?;
    let g = gain_performance(tau, &inputs.nv, &inputs.phi, &inputs.nuclear);
    let g_rr = g * snr_gain;
    Ok(SensitivityReport {
        tau_s: tau,
        spins: 2,
        m,
        delta_b_single_gauss,
        delta_b_gauss,
        eta_gauss_sqrt_s: delta_b_gauss * budget.cycle_time().sqrt(),
        g,
        g_rr,
        h,
        g_tilde: g_rr * h,
        snr_gain,
        nuclear: inputs.nuclear,
    })
}

/// `g̃` for every `m` the ladder supports.
pub fn gain_profile(inputs: &SensitivityInputs, tau: f64) -> Result<Vec<SensitivityReport>> {
    (0..=inputs.ladder.max_repetitions())
        .map(|m| gain_sensitivity(inputs, tau, m))
        .collect()
}

/// Report with the largest `g̃`; ties keep the smallest `m`.
pub fn best_repetitions(profile: &[SensitivityReport]) -> Option<&SensitivityReport> {
    profile
        .iter()
        .fold(None, |best: Option<&SensitivityReport>, r| match best {
            Some(b) if b.g_tilde >= r.g_tilde => Some(b),
            _ => Some(r),
        })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub ok: bool,
    pub violations: Vec<String>,
}

/// Checks `g ≤ n` and `g_rr ≤ n·SNR(m)/SNR(0)`.
pub fn snr_bound_check(report: &SensitivityReport) -> BoundCheck {
    let n = report.spins as f64;
    let slack = 1e-12;
    let mut violations = Vec::new();
    if report.g > n * (1.0 + slack) {
        violations.push(format!("g = {} exceeds n = {}", report.g, report.spins));
    }
    if report.g_rr > n * report.snr_gain * (1.0 + slack) {
        violations.push(format!(
            "g_rr = {} exceeds n·SNR gain = {}",
            report.g_rr,
            n * report.snr_gain
        ));
    }
    BoundCheck {
        ok: violations.is_empty(),
        violations,
    }
}
