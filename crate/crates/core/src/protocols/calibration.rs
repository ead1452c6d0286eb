//! Calibration of pump efficiency and gate error against measured
//! cross-polarization contrasts.

use serde::{Deserialize, Serialize};

use crate::analysis::lm::{levenberg_marquardt, LmOptions, NumericProblem};
use crate::protocols::gates::GateParams;
use crate::protocols::library::{
    cross_polarization_contrast, initial_state, polarization_transfer, repetitive_readout,
};
use crate::readout::ReadoutModel;
use crate::spinsys::DensityState;
use crate::{Error, Result};

/// Contrasts measured after `N = 0` and `N = 1` transfer rounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTargets {
    pub initial_x_polarization: f64,
    pub contrast_n0: f64,
    pub contrast_n1: f64,
    pub contrast_sigma: f64,
}

impl Default for CalibrationTargets {
    fn default() -> Self {
        CalibrationTargets {
            initial_x_polarization: 0.14,
            contrast_n0: 0.49,
            contrast_n1: 0.82,
            contrast_sigma: 0.03,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlCalibration {
    pub pump_efficiency: f64,
    pub gate_error: f64,
    /// Model minus measurement, in units of the contrast uncertainty.
    pub residuals: Vec<f64>,
    pub converged: bool,
}

impl ControlCalibration {
    /// `base` with the calibrated pump efficiency and gate error.
    pub fn apply(&self, base: &GateParams) -> GateParams {
        GateParams {
            gate_error: self.gate_error,
            pump_efficiency: self.pump_efficiency,
            ..base.clone()
        }
    }
}

/// Cross-polarization contrast after `rounds` transfer rounds.
pub fn contrast_after(rounds: usize, x0: f64, gates: &GateParams) -> Result<f64> {
    let rho = if rounds == 0 {
        initial_state(x0)?
    } else {
        polarization_transfer(rounds, gates.pump_efficiency, gates, x0)?.0
    };
    cross_polarization_contrast(&rho, gates.pump_efficiency, gates)
}

/// Solves for `(pump efficiency, ε_g)` so that the simulated contrasts match
/// the two targets; `base` supplies coupling, drive and `T₁ρ`.
pub fn calibrate_control(targets: &CalibrationTargets, base: &GateParams) -> Result<ControlCalibration> {
    base.validate()?;
    let gates_for = |p: &[f64]| GateParams {
        pump_efficiency: p[0],
        gate_error: p[1],
        ..base.clone()
    };
    let residuals = |p: &[f64]| -> Vec<f64> {
        let gates = gates_for(p);
        let x0 = targets.initial_x_polarization;
        match (contrast_after(0, x0, &gates), contrast_after(1, x0, &gates)) {
            (Ok(c0), Ok(c1)) => vec![
                (c0 - targets.contrast_n0) / targets.contrast_sigma,
                (c1 - targets.contrast_n1) / targets.contrast_sigma,
            ],
            _ => vec![f64::NAN; 2],
        }
    };
    let problem = NumericProblem {
        n_params: 2,
        residuals: &residuals,
        lower: vec![1e-3, 0.0],
        upper: vec![1.0, 1.0],
    };
    let report = levenberg_marquardt(&problem, &[0.85, 0.05], &LmOptions::default())?;
    Ok(ControlCalibration {
        pump_efficiency: report.params[0],
        gate_error: report.params[1],
        residuals: residuals(&report.params),
        converged: report.converged,
    })
}

/// Per-readout mapping error for which the simulated readout ladder of `rho`
/// accumulates `Σ_{k≤m} a_k/a₀ = total`, found by bisection.
pub fn calibrate_mapping_error(
    rho: &DensityState,
    m: usize,
    total: f64,
    gates: &GateParams,
) -> Result<f64> {
    let model = ReadoutModel::default();
    let cumulative = |kappa: f64| -> Result<f64> {
        let g = GateParams {
            mapping_error: kappa,
            ..gates.clone()
        };
        Ok(repetitive_readout(rho, m, &g, &model)?.cumulative_amplitude(m))
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    let (f_lo, f_hi) = (cumulative(lo)?, cumulative(hi)?);
    if !(f_hi <= total && total <= f_lo) {
        return Err(Error::OutOfRange {
            name: "cumulative amplitude target",
            value: total,
        });
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if cumulative(mid)? > total {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
