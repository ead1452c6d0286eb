//! Simulated device assembled from a scenario config, with the measurement
//! chains the figure scenarios share.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::analysis::ladder::{calibrate_ladder, LadderCalibration};
use crate::analysis::sensitivity::{ReadoutLadder, SensitivityInputs, TimingBudget, ECHO_OVERLAP};
use crate::dynamics::{optical_pump, DecoherenceEnvelope, DrivenDecayModel, FieldModel};
use crate::protocols::calibration::{calibrate_control, CalibrationTargets, ControlCalibration};
use crate::protocols::executor::EnvelopeSet;
use crate::protocols::gates::{ExchangeKind, GateParams};
use crate::protocols::library::{
    disentangle, echo_sense, initial_state, polarization_transfer_from, prepare_entangled,
    NuclearFactor, SensingSetup, SensorState,
};
use crate::protocols::sequence::{PulseSequence, Segment};
use crate::scenario::config::ScenarioConfig;
use crate::spinsys::{DensityState, PhysicalConstants, SpinLabel};
use crate::Result;

/// Where the pump efficiency and gate error came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSource {
    pub pump_efficiency: f64,
    pub gate_error: f64,
    /// Present when the values were solved from the contrast targets.
    pub calibration: Option<ControlCalibration>,
}

#[derive(Debug, Clone)]
pub struct Lab {
    pub config: ScenarioConfig,
    /// Gates with `T₁ρ` but no control errors.
    pub base: GateParams,
    /// Gates with calibrated control errors.
    pub gates: GateParams,
    pub control: ControlSource,
    pub envelopes: EnvelopeSet,
}

impl Lab {
    pub fn new(config: &ScenarioConfig) -> Result<Self> {
        let config = config.resolved();
        let mut base = GateParams::ideal(config.coupling_hz());
        base.rabi_hz = config.drive.rabi_hz;
        base.drive_model = config.drive.model;
        base.t1rho = Some(DrivenDecayModel::new(config.decoherence.t1rho_s)?);
        base.constants = PhysicalConstants::default();
        base.verify_recipes()?;
        let ct = &config.control;
        let control = match (ct.pump_efficiency, ct.gate_error) {
            (Some(e), Some(g)) => ControlSource {
                pump_efficiency: e,
                gate_error: g,
                calibration: None,
            },
            _ => {
                let targets = CalibrationTargets {
                    initial_x_polarization: ct.initial_x_polarization,
                    contrast_n0: ct.contrast_n0,
                    contrast_n1: ct.contrast_n1,
                    contrast_sigma: ct.contrast_sigma,
                };
                let cal = calibrate_control(&targets, &base)?;
                ControlSource {
                    pump_efficiency: ct.pump_efficiency.unwrap_or(cal.pump_efficiency),
                    gate_error: ct.gate_error.unwrap_or(cal.gate_error),
                    calibration: Some(cal),
                }
            }
        };
        let gates = GateParams {
            pump_efficiency: control.pump_efficiency,
            gate_error: control.gate_error,
            ..base.clone()
        };
        let dc = &config.decoherence;
        let envelopes = EnvelopeSet::additive(dc.gamma2_nv_hz, dc.gamma2_x_hz, dc.p)?;
        Ok(Lab {
            config,
            base,
            gates,
            control,
            envelopes,
        })
    }

    pub fn nuclear(&self) -> Result<NuclearFactor> {
        NuclearFactor::new(self.config.nuclear.polarization, self.config.nuclear.transitions)
    }

    pub fn sensing(&self) -> SensingSetup {
        SensingSetup {
            gates: self.gates.clone(),
            envelopes: Some(self.envelopes),
            pump_efficiency: self.control.pump_efficiency,
            initial_x_polarization: self.config.control.initial_x_polarization,
            transfer_rounds: self.config.control.transfer_rounds,
        }
    }

    fn run(&self, rho: &DensityState, segments: Vec<Segment>) -> Result<DensityState> {
        Ok(self.gates.executor(None).run(rho, &PulseSequence::new(segments)?)?.state)
    }

    /// NV and Xe after the configured transfer rounds and an NV repump.
    pub fn polarized_pair(&self) -> Result<DensityState> {
        let rho = initial_state(self.config.control.initial_x_polarization)?;
        let (rho, _) = polarization_transfer_from(
            &rho,
            self.config.control.transfer_rounds,
            self.control.pump_efficiency,
            &self.gates,
        )?;
        optical_pump(&rho, self.control.pump_efficiency)
    }

    /// Entangled two-spin state right before sensing.
    pub fn entangled(&self) -> Result<DensityState> {
        prepare_entangled(&self.polarized_pair()?, &self.gates)
    }

    /// Phase-cycled echo amplitude at zero field for a sensor made of
    /// `targets`: the difference of the two read phases, halved.
    pub fn echo_amplitude(&self, targets: EchoTarget, tau: f64) -> Result<f64> {
        let zero = FieldModel::constant(0.0);
        let pulse = |target: SpinLabel, phase: f64| Segment::Pulse {
            targets: vec![target],
            angle_rad: PI / 2.0,
            phase_rad: phase,
        };
        match targets {
            EchoTarget::Nv => {
                let rho = optical_pump(
                    &initial_state(self.config.control.initial_x_polarization)?,
                    self.control.pump_efficiency,
                )?;
                let rho = self.run(&rho, vec![pulse(SpinLabel::Nv, PI / 2.0)])?;
                let sensed = echo_sense(&rho, tau, zero, &[SpinLabel::Nv], &self.gates, Some(self.envelopes))?;
                let read = |phase: f64| -> Result<f64> {
                    self.run(&sensed, vec![pulse(SpinLabel::Nv, phase)])?
                        .polarization(SpinLabel::Nv)
                };
                Ok((read(-PI / 2.0)? - read(PI / 2.0)?) / 2.0)
            }
            EchoTarget::Xe => {
                let rho = self.polarized_pair()?;
                let rho = self.run(&rho, vec![pulse(SpinLabel::Xe, PI / 2.0)])?;
                let sensed = echo_sense(&rho, tau, zero, &[SpinLabel::Xe], &self.gates, Some(self.envelopes))?;
                let swap = self.gates.exchange(ExchangeKind::ZeroQuantum, 1.0, [0.0, 0.0]);
                let read = |phase: f64| -> Result<f64> {
                    let rho = self.run(&sensed, vec![pulse(SpinLabel::Xe, phase)])?;
                    let rho = optical_pump(&rho, self.control.pump_efficiency)?;
                    self.gates
                        .executor(None)
                        .run(&rho, &swap)?
                        .state
                        .polarization(SpinLabel::Nv)
                };
                Ok((read(-PI / 2.0)? - read(PI / 2.0)?) / 2.0)
            }
            EchoTarget::Pair => {
                let rho = self.entangled()?;
                let sensed = echo_sense(
                    &rho,
                    tau,
                    zero,
                    &[SpinLabel::Nv, SpinLabel::Xe],
                    &self.gates,
                    Some(self.envelopes),
                )?;
                let read = |offset: f64| -> Result<f64> {
                    disentangle(&sensed, &self.gates, [offset, 0.0])?.polarization(SpinLabel::Nv)
                };
                Ok((read(0.0)? - read(PI)?) / 2.0)
            }
        }
    }

    /// Signal amplitude `α_n(τ)` of a phase-matched magnetometry point: the
    /// signal at the field where the accumulated phase is π/2.
    pub fn sensing_amplitude(&self, sensor: SensorState, tau: f64) -> Result<f64> {
        let gamma = self.gates.constants.gamma_e;
        let nu = sensor.spins() as f64 * gamma * ECHO_OVERLAP * tau;
        let b = PI / (2.0 * nu);
        let s = self.sensing().signal(sensor, tau, 1.0 / tau, &[b])?;
        Ok(s[0].abs())
    }
}

/// Sensor whose zero-field echo decay is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EchoTarget {
    Nv,
    Xe,
    Pair,
}

/// Closed-form sensitivity inputs from the measured envelopes.
pub fn sensitivity_inputs(
    config: &ScenarioConfig,
    nuclear: NuclearFactor,
    ladder: ReadoutLadder,
) -> SensitivityInputs {
    let dc = &config.decoherence;
    let b = &config.budget;
    SensitivityInputs {
        nv: DecoherenceEnvelope {
            alpha0: dc.alpha0_nv,
            gamma2_hz: dc.gamma2_nv_hz,
            p: dc.p,
        },
        phi: DecoherenceEnvelope {
            alpha0: dc.alpha0_phi,
            gamma2_hz: dc.gamma2_phi_hz,
            p: dc.p,
        },
        nuclear,
        budget: TimingBudget {
            tau_s: b.tau_s,
            tau_nv_s: b.tau_nv_s,
            tau_phi_s: b.tau_phi_s,
            tau_rr_s: b.tau_rr_s,
            repetitions: 1,
        },
        ladder,
        sigma_s: 1.0,
        overlap: ECHO_OVERLAP,
        constants: PhysicalConstants::default(),
    }
}

/// Readout ladder for the gain analysis: the measured one when given,
/// otherwise the geometric model calibrated at an unpolarized nucleus with
/// one transition addressed.
pub fn readout_ladder(config: &ScenarioConfig) -> Result<(ReadoutLadder, Option<LadderCalibration>)> {
    let m_max = config.grids.m_max;
    if let Some(measured) = &config.ladder.measured {
        return Ok((measured.clone(), None));
    }
    let unpolarized = NuclearFactor::new(0.0, 1)?;
    let inputs = sensitivity_inputs(config, unpolarized, ReadoutLadder::single());
    let cal = calibrate_ladder(&config.ladder.targets, &inputs)?;
    Ok((cal.ladder.readouts(m_max), Some(cal)))
}
