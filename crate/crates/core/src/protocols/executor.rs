//! Maps a [`PulseSequence`] onto dynamics calls.

use serde::{Deserialize, Serialize};

use crate::dynamics::{
    apply_envelope, conjugate, dephase_nv, depolarize_pair, driven_decay, optical_pump,
    propagate_from, propagator, secular_propagator, unitary, CoherenceSelection,
    DecoherenceEnvelope, Drive, DrivenDecayModel, HamiltonianSpec,
};
use crate::protocols::sequence::{PulseSequence, Segment, Tone};
use crate::spinsys::{DensityState, PhysicalConstants, SpinLabel, SpinLayout, SpinOp};
use crate::{CMatrix, Error, Result, C64};

/// How drive segments are propagated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriveModel {
    /// Full rotating-frame Hamiltonian at finite Rabi frequency.
    Exact,
    /// Drive plus the coupling projected onto the drive eigenspaces.
    #[default]
    Secular,
}

/// Envelopes applied at the end of each sensing window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSet {
    pub nv: DecoherenceEnvelope,
    pub xe: DecoherenceEnvelope,
    /// Envelope of the two-spin (double- and zero-quantum) coherences.
    pub pair: DecoherenceEnvelope,
}

impl EnvelopeSet {
    /// Pair decay at the summed single-spin rate with a shared exponent.
    pub fn additive(nv_gamma_hz: f64, xe_gamma_hz: f64, p: f64) -> Result<Self> {
        Ok(EnvelopeSet {
            nv: DecoherenceEnvelope::new(1.0, nv_gamma_hz, p)?,
            xe: DecoherenceEnvelope::new(1.0, xe_gamma_hz, p)?,
            pair: DecoherenceEnvelope::new(1.0, nv_gamma_hz + xe_gamma_hz, p)?,
        })
    }
}

/// Result of running a sequence.
#[derive(Debug, Clone)]
pub struct Execution {
    pub state: DensityState,
    /// NV `⟨σz⟩` recorded by each readout segment, in order.
    pub readouts: Vec<f64>,
    pub elapsed_s: f64,
}

/// Device model for sequence execution.
#[derive(Debug, Clone, PartialEq)]
pub struct Executor {
    pub coupling_hz: f64,
    pub constants: PhysicalConstants,
    pub drive_model: DriveModel,
    pub t1rho: Option<DrivenDecayModel>,
    /// Depolarizing probability per full-swap-length two-spin drive.
    pub gate_error: f64,
    pub envelopes: Option<EnvelopeSet>,
}

impl Executor {
    pub fn ideal(coupling_hz: f64) -> Self {
        Executor {
            coupling_hz,
            constants: PhysicalConstants::default(),
            drive_model: DriveModel::Secular,
            t1rho: None,
            gate_error: 0.0,
            envelopes: None,
        }
    }

    pub fn swap_time(&self) -> f64 {
        1.0 / (2.0 * self.coupling_hz)
    }

    /// Depolarizing probability for a two-spin drive of duration `t`.
    pub fn segment_error(&self, t: f64) -> f64 {
        if self.gate_error == 0.0 || self.coupling_hz == 0.0 {
            return 0.0;
        }
        1.0 - (1.0 - self.gate_error).powf(t / self.swap_time())
    }

    pub fn run(&self, rho: &DensityState, seq: &PulseSequence) -> Result<Execution> {
        seq.validate()?;
        let mut state = rho.clone();
        let mut readouts = Vec::new();
        let mut clock = 0.0;
        for segment in &seq.segments {
            state = self.apply(&state, segment, &mut readouts)?;
            clock += segment.duration();
        }
        Ok(Execution {
            state,
            readouts,
            elapsed_s: clock,
        })
    }

    fn apply(
        &self,
        rho: &DensityState,
        segment: &Segment,
        readouts: &mut Vec<f64>,
    ) -> Result<DensityState> {
        let layout = rho.layout();
        match segment {
            Segment::Pulse {
                targets,
                angle_rad,
                phase_rad,
            } => {
                let u = pulse_unitary(layout, targets, *angle_rad, *phase_rad)?;
                Ok(DensityState::from_matrix_unchecked(
                    layout.clone(),
                    conjugate(rho.matrix(), &u),
                ))
            }
            Segment::MicrowaveDrive { tones, duration_s } => self.drive(rho, tones, *duration_s),
            Segment::LaserPulse { efficiency, .. } => optical_pump(rho, *efficiency),
            Segment::Delay { duration_s } => {
                let h = HamiltonianSpec {
                    coupling_hz: self.coupling_hz,
                    constants: self.constants,
                    ..Default::default()
                };
                propagate_from(rho, &h, 0.0, *duration_s)
            }
            Segment::SensingWindow {
                duration_s,
                field,
                pi_pulses_s,
                targets,
            } => {
                let h = HamiltonianSpec {
                    coupling_hz: self.coupling_hz,
                    field: Some(*field),
                    constants: self.constants,
                    ..Default::default()
                };
                let pi = pulse_unitary(layout, targets, std::f64::consts::PI, 0.0)?;
                let mut state = rho.clone();
                let mut t = 0.0;
                for &tp in pi_pulses_s {
                    state = propagate_from(&state, &h, t, tp - t)?;
                    state = DensityState::from_matrix_unchecked(
                        layout.clone(),
                        conjugate(state.matrix(), &pi),
                    );
                    t = tp;
                }
                state = propagate_from(&state, &h, t, duration_s - t)?;
                self.window_envelopes(&state, targets, *duration_s)
            }
            Segment::Readout { .. } => {
                readouts.push(rho.polarization(SpinLabel::Nv)?);
                dephase_nv(rho)
            }
        }
    }

    fn drive(&self, rho: &DensityState, tones: &[Tone], t: f64) -> Result<DensityState> {
        let layout = rho.layout();
        let h = HamiltonianSpec {
            drives: tones
                .iter()
                .map(|tone| Drive {
                    target: tone.target,
                    rabi: 2.0 * std::f64::consts::PI * tone.rabi_hz,
                    phase: tone.phase_rad,
                    detuning: 2.0 * std::f64::consts::PI * tone.detuning_hz,
                })
                .collect(),
            coupling_hz: self.coupling_hz,
            field: None,
            constants: self.constants,
        };
        let u = match self.drive_model {
            DriveModel::Exact => propagator(layout, &h, 0.0, t)?,
            DriveModel::Secular => secular_propagator(layout, &h, t)?,
        };
        let mut state =
            DensityState::from_matrix_unchecked(layout.clone(), conjugate(rho.matrix(), &u));
        let two_spin = tones.iter().any(|x| x.target == SpinLabel::Nv)
            && tones.iter().any(|x| x.target == SpinLabel::Xe);
        if two_spin {
            if let Some(model) = &self.t1rho {
                state = driven_decay(&state, model, &h, t)?;
            }
            state = depolarize_pair(&state, self.segment_error(t))?;
        }
        Ok(state)
    }

    /// One envelope per coherence class over the whole window.
    fn window_envelopes(
        &self,
        rho: &DensityState,
        targets: &[SpinLabel],
        duration: f64,
    ) -> Result<DensityState> {
        let env = match &self.envelopes {
            Some(e) => e,
            None => return Ok(rho.clone()),
        };
        let layout = rho.layout();
        let mut state = rho.clone();
        let mut selections: Vec<(CoherenceSelection, DecoherenceEnvelope)> = Vec::new();
        if layout.contains(SpinLabel::Nv) {
            selections.push((CoherenceSelection::SingleQuantum(SpinLabel::Nv), env.nv));
        }
        if layout.contains(SpinLabel::Xe) {
            selections.push((CoherenceSelection::SingleQuantum(SpinLabel::Xe), env.xe));
        }
        if targets.contains(&SpinLabel::Nv) && targets.contains(&SpinLabel::Xe) {
            selections.push((CoherenceSelection::DoubleQuantum, env.pair));
            selections.push((CoherenceSelection::ZeroQuantum, env.pair));
        }
        for (sel, e) in selections {
            state = apply_envelope(&state, &e, sel, duration)?;
        }
        Ok(state)
    }
}

/// Product of single-spin rotations `exp(−iθ(cosφ·Sx + sinφ·Sy))`.
pub fn pulse_unitary(
    layout: &SpinLayout,
    targets: &[SpinLabel],
    angle: f64,
    phase: f64,
) -> Result<CMatrix> {
    let n = layout.dim();
    let mut u = CMatrix::identity(n, n);
    for &t in targets {
        if !layout.contains(t) {
            return Err(Error::Sequence(format!("pulse target {t} not in layout")));
        }
        let gen = SpinOp::Sx.matrix() * C64::new(phase.cos(), 0.0)
            + SpinOp::Sy.matrix() * C64::new(phase.sin(), 0.0);
        let r = unitary(&gen, angle);
        u = layout.embed(t, &r)? * u;
    }
    Ok(u)
}
