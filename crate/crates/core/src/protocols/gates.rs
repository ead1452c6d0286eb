//! Hartmann-Hahn cross-polarization gates and their parameters.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dynamics::DrivenDecayModel;
use crate::protocols::executor::{DriveModel, EnvelopeSet, Executor};
use crate::protocols::sequence::{PulseSequence, Segment, Tone};
use crate::spinsys::{DensityState, PhysicalConstants, SpinLabel, SpinLayout};
use crate::{Error, Result};

/// Spin-lock phases of the NV and Xe drives between the framing π/2 pulses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecipe {
    pub nv_rad: f64,
    pub xe_rad: f64,
}

impl PhaseRecipe {
    pub const PARALLEL: PhaseRecipe = PhaseRecipe {
        nv_rad: 0.0,
        xe_rad: 0.0,
    };
    pub const ANTIPARALLEL: PhaseRecipe = PhaseRecipe {
        nv_rad: 0.0,
        xe_rad: PI,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExchangeKind {
    /// Flip-flop `|01⟩ ↔ |10⟩`.
    ZeroQuantum,
    /// Flip-flip `|00⟩ ↔ |11⟩`.
    DoubleQuantum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateParams {
    pub coupling_hz: f64,
    pub rabi_hz: f64,
    pub swap_recipe: PhaseRecipe,
    pub entangle_recipe: PhaseRecipe,
    /// Depolarizing probability per full-swap-length gate.
    pub gate_error: f64,
    /// NV repump efficiency used between repetitive readouts.
    pub pump_efficiency: f64,
    /// Extra depolarizing probability per recoupled readout.
    pub mapping_error: f64,
    pub t1rho: Option<DrivenDecayModel>,
    pub drive_model: DriveModel,
    pub constants: PhysicalConstants,
}

impl GateParams {
    /// Error-free gates at the default Rabi frequency of 500 kHz.
    pub fn ideal(coupling_hz: f64) -> Self {
        GateParams {
            coupling_hz,
            rabi_hz: 500e3,
            swap_recipe: PhaseRecipe::PARALLEL,
            entangle_recipe: PhaseRecipe::ANTIPARALLEL,
            gate_error: 0.0,
            pump_efficiency: 1.0,
            mapping_error: 0.0,
            t1rho: None,
            drive_model: DriveModel::Secular,
            constants: PhysicalConstants::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.coupling_hz > 0.0 && self.coupling_hz.is_finite()) {
            return Err(Error::OutOfRange {
                name: "coupling_hz",
                value: self.coupling_hz,
            });
        }
        if !(self.rabi_hz > 0.0 && self.rabi_hz.is_finite()) {
            return Err(Error::OutOfRange {
                name: "rabi_hz",
                value: self.rabi_hz,
            });
        }
        for (name, v) in [
            ("gate_error", self.gate_error),
            ("pump_efficiency", self.pump_efficiency),
            ("mapping_error", self.mapping_error),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::OutOfRange { name, value: v });
            }
        }
        Ok(())
    }

    /// Full exchange time `1/(2d)`.
    pub fn swap_time(&self) -> f64 {
        1.0 / (2.0 * self.coupling_hz)
    }

    pub fn recipe(&self, kind: ExchangeKind) -> PhaseRecipe {
        match kind {
            ExchangeKind::ZeroQuantum => self.swap_recipe,
            ExchangeKind::DoubleQuantum => self.entangle_recipe,
        }
    }

    pub fn executor(&self, envelopes: Option<EnvelopeSet>) -> Executor {
        Executor {
            coupling_hz: self.coupling_hz,
            constants: self.constants,
            drive_model: self.drive_model,
            t1rho: self.t1rho,
            gate_error: self.gate_error,
            envelopes,
        }
    }

    /// Same gates without errors or decay.
    pub fn without_errors(&self) -> Self {
        GateParams {
            gate_error: 0.0,
            pump_efficiency: 1.0,
            mapping_error: 0.0,
            t1rho: None,
            ..self.clone()
        }
    }

    /// HHCP sequence for `fraction` of a full exchange with the recipe of `kind`.
    pub fn exchange(&self, kind: ExchangeKind, fraction: f64, offsets: [f64; 2]) -> PulseSequence {
        hhcp_with_offsets(
            fraction * self.swap_time(),
            self.recipe(kind),
            self.rabi_hz,
            offsets,
        )
    }

    /// Checks that the SWAP recipe realizes zero-quantum and the entangling
    /// recipe double-quantum exchange.
    pub fn verify_recipes(&self) -> Result<()> {
        self.validate()?;
        let swap = classify_recipe(self, self.swap_recipe)?;
        let ent = classify_recipe(self, self.entangle_recipe)?;
        if swap != Some(ExchangeKind::ZeroQuantum) {
            return Err(Error::Recipe(format!(
                "SWAP recipe {:?} realizes {swap:?}, expected zero-quantum exchange",
                self.swap_recipe
            )));
        }
        if ent != Some(ExchangeKind::DoubleQuantum) {
            return Err(Error::Recipe(format!(
                "entangling recipe {:?} realizes {ent:?}, expected double-quantum exchange",
                self.entangle_recipe
            )));
        }
        Ok(())
    }
}

/// Propagates `|00⟩` and `|01⟩` through an ideal full-length HHCP with `recipe`
/// and reports which exchange, if any, it realizes.
pub fn classify_recipe(params: &GateParams, recipe: PhaseRecipe) -> Result<Option<ExchangeKind>> {
    let exec = params.without_errors().executor(None);
    let seq = hhcp(params.swap_time(), recipe, params.rabi_hz);
    let layout = SpinLayout::pair();
    let from00 = exec.run(&DensityState::basis(layout.clone(), 0)?, &seq)?.state;
    let from01 = exec.run(&DensityState::basis(layout, 1)?, &seq)?.state;
    let dq = from00.population(3);
    let zq = from01.population(2);
    Ok(if dq > 0.9 && zq < 0.1 {
        Some(ExchangeKind::DoubleQuantum)
    } else if zq > 0.9 && dq < 0.1 {
        Some(ExchangeKind::ZeroQuantum)
    } else {
        None
    })
}

/// π/2 pulses about y, matched spin-lock drives with the recipe phases, and
/// π/2 pulses about −y on both spins.
pub fn hhcp(duration: f64, recipe: PhaseRecipe, rabi_hz: f64) -> PulseSequence {
    hhcp_with_offsets(duration, recipe, rabi_hz, [0.0, 0.0])
}

/// As [`hhcp`] with every phase on the NV and Xe shifted by `offsets`.
pub fn hhcp_with_offsets(
    duration: f64,
    recipe: PhaseRecipe,
    rabi_hz: f64,
    offsets: [f64; 2],
) -> PulseSequence {
    let spins = [SpinLabel::Nv, SpinLabel::Xe];
    let framing = |phase: f64| -> Vec<Segment> {
        spins
            .iter()
            .zip(offsets)
            .map(|(&s, off)| Segment::Pulse {
                targets: vec![s],
                angle_rad: PI / 2.0,
                phase_rad: phase + off,
            })
            .collect()
    };
    let mut segments = framing(PI / 2.0);
    segments.push(Segment::MicrowaveDrive {
        tones: vec![
            Tone {
                target: SpinLabel::Nv,
                rabi_hz,
                phase_rad: recipe.nv_rad + offsets[0],
                detuning_hz: 0.0,
            },
            Tone {
                target: SpinLabel::Xe,
                rabi_hz,
                phase_rad: recipe.xe_rad + offsets[1],
                detuning_hz: 0.0,
            },
        ],
        duration_s: duration,
    });
    segments.extend(framing(-PI / 2.0));
    PulseSequence { segments }
}
