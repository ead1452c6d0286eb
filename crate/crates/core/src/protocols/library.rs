//! Sequence library: polarization transfer, entangling and disentangling gates,
//! echo sensing, recoupled and repetitive readout.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dynamics::{depolarize_pair, optical_pump, FieldModel};
use crate::protocols::executor::EnvelopeSet;
use crate::protocols::gates::{ExchangeKind, GateParams};
use crate::protocols::sequence::{PulseSequence, Segment};
use crate::readout::{optimal_weights, ReadoutModel, WeightedReadout};
use crate::spinsys::{polarized_state, DensityState, SpinLabel, SpinLayout};
use crate::{Error, Result};

/// NV unpolarized, Xe at thermal polarization `x0`.
pub fn initial_state(x0: f64) -> Result<DensityState> {
    polarized_state(&SpinLayout::pair(), &[0.0, x0])
}

/// Runs `sequence` through the error-bearing executor of `gates`.
fn run(rho: &DensityState, gates: &GateParams, sequence: &PulseSequence) -> Result<DensityState> {
    Ok(gates.executor(None).run(rho, sequence)?.state)
}

/// `N` rounds of NV pumping followed by a SWAP gate. The trace holds the Xe
/// polarization before the first round and after each round.
pub fn polarization_transfer(
    rounds: usize,
    pump_efficiency: f64,
    gates: &GateParams,
    x0: f64,
) -> Result<(DensityState, Vec<f64>)> {
    let rho = initial_state(x0)?;
    polarization_transfer_from(&rho, rounds, pump_efficiency, gates)
}

pub fn polarization_transfer_from(
    rho: &DensityState,
    rounds: usize,
    pump_efficiency: f64,
    gates: &GateParams,
) -> Result<(DensityState, Vec<f64>)> {
    gates.validate()?;
    let swap = gates.exchange(ExchangeKind::ZeroQuantum, 1.0, [0.0, 0.0]);
    let mut state = rho.clone();
    let mut trace = vec![state.polarization(SpinLabel::Xe)?];
    for _ in 0..rounds {
        state = optical_pump(&state, pump_efficiency)?;
        state = run(&state, gates, &swap)?;
        trace.push(state.polarization(SpinLabel::Xe)?);
    }
    Ok((state, trace))
}

/// NV signal contrast of a cross-polarization readout: the NV is pumped, then
/// a full double-quantum exchange imprints the Xe population on it.
/// Returns `(P_before − P_after)/2`.
pub fn cross_polarization_contrast(
    rho: &DensityState,
    pump_efficiency: f64,
    gates: &GateParams,
) -> Result<f64> {
    let pumped = optical_pump(rho, pump_efficiency)?;
    let before = pumped.polarization(SpinLabel::Nv)?;
    let seq = gates.exchange(ExchangeKind::DoubleQuantum, 1.0, [0.0, 0.0]);
    let after = run(&pumped, gates, &seq)?.polarization(SpinLabel::Nv)?;
    Ok((before - after) / 2.0)
}

/// Entangling gate: half a double-quantum exchange.
pub fn prepare_entangled(rho: &DensityState, gates: &GateParams) -> Result<DensityState> {
    check_pair(rho)?;
    run(rho, gates, &gates.exchange(ExchangeKind::DoubleQuantum, 0.5, [0.0, 0.0]))
}

/// Disentangling gate with extra phases on the NV and Xe pulses.
pub fn disentangle(
    rho: &DensityState,
    gates: &GateParams,
    offsets: [f64; 2],
) -> Result<DensityState> {
    check_pair(rho)?;
    run(rho, gates, &gates.exchange(ExchangeKind::DoubleQuantum, 0.5, offsets))
}

fn check_pair(rho: &DensityState) -> Result<()> {
    if rho.layout() != &SpinLayout::pair() {
        return Err(Error::Layout("expected the {NV, Xe} layout".into()));
    }
    Ok(())
}

/// NV polarization after a disentangling gate whose NV and Xe phases are
/// advanced by `2πf·t` at each scan time `t`.
pub fn modulated_disentangle_scan(
    rho_phi: &DensityState,
    f_nv: f64,
    f_x: f64,
    times: &[f64],
    gates: &GateParams,
) -> Result<Vec<f64>> {
    if !(f_nv >= 0.0 && f_x >= 0.0) {
        return Err(Error::OutOfRange {
            name: "modulation frequency",
            value: f_nv.min(f_x),
        });
    }
    times
        .iter()
        .map(|&t| {
            let offsets = [2.0 * PI * f_nv * t, 2.0 * PI * f_x * t];
            disentangle(rho_phi, gates, offsets)?.polarization(SpinLabel::Nv)
        })
        .collect()
}

/// Phase-matched echo window: one π pulse on every target at `τ/2`.
pub fn echo_window(tau: f64, field: FieldModel, targets: &[SpinLabel]) -> Segment {
    Segment::SensingWindow {
        duration_s: tau,
        field,
        pi_pulses_s: vec![tau / 2.0],
        targets: targets.to_vec(),
    }
}

/// Spin echo of length `τ` with simultaneous π pulses on `targets`.
pub fn echo_sense(
    rho: &DensityState,
    tau: f64,
    field: FieldModel,
    targets: &[SpinLabel],
    gates: &GateParams,
    envelopes: Option<EnvelopeSet>,
) -> Result<DensityState> {
    if !(tau > 0.0) {
        return Err(Error::OutOfRange {
            name: "tau",
            value: tau,
        });
    }
    let seq = PulseSequence::new(vec![echo_window(tau, field, targets)])?;
    Ok(gates.executor(envelopes).run(rho, &seq)?.state)
}

/// `f̂ = (1/τ)|∫₀^τ s(t) b̂(t) dt|`, with `s = ±1` toggled at each π pulse and
/// `b̂` the unit-amplitude field waveform.
pub fn overlap_factor(pi_pulses_s: &[f64], tau: f64, field: &FieldModel) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    let unit = FieldModel {
        amplitude_gauss: 1.0,
        ..*field
    };
    let mut edges = vec![0.0];
    edges.extend(pi_pulses_s.iter().copied().filter(|&p| p > 0.0 && p < tau));
    edges.push(tau);
    let mut total = 0.0;
    let mut sign = 1.0;
    for w in edges.windows(2) {
        let f = |t: f64| unit.value(t);
        total += sign * adaptive_simpson(&f, w[0], w[1], 1e-12, 48);
        sign = -sign;
    }
    (total / tau).abs()
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol {
        return left + right + diff / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Duration of the conditional-phase echo that maps the Xe population onto the
/// NV: a relative phase of π at coupling `4πd·Sz⊗Sz` needs `1/(4d)`.
pub fn mapping_time(gates: &GateParams) -> f64 {
    1.0 / (4.0 * gates.coupling_hz)
}

/// Final NV pulse phase of the mapping echo; Xe in `|0⟩` gives a positive NV
/// signal.
const MAPPING_READ_PHASE: f64 = PI;

/// Recoupled spin-echo mapping of the Xe population onto the NV (assumed
/// freshly pumped), optical readout, and NV repump.
pub fn recoupled_readout(rho: &DensityState, gates: &GateParams) -> Result<(DensityState, f64)> {
    check_pair(rho)?;
    let t = mapping_time(gates);
    let seq = PulseSequence::new(vec![
        Segment::Pulse {
            targets: vec![SpinLabel::Nv],
            angle_rad: PI / 2.0,
            phase_rad: PI / 2.0,
        },
        Segment::Delay { duration_s: t / 2.0 },
        Segment::Pulse {
            targets: vec![SpinLabel::Nv, SpinLabel::Xe],
            angle_rad: PI,
            phase_rad: 0.0,
        },
        Segment::Delay { duration_s: t / 2.0 },
        Segment::Pulse {
            targets: vec![SpinLabel::Xe],
            angle_rad: PI,
            phase_rad: 0.0,
        },
        Segment::Pulse {
            targets: vec![SpinLabel::Nv],
            angle_rad: PI / 2.0,
            phase_rad: MAPPING_READ_PHASE,
        },
    ])?;
    let exec = gates.executor(None);
    let mapped = exec.run(rho, &seq)?.state;
    let error = 1.0 - (1.0 - exec.segment_error(t)) * (1.0 - gates.mapping_error);
    let mapped = depolarize_pair(&mapped, error)?;
    let readout = PulseSequence::new(vec![
        Segment::Readout { duration_s: 0.0 },
        Segment::LaserPulse {
            duration_s: 0.0,
            efficiency: gates.pump_efficiency,
        },
    ])?;
    let out = exec.run(&mapped, &readout)?;
    Ok((out.state, out.readouts[0]))
}

/// Signed NV signals of a direct readout followed by `m` recoupled readouts.
fn signal_ladder(rho: &DensityState, m: usize, gates: &GateParams) -> Result<Vec<f64>> {
    let exec = gates.executor(None);
    let first = exec.run(
        rho,
        &PulseSequence::new(vec![
            Segment::Readout { duration_s: 0.0 },
            Segment::LaserPulse {
                duration_s: 0.0,
                efficiency: gates.pump_efficiency,
            },
        ])?,
    )?;
    let mut signals = vec![first.readouts[0]];
    let mut state = first.state;
    for _ in 0..m {
        let (next, signal) = recoupled_readout(&state, gates)?;
        signals.push(signal);
        state = next;
    }
    Ok(signals)
}

/// Direct NV readout followed by `m` recoupled Xe readouts. Amplitude `a_k` is
/// half the difference of the signals of `rho` and of `rho` with both spins
/// flipped, i.e. the part of the readout that follows the population
/// difference; offsets left by an incomplete NV reset cancel. Every readout has
/// the shot-noise level of `model`.
pub fn repetitive_readout(
    rho: &DensityState,
    m: usize,
    gates: &GateParams,
    model: &ReadoutModel,
) -> Result<WeightedReadout> {
    check_pair(rho)?;
    let flip = PulseSequence::new(vec![Segment::Pulse {
        targets: vec![SpinLabel::Nv, SpinLabel::Xe],
        angle_rad: PI,
        phase_rad: 0.0,
    }])?;
    let flipped = gates.executor(None).run(rho, &flip)?.state;
    let up = signal_ladder(rho, m, gates)?;
    let down = signal_ladder(&flipped, m, gates)?;
    let amplitudes: Vec<f64> = up.iter().zip(&down).map(|(u, d)| ((u - d) / 2.0).abs()).collect();
    let sigma = model.signal_sigma();
    let sigmas = vec![sigma; amplitudes.len()];
    let weights = optimal_weights(&amplitudes, &sigmas)?;
    Ok(WeightedReadout {
        amplitudes,
        sigmas,
        weights,
    })
}

/// Polarization of the Xe nuclear spin and the number of hyperfine
/// transitions driven on the Xe electron.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NuclearFactor {
    pub polarization: f64,
    pub transitions: u8,
}

impl NuclearFactor {
    pub fn new(polarization: f64, transitions: u8) -> Result<Self> {
        let nf = NuclearFactor {
            polarization,
            transitions,
        };
        nf.validate()?;
        Ok(nf)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.polarization) {
            return Err(Error::OutOfRange {
                name: "nuclear.polarization",
                value: self.polarization,
            });
        }
        if !(1..=2).contains(&self.transitions) {
            return Err(Error::OutOfRange {
                name: "nuclear.transitions",
                value: self.transitions as f64,
            });
        }
        Ok(())
    }

    /// Two-spin contrast multiplier: `q + (1−q)/2` for one transition, 1 for both.
    pub fn factor(&self) -> f64 {
        if self.transitions >= 2 {
            1.0
        } else {
            self.polarization + (1.0 - self.polarization) / 2.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuclearSignal {
    pub values: Vec<f64>,
    pub factor: f64,
    /// Whether the reduction was undone for display (×2 at `q = 0`).
    pub renormalized: bool,
}

impl NuclearFactor {
    /// Display multiplier that undoes the contrast reduction.
    pub fn renormalization(&self) -> f64 {
        1.0 / self.factor()
    }
}

/// Applies the nuclear contrast factor to a full-contrast two-spin signal and,
/// if `renormalize`, scales the result back up for display.
pub fn nuclear_contrast(signal: &[f64], nuclear: &NuclearFactor, renormalize: bool) -> Result<NuclearSignal> {
    nuclear.validate()?;
    let factor = nuclear.factor();
    let scale = if renormalize { 1.0 } else { factor };
    Ok(NuclearSignal {
        values: signal.iter().map(|v| v * scale).collect(),
        factor,
        renormalized: renormalize,
    })
}

/// Sensor state used for a magnetometry point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorState {
    SingleSpin,
    TwoSpin,
}

impl SensorState {
    pub fn spins(self) -> usize {
        match self {
            SensorState::SingleSpin => 1,
            SensorState::TwoSpin => 2,
        }
    }
}

/// Disentangling phase offsets that make the two-spin signal odd in the field.
const TWO_SPIN_READ_OFFSETS: [f64; 2] = [PI / 2.0, 0.0];
/// Final NV pulse phase of the single-spin echo.
const SINGLE_SPIN_READ_PHASE: f64 = 0.0;

/// Inputs shared by the magnetometry chains.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingSetup {
    pub gates: GateParams,
    pub envelopes: Option<EnvelopeSet>,
    pub pump_efficiency: f64,
    pub initial_x_polarization: f64,
    pub transfer_rounds: usize,
}

impl SensingSetup {
    /// State right before the sensing window.
    pub fn prepare(&self, sensor: SensorState) -> Result<DensityState> {
        let rho = initial_state(self.initial_x_polarization)?;
        match sensor {
            SensorState::SingleSpin => {
                let rho = optical_pump(&rho, self.pump_efficiency)?;
                run(
                    &rho,
                    &self.gates,
                    &PulseSequence::new(vec![Segment::Pulse {
                        targets: vec![SpinLabel::Nv],
                        angle_rad: PI / 2.0,
                        phase_rad: PI / 2.0,
                    }])?,
                )
            }
            SensorState::TwoSpin => {
                let (rho, _) = polarization_transfer_from(
                    &rho,
                    self.transfer_rounds,
                    self.pump_efficiency,
                    &self.gates,
                )?;
                let rho = optical_pump(&rho, self.pump_efficiency)?;
                prepare_entangled(&rho, &self.gates)
            }
        }
    }

    /// Echo in the field followed by the mapping back to populations. Both
    /// spins then carry the signal as a polarization.
    pub fn sense(
        &self,
        prepared: &DensityState,
        sensor: SensorState,
        tau: f64,
        field: FieldModel,
    ) -> Result<DensityState> {
        let targets: &[SpinLabel] = match sensor {
            SensorState::SingleSpin => &[SpinLabel::Nv],
            SensorState::TwoSpin => &[SpinLabel::Nv, SpinLabel::Xe],
        };
        let sensed = echo_sense(prepared, tau, field, targets, &self.gates, self.envelopes)?;
        match sensor {
            SensorState::SingleSpin => run(
                &sensed,
                &self.gates,
                &PulseSequence::new(vec![Segment::Pulse {
                    targets: vec![SpinLabel::Nv],
                    angle_rad: PI / 2.0,
                    phase_rad: SINGLE_SPIN_READ_PHASE,
                }])?,
            ),
            SensorState::TwoSpin => disentangle(&sensed, &self.gates, TWO_SPIN_READ_OFFSETS),
        }
    }

    /// NV polarization signal for each field amplitude of a phase-matched echo.
    pub fn signal(
        &self,
        sensor: SensorState,
        tau: f64,
        field_frequency_hz: f64,
        amplitudes_gauss: &[f64],
    ) -> Result<Vec<f64>> {
        let prepared = self.prepare(sensor)?;
        amplitudes_gauss
            .iter()
            .map(|&b| {
                let field = FieldModel::sinusoid(b, field_frequency_hz, 0.0);
                self.sense(&prepared, sensor, tau, field)?
                    .polarization(SpinLabel::Nv)
            })
            .collect()
    }
}
