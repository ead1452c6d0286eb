//! Gate and sequence library examples.

mod common;

use std::f64::consts::PI;

use entangle_sense::analysis::spectrum::dominant_frequency;
use entangle_sense::dynamics::{optical_pump, DecoherenceEnvelope, DrivenDecayModel, FieldModel};
use entangle_sense::protocols::calibration::{calibrate_control, CalibrationTargets};
use entangle_sense::protocols::executor::{DriveModel, EnvelopeSet};
use entangle_sense::protocols::gates::{hhcp, ExchangeKind, GateParams};
use entangle_sense::protocols::library::{
    disentangle, echo_sense, modulated_disentangle_scan, nuclear_contrast, overlap_factor,
    polarization_transfer, prepare_entangled, recoupled_readout, repetitive_readout, NuclearFactor,
};
use entangle_sense::protocols::sequence::{PulseSequence, Segment};
use entangle_sense::readout::ReadoutModel;
use entangle_sense::spinsys::{
    bell_coherence, partial_trace, polarized_state, DensityState, SpinLabel, SpinLayout,
};
use entangle_sense::C64;
use proptest::prelude::*;

const D: f64 = 58e3;

fn basis(index: usize) -> DensityState {
    DensityState::basis(SpinLayout::pair(), index).unwrap()
}

fn run(gates: &GateParams, rho: &DensityState, seq: &PulseSequence) -> DensityState {
    gates.executor(None).run(rho, seq).unwrap().state
}

#[test]
fn swap_exchanges_populations() {
    for model in [DriveModel::Secular, DriveModel::Exact] {
        let gates = GateParams {
            drive_model: model,
            ..GateParams::ideal(D)
        };
        let seq = hhcp(1.0 / (2.0 * D), gates.swap_recipe, gates.rabi_hz);
        let out = run(&gates, &basis(0b01), &seq);
        assert!(out.population(0b10) > 0.98, "{model:?}: {}", out.population(0b10));
        assert!(out.population(0b01) < 0.02, "{model:?}");
    }
}

#[test]
fn quarter_exchange_entangles() {
    for model in [DriveModel::Secular, DriveModel::Exact] {
        let gates = GateParams {
            drive_model: model,
            ..GateParams::ideal(D)
        };
        let seq = hhcp(1.0 / (4.0 * D), gates.entangle_recipe, gates.rabi_hz);
        let out = run(&gates, &basis(0b00), &seq);
        let c = bell_coherence(&out).unwrap().norm();
        assert!((c - 0.5).abs() < 0.01, "{model:?}: {c}");
    }
}

#[test]
fn ideal_entangler_to_1e6() {
    let out = prepare_entangled(&basis(0b00), &GateParams::ideal(D)).unwrap();
    assert!((bell_coherence(&out).unwrap().norm() - 0.5).abs() < 1e-6);
}

#[test]
fn t1rho_reduces_transfer_contrast() {
    let gates = GateParams {
        t1rho: Some(DrivenDecayModel::new(132e-6).unwrap()),
        ..GateParams::ideal(D)
    };
    let swap = gates.exchange(ExchangeKind::ZeroQuantum, 1.0, [0.0, 0.0]);
    let out = run(&gates, &basis(0b01), &swap);
    let contrast = out.polarization(SpinLabel::Xe).unwrap();
    let oracle = (-gates.swap_time() / 132e-6).exp();
    assert!((contrast - oracle).abs() < 1e-9, "{contrast} vs {oracle}");
    assert!((contrast - 0.94).abs() < 0.01);
}

#[test]
fn transfer_examples() {
    let ideal = GateParams::ideal(D);
    let (_, trace) = polarization_transfer(1, 1.0, &ideal, 0.14).unwrap();
    assert!((trace[1] - 1.0).abs() < 1e-6);
    let (rho, trace) = polarization_transfer(0, 0.9, &ideal, 0.14).unwrap();
    assert_eq!(trace.len(), 1);
    assert!((trace[0] - 0.14).abs() < 1e-12);
    assert!((rho.polarization(SpinLabel::Xe).unwrap() - 0.14).abs() < 1e-12);
}

#[test]
fn calibrated_transfer_predicts_three_rounds() {
    let base = GateParams {
        t1rho: Some(DrivenDecayModel::new(132e-6).unwrap()),
        ..GateParams::ideal(D)
    };
    let cal = calibrate_control(&CalibrationTargets::default(), &base).unwrap();
    assert!(cal.converged);
    let gates = cal.apply(&base);
    let (_, trace) = polarization_transfer(3, cal.pump_efficiency, &gates, 0.14).unwrap();
    assert!((trace[3] - 0.94).abs() <= 0.06, "{trace:?}");
    assert!(trace.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn entangler_on_mixed_input_has_no_coherence() {
    let mixed = DensityState::maximally_mixed(SpinLayout::pair());
    let gates = GateParams {
        gate_error: 0.1,
        ..GateParams::ideal(D)
    };
    let out = prepare_entangled(&mixed, &gates).unwrap();
    assert!(bell_coherence(&out).unwrap().norm() < 1e-12);
}

#[test]
fn entangler_creates_coherence_from_any_nv_polarization() {
    for p in [0.05, 0.3, 1.0] {
        let rho = polarized_state(&SpinLayout::pair(), &[p, 0.0]).unwrap();
        let out = prepare_entangled(&rho, &GateParams::ideal(D)).unwrap();
        assert!(bell_coherence(&out).unwrap().norm() > 1e-3, "{p}");
    }
}

#[test]
fn modulated_scan_examples() {
    let gates = GateParams::ideal(D);
    let rho = prepare_entangled(&basis(0b00), &gates).unwrap();
    let times: Vec<f64> = (0..121).map(|i| i as f64 * 0.1e-6).collect();
    let flat = modulated_disentangle_scan(&rho, 0.0, 0.0, &times, &gates).unwrap();
    assert!(flat.iter().all(|v| (v - flat[0]).abs() < 1e-12));

    let signal = modulated_disentangle_scan(&rho, 300e3, 0.0, &times, &gates).unwrap();
    let peak = dominant_frequency(&times, &signal).unwrap();
    assert!((peak.frequency_hz - 300e3).abs() <= peak.resolution_hz, "{peak:?}");

    let signal = modulated_disentangle_scan(&rho, 500e3, 250e3, &times, &gates).unwrap();
    let peak = dominant_frequency(&times, &signal).unwrap();
    assert!((peak.frequency_hz - 750e3).abs() <= peak.resolution_hz, "{peak:?}");
}

#[test]
fn modulated_scan_rejects_negative_frequency() {
    let gates = GateParams::ideal(D);
    let rho = basis(0);
    assert!(modulated_disentangle_scan(&rho, -1.0, 0.0, &[0.0], &gates).is_err());
}

fn nv_superposition() -> DensityState {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let z = C64::new(0.0, 0.0);
    DensityState::pure(SpinLayout::pair(), &[C64::new(s, 0.0), z, C64::new(s, 0.0), z]).unwrap()
}

fn echo_phase(rho: &DensityState, element: (usize, usize), b: f64, tau: f64, targets: &[SpinLabel]) -> f64 {
    let gates = GateParams::ideal(D);
    let field = |amp| FieldModel::sinusoid(amp, 1.0 / tau, 0.0);
    let with = echo_sense(rho, tau, field(b), targets, &gates, None).unwrap();
    let without = echo_sense(rho, tau, field(0.0), targets, &gates, None).unwrap();
    (with.matrix()[element] / without.matrix()[element]).arg()
}

#[test]
fn zero_field_echo_only_applies_envelope() {
    let gates = GateParams::ideal(D);
    let rho = nv_superposition();
    let tau = 19e-6;
    let field = FieldModel::sinusoid(0.0, 1.0 / tau, 0.0);
    let bare = echo_sense(&rho, tau, field, &[SpinLabel::Nv], &gates, None).unwrap();
    let envelopes = EnvelopeSet::additive(22e3, 15e3, 1.6).unwrap();
    let damped = echo_sense(&rho, tau, field, &[SpinLabel::Nv], &gates, Some(envelopes)).unwrap();
    let ratio = damped.matrix()[(0, 2)] / bare.matrix()[(0, 2)];
    assert!(ratio.im.abs() < 1e-12);
    assert!((ratio.re - envelopes.nv.decay(tau)).abs() < 1e-12);
    assert!((bare.matrix()[(0, 2)].norm() - 0.5).abs() < 1e-12);
}

#[test]
fn single_spin_echo_phase() {
    let tau = 10e-6;
    let b = 0.005;
    let phi = echo_phase(&nv_superposition(), (0, 2), b, tau, &[SpinLabel::Nv]);
    let gamma = GateParams::ideal(D).constants.gamma_e;
    let expected = gamma * (2.0 / PI) * tau * b;
    assert!((phi.abs() - expected).abs() < 1e-9, "{phi} vs {expected}");
}

#[test]
fn one_envelope_per_window() {
    let tau = 12e-6;
    let gates = GateParams::ideal(D);
    let envelopes = EnvelopeSet {
        nv: DecoherenceEnvelope::new(1.0, 30e3, 1.0).unwrap(),
        xe: DecoherenceEnvelope::new(1.0, 15e3, 1.0).unwrap(),
        pair: DecoherenceEnvelope::new(1.0, 45e3, 1.0).unwrap(),
    };
    let field = FieldModel::constant(0.0);
    let seq = PulseSequence::new(vec![Segment::SensingWindow {
        duration_s: tau,
        field,
        pi_pulses_s: vec![tau / 4.0, tau / 2.0, 3.0 * tau / 4.0],
        targets: vec![SpinLabel::Nv],
    }])
    .unwrap();
    let rho = nv_superposition();
    let bare = gates.executor(None).run(&rho, &seq).unwrap().state;
    let damped = gates.executor(Some(envelopes)).run(&rho, &seq).unwrap().state;
    let ratio = (damped.matrix()[(0, 2)] / bare.matrix()[(0, 2)]).norm();
    assert!((ratio - envelopes.nv.decay(tau)).abs() < 1e-12, "{ratio}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn two_spin_phase_is_twice_single(b in -0.01f64..0.01, tau in 2e-6f64..30e-6) {
        let gates = GateParams::ideal(D);
        let phi_state = prepare_entangled(&basis(0b00), &gates).unwrap();
        let single = echo_phase(&nv_superposition(), (0, 2), b, tau, &[SpinLabel::Nv]);
        let double = echo_phase(&phi_state, (0, 3), b, tau, &[SpinLabel::Nv, SpinLabel::Xe]);
        let diff = (double - 2.0 * single + PI).rem_euclid(2.0 * PI) - PI;
        prop_assert!(diff.abs() < 1e-9, "single {} double {}", single, double);
    }

    #[test]
    fn readout_amplitudes_non_increasing(eps in 0.0f64..=1.0, kappa in 0.0f64..=1.0, q in 0.05f64..=1.0) {
        let gates = GateParams {
            gate_error: eps,
            mapping_error: kappa,
            ..GateParams::ideal(D)
        };
        let rho = polarized_state(&SpinLayout::pair(), &[q, q]).unwrap();
        let r = repetitive_readout(&rho, 6, &gates, &ReadoutModel::default()).unwrap();
        prop_assert!(r.amplitudes.iter().all(|&a| a >= 0.0));
        for w in r.amplitudes.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12, "{:?}", r.amplitudes);
        }
    }

    #[test]
    fn calibrated_readout_amplitudes_non_increasing(eps in 0.0f64..=1.0, q in 0.05f64..=1.0) {
        let gates = GateParams {
            gate_error: eps,
            mapping_error: 0.159,
            pump_efficiency: 0.876,
            ..GateParams::ideal(D)
        };
        let rho = polarized_state(&SpinLayout::pair(), &[q, q]).unwrap();
        let r = repetitive_readout(&rho, 9, &gates, &ReadoutModel::default()).unwrap();
        prop_assert!(r.amplitudes.iter().all(|&a| a >= 0.0));
        for w in r.amplitudes.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12, "{:?}", r.amplitudes);
        }
    }
}

#[test]
fn imperfect_pump_with_lossless_mapping_raises_later_reads() {
    let gates = GateParams {
        pump_efficiency: 0.5,
        ..GateParams::ideal(D)
    };
    let rho = polarized_state(&SpinLayout::pair(), &[0.8, 0.8]).unwrap();
    let a = repetitive_readout(&rho, 4, &gates, &ReadoutModel::default()).unwrap().amplitudes;
    assert!(a[4] > a[1], "{a:?}");
}

#[test]
fn overlap_factor_examples() {
    let tau = 10e-6;
    let matched = FieldModel::sinusoid(1.0, 1.0 / tau, 0.0);
    assert!((overlap_factor(&[tau / 2.0], tau, &matched) - 2.0 / PI).abs() < 1e-8);
    assert!(overlap_factor(&[], tau, &matched).abs() < 1e-8);
    let shifted = FieldModel::sinusoid(1.0, 1.0 / tau, PI / 4.0);
    let f = overlap_factor(&[tau / 2.0], tau, &shifted);
    assert!((f - (2.0 / PI) * (PI / 4.0).cos()).abs() < 1e-8);
    assert!((f - 0.4502).abs() < 1e-4);
}

#[test]
fn recoupled_readout_full_contrast() {
    let gates = GateParams::ideal(D);
    let (_, up) = recoupled_readout(&basis(0b00), &gates).unwrap();
    let (_, down) = recoupled_readout(&basis(0b01), &gates).unwrap();
    assert!((up - down - 2.0).abs() < 1e-6, "{up} {down}");
}

#[test]
fn recoupled_readout_decays_geometrically() {
    let gates = GateParams {
        gate_error: 0.03,
        mapping_error: 0.05,
        ..GateParams::ideal(D)
    };
    let mut rho = polarized_state(&SpinLayout::pair(), &[1.0, 0.9]).unwrap();
    let mut xe = vec![rho.polarization(SpinLabel::Xe).unwrap()];
    for _ in 0..5 {
        rho = recoupled_readout(&rho, &gates).unwrap().0;
        xe.push(rho.polarization(SpinLabel::Xe).unwrap());
    }
    let ratios: Vec<f64> = xe.windows(2).map(|w| w[1] / w[0]).collect();
    assert!(ratios[0] < 1.0);
    assert!(ratios.iter().all(|r| (r - ratios[0]).abs() < 1e-9), "{ratios:?}");
}

#[test]
fn laser_leaves_xe_untouched() {
    let rho = polarized_state(&SpinLayout::pair(), &[-0.3, 0.7]).unwrap();
    let before = partial_trace(&rho, &[SpinLabel::Xe]).unwrap();
    for e in [0.0, 0.5, 1.0] {
        let after = partial_trace(&optical_pump(&rho, e).unwrap(), &[SpinLabel::Xe]).unwrap();
        assert!(after.distance(&before) < 1e-12);
    }
}

#[test]
fn ideal_repetitive_readout_is_flat() {
    let gates = GateParams::ideal(D);
    let rho = polarized_state(&SpinLayout::pair(), &[1.0, 1.0]).unwrap();
    let r = repetitive_readout(&rho, 9, &gates, &ReadoutModel::default()).unwrap();
    assert_eq!(r.amplitudes.len(), 10);
    assert!(r.amplitudes.iter().all(|a| (a - r.amplitudes[0]).abs() < 1e-6), "{:?}", r.amplitudes);
    let single = repetitive_readout(&rho, 0, &gates, &ReadoutModel::default()).unwrap();
    assert_eq!(single.amplitudes.len(), 1);
}

#[test]
fn nuclear_factor_examples() {
    let signal = [0.4, -0.2];
    let half = nuclear_contrast(&signal, &NuclearFactor::new(0.0, 1).unwrap(), false).unwrap();
    assert_eq!(half.values, vec![0.2, -0.1]);
    assert!(!half.renormalized);
    let full = nuclear_contrast(&signal, &NuclearFactor::new(1.0, 1).unwrap(), false).unwrap();
    assert_eq!(full.values, signal.to_vec());
    let both = nuclear_contrast(&signal, &NuclearFactor::new(0.0, 2).unwrap(), false).unwrap();
    assert_eq!(both.values, signal.to_vec());
    let shown = nuclear_contrast(&signal, &NuclearFactor::new(0.0, 1).unwrap(), true).unwrap();
    assert!(shown.renormalized);
    assert_eq!(shown.values, signal.to_vec());
    assert!(NuclearFactor::new(1.5, 1).is_err());
    assert!(NuclearFactor::new(0.5, 3).is_err());
}

#[test]
fn disentangle_inverts_entangler() {
    let gates = GateParams::ideal(D);
    let phi = prepare_entangled(&basis(0b00), &gates).unwrap();
    let back = disentangle(&phi, &gates, [0.0, 0.0]).unwrap();
    let nv = back.polarization(SpinLabel::Nv).unwrap().abs();
    assert!((nv - 1.0).abs() < 1e-6, "{nv}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn total_duration_is_segment_sum(durations in prop::collection::vec(0.0f64..1e-4, 0..12)) {
        let segments: Vec<Segment> = durations
            .iter()
            .enumerate()
            .map(|(i, &d)| if i % 2 == 0 {
                Segment::Delay { duration_s: d }
            } else {
                Segment::LaserPulse { duration_s: d, efficiency: 0.9 }
            })
            .collect();
        let seq = PulseSequence::new(segments).unwrap();
        let sum: f64 = durations.iter().sum();
        prop_assert_eq!(seq.total_duration(), sum);
        let back = PulseSequence::from_json(&seq.to_json()).unwrap();
        prop_assert_eq!(back.segments.len(), durations.len());
    }
}

#[test]
fn negative_durations_rejected() {
    assert!(PulseSequence::new(vec![Segment::Delay { duration_s: -1e-6 }]).is_err());
}
