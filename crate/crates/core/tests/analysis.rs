//! Fits, sensitivity figures of merit and the coupling/decay-ratio sweep.

use std::f64::consts::PI;

use entangle_sense::analysis::fit::{
    fit_sinusoid, fit_stretched_exp, MagnetometryCurve, SinusoidProblem, StretchedExpProblem,
};
use entangle_sense::analysis::ladder::GeometricLadder;
use entangle_sense::analysis::lm::{central_difference, LeastSquaresProblem};
use entangle_sense::analysis::sensitivity::{
    gain_performance, gain_profile, gain_sensitivity, min_field, overhead_factor,
    precession_rate, snr_bound_check, ReadoutLadder, SensitivityInputs, SensitivityReport,
    TimingBudget, ECHO_OVERLAP,
};
use entangle_sense::analysis::sweep::{cell_optimum, SweepSpec};
use entangle_sense::dynamics::DecoherenceEnvelope;
use entangle_sense::protocols::library::NuclearFactor;
use entangle_sense::spinsys::PhysicalConstants;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn gamma_e() -> f64 {
    PhysicalConstants::default().gamma_e
}

fn sinusoid_curve(alpha: f64, nu: f64, phase: f64, offset: f64, sigma: f64, seed: Option<u64>) -> MagnetometryCurve {
    let b: Vec<f64> = (0..41).map(|i| -0.03 + 0.0015 * i as f64).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(0));
    let noise = Normal::new(0.0, sigma).unwrap();
    let signal = b
        .iter()
        .map(|x| {
            let clean = alpha * (nu * x + phase).sin() + offset;
            if seed.is_some() {
                clean + noise.sample(&mut rng)
            } else {
                clean
            }
        })
        .collect();
    MagnetometryCurve {
        sigma: vec![sigma; b.len()],
        b_gauss: b,
        signal,
        tau_s: 10e-6,
        spins: 1,
    }
}

fn echo_rate() -> f64 {
    2.0 * gamma_e() * ECHO_OVERLAP * 10e-6
}

#[test]
fn noiseless_sinusoid_recovered() {
    let nu = echo_rate();
    let fit = fit_sinusoid(&sinusoid_curve(0.8, nu, 0.3, 0.05, 0.05, None)).unwrap();
    assert!(fit.converged);
    let rel = |name: &str, truth: f64| (fit.param(name).unwrap() - truth).abs() / truth.abs();
    assert!(rel("amplitude", 0.8) < 1e-6);
    assert!(rel("rate_rad_per_gauss", nu) < 1e-6);
    assert!(rel("phase_rad", 0.3) < 1e-6);
    assert!(rel("offset", 0.05) < 1e-6);
}

#[test]
fn sinusoid_fit_coverage() {
    let nu = echo_rate();
    let truth = [0.8, nu, 0.3, 0.05];
    let names = ["amplitude", "rate_rad_per_gauss", "phase_rad", "offset"];
    let trials = 1000;
    let mut covered = [0usize; 4];
    for seed in 0..trials {
        let fit = fit_sinusoid(&sinusoid_curve(0.8, nu, 0.3, 0.05, 0.05, Some(seed))).unwrap();
        assert!(fit.converged, "seed {seed}");
        for (i, name) in names.iter().enumerate() {
            if (fit.param(name).unwrap() - truth[i]).abs() <= 3.0 * fit.error(name).unwrap() {
                covered[i] += 1;
            }
        }
    }
    for (name, c) in names.iter().zip(covered) {
        assert!(c as f64 >= 0.99 * trials as f64, "{name}: {c}/{trials}");
    }
}

fn decay_data(gamma: f64, p: f64, alpha0: f64, sigma: f64, seed: Option<u64>) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let times: Vec<f64> = (1..=60).map(|i| i as f64 * 1.5e-6).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(0));
    let noise = Normal::new(0.0, sigma).unwrap();
    let y = times
        .iter()
        .map(|t| {
            let clean = alpha0 * (-(gamma * t).powf(p)).exp();
            clean + if seed.is_some() { noise.sample(&mut rng) } else { 0.0 }
        })
        .collect();
    (times.clone(), y, vec![sigma; times.len()])
}

#[test]
fn stretched_exp_recovery_at_snr_50() {
    let (alpha0, gamma, p) = (0.96, 22e3, 1.6);
    let trials = 200;
    let (mut gs, mut ps, mut g_err) = (Vec::new(), Vec::new(), Vec::new());
    for seed in 0..trials {
        let (t, y, s) = decay_data(gamma, p, alpha0, alpha0 / 50.0, Some(seed));
        let fit = fit_stretched_exp(&t, &y, &s, None).unwrap();
        assert!(fit.converged);
        gs.push(fit.param("gamma2_hz").unwrap());
        ps.push(fit.param("p").unwrap());
        g_err.push(fit.error("gamma2_hz").unwrap());
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let sd = |v: &[f64]| {
        let m = mean(v);
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
    };
    assert!((mean(&gs) / gamma - 1.0).abs() < 0.01, "mean Γ₂ {}", mean(&gs));
    assert!((mean(&ps) / p - 1.0).abs() < 0.01, "mean p {}", mean(&ps));
    let calibration = sd(&gs) / mean(&g_err);
    assert!((calibration - 1.0).abs() < 0.2, "scatter / reported error = {calibration}");
}

#[test]
fn exponential_with_fixed_exponent_is_exact() {
    let (t, y, s) = decay_data(30e3, 1.0, 0.9, 0.01, None);
    let fit = fit_stretched_exp(&t, &y, &s, Some(1.0)).unwrap();
    assert!((fit.param("gamma2_hz").unwrap() / 30e3 - 1.0).abs() < 1e-8);
    assert!((fit.param("alpha0").unwrap() / 0.9 - 1.0).abs() < 1e-8);
}

fn assert_jacobian_matches(problem: &dyn LeastSquaresProblem, p: &[f64]) {
    let analytic = problem.jacobian(p);
    let numeric = central_difference(|q| problem.residuals(q), p);
    let scale = analytic.amax().max(1.0);
    let diff = (&analytic - &numeric).amax();
    assert!(diff <= 1e-5 * scale, "max deviation {diff} (scale {scale})");
}

#[test]
fn sinusoid_jacobian_matches_finite_differences() {
    let nu = echo_rate();
    let curve = sinusoid_curve(0.8, nu, 0.3, 0.05, 0.05, Some(3));
    let fit = fit_sinusoid(&curve).unwrap();
    let scale = 0.06;
    let problem = SinusoidProblem {
        x: curve.b_gauss.iter().map(|b| b / scale).collect(),
        y: curve.signal.clone(),
        sigma: curve.sigma.clone(),
    };
    let p = fit.params.clone();
    let internal = [p[0], p[1] * scale, p[2], p[3]];
    assert_jacobian_matches(&problem, &internal);
    assert_jacobian_matches(&problem, &[0.5, 7.0, -1.0, 0.2]);
}

#[test]
fn stretched_jacobian_matches_finite_differences() {
    let (t, y, s) = decay_data(22e3, 1.6, 0.96, 0.02, Some(5));
    let scale = t.iter().copied().fold(0.0, f64::max);
    let fit = fit_stretched_exp(&t, &y, &s, None).unwrap();
    let internal = [fit.params[0], fit.params[1] * scale, fit.params[2]];
    let x: Vec<f64> = t.iter().map(|v| v / scale).collect();
    for fixed_p in [None, Some(1.6)] {
        let problem = StretchedExpProblem {
            x: x.clone(),
            y: y.clone(),
            sigma: s.clone(),
            fixed_p,
        };
        let n = problem.n_params();
        assert_jacobian_matches(&problem, &internal[..n]);
        assert_jacobian_matches(&problem, &[0.7, 1.3, 2.1][..n]);
    }
}

#[test]
fn min_field_examples() {
    let nu1 = precession_rate(1, gamma_e(), ECHO_OVERLAP, 10e-6);
    let nu2 = precession_rate(2, gamma_e(), ECHO_OVERLAP, 10e-6);
    let d1 = min_field(0.9, nu1, 0.05).unwrap();
    let d2 = min_field(0.9, nu2, 0.05).unwrap();
    assert!((d2 - d1 / 2.0).abs() < 1e-18);
    let oracle = 0.05 / (0.9 * 2.0 * PI * 2.8e6 * (2.0 / PI) * 1e-5);
    assert!((d1 - oracle).abs() < 1e-15);
    assert!((d1 - 4.96e-4).abs() < 1e-6);
}

#[test]
fn gain_performance_examples() {
    let nv = DecoherenceEnvelope::new(0.96, 22e3, 1.6).unwrap();
    let phi = DecoherenceEnvelope::new(0.78, 36e3, 1.6).unwrap();
    let polarized = NuclearFactor::new(1.0, 1).unwrap();
    let unpolarized = NuclearFactor::new(0.0, 1).unwrap();
    assert!((gain_performance(19e-6, &nv, &nv, &polarized) - 2.0).abs() < 1e-12);
    let g25 = gain_performance(25e-6, &nv, &phi, &polarized);
    assert!((g25 - 1.0).abs() < 0.05, "{g25}");
    for i in 0..=400 {
        let tau = i as f64 * 0.25e-6;
        assert!(gain_performance(tau, &nv, &phi, &unpolarized) < 1.0);
    }
}

#[test]
fn overhead_examples() {
    let budget = TimingBudget::default();
    let h = overhead_factor(&budget).unwrap();
    assert!((h - (24.7f64 / 45.7).sqrt()).abs() < 1e-12);
    assert!((h - 0.735).abs() < 1e-3);
    let free = TimingBudget {
        tau_phi_s: 0.0,
        ..budget
    };
    assert_eq!(overhead_factor(&free).unwrap(), 1.0);
    let long = overhead_factor(&budget.at(1.0, 1)).unwrap();
    assert!(1.0 - long < 1e-4);
}

fn report(g: f64, g_rr: f64, snr_gain: f64, m: usize) -> SensitivityReport {
    SensitivityReport {
        tau_s: 19e-6,
        spins: 2,
        m,
        delta_b_single_gauss: 1.0,
        delta_b_gauss: 1.0 / g_rr,
        eta_gauss_sqrt_s: 1.0,
        g,
        g_rr,
        h: 1.0,
        g_tilde: g_rr,
        snr_gain,
        nuclear: NuclearFactor::new(1.0, 1).unwrap(),
    }
}

#[test]
fn bound_check_examples() {
    let bad = snr_bound_check(&report(2.5, 2.5, 1.0, 0));
    assert!(!bad.ok);
    assert_eq!(bad.violations.len(), 2);
    let paper = report(1.06 / 1.91, 1.06, 1.91, 9);
    assert!(snr_bound_check(&paper).ok);
    let inputs = SensitivityInputs::measured();
    for r in gain_profile(&inputs, 19e-6).unwrap() {
        assert!(snr_bound_check(&r).ok);
    }
}

#[test]
fn ideal_single_readout_is_twice_h() {
    let mut inputs = SensitivityInputs::measured();
    inputs.phi = inputs.nv;
    let r = gain_sensitivity(&inputs, 19e-6, 0).unwrap();
    assert!((r.g_tilde - 2.0 * r.h).abs() < 1e-12);
}

fn envelope() -> impl Strategy<Value = DecoherenceEnvelope> {
    (0.1f64..=1.0, 1e3f64..1e5, 0.5f64..3.0)
        .prop_map(|(a, g, p)| DecoherenceEnvelope::new(a, g, p).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn gain_bounded_by_spin_count(
        nv in envelope(),
        shrink in 0.0f64..=1.0,
        extra in 0.0f64..5e4,
        q in 0.0f64..=1.0,
        transitions in 1u8..=2,
        tau in 1e-7f64..1e-4,
    ) {
        let phi = DecoherenceEnvelope::new(nv.alpha0 * shrink, nv.gamma2_hz + extra, nv.p).unwrap();
        let nuclear = NuclearFactor::new(q, transitions).unwrap();
        let g = gain_performance(tau, &nv, &phi, &nuclear);
        prop_assert!(g <= 2.0 + 1e-12);
    }

    #[test]
    fn repetitive_gain_bounded(
        ratio in 0.3f64..0.999,
        sigma in 0.1f64..3.0,
        q in 0.0f64..=1.0,
        tau in 1e-6f64..6e-5,
    ) {
        let mut inputs = SensitivityInputs::measured();
        inputs.nuclear = NuclearFactor::new(q, 1).unwrap();
        inputs.ladder = GeometricLadder::with_total(4.2, 9, ratio, sigma).unwrap().readouts(15);
        for r in gain_profile(&inputs, tau).unwrap() {
            prop_assert!(r.g_rr <= 2.0 * r.snr_gain * (1.0 + 1e-12));
            prop_assert!(snr_bound_check(&r).ok);
        }
    }

    #[test]
    fn overhead_in_unit_interval_and_monotone(
        tau in 1e-7f64..1e-3,
        dtau in 1e-7f64..1e-4,
        tau_nv in 0.0f64..1e-5,
        tau_phi in 0.0f64..5e-5,
        tau_rr in 1e-7f64..1e-5,
        m in 1usize..20,
    ) {
        let b = TimingBudget { tau_s: tau, tau_nv_s: tau_nv, tau_phi_s: tau_phi, tau_rr_s: tau_rr, repetitions: m };
        let h = overhead_factor(&b).unwrap();
        prop_assert!(h > 0.0 && h <= 1.0);
        prop_assert!(overhead_factor(&b.at(tau + dtau, m)).unwrap() >= h);
        prop_assert!(overhead_factor(&b.at(tau, m + 1)).unwrap() < h);
    }

    #[test]
    fn geometric_ladder_gain_has_one_peak(
        ratio in 0.3f64..0.999,
        sigma in 0.1f64..3.0,
        q in 0.0f64..=1.0,
        tau in 1e-6f64..6e-5,
    ) {
        let mut inputs = SensitivityInputs::measured();
        inputs.nuclear = NuclearFactor::new(q, 1).unwrap();
        inputs.ladder = GeometricLadder::with_total(4.2, 9, ratio, sigma).unwrap().readouts(30);
        let g: Vec<f64> = gain_profile(&inputs, tau).unwrap().iter().map(|r| r.g_tilde).collect();
        let interior_maxima = (1..g.len() - 1)
            .filter(|&i| g[i] > g[i - 1] && g[i] > g[i + 1])
            .count();
        prop_assert!(interior_maxima <= 1, "{:?}", g);
    }

    #[test]
    fn sweep_is_monotone(d in 20e3f64..150e3, dd in 1e3f64..50e3, ratio in 0.1f64..2.0, dr in 0.01f64..0.5) {
        let spec = SweepSpec::measured(vec![d], vec![ratio], ReadoutLadder::single());
        let base = cell_optimum(&spec, d, ratio).unwrap().without_rr.g_tilde;
        let stronger = cell_optimum(&spec, d + dd, ratio).unwrap().without_rr.g_tilde;
        let faster_decay = cell_optimum(&spec, d, ratio + dr).unwrap().without_rr.g_tilde;
        prop_assert!(stronger >= base - 1e-9);
        prop_assert!(faster_decay <= base + 1e-9);
    }
}
