//! Maximum gain in sensitivity over a grid of dipolar couplings and
//! decoherence-rate ratios.
//!
//! Two-spin overheads (`τ_Φ`, `τ_rr`) are coupling-limited and scale as
//! `d_ref/d`; `τ_NV` is held fixed. The pair decays at `Γ₂ᴺⱽ(1 + ratio)` with a
//! common exponent.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::sensitivity::{ReadoutLadder, TimingBudget};
use crate::protocols::library::NuclearFactor;
use crate::{Error, Result};

const GOLDEN: f64 = 0.618_033_988_749_894_8;
const COARSE_POINTS: usize = 65;
const DENSE_POINTS: usize = 4097;
/// Relative τ tolerance of the golden-section search.
pub const TAU_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub d_axis_hz: Vec<f64>,
    pub ratio_axis: Vec<f64>,
    pub gamma_nv_hz: f64,
    pub p: f64,
    pub alpha0_nv: f64,
    pub alpha0_phi: f64,
    pub nuclear: NuclearFactor,
    /// Coupling at which `budget` was measured.
    pub reference_coupling_hz: f64,
    pub budget: TimingBudget,
    /// Ladder for the repetitive-readout map; its length bounds `m`.
    pub ladder: ReadoutLadder,
    pub tau_min_s: f64,
    /// Upper end of the τ window in units of `1/Γ₂ᴺⱽ`.
    pub tau_max_decay_times: f64,
}

impl SweepSpec {
    /// Measured constants on the given axes, with a polarized nucleus.
    pub fn measured(d_axis_hz: Vec<f64>, ratio_axis: Vec<f64>, ladder: ReadoutLadder) -> Self {
        SweepSpec {
            d_axis_hz,
            ratio_axis,
            gamma_nv_hz: 22e3,
            p: 1.6,
            alpha0_nv: 0.96,
            alpha0_phi: 0.78,
            nuclear: NuclearFactor {
                polarization: 1.0,
                transitions: 1,
            },
            reference_coupling_hz: 58e3,
            budget: TimingBudget::default(),
            ladder,
            tau_min_s: 1e-6,
            tau_max_decay_times: 5.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, axis) in [("d_axis_hz", &self.d_axis_hz), ("ratio_axis", &self.ratio_axis)] {
            if axis.is_empty() {
                return Err(Error::FitInput(format!("{name} is empty")));
            }
            if axis.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(Error::FitInput(format!("{name} must be positive")));
            }
            if axis.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::FitInput(format!("{name} must be strictly increasing")));
            }
        }
        self.nuclear.validate()?;
        self.budget.validate()?;
        for (name, v) in [
            ("gamma_nv_hz", self.gamma_nv_hz),
            ("p", self.p),
            ("alpha0_nv", self.alpha0_nv),
            ("alpha0_phi", self.alpha0_phi),
            ("reference_coupling_hz", self.reference_coupling_hz),
            ("tau_min_s", self.tau_min_s),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::OutOfRange { name, value: v });
            }
        }
        if !(self.tau_max_s() > self.tau_min_s) {
            return Err(Error::OutOfRange {
                name: "tau_max_decay_times",
                value: self.tau_max_decay_times,
            });
        }
        Ok(())
    }

    pub fn tau_max_s(&self) -> f64 {
        self.tau_max_decay_times / self.gamma_nv_hz
    }

    /// Budget with the coupling-limited overheads scaled to `d`.
    pub fn budget_at(&self, d_hz: f64) -> TimingBudget {
        let k = self.reference_coupling_hz / d_hz;
        TimingBudget {
            tau_phi_s: self.budget.tau_phi_s * k,
            tau_rr_s: self.budget.tau_rr_s * k,
            ..self.budget
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellOptimum {
    pub g_tilde: f64,
    pub tau_s: f64,
    /// Additional readouts.
    pub m: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub d_hz: f64,
    pub ratio: f64,
    pub without_rr: CellOptimum,
    pub with_rr: CellOptimum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    /// Axes and fixed inputs.
    pub spec: SweepSpec,
    /// Row-major in `d`, then ratio.
    pub cells: Vec<SweepCell>,
}

impl SweepGrid {
    pub fn cell(&self, i_d: usize, j_ratio: usize) -> &SweepCell {
        &self.cells[i_d * self.spec.ratio_axis.len() + j_ratio]
    }
}

/// `g̃(τ)` at one cell for a fixed readout count.
struct Profile {
    factor: f64,
    gamma_nv: f64,
    gamma_phi: f64,
    p: f64,
    tau_nv: f64,
    overhead: f64,
}

impl Profile {
    fn value(&self, tau: f64) -> f64 {
        let log_ratio = (self.gamma_nv * tau).powf(self.p) - (self.gamma_phi * tau).powf(self.p);
        let h = ((tau + self.tau_nv) / (tau + self.tau_nv + self.overhead)).sqrt();
        self.factor * log_ratio.exp() * h
    }
}

fn golden_section(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > TAU_TOL * (a.abs() + b.abs()) {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

fn grid_argmax(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> (Vec<f64>, Vec<f64>, usize) {
    let xs: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let best = ys
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    (xs, ys, best)
}

fn local_maxima(ys: &[f64]) -> usize {
    let n = ys.len();
    (0..n)
        .filter(|&i| {
            let left = i == 0 || ys[i] > ys[i - 1];
            let right = i + 1 == n || ys[i] >= ys[i + 1];
            left && right
        })
        .count()
}

/// Maximum of `f` on `[lo, hi]`: golden section around the best coarse sample
/// when the coarse profile is unimodal, otherwise around the best sample of a
/// dense grid.
pub fn maximize_on_interval(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    let (mut xs, mut ys, mut i) = grid_argmax(f, lo, hi, COARSE_POINTS);
    if local_maxima(&ys) > 1 {
        (xs, ys, i) = grid_argmax(f, lo, hi, DENSE_POINTS);
    }
    let a = xs[i.saturating_sub(1)];
    let b = xs[(i + 1).min(xs.len() - 1)];
    let (x, y) = golden_section(f, a, b);
    if y >= ys[i] {
        (x, y)
    } else {
        (xs[i], ys[i])
    }
}

fn optimize_cell(spec: &SweepSpec, gains: &[f64], d_hz: f64, ratio: f64, max_m: usize) -> CellOptimum {
    let budget = spec.budget_at(d_hz);
    let base = 2.0 * spec.alpha0_phi / spec.alpha0_nv * spec.nuclear.factor();
    let mut best = CellOptimum {
        g_tilde: f64::NEG_INFINITY,
        tau_s: spec.tau_min_s,
        m: 0,
    };
    for (m, &gain) in gains.iter().enumerate().take(max_m + 1) {
        let profile = Profile {
            factor: base * gain,
            gamma_nv: spec.gamma_nv_hz,
            gamma_phi: spec.gamma_nv_hz * (1.0 + ratio),
            p: spec.p,
            tau_nv: budget.tau_nv_s,
            overhead: budget.tau_phi_s + m as f64 * budget.tau_rr_s,
        };
        let (tau, g) = maximize_on_interval(&|t| profile.value(t), spec.tau_min_s, spec.tau_max_s());
        if g > best.g_tilde {
            best = CellOptimum { g_tilde: g, tau_s: tau, m };
        }
    }
    best
}

/// Best `g̃` at one `(d, ratio)` point, without and with repetitive readout.
pub fn cell_optimum(spec: &SweepSpec, d_hz: f64, ratio: f64) -> Result<SweepCell> {
    let gains = spec.ladder.snr_gains()?;
    Ok(SweepCell {
        d_hz,
        ratio,
        without_rr: optimize_cell(spec, &gains, d_hz, ratio, 0),
        with_rr: optimize_cell(spec, &gains, d_hz, ratio, gains.len() - 1),
    })
}

pub fn sweep_gain_map(spec: &SweepSpec) -> Result<SweepGrid> {
    spec.validate()?;
    let gains = spec.ladder.snr_gains()?;
    let points: Vec<(f64, f64)> = spec
        .d_axis_hz
        .iter()
        .flat_map(|&d| spec.ratio_axis.iter().map(move |&r| (d, r)))
        .collect();
    let cells = points
        .par_iter()
        .map(|&(d, r)| SweepCell {
            d_hz: d,
            ratio: r,
            without_rr: optimize_cell(spec, &gains, d, r, 0),
            with_rr: optimize_cell(spec, &gains, d, r, gains.len() - 1),
        })
        .collect();
    Ok(SweepGrid {
        spec: spec.clone(),
        cells,
    })
}

fn bisect(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> Option<f64> {
    let (flo, fhi) = (f(lo), f(hi));
    if flo.signum() == fhi.signum() {
        return None;
    }
    let rising = flo < 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) < 0.0) == rising {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * (lo.abs() + hi.abs()) {
            break;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Coupling at which the single-readout optimum reaches `g̃ = 1` for `ratio`,
/// searched in `[lo, hi]`.
pub fn boundary_coupling(spec: &SweepSpec, ratio: f64, lo: f64, hi: f64) -> Result<Option<f64>> {
    let gains = spec.ladder.snr_gains()?;
    Ok(bisect(
        &|d| optimize_cell(spec, &gains, d, ratio, 0).g_tilde - 1.0,
        lo,
        hi,
    ))
}

/// Ratio at which the single-readout optimum reaches `g̃ = 1` for `d_hz`.
pub fn boundary_ratio(spec: &SweepSpec, d_hz: f64, lo: f64, hi: f64) -> Result<Option<f64>> {
    let gains = spec.ladder.snr_gains()?;
    Ok(bisect(
        &|r| optimize_cell(spec, &gains, d_hz, r, 0).g_tilde - 1.0,
        lo,
        hi,
    ))
}

/// Relative increase of `α₀^Φ/α₀^NV` that lifts the single-readout optimum at
/// `(d, ratio)` to `g̃ = 1`; negative when already above.
pub fn required_contrast_increase(spec: &SweepSpec, d_hz: f64, ratio: f64) -> Result<f64> {
    let cell = cell_optimum(spec, d_hz, ratio)?;
    Ok(1.0 / cell.without_rr.g_tilde - 1.0)
}
