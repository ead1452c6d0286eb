//! Time evolution of density states in the doubly rotating frame.
//!
//! Coherent evolution uses `U = exp(−iHt)` from a Hermitian eigendecomposition.
//! Dissipation is modeled by explicit channels (optical pumping, driven decay)
//! and by analytic stretched-exponential envelopes applied once per sensing
//! interval. An Ornstein-Uhlenbeck field-noise Monte Carlo offers a stochastic
//! alternative to the analytic envelopes.

use std::f64::consts::PI;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::spinsys::{
    build_operator, hermitian_deviation, DensityState, PhysicalConstants, SpinLabel, SpinLayout,
    SpinOp, POSITIVITY_TOL,
};
use crate::{CMatrix, Error, Result, C64};

/// Angular prefactor of the secular coupling: `H_dd = 4πd·Sz⊗Sz`, which makes a
/// full Hartmann-Hahn exchange take `1/(2d)`.
pub const COUPLING_ANGULAR_FACTOR: f64 = 4.0 * PI;

/// Field sub-steps per period of a time-dependent field.
pub const SUBSTEPS_PER_PERIOD: f64 = 200.0;

/// Resonant or detuned rotating-frame drive on one spin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Drive {
    pub target: SpinLabel,
    /// Rabi frequency Ω in rad/s.
    pub rabi: f64,
    pub phase: f64,
    /// Detuning in rad/s.
    #[serde(default)]
    pub detuning: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Waveform {
    Constant,
    Sinusoid,
}

/// Classical field `b(t)` along the quantization axis, in Gauss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldModel {
    pub amplitude_gauss: f64,
    #[serde(default)]
    pub frequency_hz: f64,
    #[serde(default)]
    pub phase_rad: f64,
    pub waveform: Waveform,
}

impl FieldModel {
    pub fn sinusoid(amplitude_gauss: f64, frequency_hz: f64, phase_rad: f64) -> Self {
        FieldModel {
            amplitude_gauss,
            frequency_hz,
            phase_rad,
            waveform: Waveform::Sinusoid,
        }
    }

    pub fn constant(amplitude_gauss: f64) -> Self {
        FieldModel {
            amplitude_gauss,
            frequency_hz: 0.0,
            phase_rad: 0.0,
            waveform: Waveform::Constant,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.frequency_hz >= 0.0 && self.frequency_hz.is_finite()) {
            return Err(Error::OutOfRange {
                name: "field.frequency_hz",
                value: self.frequency_hz,
            });
        }
        if !self.amplitude_gauss.is_finite() || !self.phase_rad.is_finite() {
            return Err(Error::OutOfRange {
                name: "field.amplitude_gauss",
                value: self.amplitude_gauss,
            });
        }
        Ok(())
    }

    pub fn value(&self, t: f64) -> f64 {
        match self.waveform {
            Waveform::Constant => self.amplitude_gauss,
            Waveform::Sinusoid => {
                self.amplitude_gauss * (2.0 * PI * self.frequency_hz * t + self.phase_rad).sin()
            }
        }
    }

    /// `∫_{t0}^{t1} b(t) dt` in closed form.
    pub fn integral(&self, t0: f64, t1: f64) -> f64 {
        match self.waveform {
            Waveform::Constant => self.amplitude_gauss * (t1 - t0),
            Waveform::Sinusoid => {
                if self.frequency_hz == 0.0 {
                    return self.amplitude_gauss * self.phase_rad.sin() * (t1 - t0);
                }
                let w = 2.0 * PI * self.frequency_hz;
                self.amplitude_gauss
                    * ((w * t0 + self.phase_rad).cos() - (w * t1 + self.phase_rad).cos())
                    / w
            }
        }
    }

    fn is_time_dependent(&self) -> bool {
        self.waveform == Waveform::Sinusoid && self.frequency_hz > 0.0
    }
}

/// Rotating-frame Hamiltonian description.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HamiltonianSpec {
    pub drives: Vec<Drive>,
    /// Dipolar coupling `d` in Hz between NV and Xe.
    pub coupling_hz: f64,
    /// Field coupled to every electronic spin through `γ_e·b(t)·Sz`.
    pub field: Option<FieldModel>,
    pub constants: PhysicalConstants,
}

impl HamiltonianSpec {
    pub fn coupling_only(coupling_hz: f64) -> Self {
        HamiltonianSpec {
            coupling_hz,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        for d in &self.drives {
            if !d.rabi.is_finite() || !d.phase.is_finite() || !d.detuning.is_finite() {
                return Err(Error::OutOfRange {
                    name: "drive",
                    value: d.rabi,
                });
            }
        }
        if !self.coupling_hz.is_finite() {
            return Err(Error::OutOfRange {
                name: "coupling_hz",
                value: self.coupling_hz,
            });
        }
        if let Some(f) = &self.field {
            f.validate()?;
        }
        Ok(())
    }

    /// Drive and detuning terms only.
    pub fn drive_matrix(&self, layout: &SpinLayout) -> Result<CMatrix> {
        let n = layout.dim();
        let mut h = CMatrix::zeros(n, n);
        for d in &self.drives {
            let sx = layout.embed(d.target, &SpinOp::Sx.matrix())?;
            let sy = layout.embed(d.target, &SpinOp::Sy.matrix())?;
            let sz = layout.embed(d.target, &SpinOp::Sz.matrix())?;
            h += sx * C64::new(d.rabi * d.phase.cos(), 0.0)
                + sy * C64::new(d.rabi * d.phase.sin(), 0.0)
                + sz * C64::new(d.detuning, 0.0);
        }
        Ok(h)
    }

    /// Secular dipolar term `4πd·Sz⊗Sz`, zero unless both electronic spins exist.
    pub fn coupling_matrix(&self, layout: &SpinLayout) -> Result<CMatrix> {
        let n = layout.dim();
        if self.coupling_hz == 0.0
            || !layout.contains(SpinLabel::Nv)
            || !layout.contains(SpinLabel::Xe)
        {
            return Ok(CMatrix::zeros(n, n));
        }
        let spec: Vec<(SpinLabel, SpinOp)> = layout
            .labels()
            .iter()
            .map(|&l| match l {
                SpinLabel::Nv | SpinLabel::Xe => (l, SpinOp::Sz),
                SpinLabel::Xn => (l, SpinOp::I),
            })
            .collect();
        Ok(build_operator(layout, &spec)?.matrix
            * C64::new(COUPLING_ANGULAR_FACTOR * self.coupling_hz, 0.0))
    }

    /// `Σ Sz` over the electronic spins present.
    pub fn field_operator(layout: &SpinLayout) -> Result<CMatrix> {
        let n = layout.dim();
        let mut op = CMatrix::zeros(n, n);
        for &l in layout.labels() {
            if l != SpinLabel::Xn {
                op += layout.embed(l, &SpinOp::Sz.matrix())?;
            }
        }
        Ok(op)
    }

    /// Time-independent part: drives and coupling.
    pub fn static_matrix(&self, layout: &SpinLayout) -> Result<CMatrix> {
        Ok(self.drive_matrix(layout)? + self.coupling_matrix(layout)?)
    }

    /// Full Hamiltonian at absolute time `t`.
    pub fn matrix_at(&self, layout: &SpinLayout, t: f64) -> Result<CMatrix> {
        let mut h = self.static_matrix(layout)?;
        if let Some(f) = &self.field {
            h += Self::field_operator(layout)? * C64::new(self.constants.gamma_e * f.value(t), 0.0);
        }
        Ok(h)
    }
}

fn check_hermitian(h: &CMatrix) -> Result<()> {
    let scale = h.iter().fold(1.0f64, |acc, z| acc.max(z.norm()));
    let dev = hermitian_deviation(h);
    if dev > 1e-12 * scale {
        return Err(Error::NotHermitian(dev));
    }
    Ok(())
}

fn is_diagonal(h: &CMatrix) -> bool {
    let n = h.nrows();
    (0..n).all(|i| (0..n).all(|j| i == j || h[(i, j)] == C64::new(0.0, 0.0)))
}

/// `exp(−iHt)` for Hermitian `H`.
pub fn unitary(h: &CMatrix, t: f64) -> CMatrix {
    let n = h.nrows();
    if is_diagonal(h) {
        let d: Vec<C64> = (0..n)
            .map(|i| C64::from_polar(1.0, -h[(i, i)].re * t))
            .collect();
        return CMatrix::from_diagonal(&DVector::from_vec(d));
    }
    let eig = h.clone().symmetric_eigen();
    let phases: Vec<C64> = eig
        .eigenvalues
        .iter()
        .map(|&e| C64::from_polar(1.0, -e * t))
        .collect();
    let v = &eig.eigenvectors;
    v * CMatrix::from_diagonal(&DVector::from_vec(phases)) * v.adjoint()
}

pub(crate) fn conjugate(rho: &CMatrix, u: &CMatrix) -> CMatrix {
    let m = u * rho * u.adjoint();
    symmetrize(m)
}

pub(crate) fn symmetrize(m: CMatrix) -> CMatrix {
    (&m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Piecewise-constant step list `(duration, H)` covering `[t0, t0 + t]`.
fn steps(
    h: &HamiltonianSpec,
    layout: &SpinLayout,
    t0: f64,
    t: f64,
) -> Result<Vec<(f64, CMatrix)>> {
    let base = h.static_matrix(layout)?;
    check_hermitian(&base)?;
    let field = match &h.field {
        Some(f) if f.amplitude_gauss != 0.0 => f,
        _ => return Ok(vec![(t, base)]),
    };
    let fop = HamiltonianSpec::field_operator(layout)?;
    let gamma = h.constants.gamma_e;
    if !field.is_time_dependent() {
        return Ok(vec![(t, base + fop * C64::new(gamma * field.value(t0), 0.0))]);
    }
    let n = ((t * field.frequency_hz * SUBSTEPS_PER_PERIOD).ceil() as usize).max(1);
    let dt = t / n as f64;
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let a = t0 + k as f64 * dt;
        let mean_b = field.integral(a, a + dt) / dt;
        out.push((dt, &base + &fop * C64::new(gamma * mean_b, 0.0)));
    }
    Ok(out)
}

/// Total propagator over `[t0, t0 + t]`.
pub fn propagator(
    layout: &SpinLayout,
    h: &HamiltonianSpec,
    t0: f64,
    t: f64,
) -> Result<CMatrix> {
    h.validate()?;
    if t < 0.0 || !t.is_finite() {
        return Err(Error::NegativeDuration(t));
    }
    let n = layout.dim();
    let mut u = CMatrix::identity(n, n);
    for (dt, hk) in steps(h, layout, t0, t)? {
        u = unitary(&hk, dt) * u;
    }
    Ok(u)
}

/// `ρ ↦ UρU†` over a duration `t` starting at time zero.
pub fn propagate(rho: &DensityState, h: &HamiltonianSpec, t: f64) -> Result<DensityState> {
    propagate_from(rho, h, 0.0, t)
}

/// As [`propagate`], with the field phase referenced to absolute time `t0`.
pub fn propagate_from(
    rho: &DensityState,
    h: &HamiltonianSpec,
    t0: f64,
    t: f64,
) -> Result<DensityState> {
    let u = propagator(rho.layout(), h, t0, t)?;
    Ok(DensityState::from_matrix_unchecked(
        rho.layout().clone(),
        conjugate(rho.matrix(), &u),
    ))
}

/// Eigenspaces of the drive Hamiltonian, grouped by degenerate eigenvalue.
fn drive_eigenspaces(h0: &CMatrix) -> Vec<(f64, CMatrix)> {
    let n = h0.nrows();
    let eig = h0.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let scale = eig.eigenvalues.iter().fold(1.0f64, |m, e| m.max(e.abs()));
    let tol = 1e-9 * scale;
    let mut groups: Vec<(f64, Vec<usize>)> = Vec::new();
    for &i in &order {
        let e = eig.eigenvalues[i];
        match groups.last_mut() {
            Some((e0, idx)) if (e - *e0).abs() <= tol => idx.push(i),
            _ => groups.push((e, vec![i])),
        }
    }
    groups
        .into_iter()
        .map(|(e, idx)| {
            let cols: Vec<_> = idx.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect();
            (e, CMatrix::from_columns(&cols))
        })
        .collect()
}

/// Secular propagator `exp(−i(H0 + Σ_E P_E H1 P_E)t)` where `H0` holds the
/// drives and `H1` the coupling and a constant field.
pub fn secular_propagator(layout: &SpinLayout, h: &HamiltonianSpec, t: f64) -> Result<CMatrix> {
    h.validate()?;
    if t < 0.0 || !t.is_finite() {
        return Err(Error::NegativeDuration(t));
    }
    let h0 = h.drive_matrix(layout)?;
    let mut h1 = h.coupling_matrix(layout)?;
    if let Some(f) = &h.field {
        if f.is_time_dependent() {
            return Err(Error::Sequence(
                "secular propagation needs a time-independent field".into(),
            ));
        }
        h1 += HamiltonianSpec::field_operator(layout)? * C64::new(h.constants.gamma_e * f.value(0.0), 0.0);
    }
    check_hermitian(&h0)?;
    let n = layout.dim();
    let mut sec = CMatrix::zeros(n, n);
    for (_, v) in drive_eigenspaces(&h0) {
        let p = &v * v.adjoint();
        sec += &p * &h1 * &p;
    }
    Ok(unitary(&symmetrize(h0 + sec), t))
}

/// Kraus operators of the NV reset channel with efficiency `e`.
pub fn optical_pump_kraus(layout: &SpinLayout, efficiency: f64) -> Result<Vec<CMatrix>> {
    if !(0.0..=1.0).contains(&efficiency) {
        return Err(Error::OutOfRange {
            name: "pump efficiency",
            value: efficiency,
        });
    }
    let n = layout.dim();
    let lower = CMatrix::from_row_slice(
        2,
        2,
        &[C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)],
    );
    let se = C64::new(efficiency.sqrt(), 0.0);
    Ok(vec![
        CMatrix::identity(n, n) * C64::new((1.0 - efficiency).sqrt(), 0.0),
        layout.embed(SpinLabel::Nv, &SpinOp::Proj0.matrix())? * se,
        layout.embed(SpinLabel::Nv, &lower)? * se,
    ])
}

pub fn apply_kraus(rho: &DensityState, ops: &[CMatrix]) -> DensityState {
    let n = rho.layout().dim();
    let mut out = CMatrix::zeros(n, n);
    for k in ops {
        out += k * rho.matrix() * k.adjoint();
    }
    DensityState::from_matrix_unchecked(rho.layout().clone(), symmetrize(out))
}

/// Resets the NV toward `|0⟩` with efficiency `e`; other spins are untouched.
pub fn optical_pump(rho: &DensityState, efficiency: f64) -> Result<DensityState> {
    let ops = optical_pump_kraus(rho.layout(), efficiency)?;
    Ok(apply_kraus(rho, &ops))
}

/// Nonselective projective measurement of the NV in the computational basis.
pub fn dephase_nv(rho: &DensityState) -> Result<DensityState> {
    let layout = rho.layout();
    let p0 = layout.embed(SpinLabel::Nv, &SpinOp::Proj0.matrix())?;
    let p1 = layout.embed(SpinLabel::Nv, &SpinOp::Proj1.matrix())?;
    Ok(apply_kraus(rho, &[p0, p1]))
}

/// Depolarizing admixture `(1−ε)ρ + ε·(I/4) ⊗ tr_pair(ρ)` on the electronic pair.
pub fn depolarize_pair(rho: &DensityState, epsilon: f64) -> Result<DensityState> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::OutOfRange {
            name: "gate error",
            value: epsilon,
        });
    }
    if epsilon == 0.0 {
        return Ok(rho.clone());
    }
    let layout = rho.layout();
    let n = layout.dim();
    let sigma = |op: SpinOp| match op {
        SpinOp::I => op.matrix(),
        _ => op.matrix() * C64::new(2.0, 0.0),
    };
    let paulis = [SpinOp::I, SpinOp::Sx, SpinOp::Sy, SpinOp::Sz];
    // The Pauli twirl of the pair yields (I/4) ⊗ tr_pair(ρ).
    let mut twirled = CMatrix::zeros(n, n);
    for a in paulis {
        for b in paulis {
            let p = layout.embed(SpinLabel::Nv, &sigma(a))? * layout.embed(SpinLabel::Xe, &sigma(b))?;
            twirled += &p * rho.matrix() * p.adjoint();
        }
    }
    twirled *= C64::new(1.0 / 16.0, 0.0);
    let out = rho.matrix() * C64::new(1.0 - epsilon, 0.0) + twirled * C64::new(epsilon, 0.0);
    Ok(DensityState::from_matrix_unchecked(layout.clone(), symmetrize(out)))
}

/// Stretched-exponential amplitude model `α₀·exp(−(Γ₂t)^p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoherenceEnvelope {
    pub alpha0: f64,
    /// Γ₂ as a plain rate in Hz.
    pub gamma2_hz: f64,
    pub p: f64,
}

impl DecoherenceEnvelope {
    pub fn new(alpha0: f64, gamma2_hz: f64, p: f64) -> Result<Self> {
        let env = DecoherenceEnvelope {
            alpha0,
            gamma2_hz,
            p,
        };
        env.validate()?;
        Ok(env)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha0) {
            return Err(Error::OutOfRange {
                name: "alpha0",
                value: self.alpha0,
            });
        }
        if !(self.gamma2_hz >= 0.0 && self.gamma2_hz.is_finite()) {
            return Err(Error::OutOfRange {
                name: "gamma2_hz",
                value: self.gamma2_hz,
            });
        }
        if !(self.p > 0.0 && self.p.is_finite()) {
            return Err(Error::OutOfRange {
                name: "p",
                value: self.p,
            });
        }
        Ok(())
    }

    /// `exp(−(Γ₂t)^p)`.
    pub fn decay(&self, t: f64) -> f64 {
        (-(self.gamma2_hz * t).powf(self.p)).exp()
    }

    /// `α₀·exp(−(Γ₂t)^p)`.
    pub fn amplitude(&self, t: f64) -> f64 {
        self.alpha0 * self.decay(t)
    }
}

/// Off-diagonal blocks selected for envelope decay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoherenceSelection {
    /// Elements where only this spin differs.
    SingleQuantum(SpinLabel),
    /// NV and Xe both flipped in the same sense (`|00⟩⟨11|` block).
    DoubleQuantum,
    /// NV and Xe flipped in opposite senses (`|01⟩⟨10|` block).
    ZeroQuantum,
}

impl CoherenceSelection {
    pub fn selects(&self, layout: &SpinLayout, i: usize, j: usize) -> Result<bool> {
        let differs: Vec<SpinLabel> = layout
            .labels()
            .iter()
            .copied()
            .filter(|&l| layout.bit(l, i).unwrap() != layout.bit(l, j).unwrap())
            .collect();
        Ok(match self {
            CoherenceSelection::SingleQuantum(l) => {
                layout.position(*l)?;
                differs == [*l]
            }
            CoherenceSelection::DoubleQuantum | CoherenceSelection::ZeroQuantum => {
                layout.position(SpinLabel::Nv)?;
                layout.position(SpinLabel::Xe)?;
                let pair = differs.len() == 2
                    && differs.contains(&SpinLabel::Nv)
                    && differs.contains(&SpinLabel::Xe);
                let same = layout.bit(SpinLabel::Nv, i)? == layout.bit(SpinLabel::Xe, i)?;
                pair && (same == (*self == CoherenceSelection::DoubleQuantum))
            }
        })
    }
}

/// Multiplies the selected coherences by `exp(−(Γ₂t)^p)`.
pub fn apply_envelope(
    rho: &DensityState,
    env: &DecoherenceEnvelope,
    selection: CoherenceSelection,
    t: f64,
) -> Result<DensityState> {
    if t < 0.0 {
        return Err(Error::NegativeDuration(t));
    }
    env.validate()?;
    let factor = env.decay(t);
    let layout = rho.layout();
    let mut m = rho.matrix().clone();
    for i in 0..layout.dim() {
        for j in 0..layout.dim() {
            if i != j && selection.selects(layout, i, j)? {
                m[(i, j)] *= factor;
            }
        }
    }
    let out = DensityState::from_matrix_unchecked(layout.clone(), m);
    let min = out.min_eigenvalue();
    if min < -POSITIVITY_TOL {
        return Err(Error::EnvelopeNotPositive(min));
    }
    Ok(out)
}

/// Exponential damping of exchange oscillations under continuous drive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrivenDecayModel {
    pub t1rho_s: f64,
}

impl DrivenDecayModel {
    pub fn new(t1rho_s: f64) -> Result<Self> {
        if !(t1rho_s > 0.0) {
            return Err(Error::OutOfRange {
                name: "t1rho_s",
                value: t1rho_s,
            });
        }
        Ok(DrivenDecayModel { t1rho_s })
    }

    pub fn contrast_factor(&self, t: f64) -> f64 {
        (-t / self.t1rho_s).exp()
    }
}

/// Reflection `W` that is `−1` on the lower secular-coupling eigenvectors of
/// every degenerate drive eigenspace where the coupling acts, `+1` elsewhere.
/// Returns `None` when the drive leaves no exchange subspace.
pub fn exchange_reflection(layout: &SpinLayout, h: &HamiltonianSpec) -> Result<Option<CMatrix>> {
    if h.drives.is_empty() {
        return Ok(None);
    }
    let h0 = h.drive_matrix(layout)?;
    let h1 = h.coupling_matrix(layout)?;
    let n = layout.dim();
    let mut w = CMatrix::identity(n, n);
    let mut found = false;
    let scale = h1.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    if scale == 0.0 {
        return Ok(None);
    }
    for (_, v) in drive_eigenspaces(&h0) {
        if v.ncols() < 2 {
            continue;
        }
        let block = symmetrize(v.adjoint() * &h1 * &v);
        let eig = block.symmetric_eigen();
        let mean = eig.eigenvalues.iter().sum::<f64>() / eig.eigenvalues.len() as f64;
        let spread = eig
            .eigenvalues
            .iter()
            .fold(0.0f64, |m, e| m.max((e - mean).abs()));
        if spread <= 1e-9 * scale {
            continue;
        }
        found = true;
        for (k, &e) in eig.eigenvalues.iter().enumerate() {
            if e < mean {
                let u = &v * eig.eigenvectors.column(k);
                w -= (&u * u.adjoint()) * C64::new(2.0, 0.0);
            }
        }
    }
    Ok(found.then_some(w))
}

/// Damps exchange oscillations by `exp(−t/T₁ρ)` toward the equal-population
/// fixed point of the exchange subspace defined by the drives in `h`.
pub fn driven_decay(
    rho: &DensityState,
    model: &DrivenDecayModel,
    h: &HamiltonianSpec,
    t: f64,
) -> Result<DensityState> {
    if t < 0.0 {
        return Err(Error::NegativeDuration(t));
    }
    let w = match exchange_reflection(rho.layout(), h)? {
        Some(w) => w,
        None => return Ok(rho.clone()),
    };
    let f = model.contrast_factor(t);
    let out = rho.matrix() * C64::new((1.0 + f) / 2.0, 0.0)
        + (&w * rho.matrix() * w.adjoint()) * C64::new((1.0 - f) / 2.0, 0.0);
    Ok(DensityState::from_matrix_unchecked(
        rho.layout().clone(),
        symmetrize(out),
    ))
}

/// Ornstein-Uhlenbeck field noise added to every electronic spin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OUNoiseModel {
    pub sigma_b_gauss: f64,
    pub tau_c_s: f64,
    pub trajectories: usize,
}

impl OUNoiseModel {
    fn validate(&self) -> Result<()> {
        if !(self.sigma_b_gauss >= 0.0) {
            return Err(Error::OutOfRange {
                name: "sigma_b_gauss",
                value: self.sigma_b_gauss,
            });
        }
        if !(self.tau_c_s > 0.0) {
            return Err(Error::OutOfRange {
                name: "tau_c_s",
                value: self.tau_c_s,
            });
        }
        if self.trajectories == 0 {
            return Err(Error::OutOfRange {
                name: "trajectories",
                value: 0.0,
            });
        }
        Ok(())
    }

    /// Analytic variance of `γ∫₀ᵗ x(s) ds` for a stationary process.
    pub fn phase_variance(&self, gamma: f64, t: f64) -> f64 {
        let tc = self.tau_c_s;
        2.0 * (gamma * self.sigma_b_gauss).powi(2) * tc * tc * (t / tc - 1.0 + (-t / tc).exp())
    }
}

const OU_STEPS_PER_TAU_C: f64 = 50.0;
const OU_MAX_STEPS: usize = 100_000;

/// Averages unitary evolutions over OU field trajectories. Trajectory `k` is
/// seeded with `seed ^ k`, so the result does not depend on the worker count.
pub fn monte_carlo_propagate(
    rho: &DensityState,
    h: &HamiltonianSpec,
    t: f64,
    noise: &OUNoiseModel,
    seed: u64,
) -> Result<DensityState> {
    noise.validate()?;
    if noise.sigma_b_gauss == 0.0 {
        return propagate(rho, h, t);
    }
    if t < 0.0 {
        return Err(Error::NegativeDuration(t));
    }
    h.validate()?;
    let layout = rho.layout();
    let mut n_steps = (t / noise.tau_c_s * OU_STEPS_PER_TAU_C).ceil() as usize;
    if let Some(f) = &h.field {
        if f.is_time_dependent() {
            n_steps = n_steps.max((t * f.frequency_hz * SUBSTEPS_PER_PERIOD).ceil() as usize);
        }
    }
    let n_steps = n_steps.clamp(1, OU_MAX_STEPS);
    let dt = t / n_steps as f64;
    let base: Vec<CMatrix> = (0..n_steps)
        .map(|k| {
            let a = k as f64 * dt;
            let mut sub = steps(h, layout, a, dt)?;
            Ok(sub.remove(0).1)
        })
        .collect::<Result<_>>()?;
    let fop = HamiltonianSpec::field_operator(layout)?;
    let gamma = h.constants.gamma_e;
    let decay = (-dt / noise.tau_c_s).exp();
    let kick = noise.sigma_b_gauss * (1.0 - decay * decay).sqrt();

    let per_traj: Vec<CMatrix> = (0..noise.trajectories)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ k as u64);
            let xi: f64 = StandardNormal.sample(&mut rng);
            let mut x = noise.sigma_b_gauss * xi;
            let n = layout.dim();
            let mut u = CMatrix::identity(n, n);
            for hk in &base {
                let xi: f64 = StandardNormal.sample(&mut rng);
                let next = x * decay + kick * xi;
                let mean = 0.5 * (x + next);
                let hs = hk + &fop * C64::new(gamma * mean, 0.0);
                u = unitary(&hs, dt) * u;
                x = next;
            }
            &u * rho.matrix() * u.adjoint()
        })
        .collect();
    let n = layout.dim();
    let mut acc = CMatrix::zeros(n, n);
    for m in &per_traj {
        acc += m;
    }
    acc *= C64::new(1.0 / noise.trajectories as f64, 0.0);
    Ok(DensityState::from_matrix_unchecked(layout.clone(), symmetrize(acc)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spinsys::polarized_state;

    fn single() -> SpinLayout {
        SpinLayout::new(&[SpinLabel::Nv]).unwrap()
    }

    #[test]
    fn zero_hamiltonian_is_identity() {
        let rho = polarized_state(&SpinLayout::pair(), &[0.3, -0.2]).unwrap();
        let out = propagate(&rho, &HamiltonianSpec::default(), 3e-6).unwrap();
        assert!(out.distance(&rho) < 1e-15);
    }

    #[test]
    fn pi_pulse_inverts() {
        let omega = 2.0 * PI * 1e6;
        let h = HamiltonianSpec {
            drives: vec![Drive {
                target: SpinLabel::Nv,
                rabi: omega,
                phase: 0.0,
                detuning: 0.0,
            }],
            ..Default::default()
        };
        let rho = DensityState::basis(single(), 0).unwrap();
        let out = propagate(&rho, &h, PI / omega).unwrap();
        assert!((out.population(1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn negative_time_rejected() {
        let rho = DensityState::basis(single(), 0).unwrap();
        assert!(propagate(&rho, &HamiltonianSpec::default(), -1.0).is_err());
    }

    #[test]
    fn pump_examples() {
        let rho = DensityState::maximally_mixed(single());
        let out = optical_pump(&rho, 0.86).unwrap();
        assert!((out.population(0) - 0.93).abs() < 1e-14);
        assert!((out.population(1) - 0.07).abs() < 1e-14);
        assert!(optical_pump(&rho, 1.1).is_err());
    }

    #[test]
    fn envelope_scalar() {
        let env = DecoherenceEnvelope::new(1.0, 22e3, 1.6).unwrap();
        let expected = (-(0.418f64).powf(1.6)).exp();
        assert!((env.decay(19e-6) - expected).abs() < 1e-12);
        assert!((expected - 0.7806).abs() < 1e-4);
    }

    #[test]
    fn driven_decay_factor() {
        let m = DrivenDecayModel::new(132e-6).unwrap();
        assert!((m.contrast_factor(132e-6) - (-1.0f64).exp()).abs() < 1e-15);
        assert!((m.contrast_factor(8.6e-6) - 0.937).abs() < 1e-3);
        assert!(DrivenDecayModel::new(0.0).is_err());
    }

    #[test]
    fn field_integral_matches_quadrature() {
        let f = FieldModel::sinusoid(0.7, 1e5, 0.3);
        let (a, b) = (1e-6, 7.3e-6);
        let n = 20000;
        let h = (b - a) / n as f64;
        let mut s = 0.0;
        for k in 0..n {
            s += f.value(a + (k as f64 + 0.5) * h) * h;
        }
        assert!((f.integral(a, b) - s).abs() < 1e-12);
    }
}
