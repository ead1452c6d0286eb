//! Labeled spin-1/2 Hilbert spaces, single-spin operator algebra and density states.
//!
//! Basis states are tensor products in layout order with the first subsystem as
//! the most significant bit. `|0⟩` is the `m_s = +1/2` state and spin operators
//! follow `S = σ/2`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{CMatrix, Error, Result, C64};

pub const TRACE_TOL: f64 = 1e-10;
pub const HERMITIAN_TOL: f64 = 1e-10;
pub const POSITIVITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SpinLabel {
    #[serde(rename = "NV")]
    Nv,
    #[serde(rename = "Xe")]
    Xe,
    #[serde(rename = "Xn")]
    Xn,
}

impl fmt::Display for SpinLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpinLabel::Nv => "NV",
            SpinLabel::Xe => "Xe",
            SpinLabel::Xn => "Xn",
        })
    }
}

impl FromStr for SpinLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "NV" => Ok(SpinLabel::Nv),
            "Xe" => Ok(SpinLabel::Xe),
            "Xn" => Ok(SpinLabel::Xn),
            other => Err(Error::UnknownLabel(other.to_string())),
        }
    }
}

/// Ordered set of spin-1/2 subsystems.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<SpinLabel>", into = "Vec<SpinLabel>")]
pub struct SpinLayout {
    labels: Vec<SpinLabel>,
}

impl TryFrom<Vec<SpinLabel>> for SpinLayout {
    type Error = Error;

    fn try_from(labels: Vec<SpinLabel>) -> Result<Self> {
        SpinLayout::new(&labels)
    }
}

impl From<SpinLayout> for Vec<SpinLabel> {
    fn from(layout: SpinLayout) -> Self {
        layout.labels
    }
}

impl SpinLayout {
    pub fn new(labels: &[SpinLabel]) -> Result<Self> {
        if labels.is_empty() || labels.len() > 3 {
            return Err(Error::Layout(format!(
                "expected 1 to 3 subsystems, got {}",
                labels.len()
            )));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::Layout(format!("duplicate label {l}")));
            }
        }
        Ok(SpinLayout {
            labels: labels.to_vec(),
        })
    }

    /// The two electronic spins `{NV, Xe}`.
    pub fn pair() -> Self {
        SpinLayout {
            labels: vec![SpinLabel::Nv, SpinLabel::Xe],
        }
    }

    pub fn labels(&self) -> &[SpinLabel] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        1 << self.labels.len()
    }

    pub fn contains(&self, label: SpinLabel) -> bool {
        self.labels.contains(&label)
    }

    pub fn position(&self, label: SpinLabel) -> Result<usize> {
        self.labels
            .iter()
            .position(|&l| l == label)
            .ok_or_else(|| Error::Layout(format!("{label} not present in layout")))
    }

    /// Bit of `label` in computational basis index `index` (0 for `|0⟩`).
    pub fn bit(&self, label: SpinLabel, index: usize) -> Result<usize> {
        let pos = self.position(label)?;
        Ok((index >> (self.len() - 1 - pos)) & 1)
    }

    /// Embeds a single-spin 2×2 operator on `label`, identity elsewhere.
    pub fn embed(&self, label: SpinLabel, single: &CMatrix) -> Result<CMatrix> {
        let pos = self.position(label)?;
        let factors: Vec<CMatrix> = (0..self.len())
            .map(|i| {
                if i == pos {
                    single.clone()
                } else {
                    CMatrix::identity(2, 2)
                }
            })
            .collect();
        Ok(kron_all(&factors))
    }
}

pub(crate) fn kron_all(factors: &[CMatrix]) -> CMatrix {
    factors
        .iter()
        .skip(1)
        .fold(factors[0].clone(), |acc, f| acc.kronecker(f))
}

/// Single-spin operator symbols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpinOp {
    I,
    Sx,
    Sy,
    Sz,
    Plus,
    Minus,
    Proj0,
    Proj1,
}

impl SpinOp {
    pub fn matrix(self) -> CMatrix {
        let z = C64::new(0.0, 0.0);
        let h = C64::new(0.5, 0.0);
        let o = C64::new(1.0, 0.0);
        let entries = match self {
            SpinOp::I => [o, z, z, o],
            SpinOp::Sx => [z, h, h, z],
            SpinOp::Sy => [z, C64::new(0.0, -0.5), C64::new(0.0, 0.5), z],
            SpinOp::Sz => [h, z, z, -h],
            SpinOp::Plus => [z, o, z, z],
            SpinOp::Minus => [z, z, o, z],
            SpinOp::Proj0 => [o, z, z, z],
            SpinOp::Proj1 => [z, z, z, o],
        };
        DMatrix::from_row_slice(2, 2, &entries)
    }

    pub fn is_hermitian(self) -> bool {
        !matches!(self, SpinOp::Plus | SpinOp::Minus)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    pub layout: SpinLayout,
    pub matrix: CMatrix,
    pub hermitian: bool,
}

/// Tensor product of single-spin symbols; `spec` must name every subsystem once.
pub fn build_operator(layout: &SpinLayout, spec: &[(SpinLabel, SpinOp)]) -> Result<Operator> {
    if spec.len() != layout.len() {
        return Err(Error::OperatorSpec(format!(
            "{} symbols for {} subsystems",
            spec.len(),
            layout.len()
        )));
    }
    let mut factors: Vec<Option<SpinOp>> = vec![None; layout.len()];
    for &(label, op) in spec {
        let pos = layout
            .position(label)
            .map_err(|_| Error::OperatorSpec(format!("{label} is not in the layout")))?;
        if factors[pos].replace(op).is_some() {
            return Err(Error::OperatorSpec(format!("{label} named twice")));
        }
    }
    let ops: Vec<SpinOp> = factors.into_iter().map(|f| f.expect("all named")).collect();
    let mats: Vec<CMatrix> = ops.iter().map(|op| op.matrix()).collect();
    Ok(Operator {
        layout: layout.clone(),
        matrix: kron_all(&mats),
        hermitian: ops.iter().all(|op| op.is_hermitian()),
    })
}

/// Largest absolute entry of `m − m†`.
pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    let mut dev: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

/// Eigenvalues of the Hermitian part of `m`, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let sym = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityState {
    layout: SpinLayout,
    matrix: CMatrix,
}

impl DensityState {
    /// Validated construction.
    pub fn new(layout: SpinLayout, matrix: CMatrix) -> Result<Self> {
        let state = DensityState { layout, matrix };
        state.validate()?;
        Ok(state)
    }

    pub(crate) fn from_matrix_unchecked(layout: SpinLayout, matrix: CMatrix) -> Self {
        DensityState { layout, matrix }
    }

    /// Checks unit trace, Hermiticity and positivity.
    pub fn validate(&self) -> Result<()> {
        let n = self.layout.dim();
        if self.matrix.nrows() != n || self.matrix.ncols() != n {
            return Err(Error::InvalidState(format!(
                "matrix is {}x{}, layout needs {n}x{n}",
                self.matrix.nrows(),
                self.matrix.ncols()
            )));
        }
        if self.matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidState("non-finite entry".into()));
        }
        let tr = self.matrix.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr}")));
        }
        let dev = hermitian_deviation(&self.matrix);
        if dev > HERMITIAN_TOL {
            return Err(Error::InvalidState(format!("Hermitian deviation {dev:e}")));
        }
        let min = self.min_eigenvalue();
        if min < -POSITIVITY_TOL {
            return Err(Error::InvalidState(format!("minimum eigenvalue {min:e}")));
        }
        Ok(())
    }

    pub fn pure(layout: SpinLayout, amplitudes: &[C64]) -> Result<Self> {
        if amplitudes.len() != layout.dim() {
            return Err(Error::InvalidState(format!(
                "{} amplitudes for dimension {}",
                amplitudes.len(),
                layout.dim()
            )));
        }
        let v = DVector::from_column_slice(amplitudes);
        let norm = v.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidState("zero or non-finite state vector".into()));
        }
        let v = v.unscale(norm);
        let m = &v * v.adjoint();
        DensityState::new(layout, m)
    }

    /// Computational basis state `|index⟩`.
    pub fn basis(layout: SpinLayout, index: usize) -> Result<Self> {
        let mut amps = vec![C64::new(0.0, 0.0); layout.dim()];
        if index >= amps.len() {
            return Err(Error::InvalidState(format!("basis index {index} out of range")));
        }
        amps[index] = C64::new(1.0, 0.0);
        DensityState::pure(layout, &amps)
    }

    pub fn maximally_mixed(layout: SpinLayout) -> Self {
        let n = layout.dim();
        let m = CMatrix::identity(n, n) * C64::new(1.0 / n as f64, 0.0);
        DensityState { layout, matrix: m }
    }

    pub fn layout(&self) -> &SpinLayout {
        &self.layout
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigenvalues(&self.matrix)[0]
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.matrix)
    }

    /// `tr(ρ A)` real part.
    pub fn expect(&self, op: &CMatrix) -> f64 {
        (&self.matrix * op).trace().re
    }

    pub fn population(&self, index: usize) -> f64 {
        self.matrix[(index, index)].re
    }

    /// `⟨σz⟩ = p(|0⟩) − p(|1⟩)` of one subsystem.
    pub fn polarization(&self, label: SpinLabel) -> Result<f64> {
        let mut p = 0.0;
        for i in 0..self.layout.dim() {
            let sign = if self.layout.bit(label, i)? == 0 { 1.0 } else { -1.0 };
            p += sign * self.population(i);
        }
        Ok(p)
    }

    /// Maximum absolute entrywise difference.
    pub fn distance(&self, other: &DensityState) -> f64 {
        (&self.matrix - &other.matrix)
            .iter()
            .fold(0.0, |acc, z| acc.max(z.norm()))
    }
}

/// Product state with per-subsystem polarizations `p ∈ [−1, 1]` toward `|0⟩`.
pub fn polarized_state(layout: &SpinLayout, polarizations: &[f64]) -> Result<DensityState> {
    if polarizations.len() != layout.len() {
        return Err(Error::InvalidState(format!(
            "{} polarizations for {} subsystems",
            polarizations.len(),
            layout.len()
        )));
    }
    let mut factors = Vec::with_capacity(layout.len());
    for &p in polarizations {
        if !(-1.0..=1.0).contains(&p) {
            return Err(Error::OutOfRange {
                name: "polarization",
                value: p,
            });
        }
        factors.push(CMatrix::from_diagonal(&DVector::from_vec(vec![
            C64::new((1.0 + p) / 2.0, 0.0),
            C64::new((1.0 - p) / 2.0, 0.0),
        ])));
    }
    Ok(DensityState::from_matrix_unchecked(
        layout.clone(),
        kron_all(&factors),
    ))
}

/// Reduced state on the `keep` subsystems, in original layout order.
pub fn partial_trace(rho: &DensityState, keep: &[SpinLabel]) -> Result<DensityState> {
    if keep.is_empty() {
        return Err(Error::Layout("partial trace needs a nonempty keep set".into()));
    }
    let layout = rho.layout();
    for &l in keep {
        layout.position(l)?;
    }
    let kept: Vec<SpinLabel> = layout
        .labels()
        .iter()
        .copied()
        .filter(|l| keep.contains(l))
        .collect();
    let kept_pos: Vec<usize> = kept.iter().map(|&l| layout.position(l).unwrap()).collect();
    let traced_pos: Vec<usize> = (0..layout.len()).filter(|p| !kept_pos.contains(p)).collect();
    let n = layout.len();
    let compose = |kbits: usize, tbits: usize| -> usize {
        let mut idx = 0usize;
        for (j, &p) in kept_pos.iter().enumerate() {
            let b = (kbits >> (kept_pos.len() - 1 - j)) & 1;
            idx |= b << (n - 1 - p);
        }
        for (j, &p) in traced_pos.iter().enumerate() {
            let b = (tbits >> (traced_pos.len() - 1 - j)) & 1;
            idx |= b << (n - 1 - p);
        }
        idx
    };
    let dk = 1 << kept_pos.len();
    let dt = 1 << traced_pos.len();
    let mut out = CMatrix::zeros(dk, dk);
    for a in 0..dk {
        for b in 0..dk {
            let mut s = C64::new(0.0, 0.0);
            for t in 0..dt {
                s += rho.matrix()[(compose(a, t), compose(b, t))];
            }
            out[(a, b)] = s;
        }
    }
    Ok(DensityState::from_matrix_unchecked(SpinLayout::new(&kept)?, out))
}

/// `⟨00|ρ|11⟩` on the electronic pair; a nuclear subsystem is traced out first.
pub fn bell_coherence(rho: &DensityState) -> Result<C64> {
    let layout = rho.layout();
    if !layout.contains(SpinLabel::Nv) || !layout.contains(SpinLabel::Xe) {
        return Err(Error::Layout(
            "Bell coherence needs both NV and Xe subsystems".into(),
        ));
    }
    let reduced;
    let pair = if layout.len() == 2 {
        rho
    } else {
        reduced = partial_trace(rho, &[SpinLabel::Nv, SpinLabel::Xe])?;
        &reduced
    };
    Ok(pair.matrix()[(0, 3)])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    /// Electron gyromagnetic ratio in rad·s⁻¹·G⁻¹.
    pub gamma_e: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        PhysicalConstants {
            gamma_e: 2.0 * std::f64::consts::PI * 2.8e6,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair() -> SpinLayout {
        SpinLayout::pair()
    }

    #[test]
    fn single_spin_sz() {
        let l = SpinLayout::new(&[SpinLabel::Nv]).unwrap();
        let op = build_operator(&l, &[(SpinLabel::Nv, SpinOp::Sz)]).unwrap();
        assert_eq!(op.matrix[(0, 0)].re, 0.5);
        assert_eq!(op.matrix[(1, 1)].re, -0.5);
        assert!(op.hermitian);
    }

    #[test]
    fn sz_identity_ordering() {
        let op = build_operator(&pair(), &[(SpinLabel::Nv, SpinOp::Sz), (SpinLabel::Xe, SpinOp::I)])
            .unwrap();
        let d: Vec<f64> = (0..4).map(|i| op.matrix[(i, i)].re).collect();
        assert_eq!(d, vec![0.5, 0.5, -0.5, -0.5]);
    }

    #[test]
    fn spec_must_cover_layout() {
        assert!(build_operator(&pair(), &[(SpinLabel::Nv, SpinOp::Sz)]).is_err());
        assert!(build_operator(
            &pair(),
            &[(SpinLabel::Nv, SpinOp::Sz), (SpinLabel::Nv, SpinOp::Sx)]
        )
        .is_err());
        assert!(build_operator(
            &pair(),
            &[(SpinLabel::Nv, SpinOp::Sz), (SpinLabel::Xn, SpinOp::Sx)]
        )
        .is_err());
        assert!("Q".parse::<SpinLabel>().is_err());
    }

    #[test]
    fn layout_rejects_duplicates() {
        assert!(SpinLayout::new(&[SpinLabel::Nv, SpinLabel::Nv]).is_err());
        assert!(SpinLayout::new(&[]).is_err());
    }

    #[test]
    fn polarized_examples() {
        let l = SpinLayout::new(&[SpinLabel::Xe]).unwrap();
        let s = polarized_state(&l, &[0.76]).unwrap();
        assert!((s.population(0) - 0.88).abs() < 1e-15);
        assert!((s.population(1) - 0.12).abs() < 1e-15);
        assert!(polarized_state(&l, &[1.2]).is_err());
        let s = polarized_state(&l, &[0.0]).unwrap();
        assert_eq!(s, DensityState::maximally_mixed(l));
    }

    #[test]
    fn bell_phi_minus() {
        let r = 1.0 / 2f64.sqrt();
        let s = DensityState::pure(
            pair(),
            &[C64::new(r, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, -r)],
        )
        .unwrap();
        let c = bell_coherence(&s).unwrap();
        assert!((c - C64::new(0.0, 0.5)).norm() < 1e-15);
        let nv = partial_trace(&s, &[SpinLabel::Nv]).unwrap();
        assert!(nv.distance(&DensityState::maximally_mixed(nv.layout().clone())) < 1e-15);
        assert_eq!(bell_coherence(&DensityState::maximally_mixed(pair())).unwrap().norm(), 0.0);
        let single = DensityState::maximally_mixed(SpinLayout::new(&[SpinLabel::Nv]).unwrap());
        assert!(bell_coherence(&single).is_err());
    }

    #[test]
    fn polarization_readout() {
        let s = polarized_state(&pair(), &[0.3, -0.6]).unwrap();
        assert!((s.polarization(SpinLabel::Nv).unwrap() - 0.3).abs() < 1e-14);
        assert!((s.polarization(SpinLabel::Xe).unwrap() + 0.6).abs() < 1e-14);
    }
}
