#![allow(dead_code)]

use entangle_sense::spinsys::{DensityState, SpinLabel, SpinLayout};
use entangle_sense::{CMatrix, C64};
use proptest::prelude::*;

/// Mixture of three random pure states, normalized to unit trace.
pub fn mixture(layout: &SpinLayout, raw: &[f64]) -> DensityState {
    let n = layout.dim();
    let mut m = CMatrix::zeros(n, n);
    for k in 0..3 {
        let w = raw[k * (2 * n + 1)].abs() + 0.05;
        let v: Vec<C64> = (0..n)
            .map(|i| {
                let base = k * (2 * n + 1) + 1 + 2 * i;
                C64::new(raw[base], raw[base + 1])
            })
            .collect();
        let norm: f64 = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt().max(1e-6);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] += v[i] * v[j].conj() * (w / (norm * norm));
            }
        }
    }
    let tr = m.trace();
    m /= tr;
    DensityState::new(layout.clone(), m).expect("mixture is a valid state")
}

pub fn raw_len(layout: &SpinLayout) -> usize {
    3 * (2 * layout.dim() + 1)
}

pub fn pair_state() -> impl Strategy<Value = DensityState> {
    let layout = SpinLayout::pair();
    prop::collection::vec(-1.0f64..1.0, raw_len(&layout)).prop_map(move |raw| mixture(&layout, &raw))
}

pub fn nv_state() -> impl Strategy<Value = DensityState> {
    let layout = SpinLayout::new(&[SpinLabel::Nv]).unwrap();
    prop::collection::vec(-1.0f64..1.0, raw_len(&layout)).prop_map(move |raw| mixture(&layout, &raw))
}

pub fn triple_state() -> impl Strategy<Value = DensityState> {
    let layout = SpinLayout::new(&[SpinLabel::Nv, SpinLabel::Xe, SpinLabel::Xn]).unwrap();
    prop::collection::vec(-1.0f64..1.0, raw_len(&layout)).prop_map(move |raw| mixture(&layout, &raw))
}

/// Trace, Hermiticity and positivity within the library tolerances.
pub fn assert_valid(rho: &DensityState) {
    rho.validate().expect("state invariants");
}

pub fn sorted_eigenvalues(rho: &DensityState) -> Vec<f64> {
    let mut e = rho.eigenvalues();
    e.sort_by(|a, b| a.partial_cmp(b).unwrap());
    e
}
