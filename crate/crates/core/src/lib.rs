//! Simulation and analysis toolkit for entanglement-enhanced magnetometry with
//! an optically addressable NV spin and a dark electronic ancilla spin.
//!
//! The crate is layered bottom-up:
//!
//! - [`spinsys`]: labeled spin-1/2 Hilbert spaces, operators and density states.
//! - [`dynamics`]: unitary propagation, optical pumping, decoherence envelopes,
//!   driven decay and Ornstein-Uhlenbeck Monte Carlo.
//! - [`protocols`]: pulse-sequence IR, executor and the gate/sequence library.
//! - [`readout`]: photon statistics and optimally weighted repetitive readout.
//! - [`analysis`]: least-squares fitting, sensitivity accounting and gain maps.
//! - [`scenario`]: figure scenarios, configuration and output writing.

pub mod analysis;
pub mod dynamics;
mod error;
pub mod protocols;
pub mod readout;
pub mod scenario;
pub mod spinsys;

pub use error::{Error, Result};

pub type C64 = num_complex::Complex64;
pub type CMatrix = nalgebra::DMatrix<C64>;
