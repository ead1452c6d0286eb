//! Pulse-sequence IR, executor, gates and the sequence library.

pub mod calibration;
pub mod executor;
pub mod gates;
pub mod library;
pub mod sequence;

pub use calibration::{calibrate_control, CalibrationTargets, ControlCalibration};
pub use executor::{DriveModel, EnvelopeSet, Execution, Executor};
pub use gates::{classify_recipe, hhcp, ExchangeKind, GateParams, PhaseRecipe};
pub use library::{NuclearFactor, SensingSetup, SensorState};
pub use sequence::{PulseSequence, Segment, Tone};
