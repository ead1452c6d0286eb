//! Curve fitting, sensitivity metrics and the gain sweep.

pub mod fit;
pub mod ladder;
pub mod lm;
pub mod sensitivity;
pub mod spectrum;
pub mod sweep;

pub use fit::{fit_sinusoid, fit_stretched_exp, FitResult, MagnetometryCurve};
pub use ladder::{calibrate_ladder, GeometricLadder, LadderCalibration, LadderTargets};
pub use lm::{levenberg_marquardt, LeastSquaresProblem, LmOptions, LmReport, NumericProblem};
pub use sensitivity::{
    gain_performance, gain_sensitivity, min_field, overhead_factor, snr_bound_check, BoundCheck,
    ReadoutLadder, SensitivityInputs, SensitivityReport, TimingBudget,
};
pub use spectrum::{dominant_frequency, periodogram, SpectralPeak, Spectrum};
pub use sweep::{sweep_gain_map, CellOptimum, SweepCell, SweepGrid, SweepSpec};
