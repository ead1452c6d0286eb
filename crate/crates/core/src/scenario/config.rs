//! Scenario configuration: a single JSON document with defaults for every
//! field except the coupling of gate-simulating scenarios.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analysis::ladder::LadderTargets;
use crate::analysis::sensitivity::ReadoutLadder;
use crate::protocols::executor::DriveModel;
use crate::readout::ReadoutModel;
use crate::scenario::locate::LineIndex;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioId {
    Fig1f,
    Fig2a,
    Fig2b,
    Fig2c,
    Fig2d,
    Fig3a,
    Fig3b,
    Fig4a,
    Fig4b,
    Fig4c,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 10] = [
        ScenarioId::Fig1f,
        ScenarioId::Fig2a,
        ScenarioId::Fig2b,
        ScenarioId::Fig2c,
        ScenarioId::Fig2d,
        ScenarioId::Fig3a,
        ScenarioId::Fig3b,
        ScenarioId::Fig4a,
        ScenarioId::Fig4b,
        ScenarioId::Fig4c,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioId::Fig1f => "fig1f",
            ScenarioId::Fig2a => "fig2a",
            ScenarioId::Fig2b => "fig2b",
            ScenarioId::Fig2c => "fig2c",
            ScenarioId::Fig2d => "fig2d",
            ScenarioId::Fig3a => "fig3a",
            ScenarioId::Fig3b => "fig3b",
            ScenarioId::Fig4a => "fig4a",
            ScenarioId::Fig4b => "fig4b",
            ScenarioId::Fig4c => "fig4c",
        }
    }

    /// Whether the scenario propagates spin dynamics through gates.
    pub fn simulates_gates(self) -> bool {
        !matches!(self, ScenarioId::Fig4a | ScenarioId::Fig4b | ScenarioId::Fig4c)
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario `{s}`")))
    }
}

/// Evenly spaced grid including both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Grid {
    pub const fn new(start: f64, stop: f64, points: usize) -> Self {
        Grid { start, stop, points }
    }

    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.points - 1) as f64;
        (0..self.points).map(|i| self.start + step * i as f64).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CouplingConfig {
    pub d_hz: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriveConfig {
    pub rabi_hz: f64,
    pub model: DriveModel,
}

impl Default for DriveConfig {
    fn default() -> Self {
        DriveConfig {
            rabi_hz: 500e3,
            model: DriveModel::Secular,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecoherenceConfig {
    pub gamma2_nv_hz: f64,
    pub gamma2_x_hz: f64,
    /// Measured two-spin rate used by the closed-form gain analysis.
    pub gamma2_phi_hz: f64,
    pub p: f64,
    pub t1rho_s: f64,
    pub alpha0_nv: f64,
    pub alpha0_phi: f64,
}

impl Default for DecoherenceConfig {
    fn default() -> Self {
        DecoherenceConfig {
            gamma2_nv_hz: 22e3,
            gamma2_x_hz: 15e3,
            gamma2_phi_hz: 36e3,
            p: 1.6,
            t1rho_s: 132e-6,
            alpha0_nv: 0.96,
            alpha0_phi: 0.78,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NuclearConfig {
    pub polarization: f64,
    pub transitions: u8,
    /// Doubles displayed two-spin signals to undo the unpolarized-nucleus halving.
    pub renormalize: bool,
}

impl Default for NuclearConfig {
    fn default() -> Self {
        NuclearConfig {
            polarization: 0.0,
            transitions: 1,
            renormalize: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlConfig {
    pub initial_x_polarization: f64,
    pub contrast_n0: f64,
    pub contrast_n1: f64,
    pub contrast_sigma: f64,
    /// Calibrated from the contrasts when absent.
    pub pump_efficiency: Option<f64>,
    /// Calibrated from the contrasts when absent.
    pub gate_error: Option<f64>,
    /// Transfer rounds before entangling in the sensing chains.
    pub transfer_rounds: usize,
    /// `Σ_{k≤9} a_k/a₀` the simulated readout ladder is calibrated to.
    pub readout_total_amplitude: f64,
}

impl Default for ControlConfig {
    fn default() -> Self {
        ControlConfig {
            initial_x_polarization: 0.14,
            contrast_n0: 0.49,
            contrast_n1: 0.82,
            contrast_sigma: 0.03,
            pump_efficiency: None,
            gate_error: None,
            transfer_rounds: 1,
            readout_total_amplitude: 4.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldConfig {
    /// Bias field; recorded only.
    pub static_gauss: f64,
}

impl Default for FieldConfig {
    fn default() -> Self {
        FieldConfig {
            static_gauss: 205.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// HH drive durations of the exchange scan.
    pub drive_time_s: Grid,
    /// Transfer rounds of the polarization ladder, from 0.
    pub rounds: usize,
    /// Phase-modulation scan times.
    pub scan_time_s: Grid,
    pub modulation_nv_hz: f64,
    pub modulation_x_hz: f64,
    /// Sensing times of echo decays and amplitude scans.
    pub tau_s: Grid,
    /// Field amplitudes of magnetometry curves.
    pub b_gauss: Grid,
    /// Sensing time of magnetometry curves.
    pub sensing_tau_s: f64,
    /// Largest number of additional readouts.
    pub m_max: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            drive_time_s: Grid::new(0.0, 20e-6, 201),
            rounds: 3,
            scan_time_s: Grid::new(0.0, 19.95e-6, 400),
            modulation_nv_hz: 500e3,
            modulation_x_hz: 250e3,
            tau_s: Grid::new(2.5e-6, 50e-6, 20),
            b_gauss: Grid::new(-0.05, 0.05, 81),
            sensing_tau_s: 10e-6,
            m_max: 30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BudgetConfig {
    /// Sensing time of the sensitivity analysis.
    pub tau_s: f64,
    pub tau_nv_s: f64,
    pub tau_phi_s: f64,
    pub tau_rr_s: f64,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        BudgetConfig {
            tau_s: 19e-6,
            tau_nv_s: 5.7e-6,
            tau_phi_s: 21e-6,
            tau_rr_s: 6.1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LadderConfig {
    pub targets: LadderTargets,
    /// Measured ladder used instead of the calibrated geometric model.
    pub measured: Option<ReadoutLadder>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub d_hz: Grid,
    pub ratio: Grid,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            d_hz: Grid::new(20e3, 200e3, 50),
            ratio: Grid::new(0.05, 1.5, 50),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub sigma_b_gauss: f64,
    pub tau_c_s: f64,
    pub trajectories: usize,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            sigma_b_gauss: 5e-3,
            tau_c_s: 10e-6,
            trajectories: 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Option<ScenarioId>,
    pub seed: u64,
    pub coupling: CouplingConfig,
    pub drive: DriveConfig,
    pub decoherence: DecoherenceConfig,
    pub nuclear: NuclearConfig,
    pub control: ControlConfig,
    pub field: FieldConfig,
    pub grids: GridConfig,
    pub budget: BudgetConfig,
    pub readout: ReadoutModel,
    pub ladder: LadderConfig,
    pub sweep: SweepConfig,
    pub noise: NoiseConfig,
}

/// Coupling of the experiment.
pub const DEFAULT_COUPLING_HZ: f64 = 58e3;

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            scenario: None,
            seed: 0,
            coupling: CouplingConfig::default(),
            drive: DriveConfig::default(),
            decoherence: DecoherenceConfig::default(),
            nuclear: NuclearConfig::default(),
            control: ControlConfig::default(),
            field: FieldConfig::default(),
            grids: GridConfig::default(),
            budget: BudgetConfig::default(),
            readout: ReadoutModel::default(),
            ladder: LadderConfig::default(),
            sweep: SweepConfig::default(),
            noise: NoiseConfig::default(),
        }
    }
}

/// One violated invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub path: String,
    pub message: String,
    pub line: Option<usize>,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}: {}", self.path, self.message),
            None => write!(f, "{}: {}", self.path, self.message),
        }
    }
}

/// Config errors rendered one per line.
pub fn render(diagnostics: &[Diagnostic]) -> String {
    diagnostics
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("\n")
}

struct Checker<'a> {
    out: Vec<Diagnostic>,
    index: Option<&'a LineIndex>,
}

impl Checker<'_> {
    fn push(&mut self, path: &str, message: String) {
        let line = self.index.and_then(|i| i.line_of(path));
        self.out.push(Diagnostic {
            path: path.to_string(),
            message,
            line,
        });
    }

    fn positive(&mut self, path: &str, v: f64) {
        if !(v > 0.0 && v.is_finite()) {
            self.push(path, format!("must be positive and finite (got {v})"));
        }
    }

    fn non_negative(&mut self, path: &str, v: f64) {
        if !(v >= 0.0 && v.is_finite()) {
            self.push(path, format!("must be non-negative and finite (got {v})"));
        }
    }

    fn within(&mut self, path: &str, v: f64, lo: f64, hi: f64) {
        if !(lo..=hi).contains(&v) {
            self.push(path, format!("must be in [{lo}, {hi}] (got {v})"));
        }
    }

    fn open_unit(&mut self, path: &str, v: f64) {
        if !(v > 0.0 && v < 1.0) {
            self.push(path, format!("must be in (0, 1) (got {v})"));
        }
    }

    fn grid(&mut self, path: &str, g: &Grid, min_points: usize, positive: bool) {
        if g.points < min_points {
            self.push(
                &format!("{path}.points"),
                format!("needs at least {min_points} points (got {})", g.points),
            );
        }
        if !(g.start.is_finite() && g.stop.is_finite()) {
            self.push(path, "bounds must be finite".into());
        } else if g.stop <= g.start {
            self.push(
                &format!("{path}.stop"),
                format!("must exceed start {} (got {})", g.start, g.stop),
            );
        }
        if positive && !(g.start > 0.0) {
            self.push(&format!("{path}.start"), format!("must be positive (got {})", g.start));
        } else if !positive && g.start < 0.0 && path.ends_with("_s") {
            self.push(&format!("{path}.start"), format!("must be non-negative (got {})", g.start));
        }
    }
}

impl ScenarioConfig {
    /// Parses a config document; syntax and type errors carry their line.
    pub fn from_json(text: &str) -> std::result::Result<Self, Vec<Diagnostic>> {
        serde_json::from_str(text).map_err(|e| {
            let index = LineIndex::build(text);
            let message = e.to_string();
            let path = unknown_field_path(&message).unwrap_or_default();
            let line = if e.line() > 0 {
                Some(e.line())
            } else {
                index.line_of(&path)
            };
            vec![Diagnostic {
                path: if path.is_empty() { "<document>".into() } else { path },
                message,
                line,
            }]
        })
    }

    /// Parses and validates a config file's text.
    pub fn load(text: &str) -> std::result::Result<Self, Vec<Diagnostic>> {
        let config = Self::from_json(text)?;
        let index = LineIndex::build(text);
        let diags = config.diagnostics(true, Some(&index));
        if diags.is_empty() {
            Ok(config)
        } else {
            Err(diags)
        }
    }

    pub fn coupling_hz(&self) -> f64 {
        self.coupling.d_hz.unwrap_or(DEFAULT_COUPLING_HZ)
    }

    /// Copy with every optional default made explicit, as echoed in outputs.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        c.coupling.d_hz = Some(self.coupling_hz());
        c
    }

    /// Every violated invariant. `from_file` requires an explicit coupling for
    /// gate-simulating scenarios.
    pub fn diagnostics(&self, from_file: bool, index: Option<&LineIndex>) -> Vec<Diagnostic> {
        let mut c = Checker {
            out: Vec::new(),
            index,
        };
        match (self.coupling.d_hz, self.scenario) {
            (Some(d), _) => c.positive("coupling.d_hz", d),
            (None, Some(id)) if from_file && id.simulates_gates() => c.push(
                "coupling.d_hz",
                format!("scenario {id} simulates gates and requires the dipolar coupling"),
            ),
            _ => {}
        }
        c.positive("drive.rabi_hz", self.drive.rabi_hz);

        let dc = &self.decoherence;
        c.positive("decoherence.gamma2_nv_hz", dc.gamma2_nv_hz);
        c.positive("decoherence.gamma2_x_hz", dc.gamma2_x_hz);
        c.positive("decoherence.gamma2_phi_hz", dc.gamma2_phi_hz);
        if !(dc.p > 0.0 && dc.p <= 3.0) {
            c.push("decoherence.p", format!("must be in (0, 3] (got {})", dc.p));
        }
        c.positive("decoherence.t1rho_s", dc.t1rho_s);
        for (path, v) in [
            ("decoherence.alpha0_nv", dc.alpha0_nv),
            ("decoherence.alpha0_phi", dc.alpha0_phi),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                c.push(path, format!("must be in (0, 1] (got {v})"));
            }
        }

        c.within("nuclear.polarization", self.nuclear.polarization, 0.0, 1.0);
        if !(1..=2).contains(&self.nuclear.transitions) {
            c.push(
                "nuclear.transitions",
                format!("must be 1 or 2 (got {})", self.nuclear.transitions),
            );
        }

        let ct = &self.control;
        c.within("control.initial_x_polarization", ct.initial_x_polarization, -1.0, 1.0);
        c.open_unit("control.contrast_n0", ct.contrast_n0);
        c.open_unit("control.contrast_n1", ct.contrast_n1);
        c.positive("control.contrast_sigma", ct.contrast_sigma);
        if let Some(e) = ct.pump_efficiency {
            if !(e > 0.0 && e <= 1.0) {
                c.push("control.pump_efficiency", format!("must be in (0, 1] (got {e})"));
            }
        }
        if let Some(e) = ct.gate_error {
            c.within("control.gate_error", e, 0.0, 1.0);
        }
        if ct.readout_total_amplitude < 1.0 || !ct.readout_total_amplitude.is_finite() {
            c.push(
                "control.readout_total_amplitude",
                format!("must be at least 1 (got {})", ct.readout_total_amplitude),
            );
        }

        c.non_negative("field.static_gauss", self.field.static_gauss);

        let g = &self.grids;
        c.grid("grids.drive_time_s", &g.drive_time_s, 3, false);
        c.grid("grids.scan_time_s", &g.scan_time_s, 8, false);
        c.non_negative("grids.modulation_nv_hz", g.modulation_nv_hz);
        c.non_negative("grids.modulation_x_hz", g.modulation_x_hz);
        c.grid("grids.tau_s", &g.tau_s, 5, true);
        c.grid("grids.b_gauss", &g.b_gauss, 6, false);
        c.positive("grids.sensing_tau_s", g.sensing_tau_s);
        if g.m_max == 0 {
            c.push("grids.m_max", "must be at least 1".into());
        }

        let b = &self.budget;
        c.positive("budget.tau_s", b.tau_s);
        c.non_negative("budget.tau_nv_s", b.tau_nv_s);
        c.non_negative("budget.tau_phi_s", b.tau_phi_s);
        c.non_negative("budget.tau_rr_s", b.tau_rr_s);

        let r = &self.readout;
        c.positive("readout.photons_bright", r.photons_bright);
        c.open_unit("readout.contrast", r.contrast);
        if r.shots == 0 {
            c.push("readout.shots", "must be at least 1".into());
        }

        let t = &self.ladder.targets;
        if t.total_amplitude < 1.0 || !t.total_amplitude.is_finite() {
            c.push(
                "ladder.targets.total_amplitude",
                format!("must be at least 1 (got {})", t.total_amplitude),
            );
        }
        if t.index == 0 || t.index > g.m_max {
            c.push(
                "ladder.targets.index",
                format!("must be in [1, grids.m_max = {}] (got {})", g.m_max, t.index),
            );
        }
        if t.peak_m == 0 || t.peak_m >= g.m_max {
            c.push(
                "ladder.targets.peak_m",
                format!("must be in [1, grids.m_max) (got {})", t.peak_m),
            );
        }
        if t.max_m != g.m_max {
            c.push(
                "ladder.targets.max_m",
                format!("must equal grids.m_max = {} (got {})", g.m_max, t.max_m),
            );
        }
        c.positive("ladder.targets.snr_gain", t.snr_gain);
        c.positive("ladder.targets.snr_gain_sigma", t.snr_gain_sigma);
        c.positive("ladder.targets.peak_tau_s", t.peak_tau_s);
        c.positive("ladder.targets.peak_gain", t.peak_gain);
        c.positive("ladder.targets.peak_gain_sigma", t.peak_gain_sigma);
        c.positive("ladder.targets.symmetry_sigma", t.symmetry_sigma);
        if let Some(m) = &self.ladder.measured {
            if m.amplitudes.is_empty() || m.amplitudes.len() != m.sigmas.len() {
                c.push(
                    "ladder.measured",
                    "amplitudes and sigmas must be non-empty and of equal length".into(),
                );
            }
            for (i, a) in m.amplitudes.iter().enumerate() {
                if !(*a >= 0.0 && a.is_finite()) {
                    c.push(&format!("ladder.measured.amplitudes[{i}]"), format!("must be non-negative (got {a})"));
                }
            }
            if m.amplitudes.first().is_some_and(|a| *a <= 0.0) {
                c.push("ladder.measured.amplitudes[0]", "must be positive".into());
            }
            for (i, s) in m.sigmas.iter().enumerate() {
                c.positive(&format!("ladder.measured.sigmas[{i}]"), *s);
            }
        }

        let s = &self.sweep;
        c.grid("sweep.d_hz", &s.d_hz, 2, true);
        c.grid("sweep.ratio", &s.ratio, 2, true);
        let d = self.coupling_hz();
        let ratio = dc.gamma2_x_hz / dc.gamma2_nv_hz;
        if s.d_hz.start > d || s.d_hz.stop < d {
            c.push("sweep.d_hz", format!("must cover the coupling {d} Hz"));
        }
        if s.ratio.start > ratio || s.ratio.stop < ratio {
            c.push("sweep.ratio", format!("must cover the measured ratio {ratio}"));
        }

        let n = &self.noise;
        c.non_negative("noise.sigma_b_gauss", n.sigma_b_gauss);
        c.positive("noise.tau_c_s", n.tau_c_s);
        if n.trajectories == 0 {
            c.push("noise.trajectories", "must be at least 1".into());
        }
        c.out
    }
}

/// Path of an unknown field named in a serde message, for line lookup.
fn unknown_field_path(message: &str) -> Option<String> {
    let rest = message.strip_prefix("unknown field `")?;
    Some(rest[..rest.find('`')?].to_string())
}
