//! Pulse-sequence IR and its JSON form.
//!
//! Durations are in seconds, frequencies in Hz and phases in radians.

use serde::{Deserialize, Serialize};

use crate::dynamics::FieldModel;
use crate::spinsys::SpinLabel;
use crate::{Error, Result};

/// One continuous-wave tone of a microwave drive segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tone {
    pub target: SpinLabel,
    pub rabi_hz: f64,
    pub phase_rad: f64,
    #[serde(default)]
    pub detuning_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Segment {
    /// Instantaneous rotation `exp(−iθ(cosφ·Sx + sinφ·Sy))` on each target.
    Pulse {
        targets: Vec<SpinLabel>,
        angle_rad: f64,
        phase_rad: f64,
    },
    MicrowaveDrive {
        tones: Vec<Tone>,
        duration_s: f64,
    },
    LaserPulse {
        duration_s: f64,
        efficiency: f64,
    },
    Delay {
        duration_s: f64,
    },
    /// Free evolution in a field with instantaneous π pulses on all targets at
    /// the listed offsets from the window start.
    SensingWindow {
        duration_s: f64,
        field: FieldModel,
        pi_pulses_s: Vec<f64>,
        targets: Vec<SpinLabel>,
    },
    /// Optical readout: records `⟨σz⟩` of the NV and projects it.
    Readout {
        duration_s: f64,
    },
}

impl Segment {
    pub fn duration(&self) -> f64 {
        match self {
            Segment::Pulse { .. } => 0.0,
            Segment::MicrowaveDrive { duration_s, .. }
            | Segment::LaserPulse { duration_s, .. }
            | Segment::Delay { duration_s }
            | Segment::SensingWindow { duration_s, .. }
            | Segment::Readout { duration_s } => *duration_s,
        }
    }

    fn validate(&self, index: usize) -> Result<()> {
        let fail = |msg: String| Err(Error::Sequence(format!("segment {index}: {msg}")));
        let d = self.duration();
        if !(d >= 0.0 && d.is_finite()) {
            return fail(format!("duration {d} must be finite and non-negative"));
        }
        let check_targets = |targets: &[SpinLabel]| -> Result<()> {
            if targets.is_empty() {
                return Err(Error::Sequence(format!("segment {index}: no targets")));
            }
            for (i, t) in targets.iter().enumerate() {
                if targets[..i].contains(t) {
                    return Err(Error::Sequence(format!("segment {index}: duplicate target {t}")));
                }
            }
            Ok(())
        };
        match self {
            Segment::Pulse {
                targets,
                angle_rad,
                phase_rad,
            } => {
                check_targets(targets)?;
                if !angle_rad.is_finite() || !phase_rad.is_finite() {
                    return fail("non-finite pulse angle or phase".into());
                }
            }
            Segment::MicrowaveDrive { tones, .. } => {
                let targets: Vec<SpinLabel> = tones.iter().map(|t| t.target).collect();
                check_targets(&targets)?;
                for t in tones {
                    if !t.rabi_hz.is_finite() || !t.phase_rad.is_finite() || !t.detuning_hz.is_finite()
                    {
                        return fail(format!("non-finite tone parameters on {}", t.target));
                    }
                }
            }
            Segment::LaserPulse { efficiency, .. } => {
                if !(0.0..=1.0).contains(efficiency) {
                    return fail(format!("pump efficiency {efficiency} outside [0, 1]"));
                }
            }
            Segment::SensingWindow {
                duration_s,
                field,
                pi_pulses_s,
                targets,
            } => {
                check_targets(targets)?;
                field
                    .validate()
                    .map_err(|e| Error::Sequence(format!("segment {index}: {e}")))?;
                let mut last = 0.0;
                for &p in pi_pulses_s {
                    if !(p >= last && p <= *duration_s) {
                        return fail(format!(
                            "π pulse offsets must be sorted within [0, {duration_s}]"
                        ));
                    }
                    last = p;
                }
            }
            Segment::Delay { .. } | Segment::Readout { .. } => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSequence {
    pub segments: Vec<Segment>,
}

impl PulseSequence {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        let seq = PulseSequence { segments };
        seq.validate()?;
        Ok(seq)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.segments.iter().enumerate() {
            s.validate(i)?;
        }
        Ok(())
    }

    /// Sum of segment durations in order.
    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(Segment::duration).sum()
    }

    pub fn then(mut self, other: PulseSequence) -> Self {
        self.segments.extend(other.segments);
        self
    }

    pub fn push(&mut self, segment: Segment) {
        self.segments.push(segment);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sequence serializes")
    }

    /// Parses and validates a JSON sequence document.
    pub fn from_json(text: &str) -> Result<Self> {
        let seq: PulseSequence = serde_json::from_str(text)?;
        seq.validate()?;
        Ok(seq)
    }
}
