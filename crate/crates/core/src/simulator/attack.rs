//! Attack scenarios S1-S8 applied to a sensor's readings over a sample window.

use serde::{Deserialize, Serialize};

use super::{generate, normal_stream, SensorProfile, Tone};
use crate::error::{Error, Result};
use crate::signal::TimeSeries;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scenario")]
pub enum AttackKind {
    /// S1: the sensor is replaced by another device measuring the same setpoint.
    #[serde(rename = "S1_replacement")]
    Replacement { replacement: SensorProfile },
    /// S2: physical swap with `partner`.
    #[serde(rename = "S2_swap")]
    Swap { partner: String },
    /// S3: the channel reports a constant.
    #[serde(rename = "S3_saturation")]
    Saturation { value: f64 },
    /// S4: an attacker's transmitter adds its signal to the legitimate one.
    #[serde(rename = "S4_analog_spoof")]
    AnalogSpoof { tones: Vec<Tone> },
    /// S5: controller tags exchanged with `partner`.
    #[serde(rename = "S5_digital_swap")]
    DigitalSwap { partner: String },
    /// S6: false data injection as a bias plus ramp.
    #[serde(rename = "S6_injection")]
    Injection {
        #[serde(default)]
        bias: f64,
        /// Added per sample since the window start.
        #[serde(default)]
        slope: f64,
    },
    /// S7: white noise matching the victim's mean and standard deviation.
    /// Unset moments are measured on the samples before the window.
    #[serde(rename = "S7_stealthy")]
    Stealthy {
        #[serde(default)]
        mean: Option<f64>,
        #[serde(default)]
        std: Option<f64>,
        seed: u64,
    },
    /// S8: replay of the same sensor's window starting at `source_start`.
    #[serde(rename = "S8_replay")]
    Replay { source_start: usize },
}

impl AttackKind {
    pub fn code(&self) -> &'static str {
        match self {
            AttackKind::Replacement { .. } => "S1",
            AttackKind::Swap { .. } => "S2",
            AttackKind::Saturation { .. } => "S3",
            AttackKind::AnalogSpoof { .. } => "S4",
            AttackKind::DigitalSwap { .. } => "S5",
            AttackKind::Injection { .. } => "S6",
            AttackKind::Stealthy { .. } => "S7",
            AttackKind::Replay { .. } => "S8",
        }
    }

    pub fn partner(&self) -> Option<&str> {
        match self {
            AttackKind::Swap { partner } | AttackKind::DigitalSwap { partner } => Some(partner),
            _ => None,
        }
    }
}

/// An attack over samples `[start, end)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSpec {
    pub start: usize,
    pub end: usize,
    #[serde(flatten)]
    pub kind: AttackKind,
}

impl AttackSpec {
    pub fn window_len(&self) -> usize {
        self.end - self.start
    }

    pub fn validate(&self, series_len: usize) -> Result<()> {
        if !(self.start < self.end && self.end <= series_len) {
            return Err(Error::InvalidSpec(format!(
                "window [{}, {}) does not fit a series of {series_len} samples",
                self.start, self.end
            )));
        }
        match &self.kind {
            AttackKind::Replay { source_start } => {
                let src_end = source_start + self.window_len();
                if *source_start < self.end && self.start < src_end {
                    return Err(Error::InvalidSpec(format!(
                        "replay source [{source_start}, {src_end}) overlaps the attack window"
                    )));
                }
                if src_end > series_len {
                    return Err(Error::InvalidSpec("replay source runs past the series".into()));
                }
            }
            AttackKind::Saturation { value } if !value.is_finite() => {
                return Err(Error::InvalidSpec("saturation value is not finite".into()))
            }
            AttackKind::Injection { bias, slope } if !(bias.is_finite() && slope.is_finite()) => {
                return Err(Error::InvalidSpec("injection bias/slope not finite".into()))
            }
            AttackKind::Stealthy { mean, std, .. }
                if !(mean.is_none_or(f64::is_finite) && std.is_none_or(|s| s >= 0.0 && s.is_finite())) =>
            {
                return Err(Error::InvalidSpec("stealthy target moments are invalid".into()))
            }
            AttackKind::AnalogSpoof { tones } => {
                tones
                    .iter()
                    .try_for_each(|t| t.validate())
                    .map_err(|e| Error::InvalidSpec(e.to_string()))?;
            }
            AttackKind::Replacement { replacement } => {
                replacement.validate().map_err(|e| Error::InvalidSpec(e.to_string()))?;
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackOutcome {
    pub victim: TimeSeries,
    /// The partner series after a swap.
    pub partner: Option<TimeSeries>,
}

/// Applies `spec` to `series`; samples outside the window are untouched.
pub fn apply_attack(
    series: &TimeSeries,
    partner: Option<&TimeSeries>,
    spec: &AttackSpec,
) -> Result<AttackOutcome> {
    spec.validate(series.len())?;
    let window = spec.start..spec.end;
    let mut victim = series.clone();
    let mut partner_out = None;

    match &spec.kind {
        AttackKind::Replacement { replacement } => {
            let fresh = generate(replacement, spec.end)?;
            victim.values[window.clone()].copy_from_slice(&fresh.values[window]);
        }
        AttackKind::Swap { .. } | AttackKind::DigitalSwap { .. } => {
            let other = partner.ok_or_else(|| {
                Error::InvalidSpec(format!("{} needs a partner series", spec.kind.code()))
            })?;
            if other.len() < spec.end {
                return Err(Error::InvalidSpec("partner series is shorter than the window".into()));
            }
            let mut other = other.clone();
            victim.values[window.clone()].swap_with_slice(&mut other.values[window]);
            partner_out = Some(other);
        }
        AttackKind::Saturation { value } => {
            victim.values[window].fill(*value);
        }
        AttackKind::AnalogSpoof { tones } => {
            for n in window {
                victim.values[n] += tones.iter().map(|t| t.at(n)).sum::<f64>();
            }
        }
        AttackKind::Injection { bias, slope } => {
            for n in window {
                victim.values[n] += bias + slope * (n - spec.start) as f64;
            }
        }
        AttackKind::Stealthy { mean, std, seed } => {
            let history = if spec.start >= 2 {
                &series.values[..spec.start]
            } else {
                &series.values[..]
            };
            let (m, s) = moments(history);
            let (mean, std) = (mean.unwrap_or(m), std.unwrap_or(s));
            let noise = normal_stream(*seed, std, spec.window_len());
            for (slot, g) in victim.values[window].iter_mut().zip(noise) {
                *slot = mean + g;
            }
        }
        AttackKind::Replay { source_start } => {
            let src = *source_start..source_start + spec.window_len();
            victim.values.copy_within(src, spec.start);
        }
    }
    Ok(AttackOutcome {
        victim,
        partner: partner_out,
    })
}

/// Mean and sample standard deviation of `values`, the moments an S7 attacker matches.
pub fn moments(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}
