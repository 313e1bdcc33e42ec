//! Runtime authentication of incoming chunks against a fingerprint model.

use std::fmt;
use std::fmt::Write as _;

use crate::classifier::{self, LabeledDataset, MulticlassSvmModel, SvmParams};
use crate::error::{Error, Result};
use crate::features::{self, FeatureVector};
use crate::signal::NoiseChunk;
use crate::simulator::energy;

/// Chunks whose sample variance falls below this are treated as saturated.
pub const DEFAULT_SATURATION_EPS: f64 = 1e-12;

/// Default half-width of the energy acceptance band, in standard deviations.
pub const DEFAULT_ENERGY_K: f64 = 3.0;

pub const MIN_FLOOR_CHUNKS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Authentic,
    Mismatch,
    Saturated,
    EnergyAnomaly,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Authentic => "authentic",
            Verdict::Mismatch => "mismatch",
            Verdict::Saturated => "saturated",
            Verdict::EnergyAnomaly => "energy_anomaly",
        }
    }

    pub fn is_authentic(self) -> bool {
        self == Verdict::Authentic
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuthDecision {
    pub sensor_id: String,
    pub chunk_index: usize,
    pub claimed_id: String,
    /// `None` when classification was skipped because the chunk is saturated.
    pub predicted_id: Option<String>,
    pub verdict: Verdict,
    pub energy: f64,
    pub degenerate: bool,
}

impl AuthDecision {
    /// `sensor_id,chunk_index,claimed,predicted,verdict,energy`
    pub fn log_line(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.sensor_id,
            self.chunk_index,
            self.claimed_id,
            self.predicted_id.as_deref().unwrap_or("-"),
            self.verdict,
            self.energy
        )
    }
}

pub const VERDICT_LOG_HEADER: &str = "sensor_id,chunk_index,claimed,predicted,verdict,energy";

pub fn format_verdict_log(decisions: &[AuthDecision]) -> String {
    let mut out = String::from(VERDICT_LOG_HEADER);
    out.push('\n');
    for d in decisions {
        let _ = writeln!(out, "{}", d.log_line());
    }
    out
}

fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Energy of a chunk of noise samples at unit spacing.
pub fn chunk_energy(chunk: &NoiseChunk) -> f64 {
    energy(&chunk.values, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorSettings {
    pub saturation_eps: f64,
}

impl Default for DetectorSettings {
    fn default() -> Self {
        DetectorSettings {
            saturation_eps: DEFAULT_SATURATION_EPS,
        }
    }
}

pub fn authenticate(model: &MulticlassSvmModel, chunk: &NoiseChunk, claimed_id: &str) -> Result<AuthDecision> {
    authenticate_with(model, chunk, claimed_id, &DetectorSettings::default())
}

/// Saturation check first, then classification against the claimed identity.
pub fn authenticate_with(
    model: &MulticlassSvmModel,
    chunk: &NoiseChunk,
    claimed_id: &str,
    settings: &DetectorSettings,
) -> Result<AuthDecision> {
    if !model.has_class(claimed_id) {
        return Err(Error::rejected(format!("claimed id `{claimed_id}` is not a model class")));
    }
    let fv = features::extract(chunk)?;
    let energy = chunk_energy(chunk);
    let mut decision = AuthDecision {
        sensor_id: chunk.sensor_id.clone(),
        chunk_index: chunk.chunk_index,
        claimed_id: claimed_id.to_string(),
        predicted_id: None,
        verdict: Verdict::Saturated,
        energy,
        degenerate: fv.degenerate,
    };
    if sample_variance(&chunk.values) < settings.saturation_eps {
        return Ok(decision);
    }
    let predicted = model.predict(&fv);
    decision.verdict = if predicted == claimed_id {
        Verdict::Authentic
    } else {
        Verdict::Mismatch
    };
    decision.predicted_id = Some(predicted.to_string());
    Ok(decision)
}

/// Expected chunk energy of one sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseFloorProfile {
    pub sensor_id: String,
    pub mean_chunk_energy: f64,
    pub energy_std: f64,
    pub k: f64,
}

impl NoiseFloorProfile {
    pub fn with_k(mut self, k: f64) -> Self {
        self.k = k;
        self
    }
}

pub fn fit_noise_floor(chunks: &[NoiseChunk]) -> Result<NoiseFloorProfile> {
    if chunks.len() < MIN_FLOOR_CHUNKS {
        return Err(Error::insufficient(format!(
            "noise floor needs at least {MIN_FLOOR_CHUNKS} chunks, got {}",
            chunks.len()
        )));
    }
    let energies: Vec<f64> = chunks.iter().map(chunk_energy).collect();
    let n = energies.len() as f64;
    let mean = energies.iter().sum::<f64>() / n;
    let var = energies.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(NoiseFloorProfile {
        sensor_id: chunks[0].sensor_id.clone(),
        mean_chunk_energy: mean,
        energy_std: var.sqrt(),
        k: DEFAULT_ENERGY_K,
    })
}

/// True when the chunk energy leaves the `mean ± k·std` band.
pub fn energy_test(profile: &NoiseFloorProfile, chunk: &NoiseChunk) -> bool {
    (chunk_energy(chunk) - profile.mean_chunk_energy).abs() > profile.k * profile.energy_std
}

/// Authentication plus the noise-floor check. A chunk that passes
/// identification but fails the energy test becomes an energy anomaly.
pub fn authenticate_with_floor(
    model: &MulticlassSvmModel,
    floor: Option<&NoiseFloorProfile>,
    chunk: &NoiseChunk,
    claimed_id: &str,
    settings: &DetectorSettings,
) -> Result<AuthDecision> {
    let mut d = authenticate_with(model, chunk, claimed_id, settings)?;
    if d.verdict == Verdict::Authentic && floor.is_some_and(|f| energy_test(f, chunk)) {
        d.verdict = Verdict::EnergyAnomaly;
    }
    Ok(d)
}

pub const ATTACK_LABEL: &str = "attack";
pub const NORMAL_LABEL: &str = "normal";

/// Binary attack/normal classifier over chunk fingerprints.
#[derive(Debug, Clone, PartialEq)]
pub struct SpoofClassifier {
    pub model: MulticlassSvmModel,
}

impl SpoofClassifier {
    pub fn is_attack(&self, features: &FeatureVector) -> bool {
        self.model.predict(features) == ATTACK_LABEL
    }

    pub fn test(&self, chunk: &NoiseChunk) -> Result<bool> {
        Ok(self.is_attack(&features::extract(chunk)?))
    }
}

pub fn spoof_classifier_train(
    normal: &[FeatureVector],
    attacked: &[FeatureVector],
    params: &SvmParams,
) -> Result<SpoofClassifier> {
    if normal.is_empty() || attacked.is_empty() {
        return Err(Error::insufficient("spoof classifier needs normal and attacked chunks"));
    }
    let mut data = LabeledDataset::default();
    for f in normal {
        data.push_features(f, NORMAL_LABEL);
    }
    for f in attacked {
        data.push_features(f, ATTACK_LABEL);
    }
    Ok(SpoofClassifier {
        model: classifier::train(&data, params)?,
    })
}
