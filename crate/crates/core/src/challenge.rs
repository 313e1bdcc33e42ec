//! Physical-domain challenge-response: a challenger perturbs the measured
//! quantity during a secret window and a verifier checks that the reported
//! fingerprint switches to the joint sensor+challenger class exactly there.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classifier::{self, LabeledDataset, MulticlassSvmModel, SvmParams};
use crate::error::{Error, Result};
use crate::features;
use crate::parallel::{self, Execution};
use crate::signal::{chunk_values, TimeSeries, DEFAULT_CHUNK_LEN, MIN_CHUNK_LEN};
use crate::simulator::{derive_seed, generate, SensorProfile, Tone};

pub const NORMAL_CLASS: &str = "normal";
pub const CHALLENGED_CLASS: &str = "challenged";

/// Largest perturbation allowed, as a fraction of the baseline.
pub const MAX_AMPLITUDE_FRACTION: f64 = 0.05;

/// Enrollment reclassification accuracy below which a warning is raised.
pub const ENROLLMENT_WARNING_ACCURACY: f64 = 0.9;

const STREAM_CHALLENGED: u64 = 1;
const STREAM_TRIAL: u64 = 2;
const STREAM_REPLAY: u64 = 3;
const STREAM_ADAPTIVE: u64 = 4;

/// Perturbation injected by the challenger. Tone amplitudes are relative
/// weights; they are rescaled so their sum equals
/// `amplitude_fraction · |baseline|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChallengerProfile {
    pub amplitude_fraction: f64,
    pub tones: Vec<Tone>,
}

impl Default for ChallengerProfile {
    fn default() -> Self {
        ChallengerProfile {
            amplitude_fraction: 0.01,
            tones: vec![
                Tone {
                    frequency: 0.137,
                    amplitude: 1.0,
                    phase: 0.0,
                },
                Tone {
                    frequency: 0.291,
                    amplitude: 1.0,
                    phase: 1.0,
                },
            ],
        }
    }
}

impl ChallengerProfile {
    /// Checks the amplitude bound. Zero is tolerated here so enrollment can
    /// report it as a quality problem instead of refusing outright.
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=MAX_AMPLITUDE_FRACTION).contains(&self.amplitude_fraction) {
            return Err(Error::rejected(format!(
                "challenger amplitude fraction {} outside (0, {MAX_AMPLITUDE_FRACTION}]",
                self.amplitude_fraction
            )));
        }
        if self.tones.is_empty() {
            return Err(Error::rejected("challenger needs at least one tone"));
        }
        for t in &self.tones {
            if !(t.frequency > 0.0 && t.frequency < 0.5) || !(t.amplitude > 0.0 && t.amplitude.is_finite()) {
                return Err(Error::rejected("challenger tones need a frequency in (0, 0.5) and a positive weight"));
            }
        }
        Ok(())
    }

    /// Tones with absolute amplitudes for a process at `baseline`.
    pub fn scaled_tones(&self, baseline: f64) -> Vec<Tone> {
        let total: f64 = self.tones.iter().map(|t| t.amplitude).sum();
        let budget = self.amplitude_fraction * baseline.abs();
        self.tones
            .iter()
            .map(|t| Tone {
                amplitude: budget * t.amplitude / total,
                ..*t
            })
            .collect()
    }

    pub fn perturbation(tones: &[Tone], n: usize) -> f64 {
        tones.iter().map(|t| t.at(n)).sum()
    }
}

/// Secret challenge window `[t, t + delta)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChallengeSchedule {
    pub t: usize,
    pub delta: usize,
    pub seed: u64,
}

impl ChallengeSchedule {
    /// Draws `delta` from `[min_chunks·L, max_chunks·L]` and `t` so that at
    /// least one whole chunk fits on each side of the window.
    pub fn draw(seed: u64, length: usize, chunk_size: usize, min_chunks: usize, max_chunks: usize) -> Result<Self> {
        if min_chunks < 2 || max_chunks < min_chunks {
            return Err(Error::rejected("challenge window must span at least two chunks"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let delta = rng.random_range(min_chunks * chunk_size..=max_chunks * chunk_size);
        if length < delta + 2 * chunk_size {
            return Err(Error::rejected(format!(
                "series of {length} samples cannot hold a {delta}-sample window with a chunk on each side"
            )));
        }
        let t = rng.random_range(chunk_size..=length - delta - chunk_size);
        let s = ChallengeSchedule { t, delta, seed };
        s.validate(length, chunk_size)?;
        Ok(s)
    }

    pub fn end(&self) -> usize {
        self.t + self.delta
    }

    pub fn validate(&self, length: usize, chunk_size: usize) -> Result<()> {
        if self.delta < 2 * chunk_size {
            return Err(Error::rejected(format!(
                "window of {} samples is shorter than two chunks",
                self.delta
            )));
        }
        if self.t < chunk_size || self.end() + chunk_size > length {
            return Err(Error::rejected(format!(
                "window [{}, {}) needs a whole chunk on each side within {length} samples",
                self.t,
                self.end()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdversaryKind {
    None,
    Replay,
    Adaptive,
}

impl std::fmt::Display for AdversaryKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AdversaryKind::None => "none",
            AdversaryKind::Replay => "replay",
            AdversaryKind::Adaptive => "adaptive",
        })
    }
}

impl std::str::FromStr for AdversaryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(AdversaryKind::None),
            "replay" => Ok(AdversaryKind::Replay),
            "adaptive" => Ok(AdversaryKind::Adaptive),
            other => Err(Error::rejected(format!("unknown adversary `{other}`"))),
        }
    }
}

/// The replay adversary plays back an attack-free recording of the same
/// sensor. The adaptive adversary fakes the sensor noise perfectly and
/// mirrors the challenge `learning_delay` samples late.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AdversaryModel {
    pub kind: AdversaryKind,
    pub learning_delay: usize,
}

impl AdversaryModel {
    pub fn none() -> Self {
        AdversaryModel {
            kind: AdversaryKind::None,
            learning_delay: 0,
        }
    }

    pub fn replay() -> Self {
        AdversaryModel {
            kind: AdversaryKind::Replay,
            learning_delay: 0,
        }
    }

    pub fn adaptive(learning_delay: usize) -> Self {
        AdversaryModel {
            kind: AdversaryKind::Adaptive,
            learning_delay,
        }
    }
}

/// Challenge parameters as they appear in a scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChallengeSettings {
    /// Sensor to challenge; the first scenario sensor when unset.
    pub sensor: Option<String>,
    pub challenger: ChallengerProfile,
    pub chunk_size: usize,
    /// Samples per protocol run; `16 · chunk_size` when unset.
    pub length: Option<usize>,
    /// Chunks per class used to enroll the joint model.
    pub enrollment_chunks: usize,
    pub min_window_chunks: usize,
    pub max_window_chunks: usize,
    /// Adaptive attacker delay; one chunk when unset.
    pub learning_delay: Option<usize>,
}

impl Default for ChallengeSettings {
    fn default() -> Self {
        ChallengeSettings {
            sensor: None,
            challenger: ChallengerProfile::default(),
            chunk_size: DEFAULT_CHUNK_LEN,
            length: None,
            enrollment_chunks: 180,
            min_window_chunks: 2,
            max_window_chunks: 4,
            learning_delay: None,
        }
    }
}

impl ChallengeSettings {
    pub fn length(&self) -> usize {
        self.length.unwrap_or(16 * self.chunk_size)
    }

    pub fn learning_delay(&self) -> usize {
        self.learning_delay.unwrap_or(self.chunk_size)
    }

    pub fn validate(&self) -> Result<()> {
        self.challenger.validate()?;
        if self.chunk_size < MIN_CHUNK_LEN {
            return Err(Error::rejected(format!("chunk size must be at least {MIN_CHUNK_LEN}")));
        }
        if self.enrollment_chunks < 2 {
            return Err(Error::rejected("enrollment needs at least two chunks per class"));
        }
        if self.min_window_chunks < 2 || self.max_window_chunks < self.min_window_chunks {
            return Err(Error::rejected("challenge window must span at least two chunks"));
        }
        if self.length() < (self.max_window_chunks + 2) * self.chunk_size {
            return Err(Error::rejected("protocol length too short for the largest window"));
        }
        Ok(())
    }

    pub fn setup(&self, sensor: SensorProfile) -> Result<ChallengeSetup> {
        self.validate()?;
        sensor.validate()?;
        Ok(ChallengeSetup {
            sensor,
            challenger: self.challenger.clone(),
            chunk_size: self.chunk_size,
            length: self.length(),
            enrollment_chunks: self.enrollment_chunks,
            min_window_chunks: self.min_window_chunks,
            max_window_chunks: self.max_window_chunks,
        })
    }

    pub fn schedule(&self, seed: u64) -> Result<ChallengeSchedule> {
        ChallengeSchedule::draw(
            seed,
            self.length(),
            self.chunk_size,
            self.min_window_chunks,
            self.max_window_chunks,
        )
    }
}

/// Everything needed to run the protocol against one sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct ChallengeSetup {
    pub sensor: SensorProfile,
    pub challenger: ChallengerProfile,
    pub chunk_size: usize,
    pub length: usize,
    pub enrollment_chunks: usize,
    pub min_window_chunks: usize,
    pub max_window_chunks: usize,
}

impl ChallengeSetup {
    pub fn challenger_tones(&self) -> Vec<Tone> {
        self.challenger.scaled_tones(self.sensor.baseline)
    }

    pub fn schedule(&self, seed: u64) -> Result<ChallengeSchedule> {
        ChallengeSchedule::draw(
            seed,
            self.length,
            self.chunk_size,
            self.min_window_chunks,
            self.max_window_chunks,
        )
    }
}

/// Joint sensor/challenger model with the reference used for noise extraction.
#[derive(Debug, Clone, PartialEq)]
pub struct JointModel {
    pub model: MulticlassSvmModel,
    /// Mean of the unperturbed enrollment readings.
    pub reference: f64,
    pub chunk_size: usize,
    pub reclassification_accuracy: f64,
    pub warning: Option<String>,
}

fn reseeded(profile: &SensorProfile, seed: u64) -> SensorProfile {
    SensorProfile {
        seed,
        ..profile.clone()
    }
}

pub fn enroll_joint(setup: &ChallengeSetup, params: &SvmParams) -> Result<JointModel> {
    enroll_joint_with(setup, params, Execution::default())
}

/// Trains `{normal, challenged}` on simulated chunks with and without the
/// challenger perturbation.
pub fn enroll_joint_with(setup: &ChallengeSetup, params: &SvmParams, exec: Execution) -> Result<JointModel> {
    setup.challenger.validate()?;
    let l = setup.chunk_size;
    let len = setup.enrollment_chunks * l;
    let normal = generate(&setup.sensor, len)?;
    let reference = normal.mean();
    let tones = setup.challenger_tones();
    let mut challenged = generate(&reseeded(&setup.sensor, derive_seed(setup.sensor.seed, STREAM_CHALLENGED)), len)?;
    for (n, v) in challenged.values.iter_mut().enumerate() {
        *v += ChallengerProfile::perturbation(&tones, n);
    }
    let mut data = LabeledDataset::default();
    for (series, label) in [(&normal, NORMAL_CLASS), (&challenged, CHALLENGED_CLASS)] {
        let noise: Vec<f64> = series.values.iter().map(|v| v - reference).collect();
        for c in chunk_values(&setup.sensor.sensor_id, &noise, l, reference)? {
            data.push_features(&features::extract(&c)?, label);
        }
    }
    let model = classifier::train_with(&data, params, exec)?;
    let correct = data
        .vectors
        .iter()
        .zip(&data.labels)
        .filter(|(v, y)| model.predict_raw(v) == y.as_str())
        .count();
    let accuracy = correct as f64 / data.len() as f64;
    let warning = (accuracy < ENROLLMENT_WARNING_ACCURACY).then(|| {
        format!(
            "joint model reclassifies only {:.1}% of enrollment chunks; the challenger is barely distinguishable",
            accuracy * 100.0
        )
    });
    Ok(JointModel {
        model,
        reference,
        chunk_size: l,
        reclassification_accuracy: accuracy,
        warning,
    })
}

/// The sensor's own output during a protocol run, before any challenge.
pub fn legitimate(setup: &ChallengeSetup, schedule: &ChallengeSchedule) -> Result<TimeSeries> {
    let seed = derive_seed(setup.sensor.seed, derive_seed(schedule.seed, STREAM_TRIAL));
    generate(&reseeded(&setup.sensor, seed), setup.length)
}

/// Values the verifier receives under the given adversary.
pub fn run_protocol(
    setup: &ChallengeSetup,
    schedule: &ChallengeSchedule,
    adversary: &AdversaryModel,
) -> Result<TimeSeries> {
    schedule.validate(setup.length, setup.chunk_size)?;
    let tones = setup.challenger_tones();
    let (mut series, from, to) = match adversary.kind {
        AdversaryKind::None => (legitimate(setup, schedule)?, schedule.t, schedule.end()),
        AdversaryKind::Replay => {
            let seed = derive_seed(setup.sensor.seed, derive_seed(schedule.seed, STREAM_REPLAY));
            let recording = generate(&reseeded(&setup.sensor, seed), setup.length)?;
            return Ok(recording);
        }
        AdversaryKind::Adaptive => {
            let seed = derive_seed(setup.sensor.seed, derive_seed(schedule.seed, STREAM_ADAPTIVE));
            let fake = generate(&reseeded(&setup.sensor, seed), setup.length)?;
            let from = schedule.t + adversary.learning_delay;
            (fake, from, schedule.end() + adversary.learning_delay)
        }
    };
    let to = to.min(series.values.len());
    for n in from.min(to)..to {
        series.values[n] += ChallengerProfile::perturbation(&tones, n);
    }
    Ok(series)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChunkVerdict {
    pub start: usize,
    pub expected: &'static str,
    pub predicted: String,
}

impl ChunkVerdict {
    pub fn matches(&self) -> bool {
        self.predicted == self.expected
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verification {
    pub schedule: ChallengeSchedule,
    pub verdicts: Vec<ChunkVerdict>,
    /// Start samples of chunks straddling a window boundary.
    pub excluded: Vec<usize>,
}

impl Verification {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(ChunkVerdict::matches)
    }

    pub fn offending(&self) -> Vec<&ChunkVerdict> {
        self.verdicts.iter().filter(|v| !v.matches()).collect()
    }
}

/// Classifies every whole chunk on a grid anchored at `t`; chunks inside the
/// window must be challenged, chunks outside must be normal.
pub fn verify(joint: &JointModel, reported: &TimeSeries, schedule: &ChallengeSchedule) -> Result<Verification> {
    let l = joint.chunk_size;
    schedule.validate(reported.len(), l)?;
    let mut verdicts = Vec::new();
    let mut excluded = Vec::new();
    let mut start = schedule.t % l;
    while start + l <= reported.len() {
        let end = start + l;
        let inside = start >= schedule.t && end <= schedule.end();
        let outside = end <= schedule.t || start >= schedule.end();
        if inside || outside {
            let noise: Vec<f64> = reported.values[start..end].iter().map(|v| v - joint.reference).collect();
            let predicted = joint.model.predict(&features::extract_values(&noise)).to_string();
            verdicts.push(ChunkVerdict {
                start,
                expected: if inside { CHALLENGED_CLASS } else { NORMAL_CLASS },
                predicted,
            });
        } else {
            excluded.push(start);
        }
        start = end;
    }
    Ok(Verification {
        schedule: *schedule,
        verdicts,
        excluded,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialSummary {
    pub adversary: AdversaryModel,
    pub passed: Vec<bool>,
}

impl TrialSummary {
    pub fn trials(&self) -> usize {
        self.passed.len()
    }

    pub fn pass_rate(&self) -> f64 {
        self.passed.iter().filter(|&&p| p).count() as f64 / self.trials() as f64
    }

    pub fn fail_rate(&self) -> f64 {
        1.0 - self.pass_rate()
    }
}

/// Independent protocol runs with schedules drawn from `master_seed`.
pub fn run_trials(
    joint: &JointModel,
    setup: &ChallengeSetup,
    adversary: &AdversaryModel,
    trials: usize,
    master_seed: u64,
    exec: Execution,
) -> Result<TrialSummary> {
    if trials == 0 {
        return Err(Error::rejected("at least one trial is required"));
    }
    let seeds: Vec<u64> = (0..trials as u64).map(|i| derive_seed(master_seed, i)).collect();
    let passed = parallel::try_map(exec, &seeds, |&seed| {
        let schedule = setup.schedule(seed)?;
        let reported = run_protocol(setup, &schedule, adversary)?;
        Ok::<_, Error>(verify(joint, &reported, &schedule)?.passed())
    })?;
    Ok(TrialSummary {
        adversary: *adversary,
        passed,
    })
}
