//! Seeded synthetic sensor fleets, attack injection and signal energy.

pub mod attack;
pub mod scenario;

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::TimeSeries;

pub use attack::{apply_attack, AttackKind, AttackOutcome, AttackSpec};
pub use scenario::{AttackEntry, Fleet, PlantScenario};

/// A sinusoidal component `amplitude * sin(2π f n + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tone {
    /// Cycles per sample, in (0, 0.5).
    pub frequency: f64,
    pub amplitude: f64,
    #[serde(default)]
    pub phase: f64,
}

impl Tone {
    pub fn at(&self, n: usize) -> f64 {
        self.amplitude * (TAU * self.frequency * n as f64 + self.phase).sin()
    }

    fn validate(&self) -> Result<()> {
        if !(self.frequency > 0.0 && self.frequency < 0.5) {
            return Err(Error::rejected(format!(
                "tone frequency {} outside (0, 0.5)",
                self.frequency
            )));
        }
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite() && self.phase.is_finite()) {
            return Err(Error::rejected("tone amplitude must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Synthetic noise signature of one sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorProfile {
    pub sensor_id: String,
    /// Process setpoint, e.g. the true tank level.
    pub baseline: f64,
    /// Measurement bias of this sensor.
    pub offset: f64,
    /// Standard deviation of the white measurement noise.
    pub noise_std: f64,
    #[serde(default)]
    pub tones: Vec<Tone>,
    pub seed: u64,
}

impl SensorProfile {
    pub fn validate(&self) -> Result<()> {
        if self.sensor_id.is_empty() || self.sensor_id.contains([',', ' ', '\t']) {
            return Err(Error::rejected(format!("invalid sensor id `{}`", self.sensor_id)));
        }
        if !(self.noise_std > 0.0 && self.noise_std.is_finite()) {
            return Err(Error::rejected(format!(
                "sensor `{}`: noise_std must be positive",
                self.sensor_id
            )));
        }
        if !(self.baseline.is_finite() && self.offset.is_finite()) {
            return Err(Error::rejected(format!("sensor `{}`: non-finite level", self.sensor_id)));
        }
        self.tones.iter().try_for_each(Tone::validate)
    }

    /// Deterministic component at sample `n`: setpoint, bias and tones.
    pub fn clean_value(&self, n: usize) -> f64 {
        self.baseline + self.offset + self.tones.iter().map(|t| t.at(n)).sum::<f64>()
    }
}

/// Zero-mean normal samples from a stream keyed by `seed`.
pub fn normal_stream(seed: u64, std: f64, len: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|_| std * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
        .collect()
}

/// Mixes `stream` into `seed` so related streams stay independent.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Readings of `profile` for samples `0..duration` at 1 Hz.
pub fn generate(profile: &SensorProfile, duration: usize) -> Result<TimeSeries> {
    profile.validate()?;
    if duration == 0 {
        return Err(Error::insufficient("duration must be at least one sample"));
    }
    let noise = normal_stream(profile.seed, profile.noise_std, duration);
    let values = noise
        .into_iter()
        .enumerate()
        .map(|(n, g)| profile.clean_value(n) + g)
        .collect();
    TimeSeries::at_1hz(profile.sensor_id.clone(), values)
}

/// Discrete signal energy `Σ v² dt`.
pub fn energy(values: &[f64], dt: f64) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>() * dt
}

/// Ratio of signal energy to noise energy.
pub fn snr(signal_energy: f64, noise_energy: f64) -> Result<f64> {
    if noise_energy == 0.0 {
        return Err(Error::UndefinedSnr);
    }
    if !(noise_energy > 0.0) || !(signal_energy >= 0.0) {
        return Err(Error::rejected("energies must be non-negative"));
    }
    Ok(signal_energy / noise_energy)
}

/// Ranges of the default fleet sampler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FleetSampler {
    pub baseline: f64,
    /// Log-uniform range of the white-noise standard deviation.
    pub noise_std: (f64, f64),
    pub offset: (f64, f64),
    /// Tone amplitude as a multiple of the sensor's noise_std.
    pub tone_amplitude: (f64, f64),
    /// Band holding the tone grid, in cycles/sample.
    pub tone_band: (f64, f64),
    /// Maximum jitter around a grid point, as a fraction of the grid spacing.
    pub tone_jitter: f64,
}

impl Default for FleetSampler {
    fn default() -> Self {
        FleetSampler {
            baseline: 100.0,
            noise_std: (0.05, 0.5),
            offset: (-0.2, 0.2),
            tone_amplitude: (0.3, 0.8),
            tone_band: (0.02, 0.48),
            tone_jitter: 0.25,
        }
    }
}

impl FleetSampler {
    pub fn validate(&self) -> Result<()> {
        let ok = self.noise_std.0 > 0.0
            && self.noise_std.0 <= self.noise_std.1
            && self.offset.0 <= self.offset.1
            && self.tone_amplitude.0 >= 0.0
            && self.tone_amplitude.0 <= self.tone_amplitude.1
            && self.tone_band.0 > 0.0
            && self.tone_band.0 < self.tone_band.1
            && self.tone_band.1 < 0.5
            && (0.0..0.5).contains(&self.tone_jitter)
            && self.baseline.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::rejected("fleet sampler ranges are inconsistent"))
        }
    }

    /// Profiles `S01..` drawn from `master_seed`.
    ///
    /// Noise level and offset are split into `count` equal strata each and
    /// paired so that sensors close in noise level sit far apart in offset.
    /// The tone-to-noise ratio follows the noise stratum, so the total spread
    /// grows with the noise level. Tone frequencies come from their own
    /// shuffled grid.
    pub fn sample(&self, count: usize, master_seed: u64) -> Result<Vec<SensorProfile>> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        let (ln_lo, ln_hi) = (self.noise_std.0.ln(), self.noise_std.1.ln());
        let pairing = offset_pairing(count, (ln_lo, ln_hi), self.offset);
        let flip = rng.random::<bool>();
        let mut slots: Vec<usize> = (0..count).collect();
        shuffle(&mut rng, &mut slots);
        let mut tone_slots: Vec<usize> = (0..count).collect();
        shuffle(&mut rng, &mut tone_slots);
        slots
            .into_iter()
            .zip(tone_slots)
            .enumerate()
            .map(|(i, (k, tone_slot))| {
                let mut j = pairing[k];
                if flip {
                    j = count - 1 - j;
                }
                let noise_std = stratum(&mut rng, k, count, ln_lo, ln_hi, 0.25).exp();
                let offset = stratum(&mut rng, j, count, self.offset.0, self.offset.1, 0.25);
                let frequency = stratum(
                    &mut rng,
                    tone_slot,
                    count,
                    self.tone_band.0,
                    self.tone_band.1,
                    self.tone_jitter,
                );
                let ratio = stratum(&mut rng, k, count, self.tone_amplitude.0, self.tone_amplitude.1, 0.25);
                let amp = ratio * noise_std;
                let phase = uniform(&mut rng, 0.0, std::f64::consts::TAU);
                let seed = rng.random::<u64>();
                let p = SensorProfile {
                    sensor_id: format!("S{:02}", i + 1),
                    baseline: self.baseline,
                    offset,
                    noise_std,
                    tones: vec![Tone {
                        frequency,
                        amplitude: amp,
                        phase,
                    }],
                    seed,
                };
                p.validate()?;
                Ok(p)
            })
            .collect()
    }
}

/// Point in stratum `k` of `count` equal slices of `[lo, hi]`, at most
/// `jitter` slice widths from the slice centre.
fn stratum(rng: &mut ChaCha8Rng, k: usize, count: usize, lo: f64, hi: f64, jitter: f64) -> f64 {
    let width = (hi - lo) / count as f64;
    lo + (k as f64 + 0.5) * width + uniform(rng, -jitter, jitter) * width
}

fn shuffle(rng: &mut ChaCha8Rng, v: &mut [usize]) {
    for i in (1..v.len()).rev() {
        let j = rng.random_range(0..=i);
        v.swap(i, j);
    }
}

/// Offset stratum for each noise stratum, chosen so the closest pair of
/// sensors is as far apart as possible. Distances are measured in standard
/// errors of the chunk std and chunk mean at the default chunk length, so
/// noisy sensors, whose chunk means scatter more, get wider offset gaps.
/// Starts from a rank-1 lattice and improves it by pairwise swaps.
fn offset_pairing(n: usize, ln_std: (f64, f64), offset: (f64, f64)) -> Vec<usize> {
    if n < 3 {
        return (0..n).collect();
    }
    let l = crate::signal::DEFAULT_CHUNK_LEN as f64;
    let std_w = (ln_std.1 - ln_std.0) / n as f64;
    let off_w = (offset.1 - offset.0) / n as f64;
    let sigma = |k: usize| (ln_std.0 + (k as f64 + 0.5) * std_w).exp();
    let dist = |p: usize, q: usize, jp: usize, jq: usize| {
        let ds = (p.abs_diff(q) as f64 * std_w) * (2.0 * (l - 1.0)).sqrt();
        let d_o = (jp.abs_diff(jq) as f64 * off_w) * l.sqrt() / sigma(p.max(q));
        ds * ds + d_o * d_o
    };
    let score = |perm: &[usize]| {
        let mut d: Vec<f64> = Vec::with_capacity(n * (n - 1) / 2);
        for p in 0..n {
            for q in p + 1..n {
                d.push(dist(p, q, perm[p], perm[q]));
            }
        }
        d.sort_by(f64::total_cmp);
        d.truncate(n);
        d
    };
    let mult = (1..n)
        .filter(|&a| gcd(a, n) == 1)
        .max_by(|&a, &b| {
            let pa: Vec<usize> = (0..n).map(|k| (k * a) % n).collect();
            let pb: Vec<usize> = (0..n).map(|k| (k * b) % n).collect();
            score(&pa).partial_cmp(&score(&pb)).unwrap().then(b.cmp(&a))
        })
        .unwrap_or(1);
    let mut perm: Vec<usize> = (0..n).map(|k| (k * mult) % n).collect();
    let mut best = score(&perm);
    for _ in 0..200 {
        let mut improved = false;
        for p in 0..n {
            for q in p + 1..n {
                perm.swap(p, q);
                let s = score(&perm);
                if s > best {
                    best = s;
                    improved = true;
                } else {
                    perm.swap(p, q);
                }
            }
        }
        if !improved {
            break;
        }
    }
    perm
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 { a } else { gcd(b, a % b) }
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}
