//! The eight-feature noise fingerprint of a chunk: five time-domain statistics
//! and three spectral statistics of its zero-padded DFT.

pub mod fft;

use crate::error::{Error, Result};
use crate::parallel::{self, Execution};
use crate::signal::{NoiseChunk, MIN_CHUNK_LEN};

pub const FEATURE_COUNT: usize = 8;

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] =
    ["mean", "std", "mad", "skew", "kurt", "sstd", "scentroid", "dc"];

/// One-sided magnitude spectrum; frequencies in cycles/sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub bin_freqs: Vec<f64>,
    pub magnitudes: Vec<f64>,
}

impl Spectrum {
    pub fn validate(&self) -> Result<()> {
        if self.bin_freqs.is_empty() || self.bin_freqs.len() != self.magnitudes.len() {
            return Err(Error::rejected("spectrum bins and magnitudes differ in length"));
        }
        if self.bin_freqs[0] != 0.0 {
            return Err(Error::rejected("spectrum must start at frequency 0"));
        }
        if self.magnitudes.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(Error::rejected("spectrum magnitudes must be finite and non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeFeatures {
    pub mean: f64,
    pub std_dev: f64,
    pub mean_abs_dev: f64,
    pub skewness: f64,
    pub kurtosis: f64,
    /// Zero standard deviation; skewness and kurtosis were set to 0.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralFeatures {
    pub spectral_std: f64,
    pub spectral_centroid: f64,
    pub dc_component: f64,
    /// All magnitudes were zero; centroid and spectral std were set to 0.
    pub degenerate: bool,
}

/// Fingerprint of one chunk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector {
    pub mean: f64,
    pub std_dev: f64,
    pub mean_abs_dev: f64,
    pub skewness: f64,
    /// Excess kurtosis.
    pub kurtosis: f64,
    pub spectral_std: f64,
    pub spectral_centroid: f64,
    pub dc_component: f64,
    pub degenerate: bool,
}

impl FeatureVector {
    pub fn to_array(&self) -> [f64; FEATURE_COUNT] {
        [
            self.mean,
            self.std_dev,
            self.mean_abs_dev,
            self.skewness,
            self.kurtosis,
            self.spectral_std,
            self.spectral_centroid,
            self.dc_component,
        ]
    }

    pub fn from_array(a: [f64; FEATURE_COUNT]) -> Self {
        FeatureVector {
            mean: a[0],
            std_dev: a[1],
            mean_abs_dev: a[2],
            skewness: a[3],
            kurtosis: a[4],
            spectral_std: a[5],
            spectral_centroid: a[6],
            dc_component: a[7],
            degenerate: false,
        }
    }
}

fn check_len(len: usize) -> Result<()> {
    if len < MIN_CHUNK_LEN {
        return Err(Error::insufficient(format!(
            "chunk has {len} samples, need at least {MIN_CHUNK_LEN}"
        )));
    }
    Ok(())
}

/// One-sided spectrum of the chunk zero-padded to the next power of two.
pub fn transform(chunk: &NoiseChunk) -> Result<Spectrum> {
    check_len(chunk.len())?;
    Ok(transform_values(&chunk.values))
}

pub(crate) fn transform_values(values: &[f64]) -> Spectrum {
    let coeffs = fft::fft_real_padded(values);
    let p = coeffs.len();
    let bins = p / 2 + 1;
    Spectrum {
        bin_freqs: (0..bins).map(|i| i as f64 / p as f64).collect(),
        magnitudes: coeffs[..bins].iter().map(|c| c.norm()).collect(),
    }
}

pub fn time_features(chunk: &NoiseChunk) -> Result<TimeFeatures> {
    check_len(chunk.len())?;
    Ok(time_features_of(&chunk.values))
}

fn time_features_of(x: &[f64]) -> TimeFeatures {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let ss: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    let std_dev = (ss / (n - 1.0)).sqrt();
    let mean_abs_dev = x.iter().map(|v| (v - mean).abs()).sum::<f64>() / n;
    if std_dev == 0.0 {
        return TimeFeatures {
            mean,
            std_dev: 0.0,
            mean_abs_dev,
            skewness: 0.0,
            kurtosis: 0.0,
            degenerate: true,
        };
    }
    // Population moments normalized by the Bessel-corrected deviation.
    let (m3, m4) = x.iter().fold((0.0, 0.0), |(a3, a4), v| {
        let z = (v - mean) / std_dev;
        let z2 = z * z;
        (a3 + z2 * z, a4 + z2 * z2)
    });
    TimeFeatures {
        mean,
        std_dev,
        mean_abs_dev,
        skewness: m3 / n,
        kurtosis: m4 / n - 3.0,
        degenerate: false,
    }
}

/// Centroid and RMS frequency weighted by magnitude over every bin, plus bin 0.
pub fn spectral_features(spectrum: &Spectrum) -> Result<SpectralFeatures> {
    spectrum.validate()?;
    Ok(spectral_features_of(spectrum))
}

fn spectral_features_of(spectrum: &Spectrum) -> SpectralFeatures {
    let (mut total, mut first, mut second) = (0.0, 0.0, 0.0);
    for (&f, &m) in spectrum.bin_freqs.iter().zip(&spectrum.magnitudes) {
        total += m;
        first += f * m;
        second += f * f * m;
    }
    let dc_component = spectrum.magnitudes[0];
    if total == 0.0 {
        return SpectralFeatures {
            spectral_std: 0.0,
            spectral_centroid: 0.0,
            dc_component,
            degenerate: true,
        };
    }
    SpectralFeatures {
        spectral_std: (second / total).sqrt(),
        spectral_centroid: first / total,
        dc_component,
        degenerate: false,
    }
}

pub fn extract(chunk: &NoiseChunk) -> Result<FeatureVector> {
    check_len(chunk.len())?;
    Ok(extract_values(&chunk.values))
}

pub(crate) fn extract_values(values: &[f64]) -> FeatureVector {
    let t = time_features_of(values);
    let s = spectral_features_of(&transform_values(values));
    FeatureVector {
        mean: t.mean,
        std_dev: t.std_dev,
        mean_abs_dev: t.mean_abs_dev,
        skewness: t.skewness,
        kurtosis: t.kurtosis,
        spectral_std: s.spectral_std,
        spectral_centroid: s.spectral_centroid,
        dc_component: s.dc_component,
        degenerate: t.degenerate || s.degenerate,
    }
}

/// Header of the features dump.
pub const FEATURES_HEADER: &str = "sensor_id,chunk_index,mean,std,mad,skew,kurt,sstd,scentroid,dc";

/// One features-dump line: `sensor_id,chunk_index` then the eight features.
pub fn dump_line(sensor_id: &str, chunk_index: usize, fv: &FeatureVector) -> String {
    let mut out = format!("{sensor_id},{chunk_index}");
    for v in fv.to_array() {
        out.push(',');
        out.push_str(&v.to_string());
    }
    out
}

/// Extracts every chunk, in order.
pub fn extract_all(chunks: &[NoiseChunk], exec: Execution) -> Result<Vec<FeatureVector>> {
    parallel::try_map(exec, chunks, extract)
}
