//! Sensor time series, noise extraction, chunking and train/test segmentation.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest chunk accepted anywhere in the pipeline.
pub const MIN_CHUNK_LEN: usize = 8;

/// Default chunk size: two minutes of 1 Hz readings.
pub const DEFAULT_CHUNK_LEN: usize = 120;

/// Uniformly sampled readings of one sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub sensor_id: String,
    /// Seconds between consecutive samples.
    pub sampling_interval: f64,
    pub start_time: i64,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(
        sensor_id: impl Into<String>,
        sampling_interval: f64,
        start_time: i64,
        values: Vec<f64>,
    ) -> Result<Self> {
        let series = TimeSeries {
            sensor_id: sensor_id.into(),
            sampling_interval,
            start_time,
            values,
        };
        series.validate()?;
        Ok(series)
    }

    /// A 1 Hz series starting at time 0.
    pub fn at_1hz(sensor_id: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        Self::new(sensor_id, 1.0, 0, values)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::rejected(format!("series `{}` is empty", self.sensor_id)));
        }
        if !(self.sampling_interval > 0.0 && self.sampling_interval.is_finite()) {
            return Err(Error::rejected(format!(
                "series `{}` has non-positive sampling interval {}",
                self.sensor_id, self.sampling_interval
            )));
        }
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::rejected(format!(
                "series `{}` has non-finite value at sample {i}",
                self.sensor_id
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// A noise series together with the reference that was subtracted from the raw readings.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSeries {
    pub series: TimeSeries,
    pub reference: f64,
}

/// A fixed-length window of noise samples.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseChunk {
    pub sensor_id: String,
    pub chunk_index: usize,
    pub values: Vec<f64>,
    pub reference: f64,
}

impl NoiseChunk {
    /// Builds a chunk directly from values (no reference subtracted).
    pub fn from_values(sensor_id: impl Into<String>, chunk_index: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() < MIN_CHUNK_LEN {
            return Err(Error::insufficient(format!(
                "chunk has {} samples, need at least {MIN_CHUNK_LEN}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::rejected("chunk contains non-finite values"));
        }
        Ok(NoiseChunk {
            sensor_id: sensor_id.into(),
            chunk_index,
            values,
            reference: 0.0,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Fraction of a sensor's chunks used for training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SegmentationScheme {
    Half,
    Third,
    Quarter,
    Fifth,
    Tenth,
}

impl SegmentationScheme {
    pub const ALL: [SegmentationScheme; 5] = [
        SegmentationScheme::Half,
        SegmentationScheme::Third,
        SegmentationScheme::Quarter,
        SegmentationScheme::Fifth,
        SegmentationScheme::Tenth,
    ];

    pub fn denominator(self) -> usize {
        match self {
            SegmentationScheme::Half => 2,
            SegmentationScheme::Third => 3,
            SegmentationScheme::Quarter => 4,
            SegmentationScheme::Fifth => 5,
            SegmentationScheme::Tenth => 10,
        }
    }

    pub fn train_fraction(self) -> f64 {
        1.0 / self.denominator() as f64
    }

    pub fn from_denominator(d: usize) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.denominator() == d)
    }

    /// Number of training chunks out of `m`: `ceil(m / d)`.
    pub fn train_count(self, m: usize) -> usize {
        m.div_ceil(self.denominator())
    }
}

impl fmt::Display for SegmentationScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "1/{}", self.denominator())
    }
}

impl std::str::FromStr for SegmentationScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let denom = s.strip_prefix("1/").unwrap_or(s);
        denom
            .parse::<usize>()
            .ok()
            .and_then(Self::from_denominator)
            .ok_or_else(|| {
                Error::rejected(format!(
                    "unknown segmentation scheme `{s}` (expected one of 1/2, 1/3, 1/4, 1/5, 1/10)"
                ))
            })
    }
}

impl TryFrom<String> for SegmentationScheme {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SegmentationScheme> for String {
    fn from(s: SegmentationScheme) -> String {
        s.to_string()
    }
}

/// Subtracts `reference` (or the series mean when `None`) from every sample.
pub fn extract_noise(series: &TimeSeries, reference: Option<f64>) -> Result<NoiseSeries> {
    series.validate()?;
    let reference = match reference {
        Some(r) if !r.is_finite() => return Err(Error::rejected("noise reference is not finite")),
        Some(r) => r,
        None => series.mean(),
    };
    let values = series.values.iter().map(|v| v - reference).collect();
    Ok(NoiseSeries {
        series: TimeSeries {
            values,
            ..series.clone()
        },
        reference,
    })
}

/// Splits a noise series into `floor(N / L)` consecutive chunks, dropping the tail.
pub fn chunk(noise: &NoiseSeries, chunk_size: usize) -> Result<Vec<NoiseChunk>> {
    chunk_values(&noise.series.sensor_id, &noise.series.values, chunk_size, noise.reference)
}

pub(crate) fn chunk_values(
    sensor_id: &str,
    values: &[f64],
    chunk_size: usize,
    reference: f64,
) -> Result<Vec<NoiseChunk>> {
    if chunk_size < MIN_CHUNK_LEN {
        return Err(Error::insufficient(format!(
            "chunk size {chunk_size} is below the minimum of {MIN_CHUNK_LEN}"
        )));
    }
    if values.len() < chunk_size {
        return Err(Error::insufficient(format!(
            "series `{sensor_id}` has {} samples, fewer than one chunk of {chunk_size}",
            values.len()
        )));
    }
    Ok(values
        .chunks_exact(chunk_size)
        .enumerate()
        .map(|(chunk_index, window)| NoiseChunk {
            sensor_id: sensor_id.to_string(),
            chunk_index,
            values: window.to_vec(),
            reference,
        })
        .collect())
}

/// Prefix split: the first `ceil(m / d)` chunks (by index) train, the rest test.
pub fn segment(
    chunks: &[NoiseChunk],
    scheme: SegmentationScheme,
) -> Result<(Vec<NoiseChunk>, Vec<NoiseChunk>)> {
    if chunks.len() < 2 {
        return Err(Error::insufficient(format!(
            "segmentation needs at least 2 chunks, got {}",
            chunks.len()
        )));
    }
    let mut ordered = chunks.to_vec();
    ordered.sort_by_key(|c| c.chunk_index);
    let n_train = scheme.train_count(ordered.len());
    let test = ordered.split_off(n_train);
    Ok((ordered, test))
}
