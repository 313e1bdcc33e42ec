//! Run configuration read from TOML.
//!
//! ```toml
//! config_version = 1
//! chunk_size = 120
//! scheme = "1/3"
//! reference = "mean"        # or a setpoint such as 100.0
//! seed = 7
//!
//! [svm]
//! c = 1.0
//! gamma = 0.125
//! tol = 1e-3
//! max_passes = 1000
//!
//! [detector]
//! energy_k = 3.0
//! saturation_eps = 1e-12
//!
//! [paths]
//! readings = "fleet.csv"
//! model = "fleet.model"
//! ```
//!
//! Every key is optional except `config_version`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifier::SvmParams;
use crate::detector::{DetectorSettings, DEFAULT_ENERGY_K, DEFAULT_SATURATION_EPS};
use crate::error::{Error, Result};
use crate::signal::{SegmentationScheme, DEFAULT_CHUNK_LEN, MIN_CHUNK_LEN};

pub const CONFIG_VERSION: u32 = 1;

/// How the per-series noise reference is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Reference {
    /// Mean of the whole series.
    #[default]
    Mean,
    /// A fixed setpoint.
    Setpoint(f64),
}

impl Reference {
    pub fn value(self) -> Option<f64> {
        match self {
            Reference::Mean => None,
            Reference::Setpoint(v) => Some(v),
        }
    }
}

impl std::str::FromStr for Reference {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "mean" {
            return Ok(Reference::Mean);
        }
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Reference::Setpoint(v)),
            _ => Err(Error::rejected(format!("reference must be `mean` or a finite number, got `{s}`"))),
        }
    }
}

impl Serialize for Reference {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Reference::Mean => s.serialize_str("mean"),
            Reference::Setpoint(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Reference {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Number(f64),
        }
        match Raw::deserialize(d)? {
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
            Raw::Number(v) if v.is_finite() => Ok(Reference::Setpoint(v)),
            Raw::Number(_) => Err(serde::de::Error::custom("reference must be finite")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmSection {
    pub c: f64,
    pub gamma: f64,
    pub tol: f64,
    pub max_passes: usize,
}

impl Default for SvmSection {
    fn default() -> Self {
        let d = SvmParams::default();
        SvmSection {
            c: d.c,
            gamma: d.gamma,
            tol: d.tol,
            max_passes: d.max_passes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSection {
    pub energy_k: f64,
    pub saturation_eps: f64,
}

impl Default for DetectorSection {
    fn default() -> Self {
        DetectorSection {
            energy_k: DEFAULT_ENERGY_K,
            saturation_eps: DEFAULT_SATURATION_EPS,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    pub readings: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub scenario: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub config_version: u32,
    pub chunk_size: usize,
    pub scheme: SegmentationScheme,
    pub reference: Reference,
    pub seed: u64,
    pub svm: SvmSection,
    pub detector: DetectorSection,
    pub paths: PathsSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            config_version: CONFIG_VERSION,
            chunk_size: DEFAULT_CHUNK_LEN,
            scheme: SegmentationScheme::Third,
            reference: Reference::Mean,
            seed: 0,
            svm: SvmSection::default(),
            detector: DetectorSection::default(),
            paths: PathsSection::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        Self::parse_with(text, origin, |_| {})
    }

    /// Parses, applies `overrides`, then validates. Invalid values still
    /// report the line of their key in `text`.
    pub fn parse_with(text: &str, origin: &Path, overrides: impl FnOnce(&mut RunConfig)) -> Result<Self> {
        let table: toml::Table = toml::from_str(text).map_err(|e| toml_error(text, origin, &e))?;
        if !table.contains_key("config_version") {
            return Err(Error::parse(origin, 1, "missing `config_version`"));
        }
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| toml_error(text, origin, &e))?;
        overrides(&mut cfg);
        cfg.check()
            .map_err(|(key, msg)| Error::parse(origin, key_line(text, key).unwrap_or(1), msg))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::load_with(path, |_| {})
    }

    pub fn load_with(path: &Path, overrides: impl FnOnce(&mut RunConfig)) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_with(&text, path, overrides)
    }

    pub fn validate(&self) -> Result<()> {
        self.check().map_err(|(_, msg)| Error::rejected(msg))
    }

    /// First invalid field as `(key, message)`.
    fn check(&self) -> std::result::Result<(), (&'static str, String)> {
        if self.config_version != CONFIG_VERSION {
            return Err((
                "config_version",
                format!("config_version {} is not supported (expected {CONFIG_VERSION})", self.config_version),
            ));
        }
        if self.chunk_size < MIN_CHUNK_LEN {
            return Err(("chunk_size", format!("chunk_size must be at least {MIN_CHUNK_LEN}")));
        }
        let s = &self.svm;
        for (key, v) in [("c", s.c), ("gamma", s.gamma), ("tol", s.tol)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err((key, format!("svm.{key} must be positive and finite")));
            }
        }
        if s.max_passes == 0 {
            return Err(("max_passes", "svm.max_passes must be positive".into()));
        }
        if !(self.detector.energy_k > 0.0 && self.detector.energy_k.is_finite()) {
            return Err(("energy_k", "detector.energy_k must be positive".into()));
        }
        if !(self.detector.saturation_eps >= 0.0 && self.detector.saturation_eps.is_finite()) {
            return Err(("saturation_eps", "detector.saturation_eps must be non-negative".into()));
        }
        Ok(())
    }

    pub fn svm_params(&self) -> SvmParams {
        SvmParams {
            c: self.svm.c,
            gamma: self.svm.gamma,
            tol: self.svm.tol,
            max_passes: self.svm.max_passes,
        }
    }

    pub fn detector_settings(&self) -> DetectorSettings {
        DetectorSettings {
            saturation_eps: self.detector.saturation_eps,
        }
    }
}

pub(crate) fn toml_error(text: &str, origin: &Path, e: &toml::de::Error) -> Error {
    let line = e
        .span()
        .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
        .unwrap_or(1);
    Error::parse(origin, line, e.message().to_string())
}

fn key_line(text: &str, key: &str) -> Option<usize> {
    text.lines()
        .position(|l| {
            l.trim_start()
                .strip_prefix(key)
                .is_some_and(|rest| rest.trim_start().starts_with('='))
        })
        .map(|i| i + 1)
}
