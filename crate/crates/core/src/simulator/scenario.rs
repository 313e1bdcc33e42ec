//! Plant scenarios: a fleet of sensor profiles plus attacks, loadable from TOML.
//!
//! ```toml
//! master_seed = 42
//! duration = 10800            # samples at 1 Hz
//!
//! [fleet]                     # optional: draw `count` profiles S01.. from the default sampler
//! count = 20
//! baseline = 100.0            # any FleetSampler field may be overridden
//!
//! [[sensors]]                 # optional explicit profiles
//! sensor_id = "LIT101"
//! baseline = 50.0
//! offset = 0.01
//! noise_std = 0.1
//! seed = 7
//! tones = [{ frequency = 0.1, amplitude = 0.05, phase = 0.0 }]
//!
//! [[attacks]]
//! sensor = "S03"
//! scenario = "S3_saturation"
//! start = 3600
//! end = 7200
//! value = 100.0
//!
//! [challenge]                 # optional challenge-response settings
//! sensor = "S01"
//! chunk_size = 120
//! challenger = { amplitude_fraction = 0.01, tones = [{ frequency = 0.137, amplitude = 1.0 }] }
//! ```

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{apply_attack, generate, AttackSpec, FleetSampler, SensorProfile};
use crate::challenge::ChallengeSettings;
use crate::config::toml_error;
use crate::error::{Error, Result};
use crate::parallel::{self, Execution};
use crate::signal::TimeSeries;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FleetSection {
    count: usize,
    #[serde(flatten)]
    sampler: FleetSampler,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackEntry {
    pub sensor: String,
    #[serde(flatten)]
    pub spec: AttackSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    master_seed: u64,
    duration: usize,
    #[serde(default)]
    fleet: Option<FleetSection>,
    #[serde(default)]
    sensors: Vec<SensorProfile>,
    #[serde(default)]
    attacks: Vec<AttackEntry>,
    #[serde(default)]
    challenge: Option<ChallengeSettings>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantScenario {
    pub master_seed: u64,
    /// Samples per sensor.
    pub duration: usize,
    pub profiles: Vec<SensorProfile>,
    pub attacks: Vec<AttackEntry>,
    pub challenge: Option<ChallengeSettings>,
}

impl PlantScenario {
    /// An attack-free fleet drawn from `sampler`.
    pub fn sampled(sampler: &FleetSampler, count: usize, duration: usize, master_seed: u64) -> Result<Self> {
        let s = PlantScenario {
            master_seed,
            duration,
            profiles: sampler.sample(count, master_seed)?,
            attacks: Vec::new(),
            challenge: None,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| toml_error(text, origin, &e))?;
        let mut profiles = match &file.fleet {
            Some(f) => f.sampler.sample(f.count, file.master_seed)?,
            None => Vec::new(),
        };
        profiles.extend(file.sensors);
        let s = PlantScenario {
            master_seed: file.master_seed,
            duration: file.duration,
            profiles,
            attacks: file.attacks,
            challenge: file.challenge,
        };
        s.validate().map_err(|e| Error::parse(origin, 1, e.to_string()))?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn validate(&self) -> Result<()> {
        if self.duration == 0 {
            return Err(Error::rejected("scenario duration must be positive"));
        }
        if self.profiles.is_empty() {
            return Err(Error::rejected("scenario has no sensors"));
        }
        let mut ids = BTreeSet::new();
        for p in &self.profiles {
            p.validate()?;
            if !ids.insert(p.sensor_id.as_str()) {
                return Err(Error::rejected(format!("duplicate sensor id `{}`", p.sensor_id)));
            }
        }
        for a in &self.attacks {
            if !ids.contains(a.sensor.as_str()) {
                return Err(Error::rejected(format!("attack targets unknown sensor `{}`", a.sensor)));
            }
            if let Some(p) = a.spec.kind.partner() {
                if !ids.contains(p) || p == a.sensor {
                    return Err(Error::rejected(format!("invalid swap partner `{p}`")));
                }
            }
            a.spec.validate(self.duration)?;
        }
        if let Some(c) = &self.challenge {
            c.validate()?;
            if let Some(id) = &c.sensor {
                if !ids.contains(id.as_str()) {
                    return Err(Error::rejected(format!("challenge targets unknown sensor `{id}`")));
                }
            }
        }
        Ok(())
    }

    /// Settings and target profile for the challenge protocol.
    pub fn challenge_target(&self) -> Result<(ChallengeSettings, &SensorProfile)> {
        let settings = self.challenge.clone().unwrap_or_default();
        let profile = match &settings.sensor {
            Some(id) => self
                .profile(id)
                .ok_or_else(|| Error::rejected(format!("challenge targets unknown sensor `{id}`")))?,
            None => &self.profiles[0],
        };
        Ok((settings, profile))
    }

    pub fn profile(&self, id: &str) -> Option<&SensorProfile> {
        self.profiles.iter().find(|p| p.sensor_id == id)
    }

    pub fn run(&self) -> Result<Fleet> {
        self.run_with(Execution::default())
    }

    /// Generates every sensor, then applies the attacks in listed order.
    pub fn run_with(&self, exec: Execution) -> Result<Fleet> {
        self.validate()?;
        let clean = parallel::try_map(exec, &self.profiles, |p| generate(p, self.duration))?;
        let mut attacked = clean.clone();
        let index = |id: &str| {
            self.profiles
                .iter()
                .position(|p| p.sensor_id == id)
                .expect("attack targets were validated")
        };
        for a in &self.attacks {
            let v = index(&a.sensor);
            let p = a.spec.kind.partner().map(index);
            let out = apply_attack(&attacked[v], p.map(|i| &attacked[i]), &a.spec)?;
            attacked[v] = out.victim;
            if let (Some(i), Some(series)) = (p, out.partner) {
                attacked[i] = series;
            }
        }
        Ok(Fleet { clean, attacked })
    }
}

/// Generated readings, before and after attacks, in profile order.
#[derive(Debug, Clone, PartialEq)]
pub struct Fleet {
    pub clean: Vec<TimeSeries>,
    pub attacked: Vec<TimeSeries>,
}

impl Fleet {
    pub fn clean_series(&self, id: &str) -> Option<&TimeSeries> {
        self.clean.iter().find(|s| s.sensor_id == id)
    }

    pub fn attacked_series(&self, id: &str) -> Option<&TimeSeries> {
        self.attacked.iter().find(|s| s.sensor_id == id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::AttackKind;

    const TEXT: &str = r#"
master_seed = 42
duration = 1200

[fleet]
count = 3
baseline = 50.0

[[sensors]]
sensor_id = "LIT101"
baseline = 50.0
offset = 0.01
noise_std = 0.1
seed = 7
tones = [{ frequency = 0.1, amplitude = 0.05 }]

[[attacks]]
sensor = "S02"
scenario = "S3_saturation"
start = 600
end = 1200
value = 50.0

[[attacks]]
sensor = "S01"
scenario = "S2_swap"
partner = "LIT101"
start = 0
end = 240
"#;

    #[test]
    fn parses_and_runs() {
        let s = PlantScenario::parse(TEXT, Path::new("s.toml")).unwrap();
        assert_eq!(s.profiles.len(), 4);
        assert_eq!(s.profiles[3].sensor_id, "LIT101");
        assert_eq!(s.profiles[0].baseline, 50.0);
        assert!(matches!(s.attacks[0].spec.kind, AttackKind::Saturation { value } if value == 50.0));
        let fleet = s.run().unwrap();
        let sat = fleet.attacked_series("S02").unwrap();
        assert!(sat.values[600..].iter().all(|&v| v == 50.0));
        let s01 = fleet.attacked_series("S01").unwrap();
        let lit = fleet.clean_series("LIT101").unwrap();
        assert_eq!(&s01.values[..240], &lit.values[..240]);
        assert_eq!(fleet, s.run_with(Execution::Sequential).unwrap());
    }

    #[test]
    fn errors_carry_lines() {
        let bad = TEXT.replace("duration = 1200", "duration = \"x\"");
        let err = PlantScenario::parse(&bad, Path::new("s.toml")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let unknown = TEXT.replace("sensor = \"S02\"", "sensor = \"S99\"");
        assert!(PlantScenario::parse(&unknown, Path::new("s.toml")).is_err());
        let dup = TEXT.replace("LIT101", "S01");
        assert!(PlantScenario::parse(&dup, Path::new("s.toml")).is_err());
    }
}
