//! Subcommand bodies. Each returns whether an attack or failed
//! authentication was detected.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

use sensorprint::challenge::{
    enroll_joint, run_protocol, run_trials, verify, AdversaryKind, AdversaryModel,
};
use sensorprint::classifier::persist::{load_model, save_model};
use sensorprint::classifier::{self, LabeledDataset, MulticlassSvmModel, SvmParams};
use sensorprint::config::RunConfig;
use sensorprint::detector::{
    authenticate_with_floor, fit_noise_floor, format_verdict_log, AuthDecision, NoiseFloorProfile, Verdict,
};
use sensorprint::eval::{self, SweepCell};
use sensorprint::features::{self, FEATURES_HEADER};
use sensorprint::readings::{format_readings, read_readings};
use sensorprint::signal::{self, NoiseChunk, NoiseSeries, TimeSeries};
use sensorprint::simulator::{FleetSampler, PlantScenario};
use sensorprint::{Error, Execution};

use crate::{AttackArgs, ChallengeArgs, EvaluateArgs, FeaturesArgs, IdentifyArgs, SimulateArgs, TrainArgs};

const GRID_C: [f64; 3] = [1.0, 10.0, 100.0];
const GRID_GAMMA: [f64; 3] = [1.0 / 32.0, 1.0 / 8.0, 1.0 / 2.0];
const GRID_FOLDS: usize = 3;

#[derive(Debug)]
pub enum Failure {
    Core(Error),
    Write { path: PathBuf, source: std::io::Error },
    Usage(String),
    Detected,
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Core(Error::TrainingBudgetExceeded { .. } | Error::UndefinedSnr) => 4,
            Failure::Detected => 3,
            _ => 2,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Core(e) => write!(f, "{e}"),
            Failure::Write { path, source } => write!(f, "{}: {source}", path.display()),
            Failure::Usage(msg) => f.write_str(msg),
            Failure::Detected => f.write_str("attack detected"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type Outcome = Result<bool, Failure>;

fn required<'a>(flag: Option<&'a PathBuf>, config: &'a Option<PathBuf>, name: &str) -> Result<&'a Path, Failure> {
    flag.or(config.as_ref())
        .map(PathBuf::as_path)
        .ok_or_else(|| Failure::Usage(format!("no {name} path: pass --{name} or set paths.{name}")))
}

fn emit(out: Option<&PathBuf>, cfg: &RunConfig, text: &str) -> Result<(), Failure> {
    match out.or(cfg.paths.output.as_ref()) {
        Some(path) => std::fs::write(path, text).map_err(|source| Failure::Write {
            path: path.clone(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn noise_of(series: &TimeSeries, cfg: &RunConfig) -> Result<NoiseSeries, Error> {
    signal::extract_noise(series, cfg.reference.value())
}

fn chunks_of(series: &TimeSeries, cfg: &RunConfig) -> Result<Vec<NoiseChunk>, Error> {
    signal::chunk(&noise_of(series, cfg)?, cfg.chunk_size)
}

fn noise_map(readings: &[TimeSeries], cfg: &RunConfig) -> Result<BTreeMap<String, NoiseSeries>, Error> {
    readings
        .iter()
        .map(|s| Ok((s.sensor_id.clone(), noise_of(s, cfg)?)))
        .collect()
}

fn grid_params(train: &LabeledDataset, base: &SvmParams) -> Result<SvmParams, Error> {
    let g = eval::grid_search_with(train, &GRID_C, &GRID_GAMMA, GRID_FOLDS, base, Execution::default())?;
    eprintln!(
        "grid search: C = {}, gamma = {} ({}-fold accuracy {:.4})",
        g.c, g.gamma, GRID_FOLDS, g.report.acc_plain
    );
    Ok(SvmParams { c: g.c, gamma: g.gamma, ..*base })
}

pub fn simulate(cfg: &RunConfig, args: &SimulateArgs) -> Outcome {
    let scenario = match args.scenario.as_ref().or(cfg.paths.scenario.as_ref()) {
        Some(path) => PlantScenario::load(path)?,
        None => PlantScenario::sampled(&FleetSampler::default(), args.sensors, args.duration, cfg.seed)?,
    };
    let fleet = scenario.run()?;
    let series = if args.clean { &fleet.clean } else { &fleet.attacked };
    emit(args.out.as_ref(), cfg, &format_readings(series))?;
    eprintln!(
        "{} sensors, {} samples each, {} attacks applied",
        scenario.profiles.len(),
        scenario.duration,
        if args.clean { 0 } else { scenario.attacks.len() }
    );
    Ok(false)
}

pub fn features(cfg: &RunConfig, args: &FeaturesArgs) -> Outcome {
    let readings = read_readings(required(args.readings.as_ref(), &cfg.paths.readings, "readings")?)?;
    let mut out = format!("{FEATURES_HEADER}\n");
    for series in &readings {
        let chunks = chunks_of(series, cfg)?;
        for (c, fv) in chunks.iter().zip(features::extract_all(&chunks, Execution::default())?) {
            let _ = writeln!(out, "{}", features::dump_line(&c.sensor_id, c.chunk_index, &fv));
        }
    }
    emit(args.out.as_ref(), cfg, &out)?;
    Ok(false)
}

pub fn train(cfg: &RunConfig, args: &TrainArgs) -> Outcome {
    let readings = read_readings(required(args.readings.as_ref(), &cfg.paths.readings, "readings")?)?;
    let model_path = required(args.model.as_ref(), &cfg.paths.model, "model")?;
    let mut data = LabeledDataset::default();
    for series in &readings {
        let chunks = chunks_of(series, cfg)?;
        let used = if args.all_chunks {
            chunks
        } else {
            signal::segment(&chunks, cfg.scheme)?.0
        };
        for fv in features::extract_all(&used, Execution::default())? {
            data.push_features(&fv, series.sensor_id.clone());
        }
    }
    let base = cfg.svm_params();
    let params = if args.grid { grid_params(&data, &base)? } else { base };
    let model = classifier::train(&data, &params)?;
    save_model(&model, model_path)?;
    eprintln!(
        "trained {} classes on {} chunks (C = {}, gamma = {}), saved to {}",
        model.classes.len(),
        data.len(),
        params.c,
        params.gamma,
        model_path.display()
    );
    Ok(false)
}

fn decide(
    model: &MulticlassSvmModel,
    chunks: &[NoiseChunk],
    claimed: &str,
    floor_chunks: Option<usize>,
    cfg: &RunConfig,
) -> Result<Vec<AuthDecision>, Error> {
    let floor: Option<NoiseFloorProfile> = match floor_chunks {
        Some(n) => Some(fit_noise_floor(&chunks[..n.min(chunks.len())])?.with_k(cfg.detector.energy_k)),
        None => None,
    };
    let settings = cfg.detector_settings();
    chunks
        .iter()
        .map(|c| authenticate_with_floor(model, floor.as_ref(), c, claimed, &settings))
        .collect()
}

fn tally(decisions: &[AuthDecision]) -> String {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for d in decisions {
        *counts.entry(d.verdict.as_str()).or_default() += 1;
    }
    counts
        .iter()
        .map(|(k, v)| format!("{k} {v}"))
        .collect::<Vec<_>>()
        .join(", ")
}

pub fn identify(cfg: &RunConfig, args: &IdentifyArgs) -> Outcome {
    let model = load_model(required(args.model.as_ref(), &cfg.paths.model, "model")?)?;
    let readings = read_readings(required(args.readings.as_ref(), &cfg.paths.readings, "readings")?)?;
    let mut all = Vec::new();
    for series in &readings {
        let claimed = args.claimed.as_deref().unwrap_or(&series.sensor_id);
        let decisions = decide(&model, &chunks_of(series, cfg)?, claimed, args.floor_chunks, cfg)?;
        eprintln!("{} claimed as {claimed}: {}", series.sensor_id, tally(&decisions));
        all.extend(decisions);
    }
    emit(args.out.as_ref(), cfg, &format_verdict_log(&all))?;
    Ok(all.iter().any(|d| !d.verdict.is_authentic()))
}

pub fn evaluate(cfg: &RunConfig, args: &EvaluateArgs) -> Outcome {
    let readings = read_readings(required(args.readings.as_ref(), &cfg.paths.readings, "readings")?)?;
    let noise = noise_map(&readings, cfg)?;
    let base = cfg.svm_params();
    let params = if args.grid {
        let (train, _) = eval::build_split(&noise, cfg.chunk_size, cfg.scheme)?;
        grid_params(&train, &base)?
    } else {
        base
    };

    let text = if !args.chunk_sizes.is_empty() || !args.schemes.is_empty() {
        let sizes = if args.chunk_sizes.is_empty() { vec![cfg.chunk_size] } else { args.chunk_sizes.clone() };
        let schemes = if args.schemes.is_empty() { vec![cfg.scheme] } else { args.schemes.clone() };
        let cells: Vec<SweepCell> = eval::sweep(&noise, &sizes, &schemes, &params)?;
        if args.records {
            cells
                .iter()
                .map(|c| format!("acc_plain,{}@{},{}\n", c.chunk_size, c.scheme, c.acc_plain))
                .collect()
        } else {
            eval::format_sweep(&cells)
        }
    } else {
        let report = match args.folds {
            Some(k) => {
                let (train, _) = eval::build_split(&noise, cfg.chunk_size, cfg.scheme)?;
                eval::cross_validate(&train, k, &params)?
            }
            None => eval::identification_run(&noise, cfg.chunk_size, cfg.scheme, &params, Execution::default())?,
        };
        if args.records {
            report.records()
        } else {
            report.table()
        }
    };
    emit(args.out.as_ref(), cfg, &text)?;
    Ok(false)
}

pub fn attack(cfg: &RunConfig, args: &AttackArgs) -> Outcome {
    let scenario = PlantScenario::load(required(args.scenario.as_ref(), &cfg.paths.scenario, "scenario")?)?;
    let model = load_model(required(args.model.as_ref(), &cfg.paths.model, "model")?)?;
    let fleet = scenario.run()?;
    let mut all = Vec::new();
    let mut by_sensor: BTreeMap<&str, Vec<AuthDecision>> = BTreeMap::new();
    for series in &fleet.attacked {
        let decisions = decide(&model, &chunks_of(series, cfg)?, &series.sensor_id, args.floor_chunks, cfg)?;
        all.extend(decisions.iter().cloned());
        by_sensor.insert(&series.sensor_id, decisions);
    }
    emit(args.out.as_ref(), cfg, &format_verdict_log(&all))?;

    let l = cfg.chunk_size;
    for a in &scenario.attacks {
        let inside: Vec<&AuthDecision> = by_sensor[a.sensor.as_str()]
            .iter()
            .filter(|d| d.chunk_index * l >= a.spec.start && (d.chunk_index + 1) * l <= a.spec.end)
            .collect();
        let flagged = inside.iter().filter(|d| !d.verdict.is_authentic()).count();
        let saturated = inside.iter().filter(|d| d.verdict == Verdict::Saturated).count();
        eprintln!(
            "{} on {} over [{}, {}): {flagged}/{} window chunks flagged ({saturated} saturated)",
            a.spec.kind.code(),
            a.sensor,
            a.spec.start,
            a.spec.end,
            inside.len()
        );
    }
    eprintln!("all chunks: {}", tally(&all));
    Ok(all.iter().any(|d| !d.verdict.is_authentic()))
}

pub fn challenge(cfg: &RunConfig, args: &ChallengeArgs) -> Outcome {
    let scenario = PlantScenario::load(required(args.scenario.as_ref(), &cfg.paths.scenario, "scenario")?)?;
    let (settings, profile) = scenario.challenge_target()?;
    let setup = settings.setup(profile.clone())?;
    let joint = enroll_joint(&setup, &cfg.svm_params())?;
    if let Some(w) = &joint.warning {
        eprintln!("warning: {w}");
    }
    let adversary = match args.adversary {
        AdversaryKind::None => AdversaryModel::none(),
        AdversaryKind::Replay => AdversaryModel::replay(),
        AdversaryKind::Adaptive => AdversaryModel::adaptive(settings.learning_delay()),
    };

    let mut out = String::new();
    let _ = writeln!(out, "sensor {}", setup.sensor.sensor_id);
    let _ = writeln!(out, "adversary {}", args.adversary);
    let _ = writeln!(out, "reclassification accuracy {:.4}", joint.reclassification_accuracy);
    let failed = if let Some(n) = args.trials {
        let summary = run_trials(&joint, &setup, &adversary, n, cfg.seed, Execution::default())?;
        let _ = writeln!(out, "trials {}", summary.trials());
        let _ = writeln!(out, "pass rate {:.4}", summary.pass_rate());
        let _ = writeln!(out, "fail rate {:.4}", summary.fail_rate());
        summary.passed.iter().any(|p| !p)
    } else {
        let schedule = setup.schedule(cfg.seed)?;
        let reported = run_protocol(&setup, &schedule, &adversary)?;
        let v = verify(&joint, &reported, &schedule)?;
        let _ = writeln!(
            out,
            "schedule t {} delta {} seed {}",
            schedule.t, schedule.delta, schedule.seed
        );
        let _ = writeln!(out, "result {}", if v.passed() { "pass" } else { "fail" });
        let _ = writeln!(out, "chunks checked {}, excluded {}", v.verdicts.len(), v.excluded.len());
        for c in v.offending() {
            let _ = writeln!(out, "offending chunk at {}: expected {}, got {}", c.start, c.expected, c.predicted);
        }
        !v.passed()
    };
    emit(args.out.as_ref(), cfg, &out)?;
    Ok(failed)
}
