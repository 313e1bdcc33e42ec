mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sensorprint::challenge::AdversaryKind;
use sensorprint::config::{Reference, RunConfig};
use sensorprint::signal::SegmentationScheme;

/// Sensor fingerprinting, attack simulation and challenge-response.
#[derive(Debug, Parser)]
#[command(name = "sensorprint", version)]
struct Cli {
    #[command(flatten)]
    tunables: Tunables,

    #[command(subcommand)]
    command: Command,
}

/// Settings shared by every subcommand. Flags override the config file.
#[derive(Debug, Args)]
struct Tunables {
    /// TOML run configuration (`config_version = 1`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    chunk_size: Option<usize>,
    /// Training fraction: 1/2, 1/3, 1/4, 1/5 or 1/10.
    #[arg(long, global = true)]
    scheme: Option<SegmentationScheme>,
    /// Noise reference: `mean` or a fixed setpoint.
    #[arg(long, global = true)]
    reference: Option<Reference>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// SVM penalty C.
    #[arg(long = "c", global = true)]
    c: Option<f64>,
    #[arg(long, global = true)]
    gamma: Option<f64>,
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    max_passes: Option<usize>,
    /// Energy test band width in standard deviations.
    #[arg(long, global = true)]
    energy_k: Option<f64>,
    #[arg(long, global = true)]
    saturation_eps: Option<f64>,
    /// Exit with status 3 when an attack or failed authentication is detected.
    #[arg(long, global = true)]
    fail_on_attack: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate readings from a scenario file or a sampled fleet.
    Simulate(SimulateArgs),
    /// Dump the per-chunk feature vectors of a readings file.
    Features(FeaturesArgs),
    /// Train and save a fingerprint model.
    Train(TrainArgs),
    /// Authenticate every chunk of a readings file against a model.
    Identify(IdentifyArgs),
    /// Identification accuracy, cross-validation or a chunk-size sweep.
    Evaluate(EvaluateArgs),
    /// Run a scenario's attacks and authenticate the attacked readings.
    Attack(AttackArgs),
    /// Run the challenge-response protocol against an adversary.
    Challenge(ChallengeArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Scenario TOML; without it a fleet is drawn from the default sampler.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Sensors to sample when no scenario is given.
    #[arg(long, default_value_t = 20)]
    sensors: usize,
    /// Samples per sensor when no scenario is given.
    #[arg(long, default_value_t = 10_800)]
    duration: usize,
    /// Write the attack-free readings instead of the attacked ones.
    #[arg(long)]
    clean: bool,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FeaturesArgs {
    #[arg(long)]
    readings: Option<PathBuf>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    readings: Option<PathBuf>,
    /// Where to save the model.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Train on every chunk instead of the training fraction.
    #[arg(long)]
    all_chunks: bool,
    /// Pick C and gamma by 3-fold grid search on the training data.
    #[arg(long)]
    grid: bool,
}

#[derive(Debug, Args)]
struct IdentifyArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    readings: Option<PathBuf>,
    /// Identity claimed for every series; defaults to each series' own id.
    #[arg(long)]
    claimed: Option<String>,
    /// Also run the energy test with a floor fitted on each series' first N chunks.
    #[arg(long, value_name = "N")]
    floor_chunks: Option<usize>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    readings: Option<PathBuf>,
    /// Sweep these chunk sizes (comma separated).
    #[arg(long, value_delimiter = ',')]
    chunk_sizes: Vec<usize>,
    /// Sweep these training fractions (comma separated).
    #[arg(long, value_delimiter = ',')]
    schemes: Vec<SegmentationScheme>,
    /// K-fold cross-validation on the training fraction instead of the held-out split.
    #[arg(long)]
    folds: Option<usize>,
    /// Pick C and gamma by 3-fold grid search on the training data first.
    #[arg(long)]
    grid: bool,
    /// Print `metric,class,value` records instead of a table.
    #[arg(long)]
    records: bool,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AttackArgs {
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Also run the energy test with a floor fitted on each series' first N chunks.
    #[arg(long, value_name = "N")]
    floor_chunks: Option<usize>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ChallengeArgs {
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, default_value = "none")]
    adversary: AdversaryKind,
    /// Run this many seeded trials and report rates instead of a single run.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

impl Tunables {
    fn resolve(&self) -> Result<RunConfig, commands::Failure> {
        let cfg = match &self.config {
            Some(path) => RunConfig::load_with(path, |cfg| self.apply(cfg))?,
            None => {
                let mut cfg = RunConfig::default();
                self.apply(&mut cfg);
                cfg.validate()?;
                cfg
            }
        };
        Ok(cfg)
    }

    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(v) = self.chunk_size {
            cfg.chunk_size = v;
        }
        if let Some(v) = self.scheme {
            cfg.scheme = v;
        }
        if let Some(v) = self.reference {
            cfg.reference = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.c {
            cfg.svm.c = v;
        }
        if let Some(v) = self.gamma {
            cfg.svm.gamma = v;
        }
        if let Some(v) = self.tol {
            cfg.svm.tol = v;
        }
        if let Some(v) = self.max_passes {
            cfg.svm.max_passes = v;
        }
        if let Some(v) = self.energy_k {
            cfg.detector.energy_k = v;
        }
        if let Some(v) = self.saturation_eps {
            cfg.detector.saturation_eps = v;
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = cli.tunables.resolve().and_then(|cfg| {
        let fail_on_attack = cli.tunables.fail_on_attack;
        match &cli.command {
            Command::Simulate(a) => commands::simulate(&cfg, a),
            Command::Features(a) => commands::features(&cfg, a),
            Command::Train(a) => commands::train(&cfg, a),
            Command::Identify(a) => commands::identify(&cfg, a),
            Command::Evaluate(a) => commands::evaluate(&cfg, a),
            Command::Attack(a) => commands::attack(&cfg, a),
            Command::Challenge(a) => commands::challenge(&cfg, a),
        }
        .and_then(|detected| {
            if detected && fail_on_attack {
                Err(commands::Failure::Detected)
            } else {
                Ok(())
            }
        })
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(commands::Failure::Detected) => ExitCode::from(3),
        Err(e) => {
            eprintln!("sensorprint: {e}");
            ExitCode::from(e.code())
        }
    }
}
