use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};

use kinred::dynamics::{CouplingConfig, InitialCondition, Model, Scenario};
use kinred::GridConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    VerifyBrackets,
    Simulate,
    ClosureCheck,
    BoundCheck,
    DemoBimodal,
    Decompose,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::VerifyBrackets => "verify-brackets",
            Self::Simulate => "simulate",
            Self::ClosureCheck => "closure-check",
            Self::BoundCheck => "bound-check",
            Self::DemoBimodal => "demo-bimodal",
            Self::Decompose => "decompose",
        }
    }
}

/// Pass thresholds, all loosened by `--tolerance-scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub bracket_rel: f64,
    pub refinement_gain: f64,
    pub decomposition_rel: f64,
    pub conservation_rel: f64,
    pub vlasov_energy_rel: f64,
    pub euler_energy_rel: f64,
    pub bound_slack: f64,
    pub clamp_fraction: f64,
    pub moment_match: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            bracket_rel: 1e-7,
            refinement_gain: 10.0,
            decomposition_rel: 1e-9,
            conservation_rel: 1e-9,
            vlasov_energy_rel: 1e-6,
            euler_energy_rel: 1e-4,
            bound_slack: 1e-12,
            clamp_fraction: 1e-10,
            moment_match: 1e-10,
        }
    }
}

impl Tolerances {
    fn scaled(&self, k: f64) -> Self {
        Self {
            bracket_rel: self.bracket_rel * k,
            refinement_gain: self.refinement_gain / k,
            decomposition_rel: self.decomposition_rel * k,
            conservation_rel: self.conservation_rel * k,
            vlasov_energy_rel: self.vlasov_energy_rel * k,
            euler_energy_rel: self.euler_energy_rel * k,
            bound_slack: self.bound_slack * k,
            clamp_fraction: self.clamp_fraction * k,
            moment_match: self.moment_match * k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BimodalConfig {
    pub shifts: Vec<f64>,
    pub width: f64,
}

impl Default for BimodalConfig {
    fn default() -> Self {
        Self { shifts: vec![1.0, 2.0, 4.0], width: 0.8 }
    }
}

/// Contents of a `--config` file. Every block is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub subcommand: Option<Command>,
    pub grid: Option<GridConfig>,
    pub scenario: Option<Scenario>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub trials: Option<usize>,
    #[serde(default)]
    pub tolerances: Tolerances,
    pub bimodal: Option<BimodalConfig>,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

/// Command-line overrides.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub command: Option<Command>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub tolerance_scale: Option<f64>,
}

/// Configuration after merging file, flags and defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub subcommand: Command,
    pub grid: GridConfig,
    pub scenario: Scenario,
    pub seed: u64,
    pub out: PathBuf,
    pub trials: Option<usize>,
    pub threads: usize,
    pub tolerances: Tolerances,
    pub bimodal: BimodalConfig,
}

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_OUT: &str = "kinred-out";

/// Free streaming of a random state over `t ∈ [0, 10]`.
pub fn default_scenario(grid: GridConfig, seed: u64) -> Scenario {
    Scenario {
        grid,
        initial: InitialCondition::Random { seed, trial: 0 },
        coupling: CouplingConfig::Neutral,
        model: Model::Kinetic,
        dt: 1.0 / 64.0,
        t_end: 10.0,
        sample_every: 32,
        entropy_order: 4,
    }
}

impl Resolved {
    /// A config file that reproduces this run at tolerance scale 1.
    pub fn to_run_config(&self) -> RunConfig {
        RunConfig {
            subcommand: Some(self.subcommand),
            grid: Some(self.grid),
            scenario: Some(self.scenario.clone()),
            seed: Some(self.seed),
            out: Some(self.out.clone()),
            trials: self.trials,
            tolerances: self.tolerances.clone(),
            bimodal: Some(self.bimodal.clone()),
        }
    }
}

pub fn resolve(file: RunConfig, flags: Overrides) -> anyhow::Result<Resolved> {
    let subcommand = match (flags.command, file.subcommand) {
        (Some(a), Some(b)) if a != b => {
            anyhow::bail!("subcommand {} conflicts with {} in the config file", a.name(), b.name())
        }
        (Some(a), _) | (None, Some(a)) => a,
        (None, None) => anyhow::bail!("no subcommand given"),
    };
    let scale = flags.tolerance_scale.unwrap_or(1.0);
    if !(scale > 0.0 && scale.is_finite()) {
        anyhow::bail!("tolerance scale must be positive, got {scale}");
    }
    let grid = file.grid.unwrap_or_default();
    grid.build::<f64>().context("invalid grid")?;
    if let Some(sc) = &file.scenario {
        sc.grid.build::<f64>().context("invalid scenario grid")?;
        sc.validate().context("invalid scenario")?;
    }
    if file.trials == Some(0) {
        anyhow::bail!("trials must be at least 1");
    }
    let bimodal = file.bimodal.unwrap_or_default();
    if bimodal.shifts.is_empty() {
        anyhow::bail!("bimodal.shifts is empty");
    }
    let threads = flags.threads.unwrap_or(1).max(1);
    let seed = flags.seed.or(file.seed).unwrap_or(DEFAULT_SEED);
    Ok(Resolved {
        subcommand,
        grid,
        scenario: file.scenario.unwrap_or_else(|| default_scenario(grid, seed)),
        seed,
        out: flags.out.or(file.out).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
        trials: file.trials,
        threads,
        tolerances: file.tolerances.scaled(scale),
        bimodal,
    })
}
