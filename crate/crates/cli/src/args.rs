use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use intermob::geo_flows::Direction;
use intermob::metrics::ImprovementConvention;
use intermob::models::{DecayKind, RadiationVariant};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const DEFAULT_WINDOWS: [usize; 5] = [5, 10, 15, 20, 25];

#[derive(Debug, Parser)]
#[command(name = "intermob", version, about = "Fit and evaluate origin-destination mobility flow models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit model parameters and write params.json.
    Fit(RunArgs),
    /// Score models per day and write scores.csv and summary.json.
    Evaluate(EvaluateArgs),
    /// Correlate aggregated flows with a reference series and write sync.json.
    Sync(SyncArgs),
    /// Generate a synthetic dataset from a TOML config.
    Gen(GenArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML file with defaults for any of these flags; flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub zones: Option<PathBuf>,
    #[arg(long)]
    pub flows: Option<PathBuf>,
    #[arg(long)]
    pub stringency: Option<PathBuf>,
    /// Comma-separated: gravity-exp, gravity-pow, radiation, cgm-exp, cgm-pow.
    #[arg(long, value_delimiter = ',')]
    pub models: Option<Vec<ModelName>>,
    /// full, incoming or outgoing. The latter two need --focus.
    #[arg(long)]
    pub direction: Option<Direction>,
    /// Zone id for egocentric analyses.
    #[arg(long)]
    pub focus: Option<String>,
    /// First day of the second period (default: 16th day of the panel).
    #[arg(long)]
    pub split_date: Option<NaiveDate>,
    /// Rescale gravity predictions to the observed daily total.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub normalize_totals: Option<bool>,
    #[arg(long)]
    pub radiation_denominator: Option<RadiationVariant>,
    /// One fit per model over all days instead of one per day.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub pooled: Option<bool>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Accepted for pipeline symmetry; fitting and scoring are deterministic.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (0 = one per core).
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub improvement_convention: Option<ImprovementConvention>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Previously written params.json; models are fitted inline when absent.
    #[arg(long)]
    pub params: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SyncArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// CSV with header `date,value`.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub windows: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GenArgs {
    /// Synthetic dataset config (TOML); built-in defaults when omitted.
    pub synth_config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelName {
    #[serde(rename = "gravity-exp")]
    GravityExp,
    #[serde(rename = "gravity-pow")]
    GravityPow,
    #[serde(rename = "radiation")]
    Radiation,
    #[serde(rename = "cgm-exp")]
    CgmExp,
    #[serde(rename = "cgm-pow")]
    CgmPow,
}

impl ModelName {
    pub const ALL: [ModelName; 5] =
        [ModelName::GravityExp, ModelName::GravityPow, ModelName::Radiation, ModelName::CgmExp, ModelName::CgmPow];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelName::GravityExp => "gravity-exp",
            ModelName::GravityPow => "gravity-pow",
            ModelName::Radiation => "radiation",
            ModelName::CgmExp => "cgm-exp",
            ModelName::CgmPow => "cgm-pow",
        }
    }

    pub fn decay(self) -> Option<DecayKind> {
        match self {
            ModelName::GravityExp | ModelName::CgmExp => Some(DecayKind::Exponential),
            ModelName::GravityPow | ModelName::CgmPow => Some(DecayKind::PowerLaw),
            ModelName::Radiation => None,
        }
    }

    pub fn is_gravity(self) -> bool {
        matches!(self, ModelName::GravityExp | ModelName::GravityPow)
    }

    pub fn is_cgm(self) -> bool {
        matches!(self, ModelName::CgmExp | ModelName::CgmPow)
    }
}

impl fmt::Display for ModelName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelName {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelName::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown model `{s}` (expected gravity-exp, gravity-pow, radiation, cgm-exp or cgm-pow)"))
    }
}

/// Contents of a `--config` file. Keys mirror the long flag names with
/// underscores.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    zones: Option<PathBuf>,
    flows: Option<PathBuf>,
    stringency: Option<PathBuf>,
    models: Option<Vec<ModelName>>,
    direction: Option<Direction>,
    focus: Option<String>,
    split_date: Option<NaiveDate>,
    normalize_totals: Option<bool>,
    radiation_denominator: Option<RadiationVariant>,
    pooled: Option<bool>,
    out: Option<PathBuf>,
    seed: Option<u64>,
    workers: Option<usize>,
    improvement_convention: Option<ImprovementConvention>,
    params: Option<PathBuf>,
    reference: Option<PathBuf>,
    windows: Option<Vec<usize>>,
}

impl FileConfig {
    fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: FileConfig =
            toml::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.zones,
            &mut cfg.flows,
            &mut cfg.stringency,
            &mut cfg.out,
            &mut cfg.params,
            &mut cfg.reference,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

/// Fully resolved settings for fit, evaluate and sync.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub zones: PathBuf,
    pub flows: PathBuf,
    pub stringency: Option<PathBuf>,
    pub models: Vec<ModelName>,
    pub direction: Direction,
    pub focus: Option<String>,
    pub split_date: Option<NaiveDate>,
    pub normalize_totals: bool,
    pub radiation_denominator: RadiationVariant,
    pub pooled: bool,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub workers: usize,
    pub improvement_convention: ImprovementConvention,
    pub params: Option<PathBuf>,
    pub reference: Option<PathBuf>,
    pub windows: Vec<usize>,
}

fn required(value: Option<PathBuf>, flag: &str) -> CliResult<PathBuf> {
    value.ok_or_else(|| CliError::input(format!("missing required input --{flag}")))
}

impl RunConfig {
    pub fn resolve(
        args: &RunArgs,
        params: Option<PathBuf>,
        reference: Option<PathBuf>,
        windows: Option<Vec<usize>>,
    ) -> CliResult<Self> {
        let file = match &args.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let a = args.clone();
        let models = a.models.or(file.models).unwrap_or_else(|| ModelName::ALL.to_vec());
        if models.is_empty() {
            return Err(CliError::input("--models must name at least one model"));
        }
        let mut seen = std::collections::BTreeSet::new();
        if let Some(m) = models.iter().find(|m| !seen.insert(**m)) {
            return Err(CliError::input(format!("model {m} listed twice in --models")));
        }
        let windows = windows.or(file.windows).unwrap_or_else(|| DEFAULT_WINDOWS.to_vec());
        if let Some(w) = windows.iter().find(|&&w| w < 2) {
            return Err(CliError::input(format!("window size {w} is smaller than 2")));
        }
        Ok(Self {
            zones: required(a.zones.or(file.zones), "zones")?,
            flows: required(a.flows.or(file.flows), "flows")?,
            stringency: a.stringency.or(file.stringency),
            models,
            direction: a.direction.or(file.direction).unwrap_or_default(),
            focus: a.focus.or(file.focus),
            split_date: a.split_date.or(file.split_date),
            normalize_totals: a.normalize_totals.or(file.normalize_totals).unwrap_or(true),
            radiation_denominator: a.radiation_denominator.or(file.radiation_denominator).unwrap_or_default(),
            pooled: a.pooled.or(file.pooled).unwrap_or(false),
            out: required(a.out.or(file.out), "out")?,
            seed: a.seed.or(file.seed),
            workers: a.workers.or(file.workers).unwrap_or(0),
            improvement_convention: a.improvement_convention.or(file.improvement_convention).unwrap_or_default(),
            params: params.or(file.params),
            reference: reference.or(file.reference),
            windows,
        })
    }
}
