//! Run configuration: one JSON file, overridden field by field by command-line flags.

use std::fmt;
use std::path::{Path, PathBuf};

use cdvm::attribution::MsrConfig;
use cdvm::cdvm::KappaChoice;
use cdvm::dataset::LearnerSpec;
use serde::{Deserialize, Serialize};

/// A problem with the run configuration (exit code 2).
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

/// Parameters of a synthetic clustered dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenSpec {
    pub centers: Vec<Vec<f64>>,
    pub sizes: Vec<usize>,
    pub labels: Vec<usize>,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    pub test_sizes: Vec<usize>,
}

fn default_sigma() -> f64 {
    0.1
}

/// MSR settings; the learner and seed come from the top level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MsrSection {
    pub p: f64,
    pub num_models: usize,
}

impl Default for MsrSection {
    fn default() -> Self {
        let d = MsrConfig::default();
        Self { p: d.p, num_models: d.num_models }
    }
}

/// Every field is optional; unset fields fall back to flags, then to defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    /// Dataset CSV.
    pub data: Option<PathBuf>,
    /// Named dataset preset (`fig1`).
    pub preset: Option<String>,
    pub generate: Option<GenSpec>,
    /// Attribution matrix file.
    pub attribution: Option<PathBuf>,
    pub learner: Option<LearnerSpec>,
    pub msr: Option<MsrSection>,
    /// Retention fractions in (0, 1].
    pub levels: Option<Vec<f64>>,
    /// Absolute retention budgets.
    pub budgets: Option<Vec<usize>>,
    pub alpha: Option<Vec<f64>>,
    pub kappa: Option<Vec<KappaChoice>>,
    /// Number of benchmark seeds.
    pub seeds: Option<usize>,
    pub methods: Option<Vec<String>>,
    pub dataoob_bootstraps: Option<usize>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))
    }

    pub fn load_or_default(path: Option<&Path>) -> anyhow::Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }
}

/// Flag value if given, else the config value.
pub fn pick<T>(flag: Option<T>, config: &Option<T>) -> Option<T>
where
    T: Clone,
{
    flag.or_else(|| config.clone())
}

pub fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>, String>
where
    T::Err: fmt::Display,
{
    s.split(',').filter(|x| !x.trim().is_empty()).map(|x| x.trim().parse::<T>().map_err(|e| e.to_string())).collect()
}

/// `x,y;x,y;...` center lists.
pub fn parse_centers(s: &str) -> Result<Vec<Vec<f64>>, String> {
    s.split(';').map(parse_list::<f64>).collect()
}
