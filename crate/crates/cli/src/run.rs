//! Run configuration: a model plus one section per subcommand.

use std::fs;
use std::path::{Path, PathBuf};

use polylife::calibrate::QLaw;
use polylife::config::{ModelConfig, PayoffConfig};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub model: Option<ModelConfig>,
    /// A model description in its own file, e.g. the output of `calibrate`.
    pub model_file: Option<PathBuf>,
    pub price: Option<PriceSection>,
    pub hedge: Option<HedgeSection>,
    pub simulate: Option<SimulateSection>,
    pub calibrate: Option<CalibrateSection>,
}

fn one() -> u64 {
    1
}

fn quad_nodes() -> usize {
    polylife::pricing::DEFAULT_QUAD_NODES
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriceSection {
    #[serde(default = "one")]
    pub policies: u64,
    #[serde(default)]
    pub deaths: u64,
    #[serde(default)]
    pub t: f64,
    /// Defaults to the initial state of the specification.
    pub state: Option<Vec<f64>>,
    pub maturities: Vec<f64>,
    #[serde(default = "quad_nodes")]
    pub quad_nodes: usize,
    pub payoffs: Vec<PayoffConfig>,
}

fn unit_payoff() -> String {
    "1".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HedgeSection {
    pub policies: u64,
    #[serde(default)]
    pub deaths: u64,
    #[serde(default)]
    pub t: f64,
    pub maturity: f64,
    pub paths: usize,
    pub dt: f64,
    /// Survival benefit `g` as polynomial text.
    #[serde(default = "unit_payoff")]
    pub payoff: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub paths: usize,
    pub dt: f64,
    pub horizon: f64,
    #[serde(default = "one_usize")]
    pub record_every: usize,
    #[serde(default)]
    pub dump: bool,
}

fn one_usize() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QLawName {
    Stationary,
    #[default]
    Filtered,
}

impl From<QLawName> for QLaw {
    fn from(q: QLawName) -> Self {
        match q {
            QLawName::Stationary => QLaw::Stationary,
            QLawName::Filtered => QLaw::Filtered,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSection {
    pub seed: Option<u64>,
    pub n_points: Option<usize>,
    pub sigma1: Option<f64>,
    pub sigma2: Option<f64>,
}

fn yes() -> bool {
    true
}

fn eight() -> usize {
    8
}

fn three() -> usize {
    3
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateSection {
    /// Observations CSV, relative to the config file.
    pub data: Option<PathBuf>,
    /// Generate the observations from the model instead of reading them.
    pub synthetic: Option<SyntheticSection>,
    /// Benchmark-inverse values are in basis points.
    #[serde(default)]
    pub bps: bool,
    /// Initial `σ₁`; defaults to the model's `sigma1`, else 2e-6.
    pub sigma1: Option<f64>,
    #[serde(default = "eight")]
    pub starts: usize,
    #[serde(default = "yes")]
    pub tie_alpha: bool,
    #[serde(default)]
    pub q_law: QLawName,
    #[serde(default = "yes")]
    pub update_gamma: bool,
    #[serde(default = "three")]
    pub gamma_rounds: usize,
    /// Monte Carlo replications of the RMSE study; 0 skips it.
    #[serde(default)]
    pub rmse: usize,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// The model description, read from `model_file` if given.
    pub fn model_config(&self, base: &Path) -> Result<ModelConfig, CliError> {
        match (&self.model, &self.model_file) {
            (Some(m), None) => Ok(m.clone()),
            (None, Some(f)) => {
                let path = base.join(f);
                let text = fs::read_to_string(&path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
            }
            _ => Err(CliError::Config("config needs exactly one of [model] and model_file".into())),
        }
    }
}

pub fn section<'a, T>(s: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
    s.as_ref().ok_or_else(|| CliError::Config(format!("config has no [{name}] section")))
}
