//! Experiment configuration files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum RunMode {
    Exact,
    Mc,
}

fn default_dims() -> usize {
    1
}

fn default_radii() -> Vec<f64> {
    vec![0.002, 0.004, 0.008, 0.016]
}

fn default_sizes() -> Vec<usize> {
    vec![0, 1, 3, 8]
}

/// Homogeneous renewal sweep: `n` processes sharing `G(T)` and `F(T)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenewalGrid {
    pub n: Vec<usize>,
    pub g: Vec<f64>,
    pub f: Vec<f64>,
}

/// One heterogeneous renewal case.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenewalCase {
    pub g: Vec<f64>,
    pub f: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BernoulliParams {
    pub vectors: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaternParams {
    pub nu: f64,
    #[serde(default = "default_dims")]
    pub dim: usize,
    #[serde(default = "default_radii")]
    pub radii: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenewalParams {
    #[serde(default)]
    pub grid: Option<RenewalGrid>,
    #[serde(default)]
    pub cases: Vec<RenewalCase>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteinFactorParams {
    /// Immigration intensity on each atom of the line carrier `{0, 1/k, ..}`.
    pub masses: Vec<f64>,
    #[serde(default = "default_sizes")]
    pub sizes: Vec<usize>,
    pub cases: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PalmParams {
    pub means: Vec<f64>,
    #[serde(default)]
    pub bernoulli: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "experiment", content = "params", rename_all = "kebab-case")]
pub enum Experiment {
    /// Bernoulli bounds for each probability vector, with exact `d_2` for short vectors.
    BernoulliBound(BernoulliParams),
    /// Matérn bound over a radius grid with the fitted log-log slope.
    MaternScaling(MaternParams),
    /// Closed-form renewal bound over a grid and explicit cases.
    RenewalBound(RenewalParams),
    /// Second differences of the Stein solution against the Stein factor.
    SteinFactor(SteinFactorParams),
    /// Campbell identity and Palm/shift comparison for truncated Poisson laws.
    PalmExact(PalmParams),
}

impl Experiment {
    pub const NAMES: [&'static str; 5] = ["bernoulli-bound", "matern-scaling", "renewal-bound", "stein-factor", "palm-exact"];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::BernoulliBound(_) => "bernoulli-bound",
            Experiment::MaternScaling(_) => "matern-scaling",
            Experiment::RenewalBound(_) => "renewal-bound",
            Experiment::SteinFactor(_) => "stein-factor",
            Experiment::PalmExact(_) => "palm-exact",
        }
    }
}

fn default_t_star() -> f64 {
    30.0
}

/// Configuration as read from disk; command-line flags override its fields.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: Option<u64>,
    pub reps: Option<usize>,
    pub t_star: f64,
    pub mode: Option<RunMode>,
    pub out: Option<PathBuf>,
}

/// Top level of a config file. `params` is checked against the experiment's
/// own struct afterwards so that error paths reach into it.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: String,
    #[serde(default)]
    params: serde_json::Value,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    reps: Option<usize>,
    #[serde(default = "default_t_star")]
    t_star: f64,
    #[serde(default)]
    mode: Option<RunMode>,
    #[serde(default)]
    out: Option<PathBuf>,
}

/// Configuration with every override applied and every required field present.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResolvedConfig {
    #[serde(flatten)]
    pub experiment: Experiment,
    pub seed: u64,
    pub reps: usize,
    pub t_star: f64,
    pub mode: RunMode,
}

pub struct Overrides {
    pub seed: Option<u64>,
    pub reps: Option<usize>,
    pub mode: Option<RunMode>,
    pub out: Option<PathBuf>,
}

fn path_error<E: std::fmt::Display>(prefix: &str, e: serde_path_to_error::Error<E>) -> CliError {
    let path = e.path().to_string();
    let at = match (prefix, path.as_str()) {
        (p, ".") => p.to_string(),
        ("", q) => q.to_string(),
        (p, q) => format!("{p}.{q}"),
    };
    CliError::Config(format!("at `{at}`: {}", e.inner()))
}

fn params<T: serde::de::DeserializeOwned>(v: serde_json::Value) -> Result<T, CliError> {
    let v = if v.is_null() { serde_json::Value::Object(Default::default()) } else { v };
    serde_path_to_error::deserialize(v).map_err(|e| path_error("params", e))
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| path_error("", e))?;
    let experiment = match raw.experiment.as_str() {
        "bernoulli-bound" => Experiment::BernoulliBound(params(raw.params)?),
        "matern-scaling" => Experiment::MaternScaling(params(raw.params)?),
        "renewal-bound" => Experiment::RenewalBound(params(raw.params)?),
        "stein-factor" => Experiment::SteinFactor(params(raw.params)?),
        "palm-exact" => Experiment::PalmExact(params(raw.params)?),
        other => {
            return Err(CliError::Config(format!(
                "at `experiment`: unknown experiment `{other}`; expected one of {:?}",
                Experiment::NAMES
            )))
        }
    };
    Ok(ExperimentConfig { experiment, seed: raw.seed, reps: raw.reps, t_star: raw.t_star, mode: raw.mode, out: raw.out })
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

impl ExperimentConfig {
    pub fn resolve(self, o: &Overrides) -> Result<(ResolvedConfig, PathBuf), CliError> {
        let seed = o
            .seed
            .or(self.seed)
            .ok_or_else(|| CliError::Config("a master seed is required (config `seed` or --seed)".into()))?;
        let reps = o.reps.or(self.reps).unwrap_or(1000);
        if reps == 0 {
            return Err(CliError::Config("at `reps`: must be at least 1".into()));
        }
        if self.t_star.is_nan() || self.t_star <= 0.0 {
            return Err(CliError::Config("at `t_star`: must be positive".into()));
        }
        let out = o.out.clone().or(self.out).unwrap_or_else(|| PathBuf::from("."));
        let mode = crate::experiments::effective_mode(&self.experiment, o.mode.or(self.mode))?;
        Ok((ResolvedConfig { experiment: self.experiment, seed, reps, t_star: self.t_star, mode }, out))
    }
}

impl ResolvedConfig {
    /// SHA-256 of the canonical JSON form, in lowercase hex.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config is plain data");
        Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}
