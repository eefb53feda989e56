//! Flat `key=value` experiment configuration with `#` comments, and the
//! mapping onto an [`ExperimentGrid`]. Keys are documented in the README;
//! unknown keys are rejected so typos fail loudly.

use crate::error::{Error, Result};
use crate::invert::EndpointRule;
use crate::mc::{ExperimentGrid, ModelSpec};
use crate::qmle::WeightRule;
use std::collections::BTreeMap;

/// Parsed configuration: ordered key -> raw value.
#[derive(Debug, Clone, Default)]
pub struct ConfigMap {
    entries: BTreeMap<String, String>,
}

/// Parses flat `key=value` text. `#` starts a comment (whole line or
/// trailing), blank lines are skipped, duplicate keys are an error.
pub fn parse_config_str(text: &str) -> Result<ConfigMap> {
    let mut entries = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected key=value, got '{line}'", lineno + 1))
        })?;
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() || key.chars().any(char::is_whitespace) {
            return Err(Error::Config(format!("line {}: bad key '{key}'", lineno + 1)));
        }
        if entries.insert(key.to_string(), value.to_string()).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key '{key}'", lineno + 1)));
        }
    }
    Ok(ConfigMap { entries })
}

impl ConfigMap {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>> {
        self.get(key)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| Error::Config(format!("key '{key}': '{v}' is not a number")))
            })
            .transpose()
    }

    pub fn get_usize(&self, key: &str) -> Result<Option<usize>> {
        self.get(key)
            .map(|v| {
                v.parse::<usize>()
                    .map_err(|_| Error::Config(format!("key '{key}': '{v}' is not a count")))
            })
            .transpose()
    }

    pub fn get_u64(&self, key: &str) -> Result<Option<u64>> {
        self.get(key)
            .map(|v| {
                v.parse::<u64>()
                    .map_err(|_| Error::Config(format!("key '{key}': '{v}' is not a seed")))
            })
            .transpose()
    }

    pub fn get_f64_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(|s| {
                        s.trim().parse::<f64>().map_err(|_| {
                            Error::Config(format!("key '{key}': '{s}' is not a number"))
                        })
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .transpose()
    }

    pub fn get_usize_list(&self, key: &str) -> Result<Option<Vec<usize>>> {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(|s| {
                        s.trim().parse::<usize>().map_err(|_| {
                            Error::Config(format!("key '{key}': '{s}' is not a count"))
                        })
                    })
                    .collect::<Result<Vec<usize>>>()
            })
            .transpose()
    }
}

const GRID_KEYS: &[&str] = &[
    "alpha",
    "t",
    "h",
    "epsilon_list",
    "k_list",
    "n_rep",
    "master_seed",
    "model",
    "theta0",
    "theta1",
    "x0",
    "weight",
    "lambda",
    "endpoint",
    "n_fine_per_h",
];

/// Builds an experiment grid from a config map, filling unset keys with the
/// defaults of the first benchmark experiment (`alpha=0.8, T=1, h=1e-2`).
pub fn grid_from_config(cfg: &ConfigMap) -> Result<ExperimentGrid> {
    for key in cfg.keys() {
        if !GRID_KEYS.contains(&key) {
            return Err(Error::Config(format!(
                "unknown key '{key}' (expected one of: {})",
                GRID_KEYS.join(", ")
            )));
        }
    }
    let theta0 = cfg.get_f64("theta0")?.unwrap_or(-1.0);
    let theta1 = cfg.get_f64("theta1")?.unwrap_or(1.0);
    let x0 = cfg.get_f64("x0")?.unwrap_or(0.0);
    let model = match cfg.get("model").unwrap_or("linear-affine") {
        "linear-affine" => ModelSpec::LinearAffine { theta_star: [theta0, theta1], x0 },
        "pure-noise" => ModelSpec::PureNoise { x0 },
        other => return Err(Error::Config(format!("unknown model '{other}'"))),
    };
    let weight = match cfg.get("weight").unwrap_or("identity") {
        "identity" => WeightRule::Identity,
        "inverse-diffusion" => {
            WeightRule::InverseDiffusion { lambda: cfg.get_f64("lambda")?.unwrap_or(1e-12) }
        }
        other => return Err(Error::Config(format!("unknown weight '{other}'"))),
    };
    let endpoint: EndpointRule = cfg.get("endpoint").unwrap_or("right").parse()?;
    let grid = ExperimentGrid {
        alpha: cfg.get_f64("alpha")?.unwrap_or(0.8),
        t_horizon: cfg.get_f64("t")?.unwrap_or(1.0),
        h: cfg.get_f64("h")?.unwrap_or(1e-2),
        epsilon_list: cfg.get_f64_list("epsilon_list")?.unwrap_or_else(|| vec![0.01]),
        k_list: cfg.get_usize_list("k_list")?.unwrap_or_else(|| vec![1]),
        n_rep: cfg.get_usize("n_rep")?.unwrap_or(1000),
        master_seed: cfg.get_u64("master_seed")?.unwrap_or(0),
        model,
        weight,
        endpoint,
        n_fine_per_h: cfg.get_usize("n_fine_per_h")?.unwrap_or(1),
    };
    grid.validate()?;
    Ok(grid)
}
