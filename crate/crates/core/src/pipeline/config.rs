//! Flat `key = value` run configuration with named dataset presets.
//!
//! Blank lines and `#` comments are ignored. A `preset` line is applied
//! first wherever it appears; every other key then overrides it. Real values
//! accept the power form `2^-6`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{AsrcError, ConfigError, Result};
use crate::rcc::Metric;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Asrc,
    Asrc1,
    Asrc2,
    Adagae,
    Rcc,
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "asrc" => Ok(Variant::Asrc),
            "asrc1" => Ok(Variant::Asrc1),
            "asrc2" => Ok(Variant::Asrc2),
            "adagae" => Ok(Variant::Adagae),
            "rcc" => Ok(Variant::Rcc),
            other => Err(format!("unknown variant `{other}`")),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Variant::Asrc => "asrc",
            Variant::Asrc1 => "asrc1",
            Variant::Asrc2 => "asrc2",
            Variant::Adagae => "adagae",
            Variant::Rcc => "rcc",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub preset: Option<String>,
    /// Initial sparsity.
    pub k0: usize,
    /// Sparsity increment per graph level.
    pub s: usize,
    /// Number of sparsity levels.
    #[serde(rename = "T1")]
    pub t1: usize,
    /// Train / re-sync rounds per level.
    #[serde(rename = "T2")]
    pub t2: usize,
    pub lambda2: f64,
    pub beta: f64,
    pub tau: f64,
    pub noise_std: f64,
    pub eta: f64,
    pub inner_steps: usize,
    /// Maximum RCC sweeps.
    #[serde(rename = "T3")]
    pub t3: usize,
    /// RCC refresh interval.
    pub t: usize,
    /// Merge threshold, zero for automatic.
    pub delta: f64,
    pub pca_components: usize,
    pub metric: Metric,
    pub variant: Variant,
    /// Training/clustering rounds, counting the first.
    pub rounds: usize,
    pub seed: u64,
    /// Encoder widths, `d-H-O`.
    #[serde(rename = "struct")]
    pub structure: String,
    /// Neighbours for the mutual-kNN baseline.
    pub knn_k: usize,
    /// Cluster count for the k-means variant.
    pub n_clusters: Option<usize>,
    pub normalize: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            preset: None,
            k0: 10,
            s: 5,
            t1: 5,
            t2: 2,
            lambda2: 1.0,
            beta: 1.0,
            tau: 1.0,
            noise_std: 0.01,
            eta: 1e-3,
            inner_steps: 100,
            t3: 100,
            t: 4,
            delta: 0.0,
            pca_components: 0,
            metric: Metric::Euclidean,
            variant: Variant::Asrc,
            rounds: 2,
            seed: 0,
            structure: "d-256-64".into(),
            knn_k: 10,
            n_clusters: None,
            normalize: true,
        }
    }
}

/// Per-dataset settings: `(k0, s, λ₂, T1, β, struct, T2, pca)`.
const PRESETS: &[(&str, usize, usize, f64, usize, f64, &str, usize, usize)] = &[
    ("20news", 50, 150, 0.125, 7, 1e-3, "d-256-64", 2, 500),
    ("umist", 5, 8, 4.0, 7, 10.0, "d-256-64", 2, 0),
    ("coil20", 5, 8, 8.0, 10, 1.0, "d-256-64", 1, 0),
    ("mnist", 10, 64, 0.015625, 15, 1e-3, "d-256-64", 2, 0),
    ("jaffe", 15, 2, 0.015625, 10, 1.0, "d-256-64", 4, 0),
    ("mice_protein", 10, 2, 0.015625, 20, 1.0, "d-256-64", 2, 0),
    ("usps", 10, 50, 4.0, 7, 10.0, "d-128-64", 2, 0),
];

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|p| p.0)
}

impl PipelineConfig {
    pub fn preset(name: &str) -> Option<Self> {
        let &(_, k0, s, lambda2, t1, beta, structure, t2, pca) = PRESETS.iter().find(|p| p.0 == name)?;
        Some(Self {
            preset: Some(name.to_string()),
            k0,
            s,
            lambda2,
            t1,
            beta,
            structure: structure.to_string(),
            t2,
            pca_components: pca,
            ..Self::default()
        })
    }

    pub fn validate(&self) -> std::result::Result<(), ConfigError> {
        let invalid = |key: &str, reason: &str| ConfigError::Invalid {
            key: key.to_string(),
            reason: reason.to_string(),
        };
        if self.k0 < 2 {
            return Err(invalid("k0", "must be at least 2"));
        }
        for (key, v) in [
            ("T1", self.t1),
            ("T2", self.t2),
            ("T3", self.t3),
            ("t", self.t),
            ("inner_steps", self.inner_steps),
            ("rounds", self.rounds),
            ("knn_k", self.knn_k),
        ] {
            if v == 0 {
                return Err(invalid(key, "must be at least 1"));
            }
        }
        if self.n_clusters == Some(0) {
            return Err(invalid("n_clusters", "must be at least 1"));
        }
        let training = self.variant != Variant::Rcc;
        for (key, v) in [("lambda2", self.lambda2), ("eta", self.eta), ("tau", self.tau)] {
            if training && !(v > 0.0 && v.is_finite()) {
                return Err(invalid(key, "must be positive"));
            }
        }
        if training && self.variant != Variant::Adagae && !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(invalid("beta", "must be positive"));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(invalid("noise_std", "must be non-negative"));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(invalid("delta", "must be non-negative (0 = automatic)"));
        }
        let parts: Vec<&str> = self.structure.split('-').collect();
        let well_formed = parts.len() == 3
            && (parts[0] == "d" || parts[0].parse::<usize>().is_ok())
            && parts[1..].iter().all(|p| p.parse::<usize>().is_ok_and(|v| v > 0));
        if !well_formed {
            return Err(invalid("struct", "expected the form d-H-O"));
        }
        Ok(())
    }
}

fn parse_real(key: &str, value: &str) -> std::result::Result<f64, ConfigError> {
    let type_error = || ConfigError::TypeError {
        key: key.to_string(),
        expected: "a real number",
        value: value.to_string(),
    };
    let parsed = match value.split_once('^') {
        Some((base, exp)) => {
            let base: f64 = base.trim().parse().map_err(|_| type_error())?;
            let exp: f64 = exp.trim().parse().map_err(|_| type_error())?;
            base.powf(exp)
        }
        None => value.parse().map_err(|_| type_error())?,
    };
    if parsed.is_finite() {
        Ok(parsed)
    } else {
        Err(type_error())
    }
}

fn parse_typed<T: FromStr>(key: &str, value: &str, expected: &'static str) -> std::result::Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::TypeError {
        key: key.to_string(),
        expected,
        value: value.to_string(),
    })
}

fn parse_bool(key: &str, value: &str) -> std::result::Result<bool, ConfigError> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(ConfigError::TypeError {
            key: key.to_string(),
            expected: "a boolean",
            value: value.to_string(),
        }),
    }
}

fn apply(cfg: &mut PipelineConfig, key: &str, value: &str) -> std::result::Result<(), ConfigError> {
    const COUNT: &str = "a non-negative integer";
    match key {
        "k0" => cfg.k0 = parse_typed(key, value, COUNT)?,
        "s" => cfg.s = parse_typed(key, value, COUNT)?,
        "T1" => cfg.t1 = parse_typed(key, value, COUNT)?,
        "T2" => cfg.t2 = parse_typed(key, value, COUNT)?,
        "T3" => cfg.t3 = parse_typed(key, value, COUNT)?,
        "t" => cfg.t = parse_typed(key, value, COUNT)?,
        "inner_steps" => cfg.inner_steps = parse_typed(key, value, COUNT)?,
        "pca_components" => cfg.pca_components = parse_typed(key, value, COUNT)?,
        "rounds" => cfg.rounds = parse_typed(key, value, COUNT)?,
        "knn_k" => cfg.knn_k = parse_typed(key, value, COUNT)?,
        "seed" => cfg.seed = parse_typed(key, value, COUNT)?,
        "n_clusters" => cfg.n_clusters = Some(parse_typed(key, value, COUNT)?),
        "lambda2" => cfg.lambda2 = parse_real(key, value)?,
        "beta" => cfg.beta = parse_real(key, value)?,
        "tau" => cfg.tau = parse_real(key, value)?,
        "noise_std" => cfg.noise_std = parse_real(key, value)?,
        "eta" => cfg.eta = parse_real(key, value)?,
        "delta" => {
            cfg.delta = if value == "auto" { 0.0 } else { parse_real(key, value)? };
        }
        "metric" => cfg.metric = parse_typed(key, value, "euclidean or cosine")?,
        "variant" => cfg.variant = parse_typed(key, value, "asrc, asrc1, asrc2, adagae or rcc")?,
        "struct" => cfg.structure = value.to_string(),
        "normalize" => cfg.normalize = parse_bool(key, value)?,
        _ => return Err(ConfigError::UnknownKey(key.to_string())),
    }
    Ok(())
}

/// Parse configuration text.
pub fn parse_config_str(text: &str) -> std::result::Result<PipelineConfig, ConfigError> {
    let mut pairs: Vec<(&str, &str)> = Vec::new();
    let mut preset: Option<&str> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax(lineno + 1))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(ConfigError::Syntax(lineno + 1));
        }
        if pairs.iter().any(|&(k, _)| k == key) || (key == "preset" && preset.is_some()) {
            return Err(ConfigError::Invalid {
                key: key.to_string(),
                reason: "given more than once".into(),
            });
        }
        if key == "preset" {
            preset = Some(value);
        } else {
            pairs.push((key, value));
        }
    }
    let mut cfg = match preset {
        Some(name) => PipelineConfig::preset(name).ok_or_else(|| ConfigError::Invalid {
            key: "preset".into(),
            reason: format!("unknown preset `{name}`"),
        })?,
        None => PipelineConfig::default(),
    };
    for (key, value) in pairs {
        apply(&mut cfg, key, value)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Read and parse a configuration file.
pub fn parse_config(path: &Path) -> Result<PipelineConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text).map_err(AsrcError::from)
}
