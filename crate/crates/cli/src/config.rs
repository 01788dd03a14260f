use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use snapid_core::seqnet::{AdamConfig, TrainConfig};

use crate::error::{CliError, CliResult};

/// Smoothing weight: a fixed value or the GCV choice over the default grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaChoice {
    Gcv,
    Fixed(f64),
}

impl FromStr for LambdaChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("gcv") {
            return Ok(LambdaChoice::Gcv);
        }
        match s.parse::<f64>() {
            Ok(v) if v >= 0.0 && v.is_finite() => Ok(LambdaChoice::Fixed(v)),
            _ => Err(format!("lambda must be `gcv` or a non-negative number, got `{s}`")),
        }
    }
}

impl fmt::Display for LambdaChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LambdaChoice::Gcv => f.write_str("gcv"),
            LambdaChoice::Fixed(v) => write!(f, "{v}"),
        }
    }
}

impl Serialize for LambdaChoice {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            LambdaChoice::Gcv => s.serialize_str("gcv"),
            LambdaChoice::Fixed(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for LambdaChoice {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(v) => LambdaChoice::from_str(&v.to_string()),
            Raw::Text(s) => LambdaChoice::from_str(&s),
        }
        .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplineSection {
    pub interior_knots: usize,
    pub lambda: LambdaChoice,
}

impl Default for SplineSection {
    fn default() -> Self {
        SplineSection {
            interior_knots: 40,
            lambda: LambdaChoice::Gcv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetSection {
    pub layers: usize,
    pub hidden: usize,
    pub learning_rate: f64,
    pub early_stop_loss: f64,
    pub max_epochs: usize,
    pub split_fraction: f64,
    pub adam: AdamConfig,
}

impl Default for NetSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        NetSection {
            layers: 2,
            hidden: 250,
            learning_rate: t.learning_rate,
            early_stop_loss: t.early_stop_loss,
            max_epochs: t.max_epochs,
            split_fraction: t.split_fraction,
            adam: t.adam,
        }
    }
}

impl NetSection {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            early_stop_loss: self.early_stop_loss,
            max_epochs: self.max_epochs,
            split_fraction: self.split_fraction,
            seed,
            adam: self.adam,
        }
    }
}

/// Settings shared by every command; any of them may come from `--config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub n_points: usize,
    pub noise_sigma_rel: f64,
    pub spline: SplineSection,
    pub net: NetSection,
    pub output_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 42,
            n_points: 500,
            noise_sigma_rel: 0.01,
            spline: SplineSection::default(),
            net: NetSection::default(),
            output_dir: None,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::input(path, e.into()))
    }

    /// Built-in defaults, overridden by the config file if one is given.
    pub fn resolve(path: Option<&Path>) -> CliResult<Self> {
        match path {
            Some(p) => Self::load(p),
            None => Ok(Self::default()),
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.n_points < 2 {
            return Err(CliError::Usage(format!("n_points must be at least 2, got {}", self.n_points)));
        }
        if !(self.noise_sigma_rel >= 0.0 && self.noise_sigma_rel.is_finite()) {
            return Err(CliError::Usage("noise_sigma_rel must be non-negative".into()));
        }
        if self.spline.interior_knots < 1 {
            return Err(CliError::Usage("at least one interior knot is required".into()));
        }
        if self.net.layers < 1 || self.net.hidden < 1 {
            return Err(CliError::Usage("the network needs at least one layer and one hidden unit".into()));
        }
        self.net.train_config(self.seed).validate()?;
        Ok(())
    }

    pub fn out_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("."))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_parses_both_forms() {
        assert_eq!("gcv".parse::<LambdaChoice>().unwrap(), LambdaChoice::Gcv);
        assert_eq!("0.5".parse::<LambdaChoice>().unwrap(), LambdaChoice::Fixed(0.5));
        assert!("-1".parse::<LambdaChoice>().is_err());
        let c: SplineSection = serde_json::from_str(r#"{"lambda": 3}"#).unwrap();
        assert_eq!(c.lambda, LambdaChoice::Fixed(3.0));
        assert_eq!(c.interior_knots, 40);
        let c: SplineSection = serde_json::from_str(r#"{"lambda": "gcv"}"#).unwrap();
        assert_eq!(c.lambda, LambdaChoice::Gcv);
    }

    #[test]
    fn partial_config_keeps_defaults() {
        let c: PipelineConfig = serde_json::from_str(r#"{"seed": 7, "net": {"max_epochs": 5}}"#).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.net.max_epochs, 5);
        assert_eq!(c.net.hidden, 250);
        assert_eq!(c.n_points, 500);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"sede": 7}"#).is_err());
    }
}
