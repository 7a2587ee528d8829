use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Training hyperparameters. Defaults are the best settings reported for
/// the mobility experiments; optimizer settings are this crate's own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaggerConfig {
    pub hidden_layers: Vec<usize>,
    /// Input dropout, inverted so inference needs no rescaling.
    pub dropout_rate: f64,
    /// Irrelevant tokens drawn per relevant token drawn, each epoch.
    pub negative_ratio: f64,
    /// Share of all relevant tokens drawn each epoch.
    pub positive_fraction: f64,
    /// Loss weight of relevant samples; irrelevant samples weigh 1.
    pub relevant_class_weight: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub early_stop_delta: f64,
    pub eval_threshold: f64,
    /// F-beta used for early stopping.
    pub beta: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Share of training documents held out for early stopping.
    pub dev_fraction: f64,
    pub seed: u64,
}

impl Default for TaggerConfig {
    fn default() -> Self {
        TaggerConfig {
            hidden_layers: vec![300, 300, 300],
            dropout_rate: 0.6,
            negative_ratio: 0.75,
            positive_fraction: 1.0,
            relevant_class_weight: 2.0,
            max_epochs: 50,
            patience: 5,
            early_stop_delta: 1e-5,
            eval_threshold: 0.5,
            beta: 2.0,
            learning_rate: 0.03,
            batch_size: 64,
            dev_fraction: 0.1,
            seed: 13,
        }
    }
}

impl TaggerConfig {
    /// Keys accepted by [`TaggerConfig::set`].
    pub const KEYS: &'static [&'static str] = &[
        "hidden_layers",
        "dropout_rate",
        "negative_ratio",
        "positive_fraction",
        "relevant_class_weight",
        "max_epochs",
        "patience",
        "early_stop_delta",
        "eval_threshold",
        "beta",
        "learning_rate",
        "batch_size",
        "dev_fraction",
        "seed",
    ];

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout_rate {} not in [0, 1)", self.dropout_rate));
        }
        if self.negative_ratio <= 0.0 {
            return bad(format!(
                "negative_ratio {} must be > 0",
                self.negative_ratio
            ));
        }
        if !(self.positive_fraction > 0.0 && self.positive_fraction <= 1.0) {
            return bad(format!(
                "positive_fraction {} not in (0, 1]",
                self.positive_fraction
            ));
        }
        if self.relevant_class_weight <= 0.0 || self.learning_rate <= 0.0 || self.beta <= 0.0 {
            return bad("relevant_class_weight, learning_rate and beta must be > 0".into());
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return bad("batch_size and max_epochs must be > 0".into());
        }
        if self.hidden_layers.contains(&0) {
            return bad("hidden layer sizes must be > 0".into());
        }
        if !(self.dev_fraction > 0.0 && self.dev_fraction < 1.0) {
            return bad(format!("dev_fraction {} not in (0, 1)", self.dev_fraction));
        }
        if !(0.0..=1.0).contains(&self.eval_threshold) {
            return bad(format!(
                "eval_threshold {} not in [0, 1]",
                self.eval_threshold
            ));
        }
        Ok(())
    }

    /// Sets one field from its textual value. `hidden_layers` takes a
    /// comma-separated list (`300,300,300`), or `none` for no hidden layer.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
        where
            T::Err: std::fmt::Display,
        {
            value
                .trim()
                .parse()
                .map_err(|e| Error::Config(format!("{key} = {value}: {e}")))
        }
        match key.trim() {
            "hidden_layers" => {
                let v = value.trim();
                self.hidden_layers = if v.is_empty() || v == "none" {
                    Vec::new()
                } else {
                    v.split(',')
                        .map(|s| parse(key, s))
                        .collect::<Result<Vec<usize>>>()?
                };
            }
            "dropout_rate" => self.dropout_rate = parse(key, value)?,
            "negative_ratio" => self.negative_ratio = parse(key, value)?,
            "positive_fraction" => self.positive_fraction = parse(key, value)?,
            "relevant_class_weight" => self.relevant_class_weight = parse(key, value)?,
            "max_epochs" => self.max_epochs = parse(key, value)?,
            "patience" => self.patience = parse(key, value)?,
            "early_stop_delta" => self.early_stop_delta = parse(key, value)?,
            "eval_threshold" => self.eval_threshold = parse(key, value)?,
            "beta" => self.beta = parse(key, value)?,
            "learning_rate" => self.learning_rate = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "dev_fraction" => self.dev_fraction = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            other => {
                return Err(Error::Config(format!(
                    "unknown key {other:?}; valid keys: {}",
                    Self::KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Textual value of one field, in the form accepted by `set`.
    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "hidden_layers" if self.hidden_layers.is_empty() => "none".to_owned(),
            "hidden_layers" => self
                .hidden_layers
                .iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(","),
            "dropout_rate" => self.dropout_rate.to_string(),
            "negative_ratio" => self.negative_ratio.to_string(),
            "positive_fraction" => self.positive_fraction.to_string(),
            "relevant_class_weight" => self.relevant_class_weight.to_string(),
            "max_epochs" => self.max_epochs.to_string(),
            "patience" => self.patience.to_string(),
            "early_stop_delta" => self.early_stop_delta.to_string(),
            "eval_threshold" => self.eval_threshold.to_string(),
            "beta" => self.beta.to_string(),
            "learning_rate" => self.learning_rate.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "dev_fraction" => self.dev_fraction.to_string(),
            "seed" => self.seed.to_string(),
            _ => return None,
        })
    }

    /// Parses `key = value` lines over the defaults. `#` starts a comment.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut config = TaggerConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            config.set(key, value)?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_kv_str(&text)
    }

    pub fn to_kv_string(&self) -> String {
        let mut out = String::new();
        for key in Self::KEYS {
            let _ = writeln!(out, "{key} = {}", self.get(key).expect("known key"));
        }
        out
    }
}
