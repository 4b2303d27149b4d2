//! Hyperparameters and the JSON configuration file.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("config is not valid JSON: {0}")]
    Syntax(String),
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("config key `{key}`: expected {expected}")]
    TypeError { key: String, expected: &'static str },
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// What an embedding channel looks up.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelSource {
    WordForm,
    GoldUpos,
}

impl fmt::Display for ChannelSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChannelSource::WordForm => "word-form",
            ChannelSource::GoldUpos => "gold-upos",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub source: ChannelSource,
    pub dim: usize,
}

/// Network shape. Vocabularies live next to the parameters in
/// [`super::ParserModel`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub channels: Vec<ChannelConfig>,
    pub lstm_layers: usize,
    pub lstm_dim: usize,
    pub head_hidden_dim: usize,
    pub qk_dim: usize,
    pub use_gold_upos: bool,
    pub lowercase_forms: bool,
    /// Probability of replacing a training form by the unknown form.
    pub word_dropout: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            channels: vec![ChannelConfig {
                source: ChannelSource::WordForm,
                dim: 768,
            }],
            lstm_layers: 2,
            lstm_dim: 256,
            head_hidden_dim: 2048,
            qk_dim: 512,
            use_gold_upos: false,
            lowercase_forms: false,
            word_dropout: 0.1,
            seed: 42,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.channels.is_empty() {
            return Err(ConfigError::Invalid("at least one channel is required".into()));
        }
        if self.channels.iter().any(|c| c.dim == 0) {
            return Err(ConfigError::Invalid("channel dims must be >= 1".into()));
        }
        if self.lstm_dim == 0 || self.head_hidden_dim == 0 || self.qk_dim == 0 {
            return Err(ConfigError::Invalid("all dims must be >= 1".into()));
        }
        let has_upos = self.channels.iter().any(|c| c.source == ChannelSource::GoldUpos);
        if has_upos != self.use_gold_upos {
            return Err(ConfigError::Invalid(
                "use_gold_upos must be set exactly when a gold-upos channel is present".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.word_dropout) {
            return Err(ConfigError::Invalid("word_dropout must be in [0, 1)".into()));
        }
        Ok(())
    }

    /// Width of the concatenated channel embeddings.
    pub fn input_dim(&self) -> usize {
        self.channels.iter().map(|c| c.dim).sum()
    }

    /// Width of the contextual token representation.
    pub fn encoder_dim(&self) -> usize {
        if self.lstm_layers == 0 {
            self.input_dim()
        } else {
            2 * self.lstm_dim
        }
    }

    /// Canonical text form stored in model files.
    pub fn to_canonical(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn from_canonical(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))
    }
}

/// Two-stage optimisation schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSchedule {
    pub frozen_epochs: usize,
    pub frozen_lr: f64,
    pub main_epochs: usize,
    pub batches_per_epoch: usize,
    pub batch_size: usize,
    pub peak_lr: f64,
    pub warmup_epochs: usize,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        TrainSchedule {
            frozen_epochs: 10,
            frozen_lr: 1e-3,
            main_epochs: 30,
            batches_per_epoch: 1000,
            batch_size: 32,
            peak_lr: 2e-5,
            warmup_epochs: 2,
        }
    }
}

impl TrainSchedule {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.warmup_epochs > self.main_epochs {
            return Err(ConfigError::Invalid("warmup_epochs exceeds main_epochs".into()));
        }
        if !(self.frozen_lr > 0.0 && self.peak_lr > 0.0) {
            return Err(ConfigError::Invalid("learning rates must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(ConfigError::Invalid("batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

fn as_usize(key: &str, v: &Value) -> Result<usize, ConfigError> {
    v.as_u64().map(|x| x as usize).ok_or_else(|| ConfigError::TypeError {
        key: key.to_owned(),
        expected: "a non-negative integer",
    })
}

fn as_f64(key: &str, v: &Value) -> Result<f64, ConfigError> {
    v.as_f64().ok_or_else(|| ConfigError::TypeError {
        key: key.to_owned(),
        expected: "a number",
    })
}

fn as_bool(key: &str, v: &Value) -> Result<bool, ConfigError> {
    v.as_bool().ok_or_else(|| ConfigError::TypeError {
        key: key.to_owned(),
        expected: "a boolean",
    })
}

fn as_channels(v: &Value) -> Result<Vec<ChannelConfig>, ConfigError> {
    let type_err = |expected| ConfigError::TypeError {
        key: "channels".into(),
        expected,
    };
    let items = v.as_array().ok_or_else(|| type_err("an array"))?;
    let mut channels = Vec::with_capacity(items.len());
    for item in items {
        let obj: &Map<String, Value> = item.as_object().ok_or_else(|| type_err("an array of objects"))?;
        let mut source = None;
        let mut dim = None;
        for (k, v) in obj {
            match k.as_str() {
                "source" => {
                    source = Some(match v.as_str() {
                        Some("word-form") => ChannelSource::WordForm,
                        Some("gold-upos") => ChannelSource::GoldUpos,
                        _ => {
                            return Err(ConfigError::TypeError {
                                key: "channels.source".into(),
                                expected: "\"word-form\" or \"gold-upos\"",
                            })
                        }
                    })
                }
                "dim" => dim = Some(as_usize("channels.dim", v)?),
                other => return Err(ConfigError::UnknownKey(format!("channels.{}", other))),
            }
        }
        channels.push(ChannelConfig {
            source: source.ok_or_else(|| type_err("objects with a `source`"))?,
            dim: dim.ok_or_else(|| type_err("objects with a `dim`"))?,
        });
    }
    Ok(channels)
}

/// Parses configuration text. Omitted keys keep their defaults; an empty
/// document yields all defaults.
pub fn parse_config(text: &str) -> Result<(ModelConfig, TrainSchedule), ConfigError> {
    let mut model = ModelConfig::default();
    let mut schedule = TrainSchedule::default();
    if text.trim().is_empty() {
        return Ok((model, schedule));
    }
    let value: Value = serde_json::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
    let obj = value.as_object().ok_or_else(|| ConfigError::TypeError {
        key: "<root>".into(),
        expected: "an object",
    })?;

    for (key, v) in obj {
        let k = key.as_str();
        match k {
            "channels" => model.channels = as_channels(v)?,
            "lstm_layers" => model.lstm_layers = as_usize(k, v)?,
            "lstm_dim" => model.lstm_dim = as_usize(k, v)?,
            "head_hidden_dim" => model.head_hidden_dim = as_usize(k, v)?,
            "qk_dim" => model.qk_dim = as_usize(k, v)?,
            "use_gold_upos" => model.use_gold_upos = as_bool(k, v)?,
            "lowercase_forms" => model.lowercase_forms = as_bool(k, v)?,
            "word_dropout" => model.word_dropout = as_f64(k, v)?,
            "seed" => {
                model.seed = v.as_u64().ok_or_else(|| ConfigError::TypeError {
                    key: k.to_owned(),
                    expected: "a non-negative integer",
                })?
            }
            "frozen_epochs" => schedule.frozen_epochs = as_usize(k, v)?,
            "frozen_lr" => schedule.frozen_lr = as_f64(k, v)?,
            "main_epochs" => schedule.main_epochs = as_usize(k, v)?,
            "batches_per_epoch" => schedule.batches_per_epoch = as_usize(k, v)?,
            "batch_size" => schedule.batch_size = as_usize(k, v)?,
            "peak_lr" => schedule.peak_lr = as_f64(k, v)?,
            "warmup_epochs" => schedule.warmup_epochs = as_usize(k, v)?,
            other => return Err(ConfigError::UnknownKey(other.to_owned())),
        }
    }

    // Turning on gold UPOS without naming a channel adds a default one.
    if model.use_gold_upos
        && !obj.contains_key("channels")
        && !model.channels.iter().any(|c| c.source == ChannelSource::GoldUpos)
    {
        model.channels.push(ChannelConfig {
            source: ChannelSource::GoldUpos,
            dim: 64,
        });
    }

    model.validate()?;
    schedule.validate()?;
    Ok((model, schedule))
}

/// Reads and parses a configuration file.
pub fn load_config(path: &Path) -> Result<(ModelConfig, TrainSchedule), ConfigError> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}
