//! Flat `key = value` run configuration.
//!
//! ```text
//! # comments start with '#'
//! vit.num_layers = 2
//! train.epochs = 30
//! augment.enabled = false
//! ```
//!
//! Keys are grouped by prefix: `vit.`, `head.`, `train.` and `augment.`.
//! Unknown keys are an error. Unset keys keep the defaults, which follow the
//! reference training setup (batch 32, 50 epochs, learning rate 1e-4, label
//! smoothing 0.2, L2 0.01, the standard augmentation ranges).

use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::classifier::HeadLoss;
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::training::{AugmentConfig, TrainConfig};

/// Splits config text into `(key, value)` pairs, in order.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected `key = value`, got `{}`", n + 1, raw.trim()))
        })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(Error::Config(format!("line {}: empty key or value", n + 1)));
        }
        pairs.push((key.to_string(), value.to_string()));
    }
    Ok(pairs)
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{value}`")))
}

/// Sets a `vit.` or `head.` key. Returns `false` for keys it does not own.
pub fn set_model_key(cfg: &mut ModelConfig, key: &str, value: &str) -> Result<bool> {
    let (v, h) = (&mut cfg.vit, &mut cfg.head);
    match key {
        "vit.image_size" => v.image_size = parse(key, value)?,
        "vit.patch_size" => v.patch_size = parse(key, value)?,
        "vit.projection_dim" => v.projection_dim = parse(key, value)?,
        "vit.num_heads" => v.num_heads = parse(key, value)?,
        "vit.num_layers" => v.num_layers = parse(key, value)?,
        "vit.mlp_hidden" => v.mlp_hidden = parse(key, value)?,
        "vit.layer_norm_eps" => v.layer_norm_eps = parse(key, value)?,
        "head.hidden" => h.hidden = parse(key, value)?,
        "head.num_classes" => h.num_classes = parse(key, value)?,
        "head.l2_strength" => h.l2_strength = parse(key, value)?,
        "head.loss" => h.loss = HeadLoss::parse(value)?,
        _ => return Ok(false),
    }
    Ok(true)
}

fn pair(key: &str, value: impl Display) -> (String, String) {
    (key.to_string(), value.to_string())
}

/// Every `vit.` and `head.` key with its value. Floats are printed in their
/// shortest round-tripping form.
pub fn model_pairs(cfg: &ModelConfig) -> Vec<(String, String)> {
    let (v, h) = (&cfg.vit, &cfg.head);
    vec![
        pair("vit.image_size", v.image_size),
        pair("vit.patch_size", v.patch_size),
        pair("vit.projection_dim", v.projection_dim),
        pair("vit.num_heads", v.num_heads),
        pair("vit.num_layers", v.num_layers),
        pair("vit.mlp_hidden", v.mlp_hidden),
        pair("vit.layer_norm_eps", v.layer_norm_eps),
        pair("head.hidden", h.hidden),
        pair("head.num_classes", h.num_classes),
        pair("head.l2_strength", h.l2_strength),
        pair("head.loss", h.loss.as_str()),
    ]
}

/// Model, training and augmentation settings for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    /// Ranges used when `train.augment` is enabled; kept when disabled so the
    /// echoed config stays complete.
    pub augment: AugmentConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        RunConfig {
            model: ModelConfig::default(),
            augment: train.augment.clone().unwrap_or_default(),
            train,
        }
    }
}

impl RunConfig {
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (k, v) in parse_pairs(text)? {
            cfg.set(&k, &v)?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Sets one key; unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if key == "head.num_classes" {
            return Err(Error::Config(
                "`head.num_classes` comes from the dataset and cannot be set".into(),
            ));
        }
        if set_model_key(&mut self.model, key, value)? {
            return Ok(());
        }
        let (t, a) = (&mut self.train, &mut self.augment);
        match key {
            "train.batch_size" => t.batch_size = parse(key, value)?,
            "train.epochs" => t.epochs = parse(key, value)?,
            "train.learning_rate" => t.learning_rate = parse(key, value)?,
            "train.adam_beta1" => t.adam.beta1 = parse(key, value)?,
            "train.adam_beta2" => t.adam.beta2 = parse(key, value)?,
            "train.adam_epsilon" => t.adam.epsilon = parse(key, value)?,
            "train.label_smoothing" => t.label_smoothing = parse(key, value)?,
            "train.split_ratio" => t.split_ratio = parse(key, value)?,
            "train.seed" => t.seed = parse(key, value)?,
            "augment.enabled" => {
                let on: bool = parse(key, value)?;
                t.augment = on.then(|| a.clone());
            }
            "augment.rotation_degrees" => a.rotation_degrees = parse(key, value)?,
            "augment.width_shift" => a.width_shift = parse(key, value)?,
            "augment.height_shift" => a.height_shift = parse(key, value)?,
            "augment.shear" => a.shear = parse(key, value)?,
            "augment.zoom" => a.zoom = parse(key, value)?,
            "augment.horizontal_flip" => a.horizontal_flip = parse(key, value)?,
            "augment.vertical_flip" => a.vertical_flip = parse(key, value)?,
            _ => return Err(Error::Config(format!("unknown config key `{key}`"))),
        }
        if t.augment.is_some() {
            t.augment = Some(a.clone());
        }
        Ok(())
    }

    /// Applies a `key=value` override as given on the command line.
    pub fn set_override(&mut self, spec: &str) -> Result<()> {
        let (k, v) = spec
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{spec}` is not `key=value`")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn validate(&self) -> Result<()> {
        self.model.vit.validate()?;
        self.train.validate()?;
        self.augment.validate()
    }

    /// Every effective setting, one `key = value` per line.
    pub fn to_text(&self) -> String {
        let (t, a) = (&self.train, &self.augment);
        let mut pairs: Vec<_> = model_pairs(&self.model)
            .into_iter()
            .filter(|(k, _)| k != "head.num_classes")
            .collect();
        pairs.extend([
            pair("train.batch_size", t.batch_size),
            pair("train.epochs", t.epochs),
            pair("train.learning_rate", t.learning_rate),
            pair("train.adam_beta1", t.adam.beta1),
            pair("train.adam_beta2", t.adam.beta2),
            pair("train.adam_epsilon", t.adam.epsilon),
            pair("train.label_smoothing", t.label_smoothing),
            pair("train.split_ratio", t.split_ratio),
            pair("train.seed", t.seed),
            pair("augment.enabled", t.augment.is_some()),
            pair("augment.rotation_degrees", a.rotation_degrees),
            pair("augment.width_shift", a.width_shift),
            pair("augment.height_shift", a.height_shift),
            pair("augment.shear", a.shear),
            pair("augment.zoom", a.zoom),
            pair("augment.horizontal_flip", a.horizontal_flip),
            pair("augment.vertical_flip", a.vertical_flip),
        ]);
        pairs.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}
