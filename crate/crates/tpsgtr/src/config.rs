//! Flat `key = value` run configuration with `#` comments.

use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use tpsgtr_core::decoder::{Arch, Dims, ModelSpec, Pooling};
use tpsgtr_core::metrics::DecodeConfig;
use tpsgtr_core::scenegraph::ToyWorldConfig;
use tpsgtr_core::training::{AdamConfig, TrainConfig};

use crate::error::{CliError, Result};

/// Every setting a command may read. Unset keys keep the defaults below.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub objects: usize,
    pub predicates: usize,
    pub feature_dim: usize,
    pub min_triplets: usize,
    pub max_triplets: usize,
    pub noise: f64,
    pub corruption_rate: f64,

    pub roles: usize,
    pub role_columns: [usize; 3],
    pub embed: usize,
    pub hidden: usize,
    pub attention: usize,
    pub pooling: Pooling,

    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub epochs: usize,
    pub clip_norm: Option<f64>,
    pub seed: u64,
    pub stop_below: Option<f64>,

    pub beam: usize,
    pub max_len: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let world = ToyWorldConfig::default();
        let dims = Dims::default();
        let adam = AdamConfig::default();
        let decode = DecodeConfig::default();
        RunConfig {
            objects: world.objects,
            predicates: world.predicates,
            feature_dim: world.feature_dim,
            min_triplets: world.min_triplets,
            max_triplets: world.max_triplets,
            noise: world.noise,
            corruption_rate: world.corruption_rate,
            roles: dims.roles,
            role_columns: dims.role_columns,
            embed: dims.embed,
            hidden: dims.hidden,
            attention: dims.attention,
            pooling: Pooling::Attention,
            lr: adam.lr,
            beta1: adam.beta1,
            beta2: adam.beta2,
            adam_eps: adam.eps,
            epochs: 20,
            clip_norm: Some(5.0),
            seed: 1,
            stop_below: None,
            beam: decode.beam,
            max_len: decode.max_len,
        }
    }
}

pub const KEYS: &[&str] = &[
    "objects",
    "predicates",
    "feature_dim",
    "min_triplets",
    "max_triplets",
    "noise",
    "corruption_rate",
    "roles",
    "role_columns",
    "embed",
    "hidden",
    "attention",
    "pooling",
    "lr",
    "beta1",
    "beta2",
    "adam_eps",
    "epochs",
    "clip_norm",
    "seed",
    "stop_below",
    "beam",
    "max_len",
];

fn num<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: Display,
{
    value
        .parse()
        .map_err(|e| CliError::Config(format!("{key} = {value:?}: {e}")))
}

/// `none` (or `off`) disables an optional threshold.
fn optional(key: &str, value: &str) -> Result<Option<f64>> {
    match value {
        "none" | "off" => Ok(None),
        v => num(key, v).map(Some),
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "objects" => self.objects = num(key, v)?,
            "predicates" => self.predicates = num(key, v)?,
            "feature_dim" => self.feature_dim = num(key, v)?,
            "min_triplets" => self.min_triplets = num(key, v)?,
            "max_triplets" => self.max_triplets = num(key, v)?,
            "noise" => self.noise = num(key, v)?,
            "corruption_rate" => self.corruption_rate = num(key, v)?,
            "roles" => self.roles = num(key, v)?,
            "role_columns" => {
                let cols: Vec<usize> = v.split(',').map(|c| num(key, c.trim())).collect::<Result<_>>()?;
                self.role_columns = cols
                    .try_into()
                    .map_err(|_| CliError::Config(format!("role_columns needs three indices, got {v:?}")))?;
            }
            "embed" => self.embed = num(key, v)?,
            "hidden" => self.hidden = num(key, v)?,
            "attention" => self.attention = num(key, v)?,
            "pooling" => self.pooling = Pooling::parse(v).map_err(|e| CliError::Config(e.to_string()))?,
            "lr" => self.lr = num(key, v)?,
            "beta1" => self.beta1 = num(key, v)?,
            "beta2" => self.beta2 = num(key, v)?,
            "adam_eps" => self.adam_eps = num(key, v)?,
            "epochs" => self.epochs = num(key, v)?,
            "clip_norm" => self.clip_norm = optional(key, v)?,
            "seed" => self.seed = num(key, v)?,
            "stop_below" => self.stop_below = optional(key, v)?,
            "beam" => self.beam = num(key, v)?,
            "max_len" => self.max_len = num(key, v)?,
            other => {
                return Err(CliError::Config(format!(
                    "unknown key {other:?}; known keys: {}",
                    KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text` on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value, got {raw:?}", n + 1)))?;
            self.set(k, v)
                .map_err(|e| CliError::Config(format!("line {}: {}", n + 1, e.to_string().trim_start_matches("config: "))))?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        Self::parse(&text)
    }

    /// Applies `key=value` overrides given on the command line.
    pub fn apply_overrides(&mut self, pairs: &[String]) -> Result<()> {
        for p in pairs {
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("override {p:?} is not key=value")))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn toy_world(&self) -> ToyWorldConfig {
        ToyWorldConfig {
            objects: self.objects,
            predicates: self.predicates,
            feature_dim: self.feature_dim,
            min_triplets: self.min_triplets,
            max_triplets: self.max_triplets,
            noise: self.noise,
            corruption_rate: self.corruption_rate,
            seed: self.seed,
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.adam_eps,
        }
    }

    /// Model shape for data with the given feature, global, tag and
    /// vocabulary sizes.
    pub fn spec(&self, arch: Arch, feature: usize, global: usize, tags: usize, vocab: usize) -> ModelSpec {
        let dims = Dims {
            feature,
            roles: self.roles,
            role_columns: self.role_columns,
            global,
            tags,
            embed: self.embed,
            hidden: self.hidden,
            attention: self.attention,
            vocab,
        };
        ModelSpec::new(arch, dims).with_pooling(self.pooling)
    }

    pub fn train_config(&self, spec: ModelSpec) -> TrainConfig {
        TrainConfig {
            spec,
            adam: self.adam(),
            epochs: self.epochs,
            clip_norm: self.clip_norm,
            seed: self.seed,
            stop_below: self.stop_below,
        }
    }

    pub fn decode(&self) -> DecodeConfig {
        DecodeConfig {
            beam: self.beam,
            max_len: self.max_len,
        }
    }

    /// Rejects out-of-domain values before any command starts work.
    pub fn validate(&self) -> Result<()> {
        let cfg = |e: tpsgtr_core::Error| CliError::Config(e.to_string());
        self.toy_world().validate().map_err(cfg)?;
        self.adam().validate().map_err(cfg)?;
        let dims = self.spec(Arch::Stdbu, 1, 0, 1, 3).dims;
        dims.validate(Arch::Stdbu).map_err(cfg)?;
        if self.epochs == 0 {
            return Err(CliError::Config("epochs must be at least 1".into()));
        }
        if self.clip_norm.is_some_and(|c| !(c.is_finite() && c > 0.0)) {
            return Err(CliError::Config("clip_norm must be positive or none".into()));
        }
        if self.beam == 0 || self.max_len == 0 {
            return Err(CliError::Config("beam and max_len must be at least 1".into()));
        }
        Ok(())
    }
}
