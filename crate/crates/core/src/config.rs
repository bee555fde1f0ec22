//! Model and pipeline configuration.
//!
//! Files are either a JSON object or flat `key = value` lines (`#` starts a
//! comment). Unspecified keys keep their defaults.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAX_DIM: usize = 1 << 16;
const MAX_LAYERS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Node representation size `d`.
    pub node_dim: usize,
    pub gcn_layers: usize,
    /// Attention feature size `F`.
    pub attention_dim: usize,
    pub encoder_dim: usize,
    pub encoder_layers: usize,
    /// Relative positions are clipped to `±relative_window`.
    pub relative_window: usize,
    pub max_seq_len: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub top_docs: usize,
    pub top_sentences: usize,
    pub seed: u64,
    pub stage1_epochs: usize,
    pub stage2_epochs: usize,
    /// Share GCN weights between the claim graph and the evidence graph.
    pub tied_gcn: bool,
    /// Topology-sort evidence before encoding (off = document order).
    pub reorder: bool,
    /// Use the GCN + graph attention branch (off = classify from `h([CLS])`).
    pub use_graph: bool,
    /// Permit `gcn_layers = 0`; only meaningful for ablations.
    pub ablation_mode: bool,
    pub init_scale: f64,
    /// Negatives sampled per gold sentence when training the evidence selector.
    pub selector_negatives: usize,
    pub jobs: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            node_dim: 100,
            gcn_layers: 2,
            attention_dim: 100,
            encoder_dim: 64,
            encoder_layers: 2,
            relative_window: 16,
            max_seq_len: 256,
            learning_rate: 2e-6,
            weight_decay: 0.01,
            batch_size: 6,
            top_docs: 10,
            top_sentences: 5,
            seed: 0,
            stage1_epochs: 30,
            stage2_epochs: 60,
            tied_gcn: true,
            reorder: true,
            use_graph: true,
            ablation_mode: false,
            init_scale: 0.08,
            selector_negatives: 4,
            jobs: 1,
        }
    }
}

impl Config {
    /// Small dimensions and a learning rate that trains from scratch on the
    /// synthetic data in seconds.
    pub fn desk() -> Self {
        Config {
            node_dim: 16,
            attention_dim: 16,
            encoder_dim: 16,
            max_seq_len: 128,
            learning_rate: 1e-3,
            batch_size: 8,
            ..Config::default()
        }
    }

    /// Sized for the synthetic dataset: wider than [`Config::desk`] and
    /// trained longer.
    pub fn toy() -> Self {
        Config {
            node_dim: 32,
            attention_dim: 32,
            encoder_dim: 32,
            learning_rate: 3e-3,
            stage1_epochs: 60,
            stage2_epochs: 140,
            ..Config::desk()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "default" => Ok(Config::default()),
            "desk" => Ok(Config::desk()),
            "toy" => Ok(Config::toy()),
            other => Err(Error::Config(format!("unknown preset {other:?}"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("node_dim", self.node_dim),
            ("attention_dim", self.attention_dim),
            ("encoder_dim", self.encoder_dim),
            ("encoder_layers", self.encoder_layers),
            ("batch_size", self.batch_size),
            ("top_docs", self.top_docs),
            ("top_sentences", self.top_sentences),
            ("jobs", self.jobs),
        ];
        for (name, v) in dims {
            if v < 1 {
                return Err(Error::Config(format!("{name} must be >= 1")));
            }
        }
        let limits = [
            ("node_dim", self.node_dim, MAX_DIM),
            ("attention_dim", self.attention_dim, MAX_DIM),
            ("encoder_dim", self.encoder_dim, MAX_DIM),
            ("max_seq_len", self.max_seq_len, MAX_DIM),
            ("relative_window", self.relative_window, MAX_DIM),
            ("encoder_layers", self.encoder_layers, MAX_LAYERS),
            ("gcn_layers", self.gcn_layers, MAX_LAYERS),
        ];
        for (name, v, max) in limits {
            if v > max {
                return Err(Error::Config(format!("{name} must be <= {max}")));
            }
        }
        if self.gcn_layers == 0 && !self.ablation_mode {
            return Err(Error::Config(
                "gcn_layers = 0 is only allowed with ablation_mode = true".into(),
            ));
        }
        if self.max_seq_len < 2 {
            return Err(Error::Config("max_seq_len must be >= 2".into()));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config("learning_rate must be > 0".into()));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite())
            || !(self.init_scale > 0.0 && self.init_scale.is_finite())
        {
            return Err(Error::Config("weight_decay must be >= 0 and init_scale > 0".into()));
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        Config::parse_onto(Config::default(), text)
    }

    /// Like [`Config::parse`], but keys absent from `text` keep their values
    /// from `base` rather than the defaults.
    pub fn parse_onto(base: Config, text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            let overlay: serde_json::Map<String, serde_json::Value> =
                serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
            let mut merged = match serde_json::to_value(base).expect("config serializes") {
                serde_json::Value::Object(m) => m,
                _ => unreachable!("config is a struct"),
            };
            merged.extend(overlay);
            return serde_json::from_value(serde_json::Value::Object(merged))
                .map_err(|e| Error::Config(e.to_string()));
        }
        let mut cfg = base;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Config::load_onto(Config::default(), path)
    }

    pub fn load_onto(base: Config, path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Config::parse_onto(base, &text)
    }

    /// Set one field from its string form; used for key=value files and
    /// command-line overrides.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
        }
        match key {
            "node_dim" => self.node_dim = num(key, value)?,
            "gcn_layers" => self.gcn_layers = num(key, value)?,
            "attention_dim" => self.attention_dim = num(key, value)?,
            "encoder_dim" => self.encoder_dim = num(key, value)?,
            "encoder_layers" => self.encoder_layers = num(key, value)?,
            "relative_window" => self.relative_window = num(key, value)?,
            "max_seq_len" => self.max_seq_len = num(key, value)?,
            "learning_rate" => self.learning_rate = num(key, value)?,
            "weight_decay" => self.weight_decay = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "top_docs" => self.top_docs = num(key, value)?,
            "top_sentences" => self.top_sentences = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "stage1_epochs" => self.stage1_epochs = num(key, value)?,
            "stage2_epochs" => self.stage2_epochs = num(key, value)?,
            "tied_gcn" => self.tied_gcn = num(key, value)?,
            "reorder" => self.reorder = num(key, value)?,
            "use_graph" => self.use_graph = num(key, value)?,
            "ablation_mode" => self.ablation_mode = num(key, value)?,
            "init_scale" => self.init_scale = num(key, value)?,
            "selector_negatives" => self.selector_negatives = num(key, value)?,
            "jobs" => self.jobs = num(key, value)?,
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }
}
