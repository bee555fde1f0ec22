//! Versioned JSON checkpoints.
//!
//! Floats are written in shortest round-trip decimal form, so a reload
//! reproduces every parameter bit for bit and two identical training runs
//! produce byte-identical files.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::model::{expected_shapes, Model, Vocab};
use crate::nn::{ParamStore, Tensor};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpochRecord {
    pub stage: u8,
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
    /// Instances without an SRL parse.
    pub skipped_instances: usize,
    pub truncated_tokens: usize,
    /// Graph nodes that lost all their tokens to truncation.
    pub missing_nodes: usize,
    pub graphs_built: usize,
}

impl TrainingLog {
    pub fn final_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.loss)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub version: u32,
    pub config: Config,
    pub vocab: Vocab,
    pub params: BTreeMap<String, Tensor>,
    pub seed: u64,
    #[serde(default)]
    pub training_log: TrainingLog,
}

impl Checkpoint {
    pub fn from_model(model: &Model, training_log: TrainingLog) -> Checkpoint {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            config: model.config.clone(),
            vocab: model.vocab.clone(),
            params: model
                .params
                .iter()
                .map(|p| (p.name.clone(), p.value.clone()))
                .collect(),
            seed: model.config.seed,
            training_log,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    /// Parse and check version, config, and every parameter shape.
    pub fn parse(text: &str) -> Result<Checkpoint> {
        let ck: Checkpoint = serde_json::from_str(text).map_err(|e| Error::from_json(&e, text))?;
        ck.check()?;
        Ok(ck)
    }

    fn check(&self) -> Result<()> {
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported version {} (expected {CHECKPOINT_VERSION})",
                self.version
            )));
        }
        self.config.validate()?;
        for (name, t) in &self.params {
            Tensor::new(t.shape().to_vec(), t.data().to_vec())
                .map_err(|e| Error::Checkpoint(format!("parameter {name:?}: {e}")))?;
        }
        let expected = expected_shapes(&self.config, self.vocab.len());
        for (name, shape) in &expected {
            match self.params.get(name) {
                None => return Err(Error::Checkpoint(format!("missing parameter {name:?}"))),
                Some(t) if t.shape() != shape.as_slice() => {
                    return Err(Error::Checkpoint(format!(
                        "parameter {name:?} has shape {:?}, expected {shape:?}",
                        t.shape()
                    )))
                }
                Some(_) => {}
            }
        }
        if let Some(extra) = self.params.keys().find(|k| !expected.contains_key(*k)) {
            return Err(Error::Checkpoint(format!("unexpected parameter {extra:?}")));
        }
        Ok(())
    }

    pub fn into_model(self) -> Result<Model> {
        self.check()?;
        let mut params = ParamStore::new();
        for (name, t) in self.params {
            params.insert(&name, t);
        }
        Ok(Model {
            config: self.config,
            vocab: self.vocab,
            params,
        })
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::parse(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> Model {
        let vocab = Vocab::from_words(["alpha".to_string(), "beta".to_string()]);
        Model::new(Config::desk(), vocab).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = model();
        let ck = Checkpoint::from_model(&m, TrainingLog::default());
        let text = ck.to_json();
        let back = Checkpoint::parse(&text).unwrap();
        assert_eq!(back.to_json(), text);
        let m2 = back.into_model().unwrap();
        for (a, b) in m.params.iter().zip(m2.params.iter()) {
            assert_eq!(a.name, b.name);
            let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&a.value), bits(&b.value));
        }
    }

    #[test]
    fn rejects_other_versions() {
        let mut ck = Checkpoint::from_model(&model(), TrainingLog::default());
        ck.version = 2;
        let err = Checkpoint::parse(&ck.to_json()).unwrap_err();
        assert!(err.to_string().contains("unsupported version"));
    }

    #[test]
    fn rejects_wrong_shapes() {
        let mut ck = Checkpoint::from_model(&model(), TrainingLog::default());
        ck.params.insert("cls.b".into(), Tensor::zeros(&[4]));
        assert!(Checkpoint::parse(&ck.to_json()).is_err());
        ck.params.remove("cls.b");
        assert!(Checkpoint::parse(&ck.to_json()).is_err());
    }

    #[test]
    fn rejects_inconsistent_tensor() {
        let ck = Checkpoint::from_model(&model(), TrainingLog::default());
        let text = ck.to_json().replacen("\"shape\":[3]", "\"shape\":[5]", 1);
        assert!(Checkpoint::parse(&text).is_err());
    }
}
