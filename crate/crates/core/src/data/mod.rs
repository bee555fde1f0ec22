//! Canonical data types and their JSON / JSONL encodings.

mod dataset;
mod srl;
mod tokenize;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use dataset::{
    class_counts, load_dataset, read_jsonl, read_jsonl_with, write_dataset, write_lines,
    EvidenceRef, Instance, Label,
};
pub use srl::{
    parse_srl_document, to_srl_json, to_srl_json_pretty, EvidenceSet, Sentence, SrlArgument,
    SrlRole, SrlTuple, SCHEMA_VERSION,
};
pub use tokenize::{tokenize, words, Token};

use crate::error::Result;

/// One corpus document (one Wikipedia page in FEVER terms).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub title: String,
    pub sentences: Vec<String>,
}

pub fn load_corpus(path: &Path) -> Result<Vec<Document>> {
    read_jsonl(path)
}

/// One line of a predictions file, laid out like a FEVER submission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub instance_id: String,
    pub predicted_label: Label,
    pub probabilities: [f64; 3],
    pub predicted_evidence: Vec<EvidenceRef>,
}

pub fn load_predictions(path: &Path) -> Result<Vec<Prediction>> {
    read_jsonl(path)
}

/// Load an SRL JSONL file: one version-1 document per line.
pub fn load_srl_collection(path: &Path) -> Result<Vec<EvidenceSet>> {
    read_jsonl_with(path, parse_srl_document)
}
