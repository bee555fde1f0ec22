use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Supported,
    Refuted,
    Nei,
}

impl Label {
    /// Class order used for logits and argmax tie-breaking.
    pub const ALL: [Label; 3] = [Label::Supported, Label::Refuted, Label::Nei];

    pub fn index(self) -> usize {
        match self {
            Label::Supported => 0,
            Label::Refuted => 1,
            Label::Nei => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Label> {
        Label::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Supported => "SUPPORTED",
            Label::Refuted => "REFUTED",
            Label::Nei => "NOT ENOUGH INFO",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "SUPPORTED" | "SUPPORTS" => Ok(Label::Supported),
            "REFUTED" | "REFUTES" => Ok(Label::Refuted),
            "NEI" | "NOT ENOUGH INFO" => Ok(Label::Nei),
            other => Err(Error::validation("label", format!("unknown label {other:?}"))),
        }
    }
}

impl Serialize for Label {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `(doc_id, sentence_index)`; serialized as a two-element array.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EvidenceRef(pub String, pub usize);

impl EvidenceRef {
    pub fn new(doc: impl Into<String>, index: usize) -> Self {
        EvidenceRef(doc.into(), index)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub instance_id: String,
    pub claim: String,
    pub label: Label,
    pub gold_evidence_groups: Vec<BTreeSet<EvidenceRef>>,
}

#[derive(Serialize)]
struct WireInstance<'a> {
    instance_id: &'a str,
    claim: &'a str,
    label: Label,
    evidence_groups: Vec<Vec<&'a EvidenceRef>>,
}

impl Instance {
    pub fn to_json_line(&self) -> String {
        let wire = WireInstance {
            instance_id: &self.instance_id,
            claim: &self.claim,
            label: self.label,
            evidence_groups: self
                .gold_evidence_groups
                .iter()
                .map(|g| g.iter().collect())
                .collect(),
        };
        serde_json::to_string(&wire).expect("instance serializes")
    }

    /// Parse one dataset line. Accepts the native layout
    /// (`instance_id`, `claim`, `label`, `evidence_groups`) and the FEVER
    /// shared-task layout (`id`, `claim`, `label`, `evidence` with
    /// `[annotation_id, evidence_id, wiki_url, sentence_id]` entries).
    pub fn from_json_line(line: &str) -> Result<Instance> {
        let value: Value = serde_json::from_str(line).map_err(|e| Error::from_json(&e, line))?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::validation("instance", "expected a JSON object"))?;
        let instance_id = match obj.get("instance_id").or_else(|| obj.get("id")) {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            _ => return Err(Error::validation("instance_id", "missing or not a string/number")),
        };
        let claim = obj
            .get("claim")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::validation("claim", "missing or not a string"))?
            .to_string();
        let label: Label = obj
            .get("label")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::validation("label", "missing or not a string"))?
            .parse()?;
        let gold_evidence_groups = if let Some(groups) = obj.get("evidence_groups") {
            serde_json::from_value::<Vec<BTreeSet<EvidenceRef>>>(groups.clone())
                .map_err(|e| Error::validation("evidence_groups", e.to_string()))?
        } else if let Some(groups) = obj.get("evidence") {
            fever_groups(groups)?
        } else {
            Vec::new()
        };
        Ok(Instance {
            instance_id,
            claim,
            label,
            gold_evidence_groups,
        })
    }
}

fn fever_groups(groups: &Value) -> Result<Vec<BTreeSet<EvidenceRef>>> {
    let bad = || Error::validation("evidence", "expected [[[ann, ev, wiki_url, sent_id], ...], ...]");
    let mut out = Vec::new();
    for group in groups.as_array().ok_or_else(bad)? {
        let mut set = BTreeSet::new();
        for entry in group.as_array().ok_or_else(bad)? {
            let entry = entry.as_array().ok_or_else(bad)?;
            if entry.len() != 4 {
                return Err(bad());
            }
            // NEI annotations carry nulls for the page and sentence.
            if let (Some(doc), Some(idx)) = (entry[2].as_str(), entry[3].as_u64()) {
                set.insert(EvidenceRef::new(doc, idx as usize));
            }
        }
        if !set.is_empty() {
            out.push(set);
        }
    }
    Ok(out)
}

/// Read a JSONL file, parsing every non-blank line with `parse`. Errors carry
/// the 1-based line number.
pub fn read_jsonl_with<T>(path: &Path, mut parse: impl FnMut(&str) -> Result<T>) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse(line).map_err(|e| Error::Line {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    read_jsonl_with(path, |line| {
        serde_json::from_str(line).map_err(|e| Error::from_json(&e, line))
    })
}

pub fn write_lines<I, S>(path: &Path, lines: I) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut text = String::new();
    for l in lines {
        text.push_str(l.as_ref());
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_dataset(path: &Path) -> Result<Vec<Instance>> {
    read_jsonl_with(path, Instance::from_json_line)
}

pub fn write_dataset(path: &Path, instances: &[Instance]) -> Result<()> {
    write_lines(path, instances.iter().map(Instance::to_json_line))
}

/// Per-class instance counts in `Label::ALL` order.
pub fn class_counts(instances: &[Instance]) -> [usize; 3] {
    let mut counts = [0; 3];
    for inst in instances {
        counts[inst.label.index()] += 1;
    }
    counts
}
