//! Semantic-role-labelled sentences and the version-1 SRL JSON document.
//!
//! Wire layout:
//!
//! ```json
//! {
//!   "version": 1,
//!   "instance_id": "optional",
//!   "claim": {"sentence_id": "c", "source_doc": "", "tokens": ["..."], "tuples": [...]},
//!   "evidence": [ {sentence}, ... ]
//! }
//! ```
//!
//! with `tuple = {"tuple_id": 0, "arguments": [{"role": "verb", "text": "...", "span": [s, e]}]}`.
//! Sentences may carry an optional `source_index` (the sentence's index inside
//! `source_doc`), which is what predicted evidence is reported against.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::tokenize::Token;
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SrlRole {
    Verb,
    Argument,
    Location,
    Temporal,
    /// Any role the graph builder does not use (manner, negation, ...).
    Other,
}

impl SrlRole {
    pub fn as_str(self) -> &'static str {
        match self {
            SrlRole::Verb => "verb",
            SrlRole::Argument => "argument",
            SrlRole::Location => "location",
            SrlRole::Temporal => "temporal",
            SrlRole::Other => "other",
        }
    }

    /// Unknown role names fold into [`SrlRole::Other`].
    pub fn parse(s: &str) -> SrlRole {
        match s {
            "verb" => SrlRole::Verb,
            "argument" => SrlRole::Argument,
            "location" => SrlRole::Location,
            "temporal" => SrlRole::Temporal,
            _ => SrlRole::Other,
        }
    }
}

impl fmt::Display for SrlRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for SrlRole {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for SrlRole {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(SrlRole::parse(&s))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SrlArgument {
    pub role: SrlRole,
    pub text: String,
    /// Half-open token range `[start, end)` within the sentence.
    pub token_span: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SrlTuple {
    pub tuple_id: usize,
    pub sentence_id: String,
    pub arguments: Vec<SrlArgument>,
}

impl SrlTuple {
    pub fn verb(&self) -> &SrlArgument {
        self.arguments
            .iter()
            .find(|a| a.role == SrlRole::Verb)
            .expect("validated tuple has a verb")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub sentence_id: String,
    pub source_doc: String,
    pub source_index: Option<usize>,
    pub tokens: Vec<Token>,
    pub tuples: Vec<SrlTuple>,
}

impl Sentence {
    pub fn text(&self) -> String {
        join_tokens(&self.tokens)
    }

    /// Build and validate a sentence from raw token strings and tuples.
    pub fn new(
        sentence_id: impl Into<String>,
        source_doc: impl Into<String>,
        tokens: Vec<String>,
        tuples: Vec<SrlTuple>,
    ) -> Result<Self> {
        let sentence_id = sentence_id.into();
        let sentence = Sentence {
            tokens: tokens
                .into_iter()
                .enumerate()
                .map(|(index, text)| Token { text, index })
                .collect(),
            tuples: tuples
                .into_iter()
                .map(|mut t| {
                    t.sentence_id = sentence_id.clone();
                    t
                })
                .collect(),
            sentence_id,
            source_doc: source_doc.into(),
            source_index: None,
        };
        sentence.validate("sentence")?;
        Ok(sentence)
    }

    fn validate(&self, at: &str) -> Result<()> {
        if self.sentence_id.is_empty() {
            return Err(Error::validation(format!("{at}.sentence_id"), "empty"));
        }
        for (i, tok) in self.tokens.iter().enumerate() {
            if tok.text.is_empty() || tok.text.chars().any(char::is_whitespace) {
                return Err(Error::validation(
                    format!("{at}.tokens[{i}]"),
                    "token must be non-empty and contain no whitespace",
                ));
            }
            if tok.index != i {
                return Err(Error::validation(format!("{at}.tokens[{i}]"), "index gap"));
            }
        }
        let mut seen = HashSet::new();
        for (ti, tuple) in self.tuples.iter().enumerate() {
            let at_t = format!("{at}.tuples[{ti}]");
            if !seen.insert(tuple.tuple_id) {
                return Err(Error::validation(format!("{at_t}.tuple_id"), "duplicate tuple_id"));
            }
            let verbs = tuple
                .arguments
                .iter()
                .filter(|a| a.role == SrlRole::Verb)
                .count();
            if verbs != 1 {
                return Err(Error::validation(
                    format!("{at_t}.arguments"),
                    format!("expected exactly one verb, found {verbs}"),
                ));
            }
            for (ai, arg) in tuple.arguments.iter().enumerate() {
                let at_a = format!("{at_t}.arguments[{ai}]");
                let (start, end) = arg.token_span;
                if start >= end || end > self.tokens.len() {
                    return Err(Error::validation(
                        format!("{at_a}.span"),
                        format!(
                            "token_span out of range: [{start}, {end}) for {} tokens",
                            self.tokens.len()
                        ),
                    ));
                }
                let joined = join_tokens(&self.tokens[start..end]);
                if joined != arg.text {
                    return Err(Error::validation(
                        format!("{at_a}.text"),
                        format!("text {:?} does not match span tokens {joined:?}", arg.text),
                    ));
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn join_tokens(tokens: &[Token]) -> String {
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&t.text);
    }
    out
}

/// A claim together with its evidence sentences, all SRL-parsed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvidenceSet {
    pub instance_id: Option<String>,
    pub claim: Sentence,
    pub evidence: Vec<Sentence>,
}

impl EvidenceSet {
    pub fn new(claim: Sentence, evidence: Vec<Sentence>) -> Result<Self> {
        let set = EvidenceSet {
            instance_id: None,
            claim,
            evidence,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn with_instance_id(mut self, id: impl Into<String>) -> Self {
        self.instance_id = Some(id.into());
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.claim.validate("claim")?;
        let mut ids = HashSet::new();
        ids.insert(self.claim.sentence_id.as_str());
        for (i, s) in self.evidence.iter().enumerate() {
            s.validate(&format!("evidence[{i}]"))?;
            if !ids.insert(s.sentence_id.as_str()) {
                return Err(Error::validation(
                    format!("evidence[{i}].sentence_id"),
                    format!("duplicate sentence_id {:?}", s.sentence_id),
                ));
            }
        }
        Ok(())
    }

    pub fn evidence_sentence(&self, sentence_id: &str) -> Option<&Sentence> {
        self.evidence.iter().find(|s| s.sentence_id == sentence_id)
    }

    pub fn tuple_count(&self) -> usize {
        self.claim.tuples.len() + self.evidence.iter().map(|s| s.tuples.len()).sum::<usize>()
    }
}

// ---- wire format ----

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireDocument {
    version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    instance_id: Option<String>,
    claim: WireSentence,
    evidence: Vec<WireSentence>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireSentence {
    sentence_id: String,
    #[serde(default)]
    source_doc: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source_index: Option<usize>,
    tokens: Vec<String>,
    #[serde(default)]
    tuples: Vec<WireTuple>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireTuple {
    tuple_id: usize,
    arguments: Vec<WireArgument>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireArgument {
    role: SrlRole,
    text: String,
    span: [usize; 2],
}

impl From<WireSentence> for Sentence {
    fn from(w: WireSentence) -> Self {
        let sentence_id = w.sentence_id;
        Sentence {
            tokens: w
                .tokens
                .into_iter()
                .enumerate()
                .map(|(index, text)| Token { text, index })
                .collect(),
            tuples: w
                .tuples
                .into_iter()
                .map(|t| SrlTuple {
                    tuple_id: t.tuple_id,
                    sentence_id: sentence_id.clone(),
                    arguments: t
                        .arguments
                        .into_iter()
                        .map(|a| SrlArgument {
                            role: a.role,
                            text: a.text,
                            token_span: (a.span[0], a.span[1]),
                        })
                        .collect(),
                })
                .collect(),
            sentence_id,
            source_doc: w.source_doc,
            source_index: w.source_index,
        }
    }
}

impl From<&Sentence> for WireSentence {
    fn from(s: &Sentence) -> Self {
        WireSentence {
            sentence_id: s.sentence_id.clone(),
            source_doc: s.source_doc.clone(),
            source_index: s.source_index,
            tokens: s.tokens.iter().map(|t| t.text.clone()).collect(),
            tuples: s
                .tuples
                .iter()
                .map(|t| WireTuple {
                    tuple_id: t.tuple_id,
                    arguments: t
                        .arguments
                        .iter()
                        .map(|a| WireArgument {
                            role: a.role,
                            text: a.text.clone(),
                            span: [a.token_span.0, a.token_span.1],
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

/// Parse and validate one version-1 SRL document.
pub fn parse_srl_document(json_text: &str) -> Result<EvidenceSet> {
    let wire: WireDocument =
        serde_json::from_str(json_text).map_err(|e| Error::from_json(&e, json_text))?;
    from_wire(wire)
}

fn from_wire(wire: WireDocument) -> Result<EvidenceSet> {
    if wire.version != SCHEMA_VERSION {
        return Err(Error::validation(
            "version",
            format!("unsupported version {} (expected {SCHEMA_VERSION})", wire.version),
        ));
    }
    let set = EvidenceSet {
        instance_id: wire.instance_id,
        claim: wire.claim.into(),
        evidence: wire.evidence.into_iter().map(Sentence::from).collect(),
    };
    set.validate()?;
    Ok(set)
}

fn to_wire(set: &EvidenceSet) -> WireDocument {
    WireDocument {
        version: SCHEMA_VERSION,
        instance_id: set.instance_id.clone(),
        claim: (&set.claim).into(),
        evidence: set.evidence.iter().map(WireSentence::from).collect(),
    }
}

/// Compact single-line JSON; suitable for one line of an SRL JSONL file.
pub fn to_srl_json(set: &EvidenceSet) -> String {
    serde_json::to_string(&to_wire(set)).expect("SRL document serializes")
}

pub fn to_srl_json_pretty(set: &EvidenceSet) -> String {
    serde_json::to_string_pretty(&to_wire(set)).expect("SRL document serializes")
}
