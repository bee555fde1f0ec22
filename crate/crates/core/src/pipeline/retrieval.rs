//! Keyword-matching document retrieval.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::data::{words, Document};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetrievedDoc {
    pub doc_id: String,
    pub score: f64,
}

/// Shared title words with the claim, plus 0.5 when the whole title occurs
/// in the claim as a contiguous word run.
pub fn title_score(claim_words: &[String], title: &str) -> f64 {
    let title_words: Vec<String> = words(&title.replace('_', " ")).collect();
    if title_words.is_empty() {
        return 0.0;
    }
    let claim_set: BTreeSet<&String> = claim_words.iter().collect();
    let title_set: BTreeSet<&String> = title_words.iter().collect();
    let overlap = claim_set.intersection(&title_set).count() as f64;
    let contiguous = claim_words
        .windows(title_words.len())
        .any(|w| w == title_words.as_slice());
    overlap + if contiguous { 0.5 } else { 0.0 }
}

/// Top `m` documents by [`title_score`], ties broken by `doc_id`.
pub fn retrieve_documents(claim: &str, corpus: &[Document], m: usize) -> Vec<RetrievedDoc> {
    let claim_words: Vec<String> = words(claim).collect();
    let mut scored: Vec<RetrievedDoc> = corpus
        .iter()
        .map(|d| RetrievedDoc {
            doc_id: d.doc_id.clone(),
            score: title_score(&claim_words, &d.title),
        })
        .collect();
    scored.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.doc_id.cmp(&b.doc_id)));
    scored.truncate(m);
    if !scored.is_empty() && scored.iter().all(|d| d.score == 0.0) {
        log::warn!("no document title overlaps the claim {claim:?}; returning the lowest ids");
    }
    scored
}
