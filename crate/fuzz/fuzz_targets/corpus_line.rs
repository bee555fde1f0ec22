#![no_main]

use evigraph::data::{tokenize, Document};
use evigraph::pipeline::{retrieve_documents, select_evidence, LexicalScorer};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(doc) = serde_json::from_slice::<Document>(data) else { return };
    let claim = doc.sentences.first().cloned().unwrap_or_default();
    for s in &doc.sentences {
        let toks = tokenize(s);
        assert!(toks.iter().enumerate().all(|(i, t)| t.index == i && !t.text.is_empty()));
    }
    let corpus = [doc];
    let docs = retrieve_documents(&claim, &corpus, 1);
    assert!(docs.len() <= 1);
    let picked = select_evidence(&claim, &[&corpus[0]], 5, &LexicalScorer);
    assert!(picked.len() <= 5.min(corpus[0].sentences.len()));
});
