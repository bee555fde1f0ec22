//! Sentence-level evidence ranking.

use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::train::{finish, fit, Trainable};
use crate::config::Config;
use crate::data::{words, Document, EvidenceRef, Instance};
use crate::error::Result;
use crate::graph::multiset_overlap;
use crate::model::{encoder_shape, Vocab, CLS, SEP};
use crate::nn::encoder::{self, EncoderInput, EncoderShape, SEGMENT_CLAIM, SEGMENT_EVIDENCE};
use crate::nn::{ParamStore, Tape, Var};

/// Relevance of a sentence to a claim; larger is more relevant.
pub trait Scorer: Sync {
    fn score(&self, claim: &str, sentence: &str) -> f64;
}

/// `|multiset overlap| / sqrt(|claim| · |sentence|)` over normalized words.
pub fn lexical_score(claim: &str, sentence: &str) -> f64 {
    let c: Vec<String> = words(claim).collect();
    let s: Vec<String> = words(sentence).collect();
    if c.is_empty() || s.is_empty() {
        return 0.0;
    }
    multiset_overlap(&c, &s) as f64 / ((c.len() * s.len()) as f64).sqrt()
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LexicalScorer;

impl Scorer for LexicalScorer {
    fn score(&self, claim: &str, sentence: &str) -> f64 {
        lexical_score(claim, sentence)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedSentence {
    pub doc_id: String,
    pub index: usize,
    pub score: f64,
}

impl RankedSentence {
    pub fn evidence_ref(&self) -> EvidenceRef {
        EvidenceRef::new(self.doc_id.clone(), self.index)
    }
}

/// Every sentence of `docs`, best first, ties by `(doc_id, index)`.
pub fn rank_evidence(claim: &str, docs: &[&Document], scorer: &dyn Scorer) -> Vec<RankedSentence> {
    let mut ranked: Vec<RankedSentence> = docs
        .iter()
        .flat_map(|d| {
            d.sentences.iter().enumerate().map(|(index, s)| RankedSentence {
                doc_id: d.doc_id.clone(),
                index,
                score: scorer.score(claim, s),
            })
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.doc_id.cmp(&b.doc_id))
            .then(a.index.cmp(&b.index))
    });
    ranked
}

pub fn select_evidence(claim: &str, docs: &[&Document], k_ev: usize, scorer: &dyn Scorer) -> Vec<RankedSentence> {
    let mut ranked = rank_evidence(claim, docs, scorer);
    ranked.truncate(k_ev);
    ranked
}

/// Encoder plus a two-way relevance head over `[claim, SEP, sentence, SEP, CLS]`.
#[derive(Debug, Clone)]
pub struct TrainedScorer {
    pub vocab: Vocab,
    pub params: ParamStore,
    shape: EncoderShape,
    max_len: usize,
}

impl Trainable for TrainedScorer {
    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }
}

impl TrainedScorer {
    fn input(&self, claim: &str, sentence: &str) -> EncoderInput {
        let room = self.max_len.saturating_sub(3).max(1);
        let c: Vec<String> = words(claim).take(room).collect();
        let s: Vec<String> = words(sentence).take(room - c.len().min(room)).collect();
        let mut token_ids = Vec::with_capacity(c.len() + s.len() + 3);
        let mut segments = Vec::with_capacity(token_ids.capacity());
        for w in &c {
            token_ids.push(self.vocab.id(w));
            segments.push(SEGMENT_CLAIM);
        }
        token_ids.push(SEP);
        segments.push(SEGMENT_CLAIM);
        for w in &s {
            token_ids.push(self.vocab.id(w));
            segments.push(SEGMENT_EVIDENCE);
        }
        token_ids.extend([SEP, CLS]);
        segments.extend([SEGMENT_EVIDENCE, SEGMENT_EVIDENCE]);
        EncoderInput { token_ids, segments }
    }

    fn logits(&self, tape: &mut Tape, claim: &str, sentence: &str) -> Result<Var> {
        let enc = encoder::encode(tape, &self.params, self.shape, &self.input(claim, sentence), true)?;
        let w = tape.param(&self.params, "sel.W")?;
        let b = tape.param(&self.params, "sel.b")?;
        let z = tape.matmul(enc.cls, w)?;
        tape.add_row_bias(z, b)
    }

    /// Fit on gold sentences of verifiable instances, each paired with
    /// `config.selector_negatives` random non-gold corpus sentences.
    pub fn train(instances: &[Instance], corpus: &[Document], config: &Config) -> Result<TrainedScorer> {
        config.validate()?;
        let docs: HashMap<&str, &Document> = corpus.iter().map(|d| (d.doc_id.as_str(), d)).collect();
        let all: Vec<(&str, usize)> = corpus
            .iter()
            .flat_map(|d| (0..d.sentences.len()).map(move |i| (d.doc_id.as_str(), i)))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(2);
        let mut examples: Vec<(&str, &str, usize)> = Vec::new();
        for inst in instances {
            let gold: BTreeSet<(&str, usize)> = inst
                .gold_evidence_groups
                .iter()
                .flatten()
                .map(|r| (r.0.as_str(), r.1))
                .collect();
            for &(doc, i) in &gold {
                let Some(s) = docs.get(doc).and_then(|d| d.sentences.get(i)) else {
                    continue;
                };
                examples.push((&inst.claim, s, 1));
                let negatives: Vec<&(&str, usize)> = all.iter().filter(|k| !gold.contains(k)).collect();
                for &&(nd, ni) in negatives.choose_multiple(&mut rng, config.selector_negatives) {
                    examples.push((&inst.claim, &docs[nd].sentences[ni], 0));
                }
            }
        }
        let vocab = Vocab::from_words(
            instances
                .iter()
                .flat_map(|i| words(&i.claim).collect::<Vec<_>>())
                .chain(corpus.iter().flat_map(|d| d.sentences.iter().flat_map(|s| words(s).collect::<Vec<_>>()))),
        );
        let shape = encoder_shape(config, vocab.len());
        let mut params = ParamStore::new();
        encoder::init_params(&mut params, shape, config.init_scale, &mut rng);
        params.insert_uniform("sel.W", &[config.encoder_dim, 2], config.init_scale, &mut rng);
        params.insert_zeros("sel.b", &[2]);
        let mut scorer = TrainedScorer {
            vocab,
            params,
            shape,
            max_len: config.max_seq_len,
        };
        fit(&mut scorer, examples.len(), config.stage1_epochs, config, 1, &mut rng, |m, i| {
            let (claim, sentence, gold) = examples[i];
            let mut tape = Tape::new();
            let logits = m.logits(&mut tape, claim, sentence)?;
            finish(tape, logits, gold)
        })?;
        Ok(scorer)
    }
}

impl Scorer for TrainedScorer {
    fn score(&self, claim: &str, sentence: &str) -> f64 {
        let mut tape = Tape::new();
        let logits = self.logits(&mut tape, claim, sentence).expect("scorer input is well formed");
        let p = tape.softmax_rows(logits).expect("one row");
        tape.value(p).data()[1]
    }
}
