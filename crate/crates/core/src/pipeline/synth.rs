//! Templated synthetic claims with their own SRL parses.
//!
//! The world has events, places and regions. Every event occurred in one
//! place; most places lie in a region, the rest ("orphans") have no region
//! fact. Claims state the region of an event:
//!
//! * SUPPORTED: evidence chains the event to its place and the place to the
//!   claimed region.
//! * REFUTED: the same chain ends in a different region.
//! * NOT ENOUGH INFO: the event's place is an orphan; the evidence instead
//!   locates an unrelated place in the claimed region.
//!
//! Each evidence set also carries one distractor event sentence, and the
//! evidence order is shuffled.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{Document, EvidenceRef, EvidenceSet, Instance, Label, Sentence, SrlArgument, SrlRole, SrlTuple};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthOptions {
    pub train: usize,
    pub dev: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub corpus: Vec<Document>,
    pub train: Vec<Instance>,
    pub dev: Vec<Instance>,
    /// One parse per train and dev instance.
    pub srl: Vec<EvidenceSet>,
}

const REGIONS: usize = 4;
const PLACES: usize = 16;
const ORPHANS: usize = 4;
const EVENTS: usize = 48;

const ONSETS: &[&str] = &["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u"];
const CODAS: &[&str] = &["", "n", "r", "l", "s", "k"];

struct World {
    regions: Vec<String>,
    places: Vec<String>,
    /// `None` for orphan places.
    place_region: Vec<Option<usize>>,
    events: Vec<String>,
    event_place: Vec<usize>,
}

fn name(rng: &mut ChaCha8Rng, used: &mut BTreeSet<String>) -> String {
    loop {
        let syllables = rng.gen_range(2..=3);
        let mut s = String::new();
        for _ in 0..syllables {
            s.push_str(ONSETS.choose(rng).unwrap());
            s.push_str(VOWELS.choose(rng).unwrap());
        }
        s.push_str(CODAS.choose(rng).unwrap());
        let mut chars = s.chars();
        let cap: String = chars.next().unwrap().to_uppercase().chain(chars).collect();
        if used.insert(cap.to_lowercase()) {
            return cap;
        }
    }
}

impl World {
    fn new(rng: &mut ChaCha8Rng) -> World {
        let mut used = BTreeSet::new();
        let regions: Vec<String> = (0..REGIONS).map(|_| name(rng, &mut used)).collect();
        let places: Vec<String> = (0..PLACES).map(|_| name(rng, &mut used)).collect();
        let place_region = (0..PLACES)
            .map(|p| (p >= ORPHANS).then(|| rng.gen_range(0..REGIONS)))
            .collect();
        let events: Vec<String> = (0..EVENTS).map(|_| name(rng, &mut used)).collect();
        // the first events cover every place, the rest are random
        let event_place = (0..EVENTS)
            .map(|e| if e < PLACES { e } else { rng.gen_range(0..PLACES) })
            .collect();
        World {
            regions,
            places,
            place_region,
            events,
            event_place,
        }
    }

    fn event_doc(&self, e: usize) -> String {
        self.events[e].clone()
    }

    fn place_doc(&self, p: usize) -> String {
        self.places[p].clone()
    }

    fn corpus(&self) -> Vec<Document> {
        let mut docs = Vec::new();
        for (e, ev) in self.events.iter().enumerate() {
            docs.push(Document {
                doc_id: self.event_doc(e),
                title: ev.clone(),
                sentences: vec![
                    format!("{ev} occurred in {} .", self.places[self.event_place[e]]),
                    format!("{ev} attracted many visitors ."),
                ],
            });
        }
        for (p, pl) in self.places.iter().enumerate() {
            let first = match self.place_region[p] {
                Some(r) => format!("{pl} is located in {} .", self.regions[r]),
                None => format!("{pl} is known for its markets ."),
            };
            docs.push(Document {
                doc_id: self.place_doc(p),
                title: pl.clone(),
                sentences: vec![first, format!("{pl} has a long history .")],
            });
        }
        docs.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
        docs
    }
}

fn arg(role: SrlRole, tokens: &[&str], start: usize, end: usize) -> SrlArgument {
    SrlArgument {
        role,
        text: tokens[start..end].join(" "),
        token_span: (start, end),
    }
}

/// `X occurred in P .`
fn occurred(id: &str, doc: &str, x: &str, p: &str) -> Sentence {
    let toks = [x, "occurred", "in", p, "."];
    let tuple = SrlTuple {
        tuple_id: 0,
        sentence_id: String::new(),
        arguments: vec![
            arg(SrlRole::Argument, &toks, 0, 1),
            arg(SrlRole::Verb, &toks, 1, 2),
            arg(SrlRole::Location, &toks, 2, 4),
        ],
    };
    let mut s = Sentence::new(id, doc, toks.iter().map(|t| t.to_string()).collect(), vec![tuple])
        .expect("template is valid");
    s.source_index = Some(0);
    s
}

/// `P is located in R .`
fn located(id: &str, doc: &str, p: &str, r: &str) -> Sentence {
    let toks = [p, "is", "located", "in", r, "."];
    let tuple = SrlTuple {
        tuple_id: 0,
        sentence_id: String::new(),
        arguments: vec![
            arg(SrlRole::Argument, &toks, 0, 1),
            arg(SrlRole::Verb, &toks, 2, 3),
            arg(SrlRole::Location, &toks, 3, 5),
        ],
    };
    let mut s = Sentence::new(id, doc, toks.iter().map(|t| t.to_string()).collect(), vec![tuple])
        .expect("template is valid");
    s.source_index = Some(0);
    s
}

fn instance(world: &World, rng: &mut ChaCha8Rng, id: String, label: Label) -> (Instance, EvidenceSet) {
    let w = world;
    let located_events: Vec<usize> = (0..EVENTS).filter(|&e| w.place_region[w.event_place[e]].is_some()).collect();
    let orphan_events: Vec<usize> = (0..EVENTS).filter(|&e| w.place_region[w.event_place[e]].is_none()).collect();
    let x = match label {
        Label::Nei => *orphan_events.choose(rng).unwrap(),
        _ => *located_events.choose(rng).unwrap(),
    };
    let p = w.event_place[x];
    let (q, region) = match label {
        Label::Supported => (p, w.place_region[p].unwrap()),
        Label::Refuted => {
            let true_region = w.place_region[p].unwrap();
            let others: Vec<usize> = (0..REGIONS).filter(|&r| r != true_region).collect();
            (p, *others.choose(rng).unwrap())
        }
        Label::Nei => {
            let q = *(ORPHANS..PLACES).collect::<Vec<_>>().choose(rng).unwrap();
            (q, w.place_region[q].unwrap())
        }
    };
    let distractors: Vec<usize> = (0..EVENTS)
        .filter(|&e| e != x && w.event_place[e] != p && w.event_place[e] != q)
        .collect();
    let y = *distractors.choose(rng).unwrap();

    let claim_region = &w.regions[region];
    let located_region = &w.regions[w.place_region[q].unwrap()];
    let mut evidence = vec![
        occurred("e", &w.event_doc(x), &w.events[x], &w.places[p]),
        located("e", &w.place_doc(q), &w.places[q], located_region),
        occurred("e", &w.event_doc(y), &w.events[y], &w.places[w.event_place[y]]),
    ];
    evidence.shuffle(rng);
    for (i, s) in evidence.iter_mut().enumerate() {
        s.sentence_id = format!("s{}", i + 1);
        for t in &mut s.tuples {
            t.sentence_id = s.sentence_id.clone();
        }
    }
    let mut claim = occurred("c", "", &w.events[x], claim_region);
    claim.source_index = None;
    let claim_text = claim.text();
    let es = EvidenceSet::new(claim, evidence).expect("template is valid").with_instance_id(id.clone());
    let groups = match label {
        Label::Nei => vec![],
        _ => vec![[EvidenceRef::new(w.event_doc(x), 0), EvidenceRef::new(w.place_doc(p), 0)]
            .into_iter()
            .collect()],
    };
    (
        Instance {
            instance_id: id,
            claim: claim_text,
            label,
            gold_evidence_groups: groups,
        },
        es,
    )
}

fn split(world: &World, rng: &mut ChaCha8Rng, prefix: &str, n: usize) -> (Vec<Instance>, Vec<EvidenceSet>) {
    let mut labels: Vec<Label> = (0..n).map(|i| Label::ALL[i % 3]).collect();
    labels.shuffle(rng);
    labels
        .into_iter()
        .enumerate()
        .map(|(i, label)| instance(world, rng, format!("{prefix}-{i:04}"), label))
        .unzip()
}

/// Deterministic in `opts`: the same options give the same data.
pub fn synthesize(opts: &SynthOptions) -> SynthData {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let world = World::new(&mut rng);
    let (train, mut srl) = split(&world, &mut rng, "train", opts.train);
    let (dev, dev_srl) = split(&world, &mut rng, "dev", opts.dev);
    srl.extend(dev_srl);
    SynthData {
        corpus: world.corpus(),
        train,
        dev,
        srl,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{class_counts, parse_srl_document, to_srl_json};
    use crate::graph::{build_graph, Origin};

    fn data() -> SynthData {
        synthesize(&SynthOptions {
            train: 30,
            dev: 9,
            seed: 7,
        })
    }

    #[test]
    fn balanced_and_deterministic() {
        let d = data();
        assert_eq!(class_counts(&d.train), [10, 10, 10]);
        assert_eq!(class_counts(&d.dev), [3, 3, 3]);
        assert_eq!(d, data());
        assert_eq!(d.srl.len(), 39);
    }

    #[test]
    fn parses_round_trip() {
        for es in &data().srl {
            assert_eq!(&parse_srl_document(&to_srl_json(es)).unwrap(), es);
        }
    }

    #[test]
    fn gold_refs_exist_in_corpus() {
        let d = data();
        for inst in &d.train {
            for r in inst.gold_evidence_groups.iter().flatten() {
                let doc = d.corpus.iter().find(|doc| doc.doc_id == r.0).unwrap();
                assert!(r.1 < doc.sentences.len());
            }
        }
    }

    #[test]
    fn evidence_text_matches_corpus() {
        let d = data();
        for es in &d.srl {
            for s in &es.evidence {
                let doc = d.corpus.iter().find(|doc| doc.doc_id == s.source_doc).unwrap();
                assert_eq!(doc.sentences[s.source_index.unwrap()], s.text());
            }
        }
    }

    #[test]
    fn supported_chain_is_linked() {
        let d = data();
        for (inst, es) in d.train.iter().zip(&d.srl) {
            let g = build_graph(es, Origin::Evidence);
            let cross = g.edges.iter().filter(|e| e.kind == crate::graph::EdgeKind::CrossTuple).count();
            match inst.label {
                Label::Nei => {}
                _ => assert!(cross >= 1, "{}", inst.instance_id),
            }
        }
    }
}
