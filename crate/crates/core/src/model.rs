//! The verification model: vocabulary, input layout, and forward passes.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::data::{EvidenceSet, Sentence};
use crate::error::{Error, Result};
use crate::gat::{self, CLASSES};
use crate::gcn;
use crate::graph::{build_graph, Graph, Origin};
use crate::nn::encoder::{self, EncoderInput, EncoderShape, EncoderVars, SEGMENT_CLAIM, SEGMENT_EVIDENCE};
use crate::nn::{ParamStore, Tape, Tensor, Var};
use crate::sort::{document_order, order_evidence_graph};

pub const UNK: usize = 0;
pub const SEP: usize = 1;
pub const CLS: usize = 2;
const SPECIALS: [&str; 3] = ["[UNK]", "[SEP]", "[CLS]"];

/// Word vocabulary with the three special tokens at fixed ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocab {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocab { tokens, index }
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}

fn norm(token: &str) -> String {
    token.to_lowercase()
}

impl Vocab {
    /// Specials followed by every lowercased token of the given sets, sorted.
    pub fn build<'a>(sets: impl IntoIterator<Item = &'a EvidenceSet>) -> Vocab {
        let mut words = BTreeSet::new();
        for es in sets {
            for s in std::iter::once(&es.claim).chain(&es.evidence) {
                words.extend(s.tokens.iter().map(|t| norm(&t.text)));
            }
        }
        Self::from_words(words)
    }

    pub fn from_words(words: impl IntoIterator<Item = String>) -> Vocab {
        let mut tokens: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        let words: BTreeSet<String> = words.into_iter().collect();
        tokens.extend(words.into_iter().filter(|w| !SPECIALS.contains(&w.as_str())));
        Vocab::from(tokens)
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(&norm(token)).copied().unwrap_or(UNK)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// Token ids of `[claim, SEP, e_1, SEP, …, e_n, SEP, CLS]` and where each
/// sentence landed.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceLayout {
    pub input: EncoderInput,
    pub sentence_order: Vec<String>,
    /// Sentence id to (first position, tokens kept).
    pub placements: HashMap<String, (usize, usize)>,
    /// Evidence tokens dropped to respect `max_seq_len`.
    pub truncated_tokens: usize,
}

impl SequenceLayout {
    pub fn build(es: &EvidenceSet, order: &[String], vocab: &Vocab, max_len: usize) -> Result<Self> {
        let claim_len = es.claim.tokens.len();
        if claim_len + 2 > max_len {
            return Err(Error::validation(
                "claim",
                format!("claim has {claim_len} tokens; max_seq_len {max_len} leaves no room"),
            ));
        }
        let mut ids = Vec::with_capacity(max_len);
        let mut segments = Vec::with_capacity(max_len);
        let mut placements = HashMap::new();
        let mut push = |ids: &mut Vec<usize>, id, seg| {
            ids.push(id);
            segments.push(seg);
        };
        placements.insert(es.claim.sentence_id.clone(), (0, claim_len));
        for t in &es.claim.tokens {
            push(&mut ids, vocab.id(&t.text), SEGMENT_CLAIM);
        }
        push(&mut ids, SEP, SEGMENT_CLAIM);

        let mut budget = max_len - claim_len - 2;
        let mut truncated_tokens = 0;
        for sid in order {
            let s = es
                .evidence_sentence(sid)
                .ok_or_else(|| Error::validation("sentence_order", format!("unknown sentence {sid:?}")))?;
            let keep = s.tokens.len().min(budget);
            truncated_tokens += s.tokens.len() - keep;
            placements.insert(sid.clone(), (ids.len(), keep));
            for t in &s.tokens[..keep] {
                push(&mut ids, vocab.id(&t.text), SEGMENT_EVIDENCE);
            }
            budget -= keep;
            if budget > 0 {
                push(&mut ids, SEP, SEGMENT_EVIDENCE);
                budget -= 1;
            }
        }
        push(&mut ids, CLS, SEGMENT_EVIDENCE);
        Ok(SequenceLayout {
            input: EncoderInput {
                token_ids: ids,
                segments,
            },
            sentence_order: order.to_vec(),
            placements,
            truncated_tokens,
        })
    }

    pub fn len(&self) -> usize {
        self.input.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.input.token_ids.is_empty()
    }

    /// Encoder positions of `span` within `sentence_id` that survived truncation.
    pub fn positions(&self, sentence_id: &str, span: (usize, usize)) -> Vec<usize> {
        match self.placements.get(sentence_id) {
            Some(&(start, kept)) => (span.0..span.1.min(kept)).map(|i| start + i).collect(),
            None => Vec::new(),
        }
    }
}

/// Everything the graph branch needs for one graph.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphInput {
    pub positions: Vec<Vec<usize>>,
    pub adjacency: Tensor,
}

impl GraphInput {
    fn from_graph(g: &Graph, layout: &SequenceLayout, missing: &mut usize) -> GraphInput {
        if g.is_empty() {
            // one zero node
            return GraphInput {
                positions: vec![Vec::new()],
                adjacency: Tensor::identity(1),
            };
        }
        let positions = g
            .nodes
            .iter()
            .map(|n| {
                let p = layout.positions(&n.sentence_id, n.token_span);
                if p.is_empty() {
                    *missing += 1;
                    log::warn!("node {} ({:?}) fully truncated; using a zero vector", n.node_id, n.text);
                }
                p
            })
            .collect();
        GraphInput {
            positions,
            adjacency: gcn::normalize_adjacency(g),
        }
    }
}

/// One instance ready for the encoder and graph branch.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub instance_id: Option<String>,
    pub layout: SequenceLayout,
    pub claim: Option<GraphInput>,
    pub evidence: Option<GraphInput>,
    /// Graph nodes whose tokens were all truncated away.
    pub missing_nodes: usize,
    /// Number of [`Graph`]s constructed while preparing.
    pub graphs_built: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: Config,
    pub vocab: Vocab,
    pub params: ParamStore,
}

impl Model {
    /// Fresh parameters drawn from `config.seed`.
    pub fn new(config: Config, vocab: Vocab) -> Result<Model> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = ParamStore::new();
        let shape = encoder_shape(&config, vocab.len());
        let s = config.init_scale;
        encoder::init_params(&mut params, shape, s, &mut rng);
        params.insert_uniform("cls.W", &[config.encoder_dim, CLASSES], s, &mut rng);
        params.insert_zeros("cls.b", &[CLASSES]);
        gcn::init_params(
            &mut params,
            config.encoder_dim,
            config.node_dim,
            config.gcn_layers,
            config.tied_gcn,
            s,
            &mut rng,
        );
        gat::init_params(&mut params, config.node_dim, config.attention_dim, config.encoder_dim, s, &mut rng);
        Ok(Model { config, vocab, params })
    }

    pub fn encoder_shape(&self) -> EncoderShape {
        encoder_shape(&self.config, self.vocab.len())
    }

    /// Build graphs as needed, choose the evidence order, and lay out tokens.
    pub fn prepare(&self, es: &EvidenceSet) -> Result<Prepared> {
        let cfg = &self.config;
        let mut graphs_built = 0;
        let evidence_graph = (cfg.reorder || cfg.use_graph).then(|| {
            graphs_built += 1;
            build_graph(es, Origin::Evidence)
        });
        let order = match (&evidence_graph, cfg.reorder) {
            (Some(g), true) => order_evidence_graph(es, g).sentence_order,
            _ => document_order(es),
        };
        let layout = SequenceLayout::build(es, &order, &self.vocab, cfg.max_seq_len)?;
        let mut missing_nodes = 0;
        let (claim, evidence) = if cfg.use_graph {
            graphs_built += 1;
            let cg = build_graph(es, Origin::Claim).with_fallback(&[&es.claim]);
            let sentences: Vec<&Sentence> = es.evidence.iter().collect();
            let eg = evidence_graph.expect("built above").with_fallback(&sentences);
            (
                Some(GraphInput::from_graph(&cg, &layout, &mut missing_nodes)),
                Some(GraphInput::from_graph(&eg, &layout, &mut missing_nodes)),
            )
        } else {
            (None, None)
        };
        Ok(Prepared {
            instance_id: es.instance_id.clone(),
            layout,
            claim,
            evidence,
            missing_nodes,
            graphs_built,
        })
    }

    pub fn encode(&self, tape: &mut Tape, prep: &Prepared) -> Result<EncoderVars> {
        encoder::encode(tape, &self.params, self.encoder_shape(), &prep.layout.input, true)
    }

    /// Logits of the stage-1 head on `h([CLS])`.
    pub fn cls_logits(&self, tape: &mut Tape, cls: Var) -> Result<Var> {
        let w = tape.param(&self.params, "cls.W")?;
        let b = tape.param(&self.params, "cls.b")?;
        let z = tape.matmul(cls, w)?;
        tape.add_row_bias(z, b)
    }

    /// Node init, GCN on both graphs, attention, alignment and the head.
    pub fn graph_logits(&self, tape: &mut Tape, prep: &Prepared, states: Var, cls: Var) -> Result<Var> {
        let (Some(cg), Some(eg)) = (&prep.claim, &prep.evidence) else {
            return Err(Error::Config("instance was prepared without graphs".into()));
        };
        let cfg = &self.config;
        let wp = tape.param(&self.params, gcn::PROJECTION)?;
        let side = |tape: &mut Tape, gi: &GraphInput, origin| -> Result<Var> {
            let h0 = gcn::init_nodes_var(tape, states, &gi.positions, wp)?;
            let adj = tape.constant(gi.adjacency.clone());
            gcn::forward_params(tape, &self.params, origin, cfg.gcn_layers, cfg.tied_gcn, h0, adj)
        };
        let hc = side(tape, cg, Origin::Claim)?;
        let he = side(tape, eg, Origin::Evidence)?;
        Ok(gat::forward_var(tape, &self.params, hc, he, cls)?.logits)
    }

    /// The configured output: graph head when `use_graph`, else the CLS head.
    pub fn logits(&self, tape: &mut Tape, prep: &Prepared, states: Var, cls: Var) -> Result<Var> {
        if self.config.use_graph {
            self.graph_logits(tape, prep, states, cls)
        } else {
            self.cls_logits(tape, cls)
        }
    }

    pub fn probabilities(&self, prep: &Prepared) -> Result<[f64; CLASSES]> {
        let mut tape = Tape::new();
        let enc = self.encode(&mut tape, prep)?;
        let logits = self.logits(&mut tape, prep, enc.states, enc.cls)?;
        let p = tape.softmax_rows(logits)?;
        Ok(gat::to_array(tape.value(p)))
    }
}

/// Name and shape of every parameter [`Model::new`] creates.
pub fn expected_shapes(config: &Config, vocab: usize) -> BTreeMap<String, Vec<usize>> {
    let (de, d, f, c) = (config.encoder_dim, config.node_dim, config.attention_dim, CLASSES);
    let w = 2 * config.relative_window + 1;
    let mut out = BTreeMap::new();
    let mut put = |name: String, shape: &[usize]| {
        out.insert(name, shape.to_vec());
    };
    put("enc.tok".into(), &[vocab, de]);
    put("enc.seg".into(), &[2, de]);
    for l in 0..config.encoder_layers {
        let p = encoder::layer_prefix(l);
        for m in ["wq", "wk", "wv", "wo"] {
            put(format!("{p}{m}"), &[de, de]);
        }
        put(format!("{p}rel"), &[w]);
        put(format!("{p}ff1"), &[de, 2 * de]);
        put(format!("{p}ff1_b"), &[2 * de]);
        put(format!("{p}ff2"), &[2 * de, de]);
        put(format!("{p}ff2_b"), &[de]);
    }
    put("cls.W".into(), &[de, c]);
    put("cls.b".into(), &[c]);
    put(gcn::PROJECTION.into(), &[de, d]);
    for origin in [Origin::Claim, Origin::Evidence] {
        for j in 0..config.gcn_layers {
            put(gcn::weight_name(origin, j, config.tied_gcn), &[d, d]);
        }
    }
    put("gat.Wc".into(), &[f, d]);
    put("gat.We".into(), &[f, d]);
    put("align.Wa".into(), &[d, 4 * d]);
    put("head.W1".into(), &[d + de, 2 * d]);
    put("head.b1".into(), &[2 * d]);
    put("head.W2".into(), &[2 * d, c]);
    put("head.b2".into(), &[c]);
    out
}

pub fn encoder_shape(config: &Config, vocab: usize) -> EncoderShape {
    EncoderShape {
        vocab,
        dim: config.encoder_dim,
        layers: config.encoder_layers,
        window: config.relative_window,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{SrlArgument, SrlRole, SrlTuple};

    fn sentence(id: &str, text: &str, tuples: Vec<SrlTuple>) -> Sentence {
        Sentence::new(id, "doc", text.split(' ').map(String::from).collect(), tuples).unwrap()
    }

    fn tuple(args: &[(SrlRole, &str, usize, usize)]) -> SrlTuple {
        SrlTuple {
            tuple_id: 0,
            sentence_id: String::new(),
            arguments: args
                .iter()
                .map(|&(role, text, s, e)| SrlArgument {
                    role,
                    text: text.into(),
                    token_span: (s, e),
                })
                .collect(),
        }
    }

    fn set() -> EvidenceSet {
        use SrlRole::*;
        let claim = sentence("c", "Koral occurred in Vesk", vec![tuple(&[(Argument, "Koral", 0, 1), (Verb, "occurred", 1, 2), (Location, "in Vesk", 2, 4)])]);
        let e1 = sentence("e1", "Lune is located in Vesk", vec![tuple(&[(Argument, "Lune", 0, 1), (Verb, "located", 2, 3), (Location, "in Vesk", 3, 5)])]);
        let e2 = sentence("e2", "Koral occurred in Lune", vec![tuple(&[(Argument, "Koral", 0, 1), (Verb, "occurred", 1, 2), (Location, "in Lune", 2, 4)])]);
        EvidenceSet::new(claim, vec![e1, e2]).unwrap()
    }

    #[test]
    fn shapes_match_initialization() {
        for tied in [true, false] {
            let cfg = Config {
                tied_gcn: tied,
                ..Config::desk()
            };
            let m = Model::new(cfg.clone(), Vocab::build([&set()])).unwrap();
            let got: BTreeMap<String, Vec<usize>> = m
                .params
                .iter()
                .map(|p| (p.name.clone(), p.value.shape().to_vec()))
                .collect();
            assert_eq!(got, expected_shapes(&cfg, m.vocab.len()));
        }
    }

    #[test]
    fn vocab_specials_fixed() {
        let v = Vocab::build([&set()]);
        assert_eq!(&v.tokens()[..3], &SPECIALS);
        assert_eq!(v.id("KORAL"), v.id("koral"));
        assert_eq!(v.id("never-seen"), UNK);
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(serde_json::from_str::<Vocab>(&json).unwrap(), v);
    }

    #[test]
    fn layout_and_truncation() {
        let es = set();
        let v = Vocab::build([&es]);
        let order = vec!["e2".to_string(), "e1".to_string()];
        let full = SequenceLayout::build(&es, &order, &v, 64).unwrap();
        // 4 + SEP + 4 + SEP + 5 + SEP + CLS
        assert_eq!(full.len(), 17);
        assert_eq!(full.truncated_tokens, 0);
        assert_eq!(*full.input.token_ids.last().unwrap(), CLS);
        assert_eq!(full.input.token_ids[4], SEP);
        assert_eq!(full.positions("e1", (3, 5)), vec![13, 14]);

        let cut = SequenceLayout::build(&es, &order, &v, 10).unwrap();
        assert_eq!(cut.len(), 10);
        // claim untouched, e2 keeps 4 tokens, nothing of e1
        assert_eq!(&cut.input.token_ids[..4], &full.input.token_ids[..4]);
        assert_eq!(cut.truncated_tokens, 5);
        assert!(cut.positions("e1", (0, 1)).is_empty());

        assert!(SequenceLayout::build(&es, &order, &v, 5).is_err());
    }

    #[test]
    fn ablation_counts_graphs() {
        let es = set();
        let v = Vocab::build([&es]);
        let mut cfg = Config::desk();
        let m = Model::new(cfg.clone(), v.clone()).unwrap();
        assert_eq!(m.prepare(&es).unwrap().graphs_built, 2);
        cfg.reorder = false;
        cfg.use_graph = false;
        let m = Model::new(cfg, v).unwrap();
        let p = m.prepare(&es).unwrap();
        assert_eq!(p.graphs_built, 0);
        assert!(p.claim.is_none());
        assert_eq!(p.layout.sentence_order, ["e1", "e2"]);
    }

    #[test]
    fn probabilities_sum_to_one() {
        let es = set();
        let m = Model::new(Config::desk(), Vocab::build([&es])).unwrap();
        let p = m.probabilities(&m.prepare(&es).unwrap()).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn empty_evidence_still_predicts() {
        let es = EvidenceSet::new(set().claim, vec![]).unwrap();
        let m = Model::new(Config::desk(), Vocab::build([&es])).unwrap();
        let prep = m.prepare(&es).unwrap();
        assert_eq!(prep.evidence.as_ref().unwrap().positions, vec![Vec::<usize>::new()]);
        let p = m.probabilities(&prep).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
