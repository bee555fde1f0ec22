use std::collections::{BTreeSet, HashMap, VecDeque};

use proptest::prelude::*;

use evigraph::data::{
    load_dataset, parse_srl_document, to_srl_json, to_srl_json_pretty, tokenize, words, write_dataset,
    EvidenceRef, EvidenceSet, Instance, Label, Prediction, Sentence, SrlArgument, SrlRole, SrlTuple,
};
use evigraph::eval::evaluate;
use evigraph::gat;
use evigraph::gcn::{gcn_forward, normalize_edges};
use evigraph::graph::{build_graph, cross_tuple_link, words_link, EdgeKind, Node, NodeRole, Origin};
use evigraph::model::{Model, Vocab};
use evigraph::nn::encoder::{encode_values, EncoderInput};
use evigraph::nn::{relu, softmax, ParamStore, Tape, Tensor};
use evigraph::pipeline::{predict, rank_evidence, select_evidence, LexicalScorer};
use evigraph::sort::order_evidence;
use evigraph::Config;

const VOCAB: &[&str] = &["los", "angeles", "county", "riots", "in", "the", "usa", "King", "1992", "occurred", "."];

fn arb_tokens() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(prop::sample::select(VOCAB), 1..10).prop_map(|v| v.into_iter().map(String::from).collect())
}

fn arb_role() -> impl Strategy<Value = SrlRole> {
    prop::sample::select(vec![SrlRole::Argument, SrlRole::Location, SrlRole::Temporal, SrlRole::Other])
}

fn span(n: usize) -> impl Strategy<Value = (usize, usize)> {
    (0..n).prop_flat_map(move |s| (Just(s), s + 1..=n))
}

fn arb_sentence(id: String) -> impl Strategy<Value = Sentence> {
    arb_tokens().prop_flat_map(move |tokens| {
        let n = tokens.len();
        let tuple = (span(n), prop::collection::vec((arb_role(), span(n)), 0..4));
        let id = id.clone();
        (prop::collection::vec(tuple, 0..4), Just(tokens), prop::option::of(0usize..5)).prop_map(
            move |(tuples, tokens, source_index)| {
                let arg = |role, (s, e): (usize, usize)| SrlArgument {
                    role,
                    text: tokens[s..e].join(" "),
                    token_span: (s, e),
                };
                let tuples = tuples
                    .into_iter()
                    .enumerate()
                    .map(|(tuple_id, (verb, args))| SrlTuple {
                        tuple_id,
                        sentence_id: id.clone(),
                        arguments: std::iter::once(arg(SrlRole::Verb, verb))
                            .chain(args.into_iter().map(|(r, sp)| arg(r, sp)))
                            .collect(),
                    })
                    .collect();
                let mut s = Sentence::new(id.clone(), format!("doc_{id}"), tokens.clone(), tuples).unwrap();
                s.source_index = source_index;
                s
            },
        )
    })
}

fn arb_evidence_set() -> impl Strategy<Value = EvidenceSet> {
    (0usize..5).prop_flat_map(|n| {
        let evidence: Vec<_> = (0..n).map(|i| arb_sentence(format!("s{}", i + 1))).collect();
        (arb_sentence("c".into()), evidence).prop_map(|(claim, evidence)| {
            EvidenceSet::new(claim, evidence).unwrap().with_instance_id("x")
        })
    })
}

fn arb_ref() -> impl Strategy<Value = EvidenceRef> {
    (0usize..3, 0usize..3).prop_map(|(d, i)| EvidenceRef::new(format!("d{d}"), i))
}

fn arb_instance(id: usize) -> impl Strategy<Value = Instance> {
    (
        0usize..3,
        "[a-zA-Z ,.'\"é]{0,30}",
        prop::collection::vec(prop::collection::btree_set(arb_ref(), 1..3), 0..3),
    )
        .prop_map(move |(l, claim, groups)| {
            let label = Label::ALL[l];
            Instance {
                instance_id: format!("i{id:03}"),
                claim,
                label,
                gold_evidence_groups: if label == Label::Nei { vec![] } else { groups },
            }
        })
}

fn arb_instances() -> impl Strategy<Value = Vec<Instance>> {
    (0usize..12).prop_flat_map(|n| (0..n).map(arb_instance).collect::<Vec<_>>())
}

fn arb_scored() -> impl Strategy<Value = (Vec<Instance>, Vec<Prediction>)> {
    arb_instances().prop_flat_map(|gold| {
        let preds: Vec<_> = gold
            .iter()
            .map(|g| {
                let id = g.instance_id.clone();
                (0usize..3, prop::collection::vec(arb_ref(), 0..6)).prop_map(move |(l, ev)| Prediction {
                    instance_id: id.clone(),
                    predicted_label: Label::ALL[l],
                    probabilities: [1.0 / 3.0; 3],
                    predicted_evidence: ev,
                })
            })
            .collect();
        (Just(gold), preds)
    })
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Tensor> {
    prop::collection::vec(-3.0f64..3.0, rows * cols).prop_map(move |v| Tensor::new(vec![rows, cols], v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn srl_round_trip(es in arb_evidence_set()) {
        prop_assert_eq!(&parse_srl_document(&to_srl_json(&es)).unwrap(), &es);
        prop_assert_eq!(&parse_srl_document(&to_srl_json_pretty(&es)).unwrap(), &es);
        let again = to_srl_json(&parse_srl_document(&to_srl_json(&es)).unwrap());
        prop_assert_eq!(again, to_srl_json(&es));
    }

    #[test]
    fn srl_parser_never_panics(text in "\\PC{0,200}") {
        let _ = parse_srl_document(&text);
    }

    #[test]
    fn srl_parser_survives_truncation(es in arb_evidence_set(), cut in 0.0f64..1.0) {
        let json = to_srl_json(&es);
        let mut at = (json.len() as f64 * cut) as usize;
        while !json.is_char_boundary(at) {
            at -= 1;
        }
        let _ = parse_srl_document(&json[..at]);
    }

    #[test]
    fn tokenize_idempotent(text in "\\PC{0,80}") {
        let once: Vec<String> = tokenize(&text).into_iter().map(|t| t.text).collect();
        let twice: Vec<String> = tokenize(&once.join(" ")).into_iter().map(|t| t.text).collect();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn dataset_round_trip(xs in arb_instances()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        write_dataset(&path, &xs).unwrap();
        prop_assert_eq!(load_dataset(&path).unwrap(), xs);
    }

    #[test]
    fn graph_matches_brute_force(es in arb_evidence_set()) {
        let g = build_graph(&es, Origin::Evidence);
        prop_assert_eq!(&g, &build_graph(&es, Origin::Evidence));
        let mut want = BTreeSet::new();
        for i in 0..g.nodes.len() {
            for j in i + 1..g.nodes.len() {
                let (a, b) = (&g.nodes[i], &g.nodes[j]);
                let same = a.sentence_id == b.sentence_id && a.tuple_id == b.tuple_id;
                if same {
                    want.insert((i, j, EdgeKind::IntraTuple));
                } else if brute_link(&a.words(), &b.words()) {
                    want.insert((i, j, EdgeKind::CrossTuple));
                }
                prop_assert_eq!(cross_tuple_link(a, b), cross_tuple_link(b, a));
            }
        }
        let got: BTreeSet<_> = g.edges.iter().map(|e| (e.source, e.target, e.kind)).collect();
        prop_assert_eq!(got, want);
        let kept: usize = es
            .evidence
            .iter()
            .flat_map(|s| &s.tuples)
            .flat_map(|t| &t.arguments)
            .filter(|a| a.role != SrlRole::Other)
            .count();
        prop_assert_eq!(g.nodes.len(), kept);
        for (i, n) in g.nodes.iter().enumerate() {
            prop_assert_eq!(n.node_id, i);
        }
    }

    #[test]
    fn words_link_symmetric(a in prop::collection::vec(prop::sample::select(VOCAB), 0..6),
                            b in prop::collection::vec(prop::sample::select(VOCAB), 0..6)) {
        let a: Vec<String> = a.iter().map(|s| s.to_lowercase()).collect();
        let b: Vec<String> = b.iter().map(|s| s.to_lowercase()).collect();
        prop_assert_eq!(words_link(&a, &b), words_link(&b, &a));
    }

    #[test]
    fn reorder_is_permutation(es in arb_evidence_set()) {
        let order = order_evidence(&es);
        let mut got = order.sentence_order.clone();
        got.sort();
        let mut want: Vec<String> = es.evidence.iter().map(|s| s.sentence_id.clone()).collect();
        want.sort();
        prop_assert_eq!(got, want);
        prop_assert_eq!(order_evidence(&es).node_order, order.node_order);
    }

    #[test]
    fn softmax_sums_and_shifts(x in matrix(3, 5), c in -50.0f64..50.0) {
        let s = softmax(&x, 1).unwrap();
        let shifted = softmax(&x.map(|v| v + c), 1).unwrap();
        for i in 0..3 {
            prop_assert!((s.row(i).iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
        prop_assert!(s.max_abs_diff(&shifted) <= 1e-12);
    }

    #[test]
    fn relu_elementwise(x in matrix(2, 6)) {
        let r = relu(&x);
        for (a, b) in x.data().iter().zip(r.data()) {
            prop_assert_eq!(*b, if *a >= 0.0 { *a } else { 0.0 });
        }
    }

    #[test]
    fn gcn_locality(n in 2usize..10, seed in 0u64..1000, layers in 1usize..4) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let edges: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|_| rng.gen_bool(0.25))
            .collect();
        let d = 3;
        let mut h = Tensor::new(vec![n, d], (0..n * d).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let weights: Vec<Tensor> = (0..layers)
            .map(|_| Tensor::new(vec![d, d], (0..d * d).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap())
            .collect();
        let adj = normalize_edges(n, edges.clone());
        let before = gcn_forward(&h, &adj, &weights).unwrap();
        let dist = distances(n, &edges, 0);
        let far: Vec<usize> = (0..n).filter(|&v| dist[v].map_or(true, |k| k > layers)).collect();
        for &v in &far {
            for j in 0..d {
                h.data_mut()[v * d + j] += 5.0;
            }
        }
        let after = gcn_forward(&h, &adj, &weights).unwrap();
        prop_assert_eq!(before.row(0), after.row(0));
    }

    #[test]
    fn attention_properties(nc in 1usize..5, ne in 1usize..6, seed in 0u64..1000, c in -20.0f64..20.0) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let (d, f, de) = (4, 3, 5);
        let mut store = ParamStore::new();
        gat::init_params(&mut store, d, f, de, 0.5, &mut rng);
        store.get_mut("head.b1").unwrap().data_mut().fill(0.1);
        let hc = random(&mut rng, nc, d);
        let he = random(&mut rng, ne, d);
        let cls = random(&mut rng, 1, de);
        let scores = gat::attention_scores(&hc, &he, store.get("gat.Wc").unwrap(), store.get("gat.We").unwrap()).unwrap();
        let alpha = gat::normalize_attention(&scores).unwrap();
        for i in 0..nc {
            prop_assert!((alpha.row(i).iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
        let shifted = gat::normalize_attention(&scores.map(|v| v + c)).unwrap();
        prop_assert!(alpha.max_abs_diff(&shifted) <= 1e-10);
        let logits = |hc: &Tensor| {
            let mut t = Tape::new();
            let (a, b, k) = (t.constant(hc.clone()), t.constant(he.clone()), t.constant(cls.clone()));
            let out = gat::forward_var(&mut t, &store, a, b, k).unwrap();
            t.value(out.logits).clone()
        };
        let rev: Vec<f64> = (0..nc).rev().flat_map(|i| hc.row(i).to_vec()).collect();
        let hc_rev = Tensor::new(vec![nc, d], rev).unwrap();
        prop_assert!(logits(&hc).max_abs_diff(&logits(&hc_rev)) <= 1e-10);
    }

    #[test]
    fn evaluate_properties((gold, preds) in arb_scored(), rot in 0usize..12) {
        let report = evaluate(&preds, &gold, 5).unwrap();
        prop_assert!(report.fever_score <= report.label_accuracy);
        for v in [report.label_accuracy, report.fever_score, report.evidence_precision, report.evidence_recall, report.evidence_f1] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        let mut g2 = gold.clone();
        let mut p2 = preds.clone();
        if !g2.is_empty() {
            let k = rot % g2.len();
            g2.rotate_left(k);
            p2.reverse();
        }
        prop_assert_eq!(evaluate(&p2, &g2, 5).unwrap(), report);
    }

    #[test]
    fn all_nei_perfect(gold in arb_instances()) {
        let gold: Vec<Instance> = gold.into_iter().map(|mut g| {
            g.label = Label::Nei;
            g.gold_evidence_groups.clear();
            g
        }).collect();
        prop_assume!(!gold.is_empty());
        let preds: Vec<Prediction> = gold.iter().map(|g| Prediction {
            instance_id: g.instance_id.clone(),
            predicted_label: Label::Nei,
            probabilities: [0.0, 0.0, 1.0],
            predicted_evidence: vec![],
        }).collect();
        let r = evaluate(&preds, &gold, 5).unwrap();
        prop_assert_eq!((r.fever_score, r.label_accuracy), (1.0, 1.0));
    }

    #[test]
    fn selection_is_prefix(claim in "[a-d ]{0,12}", sentences in prop::collection::vec("[a-d ]{0,12}", 0..8), k in 0usize..10) {
        let doc = evigraph::data::Document { doc_id: "d".into(), title: "d".into(), sentences };
        let full = rank_evidence(&claim, &[&doc], &LexicalScorer);
        let top = select_evidence(&claim, &[&doc], k, &LexicalScorer);
        prop_assert_eq!(&top[..], &full[..k.min(full.len())]);
        prop_assert!(full.windows(2).all(|w| w[0].score >= w[1].score));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn predictions_are_distributions(es in arb_evidence_set(), use_graph: bool, reorder: bool) {
        let cfg = Config { encoder_dim: 8, node_dim: 6, attention_dim: 5, use_graph, reorder, ..Config::desk() };
        let model = Model::new(cfg, Vocab::build(std::slice::from_ref(&es))).unwrap();
        let p = predict(&model, &es, 5).unwrap();
        prop_assert!((p.probabilities.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!(p.probabilities.iter().all(|&v| v > 0.0));
        prop_assert_eq!(predict(&model, &es, 5).unwrap(), p);
    }

    #[test]
    fn encoder_is_pure(ids in prop::collection::vec(0usize..6, 1..12)) {
        let cfg = Config { encoder_dim: 8, ..Config::desk() };
        let model = Model::new(cfg, Vocab::from_words(["a", "b", "c"].map(String::from))).unwrap();
        let input = EncoderInput { segments: vec![0; ids.len()], token_ids: ids };
        let a = encode_values(&model.params, model.encoder_shape(), &input, true).unwrap();
        let b = encode_values(&model.params, model.encoder_shape(), &input, true).unwrap();
        prop_assert_eq!(a.states, b.states);
    }
}

fn brute_link(a: &[String], b: &[String]) -> bool {
    if a.is_empty() || b.is_empty() {
        return false;
    }
    let contains = |h: &[String], n: &[String]| (0..=h.len().saturating_sub(n.len())).any(|i| h.len() >= n.len() && h[i..i + n.len()] == *n);
    let mut counts: HashMap<&String, i64> = HashMap::new();
    for w in a {
        *counts.entry(w).or_default() += 1;
    }
    let mut common = 0;
    for w in b {
        let c = counts.entry(w).or_default();
        if *c > 0 {
            *c -= 1;
            common += 1;
        }
    }
    contains(a, b) || contains(b, a) || 2 * common > a.len().min(b.len())
}

fn distances(n: usize, edges: &[(usize, usize)], from: usize) -> Vec<Option<usize>> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut dist = vec![None; n];
    dist[from] = Some(0);
    let mut queue = VecDeque::from([from]);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if dist[v].is_none() {
                dist[v] = Some(dist[u].unwrap() + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

fn random(rng: &mut rand_chacha::ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    use rand::Rng;
    Tensor::new(vec![rows, cols], (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

#[test]
fn fixture_words_are_normalized() {
    let w: Vec<String> = words("Los Angeles County,").collect();
    assert_eq!(w, ["los", "angeles", "county"]);
    let n = Node {
        node_id: 0,
        sentence_id: "s".into(),
        tuple_id: 0,
        role: NodeRole::Location,
        text: "in Los Angeles County".into(),
        token_span: (0, 4),
        synthetic: false,
    };
    assert_eq!(n.words(), ["in", "los", "angeles", "county"]);
}
