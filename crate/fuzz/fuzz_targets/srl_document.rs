#![no_main]

use evigraph::data::{parse_srl_document, to_srl_json};
use evigraph::graph::{build_graph, Origin};
use evigraph::sort::order_evidence;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(es) = parse_srl_document(text) else { return };
    let again = parse_srl_document(&to_srl_json(&es)).expect("reparse");
    assert_eq!(again, es);
    let g = build_graph(&es, Origin::Evidence);
    assert!(g.edges.iter().all(|e| e.source < e.target && e.target < g.len()));
    let order = order_evidence(&es);
    assert_eq!(order.sentence_order.len(), es.evidence.len());
});
